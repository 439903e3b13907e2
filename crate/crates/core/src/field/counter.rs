//! Per-thread count of field multiplications, used to check operation
//! counts against the cost model. Kernels record in bulk.

use std::cell::Cell;

thread_local! {
    static MULS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn record(n: u64) {
    MULS.with(|c| c.set(c.get() + n));
}

/// Multiplications performed on this thread since the last reset.
pub fn mul_count() -> u64 {
    MULS.with(Cell::get)
}

pub fn reset_mul_count() {
    MULS.with(|c| c.set(0));
}

/// Runs `f` and returns its result with the number of multiplications it
/// performed on the current thread.
pub fn count_muls<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = mul_count();
    let out = f();
    (out, mul_count() - before)
}
