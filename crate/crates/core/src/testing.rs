//! Helpers for statistical and exhaustive tests of the randomized algorithms.

use rand::RngCore;

/// 0.999-quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_4DF_999: f64 = 18.467;

/// Pearson statistic of `counts` against the uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// A randomness source that replays a fixed tape of words, for enumerating
/// every outcome of a randomized algorithm.
///
/// Panics when the tape runs out, so an enumeration that under-counts the
/// draws an algorithm makes fails loudly.
#[derive(Debug, Clone)]
pub struct TapeRng {
    tape: Vec<u64>,
    pos: usize,
}

impl TapeRng {
    pub fn new(tape: Vec<u64>) -> Self {
        Self { tape, pos: 0 }
    }

    /// Words consumed so far.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Every tape of `len` words with entries in `0..base`.
    pub fn enumerate(base: u64, len: usize) -> impl Iterator<Item = TapeRng> {
        let total = base.pow(len as u32);
        (0..total).map(move |mut n| {
            let mut tape = Vec::with_capacity(len);
            for _ in 0..len {
                tape.push(n % base);
                n /= base;
            }
            TapeRng::new(tape)
        })
    }
}

impl RngCore for TapeRng {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }

    fn next_u64(&mut self) -> u64 {
        let w = *self.tape.get(self.pos).expect("randomness tape exhausted");
        self.pos += 1;
        w
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}
