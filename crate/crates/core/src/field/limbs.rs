//! Raw 256-bit limb arithmetic. Limbs are little-endian `u64` words.

use num_bigint::BigUint;

pub(crate) type Limbs = [u64; 4];

pub(crate) const ZERO: Limbs = [0; 4];

#[inline(always)]
fn mac(acc: u64, x: u64, y: u64, carry: u64) -> (u64, u64) {
    let t = (acc as u128) + (x as u128) * (y as u128) + (carry as u128);
    (t as u64, (t >> 64) as u64)
}

#[inline(always)]
fn adc(x: u64, y: u64, carry: bool) -> (u64, bool) {
    let (s, c1) = x.overflowing_add(y);
    let (s, c2) = s.overflowing_add(carry as u64);
    (s, c1 | c2)
}

#[inline(always)]
fn sbb(x: u64, y: u64, borrow: bool) -> (u64, bool) {
    let (d, b1) = x.overflowing_sub(y);
    let (d, b2) = d.overflowing_sub(borrow as u64);
    (d, b1 | b2)
}

#[inline(always)]
pub(crate) fn add(a: &Limbs, b: &Limbs) -> (Limbs, bool) {
    let mut out = ZERO;
    let mut carry = false;
    for i in 0..4 {
        let (s, c) = adc(a[i], b[i], carry);
        out[i] = s;
        carry = c;
    }
    (out, carry)
}

#[inline(always)]
pub(crate) fn sub(a: &Limbs, b: &Limbs) -> (Limbs, bool) {
    let mut out = ZERO;
    let mut borrow = false;
    for i in 0..4 {
        let (d, br) = sbb(a[i], b[i], borrow);
        out[i] = d;
        borrow = br;
    }
    (out, borrow)
}

#[inline(always)]
pub(crate) fn geq(a: &Limbs, b: &Limbs) -> bool {
    for i in (0..4).rev() {
        if a[i] != b[i] {
            return a[i] > b[i];
        }
    }
    true
}

pub(crate) fn is_zero(a: &Limbs) -> bool {
    a.iter().all(|&w| w == 0)
}

pub(crate) fn bit_len(a: &Limbs) -> u32 {
    for i in (0..4).rev() {
        if a[i] != 0 {
            return 64 * i as u32 + (64 - a[i].leading_zeros());
        }
    }
    0
}

/// `(a + b) mod q` for `a, b < q`.
#[inline(always)]
pub(crate) fn add_mod(a: &Limbs, b: &Limbs, q: &Limbs) -> Limbs {
    let (s, carry) = add(a, b);
    if carry || geq(&s, q) {
        sub(&s, q).0
    } else {
        s
    }
}

/// `(a - b) mod q` for `a, b < q`.
#[inline(always)]
pub(crate) fn sub_mod(a: &Limbs, b: &Limbs, q: &Limbs) -> Limbs {
    let (d, borrow) = sub(a, b);
    if borrow {
        add(&d, q).0
    } else {
        d
    }
}

/// Montgomery product `a * b * 2^-256 mod q` (CIOS). Valid for any odd
/// `q < 2^256`, including moduli with the top bit set.
#[inline(always)]
pub(crate) fn mont_mul(a: &Limbs, b: &Limbs, q: &Limbs, inv: u64) -> Limbs {
    let mut t = [0u64; 6];
    for &bi in b {
        let mut c = 0;
        for j in 0..4 {
            let (lo, hi) = mac(t[j], a[j], bi, c);
            t[j] = lo;
            c = hi;
        }
        let (s, c2) = t[4].overflowing_add(c);
        t[4] = s;
        t[5] = c2 as u64;

        let m = t[0].wrapping_mul(inv);
        let (_, mut c) = mac(t[0], m, q[0], 0);
        for j in 1..4 {
            let (lo, hi) = mac(t[j], m, q[j], c);
            t[j - 1] = lo;
            c = hi;
        }
        let (s, c2) = t[4].overflowing_add(c);
        t[3] = s;
        t[4] = t[5] + c2 as u64;
    }
    let r = [t[0], t[1], t[2], t[3]];
    if t[4] != 0 || geq(&r, q) {
        sub(&r, q).0
    } else {
        r
    }
}

/// `-q^-1 mod 2^64` for odd `q`.
pub(crate) fn mont_inv(q0: u64) -> u64 {
    let mut x: u64 = 1;
    for _ in 0..6 {
        x = x.wrapping_mul(2u64.wrapping_sub(q0.wrapping_mul(x)));
    }
    x.wrapping_neg()
}

pub(crate) fn to_biguint(a: &Limbs) -> BigUint {
    BigUint::from_slice(&[
        a[0] as u32,
        (a[0] >> 32) as u32,
        a[1] as u32,
        (a[1] >> 32) as u32,
        a[2] as u32,
        (a[2] >> 32) as u32,
        a[3] as u32,
        (a[3] >> 32) as u32,
    ])
}

/// Returns `None` if `n` does not fit in 256 bits.
pub(crate) fn from_biguint(n: &BigUint) -> Option<Limbs> {
    let digits = n.to_u64_digits();
    if digits.len() > 4 {
        return None;
    }
    let mut out = ZERO;
    out[..digits.len()].copy_from_slice(&digits);
    Some(out)
}

pub(crate) fn to_be_bytes(a: &Limbs) -> [u8; 32] {
    let mut out = [0u8; 32];
    for i in 0..4 {
        out[(3 - i) * 8..(4 - i) * 8].copy_from_slice(&a[i].to_be_bytes());
    }
    out
}

pub(crate) fn from_be_bytes(bytes: &[u8; 32]) -> Limbs {
    let mut out = ZERO;
    for i in 0..4 {
        let mut w = [0u8; 8];
        w.copy_from_slice(&bytes[(3 - i) * 8..(4 - i) * 8]);
        out[i] = u64::from_be_bytes(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(a: &Limbs) -> BigUint {
        to_biguint(a)
    }

    // 2^256 - 189, the largest 256-bit prime.
    const Q: Limbs = [
        0xFFFF_FFFF_FFFF_FF43,
        u64::MAX,
        u64::MAX,
        u64::MAX,
    ];

    fn reduce(a: Limbs) -> Limbs {
        from_biguint(&(big(&a) % big(&Q))).unwrap()
    }

    proptest! {
        #[test]
        fn mont_mul_matches_bigint(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (a, b) = (reduce(a), reduce(b));
            let inv = mont_inv(Q[0]);
            let r = BigUint::from(1u8) << 256usize;
            let got = big(&mont_mul(&a, &b, &Q, inv));
            // got * R == a * b (mod q)
            prop_assert_eq!((got * &r) % big(&Q), (big(&a) * big(&b)) % big(&Q));
        }

        #[test]
        fn add_sub_match_bigint(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (a, b) = (reduce(a), reduce(b));
            let q = big(&Q);
            prop_assert_eq!(big(&add_mod(&a, &b, &Q)), (big(&a) + big(&b)) % &q);
            prop_assert_eq!(big(&sub_mod(&a, &b, &Q)), (big(&a) + &q - big(&b)) % &q);
        }

        #[test]
        fn be_bytes_roundtrip(a in any::<[u64; 4]>()) {
            prop_assert_eq!(from_be_bytes(&to_be_bytes(&a)), a);
        }
    }

    #[test]
    fn bit_len_edges() {
        assert_eq!(bit_len(&ZERO), 0);
        assert_eq!(bit_len(&[1, 0, 0, 0]), 1);
        assert_eq!(bit_len(&[0, 0, 0, 1 << 63]), 256);
    }
}
