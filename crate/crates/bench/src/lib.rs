//! Fixtures shared by the benchmarks.

use msvc_core::field::{random_matrix, random_vector};
use msvc_core::protocol::{compute_all, FunctionKeyMaterial, InputKeyMaterial, PublicKey, ServerOutput};
use msvc_core::{key_gen, prob_gen, CoveringScheme, FieldMatrix, FieldModulus, FieldVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Square sizes used by the protocol benchmarks.
pub const SIZES: [usize; 3] = [64, 256, 1024];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random instance with keys, one shared input and honest results.
pub struct Instance {
    pub f: FieldMatrix,
    pub x: FieldVector,
    pub keys: FunctionKeyMaterial,
    pub input: InputKeyMaterial,
    pub outputs: Vec<ServerOutput>,
}

impl Instance {
    pub fn new(m: usize, d: usize, scheme: &CoveringScheme, q: &FieldModulus, seed: u64) -> Self {
        let mut rng = rng(seed);
        let f = random_matrix(m, d, q, &mut rng).expect("positive size");
        let x = random_vector(d, q, &mut rng).expect("positive size");
        let keys = key_gen(&f, scheme, &mut rng).expect("valid scheme");
        let input = prob_gen(&PublicKey, &x, scheme, &mut rng).expect("valid scheme");
        let outputs = compute_all(&keys.rho, &input.sigma, scheme).expect("matching shares");
        Self {
            f,
            x,
            keys,
            input,
            outputs,
        }
    }
}

#[cfg(test)]
mod tests {
    use msvc_core::field::mat_vec_mul;
    use msvc_core::{pi_s, verify, Verified};

    use super::*;

    #[test]
    fn instance_verifies() {
        let q = FieldModulus::from_u64(1009).unwrap();
        let scheme = pi_s();
        let inst = Instance::new(5, 3, &scheme, &q, 1);
        let y = verify(&inst.keys.vk, &inst.input.vk, &inst.outputs, &scheme).unwrap();
        assert_eq!(y, Verified::Accepted(mat_vec_mul(&inst.f, &inst.x).unwrap()));
    }
}
