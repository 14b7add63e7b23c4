#![allow(dead_code)]

use kotani_lab::ergodic::ErgodicModel;
use kotani_lab::linalg::RMat;
use kotani_lab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn free() -> ErgodicModel {
    ErgodicModel::free_scalar()
}

pub fn periodic2() -> ErgodicModel {
    let m = |a: [f64; 4]| RMat::from_row_slice(2, 2, &a);
    ErgodicModel::periodic(vec![
        (m([1.0, 0.2, 0.2, 0.8]), m([0.5, 0.1, 0.1, -0.5])),
        (m([1.2, -0.1, -0.1, 1.0]), m([-0.3, 0.0, 0.0, 0.4])),
    ])
    .unwrap()
}

pub fn iid2() -> ErgodicModel {
    ErgodicModel::iid(2, 7, 1.0, 1.0, 0.2).unwrap()
}

/// The three reference models: free, periodic `l = 2`, i.i.d. `l = 2`.
pub fn suite() -> Vec<(&'static str, ErgodicModel)> {
    vec![("free", free()), ("periodic", periodic2()), ("iid", iid2())]
}

pub fn random_z(seed: u64, count: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| C64::new(6.0 * rng.random::<f64>() - 3.0, 3.0 * rng.random::<f64>() - 1.5))
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
