//! wasm-bindgen exports backing `www/index.html`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use kotani_lab::cocycle::{lyapunov_spectrum, LyapunovOptions};
use kotani_lab::ergodic::ErgodicModel;
use kotani_lab::spectral::ids_empirical;
use kotani_lab::weyl::{weyl_m, HalfLine, DEFAULT_DEPTH};
use kotani_lab::C64;
use wasm_bindgen::prelude::*;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn model(kind: &str, l: usize, strength: f64, seed: u64) -> Result<ErgodicModel, String> {
    let m = match kind {
        "free" => ErgodicModel::free(l, 1.0, 0.0),
        "iid" => ErgodicModel::iid(l, seed, strength, 1.0, 0.2),
        "mathieu" => ErgodicModel::almost_mathieu(l, GOLDEN, 0.0, strength),
        other => return Err(format!("unknown model kind {other:?}")),
    };
    m.map_err(|e| e.to_string())
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn gamma_curve(
    kind: &str,
    l: usize,
    strength: f64,
    seed: u64,
    lo: f64,
    hi: f64,
    count: usize,
    y: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    let m = model(kind, l, strength, seed)?;
    let opts = LyapunovOptions::with_steps(steps.max(1000));
    grid(lo, hi, count)
        .into_iter()
        .map(|x| {
            lyapunov_spectrum(&m, C64::new(x, y), &opts)
                .map(|s| s.gamma())
                .map_err(|e| e.to_string())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn ids_points(
    kind: &str,
    l: usize,
    strength: f64,
    seed: u64,
    sites: usize,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<f64>, String> {
    let m = model(kind, l, strength, seed)?;
    let ids = ids_empirical(&m, sites).map_err(|e| e.to_string())?;
    Ok(ids.curve(lo, hi, count).into_iter().map(|(_, k)| k).collect())
}

/// `[depth, residual, im_rank, min eig Im M, Re M₁₁, Im M₁₁]` for each half-line.
pub fn weyl_summary(kind: &str, l: usize, strength: f64, seed: u64, x: f64, y: f64) -> Result<Vec<f64>, String> {
    if !(y > 0.0) {
        return Err("Im z must be positive".into());
    }
    let m = model(kind, l, strength, seed)?;
    let mut out = Vec::with_capacity(12);
    for half in [HalfLine::Plus, HalfLine::Minus] {
        let w = weyl_m(&m, C64::new(x, y), DEFAULT_DEPTH, half).map_err(|e| e.to_string())?;
        out.extend([
            w.depth as f64,
            w.residual,
            w.im_rank() as f64,
            w.im_min_eigenvalue(),
            w.m[(0, 0)].re,
            w.m[(0, 0)].im,
        ]);
    }
    Ok(out)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_curve(
    kind: &str,
    l: usize,
    strength: f64,
    seed: u32,
    lo: f64,
    hi: f64,
    count: usize,
    y: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    gamma_curve(kind, l, strength, seed as u64, lo, hi, count, y, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn ids_curve(
    kind: &str,
    l: usize,
    strength: f64,
    seed: u32,
    sites: usize,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<f64>, JsError> {
    ids_points(kind, l, strength, seed as u64, sites, lo, hi, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn weyl_point(kind: &str, l: usize, strength: f64, seed: u32, x: f64, y: f64) -> Result<Vec<f64>, JsError> {
    weyl_summary(kind, l, strength, seed as u64, x, y).map_err(|e| JsError::new(&e))
}
