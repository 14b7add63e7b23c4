//! Integrated density of states, Thouless formula, Kotani identities and the
//! absolutely-continuous multiplicity scan.

mod ac_scan;
mod derivative;
mod ids;
mod kotani;
mod thouless;

pub use ac_scan::{
    ac_scan, limit_rank, AcPoint, AcScanReport, HalfLineTrace, DEFAULT_Y_LADDER, TRACE_GROWTH, ZERO_TOL_FLOOR,
};
pub use derivative::{
    gamma_normal_derivative, normal_derivative_with_ids, solution_norm_monotonicity_check, NormalDerivativeReport,
    SolutionNormCheck, TAIL_RATIO_MAX,
};
pub use ids::{ids_empirical, IdsHistogram, MAX_IDS_DIM};
pub use kotani::{
    kotani_from_spectrum, kotani_mean_identity, kotani_mean_identity_with, KotaniReport, PartialSumCheck, NUMERIC_FLOOR,
};
pub use thouless::{thouless_check, thouless_from_parts, ThoulessReport};

/// Mean and block standard error of `values` split into `blocks` contiguous runs.
pub(crate) fn block_mean(values: &[f64], blocks: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = blocks.clamp(1, n);
    if b < 2 {
        return (mean, f64::INFINITY);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let run = &values[i * n / b..(i + 1) * n / b];
            run.iter().sum::<f64>() / run.len() as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// `f(0), …, f(n-1)` in index order, concurrently when the `parallel` feature is on.
pub fn map_grid<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
