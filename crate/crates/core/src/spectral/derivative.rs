use super::ids::{ids_empirical, IdsHistogram};
use crate::cocycle::{lyapunov_spectrum, LyapunovOptions};
use crate::ergodic::SiteSource;
use crate::weyl::{jost_sequence, jost_sequence_real};
use crate::{LabError, Result, C64};

/// Eigenvalue distance below which `Σ 1/|x - λ_k|` is reported as divergent.
const BOREL_CLUSTER: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalDerivativeReport {
    pub x: f64,
    pub gamma_real: f64,
    pub gamma_real_se: f64,
    pub y_ladder: Vec<f64>,
    /// `(γ(x+iy) - γ(x))/y` from the cocycle.
    pub quotients: Vec<f64>,
    pub quotient_se: Vec<f64>,
    /// Linear extrapolation of the last two quotients to `y = 0`.
    pub limit: f64,
    /// The same quotients from the Thouless right-hand side on the IDS.
    pub ids_quotients: Vec<f64>,
    pub ids_limit: f64,
    /// `Im ∫ dk(s)/(s - x - i·y_min)`, which tends to `π·dk/dx` inside the spectrum.
    pub borel_im: f64,
    /// `∫ dk(s)/|x - s|`; infinite when `x` hits an eigenvalue cluster.
    pub borel_abs: f64,
    pub diagnostics: Vec<String>,
}

fn extrapolate(y: &[f64], q: &[f64]) -> f64 {
    match y.len() {
        0 => f64::NAN,
        1 => q[0],
        n => {
            let (y1, y2, q1, q2) = (y[n - 2], y[n - 1], q[n - 2], q[n - 1]);
            (y1 * q2 - y2 * q1) / (y1 - y2)
        }
    }
}

/// Difference quotients of `γ` in the normal direction at real `x`.
pub fn gamma_normal_derivative<S: SiteSource + ?Sized>(
    model: &S,
    x: f64,
    y_ladder: &[f64],
    steps: usize,
    ids_sites: usize,
) -> Result<NormalDerivativeReport> {
    if y_ladder.is_empty() || y_ladder.iter().any(|&y| !(y > 0.0)) || y_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidArgument(
            "y ladder must be nonempty, positive and strictly decreasing".into(),
        ));
    }
    let ids = ids_empirical(model, ids_sites)?;
    normal_derivative_with_ids(model, x, y_ladder, steps, &ids)
}

pub fn normal_derivative_with_ids<S: SiteSource + ?Sized>(
    model: &S,
    x: f64,
    y_ladder: &[f64],
    steps: usize,
    ids: &IdsHistogram,
) -> Result<NormalDerivativeReport> {
    let l = model.block_size();
    let opts = LyapunovOptions::with_steps(steps);
    let base = lyapunov_spectrum(model, C64::from(x), &opts)?;
    let gamma_real = base.gamma();
    let gamma_real_se = base.partial_sum_se(l);
    let base_potential = ids.log_potential(C64::from(x));

    let mut quotients = Vec::with_capacity(y_ladder.len());
    let mut quotient_se = Vec::with_capacity(y_ladder.len());
    let mut ids_quotients = Vec::with_capacity(y_ladder.len());
    let mut diagnostics = Vec::new();
    for &y in y_ladder {
        let z = C64::new(x, y);
        let s = lyapunov_spectrum(model, z, &opts)?;
        quotients.push((s.gamma() - gamma_real) / y);
        quotient_se.push((s.partial_sum_se(l).powi(2) + gamma_real_se.powi(2)).sqrt() / y);
        ids_quotients.push((ids.log_potential(z) - base_potential) / y);
        if s.gamma() + 3.0 * s.partial_sum_se(l) < gamma_real {
            diagnostics.push(format!("gamma decreased at y = {y}"));
        }
    }
    let nearest = ids
        .eigenvalues
        .iter()
        .map(|&e| (e - x).abs())
        .fold(f64::INFINITY, f64::min);
    let borel_abs = if nearest < BOREL_CLUSTER {
        diagnostics.push(format!("x within {nearest:e} of an eigenvalue; surrogate diverges"));
        f64::INFINITY
    } else {
        ids.eigenvalues.iter().map(|&e| 1.0 / (x - e).abs()).sum::<f64>() / ids.sites as f64
    };
    let y_min = *y_ladder.last().expect("nonempty ladder");
    Ok(NormalDerivativeReport {
        x,
        gamma_real,
        gamma_real_se,
        y_ladder: y_ladder.to_vec(),
        limit: extrapolate(y_ladder, &quotients),
        ids_limit: extrapolate(y_ladder, &ids_quotients),
        quotients,
        quotient_se,
        ids_quotients,
        borel_im: ids.borel_transform(C64::new(x, y_min)).im,
        borel_abs,
        diagnostics,
    })
}

/// Squared norms `Σ_{m=1}^{n_max} ‖f_m^{(k)}‖²` of a Jost column at `x + iy` and at `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionNormCheck {
    pub x: f64,
    pub y: f64,
    pub column: usize,
    pub n_max: usize,
    pub norm_complex: f64,
    /// `NaN` when the real-energy column could not be built.
    pub norm_real: f64,
    /// `‖f_{n_max}(x)‖² / max_m ‖f_m(x)‖²`.
    pub tail_ratio: f64,
    /// Whether the real-energy column passed the tail test; the comparison is vacuous otherwise.
    pub summable: bool,
    pub tolerance: f64,
    pub precondition: Option<String>,
}

impl SolutionNormCheck {
    pub fn holds(&self) -> bool {
        self.summable && self.norm_complex <= self.norm_real + self.tolerance
    }
}

/// Summability threshold for the real-energy tail ratio.
pub const TAIL_RATIO_MAX: f64 = 1e-12;

pub fn solution_norm_monotonicity_check<S: SiteSource + ?Sized>(
    model: &S,
    x: f64,
    y: f64,
    column: usize,
    n_max: usize,
) -> Result<SolutionNormCheck> {
    if !(y > 0.0) {
        return Err(LabError::InvalidArgument("y must be positive".into()));
    }
    if column >= model.block_size() || n_max < 2 {
        return Err(LabError::InvalidArgument("column out of range or n_max < 2".into()));
    }
    let norm_complex = jost_sequence(model, C64::new(x, y), n_max)?.column_norm_sqr(column);
    let mut out = SolutionNormCheck {
        x,
        y,
        column,
        n_max,
        norm_complex,
        norm_real: f64::NAN,
        tail_ratio: f64::NAN,
        summable: false,
        tolerance: 0.0,
        precondition: None,
    };
    let real = match jost_sequence_real(model, x, n_max) {
        Ok(j) => j,
        Err(LabError::Convergence { .. }) | Err(LabError::Singular(_)) => {
            out.precondition = Some(format!("no decaying solution at x = {x}"));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let sq: Vec<f64> = (1..=n_max).map(|m| real.at(m).column(column).norm_squared()).collect();
    let peak = sq.iter().copied().fold(0.0, f64::max);
    out.norm_real = sq.iter().sum();
    out.tail_ratio = sq[n_max - 1] / peak;
    out.summable = out.tail_ratio < TAIL_RATIO_MAX;
    out.tolerance = 1e-9 * out.norm_real + out.tail_ratio * peak * n_max as f64;
    if !out.summable {
        out.precondition = Some(format!(
            "column {column} at x = {x} is not square-summable (tail ratio {:e})",
            out.tail_ratio
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::ErgodicModel;

    #[test]
    fn extrapolation() {
        assert_eq!(extrapolate(&[0.2, 0.1], &[0.2, 0.1]), 0.0);
        assert_eq!(extrapolate(&[0.1], &[0.4]), 0.4);
    }

    #[test]
    fn free_gap_norms() {
        let q = (3.0 - 5f64.sqrt()) / 2.0;
        let c = solution_norm_monotonicity_check(&ErgodicModel::free_scalar(), 3.0, 0.1, 0, 60).unwrap();
        assert!(c.summable && c.holds());
        let expect = 1.0 / (1.0 - q * q) - 1.0;
        assert!((c.norm_real - expect).abs() < 1e-9);
        let near = solution_norm_monotonicity_check(&ErgodicModel::free_scalar(), 3.0, 1e-8, 0, 60).unwrap();
        assert!((near.norm_complex - near.norm_real).abs() < 1e-6);
    }

    #[test]
    fn band_interior_fails_precondition() {
        let c = solution_norm_monotonicity_check(&ErgodicModel::free_scalar(), 0.5, 0.1, 0, 60).unwrap();
        assert!(!c.summable && c.precondition.is_some() && !c.holds());
    }
}
