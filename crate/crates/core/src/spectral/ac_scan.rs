use super::map_grid;
use crate::cocycle::{lyapunov_spectrum, LyapunovOptions, LyapunovSpectrum};
use crate::ergodic::SiteSource;
use crate::linalg::hermitian_eigenvalues;
use crate::weyl::{weyl_m, HalfLine, DEFAULT_DEPTH, RANK_EPS};
use crate::{LabError, Result, C64};

/// Minimum `zero_tol` for counting `γ_j(x) = 0`.
pub const ZERO_TOL_FLOOR: f64 = 1e-2;
/// Trace growth across the last two rungs flagging singular support.
pub const TRACE_GROWTH: f64 = 5.0;
/// Log-log slope of an `Im M` eigenvalue above which it is decaying with `y`.
pub const VANISHING_SLOPE: f64 = 0.5;

pub const DEFAULT_Y_LADDER: [f64; 6] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];

/// `Im M` data for one half-line along the ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineTrace {
    /// Ladder values where stripping converged, in ladder order.
    pub y: Vec<f64>,
    pub trace: Vec<f64>,
    /// Eigenvalues of `Im M` at each converged rung, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub rank: usize,
    pub singular_support: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcPoint {
    pub x: f64,
    pub exponents: Vec<f64>,
    pub exponent_se: Vec<f64>,
    pub zero_tol: f64,
    pub vanishing_exponents: usize,
    pub plus: Option<HalfLineTrace>,
    pub minus: Option<HalfLineTrace>,
    /// `min(rank⁺, rank⁻)`.
    pub r: usize,
    /// `2r`.
    pub multiplicity: usize,
    /// `min(rank⁺ + rank⁻, 2l)`.
    pub full_line: usize,
    /// Exponent count agrees with the rank classification.
    pub consistent: bool,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcScanReport {
    pub x_grid: Vec<f64>,
    pub y_ladder: Vec<f64>,
    pub steps: usize,
    pub points: Vec<AcPoint>,
}

/// Rank of `lim Im M(x+iy)` from the last two converged rungs.
///
/// An eigenvalue counts as zero when it sits below `RANK_EPS·λ_max` or when it
/// decays with `y` (log-log slope above [`VANISHING_SLOPE`]); a single
/// converged rung falls back to the relative cutoff alone.
pub fn limit_rank(y: &[f64], eigenvalues: &[Vec<f64>]) -> usize {
    let Some(last) = eigenvalues.last() else {
        return 0;
    };
    let max = last.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let prev = (eigenvalues.len() >= 2).then(|| (&eigenvalues[eigenvalues.len() - 2], y[y.len() - 2]));
    let y_last = y[y.len() - 1];
    let mut rank = 0;
    for (i, &lam) in last.iter().enumerate() {
        if lam <= RANK_EPS * max {
            continue;
        }
        if let Some((p, y_prev)) = prev {
            let slope = (lam / p[i]).ln() / (y_last / y_prev).ln();
            if p[i] > 0.0 && slope > VANISHING_SLOPE {
                continue;
            }
        }
        rank += 1;
    }
    rank
}

fn half_line_trace<S: SiteSource + ?Sized>(model: &S, x: f64, ladder: &[f64], half: HalfLine) -> Result<HalfLineTrace> {
    let mut out = HalfLineTrace {
        y: Vec::new(),
        trace: Vec::new(),
        eigenvalues: Vec::new(),
        rank: 0,
        singular_support: false,
    };
    for &y in ladder {
        match weyl_m(model, C64::new(x, y), DEFAULT_DEPTH, half) {
            Ok(w) => {
                let ev = hermitian_eigenvalues(&w.im());
                out.trace.push(ev.iter().sum());
                out.eigenvalues.push(ev);
                out.y.push(y);
            }
            Err(LabError::Convergence { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    if out.y.is_empty() {
        return Err(LabError::InvalidArgument(format!(
            "no ladder rung converged at x = {x}"
        )));
    }
    out.rank = limit_rank(&out.y, &out.eigenvalues);
    let n = out.trace.len();
    out.singular_support = n >= 2 && out.trace[n - 1] > TRACE_GROWTH * out.trace[n - 2];
    Ok(out)
}

fn scan_point<S: SiteSource + ?Sized>(model: &S, x: f64, ladder: &[f64], steps: usize) -> AcPoint {
    let l = model.block_size();
    let mut errors = Vec::new();
    let spectrum: Option<LyapunovSpectrum> =
        match lyapunov_spectrum(model, C64::from(x), &LyapunovOptions::with_steps(steps)) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("exponents: {e}"));
                None
            }
        };
    let (exponents, exponent_se) = spectrum
        .as_ref()
        .map(|s| (s.exponents.clone(), s.standard_errors.clone()))
        .unwrap_or_default();
    let zero_tol = ZERO_TOL_FLOOR.max(3.0 * exponent_se.iter().copied().fold(0.0, f64::max));
    let vanishing_exponents = exponents.iter().filter(|g| g.abs() < zero_tol).count();
    let mut half = |h: HalfLine, name: &str| match half_line_trace(model, x, ladder, h) {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    let plus = half(HalfLine::Plus, "plus");
    let minus = half(HalfLine::Minus, "minus");
    let (rp, rm) = (plus.as_ref().map(|t| t.rank), minus.as_ref().map(|t| t.rank));
    let r = rp.unwrap_or(0).min(rm.unwrap_or(0));
    let full_line = (rp.unwrap_or(0) + rm.unwrap_or(0)).min(2 * l);
    AcPoint {
        x,
        consistent: spectrum.is_some() && rp == rm && vanishing_exponents == 2 * r,
        exponents,
        exponent_se,
        zero_tol,
        vanishing_exponents,
        plus,
        minus,
        r,
        multiplicity: 2 * r,
        full_line,
        errors,
    }
}

/// Per-energy multiplicity classification. Grid points are independent and
/// may run concurrently; the report is ordered by grid index.
pub fn ac_scan<S: SiteSource + ?Sized>(
    model: &S,
    x_grid: &[f64],
    y_ladder: &[f64],
    steps: usize,
) -> Result<AcScanReport> {
    if x_grid.is_empty() || y_ladder.is_empty() {
        return Err(LabError::InvalidArgument("ac_scan grids must be nonempty".into()));
    }
    if steps < 10_000 {
        return Err(LabError::InvalidArgument("ac_scan needs steps >= 10^4".into()));
    }
    if y_ladder.iter().any(|&y| !(y > 0.0)) || y_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::InvalidArgument(
            "y ladder must be positive and strictly decreasing".into(),
        ));
    }
    let points = map_grid(x_grid.len(), |i| scan_point(model, x_grid[i], y_ladder, steps));
    Ok(AcScanReport {
        x_grid: x_grid.to_vec(),
        y_ladder: y_ladder.to_vec(),
        steps,
        points,
    })
}
