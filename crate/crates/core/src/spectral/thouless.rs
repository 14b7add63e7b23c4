use super::ids::{ids_empirical, IdsHistogram};
use crate::cocycle::{lyapunov_spectrum, LyapunovOptions, LyapunovSpectrum};
use crate::ergodic::{birkhoff_average, SiteSource};
use crate::{LabError, Result, C64};

/// Both sides of `γ(z) = ∫ log|z - s| dk(s) - E log|det D|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThoulessReport {
    pub z: C64,
    /// `γ(z)` from the cocycle.
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub log_potential: f64,
    /// Birkhoff average of `log|det D|` over the truncation sites.
    pub det_term: f64,
    pub defect: f64,
    pub sites: usize,
    pub steps: usize,
}

impl ThoulessReport {
    pub fn is_finite(&self) -> bool {
        self.lhs.is_finite() && self.rhs.is_finite() && self.defect.is_finite()
    }
}

pub fn thouless_check<S: SiteSource + ?Sized>(model: &S, z: C64, sites: usize, steps: usize) -> Result<ThoulessReport> {
    let ids = ids_empirical(model, sites)?;
    let spectrum = lyapunov_spectrum(model, z, &LyapunovOptions::with_steps(steps))?;
    thouless_from_parts(model, &ids, &spectrum)
}

/// Thouless comparison from a precomputed IDS and spectrum (same `z`).
pub fn thouless_from_parts<S: SiteSource + ?Sized>(
    model: &S,
    ids: &IdsHistogram,
    spectrum: &LyapunovSpectrum,
) -> Result<ThoulessReport> {
    let z = spectrum.z;
    let det_term = birkhoff_average(model, |s| s.log_abs_det_d(), ids.sites)?;
    let log_potential = ids.log_potential(z);
    let lhs = spectrum.gamma();
    let rhs = log_potential - det_term;
    let report = ThoulessReport {
        z,
        lhs,
        lhs_se: spectrum.partial_sum_se(ids.block),
        rhs,
        log_potential,
        det_term,
        defect: (lhs - rhs).abs(),
        sites: ids.sites,
        steps: spectrum.steps,
    };
    if !report.is_finite() {
        return Err(LabError::NumericBlowup { steps: spectrum.steps });
    }
    Ok(report)
}
