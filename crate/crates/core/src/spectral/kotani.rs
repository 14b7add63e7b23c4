use super::block_mean;
use crate::cocycle::{lyapunov_spectrum, LyapunovOptions, LyapunovSpectrum};
use crate::ergodic::SiteSource;
use crate::linalg::{identity, im_part, log_abs_det, singular_values, C64};
use crate::operator::hop;
use crate::weyl::{weyl_orbit, DEFAULT_DEPTH};
use crate::{LabError, Result};

/// Blocks used for the orbit-average standard errors.
const ORBIT_BLOCKS: usize = 20;
/// Relative slack added to every comparison. Block errors vanish for
/// deterministic models while the finite exponent average keeps an O(1/steps) bias.
pub const NUMERIC_FLOOR: f64 = 1e-6;

/// `Σ_{k≤j} E log(1 + y/μ_k) ≤ 2(γ_{l+1-j} + … + γ_l)` for one `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSumCheck {
    pub j: usize,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

impl PartialSumCheck {
    pub fn holds(&self, k_se: f64) -> bool {
        self.lhs <= self.rhs + k_se * (self.lhs_se + self.rhs_se) + NUMERIC_FLOOR * self.rhs.abs().max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KotaniReport {
    pub z: C64,
    pub orbit_length: usize,
    /// Orbit mean of `log|det(I + Im z (D_n Im M_n D_n)⁻¹)|`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `2γ(z)`.
    pub rhs: f64,
    pub rhs_se: f64,
    pub defect: f64,
    /// Orbit mean of `1/(tr(D_n Im M_n D_n) + l·Im z/2)`.
    pub trace_bound_lhs: f64,
    pub trace_bound_lhs_se: f64,
    /// Orbit mean of `Σ_k 1/(μ_k + Im z/2)`, the intermediate harmonic bound.
    pub harmonic_lhs: f64,
    /// `2γ(z)/Im z`.
    pub trace_bound_rhs: f64,
    pub partial_sums: Vec<PartialSumCheck>,
    /// Singular values of `D₀ Im M₀ D₀`, descending.
    pub mu: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl KotaniReport {
    pub fn combined_se(&self) -> f64 {
        (self.lhs_se.powi(2) + self.rhs_se.powi(2)).sqrt()
    }

    pub fn relative_defect(&self) -> f64 {
        self.defect / self.rhs.abs()
    }

    pub fn identity_holds(&self, k_se: f64) -> bool {
        self.defect <= k_se * self.combined_se() + NUMERIC_FLOOR * self.rhs.abs().max(1.0)
    }

    /// Trace bound and every partial-sum inequality with `k_se` standard errors of slack.
    pub fn inequalities_hold(&self, k_se: f64) -> bool {
        let y = self.z.im;
        let slack = k_se * (self.trace_bound_lhs_se + 2.0 * self.rhs_se / y)
            + NUMERIC_FLOOR * self.trace_bound_rhs.abs().max(1.0);
        self.trace_bound_lhs <= self.harmonic_lhs + 1e-12
            && self.trace_bound_lhs <= self.trace_bound_rhs + slack
            && self.partial_sums.iter().all(|p| p.holds(k_se))
    }
}

pub fn kotani_mean_identity<S: SiteSource + ?Sized>(model: &S, z: C64, orbit_length: usize) -> Result<KotaniReport> {
    kotani_mean_identity_with(model, z, orbit_length, &LyapunovOptions::default())
}

pub fn kotani_mean_identity_with<S: SiteSource + ?Sized>(
    model: &S,
    z: C64,
    orbit_length: usize,
    opts: &LyapunovOptions,
) -> Result<KotaniReport> {
    if orbit_length < 1000 {
        return Err(LabError::InvalidArgument("orbit_length must be >= 1000".into()));
    }
    if z.im <= 0.0 {
        return Err(LabError::InvalidArgument(format!("Im z must be positive (got {z})")));
    }
    let spectrum = lyapunov_spectrum(model, z, opts)?;
    kotani_from_spectrum(model, &spectrum, orbit_length)
}

pub fn kotani_from_spectrum<S: SiteSource + ?Sized>(
    model: &S,
    spectrum: &LyapunovSpectrum,
    orbit_length: usize,
) -> Result<KotaniReport> {
    let z = spectrum.z;
    let y = z.im;
    let l = model.block_size();
    let orbit = weyl_orbit(model, z, orbit_length - 1, DEFAULT_DEPTH)?;

    let mut logdet = Vec::with_capacity(orbit_length);
    let mut trace = Vec::with_capacity(orbit_length);
    let mut harmonic = Vec::with_capacity(orbit_length);
    let mut partial: Vec<Vec<f64>> = vec![Vec::with_capacity(orbit_length); l];
    let mut mu0 = Vec::new();
    for (n, m) in orbit.m.iter().enumerate() {
        let d = hop(model, n as i64)?;
        let b = &d * im_part(m) * &d;
        let inv = b
            .clone()
            .lu()
            .try_inverse()
            .ok_or(LabError::Singular("D Im M D along the orbit"))?;
        logdet.push(log_abs_det(&(identity(l) + inv * C64::from(y))));
        let mu = singular_values(&b);
        trace.push(1.0 / (b.trace().re + l as f64 * y / 2.0));
        harmonic.push(mu.iter().map(|&s| 1.0 / (s + y / 2.0)).sum());
        let mut acc = 0.0;
        for (k, &s) in mu.iter().enumerate() {
            acc += (1.0 + y / s).ln();
            partial[k].push(acc);
        }
        if n == 0 {
            mu0 = mu;
        }
    }
    let (lhs, lhs_se) = block_mean(&logdet, ORBIT_BLOCKS);
    let (trace_lhs, trace_se) = block_mean(&trace, ORBIT_BLOCKS);
    let (harmonic_lhs, _) = block_mean(&harmonic, ORBIT_BLOCKS);
    let gamma = spectrum.gamma();
    let rhs = 2.0 * gamma;
    let rhs_se = 2.0 * spectrum.partial_sum_se(l);
    let partial_sums = (1..=l)
        .map(|j| {
            let (p, p_se) = block_mean(&partial[j - 1], ORBIT_BLOCKS);
            let idx: Vec<usize> = (l - j..l).collect();
            PartialSumCheck {
                j,
                lhs: p,
                lhs_se: p_se,
                rhs: 2.0 * idx.iter().map(|&k| spectrum.exponents[k]).sum::<f64>(),
                rhs_se: 2.0 * spectrum.combined_se(&idx),
            }
        })
        .collect();
    let report = KotaniReport {
        z,
        orbit_length,
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        defect: (lhs - rhs).abs(),
        trace_bound_lhs: trace_lhs,
        trace_bound_lhs_se: trace_se,
        harmonic_lhs,
        trace_bound_rhs: rhs / y,
        partial_sums,
        mu: mu0,
        exponents: spectrum.exponents.clone(),
    };
    if !(report.lhs.is_finite() && report.trace_bound_lhs.is_finite()) {
        return Err(LabError::NumericBlowup { steps: orbit_length });
    }
    Ok(report)
}
