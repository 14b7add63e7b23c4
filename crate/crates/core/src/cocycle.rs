//! The symplectic one-step cocycle, transfer products and the Lyapunov
//! spectrum via QR re-orthonormalization.
//!
//! One step maps `(u_n, D_{n-1}u_{n-1})` to `(u_{n+1}, D_n u_n)`:
//!
//! ```text
//! A_z = [ D⁻¹(z - V)   -D⁻¹ ]
//!       [ D             0   ]
//! ```
//!
//! `A_zᵗ J A_z = J`, so the `2l` exponents come in `±` pairs and every
//! transfer product has unit determinant.

use crate::ergodic::{SitePayload, SiteSource};
use crate::linalg::{frobenius, identity, symplectic_j, to_complex, CMat, C64};
use crate::operator::{site_ops, SiteOps};
use crate::{LabError, Result};

/// `2l×2l` one-step matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleMatrix(pub CMat);

impl CocycleMatrix {
    pub fn from_ops(ops: &SiteOps, z: C64) -> Self {
        let l = ops.d.nrows();
        let mut a = CMat::zeros(2 * l, 2 * l);
        let shift = identity(l) * z - &ops.v;
        a.view_mut((0, 0), (l, l)).copy_from(&(&ops.d_inv * shift));
        a.view_mut((0, l), (l, l)).copy_from(&(-&ops.d_inv));
        a.view_mut((l, 0), (l, l)).copy_from(&ops.d);
        CocycleMatrix(a)
    }

    /// `‖AᵗJA - J‖_F`.
    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.0)
    }

    /// Exact inverse `J⁻¹AᵗJ`.
    pub fn inverse(&self) -> CMat {
        symplectic_inverse(&self.0)
    }
}

pub fn symplectic_defect(a: &CMat) -> f64 {
    let j = symplectic_j(a.nrows() / 2);
    frobenius(&(a.transpose() * &j * a - j))
}

pub fn symplectic_inverse(a: &CMat) -> CMat {
    let j = symplectic_j(a.nrows() / 2);
    -(&j * a.transpose() * &j)
}

pub fn cocycle_matrix(site: &SitePayload, z: C64) -> Result<CocycleMatrix> {
    let d_inv = site.d.clone().lu().try_inverse().ok_or(LabError::SingularHop {
        site: 0,
        condition: f64::INFINITY,
    })?;
    let ops = SiteOps {
        d: to_complex(&site.d),
        v: to_complex(&site.v),
        d_inv: to_complex(&d_inv),
    };
    Ok(CocycleMatrix::from_ops(&ops, z))
}

/// Largest `|n|` accepted by the unscaled product.
pub const MAX_UNSCALED_STEPS: i64 = 30;
const OVERFLOW_ENTRY: f64 = 1e150;

/// `A_n(z, ω)`: `A(T^{n-1}ω)⋯A(ω)` for `n ≥ 1`, `I` for `n = 0`,
/// `A⁻¹(T^nω)⋯A⁻¹(T^{-1}ω)` for `n ≤ -1`.
pub fn transfer_product<S: SiteSource + ?Sized>(model: &S, z: C64, n: i64) -> Result<CMat> {
    transfer_product_from(model, z, 0, n)
}

/// `A_n(z, T^start ω)`.
pub fn transfer_product_from<S: SiteSource + ?Sized>(model: &S, z: C64, start: i64, n: i64) -> Result<CMat> {
    if n.abs() > MAX_UNSCALED_STEPS {
        return Err(LabError::InvalidArgument(format!(
            "unscaled transfer products are limited to |n| <= {MAX_UNSCALED_STEPS}; use lyapunov_spectrum"
        )));
    }
    let l = model.block_size();
    let mut prod = identity(2 * l);
    let guard = |m: &CMat, k: i64| {
        if m.iter().any(|x| !x.is_finite() || x.norm() > OVERFLOW_ENTRY) {
            Err(LabError::Scale { steps: k })
        } else {
            Ok(())
        }
    };
    if n >= 1 {
        for k in 0..n {
            let a = CocycleMatrix::from_ops(&site_ops(model, start + k)?, z);
            prod = a.0 * prod;
            guard(&prod, k + 1)?;
        }
    } else {
        for k in 1..=-n {
            let a = CocycleMatrix::from_ops(&site_ops(model, start - k)?, z);
            prod = a.inverse() * prod;
            guard(&prod, -k)?;
        }
    }
    Ok(prod)
}

/// Walk direction along the orbit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Sites `0, 1, 2, …` with `A_z`.
    Forward,
    /// Sites `-1, -2, …` with `A_z⁻¹`.
    Backward,
}

/// Product accumulator with a running orthonormal frame.
#[derive(Clone, Debug)]
pub struct TransferAccumulator {
    z: C64,
    direction: Direction,
    frame: CMat,
    log_diagonal: Vec<f64>,
    next_site: i64,
    steps: usize,
    since_qr: usize,
}

impl TransferAccumulator {
    pub fn new(l: usize, z: C64, direction: Direction) -> Self {
        TransferAccumulator {
            z,
            direction,
            frame: identity(2 * l),
            log_diagonal: vec![0.0; 2 * l],
            next_site: match direction {
                Direction::Forward => 0,
                Direction::Backward => -1,
            },
            steps: 0,
            since_qr: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Running sums of `log|R_ii|` (nats), in frame order.
    pub fn log_diagonal(&self) -> &[f64] {
        &self.log_diagonal
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    /// `‖Q*Q - I‖_F` of the current frame (meaningful right after a QR step).
    pub fn gram_defect(&self) -> f64 {
        let n = self.frame.ncols();
        frobenius(&(self.frame.adjoint() * &self.frame - identity(n)))
    }

    /// Multiply `count` one-step matrices into the frame, re-orthonormalizing
    /// every `reorth_period` steps and once more at the end.
    pub fn advance<S: SiteSource + ?Sized>(&mut self, model: &S, count: usize, reorth_period: usize) -> Result<()> {
        for _ in 0..count {
            let ops = site_ops(model, self.next_site)?;
            let a = CocycleMatrix::from_ops(&ops, self.z);
            match self.direction {
                Direction::Forward => {
                    self.frame = a.0 * &self.frame;
                    self.next_site += 1;
                }
                Direction::Backward => {
                    self.frame = a.inverse() * &self.frame;
                    self.next_site -= 1;
                }
            }
            self.steps += 1;
            self.since_qr += 1;
            if self.since_qr >= reorth_period {
                self.orthonormalize()?;
            }
        }
        self.orthonormalize()
    }

    fn orthonormalize(&mut self) -> Result<()> {
        if self.since_qr == 0 {
            return Ok(());
        }
        if self.frame.iter().any(|x| !x.is_finite()) {
            return Err(LabError::NumericBlowup { steps: self.steps });
        }
        let qr = self.frame.clone().qr();
        let r = qr.r();
        for (i, acc) in self.log_diagonal.iter_mut().enumerate() {
            let d = r[(i, i)].norm();
            if d == 0.0 || !d.is_finite() {
                return Err(LabError::NumericBlowup { steps: self.steps });
            }
            *acc += d.ln();
        }
        self.frame = qr.q();
        self.since_qr = 0;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovOptions {
    /// Counted steps (`≥ 10³`).
    pub steps: usize,
    /// Steps between QR factorizations (`1..=20`).
    pub reorth_period: usize,
    /// Uncounted steps run first so the frame aligns with the Oseledets splitting.
    pub warmup: usize,
    /// Blocks for the standard error estimate.
    pub blocks: usize,
    pub direction: Direction,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            steps: 100_000,
            reorth_period: 5,
            warmup: 1_000,
            blocks: 100,
            direction: Direction::Forward,
        }
    }
}

impl LyapunovOptions {
    pub fn with_steps(steps: usize) -> Self {
        LyapunovOptions {
            steps,
            ..Self::default()
        }
    }
}

/// Lyapunov exponents (nats per step) sorted descending, with block standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSpectrum {
    pub z: C64,
    pub exponents: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub steps: usize,
    pub reorth_period: usize,
    /// Per-block growth rates, columns in the same (sorted) order as `exponents`.
    pub block_rates: Vec<Vec<f64>>,
}

impl LyapunovSpectrum {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// `γ(z) = γ_1 + … + γ_l`.
    pub fn gamma(&self) -> f64 {
        partial_lyapunov_sums(self, self.dim() / 2).expect("l is in range")
    }

    /// Block standard error of `Σ_{k∈idx} γ_k`.
    pub fn combined_se(&self, idx: &[usize]) -> f64 {
        let b = self.block_rates.len();
        if b < 2 {
            return f64::INFINITY;
        }
        let sums: Vec<f64> = self
            .block_rates
            .iter()
            .map(|r| idx.iter().map(|&k| r[k]).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / b as f64;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    }

    /// Standard error of `γ_1 + … + γ_j`.
    pub fn partial_sum_se(&self, j: usize) -> f64 {
        self.combined_se(&(0..j).collect::<Vec<_>>())
    }

    /// `|γ_j + γ_{2l+1-j}|` for `j = 1..=l` (1-based `j`).
    pub fn symmetry_defects(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n / 2)
            .map(|k| (self.exponents[k] + self.exponents[n - 1 - k]).abs())
            .collect()
    }

    /// Standard error of `γ_j + γ_{2l+1-j}` (1-based `j`).
    pub fn pair_se(&self, j: usize) -> f64 {
        let n = self.dim();
        self.combined_se(&[j - 1, n - j])
    }

    pub fn max_se(&self) -> f64 {
        self.standard_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// QR estimate of the full spectrum.
pub fn lyapunov_spectrum<S: SiteSource + ?Sized>(
    model: &S,
    z: C64,
    opts: &LyapunovOptions,
) -> Result<LyapunovSpectrum> {
    if opts.steps < 1000 {
        return Err(LabError::InvalidArgument(
            "lyapunov_spectrum needs at least 1000 steps".into(),
        ));
    }
    if !(1..=20).contains(&opts.reorth_period) {
        return Err(LabError::InvalidArgument("reorth_period must lie in 1..=20".into()));
    }
    let blocks = opts.blocks.clamp(1, opts.steps);
    let n = 2 * model.block_size();
    let mut acc = TransferAccumulator::new(model.block_size(), z, opts.direction);
    acc.advance(model, opts.warmup, opts.reorth_period)?;
    let base = acc.log_diagonal().to_vec();

    let mut raw_blocks = Vec::with_capacity(blocks);
    let mut prev = base.clone();
    let mut done = 0;
    for b in 0..blocks {
        let len = (opts.steps * (b + 1)) / blocks - done;
        acc.advance(model, len, opts.reorth_period)?;
        done += len;
        let cur = acc.log_diagonal().to_vec();
        raw_blocks.push((0..n).map(|k| (cur[k] - prev[k]) / len as f64).collect::<Vec<f64>>());
        prev = cur;
    }
    let totals: Vec<f64> = (0..n).map(|k| (prev[k] - base[k]) / opts.steps as f64).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));

    let exponents: Vec<f64> = order.iter().map(|&k| totals[k]).collect();
    let block_rates: Vec<Vec<f64>> = raw_blocks
        .iter()
        .map(|r| order.iter().map(|&k| r[k]).collect())
        .collect();
    let mut spectrum = LyapunovSpectrum {
        z,
        exponents,
        standard_errors: Vec::new(),
        steps: opts.steps,
        reorth_period: opts.reorth_period,
        block_rates,
    };
    spectrum.standard_errors = (0..n).map(|k| spectrum.combined_se(&[k])).collect();
    if spectrum.exponents.iter().any(|x| !x.is_finite()) {
        return Err(LabError::NumericBlowup { steps: opts.steps });
    }
    Ok(spectrum)
}

/// `γ_1 + … + γ_j` for `1 ≤ j ≤ 2l`.
pub fn partial_lyapunov_sums(spectrum: &LyapunovSpectrum, j: usize) -> Result<f64> {
    if j == 0 || j > spectrum.dim() {
        return Err(LabError::InvalidArgument(format!(
            "partial sum index {j} outside 1..={}",
            spectrum.dim()
        )));
    }
    Ok(spectrum.exponents[..j].iter().sum())
}

/// Scalar closed form `log|(z + √(z²-4))/2|` for the free cocycle, branch with modulus ≥ 1.
pub fn free_exponent(z: C64) -> f64 {
    let s = (z * z - 4.0).sqrt();
    let a = ((z + s) / 2.0).norm();
    let b = ((z - s) / 2.0).norm();
    a.max(b).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::ErgodicModel;
    use crate::linalg::RMat;

    #[test]
    fn free_one_step_at_zero() {
        let site = ErgodicModel::free_scalar().sample_site(0).unwrap();
        let a = cocycle_matrix(&site, C64::new(0.0, 0.0)).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0].map(C64::from));
        assert_eq!(a.0, expect);
    }

    #[test]
    fn unit_determinant_and_symplectic() {
        let m = ErgodicModel::iid(3, 8, 2.0, 1.0, 0.5).unwrap();
        for n in 0..10 {
            let a = cocycle_matrix(&m.sample_site(n).unwrap(), C64::new(0.4, -1.3)).unwrap();
            let norm = frobenius(&a.0);
            assert!(a.symplectic_defect() < 1e-12 * norm * norm);
            assert!((a.0.determinant() - C64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(frobenius(&(a.inverse() * &a.0 - identity(6))) < 1e-12 * norm * norm);
        }
    }

    #[test]
    fn blocks_by_substitution() {
        let v = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let site = SitePayload {
            d: RMat::identity(2, 2),
            v,
        };
        let a = cocycle_matrix(&site, C64::i()).unwrap();
        assert_eq!(a.0[(0, 0)], C64::new(-1.0, 1.0));
        assert_eq!(a.0[(1, 1)], C64::new(-2.0, 1.0));
        assert_eq!(a.0[(0, 1)], C64::from(0.0));
        assert_eq!(a.0[(0, 2)], C64::from(-1.0));
        assert_eq!(a.0[(2, 0)], C64::from(1.0));
        assert_eq!(a.0[(2, 2)], C64::from(0.0));
    }

    #[test]
    fn transfer_product_conventions() {
        let m = ErgodicModel::iid(2, 21, 1.0, 1.0, 0.3).unwrap();
        let z = C64::new(0.2, 0.5);
        assert_eq!(transfer_product(&m, z, 0).unwrap(), identity(4));
        // n = -1 is the inverse of the step at site -1
        let back = transfer_product(&m, z, -1).unwrap();
        let step = cocycle_matrix(&m.sample_site(-1).unwrap(), z).unwrap();
        let inv = step.0.clone().try_inverse().unwrap();
        assert!(frobenius(&(back - inv)) < 1e-12);
        // A_{n+m}(ω) = A_n(T^m ω) A_m(ω)
        let a6 = transfer_product(&m, z, 6).unwrap();
        let a3 = transfer_product(&m, z, 3).unwrap();
        let a3s = transfer_product_from(&m, z, 3, 3).unwrap();
        assert!(frobenius(&(a6 - a3s * a3)) < 1e-10);
        // and A_{-n} undoes the forward product from T^{-n} ω
        let fwd = transfer_product_from(&m, z, -4, 4).unwrap();
        let bwd = transfer_product(&m, z, -4).unwrap();
        assert!(frobenius(&(fwd * bwd - identity(4))) < 1e-9);
    }

    #[test]
    fn transfer_product_limits() {
        let m = ErgodicModel::free_scalar();
        assert!(matches!(
            transfer_product(&m, C64::from(1.0), 31),
            Err(LabError::InvalidArgument(_))
        ));
        assert!(matches!(
            transfer_product(&m, C64::from(1e7), 25),
            Err(LabError::Scale { .. })
        ));
    }

    #[test]
    fn free_exponents_closed_form() {
        let m = ErgodicModel::free_scalar();
        let s = lyapunov_spectrum(&m, C64::from(3.0), &LyapunovOptions::default()).unwrap();
        let expect = 1.5f64.acosh();
        assert!((s.exponents[0] - expect).abs() < 1e-3);
        assert!((s.exponents[1] + expect).abs() < 1e-3);
        assert!((free_exponent(C64::from(3.0)) - expect).abs() < 1e-14);
        let inside = lyapunov_spectrum(&m, C64::from(0.5), &LyapunovOptions::default()).unwrap();
        assert!(inside.exponents.iter().all(|g| g.abs() < 1e-2));
    }

    #[test]
    fn partial_sums() {
        let m = ErgodicModel::free_scalar();
        let s = lyapunov_spectrum(&m, C64::from(3.0), &LyapunovOptions::with_steps(10_000)).unwrap();
        assert!(partial_lyapunov_sums(&s, 2).unwrap().abs() < 1e-10);
        assert!((partial_lyapunov_sums(&s, 1).unwrap() - 0.9624).abs() < 1e-3);
        assert!(partial_lyapunov_sums(&s, 0).is_err());
        assert!(partial_lyapunov_sums(&s, 3).is_err());
    }

    #[test]
    fn option_validation() {
        let m = ErgodicModel::free_scalar();
        let z = C64::from(1.0);
        assert!(lyapunov_spectrum(&m, z, &LyapunovOptions::with_steps(999)).is_err());
        let mut o = LyapunovOptions::with_steps(1000);
        o.reorth_period = 21;
        assert!(lyapunov_spectrum(&m, z, &o).is_err());
        o.reorth_period = 0;
        assert!(lyapunov_spectrum(&m, z, &o).is_err());
    }

    #[test]
    fn frame_stays_orthonormal() {
        let m = ErgodicModel::iid(2, 2, 1.5, 1.0, 0.2).unwrap();
        let mut acc = TransferAccumulator::new(2, C64::new(0.1, 0.2), Direction::Backward);
        acc.advance(&m, 503, 7).unwrap();
        assert_eq!(acc.steps(), 503);
        assert!(acc.gram_defect() < 1e-10);
        let total: f64 = acc.log_diagonal().iter().sum();
        // unit determinant of the accumulated product
        assert!(total.abs() < 1e-8);
    }
}
