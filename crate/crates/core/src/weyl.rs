//! Weyl–Titchmarsh matrices by coefficient stripping, Jost solutions and the
//! half-line Dirichlet Green kernel.
//!
//! The stripping map is the backward Riccati recursion
//!
//! ```text
//! M_{n-1} = (V_n - z - D_n M_n D_n)⁻¹,      M_n(ω) = M_0(Tⁿω)
//! ```
//!
//! which contracts in the Siegel upper half-space for `Im z > 0`. Seeding
//! `M_depth = i·I` and running down to `n = 0` yields `M^φ(z)`; the Jost
//! solution follows forward as `F_{n+1} = -M_n D_n F_n`, `F_0 = I`.

use std::collections::BTreeMap;

use crate::ergodic::{Reflected, SiteSource};
use crate::linalg::{frobenius, hermitian_eigenvalues, identity, im_part, singular_values, to_complex, CMat, C64};
use crate::operator::{dirichlet_neumann_solutions, hop, MatrixSeq};
use crate::{LabError, Result};

/// Starting depth of the adaptive stripping.
pub const DEFAULT_DEPTH: usize = 200;
/// Depth at which the adaptive stripping gives up.
pub const MAX_DEPTH: usize = 12_800;
/// Required change of `M_0` when the seed is moved five sites.
pub const STRIP_TOLERANCE: f64 = 1e-10;
/// Relative singular-value cutoff for ranks of `Im M`.
pub const RANK_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HalfLine {
    /// Sites `1, 2, …` with `u_0 = 0`.
    Plus,
    /// Sites `-1, -2, …` with `u_0 = 0`, computed on the reflected model.
    Minus,
}

/// `M^φ(z)` on one half-line.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylMatrix {
    pub z: C64,
    pub half_line: HalfLine,
    pub m: CMat,
    pub depth: usize,
    /// `‖M_0^{(depth)} - M_0^{(depth-5)}‖_F / max(1, ‖M_0‖_F)`.
    pub residual: f64,
}

impl WeylMatrix {
    pub fn im(&self) -> CMat {
        im_part(&self.m)
    }

    /// `‖M - Mᵗ‖_F / ‖M‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        frobenius(&(&self.m - self.m.transpose())) / frobenius(&self.m)
    }

    /// Smallest eigenvalue of `Im M`.
    pub fn im_min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.im())[0]
    }

    pub fn im_rank(&self) -> usize {
        relative_rank(&singular_values(&self.im()), RANK_EPS)
    }
}

/// Count of singular values above `eps · σ_max`.
pub fn relative_rank(sv: &[f64], eps: f64) -> usize {
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > eps * max).count()
}

/// One stripping pass from `M_start = seed` down to `M_0`, keeping `M_0..=M_keep`.
fn strip<S: SiteSource + ?Sized>(model: &S, z: C64, start: usize, seed: &CMat, keep: usize) -> Result<Vec<CMat>> {
    debug_assert!(start > keep);
    let l = model.block_size();
    let mut kept = vec![CMat::zeros(l, l); keep + 1];
    let mut m = seed.clone();
    for n in (1..=start as i64).rev() {
        let site = model.site(n)?;
        let d = to_complex(&site.d);
        let rhs = to_complex(&site.v) - identity(l) * z - &d * &m * &d;
        m = rhs
            .lu()
            .try_inverse()
            .ok_or(LabError::Singular("stripping recursion"))?;
        if m.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Singular("stripping recursion"));
        }
        let idx = (n - 1) as usize;
        if idx <= keep {
            kept[idx] = m.clone();
        }
    }
    Ok(kept)
}

/// `M_0, …, M_{n_max}` along the orbit with convergence residual of the last one.
#[derive(Clone, Debug)]
pub struct WeylOrbit {
    pub z: C64,
    pub m: Vec<CMat>,
    pub depth: usize,
    pub residual: f64,
}

fn orbit_with_seed<S: SiteSource + ?Sized>(
    model: &S,
    z: C64,
    n_max: usize,
    depth: usize,
    seed: &CMat,
) -> Result<WeylOrbit> {
    let mut depth = depth.max(10);
    loop {
        let full = strip(model, z, n_max + depth, seed, n_max)?;
        let short = strip(model, z, n_max + depth - 5, seed, n_max)?;
        let last = &full[n_max];
        let residual = frobenius(&(last - &short[n_max])) / frobenius(last).max(1.0);
        if residual < STRIP_TOLERANCE {
            return Ok(WeylOrbit {
                z,
                m: full,
                depth,
                residual,
            });
        }
        if depth >= MAX_DEPTH {
            return Err(LabError::Convergence { residual, depth });
        }
        depth = (depth * 2).min(MAX_DEPTH);
    }
}

fn require_upper(z: C64) -> Result<()> {
    if z.im > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("Im z must be positive (got {z})")))
    }
}

/// Adaptive stripping: starting at `depth`, doubled until the residual
/// is below [`STRIP_TOLERANCE`] or [`MAX_DEPTH`] is exceeded.
pub fn weyl_orbit<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize, depth: usize) -> Result<WeylOrbit> {
    require_upper(z)?;
    let seed = identity(model.block_size()) * C64::i();
    orbit_with_seed(model, z, n_max, depth, &seed)
}

/// `M^φ(z)` with seed `i·I`.
pub fn weyl_m<S: SiteSource + ?Sized>(model: &S, z: C64, depth: usize, half_line: HalfLine) -> Result<WeylMatrix> {
    let seed = identity(model.block_size()) * C64::i();
    weyl_m_seeded(model, z, depth, half_line, &seed)
}

pub fn weyl_m_seeded<S: SiteSource + ?Sized>(
    model: &S,
    z: C64,
    depth: usize,
    half_line: HalfLine,
    seed: &CMat,
) -> Result<WeylMatrix> {
    require_upper(z)?;
    let orbit = match half_line {
        HalfLine::Plus => orbit_with_seed(model, z, 0, depth, seed)?,
        HalfLine::Minus => orbit_with_seed(&Reflected { inner: model }, z, 0, depth, seed)?,
    };
    Ok(WeylMatrix {
        z,
        half_line,
        m: orbit.m.into_iter().next().expect("orbit has M_0"),
        depth: orbit.depth,
        residual: orbit.residual,
    })
}

/// Jost solution blocks `F_0 = I, F_1, …` stored rescaled: the true block is
/// `exp(log_scale[n]) · blocks[n]`.
#[derive(Clone, Debug)]
pub struct JostSequence {
    pub z: C64,
    pub blocks: MatrixSeq,
    pub log_scale: Vec<f64>,
    /// Weyl matrices `M_0..M_{n_max}` used for the reconstruction.
    pub weyl: Vec<CMat>,
}

impl JostSequence {
    /// Unscaled `F_n`.
    pub fn at(&self, n: usize) -> CMat {
        &self.blocks.values[n] * C64::from(self.log_scale[n].exp())
    }

    /// `Σ_{k=1}^{n_max} F_k* F_k`.
    pub fn gram_sum(&self) -> CMat {
        let l = self.blocks.values[0].nrows();
        let mut acc = CMat::zeros(l, l);
        for n in 1..self.blocks.values.len() {
            let f = self.at(n);
            acc += f.adjoint() * f;
        }
        acc
    }

    /// `Σ_{k=1}^{n_max} ‖F_k e_col‖²`.
    pub fn column_norm_sqr(&self, col: usize) -> f64 {
        (1..self.blocks.values.len())
            .map(|n| self.at(n).column(col).norm_squared())
            .sum()
    }
}

const RESCALE_BELOW: f64 = 1e-100;

fn jost_from_orbit<S: SiteSource + ?Sized>(model: &S, orbit: WeylOrbit) -> Result<JostSequence> {
    let l = model.block_size();
    let n_max = orbit.m.len() - 1;
    let mut blocks = vec![identity(l)];
    let mut log_scale = vec![0.0];
    let mut scale = 0.0;
    let mut f = identity(l);
    for m in 0..n_max {
        f = -(&orbit.m[m] * hop(model, m as i64)? * &f);
        let size = frobenius(&f);
        if size == 0.0 || !size.is_finite() {
            return Err(LabError::NumericBlowup { steps: m });
        }
        if size < RESCALE_BELOW {
            f /= C64::from(size);
            scale += size.ln();
        }
        blocks.push(f.clone());
        log_scale.push(scale);
    }
    Ok(JostSequence {
        z: orbit.z,
        blocks: MatrixSeq {
            offset: 0,
            values: blocks,
        },
        log_scale,
        weyl: orbit.m,
    })
}

/// `F_0..F_{n_max}` for `Im z > 0`.
pub fn jost_sequence<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize) -> Result<JostSequence> {
    let orbit = weyl_orbit(model, z, n_max, DEFAULT_DEPTH)?;
    jost_from_orbit(model, orbit)
}

/// Jost reconstruction at real energy.
///
/// Only meaningful where the decaying subspace at `x` is `l`-dimensional;
/// the stripping residual then still converges and the caller checks
/// square-summability of the result.
pub fn jost_sequence_real<S: SiteSource + ?Sized>(model: &S, x: f64, n_max: usize) -> Result<JostSequence> {
    let seed = identity(model.block_size()) * C64::i();
    let orbit = orbit_with_seed(model, C64::from(x), n_max, DEFAULT_DEPTH, &seed)?;
    jost_from_orbit(model, orbit)
}

/// `‖D₀ Im M D₀ - Im z · Σ_{k=1}^{n_max} F_k* F_k‖_F`.
pub fn m_sum_identity_defect<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize) -> Result<f64> {
    let (lhs, rhs) = m_sum_identity_sides(model, z, n_max)?;
    Ok(frobenius(&(lhs - rhs)))
}

/// Both sides of the sum identity: `(D₀ Im M D₀, Im z · Σ F_k* F_k)`.
pub fn m_sum_identity_sides<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize) -> Result<(CMat, CMat)> {
    let jost = jost_sequence(model, z, n_max)?;
    let d0 = hop(model, 0)?;
    let lhs = &d0 * im_part(&jost.weyl[0]) * &d0;
    Ok((lhs, jost.gram_sum() * C64::from(z.im)))
}

/// Evaluated entries `G^φ(p, q; z)` of the half-line Dirichlet resolvent kernel.
#[derive(Clone, Debug)]
pub struct GreenKernel {
    pub z: C64,
    pub entries: BTreeMap<(i64, i64), CMat>,
}

impl GreenKernel {
    pub fn get(&self, p: i64, q: i64) -> Option<&CMat> {
        self.entries.get(&(p, q))
    }
}

/// `G(p,q) = -φ_p D₀⁻¹ F_qᵗ` for `p ≤ q` and `-F_p D₀⁻¹ φ_qᵗ` for `p > q`.
pub fn green_kernel<S: SiteSource + ?Sized>(model: &S, z: C64, pairs: &[(i64, i64)]) -> Result<GreenKernel> {
    require_upper(z)?;
    if pairs.iter().any(|&(p, q)| p < 1 || q < 1) {
        return Err(LabError::InvalidArgument("Green kernel sites must be >= 1".into()));
    }
    let reach = pairs.iter().map(|&(p, q)| p.max(q)).max().unwrap_or(1) as usize;
    let sol = dirichlet_neumann_solutions(model, z, reach.max(1))?;
    let jost = jost_sequence(model, z, reach)?;
    let d0_inv = hop(model, 0)?.lu().try_inverse().ok_or(LabError::Singular("D_0"))?;
    let mut entries = BTreeMap::new();
    for &(p, q) in pairs {
        let (pu, qu) = (p as usize, q as usize);
        let g = if p <= q {
            let s = (sol.log_scale[pu] + jost.log_scale[qu]).exp();
            -(sol.phi.get(p)? * &d0_inv * jost.blocks.values[qu].transpose()) * C64::from(s)
        } else {
            let s = (jost.log_scale[pu] + sol.log_scale[qu]).exp();
            -(&jost.blocks.values[pu] * &d0_inv * sol.phi.get(q)?.transpose()) * C64::from(s)
        };
        entries.insert((p, q), g);
    }
    Ok(GreenKernel { z, entries })
}

/// Sign counts of a Hermitian matrix's eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Eigenvalue sign counts with zero threshold `1e-10·‖B‖₂`.
pub fn inertia_of(b: &CMat) -> Inertia {
    let ev = hermitian_eigenvalues(b);
    let norm = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * norm;
    let mut out = Inertia {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for x in ev {
        if x > tol {
            out.positive += 1;
        } else if x < -tol {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    out
}

/// Inertia of `B` and of the congruent `X*BX`.
pub fn inertia(b: &CMat, x: &CMat) -> Result<(Inertia, Inertia)> {
    let sv = singular_values(x);
    let (max, min) = (sv[0], *sv.last().expect("non-empty"));
    if min == 0.0 || max / min > 1e12 {
        return Err(LabError::Singular("congruence transform"));
    }
    let congruent = x.adjoint() * b * x;
    Ok((inertia_of(b), inertia_of(&congruent)))
}

/// Scalar free-model fixed point: root of `M² + zM + 1 = 0` with `Im M > 0`.
pub fn free_weyl_scalar(z: C64) -> C64 {
    let s = (z * z - 4.0).sqrt();
    let a = (-z + s) / 2.0;
    let b = (-z - s) / 2.0;
    if a.im > b.im {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::ErgodicModel;
    use crate::linalg::CVec;
    use crate::operator::{apply_operator, finite_dirichlet_matrix, VectorSeq};

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn free_fixed_point() {
        let w = weyl_m(&ErgodicModel::free_scalar(), C64::i(), DEFAULT_DEPTH, HalfLine::Plus).unwrap();
        assert!((w.m[(0, 0)] - C64::new(0.0, GOLDEN)).norm() < 1e-10);
        assert!((free_weyl_scalar(C64::i()) - C64::new(0.0, GOLDEN)).norm() < 1e-15);
        assert!(w.residual < STRIP_TOLERANCE);
    }

    #[test]
    fn constant_shift_moves_energy() {
        let m = ErgodicModel::free(2, 1.0, 1.0).unwrap();
        let z = C64::new(1.0, 1.0);
        let w = weyl_m(&m, z, DEFAULT_DEPTH, HalfLine::Plus).unwrap();
        let expect = free_weyl_scalar(z - 1.0);
        assert!((w.m[(0, 0)] - expect).norm() < 1e-10);
        assert!((w.m[(1, 1)] - expect).norm() < 1e-10);
        assert!(w.m[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn symmetric_and_herglotz() {
        let m = ErgodicModel::iid(3, 17, 1.0, 1.0, 0.3).unwrap();
        for half in [HalfLine::Plus, HalfLine::Minus] {
            let w = weyl_m(&m, C64::new(0.3, 0.7), DEFAULT_DEPTH, half).unwrap();
            assert!(w.symmetry_defect() < 1e-9);
            assert!(w.im_min_eigenvalue() > 0.0);
            assert_eq!(w.im_rank(), 3);
        }
    }

    #[test]
    fn requires_upper_half_plane() {
        let m = ErgodicModel::free_scalar();
        assert!(weyl_m(&m, C64::from(0.5), 10, HalfLine::Plus).is_err());
        assert!(jost_sequence(&m, C64::new(0.5, -1.0), 10).is_err());
    }

    #[test]
    fn convergence_failure_reported() {
        // deep inside the band at tiny Im z the contraction rate is ~1e-6 per site
        let err = weyl_m(&ErgodicModel::free_scalar(), C64::new(0.0, 1e-6), 200, HalfLine::Plus).unwrap_err();
        assert!(matches!(err, LabError::Convergence { depth: MAX_DEPTH, .. }));
    }

    #[test]
    fn free_jost_decay() {
        let j = jost_sequence(&ErgodicModel::free_scalar(), C64::i(), 30).unwrap();
        assert_eq!(j.blocks.values[0], identity(1));
        for n in 0..=30 {
            let got = j.at(n)[(0, 0)].norm();
            let expect = GOLDEN.powi(n as i32);
            assert!((got - expect).abs() < 1e-8 * expect, "n={n}");
        }
    }

    #[test]
    fn jost_solves_equation() {
        let m = ErgodicModel::iid(2, 5, 1.0, 1.0, 0.2).unwrap();
        let z = C64::new(-0.4, 0.6);
        let j = jost_sequence(&m, z, 40).unwrap();
        let unscaled = MatrixSeq {
            offset: 0,
            values: (0..=40).map(|n| j.at(n)).collect(),
        };
        for n in 1..40 {
            let r = crate::operator::eigen_residual(&m, &unscaled, z, n).unwrap();
            assert!(frobenius(&r) < 1e-8 * frobenius(&unscaled.values[n as usize]).max(1e-300));
        }
    }

    #[test]
    fn free_sum_identity_geometric() {
        let d = m_sum_identity_defect(&ErgodicModel::free_scalar(), C64::i(), 200).unwrap();
        assert!(d < 1e-8);
    }

    #[test]
    fn sum_identity_improves_with_length() {
        let m = ErgodicModel::iid(2, 3, 1.0, 1.0, 0.2).unwrap();
        let z = C64::new(0.2, 0.1);
        let short = m_sum_identity_defect(&m, z, 10).unwrap();
        let long = m_sum_identity_defect(&m, z, 200).unwrap();
        assert!(long < short);
    }

    #[test]
    fn green_diagonal_is_weyl() {
        let m = ErgodicModel::iid(2, 13, 1.0, 1.0, 0.3).unwrap();
        let z = C64::new(0.5, 0.8);
        let g = green_kernel(&m, z, &[(1, 1)]).unwrap();
        let w = weyl_m(&m, z, DEFAULT_DEPTH, HalfLine::Plus).unwrap();
        assert!(frobenius(&(g.get(1, 1).unwrap() - &w.m)) < 1e-9);
        let free = green_kernel(&ErgodicModel::free_scalar(), C64::i(), &[(1, 1)]).unwrap();
        assert!((free.get(1, 1).unwrap()[(0, 0)] - C64::new(0.0, GOLDEN)).norm() < 1e-10);
        assert!(green_kernel(&m, z, &[(0, 1)]).is_err());
    }

    #[test]
    fn green_kernel_inverts_operator() {
        for model in [
            ErgodicModel::free_scalar(),
            ErgodicModel::iid(2, 29, 1.0, 1.0, 0.3).unwrap(),
        ] {
            let l = model.l();
            let z = C64::new(0.5, 0.8);
            let pairs: Vec<(i64, i64)> = (1..=60).map(|p| (p, 5)).collect();
            let g = green_kernel(&model, z, &pairs).unwrap();
            // (G u)_p for u = δ_5 ⊗ e_1, with the Dirichlet zero at site 0
            let gu = VectorSeq::from_fn(0..=60, |p| {
                if p == 0 {
                    CVec::zeros(l)
                } else {
                    g.get(p, 5).unwrap().column(0).into_owned()
                }
            });
            let hgu = apply_operator(&model, &gu, 1..=59).unwrap();
            let u = VectorSeq::delta(l, 5, 0, 1..=59);
            for p in 1..=59 {
                let r = hgu.get(p).unwrap() - gu.get(p).unwrap() * z - u.get(p).unwrap();
                assert!(r.norm() < 1e-7, "site {p}");
            }
            // dense oracle on the 60-site truncation
            let h = finite_dirichlet_matrix(&model, 60).unwrap().to_complex();
            let a = h - CMat::identity(60 * l, 60 * l) * z;
            let mut rhs = CVec::zeros(60 * l);
            rhs[4 * l] = C64::from(1.0);
            let x = a.lu().solve(&rhs).unwrap();
            for p in 1..=60usize {
                let dense = x.rows((p - 1) * l, l);
                assert!((gu.get(p as i64).unwrap() - dense).norm() < 1e-7, "site {p}");
            }
        }
    }

    #[test]
    fn sylvester_inertia() {
        let b = CMat::from_diagonal(&CVec::from_vec(vec![C64::from(1.0), C64::from(-1.0)]));
        let x = CMat::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.5), C64::from(2.0), C64::from(-0.3), C64::new(0.0, 1.0)],
        );
        let (a, c) = inertia(&b, &x).unwrap();
        let expect = Inertia {
            positive: 1,
            negative: 1,
            zero: 0,
        };
        assert_eq!(a, expect);
        assert_eq!(c, expect);
        assert_eq!(
            inertia(&b, &identity(2)).unwrap().0,
            inertia(&b, &identity(2)).unwrap().1
        );
        let singular = CMat::from_row_slice(2, 2, &[C64::from(1.0), C64::from(2.0), C64::from(2.0), C64::from(4.0)]);
        assert!(inertia(&b, &singular).is_err());
    }
}
