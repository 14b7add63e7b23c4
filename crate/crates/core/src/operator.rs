//! The Jacobi operator `(Hu)_n = D_{n-1} u_{n-1} + D_n u_{n+1} + V_n u_n` on
//! finite windows: application, Wronskians, Dirichlet/Neumann matrix
//! solutions and the finite Dirichlet truncation.

use std::ops::RangeInclusive;

use crate::ergodic::SiteSource;
use crate::linalg::{condition_number, frobenius, identity, to_complex, CMat, CVec, RMat, C64};
use crate::{LabError, Result};

/// Hopping blocks whose condition number exceeds this are rejected.
pub const MAX_HOP_CONDITION: f64 = 1e12;

/// Complex vector sequence `u_offset, u_offset+1, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSeq {
    pub offset: i64,
    pub values: Vec<CVec>,
}

impl VectorSeq {
    pub fn from_fn(range: RangeInclusive<i64>, mut f: impl FnMut(i64) -> CVec) -> Self {
        let offset = *range.start();
        VectorSeq {
            offset,
            values: range.map(&mut f).collect(),
        }
    }

    /// `δ_site ⊗ e_component` on the window `range`.
    pub fn delta(l: usize, site: i64, component: usize, range: RangeInclusive<i64>) -> Self {
        Self::from_fn(range, |n| {
            let mut v = CVec::zeros(l);
            if n == site {
                v[component] = C64::new(1.0, 0.0);
            }
            v
        })
    }

    pub fn first(&self) -> i64 {
        self.offset
    }

    pub fn last(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> Result<&CVec> {
        let k = n - self.offset;
        if k < 0 || k as usize >= self.values.len() {
            return Err(LabError::Range { site: n });
        }
        Ok(&self.values[k as usize])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum()
    }
}

/// Complex `l×l` matrix sequence `A_offset, A_offset+1, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSeq {
    pub offset: i64,
    pub values: Vec<CMat>,
}

impl MatrixSeq {
    pub fn get(&self, n: i64) -> Result<&CMat> {
        let k = n - self.offset;
        if k < 0 || k as usize >= self.values.len() {
            return Err(LabError::Range { site: n });
        }
        Ok(&self.values[k as usize])
    }

    pub fn last(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    /// Column `k` of every block, as a vector solution.
    pub fn column(&self, k: usize) -> VectorSeq {
        VectorSeq {
            offset: self.offset,
            values: self.values.iter().map(|m| m.column(k).into_owned()).collect(),
        }
    }
}

/// Site blocks promoted to complex, with `D^{-1}`.
#[derive(Clone, Debug)]
pub struct SiteOps {
    pub d: CMat,
    pub v: CMat,
    pub d_inv: CMat,
}

pub fn site_ops<S: SiteSource + ?Sized>(model: &S, n: i64) -> Result<SiteOps> {
    let site = model.site(n)?;
    let condition = condition_number(&site.d);
    if !(condition <= MAX_HOP_CONDITION) {
        return Err(LabError::SingularHop { site: n, condition });
    }
    let d_inv = site
        .d
        .clone()
        .lu()
        .try_inverse()
        .ok_or(LabError::SingularHop { site: n, condition })?;
    Ok(SiteOps {
        d: to_complex(&site.d),
        v: to_complex(&site.v),
        d_inv: to_complex(&d_inv),
    })
}

/// `D_n` promoted to complex.
pub fn hop<S: SiteSource + ?Sized>(model: &S, n: i64) -> Result<CMat> {
    Ok(to_complex(&model.site(n)?.d))
}

/// `(Hu)_n` for every `n` in `range`; `u` must cover `range` widened by one site.
pub fn apply_operator<S: SiteSource + ?Sized>(
    model: &S,
    u: &VectorSeq,
    range: RangeInclusive<i64>,
) -> Result<VectorSeq> {
    let (lo, hi) = (*range.start(), *range.end());
    if lo - 1 < u.first() {
        return Err(LabError::Range { site: lo - 1 });
    }
    if hi + 1 > u.last() {
        return Err(LabError::Range { site: hi + 1 });
    }
    let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
    let mut d_prev = hop(model, lo - 1)?;
    for n in lo..=hi {
        let site = model.site(n)?;
        let d = to_complex(&site.d);
        let v = to_complex(&site.v);
        out.push(&d_prev * u.get(n - 1)? + &d * u.get(n + 1)? + v * u.get(n)?);
        d_prev = d;
    }
    Ok(VectorSeq {
        offset: lo,
        values: out,
    })
}

/// `W(n) = u_nᵗ D_{n-1} v_{n-1} - v_nᵗ D_{n-1} u_{n-1}` (bilinear, no conjugation).
pub fn wronskian<S: SiteSource + ?Sized>(model: &S, u: &VectorSeq, v: &VectorSeq, n: i64) -> Result<C64> {
    let d = hop(model, n - 1)?;
    let a = u.get(n)?.transpose() * &d * v.get(n - 1)?;
    let b = v.get(n)?.transpose() * &d * u.get(n - 1)?;
    Ok(a[(0, 0)] - b[(0, 0)])
}

/// Matrix Wronskian `W_[A,B](m) = A_{m-1}ᵗ D_{m-1} B_m - A_mᵗ D_{m-1} B_{m-1}`.
pub fn matrix_wronskian<S: SiteSource + ?Sized>(model: &S, a: &MatrixSeq, b: &MatrixSeq, m: i64) -> Result<CMat> {
    let d = hop(model, m - 1)?;
    Ok(a.get(m - 1)?.transpose() * &d * b.get(m)? - a.get(m)?.transpose() * &d * b.get(m - 1)?)
}

/// Absolute defect of the discrete Green formula on `[m, n]`:
/// `|Σ_k ((Hu)_kᵗ v_k - (Hv)_kᵗ u_k) - (W(n+1) - W(m))|`.
pub fn green_formula_defect<S: SiteSource + ?Sized>(
    model: &S,
    u: &VectorSeq,
    v: &VectorSeq,
    m: i64,
    n: i64,
) -> Result<f64> {
    if n <= m {
        return Err(LabError::InvalidArgument(format!(
            "Green formula needs n > m (got m={m}, n={n})"
        )));
    }
    let hu = apply_operator(model, u, m..=n)?;
    let hv = apply_operator(model, v, m..=n)?;
    let mut sum = C64::new(0.0, 0.0);
    for k in m..=n {
        sum += hu.get(k)?.dot(v.get(k)?) - hv.get(k)?.dot(u.get(k)?);
    }
    let boundary = wronskian(model, u, v, n + 1)? - wronskian(model, u, v, m)?;
    Ok((sum - boundary).norm())
}

/// Neumann (`ψ₀ = I, ψ₁ = 0`) and Dirichlet (`φ₀ = 0, φ₁ = I`) matrix solutions on sites `0..=n_max`.
///
/// Blocks are stored rescaled: the true value at site `n` is
/// `exp(log_scale[n]) · stored[n]`. Both sequences share the scale so any
/// linear relation between them survives the rescaling.
#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub z: C64,
    pub psi: MatrixSeq,
    pub phi: MatrixSeq,
    pub log_scale: Vec<f64>,
}

impl SolutionPair {
    pub fn is_scaled(&self) -> bool {
        self.log_scale.iter().any(|&s| s != 0.0)
    }

    /// Unscaled `(ψ_n, φ_n)`.
    pub fn at(&self, n: i64) -> Result<(CMat, CMat)> {
        let k = n as usize;
        let s = self.log_scale.get(k).ok_or(LabError::Range { site: n })?.exp();
        Ok((self.psi.get(n)? * C64::from(s), self.phi.get(n)? * C64::from(s)))
    }
}

const RESCALE_ABOVE: f64 = 1e64;

pub fn dirichlet_neumann_solutions<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize) -> Result<SolutionPair> {
    if n_max < 1 {
        return Err(LabError::InvalidArgument("n_max must be at least 1".into()));
    }
    let l = model.block_size();
    let mut psi = vec![identity(l), CMat::zeros(l, l)];
    let mut phi = vec![CMat::zeros(l, l), identity(l)];
    let mut log_scale = vec![0.0, 0.0];
    let mut scale = 0.0;
    // (previous, current) in the running scale
    let (mut psi_prev, mut psi_cur) = (psi[0].clone(), psi[1].clone());
    let (mut phi_prev, mut phi_cur) = (phi[0].clone(), phi[1].clone());
    let mut d_prev = hop(model, 0)?;
    for n in 1..n_max as i64 {
        let ops = site_ops(model, n)?;
        let shift = identity(l) * z - &ops.v;
        let psi_next = &ops.d_inv * (&shift * &psi_cur - &d_prev * &psi_prev);
        let phi_next = &ops.d_inv * (&shift * &phi_cur - &d_prev * &phi_prev);
        psi_prev = std::mem::replace(&mut psi_cur, psi_next);
        phi_prev = std::mem::replace(&mut phi_cur, phi_next);
        let size = frobenius(&psi_cur).max(frobenius(&phi_cur));
        if !size.is_finite() {
            return Err(LabError::NumericBlowup { steps: n as usize });
        }
        if size > RESCALE_ABOVE {
            let inv = C64::from(1.0 / size);
            psi_prev *= inv;
            psi_cur *= inv;
            phi_prev *= inv;
            phi_cur *= inv;
            scale += size.ln();
        }
        psi.push(psi_cur.clone());
        phi.push(phi_cur.clone());
        log_scale.push(scale);
        d_prev = ops.d;
    }
    Ok(SolutionPair {
        z,
        psi: MatrixSeq { offset: 0, values: psi },
        phi: MatrixSeq { offset: 0, values: phi },
        log_scale,
    })
}

/// Residuals of the three bilinear identities between `ψ` and `φ`:
/// `ψ_n D₀⁻¹ φ_nᵗ - φ_n D₀⁻¹ ψ_nᵗ = 0`, `ψ_n D₀⁻¹ φ_{n+1}ᵗ - φ_n D₀⁻¹ ψ_{n+1}ᵗ = D_n⁻¹`
/// and `ψ_{n+1} D₀⁻¹ φ_nᵗ - φ_{n+1} D₀⁻¹ ψ_nᵗ = -D_n⁻¹`, maximized over `0 ≤ n < n_max`.
///
/// Each residual is relative to the size of the terms it cancels, so it is
/// meaningful for exponentially growing solutions as well.
pub fn solution_identity_residuals<S: SiteSource + ?Sized>(model: &S, z: C64, n_max: usize) -> Result<[f64; 3]> {
    let sol = dirichlet_neumann_solutions(model, z, n_max.max(1))?;
    let d0_inv = site_ops(model, 0)?.d_inv;
    let k0 = frobenius(&d0_inv);
    let mut worst = [0.0f64; 3];
    for n in 0..n_max.min(sol.phi.values.len() - 1) as i64 {
        let (p0, f0) = (sol.psi.get(n)?, sol.phi.get(n)?);
        let (p1, f1) = (sol.psi.get(n + 1)?, sol.phi.get(n + 1)?);
        let dn_inv = site_ops(model, n)?.d_inv;
        let span =
            |a: &CMat, b: &CMat, c: &CMat, d: &CMat| k0 * (frobenius(a) * frobenius(b) + frobenius(c) * frobenius(d));
        let a = p0 * &d0_inv * f0.transpose() - f0 * &d0_inv * p0.transpose();
        worst[0] = worst[0].max(frobenius(&a) / span(p0, f0, f0, p0).max(f64::MIN_POSITIVE));
        // stored blocks carry exp(-s_n - s_{n+1}) relative to the true ones
        let undo = (-(sol.log_scale[n as usize] + sol.log_scale[n as usize + 1])).exp();
        let target = &dn_inv * C64::from(undo);
        let b = p0 * &d0_inv * f1.transpose() - f0 * &d0_inv * p1.transpose();
        let c = p1 * &d0_inv * f0.transpose() - f1 * &d0_inv * p0.transpose();
        let scale = span(p0, f1, f0, p1) + frobenius(&target);
        worst[1] = worst[1].max(frobenius(&(b - &target)) / scale);
        worst[2] = worst[2].max(frobenius(&(c + &target)) / scale);
    }
    Ok(worst)
}

/// `max_{m<k≤n} |W(k) - W(m)|` relative to the largest single Wronskian term on the window.
pub fn wronskian_constancy_defect<S: SiteSource + ?Sized>(
    model: &S,
    u: &VectorSeq,
    v: &VectorSeq,
    m: i64,
    n: i64,
) -> Result<f64> {
    let w0 = wronskian(model, u, v, m)?;
    let mut size = 0.0f64;
    let mut worst = 0.0f64;
    for k in m..=n {
        let d = hop(model, k - 1)?;
        let a = (u.get(k)?.transpose() * &d * v.get(k - 1)?)[(0, 0)].norm();
        let b = (v.get(k)?.transpose() * &d * u.get(k - 1)?)[(0, 0)].norm();
        size = size.max(a).max(b);
        worst = worst.max((wronskian(model, u, v, k)? - w0).norm());
    }
    Ok(if size > 0.0 { worst / size } else { worst })
}

/// Residual of the eigenvalue equation `D_{n-1}A_{n-1} + D_n A_{n+1} + (V_n - z)A_n` at site `n`.
pub fn eigen_residual<S: SiteSource + ?Sized>(model: &S, a: &MatrixSeq, z: C64, n: i64) -> Result<CMat> {
    let l = model.block_size();
    let site = model.site(n)?;
    let d_prev = hop(model, n - 1)?;
    let v = to_complex(&site.v) - identity(l) * z;
    Ok(d_prev * a.get(n - 1)? + to_complex(&site.d) * a.get(n + 1)? + v * a.get(n)?)
}

/// Restriction of the operator to sites `1..=N` with `u_0 = u_{N+1} = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDirichletMatrix {
    pub sites: usize,
    pub block: usize,
    /// Real symmetric `N·l × N·l`; row `(n-1)·l + i` is component `i` of site `n`.
    pub matrix: RMat,
}

impl FiniteDirichletMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        if ev.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Eigen("non-finite eigenvalue".into()));
        }
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn to_complex(&self) -> CMat {
        to_complex(&self.matrix)
    }
}

pub fn finite_dirichlet_matrix<S: SiteSource + ?Sized>(model: &S, n: usize) -> Result<FiniteDirichletMatrix> {
    if n == 0 {
        return Err(LabError::InvalidArgument("truncation needs N >= 1".into()));
    }
    let l = model.block_size();
    let mut h = RMat::zeros(n * l, n * l);
    for k in 0..n {
        let site = model.site(k as i64 + 1)?;
        h.view_mut((k * l, k * l), (l, l)).copy_from(&site.v);
        if k + 1 < n {
            h.view_mut((k * l, (k + 1) * l), (l, l)).copy_from(&site.d);
            h.view_mut(((k + 1) * l, k * l), (l, l)).copy_from(&site.d.transpose());
        }
    }
    Ok(FiniteDirichletMatrix {
        sites: n,
        block: l,
        matrix: h,
    })
}

/// Window `[lo, hi]` of the model as a dense matrix with zero boundary outside.
pub fn window_matrix<S: SiteSource + ?Sized>(model: &S, lo: i64, hi: i64) -> Result<RMat> {
    let shifted = crate::ergodic::Shifted {
        inner: model,
        offset: lo - 1,
    };
    Ok(finite_dirichlet_matrix(&shifted, (hi - lo + 1) as usize)?.matrix)
}
