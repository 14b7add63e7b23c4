//! Ergodic base systems and the site data `(D_n, V_n)` they induce.
//!
//! Every model is a pure function of the site index `n ∈ ℤ`: the i.i.d. kind
//! keys a counter-based generator by `(seed, n)`, the rotation and periodic
//! kinds evaluate closed-form symbols. Negative indices are first-class so
//! two-sided constructions (the `-` half-line, inverse transfer products)
//! never need to stream from the origin.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{condition_number, log_abs_det_real, RMat};
use crate::{LabError, Result};

/// Smallest admissible `|det D_n|`.
pub const DET_FLOOR: f64 = 1e-8;

/// Hopping and potential blocks at one site.
#[derive(Clone, Debug, PartialEq)]
pub struct SitePayload {
    pub d: RMat,
    pub v: RMat,
}

impl SitePayload {
    pub fn block_size(&self) -> usize {
        self.d.nrows()
    }

    pub fn log_abs_det_d(&self) -> f64 {
        log_abs_det_real(&self.d)
    }
}

/// Anything that can produce site data over ℤ.
///
/// Implemented by [`ErgodicModel`] and by the index-remapping views
/// [`Shifted`] and [`Reflected`].
pub trait SiteSource: Sync {
    fn block_size(&self) -> usize;
    fn site(&self, n: i64) -> Result<SitePayload>;
}

impl<S: SiteSource + ?Sized> SiteSource for &S {
    fn block_size(&self) -> usize {
        (**self).block_size()
    }
    fn site(&self, n: i64) -> Result<SitePayload> {
        (**self).site(n)
    }
}

/// Hopping symbol for the rotation kind.
#[derive(Clone, Debug, PartialEq)]
pub enum HopSymbol {
    /// `D(θ) = c·I`
    Constant(f64),
    /// `D(θ) = (2 + cos 2πθ)·I`
    Cosine,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// `D ≡ hop·I`, `V ≡ shift·I`.
    Free { hop: f64, shift: f64 },
    /// Irrational rotation `θ_n = θ₀ + nα mod 1` with `V(θ) = 2λ cos(2πθ)·I`.
    Rotation {
        alpha: f64,
        theta0: f64,
        lambda: f64,
        hop: HopSymbol,
    },
    /// Independent sites. `V` has entries uniform on `[-potential_width, potential_width]`,
    /// `D = hop_mean·I + S` with `S` symmetric and entries uniform on `[-hop_spread, hop_spread]`.
    Iid {
        seed: u64,
        potential_width: f64,
        hop_mean: f64,
        hop_spread: f64,
    },
    /// Period-`p` list of `(D, V)` blocks; site `n` uses entry `n mod p`.
    Periodic { blocks: Vec<(RMat, RMat)> },
}

/// A validated ergodic model with block size `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicModel {
    l: usize,
    kind: ModelKind,
}

impl ErgodicModel {
    pub fn new(l: usize, kind: ModelKind) -> Result<Self> {
        if l == 0 {
            return Err(LabError::InvalidModel("block size must be at least 1".into()));
        }
        let model = ErgodicModel { l, kind };
        model.validate()?;
        Ok(model)
    }

    /// The discrete Laplacian: `l = 1`, `D ≡ 1`, `V ≡ 0`.
    pub fn free_scalar() -> Self {
        Self::free(1, 1.0, 0.0).expect("free model is valid")
    }

    pub fn free(l: usize, hop: f64, shift: f64) -> Result<Self> {
        Self::new(l, ModelKind::Free { hop, shift })
    }

    pub fn iid(l: usize, seed: u64, potential_width: f64, hop_mean: f64, hop_spread: f64) -> Result<Self> {
        Self::new(
            l,
            ModelKind::Iid {
                seed,
                potential_width,
                hop_mean,
                hop_spread,
            },
        )
    }

    pub fn periodic(blocks: Vec<(RMat, RMat)>) -> Result<Self> {
        let l = blocks.first().map(|(d, _)| d.nrows()).unwrap_or(0);
        if blocks.is_empty() {
            return Err(LabError::InvalidModel("periodic model needs at least one block".into()));
        }
        Self::new(l, ModelKind::Periodic { blocks })
    }

    pub fn almost_mathieu(l: usize, alpha: f64, theta0: f64, lambda: f64) -> Result<Self> {
        Self::new(
            l,
            ModelKind::Rotation {
                alpha,
                theta0,
                lambda,
                hop: HopSymbol::Constant(1.0),
            },
        )
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Same model with the i.i.d. seed replaced; other kinds are returned unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut m = self.clone();
        if let ModelKind::Iid { seed: s, .. } = &mut m.kind {
            *s = seed;
        }
        m
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidModel(msg));
        match &self.kind {
            ModelKind::Free { hop, shift } => {
                if !hop.is_finite() || !shift.is_finite() {
                    return bad("free model parameters must be finite".into());
                }
                if hop.abs().powi(self.l as i32) < DET_FLOOR {
                    return bad(format!("|det D| = |{hop}|^{} below det floor", self.l));
                }
            }
            ModelKind::Rotation {
                alpha,
                theta0,
                lambda,
                hop,
            } => {
                if ![*alpha, *theta0, *lambda].iter().all(|x| x.is_finite()) {
                    return bad("rotation parameters must be finite".into());
                }
                if let HopSymbol::Constant(c) = hop {
                    if c.abs().powi(self.l as i32) < DET_FLOOR {
                        return bad(format!("constant hopping {c} below det floor"));
                    }
                }
            }
            ModelKind::Iid {
                potential_width,
                hop_mean,
                hop_spread,
                ..
            } => {
                if ![*potential_width, *hop_mean, *hop_spread].iter().all(|x| x.is_finite()) {
                    return bad("i.i.d. parameters must be finite".into());
                }
                if *potential_width < 0.0 || *hop_spread < 0.0 {
                    return bad("i.i.d. widths must be non-negative".into());
                }
            }
            ModelKind::Periodic { blocks } => {
                for (k, (d, v)) in blocks.iter().enumerate() {
                    for (name, m) in [("D", d), ("V", v)] {
                        if m.nrows() != self.l || m.ncols() != self.l {
                            return bad(format!("periodic {name}[{k}] is not {0}x{0}", self.l));
                        }
                        if m != &m.transpose() {
                            return bad(format!("periodic {name}[{k}] is not symmetric"));
                        }
                        if m.iter().any(|x| !x.is_finite()) {
                            return bad(format!("periodic {name}[{k}] has non-finite entries"));
                        }
                    }
                    if log_abs_det_real(d) < DET_FLOOR.ln() {
                        return bad(format!("periodic D[{k}] below det floor"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rotation coordinate `θ_n ∈ [0, 1)`; `None` for non-rotation kinds.
    pub fn rotation_phase(&self, n: i64) -> Option<f64> {
        match &self.kind {
            ModelKind::Rotation { alpha, theta0, .. } => Some((theta0 + n as f64 * alpha).rem_euclid(1.0)),
            _ => None,
        }
    }

    /// Diagonal shift added to the i.i.d. hopping block at site `n` to reach the det floor.
    pub fn hop_shift(&self, n: i64) -> f64 {
        match &self.kind {
            ModelKind::Iid {
                seed,
                potential_width,
                hop_mean,
                hop_spread,
            } => iid_site(self.l, *seed, n, *potential_width, *hop_mean, *hop_spread).1,
            _ => 0.0,
        }
    }

    pub fn sample_site(&self, n: i64) -> Result<SitePayload> {
        let l = self.l;
        let payload = match &self.kind {
            ModelKind::Free { hop, shift } => SitePayload {
                d: RMat::identity(l, l) * *hop,
                v: RMat::identity(l, l) * *shift,
            },
            ModelKind::Rotation { lambda, hop, .. } => {
                let theta = self.rotation_phase(n).expect("rotation kind");
                let d = match hop {
                    HopSymbol::Constant(c) => *c,
                    HopSymbol::Cosine => 2.0 + (TAU * theta).cos(),
                };
                SitePayload {
                    d: RMat::identity(l, l) * d,
                    v: RMat::identity(l, l) * (2.0 * lambda * (TAU * theta).cos()),
                }
            }
            ModelKind::Iid {
                seed,
                potential_width,
                hop_mean,
                hop_spread,
            } => iid_site(l, *seed, n, *potential_width, *hop_mean, *hop_spread).0,
            ModelKind::Periodic { blocks } => {
                let k = n.rem_euclid(blocks.len() as i64) as usize;
                let (d, v) = &blocks[k];
                SitePayload {
                    d: d.clone(),
                    v: v.clone(),
                }
            }
        };
        if log_abs_det_real(&payload.d) < DET_FLOOR.ln() {
            return Err(LabError::InvalidModel(format!("|det D_{n}| below det floor")));
        }
        Ok(payload)
    }
}

impl SiteSource for ErgodicModel {
    fn block_size(&self) -> usize {
        self.l
    }
    fn site(&self, n: i64) -> Result<SitePayload> {
        self.sample_site(n)
    }
}

fn uniform_symmetric(rng: &mut ChaCha8Rng, l: usize, width: f64) -> RMat {
    let mut m = RMat::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let x = width * (2.0 * rng.random::<f64>() - 1.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

/// Site `n` of the i.i.d. kind and the diagonal shift that was needed.
fn iid_site(l: usize, seed: u64, n: i64, potential_width: f64, hop_mean: f64, hop_spread: f64) -> (SitePayload, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let v = uniform_symmetric(&mut rng, l, potential_width);
    let mut d = uniform_symmetric(&mut rng, l, hop_spread);
    for i in 0..l {
        d[(i, i)] += hop_mean;
    }
    let mut shift = 0.0;
    let mut step = 1e-3 * hop_mean.abs().max(1.0);
    while log_abs_det_real(&d) < DET_FLOOR.ln() || condition_number(&d) > 1e12 {
        shift += step;
        for i in 0..l {
            d[(i, i)] += step;
        }
        step *= 2.0;
    }
    (SitePayload { d, v }, shift)
}

/// `(1/N) Σ_{n=0}^{N-1} f(site n)`.
pub fn birkhoff_average<S, F>(model: &S, f: F, n: usize) -> Result<f64>
where
    S: SiteSource + ?Sized,
    F: Fn(&SitePayload) -> f64,
{
    if n == 0 {
        return Err(LabError::InvalidArgument("Birkhoff average needs N >= 1".into()));
    }
    // Neumaier summation keeps constant observables exact to rounding
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    for k in 0..n as i64 {
        let x = f(&model.site(k)?);
        let t = acc + x;
        comp += if acc.abs() >= x.abs() {
            (acc - t) + x
        } else {
            (x - t) + acc
        };
        acc = t;
    }
    Ok((acc + comp) / n as f64)
}

/// `T^offset ω`: site `n` of the view is site `n + offset` of the inner model.
#[derive(Clone, Copy, Debug)]
pub struct Shifted<S> {
    pub inner: S,
    pub offset: i64,
}

impl<S: SiteSource> SiteSource for Shifted<S> {
    fn block_size(&self) -> usize {
        self.inner.block_size()
    }
    fn site(&self, n: i64) -> Result<SitePayload> {
        self.inner.site(n + self.offset)
    }
}

/// Mirror image `n ↦ -n`.
///
/// A solution `u` of the inner equation gives `ũ_k = u_{-k}` for the view, whose
/// blocks are `Ṽ_k = V_{-k}` and `D̃_k = D_{-k-1}`. The `-` half-line problem
/// of the inner model is the `+` half-line problem of the view.
#[derive(Clone, Copy, Debug)]
pub struct Reflected<S> {
    pub inner: S,
}

impl<S: SiteSource> SiteSource for Reflected<S> {
    fn block_size(&self) -> usize {
        self.inner.block_size()
    }
    fn site(&self, n: i64) -> Result<SitePayload> {
        let d = self.inner.site(-n - 1)?.d;
        let v = self.inner.site(-n)?.v;
        Ok(SitePayload { d, v })
    }
}
