use crate::ergodic::SiteSource;
use crate::operator::finite_dirichlet_matrix;
use crate::{LabError, Result, C64};

/// Largest `N·l` accepted by the dense eigensolver.
pub const MAX_IDS_DIM: usize = 5000;

/// Empirical counting function `k^N(x) = #{λ ≤ x} / N` of the Dirichlet
/// truncation on sites `1..=N`. Each site carries `l` states, so `k(+∞) = l`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdsHistogram {
    pub sites: usize,
    pub block: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl IdsHistogram {
    pub fn k(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&e| e <= x) as f64 / self.sites as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.eigenvalues.len() as f64 / self.sites as f64
    }

    /// `sup_x |k(x) - k'(x)|`, attained at a jump of either step function.
    pub fn sup_distance(&self, other: &IdsHistogram) -> f64 {
        self.eigenvalues
            .iter()
            .chain(other.eigenvalues.iter())
            .map(|&x| (self.k(x) - other.k(x)).abs())
            .fold(0.0, f64::max)
    }

    /// `∫ log|z - s| dk(s)`.
    pub fn log_potential(&self, z: C64) -> f64 {
        self.eigenvalues.iter().map(|&e| (z - e).norm().ln()).sum::<f64>() / self.sites as f64
    }

    /// `∫ dk(s) / (s - z)`.
    pub fn borel_transform(&self, z: C64) -> C64 {
        self.eigenvalues.iter().map(|&e| (C64::from(e) - z).inv()).sum::<C64>() / self.sites as f64
    }

    /// Points `(x, k(x))` on a uniform grid, for plotting.
    pub fn curve(&self, lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
        let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
        (0..count)
            .map(|i| {
                let x = lo + step * i as f64;
                (x, self.k(x))
            })
            .collect()
    }
}

pub fn ids_empirical<S: SiteSource + ?Sized>(model: &S, sites: usize) -> Result<IdsHistogram> {
    let l = model.block_size();
    if sites == 0 || sites * l > MAX_IDS_DIM {
        return Err(LabError::InvalidArgument(format!(
            "IDS needs 1 <= N·l <= {MAX_IDS_DIM} (got N={sites}, l={l})"
        )));
    }
    let eigenvalues = finite_dirichlet_matrix(model, sites)?.eigenvalues()?;
    Ok(IdsHistogram {
        sites,
        block: l,
        eigenvalues,
    })
}
