//! Nyström feature maps and the exact self-projection used for alignment.
//!
//! With pivots equal to the data, `X = Z = [Φ, Φ*]`, and a linear kernel the
//! Nyström map collapses to `Π(X) = Z̄X = (X^T X)^½` where
//! `Z̄ = (X^T X)^-½ X^T` has orthonormal rows. Scatter matrices of the
//! projected columns are congruent to the ambient ones by a partial isometry,
//! so every rotation-invariant distance is preserved while the side drops
//! from `d` to `N + N*`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{eig_sym, spd_fn_from_eig, symmetrize, SpectralFn, SymMatrix, EIGENVALUE_FLOOR};

/// Jitter added to the pivot kernel matrix before its inverse square root.
pub const PIVOT_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Kernel {
    #[default]
    Linear,
    /// `exp(−‖x − y‖² / (2σ²))`.
    Gaussian { sigma: f64 },
    /// `(x·y + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl Kernel {
    fn eval(&self, x: nalgebra::DVectorView<'_, f64>, y: nalgebra::DVectorView<'_, f64>) -> f64 {
        match *self {
            Kernel::Linear => x.dot(&y),
            Kernel::Gaussian { sigma } => (-(x - y).norm_squared() / (2.0 * sigma * sigma)).exp(),
            Kernel::Polynomial { degree, offset } => (x.dot(&y) + offset).powi(degree as i32),
        }
    }

    /// `K[i, j] = k(a_i, b_j)` over columns.
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        if let Kernel::Linear = self {
            return a.transpose() * b;
        }
        DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| self.eval(a.column(i), b.column(j)))
    }
}

/// `K_ZZ^-½ K_ZX` for pivots `Z` (d×N') and data `X` (d×N).
pub fn nystrom_map(pivots: &DMatrix<f64>, data: &DMatrix<f64>, kernel: Kernel) -> Result<DMatrix<f64>> {
    if pivots.nrows() != data.nrows() {
        return Err(Error::dim(format!(
            "pivots have dimension {}, data has {}",
            pivots.nrows(),
            data.nrows()
        )));
    }
    if pivots.ncols() == 0 {
        return Err(Error::Empty("no pivots".into()));
    }
    if let Kernel::Gaussian { sigma } = kernel {
        if !(sigma > 0.0) {
            return Err(Error::param(format!("gaussian kernel width must be positive, got {sigma}")));
        }
    }
    let k_zz = symmetrize(&kernel.matrix(pivots, pivots))?;
    let mut eig = eig_sym(&k_zz)?;
    if !(eig.smallest() > EIGENVALUE_FLOOR) {
        return Err(Error::Singular {
            smallest: eig.smallest(),
            floor: EIGENVALUE_FLOOR,
        });
    }
    for v in &mut eig.values {
        *v += PIVOT_JITTER;
    }
    let inv_root = spd_fn_from_eig(&eig, SpectralFn::InvSqrt)?;
    Ok(inv_root.as_matrix() * kernel.matrix(pivots, data))
}

/// The projector `Z̄ = (X^T X)^-½ X^T` of one class pair.
#[derive(Debug, Clone)]
pub struct Projection {
    projector: DMatrix<f64>,
}

impl Projection {
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn reduced_dim(&self) -> usize {
        self.projector.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.projector.ncols()
    }

    pub fn apply(&self, columns: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if columns.nrows() != self.ambient_dim() {
            return Err(Error::dim(format!(
                "projector expects dimension {}, got {}",
                self.ambient_dim(),
                columns.nrows()
            )));
        }
        Ok(&self.projector * columns)
    }
}

/// Output of [`isometric_project`].
#[derive(Debug, Clone)]
pub struct Reduced {
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
    pub projection: Projection,
}

/// Projects `[Φ, Φ*]` onto itself: the reduced columns are `(X^T X)^½`.
///
/// Eigenvalues of `X^T X` within round-off of zero (relative to the largest)
/// are treated as exact zeros: they contribute nothing to the square root and
/// their rows of `Z̄` are dropped to zero. The remaining eigenvalues are
/// floored at [`EIGENVALUE_FLOOR`] inside the inverse square root. Rank
/// deficient inputs therefore still give the exact `Π(X)` and a finite,
/// partially isometric projector.
pub fn isometric_project(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Reduced> {
    let d = source.nrows();
    if d == 0 || target.nrows() != d {
        return Err(Error::dim(format!(
            "source dimension {d} and target dimension {} must match and be positive",
            target.nrows()
        )));
    }
    let (n, n_star) = (source.ncols(), target.ncols());
    if n + n_star == 0 {
        return Err(Error::Empty("no columns to project".into()));
    }
    let mut x = DMatrix::zeros(d, n + n_star);
    x.columns_mut(0, n).copy_from(source);
    x.columns_mut(n, n_star).copy_from(target);

    let gram = symmetrize(&(x.transpose() * &x))?;
    let eig = eig_sym(&gram)?;
    let largest = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = largest * (n + n_star) as f64 * f64::EPSILON;
    let kept = |v: f64| v > rank_tol;
    let sqrt_vals: Vec<f64> = eig.values.iter().map(|&v| if kept(v) { v.sqrt() } else { 0.0 }).collect();
    let isqrt_vals: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if kept(v) { 1.0 / v.max(EIGENVALUE_FLOOR).sqrt() } else { 0.0 })
        .collect();

    let root = SymMatrix::from_spectrum(&eig.vectors, &sqrt_vals).into_matrix();
    let inv_root = SymMatrix::from_spectrum(&eig.vectors, &isqrt_vals).into_matrix();
    let projector = inv_root * x.transpose();

    Ok(Reduced {
        source: root.columns(0, n).into_owned(),
        target: root.columns(n, n_star).into_owned(),
        projection: Projection { projector },
    })
}

/// `Z̄^T · grad_reduced`, treating the projector as constant.
pub fn backproject_grad(p: &Projection, grad_reduced: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if grad_reduced.nrows() != p.reduced_dim() {
        return Err(Error::dim(format!(
            "reduced gradient has {} rows, projection has {}",
            grad_reduced.nrows(),
            p.reduced_dim()
        )));
    }
    Ok(p.projector.tr_mul(grad_reduced))
}
