//! Symmetric matrix primitives.
//!
//! [`SymMatrix`] is the carrier for scatter matrices and for gradients with
//! respect to them. Every constructor goes through [`symmetrize`], so the
//! entries are exactly symmetric and eigendecompositions never see drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues at or below this value make spectral functions fail.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Square, exactly symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn identity(side: usize) -> Self {
        SymMatrix(DMatrix::identity(side, side))
    }

    pub fn zeros(side: usize) -> Self {
        SymMatrix(DMatrix::zeros(side, side))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds `V diag(values) V^T`.
    pub fn from_spectrum(vectors: &DMatrix<f64>, values: &[f64]) -> Self {
        let mut scaled = vectors.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        SymMatrix(sym_part(&(scaled * vectors.transpose())))
    }

    pub fn side(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        SymMatrix(&self.0 * factor)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_side(self, other)?;
        Ok(SymMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_side(self, other)?;
        Ok(SymMatrix(&self.0 - &other.0))
    }

    /// `self · other · self`, symmetric whenever both factors are.
    pub fn sandwich(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_side(self, other)?;
        Ok(SymMatrix(sym_part(&(&self.0 * &other.0 * &self.0))))
    }

    /// Congruence `A · self · A^T` for an arbitrary (possibly rectangular) `A`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<SymMatrix> {
        if a.ncols() != self.side() {
            return Err(Error::dim(format!(
                "congruence factor has {} columns, matrix side is {}",
                a.ncols(),
                self.side()
            )));
        }
        Ok(SymMatrix(sym_part(&(a * &self.0 * a.transpose()))))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

fn same_side(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.side() != b.side() {
        return Err(Error::dim(format!(
            "matrix sides differ: {} vs {}",
            a.side(),
            b.side()
        )));
    }
    Ok(())
}

fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<SymMatrix> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::dim("matrix side must be at least 1"));
    }
    Ok(SymMatrix(sym_part(m)))
}

/// `s + eps·I`.
pub fn regularize(s: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param(format!(
            "regularizer must be positive and finite, got {eps}"
        )));
    }
    let mut m = s.0.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += eps;
    }
    Ok(SymMatrix(m))
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigPair {
    pub fn smallest(&self) -> f64 {
        self.values[0]
    }

    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_spectrum(&self.vectors, &self.values)
    }
}

pub fn eig_sym(s: &SymMatrix) -> Result<EigPair> {
    let n = s.side();
    let iterations = 10_000 + 100 * n;
    let eig = nalgebra::SymmetricEigen::try_new(s.0.clone(), f64::EPSILON, iterations)
        .ok_or(Error::NoConvergence { iterations })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigPair { values, vectors })
}

/// Scalar functions applied through the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralFn {
    Sqrt,
    InvSqrt,
    Log,
    Inv,
}

impl SpectralFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            SpectralFn::Sqrt => x.sqrt(),
            SpectralFn::InvSqrt => 1.0 / x.sqrt(),
            SpectralFn::Log => x.ln(),
            SpectralFn::Inv => 1.0 / x,
        }
    }
}

/// Eigenvalues only, ascending. Skips accumulating eigenvectors.
pub fn eigenvalues_sym(s: &SymMatrix) -> Result<Vec<f64>> {
    if !s.is_finite() {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let mut values: Vec<f64> = s.0.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `V diag(f(λ)) V^T`; every eigenvalue must exceed [`EIGENVALUE_FLOOR`].
pub fn spd_fn(s: &SymMatrix, f: SpectralFn) -> Result<SymMatrix> {
    let eig = eig_sym(s)?;
    spd_fn_from_eig(&eig, f)
}

pub fn spd_fn_from_eig(eig: &EigPair, f: SpectralFn) -> Result<SymMatrix> {
    check_floor(eig.smallest())?;
    let mapped: Vec<f64> = eig.values.iter().map(|&v| f.apply(v)).collect();
    Ok(SymMatrix::from_spectrum(&eig.vectors, &mapped))
}

fn check_floor(smallest: f64) -> Result<()> {
    if !(smallest > EIGENVALUE_FLOOR) {
        return Err(Error::Singular {
            smallest,
            floor: EIGENVALUE_FLOOR,
        });
    }
    Ok(())
}

/// Log-determinant of a strictly positive definite matrix.
///
/// Uses a Cholesky factorization; the eigendecomposition only runs to name
/// the offending eigenvalue when the factorization fails.
pub fn logdet(s: &SymMatrix) -> Result<f64> {
    let l = cholesky_lower(s)?;
    Ok(2.0 * l.diagonal().iter().map(|p| p.ln()).sum::<f64>())
}

/// Lower Cholesky factor. Rejects matrices whose smallest pivot² is at or
/// below the floor, naming the smallest eigenvalue in the error.
pub fn cholesky_lower(s: &SymMatrix) -> Result<DMatrix<f64>> {
    let factor = nalgebra::Cholesky::new(s.0.clone()).map(|c| c.unpack());
    if let Some(l) = &factor {
        let smallest_pivot = l.diagonal().min();
        if smallest_pivot * smallest_pivot > EIGENVALUE_FLOOR {
            return Ok(factor.unwrap());
        }
    }
    let eig = eig_sym(s)?;
    check_floor(eig.smallest())?;
    factor.ok_or(Error::Singular {
        smallest: eig.smallest(),
        floor: EIGENVALUE_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        let n = rows.len();
        let m = rows[0].len();
        DMatrix::from_fn(n, m, |i, j| rows[i][j])
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn symmetrize_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(symmetrize(&id).unwrap().as_matrix(), &id);
        let s = symmetrize(&mat(&[&[0.0, 2.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(s.as_matrix(), &mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let s = symmetrize(&mat(&[&[1.0, 5.0], &[3.0, 1.0]])).unwrap();
        assert_eq!(s.as_matrix(), &mat(&[&[1.0, 4.0], &[4.0, 1.0]]));
    }

    #[test]
    fn symmetrize_rejects_non_square() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(symmetrize(&m), Err(Error::Dimension(_))));
        let empty = DMatrix::<f64>::zeros(0, 0);
        assert!(matches!(symmetrize(&empty), Err(Error::Dimension(_))));
    }

    #[test]
    fn regularize_examples() {
        let r = regularize(&SymMatrix::zeros(2), 1e-6).unwrap();
        assert_eq!(r, SymMatrix::from_diagonal(&[1e-6, 1e-6]));
        let r = regularize(&SymMatrix::identity(2), 0.5).unwrap();
        assert_eq!(r, SymMatrix::from_diagonal(&[1.5, 1.5]));
        let r = regularize(&SymMatrix::from_diagonal(&[1.0, 0.0]), 1e-6).unwrap();
        assert_eq!(r, SymMatrix::from_diagonal(&[1.0 + 1e-6, 1e-6]));
    }

    #[test]
    fn regularize_rejects_nonpositive_eps() {
        for eps in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                regularize(&SymMatrix::identity(2), eps),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn eig_sym_examples() {
        let e = eig_sym(&SymMatrix::from_diagonal(&[2.0, 5.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 5.0]);
        let abs = e.vectors.map(f64::abs);
        assert!(close(&abs, &DMatrix::identity(2, 2), 1e-15));

        let e = eig_sym(&SymMatrix::identity(4)).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-15);
        }

        let s = symmetrize(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let e = eig_sym(&s).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eig_sym_sorts_descending_diagonal() {
        let e = eig_sym(&SymMatrix::from_diagonal(&[9.0, -1.0, 4.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 4.0, 9.0]);
        assert!(close(&e.reconstruct().into_matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, -1.0, 4.0])), 1e-14));
    }

    #[test]
    fn spd_fn_examples() {
        let four = SymMatrix::identity(2).scale(4.0);
        let r = spd_fn(&four, SpectralFn::Sqrt).unwrap();
        assert!(close(r.as_matrix(), &(DMatrix::identity(2, 2) * 2.0), 1e-14));

        let r = spd_fn(&SymMatrix::from_diagonal(&[E]), SpectralFn::Log).unwrap();
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);

        let s = symmetrize(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        let r = spd_fn(&s, SpectralFn::Inv).unwrap();
        let expected = mat(&[&[2.0, -1.0], &[-1.0, 2.0]]) / 3.0;
        assert!(close(r.as_matrix(), &expected, 1e-14));
    }

    #[test]
    fn spd_fn_reports_smallest_eigenvalue() {
        let s = SymMatrix::from_diagonal(&[1.0, 1e-13]);
        match spd_fn(&s, SpectralFn::InvSqrt) {
            Err(Error::Singular { smallest, floor }) => {
                assert_eq!(smallest, 1e-13);
                assert_eq!(floor, EIGENVALUE_FLOOR);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
        let neg = SymMatrix::from_diagonal(&[1.0, -2.0]);
        assert!(matches!(spd_fn(&neg, SpectralFn::Log), Err(Error::Singular { smallest, .. }) if smallest == -2.0));
    }

    #[test]
    fn logdet_examples() {
        assert_eq!(logdet(&SymMatrix::identity(5)).unwrap(), 0.0);
        assert!((logdet(&SymMatrix::from_diagonal(&[2.0, 3.0])).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!((logdet(&SymMatrix::from_diagonal(&[E * E])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn logdet_singular_names_eigenvalue() {
        let s = SymMatrix::from_diagonal(&[3.0, 0.0]);
        assert!(matches!(logdet(&s), Err(Error::Singular { smallest, .. }) if smallest == 0.0));
        let s = SymMatrix::from_diagonal(&[3.0, -0.5]);
        assert!(matches!(logdet(&s), Err(Error::Singular { smallest, .. }) if smallest == -0.5));
    }
}
