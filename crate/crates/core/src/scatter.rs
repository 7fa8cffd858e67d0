//! Class means, scatter matrices and the chain rule from ∂d²/∂Σ back to
//! feature columns.
//!
//! Scatter uses population normalization: Σ = (1/N) Σ_n (φ_n − μ)(φ_n − μ)^T.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spd::{symmetrize, SymMatrix};

/// Column feature vectors with one class label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    columns: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl FeatureBlock {
    pub fn new(columns: DMatrix<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if columns.nrows() == 0 {
            return Err(Error::dim("feature dimension must be at least 1"));
        }
        if class_count == 0 {
            return Err(Error::param("class count must be at least 1"));
        }
        if labels.len() != columns.ncols() {
            return Err(Error::dim(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.ncols()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Label {
                label,
                classes: class_count,
            });
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature block".into()));
        }
        Ok(FeatureBlock {
            columns,
            labels,
            class_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Column indices of each class, in ascending column order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn select(&self, indices: &[usize]) -> FeatureBlock {
        FeatureBlock {
            columns: self.columns.select_columns(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Appends the columns of `other` after the columns of `self`.
    pub fn concat(&self, other: &FeatureBlock) -> Result<FeatureBlock> {
        if self.dim() != other.dim() || self.class_count != other.class_count {
            return Err(Error::dim("cannot concatenate blocks of different shape"));
        }
        let mut columns = DMatrix::zeros(self.dim(), self.count() + other.count());
        columns.columns_mut(0, self.count()).copy_from(&self.columns);
        columns.columns_mut(self.count(), other.count()).copy_from(&other.columns);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(FeatureBlock {
            columns,
            labels,
            class_count: self.class_count,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClassStats {
    pub mean: DVector<f64>,
    pub scatter: SymMatrix,
    pub count: usize,
}

pub fn mean_and_scatter(columns: &DMatrix<f64>) -> Result<ClassStats> {
    let n = columns.ncols();
    if n == 0 {
        return Err(Error::Empty("cannot compute statistics of zero columns".into()));
    }
    let mean = columns.column_mean();
    let centered = centered(columns, &mean);
    let scatter = symmetrize(&(&centered * centered.transpose() / n as f64))?;
    Ok(ClassStats {
        mean,
        scatter,
        count: n,
    })
}

fn centered(columns: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = columns.clone();
    for mut col in c.column_iter_mut() {
        col -= mean;
    }
    c
}

/// `(2/N) · G · (Φ − μ1^T)` for `G = ∂d²/∂Σ` of the stream that produced `columns`.
pub fn grad_wrt_features(grad_sigma: &SymMatrix, columns: &DMatrix<f64>, stats: &ClassStats) -> Result<DMatrix<f64>> {
    if grad_sigma.side() != columns.nrows() || stats.mean.len() != columns.nrows() {
        return Err(Error::dim(format!(
            "scatter gradient side {} does not match feature dimension {}",
            grad_sigma.side(),
            columns.nrows()
        )));
    }
    if stats.count != columns.ncols() || columns.ncols() == 0 {
        return Err(Error::dim(format!(
            "statistics were computed from {} columns, got {}",
            stats.count,
            columns.ncols()
        )));
    }
    let scale = 2.0 / columns.ncols() as f64;
    Ok(grad_sigma.as_matrix() * centered(columns, &stats.mean) * scale)
}

/// Mean alignment term `‖μ − μ*‖²`.
#[derive(Debug, Clone)]
pub struct MeanAlignment {
    pub loss: f64,
    /// Gradient with respect to every source column (identical for all columns).
    pub source_column_grad: DVector<f64>,
    /// Gradient with respect to every target column.
    pub target_column_grad: DVector<f64>,
}

pub fn mean_align(source: &ClassStats, target: &ClassStats) -> Result<MeanAlignment> {
    if source.mean.len() != target.mean.len() {
        return Err(Error::dim(format!(
            "mean dimensions differ: {} vs {}",
            source.mean.len(),
            target.mean.len()
        )));
    }
    let diff = &source.mean - &target.mean;
    Ok(MeanAlignment {
        loss: diff.norm_squared(),
        source_column_grad: &diff * (2.0 / source.count as f64),
        target_column_grad: &diff * (-2.0 / target.count as f64),
    })
}

/// Broadcasts a per-column gradient to a `dim × count` matrix.
pub fn broadcast_columns(column: &DVector<f64>, count: usize) -> DMatrix<f64> {
    DMatrix::from_fn(column.len(), count, |i, _| column[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, values.len(), values)
    }

    #[test]
    fn single_column_has_zero_scatter() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 4.0]);
        let s = mean_and_scatter(&v).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, -2.0, 4.0]);
        assert_eq!(s.scatter, SymMatrix::zeros(3));
    }

    #[test]
    fn scalar_scatter() {
        let s = mean_and_scatter(&row(&[1.0, 3.0])).unwrap();
        assert_eq!(s.mean[0], 2.0);
        assert_eq!(s.scatter[(0, 0)], 1.0);
    }

    #[test]
    fn identical_columns() {
        let c = DMatrix::from_column_slice(2, 2, &[0.5, 1.5, 0.5, 1.5]);
        assert_eq!(mean_and_scatter(&c).unwrap().scatter, SymMatrix::zeros(2));
    }

    #[test]
    fn empty_block() {
        assert!(matches!(mean_and_scatter(&DMatrix::zeros(3, 0)), Err(Error::Empty(_))));
    }

    #[test]
    fn feature_gradient_examples() {
        let cols = row(&[1.0, 3.0]);
        let stats = mean_and_scatter(&cols).unwrap();
        let g = grad_wrt_features(&SymMatrix::identity(1), &cols, &stats).unwrap();
        assert_eq!(g, row(&[-1.0, 1.0]));

        let g = grad_wrt_features(&SymMatrix::zeros(1), &cols, &stats).unwrap();
        assert_eq!(g, row(&[0.0, 0.0]));

        let single = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let st = mean_and_scatter(&single).unwrap();
        let g = grad_wrt_features(&SymMatrix::identity(2), &single, &st).unwrap();
        assert_eq!(g, DMatrix::zeros(2, 1));
    }

    #[test]
    fn feature_gradient_dim_mismatch() {
        let cols = row(&[1.0, 3.0]);
        let stats = mean_and_scatter(&cols).unwrap();
        assert!(matches!(
            grad_wrt_features(&SymMatrix::identity(2), &cols, &stats),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn mean_align_examples() {
        let s = mean_and_scatter(&row(&[1.0, 3.0])).unwrap();
        let t = mean_and_scatter(&row(&[0.0])).unwrap();
        let m = mean_align(&s, &t).unwrap();
        assert_eq!(m.loss, 4.0);
        assert_eq!(m.source_column_grad[0], 2.0);
        assert_eq!(m.target_column_grad[0], -4.0);

        let swapped = mean_align(&t, &s).unwrap();
        assert_eq!(swapped.loss, 4.0);
        assert_eq!(swapped.source_column_grad[0], -4.0);
        assert_eq!(swapped.target_column_grad[0], 2.0);

        let same = mean_align(&s, &s).unwrap();
        assert_eq!(same.loss, 0.0);
        assert_eq!(same.source_column_grad[0], 0.0);
    }

    #[test]
    fn mean_align_dim_mismatch() {
        let s = mean_and_scatter(&row(&[1.0])).unwrap();
        let t = mean_and_scatter(&DMatrix::from_column_slice(2, 1, &[1.0, 2.0])).unwrap();
        assert!(matches!(mean_align(&s, &t), Err(Error::Dimension(_))));
    }

    #[test]
    fn block_validation() {
        let cols = DMatrix::zeros(2, 2);
        assert!(matches!(FeatureBlock::new(cols.clone(), vec![0], 2), Err(Error::Dimension(_))));
        assert!(matches!(FeatureBlock::new(cols.clone(), vec![0, 2], 2), Err(Error::Label { label: 2, classes: 2 })));
        let mut bad = cols.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(FeatureBlock::new(bad, vec![0, 1], 2), Err(Error::NonFinite(_))));
        let b = FeatureBlock::new(cols, vec![1, 0], 2).unwrap();
        assert_eq!(b.class_indices(), vec![vec![1], vec![0]]);
    }
}
