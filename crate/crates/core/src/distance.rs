//! Squared distances between SPD matrices and their gradients.
//!
//! | kind      | d²(A, B)                               | ∂d²/∂A                              |
//! |-----------|----------------------------------------|-------------------------------------|
//! | Frobenius | ‖A − B‖²_F                             | 2(A − B)                            |
//! | JBLD      | log\|(A + B)/2\| − ½ log\|AB\|         | (A + B)⁻¹ − ½A⁻¹                    |
//! | AIRM      | ‖log(A^-½ B A^-½)‖²_F                  | −2A^-½ log(A^-½ B A^-½) A^-½        |
//!
//! All three are symmetric in their arguments, so ∂d²/∂B is the ∂/∂A formula
//! with the arguments swapped.
//!
//! AIRM is evaluated through the generalized eigenproblem `Bw = λAw`. With
//! `W^T A W = I` the gradient is `−2 W diag(log λ) W^T`, which equals the table
//! entry. Eigenvalues below one are taken from the swapped problem, where they
//! appear as large eigenvalues and keep full relative precision.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::spd::{cholesky_lower, eig_sym, eigenvalues_sym, logdet, spd_fn, symmetrize, SpectralFn, SymMatrix, EIGENVALUE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Frobenius,
    Jbld,
    Airm,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::Frobenius, DistanceKind::Jbld, DistanceKind::Airm];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Frobenius => "frobenius",
            DistanceKind::Jbld => "jbld",
            DistanceKind::Airm => "airm",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frobenius" => Ok(DistanceKind::Frobenius),
            "jbld" => Ok(DistanceKind::Jbld),
            "airm" => Ok(DistanceKind::Airm),
            other => Err(Error::param(format!(
                "unknown distance kind '{other}' (expected frobenius, jbld or airm)"
            ))),
        }
    }
}

fn check_sides(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.side() != b.side() {
        return Err(Error::dim(format!(
            "distance arguments have sides {} and {}",
            a.side(),
            b.side()
        )));
    }
    Ok(())
}

pub fn dist_sq(kind: DistanceKind, a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_sides(a, b)?;
    match kind {
        DistanceKind::Frobenius => Ok(a.sub(b)?.frobenius_sq()),
        DistanceKind::Jbld => {
            let mid = a.add(b)?.scale(0.5);
            let v = logdet(&mid)? - 0.5 * (logdet(a)? + logdet(b)?);
            Ok(v.max(0.0))
        }
        DistanceKind::Airm => Ok(airm_logs(a, b)?.iter().map(|v| v * v).sum()),
    }
}

/// Both generalized eigenproblems of an SPD pair.
struct AirmSpectrum {
    /// `log λ` of `Bw = λAw`, ascending in λ.
    log_a: Vec<f64>,
    /// A-orthonormal eigenvectors matching `log_a`.
    vectors_a: DMatrix<f64>,
    /// `log μ` of `Aw = μBw`, ascending in μ.
    log_b: Vec<f64>,
    vectors_b: DMatrix<f64>,
}

/// `log λ` per index from whichever side holds λ as a large eigenvalue.
/// `own` ascending, `other` the swapped problem's eigenvalues, ascending.
fn merged_logs(own: &[f64], other: &[f64]) -> Result<Vec<f64>> {
    let n = own.len();
    (0..n)
        .map(|i| {
            let (lam, mu) = (own[i], other[n - 1 - i]);
            let v = if lam >= 1.0 { lam.ln() } else { -mu.ln() };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Singular {
                    smallest: lam.min(1.0 / mu),
                    floor: EIGENVALUE_FLOOR,
                })
            }
        })
        .collect()
}

fn airm_logs(a: &SymMatrix, b: &SymMatrix) -> Result<Vec<f64>> {
    let la = cholesky_lower(a)?;
    let lb = cholesky_lower(b)?;
    let lambda = eigenvalues_sym(&reduced(&la, b)?)?;
    let mu = eigenvalues_sym(&reduced(&lb, a)?)?;
    merged_logs(&lambda, &mu)
}

impl AirmSpectrum {
    fn new(a: &SymMatrix, b: &SymMatrix) -> Result<Self> {
        let la = cholesky_lower(a)?;
        let lb = cholesky_lower(b)?;
        let ea = eig_sym(&reduced(&la, b)?)?;
        let eb = eig_sym(&reduced(&lb, a)?)?;
        let log_a = merged_logs(&ea.values, &eb.values)?;
        let log_b = merged_logs(&eb.values, &ea.values)?;
        let (va, vb) = (ea.vectors, eb.vectors);
        Ok(AirmSpectrum {
            log_a,
            vectors_a: la.transpose().solve_upper_triangular(&va).ok_or_else(singular_factor)?,
            log_b,
            vectors_b: lb.transpose().solve_upper_triangular(&vb).ok_or_else(singular_factor)?,
        })
    }
}

fn singular_factor() -> Error {
    Error::Singular {
        smallest: 0.0,
        floor: EIGENVALUE_FLOOR,
    }
}

/// `L⁻¹ M L⁻ᵀ`.
fn reduced(l: &DMatrix<f64>, m: &SymMatrix) -> Result<SymMatrix> {
    let half = l.solve_lower_triangular(m.as_matrix()).ok_or_else(singular_factor)?;
    let full = l.solve_lower_triangular(&half.transpose()).ok_or_else(singular_factor)?;
    symmetrize(&full)
}

/// JBLD ∂d²/∂A.
fn jbld_grad_first(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    let sum_inv = spd_fn(&a.add(b)?, SpectralFn::Inv)?;
    let a_inv = spd_fn(a, SpectralFn::Inv)?;
    sum_inv.sub(&a_inv.scale(0.5))
}

/// Returns `(∂d²/∂a, ∂d²/∂b)`.
pub fn grad_dist_sq(kind: DistanceKind, a: &SymMatrix, b: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    check_sides(a, b)?;
    match kind {
        DistanceKind::Frobenius => {
            let g = a.sub(b)?.scale(2.0);
            let neg = g.scale(-1.0);
            Ok((g, neg))
        }
        DistanceKind::Airm => {
            let s = AirmSpectrum::new(a, b)?;
            let ga = SymMatrix::from_spectrum(&s.vectors_a, &s.log_a).scale(-2.0);
            let gb = SymMatrix::from_spectrum(&s.vectors_b, &s.log_b).scale(-2.0);
            Ok((ga, gb))
        }
        DistanceKind::Jbld => Ok((jbld_grad_first(a, b)?, jbld_grad_first(b, a)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use std::f64::consts::E;

    #[test]
    fn zero_at_identity() {
        let i3 = SymMatrix::identity(3);
        for kind in DistanceKind::ALL {
            assert_eq!(dist_sq(kind, &i3, &i3).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_examples() {
        let d = dist_sq(DistanceKind::Frobenius, &SymMatrix::from_diagonal(&[3.0, 1.0]), &SymMatrix::identity(2)).unwrap();
        assert_eq!(d, 4.0);

        let one = SymMatrix::from_diagonal(&[1.0]);
        let four = SymMatrix::from_diagonal(&[4.0]);
        let expected = 2.5f64.ln() - 0.5 * 4f64.ln();
        let d = dist_sq(DistanceKind::Jbld, &one, &four).unwrap();
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.223_143_55).abs() < 1e-8);

        let e2 = SymMatrix::from_diagonal(&[E * E]);
        let d = dist_sq(DistanceKind::Airm, &one, &e2).unwrap();
        assert!((d - 4.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_gradients() {
        let two = SymMatrix::from_diagonal(&[2.0]);
        let one = SymMatrix::from_diagonal(&[1.0]);
        let (ga, gb) = grad_dist_sq(DistanceKind::Frobenius, &two, &one).unwrap();
        assert_eq!(ga[(0, 0)], 2.0);
        assert_eq!(gb[(0, 0)], -2.0);

        let four = SymMatrix::from_diagonal(&[4.0]);
        // (1 + 4)^-1 - 1/2 and (1 + 4)^-1 - 1/8
        let (ga, gb) = grad_dist_sq(DistanceKind::Jbld, &one, &four).unwrap();
        assert!((ga[(0, 0)] + 0.3).abs() < 1e-15);
        assert!((gb[(0, 0)] - 0.075).abs() < 1e-15);
        let h = 1e-6;
        let fd = (dist_sq(DistanceKind::Jbld, &SymMatrix::from_diagonal(&[1.0 + h]), &four).unwrap()
            - dist_sq(DistanceKind::Jbld, &SymMatrix::from_diagonal(&[1.0 - h]), &four).unwrap())
            / (2.0 * h);
        assert!((fd + 0.3).abs() < 1e-8);
    }

    #[test]
    fn gradients_vanish_at_coincidence() {
        let mut rng = random::rng(1);
        let s = random::spd(&mut rng, 5, 0.1, 10.0);
        for kind in DistanceKind::ALL {
            let (ga, gb) = grad_dist_sq(kind, &s, &s).unwrap();
            assert!(ga.as_matrix().amax() < 1e-12, "{kind}: {}", ga.as_matrix().amax());
            assert!(gb.as_matrix().amax() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn side_mismatch() {
        let a = SymMatrix::identity(2);
        let b = SymMatrix::identity(3);
        for kind in DistanceKind::ALL {
            assert!(matches!(dist_sq(kind, &a, &b), Err(Error::Dimension(_))));
            assert!(matches!(grad_dist_sq(kind, &a, &b), Err(Error::Dimension(_))));
        }
    }

    #[test]
    fn singular_inputs_rejected() {
        let psd = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let id = SymMatrix::identity(2);
        for kind in [DistanceKind::Jbld, DistanceKind::Airm] {
            assert!(matches!(dist_sq(kind, &psd, &id), Err(Error::Singular { .. })), "{kind}");
            assert!(matches!(dist_sq(kind, &id, &psd), Err(Error::Singular { .. })), "{kind}");
            assert!(matches!(grad_dist_sq(kind, &psd, &id), Err(Error::Singular { .. })), "{kind}");
        }
        assert_eq!(dist_sq(DistanceKind::Frobenius, &psd, &id).unwrap(), 1.0);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("JBLD".parse::<DistanceKind>().unwrap(), DistanceKind::Jbld);
        assert!("stein".parse::<DistanceKind>().is_err());
    }
}
