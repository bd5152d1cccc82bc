//! Thin wrappers over faer's dense complex LU.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub use faer::c64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = Mat<c64>;

/// Reciprocal pivot-growth bound below which a factorization is declared singular.
const RCOND_FLOOR: f64 = f64::EPSILON;

/// LU with partial pivoting plus a cheap conditioning estimate taken from
/// the spread of U's diagonal.
pub struct Factorized {
    lu: faer::linalg::solvers::PartialPivLu<c64>,
    condition: f64,
}

impl Factorized {
    /// Factors `a`. `freq_hz` only labels the error.
    pub fn new(a: MatRef<'_, c64>, freq_hz: f64) -> Result<Self> {
        let lu = a.partial_piv_lu();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &d in lu.U().diagonal().column_vector().iter() {
            let m = d.norm();
            lo = lo.min(m);
            hi = hi.max(m);
        }
        let condition = if a.nrows() == 0 { 1.0 } else { hi / lo };
        if a.nrows() > 0 && (!condition.is_finite() || lo == 0.0 || 1.0 / condition < RCOND_FLOOR)
        {
            return Err(Error::SingularSystem { freq_hz, condition });
        }
        Ok(Factorized { lu, condition })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.lu.U().nrows()
    }

    pub fn solve(&self, rhs: MatRef<'_, c64>) -> CMatrix {
        if self.dim() == 0 {
            return Mat::zeros(0, rhs.ncols());
        }
        self.lu.solve(rhs)
    }
}

/// Solves `a x = b`, failing on (numerically) singular `a`.
pub fn solve(a: MatRef<'_, c64>, b: MatRef<'_, c64>, freq_hz: f64) -> Result<CMatrix> {
    let x = Factorized::new(a, freq_hz)?.solve(b);
    let finite = (0..x.ncols())
        .all(|j| (0..x.nrows()).all(|i| x[(i, j)].re.is_finite() && x[(i, j)].im.is_finite()));
    if !finite {
        return Err(Error::SingularSystem { freq_hz, condition: f64::INFINITY });
    }
    Ok(x)
}

pub fn identity(n: usize) -> CMatrix {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// `‖a - b‖_F / ‖b‖_F`, or the absolute difference when `b` is zero.
pub fn relative_frobenius(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    let num = frobenius(diff.as_ref());
    let den = frobenius(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Largest `|a_ij - a_ji|` relative to `max(1, |a_ij|)`.
pub fn asymmetry(a: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            let d = (a[(i, j)] - a[(j, i)]).norm() / a[(i, j)].norm().max(1.0);
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64::new(1.0, 1.0),
            (0, 1) => c64::new(2.0, 0.0),
            (1, 0) => c64::new(0.0, 1.0),
            _ => c64::new(3.0, -1.0),
        });
        let b = Mat::from_fn(2, 1, |i, _| c64::new(5.0 - i as f64, 1.0));
        let x = solve(a.as_ref(), b.as_ref(), 1.0).unwrap();
        let r = &a * &x;
        assert!(relative_frobenius(r.as_ref(), b.as_ref()) < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = Mat::from_fn(2, 2, |_, _| c64::new(1.0, 0.0));
        let b = identity(2);
        match solve(a.as_ref(), b.as_ref(), 5e9) {
            Err(Error::SingularSystem { freq_hz, .. }) => assert_eq!(freq_hz, 5e9),
            other => panic!("expected singular, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn empty_system() {
        let a = CMatrix::zeros(0, 0);
        let b = CMatrix::zeros(0, 3);
        let x = solve(a.as_ref(), b.as_ref(), 1.0).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (0, 3));
    }
}
