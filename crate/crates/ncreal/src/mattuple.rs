//! Points of the non-commutative universe: d-tuples of same-size square
//! complex matrices, together with the operations that matter for graded
//! functions (direct sums, amplifications, similarities) and membership in
//! the polyhedron cut out by a polynomial symbol.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freepoly::DeltaMatrix;
use crate::linalg::{is_finite, kron, eye, largest_sv, svd, CMat};

/// Strict membership margin: a point belongs to the polyhedron only when
/// norm(delta(x)) < 1 - MEMBERSHIP_TOL.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Reciprocal condition number floor for similarity matrices.
pub const RCOND_MIN: f64 = 1e-12;

/// A d-tuple of n x n complex matrices; n is the level of the point.
#[derive(Clone, PartialEq, Debug)]
pub struct MatrixTuple {
    dims: usize,
    level: usize,
    mats: Vec<CMat>,
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::Shape("a tuple needs at least one component".into()));
        }
        let level = mats[0].nrows();
        if level == 0 {
            return Err(Error::Shape("components must be at least 1 x 1".into()));
        }
        for (r, m) in mats.iter().enumerate() {
            if m.nrows() != level || m.ncols() != level {
                return Err(Error::Shape(format!(
                    "component {} is {} x {}, expected {level} x {level}",
                    r + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(MatrixTuple {
            dims: mats.len(),
            level,
            mats,
        })
    }

    /// A level-1 point from plain complex numbers.
    pub fn from_scalars(values: &[Complex64]) -> Result<Self> {
        MatrixTuple::new(
            values
                .iter()
                .map(|&v| CMat::from_element(1, 1, v))
                .collect(),
        )
    }

    pub fn zero(dims: usize, level: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Shape("a tuple needs at least one component".into()));
        }
        MatrixTuple::new(vec![CMat::zeros(level, level); dims])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn scale(&self, t: f64) -> MatrixTuple {
        let c = Complex64::new(t, 0.0);
        MatrixTuple {
            dims: self.dims,
            level: self.level,
            mats: self.mats.iter().map(|m| m * c).collect(),
        }
    }

    /// Componentwise block-diagonal join; levels add.
    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch {
                expected: self.dims,
                got: other.dims,
            });
        }
        let n = self.level + other.level;
        let mats = self
            .mats
            .iter()
            .zip(other.mats.iter())
            .map(|(a, b)| {
                let mut m = CMat::zeros(n, n);
                m.view_mut((0, 0), (self.level, self.level)).copy_from(a);
                m.view_mut((self.level, self.level), (other.level, other.level))
                    .copy_from(b);
                m
            })
            .collect();
        MatrixTuple::new(mats)
    }

    /// k-fold direct sum of the point with itself.
    pub fn amplify(&self, k: usize) -> Result<MatrixTuple> {
        if k == 0 {
            return Err(Error::Invalid("amplification count must be positive".into()));
        }
        let ik = eye(k);
        MatrixTuple::new(self.mats.iter().map(|m| kron(&ik, m)).collect())
    }

    /// Conjugate every component by s: x_r -> s^-1 x_r s. Rejects s whose
    /// reciprocal condition number falls below RCOND_MIN.
    pub fn similarity(&self, s: &CMat) -> Result<MatrixTuple> {
        let rc = rcond(s)?;
        if rc < RCOND_MIN {
            return Err(Error::IllConditioned {
                rcond: rc,
                min: RCOND_MIN,
            });
        }
        self.similarity_unchecked(s)
    }

    /// Same conjugation without the conditioning gate. Intended for callers
    /// that deliberately push the ratio far, like the scaling search.
    pub fn similarity_unchecked(&self, s: &CMat) -> Result<MatrixTuple> {
        if s.nrows() != self.level || s.ncols() != self.level {
            return Err(Error::Shape(format!(
                "similarity matrix is {} x {}, expected {} x {}",
                s.nrows(),
                s.ncols(),
                self.level,
                self.level
            )));
        }
        let s_inv = s.clone().lu().try_inverse().ok_or(Error::SingularSystem)?;
        MatrixTuple::new(self.mats.iter().map(|m| &s_inv * m * s).collect())
    }
}

/// Largest singular value; errors on non-finite entries.
pub fn op_norm(m: &CMat) -> Result<f64> {
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    Ok(largest_sv(m))
}

/// Reciprocal condition number sigma_min / sigma_max in the operator norm.
pub fn rcond(m: &CMat) -> Result<f64> {
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let s = svd(m);
    let smax = s.smax();
    let smin = s.sv.last().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0.0);
    }
    Ok(smin / smax)
}

/// Where a point sits relative to the polyhedron of a symbol.
#[derive(Clone, Copy, Debug)]
pub struct PolyhedronReport {
    pub norm: f64,
    pub member: bool,
    pub margin: f64,
}

/// Evaluate norm(delta(x)) and compare against the strict membership rule.
pub fn membership(delta: &DeltaMatrix, x: &MatrixTuple) -> Result<PolyhedronReport> {
    let norm = op_norm(&delta.eval(x)?)?;
    Ok(PolyhedronReport {
        norm,
        member: norm < 1.0 - MEMBERSHIP_TOL,
        margin: 1.0 - norm,
    })
}

/// Largest componentwise intertwining defect max_r norm(s x_r - y_r s).
/// s maps the space of x into the space of y, so it is level(y) x level(x).
pub fn intertwine_check(x: &MatrixTuple, y: &MatrixTuple, s: &CMat) -> Result<f64> {
    if x.dims() != y.dims() {
        return Err(Error::DimsMismatch {
            expected: x.dims(),
            got: y.dims(),
        });
    }
    if s.nrows() != y.level() || s.ncols() != x.level() {
        return Err(Error::Shape(format!(
            "intertwiner is {} x {}, expected {} x {}",
            s.nrows(),
            s.ncols(),
            y.level(),
            x.level()
        )));
    }
    let mut worst = 0.0f64;
    for (xr, yr) in x.mats().iter().zip(y.mats().iter()) {
        let defect = s * xr - yr * s;
        worst = worst.max(op_norm(&defect)?);
    }
    Ok(worst)
}
