//! Contractive functions presented by isometric colligations, and the models
//! they induce.
//!
//! A colligation packages an isometric block matrix
//!
//! ```text
//!     V = [ A  B ]   A: 1 x 1,        B: 1 x (m I)
//!         [ C  D ]   C: (m J) x 1,    D: (m J) x (m I)
//! ```
//!
//! over a symbol delta with I rows and J columns, where m is the model
//! dimension. At a level-n point x of the polyhedron the function value is
//!
//! ```text
//!     phi(x) = A (x) 1_n  +  B (x) 1_n . (1_m (x) delta(x)) . u(x)
//!     u(x)   = [ 1 - (D (x) 1_n)(1_m (x) delta(x)) ]^-1 (C (x) 1_n)
//! ```
//!
//! with (x) the Kronecker product, model coordinates outer and level
//! coordinates inner throughout. The same u(x) is the model vector: for
//! same-level points the defect 1 - phi(y)* phi(x) factors as
//! u(y)* [1_m (x) (1 - delta(y)* delta(x))] u(x), which is what
//! `verify_model` measures.

use crate::error::{Error, Result};
use crate::freepoly::DeltaMatrix;
use crate::linalg::{eye, kron, largest_sv, solve_square, CMat};
use crate::mattuple::{membership, op_norm, MatrixTuple};
use crate::sample;

/// A colligation's block matrix must be an isometry to within this bound.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// Acceptable defect for data claiming to be a model.
pub const MODEL_TOL: f64 = 1e-8;

/// Operator-norm distance of V from being an isometry: norm(V* V - 1).
pub fn isometry_check(v: &CMat) -> f64 {
    let gram = v.adjoint() * v - eye(v.ncols());
    largest_sv(&gram)
}

/// An isometric colligation over a polyhedron symbol.
#[derive(Clone, Debug)]
pub struct Colligation {
    m: usize,
    delta: DeltaMatrix,
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
}

impl Colligation {
    pub fn new(
        m: usize,
        delta: DeltaMatrix,
        a: CMat,
        b: CMat,
        c: CMat,
        d: CMat,
    ) -> Result<Self> {
        Self::with_isometry_tol(m, delta, a, b, c, d, ISOMETRY_TOL)
    }

    /// Construction with a caller-chosen isometry tolerance. The default
    /// gate is [`ISOMETRY_TOL`]; loosening it is an explicit decision.
    pub fn with_isometry_tol(
        m: usize,
        delta: DeltaMatrix,
        a: CMat,
        b: CMat,
        c: CMat,
        d: CMat,
        tol: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("model dimension must be positive".into()));
        }
        let (di, dj) = (delta.nrows(), delta.ncols());
        let checks = [
            (a.nrows(), 1, "A rows"),
            (a.ncols(), 1, "A cols"),
            (b.nrows(), 1, "B rows"),
            (b.ncols(), m * di, "B cols"),
            (c.nrows(), m * dj, "C rows"),
            (c.ncols(), 1, "C cols"),
            (d.nrows(), m * dj, "D rows"),
            (d.ncols(), m * di, "D cols"),
        ];
        for (got, want, what) in checks {
            if got != want {
                return Err(Error::Shape(format!("{what}: expected {want}, got {got}")));
            }
        }
        let coll = Colligation {
            m,
            delta,
            a,
            b,
            c,
            d,
        };
        let residual = coll.isometry_residual();
        if residual.is_nan() || residual > tol {
            return Err(Error::NotIsometric { residual });
        }
        Ok(coll)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> &DeltaMatrix {
        &self.delta
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d(&self) -> &CMat {
        &self.d
    }

    /// The assembled block matrix V = [A B; C D].
    pub fn assembled(&self) -> CMat {
        let rows = 1 + self.m * self.delta.ncols();
        let cols = 1 + self.m * self.delta.nrows();
        let mut v = CMat::zeros(rows, cols);
        v.view_mut((0, 0), (1, 1)).copy_from(&self.a);
        v.view_mut((0, 1), (1, cols - 1)).copy_from(&self.b);
        v.view_mut((1, 0), (rows - 1, 1)).copy_from(&self.c);
        v.view_mut((1, 1), (rows - 1, cols - 1)).copy_from(&self.d);
        v
    }

    pub fn isometry_residual(&self) -> f64 {
        isometry_check(&self.assembled())
    }

    /// Shared resolvent work: returns (1_m (x) delta(x), u(x)).
    fn resolvent(&self, x: &MatrixTuple) -> Result<(CMat, CMat)> {
        let rep = membership(&self.delta, x)?;
        if !rep.member {
            return Err(Error::OutsidePolyhedron { norm: rep.norm });
        }
        let n = x.level();
        let dx = self.delta.eval(x)?;
        let big_delta = kron(&eye(self.m), &dx);
        let d_tilde = kron(&self.d, &eye(n));
        let c_tilde = kron(&self.c, &eye(n));
        let dim = self.m * self.delta.ncols() * n;
        let lhs = eye(dim) - d_tilde * &big_delta;
        let u = solve_square(&lhs, &c_tilde).map_err(|_| Error::SingularResolvent)?;
        Ok((big_delta, u))
    }

    /// Evaluate the function at a point of the polyhedron.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        let n = x.level();
        let (big_delta, u) = self.resolvent(x)?;
        let a_tilde = kron(&self.a, &eye(n));
        let b_tilde = kron(&self.b, &eye(n));
        Ok(a_tilde + b_tilde * big_delta * u)
    }

    /// The model vector u(x), of shape (m J n) x n at level n.
    pub fn derive_model(&self, x: &MatrixTuple) -> Result<CMat> {
        Ok(self.resolvent(x)?.1)
    }
}

/// Finite model data: points with function values and model vectors.
#[derive(Clone, Debug)]
pub struct ModelData {
    pub m: usize,
    pub points: Vec<MatrixTuple>,
    pub values: Vec<CMat>,
    pub uvecs: Vec<CMat>,
}

impl ModelData {
    pub fn new(
        m: usize,
        points: Vec<MatrixTuple>,
        values: Vec<CMat>,
        uvecs: Vec<CMat>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Invalid("model dimension must be positive".into()));
        }
        if points.len() != values.len() || points.len() != uvecs.len() {
            return Err(Error::Shape(format!(
                "got {} points, {} values, {} model vectors",
                points.len(),
                values.len(),
                uvecs.len()
            )));
        }
        let dims = points.first().map(|p| p.dims());
        let mut block_rows = None;
        for (k, ((p, v), u)) in points.iter().zip(&values).zip(&uvecs).enumerate() {
            let n = p.level();
            if Some(p.dims()) != dims {
                return Err(Error::Shape(format!(
                    "point {k} has a different variable count"
                )));
            }
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::Shape(format!(
                    "value {k} is {} x {}, expected {n} x {n}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            if u.ncols() != n || u.nrows() % (m * n) != 0 {
                return Err(Error::Shape(format!(
                    "model vector {k} is {} x {}, expected (m J {n}) x {n}",
                    u.nrows(),
                    u.ncols()
                )));
            }
            let quota = u.nrows() / (m * n);
            if *block_rows.get_or_insert(quota) != quota {
                return Err(Error::Shape(format!(
                    "model vector {k} implies a different symbol column count"
                )));
            }
        }
        Ok(ModelData {
            m,
            points,
            values,
            uvecs,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Largest defect of the factorization identity over all ordered same-level
/// pairs: norm(1 - phi(y)* phi(x) - u(y)* [1_m (x) (1 - delta(y)* delta(x))] u(x)).
pub fn verify_model(md: &ModelData, delta: &DeltaMatrix) -> Result<f64> {
    let jn = delta.ncols();
    for (k, (p, u)) in md.points.iter().zip(&md.uvecs).enumerate() {
        if u.nrows() != md.m * jn * p.level() {
            return Err(Error::Shape(format!(
                "model vector {k} does not match the symbol's column count"
            )));
        }
    }
    let evals: Vec<CMat> = md
        .points
        .iter()
        .map(|p| delta.eval(p))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..md.len() {
        for j in 0..md.len() {
            let (n_i, n_j) = (md.points[i].level(), md.points[j].level());
            if n_i != n_j {
                continue;
            }
            let n = n_i;
            let inner = eye(jn * n) - evals[j].adjoint() * &evals[i];
            let middle = kron(&eye(md.m), &inner);
            let defect = eye(n)
                - md.values[j].adjoint() * &md.values[i]
                - md.uvecs[j].adjoint() * middle * &md.uvecs[i];
            worst = worst.max(op_norm(&defect)?);
        }
    }
    Ok(worst)
}

/// Largest observed norm(phi(x)) over randomly sampled points, at levels
/// drawn from 1..=level_max. Deterministic in (seed, trials).
pub fn contractivity_sample(
    coll: &Colligation,
    trials: usize,
    seed: u64,
    level_max: usize,
) -> Result<f64> {
    if level_max == 0 {
        return Err(Error::Invalid("level_max must be positive".into()));
    }
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = sample::trial_rng(seed, trial as u64);
        let n = 1 + (trial % level_max);
        let x = sample::in_polyhedron(coll.delta(), n, &mut rng)?;
        worst = worst.max(op_norm(&coll.eval(&x)?)?);
    }
    Ok(worst)
}

/// Convenience: a 1-variable Moebius-type function on the disk with
/// phi(x) = (a + x)(1 + a x)^-1 for real 0 < a < 1, as a colligation.
pub fn moebius_colligation(a: f64) -> Result<Colligation> {
    let b = (1.0 - a * a).sqrt();
    Colligation::new(
        1,
        DeltaMatrix::disk(),
        CMat::from_element(1, 1, a.into()),
        CMat::from_element(1, 1, b.into()),
        CMat::from_element(1, 1, b.into()),
        CMat::from_element(1, 1, (-a).into()),
    )
}

/// Convenience: the identity function x -> x on the disk.
pub fn identity_colligation() -> Result<Colligation> {
    Colligation::new(
        1,
        DeltaMatrix::disk(),
        CMat::zeros(1, 1),
        CMat::from_element(1, 1, 1.0.into()),
        CMat::from_element(1, 1, 1.0.into()),
        CMat::zeros(1, 1),
    )
}
