//! Small dense complex linear-algebra helpers shared across the crate.
//!
//! Containers, LU and QR come from nalgebra. Singular value decompositions
//! are done in-crate by one-sided Jacobi: nalgebra's bidiagonalization SVD
//! can return factors that do not reproduce the input on some complex
//! matrices (rank-one Hermitian projectors among them), and every rank,
//! norm and span decision here sits on the SVD. Jacobi is slower but its
//! factors are accurate to working precision, which is what the membership
//! and certificate tolerances assume. Rank decisions are always made
//! relative to the largest singular value.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative threshold under which a rotated column no longer counts as a
/// trustworthy singular direction and gets replaced by basis completion.
const DIRECTION_FLOOR: f64 = 1e-13;
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 64;

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Frobenius inner product, linear in the first argument: sum a_ij conj(b_ij).
pub fn frob_inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Hermitian inner product on vectors, linear in the first argument.
pub fn vec_inner(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Column-major flattening (matches nalgebra's internal storage).
pub fn vec_cm(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec_cm(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Full singular value decomposition m = u * diag(sv) * v^H with square
/// unitary factors. Singular values are sorted descending and have length
/// min(nrows, ncols); the trailing columns of `u` and `v` complete the
/// singular directions to orthonormal bases.
pub struct Svd {
    pub u: CMat,
    pub sv: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn smax(&self) -> f64 {
        self.sv.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above rel_tol * smax.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.smax();
        if smax == 0.0 {
            return 0;
        }
        self.sv.iter().filter(|&&s| s > rel_tol * smax).count()
    }
}

/// One sweep-iterated one-sided Jacobi pass: rotates column pairs of `w`
/// until all pairs are orthogonal relative to their norms, accumulating the
/// same rotations into `v` so that w_in * v = w_out stays invariant.
fn jacobi_orthogonalize(w: &mut CMat, v: &mut CMat) {
    let q = w.ncols();
    let rows = w.nrows();
    if q < 2 {
        return;
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q - 1 {
            for j in i + 1..q {
                let mut aii = 0.0f64;
                let mut ajj = 0.0f64;
                let mut c = Complex64::new(0.0, 0.0);
                for k in 0..rows {
                    let wi = w[(k, i)];
                    let wj = w[(k, j)];
                    aii += wi.norm_sqr();
                    ajj += wj.norm_sqr();
                    c += wi.conj() * wj;
                }
                if aii == 0.0 || ajj == 0.0 {
                    continue;
                }
                let cn = c.norm();
                // sqrt before multiplying: aii * ajj underflows to zero for
                // badly scaled column pairs and would disable this gate.
                if cn <= JACOBI_TOL * (aii.sqrt() * ajj.sqrt()) {
                    continue;
                }
                rotated = true;
                // Absorb the phase of <w_i, w_j> into column j, then the
                // classical real rotation zeroing the pair's inner product.
                // Componentwise real division: the complex quotient squares
                // cn in its denominator, which underflows when cn is tiny.
                let phase_conj = Complex64::new(c.re / cn, -(c.im / cn));
                let zeta = (ajj - aii) / (2.0 * cn);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = Complex64::from(1.0 / t.hypot(1.0));
                let sn = cs * Complex64::from(t);
                for k in 0..rows {
                    let wi = w[(k, i)];
                    let wj = w[(k, j)] * phase_conj;
                    w[(k, i)] = cs * wi - sn * wj;
                    w[(k, j)] = sn * wi + cs * wj;
                }
                for k in 0..q {
                    let vi = v[(k, i)];
                    let vj = v[(k, j)] * phase_conj;
                    v[(k, i)] = cs * vi - sn * vj;
                    v[(k, j)] = sn * vi + cs * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Extend a set of orthonormal vectors to an orthonormal basis of C^p,
/// greedily picking the standard basis vector with the largest residual
/// and re-orthogonalizing it twice.
fn complete_orthonormal(have: &mut Vec<CVec>, p: usize) {
    while have.len() < p {
        let mut best = 0usize;
        let mut best_res = -1.0f64;
        for i in 0..p {
            let overlap: f64 = have.iter().map(|h| h[i].norm_sqr()).sum();
            let res = 1.0 - overlap;
            if res > best_res {
                best_res = res;
                best = i;
            }
        }
        let mut x = CVec::zeros(p);
        x[best] = Complex64::from(1.0);
        for _ in 0..2 {
            for h in have.iter() {
                let coeff = vec_inner(&x, h);
                x -= h * coeff;
            }
        }
        let nrm = x.norm();
        x /= Complex64::from(nrm);
        have.push(x);
    }
}

/// Full SVD by one-sided Jacobi. Deterministic; factors are unitary to
/// working precision and reproduce the input.
pub fn svd(m: &CMat) -> Svd {
    let (p, q) = (m.nrows(), m.ncols());
    if p < q {
        let t = svd(&m.adjoint());
        return Svd {
            u: t.v,
            sv: t.sv,
            v: t.u,
        };
    }
    if q == 0 {
        return Svd {
            u: eye(p),
            sv: Vec::new(),
            v: eye(q),
        };
    }
    let mut w = m.clone();
    let mut v = eye(q);
    jacobi_orthogonalize(&mut w, &mut v);

    let norms: Vec<f64> = (0..q).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let smax = norms[order[0]];
    let sv: Vec<f64> = order.iter().map(|&c| norms[c]).collect();

    let mut v_sorted = CMat::zeros(q, q);
    for (slot, &col) in order.iter().enumerate() {
        v_sorted.column_mut(slot).copy_from(&v.column(col));
    }

    let mut u_cols: Vec<CVec> = Vec::with_capacity(p);
    for &col in &order {
        if norms[col] > smax * DIRECTION_FLOOR {
            u_cols.push(w.column(col).into_owned() / Complex64::from(norms[col]));
        } else {
            break;
        }
    }
    complete_orthonormal(&mut u_cols, p);
    let mut u = CMat::zeros(p, p);
    for (slot, c) in u_cols.iter().enumerate() {
        u.column_mut(slot).copy_from(c);
    }
    Svd { u, sv, v: v_sorted }
}

pub fn largest_sv(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    svd(m).smax()
}

/// Orthonormal basis of the column space, keeping singular directions with
/// sigma > rel_tol * sigma_max. Returns an nrows x rank matrix.
pub fn column_space(m: &CMat, rel_tol: f64) -> CMat {
    if m.ncols() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let s = svd(m);
    let r = s.rank(rel_tol);
    s.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the kernel of `m`, as an ncols x nullity matrix.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let q = m.ncols();
    if q == 0 {
        return CMat::zeros(0, 0);
    }
    let s = svd(m);
    let r = s.rank(rel_tol);
    s.v.columns(r, q - r).into_owned()
}

/// Orthonormal complement of a matrix with (approximately) orthonormal
/// columns: returns p x (p - r) with columns spanning range(q)^perp.
pub fn complement_basis(q: &CMat) -> CMat {
    let p = q.nrows();
    if q.ncols() == 0 {
        return eye(p);
    }
    if q.ncols() >= p {
        return CMat::zeros(p, 0);
    }
    let s = svd(q);
    let r = s.rank(1e-12);
    s.u.columns(r, p - r).into_owned()
}

/// Minimum-norm least-squares solution of a x = b via the pseudo-inverse,
/// inverting only singular values above rel_tol * sigma_max.
pub fn min_norm_lstsq(a: &CMat, b: &CVec, rel_tol: f64) -> CVec {
    let mut x = CVec::zeros(a.ncols());
    if a.nrows() == 0 || a.ncols() == 0 {
        return x;
    }
    let s = svd(a);
    let smax = s.smax();
    if smax == 0.0 {
        return x;
    }
    for (k, &sigma) in s.sv.iter().enumerate() {
        if sigma <= rel_tol * smax {
            break;
        }
        let coeff = vec_inner(b, &s.u.column(k).into_owned()) / Complex64::from(sigma);
        x += s.v.column(k) * coeff;
    }
    x
}

/// Numerical rank at a relative tolerance.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    svd(m).rank(rel_tol)
}

/// Exact-size linear solve by LU; fails on (numerically) singular systems.
pub fn solve_square(a: &CMat, b: &CMat) -> Result<CMat> {
    let lu = a.clone().lu();
    lu.solve(b).ok_or(Error::SingularSystem)
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map(|m| m.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|m| m.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for m in blocks {
        out.view_mut((0, at), (rows, m.ncols())).copy_from(*m);
        at += m.ncols();
    }
    out
}
