//! The unital algebra generated by a matrix tuple, trace functionals that
//! separate a matrix from it, and the similarity scaling that converts a
//! separation into a pair of norm certificates.
//!
//! The separation argument runs as follows. If w is not in Alg(z), a trace
//! functional vanishing on the algebra with tr(w K) = 1 exists; stacking the
//! columns of K into u and the standard basis columns into v turns traces
//! into pairings, tr(b K) = < b^(n) u, v >, where b^(n) is the n-fold
//! diagonal amplification. The subspace N spanned by the algebra's orbit of
//! u is invariant for every a^(n), contains u, and is orthogonal to v, while
//! < w^(n) u, v > = 1 says w^(n) couples N to its complement. Conjugating by
//! s = alpha P_N + beta (1 - P_N) then leaves every delta entry's norm at
//! the point untouched in the limit while pushing the norm of s^-1 w^(n) s
//! above one; a doubling search on alpha/beta finds a ratio where both norm
//! conditions hold with explicit margins.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freepoly::{DeltaMatrix, FreePoly, Word};
use crate::linalg::{
    column_space, eye, frob_inner, kron, min_norm_lstsq, unvec_cm, vec_cm, vec_inner, CMat, CVec,
};
use crate::mattuple::{membership, op_norm, MatrixTuple};
use crate::realization::Colligation;

/// Relative rank tolerance for Gram-Schmidt acceptance and column spaces.
pub const RANK_TOL: f64 = 1e-10;

/// Membership rule: distance <= MEMBER_TOL * (1 + norm(w)).
pub const MEMBER_TOL: f64 = 1e-8;

/// Required membership margin for the scaled point.
pub const SCALED_POINT_MARGIN: f64 = 1e-6;

/// Required excess above one for the scaled witness norm.
pub const SCALED_WITNESS_MARGIN: f64 = 1e-6;

/// The doubling search stops once alpha/beta exceeds this.
pub const RATIO_CAP: f64 = (1u64 << 60) as f64;

/// Bound on the lower-left block of the evaluated symbol after scaling.
pub const TRIANGULAR_TOL: f64 = 1e-10;

/// Verification tolerance for certificate consistency checks.
const CERT_CHECK_TOL: f64 = 1e-8;

/// Orthonormal basis of the unital algebra generated by a tuple, with the
/// pivot words that produced each basis direction.
#[derive(Clone, Debug)]
pub struct AlgebraBasis {
    generator: MatrixTuple,
    basis: Vec<CMat>,
    words: Vec<Word>,
    word_evals: Vec<CMat>,
}

impl AlgebraBasis {
    pub fn generator(&self) -> &MatrixTuple {
        &self.generator
    }

    /// Frobenius-orthonormal spanning matrices, in pivot order.
    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Pivot words in graded-lex order, aligned with `basis`.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Raw evaluations of the pivot words (linearly independent).
    pub fn word_evals(&self) -> &[CMat] {
        &self.word_evals
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Length of the longest pivot word; all longer words are dependent.
    pub fn saturation_degree(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }
}

/// Two-pass Gram-Schmidt projection of `cand` against `basis`.
fn residual_against(basis: &[CMat], cand: &CMat) -> CMat {
    let mut r = cand.clone();
    for _ in 0..2 {
        for b in basis {
            let coeff = frob_inner(&r, b);
            r -= b * coeff;
        }
    }
    r
}

/// Build an orthonormal basis of Alg(z), the unital algebra generated by
/// the components of z.
///
/// Words are scanned in graded-lex order. A word whose evaluation is
/// dependent on earlier ones contributes nothing at any later degree either
/// (right extensions stay in the span), so only extensions of accepted words
/// are scanned, and the loop stops as soon as one full degree adds no rank
/// or the dimension reaches n^2.
pub fn alg_basis(z: &MatrixTuple) -> AlgebraBasis {
    let n = z.level();
    let d = z.dims();
    let full = n * n;
    let id = eye(n);
    let mut basis = vec![id.clone() / Complex64::from((n as f64).sqrt())];
    let mut words = vec![Word::empty()];
    let mut word_evals = vec![id.clone()];
    // (word, evaluation) pairs accepted at the previous degree.
    let mut frontier = vec![(Word::empty(), id)];
    while basis.len() < full && !frontier.is_empty() {
        let mut next = Vec::new();
        for (w, e) in &frontier {
            for r in 1..=d {
                let w2 = w.append(r as u8);
                let e2 = e * &z.mats()[r - 1];
                let scale = e2.norm();
                if scale <= f64::MIN_POSITIVE {
                    continue;
                }
                let res = residual_against(&basis, &e2);
                if res.norm() > RANK_TOL * scale {
                    let unit = &res / Complex64::from(res.norm());
                    basis.push(unit);
                    words.push(w2.clone());
                    word_evals.push(e2.clone());
                    next.push((w2, e2));
                    if basis.len() == full {
                        break;
                    }
                }
            }
            if basis.len() == full {
                break;
            }
        }
        frontier = next;
    }
    AlgebraBasis {
        generator: z.clone(),
        basis,
        words,
        word_evals,
    }
}

/// Result of testing a matrix against a generated algebra.
#[derive(Clone, Debug)]
pub struct AlgMembership {
    pub member: bool,
    /// Frobenius distance from w to the span.
    pub distance: f64,
    /// For members, a polynomial over the pivot words reproducing w.
    pub combination: Option<FreePoly>,
}

/// Frobenius distance from `w` to the algebra, and a reproducing polynomial
/// when `w` lies inside (distance at most MEMBER_TOL * (1 + norm(w))).
pub fn alg_membership(ab: &AlgebraBasis, w: &CMat) -> Result<AlgMembership> {
    let n = ab.generator().level();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Shape(format!(
            "witness is {} x {}, expected {n} x {n}",
            w.nrows(),
            w.ncols()
        )));
    }
    let res = residual_against(&ab.basis, w);
    let distance = res.norm();
    let member = distance <= MEMBER_TOL * (1.0 + w.norm());
    let combination = if member {
        // Solve over the independent pivot evaluations; the solution is the
        // unique expansion over those words.
        let cols: Vec<CVec> = ab.word_evals.iter().map(vec_cm).collect();
        let mut e = CMat::zeros(n * n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            e.column_mut(j).copy_from(c);
        }
        let coeffs = min_norm_lstsq(&e, &vec_cm(w), 1e-12);
        Some(FreePoly::from_terms(
            ab.generator().dims(),
            ab.words
                .iter()
                .cloned()
                .zip(coeffs.iter().copied()),
        )?)
    } else {
        None
    };
    Ok(AlgMembership {
        member,
        distance,
        combination,
    })
}

/// A trace functional separating a witness from the algebra, in both its
/// matrix form K and its paired vector form (u, v).
#[derive(Clone, Debug)]
pub struct SeparationFunctional {
    /// tr(a K) = 0 for all a in Alg(z) and tr(w K) = 1.
    pub k: CMat,
    /// Columns of K stacked: < b^(n) u, v > = tr(b K) for every b.
    pub u: CVec,
    /// Standard basis columns stacked: e_1 (+) ... (+) e_n.
    pub v: CVec,
    /// The separated witness.
    pub w: CMat,
}

/// Solve for the minimum-norm K with tr(a K) = 0 on an orthonormal algebra
/// basis and tr(w K) = 1, then normalize the w-trace exactly.
pub fn separating_functional(ab: &AlgebraBasis, w: &CMat) -> Result<SeparationFunctional> {
    let n = ab.generator().level();
    let mem = alg_membership(ab, w)?;
    if mem.member {
        return Err(Error::NotSeparable {
            distance: mem.distance,
        });
    }
    // tr(A K) as a linear functional of vec(K) has coefficient row vec(A^T).
    let rows = ab.dim() + 1;
    let mut sys = CMat::zeros(rows, n * n);
    for (i, a) in ab.basis.iter().enumerate() {
        sys.row_mut(i).copy_from(&vec_cm(&a.transpose()).transpose());
    }
    sys.row_mut(rows - 1)
        .copy_from(&vec_cm(&w.transpose()).transpose());
    let mut rhs = CVec::zeros(rows);
    rhs[rows - 1] = Complex64::from(1.0);
    let sol = min_norm_lstsq(&sys, &rhs, 1e-12);
    let mut k = unvec_cm(&sol, n, n);
    let t = (w * &k).trace();
    if t.norm() < 0.5 {
        return Err(Error::CertificateInconsistent(format!(
            "solved functional has tr(w K) = {t}, expected 1"
        )));
    }
    k /= t;
    let u = vec_cm(&k);
    let mut v = CVec::zeros(n * n);
    for j in 0..n {
        v[j * n + j] = Complex64::from(1.0);
    }
    Ok(SeparationFunctional {
        k,
        u,
        v,
        w: w.clone(),
    })
}

/// The n-fold diagonal amplification b^(n) acting on C^n (x) C^n with the
/// block index outer, matching the stacked-column layout of u and v.
pub fn diagonal_amplification(b: &CMat, copies: usize) -> CMat {
    kron(&eye(copies), b)
}

/// Orthonormal basis of N = span { a^(n) u : a in Alg(z) }, verified to be
/// invariant, to contain u, to be orthogonal to v, and to be coupled to its
/// complement by w^(n).
pub fn invariant_subspace(func: &SeparationFunctional, ab: &AlgebraBasis) -> Result<CMat> {
    let n = ab.generator().level();
    let big = n * n;
    let mut raw = CMat::zeros(big, ab.dim());
    for (j, a) in ab.basis.iter().enumerate() {
        let col = diagonal_amplification(a, n) * &func.u;
        raw.column_mut(j).copy_from(&col);
    }
    let nb = column_space(&raw, RANK_TOL);
    let checks = certificate_checks(func, ab, &nb)?;
    let scale = 1.0 + func.u.norm();
    if checks.u_in_subspace > CERT_CHECK_TOL * scale {
        return Err(Error::CertificateInconsistent(format!(
            "u is not inside its own orbit span (defect {:.3e})",
            checks.u_in_subspace
        )));
    }
    if checks.v_orthogonality > CERT_CHECK_TOL * (n as f64).sqrt() {
        return Err(Error::CertificateInconsistent(format!(
            "v is not orthogonal to the orbit span (defect {:.3e})",
            checks.v_orthogonality
        )));
    }
    if checks.invariance_defect > CERT_CHECK_TOL * (1.0 + checks.basis_norm_max) {
        return Err(Error::CertificateInconsistent(format!(
            "orbit span is not invariant (defect {:.3e})",
            checks.invariance_defect
        )));
    }
    if checks.witness_coupling < 0.5 {
        return Err(Error::CertificateInconsistent(format!(
            "witness pairing {:.3e} is not bounded away from zero",
            checks.witness_coupling
        )));
    }
    Ok(nb)
}

struct SubspaceChecks {
    u_in_subspace: f64,
    v_orthogonality: f64,
    invariance_defect: f64,
    witness_coupling: f64,
    basis_norm_max: f64,
}

fn certificate_checks(
    func: &SeparationFunctional,
    ab: &AlgebraBasis,
    nb: &CMat,
) -> Result<SubspaceChecks> {
    let n = ab.generator().level();
    let u_proj = nb * (nb.adjoint() * &func.u);
    let u_in_subspace = (&func.u - u_proj).norm();
    let v_orthogonality = (nb.adjoint() * &func.v).norm();
    let mut invariance_defect = 0.0f64;
    let mut basis_norm_max = 0.0f64;
    for a in &ab.basis {
        let an = diagonal_amplification(a, n);
        let image = &an * nb;
        let defect = &image - nb * (nb.adjoint() * &image);
        invariance_defect = invariance_defect.max(op_norm(&defect)?);
        basis_norm_max = basis_norm_max.max(op_norm(&an)?);
    }
    let wn = diagonal_amplification(&func.w, n);
    let witness_coupling = vec_inner(&(wn * &func.u), &func.v).norm();
    Ok(SubspaceChecks {
        u_in_subspace,
        v_orthogonality,
        invariance_defect,
        witness_coupling,
        basis_norm_max,
    })
}

/// The two-block scaling s = ratio P + (1 - P) together with its exact
/// inverse, for P the orthogonal projection onto the given column span.
pub fn block_scaling(nb: &CMat, ratio: f64) -> (CMat, CMat) {
    let big = nb.nrows();
    let p = nb * nb.adjoint();
    let q = eye(big) - &p;
    let s = &p * Complex64::from(ratio) + &q;
    let s_inv = &p * Complex64::from(1.0 / ratio) + &q;
    (s, s_inv)
}

/// Residuals recorded on a finished certificate, keyed for reporting.
#[derive(Clone, Debug)]
pub struct CertificateResiduals {
    /// max |tr(a K)| over the orthonormal algebra basis.
    pub trace_zero_max: f64,
    /// |tr(w K) - 1| after normalization.
    pub trace_w_deviation: f64,
    /// max |tr(a K) - <a^(n) u, v>| over the basis (layout identity).
    pub pairing_defect: f64,
    /// norm of N* v.
    pub v_orthogonality: f64,
    /// Distance from u to N.
    pub u_in_subspace: f64,
    /// max over basis a of norm((1 - P) a^(n) P).
    pub invariance_defect: f64,
    /// |< w^(n) u, v >|, which should be 1.
    pub witness_coupling: f64,
    /// norm(delta(s^-1 z^(n) s)) at the accepted ratio.
    pub scaled_point_norm: f64,
    /// norm(s^-1 w^(n) s) at the accepted ratio.
    pub scaled_witness_norm: f64,
    /// Lower-left block of the evaluated symbol after scaling.
    pub triangular_defect: f64,
}

impl CertificateResiduals {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("trace_zero_max".into(), self.trace_zero_max),
            ("trace_w_deviation".into(), self.trace_w_deviation),
            ("pairing_defect".into(), self.pairing_defect),
            ("v_orthogonality".into(), self.v_orthogonality),
            ("u_in_subspace".into(), self.u_in_subspace),
            ("invariance_defect".into(), self.invariance_defect),
            ("witness_coupling".into(), self.witness_coupling),
            ("scaled_point_norm".into(), self.scaled_point_norm),
            ("scaled_witness_norm".into(), self.scaled_witness_norm),
            ("triangular_defect".into(), self.triangular_defect),
        ])
    }
}

/// A completed separation-and-scaling certificate.
#[derive(Clone, Debug)]
pub struct SeparationCertificate {
    pub functional: SeparationFunctional,
    /// Orthonormal basis of the invariant subspace N.
    pub n_basis: CMat,
    /// The accepted scaling s = (alpha/beta) P + (1 - P).
    pub s: CMat,
    pub alpha_over_beta: f64,
    pub residuals: CertificateResiduals,
}

/// Starting from z in the polyhedron and w outside Alg(z), produce the
/// scaling under which the conjugated amplification stays inside the
/// polyhedron with margin while the conjugated witness norm exceeds one.
pub fn scaling_construct(
    delta: &DeltaMatrix,
    z: &MatrixTuple,
    w: &CMat,
) -> Result<SeparationCertificate> {
    let rep = membership(delta, z)?;
    if !rep.member {
        return Err(Error::OutsidePolyhedron { norm: rep.norm });
    }
    let ab = alg_basis(z);
    let func = separating_functional(&ab, w)?;
    let nb = invariant_subspace(&func, &ab)?;
    let n = z.level();
    let zn = z.amplify(n)?;
    let wn = diagonal_amplification(w, n);
    let p = &nb * nb.adjoint();
    let q = eye(n * n) - &p;

    let mut ratio = 2.0f64;
    while ratio <= RATIO_CAP {
        let (s, s_inv) = block_scaling(&nb, ratio);
        let z_scaled = MatrixTuple::new(
            zn.mats().iter().map(|m| &s_inv * m * &s).collect(),
        )?;
        let w_scaled = &s_inv * &wn * &s;
        let scaled_rep = membership(delta, &z_scaled)?;
        let w_norm = op_norm(&w_scaled)?;
        if scaled_rep.norm <= 1.0 - SCALED_POINT_MARGIN
            && w_norm >= 1.0 + SCALED_WITNESS_MARGIN
        {
            // The symbol evaluated at the scaled point must be block upper
            // triangular with respect to N and its complement.
            let evaluated = delta.eval(&z_scaled)?;
            let left = kron(&eye(delta.nrows()), &q);
            let right = kron(&eye(delta.ncols()), &p);
            let triangular_defect = op_norm(&(left * evaluated * right))?;
            if triangular_defect > TRIANGULAR_TOL {
                return Err(Error::CertificateInconsistent(format!(
                    "lower-left block of the scaled symbol is {triangular_defect:.3e}"
                )));
            }
            let checks = certificate_checks(&func, &ab, &nb)?;
            let mut trace_zero_max = 0.0f64;
            let mut pairing_defect = 0.0f64;
            for a in &ab.basis {
                let tr = (a * &func.k).trace();
                trace_zero_max = trace_zero_max.max(tr.norm());
                let paired = vec_inner(&(diagonal_amplification(a, n) * &func.u), &func.v);
                pairing_defect = pairing_defect.max((tr - paired).norm());
            }
            let trace_w_deviation = ((&func.w * &func.k).trace() - Complex64::from(1.0)).norm();
            let residuals = CertificateResiduals {
                trace_zero_max,
                trace_w_deviation,
                pairing_defect,
                v_orthogonality: checks.v_orthogonality,
                u_in_subspace: checks.u_in_subspace,
                invariance_defect: checks.invariance_defect,
                witness_coupling: checks.witness_coupling,
                scaled_point_norm: scaled_rep.norm,
                scaled_witness_norm: w_norm,
                triangular_defect,
            };
            return Ok(SeparationCertificate {
                functional: func,
                n_basis: nb,
                s,
                alpha_over_beta: ratio,
                residuals,
            });
        }
        ratio *= 2.0;
    }
    Err(Error::ScalingSearchFailed { cap: RATIO_CAP })
}

/// Evaluate a realized function at z and test whether the value lies in
/// Alg(z). The colligation must be built over the same symbol.
pub fn value_in_generated_algebra(
    delta: &DeltaMatrix,
    coll: &Colligation,
    z: &MatrixTuple,
) -> Result<AlgMembership> {
    if coll.delta() != delta {
        return Err(Error::Invalid(
            "colligation was built over a different symbol".into(),
        ));
    }
    let rep = membership(delta, z)?;
    if !rep.member {
        return Err(Error::OutsidePolyhedron { norm: rep.norm });
    }
    let value = coll.eval(z)?;
    let ab = alg_basis(z);
    alg_membership(&ab, &value)
}
