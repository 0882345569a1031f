//! Free (non-commutative) polynomials in d variables, and matrix symbols
//! built from them.
//!
//! A `Word` is a finite product of the variables x1..xd, stored as 1-based
//! letter indices; the empty word is the multiplicative unit. Words are
//! ordered graded-lexicographically: shorter first, then left-to-right by
//! letter. A `FreePoly` is a canonical term map over that order with
//! coefficients below 1e-14 pruned, so structural equality is equality of
//! canonical forms. A `DeltaMatrix` is a rectangular matrix of polynomials;
//! evaluating it at a tuple of n x n matrices produces the block matrix that
//! defines the polyhedron "norm of delta(x) < 1".

use std::collections::HashMap;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eye, CMat};
use crate::mattuple::MatrixTuple;

/// Terms with coefficient modulus at or below this are dropped from the
/// canonical form.
pub const COEFF_PRUNE_TOL: f64 = 1e-14;

/// Polynomials with more terms than this evaluate through a prefix cache.
const MEMO_TERM_THRESHOLD: usize = 32;

/// A word in the free monoid on {x1, ..., xd}; letters are 1-based.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(r: u8) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("variable indices are 1-based".into()));
        }
        Ok(Word(vec![r]))
    }

    pub fn from_letters(letters: Vec<u8>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(Error::Invalid("variable indices are 1-based".into()));
        }
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn append(&self, r: u8) -> Word {
        let mut v = self.0.clone();
        v.push(r);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    fn max_letter(&self) -> u8 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Evaluate at a matrix tuple; the empty word gives the identity.
    pub fn eval(&self, x: &MatrixTuple) -> CMat {
        let n = x.level();
        let mut acc = eye(n);
        for &l in &self.0 {
            acc *= &x.mats()[(l - 1) as usize];
        }
        acc
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|l| format!("x{l}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// All words in d letters of length at most `max_len`, in graded-lex order.
pub fn words_up_to(d: usize, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * d);
        for w in &frontier {
            for r in 1..=d {
                next.push(w.append(r as u8));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// A free polynomial in d non-commuting variables with complex coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct FreePoly {
    dims: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl FreePoly {
    fn check_dims(dims: usize) -> Result<()> {
        if dims == 0 || dims > u8::MAX as usize {
            return Err(Error::Invalid(format!(
                "variable count must be between 1 and 255, got {dims}"
            )));
        }
        Ok(())
    }

    pub fn zero(dims: usize) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(FreePoly {
            dims,
            terms: BTreeMap::new(),
        })
    }

    pub fn one(dims: usize) -> Result<Self> {
        Self::constant(dims, Complex64::new(1.0, 0.0))
    }

    pub fn constant(dims: usize, c: Complex64) -> Result<Self> {
        Self::from_terms(dims, [(Word::empty(), c)])
    }

    /// The variable x_r (1-based).
    pub fn variable(dims: usize, r: u8) -> Result<Self> {
        Self::from_terms(dims, [(Word::letter(r)?, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms(
        dims: usize,
        terms: impl IntoIterator<Item = (Word, Complex64)>,
    ) -> Result<Self> {
        Self::check_dims(dims)?;
        let mut map = BTreeMap::new();
        for (w, c) in terms {
            if w.max_letter() as usize > dims {
                return Err(Error::Invalid(format!(
                    "word {w} uses a variable beyond x{dims}"
                )));
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::NonFinite);
            }
            let slot = map.entry(w).or_insert(Complex64::new(0.0, 0.0));
            *slot += c;
        }
        map.retain(|_, c| c.norm() > COEFF_PRUNE_TOL);
        Ok(FreePoly { dims, terms: map })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Terms in graded-lex word order.
    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree of the canonical form; the zero polynomial has degree -1.
    pub fn degree(&self) -> isize {
        self.terms
            .keys()
            .map(|w| w.len() as isize)
            .max()
            .unwrap_or(-1)
    }

    /// True when every term has word length exactly one.
    pub fn is_homogeneous_linear(&self) -> bool {
        self.terms.keys().all(|w| w.len() == 1)
    }

    fn ensure_same_dims(&self, other: &FreePoly) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch {
                expected: self.dims,
                got: other.dims,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &FreePoly) -> Result<FreePoly> {
        self.ensure_same_dims(other)?;
        FreePoly::from_terms(
            self.dims,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(w, c)| (w.clone(), *c)),
        )
    }

    pub fn sub(&self, other: &FreePoly) -> Result<FreePoly> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &FreePoly) -> Result<FreePoly> {
        self.ensure_same_dims(other)?;
        let mut prods = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                prods.push((wa.concat(wb), ca * cb));
            }
        }
        FreePoly::from_terms(self.dims, prods)
    }

    pub fn scale(&self, c: Complex64) -> FreePoly {
        // Pruning keeps the result canonical even when c is tiny.
        FreePoly::from_terms(
            self.dims,
            self.terms.iter().map(|(w, k)| (w.clone(), k * c)),
        )
        .expect("scaling preserves validity")
    }

    /// Evaluate at a d-tuple of n x n matrices.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        if x.dims() != self.dims {
            return Err(Error::DimsMismatch {
                expected: self.dims,
                got: x.dims(),
            });
        }
        let n = x.level();
        let mut acc = CMat::zeros(n, n);
        if self.terms.len() > MEMO_TERM_THRESHOLD {
            let mut cache: HashMap<&[u8], CMat> = HashMap::new();
            for (w, c) in &self.terms {
                let m = eval_word_cached(w.letters(), x, &mut cache);
                acc += m * Complex64::from(*c);
            }
        } else {
            for (w, c) in &self.terms {
                acc += w.eval(x) * Complex64::from(*c);
            }
        }
        Ok(acc)
    }
}

fn eval_word_cached<'a>(
    letters: &'a [u8],
    x: &MatrixTuple,
    cache: &mut HashMap<&'a [u8], CMat>,
) -> CMat {
    if letters.is_empty() {
        return eye(x.level());
    }
    if let Some(m) = cache.get(letters) {
        return m.clone();
    }
    let (prefix, last) = letters.split_at(letters.len() - 1);
    let m = eval_word_cached(prefix, x, cache) * &x.mats()[(last[0] - 1) as usize];
    cache.insert(letters, m.clone());
    m
}

impl fmt::Display for FreePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let coeff = if c.im.abs() <= COEFF_PRUNE_TOL {
                format!("{}", c.re)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            if w.is_empty() {
                write!(f, "{coeff}")?;
            } else {
                write!(f, "{coeff}*{w}")?;
            }
        }
        Ok(())
    }
}

/// A rectangular matrix of free polynomials defining a polyhedron.
#[derive(Clone, PartialEq, Debug)]
pub struct DeltaMatrix {
    rows: usize,
    cols: usize,
    dims: usize,
    entries: Vec<FreePoly>,
}

impl DeltaMatrix {
    /// Row-major entries; all entries must share the same variable count.
    pub fn new(rows: usize, cols: usize, entries: Vec<FreePoly>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape("delta must have at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "delta needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let dims = entries[0].dims();
        if entries.iter().any(|p| p.dims() != dims) {
            return Err(Error::Shape(
                "all delta entries must use the same variable count".into(),
            ));
        }
        Ok(DeltaMatrix {
            rows,
            cols,
            dims,
            entries,
        })
    }

    /// 1 x 1 symbol `[x1]`: the polyhedron is the operator-norm unit ball.
    pub fn disk() -> Self {
        DeltaMatrix::new(1, 1, vec![FreePoly::variable(1, 1).unwrap()]).unwrap()
    }

    /// diag(x1, ..., xd): each variable contractive separately.
    pub fn polydisk(d: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(if i == j {
                    FreePoly::variable(d, (i + 1) as u8)?
                } else {
                    FreePoly::zero(d)?
                });
            }
        }
        DeltaMatrix::new(d, d, entries)
    }

    /// The row [x1 ... xd]: the row-ball constraint on the tuple.
    pub fn row_ball(d: usize) -> Result<Self> {
        let entries = (1..=d)
            .map(|r| FreePoly::variable(d, r as u8))
            .collect::<Result<Vec<_>>>()?;
        DeltaMatrix::new(1, d, entries)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn entry(&self, i: usize, j: usize) -> &FreePoly {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[FreePoly] {
        &self.entries
    }

    pub fn max_degree(&self) -> isize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(-1)
    }

    /// True when every entry is homogeneous of degree one (or zero), so that
    /// delta(t x) = t delta(x).
    pub fn is_homogeneous_linear(&self) -> bool {
        self.entries
            .iter()
            .all(|p| p.is_zero() || p.is_homogeneous_linear())
    }

    /// Block evaluation: the (i, j) block of the result is entry(i,j)(x),
    /// giving an (rows * n) x (cols * n) matrix.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        if x.dims() != self.dims {
            return Err(Error::DimsMismatch {
                expected: self.dims,
                got: x.dims(),
            });
        }
        let n = x.level();
        let mut out = CMat::zeros(self.rows * n, self.cols * n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let block = self.entry(i, j).eval(x)?;
                out.view_mut((i * n, j * n), (n, n)).copy_from(&block);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mattuple::MatrixTuple;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn re_mat(rows: usize, cols: usize, vals: &[f64]) -> CMat {
        DMatrix::from_row_slice(rows, cols, &vals.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn graded_lex_orders_by_length_then_letters() {
        let e = Word::empty();
        let x1 = Word::letter(1).unwrap();
        let x2 = Word::letter(2).unwrap();
        let x1x2 = Word::from_letters(vec![1, 2]).unwrap();
        let x2x1 = Word::from_letters(vec![2, 1]).unwrap();
        assert!(e < x1);
        assert!(x1 < x2);
        assert!(x2 < x1x2);
        assert!(x1x2 < x2x1);
    }

    #[test]
    fn word_enumeration_is_graded_lex() {
        let ws = words_up_to(2, 2);
        let shown: Vec<String> = ws.iter().map(|w| w.to_string()).collect();
        assert_eq!(shown, vec!["1", "x1", "x2", "x1*x1", "x1*x2", "x2*x1", "x2*x2"]);
        let mut sorted = ws.clone();
        sorted.sort();
        assert_eq!(ws, sorted);
    }

    #[test]
    fn canonical_form_prunes_and_merges() {
        let p = FreePoly::from_terms(
            2,
            [
                (Word::letter(1).unwrap(), c(1.0, 0.0)),
                (Word::letter(1).unwrap(), c(-1.0, 0.0)),
                (Word::letter(2).unwrap(), c(1e-15, 0.0)),
            ],
        )
        .unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), -1);
    }

    #[test]
    fn rejects_letters_beyond_dims() {
        let r = FreePoly::from_terms(2, [(Word::letter(3).unwrap(), c(1.0, 0.0))]);
        assert!(r.is_err());
    }

    #[test]
    fn product_respects_word_order() {
        let x1 = FreePoly::variable(2, 1).unwrap();
        let x2 = FreePoly::variable(2, 2).unwrap();
        let p = x1.mul(&x2).unwrap();
        let q = x2.mul(&x1).unwrap();
        assert_eq!(p.coeff(&Word::from_letters(vec![1, 2]).unwrap()), c(1.0, 0.0));
        assert_eq!(p.coeff(&Word::from_letters(vec![2, 1]).unwrap()), c(0.0, 0.0));
        assert_ne!(p, q);
    }

    #[test]
    fn square_of_one_plus_x() {
        let one = FreePoly::one(1).unwrap();
        let x = FreePoly::variable(1, 1).unwrap();
        let s = one.add(&x).unwrap();
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.coeff(&Word::empty()), c(1.0, 0.0));
        assert_eq!(sq.coeff(&Word::letter(1).unwrap()), c(2.0, 0.0));
        assert_eq!(sq.coeff(&Word::from_letters(vec![1, 1]).unwrap()), c(1.0, 0.0));
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn unit_polynomial_evaluates_to_identity() {
        let p = FreePoly::one(2).unwrap();
        let x = MatrixTuple::new(vec![re_mat(2, 2, &[0.0, 1.0, 0.0, 0.0]), re_mat(2, 2, &[1.0, 0.0, 0.0, -1.0])])
            .unwrap();
        let v = p.eval(&x).unwrap();
        assert!((v - eye(2)).norm() < 1e-15);
    }

    #[test]
    fn commutator_at_nilpotent_pair() {
        // p = x1 x2 - x2 x1 at x1 = E12, x2 = diag(1, -1) gives [[0, -2], [0, 0]].
        let x1 = FreePoly::variable(2, 1).unwrap();
        let x2 = FreePoly::variable(2, 2).unwrap();
        let p = x1.mul(&x2).unwrap().sub(&x2.mul(&x1).unwrap()).unwrap();
        let x = MatrixTuple::new(vec![
            re_mat(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            re_mat(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        ])
        .unwrap();
        let v = p.eval(&x).unwrap();
        let expect = re_mat(2, 2, &[0.0, -2.0, 0.0, 0.0]);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn nilpotent_square_vanishes() {
        let p = FreePoly::variable(1, 1)
            .unwrap()
            .mul(&FreePoly::variable(1, 1).unwrap())
            .unwrap();
        let x = MatrixTuple::new(vec![re_mat(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        let v = p.eval(&x).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn memoized_and_direct_evaluation_agree() {
        // Build a polynomial with enough terms to trigger the prefix cache.
        let words = words_up_to(2, 5);
        let terms: Vec<(Word, Complex64)> = words
            .iter()
            .enumerate()
            .map(|(k, w)| (w.clone(), c(1.0 + k as f64 * 0.1, 0.3)))
            .collect();
        let p = FreePoly::from_terms(2, terms.clone()).unwrap();
        assert!(p.num_terms() > 32);
        let x = MatrixTuple::new(vec![
            re_mat(2, 2, &[0.1, 0.3, 0.0, 0.2]),
            re_mat(2, 2, &[0.2, 0.0, 0.1, -0.1]),
        ])
        .unwrap();
        let fast = p.eval(&x).unwrap();
        // Direct sum of each term evaluated independently.
        let mut slow = CMat::zeros(2, 2);
        for (w, coeff) in &terms {
            slow += w.eval(&x) * Complex64::from(*coeff);
        }
        assert!((fast - slow).norm() < 1e-12);
    }

    #[test]
    fn eval_is_multiplicative_on_products() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift64 keeps the test free of external RNG deps.
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) - 0.5
        };
        for _ in 0..20 {
            let mats: Vec<CMat> = (0..2)
                .map(|_| {
                    CMat::from_fn(3, 3, |_, _| c(next(), next()))
                })
                .collect();
            let x = MatrixTuple::new(mats).unwrap();
            let p = FreePoly::from_terms(
                2,
                [
                    (Word::empty(), c(next(), next())),
                    (Word::letter(1).unwrap(), c(next(), next())),
                    (Word::from_letters(vec![2, 1]).unwrap(), c(next(), next())),
                ],
            )
            .unwrap();
            let q = FreePoly::from_terms(
                2,
                [
                    (Word::letter(2).unwrap(), c(next(), next())),
                    (Word::from_letters(vec![1, 1]).unwrap(), c(next(), next())),
                ],
            )
            .unwrap();
            let lhs = p.mul(&q).unwrap().eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            let scale = 1.0 + rhs.norm();
            assert!((lhs - rhs).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn delta_eval_assembles_blocks() {
        // delta = [[x1, x2]] at level 2: a 2 x 4 block row.
        let delta = DeltaMatrix::row_ball(2).unwrap();
        let m1 = re_mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m2 = re_mat(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let x = MatrixTuple::new(vec![m1.clone(), m2.clone()]).unwrap();
        let v = delta.eval(&x).unwrap();
        assert_eq!(v.nrows(), 2);
        assert_eq!(v.ncols(), 4);
        assert_eq!(v.view((0, 0), (2, 2)).clone_owned(), m1);
        assert_eq!(v.view((0, 2), (2, 2)).clone_owned(), m2);
    }

    #[test]
    fn disk_symbol_evaluates_to_the_point() {
        let delta = DeltaMatrix::disk();
        let x = MatrixTuple::new(vec![re_mat(1, 1, &[0.5])]).unwrap();
        let v = delta.eval(&x).unwrap();
        assert_eq!(v[(0, 0)], c(0.5, 0.0));
    }

    #[test]
    fn polydisk_is_block_diagonal() {
        let delta = DeltaMatrix::polydisk(2).unwrap();
        let x = MatrixTuple::new(vec![re_mat(1, 1, &[0.3]), re_mat(1, 1, &[0.7])]).unwrap();
        let v = delta.eval(&x).unwrap();
        assert_eq!(v[(0, 0)], c(0.3, 0.0));
        assert_eq!(v[(1, 1)], c(0.7, 0.0));
        assert_eq!(v[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn homogeneity_detection() {
        assert!(DeltaMatrix::disk().is_homogeneous_linear());
        assert!(DeltaMatrix::polydisk(3).unwrap().is_homogeneous_linear());
        let quad = DeltaMatrix::new(
            1,
            1,
            vec![FreePoly::variable(1, 1)
                .unwrap()
                .mul(&FreePoly::variable(1, 1).unwrap())
                .unwrap()],
        )
        .unwrap();
        assert!(!quad.is_homogeneous_linear());
    }
}
