//! Seeded random generation of points, symbols, colligations, and
//! intertwining triples. Everything is deterministic in the seed; per-trial
//! generators are derived with a splitmix64 mix so trials are independent of
//! how many draws earlier trials consumed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::freepoly::{DeltaMatrix, FreePoly, Word};
use crate::linalg::{eye, CMat};
use crate::mattuple::{membership, MatrixTuple, MEMBERSHIP_TOL};
use crate::realization::Colligation;

/// Rejection budget before the sampler gives up on a symbol.
pub const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

/// Default target for norm(delta(x)) when sampling near the boundary.
pub const BOUNDARY_TARGET: f64 = 0.99;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// An independent generator for one trial of a seeded experiment.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)))
}

/// Complex standard Gaussian entries (real and imaginary N(0, 1/2)).
pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2.0f64.sqrt()
    })
}

/// A d-tuple with independent Gaussian entries scaled by 1/sqrt(n).
pub fn gaussian_tuple(rng: &mut impl Rng, d: usize, n: usize) -> Result<MatrixTuple> {
    if d == 0 || n == 0 {
        return Err(Error::Invalid("need d >= 1 and n >= 1".into()));
    }
    let scale = Complex64::from(1.0 / (n as f64).sqrt());
    MatrixTuple::new(
        (0..d)
            .map(|_| gaussian_matrix(rng, n, n) * scale)
            .collect(),
    )
}

/// Sample a level-n member of the polyhedron with norm(delta(x)) close to
/// [`BOUNDARY_TARGET`].
pub fn in_polyhedron(
    delta: &DeltaMatrix,
    n: usize,
    rng: &mut impl Rng,
) -> Result<MatrixTuple> {
    in_polyhedron_with_target(delta, n, rng, BOUNDARY_TARGET)
}

/// Sample a level-n member with norm(delta(x)) near `target` (0 < target < 1).
/// Gaussian directions are rescaled: exactly for homogeneous linear symbols,
/// by bisection on the radius otherwise. Falls back to plain rejection when
/// the symbol's constant part already exceeds the target.
pub fn in_polyhedron_with_target(
    delta: &DeltaMatrix,
    n: usize,
    rng: &mut impl Rng,
    target: f64,
) -> Result<MatrixTuple> {
    if !(0.0 < target && target < 1.0 - 2.0 * MEMBERSHIP_TOL) {
        return Err(Error::Invalid(format!(
            "target norm must sit strictly inside (0, 1), got {target}"
        )));
    }
    let norm_at = |x: &MatrixTuple| -> Result<f64> { Ok(membership(delta, x)?.norm) };
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let x = gaussian_tuple(rng, delta.dims(), n)?;
        let nm = norm_at(&x)?;
        if delta.is_homogeneous_linear() {
            if nm <= f64::EPSILON {
                continue;
            }
            let y = x.scale(target / nm);
            if membership(delta, &y)?.member {
                return Ok(y);
            }
            continue;
        }
        // General symbols: walk the radius t of t |-> delta(t x).
        let at_zero = norm_at(&MatrixTuple::zero(delta.dims(), n)?)?;
        if at_zero >= target {
            if membership(delta, &x)?.member {
                return Ok(x);
            }
            continue;
        }
        let mut t_hi = 1.0f64;
        let mut reached = nm >= target;
        if !reached {
            for _ in 0..40 {
                t_hi *= 2.0;
                if norm_at(&x.scale(t_hi))? >= target {
                    reached = true;
                    break;
                }
            }
        }
        if !reached {
            // delta is bounded along this ray; the far point is inside.
            let y = x.scale(t_hi);
            if membership(delta, &y)?.member {
                return Ok(y);
            }
            continue;
        }
        let mut lo = 0.0f64;
        let mut hi = t_hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if norm_at(&x.scale(mid))? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y = x.scale(lo);
        if membership(delta, &y)?.member {
            return Ok(y);
        }
    }
    Err(Error::SamplerExhausted {
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

/// A Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMat {
    gaussian_matrix(rng, n, n).qr().q()
}

/// A random isometric colligation over the symbol, from the thin QR factor
/// of a Gaussian block matrix. Requires the symbol to have at least as many
/// columns as rows, otherwise no exact column isometry of this shape exists.
pub fn random_colligation(
    rng: &mut impl Rng,
    delta: &DeltaMatrix,
    m: usize,
) -> Result<Colligation> {
    if m == 0 {
        return Err(Error::Invalid("model dimension must be positive".into()));
    }
    let (di, dj) = (delta.nrows(), delta.ncols());
    if di > dj {
        return Err(Error::Invalid(format!(
            "symbol has {di} rows > {dj} columns; no isometric colligation of this shape"
        )));
    }
    let rows = 1 + m * dj;
    let cols = 1 + m * di;
    let g = gaussian_matrix(rng, rows, cols);
    let q = g.qr().q();
    let a = q.view((0, 0), (1, 1)).into_owned();
    let b = q.view((0, 1), (1, cols - 1)).into_owned();
    let c = q.view((1, 0), (rows - 1, 1)).into_owned();
    let d = q.view((1, 1), (rows - 1, cols - 1)).into_owned();
    Colligation::new(m, delta.clone(), a, b, c, d)
}

/// A small family of symbols used by demos and randomized suites. All have
/// at least as many columns as rows, so isometric colligations exist.
pub fn random_delta(rng: &mut impl Rng) -> DeltaMatrix {
    match rng.gen_range(0..7u8) {
        0 => DeltaMatrix::disk(),
        1 => DeltaMatrix::polydisk(2).unwrap(),
        2 => DeltaMatrix::polydisk(3).unwrap(),
        3 => DeltaMatrix::row_ball(2).unwrap(),
        4 => DeltaMatrix::row_ball(3).unwrap(),
        5 => {
            // [[x1, x2], [x2, x1]]
            let x1 = FreePoly::variable(2, 1).unwrap();
            let x2 = FreePoly::variable(2, 2).unwrap();
            DeltaMatrix::new(2, 2, vec![x1.clone(), x2.clone(), x2, x1]).unwrap()
        }
        _ => {
            // [x1, 0.5 x1 x2]: a non-homogeneous row symbol.
            let x1 = FreePoly::variable(2, 1).unwrap();
            let x2 = FreePoly::variable(2, 2).unwrap();
            let q = x1.mul(&x2).unwrap().scale(Complex64::from(0.5));
            DeltaMatrix::new(1, 2, vec![x1, q]).unwrap()
        }
    }
}

/// How an intertwining triple is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntertwinerKind {
    /// y = s^-1 x s with S = s^-1.
    Similarity,
    /// y = x (+) z with S the inclusion of the top block.
    Embedding,
    /// x = y (+) z with S the projection onto the top block.
    Restriction,
}

/// Build (x, y, S) with S x_r = y_r S exactly by construction and both
/// points inside the polyhedron. `n` is the level of the smaller point.
pub fn intertwining_triple(
    delta: &DeltaMatrix,
    n: usize,
    kind: IntertwinerKind,
    rng: &mut impl Rng,
) -> Result<(MatrixTuple, MatrixTuple, CMat)> {
    match kind {
        IntertwinerKind::Similarity => {
            let x = in_polyhedron_with_target(delta, n, rng, 0.8)?;
            let g = gaussian_matrix(rng, n, n);
            let mut shrink = 0.3f64;
            for _ in 0..30 {
                let s = eye(n) + &g * Complex64::from(shrink);
                if let Ok(y) = x.similarity(&s) {
                    if membership(delta, &y)?.member {
                        let s_inv = s.clone().lu().try_inverse().ok_or(Error::SingularSystem)?;
                        return Ok((x, y, s_inv));
                    }
                }
                shrink *= 0.5;
            }
            // shrink -> 0 makes y -> x, so this is unreachable for members.
            Err(Error::SamplerExhausted { attempts: 30 })
        }
        IntertwinerKind::Embedding => {
            let x = in_polyhedron_with_target(delta, n, rng, 0.8)?;
            let k = rng.gen_range(1..=2usize);
            let z = in_polyhedron_with_target(delta, k, rng, 0.8)?;
            let y = x.direct_sum(&z)?;
            let mut s = CMat::zeros(n + k, n);
            s.view_mut((0, 0), (n, n)).copy_from(&eye(n));
            Ok((x, y, s))
        }
        IntertwinerKind::Restriction => {
            let y = in_polyhedron_with_target(delta, n, rng, 0.8)?;
            let k = rng.gen_range(1..=2usize);
            let z = in_polyhedron_with_target(delta, k, rng, 0.8)?;
            let x = y.direct_sum(&z)?;
            let mut s = CMat::zeros(n, n + k);
            s.view_mut((0, 0), (n, n)).copy_from(&eye(n));
            Ok((x, y, s))
        }
    }
}

/// Deterministic word helper for randomized polynomial construction.
pub fn random_poly(rng: &mut impl Rng, d: usize, max_len: usize, terms: usize) -> Result<FreePoly> {
    let mut list = Vec::with_capacity(terms);
    for _ in 0..terms {
        let len = rng.gen_range(0..=max_len);
        let letters: Vec<u8> = (0..len).map(|_| rng.gen_range(1..=d as u8)).collect();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        list.push((Word::from_letters(letters)?, Complex64::new(re, im)));
    }
    FreePoly::from_terms(d, list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mattuple::intertwine_check;

    #[test]
    fn trial_rngs_are_deterministic_and_distinct() {
        let mut a = trial_rng(7, 0);
        let mut b = trial_rng(7, 0);
        let mut c = trial_rng(7, 1);
        let va: u64 = a.gen();
        let vb: u64 = b.gen();
        let vc: u64 = c.gen();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn sampled_points_sit_near_the_target() {
        let delta = DeltaMatrix::polydisk(2).unwrap();
        let mut rng = trial_rng(3, 0);
        for n in 1..=3 {
            let x = in_polyhedron(&delta, n, &mut rng).unwrap();
            let rep = membership(&delta, &x).unwrap();
            assert!(rep.member);
            assert!((rep.norm - BOUNDARY_TARGET).abs() < 1e-6);
        }
    }

    #[test]
    fn sampler_handles_non_homogeneous_symbols() {
        let x1 = FreePoly::variable(1, 1).unwrap();
        let sq = x1.mul(&x1).unwrap();
        let mix = x1.scale(Complex64::from(0.7)).add(&sq.scale(Complex64::from(0.3))).unwrap();
        let delta = DeltaMatrix::new(1, 1, vec![mix]).unwrap();
        let mut rng = trial_rng(11, 0);
        let x = in_polyhedron(&delta, 2, &mut rng).unwrap();
        let rep = membership(&delta, &x).unwrap();
        assert!(rep.member);
        assert!(rep.norm > 0.5);
    }

    #[test]
    fn random_colligations_are_isometric() {
        let mut rng = trial_rng(5, 0);
        for _ in 0..10 {
            let delta = random_delta(&mut rng);
            let m = rng.gen_range(1..=2);
            let coll = random_colligation(&mut rng, &delta, m).unwrap();
            assert!(coll.isometry_residual() < 1e-12);
        }
    }

    #[test]
    fn colligation_requires_wide_symbols() {
        // A column symbol (2 rows, 1 column) admits no isometric colligation.
        let x1 = FreePoly::variable(1, 1).unwrap();
        let delta = DeltaMatrix::new(2, 1, vec![x1.clone(), x1]).unwrap();
        let mut rng = trial_rng(5, 1);
        assert!(random_colligation(&mut rng, &delta, 1).is_err());
    }

    #[test]
    fn intertwining_triples_are_exact() {
        let delta = DeltaMatrix::disk();
        for (t, kind) in [
            IntertwinerKind::Similarity,
            IntertwinerKind::Embedding,
            IntertwinerKind::Restriction,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = trial_rng(9, t as u64);
            let (x, y, s) = intertwining_triple(&delta, 2, kind, &mut rng).unwrap();
            assert!(membership(&delta, &x).unwrap().member);
            assert!(membership(&delta, &y).unwrap().member);
            assert!(intertwine_check(&x, &y, &s).unwrap() < 1e-10);
        }
    }
}
