//! JSON interchange formats. Complex numbers travel as [re, im] pairs,
//! matrices as row-major nested arrays, variable indices 1-based. These DTO
//! structs mirror the wire schema exactly; conversion into domain types
//! performs the validation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::SeparationCertificate;
use crate::error::{Error, Result};
use crate::freepoly::{DeltaMatrix, FreePoly, Word};
use crate::linalg::{CMat, CVec};
use crate::mattuple::MatrixTuple;
use crate::realization::{Colligation, ModelData};
use crate::synthesis::InterpolationProblem;

pub type ComplexJson = [f64; 2];

pub fn complex_to_json(c: Complex64) -> ComplexJson {
    [c.re, c.im]
}

pub fn complex_from_json(j: ComplexJson) -> Result<Complex64> {
    if !j[0].is_finite() || !j[1].is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(Complex64::new(j[0], j[1]))
}

pub type MatJson = Vec<Vec<ComplexJson>>;

pub fn mat_to_json(m: &CMat) -> MatJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())
        .collect()
}

pub fn mat_from_json(j: &MatJson) -> Result<CMat> {
    let rows = j.len();
    if rows == 0 {
        return Err(Error::Shape("matrix has no rows".into()));
    }
    let cols = j[0].len();
    if cols == 0 {
        return Err(Error::Shape("matrix has no columns".into()));
    }
    if j.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape("matrix rows have unequal lengths".into()));
    }
    let mut m = CMat::zeros(rows, cols);
    for (i, row) in j.iter().enumerate() {
        for (jj, &entry) in row.iter().enumerate() {
            m[(i, jj)] = complex_from_json(entry)?;
        }
    }
    Ok(m)
}

pub fn cvec_to_json(v: &CVec) -> Vec<ComplexJson> {
    v.iter().map(|&c| complex_to_json(c)).collect()
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermJson {
    pub word: Vec<usize>,
    pub coeff: ComplexJson,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct FreePolyJson {
    pub d: usize,
    pub terms: Vec<TermJson>,
}

impl From<&FreePoly> for FreePolyJson {
    fn from(p: &FreePoly) -> Self {
        FreePolyJson {
            d: p.dims(),
            terms: p
                .terms()
                .map(|(w, c)| TermJson {
                    word: w.letters().iter().map(|&l| l as usize).collect(),
                    coeff: complex_to_json(*c),
                })
                .collect(),
        }
    }
}

impl TryFrom<&FreePolyJson> for FreePoly {
    type Error = Error;

    fn try_from(j: &FreePolyJson) -> Result<FreePoly> {
        let mut terms = Vec::with_capacity(j.terms.len());
        for t in &j.terms {
            let letters = t
                .word
                .iter()
                .map(|&l| {
                    if l == 0 || l > j.d {
                        Err(Error::Invalid(format!(
                            "word letter {l} out of range 1..={}",
                            j.d
                        )))
                    } else {
                        Ok(l as u8)
                    }
                })
                .collect::<Result<Vec<u8>>>()?;
            terms.push((Word::from_letters(letters)?, complex_from_json(t.coeff)?));
        }
        FreePoly::from_terms(j.d, terms)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct DeltaJson {
    #[serde(rename = "I")]
    pub rows: usize,
    #[serde(rename = "J")]
    pub cols: usize,
    /// Row-major polynomial entries.
    pub entries: Vec<FreePolyJson>,
}

impl From<&DeltaMatrix> for DeltaJson {
    fn from(d: &DeltaMatrix) -> Self {
        DeltaJson {
            rows: d.nrows(),
            cols: d.ncols(),
            entries: d.entries().iter().map(FreePolyJson::from).collect(),
        }
    }
}

impl TryFrom<&DeltaJson> for DeltaMatrix {
    type Error = Error;

    fn try_from(j: &DeltaJson) -> Result<DeltaMatrix> {
        let entries = j
            .entries
            .iter()
            .map(FreePoly::try_from)
            .collect::<Result<Vec<_>>>()?;
        DeltaMatrix::new(j.rows, j.cols, entries)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TupleJson {
    pub d: usize,
    pub n: usize,
    pub mats: Vec<MatJson>,
}

impl From<&MatrixTuple> for TupleJson {
    fn from(t: &MatrixTuple) -> Self {
        TupleJson {
            d: t.dims(),
            n: t.level(),
            mats: t.mats().iter().map(mat_to_json).collect(),
        }
    }
}

impl TryFrom<&TupleJson> for MatrixTuple {
    type Error = Error;

    fn try_from(j: &TupleJson) -> Result<MatrixTuple> {
        if j.mats.len() != j.d {
            return Err(Error::Shape(format!(
                "tuple declares d = {} but carries {} matrices",
                j.d,
                j.mats.len()
            )));
        }
        let mats = j
            .mats
            .iter()
            .map(mat_from_json)
            .collect::<Result<Vec<_>>>()?;
        if mats.iter().any(|m| m.nrows() != j.n || m.ncols() != j.n) {
            return Err(Error::Shape(format!(
                "tuple declares level {} but a component differs",
                j.n
            )));
        }
        MatrixTuple::new(mats)
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ColligationJson {
    pub m: usize,
    pub delta: DeltaJson,
    #[serde(rename = "A")]
    pub a: MatJson,
    #[serde(rename = "B")]
    pub b: MatJson,
    #[serde(rename = "C")]
    pub c: MatJson,
    #[serde(rename = "D")]
    pub d: MatJson,
}

impl From<&Colligation> for ColligationJson {
    fn from(c: &Colligation) -> Self {
        ColligationJson {
            m: c.m(),
            delta: DeltaJson::from(c.delta()),
            a: mat_to_json(c.a()),
            b: mat_to_json(c.b()),
            c: mat_to_json(c.c()),
            d: mat_to_json(c.d()),
        }
    }
}

impl TryFrom<&ColligationJson> for Colligation {
    type Error = Error;

    fn try_from(j: &ColligationJson) -> Result<Colligation> {
        colligation_from_json(j, crate::realization::ISOMETRY_TOL)
    }
}

/// Colligation decoding with an explicit isometry tolerance, for callers
/// that loosen the gate deliberately.
pub fn colligation_from_json(j: &ColligationJson, isometry_tol: f64) -> Result<Colligation> {
    let delta = DeltaMatrix::try_from(&j.delta)?;
    Colligation::with_isometry_tol(
        j.m,
        delta,
        mat_from_json(&j.a)?,
        mat_from_json(&j.b)?,
        mat_from_json(&j.c)?,
        mat_from_json(&j.d)?,
        isometry_tol,
    )
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ModelDataJson {
    pub m: usize,
    pub points: Vec<TupleJson>,
    pub values: Vec<MatJson>,
    pub uvecs: Vec<MatJson>,
}

impl From<&ModelData> for ModelDataJson {
    fn from(md: &ModelData) -> Self {
        ModelDataJson {
            m: md.m,
            points: md.points.iter().map(TupleJson::from).collect(),
            values: md.values.iter().map(mat_to_json).collect(),
            uvecs: md.uvecs.iter().map(mat_to_json).collect(),
        }
    }
}

impl TryFrom<&ModelDataJson> for ModelData {
    type Error = Error;

    fn try_from(j: &ModelDataJson) -> Result<ModelData> {
        ModelData::new(
            j.m,
            j.points
                .iter()
                .map(MatrixTuple::try_from)
                .collect::<Result<Vec<_>>>()?,
            j.values.iter().map(mat_from_json).collect::<Result<Vec<_>>>()?,
            j.uvecs.iter().map(mat_from_json).collect::<Result<Vec<_>>>()?,
        )
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ProblemJson {
    pub delta: DeltaJson,
    pub nodes: Vec<TupleJson>,
    #[serde(default)]
    pub targets: Vec<MatJson>,
    pub degree_bound: usize,
}

impl TryFrom<&ProblemJson> for InterpolationProblem {
    type Error = Error;

    fn try_from(j: &ProblemJson) -> Result<InterpolationProblem> {
        InterpolationProblem::new(
            DeltaMatrix::try_from(&j.delta)?,
            j.nodes
                .iter()
                .map(MatrixTuple::try_from)
                .collect::<Result<Vec<_>>>()?,
            j.targets.iter().map(mat_from_json).collect::<Result<Vec<_>>>()?,
            j.degree_bound,
        )
    }
}

impl From<&InterpolationProblem> for ProblemJson {
    fn from(p: &InterpolationProblem) -> Self {
        ProblemJson {
            delta: DeltaJson::from(&p.delta),
            nodes: p.nodes.iter().map(TupleJson::from).collect(),
            targets: p.targets.iter().map(mat_to_json).collect(),
            degree_bound: p.degree_bound,
        }
    }
}

#[derive(Serialize, Clone, Debug)]
pub struct CertificateJson {
    #[serde(rename = "K")]
    pub k: MatJson,
    pub u: Vec<ComplexJson>,
    pub v: Vec<ComplexJson>,
    #[serde(rename = "N")]
    pub n_basis: MatJson,
    pub s: MatJson,
    pub alpha_over_beta: f64,
    pub residuals: BTreeMap<String, f64>,
}

impl From<&SeparationCertificate> for CertificateJson {
    fn from(c: &SeparationCertificate) -> Self {
        CertificateJson {
            k: mat_to_json(&c.functional.k),
            u: cvec_to_json(&c.functional.u),
            v: cvec_to_json(&c.functional.v),
            n_basis: mat_to_json(&c.n_basis),
            s: mat_to_json(&c.s),
            alpha_over_beta: c.alpha_over_beta,
            residuals: c.residuals.as_map(),
        }
    }
}
