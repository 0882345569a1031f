//! Command-line interface. Inputs are JSON files; outputs are JSON
//! documents on stdout (or `--out`) with brief human-readable residual
//! lines on stderr. Exit codes: 0 success or verified, 2 malformed input,
//! 3 domain violation, 4 mathematical infeasibility or failed verification.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::algebra::{alg_basis, scaling_construct, value_in_generated_algebra, MEMBER_TOL};
use crate::error::{Error, Result};
use crate::freepoly::DeltaMatrix;
use crate::json::{
    colligation_from_json, mat_from_json, mat_to_json, CertificateJson, ColligationJson,
    DeltaJson, FreePolyJson, ModelDataJson, ProblemJson, TupleJson,
};
use crate::mattuple::{membership, op_norm, MatrixTuple};
use crate::realization::{contractivity_sample, verify_model, MODEL_TOL};
use crate::sample;
use crate::synthesis::{
    check_condition_ii, fit_polynomial, ideal_basis, interpolate_finite, sample_variety_point,
    InterpolationProblem, AGREEMENT_TOL, FIT_TOL,
};

/// Environment variable capping n * m * max(I, J) per run.
pub const MAX_DIM_ENV: &str = "NCREAL_MAX_DIM";
pub const DEFAULT_MAX_DIM: usize = 512;

#[derive(Parser)]
#[command(
    name = "ncreal",
    version,
    about = "Bounded non-commutative functions on polynomial polyhedra"
)]
struct Cli {
    /// Seed for all randomized work.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Word-length bound for polynomial fits (required by `fit`).
    #[arg(long, global = true)]
    degree_bound: Option<usize>,

    /// Replace the default verification tolerance where one applies.
    #[arg(long, global = true)]
    tol_override: Option<f64>,

    /// Write the JSON result to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test membership of a point in the polyhedron of a symbol.
    Member { delta: PathBuf, point: PathBuf },
    /// Evaluate a realized function at a point.
    Eval { colligation: PathBuf, point: PathBuf },
    /// Separate a witness matrix from the algebra of a point and scale.
    Separate {
        delta: PathBuf,
        point: PathBuf,
        witness: PathBuf,
    },
    /// Interpolate a source function through the nodes of a problem.
    Realize { problem: PathBuf, source: PathBuf },
    /// Check the factorization identity on model data.
    VerifyModel { model: PathBuf, delta: PathBuf },
    /// Fit a bounded-degree free polynomial through one matrix datum.
    Fit { point: PathBuf, target: PathBuf },
    /// Run a named end-to-end demonstration.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum DemoName {
    /// Realized values land in the algebra of the evaluation point.
    Step1,
    /// Saturated fits stay contractive on the variety of the point.
    Step2,
    /// Model extraction and resynthesis reproduce the source at the nodes.
    Roundtrip,
    /// Random realized functions are contractive on sampled points.
    Contractivity,
}

/// A machine-readable account of one CLI run. Every verdict is recorded
/// together with the residual it judged and the tolerance it was judged
/// against.
#[derive(Serialize, Clone, Debug)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub seed: u64,
    pub wall_time: f64,
}

impl RunReport {
    fn new(command: &str, inputs_digest: String, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            inputs_digest,
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            seed,
            wall_time: 0.0,
        }
    }

    fn record(&mut self, name: &str, residual: f64, tolerance: f64, pass: bool) {
        self.residuals.insert(name.to_string(), residual);
        self.tolerances.insert(name.to_string(), tolerance);
        self.verdicts.insert(name.to_string(), pass);
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Member { delta, point } => cmd_member(cli, delta, point),
        Command::Eval { colligation, point } => cmd_eval(cli, colligation, point),
        Command::Separate {
            delta,
            point,
            witness,
        } => cmd_separate(cli, delta, point, witness),
        Command::Realize { problem, source } => cmd_realize(cli, problem, source),
        Command::VerifyModel { model, delta } => cmd_verify_model(cli, model, delta),
        Command::Fit { point, target } => cmd_fit(cli, point, target),
        Command::Demo { name } => cmd_demo(cli, *name),
    }
}

fn load_json<T: DeserializeOwned>(path: &Path, digest: &mut Sha256) -> Result<T> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    digest.update(&bytes);
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Invalid(format!("{}: invalid JSON: {e}", path.display())))
}

fn finish_digest(digest: Sha256) -> String {
    let out = digest.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn emit<T: Serialize>(doc: &T, out: &Option<PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn max_dim_cap() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_DIM)
}

fn check_dim_cap(level: usize, m: usize, delta: &DeltaMatrix) -> Result<()> {
    let cap = max_dim_cap();
    let load = level * m * delta.nrows().max(delta.ncols());
    if load > cap {
        return Err(Error::Invalid(format!(
            "problem size n*m*max(I,J) = {load} exceeds the cap {cap} ({MAX_DIM_ENV})"
        )));
    }
    Ok(())
}

fn say(name: &str, value: f64) {
    eprintln!("{name} = {value:.3e}");
}

fn cmd_member(cli: &Cli, delta_path: &Path, point_path: &Path) -> Result<i32> {
    let mut digest = Sha256::new();
    let delta_json: DeltaJson = load_json(delta_path, &mut digest)?;
    let point_json: TupleJson = load_json(point_path, &mut digest)?;
    let delta = DeltaMatrix::try_from(&delta_json)?;
    let point = MatrixTuple::try_from(&point_json)?;
    check_dim_cap(point.level(), 1, &delta)?;
    let rep = membership(&delta, &point)?;
    say("norm", rep.norm);
    say("margin", rep.margin);
    #[derive(Serialize)]
    struct MemberOut {
        norm: f64,
        member: bool,
        margin: f64,
    }
    emit(
        &MemberOut {
            norm: rep.norm,
            member: rep.member,
            margin: rep.margin,
        },
        &cli.out,
    )?;
    Ok(if rep.member { 0 } else { 3 })
}

fn cmd_eval(cli: &Cli, coll_path: &Path, point_path: &Path) -> Result<i32> {
    let mut digest = Sha256::new();
    let coll_json: ColligationJson = load_json(coll_path, &mut digest)?;
    let point_json: TupleJson = load_json(point_path, &mut digest)?;
    let isometry_tol = cli
        .tol_override
        .unwrap_or(crate::realization::ISOMETRY_TOL);
    let coll = colligation_from_json(&coll_json, isometry_tol)?;
    let point = MatrixTuple::try_from(&point_json)?;
    check_dim_cap(point.level(), coll.m(), coll.delta())?;
    let rep = membership(coll.delta(), &point)?;
    let value = coll.eval(&point)?;
    let isometry_residual = coll.isometry_residual();
    say("isometry_residual", isometry_residual);
    say("membership_margin", rep.margin);
    #[derive(Serialize)]
    struct EvalOut {
        value: crate::json::MatJson,
        verification: BTreeMap<String, f64>,
    }
    emit(
        &EvalOut {
            value: mat_to_json(&value),
            verification: BTreeMap::from([
                ("isometry_residual".into(), isometry_residual),
                ("membership_norm".into(), rep.norm),
                ("membership_margin".into(), rep.margin),
            ]),
        },
        &cli.out,
    )?;
    Ok(0)
}

fn cmd_separate(
    cli: &Cli,
    delta_path: &Path,
    point_path: &Path,
    witness_path: &Path,
) -> Result<i32> {
    let mut digest = Sha256::new();
    let delta_json: DeltaJson = load_json(delta_path, &mut digest)?;
    let point_json: TupleJson = load_json(point_path, &mut digest)?;
    let witness_json: crate::json::MatJson = load_json(witness_path, &mut digest)?;
    let delta = DeltaMatrix::try_from(&delta_json)?;
    let point = MatrixTuple::try_from(&point_json)?;
    let witness = mat_from_json(&witness_json)?;
    // The scaling acts on the n-fold amplification, so the working level is n^2.
    check_dim_cap(point.level() * point.level(), 1, &delta)?;
    let cert = scaling_construct(&delta, &point, &witness)?;
    for (name, value) in cert.residuals.as_map() {
        say(&name, value);
    }
    eprintln!("alpha_over_beta = {}", cert.alpha_over_beta);
    emit(&CertificateJson::from(&cert), &cli.out)?;
    Ok(0)
}

fn cmd_realize(cli: &Cli, problem_path: &Path, source_path: &Path) -> Result<i32> {
    let mut digest = Sha256::new();
    let problem_json: ProblemJson = load_json(problem_path, &mut digest)?;
    let source_json: ColligationJson = load_json(source_path, &mut digest)?;
    let isometry_tol = cli
        .tol_override
        .unwrap_or(crate::realization::ISOMETRY_TOL);
    let source = colligation_from_json(&source_json, isometry_tol)?;
    let problem = InterpolationProblem::try_from(&problem_json)?;
    for node in &problem.nodes {
        check_dim_cap(node.level(), source.m(), &problem.delta)?;
    }
    let rebuilt = interpolate_finite(&problem, &source)?;
    let mut residuals = BTreeMap::new();
    for (k, node) in problem.nodes.iter().enumerate() {
        let want = source.eval(node)?;
        let got = rebuilt.eval(node)?;
        let agreement = op_norm(&(got - &want))?;
        residuals.insert(format!("node_{k}_agreement"), agreement);
        if let Some(target) = problem.targets.get(k) {
            residuals.insert(
                format!("node_{k}_target_deviation"),
                op_norm(&(want - target))?,
            );
        }
    }
    residuals.insert("isometry_residual".into(), rebuilt.isometry_residual());
    for (name, value) in &residuals {
        say(name, *value);
    }
    #[derive(Serialize)]
    struct RealizeOut {
        colligation: ColligationJson,
        residuals: BTreeMap<String, f64>,
    }
    emit(
        &RealizeOut {
            colligation: ColligationJson::from(&rebuilt),
            residuals,
        },
        &cli.out,
    )?;
    Ok(0)
}

fn cmd_verify_model(cli: &Cli, model_path: &Path, delta_path: &Path) -> Result<i32> {
    let mut digest = Sha256::new();
    let model_json: ModelDataJson = load_json(model_path, &mut digest)?;
    let delta_json: DeltaJson = load_json(delta_path, &mut digest)?;
    let md = crate::realization::ModelData::try_from(&model_json)?;
    let delta = DeltaMatrix::try_from(&delta_json)?;
    for p in &md.points {
        check_dim_cap(p.level(), md.m, &delta)?;
    }
    let max_residual = verify_model(&md, &delta)?;
    let tolerance = cli.tol_override.unwrap_or(MODEL_TOL);
    let valid = max_residual <= tolerance;
    say("max_residual", max_residual);
    #[derive(Serialize)]
    struct VerifyOut {
        max_residual: f64,
        tolerance: f64,
        valid: bool,
        points: usize,
    }
    emit(
        &VerifyOut {
            max_residual,
            tolerance,
            valid,
            points: md.len(),
        },
        &cli.out,
    )?;
    Ok(if valid { 0 } else { 4 })
}

fn cmd_fit(cli: &Cli, point_path: &Path, target_path: &Path) -> Result<i32> {
    let mut digest = Sha256::new();
    let point_json: TupleJson = load_json(point_path, &mut digest)?;
    let target_json: crate::json::MatJson = load_json(target_path, &mut digest)?;
    let point = MatrixTuple::try_from(&point_json)?;
    let target = mat_from_json(&target_json)?;
    let bound = cli
        .degree_bound
        .ok_or_else(|| Error::Invalid("fit requires --degree-bound".into()))?;
    check_dim_cap(point.level(), 1, &DeltaMatrix::disk())?;
    match fit_polynomial(&point, &target, bound) {
        Ok(p) => {
            let residual = (p.eval(&point)? - &target).norm();
            say("fit_residual", residual);
            #[derive(Serialize)]
            struct FitOut {
                polynomial: FreePolyJson,
                display: String,
                residual: f64,
            }
            emit(
                &FitOut {
                    polynomial: FreePolyJson::from(&p),
                    display: p.to_string(),
                    residual,
                },
                &cli.out,
            )?;
            Ok(0)
        }
        Err(Error::FitInfeasible {
            degree_bound,
            residual,
            saturated,
        }) => {
            say("fit_residual", residual);
            #[derive(Serialize)]
            struct InfeasibleOut {
                infeasible: bool,
                degree_bound: usize,
                residual: f64,
                saturated: bool,
            }
            emit(
                &InfeasibleOut {
                    infeasible: true,
                    degree_bound,
                    residual,
                    saturated,
                },
                &cli.out,
            )?;
            Err(Error::FitInfeasible {
                degree_bound,
                residual,
                saturated,
            })
        }
        Err(e) => Err(e),
    }
}

fn cmd_demo(cli: &Cli, name: DemoName) -> Result<i32> {
    let started = Instant::now();
    let mut digest = Sha256::new();
    digest.update(cli.seed.to_le_bytes());
    let inputs_digest = finish_digest(digest);
    let mut report = match name {
        DemoName::Step1 => demo_step1(cli.seed, inputs_digest)?,
        DemoName::Step2 => demo_step2(cli.seed, inputs_digest)?,
        DemoName::Roundtrip => demo_roundtrip(cli.seed, inputs_digest)?,
        DemoName::Contractivity => demo_contractivity(cli.seed, inputs_digest)?,
    };
    report.wall_time = started.elapsed().as_secs_f64();
    for (name, value) in &report.residuals {
        say(name, *value);
    }
    let ok = report.all_passed();
    emit(&report, &cli.out)?;
    Ok(if ok { 0 } else { 4 })
}

/// Values of random realized functions land in the algebra generated by
/// the point of evaluation.
fn demo_step1(seed: u64, inputs_digest: String) -> Result<RunReport> {
    let mut report = RunReport::new("demo step1", inputs_digest, seed);
    let mut max_distance = 0.0f64;
    let mut threshold = MEMBER_TOL;
    let mut all_member = true;
    for k in 0..12usize {
        let mut rng = sample::trial_rng(seed, k as u64);
        let delta = sample::random_delta(&mut rng);
        let m = 1 + k % 2;
        let coll = sample::random_colligation(&mut rng, &delta, m)?;
        let n = 1 + k % 3;
        let z = sample::in_polyhedron_with_target(&delta, n, &mut rng, 0.9)?;
        let mem = value_in_generated_algebra(&delta, &coll, &z)?;
        let value_norm = op_norm(&coll.eval(&z)?)?;
        max_distance = max_distance.max(mem.distance);
        threshold = threshold.max(MEMBER_TOL * (1.0 + value_norm));
        all_member &= mem.member;
    }
    report.record(
        "values_in_generated_algebra",
        max_distance,
        threshold,
        all_member,
    );
    Ok(report)
}

/// Fits of realized values at saturation degree stay contractive on the
/// variety of the point and extend the source there.
fn demo_step2(seed: u64, inputs_digest: String) -> Result<RunReport> {
    let mut report = RunReport::new("demo step2", inputs_digest, seed);
    let mut worst_variety_norm = 0.0f64;
    let mut worst_fit = 0.0f64;
    let mut worst_agreement = 0.0f64;
    for k in 0..4usize {
        let mut rng = sample::trial_rng(seed, 1000 + k as u64);
        let delta = sample::random_delta(&mut rng);
        let m = 1 + k % 2;
        let coll = sample::random_colligation(&mut rng, &delta, m)?;
        let lambda = sample::in_polyhedron_with_target(&delta, 2, &mut rng, 0.85)?;
        let w = coll.eval(&lambda)?;
        let ab = alg_basis(&lambda);
        let bound = ab.saturation_degree();
        let p = fit_polynomial(&lambda, &w, bound)?;
        worst_fit = worst_fit.max((p.eval(&lambda)? - &w).norm());
        let ideal = ideal_basis(&lambda, bound + 1)?;
        let worst =
            check_condition_ii(&p, &delta, &lambda, &ideal, 18, seed.wrapping_add(k as u64))?;
        worst_variety_norm = worst_variety_norm.max(worst);
        for t in 0..8u64 {
            let mut vrng = sample::trial_rng(seed, 2000 + 10 * k as u64 + t);
            if let Some(x) = sample_variety_point(&lambda, &delta, &ideal, &mut vrng)? {
                let diff = p.eval(&x)? - coll.eval(&x)?;
                worst_agreement = worst_agreement.max(op_norm(&diff)?);
            }
        }
    }
    report.record("fit_exact", worst_fit, FIT_TOL, worst_fit <= FIT_TOL);
    report.record(
        "contractive_on_variety",
        worst_variety_norm,
        1.0 + 1e-6,
        worst_variety_norm <= 1.0 + 1e-6,
    );
    report.record(
        "extends_source_on_variety",
        worst_agreement,
        1e-6,
        worst_agreement <= 1e-6,
    );
    Ok(report)
}

/// Model extraction followed by resynthesis reproduces the source function
/// at every node.
fn demo_roundtrip(seed: u64, inputs_digest: String) -> Result<RunReport> {
    let mut report = RunReport::new("demo roundtrip", inputs_digest, seed);
    let mut worst_agreement = 0.0f64;
    let mut worst_isometry = 0.0f64;
    for k in 0..6usize {
        let mut rng = sample::trial_rng(seed, 3000 + k as u64);
        let delta = sample::random_delta(&mut rng);
        let m = 1 + k % 2;
        let coll = sample::random_colligation(&mut rng, &delta, m)?;
        let node_count = 1 + k % 2;
        let nodes: Vec<MatrixTuple> = (0..node_count)
            .map(|j| {
                let n = 1 + (k + j) % 2;
                sample::in_polyhedron_with_target(&delta, n, &mut rng, 0.9)
            })
            .collect::<Result<Vec<_>>>()?;
        let problem = InterpolationProblem::new(delta.clone(), nodes.clone(), Vec::new(), 2)?;
        let rebuilt = interpolate_finite(&problem, &coll)?;
        worst_isometry = worst_isometry.max(rebuilt.isometry_residual());
        for node in &nodes {
            let diff = rebuilt.eval(node)? - coll.eval(node)?;
            worst_agreement = worst_agreement.max(op_norm(&diff)?);
        }
    }
    report.record(
        "nodes_reproduced",
        worst_agreement,
        AGREEMENT_TOL,
        worst_agreement <= AGREEMENT_TOL,
    );
    report.record(
        "isometric_blocks",
        worst_isometry,
        1e-9,
        worst_isometry <= 1e-9,
    );
    Ok(report)
}

/// Random realized functions are contractive at randomly sampled points.
fn demo_contractivity(seed: u64, inputs_digest: String) -> Result<RunReport> {
    let mut report = RunReport::new("demo contractivity", inputs_digest, seed);
    let mut worst = 0.0f64;
    for k in 0..6usize {
        let mut rng = sample::trial_rng(seed, 4000 + k as u64);
        let delta = sample::random_delta(&mut rng);
        let m = 1 + k % 2;
        let coll = sample::random_colligation(&mut rng, &delta, m)?;
        let observed = contractivity_sample(&coll, 30, seed.wrapping_add(k as u64), 3)?;
        worst = worst.max(observed);
    }
    report.record("contractive", worst, 1.0 + 1e-9, worst <= 1.0 + 1e-9);
    Ok(report)
}
