//! The four subcommands and their exit-code contract.
//!
//! Exit codes: 0 success (plan: solver optimal), 1 failed gradient audit,
//! 2 solver non-convergence (artifacts still written), 3 configuration
//! error (bad files, missing radius model, degenerate grids).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sweptplan_core::certify::PlanningMode;
use sweptplan_core::nlp::{check_gradients, SolveStatus, SolverOptions};
use sweptplan_core::sdcalc::signed_distance;
use sweptplan_core::sweptfit::{
    fit_radius_model, generate_samples, holdout_check, FitReport, HoldoutReport, RadiusModel,
};
use sweptplan_core::transcribe::{audit_trajectory, build_ocp, solve_scenario, Scenario};
use sweptplan_core::{ConvexShape, PlacedShape, Pose2};

use crate::artifact::{self, RunRecord};
use crate::fitcfg::{FitConfig, FitSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT_FAIL: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Fine poses per interval for audits and the swept outline.
const AUDIT_SUBSTEPS: usize = 100;

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Scenario JSON file; repeat to solve a batch in parallel.
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Override the scenario's planning mode.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PlanningMode>,
    /// Fitted swept-radius model JSON; required for continuous mode.
    #[arg(long = "radius-model")]
    pub radius_model: Option<PathBuf>,
    /// Output directory; batch runs write one subdirectory per scenario.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitSweptArgs {
    /// Fit configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured polynomial degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Output path for the fitted model JSON; the fit report lands next to
    /// it with a `_report.json` suffix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SdArgs {
    /// First shape: inline JSON or a path to a shape JSON file.
    #[arg(long = "shape-a")]
    pub shape_a: String,
    /// Second shape: inline JSON or a path.
    #[arg(long = "shape-b")]
    pub shape_b: String,
    /// Pose of the first shape as "x,y,psi".
    #[arg(long = "pose-a", default_value = "0,0,0")]
    pub pose_a: String,
    /// Pose of the second shape as "x,y,psi".
    #[arg(long = "pose-b", default_value = "0,0,0")]
    pub pose_b: String,
}

#[derive(Args, Debug)]
pub struct CheckGradArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's planning mode.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PlanningMode>,
    /// Fitted swept-radius model JSON; required for continuous mode.
    #[arg(long = "radius-model")]
    pub radius_model: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<PlanningMode, String> {
    match s {
        "discrete" => Ok(PlanningMode::Discrete),
        "continuous" => Ok(PlanningMode::Continuous),
        other => Err(format!("unknown mode {other:?} (discrete|continuous)")),
    }
}

fn mode_name(mode: PlanningMode) -> &'static str {
    match mode {
        PlanningMode::Discrete => "discrete",
        PlanningMode::Continuous => "continuous",
    }
}

struct LoadedScenario {
    scenario: Scenario,
    raw: Vec<u8>,
    out_dir: PathBuf,
}

fn load_scenario(path: &Path, mode: Option<PlanningMode>) -> Result<(Scenario, Vec<u8>), String> {
    let raw = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = std::str::from_utf8(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut scenario = Scenario::from_json(text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(m) = mode {
        scenario.mode = m;
    }
    Ok((scenario, raw))
}

fn load_radius_model(path: &Path) -> Result<(RadiusModel, Vec<u8>), String> {
    let raw = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let model: RadiusModel =
        serde_json::from_slice(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    model
        .validate()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((model, raw))
}

/// Thread pool for batch runs, capped by SWEPTPLAN_THREADS when set.
fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("SWEPTPLAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool construction")
}

pub fn cmd_plan(args: &PlanArgs) -> i32 {
    let opts = SolverOptions::default();
    let (model, model_raw) = match &args.radius_model {
        Some(path) => match load_radius_model(path) {
            Ok((m, raw)) => (Some(m), raw),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        None => (None, Vec::new()),
    };

    let batch = args.scenarios.len() > 1;
    let mut loaded = Vec::with_capacity(args.scenarios.len());
    for path in &args.scenarios {
        let (scenario, raw) = match load_scenario(path, args.mode) {
            Ok(pair) => pair,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        if scenario.mode == PlanningMode::Continuous && model.is_none() {
            eprintln!(
                "error: {}: continuous mode needs --radius-model",
                path.display()
            );
            return EXIT_CONFIG;
        }
        let out_dir = if batch {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| scenario.name.clone());
            args.out.join(stem)
        } else {
            args.out.clone()
        };
        loaded.push(LoadedScenario {
            scenario,
            raw,
            out_dir,
        });
    }

    let results: Vec<(String, i32)> = thread_pool().install(|| {
        use rayon::prelude::*;
        loaded
            .par_iter()
            .map(|run| plan_one(run, model.as_ref(), &model_raw, args, &opts))
            .collect()
    });

    let mut worst = EXIT_OK;
    for (line, code) in results {
        println!("{line}");
        worst = worst.max(code);
    }
    worst
}

fn plan_one(
    run: &LoadedScenario,
    model: Option<&RadiusModel>,
    model_raw: &[u8],
    args: &PlanArgs,
    opts: &SolverOptions,
) -> (String, i32) {
    let scenario = &run.scenario;
    let mode = mode_name(scenario.mode);
    let hash = artifact::content_hash(&run.raw, mode, model_raw);
    let radius_path = args.radius_model.as_ref().map(|p| p.to_string_lossy());
    let t0 = Instant::now();
    let solved = solve_scenario(scenario, model, opts);
    let (_, result) = match solved {
        Ok(pair) => pair,
        Err(e) => return (format!("{} {mode}: error: {e}", scenario.name), EXIT_CONFIG),
    };
    let audit = match audit_trajectory(scenario, &result.trajectory, AUDIT_SUBSTEPS) {
        Ok(a) => a,
        Err(e) => {
            return (
                format!("{} {mode}: audit error: {e}", scenario.name),
                EXIT_CONFIG,
            )
        }
    };
    let elapsed = t0.elapsed().as_secs_f64();
    let record = RunRecord {
        scenario,
        solver_options: opts,
        radius_model: radius_path.as_deref(),
        content_hash: &hash,
        report: &result.report,
        trajectory: &result.trajectory,
        audit: &audit,
    };
    if let Err(e) = artifact::write_run(&run.out_dir, &record, AUDIT_SUBSTEPS) {
        return (
            format!("{} {mode}: write error: {e}", scenario.name),
            EXIT_CONFIG,
        );
    }
    let code = match result.report.status {
        SolveStatus::Optimal => EXIT_OK,
        _ => EXIT_NOT_CONVERGED,
    };
    let line = format!(
        "{} {mode}: {:?} objective {:.6} violation {:.2e} min_audit_sd {} in {elapsed:.2}s -> {}",
        scenario.name,
        result.report.status,
        result.report.objective,
        result.report.max_violation,
        audit
            .min_fine_sd
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        run.out_dir.display(),
    );
    (line, code)
}

#[derive(Serialize)]
struct FitRunReport<'a> {
    n_samples: usize,
    fit: &'a FitReport,
    holdout: Option<&'a HoldoutReport>,
}

pub fn cmd_fit_swept(args: &FitSweptArgs) -> i32 {
    let cfg: FitConfig = match fs::read_to_string(&args.config)
        .map_err(|e| format!("{}: {e}", args.config.display()))
        .and_then(|text| {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.config.display()))
        }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let degree = args.degree.unwrap_or(cfg.degree);
    let sampling = cfg.to_sampling();
    let domain = match sampling.domain() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let t0 = Instant::now();
    let samples = match cfg.source {
        FitSource::Car => generate_samples(&sampling),
        FitSource::SyntheticV2Delta2 => cfg.synthetic_samples(),
    };
    let samples = match samples {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (model, fit_report) = match fit_radius_model(&samples, degree, domain) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let holdout = match (&cfg.source, &cfg.holdout) {
        (FitSource::Car, Some(h)) => match holdout_check(&model, &sampling, h.n, h.seed, h.tol) {
            Ok(r) => Some(r),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        _ => None,
    };
    let elapsed = t0.elapsed().as_secs_f64();

    let mut model_json = serde_json::to_string_pretty(&model).expect("model serializes");
    model_json.push('\n');
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(e) = fs::create_dir_all(parent) {
            eprintln!("error: {}: {e}", parent.display());
            return EXIT_CONFIG;
        }
    }
    if let Err(e) = fs::write(&args.out, model_json) {
        eprintln!("error: {}: {e}", args.out.display());
        return EXIT_CONFIG;
    }
    let report_path = report_path_for(&args.out);
    let run_report = FitRunReport {
        n_samples: samples.len(),
        fit: &fit_report,
        holdout: holdout.as_ref(),
    };
    let mut report_json = serde_json::to_string_pretty(&run_report).expect("fit report serializes");
    report_json.push('\n');
    if let Err(e) = fs::write(&report_path, report_json) {
        eprintln!("error: {}: {e}", report_path.display());
        return EXIT_CONFIG;
    }

    print!(
        "fit degree {} on {} samples in {elapsed:.2}s: residual {:.3e}, one-sided violation {:.3e}",
        fit_report.degree,
        samples.len(),
        fit_report.objective_residual,
        fit_report.max_one_sided_violation,
    );
    if let Some(h) = &holdout {
        print!(
            ", holdout {}/{} violations (max shortfall {:.3e}), containment {}",
            h.n_violations, h.n, h.max_shortfall, h.containment_ok
        );
    }
    println!(" -> {}", args.out.display());
    EXIT_OK
}

/// `model.json` -> `model_report.json`, keeping the directory.
fn report_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}_report.json"))
}

fn parse_shape_arg(arg: &str) -> Result<ConvexShape, String> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?
    };
    let shape: ConvexShape = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    shape.validate().map_err(|e| e.to_string())?;
    Ok(shape)
}

fn parse_pose_arg(arg: &str) -> Result<Pose2, String> {
    let parts: Vec<&str> = arg.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("pose {arg:?} is not \"x,y,psi\""));
    }
    let mut vals = [0.0f64; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("pose {arg:?}: {e}"))?;
    }
    Ok(Pose2::new(vals[0], vals[1], vals[2]))
}

pub fn cmd_sd(args: &SdArgs) -> i32 {
    let parsed = parse_shape_arg(&args.shape_a)
        .and_then(|a| parse_shape_arg(&args.shape_b).map(|b| (a, b)))
        .and_then(|(a, b)| {
            let pa = parse_pose_arg(&args.pose_a)?;
            let pb = parse_pose_arg(&args.pose_b)?;
            Ok((a, b, pa, pb))
        });
    let (shape_a, shape_b, pose_a, pose_b) = match parsed {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let placed_a = PlacedShape::new(shape_a, pose_a);
    let placed_b = PlacedShape::new(shape_b, pose_b);
    match signed_distance(&placed_a, &placed_b) {
        Ok(result) => {
            println!("sd={:.6}", result.sd);
            println!(
                "witness={:.6},{:.6}",
                result.direction.x, result.direction.y
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn cmd_check_grad(args: &CheckGradArgs) -> i32 {
    let (scenario, _) = match load_scenario(&args.scenario, args.mode) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let model = match (&scenario.mode, &args.radius_model) {
        (PlanningMode::Continuous, Some(path)) => match load_radius_model(path) {
            Ok((m, _)) => Some(m),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        (PlanningMode::Continuous, None) => {
            eprintln!("error: continuous mode needs --radius-model");
            return EXIT_CONFIG;
        }
        (PlanningMode::Discrete, _) => None,
    };
    let ocp = match build_ocp(&scenario, model.as_ref()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let z0 = ocp.initial_guess();
    #[allow(unused_mut)]
    let mut problem = ocp.problem;
    #[cfg(feature = "fault-injection")]
    inject_jacobian_fault(&mut problem);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut points = vec![z0.clone()];
    for _ in 0..5 {
        let z: Vec<f64> = z0
            .iter()
            .map(|&v| v + rng.gen_range(-1e-3..=1e-3))
            .collect();
        points.push(z);
    }

    let mut worst_rel = 0.0f64;
    let mut worst_where = (String::from("objective"), 0usize, 0usize, 0usize);
    for (i, z) in points.iter().enumerate() {
        let audits = match check_gradients(&problem, z, 1e-6) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        for audit in audits {
            if audit.worst_rel > worst_rel {
                worst_rel = audit.worst_rel;
                worst_where = (audit.block.clone(), audit.row, audit.col, i);
            }
        }
    }
    let (block, row, col, point) = worst_where;
    println!(
        "worst relative gradient error {worst_rel:.3e} (block {block}, row {row}, col {col}, point {point})"
    );
    if worst_rel <= 1e-5 {
        EXIT_OK
    } else {
        eprintln!("gradient audit failed: block {block} exceeds 1e-5");
        EXIT_AUDIT_FAIL
    }
}

#[cfg(feature = "fault-injection")]
fn inject_jacobian_fault(problem: &mut sweptplan_core::NlpProblem) {
    if let Some(block) = problem.ineq_blocks.first_mut() {
        let inner = std::mem::replace(
            &mut block.eval,
            Box::new(|_: &[f64]| (Vec::new(), Vec::new())),
        );
        block.eval = Box::new(move |v: &[f64]| {
            let (vals, mut jac) = inner(v);
            if let Some(entry) = jac.first_mut().and_then(|row| row.first_mut()) {
                *entry += 1e-3;
            }
            (vals, jac)
        });
    }
}
