//! Command-line front end.
//!
//! | exit | meaning                                            |
//! |------|----------------------------------------------------|
//! | 0    | attractive / synthesis succeeded / simulation pass |
//! | 1    | input or usage error                               |
//! | 2    | invariant but not attractive / simulation fail     |
//! | 3    | target not invariant                               |
//! | 4    | synthesis infeasible                               |

pub mod demo;
pub mod format;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{is_attractive, is_attractive_subsystem, steady_states, unique_steady_state};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, sort_spectrum};
use crate::model::{DensityOperator, LindbladModel, TargetSpec};
use crate::simulate::{convergence_rate, default_horizon, metrics, time_grid, Propagator, MAX_DIM};
use crate::synthesis::{
    feedback_purestate, feedback_subspace, feedback_subsystem, openloop_stabilize, SynthesisOptions, SynthesisResult,
};

use format::{
    basis_to_json, complex_to_json, digest_bytes, emit_model, matrix_to_json, parse_model_str, parse_target_str,
    InfeasibilityJson, MetricsSummary, ParsedModel, ReportFile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INVARIANT_ONLY: i32 = 2;
pub const EXIT_NOT_INVARIANT: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qstab", version, about = "Analyze, synthesize and verify stabilizing controls for Lindblad dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide invariance and attractivity of the target.
    Analyze(AnalyzeArgs),
    /// Construct feedback and Hamiltonian corrections stabilizing the target.
    Synthesize(SynthesizeArgs),
    /// Propagate random initial states and check convergence to the target.
    Simulate(SimulateArgs),
    /// Run one of the bundled worked examples.
    Demo(DemoArgs),
}

#[derive(Debug, clap::Args)]
pub struct InputArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Target file overriding the model's target (JSON `{kind, payload}`).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Relative numerical tolerance (overrides the model options).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write a JSON report here.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Require invariance for every initial state (also `L_P = 0`).
    #[arg(long)]
    pub strict_initfree: bool,
}

#[derive(Debug, clap::Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub coupling_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the closed-loop model here.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Final time (default: 50 / spectral gap, or 100).
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Number of sample times, including t = 0.
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub ensemble: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pass threshold on the final deficit.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DemoArgs {
    /// example1, example2, example3 or example4.
    pub name: String,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Demo(a) => cmd_demo(&a.name),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

struct Loaded {
    parsed: ParsedModel,
    digest: String,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load(input: &InputArgs) -> Result<Loaded> {
    let model_bytes = read(&input.model)?;
    let text = String::from_utf8(model_bytes.clone()).map_err(|_| Error::Parse("model file is not UTF-8".into()))?;
    let mut parsed = parse_model_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", input.model.display())))?;
    let mut parts = vec![model_bytes];
    if let Some(tp) = &input.target {
        let bytes = read(tp)?;
        let t = String::from_utf8(bytes.clone()).map_err(|_| Error::Parse("target file is not UTF-8".into()))?;
        parsed.target = parse_target_str(&t, parsed.dim()).map_err(|e| Error::Parse(format!("{}: {e}", tp.display())))?;
        parts.push(bytes);
    }
    if let Some(tol) = input.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Domain(format!("--tol must be positive, got {tol}")));
        }
        parsed.options.tol = tol;
    }
    if parsed.dim() > MAX_DIM {
        return Err(Error::Dimension(format!("dimension {} exceeds the supported maximum {MAX_DIM}", parsed.dim())));
    }
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    Ok(Loaded { parsed, digest: digest_bytes(&refs) })
}

fn finish(mut report: ReportFile, code: i32, out: &Option<PathBuf>) -> Result<i32> {
    report.exit_code = code;
    if let Some(path) = out {
        fs::write(path, report.to_json()?)?;
    }
    Ok(code)
}

fn spectrum_json(m: &LindbladModel) -> Result<Vec<[f64; 2]>> {
    let mut ev = eigenvalues(&m.superoperator())?;
    sort_spectrum(&mut ev);
    Ok(ev.into_iter().map(complex_to_json).collect())
}

fn verdict_word(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32> {
    let Loaded { parsed, digest } = load(&a.input)?;
    let tol = parsed.options.tol;
    let model = parsed.dynamics();
    let mut report = ReportFile::new("analyze", digest);
    if parsed.measurement.is_some() {
        report.notes.push("measurement treated as an extra noise channel with rate 1 (no feedback)".into());
    }
    let code;
    match &parsed.target {
        TargetSpec::Subsystem(d) => {
            let sr = is_attractive_subsystem(&model, d, tol)?;
            let f = &sr.factorization;
            report.verdicts.invariant = Some(f.invariant);
            report.residuals.insert("lq".into(), f.lq_residual);
            report.residuals.insert("interplay".into(), f.interplay_residual);
            report.residuals.insert("hamiltonian_split".into(), f.hamiltonian_split_residual);
            report.residuals.insert("threshold".into(), f.threshold);
            for (k, ch) in f.channels.iter().enumerate() {
                report.residuals.insert(format!("channel_{k}_identity_s"), ch.identity_s_residual);
                report.residuals.insert(format!("channel_{k}_identity_f"), ch.identity_f_residual);
                report.residuals.insert(format!("channel_{k}_kronecker"), ch.kronecker_residual);
            }
            if f.invariant {
                report.verdicts.attractive = Some(sr.attractive);
                report.witnesses.h_r_prime = Some(basis_to_json(&sr.subspace.h_r_prime));
                report.witnesses.obstruction = Some(basis_to_json(&sr.subspace.witness));
                report.notes.push(format!(
                    "factor F fixed point unique: {}; factor S fixed point unique: {}",
                    verdict_word(sr.factor_f_unique),
                    verdict_word(sr.factor_s_unique)
                ));
                code = if sr.attractive { EXIT_OK } else { EXIT_INVARIANT_ONLY };
            } else {
                code = EXIT_NOT_INVARIANT;
            }
            println!("subsystem target: invariant = {}", verdict_word(f.invariant));
            if f.invariant {
                println!("attractive = {}", verdict_word(sr.attractive));
            }
        }
        target => {
            let s = target.decomposition().target().clone();
            let inv = crate::analysis::check_invariance_subspace_with(&model, &s, tol, a.strict_initfree)?;
            report.verdicts.invariant = Some(inv.invariant);
            report.residuals.insert("lq".into(), inv.lq_residual);
            report.residuals.insert("interplay".into(), inv.interplay_residual);
            report.residuals.insert("lp".into(), inv.lp_residual);
            report.residuals.insert("threshold".into(), inv.threshold);
            if a.strict_initfree {
                report.notes.push("strict invariance: L_P = 0 required".into());
            }
            println!("{} target of dimension {}: invariant = {}", target.kind(), s.dim(), verdict_word(inv.invariant));
            println!(
                "  L_Q residual {:.3e}, interplay residual {:.3e}, L_P residual {:.3e} (threshold {:.3e})",
                inv.lq_residual, inv.interplay_residual, inv.lp_residual, inv.threshold
            );
            if inv.invariant {
                let ar = is_attractive(&model, &s, tol)?;
                let attractive = ar.is_attractive();
                report.verdicts.attractive = Some(attractive);
                report.verdicts.verdicts_agree = Some(ar.verdicts_agree);
                report.witnesses.h_r_prime = Some(basis_to_json(&ar.h_r_prime));
                report.witnesses.obstruction = Some(basis_to_json(&ar.witness));
                if !ar.lasalle_decay_check {
                    report.notes.push("Lyapunov decay check did not hold on the sampled state".into());
                }
                println!(
                    "  attractive = {} (H_R' dimension {}, invariant witness dimension {})",
                    verdict_word(attractive),
                    ar.h_r_prime.dim(),
                    ar.witness.dim()
                );
                code = if attractive { EXIT_OK } else { EXIT_INVARIANT_ONLY };
            } else {
                code = EXIT_NOT_INVARIANT;
            }
        }
    }
    let unique = unique_steady_state(&model, tol)?;
    report.verdicts.unique_steady_state = Some(unique);
    match steady_states(&model, tol) {
        Ok(ss) => report.operators.steady_state = Some(matrix_to_json(ss.fixed_state.matrix())),
        Err(e) => report.notes.push(format!("steady state not computed: {e}")),
    }
    report.spectrum = Some(spectrum_json(&model)?);
    println!("unique steady state = {}", verdict_word(unique));
    finish(report, code, &a.input.out_report)
}

fn synthesis_options(parsed: &ParsedModel, a: &SynthesizeArgs) -> Result<SynthesisOptions> {
    let coupling_scale = a.coupling_scale.unwrap_or(parsed.options.coupling_scale);
    if !(coupling_scale > 0.0 && coupling_scale.is_finite()) {
        return Err(Error::Domain(format!("coupling scale must be positive, got {coupling_scale}")));
    }
    Ok(SynthesisOptions { tol: parsed.options.tol, coupling_scale, seed: a.seed.unwrap_or(parsed.options.seed) })
}

pub fn synthesize_parsed(parsed: &ParsedModel, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    match &parsed.measurement {
        Some(m) => {
            if !parsed.noise.is_empty() {
                return Err(Error::Invalid(
                    "feedback synthesis takes a measurement and no additional noise channels".into(),
                ));
            }
            let h = &parsed.hamiltonian;
            match &parsed.target {
                TargetSpec::PureState(psi) => feedback_purestate(h, m, psi, opts),
                TargetSpec::Subspace(d) => feedback_subspace(h, m, d, opts),
                TargetSpec::Subsystem(d) => feedback_subsystem(h, m, d, opts),
            }
        }
        None => match &parsed.target {
            TargetSpec::Subsystem(_) => {
                Err(Error::Invalid("open-loop synthesis supports pure-state and subspace targets only".into()))
            }
            t => openloop_stabilize(&parsed.dynamics(), t.decomposition().target(), opts),
        },
    }
}

pub fn closed_loop_model(parsed: &ParsedModel, r: &SynthesisResult, opts: &SynthesisOptions) -> ParsedModel {
    let mut options = parsed.options;
    options.coupling_scale = opts.coupling_scale;
    options.seed = opts.seed;
    ParsedModel {
        hamiltonian: r.closed_loop.hamiltonian.clone(),
        noise: r.closed_loop.noise.clone(),
        measurement: None,
        target: parsed.target.clone(),
        options,
    }
}

pub fn cmd_synthesize(a: &SynthesizeArgs) -> Result<i32> {
    let Loaded { parsed, digest } = load(&a.input)?;
    let opts = synthesis_options(&parsed, a)?;
    let r = synthesize_parsed(&parsed, &opts)?;
    let mut report = ReportFile::new("synthesize", digest);
    report.verdicts.feasible = Some(r.feasible);
    report.iterations = Some(r.iterations);
    report.notes.extend(r.notes.iter().cloned());
    if r.h_r_prime_dim > 0 {
        report.notes.push(format!("H_R' dimension before coupling: {}", r.h_r_prime_dim));
    }
    if let Some(why) = &r.infeasibility {
        report.infeasibility = Some(InfeasibilityJson { code: why.code().to_string(), reason: why.to_string() });
        println!("infeasible: {why}");
        return finish(report, EXIT_INFEASIBLE, &a.input.out_report);
    }
    report.verdicts.attractive = Some(true);
    report.operators.feedback = r.feedback.as_ref().map(matrix_to_json);
    report.operators.h_c = r.h_c.as_ref().map(matrix_to_json);
    report.operators.closed_loop_hamiltonian = Some(matrix_to_json(&r.closed_loop.hamiltonian));
    report.operators.closed_loop_noise = Some(r.closed_loop.scaled_noise().iter().map(matrix_to_json).collect());
    report.spectrum = Some(spectrum_json(&r.closed_loop)?);
    if let Some(f) = &r.feedback {
        println!("F =\n{}", demo::format_matrix(f));
    }
    if let Some(h) = &r.h_c {
        println!("H_c =\n{}", demo::format_matrix(h));
    }
    if r.iterations > 0 {
        println!("open-loop coupling rounds: {}", r.iterations);
    }
    println!("closed loop verified attractive");
    if let Some(path) = &a.out_model {
        fs::write(path, emit_model(&closed_loop_model(&parsed, &r, &opts)))?;
    }
    finish(report, EXIT_OK, &a.input.out_report)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let Loaded { parsed, digest } = load(&a.input)?;
    let tol = parsed.options.tol;
    let model = parsed.dynamics();
    if a.ensemble == 0 {
        return Err(Error::Domain("--ensemble must be at least 1".into()));
    }
    if a.steps == 0 {
        return Err(Error::Domain("--steps must be at least 1".into()));
    }
    if !(a.eps >= 0.0 && a.eps.is_finite()) {
        return Err(Error::Domain(format!("--eps must be non-negative, got {}", a.eps)));
    }
    let t_final = match a.t_final {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::Domain(format!("--T must be non-negative, got {t}"))),
        None => default_horizon(&model, &parsed.target, tol),
    };
    if a.steps == 1 && t_final > 0.0 {
        return Err(Error::Domain("a single step requires --T 0".into()));
    }
    let seed = a.seed.unwrap_or(parsed.options.seed);
    let times = time_grid(t_final, a.steps);
    let p = Propagator::new(&model)?;
    let mut writer = match &a.out_csv {
        Some(path) => Some(csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?),
        None => None,
    };
    if let Some(w) = writer.as_mut() {
        w.write_record(["t", "V", "fidelity", "purity", "trajectory_id"]).map_err(csv_err)?;
    }
    let mut final_v = Vec::with_capacity(a.ensemble);
    let mut final_fidelity = Vec::with_capacity(a.ensemble);
    let mut deficits = Vec::with_capacity(a.ensemble);
    for id in 0..a.ensemble {
        let rho0 = DensityOperator::random(model.dim(), seed.wrapping_add(id as u64))?;
        let rows = metrics(&p.evolve(&rho0, &times)?, &parsed.target)?;
        if let Some(w) = writer.as_mut() {
            for r in &rows {
                w.write_record([
                    format!("{}", r.t),
                    format!("{:e}", r.v),
                    format!("{:e}", r.fidelity),
                    format!("{:e}", r.purity),
                    id.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        let last = rows.last().expect("at least one time");
        final_v.push(last.v);
        final_fidelity.push(last.fidelity);
        deficits.push(last.deficit(&parsed.target));
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    let (worst_trajectory, worst) = deficits
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("ensemble is non-empty");
    let pass = deficits.iter().all(|&d| d <= a.eps);
    let rate = match &parsed.target {
        TargetSpec::Subsystem(_) => None,
        t => convergence_rate(&model, t.decomposition().target(), tol).ok(),
    };
    let mut report = ReportFile::new("simulate", digest);
    report.verdicts.simulation_pass = Some(pass);
    report.metrics = Some(MetricsSummary {
        horizon: t_final,
        steps: a.steps,
        ensemble: a.ensemble,
        eps: a.eps,
        worst_final_deficit: worst,
        worst_trajectory,
        final_v,
        final_fidelity,
        convergence_rate: rate,
    });
    report.notes.push(format!("initial states: seeded random full-rank, seeds {seed}..{}", seed + a.ensemble as u64 - 1));
    println!(
        "T = {t_final}, {} trajectories, worst final deficit {worst:.3e} (trajectory {worst_trajectory}): {}",
        a.ensemble,
        if pass { "pass" } else { "FAIL" }
    );
    finish(report, if pass { EXIT_OK } else { EXIT_INVARIANT_ONLY }, &a.input.out_report)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv output: {e}"))
}

pub fn cmd_demo(name: &str) -> Result<i32> {
    let outcome = demo::run_demo(name)?;
    print!("{}", outcome.render());
    Ok(if outcome.passed() { EXIT_OK } else { EXIT_INVARIANT_ONLY })
}
