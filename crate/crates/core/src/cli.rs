//! Batch orchestration behind the `glc` binary.
//!
//! The `run_*` functions are usable without the binary; `main_with_args`
//! adds argument parsing, report files and exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{PerturbationKind, RunConfig};
use crate::diagnostics::{norms, scaling_fit, steady_residual, ScalingFit};
use crate::error::{GlcError, Result};
use crate::field::ComplexField;
use crate::grid::{CurrentProfile, Grid};
use crate::leading_order::leading_order;
use crate::oracles::catalogue;
use crate::report::{
    sweep_csv, AssertionOutcome, EvolutionSummary, FieldNorms, RunReport, SteadySummary, SweepRow,
};
use crate::stability::{spectrum, LinearizedOperator, SpectrumReport, Verdict};
use crate::steady::{solve_steady, SteadyStateSolution};
use crate::tdgl::{decay_rate, evolve, l2_distance, phase_distance, Stepper, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_PHYSICAL: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;
pub const EXIT_CONFIG: i32 = 64;

/// Exit code for a failed run.
pub fn exit_code_for(err: &GlcError) -> i32 {
    match err {
        GlcError::Config { .. } => EXIT_CONFIG,
        e if e.is_physical() => EXIT_PHYSICAL,
        _ => EXIT_INTERNAL,
    }
}

const EXIT_HELP: &str = "\
Exit codes:
  0   success (converged; stable verdict; all sweep assertions passed)
  1   internal error (solver breakdown, i/o failure, blow-up)
  2   physical outcome: NoContraction, SupercriticalCurrent, CorrectorDiverged or DeltaAboveGuard
  3   unstable or marginal verdict, failed sweep slope assertion, or decay-rate mismatch
  64  configuration or usage error; the message names the offending key";

#[derive(Debug, Parser)]
#[command(name = "glc", version, about = "Reduced Ginzburg-Landau steady states, stability spectra and TDGL runs", after_help = EXIT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep worker threads; overrides `solver.threads`.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leading-order state plus Picard correction; writes report.json.
    #[command(after_help = EXIT_HELP)]
    Steady(RunArgs),
    /// Steady solve followed by the linearized spectrum and a verdict.
    #[command(after_help = EXIT_HELP)]
    Stability(RunArgs),
    /// TDGL run from a perturbed steady state; writes trajectory.csv.
    #[command(after_help = EXIT_HELP)]
    Evolve(RunArgs),
    /// One steady solve per sweep value; writes sweep.csv and slope fits.
    #[command(after_help = EXIT_HELP)]
    Sweep(RunArgs),
    /// Prints the catalogue of closed-form and brute-force reference values.
    Oracles {
        #[arg(long)]
        list: bool,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// A converged steady state with everything needed downstream.
#[derive(Debug, Clone)]
pub struct SteadyRun {
    pub grid: Grid,
    pub profile: CurrentProfile,
    pub solution: SteadyStateSolution,
    pub summary: SteadySummary,
}

pub fn run_steady(cfg: &RunConfig) -> Result<SteadyRun> {
    let grid = cfg.build_grid()?;
    let profile = cfg.build_profile(&grid)?;
    let (eps, sigma) = (cfg.params.epsilon, cfg.params.sigma);
    let bg = leading_order(&grid, &profile, eps, sigma, &cfg.leading_order_options())?;
    let solution = solve_steady(&grid, &profile, &bg, &cfg.steady_options())?;
    let summary = summarize(&grid, &profile, &solution)?;
    Ok(SteadyRun {
        grid,
        profile,
        solution,
        summary,
    })
}

pub fn summarize(
    grid: &Grid,
    profile: &CurrentProfile,
    s: &SteadyStateSolution,
) -> Result<SteadySummary> {
    let bg = &s.background;
    let lo = steady_residual(
        &bg.rho0,
        &bg.chi0(),
        &bg.phi0(),
        bg.epsilon,
        bg.sigma,
        grid,
        profile,
    )?;
    Ok(SteadySummary {
        delta: bg.delta,
        norm_j: bg.norm_j,
        corrector_iterations: bg.iterations,
        corrector_residual: bg.corrector_residual,
        one_minus_rho0_inf: bg
            .rho0
            .values
            .iter()
            .map(|r| (1.0 - r).abs())
            .fold(0.0, f64::max),
        lo_density_residual: lo.density,
        picard_iterations: s.iterations,
        linear_iterations: s.linear_iterations,
        increments: s.increments.clone(),
        contraction_ratios: s.contraction_ratios.clone(),
        h_norm_final: s.h_norm_final,
        norms: FieldNorms {
            rho_s: norms(&s.rho_s),
            chi_s: norms(&s.chi_s),
            phi_s: norms(&s.phi_s),
            rho_s_minus_rho0: norms(&s.rho_s.sub(&bg.rho0)?),
        },
        residuals: s.steady_residuals,
    })
}

pub fn run_spectrum(cfg: &RunConfig, run: &SteadyRun) -> Result<SpectrumReport> {
    let mut op = LinearizedOperator::from_steady(&run.solution, cfg.inner_settings())?;
    spectrum(
        &mut op,
        cfg.output.eigenpairs,
        cfg.solver.spectrum_mode,
        &cfg.spectrum_options(),
    )
}

/// Initial data for `glc evolve`: the steady state plus the configured perturbation.
pub fn perturbed_start(cfg: &RunConfig, reference: &ComplexField) -> ComplexField {
    let e = &cfg.evolve;
    match e.kind {
        PerturbationKind::Phase => reference.scale(Complex64::from_polar(1.0, e.perturbation)),
        PerturbationKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
            let noise: Vec<Complex64> = (0..reference.values.len())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let size = (noise.iter().map(|v| v.norm_sqr()).sum::<f64>()
                * reference.mesh.cell_area())
            .sqrt();
            let scale = if size > 0.0 {
                e.perturbation / size
            } else {
                0.0
            };
            let values = reference
                .values
                .iter()
                .zip(&noise)
                .map(|(u, n)| u + n * scale)
                .collect();
            ComplexField {
                mesh: reference.mesh,
                values,
            }
        }
    }
}

/// Evolves the perturbed steady state and, when `spectral_rate` is given,
/// compares the fitted decay of the phase-modded distance with it.
pub fn run_evolution(
    cfg: &RunConfig,
    run: &SteadyRun,
    spectral_rate: Option<f64>,
) -> Result<(Trajectory, EvolutionSummary)> {
    let s = &run.solution;
    let reference = ComplexField::join(&s.rho_s, &s.chi_s)?;
    let u0 = perturbed_start(cfg, &reference);
    let dt = cfg.dt();
    let stepper = Stepper::new(
        &run.grid,
        &run.profile,
        cfg.params.epsilon,
        cfg.params.sigma,
        dt,
        cfg.solver.dt_guard,
        cfg.inner_settings(),
    )?;
    let every = ((cfg.evolve.sample_interval / dt).round() as usize).max(1);
    let (traj, last) = evolve(
        &stepper,
        u0.clone(),
        cfg.solver.t_final,
        every,
        Some(&reference),
    )?;
    if let Some(t) = traj.blow_up {
        return Err(GlcError::BlowUp { time: t });
    }
    let w = cfg.evolve.fit_window;
    let decay = match spectral_rate {
        Some(_) => Some(decay_rate(&traj, (w[0], w[1]))?),
        None => None,
    };
    let mismatch = decay
        .zip(spectral_rate)
        .map(|(d, l)| (d - l).abs() / l.abs());
    let summary = EvolutionSummary {
        dt,
        t_final: last.t,
        steps: last.step_count,
        initial_distance: l2_distance(&u0, &reference),
        final_phase_distance: phase_distance(&last.u, &reference),
        drift_from_start: l2_distance(&last.u, &u0),
        max_gauge_defect: traj.max_gauge_defect,
        decay_rate: decay,
        spectral_rate,
        relative_mismatch: mismatch,
    };
    Ok((traj, summary))
}

/// Columns fitted against the sweep variable whenever three positive samples exist.
const FITTED: [&str; 7] = [
    "one_minus_rho0_inf",
    "rho_s_minus_rho0_inf",
    "rho_s_minus_rho0_l2",
    "rho_s_minus_rho0_w22",
    "lo_density_residual",
    "first_ratio",
    "max_ratio",
];

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fits: BTreeMap<String, ScalingFit>,
    pub assertions: Vec<AssertionOutcome>,
}

fn sweep_point(cfg: &RunConfig, index: usize, value: f64) -> SweepRow {
    let sw = cfg.sweep.as_ref().expect("caller checked the sweep block");
    let point = cfg.at_sweep_point(sw.axis, value);
    let mut row = SweepRow {
        index,
        axis: sw.axis.name().into(),
        value,
        epsilon: point.params.epsilon,
        sigma: point.params.sigma,
        delta: f64::NAN,
        norm_j: f64::NAN,
        status: "ok".into(),
        message: None,
        steady: None,
    };
    let profile = point.build_grid().and_then(|g| point.build_profile(&g));
    if let Ok(p) = &profile {
        row.norm_j = p.norm_j;
        row.delta = point.params.epsilon * p.norm_j;
    }
    match profile.and_then(|_| run_steady(&point)) {
        Ok(run) => row.steady = Some(run.summary),
        Err(e) => {
            row.status = e.tag().into();
            row.message = Some(e.to_string());
        }
    }
    row
}

pub fn run_sweep(cfg: &RunConfig, threads: usize) -> Result<SweepOutcome> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| GlcError::Config {
        key: "sweep".into(),
        message: "the sweep command needs a [sweep] block".into(),
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| GlcError::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        sw.values
            .par_iter()
            .enumerate()
            .map(|(i, v)| sweep_point(cfg, i, *v))
            .collect()
    });
    rows.sort_by_key(|r| r.index);
    let mut fits = BTreeMap::new();
    let wanted = FITTED
        .iter()
        .map(|s| s.to_string())
        .chain(sw.assert.iter().map(|a| a.quantity.clone()));
    for q in wanted {
        let samples: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.quantity(&q).map(|y| (r.value, y)))
            .filter(|(_, y)| *y > 0.0)
            .collect();
        if samples.len() >= 3 {
            if let Ok(fit) = scaling_fit(sw.axis.name(), &samples) {
                fits.insert(q, fit);
            }
        }
    }
    let assertions = sw
        .assert
        .iter()
        .map(|a| {
            let slope = fits.get(&a.quantity).map(|f| f.slope);
            AssertionOutcome {
                quantity: a.quantity.clone(),
                min: a.min,
                max: a.max,
                slope,
                passed: slope.is_some_and(|s| s >= a.min && s <= a.max),
            }
        })
        .collect();
    Ok(SweepOutcome {
        rows,
        fits,
        assertions,
    })
}

fn record_error(report: &mut RunReport, err: &GlcError) -> i32 {
    report.status = err.tag().into();
    report.message = Some(err.to_string());
    report.exit_code = exit_code_for(err);
    report.exit_code
}

fn dump_fields(dir: &Path, run: &SteadyRun) -> Result<()> {
    let s = &run.solution;
    for (name, f) in [
        ("rho_s", &s.rho_s),
        ("chi_s", &s.chi_s),
        ("phi_s", &s.phi_s),
        ("rho0", &s.background.rho0),
    ] {
        std::fs::write(dir.join(format!("{name}.csv")), f.to_csv())?;
    }
    Ok(())
}

fn cmd_steady(cfg: &RunConfig, dir: &Path, report: &mut RunReport) -> Result<i32> {
    match run_steady(cfg) {
        Ok(run) => {
            if cfg.output.dump_fields {
                dump_fields(dir, &run)?;
            }
            report.steady = Some(run.summary);
            Ok(EXIT_OK)
        }
        Err(e) => Ok(record_error(report, &e)),
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Stable => EXIT_OK,
        Verdict::Unstable | Verdict::Marginal => EXIT_REJECTED,
    }
}

fn cmd_stability(cfg: &RunConfig, dir: &Path, report: &mut RunReport) -> Result<i32> {
    let run = match run_steady(cfg) {
        Ok(r) => r,
        Err(e) => return Ok(record_error(report, &e)),
    };
    if cfg.output.dump_fields {
        dump_fields(dir, &run)?;
    }
    report.steady = Some(run.summary.clone());
    match run_spectrum(cfg, &run) {
        Ok(sp) => {
            let code = verdict_code(sp.verdict);
            report.verdict = Some(sp.verdict);
            report.spectrum = Some(sp);
            report.exit_code = code;
            Ok(code)
        }
        Err(e) => Ok(record_error(report, &e)),
    }
}

fn cmd_evolve(cfg: &RunConfig, dir: &Path, report: &mut RunReport) -> Result<i32> {
    let run = match run_steady(cfg) {
        Ok(r) => r,
        Err(e) => return Ok(record_error(report, &e)),
    };
    report.steady = Some(run.summary.clone());
    let spectral = if cfg.evolve.compare_spectrum {
        match run_spectrum(cfg, &run) {
            Ok(sp) => {
                let rate = sp.min_re_nongauge;
                report.verdict = Some(sp.verdict);
                report.spectrum = Some(sp);
                Some(rate)
            }
            Err(e) => return Ok(record_error(report, &e)),
        }
    } else {
        None
    };
    match run_evolution(cfg, &run, spectral) {
        Ok((traj, summary)) => {
            std::fs::write(dir.join("trajectory.csv"), traj.to_csv())?;
            let rejected = matches!((cfg.evolve.rate_tolerance, summary.relative_mismatch), (Some(tol), Some(m)) if m > tol);
            report.evolution = Some(summary);
            report.exit_code = if rejected { EXIT_REJECTED } else { EXIT_OK };
            Ok(report.exit_code)
        }
        Err(e) => Ok(record_error(report, &e)),
    }
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path, threads: usize, report: &mut RunReport) -> Result<i32> {
    let out = run_sweep(cfg, threads)?;
    std::fs::write(dir.join("sweep.csv"), sweep_csv(&out.rows))?;
    let internal = out
        .rows
        .iter()
        .any(|r| r.steady.is_none() && !physical_tag(&r.status));
    let code = if internal {
        EXIT_INTERNAL
    } else if out.assertions.iter().all(|a| a.passed) {
        EXIT_OK
    } else {
        EXIT_REJECTED
    };
    report.sweep = out.rows;
    report.fits = out.fits;
    report.assertions = out.assertions;
    report.exit_code = code;
    if code != EXIT_OK {
        report.status = if internal {
            "PointFailed"
        } else {
            "AssertionFailed"
        }
        .into();
    }
    Ok(code)
}

fn physical_tag(tag: &str) -> bool {
    matches!(
        tag,
        "SupercriticalCurrent" | "NoContraction" | "CorrectorDiverged" | "DeltaAboveGuard"
    )
}

fn print_oracles(json: bool) -> i32 {
    let cases = catalogue();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&cases).expect("plain data")
        );
    } else {
        for c in &cases {
            println!(
                "{:<28} expected {:<14.8e} tol {:<8.1e} inputs: {}",
                c.name, c.expected, c.tolerance, c.inputs
            );
            println!("{:<28} {}", "", c.derivation);
        }
    }
    EXIT_OK
}

/// Runs one command and writes report.json into the output directory.
pub fn execute(name: &str, args: &RunArgs) -> i32 {
    let cfg = match RunConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("glc: {e}");
            return exit_code_for(&e);
        }
    };
    let threads = args.threads.unwrap_or(cfg.solver.threads);
    if threads == 0 {
        eprintln!("glc: config error at `--threads`: must be at least 1");
        return EXIT_CONFIG;
    }
    if name == "sweep" && cfg.sweep.is_none() {
        eprintln!("glc: config error at `sweep`: the sweep command needs a [sweep] block");
        return EXIT_CONFIG;
    }
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("glc: cannot create {}: {e}", dir.display());
        return EXIT_INTERNAL;
    }
    let mut report = RunReport::new(name, &cfg);
    let outcome = match name {
        "steady" => cmd_steady(&cfg, &dir, &mut report),
        "stability" => cmd_stability(&cfg, &dir, &mut report),
        "evolve" => cmd_evolve(&cfg, &dir, &mut report),
        "sweep" => cmd_sweep(&cfg, &dir, threads, &mut report),
        other => unreachable!("unknown command {other}"),
    };
    let code = match outcome {
        Ok(c) => c,
        Err(e) => record_error(&mut report, &e),
    };
    report.exit_code = code;
    if let Err(e) = std::fs::write(dir.join("report.json"), report.to_json()) {
        eprintln!("glc: cannot write report: {e}");
        return EXIT_INTERNAL;
    }
    if let Some(m) = &report.message {
        eprintln!("glc: {}: {m}", report.status);
    }
    code
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Steady(a) => execute("steady", a),
        Command::Stability(a) => execute("stability", a),
        Command::Evolve(a) => execute("evolve", a),
        Command::Sweep(a) => execute("sweep", a),
        Command::Oracles { json, .. } => print_oracles(*json),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(
            exit_code_for(&GlcError::NoContraction {
                iteration: 3,
                ratio: 1.2
            }),
            EXIT_PHYSICAL
        );
        assert_eq!(
            exit_code_for(&GlcError::SupercriticalCurrent {
                cell: 0,
                max_value: 1.5
            }),
            EXIT_PHYSICAL
        );
        assert_eq!(
            exit_code_for(&GlcError::Config {
                key: "a".into(),
                message: "b".into()
            }),
            EXIT_CONFIG
        );
        assert_eq!(exit_code_for(&GlcError::GridMismatch), EXIT_INTERNAL);
    }

    #[test]
    fn physical_tags_match_error_classes() {
        let errs = [
            GlcError::NoContraction {
                iteration: 1,
                ratio: 1.0,
            },
            GlcError::SupercriticalCurrent {
                cell: 0,
                max_value: 1.0,
            },
            GlcError::CorrectorDiverged {
                iterations: 1,
                residual: 1.0,
            },
            GlcError::DeltaAboveGuard {
                delta: 1.0,
                guard: 0.5,
            },
            GlcError::BlowUp { time: 1.0 },
        ];
        for e in errs {
            assert_eq!(physical_tag(e.tag()), e.is_physical());
        }
    }

    #[test]
    fn phase_start_is_a_pure_rotation() {
        let mut cfg = RunConfig::default();
        cfg.evolve.kind = PerturbationKind::Phase;
        cfg.evolve.perturbation = 0.3;
        let m = crate::grid::Mesh::new(4, 4, 1.0, 1.0).unwrap();
        let u = ComplexField {
            mesh: m,
            values: vec![Complex64::new(0.8, 0.1); 16],
        };
        let v = perturbed_start(&cfg, &u);
        assert!(phase_distance(&v, &u) < 1e-14);
        cfg.evolve.kind = PerturbationKind::Random;
        cfg.evolve.perturbation = 1e-3;
        assert!((l2_distance(&perturbed_start(&cfg, &u), &u) - 1e-3).abs() < 1e-15);
    }
}
