//! varexp-pde: inequality checks, elliptic energy solves and the implicit
//! Euler fast-diffusion scheme for variable-exponent problems on 1D grids.
//!
//! Exit codes: 0 all requested checks hold, 1 a check failed, 2 solver
//! failure, 3 configuration error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{
    build_elliptic, build_fde, load, Check, ConfigError, DiazSaaConfig, EllipticConfig,
    FdeFileConfig, KernelProbeConfig, NormsConfig, PiconeConfig,
};
use output::OutDir;
use varexp_core::elliptic::{minimize, negative_energy_init};
use varexp_core::fde::{comparison_check, contraction_check, run_fde, ComparisonReport, FdeError};
use varexp_core::opkernel::{
    convexity_probe, euler_identity_probe, grad_consistency, homogeneity_probe, symmetry_probe,
};
use varexp_core::picone::{diaz_saa_integral, picone_gap, GapTol};
use varexp_core::synth::Synth;
use varexp_core::vxspace::{check_norm_modular_bounds, luxemburg_norm, modular, LUXEMBURG_TOL};

#[derive(Parser)]
#[command(name = "varexp-pde", version, about = "Variable-exponent inequality checks and solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-cell gaps of the generalized Picone inequality.
    CheckPicone {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sign of the symmetrized integral inequality.
    CheckDiazSaa {
        #[arg(long)]
        config: PathBuf,
    },
    /// Luxemburg self-consistency and norm-modular chains on random fields.
    CheckNorms {
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimize one elliptic family and persist solution plus report.
    SolveElliptic {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the implicit Euler fast-diffusion scheme.
    SolveFde {
        #[arg(long)]
        config: PathBuf,
    },
    /// L2 contraction of two fast-diffusion runs against data and forcing.
    VerifyContraction {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
    },
    /// Structural probes of an operator kernel.
    ProbeKernel {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Solver(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Solver(_) => 2,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::CheckPicone { config } => check_picone(config),
        Command::CheckDiazSaa { config } => check_diaz_saa(config),
        Command::CheckNorms { config } => check_norms(config),
        Command::SolveElliptic { config } => solve_elliptic(config),
        Command::SolveFde { config } => solve_fde(config),
        Command::VerifyContraction { config_a, config_b } => {
            verify_contraction(config_a, config_b)
        }
        Command::ProbeKernel { config } => probe_kernel(config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(failure) => {
            eprintln!("{}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn out_dir(dir: &Option<String>) -> Result<OutDir, Failure> {
    Ok(OutDir::create(dir.as_deref().unwrap_or("out"))?)
}

fn check_picone(path: &Path) -> Result<bool, Failure> {
    let cfg: PiconeConfig = load(path)?;
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));
    let kernel = p.as_ref().and_then(|p| check.kernel(&cfg.kernel, p));
    let v = grid.and_then(|g| check.node_field("v", &cfg.v, g));
    let v0 = grid.and_then(|g| check.node_field("v0", &cfg.v0, g));
    check.finish()?;
    let (kernel, v, v0) = (kernel.unwrap(), v.unwrap(), v0.unwrap());

    let tol = GapTol {
        rel_floor: cfg.rel_floor,
        h2_coeff: cfg.h2_coeff,
    };
    let report = picone_gap(&kernel, &v, &v0, cfg.r, cfg.floor, tol)
        .map_err(|e| Failure::Config(e.to_string()))?;

    let out = out_dir(&cfg.output_dir)?;
    out.write_json("picone_report.json", &report)?;
    let gaps = varexp_core::grid::CellField::new(v.grid(), report.gaps.clone())
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    out.write_cell_csv("gaps.csv", "x,gap", &gaps)?;
    out.write_manifest("check-picone", &[path])?;
    println!(
        "check-picone: min gap {:.6e}, {} violating cells",
        report.min_gap,
        report.violating_cells.len()
    );
    Ok(report.verified())
}

#[derive(Serialize)]
struct DiazSaaReport {
    name: &'static str,
    integral: f64,
    tol: f64,
    holds: bool,
}

fn check_diaz_saa(path: &Path) -> Result<bool, Failure> {
    let cfg: DiazSaaConfig = load(path)?;
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));
    let kernel = p.as_ref().and_then(|p| check.kernel(&cfg.kernel, p));
    let w1 = grid.and_then(|g| check.dirichlet_field("w1", &cfg.w1, g));
    let w2 = grid.and_then(|g| check.dirichlet_field("w2", &cfg.w2, g));
    check.finish()?;
    let (kernel, w1, w2) = (kernel.unwrap(), w1.unwrap(), w2.unwrap());

    let integral = diaz_saa_integral(&kernel, &w1, &w2, cfg.r, cfg.floor)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let tol = 1e-9 * (1.0 + integral.abs());
    let report = DiazSaaReport {
        name: "diaz_saa",
        integral,
        tol,
        holds: integral >= -tol,
    };
    let out = out_dir(&cfg.output_dir)?;
    out.write_json("diaz_saa_report.json", &report)?;
    out.write_manifest("check-diaz-saa", &[path])?;
    println!("check-diaz-saa: integral {integral:.6e}");
    Ok(report.holds)
}

#[derive(Serialize)]
struct NormsReport {
    trials: usize,
    seed: u64,
    max_self_consistency_residual: f64,
    all_chains_hold: bool,
    holds: bool,
    fixed: Option<varexp_core::vxspace::NormModularReport>,
    sweep: Vec<varexp_core::vxspace::NormModularReport>,
}

fn check_norms(path: &Path) -> Result<bool, Failure> {
    let cfg: NormsConfig = load(path)?;
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));
    let fixed_u = match (&cfg.u, grid) {
        (Some(src), Some(g)) => check.cell_field("u", src, g),
        _ => None,
    };
    if !(cfg.amp_lo > 0.0 && cfg.amp_hi > cfg.amp_lo) {
        check.fail("need 0 < amp_lo < amp_hi");
    }
    check.finish()?;
    let (grid, p) = (grid.unwrap(), p.unwrap());

    let mut synth = Synth::new(cfg.seed);
    let mut sweep = Vec::with_capacity(cfg.trials);
    let mut max_residual: f64 = 0.0;
    let mut all_chains_hold = true;
    for _ in 0..cfg.trials {
        let amp = 10f64.powf(synth.uniform(cfg.amp_lo.log10(), cfg.amp_hi.log10()));
        let u = synth.cell_field(grid, 0.1 * amp, amp);
        let report =
            check_norm_modular_bounds(&u, &p).map_err(|e| Failure::Runtime(e.to_string()))?;
        all_chains_hold &= report.holds;
        if report.norm > 0.0 {
            let scaled = u.map(|v| v / report.norm);
            let rho = modular(&scaled, &p).map_err(|e| Failure::Runtime(e.to_string()))?;
            max_residual = max_residual.max((rho - 1.0).abs());
        }
        sweep.push(report);
    }
    let fixed = match fixed_u {
        Some(u) => {
            let report =
                check_norm_modular_bounds(&u, &p).map_err(|e| Failure::Runtime(e.to_string()))?;
            let norm = luxemburg_norm(&u, &p, LUXEMBURG_TOL)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            all_chains_hold &= report.holds;
            if norm > 0.0 {
                let scaled = u.map(|v| v / norm);
                let rho = modular(&scaled, &p).map_err(|e| Failure::Runtime(e.to_string()))?;
                max_residual = max_residual.max((rho - 1.0).abs());
            }
            Some(report)
        }
        None => None,
    };
    let report = NormsReport {
        trials: cfg.trials,
        seed: cfg.seed,
        max_self_consistency_residual: max_residual,
        all_chains_hold,
        holds: all_chains_hold && max_residual <= 1e-10,
        fixed,
        sweep,
    };
    let out = out_dir(&cfg.output_dir)?;
    out.write_json("norms_report.json", &report)?;
    out.write_manifest("check-norms", &[path])?;
    println!(
        "check-norms: {} trials, max self-consistency residual {:.3e}",
        cfg.trials, max_residual
    );
    Ok(report.holds)
}

fn solve_elliptic(path: &Path) -> Result<bool, Failure> {
    let cfg: EllipticConfig = load(path)?;
    let setup = build_elliptic(&cfg)?;
    let init = match setup.init {
        Some(init) => init,
        None => negative_energy_init(&setup.problem, 1.0)
            .map_err(|e| Failure::Solver(e.to_string()))?,
    };
    let report = minimize(&setup.problem, &init, &setup.options)
        .map_err(|e| Failure::Solver(e.to_string()))?;

    let out = out_dir(&cfg.output_dir)?;
    out.write_solution_csv("solution.csv", &report.solution)?;
    out.write_json("solve_report.json", &report)?;
    out.write_manifest("solve-elliptic", &[path])?;
    println!(
        "solve-elliptic ({}): converged {} in {} iterations, residual {:.3e}",
        cfg.family, report.converged, report.iterations, report.residual_sup
    );
    if !report.converged {
        return Err(Failure::Solver(format!(
            "no convergence after {} iterations (residual {:.3e})",
            report.iterations, report.residual_sup
        )));
    }
    Ok(true)
}

#[derive(Serialize)]
struct TrajectoryManifest<'a> {
    q: f64,
    dt: f64,
    n_steps: usize,
    sub_mu: f64,
    sup_k: f64,
    increments_l2: &'a [f64],
    increment_estimate: f64,
    jensen: &'a varexp_core::fde::JensenReport,
    step_reports: &'a [varexp_core::fde::StepSummary],
}

#[derive(Serialize)]
struct FdeVerification {
    bracketing_ok: bool,
    jensen_ok: bool,
    positivity_ok: bool,
    all_steps_converged: bool,
}

fn solve_fde(path: &Path) -> Result<bool, Failure> {
    let cfg: FdeFileConfig = load(path)?;
    let fde_cfg = build_fde(&cfg)?;
    let out = out_dir(&cfg.output_dir)?;

    let traj = match run_fde(&fde_cfg) {
        Ok(t) => t,
        Err(FdeError::Step {
            step,
            reason,
            partial,
        }) => {
            // Persist what exists before reporting the failure.
            for (n, v) in partial.steps.iter().enumerate() {
                out.write_solution_csv(&format!("step_{n:04}.csv"), v)?;
            }
            out.write_manifest("solve-fde", &[path])?;
            return Err(Failure::Solver(format!("step {step} failed: {reason}")));
        }
        Err(FdeError::Config(msg)) => return Err(Failure::Config(msg)),
        Err(FdeError::Bracket(e)) => {
            return Err(Failure::Config(format!("bracket construction failed: {e}")))
        }
        Err(e) => return Err(Failure::Solver(e.to_string())),
    };

    for (n, v) in traj.steps.iter().enumerate() {
        out.write_solution_csv(&format!("step_{n:04}.csv"), v)?;
    }
    out.write_solution_csv("subsolution.csv", &traj.sub)?;
    out.write_solution_csv("supersolution.csv", &traj.sup)?;
    out.write_json(
        "trajectory.json",
        &TrajectoryManifest {
            q: traj.q,
            dt: traj.dt,
            n_steps: traj.n_steps(),
            sub_mu: traj.sub_mu,
            sup_k: traj.sup_k,
            increments_l2: &traj.increments_l2,
            increment_estimate: traj.increment_estimate(),
            jensen: &traj.jensen,
            step_reports: &traj.step_reports,
        },
    )?;

    let bracketing_ok = traj.steps.iter().all(|v| {
        v.values()
            .iter()
            .zip(traj.sub.values())
            .zip(traj.sup.values())
            .all(|((x, lo), hi)| *x >= lo - 1e-10 && *x <= hi + 1e-10)
    });
    let positivity_ok = traj.steps.iter().all(|v| {
        v.values()[1..traj.grid.n_cells()]
            .iter()
            .all(|&s| s > 0.0)
    });
    let verification = FdeVerification {
        bracketing_ok,
        jensen_ok: traj.jensen.holds,
        positivity_ok,
        all_steps_converged: traj.step_reports.iter().all(|r| r.converged),
    };
    out.write_json("verification_report.json", &verification)?;
    out.write_manifest("solve-fde", &[path])?;
    println!(
        "solve-fde: {} steps, bracket [{:.3e}, {:.3e}], jensen holds {}",
        traj.n_steps(),
        traj.sub.max(),
        traj.sup.max(),
        traj.jensen.holds
    );
    Ok(verification.bracketing_ok && verification.jensen_ok && verification.positivity_ok)
}

#[derive(Serialize)]
struct ContractionArtifact {
    ntk: varexp_core::fde::NtkReport,
    comparison: Option<ComparisonReport>,
}

fn verify_contraction(path_a: &Path, path_b: &Path) -> Result<bool, Failure> {
    let cfg_a: FdeFileConfig = load(path_a)?;
    let cfg_b: FdeFileConfig = load(path_b)?;

    let mut mismatches = Vec::new();
    if cfg_a.domain.a != cfg_b.domain.a
        || cfg_a.domain.b != cfg_b.domain.b
        || cfg_a.domain.n_cells != cfg_b.domain.n_cells
    {
        mismatches.push("domains differ".to_string());
    }
    if cfg_a.p != cfg_b.p {
        mismatches.push("exponent expressions differ".to_string());
    }
    if cfg_a.q != cfg_b.q {
        mismatches.push("q differs".to_string());
    }
    if cfg_a.t_final != cfg_b.t_final || cfg_a.n_steps != cfg_b.n_steps {
        mismatches.push("time discretizations differ".to_string());
    }
    let source_kind = |c: &FdeFileConfig| {
        c.source
            .as_ref()
            .map(|s| (s.kind.clone(), s.c.clone(), s.gamma))
    };
    if source_kind(&cfg_a) != source_kind(&cfg_b) {
        mismatches.push("source terms differ".to_string());
    }
    if !mismatches.is_empty() {
        return Err(Failure::Config(format!(
            "configs are incompatible for the contraction check: {}",
            mismatches.join("; ")
        )));
    }

    let fde_a = build_fde(&cfg_a)?;
    let fde_b = build_fde(&cfg_b)?;
    let run = |c| match run_fde(c) {
        Ok(t) => Ok(t),
        Err(FdeError::Config(m)) => Err(Failure::Config(m)),
        Err(e) => Err(Failure::Solver(e.to_string())),
    };
    let traj_a = run(&fde_a)?;
    let traj_b = run(&fde_b)?;

    let ntk = contraction_check(&traj_a, &traj_b).map_err(|e| Failure::Runtime(e.to_string()))?;
    let comparison = comparison_check(&traj_a, &traj_b).ok();

    let out = out_dir(&cfg_a.output_dir)?;
    let holds = ntk.holds;
    out.write_json(
        "ntk_report.json",
        &ContractionArtifact { ntk, comparison },
    )?;
    out.write_manifest("verify-contraction", &[path_a, path_b])?;
    println!("verify-contraction: inequality holds {holds}");
    Ok(holds)
}

fn probe_kernel(path: &Path) -> Result<bool, Failure> {
    let cfg: KernelProbeConfig = load(path)?;
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));
    let kernel = p.as_ref().and_then(|p| check.kernel(&cfg.kernel, p));
    check.finish()?;
    let kernel = kernel.unwrap();

    let reports = vec![
        homogeneity_probe(&kernel, cfg.samples, cfg.seed),
        convexity_probe(&kernel, cfg.samples, cfg.seed.wrapping_add(1)),
        symmetry_probe(&kernel, cfg.samples, cfg.seed.wrapping_add(2)),
        euler_identity_probe(&kernel, cfg.samples, cfg.seed.wrapping_add(3)),
        grad_consistency(&kernel, cfg.samples, cfg.seed.wrapping_add(4)),
    ];
    let all_hold = reports.iter().all(|r| r.holds);
    let out = out_dir(&cfg.output_dir)?;
    out.write_json("probes_report.json", &reports)?;
    out.write_manifest("probe-kernel", &[path])?;
    for r in &reports {
        println!(
            "probe-kernel [{}]: {} (max violation {:.3e})",
            r.probe,
            if r.holds { "ok" } else { "violated" },
            r.max_violation
        );
    }
    Ok(all_hold)
}
