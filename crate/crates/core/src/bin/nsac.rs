use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nsac::driver::config::load_config;
use nsac::driver::mms::{mms_convergence, MmsCase, MmsConfig};
use nsac::driver::presets::initial_state;
use nsac::driver::snapshot::{write_snapshot, Snapshot};
use nsac::driver::trace::read_column;
use nsac::driver::{run_simulation, DriverError, RunOptions};
use nsac::energy::{fit_decay_after, DecayModel};
use nsac::equilibrium::{gradient_flow_oracle, gradient_flow_step_limit, solve_stationary, stability_experiment, StabilityConfig};
use nsac::monitors::{smallness_holds, Baseline};

/// Non-isothermal Navier-Stokes / Allen-Cahn simulator with Marangoni
/// stress.
#[derive(Parser)]
#[command(name = "nsac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EqMethod {
    Newton,
    GradientFlow,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Exponential,
    Algebraic,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Run {
        config: PathBuf,
        /// Abort with exit code 3 on the first monitor violation.
        #[arg(long)]
        strict: bool,
        /// Clip phi to [-1, 1] after every step (alters the scheme).
        #[arg(long)]
        clamp_phi: bool,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long, default_value = "diffusion")]
        case: String,
        /// Comma-separated cells per side.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<usize>>,
    },
    /// Solve for the stationary phase field reached from the config's
    /// initial condition.
    Equilibrium {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "newton")]
        method: EqMethod,
        /// Write the result as a phi snapshot.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturb the equilibrium and run the coupled system.
    Stability {
        config: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        scale: f64,
    },
    /// Fit exponential or algebraic decay to a trace column.
    DecayFit {
        trace: PathBuf,
        #[arg(long, default_value = "total")]
        column: String,
        #[arg(long, value_enum, default_value = "exponential")]
        model: Model,
        #[arg(long, default_value_t = 0.1)]
        burn: f64,
    },
    /// Validate a config and report the smallness verdict.
    Check { config: PathBuf },
}

fn run(cmd: Command) -> Result<(), DriverError> {
    match cmd {
        Command::Run { config, strict, clamp_phi } => {
            let cfg = load_config(&config)?;
            let s = run_simulation(&cfg, RunOptions { strict, clamp_phi })?;
            match s.smallness_threshold {
                Some(th) => println!("smallness: threshold {th:.6e}, satisfied: {}", s.smallness_ok),
                None => println!("smallness: not applicable (b = 0)"),
            }
            for (step, v) in &s.warnings {
                eprintln!("warning: step {step}: {} = {:.6e} exceeds {:.6e}", v.check, v.value, v.threshold);
            }
            let last = s.rows.last().map(|r| r.record.total).unwrap_or(f64::NAN);
            println!(
                "steps {} t {:.6e} total energy {:.6e} warnings {}",
                s.steps,
                s.final_state.t,
                last,
                s.warnings.len()
            );
        }
        Command::Mms { case, ladder } => {
            let case = MmsCase::parse(&case)
                .ok_or_else(|| DriverError::Validation(format!("unknown case '{case}' (diffusion, coupled, coupled-spatial, rest)")))?;
            let mut cfg = MmsConfig::new(case);
            if let Some(l) = ladder {
                if l.len() < 2 || l.iter().any(|&n| n < 4) {
                    return Err(DriverError::Validation("ladder needs at least two rungs of 4 or more cells".into()));
                }
                cfg.ladder = l;
            }
            let r = mms_convergence(&cfg)?;
            println!("n,dt,steps,err_theta,err_phi,err_u");
            for g in &r.rungs {
                println!(
                    "{},{:.4e},{},{:.6e},{:.6e},{:.6e}",
                    g.n, g.dt, g.steps, g.err_theta, g.err_phi, g.err_u
                );
            }
            let fmt = |v: Vec<f64>| v.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(" ");
            println!("orders theta: {}", fmt(r.orders_theta()));
            println!("orders phi:   {}", fmt(r.orders_phi()));
            println!("orders u:     {}", fmt(r.orders_u()));
            println!("orders total: {}", fmt(r.orders_total()));
        }
        Command::Equilibrium { config, method, out } => {
            let cfg = load_config(&config)?;
            let g = cfg.grid()?;
            let phi0 = initial_state(g, &cfg.ic, cfg.params.eps, cfg.seed).phi;
            let sol = match method {
                EqMethod::Newton => solve_stationary(&phi0, &cfg.params, cfg.tolerances.newton_tol)?,
                EqMethod::GradientFlow => {
                    gradient_flow_oracle(&phi0, &cfg.params, cfg.tolerances.newton_tol, gradient_flow_step_limit(&cfg.params))?
                }
            };
            println!(
                "residual {:.3e} iterations {} min eigenvalue {:.6e} local minimizer {}",
                sol.residual_l2,
                sol.iterations,
                sol.min_eigenvalue,
                sol.likely_local_minimizer()
            );
            if let Some(path) = out {
                let snap = Snapshot {
                    field: "phi".into(),
                    grid: g,
                    t: 0.0,
                    values: sol.phi_inf.values,
                };
                write_snapshot(&snap, &path)?;
            }
        }
        Command::Stability { config, scale } => {
            let cfg = load_config(&config)?;
            let g = cfg.grid()?;
            let phi0 = initial_state(g, &cfg.ic, cfg.params.eps, cfg.seed).phi;
            let base = solve_stationary(&phi0, &cfg.params, cfg.tolerances.newton_tol)?;
            let sc = StabilityConfig {
                params: cfg.effective_params(),
                step: cfg.step_config(),
                t_end: cfg.t_end,
                seed: cfg.seed,
            };
            let r = stability_experiment(&base, scale, &sc)?;
            let (pu, pp, pt) = r.perturbation_size;
            println!("perturbation |u| {pu:.3e} |phi| {pp:.3e} |theta| {pt:.3e}");
            println!(
                "max excursion {:.6e} final energy gap {:.6e} final distance {:.6e}",
                r.max_excursion, r.final_energy_gap, r.converged_to
            );
        }
        Command::DecayFit {
            trace,
            column,
            model,
            burn,
        } => {
            let text = std::fs::read_to_string(&trace).map_err(|source| DriverError::Io {
                path: trace.clone(),
                source,
            })?;
            let data =
                read_column(&text, &column).ok_or_else(|| DriverError::Validation(format!("trace has no readable column '{column}'")))?;
            let model = match model {
                Model::Exponential => DecayModel::Exponential,
                Model::Algebraic => DecayModel::Algebraic,
            };
            let f = fit_decay_after(&data, model, burn)?;
            println!(
                "{:?} rate {:.6e} r^2 {:.6} window [{:.4e}, {:.4e}]",
                f.model, f.rate_or_exponent, f.r_squared, f.window.0, f.window.1
            );
        }
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            let g = cfg.grid()?;
            let mut s0 = initial_state(g, &cfg.ic, cfg.params.eps, cfg.seed);
            if cfg.mode == nsac::driver::Mode::Isothermal {
                s0.theta = s0.theta.scale(0.0);
            }
            let params = cfg.effective_params();
            let b = Baseline::of(&s0);
            match nsac::model::smallness_threshold(&params) {
                Ok(th) => println!(
                    "config ok; |theta0| {:.6e} threshold {th:.6e} smallness {}",
                    b.theta0_linf,
                    smallness_holds(&b, &params)
                ),
                Err(_) => println!("config ok; isothermal, smallness not applicable"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
