//! Time loop with monitoring, tracing and snapshot output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::energy::{energy_record, isothermal_residual, EnergyRecord};
use crate::grid::{CellField, FaceField};
use crate::model::{energy_weights, smallness_threshold};
use crate::monitors::{check_state, Baseline, Tolerances, Violation};
use crate::scalar::{coupled_step, heat_step, phase_step};
use crate::state::State;

use super::config::{Mode, RunConfig};
use super::presets::initial_state;
use super::snapshot::{state_snapshots, write_snapshot};
use super::trace::{TraceRow, TraceWriter};
use super::DriverError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Abort on the first monitor violation.
    pub strict: bool,
    /// Clip the phase field to [-1, 1] after every step. This changes the
    /// scheme and is off by default.
    pub clamp_phi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: State,
    /// One row per time level, the initial one included.
    pub rows: Vec<TraceRow>,
    /// Temperature threshold of the smallness condition, if one applies.
    pub smallness_threshold: Option<f64>,
    pub smallness_ok: bool,
    /// Violations seen in non-strict mode, with their step.
    pub warnings: Vec<(usize, Violation)>,
}

impl RunSummary {
    pub fn records(&self) -> Vec<EnergyRecord> {
        self.rows.iter().map(|r| r.record).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_all_snapshots(dir: &Path, state: &State, step: usize) -> Result<(), DriverError> {
    for snap in state_snapshots(state) {
        write_snapshot(&snap, &dir.join(format!("{}_{step:06}.dat", snap.field)))?;
    }
    Ok(())
}

/// Runs the configured initial condition to `t_end`.
pub fn run_simulation(cfg: &RunConfig, opts: RunOptions) -> Result<RunSummary, DriverError> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let mut s0 = initial_state(g, &cfg.ic, cfg.params.eps, cfg.seed);
    if cfg.mode == Mode::Isothermal {
        s0.theta = CellField::zeros(g, s0.theta.bc);
    }
    run_from(cfg, s0, opts)
}

/// Runs from an explicit state; the grid of `cfg` is ignored.
pub fn run_from(cfg: &RunConfig, initial: State, opts: RunOptions) -> Result<RunSummary, DriverError> {
    cfg.validate()?;
    cfg.check_outputs()?;
    if !initial.same_grid() {
        return Err(DriverError::Validation("initial fields live on different grids".into()));
    }
    let params = cfg.effective_params();
    let step_cfg = cfg.step_config();
    let weights = energy_weights(&params);
    let baseline = Baseline::of(&initial);
    let tols = Tolerances {
        tol_phi: cfg.tolerances.tol_phi,
        ..Tolerances::from_solver(cfg.tolerances.poisson_tol, cfg.tolerances.helmholtz_tol)
    };
    let threshold = smallness_threshold(&params).ok();

    let mut trace = match &cfg.output.trace_path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            let f = File::create(p).map_err(io_err(p))?;
            Some(TraceWriter::new(BufWriter::new(f)).map_err(io_err(p))?)
        }
        None => None,
    };
    if let Some(dir) = &cfg.output.snapshot_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let steps = cfg.steps();
    let zero_w = FaceField::zeros(initial.grid());
    let mut state = initial;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut warnings = Vec::new();
    let mut prev: Option<EnergyRecord> = None;

    for step in 0..=steps {
        if step > 0 {
            state = match cfg.mode {
                Mode::Full | Mode::Isothermal => coupled_step(&state, &params, &step_cfg)?,
                Mode::HeatOnly => State {
                    t: state.t + cfg.dt,
                    theta: heat_step(&state.theta, &zero_w, &params, &step_cfg)?,
                    ..state
                },
                Mode::PhaseOnly => State {
                    t: state.t + cfg.dt,
                    phi: phase_step(&state.phi, &zero_w, &params, &step_cfg)?,
                    ..state
                },
            };
            if opts.clamp_phi {
                state.phi.values.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
            }
        }

        let record = energy_record(&state, weights, &params, cfg.eta1);
        let monitor = check_state(&state, &baseline, &params, &tols, cfg.dt);
        let iso = match (cfg.mode, prev) {
            (Mode::Isothermal, Some(p)) => isothermal_residual(&p, &record, cfg.dt)?,
            _ => f64::NAN,
        };
        for v in &monitor.violations {
            if opts.strict {
                return Err(DriverError::Strict {
                    step,
                    check: v.check.clone(),
                    value: v.value,
                    threshold: v.threshold,
                });
            }
            warnings.push((step, v.clone()));
        }
        let row = TraceRow {
            step,
            record,
            monitor,
            isothermal_residual: iso,
        };
        if let (Some(w), Some(p)) = (trace.as_mut(), &cfg.output.trace_path) {
            w.push(&row).map_err(io_err(p))?;
        }
        if let Some(dir) = &cfg.output.snapshot_dir {
            let every = cfg.output.snapshot_every;
            if step == 0 || step == steps || (every > 0 && step % every == 0) {
                write_all_snapshots(dir, &state, step)?;
            }
        }
        prev = Some(record);
        rows.push(row);
    }
    if let (Some(w), Some(p)) = (trace, &cfg.output.trace_path) {
        w.finish().map_err(io_err(p))?;
    }

    let smallness_ok = rows.first().map(|r| r.monitor.smallness_ok).unwrap_or(true);
    Ok(RunSummary {
        steps,
        final_state: state,
        rows,
        smallness_threshold: threshold,
        smallness_ok,
        warnings,
    })
}
