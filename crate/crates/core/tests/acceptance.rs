//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the test harness so the
//! lines are never captured.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nsac::driver::config::{Mode, Preset, RunConfig};
use nsac::driver::mms::{mms_convergence, MmsCase, MmsConfig};
use nsac::driver::presets::initial_state;
use nsac::driver::{run_simulation, RunOptions, RunSummary};
use nsac::energy::{fit_decay_after, DecayModel, EnergyRecord};
use nsac::equilibrium::{
    gradient_flow_oracle, gradient_flow_step_limit, solve_stationary, stability_experiment, steady_state_distance, StabilityConfig,
};
use nsac::grid::{laplacian_cc, Boundary, CellField, Grid};
use nsac::model::{energy_weights, smallness_threshold, PhysicalParams};

const SOLVER_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Largest per-step energy increase beyond the allowed slack, or `None`
/// if the sequence is non-increasing. Also checks component signs.
fn monotone_excess(records: &[EnergyRecord]) -> Option<f64> {
    let e0 = records[0].total;
    let slack = 1e-8 * e0 + 10.0 * SOLVER_TOL;
    let mut worst: Option<f64> = None;
    for w in records.windows(2) {
        let rise = w[1].total - w[0].total;
        if rise > slack {
            worst = Some(worst.map_or(rise, |x: f64| x.max(rise)));
        }
    }
    let negative = records.iter().any(|r| {
        [
            r.kinetic,
            r.elastic_grad,
            r.elastic_bulk,
            r.thermal_grad,
            r.thermal_l2,
            r.diss_visc,
            r.diss_phase,
            r.diss_heat,
        ]
        .iter()
        .any(|&v| v < 0.0)
    });
    if negative {
        worst = Some(f64::INFINITY);
    }
    worst
}

fn mean_isothermal_residual(s: &RunSummary) -> f64 {
    let r: Vec<f64> = s.rows[1..].iter().map(|r| r.isothermal_residual).collect();
    r.iter().sum::<f64>() / r.len() as f64
}

fn isothermal_run(dt: f64) -> RunSummary {
    let mut c = RunConfig {
        dt,
        t_end: 0.5,
        mode: Mode::Isothermal,
        ..RunConfig::default()
    };
    c.ic.preset = Preset::Bubble;
    c.ic.radius = 0.3;
    c.ic.wobble = 0.2;
    c.params.gamma = 0.1;
    run_simulation(&c, RunOptions::default()).expect("isothermal run")
}

fn criterion_1(runs: &[RunSummary; 2]) -> Outcome {
    let mono: Vec<Option<f64>> = runs.iter().map(|s| monotone_excess(&s.records())).collect();
    let (r_coarse, r_fine) = (mean_isothermal_residual(&runs[0]), mean_isothermal_residual(&runs[1]));
    let factor = r_coarse / r_fine;
    let pass = mono.iter().all(Option::is_none) && factor >= 1.8;
    outcome(
        pass,
        format!("energy rises {mono:?}; mean residual {r_coarse:.3e} -> {r_fine:.3e}, factor {factor:.3}"),
    )
}

fn sweep_config(frac: f64, omega: f64) -> RunConfig {
    let mut c = RunConfig {
        dt: 1e-4,
        t_end: 0.2,
        mode: Mode::Full,
        ..RunConfig::default()
    };
    c.params.omega_weight = omega;
    c.ic.preset = Preset::Bubble;
    c.ic.radius = 0.3;
    c.ic.wobble = 0.2;
    c.ic.theta_amp = frac * smallness_threshold(&c.params).unwrap();
    c
}

fn sweep() -> Vec<(RunConfig, RunSummary)> {
    let mut out = Vec::new();
    for frac in [0.5, 0.9] {
        for omega in [0.5, 1.0, 2.0] {
            let c = sweep_config(frac, omega);
            let s = run_simulation(&c, RunOptions::default()).expect("sweep run");
            out.push((c, s));
        }
    }
    out
}

fn criterion_2(runs: &[(RunConfig, RunSummary)]) -> Outcome {
    let mut bad = Vec::new();
    for (c, s) in runs {
        if !s.smallness_ok {
            bad.push(format!("theta0 {:.3} not small", c.ic.theta_amp));
        }
        if let Some(x) = monotone_excess(&s.records()) {
            bad.push(format!("theta0 {:.3} omega {} rise {x:.3e}", c.ic.theta_amp, c.params.omega_weight));
        }
        if !s.warnings.is_empty() {
            bad.push(format!("{} violations", s.warnings.len()));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} runs monotone, no violations", runs.len())
        } else {
            bad.join("; ")
        },
    )
}

fn criterion_3(iso: &[RunSummary; 2], runs: &[(RunConfig, RunSummary)]) -> Outcome {
    let all = iso.iter().chain(runs.iter().map(|(_, s)| s));
    let (mut theta, mut phi) = (0, 0);
    let mut worst_phi: f64 = 0.0;
    for s in all {
        for (_, v) in &s.warnings {
            match v.check.as_str() {
                "theta_max_principle" => theta += 1,
                "phi_bound" => phi += 1,
                _ => {}
            }
        }
        worst_phi = worst_phi.max(s.rows.iter().map(|r| r.monitor.max_abs_phi).fold(0.0, f64::max));
    }
    outcome(
        theta == 0 && phi == 0,
        format!("theta violations {theta}, phi violations {phi}, max |phi| {worst_phi:.6}"),
    )
}

fn criterion_4() -> Outcome {
    let mut c = RunConfig {
        nx: 128,
        ny: 128,
        dt: 1e-4,
        t_end: 0.2,
        mode: Mode::HeatOnly,
        ..RunConfig::default()
    };
    c.ic.preset = Preset::EigenmodeTheta;
    c.ic.theta_amp = 1.0;
    let s = run_simulation(&c, RunOptions::default()).expect("heat run");
    let omega = c.params.omega_weight;
    let trace: Vec<(f64, f64)> = s.rows.iter().map(|r| (r.record.t, (r.record.thermal_l2 / omega).sqrt())).collect();
    let fit = fit_decay_after(&trace, DecayModel::Exponential, c.burn_fraction).expect("fit");

    let g = c.grid().unwrap();
    let th = initial_state(g, &c.ic, c.params.eps, 0).theta;
    let mu_h = -laplacian_cc(&th).dot(&th) / th.dot(&th);
    let discrete = (1.0 + c.params.k * c.dt * mu_h).ln() / c.dt;
    let continuum = c.params.k * PI * PI * (1.0 / (c.lx * c.lx) + 1.0 / (c.ly * c.ly));
    let (e_d, e_c) = (
        (fit.rate_or_exponent - discrete).abs() / discrete,
        (fit.rate_or_exponent - continuum).abs() / continuum,
    );
    outcome(
        e_d <= 1e-3 && e_c <= 1e-2,
        format!(
            "rate {:.6} vs discrete {discrete:.6} ({e_d:.2e}) and continuum {continuum:.6} ({e_c:.2e})",
            fit.rate_or_exponent
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut c = RunConfig {
        dt: 2e-3,
        t_end: 20.0,
        mode: Mode::Full,
        ..RunConfig::default()
    };
    c.t_end = 20.0 / c.params.gamma;
    c.ic.preset = Preset::Bubble;
    c.ic.radius = 0.3;
    c.ic.wobble = 0.2;
    let s = run_simulation(&c, RunOptions::default()).expect("long run");
    let eq = match solve_stationary(&s.final_state.phi, &c.params, c.tolerances.newton_tol) {
        Ok(eq) => eq,
        Err(e) => return outcome(false, format!("stationary solve failed: {e}")),
    };
    let (du, dphi, dtheta) = steady_state_distance(&s.final_state, &eq).unwrap();
    let gap = s.final_state.phi.sub(&eq.phi_inf).l2_norm();
    outcome(
        du < 1e-4 && dphi < 1e-4 && dtheta < 1e-4 && gap <= 1e-4,
        format!("distances u {du:.2e} phi {dphi:.2e} theta {dtheta:.2e}; terminal vs stationary {gap:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let params = PhysicalParams::default();
    let g = Grid::square(32);
    let star = CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0));
    let base = solve_stationary(&star, &params, 1e-10).expect("phi* = -1");
    let cfg = StabilityConfig {
        params,
        step: nsac::scalar::ScalarStepConfig {
            dt: 1e-3,
            ..Default::default()
        },
        t_end: 2.0,
        seed: 11,
    };
    let scales = [0.32, 0.16, 0.08, 0.04, 0.02];
    let mut reports = Vec::new();
    for s in scales {
        match stability_experiment(&base, s, &cfg) {
            Ok(r) => reports.push(r),
            Err(e) => return outcome(false, format!("scale {s}: {e}")),
        }
    }
    let exc: Vec<f64> = reports.iter().map(|r| r.max_excursion).collect();
    let monotone = exc.windows(2).all(|w| w[1] <= w[0]);
    let gap = reports.last().unwrap().final_energy_gap;
    let limit = 1e-6 * params.a * params.lambda0;
    outcome(
        monotone && gap <= limit,
        format!(
            "excursions {}; smallest-scale energy gap {gap:.2e} (limit {limit:.1e})",
            exc.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn sign_pattern(phi: &CellField) -> Vec<bool> {
    phi.values.iter().map(|&v| v > 0.0).collect()
}

fn criterion_7() -> Outcome {
    let params = PhysicalParams {
        eps: 0.1,
        ..PhysicalParams::default()
    };
    let g = Grid::square(32);
    let mut ic = RunConfig::default().ic;
    ic.preset = Preset::Random;
    let (mut compared, mut worst) = (0, 0.0_f64);
    let mut failures = Vec::new();
    for seed in 0..20 {
        let phi0 = initial_state(g, &ic, params.eps, seed).phi;
        let newton = solve_stationary(&phi0, &params, 1e-10);
        let flow = gradient_flow_oracle(&phi0, &params, 1e-9, gradient_flow_step_limit(&params));
        match (newton, flow) {
            (Ok(n), Ok(f)) if sign_pattern(&n.phi_inf) == sign_pattern(&f.phi_inf) => {
                compared += 1;
                worst = worst.max(n.phi_inf.sub(&f.phi_inf).l2_norm());
            }
            (Ok(_), Ok(_)) => {}
            (n, f) => failures.push(format!(
                "seed {seed}: newton {:?} flow {:?}",
                n.err().map(|e| e.to_string()),
                f.err().map(|e| e.to_string())
            )),
        }
    }

    let gt = Grid::new(256, 64, 4.0, 1.0).unwrap();
    let p05 = PhysicalParams {
        eps: 0.05,
        ..PhysicalParams::default()
    };
    let w = std::f64::consts::SQRT_2 * p05.eps;
    let tanh = CellField::from_fn(gt, Boundary::Dirichlet(-1.0), |x, _| ((x - 2.0) / w).tanh());
    let tanh_res = match solve_stationary(&tanh, &p05, 1e-8) {
        Ok(s) => s.residual_l2,
        Err(e) => {
            failures.push(format!("tanh: {e}"));
            f64::INFINITY
        }
    };
    let pass = failures.is_empty() && compared >= 10 && worst <= 1e-4 && tanh_res <= 1e-8;
    let mut detail = format!("{compared}/20 same-basin pairs, max L2 gap {worst:.2e}; tanh residual {tanh_res:.2e}");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    outcome(pass, detail)
}

fn criterion_8() -> Outcome {
    let diff = mms_convergence(&MmsConfig::new(MmsCase::Diffusion)).expect("diffusion mms");
    let coup = mms_convergence(&MmsConfig::new(MmsCase::Coupled)).expect("coupled mms");
    let (ot, op, oc) = (diff.orders_theta(), diff.orders_phi(), coup.orders_total());
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = min(&ot) >= 1.9 && min(&op) >= 1.9 && min(&oc) >= 0.9;
    outcome(pass, format!("spatial theta {ot:.3?} phi {op:.3?}; coupled overall {oc:.3?}"))
}

fn criterion_9(runs: &[(RunConfig, RunSummary)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (c, s) in runs {
        let recs = s.records();
        if monotone_excess(&recs).is_some() {
            continue;
        }
        checked += 1;
        let p = c.effective_params();
        let zeta = energy_weights(&p).zeta;
        let al = p.a * p.lambda0;
        let bound = recs[0].total * (2.0 / p.nu).max(1.0 / (al * p.gamma)).max(1.0 / (p.k * zeta));
        let integral: f64 = recs[1..]
            .iter()
            .map(|r| c.dt * (2.0 * r.diss_visc / p.nu + r.diss_phase / (al * p.gamma) + r.diss_heat / (p.k * zeta)))
            .sum();
        worst = worst.max(integral / bound);
    }
    outcome(
        checked == runs.len() && worst <= 1.0,
        format!("{checked}/{} monotone runs checked; max integral/bound {worst:.3e}", runs.len()),
    )
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut record = |n: usize, start: Instant, o: Outcome| {
        let line = format!(
            "criterion {n}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        println!("{line}");
        lines.push((o.pass, line));
    };

    let t = Instant::now();
    let iso = [isothermal_run(2e-4), isothermal_run(1e-4)];
    record(1, t, criterion_1(&iso));
    let t = Instant::now();
    let runs = sweep();
    record(2, t, criterion_2(&runs));
    record(3, Instant::now(), criterion_3(&iso, &runs));
    record(4, Instant::now(), criterion_4());
    record(5, Instant::now(), criterion_5());
    record(6, Instant::now(), criterion_6());
    record(7, Instant::now(), criterion_7());
    record(8, Instant::now(), criterion_8());
    record(9, Instant::now(), criterion_9(&runs));

    let failed = lines.iter().filter(|(p, _)| !p).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
