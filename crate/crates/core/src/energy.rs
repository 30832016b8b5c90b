//! Energy bookkeeping: total energy and dissipation, the isothermal
//! energy-law defect, higher-order quantities and decay-law fits.

use thiserror::Error;

use crate::flow::chemical_potential;
use crate::grid::{divergence_mac, laplacian_cc, velocity_gradient_sq, CellField};
use crate::model::{potential_value, EnergyWeights, PhysicalParams};
use crate::state::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("record times differ by {actual}, expected dt = {expected}")]
    DtMismatch { expected: f64, actual: f64 },
    #[error("decay fit needs at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("decay fit needs positive samples; sample {index} is {value}")]
    NonPositive { index: usize, value: f64 },
}

/// One row of the energy ledger. Kinetic energy carries coefficient one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub kinetic: f64,
    pub elastic_grad: f64,
    pub elastic_bulk: f64,
    pub thermal_grad: f64,
    pub thermal_l2: f64,
    pub total: f64,
    pub diss_visc: f64,
    pub diss_phase: f64,
    pub diss_heat: f64,
    pub a1: f64,
    pub a2: f64,
    pub max_abs_phi: f64,
    pub max_abs_theta: f64,
    pub div_u_inf: f64,
}

impl EnergyRecord {
    /// Column names in CSV order.
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "kinetic",
        "elastic_grad",
        "elastic_bulk",
        "thermal_grad",
        "thermal_l2",
        "total",
        "diss_visc",
        "diss_phase",
        "diss_heat",
        "a1",
        "a2",
        "max_abs_phi",
        "max_abs_theta",
        "div_u_inf",
    ];

    pub fn values(&self) -> [f64; 15] {
        [
            self.t,
            self.kinetic,
            self.elastic_grad,
            self.elastic_bulk,
            self.thermal_grad,
            self.thermal_l2,
            self.total,
            self.diss_visc,
            self.diss_phase,
            self.diss_heat,
            self.a1,
            self.a2,
            self.max_abs_phi,
            self.max_abs_theta,
            self.div_u_inf,
        ]
    }

    /// Sum of the three dissipation rates.
    pub fn dissipation(&self) -> f64 {
        self.diss_visc + self.diss_phase + self.diss_heat
    }
}

/// Squared norms that feed both the ledger and the higher-order
/// quantities.
struct Norms {
    grad_u_sq: f64,
    mu_sq: f64,
    lap_theta_sq: f64,
}

fn norms(state: &State, params: &PhysicalParams) -> Norms {
    let mu = chemical_potential(&state.phi, params.eps);
    let lt = laplacian_cc(&state.theta);
    Norms {
        grad_u_sq: velocity_gradient_sq(&state.u),
        mu_sq: mu.dot(&mu),
        lap_theta_sq: lt.dot(&lt),
    }
}

/// Free energy `int (|grad phi|^2 / 2 + F(phi))` of the phase field alone.
pub fn phase_energy(phi: &CellField, eps: f64) -> f64 {
    let h = phi.h1_seminorm();
    let bulk: f64 = phi.values.iter().map(|&p| potential_value(p, eps)).sum::<f64>() * phi.grid.cell_area();
    0.5 * h * h + bulk
}

pub fn total_energy(state: &State, weights: EnergyWeights, params: &PhysicalParams) -> EnergyRecord {
    energy_record(state, weights, params, 1.0)
}

/// Full ledger row with a configurable weight `eta1` on the temperature
/// term of `a1`.
pub fn energy_record(state: &State, weights: EnergyWeights, params: &PhysicalParams, eta1: f64) -> EnergyRecord {
    let al = params.a * params.lambda0;
    let area = state.grid().cell_area();
    let kinetic = state.u.dot(&state.u);
    let gp = state.phi.h1_seminorm();
    let elastic_grad = al * gp * gp;
    let elastic_bulk = 2.0 * al * state.phi.values.iter().map(|&p| potential_value(p, params.eps)).sum::<f64>() * area;
    let gt = state.theta.h1_seminorm();
    let thermal_grad = weights.zeta * gt * gt;
    let thermal_l2 = weights.omega * state.theta.dot(&state.theta);
    let n = norms(state, params);
    EnergyRecord {
        t: state.t,
        kinetic,
        elastic_grad,
        elastic_bulk,
        thermal_grad,
        thermal_l2,
        total: kinetic + elastic_grad + elastic_bulk + thermal_grad + thermal_l2,
        diss_visc: 0.5 * params.nu * n.grad_u_sq,
        diss_phase: al * params.gamma * n.mu_sq,
        diss_heat: params.k * weights.zeta * n.lap_theta_sq,
        a1: n.grad_u_sq + al * n.mu_sq + eta1 * n.lap_theta_sq,
        a2: n.grad_u_sq + al * n.mu_sq + n.lap_theta_sq,
        max_abs_phi: state.phi.linf_norm(),
        max_abs_theta: state.theta.linf_norm(),
        div_u_inf: divergence_mac(&state.u).linf_norm(),
    }
}

/// `(diss_visc, diss_phase, diss_heat)`.
pub fn dissipation(state: &State, params: &PhysicalParams, weights: EnergyWeights) -> (f64, f64, f64) {
    let n = norms(state, params);
    let al = params.a * params.lambda0;
    (
        0.5 * params.nu * n.grad_u_sq,
        al * params.gamma * n.mu_sq,
        params.k * weights.zeta * n.lap_theta_sq,
    )
}

/// `(a1, a2)`.
pub fn higher_order_quantities(state: &State, params: &PhysicalParams, eta1: f64) -> (f64, f64) {
    let n = norms(state, params);
    let al = params.a * params.lambda0;
    let base = n.grad_u_sq + al * n.mu_sq;
    (base + eta1 * n.lap_theta_sq, base + n.lap_theta_sq)
}

/// Relative defect of the isothermal energy law between consecutive
/// records, in the convention with kinetic energy `|u|^2 / 2`:
/// `|(E1 - E0)/dt + D1| / max(D1, eps_mach)`.
pub fn isothermal_residual(rec_n: &EnergyRecord, rec_np1: &EnergyRecord, dt: f64) -> Result<f64, EnergyError> {
    let actual = rec_np1.t - rec_n.t;
    if (actual - dt).abs() > 1e-9 * dt.abs().max(f64::MIN_POSITIVE) {
        return Err(EnergyError::DtMismatch { expected: dt, actual });
    }
    let e = |r: &EnergyRecord| 0.5 * (r.kinetic + r.elastic_grad + r.elastic_bulk);
    let d = 2.0 * rec_np1.diss_visc + rec_np1.diss_phase;
    Ok(((e(rec_np1) - e(rec_n)) / dt + d).abs() / d.max(f64::EPSILON))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `y = C exp(-r t)`.
    Exponential,
    /// `y = C (1 + t)^(-r)`.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    pub rate_or_exponent: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares fit of a decay law to `(t, y)` samples on a log scale.
pub fn fit_decay(trace: &[(f64, f64)], model: DecayModel) -> Result<DecayFit, EnergyError> {
    if trace.len() < 10 {
        return Err(EnergyError::TooFewSamples(trace.len()));
    }
    if let Some((index, &(_, value))) = trace.iter().enumerate().find(|(_, (_, y))| !(*y > 0.0)) {
        return Err(EnergyError::NonPositive { index, value });
    }
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .map(|&(t, y)| {
            let x = match model {
                DecayModel::Exponential => t,
                DecayModel::Algebraic => (1.0 + t).ln(),
            };
            (x, y.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        model,
        rate_or_exponent: -slope,
        r_squared,
        window: (trace[0].0, trace[trace.len() - 1].0),
    })
}

/// [`fit_decay`] after dropping the samples before `burn_fraction` of the
/// time span.
pub fn fit_decay_after(trace: &[(f64, f64)], model: DecayModel, burn_fraction: f64) -> Result<DecayFit, EnergyError> {
    let Some(&(t0, _)) = trace.first() else {
        return Err(EnergyError::TooFewSamples(0));
    };
    let t1 = trace[trace.len() - 1].0;
    let cut = t0 + burn_fraction * (t1 - t0);
    let start = trace.iter().position(|p| p.0 >= cut).unwrap_or(trace.len());
    fit_decay(&trace[start..], model)
}
