//! Temperature and phase-field steps, and the full coupled step.

use crate::flow::{capillary_force, predict_velocity, pressure_poisson_from, project, ForceField, SolverError, Stage};
use crate::grid::{advect_upwind, laplacian_into, Boundary, CellField, FaceField, Grid, MacVelocity};
use crate::model::{potential_derivative, PhysicalParams};
use crate::monitors::cfl_number;
use crate::state::{solvers_for, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStepConfig {
    pub dt: f64,
    /// Stabilization constant S of the phase step, in units of 1/eps^2.
    pub stab: f64,
    /// Max-norm residual tolerance of the implicit diffusion solves.
    pub helmholtz_tol: f64,
    /// Max-norm tolerance on the divergence left by the projection.
    pub poisson_tol: f64,
}

impl Default for ScalarStepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            stab: 2.0,
            helmholtz_tol: 1e-10,
            poisson_tol: 1e-10,
        }
    }
}

/// Optional source terms added to each equation, used by manufactured
/// solutions. Sources are evaluated by the caller at the new time level.
#[derive(Debug, Clone, Copy, Default)]
pub struct Forcing<'a> {
    pub theta: Option<&'a CellField>,
    pub phi: Option<&'a CellField>,
    pub momentum: Option<&'a FaceField>,
}

fn check_cfl(w: &MacVelocity, dt: f64, stage: Stage) -> Result<(), SolverError> {
    let cfl = cfl_number(w, dt, &w.grid);
    if cfl > 1.0 + 1e-12 {
        return Err(SolverError::Cfl { stage, cfl });
    }
    Ok(())
}

/// Boundary contribution of the Laplacian for a Dirichlet value.
fn dirichlet_lift(g: &Grid, bc: Boundary) -> Option<Vec<f64>> {
    match bc {
        Boundary::Dirichlet(v) if v != 0.0 => {
            let mut out = vec![0.0; g.cells()];
            laplacian_into(g, bc, &vec![0.0; g.cells()], &mut out);
            Some(out)
        }
        _ => None,
    }
}

fn max_iter_for(g: &Grid) -> usize {
    10 * g.nx.max(g.ny) + 50
}

pub fn heat_step(theta: &CellField, w: &MacVelocity, params: &PhysicalParams, cfg: &ScalarStepConfig) -> Result<CellField, SolverError> {
    heat_step_forced(theta, w, params, cfg, None)
}

/// `(I - k dt lap) theta' = theta - dt (w . grad) theta + dt source`.
pub fn heat_step_forced(
    theta: &CellField,
    w: &MacVelocity,
    params: &PhysicalParams,
    cfg: &ScalarStepConfig,
    source: Option<&CellField>,
) -> Result<CellField, SolverError> {
    check_cfl(w, cfg.dt, Stage::Heat)?;
    let g = theta.grid;
    let dt = cfg.dt;
    let kdt = params.k * dt;
    let adv = advect_upwind(w, theta);
    let mut rhs: Vec<f64> = theta.values.iter().zip(&adv.values).map(|(t, a)| t - dt * a).collect();
    if let Some(s) = source {
        rhs.iter_mut().zip(&s.values).for_each(|(r, s)| *r += dt * s);
    }
    if let Some(lift) = dirichlet_lift(&g, theta.bc) {
        rhs.iter_mut().zip(&lift).for_each(|(r, l)| *r += kdt * l);
    }
    let mut x = theta.values.clone();
    let rep = solvers_for(&g)
        .cell_dirichlet
        .solve(1.0, kdt, kdt, &rhs, &mut x, cfg.helmholtz_tol, max_iter_for(&g), false);
    if !rep.converged {
        return Err(SolverError::NotConverged {
            stage: Stage::Heat,
            report: rep,
        });
    }
    Ok(CellField {
        grid: g,
        values: x,
        bc: theta.bc,
    })
}

pub fn phase_step(phi: &CellField, w: &MacVelocity, params: &PhysicalParams, cfg: &ScalarStepConfig) -> Result<CellField, SolverError> {
    phase_step_forced(phi, w, params, cfg, None)
}

/// Stabilized semi-implicit Allen-Cahn step:
/// `(I - gamma dt lap + gamma dt S/eps^2) phi'
///   = phi + dt (-(w . grad) phi - gamma F'(phi) + gamma S/eps^2 phi) + dt source`.
pub fn phase_step_forced(
    phi: &CellField,
    w: &MacVelocity,
    params: &PhysicalParams,
    cfg: &ScalarStepConfig,
    source: Option<&CellField>,
) -> Result<CellField, SolverError> {
    check_cfl(w, cfg.dt, Stage::Phase)?;
    let g = phi.grid;
    let dt = cfg.dt;
    let eps = params.eps;
    let gdt = params.gamma * dt;
    let sig = cfg.stab / (eps * eps);
    let adv = advect_upwind(w, phi);
    let mut rhs: Vec<f64> = phi
        .values
        .iter()
        .zip(&adv.values)
        .map(|(&p, a)| p - dt * a - gdt * potential_derivative(p, eps) + gdt * sig * p)
        .collect();
    if let Some(s) = source {
        rhs.iter_mut().zip(&s.values).for_each(|(r, s)| *r += dt * s);
    }
    if let Some(lift) = dirichlet_lift(&g, phi.bc) {
        rhs.iter_mut().zip(&lift).for_each(|(r, l)| *r += gdt * l);
    }
    let mut x = phi.values.clone();
    let rep = solvers_for(&g)
        .cell_dirichlet
        .solve(1.0 + gdt * sig, gdt, gdt, &rhs, &mut x, cfg.helmholtz_tol, max_iter_for(&g), false);
    if !rep.converged {
        return Err(SolverError::NotConverged {
            stage: Stage::Phase,
            report: rep,
        });
    }
    Ok(CellField {
        grid: g,
        values: x,
        bc: phi.bc,
    })
}

pub fn coupled_step(state: &State, params: &PhysicalParams, cfg: &ScalarStepConfig) -> Result<State, SolverError> {
    coupled_step_forced(state, params, cfg, Forcing::default())
}

/// One step in the order theta, phi, momentum, projection. The capillary
/// force uses the new scalars; its upwind sides follow the old velocity,
/// the one that transported phi.
pub fn coupled_step_forced(
    state: &State,
    params: &PhysicalParams,
    cfg: &ScalarStepConfig,
    forcing: Forcing<'_>,
) -> Result<State, SolverError> {
    let dt = cfg.dt;
    let theta = heat_step_forced(&state.theta, &state.u, params, cfg, forcing.theta)?;
    let phi = phase_step_forced(&state.phi, &state.u, params, cfg, forcing.phi)?;

    let mut force: ForceField = capillary_force(&phi, &theta, params, &state.u);
    if let Some(m) = forcing.momentum {
        force.u.iter_mut().zip(&m.u).for_each(|(f, s)| *f += s);
        force.v.iter_mut().zip(&m.v).for_each(|(f, s)| *f += s);
        force.pin_walls();
    }
    let mid = State {
        t: state.t,
        u: state.u.clone(),
        p: state.p.clone(),
        phi,
        theta,
    };
    let u_star = predict_velocity(&mid, &force, params, dt, cfg.helmholtz_tol)?;
    let (p, _) = pressure_poisson_from(&u_star, dt, cfg.poisson_tol, Some(&state.p))?;
    let u = project(&u_star, &p, dt);
    if !u.is_finite() {
        return Err(SolverError::NonFinite { stage: Stage::Momentum });
    }
    Ok(State {
        t: state.t + dt,
        u,
        p,
        phi: mid.phi,
        theta: mid.theta,
    })
}
