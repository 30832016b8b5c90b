//! Momentum update: capillary and buoyancy forcing, implicit viscous
//! prediction and pressure projection.

use thiserror::Error;

use crate::grid::{gradient_cc, laplacian_into, upwind_of, Boundary, CellField, FaceField, Grid, MacVelocity, Upwind};
use crate::linalg::SolveReport;
use crate::model::{potential_derivative, potential_value, surface_tension, PhysicalParams};
use crate::state::{pack_u, pack_v, solvers_for, unpack_u, unpack_v, State};

/// Face-sampled force density, same layout as [`MacVelocity`].
pub type ForceField = FaceField;

/// Report of the pressure solve. `residual` is the max-norm of the
/// discrete divergence left after projection.
pub type PoissonSolveReport = SolveReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Heat,
    Phase,
    Momentum,
    Pressure,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Heat => "heat",
            Stage::Phase => "phase",
            Stage::Momentum => "momentum",
            Stage::Pressure => "pressure",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{stage} solve did not converge after {} iterations (residual {:.3e})", report.iterations, report.residual)]
    NotConverged { stage: Stage, report: SolveReport },
    #[error("{stage} step: CFL number {cfl:.4} exceeds 1")]
    Cfl { stage: Stage, cfl: f64 },
    #[error("{stage} step produced non-finite values")]
    NonFinite { stage: Stage },
}

impl SolverError {
    pub fn stage(&self) -> Stage {
        match self {
            SolverError::NotConverged { stage, .. } | SolverError::Cfl { stage, .. } | SolverError::NonFinite { stage } => *stage,
        }
    }
}

/// Chemical potential `-lap phi + F'(phi)` at cell centres.
pub fn chemical_potential(phi: &CellField, eps: f64) -> CellField {
    let g = phi.grid;
    let mut lap = vec![0.0; g.cells()];
    laplacian_into(&g, phi.bc, &phi.values, &mut lap);
    let values = lap
        .iter()
        .zip(&phi.values)
        .map(|(l, &p)| -l + potential_derivative(p, eps))
        .collect();
    CellField {
        grid: g,
        values,
        bc: Boundary::Dirichlet(0.0),
    }
}

/// Capillary force density.
///
/// Uses the identity
/// `-div(lam (grad phi x grad phi - (|grad phi|^2/2 + F) I))
///   = lam mu grad phi + lam0 b [(grad theta . grad phi) grad phi - (|grad phi|^2/2 + F) grad theta]`
/// with `mu = -lap phi + F'(phi)`. The first term is assembled as the
/// exact adjoint of the upwind transport operator driven by `transport`,
/// which makes the discrete kinetic/free-energy exchange cancel exactly.
/// The remainder is the Marangoni stress and vanishes when `theta` is
/// uniform.
pub fn capillary_force(phi: &CellField, theta: &CellField, params: &PhysicalParams, transport: &MacVelocity) -> ForceField {
    let g = phi.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mu = chemical_potential(phi, params.eps);
    let gp = gradient_cc(phi);

    // Per-cell transport potentials P = lam(theta) mu S, S the upwind
    // one-sided gradient selected by the transport velocity.
    let mut px = vec![0.0; g.cells()];
    let mut py = vec![0.0; g.cells()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            let lm = surface_tension(theta.values[k], params) * mu.values[k];
            let (lo, hi) = (gp.u[g.uidx(i, j)], gp.u[g.uidx(i + 1, j)]);
            let sx = match upwind_of(transport.u_center(i, j)) {
                Upwind::Back => lo,
                Upwind::Forward => hi,
                Upwind::Still => 0.5 * (lo + hi),
            };
            let (lo, hi) = (gp.v[g.vidx(i, j)], gp.v[g.vidx(i, j + 1)]);
            let sy = match upwind_of(transport.v_center(i, j)) {
                Upwind::Back => lo,
                Upwind::Forward => hi,
                Upwind::Still => 0.5 * (lo + hi),
            };
            px[k] = lm * sx;
            py[k] = lm * sy;
        }
    }

    let mut f = FaceField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            f.u[g.uidx(i, j)] = 0.5 * (px[g.idx(i - 1, j)] + px[g.idx(i, j)]);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            f.v[g.vidx(i, j)] = 0.5 * (py[g.idx(i, j - 1)] + py[g.idx(i, j)]);
        }
    }

    if params.b != 0.0 {
        add_marangoni(phi, theta, params, &gp, &mut f);
    }
    f
}

fn add_marangoni(phi: &CellField, theta: &CellField, params: &PhysicalParams, gp: &FaceField, f: &mut ForceField) {
    let g = phi.grid;
    let (nx, ny) = (g.nx, g.ny);
    let gt = gradient_cc(theta);
    let c = params.lambda0 * params.b;
    let bulk: Vec<f64> = phi.values.iter().map(|&p| potential_value(p, params.eps)).collect();
    // Cell-centred gradients from the averaged face gradients.
    let cx = |w: &FaceField, i: usize, j: usize| 0.5 * (w.u[g.uidx(i, j)] + w.u[g.uidx(i + 1, j)]);
    let cy = |w: &FaceField, i: usize, j: usize| 0.5 * (w.v[g.vidx(i, j)] + w.v[g.vidx(i, j + 1)]);

    for j in 0..ny {
        for i in 1..nx {
            let k = g.uidx(i, j);
            let (px, tx) = (gp.u[k], gt.u[k]);
            let py = 0.5 * (cy(gp, i - 1, j) + cy(gp, i, j));
            let ty = 0.5 * (cy(&gt, i - 1, j) + cy(&gt, i, j));
            let fb = 0.5 * (bulk[g.idx(i - 1, j)] + bulk[g.idx(i, j)]);
            f.u[k] += c * (0.5 * tx * (px * px - py * py) + ty * px * py - fb * tx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = g.vidx(i, j);
            let (py, ty) = (gp.v[k], gt.v[k]);
            let px = 0.5 * (cx(gp, i, j - 1) + cx(gp, i, j));
            let tx = 0.5 * (cx(&gt, i, j - 1) + cx(&gt, i, j));
            let fb = 0.5 * (bulk[g.idx(i, j - 1)] + bulk[g.idx(i, j)]);
            f.v[k] += c * (0.5 * ty * (py * py - px * px) + tx * px * py - fb * ty);
        }
    }
}

/// Centred advection `div(u u)` in conservative form at interior faces.
/// Kinetic-energy neutral for discretely divergence-free `w`.
pub fn momentum_advection(w: &MacVelocity) -> FaceField {
    let g = w.grid;
    let (nx, ny) = (g.nx, g.ny);
    let u = |i: usize, j: usize| w.u[g.uidx(i, j)];
    let v = |i: usize, j: usize| w.v[g.vidx(i, j)];
    let mut out = FaceField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            let ue = 0.5 * (u(i, j) + u(i + 1, j));
            let uw = 0.5 * (u(i - 1, j) + u(i, j));
            let top = if j + 1 < ny {
                0.5 * (u(i, j) + u(i, j + 1)) * 0.5 * (v(i - 1, j + 1) + v(i, j + 1))
            } else {
                0.0
            };
            let bot = if j > 0 {
                0.5 * (u(i, j - 1) + u(i, j)) * 0.5 * (v(i - 1, j) + v(i, j))
            } else {
                0.0
            };
            out.u[g.uidx(i, j)] = (ue * ue - uw * uw) / g.dx + (top - bot) / g.dy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let vn = 0.5 * (v(i, j) + v(i, j + 1));
            let vs = 0.5 * (v(i, j - 1) + v(i, j));
            let east = if i + 1 < nx {
                0.5 * (u(i + 1, j - 1) + u(i + 1, j)) * 0.5 * (v(i, j) + v(i + 1, j))
            } else {
                0.0
            };
            let west = if i > 0 {
                0.5 * (u(i, j - 1) + u(i, j)) * 0.5 * (v(i - 1, j) + v(i, j))
            } else {
                0.0
            };
            out.v[g.vidx(i, j)] = (vn * vn - vs * vs) / g.dy + (east - west) / g.dx;
        }
    }
    out
}

fn max_iter_for(g: &Grid) -> usize {
    10 * g.nx.max(g.ny) + 50
}

/// Provisional velocity from
/// `(I - nu dt lap) u* = u^n + dt (-(u^n . grad) u^n + force + buoyancy)`,
/// buoyancy taken from `state.theta`.
pub fn predict_velocity(state: &State, force: &ForceField, params: &PhysicalParams, dt: f64, tol: f64) -> Result<MacVelocity, SolverError> {
    let g = state.grid();
    let adv = momentum_advection(&state.u);
    let mut ru = state.u.u.clone();
    for (k, r) in ru.iter_mut().enumerate() {
        *r += dt * (force.u[k] - adv.u[k]);
    }
    let rv = state.v_rhs(&adv, force, params, dt);
    let s = solvers_for(&g);
    let c = params.nu * dt;
    let mut out = FaceField::zeros(g);

    let bu = pack_u(&g, &ru);
    let mut xu = pack_u(&g, &state.u.u);
    let rep = s.u_faces.solve(1.0, c, c, &bu, &mut xu, tol, max_iter_for(&g), false);
    if !rep.converged {
        return Err(SolverError::NotConverged {
            stage: Stage::Momentum,
            report: rep,
        });
    }
    unpack_u(&g, &xu, &mut out.u);

    let bv = pack_v(&g, &rv);
    let mut xv = pack_v(&g, &state.u.v);
    let rep = s.v_faces.solve(1.0, c, c, &bv, &mut xv, tol, max_iter_for(&g), false);
    if !rep.converged {
        return Err(SolverError::NotConverged {
            stage: Stage::Momentum,
            report: rep,
        });
    }
    unpack_v(&g, &xv, &mut out.v);
    Ok(out)
}

impl State {
    fn v_rhs(&self, adv: &FaceField, force: &ForceField, params: &PhysicalParams, dt: f64) -> Vec<f64> {
        let g = self.grid();
        let mut rv = self.u.v.clone();
        for j in 1..g.ny {
            for i in 0..g.nx {
                let k = g.vidx(i, j);
                let tb = 0.5 * (self.theta.values[g.idx(i, j - 1)] + self.theta.values[g.idx(i, j)]);
                let b = crate::model::buoyancy_density(tb, params);
                rv[k] += dt * (force.v[k] - adv.v[k] + b);
            }
        }
        rv
    }
}

/// Pressure from `lap p = div(u*) / dt` with zero-flux walls, zero mean.
pub fn pressure_poisson(u_star: &MacVelocity, dt: f64, tol: f64) -> Result<(CellField, PoissonSolveReport), SolverError> {
    pressure_poisson_from(u_star, dt, tol, None)
}

/// As [`pressure_poisson`], warm-started from `guess`.
pub fn pressure_poisson_from(
    u_star: &MacVelocity,
    dt: f64,
    tol: f64,
    guess: Option<&CellField>,
) -> Result<(CellField, PoissonSolveReport), SolverError> {
    let g = u_star.grid;
    let s = solvers_for(&g);
    // Solve K q = -div u* for q = dt p; the residual is then exactly the
    // divergence left after projection.
    let mut b = vec![0.0; g.cells()];
    crate::grid::divergence_into(u_star, &mut b);
    for x in &mut b {
        *x = -*x;
    }
    crate::linalg::remove_mean(&mut b);
    let mut q: Vec<f64> = match guess {
        Some(p) => p.values.iter().map(|v| v * dt).collect(),
        None => vec![0.0; g.cells()],
    };
    let rep = s.cell_neumann.solve(0.0, 1.0, 1.0, &b, &mut q, tol, max_iter_for(&g), true);
    if !rep.converged {
        return Err(SolverError::NotConverged {
            stage: Stage::Pressure,
            report: rep,
        });
    }
    let p = CellField {
        grid: g,
        values: q.iter().map(|v| v / dt).collect(),
        bc: Boundary::Neumann,
    };
    Ok((p, rep))
}

/// `u = u* - dt grad p`, walls re-pinned.
pub fn project(u_star: &MacVelocity, p: &CellField, dt: f64) -> MacVelocity {
    let gp = gradient_cc(p);
    let mut out = FaceField {
        grid: u_star.grid,
        u: u_star.u.iter().zip(&gp.u).map(|(a, b)| a - dt * b).collect(),
        v: u_star.v.iter().zip(&gp.v).map(|(a, b)| a - dt * b).collect(),
    };
    out.pin_walls();
    out
}
