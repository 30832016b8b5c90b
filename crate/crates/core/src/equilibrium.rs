//! Stationary Allen-Cahn problem `-lap phi + F'(phi) = 0`, `phi = -1` on
//! the walls: damped Newton, a gradient-flow oracle, distances to
//! equilibrium and the stability experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::energy::{phase_energy, total_energy};
use crate::flow::{chemical_potential, SolverError};
use crate::grid::{l2_cells, laplacian_cc, laplacian_into, velocity_gradient_sq, Boundary, CellField, FaceField, Grid};
use crate::linalg::BandMatrix;
use crate::model::{energy_weights, potential_second_derivative, PhysicalParams};
use crate::scalar::{coupled_step, phase_step, ScalarStepConfig};
use crate::state::{State, PHI_WALL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("Newton stagnated after {iterations} iterations at residual {residual:.3e}; try the gradient-flow oracle")]
    Stagnated { iterations: usize, residual: f64 },
    #[error("Newton Jacobian is singular at iteration {iteration}; try the gradient-flow oracle")]
    Singular { iteration: usize },
    #[error("no convergence within {iterations} iterations (residual {residual:.3e})")]
    IterationCap { iterations: usize, residual: f64 },
    #[error("gradient-flow step {dt_flow} exceeds the stability limit {limit}")]
    StepTooLarge { dt_flow: f64, limit: f64 },
    #[error("gradient-flow energy increased by {increase:.3e} at step {step}")]
    EnergyIncrease { step: usize, increase: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("perturbation scale must be non-negative")]
    BadScale,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    GradientFlow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub phi_inf: CellField,
    /// `|-lap phi + F'(phi)|` in the cell-weighted L2 norm.
    pub residual_l2: f64,
    pub iterations: usize,
    pub method: Method,
    /// Power-method estimate of the smallest eigenvalue of the linearized
    /// operator; positive suggests a local minimizer (heuristic).
    pub min_eigenvalue: f64,
}

impl EquilibriumSolution {
    pub fn likely_local_minimizer(&self) -> bool {
        self.min_eigenvalue > 0.0
    }
}

fn with_wall_bc(phi: &CellField) -> CellField {
    CellField {
        bc: Boundary::Dirichlet(PHI_WALL),
        ..phi.clone()
    }
}

/// Residual `-lap phi + F'(phi)` and its L2 norm.
pub fn stationary_residual(phi: &CellField, eps: f64) -> (Vec<f64>, f64) {
    let r = chemical_potential(phi, eps).values;
    let n = l2_cells(&phi.grid, &r);
    (r, n)
}

/// Cell ordering that keeps the Jacobian bandwidth at `min(nx, ny)`.
struct Ordering {
    g: Grid,
    transposed: bool,
}

impl Ordering {
    fn new(g: Grid) -> Self {
        Self {
            g,
            transposed: g.nx > g.ny,
        }
    }

    fn band(&self) -> usize {
        self.g.nx.min(self.g.ny)
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        if self.transposed {
            j + self.g.ny * i
        } else {
            i + self.g.nx * j
        }
    }
}

fn jacobian(phi: &CellField, eps: f64, ord: &Ordering) -> BandMatrix {
    let g = phi.grid;
    let b = ord.band();
    let mut m = BandMatrix::new(g.cells(), b, b);
    let (ax, ay) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = ord.pos(i, j);
            let mut d = potential_second_derivative(phi.at(i, j), eps);
            let mut link = |q: Option<usize>, a: f64| match q {
                Some(q) => {
                    d += a;
                    m.set(p, q, -a);
                }
                // Dirichlet ghost 2g - c doubles the wall coupling.
                None => d += 2.0 * a,
            };
            link((i > 0).then(|| ord.pos(i - 1, j)), ax);
            link((i + 1 < g.nx).then(|| ord.pos(i + 1, j)), ax);
            link((j > 0).then(|| ord.pos(i, j - 1)), ay);
            link((j + 1 < g.ny).then(|| ord.pos(i, j + 1)), ay);
            m.set(p, p, d);
        }
    }
    m
}

/// Applies `-lap + F''(phi)` with homogeneous walls.
fn apply_linearized(phi: &CellField, eps: f64, x: &[f64], out: &mut [f64]) {
    laplacian_into(&phi.grid, Boundary::Dirichlet(0.0), x, out);
    for ((o, xi), &p) in out.iter_mut().zip(x).zip(&phi.values) {
        *o = -*o + potential_second_derivative(p, eps) * xi;
    }
}

/// Smallest eigenvalue of `-lap + F''(phi)` by 50 power iterations on
/// the Gershgorin-shifted operator `sigma I - J`.
pub fn min_eigenvalue_estimate(phi: &CellField, eps: f64) -> f64 {
    let g = phi.grid;
    let (ax, ay) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    let fpp_max = phi
        .values
        .iter()
        .map(|&p| potential_second_derivative(p, eps))
        .fold(f64::NEG_INFINITY, f64::max);
    let sigma = fpp_max + 4.0 * (ax + ay);
    let n = g.cells();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut rho = 0.0;
    for _ in 0..50 {
        apply_linearized(phi, eps, &x, &mut y);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = sigma * xi - *yi;
        }
        rho = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / nrm;
        }
    }
    sigma - rho
}

fn newton_direction(phi: &CellField, r: &[f64], eps: f64, shift: f64, ord: &Ordering, it: usize) -> Result<Vec<f64>, EquilibriumError> {
    let g = phi.grid;
    let mut jac = jacobian(phi, eps, ord);
    if shift != 0.0 {
        for k in 0..g.cells() {
            jac.set(k, k, jac.get(k, k) + shift);
        }
    }
    jac.factor().map_err(|_| EquilibriumError::Singular { iteration: it })?;
    let mut step = vec![0.0; r.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            step[ord.pos(i, j)] = -r[g.idx(i, j)];
        }
    }
    jac.solve(&mut step);
    let mut delta = vec![0.0; r.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            delta[g.idx(i, j)] = step[ord.pos(i, j)];
        }
    }
    Ok(delta)
}

/// Halves the step up to 50 times until `merit` drops below `current`.
/// Returns the accepted iterate and whether the full step was taken.
fn backtrack(phi: &CellField, delta: &[f64], current: f64, merit: impl Fn(&CellField) -> f64) -> Option<(CellField, bool)> {
    let mut alpha = 1.0;
    for _ in 0..=50 {
        let trial = CellField {
            values: phi.values.iter().zip(delta).map(|(p, d)| p + alpha * d).collect(),
            ..phi.clone()
        };
        if merit(&trial) < current {
            return Some((trial, alpha == 1.0));
        }
        alpha *= 0.5;
    }
    None
}

/// Damped Newton on the discrete stationary residual with backtracking
/// on its norm.
///
/// Where the Jacobian is indefinite the Newton direction can stall in a
/// local minimum of the residual norm. The iteration then switches to
/// shifted steps `(J + tau) d = -R`, which for `tau >= 1/eps^2` descend
/// the free energy, backtracking on the energy. `tau` shrinks after every
/// full step and plain Newton resumes once it is negligible.
pub fn solve_stationary(phi_init: &CellField, params: &PhysicalParams, tol: f64) -> Result<EquilibriumSolution, EquilibriumError> {
    const MAX_ITER: usize = 500;
    let eps = params.eps;
    let ord = Ordering::new(phi_init.grid);
    let shift = 2.0 / (eps * eps);
    let mut tau = 0.0;
    let mut phi = with_wall_bc(phi_init);
    let (mut r, mut rn) = stationary_residual(&phi, eps);
    let mut it = 0;
    while rn > tol {
        if it == MAX_ITER {
            return Err(EquilibriumError::IterationCap {
                iterations: it,
                residual: rn,
            });
        }
        it += 1;
        if tau == 0.0 {
            let delta = newton_direction(&phi, &r, eps, 0.0, &ord, it)?;
            match backtrack(&phi, &delta, rn, |t| stationary_residual(t, eps).1) {
                Some((next, _)) => phi = next,
                None => tau = shift,
            }
        } else {
            let delta = newton_direction(&phi, &r, eps, tau, &ord, it)?;
            let e = phase_energy(&phi, eps);
            match backtrack(&phi, &delta, e, |t| phase_energy(t, eps)) {
                Some((next, full)) => {
                    phi = next;
                    if full {
                        tau *= 0.25;
                        if tau < 1e-6 * shift {
                            tau = 0.0;
                        }
                    }
                }
                None => {
                    tau *= 4.0;
                    if tau > 1e12 * shift {
                        return Err(EquilibriumError::Stagnated {
                            iterations: it,
                            residual: rn,
                        });
                    }
                }
            }
        }
        (r, rn) = stationary_residual(&phi, eps);
    }
    let min_eigenvalue = min_eigenvalue_estimate(&phi, eps);
    Ok(EquilibriumSolution {
        phi_inf: phi,
        residual_l2: rn,
        iterations: it,
        method: Method::Newton,
        min_eigenvalue,
    })
}

/// Upper limit on the gradient-flow step.
pub fn gradient_flow_step_limit(params: &PhysicalParams) -> f64 {
    params.eps * params.eps / (2.0 * params.gamma)
}

/// Brute-force equilibrium: the stabilized phase step with zero velocity,
/// iterated until both the rate `|phi' - phi| / dt` and the stationary
/// residual fall below `tol`. Errors if the free energy ever rises.
pub fn gradient_flow_oracle(
    phi_init: &CellField,
    params: &PhysicalParams,
    tol: f64,
    dt_flow: f64,
) -> Result<EquilibriumSolution, EquilibriumError> {
    const MAX_STEPS: usize = 2_000_000;
    let limit = gradient_flow_step_limit(params);
    if dt_flow > limit {
        return Err(EquilibriumError::StepTooLarge { dt_flow, limit });
    }
    let g = phi_init.grid;
    let cfg = ScalarStepConfig {
        dt: dt_flow,
        stab: 2.0,
        helmholtz_tol: 1e-13,
        poisson_tol: 1e-13,
    };
    let w = FaceField::zeros(g);
    let mut phi = with_wall_bc(phi_init);
    let e0 = phase_energy(&phi, params.eps);
    let mut e = e0;
    let (_, mut rn) = stationary_residual(&phi, params.eps);
    let mut rate = 0.0;
    let mut step = 0;
    while rn > tol || rate > tol {
        if step == MAX_STEPS {
            return Err(EquilibriumError::IterationCap {
                iterations: step,
                residual: rn,
            });
        }
        step += 1;
        let next = phase_step(&phi, &w, params, &cfg)?;
        let en = phase_energy(&next, params.eps);
        if en - e > 1e-12 * e0 {
            return Err(EquilibriumError::EnergyIncrease { step, increase: en - e });
        }
        rate = next.sub(&phi).l2_norm() / dt_flow;
        phi = next;
        e = en;
        rn = stationary_residual(&phi, params.eps).1;
    }
    let min_eigenvalue = min_eigenvalue_estimate(&phi, params.eps);
    Ok(EquilibriumSolution {
        phi_inf: phi,
        residual_l2: rn,
        iterations: step,
        method: Method::GradientFlow,
        min_eigenvalue,
    })
}

/// Distances `(|u|_H1, |phi - phi_inf|_H1 + |lap(phi - phi_inf)|, |theta| + |lap theta|)`.
pub fn steady_state_distance(state: &State, eq: &EquilibriumSolution) -> Result<(f64, f64, f64), EquilibriumError> {
    if state.grid() != eq.phi_inf.grid || !state.same_grid() {
        return Err(EquilibriumError::GridMismatch);
    }
    let du = (state.u.dot(&state.u) + velocity_gradient_sq(&state.u)).sqrt();
    let d = state.phi.sub(&eq.phi_inf);
    let l2 = d.l2_norm();
    let h1 = d.h1_seminorm();
    let dphi = (l2 * l2 + h1 * h1).sqrt() + laplacian_cc(&d).l2_norm();
    let dtheta = state.theta.l2_norm() + laplacian_cc(&state.theta).l2_norm();
    Ok((du, dphi, dtheta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    pub params: PhysicalParams,
    pub step: ScalarStepConfig,
    pub t_end: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Initial `(|u0|, |phi0 - phi*|, |theta0|)`.
    pub perturbation_size: (f64, f64, f64),
    /// `sup_t |phi(t) - phi*|_H1`.
    pub max_excursion: f64,
    /// `|E(T) - E(0, phi*, 0)|` in the total-energy convention.
    pub final_energy_gap: f64,
    /// `|phi(T) - phi*|` in L2.
    pub converged_to: f64,
}

/// Smooth bump supported in a disc of radius `0.3 min(lx, ly)` around
/// `(cx, cy)` given in domain fractions; peak value one.
pub fn smooth_bump(g: Grid, cx: f64, cy: f64, bc: Boundary) -> CellField {
    let r0 = 0.3 * g.lx.min(g.ly);
    let (x0, y0) = (cx * g.lx, cy * g.ly);
    CellField::from_fn(g, bc, |x, y| {
        let s = ((x - x0).powi(2) + (y - y0).powi(2)) / (r0 * r0);
        if s < 1.0 {
            (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    })
}

/// Divergence-free velocity with unit L2 norm from a random stream
/// function that vanishes on the walls.
pub fn solenoidal_noise(g: Grid, seed: u64) -> FaceField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (lx, ly) = (g.lx, g.ly);
    let w = FaceField::from_stream_function(g, |x, y| {
        let mut s = 0.0;
        for m in 0..3 {
            for n in 0..3 {
                s += coef[3 * m + n]
                    * (std::f64::consts::PI * (m + 1) as f64 * x / lx).sin()
                    * (std::f64::consts::PI * (n + 1) as f64 * y / ly).sin();
            }
        }
        s
    });
    let mut w = w;
    w.pin_walls();
    let n = w.l2_norm();
    if n > 0.0 {
        w.scale(1.0 / n)
    } else {
        w
    }
}

/// Runs the coupled system from `(scale * noise, phi* + scale * bump,
/// scale * bump)` and measures how far `phi` strays from `phi*`.
pub fn stability_experiment(
    base: &EquilibriumSolution,
    perturbation_scale: f64,
    cfg: &StabilityConfig,
) -> Result<StabilityReport, EquilibriumError> {
    if !(perturbation_scale >= 0.0) {
        return Err(EquilibriumError::BadScale);
    }
    let g = base.phi_inf.grid;
    let p = &cfg.params;
    let star = &base.phi_inf;
    let weights = energy_weights(p);

    let mut ref_state = State::rest(g);
    ref_state.phi = star.clone();
    let e_ref = total_energy(&ref_state, weights, p).total;

    let mut s = State::rest(g);
    s.u = solenoidal_noise(g, cfg.seed).scale(perturbation_scale);
    let bump = smooth_bump(g, 0.5, 0.5, Boundary::Dirichlet(0.0));
    s.phi = CellField {
        values: star
            .values
            .iter()
            .zip(&bump.values)
            .map(|(a, b)| a + perturbation_scale * b)
            .collect(),
        ..star.clone()
    };
    s.theta = smooth_bump(g, 0.4, 0.6, Boundary::Dirichlet(0.0)).scale(perturbation_scale);

    let excursion = |phi: &CellField| {
        let d = phi.sub(star);
        let (a, b) = (d.l2_norm(), d.h1_seminorm());
        (a * a + b * b).sqrt()
    };
    let size = (s.u.l2_norm(), s.phi.sub(star).l2_norm(), s.theta.l2_norm());
    let mut max_excursion = excursion(&s.phi);
    let steps = (cfg.t_end / cfg.step.dt).round() as usize;
    for _ in 0..steps {
        s = coupled_step(&s, p, &cfg.step)?;
        max_excursion = max_excursion.max(excursion(&s.phi));
    }
    let e_end = total_energy(&s, weights, p).total;
    Ok(StabilityReport {
        perturbation_size: size,
        max_excursion,
        final_energy_gap: (e_end - e_ref).abs(),
        converged_to: s.phi.sub(star).l2_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(eps: f64) -> PhysicalParams {
        PhysicalParams {
            eps,
            ..PhysicalParams::default()
        }
    }

    #[test]
    fn pure_phase_is_immediate() {
        let g = Grid::square(16);
        let phi = CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0));
        let s = solve_stationary(&phi, &params(0.1), 1e-10).unwrap();
        assert!(s.iterations <= 1);
        assert_eq!(s.residual_l2, 0.0);
        assert!(s.likely_local_minimizer());
        let f = gradient_flow_oracle(&phi, &params(0.1), 1e-10, 1e-3).unwrap();
        assert_eq!(f.iterations, 0);
    }

    #[test]
    fn jacobian_matches_linearized_operator() {
        let g = Grid::new(7, 5, 1.0, 0.8).unwrap();
        let phi = CellField::from_fn(g, Boundary::Dirichlet(-1.0), |x, y| (3.0 * x + y).sin());
        for g2 in [g, Grid::new(5, 7, 0.8, 1.0).unwrap()] {
            let phi = CellField::from_fn(g2, Boundary::Dirichlet(-1.0), |x, y| (3.0 * x + y).sin());
            let ord = Ordering::new(g2);
            let jac = jacobian(&phi, 0.3, &ord);
            let x: Vec<f64> = (0..g2.cells()).map(|k| ((k * 7) % 11) as f64 - 5.0).collect();
            let mut y = vec![0.0; g2.cells()];
            apply_linearized(&phi, 0.3, &x, &mut y);
            for jj in 0..g2.ny {
                for ii in 0..g2.nx {
                    let p = ord.pos(ii, jj);
                    let mut s = 0.0;
                    for j2 in 0..g2.ny {
                        for i2 in 0..g2.nx {
                            s += jac.get(p, ord.pos(i2, j2)) * x[g2.idx(i2, j2)];
                        }
                    }
                    assert!((s - y[g2.idx(ii, jj)]).abs() < 1e-9);
                }
            }
        }
        let _ = phi;
    }

    #[test]
    fn newton_converges_from_smooth_init() {
        let g = Grid::square(24);
        let p = params(0.1);
        let init = CellField::from_fn(g, Boundary::Dirichlet(-1.0), |x, y| 1.8 * (PI * x).sin() * (PI * y).sin() - 1.0);
        let s = solve_stationary(&init, &p, 1e-10).unwrap();
        assert!(stationary_residual(&s.phi_inf, p.eps).1 <= 1e-10);
        assert!(s.phi_inf.linf_norm() <= 1.0 + 1e-6);
    }

    #[test]
    fn gradient_flow_agrees_with_newton() {
        let g = Grid::square(16);
        let p = params(0.15);
        let init = CellField::from_fn(g, Boundary::Dirichlet(-1.0), |x, y| 0.9 * (PI * x).sin() * (2.0 * PI * y).sin());
        let n = solve_stationary(&init, &p, 1e-10);
        let f = gradient_flow_oracle(&init, &p, 1e-9, gradient_flow_step_limit(&p)).unwrap();
        assert!(f.residual_l2 <= 1e-9);
        let n = n.unwrap_or_else(|_| solve_stationary(&f.phi_inf, &p, 1e-10).unwrap());
        assert!(n.phi_inf.sub(&f.phi_inf).l2_norm() <= 1e-4);
    }

    #[test]
    fn gradient_flow_rejects_large_steps() {
        let g = Grid::square(8);
        let p = params(0.1);
        let phi = CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0));
        assert!(matches!(
            gradient_flow_oracle(&phi, &p, 1e-8, 1.0),
            Err(EquilibriumError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn distances() {
        let g = Grid::square(16);
        let p = params(0.1);
        let eq = solve_stationary(&CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0)), &p, 1e-10).unwrap();
        let mut s = State::rest(g);
        assert_eq!(steady_state_distance(&s, &eq).unwrap(), (0.0, 0.0, 0.0));
        s.u = solenoidal_noise(g, 1);
        let (du, dp, dt) = steady_state_distance(&s, &eq).unwrap();
        assert!(du > 0.0 && dp == 0.0 && dt == 0.0);
        s.theta = smooth_bump(g, 0.5, 0.5, Boundary::Dirichlet(0.0));
        let d1 = steady_state_distance(&s, &eq).unwrap().2;
        s.theta = s.theta.scale(2.0);
        assert_eq!(steady_state_distance(&s, &eq).unwrap().2, 2.0 * d1);
        let other = State::rest(Grid::square(8));
        assert_eq!(steady_state_distance(&other, &eq), Err(EquilibriumError::GridMismatch));
    }

    #[test]
    fn zero_perturbation_stays_put() {
        let g = Grid::square(16);
        let p = params(0.1);
        let eq = solve_stationary(&CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0)), &p, 1e-10).unwrap();
        let cfg = StabilityConfig {
            params: p,
            step: ScalarStepConfig {
                dt: 1e-3,
                ..ScalarStepConfig::default()
            },
            t_end: 0.05,
            seed: 5,
        };
        let r = stability_experiment(&eq, 0.0, &cfg).unwrap();
        assert_eq!(r.max_excursion, 0.0);
        assert!(r.final_energy_gap <= 1e-14);
    }

    #[test]
    fn noise_is_divergence_free_with_unit_norm() {
        let g = Grid::new(20, 16, 1.0, 0.8).unwrap();
        let w = solenoidal_noise(g, 9);
        assert!((w.l2_norm() - 1.0).abs() < 1e-12);
        assert!(crate::grid::divergence_mac(&w).linf_norm() < 1e-10);
        assert!(w.walls_are_zero());
    }
}
