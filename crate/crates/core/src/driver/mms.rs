//! Manufactured-solution convergence studies.
//!
//! Exact fields on the unit square, with `c(t) = 1 + sin(t)/2` and
//! `s(z) = sin(pi z)`:
//! `theta = At c s(x) s(y)`, `phi = -1 + Ap c s(x) s(y)`, and a velocity
//! from the stream function `Au c s(x)^2 s(y)^2`, zero pressure. All
//! satisfy the wall conditions, so only interior sources are needed.

use std::f64::consts::PI;

use crate::flow::SolverError;
use crate::grid::{Boundary, CellField, FaceField, Grid};
use crate::model::{potential_derivative, potential_value, surface_tension, PhysicalParams};
use crate::scalar::{coupled_step_forced, heat_step_forced, phase_step_forced, Forcing, ScalarStepConfig};
use crate::state::{State, PHI_WALL, THETA_WALL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsCase {
    /// Temperature and phase field stepped separately with no flow,
    /// `dt` proportional to `h^2`.
    Diffusion,
    /// Fully coupled system with `dt` proportional to `h`.
    Coupled,
    /// Fully coupled system with `dt` proportional to `h^2`.
    CoupledSpatial,
    /// Unforced equilibrium; the error should sit at round-off.
    Rest,
}

impl MmsCase {
    pub fn name(self) -> &'static str {
        match self {
            MmsCase::Diffusion => "diffusion",
            MmsCase::Coupled => "coupled",
            MmsCase::CoupledSpatial => "coupled-spatial",
            MmsCase::Rest => "rest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [MmsCase::Diffusion, MmsCase::Coupled, MmsCase::CoupledSpatial, MmsCase::Rest]
            .into_iter()
            .find(|c| c.name() == s)
    }

    fn time_exponent(self) -> i32 {
        match self {
            MmsCase::Coupled | MmsCase::Rest => 1,
            MmsCase::Diffusion | MmsCase::CoupledSpatial => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsConfig {
    pub case: MmsCase,
    /// Cells per side on each rung.
    pub ladder: Vec<usize>,
    pub t_end: f64,
    /// `dt = dt_scale * h^q` with `q` fixed by the case.
    pub dt_scale: f64,
    pub params: PhysicalParams,
    pub amp_theta: f64,
    pub amp_phi: f64,
    pub amp_u: f64,
    pub step: ScalarStepConfig,
}

impl MmsConfig {
    pub fn new(case: MmsCase) -> Self {
        let params = PhysicalParams {
            eps: 0.25,
            ..PhysicalParams::default()
        };
        let (dt_scale, t_end) = match case {
            MmsCase::Diffusion | MmsCase::CoupledSpatial => (0.5, 0.1),
            MmsCase::Coupled | MmsCase::Rest => (0.25, 0.5),
        };
        Self {
            case,
            ladder: vec![32, 64, 128],
            t_end,
            dt_scale,
            params,
            amp_theta: 0.5,
            amp_phi: 1.0,
            amp_u: if case == MmsCase::Diffusion { 0.0 } else { 0.1 },
            step: ScalarStepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsRung {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub err_theta: f64,
    pub err_phi: f64,
    pub err_u: f64,
}

impl MmsRung {
    pub fn err_total(&self) -> f64 {
        self.err_theta + self.err_phi + self.err_u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsReport {
    pub case: MmsCase,
    pub rungs: Vec<MmsRung>,
}

fn order(e0: f64, e1: f64, n0: usize, n1: usize) -> f64 {
    (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln()
}

impl MmsReport {
    /// Observed orders between consecutive rungs for one error measure.
    pub fn orders(&self, err: impl Fn(&MmsRung) -> f64) -> Vec<f64> {
        self.rungs
            .windows(2)
            .map(|w| order(err(&w[0]), err(&w[1]), w[0].n, w[1].n))
            .collect()
    }

    pub fn orders_theta(&self) -> Vec<f64> {
        self.orders(|r| r.err_theta)
    }

    pub fn orders_phi(&self) -> Vec<f64> {
        self.orders(|r| r.err_phi)
    }

    pub fn orders_u(&self) -> Vec<f64> {
        self.orders(|r| r.err_u)
    }

    pub fn orders_total(&self) -> Vec<f64> {
        self.orders(MmsRung::err_total)
    }

    pub fn max_error(&self) -> f64 {
        self.rungs
            .iter()
            .map(|r| r.err_theta.max(r.err_phi).max(r.err_u))
            .fold(0.0, f64::max)
    }
}

/// Value, first derivatives, Laplacian and time derivative of a scalar.
#[derive(Debug, Clone, Copy)]
struct Jet {
    f: f64,
    fx: f64,
    fy: f64,
    lap: f64,
    ft: f64,
}

/// Velocity components with the derivatives the momentum source needs.
#[derive(Debug, Clone, Copy)]
struct VelJet {
    u: Jet,
    v: Jet,
}

struct Exact<'a> {
    cfg: &'a MmsConfig,
}

fn c(t: f64) -> f64 {
    1.0 + 0.5 * t.sin()
}

fn dc(t: f64) -> f64 {
    0.5 * t.cos()
}

impl Exact<'_> {
    fn bump(&self, amp: f64, base: f64, x: f64, y: f64, t: f64) -> Jet {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (cx, cy) = ((PI * x).cos(), (PI * y).cos());
        let a = amp * c(t);
        Jet {
            f: base + a * sx * sy,
            fx: a * PI * cx * sy,
            fy: a * PI * sx * cy,
            lap: -2.0 * PI * PI * a * sx * sy,
            ft: amp * dc(t) * sx * sy,
        }
    }

    fn theta(&self, x: f64, y: f64, t: f64) -> Jet {
        self.bump(self.cfg.amp_theta, 0.0, x, y, t)
    }

    fn phi(&self, x: f64, y: f64, t: f64) -> Jet {
        self.bump(self.cfg.amp_phi, -1.0, x, y, t)
    }

    fn vel(&self, x: f64, y: f64, t: f64) -> VelJet {
        let a = self.cfg.amp_u * c(t);
        let at = self.cfg.amp_u * dc(t);
        let (sx2, sy2) = ((PI * x).sin().powi(2), (PI * y).sin().powi(2));
        let (s2x, s2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).sin());
        let (c2x, c2y) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos());
        let (p2, p3) = (PI * PI, PI * PI * PI);
        // u = psi_y, v = -psi_x with psi = a s(x)^2 s(y)^2.
        let u = Jet {
            f: a * PI * sx2 * s2y,
            fx: a * p2 * s2x * s2y,
            fy: a * 2.0 * p2 * sx2 * c2y,
            lap: a * (2.0 * p3 * c2x * s2y - 4.0 * p3 * sx2 * s2y),
            ft: at * PI * sx2 * s2y,
        };
        let v = Jet {
            f: -a * PI * s2x * sy2,
            fx: -a * 2.0 * p2 * c2x * sy2,
            fy: -a * p2 * s2x * s2y,
            lap: -a * (-4.0 * p3 * s2x * sy2 + 2.0 * p3 * s2x * c2y),
            ft: -at * PI * s2x * sy2,
        };
        VelJet { u, v }
    }

    fn theta_source(&self, x: f64, y: f64, t: f64) -> f64 {
        let th = self.theta(x, y, t);
        let w = self.vel(x, y, t);
        th.ft + w.u.f * th.fx + w.v.f * th.fy - self.cfg.params.k * th.lap
    }

    fn phi_source(&self, x: f64, y: f64, t: f64) -> f64 {
        let p = &self.cfg.params;
        let ph = self.phi(x, y, t);
        let w = self.vel(x, y, t);
        ph.ft + w.u.f * ph.fx + w.v.f * ph.fy - p.gamma * (ph.lap - potential_derivative(ph.f, p.eps))
    }

    /// Capillary plus Marangoni force of the exact fields.
    fn force(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let p = &self.cfg.params;
        let ph = self.phi(x, y, t);
        let th = self.theta(x, y, t);
        let mu = -ph.lap + potential_derivative(ph.f, p.eps);
        let lam = surface_tension(th.f, p);
        let fb = potential_value(ph.f, p.eps);
        let cb = p.lambda0 * p.b;
        let fx = lam * mu * ph.fx + cb * (0.5 * th.fx * (ph.fx * ph.fx - ph.fy * ph.fy) + th.fy * ph.fx * ph.fy - fb * th.fx);
        let fy = lam * mu * ph.fy + cb * (0.5 * th.fy * (ph.fy * ph.fy - ph.fx * ph.fx) + th.fx * ph.fx * ph.fy - fb * th.fy);
        (fx, fy)
    }

    fn momentum_source(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let p = &self.cfg.params;
        let w = self.vel(x, y, t);
        let (fx, fy) = self.force(x, y, t);
        let th = self.theta(x, y, t);
        let (u, v) = (w.u, w.v);
        let mx = u.ft + u.f * u.fx + v.f * u.fy - p.nu * u.lap - fx;
        let my = v.ft + u.f * v.fx + v.f * v.fy - p.nu * v.lap - fy - p.alpha * p.g * th.f;
        (mx, my)
    }

    fn state(&self, g: Grid, t: f64) -> State {
        let mut s = State::rest(g);
        s.t = t;
        if self.cfg.case == MmsCase::Rest {
            return s;
        }
        s.theta = CellField::from_fn(g, Boundary::Dirichlet(THETA_WALL), |x, y| self.theta(x, y, t).f);
        s.phi = CellField::from_fn(g, Boundary::Dirichlet(PHI_WALL), |x, y| self.phi(x, y, t).f);
        s.u = FaceField::from_fns(g, |x, y| self.vel(x, y, t).u.f, |x, y| self.vel(x, y, t).v.f);
        s.u.pin_walls();
        s
    }
}

fn rung(cfg: &MmsConfig, n: usize) -> Result<MmsRung, SolverError> {
    let g = Grid::square(n);
    let ex = Exact { cfg };
    let h = 1.0 / n as f64;
    let nominal = cfg.dt_scale * h.powi(cfg.case.time_exponent());
    let steps = ((cfg.t_end / nominal).ceil() as usize).max(1);
    let dt = cfg.t_end / steps as f64;
    let step = ScalarStepConfig { dt, ..cfg.step };
    let p = &cfg.params;

    let mut s = ex.state(g, 0.0);
    let zero_w = FaceField::zeros(g);
    for k in 1..=steps {
        let t1 = k as f64 * dt;
        if cfg.case == MmsCase::Rest {
            s = coupled_step_forced(&s, p, &step, Forcing::default())?;
            continue;
        }
        let st = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| ex.theta_source(x, y, t1));
        let sp = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| ex.phi_source(x, y, t1));
        if cfg.case == MmsCase::Diffusion {
            s.theta = heat_step_forced(&s.theta, &zero_w, p, &step, Some(&st))?;
            s.phi = phase_step_forced(&s.phi, &zero_w, p, &step, Some(&sp))?;
            s.t = t1;
        } else {
            let mut sm = FaceField::from_fns(g, |x, y| ex.momentum_source(x, y, t1).0, |x, y| ex.momentum_source(x, y, t1).1);
            sm.pin_walls();
            let forcing = Forcing {
                theta: Some(&st),
                phi: Some(&sp),
                momentum: Some(&sm),
            };
            s = coupled_step_forced(&s, p, &step, forcing)?;
        }
    }

    let exact = ex.state(g, cfg.t_end);
    let e_theta = s.theta.sub(&exact.theta).l2_norm();
    let e_phi = s.phi.sub(&exact.phi).l2_norm();
    let e_u = s.u.sub(&exact.u).l2_norm();
    Ok(MmsRung {
        n,
        dt,
        steps,
        err_theta: e_theta,
        err_phi: e_phi,
        err_u: e_u,
    })
}

pub fn mms_convergence(cfg: &MmsConfig) -> Result<MmsReport, SolverError> {
    let rungs = cfg.ladder.iter().map(|&n| rung(cfg, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(MmsReport { case: cfg.case, rungs })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Finite-difference check of the analytic derivatives.
    #[test]
    fn jets_match_finite_differences() {
        let cfg = MmsConfig::new(MmsCase::Coupled);
        let ex = Exact { cfg: &cfg };
        let (x, y, t, h) = (0.31, 0.67, 0.4, 1e-4);
        let check = |f: &dyn Fn(f64, f64, f64) -> Jet| {
            let j = f(x, y, t);
            let d = |a: f64, b: f64| (a - b) / (2.0 * h);
            assert!((j.fx - d(f(x + h, y, t).f, f(x - h, y, t).f)).abs() < 1e-6);
            assert!((j.fy - d(f(x, y + h, t).f, f(x, y - h, t).f)).abs() < 1e-6);
            assert!((j.ft - d(f(x, y, t + h).f, f(x, y, t - h).f)).abs() < 1e-6);
            let lap = (f(x + h, y, t).f + f(x - h, y, t).f + f(x, y + h, t).f + f(x, y - h, t).f - 4.0 * j.f) / (h * h);
            assert!((j.lap - lap).abs() < 1e-4 * (1.0 + j.lap.abs()), "{} vs {}", j.lap, lap);
        };
        check(&|x, y, t| ex.theta(x, y, t));
        check(&|x, y, t| ex.phi(x, y, t));
        check(&|x, y, t| ex.vel(x, y, t).u);
        check(&|x, y, t| ex.vel(x, y, t).v);
        let w = ex.vel(x, y, t);
        assert!((w.u.fx + w.v.fy).abs() < 1e-12);
    }

    #[test]
    fn rest_case_stays_at_roundoff() {
        let cfg = MmsConfig {
            ladder: vec![16, 32],
            t_end: 0.1,
            ..MmsConfig::new(MmsCase::Rest)
        };
        let r = mms_convergence(&cfg).unwrap();
        assert!(r.max_error() < 1e-12, "{}", r.max_error());
    }
}
