//! Per-step checks of pointwise bounds, incompressibility, CFL and
//! finiteness. Monitors report; they never modify fields.

use crate::grid::{divergence_mac, Grid, MacVelocity};
use crate::model::{smallness_threshold, surface_tension, PhysicalParams};
use crate::state::State;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub t: f64,
    pub max_abs_phi: f64,
    pub max_abs_theta: f64,
    pub div_u_inf: f64,
    pub cfl: f64,
    pub lambda_min: f64,
    /// Whether the initial data satisfy the smallness condition under the
    /// configured embedding-constant estimate. Always true when isothermal.
    pub smallness_ok: bool,
    pub violations: Vec<Violation>,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Summary of the initial condition the bounds are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub phi0_linf: f64,
    pub theta0_linf: f64,
}

impl Baseline {
    pub fn of(state: &State) -> Self {
        Self {
            phi0_linf: state.phi.linf_norm(),
            theta0_linf: state.theta.linf_norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub tol_phi: f64,
    pub tol_theta: f64,
    pub tol_div: f64,
}

impl Tolerances {
    /// Defaults derived from the linear-solve tolerances.
    pub fn from_solver(poisson_tol: f64, helmholtz_tol: f64) -> Self {
        Self {
            tol_phi: 1e-3,
            tol_theta: 10.0 * helmholtz_tol,
            tol_div: 10.0 * poisson_tol,
        }
    }
}

pub fn cfl_number(w: &MacVelocity, dt: f64, grid: &Grid) -> f64 {
    dt * (w.max_abs_u() / grid.dx + w.max_abs_v() / grid.dy)
}

/// Smallness verdict for initial data with the given sup-norms.
pub fn smallness_holds(baseline: &Baseline, params: &PhysicalParams) -> bool {
    match smallness_threshold(params) {
        Ok(th) => baseline.phi0_linf <= 1.0 && baseline.theta0_linf <= th,
        Err(_) => baseline.phi0_linf <= 1.0,
    }
}

pub fn check_state(state: &State, baseline: &Baseline, params: &PhysicalParams, tols: &Tolerances, dt: f64) -> MonitorReport {
    let g = state.grid();
    let mut violations = Vec::new();

    let fields: [(&str, &[f64]); 5] = [
        ("phi", &state.phi.values),
        ("theta", &state.theta.values),
        ("p", &state.p.values),
        ("u", &state.u.u),
        ("v", &state.u.v),
    ];
    for (name, vals) in fields {
        if let Some(&bad) = vals.iter().find(|x| !x.is_finite()) {
            violations.push(Violation {
                check: format!("finite_{name}"),
                value: bad,
                threshold: f64::MAX,
            });
        }
    }

    let max_abs_phi = state.phi.linf_norm();
    let max_abs_theta = state.theta.linf_norm();
    let div_u_inf = divergence_mac(&state.u).linf_norm();
    let cfl = cfl_number(&state.u, dt, &g);
    let lambda_min = state
        .theta
        .values
        .iter()
        .map(|&t| surface_tension(t, params))
        .fold(f64::INFINITY, f64::min);

    let mut check = |name: &str, value: f64, threshold: f64| {
        if value > threshold {
            violations.push(Violation {
                check: name.to_string(),
                value,
                threshold,
            });
        }
    };
    check("phi_bound", max_abs_phi, 1.0 + tols.tol_phi);
    check("theta_max_principle", max_abs_theta, baseline.theta0_linf + tols.tol_theta);
    check("divergence", div_u_inf, tols.tol_div);
    check("cfl", cfl, 1.0);
    if lambda_min <= 0.0 {
        violations.push(Violation {
            check: "surface_tension_positive".to_string(),
            value: lambda_min,
            threshold: 0.0,
        });
    }

    MonitorReport {
        t: state.t,
        max_abs_phi,
        max_abs_theta,
        div_u_inf,
        cfl,
        lambda_min,
        smallness_ok: smallness_holds(baseline, params),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, CellField, FaceField};

    fn tols() -> Tolerances {
        Tolerances::from_solver(1e-10, 1e-10)
    }

    #[test]
    fn rest_has_no_violations() {
        let s = State::rest(Grid::square(16));
        let r = check_state(&s, &Baseline::of(&s), &PhysicalParams::default(), &tols(), 1e-4);
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.smallness_ok);
    }

    #[test]
    fn nan_names_its_field() {
        let mut s = State::rest(Grid::square(16));
        let b = Baseline::of(&s);
        s.theta.values[37] = f64::NAN;
        let r = check_state(&s, &b, &PhysicalParams::default(), &tols(), 1e-4);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].check, "finite_theta");
    }

    #[test]
    fn grown_temperature_is_flagged() {
        let g = Grid::square(16);
        let mut s = State::rest(g);
        s.theta = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| 0.2 * (x * (1.0 - x) * y * (1.0 - y)).sqrt());
        let b = Baseline::of(&s);
        s.theta = s.theta.scale(1.01);
        let r = check_state(&s, &b, &PhysicalParams::default(), &tols(), 1e-4);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(v.check, "theta_max_principle");
        assert!(v.value > v.threshold);
        assert_eq!(v.threshold, b.theta0_linf + tols().tol_theta);
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::square(100);
        let mut w = FaceField::zeros(g);
        assert_eq!(cfl_number(&w, 0.1, &g), 0.0);
        w.u[g.uidx(50, 50)] = 1.0;
        assert!((cfl_number(&w, 0.005, &g) - 0.5).abs() < 1e-15);
        assert_eq!(cfl_number(&w, 0.01, &g), 2.0 * cfl_number(&w, 0.005, &g));
    }

    #[test]
    fn nonpositive_tension_is_flagged() {
        let g = Grid::square(8);
        let mut s = State::rest(g);
        let p = PhysicalParams::default();
        s.theta.values[10] = 2.5 * p.a / p.b;
        let r = check_state(&s, &Baseline::of(&s), &p, &tols(), 1e-4);
        assert!(r.violations.iter().any(|v| v.check == "surface_tension_positive"));
        assert!(!r.smallness_ok);
    }
}
