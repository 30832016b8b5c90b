//! Named initial conditions.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::smooth_bump;
use crate::grid::{Boundary, CellField, Grid};
use crate::state::{State, PHI_WALL, THETA_WALL};

use super::config::{IcSpec, Preset};

fn theta_bump(g: Grid, amp: f64) -> CellField {
    smooth_bump(g, 0.4, 0.6, Boundary::Dirichlet(THETA_WALL)).scale(amp)
}

/// Random smooth field built from the lowest sine modes, rescaled to unit
/// sup-norm.
fn random_modes(g: Grid, rng: &mut ChaCha8Rng, bc: Boundary) -> CellField {
    let mut c = [[0.0; 4]; 4];
    for (m, row) in c.iter_mut().enumerate() {
        for (n, v) in row.iter_mut().enumerate() {
            *v = rng.gen_range(-1.0..1.0) / ((m + 1) * (n + 1)) as f64;
        }
    }
    let f = CellField::from_fn(g, bc, |x, y| {
        let mut s = 0.0;
        for (m, row) in c.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                s += v * ((m + 1) as f64 * PI * x / g.lx).sin() * ((n + 1) as f64 * PI * y / g.ly).sin();
            }
        }
        s
    });
    let m = f.linf_norm();
    if m > 0.0 {
        f.scale(1.0 / m)
    } else {
        f
    }
}

pub fn initial_state(g: Grid, ic: &IcSpec, eps: f64, seed: u64) -> State {
    let mut s = State::rest(g);
    let phi_bc = Boundary::Dirichlet(PHI_WALL);
    let w = SQRT_2 * eps;
    match ic.preset {
        Preset::Flat => {
            s.theta = theta_bump(g, ic.theta_amp);
        }
        Preset::Bubble => {
            let (cx, cy) = (0.5 * g.lx, 0.5 * g.ly);
            s.phi = CellField::from_fn(g, phi_bc, |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                let r = dx.hypot(dy);
                let ang = dy.atan2(dx);
                let big_r = ic.radius * (1.0 + ic.wobble * (2.0 * ang).cos());
                ((big_r - r) / w).tanh()
            });
            s.theta = theta_bump(g, ic.theta_amp);
        }
        Preset::Stratified => {
            let h = ic.height * g.ly;
            s.phi = CellField::from_fn(g, phi_bc, |_, y| ((h - y) / w).tanh());
            s.theta = theta_bump(g, ic.theta_amp);
        }
        Preset::EigenmodeTheta => {
            s.theta = CellField::from_fn(g, Boundary::Dirichlet(THETA_WALL), |x, y| {
                ic.theta_amp * (PI * x / g.lx).sin() * (PI * y / g.ly).sin()
            });
        }
        Preset::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            s.phi = random_modes(g, &mut rng, phi_bc).map(|v| (2.0 * v).tanh());
            s.theta = random_modes(g, &mut rng, Boundary::Dirichlet(THETA_WALL)).scale(ic.theta_amp);
        }
    }
    s
}
