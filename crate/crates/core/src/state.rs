//! Discrete state at one time level and per-grid solver caches.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::grid::{Boundary, CellField, FaceField, Grid, MacVelocity};
use crate::linalg::{SeparableOperator, Stencil1d};

/// Boundary value of the phase field on every wall.
pub const PHI_WALL: f64 = -1.0;
/// Boundary value of the temperature on every wall.
pub const THETA_WALL: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: MacVelocity,
    /// Pressure, zero mean, Neumann walls.
    pub p: CellField,
    pub phi: CellField,
    pub theta: CellField,
}

impl State {
    /// Fluid at rest, pure phase `phi = -1`, zero temperature.
    pub fn rest(grid: Grid) -> Self {
        Self {
            t: 0.0,
            u: FaceField::zeros(grid),
            p: CellField::zeros(grid, Boundary::Neumann),
            phi: CellField::constant(grid, PHI_WALL, Boundary::Dirichlet(PHI_WALL)),
            theta: CellField::zeros(grid, Boundary::Dirichlet(THETA_WALL)),
        }
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid
    }

    pub fn same_grid(&self) -> bool {
        let g = self.grid();
        self.u.grid == g && self.p.grid == g && self.theta.grid == g
    }
}

/// Constant-coefficient operators of one grid, each with its exact
/// fast-diagonalization inverse.
#[derive(Debug)]
pub struct GridSolvers {
    /// Cell-centred unknowns with Dirichlet walls.
    pub cell_dirichlet: SeparableOperator,
    /// Cell-centred unknowns with zero-flux walls.
    pub cell_neumann: SeparableOperator,
    /// Interior vertical faces (x-velocity).
    pub u_faces: SeparableOperator,
    /// Interior horizontal faces (y-velocity).
    pub v_faces: SeparableOperator,
}

impl GridSolvers {
    pub fn new(g: &Grid) -> Self {
        let cdx = Stencil1d::CellDirichlet { n: g.nx, h: g.dx };
        let cdy = Stencil1d::CellDirichlet { n: g.ny, h: g.dy };
        Self {
            cell_dirichlet: SeparableOperator::new(cdx, cdy),
            cell_neumann: SeparableOperator::new(
                Stencil1d::CellNeumann { n: g.nx, h: g.dx },
                Stencil1d::CellNeumann { n: g.ny, h: g.dy },
            ),
            u_faces: SeparableOperator::new(Stencil1d::FaceDirichlet { n: g.nx, h: g.dx }, cdy),
            v_faces: SeparableOperator::new(cdx, Stencil1d::FaceDirichlet { n: g.ny, h: g.dy }),
        }
    }
}

/// Grid shape and the bit patterns of its extents.
type GridKey = (usize, usize, u64, u64);

thread_local! {
    static SOLVERS: RefCell<HashMap<GridKey, Rc<GridSolvers>>> = RefCell::new(HashMap::new());
}

/// Per-thread cached solvers for `g`.
pub fn solvers_for(g: &Grid) -> Rc<GridSolvers> {
    let key = (g.nx, g.ny, g.lx.to_bits(), g.ly.to_bits());
    SOLVERS.with(|c| c.borrow_mut().entry(key).or_insert_with(|| Rc::new(GridSolvers::new(g))).clone())
}

pub(crate) fn pack_u(g: &Grid, u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity((g.nx - 1) * g.ny);
    for j in 0..g.ny {
        out.extend_from_slice(&u[g.uidx(1, j)..g.uidx(g.nx, j)]);
    }
    out
}

pub(crate) fn unpack_u(g: &Grid, packed: &[f64], u: &mut [f64]) {
    let m = g.nx - 1;
    for j in 0..g.ny {
        u[g.uidx(0, j)] = 0.0;
        u[g.uidx(g.nx, j)] = 0.0;
        u[g.uidx(1, j)..g.uidx(g.nx, j)].copy_from_slice(&packed[m * j..m * (j + 1)]);
    }
}

pub(crate) fn pack_v(g: &Grid, v: &[f64]) -> Vec<f64> {
    v[g.vidx(0, 1)..g.vidx(0, g.ny)].to_vec()
}

pub(crate) fn unpack_v(g: &Grid, packed: &[f64], v: &mut [f64]) {
    for i in 0..g.nx {
        v[g.vidx(i, 0)] = 0.0;
        v[g.vidx(i, g.ny)] = 0.0;
    }
    v[g.vidx(0, 1)..g.vidx(0, g.ny)].copy_from_slice(packed);
}
