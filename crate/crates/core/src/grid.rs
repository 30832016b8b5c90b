//! Staggered (MAC) grid containers and second-order difference operators.
//!
//! Layout: scalars live at cell centres, index `i + nx * j`; the x-component
//! of a face field lives on vertical faces, index `i + (nx + 1) * j` with
//! `i in 0..=nx`; the y-component on horizontal faces, index `i + nx * j`
//! with `j in 0..=ny`. Rows run bottom to top.
//!
//! Dirichlet data is imposed through ghost cells `ghost = 2 g - interior`.
//! Discrete L2 norms use midpoint weights `dx * dy` at cell centres and on
//! interior faces; boundary faces carry half weight, which makes
//! `<lap f, f> = -|grad f|^2` hold exactly for the ghost-cell Laplacian.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 cells per axis, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("domain extents must be positive and finite, got {lx}x{ly}")]
    BadExtent { lx: f64, ly: f64 },
    #[error("fields live on different grids")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn square(n: usize) -> Self {
        Self::new(n, n, 1.0, 1.0).expect("valid square grid")
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn xf(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    #[inline]
    pub fn yf(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn u_len(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    #[inline]
    pub fn v_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn uidx(&self, i: usize, j: usize) -> usize {
        i + (self.nx + 1) * j
    }

    #[inline]
    pub fn vidx(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }
}

/// Boundary treatment of a cell-centred field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Dirichlet(f64),
    Neumann,
}

impl Boundary {
    /// Ghost value across a wall from the adjacent interior value.
    #[inline]
    pub fn ghost(self, interior: f64) -> f64 {
        match self {
            Boundary::Dirichlet(g) => 2.0 * g - interior,
            Boundary::Neumann => interior,
        }
    }

    /// Same kind of condition with homogeneous data.
    pub fn homogeneous(self) -> Self {
        match self {
            Boundary::Dirichlet(_) => Boundary::Dirichlet(0.0),
            Boundary::Neumann => Boundary::Neumann,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub bc: Boundary,
}

impl CellField {
    pub fn constant(grid: Grid, value: f64, bc: Boundary) -> Self {
        Self {
            grid,
            values: vec![value; grid.cells()],
            bc,
        }
    }

    pub fn zeros(grid: Grid, bc: Boundary) -> Self {
        Self::constant(grid, 0.0, bc)
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: Grid, bc: Boundary, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        Self { grid, values, bc }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            bc: self.bc,
        }
    }

    /// Pointwise difference `self - other`, with homogeneous boundary data
    /// when both share a Dirichlet value.
    pub fn sub(&self, other: &CellField) -> Self {
        let bc = match (self.bc, other.bc) {
            (Boundary::Dirichlet(a), Boundary::Dirichlet(b)) => Boundary::Dirichlet(a - b),
            _ => Boundary::Neumann,
        };
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            bc,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let bc = match self.bc {
            Boundary::Dirichlet(g) => Boundary::Dirichlet(s * g),
            b => b,
        };
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| s * v).collect(),
            bc,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        l2_cells(&self.grid, &self.values)
    }

    pub fn linf_norm(&self) -> f64 {
        linf(&self.values)
    }

    pub fn h1_seminorm(&self) -> f64 {
        gradient_cc(self).l2_norm()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Cell-weighted inner product.
    pub fn dot(&self, other: &CellField) -> f64 {
        dot(&self.values, &other.values) * self.grid.cell_area()
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// Vector field on cell faces: `u` on vertical faces, `v` on horizontal ones.
///
/// Serves as velocity, force density and face gradient alike.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Velocity on the staggered grid; wall faces are held at zero (no slip).
pub type MacVelocity = FaceField;

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.u_len()],
            v: vec![0.0; grid.v_len()],
        }
    }

    /// Samples `(fu, fv)` at the face midpoints.
    pub fn from_fns(grid: Grid, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                w.u[grid.uidx(i, j)] = fu(grid.xf(i), grid.yc(j));
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                w.v[grid.vidx(i, j)] = fv(grid.xc(i), grid.yf(j));
            }
        }
        w
    }

    /// Discretely divergence-free field `(d psi/dy, -d psi/dx)` from a
    /// stream function sampled at cell corners. Wall faces vanish when
    /// `psi` vanishes on the boundary.
    pub fn from_stream_function(grid: Grid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let x = grid.xf(i);
                w.u[grid.uidx(i, j)] = (psi(x, grid.yf(j + 1)) - psi(x, grid.yf(j))) / grid.dy;
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let y = grid.yf(j);
                w.v[grid.vidx(i, j)] = -(psi(grid.xf(i + 1), y) - psi(grid.xf(i), y)) / grid.dx;
            }
        }
        w
    }

    /// Zeroes every wall face.
    pub fn pin_walls(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.u[g.uidx(0, j)] = 0.0;
            self.u[g.uidx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.v[g.vidx(i, 0)] = 0.0;
            self.v[g.vidx(i, g.ny)] = 0.0;
        }
    }

    pub fn walls_are_zero(&self) -> bool {
        let g = self.grid;
        (0..g.ny).all(|j| self.u[g.uidx(0, j)] == 0.0 && self.u[g.uidx(g.nx, j)] == 0.0)
            && (0..g.nx).all(|i| self.v[g.vidx(i, 0)] == 0.0 && self.v[g.vidx(i, g.ny)] == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            u: self.u.iter().map(|x| s * x).collect(),
            v: self.v.iter().map(|x| s * x).collect(),
        }
    }

    pub fn sub(&self, other: &FaceField) -> Self {
        Self {
            grid: self.grid,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a - b).collect(),
        }
    }

    /// Face-weighted inner product (boundary faces at half weight).
    pub fn dot(&self, other: &FaceField) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let w = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
                let k = g.uidx(i, j);
                s += w * self.u[k] * other.u[k];
            }
        }
        for j in 0..=g.ny {
            let w = if j == 0 || j == g.ny { 0.5 } else { 1.0 };
            for i in 0..g.nx {
                let k = g.vidx(i, j);
                s += w * self.v[k] * other.v[k];
            }
        }
        s * g.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        linf(&self.u).max(linf(&self.v))
    }

    pub fn max_abs_u(&self) -> f64 {
        linf(&self.u)
    }

    pub fn max_abs_v(&self) -> f64 {
        linf(&self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Cell-centred average of the x-component.
    #[inline]
    pub fn u_center(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        0.5 * (self.u[g.uidx(i, j)] + self.u[g.uidx(i + 1, j)])
    }

    #[inline]
    pub fn v_center(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        0.5 * (self.v[g.vidx(i, j)] + self.v[g.vidx(i, j + 1)])
    }

    /// Discrete curl `dv/dx - du/dy` at interior corners, indexed
    /// `(i - 1) + (nx - 1) * (j - 1)` for corner `(i, j)`.
    pub fn curl_interior(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::with_capacity((g.nx - 1) * (g.ny - 1));
        for j in 1..g.ny {
            for i in 1..g.nx {
                let dvdx = (self.v[g.vidx(i, j)] - self.v[g.vidx(i - 1, j)]) / g.dx;
                let dudy = (self.u[g.uidx(i, j)] - self.u[g.uidx(i, j - 1)]) / g.dy;
                out.push(dvdx - dudy);
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn l2_cells(grid: &Grid, values: &[f64]) -> f64 {
    (dot(values, values) * grid.cell_area()).sqrt()
}

/// Centred two-point differences onto faces, ghost values from `f.bc`.
/// Neumann walls give zero normal gradient.
pub fn gradient_cc(f: &CellField) -> FaceField {
    let g = f.grid;
    let mut out = FaceField::zeros(g);
    for j in 0..g.ny {
        let row = &f.values[g.idx(0, j)..g.idx(0, j) + g.nx];
        out.u[g.uidx(0, j)] = (row[0] - f.bc.ghost(row[0])) / g.dx;
        for i in 1..g.nx {
            out.u[g.uidx(i, j)] = (row[i] - row[i - 1]) / g.dx;
        }
        out.u[g.uidx(g.nx, j)] = (f.bc.ghost(row[g.nx - 1]) - row[g.nx - 1]) / g.dx;
    }
    for i in 0..g.nx {
        let f0 = f.values[g.idx(i, 0)];
        out.v[g.vidx(i, 0)] = (f0 - f.bc.ghost(f0)) / g.dy;
        let ft = f.values[g.idx(i, g.ny - 1)];
        out.v[g.vidx(i, g.ny)] = (f.bc.ghost(ft) - ft) / g.dy;
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.v[g.vidx(i, j)] = (f.values[g.idx(i, j)] - f.values[g.idx(i, j - 1)]) / g.dy;
        }
    }
    out
}

/// Per-cell divergence of a face field.
pub fn divergence_mac(w: &FaceField) -> CellField {
    let g = w.grid;
    let mut out = vec![0.0; g.cells()];
    divergence_into(w, &mut out);
    CellField {
        grid: g,
        values: out,
        bc: Boundary::Dirichlet(0.0),
    }
}

pub(crate) fn divergence_into(w: &FaceField, out: &mut [f64]) {
    let g = w.grid;
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[g.idx(i, j)] = (w.u[g.uidx(i + 1, j)] - w.u[g.uidx(i, j)]) / g.dx + (w.v[g.vidx(i, j + 1)] - w.v[g.vidx(i, j)]) / g.dy;
        }
    }
}

/// Five-point Laplacian with ghost cells from `f.bc`.
pub fn laplacian_cc(f: &CellField) -> CellField {
    let mut out = vec![0.0; f.grid.cells()];
    laplacian_into(&f.grid, f.bc, &f.values, &mut out);
    CellField {
        grid: f.grid,
        values: out,
        bc: Boundary::Dirichlet(0.0),
    }
}

/// Slice-level five-point Laplacian.
pub(crate) fn laplacian_into(g: &Grid, bc: Boundary, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let idx2 = 1.0 / (g.dx * g.dx);
    let idy2 = 1.0 / (g.dy * g.dy);
    for j in 0..ny {
        for i in 0..nx {
            let k = i + nx * j;
            let c = f[k];
            let w = if i > 0 { f[k - 1] } else { bc.ghost(c) };
            let e = if i + 1 < nx { f[k + 1] } else { bc.ghost(c) };
            let s = if j > 0 { f[k - nx] } else { bc.ghost(c) };
            let n = if j + 1 < ny { f[k + nx] } else { bc.ghost(c) };
            out[k] = (w - 2.0 * c + e) * idx2 + (s - 2.0 * c + n) * idy2;
        }
    }
}

/// Upwind direction selected per cell from the cell-centred velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Upwind {
    /// Positive velocity: difference across the low face.
    Back,
    /// Negative velocity: difference across the high face.
    Forward,
    /// Zero velocity: no transport; the centred average is used where a
    /// stencil is still needed.
    Still,
}

#[inline]
pub(crate) fn upwind_of(c: f64) -> Upwind {
    if c > 0.0 {
        Upwind::Back
    } else if c < 0.0 {
        Upwind::Forward
    } else {
        Upwind::Still
    }
}

/// First-order upwind evaluation of `(w . grad) f` at cell centres.
/// Face velocities are averaged to centres per direction; one-sided
/// differences across walls use the ghost values of `f.bc`.
pub fn advect_upwind(w: &FaceField, f: &CellField) -> CellField {
    let g = f.grid;
    let grad = gradient_cc(f);
    let mut out = vec![0.0; g.cells()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let uc = w.u_center(i, j);
            let vc = w.v_center(i, j);
            let gx = if uc > 0.0 { grad.u[g.uidx(i, j)] } else { grad.u[g.uidx(i + 1, j)] };
            let gy = if vc > 0.0 { grad.v[g.vidx(i, j)] } else { grad.v[g.vidx(i, j + 1)] };
            out[g.idx(i, j)] = uc * gx + vc * gy;
        }
    }
    CellField {
        grid: g,
        values: out,
        bc: Boundary::Dirichlet(0.0),
    }
}

/// Laplacian of the x-velocity at interior vertical faces with no-slip
/// walls; wall entries of `out` are set to zero.
pub(crate) fn vector_laplacian_u(g: &Grid, u: &[f64], out: &mut [f64]) {
    let nxu = g.nx + 1;
    let idx2 = 1.0 / (g.dx * g.dx);
    let idy2 = 1.0 / (g.dy * g.dy);
    for j in 0..g.ny {
        out[nxu * j] = 0.0;
        out[g.nx + nxu * j] = 0.0;
        for i in 1..g.nx {
            let k = i + nxu * j;
            let c = u[k];
            let s = if j > 0 { u[k - nxu] } else { -c };
            let n = if j + 1 < g.ny { u[k + nxu] } else { -c };
            out[k] = (u[k - 1] - 2.0 * c + u[k + 1]) * idx2 + (s - 2.0 * c + n) * idy2;
        }
    }
}

/// Laplacian of the y-velocity at interior horizontal faces.
pub(crate) fn vector_laplacian_v(g: &Grid, v: &[f64], out: &mut [f64]) {
    let nx = g.nx;
    let idx2 = 1.0 / (g.dx * g.dx);
    let idy2 = 1.0 / (g.dy * g.dy);
    for i in 0..nx {
        out[i] = 0.0;
        out[i + nx * g.ny] = 0.0;
    }
    for j in 1..g.ny {
        for i in 0..nx {
            let k = i + nx * j;
            let c = v[k];
            let w = if i > 0 { v[k - 1] } else { -c };
            let e = if i + 1 < nx { v[k + 1] } else { -c };
            out[k] = (w - 2.0 * c + e) * idx2 + (v[k - nx] - 2.0 * c + v[k + nx]) * idy2;
        }
    }
}

/// Vector Laplacian of a no-slip velocity.
pub fn vector_laplacian(w: &FaceField) -> FaceField {
    let g = w.grid;
    let mut out = FaceField::zeros(g);
    vector_laplacian_u(&g, &w.u, &mut out.u);
    vector_laplacian_v(&g, &w.v, &mut out.v);
    out
}

/// Squared L2 norm of the velocity gradient, consistent with
/// [`vector_laplacian`]: `-<lap w, w> = |grad w|^2` exactly.
pub fn velocity_gradient_sq(w: &FaceField) -> f64 {
    let g = w.grid;
    let nxu = g.nx + 1;
    let (dx, dy) = (g.dx, g.dy);
    let mut s = 0.0;
    // du/dx at cell centres, du/dy at corners (wall corners use the odd
    // ghost and carry half weight).
    for j in 0..g.ny {
        for i in 0..g.nx {
            let d = (w.u[i + 1 + nxu * j] - w.u[i + nxu * j]) / dx;
            s += d * d;
        }
    }
    for i in 1..g.nx {
        let d0 = 2.0 * w.u[i] / dy;
        let dt = 2.0 * w.u[i + nxu * (g.ny - 1)] / dy;
        s += 0.5 * (d0 * d0 + dt * dt);
        for j in 1..g.ny {
            let d = (w.u[i + nxu * j] - w.u[i + nxu * (j - 1)]) / dy;
            s += d * d;
        }
    }
    let nx = g.nx;
    for j in 0..g.ny {
        for i in 0..nx {
            let d = (w.v[i + nx * (j + 1)] - w.v[i + nx * j]) / dy;
            s += d * d;
        }
    }
    for j in 1..g.ny {
        let d0 = 2.0 * w.v[nx * j] / dx;
        let d1 = 2.0 * w.v[nx - 1 + nx * j] / dx;
        s += 0.5 * (d0 * d0 + d1 * d1);
        for i in 1..nx {
            let d = (w.v[i + nx * j] - w.v[i - 1 + nx * j]) / dx;
            s += d * d;
        }
    }
    s * dx * dy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_cell(grid: Grid, bc: Boundary, seed: u64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = CellField::zeros(grid, bc);
        f.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        f
    }

    fn random_faces(grid: Grid, seed: u64) -> FaceField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = FaceField::zeros(grid);
        w.u.iter_mut().chain(w.v.iter_mut()).for_each(|v| *v = rng.gen_range(-1.0..1.0));
        w.pin_walls();
        w
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
        let g = Grid::new(10, 20, 2.0, 1.0).unwrap();
        assert_eq!(g.dx * 10.0, 2.0);
        assert_eq!(g.dy * 20.0, 1.0);
    }

    #[test]
    fn gradient_of_constant_matching_bc_is_zero() {
        let g = Grid::new(8, 6, 1.0, 0.5).unwrap();
        let f = CellField::constant(g, -1.0, Boundary::Dirichlet(-1.0));
        let gr = gradient_cc(&f);
        assert_eq!(gr.linf_norm(), 0.0);
    }

    #[test]
    fn gradient_exact_for_linear_on_interior_faces() {
        let g = Grid::new(10, 7, 1.0, 1.0).unwrap();
        let f = CellField::from_fn(g, Boundary::Neumann, |x, _| x);
        let gr = gradient_cc(&f);
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((gr.u[g.uidx(i, j)] - 1.0).abs() < 1e-12);
            }
        }
    }

    fn gradient_error(n: usize) -> f64 {
        let g = Grid::new(n, n, 2.0, 1.0).unwrap();
        let lx = g.lx;
        let f = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, _| (PI * x / lx).sin());
        let gr = gradient_cc(&f);
        let mut err = 0.0f64;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let exact = PI / lx * (PI * g.xf(i) / lx).cos();
                err = err.max((gr.u[g.uidx(i, j)] - exact).abs());
            }
        }
        err
    }

    #[test]
    fn gradient_second_order_on_sine() {
        let e1 = gradient_error(32);
        let e2 = gradient_error(64);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn divergence_examples() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        assert_eq!(divergence_mac(&FaceField::zeros(g)).linf_norm(), 0.0);

        let mut w = FaceField::zeros(g);
        for j in 0..g.ny {
            for i in 1..g.nx {
                w.u[g.uidx(i, j)] = 1.0;
            }
        }
        let d = divergence_mac(&w);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = d.at(i, j);
                if i == 0 || i == g.nx - 1 {
                    assert!(v != 0.0);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }

        let s = FaceField::from_stream_function(g, |x, y| (x * (1.0 - x)).powi(2) * y * (1.0 - y) * (3.0 * y).cos());
        assert!(s.walls_are_zero() && s.linf_norm() > 0.0);
        assert!(divergence_mac(&s).linf_norm() < 1e-12);
    }

    #[test]
    fn laplacian_examples() {
        let g = Grid::new(12, 10, 1.0, 1.0).unwrap();
        let c = CellField::constant(g, 0.7, Boundary::Dirichlet(0.7));
        assert_eq!(laplacian_cc(&c).linf_norm(), 0.0);

        let q = CellField::from_fn(g, Boundary::Neumann, |x, y| x * x + y * y);
        let l = laplacian_cc(&q);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((l.at(i, j) - 4.0).abs() < 1e-9);
            }
        }
    }

    fn eigen_error(n: usize) -> f64 {
        let g = Grid::new(n, n, 1.0, 2.0).unwrap();
        let (lx, ly) = (g.lx, g.ly);
        let f = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| (PI * x / lx).sin() * (PI * y / ly).sin());
        let l = laplacian_cc(&f);
        let mu = -PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly));
        l.values.iter().zip(&f.values).fold(0.0f64, |m, (a, b)| m.max((a - mu * b).abs()))
    }

    #[test]
    fn laplacian_second_order_on_eigenfunction() {
        let order = (eigen_error(32) / eigen_error(64)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn upwind_examples() {
        let g = Grid::new(10, 10, 1.0, 1.0).unwrap();
        let f = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| x * y + 1.0);
        assert_eq!(advect_upwind(&FaceField::zeros(g), &f).linf_norm(), 0.0);

        let c = CellField::constant(g, 2.0, Boundary::Dirichlet(2.0));
        let w = random_faces(g, 5);
        assert_eq!(advect_upwind(&w, &c).linf_norm(), 0.0);

        let lin = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, _| x);
        let mut uni = FaceField::zeros(g);
        for j in 0..g.ny {
            for i in 1..g.nx {
                uni.u[g.uidx(i, j)] = 1.0;
            }
        }
        let a = advect_upwind(&uni, &lin);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((a.at(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_examples() {
        let g = Grid::square(16);
        let z = CellField::zeros(g, Boundary::Dirichlet(0.0));
        assert_eq!(z.l2_norm(), 0.0);
        assert_eq!(z.h1_seminorm(), 0.0);
        assert_eq!(z.linf_norm(), 0.0);
        let one = CellField::constant(g, 1.0, Boundary::Neumann);
        assert!((one.l2_norm() - 1.0).abs() < 1e-14);

        let g = Grid::square(128);
        let s = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| (PI * x).sin() * (PI * y).sin());
        assert!((s.l2_norm() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let g = Grid::new(9, 13, 1.3, 0.7).unwrap();
        for seed in 0..5 {
            let f = random_cell(g, Boundary::Dirichlet(0.0), seed);
            let w = random_faces(g, seed + 100);
            let lhs = divergence_mac(&w).dot(&f) + w.dot(&gradient_cc(&f));
            assert!(lhs.abs() < 1e-12, "{lhs}");
        }
    }

    #[test]
    fn laplacian_symmetric_and_energy_consistent() {
        let g = Grid::new(11, 9, 1.0, 0.8).unwrap();
        for seed in 0..5 {
            let f = random_cell(g, Boundary::Dirichlet(0.0), seed);
            let h = random_cell(g, Boundary::Dirichlet(0.0), seed + 50);
            let a = laplacian_cc(&f).dot(&h);
            let b = f.dot(&laplacian_cc(&h));
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            let e = laplacian_cc(&f).dot(&f) + f.h1_seminorm().powi(2);
            assert!(e.abs() < 1e-10 * f.h1_seminorm().powi(2));
        }
    }

    #[test]
    fn vector_laplacian_matches_gradient_norm() {
        let g = Grid::new(10, 12, 1.0, 1.2).unwrap();
        for seed in 0..4 {
            let w = random_faces(g, seed);
            let lhs = -vector_laplacian(&w).dot(&w);
            let rhs = velocity_gradient_sq(&w);
            assert!((lhs - rhs).abs() < 1e-10 * rhs, "{lhs} {rhs}");
            let z = random_faces(g, seed + 9);
            let a = vector_laplacian(&w).dot(&z);
            let b = w.dot(&vector_laplacian(&z));
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn operators_are_linear(seed in 0u64..1000, s in -3.0f64..3.0) {
            let g = Grid::new(6, 7, 1.0, 1.0).unwrap();
            let f = random_cell(g, Boundary::Dirichlet(0.0), seed);
            let l1 = laplacian_cc(&f.scale(s));
            let l2 = laplacian_cc(&f).scale(s);
            for (a, b) in l1.values.iter().zip(&l2.values) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}
