//! Linear solvers: preconditioned conjugate gradients, a fast-diagonalization
//! inverse for separable constant-coefficient operators, and a banded LU
//! factorization for the variable-coefficient Newton systems.

use nalgebra::{DMatrix, SymmetricEigen};

/// Outcome of an iterative solve. `residual` is the max-norm of the final
/// residual in the units of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned CG with a max-norm stopping test `|b - A x|_inf <= tol`.
///
/// `x` holds the initial guess on entry. With `zero_mean`, the system is
/// treated as singular with the constants as nullspace: residuals and the
/// solution are kept mean-free.
pub fn pcg<A, M>(apply: A, precond: M, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize, zero_mean: bool) -> SolveReport
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    if zero_mean {
        remove_mean(x);
    }
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    if zero_mean {
        remove_mean(&mut r);
    }
    let mut res = max_abs(&r);
    if res <= tol {
        return SolveReport {
            iterations: 0,
            residual: res,
            converged: true,
        };
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if zero_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return SolveReport {
                iterations: it,
                residual: res,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if zero_mean {
            remove_mean(&mut r);
        }
        res = max_abs(&r);
        if res <= tol {
            // Replace the recursive residual by the true one before
            // declaring convergence.
            apply(x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            if zero_mean {
                remove_mean(&mut r);
                remove_mean(x);
            }
            res = max_abs(&r);
            if res <= tol {
                return SolveReport {
                    iterations: it,
                    residual: res,
                    converged: true,
                };
            }
        }
        precond(&r, &mut z);
        if zero_mean {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    SolveReport {
        iterations: max_iter,
        residual: res,
        converged: false,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn remove_mean(a: &mut [f64]) {
    let m = a.iter().sum::<f64>() / a.len() as f64;
    a.iter_mut().for_each(|v| *v -= m);
}

/// One-dimensional second-difference operators (as positive matrices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil1d {
    /// Cell-centred unknowns, homogeneous Dirichlet through odd ghosts.
    CellDirichlet { n: usize, h: f64 },
    /// Cell-centred unknowns, zero-flux walls.
    CellNeumann { n: usize, h: f64 },
    /// Face unknowns strictly inside the domain, wall values zero.
    FaceDirichlet { n: usize, h: f64 },
}

impl Stencil1d {
    fn size(&self) -> usize {
        match *self {
            Stencil1d::CellDirichlet { n, .. } | Stencil1d::CellNeumann { n, .. } => n,
            Stencil1d::FaceDirichlet { n, .. } => n - 1,
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        let m = self.size();
        let (h, end) = match *self {
            Stencil1d::CellDirichlet { h, .. } => (h, 3.0),
            Stencil1d::CellNeumann { h, .. } => (h, 1.0),
            Stencil1d::FaceDirichlet { h, .. } => (h, 2.0),
        };
        let s = 1.0 / (h * h);
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            k[(i, i)] = 2.0 * s;
            if i > 0 {
                k[(i, i - 1)] = -s;
            }
            if i + 1 < m {
                k[(i, i + 1)] = -s;
            }
        }
        k[(0, 0)] = end * s;
        k[(m - 1, m - 1)] = end * s;
        k
    }
}

/// Exact inverse of `c0 I + cx (Kx (x) I) + cy (I (x) Ky)` for 1D positive
/// second-difference matrices `Kx`, `Ky`, via their eigenbases.
///
/// Data is laid out row-major with `ny` rows of `nx` entries.
#[derive(Debug, Clone)]
pub struct FastDiag {
    nx: usize,
    ny: usize,
    qx: Vec<f64>,
    ex: Vec<f64>,
    qy: Vec<f64>,
    ey: Vec<f64>,
}

fn eigenbasis(s: Stencil1d) -> (Vec<f64>, Vec<f64>) {
    let m = s.size();
    let eig = SymmetricEigen::new(s.matrix());
    // Row-major copy: q[r * m + c] = component r of eigenvector c.
    let mut q = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            q[r * m + c] = eig.eigenvectors[(r, c)];
        }
    }
    (q, eig.eigenvalues.iter().copied().collect())
}

impl FastDiag {
    pub fn new(x: Stencil1d, y: Stencil1d) -> Self {
        let (qx, ex) = eigenbasis(x);
        let (qy, ey) = eigenbasis(y);
        Self {
            nx: x.size(),
            ny: y.size(),
            qx,
            ex,
            qy,
            ey,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Solves `(c0 + cx Kx + cy Ky) out = rhs`. Modes with a vanishing
    /// symbol (the Neumann constant) are set to zero.
    pub fn solve(&self, c0: f64, cx: f64, cy: f64, rhs: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut tmp = vec![0.0; nx * ny];
        // tmp = Qy^T rhs
        gemm(ny, ny, nx, &self.qy, true, rhs, false, &mut tmp);
        // out = tmp Qx
        gemm(ny, nx, nx, &tmp, false, &self.qx, false, out);
        let scale = c0.abs()
            + cx.abs() * self.ex.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            + cy.abs() * self.ey.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..ny {
            for i in 0..nx {
                let d = c0 + cx * self.ex[i] + cy * self.ey[j];
                let k = i + nx * j;
                out[k] = if d.abs() <= 1e-12 * scale { 0.0 } else { out[k] / d };
            }
        }
        // out = Qy out Qx^T
        gemm(ny, ny, nx, &self.qy, false, out, false, &mut tmp);
        gemm(ny, nx, nx, &tmp, false, &self.qx, true, out);
    }
}

impl Stencil1d {
    /// Accumulates `coef * K x` along one strided line.
    fn apply_line(&self, x: &[f64], stride: usize, y: &mut [f64], coef: f64) {
        let m = self.size();
        let (h, end) = match *self {
            Stencil1d::CellDirichlet { h, .. } => (h, 3.0),
            Stencil1d::CellNeumann { h, .. } => (h, 1.0),
            Stencil1d::FaceDirichlet { h, .. } => (h, 2.0),
        };
        let s = coef / (h * h);
        debug_assert!(m >= 2);
        y[0] += s * (end * x[0] - x[stride]);
        for i in 1..m - 1 {
            y[i * stride] += s * (2.0 * x[i * stride] - x[(i - 1) * stride] - x[(i + 1) * stride]);
        }
        y[(m - 1) * stride] += s * (end * x[(m - 1) * stride] - x[(m - 2) * stride]);
    }
}

/// Matrix-free separable operator `c0 I + cx Kx + cy Ky` paired with its
/// fast-diagonalization inverse as CG preconditioner.
#[derive(Debug, Clone)]
pub struct SeparableOperator {
    sx: Stencil1d,
    sy: Stencil1d,
    fd: FastDiag,
}

impl SeparableOperator {
    pub fn new(sx: Stencil1d, sy: Stencil1d) -> Self {
        Self {
            sx,
            sy,
            fd: FastDiag::new(sx, sy),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.sx.size(), self.sy.size())
    }

    pub fn apply(&self, c0: f64, cx: f64, cy: f64, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = self.shape();
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = c0 * xi;
        }
        if cx != 0.0 {
            for j in 0..ny {
                let r = j * nx;
                self.sx.apply_line(&x[r..r + nx], 1, &mut y[r..r + nx], cx);
            }
        }
        if cy != 0.0 {
            for i in 0..nx {
                self.sy.apply_line(&x[i..], nx, &mut y[i..], cy);
            }
        }
    }

    /// CG solve of `(c0 + cx Kx + cy Ky) x = b`; `x` is the initial guess.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(&self, c0: f64, cx: f64, cy: f64, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize, zero_mean: bool) -> SolveReport {
        pcg(
            |v, out| self.apply(c0, cx, cy, v, out),
            |r, z| self.fd.solve(c0, cx, cy, r, z),
            b,
            x,
            tol,
            max_iter,
            zero_mean,
        )
    }
}

/// `c = op(a) * op(b)` for row-major `m x k` and `k x n` operands.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64]) {
    // Stored shapes: a is (m x k), or (k x m) when transposed.
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Square band matrix with partial-pivoting LU.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot(pub usize);

impl BandMatrix {
    /// `kl` sub-diagonals and `ku` super-diagonals; storage reserves room
    /// for the pivoting fill.
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        let p = self.pos(i, j);
        self.data[p] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    pub fn factor(&mut self) -> Result<(), SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let kut = self.kl + self.ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.pos(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.pos(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(SingularPivot(k));
            }
            self.pivots[k] = p;
            let jmax = (k + kut).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.pos(k, j);
                    let b = self.pos(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.pos(k, k)];
            for i in k + 1..=last {
                let pik = self.pos(i, k);
                let l = self.data[pik] / pivot;
                self.data[pik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let pkj = self.pos(k, j);
                        let pij = self.pos(i, j);
                        self.data[pij] -= l * self.data[pkj];
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves in place after [`BandMatrix::factor`].
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "band matrix must be factored before solving");
        let n = self.n;
        let kut = self.kl + self.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.data[self.pos(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kut).min(n - 1) {
                s -= self.data[self.pos(k, j)] * b[j];
            }
            b[k] = s / self.data[self.pos(k, k)];
        }
    }
}
