//! Aggregation multigrid preconditioner and preconditioned conjugate gradients.
//!
//! Coarse operators are Galerkin products with piecewise-constant 2x2
//! aggregation, which keeps every level a five-point stencil on a halved grid.
//! The smoother is damped Jacobi (symmetric, and invariant under the grid's
//! reflections); the coarsest level is factored densely.

use super::operator::{apply_five_point, FluxOperator};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Preconditioner choice for the conjugate gradient solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    Jacobi,
    #[default]
    Multigrid,
}

#[derive(Debug, Clone)]
struct Level {
    nx: usize,
    ny: usize,
    active: Vec<bool>,
    east: Vec<f64>,
    north: Vec<f64>,
    /// Diagonal of the stiffness part.
    kdiag: Vec<f64>,
    /// Lumped capacity.
    mass: Vec<f64>,
    /// Current diagonal `kdiag + shift * mass`.
    diag: Vec<f64>,
}

impl Level {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_five_point(self.nx, self.ny, &self.active, &self.diag, &self.east, &self.north, x, y);
    }

    fn coarsen(&self) -> Option<Level> {
        if self.nx % 2 != 0 || self.ny % 2 != 0 || self.nx < 8 || self.ny < 8 {
            return None;
        }
        let (cx, cy) = (self.nx / 2, self.ny / 2);
        let n = cx * cy;
        let mut coarse = Level {
            nx: cx,
            ny: cy,
            active: vec![false; n],
            east: vec![0.0; n],
            north: vec![0.0; n],
            kdiag: vec![0.0; n],
            mass: vec![0.0; n],
            diag: vec![0.0; n],
        };
        let f = |i: usize, j: usize| j * self.nx + i;
        for jc in 0..cy {
            for ic in 0..cx {
                let c = jc * cx + ic;
                let (i0, j0) = (2 * ic, 2 * jc);
                let kids = [f(i0, j0), f(i0 + 1, j0), f(i0, j0 + 1), f(i0 + 1, j0 + 1)];
                coarse.active[c] = kids.iter().any(|&k| self.active[k]);
                let mut kd = 0.0;
                let mut m = 0.0;
                for &k in &kids {
                    if self.active[k] {
                        kd += self.kdiag[k];
                        m += self.mass[k];
                    }
                }
                // Links internal to the aggregate cancel twice in P^T K P.
                let internal = self.east[f(i0, j0)] + self.east[f(i0, j0 + 1)] + self.north[f(i0, j0)] + self.north[f(i0 + 1, j0)];
                coarse.kdiag[c] = kd - 2.0 * internal;
                coarse.mass[c] = m;
                if ic + 1 < cx {
                    coarse.east[c] = self.east[f(i0 + 1, j0)] + self.east[f(i0 + 1, j0 + 1)];
                }
                if jc + 1 < cy {
                    coarse.north[c] = self.north[f(i0, j0 + 1)] + self.north[f(i0 + 1, j0 + 1)];
                }
            }
        }
        Some(coarse)
    }
}

/// Multigrid hierarchy for `shift * M + K`.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
    coarse_index: Vec<usize>,
    coarse_cells: Vec<usize>,
    coarse_factor: Option<Cholesky<f64, Dyn>>,
    /// Pre- and post-smoothing sweeps.
    pub sweeps: usize,
    /// Jacobi damping.
    pub omega: f64,
    /// Scaling of the prolongated coarse correction.
    pub correction: f64,
}

impl Multigrid {
    /// Builds the hierarchy; `mass` is the capacity of each fine cell.
    pub fn new(op: &FluxOperator, mass: f64, max_coarse: usize) -> Self {
        let fine = Level {
            nx: op.grid.nx,
            ny: op.grid.ny,
            active: op.active.clone(),
            east: op.east.clone(),
            north: op.north.clone(),
            kdiag: op.diag.clone(),
            mass: op.active.iter().map(|&a| if a { mass } else { 0.0 }).collect(),
            diag: op.diag.clone(),
        };
        let mut levels = vec![fine];
        loop {
            let last = levels.last().unwrap();
            let count = last.active.iter().filter(|a| **a).count();
            if count <= max_coarse {
                break;
            }
            match last.coarsen() {
                Some(c) => levels.push(c),
                None => break,
            }
        }
        Self {
            levels,
            coarse_index: Vec::new(),
            coarse_cells: Vec::new(),
            coarse_factor: None,
            sweeps: 2,
            omega: 0.8,
            correction: 1.6,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Sets the diagonal shift and refactors the coarsest level.
    pub fn set_shift(&mut self, shift: f64) -> Result<()> {
        for lvl in &mut self.levels {
            for c in 0..lvl.diag.len() {
                lvl.diag[c] = lvl.kdiag[c] + shift * lvl.mass[c];
            }
        }
        let last = self.levels.last().unwrap();
        let mut index = vec![usize::MAX; last.active.len()];
        let mut cells = Vec::new();
        for (c, &a) in last.active.iter().enumerate() {
            if a {
                index[c] = cells.len();
                cells.push(c);
            }
        }
        let m = cells.len();
        let mut dense = DMatrix::<f64>::zeros(m, m);
        let nx = last.nx;
        for (r, &c) in cells.iter().enumerate() {
            dense[(r, r)] = last.diag[c];
            let (i, j) = (c % nx, c / nx);
            if i + 1 < nx && last.active[c + 1] {
                dense[(r, index[c + 1])] = -last.east[c];
                dense[(index[c + 1], r)] = -last.east[c];
            }
            if j + 1 < last.ny && last.active[c + nx] {
                dense[(r, index[c + nx])] = -last.north[c];
                dense[(index[c + nx], r)] = -last.north[c];
            }
        }
        self.coarse_factor = if m > 0 {
            Some(Cholesky::new(dense).ok_or_else(|| Error::SingularAssembly("coarse operator is not positive definite".into()))?)
        } else {
            None
        };
        self.coarse_index = index;
        self.coarse_cells = cells;
        Ok(())
    }

    /// Applies the fine-level matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.levels[0].apply(x, y);
    }

    pub fn fine_diagonal(&self) -> &[f64] {
        &self.levels[0].diag
    }

    pub fn fine_active(&self) -> &[bool] {
        &self.levels[0].active
    }

    /// One V-cycle approximating `A^{-1} r`.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, r: &[f64], z: &mut [f64]) {
        let lvl = &self.levels[l];
        if l + 1 == self.levels.len() {
            z.iter_mut().for_each(|v| *v = 0.0);
            if let Some(f) = &self.coarse_factor {
                let b = DVector::from_iterator(self.coarse_cells.len(), self.coarse_cells.iter().map(|&c| r[c]));
                let x = f.solve(&b);
                for (k, &c) in self.coarse_cells.iter().enumerate() {
                    z[c] = x[k];
                }
            }
            return;
        }
        let n = r.len();
        let mut tmp = vec![0.0; n];
        z.iter_mut().for_each(|v| *v = 0.0);
        // With a zero start the first sweep is a scaled copy of r.
        for c in 0..n {
            if lvl.active[c] {
                z[c] = self.omega * r[c] / lvl.diag[c];
            }
        }
        for _ in 1..self.sweeps {
            self.jacobi(lvl, r, z, &mut tmp);
        }
        lvl.apply(z, &mut tmp);
        let coarse = &self.levels[l + 1];
        let mut rc = vec![0.0; coarse.nx * coarse.ny];
        for j in 0..lvl.ny {
            for i in 0..lvl.nx {
                let c = j * lvl.nx + i;
                if lvl.active[c] {
                    rc[(j / 2) * coarse.nx + i / 2] += r[c] - tmp[c];
                }
            }
        }
        let mut zc = vec![0.0; rc.len()];
        self.cycle(l + 1, &rc, &mut zc);
        for j in 0..lvl.ny {
            for i in 0..lvl.nx {
                let c = j * lvl.nx + i;
                if lvl.active[c] {
                    z[c] += self.correction * zc[(j / 2) * coarse.nx + i / 2];
                }
            }
        }
        for _ in 0..self.sweeps {
            self.jacobi(lvl, r, z, &mut tmp);
        }
    }

    fn jacobi(&self, lvl: &Level, r: &[f64], z: &mut [f64], tmp: &mut [f64]) {
        lvl.apply(z, tmp);
        for c in 0..z.len() {
            if lvl.active[c] {
                z[c] += self.omega * (r[c] - tmp[c]) / lvl.diag[c];
            }
        }
    }
}

/// Iteration statistics of a conjugate gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for the fine operator of `mg`.
///
/// `x` holds the initial guess and receives the solution; inactive entries
/// are left untouched. Convergence is declared when
/// `|b - A x| <= tol * |b|`.
pub fn pcg(mg: &Multigrid, kind: Preconditioner, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = b.len();
    let active = mg.fine_active();
    let diag = mg.fine_diagonal();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        for c in 0..n {
            if active[c] {
                x[c] = 0.0;
            }
        }
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut xa: Vec<f64> = (0..n).map(|c| if active[c] { x[c] } else { 0.0 }).collect();
    let mut r = vec![0.0; n];
    mg.apply(&xa, &mut r);
    for c in 0..n {
        r[c] = if active[c] { b[c] - r[c] } else { 0.0 };
    }
    let mut z = vec![0.0; n];
    let precond = |r: &[f64], z: &mut [f64]| match kind {
        Preconditioner::Jacobi => {
            for c in 0..n {
                z[c] = if active[c] { r[c] / diag[c] } else { 0.0 };
            }
        }
        Preconditioner::Multigrid => mg.precondition(r, z),
    };
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    if res > tol {
        precond(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while res > tol {
            if it >= max_iter {
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            mg.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            let alpha = rz / pap;
            for c in 0..n {
                xa[c] += alpha * p[c];
                r[c] -= alpha * ap[c];
            }
            it += 1;
            res = dot(&r, &r).sqrt() / bnorm;
            if res <= tol {
                break;
            }
            precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for c in 0..n {
                p[c] = z[c] + beta * p[c];
            }
        }
    }
    for c in 0..n {
        if active[c] {
            x[c] = xa[c];
        }
    }
    Ok(CgStats { iterations: it, relative_residual: res })
}
