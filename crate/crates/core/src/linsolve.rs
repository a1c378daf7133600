//! Solvers for the implicit diffusion systems `(D − κ Δ_h) x = b`, where `D`
//! is a positive diagonal and `Δ_h` the Neumann Laplacian of [`crate::grid`].
//!
//! 1D grids use the Thomas algorithm; 2D grids use Jacobi-preconditioned
//! conjugate gradients (the operator is symmetric positive definite).

use crate::error::{Error, Result};
use crate::grid::{laplacian, Field, Grid};

/// Matrix-free description of `D − κ Δ_h`.
#[derive(Debug, Clone, Copy)]
pub struct HelmholtzOp<'a> {
    pub grid: Grid,
    pub diag: &'a [f64],
    pub kappa: f64,
}

impl HelmholtzOp<'_> {
    pub fn apply(&self, x: &Field) -> Field {
        let lap = laplacian(x);
        let vals = x
            .values()
            .iter()
            .zip(lap.values())
            .zip(self.diag)
            .map(|((&xi, &li), &di)| di * xi - self.kappa * li)
            .collect();
        Field::new(self.grid, vals).expect("same grid")
    }

    /// `‖b − A x‖₂ / ‖b‖₂` (or the absolute residual when `b = 0`).
    pub fn residual_ratio(&self, x: &Field, b: &Field) -> f64 {
        let ax = self.apply(x);
        let r2: f64 = ax
            .values()
            .iter()
            .zip(b.values())
            .map(|(a, b)| (b - a) * (b - a))
            .sum();
        let b2: f64 = b.values().iter().map(|v| v * v).sum();
        if b2 > 0.0 {
            (r2 / b2).sqrt()
        } else {
            r2.sqrt()
        }
    }

    /// Neighbour count along x for column `i` (1 at the ends).
    fn coupling_x(&self, i: usize) -> f64 {
        let nx = self.grid.nx();
        (i > 0) as u8 as f64 + (i + 1 < nx) as u8 as f64
    }

    fn coupling_y(&self, j: usize) -> f64 {
        let ny = self.grid.ny();
        (j > 0) as u8 as f64 + (j + 1 < ny) as u8 as f64
    }
}

/// Solves `(D − κ Δ_h) x = b` to relative residual `lin_tol`.
pub fn solve(op: &HelmholtzOp<'_>, b: &Field, lin_tol: f64) -> Result<Field> {
    debug_assert_eq!(op.diag.len(), op.grid.len());
    if op.grid.dim() == 1 {
        Ok(solve_tridiagonal(op, b))
    } else {
        solve_cg(op, b, lin_tol)
    }
}

fn solve_tridiagonal(op: &HelmholtzOp<'_>, b: &Field) -> Field {
    let g = op.grid;
    let n = g.nx();
    let off = -op.kappa / (g.dx() * g.dx());
    let lower = vec![off; n];
    let upper = vec![off; n];
    let main: Vec<f64> = (0..n)
        .map(|i| op.diag[i] - off * op.coupling_x(i))
        .collect();
    let x = thomas(&lower, &main, &upper, b.values());
    Field::new(g, x).expect("same grid")
}

/// Thomas algorithm for `lower[i] x[i-1] + main[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored. Requires diagonal dominance.
pub fn thomas(lower: &[f64], main: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = main.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / main[0];
    d[0] = rhs[0] / main[0];
    for i in 1..n {
        let m = main[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

fn solve_cg(op: &HelmholtzOp<'_>, b: &Field, lin_tol: f64) -> Result<Field> {
    let g = op.grid;
    let n = g.len();
    let (idx2, idy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let inv_diag: Vec<f64> = (0..n)
        .map(|k| {
            let (i, j) = (k % g.nx(), k / g.nx());
            1.0 / (op.diag[k] + op.kappa * (op.coupling_x(i) * idx2 + op.coupling_y(j) * idy2))
        })
        .collect();

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b.values(), b.values()).sqrt();
    if bnorm == 0.0 {
        return Ok(Field::zeros(g));
    }
    let target = lin_tol * bnorm;

    // warm start from the Jacobi guess
    let mut x: Vec<f64> = b.values().iter().zip(&inv_diag).map(|(b, m)| b * m).collect();
    let mut r: Vec<f64> = {
        let ax = op.apply(&Field::new(g, x.clone())?);
        b.values().iter().zip(ax.values()).map(|(b, a)| b - a).collect()
    };
    let mut zv: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let max_iter = 10 * n + 100;
    let mut rnorm = dot(&r, &r).sqrt();
    for _ in 0..max_iter {
        if rnorm <= target {
            return Ok(Field::new(g, x)?);
        }
        let ap = op.apply(&Field::new(g, p.clone())?).into_values();
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rnorm = dot(&r, &r).sqrt();
        for k in 0..n {
            zv[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = zv[k] + beta * p[k];
        }
    }
    // recurrence residual can drift from the true one; trust the true one
    let xf = Field::new(g, x)?;
    let true_ratio = op.residual_ratio(&xf, b);
    if true_ratio <= lin_tol {
        Ok(xf)
    } else {
        Err(Error::SolverDiverged {
            iterations: max_iter,
            residual: true_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;

    fn bumpy(g: Grid) -> Field {
        Field::from_fn(g, |x, y| 1.0 + (7.0 * x).sin() * (3.0 * y + 0.2).cos() + x * y)
    }

    #[test]
    fn thomas_small_system() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1, 0, 1] → x = [1, 1, 1]
        let x = thomas(&[0.0, -1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0, 0.0], &[1.0, 0.0, 1.0]);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_contract_1d_and_2d() {
        for g in [Grid::line(50, 1.0).unwrap(), Grid::rect(24, 17, 1.0, 0.8).unwrap()] {
            let diag: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.01 * (k % 5) as f64).collect();
            let op = HelmholtzOp { grid: g, diag: &diag, kappa: 0.05 };
            let b = bumpy(g);
            let x = solve(&op, &b, 1e-11).unwrap();
            assert!(op.residual_ratio(&x, &b) <= 1e-11, "{}", op.residual_ratio(&x, &b));
        }
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        for g in [Grid::line(64, 1.0).unwrap(), Grid::rect(16, 16, 1.0, 1.0).unwrap()] {
            let diag = vec![1.0; g.len()];
            let op = HelmholtzOp { grid: g, diag: &diag, kappa: 0.3 };
            let b = bumpy(g);
            let x = solve(&op, &b, 1e-12).unwrap();
            let rel = (integrate(&x) - integrate(&b)).abs() / integrate(&b);
            assert!(rel < 1e-10, "{rel}");
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::rect(8, 8, 1.0, 1.0).unwrap();
        let diag = vec![2.0; g.len()];
        let op = HelmholtzOp { grid: g, diag: &diag, kappa: 1.0 };
        let x = solve(&op, &Field::zeros(g), 1e-10).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }
}
