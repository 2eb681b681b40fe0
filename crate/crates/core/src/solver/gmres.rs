use super::{dot, norm2, LinearOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Stop once `‖b − A·x‖ ≤ rel_tol·‖b‖`.
    pub rel_tol: f64,
    /// Total Arnoldi steps over all restart cycles.
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iters: 1000,
            restart: 50,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || self.restart == 0 {
            return Err(Error::InvalidInput(format!(
                "krylov config needs rel_tol in (0,1) and restart >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// True residual norm `‖b − A·x‖` of the returned solution.
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual estimates from the Givens recurrence, one vector per restart cycle.
    pub cycle_residuals: Vec<Vec<f64>>,
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
///
/// Solves `A·P·y = b` and returns `x = P·y`, so the monitored residual is
/// the residual of the original system.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    precond: &dyn LinearOperator,
    cfg: &KrylovConfig,
) -> Result<GmresOutcome> {
    cfg.validate()?;
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if precond.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: precond.dim(),
        });
    }

    let b_norm = norm2(rhs);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            solution: x,
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            cycle_residuals: Vec::new(),
        });
    }
    let target = cfg.rel_tol * b_norm;
    let m = cfg.restart.min(n).max(1);

    let mut iterations = 0;
    let mut cycles = Vec::new();
    let mut residual = true_residual(op, rhs, &x);
    let mut r_norm = norm2(&residual);

    while r_norm > target && iterations < cfg.max_iters {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(residual.iter().map(|v| v / r_norm).collect());
        // Hessenberg columns, each of length j + 2
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = r_norm;
        let mut estimates = Vec::with_capacity(m);
        let mut breakdown = false;

        let mut z = vec![0.0; n];
        let mut w = vec![0.0; n];
        for j in 0..m {
            precond.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            let w_norm_before = norm2(&w);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let h_next = norm2(&w);
            col[j + 1] = h_next;

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            hess.push(col);

            iterations += 1;
            let estimate = g[j + 1].abs();
            estimates.push(estimate);

            if h_next <= 1e-14 * w_norm_before.max(f64::MIN_POSITIVE) {
                breakdown = true;
                break;
            }
            if estimate <= target || iterations >= cfg.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution on the triangularized Hessenberg matrix
        let cols = hess.len();
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut acc = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= hess[jj][i] * yj;
            }
            y[i] = if hess[i][i] == 0.0 { 0.0 } else { acc / hess[i][i] };
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        precond.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        cycles.push(estimates);

        residual = true_residual(op, rhs, &x);
        r_norm = norm2(&residual);
        if breakdown && r_norm > target {
            return Err(Error::Breakdown {
                iterations,
                residual: r_norm,
            });
        }
        if breakdown {
            break;
        }
    }

    Ok(GmresOutcome {
        solution: x,
        iterations,
        residual_norm: r_norm,
        converged: r_norm <= target,
        cycle_residuals: cycles,
    })
}

fn true_residual(op: &dyn LinearOperator, rhs: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = op.apply_vec(x);
    rhs.iter().zip(ax).map(|(b, a)| b - a).collect()
}
