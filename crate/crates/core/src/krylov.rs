//! Conjugate gradients and restarted GMRES for the loop Gram system.
//!
//! Both start from `x = 0` and stop on the right-hand-side relative
//! residual `‖b - A x‖ / ‖b‖ ≤ tolerance`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Krylov dimension between GMRES restarts.
    pub restart: usize,
    pub preconditioner: Preconditioner,
}

impl Default for IterSettings {
    fn default() -> Self {
        Self {
            tolerance: 0.01,
            max_iterations: 100_000,
            restart: 60,
            preconditioner: Preconditioner::None,
        }
    }
}

impl IterSettings {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Argument(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if self.restart == 0 {
            return Err(Error::Argument("GMRES restart length must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `‖b - A x‖ / ‖b‖`, recomputed from `x`.
    pub relative_residual: f64,
    /// Relative residual after each iteration, starting with 1 at `x = 0`.
    pub residual_history: Vec<f64>,
    /// CG only: `½ xᵀA x - bᵀx` after each iteration.
    pub energy_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dims(a: &SparseMatrix, b: &[f64]) -> Result<()> {
    if a.nrows != a.ncols || a.nrows != b.len() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, right-hand side has length {}",
            a.nrows,
            a.ncols,
            b.len()
        )));
    }
    Ok(())
}

fn inverse_diagonal(a: &SparseMatrix, kind: Preconditioner) -> Result<Option<Vec<f64>>> {
    match kind {
        Preconditioner::None => Ok(None),
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d == 0.0 {
                    Err(Error::Singular(format!("zero diagonal at row {i}")))
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    norm(&r) / bnorm
}

/// Conjugate gradients for a symmetric positive definite `a`.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], settings: &IterSettings) -> Result<(Vec<f64>, SolveStats)> {
    settings.validate()?;
    check_dims(a, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let minv = inverse_diagonal(a, settings.preconditioner)?;
    let precondition = |r: &[f64]| -> Vec<f64> {
        match &minv {
            Some(d) => r.iter().zip(d).map(|(ri, di)| ri * di).collect(),
            None => r.to_vec(),
        }
    };

    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut stats = SolveStats {
        residual_history: vec![1.0],
        energy_history: vec![0.0],
        ..Default::default()
    };
    for k in 1..=settings.max_iterations {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::NotPositiveDefinite { iteration: k, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        stats.iterations = k;
        stats.residual_history.push(rel);
        // ½xᵀAx - bᵀx with Ax = b - r
        let energy = -0.5 * x.iter().zip(b.iter().zip(&r)).map(|(xi, (bi, ri))| xi * (bi + ri)).sum::<f64>();
        stats.energy_history.push(energy);
        if rel <= settings.tolerance {
            stats.relative_residual = relative_residual(a, &x, b, bnorm);
            return Ok((x, stats));
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: stats.iterations,
        residual: *stats.residual_history.last().unwrap(),
        history: stats.residual_history,
    })
}

/// Restarted GMRES with optional right Jacobi preconditioning.
pub fn gmres_solve(a: &SparseMatrix, b: &[f64], settings: &IterSettings) -> Result<(Vec<f64>, SolveStats)> {
    settings.validate()?;
    check_dims(a, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let minv = inverse_diagonal(a, settings.preconditioner)?;
    let apply_minv = |v: &[f64]| -> Vec<f64> {
        match &minv {
            Some(d) => v.iter().zip(d).map(|(vi, di)| vi * di).collect(),
            None => v.to_vec(),
        }
    };

    let m = settings.restart.min(n).max(1);
    let mut stats = SolveStats {
        residual_history: vec![1.0],
        ..Default::default()
    };
    let mut w = vec![0.0; n];
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= settings.tolerance {
            stats.relative_residual = beta / bnorm;
            return Ok((x, stats));
        }
        if stats.iterations >= settings.max_iterations {
            return Err(Error::NoConvergence {
                iterations: stats.iterations,
                residual: beta / bnorm,
                history: stats.residual_history,
            });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            a.mul_vec_into(&apply_minv(&basis[j]), &mut w);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                return Err(Error::Singular("GMRES breakdown: zero Hessenberg column".into()));
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            used = j + 1;
            stats.iterations += 1;
            let rel = g[j + 1].abs() / bnorm;
            stats.residual_history.push(rel);
            if rel <= settings.tolerance || hnext <= 1e-14 * beta || stats.iterations >= settings.max_iterations {
                break;
            }
            basis.push(w.iter().map(|wk| wk / hnext).collect());
        }

        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (u, v) in update.iter_mut().zip(vi) {
                *u += yi * v;
            }
        }
        for (xi, ui) in x.iter_mut().zip(apply_minv(&update)) {
            *xi += ui;
        }
    }
}
