//! Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{MattingError, Result};
use crate::sparse::{dot, norm, CsrMatrix};

/// Outcome of one iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|b - A x| / |b|` evaluated from the returned solution.
    pub relative_residual: f64,
    pub seconds: f64,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iterations={} relative_residual={:e} seconds={:.6}",
            self.iterations, self.relative_residual, self.seconds
        )
    }
}

/// Solves `A x = b` from the initial guess `x`, stopping at `|b - A x| <= tol |b|`.
pub fn solve(a: &CsrMatrix, b: &[f64], mut x: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = b.len();
    if a.nrows() != n || a.ncols() != n || x.len() != n {
        return Err(MattingError::InvalidInput(format!(
            "system is {}x{} with rhs {} and guess {}",
            a.nrows(),
            a.ncols(),
            n,
            x.len()
        )));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            seconds: start.elapsed().as_secs_f64(),
        };
        return Ok((vec![0.0; n], report));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| {
        a.mul_vec_into(x, ax);
        r.par_iter_mut()
            .zip(b.par_iter().zip(ax.par_iter()))
            .for_each(|(ri, (bi, axi))| *ri = bi - axi);
    };
    residual(&x, &mut ax, &mut r);
    let mut rel = norm(&r) / b_norm;

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while rel > tol && iterations < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        // loss of definiteness, or NaN from a breakdown
        if pap.is_nan() || pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += step * pi);
        r.par_iter_mut()
            .zip(ap.par_iter())
            .for_each(|(ri, api)| *ri -= step * api);
        iterations += 1;
        rel = norm(&r) / b_norm;
        if rel <= tol {
            // the recursive residual drifts; confirm against the true one before stopping
            residual(&x, &mut ax, &mut r);
            rel = norm(&r) / b_norm;
            if rel <= tol {
                break;
            }
            z.par_iter_mut()
                .zip(r.par_iter().zip(inv_diag.par_iter()))
                .for_each(|(zi, (ri, di))| *zi = ri * di);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }

    residual(&x, &mut ax, &mut r);
    let report = SolveReport {
        iterations,
        relative_residual: norm(&r) / b_norm,
        seconds: start.elapsed().as_secs_f64(),
    };
    if report.relative_residual <= tol {
        Ok((x, report))
    } else {
        Err(MattingError::NotConverged(report))
    }
}
