//! Centralized Newton-Raphson power flow in polar coordinates.
//!
//! Serves as the reference solution for the distributed solvers. The
//! Jacobian is built from the complex derivatives `∂S/∂θ` and `∂S/∂|V|`
//! rather than from the real-valued partials in [`crate::model`], so the
//! two code paths stay independent.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::{BusType, RawCase};
use crate::grid::{initial_voltages, injections, system_ybus, AdmittanceMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NrError {
    #[error("Newton-Raphson did not converge after {iterations} iterations (mismatch {mismatch:e})")]
    NoConvergence { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
}

/// Per-bus power-flow solution in case bus order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfSolution {
    pub bus_ids: Vec<usize>,
    /// Radians.
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    /// Net active injection, p.u.
    pub p: Vec<f64>,
    /// Net reactive injection, p.u.
    pub q: Vec<f64>,
    pub iterations: usize,
    pub final_mismatch: f64,
    pub wall_time_s: f64,
}

impl PfSolution {
    pub fn index_of(&self, bus: usize) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    /// Largest absolute per-bus differences `(θ, v, p, q)` against `other`,
    /// matched by bus id.
    pub fn max_deviation(&self, other: &PfSolution) -> [f64; 4] {
        let mut out = [0.0f64; 4];
        for (i, bus) in self.bus_ids.iter().enumerate() {
            let Some(k) = other.index_of(*bus) else {
                return [f64::INFINITY; 4];
            };
            out[0] = out[0].max((self.theta[i] - other.theta[k]).abs());
            out[1] = out[1].max((self.v[i] - other.v[k]).abs());
            out[2] = out[2].max((self.p[i] - other.p[k]).abs());
            out[3] = out[3].max((self.q[i] - other.q[k]).abs());
        }
        out
    }
}

/// Solves from the case-file initial guess.
pub fn nr_solve(case: &RawCase, tol: f64, max_iter: usize) -> Result<PfSolution, NrError> {
    let (theta, v) = initial_voltages(case);
    nr_solve_from(case, theta, v, tol, max_iter)
}

/// Solves from a caller-supplied initial `(θ, v)`. The REF angle and the
/// REF/PV magnitudes are taken from the case setpoints regardless.
pub fn nr_solve_from(
    case: &RawCase,
    mut theta: Vec<f64>,
    mut v: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<PfSolution, NrError> {
    let start = Instant::now();
    let y = system_ybus(case);
    let spec = injections(case, &case.bus_ids());
    let mut pvpq = Vec::new();
    let mut pq = Vec::new();
    for (i, b) in spec.buses.iter().enumerate() {
        match b.bus_type {
            BusType::Pv => pvpq.push(i),
            BusType::Pq => {
                pvpq.push(i);
                pq.push(i);
            }
            BusType::Ref => {
                theta[i] = b.theta_set.unwrap_or(theta[i]);
            }
        }
        if let Some(vs) = b.v_set {
            v[i] = vs;
        }
    }
    let sched: Vec<Complex64> = spec.buses.iter().map(|b| Complex64::new(b.p, b.q)).collect();

    let mut iterations = 0;
    loop {
        let volt = phasors(&theta, &v);
        let s = complex_power(&y, &volt);
        let f: Vec<f64> = pvpq
            .iter()
            .map(|&i| s[i].re - sched[i].re)
            .chain(pq.iter().map(|&i| s[i].im - sched[i].im))
            .collect();
        let mismatch = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !mismatch.is_finite() || mismatch > 1e10 {
            return Err(NrError::NoConvergence { iterations, mismatch });
        }
        if mismatch <= tol {
            let (p, q) = s.iter().map(|c| (c.re, c.im)).unzip();
            return Ok(PfSolution {
                bus_ids: case.bus_ids(),
                theta,
                v,
                p,
                q,
                iterations,
                final_mismatch: mismatch,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
        if iterations >= max_iter {
            return Err(NrError::NoConvergence { iterations, mismatch });
        }

        let jac = newton_jacobian(&y, &volt, &pvpq, &pq);
        let rhs = DVector::from_vec(f).map(|x| -x);
        let dx = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|x| x.is_finite()))
            .ok_or(NrError::SingularJacobian { iteration: iterations })?;
        for (k, &i) in pvpq.iter().enumerate() {
            theta[i] += dx[k];
        }
        for (k, &i) in pq.iter().enumerate() {
            v[i] += dx[pvpq.len() + k];
        }
        iterations += 1;
    }
}

fn phasors(theta: &[f64], v: &[f64]) -> Vec<Complex64> {
    theta.iter().zip(v).map(|(&t, &m)| Complex64::from_polar(m, t)).collect()
}

/// `S = V ∘ conj(Y V)`
pub fn complex_power(y: &AdmittanceMatrix, volt: &[Complex64]) -> Vec<Complex64> {
    (0..y.dim())
        .map(|i| {
            let current: Complex64 = y.row(i).map(|(k, yik)| yik * volt[k]).sum();
            volt[i] * current.conj()
        })
        .collect()
}

/// Real Newton Jacobian `[∂P/∂θ ∂P/∂v; ∂Q/∂θ ∂Q/∂v]` restricted to the
/// unknowns, from
///
/// ```text
/// ∂S/∂θ = j·diag(V)·conj(diag(I) − Y·diag(V))
/// ∂S/∂|V| = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|)
/// ```
fn newton_jacobian(y: &AdmittanceMatrix, volt: &[Complex64], pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
    let n = y.dim();
    let current: Vec<Complex64> = (0..n).map(|i| y.row(i).map(|(k, yik)| yik * volt[k]).sum()).collect();
    let unit: Vec<Complex64> = volt.iter().map(|v| v / v.norm()).collect();
    let j = Complex64::i();

    let mut ds_dth = vec![vec![Complex64::default(); n]; n];
    let mut ds_dv = vec![vec![Complex64::default(); n]; n];
    for i in 0..n {
        for (k, yik) in y.row(i) {
            ds_dth[i][k] += j * volt[i] * (-(yik * volt[k])).conj();
            ds_dv[i][k] += volt[i] * (yik * unit[k]).conj();
        }
        ds_dth[i][i] += j * volt[i] * current[i].conj();
        ds_dv[i][i] += current[i].conj() * unit[i];
    }

    let (npvpq, npq) = (pvpq.len(), pq.len());
    let mut jac = DMatrix::zeros(npvpq + npq, npvpq + npq);
    for (r, &i) in pvpq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(r, c)] = ds_dth[i][k].re;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(r, npvpq + c)] = ds_dv[i][k].re;
        }
    }
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(npvpq + r, c)] = ds_dth[i][k].im;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(npvpq + r, npvpq + c)] = ds_dv[i][k].im;
        }
    }
    jac
}
