use std::time::Instant;

use super::coupled::{solve_coupled, CoupledSolveOptions};
use super::standard::{check_start, exhausted};
use super::{
    build_pool, per_region, record, solution_from_state, termination_check, AladinError, AladinState, CoupledStep,
    IterationTrace, LinearSolveStats, Reference, RunOutcome, SolverConfig,
};
use crate::linalg::{cg_solve, CgOptions, Csr};
use crate::model::{self, GaussNewtonOperator, StateLayout};
use crate::partition::{ConsensusSystem, RegionModel};
use crate::problem::DistributedProblem;

/// One regional Gauss-Newton step with its sensitivities.
#[derive(Clone, Debug)]
pub struct DecoupledStep {
    /// `x̂ = z + p`
    pub x_hat: Vec<f64>,
    /// `J(x̂)`
    pub jacobian: Csr<f64>,
    /// `J(x̂)ᵀ r(x̂)`
    pub gradient: Vec<f64>,
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// Solves `(J_zᵀJ_z + ρΣ) p = −J_zᵀ r_z` at `z` and evaluates the
/// Jacobian and gradient at `x̂ = z + p`.
pub fn decoupled_linear_step(
    region: &RegionModel,
    layout: &StateLayout,
    z: &[f64],
    rho: f64,
    sigma: Option<&[f64]>,
    cg: &CgOptions,
) -> Result<DecoupledStep, AladinError> {
    let r = model::residual(region, layout, z)?;
    let j = model::jacobian(region, layout, z)?;
    let rhs: Vec<f64> = j.apply_transpose(&r).into_iter().map(|g| -g).collect();
    let op = GaussNewtonOperator {
        jacobian: &j,
        shift: rho,
        weights: sigma,
    };
    let out = cg_solve(&op, &rhs, &vec![0.0; z.len()], cg).map_err(AladinError::Linalg)?;
    let x_hat: Vec<f64> = z.iter().zip(&out.x).map(|(a, b)| a + b).collect();
    let r_hat = model::residual(region, layout, &x_hat)?;
    let jacobian = model::jacobian(region, layout, &x_hat)?;
    let gradient = jacobian.apply_transpose(&r_hat);
    Ok(DecoupledStep {
        x_hat,
        jacobian,
        gradient,
        cg_iterations: out.iterations,
        cg_converged: out.converged,
    })
}

/// `(H + μAᵀA)Δx = −μAᵀ(Ax̂ − b) − g`: the coupled system with `λ = 0`.
pub fn coupled_linear_step(
    jacobians: &[Csr<f64>],
    gradient: &[f64],
    consensus: &ConsensusSystem,
    x_hat: &[f64],
    mu: f64,
    opts: &CoupledSolveOptions,
) -> Result<CoupledStep, AladinError> {
    let zero = vec![0.0; consensus.n_rows()];
    solve_coupled(jacobians, gradient, consensus, x_hat, &zero, mu, opts)
}

/// Gauss-Newton inexact ALADIN: one linear solve per region and one
/// coupled solve per iteration, with the multipliers held at zero.
pub fn run_gn_inexact(
    problem: &DistributedProblem,
    cfg: &SolverConfig,
    x0: &[f64],
    reference: Option<&Reference>,
) -> Result<RunOutcome, AladinError> {
    let start = Instant::now();
    let n_reg = problem.n_regions();
    let block_dims: Vec<usize> = problem.layouts.iter().map(|l| l.dim()).collect();
    cfg.validate(&block_dims)?;
    check_start(problem, x0)?;
    let pool = build_pool(cfg.threads)?;
    let cs = &problem.consensus;
    let lambda = vec![0.0; cs.n_rows()];

    let mut z = x0.to_vec();
    let mut trace = IterationTrace::default();
    let mut stats = LinearSolveStats::default();

    for iter in 1..=cfg.max_outer_iter {
        let steps = per_region(pool.as_ref(), n_reg, |l| {
            decoupled_linear_step(
                &problem.regions()[l],
                &problem.layouts[l],
                problem.block(&z, l),
                cfg.rho,
                cfg.sigma_for(l),
                &cfg.cg,
            )
        });
        let mut x_hat = Vec::with_capacity(z.len());
        let mut gradient = Vec::with_capacity(z.len());
        let mut jacobians = Vec::with_capacity(n_reg);
        for step in steps {
            let step = step?;
            stats.record(step.cg_iterations, step.cg_converged);
            x_hat.extend(step.x_hat);
            gradient.extend(step.gradient);
            jacobians.push(step.jacobian);
        }

        let term = termination_check(&x_hat, &z, cs, cfg.sigma.as_deref(), cfg.eps);
        trace.records.push(record(problem, iter, &x_hat, &term, reference));
        if term.converged {
            return Ok(RunOutcome {
                solution: solution_from_state(problem, &x_hat, iter, start),
                trace,
                state: AladinState {
                    x: x_hat,
                    z,
                    lambda,
                    iteration: iter,
                },
                stats,
            });
        }
        if iter == cfg.max_outer_iter {
            return Err(exhausted(problem, x_hat, z, lambda, iter, trace, stats, start));
        }

        let step = coupled_linear_step(&jacobians, &gradient, cs, &x_hat, cfg.mu, &cfg.coupled)?;
        stats.record_coupled(step.cg_iterations, step.cg_converged);
        z = x_hat.iter().zip(&step.dx).map(|(a, d)| a + d).collect();
    }
    Err(exhausted(problem, z.clone(), z, lambda, 0, trace, stats, start))
}
