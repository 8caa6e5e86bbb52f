use std::time::Instant;

use super::coupled::{solve_coupled, CoupledSolveOptions};
use super::{
    build_pool, per_region, record, solution_from_state, termination_check, AladinError, AladinState, CoupledStep,
    IterationTrace, LinearSolveStats, Reference, RunOutcome, SolverConfig,
};
use crate::linalg::{cg_solve, dot, norm2, norm_inf, CgOptions, Csr, LinalgError};
use crate::model::{self, GaussNewtonOperator, StateLayout};
use crate::partition::{ConsensusSystem, RegionModel};
use crate::problem::DistributedProblem;

/// Minimizer of one regional subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖∇φ(x)‖∞` at exit.
    pub grad_inf: f64,
    pub cg: LinearSolveStats,
}

/// Damped Gauss-Newton on
///
/// ```text
/// φ(y) = ½‖r(y)‖² + cᵀy + ρ/2 (y − z)ᵀ Σ (y − z),   c = A_ℓᵀλ
/// ```
///
/// started at `z`. Each step solves `(JᵀJ + ρΣ) d = −∇φ` and backtracks
/// until the Armijo condition holds. When `d` is already at rounding level
/// relative to `y` the gradient cannot be reduced further and the iterate
/// is accepted.
#[allow(clippy::too_many_arguments)]
pub fn local_nlp_solve(
    region: &RegionModel,
    layout: &StateLayout,
    z: &[f64],
    linear: &[f64],
    rho: f64,
    sigma: Option<&[f64]>,
    inner: &super::InnerConfig,
    tol: f64,
    cg: &CgOptions,
) -> Result<LocalSolution, AladinError> {
    let n = z.len();
    let w = |i: usize| sigma.map_or(1.0, |s| s[i]);
    // φ(y + d) − φ(y) without forming φ itself: the linear term cᵀy is
    // typically much larger than the change and would cancel.
    let change = |y: &[f64], r: &[f64], d: &[f64]| -> Result<f64, AladinError> {
        let trial: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + b).collect();
        let rt = model::residual(region, layout, &trial)?;
        let df: f64 = rt.iter().zip(r).map(|(a, b)| 0.5 * (a - b) * (a + b)).sum();
        let mut dprox = 0.0;
        for i in 0..n {
            dprox += w(i) * d[i] * (2.0 * (y[i] - z[i]) + d[i]);
        }
        Ok(df + dot(linear, d) + 0.5 * rho * dprox)
    };

    let mut y = z.to_vec();
    let mut stats = LinearSolveStats::default();
    let mut grad_inf = f64::INFINITY;
    for it in 0..=inner.max_iter {
        let r = model::residual(region, layout, &y)?;
        let j = model::jacobian(region, layout, &y)?;
        let mut grad = j.apply_transpose(&r);
        for i in 0..n {
            grad[i] += linear[i] + rho * w(i) * (y[i] - z[i]);
        }
        grad_inf = norm_inf(&grad);
        if grad_inf <= tol {
            stats.inner_iterations = it;
            return Ok(LocalSolution { x: y, iterations: it, grad_inf, cg: stats });
        }
        if it == inner.max_iter {
            break;
        }

        let op = GaussNewtonOperator {
            jacobian: &j,
            shift: rho,
            weights: sigma,
        };
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let out = cg_solve(&op, &rhs, &vec![0.0; n], cg).map_err(AladinError::Linalg)?;
        stats.record(out.iterations, out.converged);
        let d = out.x;

        let scale = norm_inf(&y).max(1.0);
        if norm_inf(&d) <= 4.0 * f64::EPSILON * scale {
            stats.inner_iterations = it;
            return Ok(LocalSolution { x: y, iterations: it, grad_inf, cg: stats });
        }

        // Residual entries carry an absolute rounding error of a few ulps
        // of their largest summand. Once the predicted decrease is below
        // what that error lets φ resolve, the Armijo test only sees noise
        // and the full Gauss-Newton step is taken.
        let slope = dot(&grad, &d);
        if -slope <= 1e-13 * norm2(&r) {
            y.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let step: Vec<f64> = d.iter().map(|v| t * v).collect();
            if change(&y, &r, &step)? <= inner.armijo_c * t * slope {
                y.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
                accepted = true;
                break;
            }
            t *= inner.backtrack;
        }
        if !accepted {
            break;
        }
    }
    Err(AladinError::InnerNoConvergence {
        region: region.id,
        iterations: inner.max_iter,
        grad_inf,
        last: y,
    })
}

/// `(H + μAᵀA)Δx = −(g + Aᵀλ + μAᵀ(Ax − b))` with `H` the block-diagonal
/// Gauss-Newton Hessian built from the regional Jacobians at `x`.
pub fn coupled_qp_solve(
    jacobians: &[Csr<f64>],
    gradient: &[f64],
    consensus: &ConsensusSystem,
    x: &[f64],
    lambda: &[f64],
    mu: f64,
    opts: &CoupledSolveOptions,
) -> Result<CoupledStep, AladinError> {
    solve_coupled(jacobians, gradient, consensus, x, lambda, mu, opts)
}

/// Full ALADIN: regularized local NLPs, a coupled QP and `λ ← λ_QP`.
pub fn run_standard(
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
    let tol = cfg.inner_tol();

    let mut z = x0.to_vec();
    let mut lambda = vec![0.0; cs.n_rows()];
    let mut trace = IterationTrace::default();
    let mut stats = LinearSolveStats::default();

    for iter in 1..=cfg.max_outer_iter {
        let linear = cs.a.apply_transpose(&lambda);
        let locals = per_region(pool.as_ref(), n_reg, |l| {
            let range = cs.offsets[l]..cs.offsets[l + 1];
            local_nlp_solve(
                &problem.regions()[l],
                &problem.layouts[l],
                &z[range.clone()],
                &linear[range],
                cfg.rho,
                cfg.sigma_for(l),
                &cfg.inner,
                tol,
                &cfg.cg,
            )
        });
        let mut x = Vec::with_capacity(z.len());
        for local in locals {
            let local = local?;
            stats.merge(&local.cg);
            x.extend(local.x);
        }

        let term = termination_check(&x, &z, cs, cfg.sigma.as_deref(), cfg.eps);
        trace.records.push(record(problem, iter, &x, &term, reference));
        if term.converged {
            return Ok(RunOutcome {
                solution: solution_from_state(problem, &x, iter, start),
                trace,
                state: AladinState { x, z, lambda, iteration: iter },
                stats,
            });
        }

        let (jacobians, gradient) = sensitivities(problem, pool.as_ref(), &x)?;
        let step = coupled_qp_solve(&jacobians, &gradient, cs, &x, &lambda, cfg.mu, &cfg.coupled)?;
        stats.record_coupled(step.cg_iterations, step.cg_converged);
        let next_z: Vec<f64> = x.iter().zip(&step.dx).map(|(a, d)| a + d).collect();
        if iter == cfg.max_outer_iter {
            return Err(exhausted(problem, x, z, lambda, iter, trace, stats, start));
        }
        z = next_z;
        lambda = step.lambda_qp;
    }
    Err(exhausted(problem, z.clone(), z, lambda, 0, trace, stats, start))
}

pub(crate) fn check_start(problem: &DistributedProblem, x0: &[f64]) -> Result<(), AladinError> {
    if x0.len() != problem.dim() {
        return Err(AladinError::Linalg(LinalgError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        }));
    }
    Ok(())
}

/// Regional Jacobians and the stacked gradient `Jᵀr` at `x`.
pub(crate) fn sensitivities(
    problem: &DistributedProblem,
    pool: Option<&rayon::ThreadPool>,
    x: &[f64],
) -> Result<(Vec<Csr<f64>>, Vec<f64>), AladinError> {
    let parts = per_region(pool, problem.n_regions(), |l| {
        let (region, layout) = (&problem.regions()[l], &problem.layouts[l]);
        let xl = problem.block(x, l);
        let r = model::residual(region, layout, xl)?;
        let j = model::jacobian(region, layout, xl)?;
        let g = j.apply_transpose(&r);
        Ok::<_, AladinError>((j, g))
    });
    let mut jacobians = Vec::with_capacity(parts.len());
    let mut gradient = Vec::with_capacity(x.len());
    for part in parts {
        let (j, g) = part?;
        jacobians.push(j);
        gradient.extend(g);
    }
    Ok((jacobians, gradient))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn exhausted(
    problem: &DistributedProblem,
    x: Vec<f64>,
    z: Vec<f64>,
    lambda: Vec<f64>,
    iteration: usize,
    trace: IterationTrace,
    stats: LinearSolveStats,
    start: Instant,
) -> AladinError {
    AladinError::MaxIterationsExceeded(Box::new(RunOutcome {
        solution: solution_from_state(problem, &x, iteration, start),
        trace,
        state: AladinState { x, z, lambda, iteration },
        stats,
    }))
}
