//! Distributed coordinators for the least-squares power-flow problem
//!
//! ```text
//! min_χ  Σ_ℓ ½‖r_ℓ(χ_ℓ)‖²   s.t.  A χ = b
//! ```
//!
//! [`run_standard`] alternates regularized local NLPs with a coupled QP and
//! a full dual update. [`run_gn_inexact`] keeps the dual at zero and
//! replaces both steps with Gauss-Newton linear systems. Both stop once
//!
//! ```text
//! ‖A x − b‖∞ ≤ ε   and   max_ℓ ‖Σ_ℓ (x_ℓ − z_ℓ)‖∞ ≤ ε.
//! ```
//!
//! Regional work in the decoupled step only reads shared model data and
//! writes its own block; with `threads > 1` it runs on a rayon pool and
//! produces the same numbers as the inline path.

mod config;
mod coupled;
mod inexact;
mod standard;
mod trace;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{InnerConfig, SolverConfig};
pub use coupled::{BlockJacobi, CoupledOperator, CoupledPreconditioner, CoupledSolveOptions, CoupledStep};
pub use inexact::{coupled_linear_step, decoupled_linear_step, run_gn_inexact, DecoupledStep};
pub use standard::{coupled_qp_solve, local_nlp_solve, run_standard, LocalSolution};
pub use trace::{IterationRecord, IterationTrace};

use crate::linalg::{norm_inf, LinalgError};
use crate::model::ModelError;
use crate::nr::PfSolution;
use crate::partition::ConsensusSystem;
use crate::problem::DistributedProblem;

#[derive(Debug, Error)]
pub enum AladinError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("local NLP of region {region} did not converge in {iterations} iterations (gradient {grad_inf:e})")]
    InnerNoConvergence {
        region: usize,
        iterations: usize,
        grad_inf: f64,
        last: Vec<f64>,
    },
    #[error("coupled system is singular: {0}")]
    SingularSystem(LinalgError),
    #[error("no convergence within {} outer iterations", .0.trace.len())]
    MaxIterationsExceeded(Box<RunOutcome>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(LinalgError),
}

/// Iterates of the coordinator.
#[derive(Clone, Debug, PartialEq)]
pub struct AladinState {
    /// Stacked local iterates after the decoupled step.
    pub x: Vec<f64>,
    /// Stacked coordinator iterates the decoupled step started from.
    pub z: Vec<f64>,
    /// Consensus multipliers; stays zero in the Gauss-Newton variant.
    pub lambda: Vec<f64>,
    pub iteration: usize,
}

/// Counters over all CG solves of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearSolveStats {
    pub solves: usize,
    pub iterations: usize,
    /// Solves that hit the iteration cap before the tolerance.
    pub capped: usize,
    /// Local NLP iterations of the standard variant.
    pub inner_iterations: usize,
    /// Share of `solves` and `iterations` spent on the coupled system.
    pub coupled_solves: usize,
    pub coupled_iterations: usize,
}

impl LinearSolveStats {
    pub(crate) fn record(&mut self, iterations: usize, converged: bool) {
        self.solves += 1;
        self.iterations += iterations;
        if !converged {
            self.capped += 1;
        }
    }

    pub(crate) fn merge(&mut self, other: &LinearSolveStats) {
        self.solves += other.solves;
        self.iterations += other.iterations;
        self.capped += other.capped;
        self.inner_iterations += other.inner_iterations;
        self.coupled_solves += other.coupled_solves;
        self.coupled_iterations += other.coupled_iterations;
    }

    pub(crate) fn record_coupled(&mut self, iterations: usize, converged: bool) {
        self.record(iterations, converged);
        self.coupled_solves += 1;
        self.coupled_iterations += iterations;
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub solution: PfSolution,
    pub trace: IterationTrace,
    pub state: AladinState,
    pub stats: LinearSolveStats,
}

/// Known solution used for the deviation and gap columns of the trace.
#[derive(Clone, Debug)]
pub struct Reference {
    pub state: Vec<f64>,
    pub objective: f64,
}

impl Reference {
    pub fn from_solution(problem: &DistributedProblem, sol: &PfSolution) -> Self {
        let state = problem.embed(sol);
        let objective = problem.objective(&state);
        Reference { state, objective }
    }
}

/// Result of the termination test; both residuals are always filled in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Termination {
    pub converged: bool,
    pub primal: f64,
    pub dual: f64,
}

pub fn termination_check(
    x: &[f64],
    z: &[f64],
    consensus: &ConsensusSystem,
    sigma: Option<&[Vec<f64>]>,
    eps: f64,
) -> Termination {
    let primal = norm_inf(&consensus.violation(x));
    let mut dual = 0.0f64;
    for l in 0..consensus.offsets.len() - 1 {
        let range = consensus.offsets[l]..consensus.offsets[l + 1];
        for (k, i) in range.clone().enumerate() {
            let w = sigma.map_or(1.0, |s| s[l][k]);
            dual = dual.max((w * (x[i] - z[i])).abs());
        }
    }
    Termination {
        converged: primal <= eps && dual <= eps,
        primal,
        dual,
    }
}

pub(crate) fn record(
    problem: &DistributedProblem,
    iter: usize,
    x: &[f64],
    term: &Termination,
    reference: Option<&Reference>,
) -> IterationRecord {
    let objective = problem.objective(x);
    let (gap, deviation_inf) = match reference {
        Some(r) => {
            let dev = x.iter().zip(&r.state).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ((objective - r.objective).abs(), Some(dev))
        }
        None => (objective, None),
    };
    IterationRecord {
        iter,
        primal_inf: term.primal,
        dual_inf: term.dual,
        objective,
        gap,
        deviation_inf,
    }
}

pub(crate) fn solution_from_state(
    problem: &DistributedProblem,
    x: &[f64],
    iterations: usize,
    start: std::time::Instant,
) -> PfSolution {
    let (theta, v, p, q) = problem.extract(x);
    PfSolution {
        bus_ids: problem.bus_ids.clone(),
        theta,
        v,
        p,
        q,
        iterations,
        final_mismatch: problem.residual_inf(x),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Runs `f` for every region, on a pool when `threads > 1`. Results come
/// back in region order either way.
pub(crate) fn per_region<T, F>(pool: Option<&rayon::ThreadPool>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match pool {
        Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

pub(crate) fn build_pool(threads: usize) -> Result<Option<rayon::ThreadPool>, AladinError> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| AladinError::InvalidConfig(format!("thread pool: {e}")))
}
