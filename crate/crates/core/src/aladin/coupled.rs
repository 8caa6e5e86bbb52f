use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::AladinError;
use crate::linalg::{pcg_solve, CgOptions, Csr, Jacobi, LinalgError, LinearOperator, Preconditioner};
use crate::partition::ConsensusSystem;

/// Preconditioner of the coupled CG.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoupledPreconditioner {
    /// Inverse diagonal of the coupled matrix.
    Jacobi,
    /// Dense Cholesky factor of each region's diagonal block.
    BlockJacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledSolveOptions {
    /// Tolerance and cap; `jacobi` is ignored in favour of `preconditioner`.
    pub cg: CgOptions,
    /// Iteration cap as a multiple of the dimension when `cg.max_iter` is
    /// unset.
    pub cap_factor: usize,
    pub preconditioner: CoupledPreconditioner,
    /// Regions with more unknowns than this use the Jacobi block instead of
    /// a dense factor.
    pub max_dense_block: usize,
}

impl Default for CoupledSolveOptions {
    fn default() -> Self {
        CoupledSolveOptions {
            cg: CgOptions::default(),
            cap_factor: 10,
            preconditioner: CoupledPreconditioner::BlockJacobi,
            max_dense_block: 1500,
        }
    }
}

/// `(blockdiag(J_ℓᵀJ_ℓ) + μAᵀA + δI) w`, never formed explicitly.
pub struct CoupledOperator<'a> {
    pub jacobians: &'a [Csr<f64>],
    pub consensus: &'a ConsensusSystem,
    pub mu: f64,
    pub delta: f64,
}

impl LinearOperator for CoupledOperator<'_> {
    fn dim(&self) -> usize {
        self.consensus.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi = self.delta * xi);
        for (l, j) in self.jacobians.iter().enumerate() {
            let range = self.consensus.offsets[l]..self.consensus.offsets[l + 1];
            let jx = j.apply(&x[range.clone()]);
            j.mul_transpose_add(&jx, &mut y[range]);
        }
        let ax = self.consensus.a.apply(x);
        let scaled: Vec<f64> = ax.iter().map(|v| self.mu * v).collect();
        self.consensus.a.mul_transpose_add(&scaled, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut d = vec![self.delta; self.dim()];
        for (l, j) in self.jacobians.iter().enumerate() {
            let off = self.consensus.offsets[l];
            for (k, v) in j.column_sq_norms().into_iter().enumerate() {
                d[off + k] += v;
            }
        }
        for (k, v) in self.consensus.a.column_sq_norms().into_iter().enumerate() {
            d[k] += self.mu * v;
        }
        Some(d)
    }
}

enum Block {
    Dense(Cholesky<f64, Dyn>),
    Diagonal(Jacobi),
}

/// Inverts, region by region, the diagonal blocks of the coupled matrix:
/// `J_ℓᵀJ_ℓ` plus the region's share of `diag(μAᵀA) + δI`. Only the
/// consensus coupling between regions is left for CG to resolve.
pub struct BlockJacobi {
    offsets: Vec<usize>,
    blocks: Vec<Block>,
}

impl BlockJacobi {
    pub fn new(op: &CoupledOperator, max_dense_block: usize) -> Self {
        let diag = op.diagonal().expect("coupled operator has a diagonal");
        let offsets = op.consensus.offsets.clone();
        let blocks = op
            .jacobians
            .iter()
            .enumerate()
            .map(|(l, j)| {
                let (lo, hi) = (offsets[l], offsets[l + 1]);
                let d = &diag[lo..hi];
                if hi - lo > max_dense_block {
                    return Block::Diagonal(Jacobi::new(d));
                }
                let mut m = DMatrix::<f64>::zeros(hi - lo, hi - lo);
                for i in 0..j.nrows() {
                    let row: Vec<(usize, f64)> = j.row(i).collect();
                    for &(a, va) in &row {
                        for &(b, vb) in &row {
                            m[(a, b)] += va * vb;
                        }
                    }
                }
                // diagonal of JᵀJ is already in `d`; keep only the rest
                for k in 0..hi - lo {
                    m[(k, k)] = d[k];
                }
                match Cholesky::new(m) {
                    Some(c) => Block::Dense(c),
                    None => Block::Diagonal(Jacobi::new(d)),
                }
            })
            .collect();
        BlockJacobi { offsets, blocks }
    }

    /// Number of regions factored densely.
    pub fn dense_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b, Block::Dense(_))).count()
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (l, block) in self.blocks.iter().enumerate() {
            let range = self.offsets[l]..self.offsets[l + 1];
            match block {
                Block::Dense(c) => {
                    let sol = c.solve(&DVector::from_column_slice(&r[range.clone()]));
                    z[range].copy_from_slice(sol.as_slice());
                }
                Block::Diagonal(j) => j.apply(&r[range.clone()], &mut z[range]),
            }
        }
    }
}

/// Solution of the coupled system with slack and multiplier recovered.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledStep {
    pub dx: Vec<f64>,
    /// `s = A(x + Δx) − b`
    pub slack: Vec<f64>,
    /// `λ + μ s`
    pub lambda_qp: Vec<f64>,
    pub cg_iterations: usize,
    /// `false` when CG stopped at its iteration cap.
    pub cg_converged: bool,
}

/// Solves `(H + μAᵀA)Δx = −(g + Aᵀλ + μAᵀ(Ax − b))` with `H` the
/// block-diagonal Gauss-Newton Hessian. A CG breakdown is retried once
/// with a `1e-10` diagonal shift.
pub(crate) fn solve_coupled(
    jacobians: &[Csr<f64>],
    gradient: &[f64],
    consensus: &ConsensusSystem,
    x: &[f64],
    lambda: &[f64],
    mu: f64,
    opts: &CoupledSolveOptions,
) -> Result<CoupledStep, AladinError> {
    let n = consensus.dim();
    let violation = consensus.violation(x);
    let mut rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
    let weighted: Vec<f64> = violation.iter().zip(lambda).map(|(v, l)| -(l + mu * v)).collect();
    consensus.a.mul_transpose_add(&weighted, &mut rhs);

    let cg = CgOptions {
        max_iter: Some(opts.cg.max_iter.unwrap_or(opts.cap_factor * n)),
        ..opts.cg.clone()
    };
    let mut outcome = None;
    for delta in [0.0, 1e-10] {
        let op = CoupledOperator {
            jacobians,
            consensus,
            mu,
            delta,
        };
        let solved = match opts.preconditioner {
            CoupledPreconditioner::Jacobi => {
                let pre = Jacobi::new(&op.diagonal().expect("coupled operator has a diagonal"));
                pcg_solve(&op, &pre, &rhs, &vec![0.0; n], &cg)
            }
            CoupledPreconditioner::BlockJacobi => {
                let pre = BlockJacobi::new(&op, opts.max_dense_block);
                pcg_solve(&op, &pre, &rhs, &vec![0.0; n], &cg)
            }
        };
        match solved {
            Ok(o) => {
                outcome = Some(o);
                break;
            }
            Err(LinalgError::Breakdown { .. }) if delta == 0.0 => continue,
            Err(e @ LinalgError::Breakdown { .. }) => return Err(AladinError::SingularSystem(e)),
            Err(e) => return Err(AladinError::Linalg(e)),
        }
    }
    let outcome = outcome.expect("loop either solves or returns");

    let dx = outcome.x;
    let moved: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
    let slack = consensus.violation(&moved);
    let lambda_qp = lambda.iter().zip(&slack).map(|(l, s)| l + mu * s).collect();
    Ok(CoupledStep {
        dx,
        slack,
        lambda_qp,
        cg_iterations: outcome.iterations,
        cg_converged: outcome.converged,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::aladin::standard::sensitivities;
    use crate::case_io::{load_case, load_partition};
    use crate::linalg::norm_inf;
    use crate::model::ModelVariant;
    use crate::problem::DistributedProblem;

    #[test]
    fn block_preconditioner_matches_diagonal_one() {
        let dir = env!("CARGO_MANIFEST_DIR");
        let case = load_case(format!("{dir}/data/case30.m")).unwrap();
        let spec = load_partition(format!("{dir}/data/case30_partition.json"), &case).unwrap();
        for variant in [ModelVariant::Reduced, ModelVariant::Original] {
            let problem = DistributedProblem::new(&case, &spec, variant).unwrap();
            let x = problem.initial_state();
            let (jacobians, gradient) = sensitivities(&problem, None, &x).unwrap();
            let lambda = vec![0.0; problem.consensus.n_rows()];
            let solve = |preconditioner| {
                let opts = CoupledSolveOptions {
                    preconditioner,
                    ..CoupledSolveOptions::default()
                };
                solve_coupled(&jacobians, &gradient, &problem.consensus, &x, &lambda, 1e2, &opts).unwrap()
            };
            let block = solve(CoupledPreconditioner::BlockJacobi);
            let diag = solve(CoupledPreconditioner::Jacobi);
            assert!(block.cg_converged && diag.cg_converged);
            assert!(block.cg_iterations < diag.cg_iterations, "{variant}");
            let diff: Vec<f64> = block.dx.iter().zip(&diag.dx).map(|(a, b)| a - b).collect();
            assert!(norm_inf(&diff) <= 1e-6 * norm_inf(&block.dx), "{variant}");
        }
    }

    #[test]
    fn block_preconditioner_inverts_uncoupled_blocks() {
        // without consensus rows the preconditioner is the exact inverse
        let dir = env!("CARGO_MANIFEST_DIR");
        let case = load_case(format!("{dir}/data/case9.m")).unwrap();
        let spec = crate::case_io::PartitionSpec::single_region(&case);
        let problem = DistributedProblem::new(&case, &spec, ModelVariant::Reduced).unwrap();
        let x = problem.initial_state();
        let (jacobians, _) = sensitivities(&problem, None, &x).unwrap();
        let op = CoupledOperator {
            jacobians: &jacobians,
            consensus: &problem.consensus,
            mu: 1e2,
            delta: 0.0,
        };
        let pre = BlockJacobi::new(&op, 1500);
        assert_eq!(pre.dense_blocks(), 1);
        let r: Vec<f64> = (0..op.dim()).map(|i| (i as f64).sin()).collect();
        let mut z = vec![0.0; r.len()];
        pre.apply(&r, &mut z);
        let mut back = vec![0.0; r.len()];
        op.apply(&z, &mut back);
        let err: Vec<f64> = back.iter().zip(&r).map(|(a, b)| a - b).collect();
        assert!(norm_inf(&err) <= 1e-9);
    }
}
