use serde::{Deserialize, Serialize};

use super::{AladinError, CoupledSolveOptions};
use crate::linalg::CgOptions;

/// Settings of the damped Gauss-Newton solver used for the local NLPs of
/// the standard variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    /// Gradient infinity-norm tolerance; `None` means `min(1e-10, ε/10)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            tol: None,
            max_iter: 50,
            armijo_c: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Penalty weight of the local proximal term.
    pub rho: f64,
    /// Penalty weight of the consensus slack.
    pub mu: f64,
    /// Termination tolerance on the primal and dual residuals.
    pub eps: f64,
    pub max_outer_iter: usize,
    /// Per-region diagonal of the scaling `Σ_ℓ`; `None` is the identity.
    pub sigma: Option<Vec<Vec<f64>>>,
    pub inner: InnerConfig,
    /// Options of the regional CG solves; Jacobi scaling is on by default
    /// since the systems mix admittance-sized and unit entries.
    pub cg: CgOptions,
    /// Options of the coupled CG solve.
    pub coupled: CoupledSolveOptions,
    /// Worker threads for the decoupled step. 1 runs everything inline.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1e2,
            mu: 1e2,
            eps: 1e-8,
            max_outer_iter: 50,
            sigma: None,
            inner: InnerConfig::default(),
            cg: CgOptions {
                jacobi: true,
                ..CgOptions::default()
            },
            coupled: CoupledSolveOptions::default(),
            threads: 1,
        }
    }
}

impl SolverConfig {
    pub fn inner_tol(&self) -> f64 {
        self.inner.tol.unwrap_or(f64::min(1e-10, self.eps / 10.0))
    }

    pub fn sigma_for(&self, region: usize) -> Option<&[f64]> {
        self.sigma.as_ref().map(|s| s[region].as_slice())
    }

    pub fn validate(&self, block_dims: &[usize]) -> Result<(), AladinError> {
        let bad = |what: &str| Err(AladinError::InvalidConfig(what.to_string()));
        if !(self.rho > 0.0) {
            return bad("rho must be positive");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.coupled.cap_factor == 0 {
            return bad("coupled CG cap factor must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if !(self.inner.backtrack > 0.0 && self.inner.backtrack < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if !(self.cg.rel_tol > 0.0 && self.coupled.cg.rel_tol > 0.0) {
            return bad("CG tolerance must be positive");
        }
        if let Some(sigma) = &self.sigma {
            if sigma.len() != block_dims.len() {
                return bad("sigma needs one diagonal per region");
            }
            for (s, &d) in sigma.iter().zip(block_dims) {
                if s.len() != d || s.iter().any(|v| !(*v > 0.0)) {
                    return bad("sigma diagonals must be positive and match the region dimension");
                }
            }
        }
        Ok(())
    }
}
