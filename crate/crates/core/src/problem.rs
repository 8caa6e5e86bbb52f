//! A decomposed case bundled with its state layouts and consensus system.

use crate::case_io::{CaseError, PartitionSpec, RawCase};
use crate::model::{self, bus_values, initial_state, ModelVariant, StateLayout};
use crate::nr::PfSolution;
use crate::partition::{decompose, dimension_report, ConsensusSystem, Decomposition, DimensionReport, RegionModel};

#[derive(Clone, Debug)]
pub struct DistributedProblem {
    pub variant: ModelVariant,
    pub bus_ids: Vec<usize>,
    pub decomposition: Decomposition,
    pub layouts: Vec<StateLayout>,
    pub consensus: ConsensusSystem,
}

impl DistributedProblem {
    pub fn new(case: &RawCase, spec: &PartitionSpec, variant: ModelVariant) -> Result<Self, CaseError> {
        let decomposition = decompose(case, spec)?;
        let layouts: Vec<StateLayout> = decomposition
            .regions
            .iter()
            .map(|r| StateLayout::new(r, variant))
            .collect();
        let consensus = ConsensusSystem::assemble(&decomposition, &layouts);
        Ok(DistributedProblem {
            variant,
            bus_ids: case.bus_ids(),
            decomposition,
            layouts,
            consensus,
        })
    }

    pub fn regions(&self) -> &[RegionModel] {
        &self.decomposition.regions
    }

    pub fn n_regions(&self) -> usize {
        self.layouts.len()
    }

    pub fn dim(&self) -> usize {
        self.consensus.dim()
    }

    pub fn block<'a>(&self, stacked: &'a [f64], region: usize) -> &'a [f64] {
        self.consensus.block(stacked, region)
    }

    pub fn dimension_report(&self) -> DimensionReport {
        dimension_report(&self.decomposition, self.variant)
    }

    /// Stacked initial guess from the case file.
    pub fn initial_state(&self) -> Vec<f64> {
        self.regions()
            .iter()
            .zip(&self.layouts)
            .flat_map(|(r, l)| initial_state(r, l))
            .collect()
    }

    /// Stacks a per-bus solution into the distributed state space: copies
    /// take the values of the buses they replicate.
    pub fn embed(&self, sol: &PfSolution) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (region, layout) in self.regions().iter().zip(&self.layouts) {
            let idx: Vec<usize> = region
                .core
                .iter()
                .chain(&region.copy)
                .map(|b| sol.index_of(*b).expect("solution covers every bus"))
                .collect();
            let theta: Vec<f64> = idx.iter().map(|&k| sol.theta[k]).collect();
            let v: Vec<f64> = idx.iter().map(|&k| sol.v[k]).collect();
            let p: Vec<f64> = idx[..region.n_core()].iter().map(|&k| sol.p[k]).collect();
            let q: Vec<f64> = idx[..region.n_core()].iter().map(|&k| sol.q[k]).collect();
            out.extend(layout.pack(&theta, &v, &p, &q));
        }
        out
    }

    /// Per-bus `(θ, v, p, q)` read from the core entries of a stacked state.
    pub fn extract(&self, stacked: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.bus_ids.len();
        let (mut theta, mut v, mut p, mut q) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (l, (region, layout)) in self.regions().iter().zip(&self.layouts).enumerate() {
            let vals = bus_values(region, layout, self.block(stacked, l)).expect("block matches layout");
            for (i, bus) in region.core.iter().enumerate() {
                let k = self.bus_ids.iter().position(|b| b == bus).expect("core bus in case");
                theta[k] = vals.theta[i];
                v[k] = vals.v[i];
                p[k] = vals.p[i];
                q[k] = vals.q[i];
            }
        }
        (theta, v, p, q)
    }

    /// `f(χ) = Σ_ℓ ½‖r_ℓ(χ_ℓ)‖²`
    pub fn objective(&self, stacked: &[f64]) -> f64 {
        self.regions()
            .iter()
            .zip(&self.layouts)
            .enumerate()
            .map(|(l, (r, layout))| model::objective(r, layout, self.block(stacked, l)).expect("block matches layout"))
            .sum()
    }

    /// Largest absolute residual entry over all regions.
    pub fn residual_inf(&self, stacked: &[f64]) -> f64 {
        self.regions()
            .iter()
            .zip(&self.layouts)
            .enumerate()
            .map(|(l, (r, layout))| {
                let res = model::residual(r, layout, self.block(stacked, l)).expect("block matches layout");
                crate::linalg::norm_inf(&res)
            })
            .fold(0.0, f64::max)
    }
}
