//! Region decomposition by shared tie lines.
//!
//! Every branch whose endpoints sit in different regions is replicated into
//! both regions. The foreign endpoint becomes a *copy bus* in the local
//! model, and consensus rows tie the copy's `(θ, v)` to the owning
//! region's core values.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::case_io::{BranchRecord, CaseError, PartitionSpec, RawCase};
use crate::grid::{build_ybus_with_shunts, initial_voltages, injections, AdmittanceMatrix, BusInjection};
use crate::linalg::Csr;
use crate::model::{ModelVariant, Quantity, StateLayout};

/// One region's local power-flow model.
#[derive(Clone, Debug)]
pub struct RegionModel {
    /// 1-based region id.
    pub id: usize,
    /// Core bus ids, in case order.
    pub core: Vec<usize>,
    /// Copy bus ids, ascending.
    pub copy: Vec<usize>,
    /// Region owning each copy bus.
    pub copy_owner: Vec<usize>,
    /// Admittance over `core ++ copy`: core branches plus every incident
    /// tie line. Only core buses carry shunts.
    pub ybus: AdmittanceMatrix,
    /// Scheduled data of the core buses.
    pub core_spec: Vec<BusInjection>,
    /// Initial `(θ, v)` of `core ++ copy`.
    pub init_theta: Vec<f64>,
    pub init_v: Vec<f64>,
    pub n_tie_lines: usize,
}

impl RegionModel {
    pub fn n_core(&self) -> usize {
        self.core.len()
    }

    pub fn n_copy(&self) -> usize {
        self.copy.len()
    }

    pub fn n_local(&self) -> usize {
        self.core.len() + self.copy.len()
    }

    /// Power-flow residual rows, two per core bus.
    pub fn n_pf(&self) -> usize {
        2 * self.core.len()
    }

    /// Local index of a bus id in `core ++ copy`.
    pub fn local_index(&self, bus: usize) -> Option<usize> {
        self.core
            .iter()
            .position(|&b| b == bus)
            .or_else(|| self.copy.iter().position(|&b| b == bus).map(|k| k + self.core.len()))
    }
}

/// Which pair of entries a consensus row equates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsensusRow {
    /// Region holding the copy.
    pub copy_region: usize,
    /// Region owning the bus as core.
    pub core_region: usize,
    pub bus: usize,
    pub quantity: Quantity,
}

/// Region models plus the symbolic consensus rows.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub regions: Vec<RegionModel>,
    pub rows: Vec<ConsensusRow>,
    pub n_bus: usize,
    /// Cross-region in-service branches.
    pub n_conn: usize,
}

/// Splits `case` into the regions of `spec`.
pub fn decompose(case: &RawCase, spec: &PartitionSpec) -> Result<Decomposition, CaseError> {
    // re-validate: the spec may have been built for another case
    let spec = PartitionSpec::new(case, spec.assignments().clone())?;
    let region_of = |bus: usize| spec.region_of(bus).expect("validated partition covers every bus");
    let (theta0, v0) = initial_voltages(case);
    let all_spec = injections(case, &case.bus_ids());

    let live: Vec<&BranchRecord> = case.branches.iter().filter(|b| b.status.is_on()).collect();
    let n_conn = live.iter().filter(|b| region_of(b.from) != region_of(b.to)).count();

    let mut regions = Vec::with_capacity(spec.n_regions());
    for id in 1..=spec.n_regions() {
        let core: Vec<usize> = case.buses.iter().map(|b| b.id).filter(|&b| region_of(b) == id).collect();
        let mut copy_set = BTreeSet::new();
        let mut local_branches = Vec::new();
        let mut n_tie_lines = 0;
        for br in &live {
            let (rf, rt) = (region_of(br.from), region_of(br.to));
            if rf != id && rt != id {
                continue;
            }
            if rf != rt {
                n_tie_lines += 1;
                copy_set.insert(if rf == id { br.to } else { br.from });
            }
            local_branches.push(*br);
        }
        let copy: Vec<usize> = copy_set.into_iter().collect();
        let copy_owner = copy.iter().map(|&b| region_of(b)).collect();
        let local_buses: Vec<usize> = core.iter().chain(&copy).copied().collect();
        let ybus = build_ybus_with_shunts(case, &local_buses, core.len(), &local_branches)
            .expect("local branches lie inside core ∪ copy");
        let global = |b: usize| case.bus_index(b).expect("bus in case");
        regions.push(RegionModel {
            id,
            core_spec: core.iter().map(|&b| all_spec.buses[global(b)].clone()).collect(),
            init_theta: local_buses.iter().map(|&b| theta0[global(b)]).collect(),
            init_v: local_buses.iter().map(|&b| v0[global(b)]).collect(),
            core,
            copy,
            copy_owner,
            ybus,
            n_tie_lines,
        });
    }

    let mut rows = Vec::new();
    for region in &regions {
        for (&bus, &owner) in region.copy.iter().zip(&region.copy_owner) {
            for quantity in [Quantity::Theta, Quantity::V] {
                rows.push(ConsensusRow {
                    copy_region: region.id,
                    core_region: owner,
                    bus,
                    quantity,
                });
            }
        }
    }

    Ok(Decomposition {
        regions,
        rows,
        n_bus: case.n_bus(),
        n_conn,
    })
}

/// Numeric consensus system `A χ = b` for a fixed state layout.
#[derive(Clone, Debug)]
pub struct ConsensusSystem {
    pub a: Csr<f64>,
    pub b: Vec<f64>,
    pub rows: Vec<ConsensusRow>,
    /// Column offset of each region block in the stacked state.
    pub offsets: Vec<usize>,
}

impl ConsensusSystem {
    /// Row `k` reads `χ_core − χ_copy = 0`. When the core quantity is a
    /// known setpoint rather than a state entry (REF or PV buses in the
    /// reduced layout), it moves to the right-hand side: `−χ_copy = −value`.
    pub fn assemble(decomp: &Decomposition, layouts: &[StateLayout]) -> Self {
        let mut offsets = Vec::with_capacity(layouts.len() + 1);
        let mut acc = 0;
        for l in layouts {
            offsets.push(acc);
            acc += l.dim();
        }
        offsets.push(acc);

        let mut triplets = Vec::with_capacity(2 * decomp.rows.len());
        let mut b = vec![0.0; decomp.rows.len()];
        for (k, row) in decomp.rows.iter().enumerate() {
            let copy_region = &decomp.regions[row.copy_region - 1];
            let copy_layout = &layouts[row.copy_region - 1];
            let copy_local = copy_region.local_index(row.bus).expect("copy bus in region");
            let copy_pos = copy_layout
                .position(copy_local, row.quantity)
                .expect("copy buses always carry θ and v");
            triplets.push((k, offsets[row.copy_region - 1] + copy_pos, -1.0));

            let core_region = &decomp.regions[row.core_region - 1];
            let core_layout = &layouts[row.core_region - 1];
            let core_local = core_region.local_index(row.bus).expect("core bus in owner");
            match core_layout.position(core_local, row.quantity) {
                Some(pos) => triplets.push((k, offsets[row.core_region - 1] + pos, 1.0)),
                None => {
                    let spec = &core_region.core_spec[core_local];
                    let known = match row.quantity {
                        Quantity::Theta => spec.theta_set,
                        Quantity::V => spec.v_set,
                        _ => None,
                    }
                    .expect("a quantity absent from the layout is a setpoint");
                    b[k] = -known;
                }
            }
        }
        ConsensusSystem {
            a: Csr::from_triplets(decomp.rows.len(), acc, triplets),
            b,
            rows: decomp.rows.clone(),
            offsets,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// `A χ − b`
    pub fn violation(&self, stacked: &[f64]) -> Vec<f64> {
        let mut out = self.a.apply(stacked);
        out.iter_mut().zip(&self.b).for_each(|(o, b)| *o -= b);
        out
    }

    pub fn block<'a>(&self, stacked: &'a [f64], region: usize) -> &'a [f64] {
        &stacked[self.offsets[region]..self.offsets[region + 1]]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionDims {
    pub region: usize,
    pub n_core: usize,
    pub n_copy: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DimensionReport {
    pub n_bus: usize,
    pub n_reg: usize,
    pub n_conn: usize,
    pub regions: Vec<RegionDims>,
    pub variant: ModelVariant,
    /// Total stacked state dimension for `variant`.
    pub dimension: usize,
}

pub fn dimension_report(decomp: &Decomposition, variant: ModelVariant) -> DimensionReport {
    let regions: Vec<RegionDims> = decomp
        .regions
        .iter()
        .map(|r| RegionDims {
            region: r.id,
            n_core: r.n_core(),
            n_copy: r.n_copy(),
        })
        .collect();
    let per_core = match variant {
        ModelVariant::Reduced => 2,
        ModelVariant::Original => 4,
    };
    let dimension = regions.iter().map(|r| per_core * r.n_core + 2 * r.n_copy).sum();
    DimensionReport {
        n_bus: decomp.n_bus,
        n_reg: decomp.regions.len(),
        n_conn: decomp.n_conn,
        regions,
        variant,
        dimension,
    }
}
