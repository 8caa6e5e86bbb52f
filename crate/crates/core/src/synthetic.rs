//! Generated test systems.
//!
//! [`dimension_fixture`] builds a radial-within-region network with a
//! prescribed number of buses, regions and tie lines; it exists to check
//! the sizes of the distributed formulation on systems too large to ship.
//! [`merge_cases`] glues solved cases into one meshed multi-region system
//! that is still small enough to solve on a desk.

use std::collections::BTreeMap;

use crate::case_io::{BranchRecord, BusRecord, BusType, CaseError, GenRecord, PartitionSpec, RawCase, Status};
use crate::nr::PfSolution;

fn line(from: usize, to: usize, r: f64, x: f64) -> BranchRecord {
    BranchRecord {
        from,
        to,
        r,
        x,
        b_charge: 0.0,
        tap: 0.0,
        shift: 0.0,
        status: Status::On,
    }
}

/// A case with `n_bus` buses in `n_reg` regions joined by exactly `n_conn`
/// tie lines, no two of which share an endpoint.
///
/// Buses of a region form a chain. The first `n_reg − 1` tie lines join
/// consecutive regions; the rest cycle over all region pairs. Bus 1 is the
/// only reference bus and every other bus is a small PQ load.
pub fn dimension_fixture(n_bus: usize, n_reg: usize, n_conn: usize) -> Result<(RawCase, PartitionSpec), String> {
    if n_reg == 0 || n_bus < n_reg {
        return Err(format!("{n_bus} buses cannot fill {n_reg} regions"));
    }
    if n_reg > 1 && n_conn < n_reg - 1 {
        return Err(format!("{n_conn} tie lines cannot connect {n_reg} regions"));
    }
    if n_reg == 1 && n_conn > 0 {
        return Err("a single region has no tie lines".into());
    }

    // contiguous id ranges per region, sizes differing by at most one
    let mut first = Vec::with_capacity(n_reg + 1);
    let mut next = 1;
    for l in 0..n_reg {
        first.push(next);
        next += n_bus / n_reg + usize::from(l < n_bus % n_reg);
    }
    first.push(next);

    let mut region_of = BTreeMap::new();
    let mut buses = Vec::with_capacity(n_bus);
    let mut branches = Vec::new();
    for l in 0..n_reg {
        for id in first[l]..first[l + 1] {
            region_of.insert(id, l + 1);
            let slack = id == 1;
            buses.push(BusRecord {
                id,
                bus_type: if slack { BusType::Ref } else { BusType::Pq },
                p_load: if slack { 0.0 } else { 0.01 },
                q_load: if slack { 0.0 } else { 0.005 },
                gs: 0.0,
                bs: 0.0,
                v_init: 1.0,
                theta_init: 0.0,
            });
            if id > first[l] {
                branches.push(line(id - 1, id, 0.01, 0.1));
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..n_reg.saturating_sub(1)).map(|l| (l, l + 1)).collect();
    let all_pairs: Vec<(usize, usize)> = (0..n_reg).flat_map(|a| (a + 1..n_reg).map(move |b| (a, b))).collect();
    for k in 0..n_conn.saturating_sub(pairs.len()) {
        pairs.push(all_pairs[k % all_pairs.len()]);
    }
    // endpoints taken from the end of each region's id range
    let mut used = vec![0usize; n_reg];
    let mut endpoint = |l: usize| -> Result<usize, String> {
        let size = first[l + 1] - first[l];
        if used[l] == size {
            return Err(format!("region {} has too few buses for its tie lines", l + 1));
        }
        used[l] += 1;
        Ok(first[l + 1] - used[l])
    };
    for (a, b) in pairs {
        let (from, to) = (endpoint(a)?, endpoint(b)?);
        branches.push(line(from, to, 0.02, 0.2));
    }

    let case = RawCase {
        base_mva: 100.0,
        buses,
        gens: vec![GenRecord {
            bus: 1,
            p_gen: 0.0,
            q_gen: 0.0,
            v_set: 1.0,
            status: Status::On,
        }],
        branches,
    };
    let spec = PartitionSpec::new(&case, region_of).map_err(|e| e.to_string())?;
    Ok((case, spec))
}

/// One solved case to be placed in a merged system.
pub struct Component<'a> {
    pub case: &'a RawCase,
    pub solution: &'a PfSolution,
}

/// Tie line between bus `from_bus` of component `from` and bus `to_bus`
/// of component `to`, both given by their original ids.
#[derive(Clone, Copy, Debug)]
pub struct Tie {
    pub from: usize,
    pub from_bus: usize,
    pub to: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
}

/// Places each component in its own region with bus ids shifted by
/// `offset · k` and joins them with `ties`.
///
/// Only the first component keeps its reference bus. The others turn theirs
/// into a PV bus whose generation is the balance found in the component's
/// own solution, and every bus starts from its component's solved voltage.
pub fn merge_cases(parts: &[Component], ties: &[Tie], offset: usize) -> Result<(RawCase, PartitionSpec), CaseError> {
    let mut buses = Vec::new();
    let mut gens = Vec::new();
    let mut branches = Vec::new();
    let mut region_of = BTreeMap::new();
    for (k, part) in parts.iter().enumerate() {
        let shift = offset * k;
        let sol = part.solution;
        for bus in &part.case.buses {
            let i = sol.index_of(bus.id).expect("solution covers the component");
            let mut b = bus.clone();
            b.id += shift;
            b.v_init = sol.v[i];
            b.theta_init = sol.theta[i];
            if k > 0 && b.bus_type == BusType::Ref {
                b.bus_type = BusType::Pv;
            }
            region_of.insert(b.id, k + 1);
            buses.push(b);
        }
        let mut balanced = std::collections::BTreeSet::new();
        for g in &part.case.gens {
            let mut g = g.clone();
            let ref_bus = part.case.buses.iter().any(|b| b.id == g.bus && b.bus_type == BusType::Ref);
            if k > 0 && ref_bus && g.status.is_on() {
                let i = sol.index_of(g.bus).expect("solution covers the component");
                let load = part.case.buses.iter().find(|b| b.id == g.bus).expect("gen bus exists").p_load;
                g.p_gen = if balanced.insert(g.bus) { sol.p[i] + load } else { 0.0 };
            }
            g.bus += shift;
            gens.push(g);
        }
        for br in &part.case.branches {
            let mut br = br.clone();
            br.from += shift;
            br.to += shift;
            branches.push(br);
        }
    }
    for t in ties {
        branches.push(line(t.from_bus + offset * t.from, t.to_bus + offset * t.to, t.r, t.x));
    }
    let case = RawCase {
        base_mva: parts.first().map_or(100.0, |p| p.case.base_mva),
        buses,
        gens,
        branches,
    }
    .validated()?;
    let spec = PartitionSpec::new(&case, region_of)?;
    Ok((case, spec))
}

/// Tie lines joining the components in a ring, plus a chord from every
/// even component to the one two further on. `pq_buses[k]` lists the PQ
/// buses of component `k` to draw endpoints from, each used at most once.
pub fn meshed_ties(pq_buses: &[Vec<usize>], r: f64, x: f64) -> Vec<Tie> {
    let n = pq_buses.len();
    let mut used = vec![0usize; n];
    let mut take = |k: usize| {
        let bus = pq_buses[k][used[k] % pq_buses[k].len()];
        used[k] += 1;
        bus
    };
    let mut ties = Vec::new();
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
    pairs.extend((0..n).step_by(2).filter(|k| k + 2 < n).map(|k| (k, k + 2)));
    for (a, b) in pairs {
        if a == b {
            continue;
        }
        ties.push(Tie {
            from: a,
            from_bus: take(a),
            to: b,
            to_bus: take(b),
            r,
            x,
        });
    }
    ties
}

/// `n_regions` copies of the given cases, taken in turn, joined by
/// [`meshed_ties`] through their PQ buses (r = 0.005, x = 0.05 p.u.).
///
/// Each case is first solved on its own, so the merged system starts close
/// to, but not at, its solution: the tie lines carry flows the components
/// did not see.
pub fn meshed_fixture(cases: &[RawCase], n_regions: usize) -> Result<(RawCase, PartitionSpec), String> {
    if cases.is_empty() || n_regions == 0 {
        return Err("need at least one case and one region".into());
    }
    let solutions = cases
        .iter()
        .map(|c| crate::nr::nr_solve(c, 1e-12, 30).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let max_id = cases.iter().flat_map(|c| c.buses.iter().map(|b| b.id)).max().unwrap_or(0);
    let offset = 10usize.pow(max_id.to_string().len() as u32);
    let mut parts = Vec::with_capacity(n_regions);
    let mut pq = Vec::with_capacity(n_regions);
    for k in 0..n_regions {
        let (case, solution) = (&cases[k % cases.len()], &solutions[k % cases.len()]);
        parts.push(Component { case, solution });
        pq.push(
            case.buses
                .iter()
                .filter(|b| b.bus_type == BusType::Pq)
                .map(|b| b.id)
                .collect::<Vec<_>>(),
        );
    }
    if pq.iter().any(Vec::is_empty) {
        return Err("every case needs a PQ bus to attach tie lines to".into());
    }
    let ties = meshed_ties(&pq, 0.005, 0.05);
    merge_cases(&parts, &ties, offset).map_err(|e| e.to_string())
}
