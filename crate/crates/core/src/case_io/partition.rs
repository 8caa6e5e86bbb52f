use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CaseError, Diagnostic, Locus, RawCase};

/// Assignment of every bus to a region `1..=n_regions`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    region_of: BTreeMap<usize, usize>,
    n_regions: usize,
}

impl PartitionSpec {
    /// Validates `region_of` against `case`: full coverage, contiguous
    /// non-empty regions, and a connected region graph.
    pub fn new(case: &RawCase, region_of: BTreeMap<usize, usize>) -> Result<Self, CaseError> {
        let mut diags = Vec::new();
        for bus in &case.buses {
            if !region_of.contains_key(&bus.id) {
                diags.push(Diagnostic::new("uncovered-bus", Locus::Bus(bus.id), "bus has no region"));
            }
        }
        for id in region_of.keys() {
            if case.bus_index(*id).is_none() {
                diags.push(Diagnostic::new("unknown-bus", Locus::Bus(*id), "partition names a bus not in the case"));
            }
        }
        let used: BTreeSet<usize> = region_of.values().copied().collect();
        let n_regions = used.iter().next_back().copied().unwrap_or(0);
        if used.contains(&0) {
            diags.push(Diagnostic::new("region-id", Locus::Region(0), "region ids start at 1"));
        }
        for r in 1..=n_regions {
            if !used.contains(&r) {
                diags.push(Diagnostic::new("empty-region", Locus::Region(r), "region has no buses"));
            }
        }
        if !diags.is_empty() {
            return Err(CaseError::Validation(diags));
        }

        let spec = PartitionSpec { region_of, n_regions };
        if !spec.region_graph_connected(case) {
            return Err(CaseError::Validation(vec![Diagnostic::new(
                "disconnected-regions",
                Locus::Case,
                "region graph is not connected by in-service tie lines",
            )]));
        }
        Ok(spec)
    }

    /// Every bus in region 1.
    pub fn single_region(case: &RawCase) -> Self {
        PartitionSpec {
            region_of: case.buses.iter().map(|b| (b.id, 1)).collect(),
            n_regions: 1,
        }
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn region_of(&self, bus: usize) -> Option<usize> {
        self.region_of.get(&bus).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<usize, usize> {
        &self.region_of
    }

    fn region_graph_connected(&self, case: &RawCase) -> bool {
        if self.n_regions <= 1 {
            return true;
        }
        // union-find over region ids
        let mut parent: Vec<usize> = (0..=self.n_regions).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for br in case.branches.iter().filter(|b| b.status.is_on()) {
            let (Some(a), Some(b)) = (self.region_of(br.from), self.region_of(br.to)) else {
                continue;
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let root = find(&mut parent, 1);
        (2..=self.n_regions).all(|r| find(&mut parent, r) == root)
    }
}

/// Parses a JSON object `{"<bus id>": <region id>, ...}` and validates it
/// against `case`.
pub fn parse_partition(text: &str, case: &RawCase) -> Result<PartitionSpec, CaseError> {
    let raw: BTreeMap<String, usize> = serde_json::from_str(text)?;
    let mut region_of = BTreeMap::new();
    let mut diags = Vec::new();
    for (key, region) in raw {
        match key.trim().parse::<usize>() {
            Ok(id) => {
                region_of.insert(id, region);
            }
            Err(_) => diags.push(Diagnostic::new("bus-key", Locus::Case, format!("bus key {key:?} is not an integer"))),
        }
    }
    if !diags.is_empty() {
        return Err(CaseError::Validation(diags));
    }
    PartitionSpec::new(case, region_of)
}
