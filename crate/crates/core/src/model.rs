//! Regional state layouts and the least-squares power-flow model.
//!
//! A region's residual has two rows per core bus:
//!
//! ```text
//! r_P,i = p_i − v_i Σ_k v_k (G_ik cos θ_ik + B_ik sin θ_ik)
//! r_Q,i = q_i − v_i Σ_k v_k (G_ik sin θ_ik − B_ik cos θ_ik)
//! ```
//!
//! where the sum runs over core and copy buses. Each of `θ, v, p, q` is
//! either read from the state vector or from the bus's scheduled data,
//! depending on the layout. The original layout keeps all four quantities
//! of a core bus in the state and appends one affine row `known − state`
//! per scheduled quantity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::BusType;
use crate::linalg::{Csr, LinearOperator};
use crate::partition::RegionModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state has length {got}, layout expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Original,
    Reduced,
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(ModelVariant::Original),
            "reduced" => Ok(ModelVariant::Reduced),
            other => Err(format!("unknown model {other:?} (expected original|reduced)")),
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelVariant::Original => "original",
            ModelVariant::Reduced => "reduced",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Theta,
    V,
    P,
    Q,
}

impl Quantity {
    fn slot(self) -> usize {
        match self {
            Quantity::Theta => 0,
            Quantity::V => 1,
            Quantity::P => 2,
            Quantity::Q => 3,
        }
    }
}

/// Quantities of a core bus that are scheduled (known) for its type.
pub fn known_quantities(bus_type: BusType) -> [Quantity; 2] {
    match bus_type {
        BusType::Ref => [Quantity::Theta, Quantity::V],
        BusType::Pq => [Quantity::P, Quantity::Q],
        BusType::Pv => [Quantity::V, Quantity::P],
    }
}

/// Quantities of a core bus that are unknown for its type.
pub fn unknown_quantities(bus_type: BusType) -> [Quantity; 2] {
    match bus_type {
        BusType::Ref => [Quantity::P, Quantity::Q],
        BusType::Pq => [Quantity::Theta, Quantity::V],
        BusType::Pv => [Quantity::Theta, Quantity::Q],
    }
}

/// Ordered `(local bus, quantity)` entries making up a regional state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLayout {
    variant: ModelVariant,
    entries: Vec<(usize, Quantity)>,
    position: Vec<[Option<usize>; 4]>,
    n_core: usize,
    /// `(core bus, quantity)` pairs that get a bus-spec row (original only).
    spec_rows: Vec<(usize, Quantity)>,
}

impl StateLayout {
    pub fn new(region: &RegionModel, variant: ModelVariant) -> Self {
        let n_core = region.n_core();
        let mut entries = Vec::with_capacity(4 * n_core + 2 * region.n_copy());
        let mut spec_rows = Vec::new();
        for (i, spec) in region.core_spec.iter().enumerate() {
            match variant {
                ModelVariant::Reduced => {
                    entries.extend(unknown_quantities(spec.bus_type).map(|q| (i, q)));
                }
                ModelVariant::Original => {
                    entries.extend([Quantity::Theta, Quantity::V, Quantity::P, Quantity::Q].map(|q| (i, q)));
                    spec_rows.extend(known_quantities(spec.bus_type).map(|q| (i, q)));
                }
            }
        }
        for j in 0..region.n_copy() {
            entries.push((n_core + j, Quantity::Theta));
            entries.push((n_core + j, Quantity::V));
        }
        let mut position = vec![[None; 4]; region.n_local()];
        for (k, &(bus, q)) in entries.iter().enumerate() {
            position[bus][q.slot()] = Some(k);
        }
        let per_core = if variant == ModelVariant::Reduced { 2 } else { 4 };
        assert_eq!(entries.len(), per_core * n_core + 2 * region.n_copy());
        StateLayout {
            variant,
            entries,
            position,
            n_core,
            spec_rows,
        }
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, Quantity)] {
        &self.entries
    }

    /// State position of `quantity` at local bus `bus`, if it is a state entry.
    pub fn position(&self, bus: usize, quantity: Quantity) -> Option<usize> {
        self.position.get(bus).and_then(|p| p[quantity.slot()])
    }

    pub fn n_residuals(&self) -> usize {
        2 * self.n_core + self.spec_rows.len()
    }

    /// Builds a state vector from per-local-bus values. `p` and `q` cover
    /// core buses only.
    pub fn pack(&self, theta: &[f64], v: &[f64], p: &[f64], q: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|&(bus, quantity)| match quantity {
                Quantity::Theta => theta[bus],
                Quantity::V => v[bus],
                Quantity::P => p[bus],
                Quantity::Q => q[bus],
            })
            .collect()
    }

    fn check(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }
}

/// Per-bus values resolved from a state vector and the scheduled data.
#[derive(Clone, Debug, PartialEq)]
pub struct BusValues {
    /// Over `core ++ copy`.
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    /// Over core buses.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Value of `quantity` at a core bus when it is not part of the state.
fn scheduled(region: &RegionModel, bus: usize, quantity: Quantity) -> f64 {
    let spec = &region.core_spec[bus];
    match quantity {
        Quantity::Theta => spec.theta_set,
        Quantity::V => spec.v_set,
        Quantity::P => Some(spec.p),
        Quantity::Q => Some(spec.q),
    }
    .unwrap_or_else(|| panic!("bus {} has no scheduled {quantity:?}", spec.bus_id))
}

/// Resolves `θ, v, p, q` for every local bus.
pub fn bus_values(region: &RegionModel, layout: &StateLayout, x: &[f64]) -> Result<BusValues, ModelError> {
    layout.check(x)?;
    let n_core = region.n_core();
    let value = |bus: usize, q: Quantity| match layout.position(bus, q) {
        Some(k) => x[k],
        None => scheduled(region, bus, q),
    };
    Ok(BusValues {
        theta: (0..region.n_local()).map(|b| value(b, Quantity::Theta)).collect(),
        v: (0..region.n_local()).map(|b| value(b, Quantity::V)).collect(),
        p: (0..n_core).map(|b| value(b, Quantity::P)).collect(),
        q: (0..n_core).map(|b| value(b, Quantity::Q)).collect(),
    })
}

/// Initial state from the case file voltages and scheduled injections.
pub fn initial_state(region: &RegionModel, layout: &StateLayout) -> Vec<f64> {
    let p: Vec<f64> = region.core_spec.iter().map(|s| s.p).collect();
    let q: Vec<f64> = region.core_spec.iter().map(|s| s.q).collect();
    layout.pack(&region.init_theta, &region.init_v, &p, &q)
}

pub fn residual(region: &RegionModel, layout: &StateLayout, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    let vals = bus_values(region, layout, x)?;
    let n_core = region.n_core();
    let mut r = vec![0.0; layout.n_residuals()];
    for i in 0..n_core {
        let (mut pc, mut qc) = (0.0, 0.0);
        for (k, y) in region.ybus.row(i) {
            let (s, c) = (vals.theta[i] - vals.theta[k]).sin_cos();
            let vv = vals.v[i] * vals.v[k];
            pc += vv * (y.re * c + y.im * s);
            qc += vv * (y.re * s - y.im * c);
        }
        r[2 * i] = vals.p[i] - pc;
        r[2 * i + 1] = vals.q[i] - qc;
    }
    for (m, &(bus, quantity)) in layout.spec_rows.iter().enumerate() {
        let state = x[layout.position(bus, quantity).expect("original layout holds every core quantity")];
        r[2 * n_core + m] = scheduled(region, bus, quantity) - state;
    }
    Ok(r)
}

/// Analytic Jacobian of [`residual`].
pub fn jacobian(region: &RegionModel, layout: &StateLayout, x: &[f64]) -> Result<Csr<f64>, ModelError> {
    let vals = bus_values(region, layout, x)?;
    let n_core = region.n_core();
    let mut triplets = Vec::new();

    for i in 0..n_core {
        let (rp, rq) = (2 * i, 2 * i + 1);
        // derivatives of the computed injections P_i, Q_i
        let (mut dp_dti, mut dq_dti, mut dp_dvi, mut dq_dvi) = (0.0, 0.0, 0.0, 0.0);
        for (k, y) in region.ybus.row(i) {
            let (s, c) = (vals.theta[i] - vals.theta[k]).sin_cos();
            let (g, b) = (y.re, y.im);
            if k == i {
                // θ_ii = 0: P_ii = v_i² G_ii, Q_ii = −v_i² B_ii
                dp_dvi += 2.0 * vals.v[i] * g;
                dq_dvi -= 2.0 * vals.v[i] * b;
                continue;
            }
            let vv = vals.v[i] * vals.v[k];
            let pt = g * c + b * s;
            let qt = g * s - b * c;
            // ∂/∂θ_i of v_i v_k (G cos + B sin) = v_i v_k (−G sin + B cos) = −vv·qt
            dp_dti -= vv * qt;
            dq_dti += vv * pt;
            dp_dvi += vals.v[k] * pt;
            dq_dvi += vals.v[k] * qt;
            if let Some(col) = layout.position(k, Quantity::Theta) {
                triplets.push((rp, col, -(vv * qt)));
                triplets.push((rq, col, vv * pt));
            }
            if let Some(col) = layout.position(k, Quantity::V) {
                triplets.push((rp, col, -(vals.v[i] * pt)));
                triplets.push((rq, col, -(vals.v[i] * qt)));
            }
        }
        if let Some(col) = layout.position(i, Quantity::Theta) {
            triplets.push((rp, col, -dp_dti));
            triplets.push((rq, col, -dq_dti));
        }
        if let Some(col) = layout.position(i, Quantity::V) {
            triplets.push((rp, col, -dp_dvi));
            triplets.push((rq, col, -dq_dvi));
        }
        if let Some(col) = layout.position(i, Quantity::P) {
            triplets.push((rp, col, 1.0));
        }
        if let Some(col) = layout.position(i, Quantity::Q) {
            triplets.push((rq, col, 1.0));
        }
    }
    for (m, &(bus, quantity)) in layout.spec_rows.iter().enumerate() {
        let col = layout.position(bus, quantity).expect("original layout holds every core quantity");
        triplets.push((2 * n_core + m, col, -1.0));
    }
    Ok(Csr::from_triplets(layout.n_residuals(), layout.dim(), triplets))
}

/// `f = ½‖r‖²` and `∇f = Jᵀr`.
pub fn objective_grad(region: &RegionModel, layout: &StateLayout, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
    let r = residual(region, layout, x)?;
    let j = jacobian(region, layout, x)?;
    Ok((0.5 * crate::linalg::dot(&r, &r), j.apply_transpose(&r)))
}

pub fn objective(region: &RegionModel, layout: &StateLayout, x: &[f64]) -> Result<f64, ModelError> {
    let r = residual(region, layout, x)?;
    Ok(0.5 * crate::linalg::dot(&r, &r))
}

/// `(JᵀJ + shift·diag(weights)) w`, applied as two sparse products.
pub struct GaussNewtonOperator<'a> {
    pub jacobian: &'a Csr<f64>,
    pub shift: f64,
    /// Diagonal scaling of the shift; `None` is the identity.
    pub weights: Option<&'a [f64]>,
}

impl LinearOperator for GaussNewtonOperator<'_> {
    fn dim(&self) -> usize {
        self.jacobian.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let jx = self.jacobian.apply(x);
        y.iter_mut().for_each(|v| *v = 0.0);
        self.jacobian.mul_transpose_add(&jx, y);
        match self.weights {
            Some(w) => y.iter_mut().zip(x.iter().zip(w)).for_each(|(yi, (xi, wi))| *yi += self.shift * wi * xi),
            None => y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += self.shift * xi),
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut d = self.jacobian.column_sq_norms();
        for (i, di) in d.iter_mut().enumerate() {
            *di += self.shift * self.weights.map_or(1.0, |w| w[i]);
        }
        Some(d)
    }
}

/// `Jᵀ(J w)` at state `x`.
pub fn gn_hessian_apply(
    region: &RegionModel,
    layout: &StateLayout,
    x: &[f64],
    w: &[f64],
) -> Result<Vec<f64>, ModelError> {
    layout.check(w)?;
    let j = jacobian(region, layout, x)?;
    let op = GaussNewtonOperator {
        jacobian: &j,
        shift: 0.0,
        weights: None,
    };
    let mut out = vec![0.0; w.len()];
    op.apply(w, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_io::{load_case, load_partition, PartitionSpec};
    use crate::partition::decompose;

    fn data(name: &str) -> String {
        format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn six_bus_regions() -> Vec<RegionModel> {
        let case = load_case(data("six_bus.m")).unwrap();
        let spec = load_partition(data("six_bus_partition.json"), &case).unwrap();
        decompose(&case, &spec).unwrap().regions
    }

    #[test]
    fn layout_shapes() {
        let regions = six_bus_regions();
        let r1 = &regions[0];
        let reduced = StateLayout::new(r1, ModelVariant::Reduced);
        // bus 1 REF (p, q), bus 2 PV (θ, q), bus 3 PQ (θ, v), copy 4 (θ, v)
        assert_eq!(
            reduced.entries(),
            &[
                (0, Quantity::P),
                (0, Quantity::Q),
                (1, Quantity::Theta),
                (1, Quantity::Q),
                (2, Quantity::Theta),
                (2, Quantity::V),
                (3, Quantity::Theta),
                (3, Quantity::V)
            ]
        );
        assert_eq!(reduced.n_residuals(), 6);
        let original = StateLayout::new(r1, ModelVariant::Original);
        assert_eq!(original.dim(), 4 * 3 + 2);
        assert_eq!(original.n_residuals(), 12);
    }

    #[test]
    fn dimension_mismatch() {
        let regions = six_bus_regions();
        let layout = StateLayout::new(&regions[0], ModelVariant::Reduced);
        assert_eq!(
            residual(&regions[0], &layout, &[0.0; 3]),
            Err(ModelError::DimensionMismatch { expected: 8, got: 3 })
        );
    }

    #[test]
    fn ref_injection_column_is_unit() {
        let regions = six_bus_regions();
        let layout = StateLayout::new(&regions[0], ModelVariant::Reduced);
        let x = initial_state(&regions[0], &layout);
        let j = jacobian(&regions[0], &layout, &x).unwrap().to_dense();
        let col = layout.position(0, Quantity::P).unwrap();
        let column: Vec<f64> = j.iter().map(|row| row[col]).collect();
        assert_eq!(column, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn spec_row_of_pq_p_is_minus_one() {
        let regions = six_bus_regions();
        let layout = StateLayout::new(&regions[0], ModelVariant::Original);
        let x = initial_state(&regions[0], &layout);
        let j = jacobian(&regions[0], &layout, &x).unwrap();
        // bus 3 (local 2) is PQ; its spec rows come after REF (2) and PV (2)
        let row = 6 + 4;
        let entries: Vec<_> = j.row(row).collect();
        assert_eq!(entries, vec![(layout.position(2, Quantity::P).unwrap(), -1.0)]);
    }

    #[test]
    fn lossless_flat_start_has_zero_residual() {
        let mut case = load_case(data("case9.m")).unwrap();
        for b in &mut case.buses {
            b.p_load = 0.0;
            b.q_load = 0.0;
            b.v_init = 1.0;
            b.theta_init = 0.0;
        }
        for g in &mut case.gens {
            g.p_gen = 0.0;
            g.q_gen = 0.0;
            g.v_set = 1.0;
        }
        for br in &mut case.branches {
            br.r = 0.0;
            br.b_charge = 0.0;
        }
        let d = decompose(&case, &PartitionSpec::single_region(&case)).unwrap();
        for variant in [ModelVariant::Reduced, ModelVariant::Original] {
            let layout = StateLayout::new(&d.regions[0], variant);
            let x = initial_state(&d.regions[0], &layout);
            let r = residual(&d.regions[0], &layout, &x).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-13), "{variant:?} {r:?}");
        }
    }

    #[test]
    fn copy_angle_perturbation_is_local() {
        let regions = six_bus_regions();
        let region = &regions[0];
        let layout = StateLayout::new(region, ModelVariant::Reduced);
        let x = initial_state(region, &layout);
        let base = residual(region, &layout, &x).unwrap();
        let mut xp = x.clone();
        xp[layout.position(3, Quantity::Theta).unwrap()] += 0.1;
        let pert = residual(region, &layout, &xp).unwrap();
        for (m, (a, b)) in base.iter().zip(&pert).enumerate() {
            // only bus 3 (local 2) is adjacent to the copy bus
            if m / 2 == 2 {
                assert!((a - b).abs() > 1e-6);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn objective_is_half_squared_norm() {
        let regions = six_bus_regions();
        let layout = StateLayout::new(&regions[1], ModelVariant::Original);
        let x = initial_state(&regions[1], &layout);
        let (f, g) = objective_grad(&regions[1], &layout, &x).unwrap();
        let r = residual(&regions[1], &layout, &x).unwrap();
        let direct: f64 = r.iter().map(|v| v * v).sum::<f64>() / 2.0;
        assert!((f - direct).abs() <= 1e-14 * direct.max(1e-300));
        assert_eq!(g.len(), layout.dim());
    }

    #[test]
    fn zero_w_gives_zero() {
        let regions = six_bus_regions();
        let layout = StateLayout::new(&regions[0], ModelVariant::Reduced);
        let x = initial_state(&regions[0], &layout);
        let out = gn_hessian_apply(&regions[0], &layout, &x, &vec![0.0; layout.dim()]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }
}
