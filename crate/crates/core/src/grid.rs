//! Bus admittance assembly and scheduled injections.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::case_io::{BranchRecord, BusType, RawCase};
use crate::linalg::Csr;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("branch {from}-{to} has an endpoint outside the bus subset")]
    EndpointOutsideSubset { from: usize, to: usize },
}

/// Complex bus admittance matrix `Y = G + jB`, indexed in the order of the
/// bus subset it was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    bus_ids: Vec<usize>,
    y: Csr<Complex64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn bus_ids(&self) -> &[usize] {
        &self.bus_ids
    }

    pub fn matrix(&self) -> &Csr<Complex64> {
        &self.y
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.y.get(i, k).unwrap_or_default()
    }

    /// Nonzero `(k, Y_ik)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.y.row(i)
    }
}

/// π-model admittance stamps of one branch: `(y_ff, y_ft, y_tf, y_tt)`.
///
/// With series admittance `y_s = 1/(r + jx)`, charging `b` and complex tap
/// `t = τ·e^{jφ}`:
///
/// ```text
/// y_tt = y_s + jb/2
/// y_ff = y_tt / |t|²
/// y_ft = -y_s / conj(t)
/// y_tf = -y_s / t
/// ```
///
/// A nonzero phase shift makes `y_ft ≠ y_tf`, so the pattern stays
/// symmetric while the values do not.
pub fn branch_stamps(br: &BranchRecord) -> (Complex64, Complex64, Complex64, Complex64) {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
    let charging = Complex64::new(0.0, br.b_charge / 2.0);
    let tap = Complex64::from_polar(br.ratio(), br.shift);
    let ytt = ys + charging;
    let yff = ytt / (tap * tap.conj());
    let yft = -ys / tap.conj();
    let ytf = -ys / tap;
    (yff, yft, ytf, ytt)
}

/// Assembles `Y` over `bus_subset` from the given branches plus the bus
/// shunts of every bus in the subset. Out-of-service branches are skipped.
pub fn build_ybus(
    case: &RawCase,
    bus_subset: &[usize],
    branch_subset: &[&BranchRecord],
) -> Result<AdmittanceMatrix, GridError> {
    build_ybus_with_shunts(case, bus_subset, bus_subset.len(), branch_subset)
}

/// Like [`build_ybus`], but only the first `n_shunt` buses of the subset get
/// their shunt admittance. Regional models use this so that copy buses do
/// not carry a foreign region's shunts.
pub(crate) fn build_ybus_with_shunts(
    case: &RawCase,
    bus_subset: &[usize],
    n_shunt: usize,
    branch_subset: &[&BranchRecord],
) -> Result<AdmittanceMatrix, GridError> {
    let index: HashMap<usize, usize> = bus_subset.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let n = bus_subset.len();
    let mut triplets = Vec::with_capacity(n + 4 * branch_subset.len());

    for (i, &id) in bus_subset.iter().enumerate() {
        let shunt = if i < n_shunt {
            case.bus_index(id)
                .map(|k| Complex64::new(case.buses[k].gs, case.buses[k].bs))
                .unwrap_or_default()
        } else {
            Complex64::default()
        };
        triplets.push((i, i, shunt));
    }

    for br in branch_subset.iter().filter(|b| b.status.is_on()) {
        let (Some(&f), Some(&t)) = (index.get(&br.from), index.get(&br.to)) else {
            return Err(GridError::EndpointOutsideSubset { from: br.from, to: br.to });
        };
        let (yff, yft, ytf, ytt) = branch_stamps(br);
        triplets.push((f, f, yff));
        triplets.push((f, t, yft));
        triplets.push((t, f, ytf));
        triplets.push((t, t, ytt));
    }

    Ok(AdmittanceMatrix {
        bus_ids: bus_subset.to_vec(),
        y: Csr::from_triplets(n, n, triplets),
    })
}

/// Full-system `Y` in case bus order.
pub fn system_ybus(case: &RawCase) -> AdmittanceMatrix {
    let branches: Vec<&BranchRecord> = case.branches.iter().collect();
    build_ybus(case, &case.bus_ids(), &branches).expect("validated case has no dangling branches")
}

/// Scheduled data for one bus after generator aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct BusInjection {
    pub bus_id: usize,
    /// Effective type: a PV bus without an in-service generator is PQ.
    pub bus_type: BusType,
    /// Net scheduled active injection `p^g − p^l`, p.u.
    pub p: f64,
    /// Net scheduled reactive injection `q^g − q^l`, p.u.
    pub q: f64,
    /// Voltage magnitude setpoint of REF and PV buses.
    pub v_set: Option<f64>,
    /// Angle setpoint of the REF bus.
    pub theta_set: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BusInjectionSpec {
    pub buses: Vec<BusInjection>,
}

impl BusInjectionSpec {
    pub fn get(&self, bus_id: usize) -> Option<&BusInjection> {
        self.buses.iter().find(|b| b.bus_id == bus_id)
    }
}

/// Net scheduled injections for the buses in `bus_subset`, in that order.
///
/// Generators at the same bus are summed; the voltage setpoint comes from
/// the first in-service generator. A REF bus without a generator keeps its
/// file voltage as setpoint.
pub fn injections(case: &RawCase, bus_subset: &[usize]) -> BusInjectionSpec {
    let buses = bus_subset
        .iter()
        .map(|&id| {
            let bus = &case.buses[case.bus_index(id).expect("bus in case")];
            let gens: Vec<_> = case.gens.iter().filter(|g| g.bus == id && g.status.is_on()).collect();
            let p_gen: f64 = gens.iter().map(|g| g.p_gen).sum();
            let q_gen: f64 = gens.iter().map(|g| g.q_gen).sum();
            let gen_v = gens.first().map(|g| g.v_set);
            let bus_type = match bus.bus_type {
                BusType::Pv if gens.is_empty() => BusType::Pq,
                t => t,
            };
            let v_set = match bus_type {
                BusType::Ref => Some(gen_v.unwrap_or(bus.v_init)),
                BusType::Pv => gen_v,
                BusType::Pq => None,
            };
            BusInjection {
                bus_id: id,
                bus_type,
                p: p_gen - bus.p_load,
                q: q_gen - bus.q_load,
                v_set,
                theta_set: (bus_type == BusType::Ref).then_some(bus.theta_init),
            }
        })
        .collect();
    BusInjectionSpec { buses }
}

/// Initial voltage guess: the file's `(θ, v)` with the generator setpoint
/// replacing `v` at REF and PV buses.
pub fn initial_voltages(case: &RawCase) -> (Vec<f64>, Vec<f64>) {
    let spec = injections(case, &case.bus_ids());
    let theta = case.buses.iter().map(|b| b.theta_init).collect();
    let v = case
        .buses
        .iter()
        .zip(&spec.buses)
        .map(|(b, inj)| inj.v_set.unwrap_or(b.v_init))
        .collect();
    (theta, v)
}

/// Computed net injections `(p_i, q_i)` at `rows` for a voltage profile
/// indexed like `y`.
pub fn power_injections(y: &AdmittanceMatrix, rows: usize, theta: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; rows];
    let mut q = vec![0.0; rows];
    for i in 0..rows {
        for (k, yik) in y.row(i) {
            let d = theta[i] - theta[k];
            let (s, c) = d.sin_cos();
            p[i] += v[i] * v[k] * (yik.re * c + yik.im * s);
            q[i] += v[i] * v[k] * (yik.re * s - yik.im * c);
        }
    }
    (p, q)
}
