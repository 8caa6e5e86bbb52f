//! The building blocks of both coordinators against dense reference
//! computations (nalgebra LU, finite-difference Jacobians), plus the
//! invariants that must hold at convergence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aladin_pf::aladin::{
    coupled_linear_step, coupled_qp_solve, decoupled_linear_step, local_nlp_solve, run_gn_inexact, run_standard,
    CoupledSolveOptions, InnerConfig, SolverConfig,
};
use aladin_pf::case_io::{BranchRecord, BusRecord, BusType, GenRecord, Status};
use aladin_pf::linalg::{CgOptions, Csr};
use aladin_pf::model::{jacobian, residual, StateLayout};
use aladin_pf::partition::RegionModel;
use aladin_pf::{load_case, load_partition, DistributedProblem, ModelVariant, PartitionSpec, RawCase};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn six_bus(variant: ModelVariant) -> DistributedProblem {
    let case = load_case(data("six_bus.m")).unwrap();
    let spec = load_partition(data("six_bus_partition.json"), &case).unwrap();
    DistributedProblem::new(&case, &spec, variant).unwrap()
}

/// REF bus 1 and PQ bus 2 in region 1, PV bus 3 in region 2, fully meshed.
fn three_bus() -> (RawCase, PartitionSpec) {
    let bus = |id, bus_type, p_load, q_load| BusRecord {
        id,
        bus_type,
        p_load,
        q_load,
        gs: 0.0,
        bs: 0.0,
        v_init: 1.0,
        theta_init: 0.0,
    };
    let line = |from, to, r, x| BranchRecord {
        from,
        to,
        r,
        x,
        b_charge: 0.02,
        tap: 0.0,
        shift: 0.0,
        status: Status::On,
    };
    let gen = |bus, p_gen, v_set| GenRecord {
        bus,
        p_gen,
        q_gen: 0.0,
        v_set,
        status: Status::On,
    };
    let case = RawCase {
        base_mva: 100.0,
        buses: vec![bus(1, BusType::Ref, 0.0, 0.0), bus(2, BusType::Pq, 0.9, 0.3), bus(3, BusType::Pv, 0.2, 0.0)],
        gens: vec![gen(1, 0.0, 1.02), gen(3, 0.5, 1.01)],
        branches: vec![line(1, 2, 0.01, 0.1), line(2, 3, 0.02, 0.15), line(1, 3, 0.015, 0.12)],
    }
    .validated()
    .unwrap();
    let spec = PartitionSpec::new(&case, BTreeMap::from([(1, 1), (2, 1), (3, 2)])).unwrap();
    (case, spec)
}

fn dense(m: &Csr<f64>) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| rows[i][j])
}

fn fd_jacobian(region: &RegionModel, layout: &StateLayout, y: &[f64]) -> DMatrix<f64> {
    let h = 1e-6;
    let m = layout.n_residuals();
    let mut j = DMatrix::zeros(m, y.len());
    for c in 0..y.len() {
        let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
        yp[c] += h;
        ym[c] -= h;
        let (rp, rm) = (residual(region, layout, &yp).unwrap(), residual(region, layout, &ym).unwrap());
        for r in 0..m {
            j[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
        }
    }
    j
}

fn tight() -> CgOptions {
    CgOptions {
        rel_tol: 1e-14,
        ..CgOptions::default()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn local_nlp_matches_dense_oracle() {
    let (case, spec) = three_bus();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = DistributedProblem::new(&case, &spec, variant).unwrap();
        let x0 = problem.initial_state();
        for l in 0..problem.n_regions() {
            let (region, layout) = (&problem.regions()[l], &problem.layouts[l]);
            let z: Vec<f64> = problem.block(&x0, l).iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
            let c: Vec<f64> = (0..z.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
            let rho = 1e2;
            let got = local_nlp_solve(region, layout, &z, &c, rho, None, &InnerConfig::default(), 1e-12, &CgOptions::default()).unwrap();

            // fixed point of y ← y − (JᵀJ + ρI)⁻¹ ∇φ(y) with finite-difference J
            let mut y = DVector::from_column_slice(&z);
            for _ in 0..200 {
                let j = fd_jacobian(region, layout, y.as_slice());
                let r = DVector::from_vec(residual(region, layout, y.as_slice()).unwrap());
                let grad = j.transpose() * &r + DVector::from_column_slice(&c) + rho * (&y - DVector::from_column_slice(&z));
                if grad.amax() <= 1e-13 {
                    break;
                }
                let h = j.transpose() * &j + DMatrix::identity(z.len(), z.len()) * rho;
                y -= h.lu().solve(&grad).unwrap();
            }
            let err = max_abs_diff(&got.x, y.as_slice());
            assert!(err <= 1e-8, "{variant} region {l}: {err:e}");
        }
    }
}

/// Region Jacobians and stacked gradient `Jᵀr` at `x`.
fn sensitivities(problem: &DistributedProblem, x: &[f64]) -> (Vec<Csr<f64>>, Vec<f64>) {
    let mut jacobians = Vec::new();
    let mut gradient = Vec::new();
    for l in 0..problem.n_regions() {
        let (region, layout) = (&problem.regions()[l], &problem.layouts[l]);
        let xl = problem.block(x, l);
        let j = jacobian(region, layout, xl).unwrap();
        gradient.extend(j.apply_transpose(&residual(region, layout, xl).unwrap()));
        jacobians.push(j);
    }
    (jacobians, gradient)
}

fn dense_hessian(problem: &DistributedProblem, jacobians: &[Csr<f64>]) -> DMatrix<f64> {
    let n = problem.dim();
    let mut h = DMatrix::zeros(n, n);
    for (l, j) in jacobians.iter().enumerate() {
        let off = problem.consensus.offsets[l];
        let jd = dense(j);
        let block = jd.transpose() * &jd;
        h.view_mut((off, off), block.shape()).copy_from(&block);
    }
    h
}

fn perturbed_state(problem: &DistributedProblem, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem.initial_state().iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect()
}

#[test]
fn coupled_qp_satisfies_its_optimality_conditions() {
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = six_bus(variant);
        let cs = &problem.consensus;
        let x = perturbed_state(&problem, 5);
        let (jacobians, gradient) = sensitivities(&problem, &x);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lambda: Vec<f64> = (0..cs.n_rows()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let h = dense_hessian(&problem, &jacobians);
        let a = dense(&cs.a);
        let opts = CoupledSolveOptions::default();

        let mut slack_norms = Vec::new();
        for mu in [1e2, 1e4, 1e6] {
            let step = coupled_qp_solve(&jacobians, &gradient, cs, &x, &lambda, mu, &opts).unwrap();
            // stationarity of ½ΔxᵀHΔx + gᵀΔx + λᵀs + μ/2‖s‖², s = A(x+Δx) − b
            let dx = DVector::from_column_slice(&step.dx);
            let s = DVector::from_column_slice(&step.slack);
            let kkt = &h * &dx + DVector::from_column_slice(&gradient) + a.transpose() * DVector::from_column_slice(&step.lambda_qp);
            let scale = 1.0 + gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            assert!(kkt.amax() <= 1e-8 * scale * mu.max(1.0), "{variant} μ={mu}: {:e}", kkt.amax());
            let expected_slack = &a * (DVector::from_column_slice(&x) + &dx) - DVector::from_column_slice(&cs.b);
            assert!((&expected_slack - &s).amax() <= 1e-12);
            slack_norms.push(s.amax());
        }
        // slack shrinks like 1/μ
        assert!(slack_norms[1] <= 2e-2 * slack_norms[0], "{variant}: {slack_norms:?}");
        assert!(slack_norms[2] <= 2e-2 * slack_norms[1], "{variant}: {slack_norms:?}");
    }
}

#[test]
fn coupled_linear_step_matches_dense_solve() {
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = six_bus(variant);
        let cs = &problem.consensus;
        let x = perturbed_state(&problem, 13);
        let (jacobians, gradient) = sensitivities(&problem, &x);
        let mu = 1e2;
        // tight CG tolerance: the comparison is about the system, not CG accuracy
        let opts = CoupledSolveOptions {
            cg: tight(),
            ..CoupledSolveOptions::default()
        };
        let step = coupled_linear_step(&jacobians, &gradient, cs, &x, mu, &opts).unwrap();

        let a = dense(&cs.a);
        let m = dense_hessian(&problem, &jacobians) + a.transpose() * &a * mu;
        let viol = DVector::from_vec(cs.violation(&x));
        let rhs = -(DVector::from_column_slice(&gradient) + a.transpose() * viol * mu);
        let expected = m.lu().solve(&rhs).unwrap();
        let err = max_abs_diff(&step.dx, expected.as_slice());
        assert!(err <= 1e-8 * expected.amax().max(1.0), "{variant}: {err:e}");
    }
}

#[test]
fn decoupled_step_matches_dense_solve_and_vanishes_for_huge_rho() {
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = six_bus(variant);
        let x = perturbed_state(&problem, 17);
        for l in 0..problem.n_regions() {
            let (region, layout) = (&problem.regions()[l], &problem.layouts[l]);
            let z = problem.block(&x, l);
            let j = dense(&jacobian(region, layout, z).unwrap());
            let r = DVector::from_vec(residual(region, layout, z).unwrap());
            for rho in [1e2, 1e12] {
                let step = decoupled_linear_step(region, layout, z, rho, None, &tight()).unwrap();
                let p: Vec<f64> = step.x_hat.iter().zip(z).map(|(a, b)| a - b).collect();
                let m = j.transpose() * &j + DMatrix::identity(z.len(), z.len()) * rho;
                let expected = m.lu().solve(&(-(j.transpose() * &r))).unwrap();
                let err = max_abs_diff(&p, expected.as_slice());
                // p is recovered as x̂ − z, so rounding of z sets an absolute floor
                assert!(err <= 1e-8 * expected.amax() + 1e-15, "{variant} region {l} ρ={rho}: {err:e} of {:e} ({} CG iterations)", expected.amax(), step.cg_iterations);
                if rho == 1e12 {
                    let g = (j.transpose() * &r).amax();
                    assert!(p.iter().all(|v| v.abs() <= 2.0 * g / rho), "{variant} region {l}");
                }
            }
        }
    }
}

#[test]
fn single_region_case9_standard_within_six_iterations() {
    let case = load_case(data("case9.m")).unwrap();
    let spec = PartitionSpec::single_region(&case);
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = DistributedProblem::new(&case, &spec, variant).unwrap();
        let out = run_standard(&problem, &SolverConfig::default(), &problem.initial_state(), None).unwrap();
        assert!(out.trace.len() <= 6, "{variant}: {}", out.trace.len());
        assert!(out.solution.final_mismatch <= 10.0 * 1e-8);
    }
}

#[test]
fn converged_states_satisfy_invariants() {
    let case = load_case(data("case30.m")).unwrap();
    let spec = load_partition(data("case30_partition.json"), &case).unwrap();
    let cfg = SolverConfig::default();
    for variant in [ModelVariant::Reduced, ModelVariant::Original] {
        let problem = DistributedProblem::new(&case, &spec, variant).unwrap();
        let x0 = problem.initial_state();
        for standard in [true, false] {
            let run = || {
                if standard {
                    run_standard(&problem, &cfg, &x0, None).unwrap()
                } else {
                    run_gn_inexact(&problem, &cfg, &x0, None).unwrap()
                }
            };
            let out = run();
            let x = &out.state.x;
            assert!(problem.objective(x) <= cfg.eps * cfg.eps, "{variant}");
            // every copy agrees with its core value (or setpoint)
            let viol = problem.consensus.violation(x);
            assert!(viol.iter().all(|v| v.abs() <= cfg.eps), "{variant}");
            // the same inputs give bit-identical outputs
            let again = run();
            assert_eq!(again.state.x, out.state.x);
            assert_eq!(again.trace, out.trace);
        }
    }
}
