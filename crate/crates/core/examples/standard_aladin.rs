//! Standard ALADIN: regularized local problems, a coupled QP and a dual
//! update, on the IEEE 118-bus case split into four regions.
//!
//! ```text
//! cargo run --release --example standard_aladin
//! ```

use aladin_pf::aladin::{run_standard, SolverConfig};
use aladin_pf::{load_case, load_partition, nr_solve, DistributedProblem, ModelVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let case = load_case(format!("{dir}/case118.m"))?;
    let spec = load_partition(format!("{dir}/case118_partition.json"), &case)?;
    let reference = nr_solve(&case, 1e-12, 20)?;

    for variant in [ModelVariant::Original, ModelVariant::Reduced] {
        let problem = DistributedProblem::new(&case, &spec, variant)?;
        let out = run_standard(&problem, &SolverConfig::default(), &problem.initial_state(), None)?;
        println!("{variant} layout, {} unknowns", problem.dim());
        for r in &out.trace.records {
            println!(
                "  iter {}  primal {:.2e}  dual {:.2e}  objective {:.2e}",
                r.iter, r.primal_inf, r.dual_inf, r.objective
            );
        }
        let lambda = out.state.lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let [dt, dv, dp, dq] = out.solution.max_deviation(&reference);
        println!("  ‖λ‖∞ = {lambda:.1e}; deviation from Newton-Raphson θ {dt:.1e} v {dv:.1e} p {dp:.1e} q {dq:.1e}");
        println!(
            "  {} local Gauss-Newton iterations, {} CG iterations, {:.1} ms\n",
            out.stats.inner_iterations,
            out.stats.iterations,
            1e3 * out.solution.wall_time_s
        );
    }
    Ok(())
}
