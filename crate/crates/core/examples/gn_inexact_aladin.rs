//! Gauss-Newton inexact ALADIN: one linear solve per region and one coupled
//! solve per iteration, multipliers fixed at zero. With a reference
//! solution the trace shows the error contracting quadratically.
//!
//! ```text
//! cargo run --release --example gn_inexact_aladin -- [THREADS]
//! ```

use aladin_pf::aladin::{run_gn_inexact, Reference, SolverConfig};
use aladin_pf::{load_case, load_partition, nr_solve, DistributedProblem, ModelVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threads = std::env::args().nth(1).map(|t| t.parse()).transpose()?.unwrap_or(1);
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let case = load_case(format!("{dir}/case118.m"))?;
    let spec = load_partition(format!("{dir}/case118_partition.json"), &case)?;
    let nr = nr_solve(&case, 1e-12, 20)?;

    let problem = DistributedProblem::new(&case, &spec, ModelVariant::Reduced)?;
    let reference = Reference::from_solution(&problem, &nr);
    let cfg = SolverConfig {
        threads,
        ..SolverConfig::default()
    };
    let out = run_gn_inexact(&problem, &cfg, &problem.initial_state(), Some(&reference))?;

    println!("{:>4} {:>10} {:>10} {:>10} {:>12}", "iter", "primal", "dual", "‖x − x*‖∞", "e_k+1/e_k²");
    let errors = out.trace.deviations().expect("reference given");
    for (k, r) in out.trace.records.iter().enumerate() {
        let ratio = if k > 0 { format!("{:.2e}", errors[k] / errors[k - 1].powi(2)) } else { String::new() };
        println!("{:>4} {:>10.2e} {:>10.2e} {:>10.2e} {:>12}", r.iter, r.primal_inf, r.dual_inf, errors[k], ratio);
    }
    println!(
        "converged in {} iterations on {threads} thread(s), {:.1} ms",
        out.trace.len(),
        1e3 * out.solution.wall_time_s
    );
    Ok(())
}
