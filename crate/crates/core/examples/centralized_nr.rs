//! Solve a case with the centralized Newton-Raphson baseline and print the
//! bus voltages and injections.
//!
//! ```text
//! cargo run --example centralized_nr -- [CASE.m]
//! ```

use aladin_pf::{load_case, nr_solve};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/case30.m").to_string());
    let case = load_case(&path)?;
    let sol = nr_solve(&case, 1e-10, 20)?;
    println!(
        "{} buses: {} iterations, mismatch {:.2e}, {:.3} ms",
        case.n_bus(),
        sol.iterations,
        sol.final_mismatch,
        1e3 * sol.wall_time_s
    );
    println!("{:>5} {:>9} {:>10} {:>9} {:>9}", "bus", "v", "θ (deg)", "p", "q");
    for i in 0..sol.bus_ids.len() {
        println!(
            "{:>5} {:>9.5} {:>10.4} {:>9.4} {:>9.4}",
            sol.bus_ids[i],
            sol.v[i],
            sol.theta[i].to_degrees(),
            sol.p[i],
            sol.q[i]
        );
    }
    let losses: f64 = sol.p.iter().sum();
    println!("active losses {losses:.5} p.u.");
    Ok(())
}
