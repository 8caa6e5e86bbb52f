//! Assemble the bus admittance matrix of a case and check two of its
//! identities: symmetry without phase shifters, and zero row sums once
//! shunts and line charging are removed.
//!
//! ```text
//! cargo run --example build_ybus -- [CASE.m]
//! ```

use aladin_pf::grid::system_ybus;
use aladin_pf::load_case;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/case9.m").to_string());
    let case = load_case(&path)?;
    let y = system_ybus(&case);
    let n = y.dim();
    println!("Y is {n}×{n} with {} stored entries", y.matrix().nnz());

    for i in 0..n.min(9) {
        let row: Vec<String> = y
            .row(i)
            .map(|(k, v)| format!("{}:{:+.3}{:+.3}j", y.bus_ids()[k], v.re, v.im))
            .collect();
        println!("  bus {:>3}  {}", y.bus_ids()[i], row.join("  "));
    }

    let asym = (0..n)
        .flat_map(|i| y.row(i).map(move |(k, v)| (i, k, v)))
        .map(|(i, k, v)| (v - y.get(k, i)).norm())
        .fold(0.0f64, f64::max);
    println!("max |Y_ik − Y_ki| = {asym:.2e}");

    let mut stripped = case.clone();
    stripped.buses.iter_mut().for_each(|b| {
        b.gs = 0.0;
        b.bs = 0.0;
    });
    stripped.branches.iter_mut().for_each(|b| b.b_charge = 0.0);
    let y0 = system_ybus(&stripped);
    let worst = (0..n)
        .map(|i| y0.row(i).map(|(_, v)| v).sum::<num_complex::Complex64>().norm())
        .fold(0.0f64, f64::max);
    println!("max |Σ_k Y_ik| without shunts = {worst:.2e} (nonzero only with off-nominal taps)");
    Ok(())
}
