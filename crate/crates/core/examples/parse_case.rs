//! Parse a MATPOWER case file and print what was read.
//!
//! ```text
//! cargo run --example parse_case -- [CASE.m]
//! ```

use aladin_pf::case_io::{validate_case, BusType};
use aladin_pf::load_case;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/case14.m").to_string());
    let case = load_case(&path)?;

    let count = |t: BusType| case.buses.iter().filter(|b| b.bus_type == t).count();
    println!("{path}");
    println!("  base MVA     {}", case.base_mva);
    println!(
        "  buses        {} ({} REF, {} PV, {} PQ)",
        case.n_bus(),
        count(BusType::Ref),
        count(BusType::Pv),
        count(BusType::Pq)
    );
    println!("  generators   {}", case.gens.len());
    println!("  branches     {}", case.branches.len());
    println!("  diagnostics  {}", validate_case(&case).len());

    // loads and generation are stored in per-unit
    let load: f64 = case.buses.iter().map(|b| b.p_load).sum();
    let gen: f64 = case.gens.iter().filter(|g| g.status.is_on()).map(|g| g.p_gen).sum();
    println!("  total load   {load:.4} p.u., scheduled generation {gen:.4} p.u.");

    // the canonical JSON form round-trips
    let json = case.to_json();
    assert_eq!(aladin_pf::RawCase::from_json(&json)?, case);
    println!("  JSON form    {} bytes", json.len());
    Ok(())
}
