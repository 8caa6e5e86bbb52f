//! Time every algorithm and layout on the shipped benchmark manifests and
//! print the table in the same layout as `aladin-pf bench`.
//!
//! ```text
//! cargo run --release --example benchmark -- [REPEATS]
//! ```

use aladin_pf::runner::{bench_fixture, pivot_csv, RunManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let repeat: usize = std::env::args().nth(1).map(|r| r.parse()).transpose()?.unwrap_or(5);
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bench");
    let mut rows = Vec::new();
    for name in ["case9", "case14", "case30", "case118", "meshed13"] {
        let manifest = RunManifest {
            repeat: Some(repeat),
            ..RunManifest::load(format!("{dir}/{name}.json").as_ref())?
        };
        rows.extend(bench_fixture(&manifest)?);
    }
    print!("{}", pivot_csv(&rows));

    println!("\niterations (standard original/reduced, gn original/reduced, centralized):");
    for chunk in rows.chunks(5) {
        let its: Vec<String> = chunk.iter().map(|r| r.iterations.map_or("-".into(), |i| i.to_string())).collect();
        println!("  {:<9} {}", chunk[0].case, its.join(" "));
    }
    Ok(())
}
