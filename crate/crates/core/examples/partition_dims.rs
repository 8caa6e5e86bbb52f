//! Split a case into regions and report the size of the distributed
//! problem in both state layouts, then do the same for generated systems
//! far too large to ship.
//!
//! ```text
//! cargo run --example partition_dims
//! ```

use aladin_pf::runner::dims_table;
use aladin_pf::synthetic::dimension_fixture;
use aladin_pf::{load_case, load_partition, DistributedProblem, ModelVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let case = load_case(format!("{dir}/case118.m"))?;
    let spec = load_partition(format!("{dir}/case118_partition.json"), &case)?;

    let problem = DistributedProblem::new(&case, &spec, ModelVariant::Reduced)?;
    println!("case118 in {} regions", problem.n_regions());
    for r in &problem.dimension_report().regions {
        println!("  region {}: {} core buses, {} copies", r.region, r.n_core, r.n_copy);
    }
    println!("  {} consensus rows", problem.consensus.n_rows());

    let mut reports = Vec::new();
    for (n_bus, n_reg, n_conn) in [(53, 3, 5), (418, 2, 8), (2708, 2, 30), (4662, 5, 130), (10224, 13, 242)] {
        let (case, spec) = dimension_fixture(n_bus, n_reg, n_conn)?;
        for variant in [ModelVariant::Reduced, ModelVariant::Original] {
            reports.push(DistributedProblem::new(&case, &spec, variant)?.dimension_report());
        }
    }
    println!("\ngenerated systems (unique tie-line endpoints: 2·buses + 4·ties reduced, 4·buses + 4·ties original)");
    print!("{}", dims_table(&reports));
    Ok(())
}
