//! Build the generated test systems and write the meshed 13-region one to
//! disk as a JSON case plus partition, ready for `aladin-pf solve`.
//!
//! ```text
//! cargo run --example synthetic_fixtures -- [OUT_DIR]
//! ```

use std::path::PathBuf;

use aladin_pf::synthetic::{dimension_fixture, meshed_fixture};
use aladin_pf::{load_case, DistributedProblem, ModelVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

    let (case, spec) = dimension_fixture(418, 2, 8)?;
    let problem = DistributedProblem::new(&case, &spec, ModelVariant::Reduced)?;
    println!("radial fixture: {} buses, {} regions, reduced dimension {}", case.n_bus(), spec.n_regions(), problem.dim());

    let cases = [load_case(format!("{dir}/case30.m"))?, load_case(format!("{dir}/case14.m"))?];
    let (case, spec) = meshed_fixture(&cases, 13)?;
    std::fs::create_dir_all(&out_dir)?;
    let case_path = out_dir.join("meshed13.json");
    let part_path = out_dir.join("meshed13_partition.json");
    std::fs::write(&case_path, case.to_json())?;
    std::fs::write(&part_path, serde_json::to_string(spec.assignments())?)?;
    println!(
        "meshed fixture: {} buses, {} branches, {} regions → {}, {}",
        case.n_bus(),
        case.branches.len(),
        spec.n_regions(),
        case_path.display(),
        part_path.display()
    );
    Ok(())
}
