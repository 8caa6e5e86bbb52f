//! Shipped case files: JSON round trip and the generated meshed fixture.

use std::path::{Path, PathBuf};

use aladin_pf::synthetic::meshed_fixture;
use aladin_pf::{load_case, load_partition, RawCase};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn json_round_trip_is_exact() {
    for name in ["case9.m", "case14.m", "case30.m", "case118.m", "six_bus.m", "meshed13.json"] {
        let case = load_case(data(name)).unwrap();
        let back = RawCase::from_json(&case.to_json()).unwrap();
        assert_eq!(back, case, "{name}");
    }
}

#[test]
fn shipped_meshed_fixture_matches_generator() {
    let cases = [load_case(data("case30.m")).unwrap(), load_case(data("case14.m")).unwrap()];
    let (case, spec) = meshed_fixture(&cases, 13).unwrap();
    let shipped = load_case(data("meshed13.json")).unwrap();
    assert_eq!(shipped, case);
    assert_eq!(load_partition(data("meshed13_partition.json"), &shipped).unwrap(), spec);
}
