use std::collections::HashSet;

use super::{BusType, Diagnostic, Locus, RawCase};

/// Checks the structural invariants of a case. An empty list means the case
/// is usable.
pub fn validate_case(case: &RawCase) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    if !(case.base_mva > 0.0) {
        diags.push(Diagnostic::new(
            "base-mva",
            Locus::Case,
            format!("baseMVA must be positive, got {}", case.base_mva),
        ));
    }

    let mut seen = HashSet::new();
    for bus in &case.buses {
        if !seen.insert(bus.id) {
            diags.push(Diagnostic::new("duplicate-bus", Locus::Bus(bus.id), "duplicate bus id"));
        }
        if !(bus.v_init > 0.0) || !bus.v_init.is_finite() {
            diags.push(Diagnostic::new(
                "voltage",
                Locus::Bus(bus.id),
                format!("initial voltage must be positive, got {}", bus.v_init),
            ));
        }
    }

    let n_ref = case.buses.iter().filter(|b| b.bus_type == BusType::Ref).count();
    match n_ref {
        0 => diags.push(Diagnostic::new("no-ref", Locus::Case, "no REF bus")),
        1 => {}
        _ => diags.push(Diagnostic::new("multiple-ref", Locus::Case, format!("multiple REF buses ({n_ref})"))),
    }

    for (i, br) in case.branches.iter().enumerate() {
        for end in [br.from, br.to] {
            if !seen.contains(&end) {
                diags.push(Diagnostic::new(
                    "dangling-branch",
                    Locus::Branch(i),
                    format!("dangling branch: bus {end} does not exist"),
                ));
            }
        }
        if br.from == br.to {
            diags.push(Diagnostic::new("self-loop", Locus::Branch(i), "branch connects a bus to itself"));
        }
        if br.status.is_on() && br.r == 0.0 && br.x == 0.0 {
            diags.push(Diagnostic::new("zero-impedance", Locus::Branch(i), "in-service branch with r = x = 0"));
        }
    }

    for (i, g) in case.gens.iter().enumerate() {
        if !seen.contains(&g.bus) {
            diags.push(Diagnostic::new(
                "dangling-gen",
                Locus::Gen(i),
                format!("generator at missing bus {}", g.bus),
            ));
        }
    }

    diags
}
