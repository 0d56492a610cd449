//! Built-in configurations printed by `dump-presets`.

use crate::config::{
    Emit, FunctionalName, InitName, Microstructure, PhaseSpec, PhysicsName, ReferenceSpec, RunConfig, SchemeEntry,
    SchemeName,
};

use FunctionalName::{J, N, P};
use SchemeName::{Cg, Fixed, NcgPr, Optimal};

fn scheme(s: SchemeName, f: FunctionalName) -> SchemeEntry {
    SchemeEntry::new(s, f)
}

fn conductivity(n: usize, microstructure: Microstructure, load: Option<Vec<f64>>, schemes: Vec<SchemeEntry>) -> RunConfig {
    RunConfig {
        physics: PhysicsName::Conductivity,
        grid: vec![n, n],
        lengths: None,
        microstructure,
        load,
        schemes,
        emit: Emit::default(),
        output_dir: None,
    }
}

fn obnosov(contrast: f64) -> Microstructure {
    Microstructure::Obnosov { contrast: Some(contrast), phases: None }
}

fn plots() -> Emit {
    Emit { convergence_svg: true, trajectory_svg: true, ..Emit::default() }
}

/// Named presets in a fixed order.
pub fn presets() -> Vec<(&'static str, RunConfig)> {
    let unit_x = Some(vec![1.0, 0.0]);

    let mut reference_run = conductivity(512, obnosov(100.0), unit_x.clone(), vec![SchemeEntry {
        reference: Some(ReferenceSpec::Scalar(50.5)),
        ..scheme(Fixed, J)
    }]);
    reference_run.emit.convergence_svg = true;

    let mut compare = conductivity(128, obnosov(100.0), unit_x.clone(), vec![
        scheme(Fixed, J),
        scheme(Optimal, J),
        scheme(Cg, J),
        SchemeEntry { max_iter: Some(50_000), ..scheme(Optimal, N) },
        scheme(Cg, N),
        scheme(Optimal, P),
        scheme(Cg, P),
    ]);
    compare.emit = plots();

    let homogeneous = conductivity(
        16,
        Microstructure::Homogeneous { phase: Some(PhaseSpec::Isotropic { modulus: 2.0 }) },
        Some(vec![1.0, 0.5]),
        vec![scheme(Cg, J), scheme(Cg, P)],
    );

    let laminate = conductivity(
        64,
        Microstructure::Laminate { axis: 0, fractions: vec![0.25, 0.75], contrast: Some(10.0), phases: None },
        None,
        vec![scheme(Cg, J)],
    );

    let elastic = RunConfig {
        physics: PhysicsName::Elasticity,
        microstructure: Microstructure::Obnosov {
            contrast: None,
            phases: Some(vec![
                PhaseSpec::IsotropicElastic { bulk: 1.0, shear: 0.6 },
                PhaseSpec::IsotropicElastic { bulk: 10.0, shear: 6.0 },
            ]),
        },
        ..conductivity(64, obnosov(1.0), None, vec![scheme(Cg, J)])
    };

    let power_law = conductivity(
        64,
        Microstructure::Obnosov {
            contrast: None,
            phases: Some(vec![
                PhaseSpec::PowerLaw { modulus: 1.0, exponent: 3.0 },
                PhaseSpec::PowerLaw { modulus: 10.0, exponent: 1.5 },
            ]),
        },
        unit_x.clone(),
        vec![scheme(NcgPr, J), scheme(NcgPr, P)],
    );

    let mut trajectories = conductivity(64, obnosov(100.0), unit_x, vec![
        scheme(Optimal, P),
        scheme(Cg, P),
        SchemeEntry { label: Some("cg-p-unit-stress".into()), init: Some(InitName::UnitStress), ..scheme(Cg, P) },
        scheme(Cg, J),
    ]);
    trajectories.emit = plots();

    vec![
        ("obnosov-512", reference_run),
        ("obnosov-compare", compare),
        ("homogeneous", homogeneous),
        ("laminate", laminate),
        ("elastic-inclusion", elastic),
        ("power-law", power_law),
        ("trajectories", trajectories),
    ]
}
