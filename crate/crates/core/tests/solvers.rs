mod common;

use common::{random_two_phase, rng};
use shom::solvers::{TraceWriter, TRACE_HEADER};
use shom::{
    make_benchmark, solve, Benchmark, BetaRule, Error, Functional, Grid, InitChoice, MacroscopicLoad, Minimizer,
    PhaseLaw, PhaseMap, Physics, ReferenceChoice, Scheme, SchemeConfig, Stiffness, StopReason,
};

fn obnosov(n: usize) -> PhaseMap {
    make_benchmark(&Benchmark::Obnosov, Grid::new(&[n, n]).unwrap(), Physics::Conductivity, 100.0).unwrap()
}

fn unit_load() -> MacroscopicLoad {
    MacroscopicLoad::unit(Physics::Conductivity, 2, 0).unwrap()
}

#[test]
fn exact_solution_fires_every_criterion() {
    let l = Stiffness::isotropic_conductivity(2, 3.0).unwrap();
    let phases = PhaseMap::uniform(Grid::new(&[8, 8]).unwrap(), PhaseLaw::Linear(l.clone())).unwrap();
    let cfg = SchemeConfig::new(Scheme::LinearCg, Functional::P).with_reference(ReferenceChoice::Custom(l));
    let m = Minimizer::new(cfg.clone(), phases.clone(), unit_load()).unwrap();
    let r = m.last_record();
    assert_eq!(r.value, 0.0);
    assert!(r.grad_norm <= cfg.tol_grad);
    assert_eq!(m.check_stop(), Some(StopReason::Gradient));
    let out = m.run().unwrap();
    assert_eq!(out.iterations, 0);
    assert!(out.converged());
}

#[test]
fn value_criterion_fires_at_its_threshold() {
    let phases = obnosov(16);
    let load = unit_load();
    let probe = Minimizer::new(SchemeConfig::new(Scheme::LinearCg, Functional::P), phases.clone(), load.clone()).unwrap();
    let value = probe.last_record().value;
    let scale = 0.5 * probe.problem().load_energy();
    let ratio = value / scale;
    let tight = 1e-300;
    let fires = |tol_value: f64| {
        let cfg = SchemeConfig::new(Scheme::LinearCg, Functional::P).with_tolerances(tight, tol_value);
        Minimizer::new(cfg, phases.clone(), load.clone()).unwrap().check_stop()
    };
    assert_eq!(fires(ratio * (1.0 + 1e-9)), Some(StopReason::Value));
    assert_eq!(fires(ratio * (1.0 - 1e-9)), None);
}

#[test]
fn value_criterion_does_not_apply_to_energy() {
    let cfg = SchemeConfig::new(Scheme::LinearCg, Functional::J).with_tolerances(1e-300, 1e300);
    let m = Minimizer::new(cfg, obnosov(8), unit_load()).unwrap();
    assert_eq!(m.check_stop(), None);
}

#[test]
fn iteration_cap_stops_without_convergence() {
    let cfg = SchemeConfig::new(Scheme::FixedStep, Functional::J).with_max_iter(3);
    let out = solve(&cfg, &obnosov(16), &unit_load()).unwrap();
    assert_eq!(out.stop, StopReason::MaxIter);
    assert_eq!(out.iterations, 3);
    assert!(!out.converged());
    assert_eq!(out.trace.records.len(), 4);
}

#[test]
fn divergence_level_is_an_event_not_a_stop() {
    let mut cfg = SchemeConfig::new(Scheme::LinearCg, Functional::J);
    cfg.tol_div = Some(1e-2);
    let out = solve(&cfg, &obnosov(16), &unit_load()).unwrap();
    assert_eq!(out.stop, StopReason::Gradient);
    let events: Vec<_> = out.trace.events.iter().filter(|e| e.message.starts_with("divergence")).collect();
    assert_eq!(events.len(), 1);
    assert!(events[0].n < out.iterations);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let mut r = rng(21);
    let phases = random_two_phase(Grid::new(&[12, 10]).unwrap(), Physics::Elasticity, &mut r);
    let load = MacroscopicLoad::new(Physics::Elasticity, 2, vec![0.1, 0.2, 0.3]).unwrap();
    for scheme in [Scheme::OptimalStep, Scheme::LinearCg, Scheme::NonlinearCg(BetaRule::FletcherReeves)] {
        let cfg = SchemeConfig::new(scheme, Functional::P);
        let csv = || {
            let mut bytes = Vec::new();
            solve(&cfg, &phases, &load).unwrap().trace.write_csv(&mut bytes).unwrap();
            bytes
        };
        assert_eq!(csv(), csv());
    }
}

#[test]
fn streamed_trace_matches_final_trace() {
    let cfg = SchemeConfig::new(Scheme::OptimalStep, Functional::J);
    let mut streamed = Vec::new();
    let out = {
        let mut writer = TraceWriter::new(&mut streamed).unwrap();
        Minimizer::new(cfg, obnosov(16), unit_load())
            .unwrap()
            .run_with(|record, _| {
                writer.push(record).unwrap();
                Ok(())
            })
            .unwrap()
    };
    let mut whole = Vec::new();
    out.trace.write_csv(&mut whole).unwrap();
    assert_eq!(streamed, whole);
    let text = String::from_utf8(whole).unwrap();
    assert_eq!(text.lines().next(), Some(TRACE_HEADER));
    assert_eq!(text.lines().count(), out.iterations + 2);
}

#[test]
fn observer_errors_abort_the_run() {
    let m = Minimizer::new(SchemeConfig::new(Scheme::LinearCg, Functional::J), obnosov(16), unit_load()).unwrap();
    let result = m.run_with(|record, _| {
        if record.n == 2 {
            Err(Error::Breakdown("stop here".into()))
        } else {
            Ok(())
        }
    });
    assert!(matches!(result, Err(Error::Breakdown(_))));
}

#[test]
fn invalid_configurations_are_rejected() {
    let phases = obnosov(8);
    let load = unit_load();
    let bad = [
        SchemeConfig::new(Scheme::FixedStep, Functional::P),
        SchemeConfig::new(Scheme::LinearCg, Functional::J).with_tolerances(0.0, 1e-14),
        SchemeConfig::new(Scheme::LinearCg, Functional::J).with_tolerances(1e-8, f64::NAN),
        SchemeConfig::new(Scheme::LinearCg, Functional::J).with_reference(ReferenceChoice::Scalar(-1.0)),
        SchemeConfig::new(Scheme::LinearCg, Functional::J).with_init(InitChoice::UnitStress),
        SchemeConfig::new(Scheme::LinearCg, Functional::P).with_init(InitChoice::Fields(vec![])),
    ];
    for cfg in bad {
        assert!(matches!(solve(&cfg, &phases, &load), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn cg_needs_fewer_iterations_than_steepest_descent() {
    let phases = obnosov(32);
    let load = unit_load();
    let cg = solve(&SchemeConfig::new(Scheme::LinearCg, Functional::J), &phases, &load).unwrap();
    let fixed = solve(&SchemeConfig::new(Scheme::FixedStep, Functional::J), &phases, &load).unwrap();
    let ncg = solve(&SchemeConfig::new(Scheme::NonlinearCg(BetaRule::PolakRibiere), Functional::J), &phases, &load).unwrap();
    assert!(cg.iterations < fixed.iterations);
    assert!((cg.effective_form - fixed.effective_form).abs() <= 1e-8);
    assert!((cg.effective_form - ncg.effective_form).abs() <= 1e-8);
}
