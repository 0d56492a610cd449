//! Browser bindings for the square-inclusion conductivity benchmark: solve
//! with a chosen scheme, map the local flux, and trace two-field iterates.

use shom::homogenize::trajectory_from_parts;
use shom::{
    make_benchmark, obnosov_exact, solve, Benchmark, BetaRule, Error, Functional, Grid, InitChoice, MacroscopicLoad,
    PhaseMap, Physics, Scheme, SchemeConfig, SolveOutcome,
};
use wasm_bindgen::prelude::*;

/// Largest grid edge accepted, to keep a click from freezing the tab.
pub const MAX_EDGE: usize = 256;

/// Iteration cap for browser runs.
pub const MAX_ITER: usize = 20_000;

fn phases(n: usize, contrast: f64) -> shom::Result<PhaseMap> {
    if n > MAX_EDGE {
        return Err(Error::Config(format!("grid edge {n} exceeds {MAX_EDGE}")));
    }
    make_benchmark(&Benchmark::Obnosov, Grid::new(&[n, n])?, Physics::Conductivity, contrast)
}

fn load() -> shom::Result<MacroscopicLoad> {
    MacroscopicLoad::unit(Physics::Conductivity, 2, 0)
}

pub fn parse_scheme(name: &str) -> shom::Result<Scheme> {
    Ok(match name {
        "fixed" => Scheme::FixedStep,
        "optimal" => Scheme::OptimalStep,
        "cg" => Scheme::LinearCg,
        "ncg-fr" => Scheme::NonlinearCg(BetaRule::FletcherReeves),
        "ncg-pr" => Scheme::NonlinearCg(BetaRule::PolakRibiere),
        other => return Err(Error::Config(format!("unknown scheme {other:?}"))),
    })
}

pub fn parse_functional(name: &str) -> shom::Result<Functional> {
    Ok(match name {
        "j" | "J" => Functional::J,
        "n" | "N" => Functional::N,
        "p" | "P" => Functional::P,
        other => return Err(Error::Config(format!("unknown functional {other:?}"))),
    })
}

/// Result of one benchmark run.
#[wasm_bindgen]
pub struct BenchmarkRun {
    n: usize,
    leff: f64,
    exact: f64,
    iterations: usize,
    converged: bool,
    values: Vec<f64>,
    errors: Vec<f64>,
    flux: Vec<f64>,
}

#[wasm_bindgen]
impl BenchmarkRun {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Effective conductivity along the load.
    #[wasm_bindgen(getter)]
    pub fn leff(&self) -> f64 {
        self.leff
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> f64 {
        self.exact
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Functional value per iterate.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Relative error of the effective value against the closed form, per
    /// iterate.
    pub fn errors(&self) -> Vec<f64> {
        self.errors.clone()
    }

    /// First flux component per cell, row-major.
    pub fn flux(&self) -> Vec<f64> {
        self.flux.clone()
    }
}

fn flux(out: &SolveOutcome, phases: &PhaseMap, load: &MacroscopicLoad) -> shom::Result<Vec<f64>> {
    let stress = match out.fields.as_slice() {
        [tau, _] => tau.clone(),
        [e_star] => {
            let mut strain = e_star.clone();
            strain.add_uniform(load.value());
            phases.stress(&strain)?
        }
        _ => return Err(Error::Shape("unexpected iterate".into())),
    };
    Ok((0..stress.cells()).map(|c| stress.cell(c)[0]).collect())
}

/// Solves the `n×n` benchmark with inclusion contrast `contrast` under a
/// unit gradient along the first axis.
pub fn run_benchmark(n: usize, contrast: f64, scheme: &str, functional: &str) -> shom::Result<BenchmarkRun> {
    let phases = phases(n, contrast)?;
    let load = load()?;
    let cfg = SchemeConfig::new(parse_scheme(scheme)?, parse_functional(functional)?).with_max_iter(MAX_ITER);
    let out = solve(&cfg, &phases, &load)?;
    let exact = obnosov_exact(1.0, contrast);
    let records = &out.trace.records;
    Ok(BenchmarkRun {
        n,
        leff: out.effective_form / load.norm_squared(),
        exact,
        iterations: out.iterations,
        converged: out.converged(),
        values: records.iter().map(|r| r.value).collect(),
        errors: records.iter().map(|r| (r.leff - exact).abs() / exact).collect(),
        flux: flux(&out, &phases, &load)?,
    })
}

/// `(ΔConst, ΔCompat, ΔEquil)` of every iterate of a two-field run,
/// flattened.
pub fn two_field_trajectory(n: usize, contrast: f64, scheme: &str, unit_stress: bool) -> shom::Result<Vec<f64>> {
    let phases = phases(n, contrast)?;
    let mut cfg = SchemeConfig::new(parse_scheme(scheme)?, Functional::P).with_max_iter(MAX_ITER);
    if unit_stress {
        cfg = cfg.with_init(InitChoice::UnitStress);
    }
    let out = solve(&cfg, &phases, &load()?)?;
    Ok(out.trace.records.iter().flat_map(|r| trajectory_from_parts(&r.parts)).collect())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = runBenchmark)]
pub fn run_benchmark_js(n: usize, contrast: f64, scheme: &str, functional: &str) -> Result<BenchmarkRun, JsError> {
    run_benchmark(n, contrast, scheme, functional).map_err(js)
}

#[wasm_bindgen(js_name = trajectory)]
pub fn trajectory_js(n: usize, contrast: f64, scheme: &str, unit_stress: bool) -> Result<Vec<f64>, JsError> {
    two_field_trajectory(n, contrast, scheme, unit_stress).map_err(js)
}

#[wasm_bindgen(js_name = exactModulus)]
pub fn exact_modulus(contrast: f64) -> f64 {
    obnosov_exact(1.0, contrast)
}
