//! JSON run configuration and its translation into solver inputs.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use shom::homogenize::{isotropic_phase, make_benchmark, obnosov_exact, Benchmark};
use shom::io::read_phase_raster;
use shom::{
    BetaRule, Functional, Grid, InitChoice, MacroscopicLoad, Minimizer, PhaseLaw, PhaseMap, Physics,
    PowerLawPotential, ReferenceChoice, Scheme, SchemeConfig, Stiffness,
};

/// Output directory used when neither the command line nor the config names
/// one.
pub const DEFAULT_OUTPUT_DIR: &str = "shom-output";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsName,
    pub grid: Vec<usize>,
    /// Cell edge lengths; unit edges when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    pub microstructure: Microstructure,
    /// Macroscopic strain in storage order. Without a load every scheme
    /// assembles the full effective tensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<Vec<f64>>,
    pub schemes: Vec<SchemeEntry>,
    #[serde(default)]
    pub emit: Emit,
    /// Relative paths are taken from the directory of the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsName {
    Conductivity,
    Elasticity,
}

impl From<PhysicsName> for Physics {
    fn from(p: PhysicsName) -> Self {
        match p {
            PhysicsName::Conductivity => Physics::Conductivity,
            PhysicsName::Elasticity => Physics::Elasticity,
        }
    }
}

/// Benchmark phases default to modulus 1 (matrix) and `contrast`; `phases`
/// replaces them, one law per phase id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Microstructure {
    Obnosov {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phases: Option<Vec<PhaseSpec>>,
    },
    Checkerboard {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phases: Option<Vec<PhaseSpec>>,
    },
    Laminate {
        axis: usize,
        fractions: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phases: Option<Vec<PhaseSpec>>,
    },
    Homogeneous {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<PhaseSpec>,
    },
    /// ASCII PGM or field dump of phase ids.
    Raster { path: PathBuf, phases: Vec<PhaseSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    /// `modulus·I` for conductivity; bulk and shear moduli equal to
    /// `modulus` for elasticity.
    Isotropic { modulus: f64 },
    IsotropicElastic { bulk: f64, shear: f64 },
    Lame { lambda: f64, mu: f64 },
    /// Full symmetric matrix in the storage basis.
    Matrix { entries: Vec<Vec<f64>> },
    PowerLaw { modulus: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeName {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "optimal")]
    Optimal,
    #[serde(rename = "cg")]
    Cg,
    #[serde(rename = "ncg-fr")]
    NcgFr,
    #[serde(rename = "ncg-pr")]
    NcgPr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalName {
    #[serde(rename = "j", alias = "J")]
    J,
    #[serde(rename = "n", alias = "N")]
    N,
    #[serde(rename = "p", alias = "P")]
    P,
}

/// `"default"`, a scalar modulus `l₀` for `l₀·I`, or a full matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSpec {
    Named(String),
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Default,
    UnitStress,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub scheme: SchemeName,
    pub functional: FunctionalName,
    /// File-name label; `<scheme>-<functional>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_div: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitName>,
}

impl SchemeEntry {
    pub fn new(scheme: SchemeName, functional: FunctionalName) -> Self {
        Self {
            scheme,
            functional,
            label: None,
            max_iter: None,
            tol_grad: None,
            tol_value: None,
            tol_div: None,
            reference: None,
            init: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Emit {
    pub trace: bool,
    pub dumps: bool,
    pub convergence_svg: bool,
    pub trajectory_svg: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { trace: true, dumps: false, convergence_svg: false, trajectory_svg: false }
    }
}

/// One configured solver run.
#[derive(Debug, Clone)]
pub struct PlannedRun {
    pub label: String,
    pub config: SchemeConfig,
}

/// A validated configuration, ready to run.
pub struct Prepared {
    pub phases: PhaseMap,
    pub load: Option<MacroscopicLoad>,
    pub runs: Vec<PlannedRun>,
    /// One solver per run for a single load; empty in tensor mode, where
    /// every run solves one problem per load component.
    pub minimizers: Vec<Minimizer>,
    pub emit: Emit,
    pub output_dir: PathBuf,
    /// Closed-form effective modulus, when the microstructure has one.
    pub exact: Option<f64>,
}

impl Prepared {
    pub fn tensor_mode(&self) -> bool {
        self.load.is_none()
    }
}

/// Reads and parses a config file.
pub fn read(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunConfig {
    /// Validates the configuration and builds the microstructure. `base` is
    /// the directory relative paths are resolved against; `out` overrides
    /// the configured output directory.
    pub fn prepare(&self, base: &Path, out: Option<&Path>) -> Result<Prepared> {
        let physics = Physics::from(self.physics);
        let grid = match &self.lengths {
            Some(l) => Grid::with_lengths(&self.grid, l)?,
            None => Grid::new(&self.grid)?,
        };
        let (phases, exact) = self.microstructure.build(grid, physics, base)?;
        let dim = grid.ndim();
        let load = self.load.as_ref().map(|v| MacroscopicLoad::new(physics, dim, v.clone())).transpose()?;
        ensure!(!self.schemes.is_empty(), "at least one scheme is required");
        let mut labels = HashSet::new();
        let mut runs = Vec::with_capacity(self.schemes.len());
        for entry in &self.schemes {
            let run = entry.plan(physics, dim)?;
            ensure!(labels.insert(run.label.clone()), "duplicate scheme label {:?}", run.label);
            runs.push(run);
        }
        let exact = exact.filter(|_| self.lengths.as_ref().is_none_or(|l| l.windows(2).all(|w| w[0] == w[1])));
        let output_dir = match (out, &self.output_dir) {
            (Some(o), _) => o.to_path_buf(),
            (None, Some(d)) => base.join(d),
            (None, None) => PathBuf::from(DEFAULT_OUTPUT_DIR),
        };
        let minimizers = match &load {
            Some(load) => runs
                .iter()
                .map(|r| {
                    Minimizer::new(r.config.clone(), phases.clone(), load.clone())
                        .with_context(|| format!("scheme {}", r.label))
                })
                .collect::<Result<Vec<_>>>()?,
            None => {
                check_tensor_runs(&phases, &runs)?;
                ensure!(
                    !(self.emit.convergence_svg || self.emit.trajectory_svg),
                    "convergence and trajectory plots need a load"
                );
                Vec::new()
            }
        };
        Ok(Prepared { phases, load, runs, minimizers, emit: self.emit, output_dir, exact })
    }
}

/// Rejects runs the effective-tensor assembly would refuse, by building
/// each solver once under a unit load.
fn check_tensor_runs(phases: &PhaseMap, runs: &[PlannedRun]) -> Result<()> {
    if let Some(k) = phases.first_nonlinear() {
        bail!("the effective tensor needs linear phases (phase {k} is nonlinear); give a load");
    }
    let unit = MacroscopicLoad::unit(phases.physics(), phases.grid().ndim(), 0)?;
    for r in runs {
        Minimizer::new(r.config.clone(), phases.clone(), unit.clone()).with_context(|| format!("scheme {}", r.label))?;
    }
    Ok(())
}

impl Microstructure {
    fn build(&self, grid: Grid, physics: Physics, base: &Path) -> Result<(PhaseMap, Option<f64>)> {
        let dim = grid.ndim();
        let laws = |specs: &[PhaseSpec]| -> Result<Vec<PhaseLaw>> {
            specs.iter().enumerate().map(|(k, s)| s.build(physics, dim).with_context(|| format!("phase {k}"))).collect()
        };
        let benchmark = |b: Benchmark, contrast: &Option<f64>, phases: &Option<Vec<PhaseSpec>>| -> Result<PhaseMap> {
            let map = match (contrast, phases) {
                (Some(c), _) => make_benchmark(&b, grid, physics, *c)?,
                (None, Some(_)) => make_benchmark(&b, grid, physics, 2.0)?,
                (None, None) => bail!("the {b:?} microstructure needs a contrast or a phase list"),
            };
            match phases {
                None => Ok(map),
                Some(specs) => {
                    ensure!(
                        specs.len() == map.phases().len(),
                        "the {b:?} microstructure has {} phases, {} laws given",
                        map.phases().len(),
                        specs.len()
                    );
                    Ok(PhaseMap::new(grid, laws(specs)?, map.ids().to_vec())?)
                }
            }
        };
        Ok(match self {
            Microstructure::Obnosov { contrast, phases } => {
                let map = benchmark(Benchmark::Obnosov, contrast, phases)?;
                let exact = match (contrast, phases) {
                    (Some(z), None) if physics == Physics::Conductivity && dim == 2 => Some(obnosov_exact(1.0, *z)),
                    _ => None,
                };
                (map, exact)
            }
            Microstructure::Checkerboard { contrast, phases } => (benchmark(Benchmark::Checkerboard, contrast, phases)?, None),
            Microstructure::Laminate { axis, fractions, contrast, phases } => {
                let b = Benchmark::Laminate { axis: *axis, fractions: fractions.clone() };
                (benchmark(b, contrast, phases)?, None)
            }
            Microstructure::Homogeneous { phase } => {
                let law = match phase {
                    Some(s) => s.build(physics, dim)?,
                    None => PhaseLaw::Linear(isotropic_phase(physics, dim, 1.0)?),
                };
                (PhaseMap::uniform(grid, law)?, None)
            }
            Microstructure::Raster { path, phases } => {
                let full = base.join(path);
                let bytes = std::fs::read(&full).with_context(|| format!("reading raster {}", full.display()))?;
                let raster = read_phase_raster(&bytes).with_context(|| format!("raster {}", full.display()))?;
                ensure!(
                    raster.dims == grid.dims(),
                    "raster {} is {:?}, the grid is {:?}",
                    full.display(),
                    raster.dims,
                    grid.dims()
                );
                (PhaseMap::new(grid, laws(phases)?, raster.ids)?, None)
            }
        })
    }
}

impl PhaseSpec {
    pub fn build(&self, physics: Physics, dim: usize) -> Result<PhaseLaw> {
        let elastic_only = |name: &str| {
            ensure!(physics == Physics::Elasticity, "the {name} law applies to elasticity only");
            Ok(())
        };
        Ok(match self {
            PhaseSpec::Isotropic { modulus } => PhaseLaw::Linear(isotropic_phase(physics, dim, *modulus)?),
            PhaseSpec::IsotropicElastic { bulk, shear } => {
                elastic_only("isotropic_elastic")?;
                PhaseLaw::Linear(Stiffness::isotropic_elastic(dim, *bulk, *shear)?)
            }
            PhaseSpec::Lame { lambda, mu } => {
                elastic_only("lame")?;
                PhaseLaw::Linear(Stiffness::isotropic_lame(dim, *lambda, *mu)?)
            }
            PhaseSpec::Matrix { entries } => PhaseLaw::Linear(matrix(physics, dim, entries)?),
            PhaseSpec::PowerLaw { modulus, exponent } => {
                PhaseLaw::Potential(Arc::new(PowerLawPotential::new(physics, dim, *modulus, *exponent)?))
            }
        })
    }
}

fn matrix(physics: Physics, dim: usize, rows: &[Vec<f64>]) -> Result<Stiffness> {
    let m = physics.components(dim);
    ensure!(
        rows.len() == m && rows.iter().all(|r| r.len() == m),
        "expected a {m}x{m} matrix in the storage basis"
    );
    Ok(Stiffness::new(physics, dim, rows.concat())?)
}

impl SchemeEntry {
    fn plan(&self, physics: Physics, dim: usize) -> Result<PlannedRun> {
        let scheme = match self.scheme {
            SchemeName::Fixed => Scheme::FixedStep,
            SchemeName::Optimal => Scheme::OptimalStep,
            SchemeName::Cg => Scheme::LinearCg,
            SchemeName::NcgFr => Scheme::NonlinearCg(BetaRule::FletcherReeves),
            SchemeName::NcgPr => Scheme::NonlinearCg(BetaRule::PolakRibiere),
        };
        let functional = match self.functional {
            FunctionalName::J => Functional::J,
            FunctionalName::N => Functional::N,
            FunctionalName::P => Functional::P,
        };
        let mut cfg = SchemeConfig::new(scheme, functional);
        if let Some(n) = self.max_iter {
            cfg.max_iter = n;
        }
        cfg.tol_grad = self.tol_grad.unwrap_or(cfg.tol_grad);
        cfg.tol_value = self.tol_value.unwrap_or(cfg.tol_value);
        cfg.tol_div = self.tol_div;
        cfg.reference = match &self.reference {
            None => ReferenceChoice::Default,
            Some(ReferenceSpec::Named(name)) if name == "default" => ReferenceChoice::Default,
            Some(ReferenceSpec::Named(name)) => bail!("unknown reference {name:?}; use \"default\", a number or a matrix"),
            Some(ReferenceSpec::Scalar(v)) => ReferenceChoice::Scalar(*v),
            Some(ReferenceSpec::Matrix(rows)) => ReferenceChoice::Custom(matrix(physics, dim, rows)?),
        };
        cfg.init = match self.init {
            None | Some(InitName::Default) => InitChoice::Default,
            Some(InitName::UnitStress) => InitChoice::UnitStress,
        };
        let label = self.label.clone().unwrap_or_else(|| cfg.label());
        ensure!(
            !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            "scheme label {label:?} must be nonempty and use only letters, digits, '-', '_' or '.'"
        );
        cfg.validate().with_context(|| format!("scheme {label}"))?;
        Ok(PlannedRun { label, config: cfg })
    }
}
