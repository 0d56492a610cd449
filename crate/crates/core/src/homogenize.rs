//! Problem assembly, benchmark microstructures, effective-tensor extraction
//! and projection-space trajectory coordinates.

use crate::constitutive::{PhaseLaw, PhaseMap};
use crate::error::{Error, Result};
use crate::field::{Grid, MacroscopicLoad, Physics, TensorField};
use crate::functionals::{eval_p, Parts};
use crate::green::GreenOperator;
use crate::solvers::{Functional, Minimizer, SchemeConfig, SolveOutcome, TraceRecord};
use crate::stiffness::{mandel_index, Stiffness};

/// A periodic cell problem: microstructure, macroscopic load, and the Green
/// operator of the chosen reference medium.
#[derive(Debug)]
pub struct HomogProblem {
    phases: PhaseMap,
    load: MacroscopicLoad,
    green: GreenOperator,
}

impl HomogProblem {
    pub fn new(phases: PhaseMap, load: MacroscopicLoad, reference: Stiffness) -> Result<Self> {
        if load.physics() != phases.physics() || load.dim() != phases.grid().ndim() {
            return Err(Error::Config("load does not match the microstructure".into()));
        }
        if reference.physics() != phases.physics() {
            return Err(Error::Config("reference medium does not match the microstructure".into()));
        }
        let green = GreenOperator::new(reference, *phases.grid())?;
        Ok(Self { phases, load, green })
    }

    pub fn phases(&self) -> &PhaseMap {
        &self.phases
    }

    pub fn load(&self) -> &MacroscopicLoad {
        &self.load
    }

    pub fn green(&self) -> &GreenOperator {
        &self.green
    }

    pub fn reference(&self) -> &Stiffness {
        self.green.reference()
    }

    pub fn grid(&self) -> &Grid {
        self.phases.grid()
    }

    pub fn physics(&self) -> Physics {
        self.phases.physics()
    }

    /// `‖ε̄‖ₑ² = ε̄:L₀ε̄`.
    pub fn load_energy(&self) -> f64 {
        self.reference().quadratic(self.load.value(), self.load.value())
    }
}

/// Reference medium used when none is configured: the arithmetic mean of
/// the extreme phase moduli for strain functionals, their geometric mean for
/// the two-field functional. Nonlinear phases contribute secant moduli at `ε̄`.
pub fn default_reference(phases: &PhaseMap, functional: Functional, load: &MacroscopicLoad) -> Result<Stiffness> {
    let (lo, hi) = phases.modulus_bounds(load.value());
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::Config(format!(
            "cannot derive a reference medium from phase moduli in [{lo}, {hi}]; set one explicitly"
        )));
    }
    let value = match functional {
        Functional::J | Functional::N => 0.5 * (lo + hi),
        Functional::P => (lo * hi).sqrt(),
    };
    Stiffness::scaled_identity(phases.physics(), phases.grid().ndim(), value)
}

/// Built-in microstructures.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    /// Square inclusion of half the cell edge (volume fraction 1/4 in 2D).
    Obnosov,
    /// Layers stacked along `axis` with the given volume fractions.
    Laminate { axis: usize, fractions: Vec<f64> },
    Homogeneous,
    /// Alternating blocks of half the cell edge.
    Checkerboard,
}

/// Isotropic law of modulus `value`: `value·I` for conductivity, bulk and
/// shear moduli both equal to `value` for elasticity.
pub fn isotropic_phase(physics: Physics, dim: usize, value: f64) -> Result<Stiffness> {
    match physics {
        Physics::Conductivity => Stiffness::isotropic_conductivity(dim, value),
        Physics::Elasticity => Stiffness::isotropic_elastic(dim, value, value),
    }
}

/// Rasterizes a benchmark. Phase 0 has modulus 1 (matrix), phase 1 has
/// modulus `contrast`; laminates with more than two layers interpolate the
/// moduli linearly.
pub fn make_benchmark(benchmark: &Benchmark, grid: Grid, physics: Physics, contrast: f64) -> Result<PhaseMap> {
    if !(contrast > 0.0 && contrast.is_finite()) {
        return Err(Error::Config(format!("contrast must be positive, got {contrast}")));
    }
    let dim = grid.ndim();
    let law = |v: f64| isotropic_phase(physics, dim, v).map(PhaseLaw::Linear);
    let two = || -> Result<Vec<PhaseLaw>> { Ok(vec![law(1.0)?, law(contrast)?]) };
    match benchmark {
        Benchmark::Homogeneous => PhaseMap::uniform(grid, law(1.0)?),
        Benchmark::Obnosov => {
            if grid.dims().iter().any(|n| n % 2 != 0) {
                return Err(Error::Config(format!(
                    "the square-inclusion benchmark needs even grid sizes, got {:?}",
                    grid.dims()
                )));
            }
            let ids = (0..grid.cells())
                .map(|c| {
                    let idx = grid.unravel(c);
                    let inside = (0..dim).all(|a| {
                        let n = grid.dims()[a];
                        idx[a] >= n / 4 && idx[a] < n / 4 + n / 2
                    });
                    u32::from(inside)
                })
                .collect();
            PhaseMap::new(grid, two()?, ids)
        }
        Benchmark::Checkerboard => {
            if grid.dims().iter().any(|n| n % 2 != 0) {
                return Err(Error::Config("the checkerboard needs even grid sizes".into()));
            }
            let ids = (0..grid.cells())
                .map(|c| {
                    let idx = grid.unravel(c);
                    let parity: usize = (0..dim).map(|a| 2 * idx[a] / grid.dims()[a]).sum();
                    (parity % 2) as u32
                })
                .collect();
            PhaseMap::new(grid, two()?, ids)
        }
        Benchmark::Laminate { axis, fractions } => {
            let ids = laminate_ids(grid, *axis, fractions)?;
            let n = fractions.len();
            let phases = (0..n)
                .map(|k| law(1.0 + (contrast - 1.0) * k as f64 / (n - 1) as f64))
                .collect::<Result<Vec<_>>>()?;
            PhaseMap::new(grid, phases, ids)
        }
    }
}

fn laminate_ids(grid: Grid, axis: usize, fractions: &[f64]) -> Result<Vec<u32>> {
    if axis >= grid.ndim() {
        return Err(Error::Config(format!("laminate axis {axis} out of range")));
    }
    if fractions.len() < 2 || fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Config("a laminate needs at least two positive fractions".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("laminate fractions sum to {total}, not 1")));
    }
    let n = grid.dims()[axis];
    let mut bounds = Vec::with_capacity(fractions.len());
    let mut acc = 0.0;
    for &f in fractions {
        acc += f;
        let b = acc * n as f64;
        if (b - b.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "laminate fractions {fractions:?} are not representable on {n} cells"
            )));
        }
        bounds.push(b.round() as usize);
    }
    Ok((0..grid.cells())
        .map(|c| {
            let i = grid.unravel(c)[axis];
            bounds.iter().position(|&b| i < b).unwrap_or(bounds.len() - 1) as u32
        })
        .collect())
}

/// Closed-form effective conductivity of a square array of square
/// inclusions at volume fraction 1/4: `L₂√((1 + 3z)/(3 + z))` with matrix
/// modulus `L₂` and contrast `z`.
pub fn obnosov_exact(matrix: f64, contrast: f64) -> f64 {
    matrix * ((1.0 + 3.0 * contrast) / (3.0 + contrast)).sqrt()
}

/// Effective tensor of a laminate with layer normal `e_axis` from the jump
/// conditions: piecewise-uniform strains `ε̄ + sym(a_k ⊗ n)`, continuous
/// traction across layers and `Σ f_k a_k = 0`. Returns the row-major matrix
/// in the storage basis of the phases.
pub fn laminate_effective(phases: &[Stiffness], fractions: &[f64], axis: usize) -> Result<Vec<f64>> {
    let first = phases.first().ok_or_else(|| Error::Config("no phases".into()))?;
    let (physics, dim) = (first.physics(), first.dim());
    if phases.len() != fractions.len() || axis >= dim {
        return Err(Error::Config("laminate description is inconsistent".into()));
    }
    let m = first.components();
    // Jump vectors live in R^d (elasticity) or along n (conductivity).
    let jumps = match physics {
        Physics::Conductivity => 1,
        Physics::Elasticity => dim,
    };
    // Strain produced by jump component j: sym(e_j ⊗ n), or n itself.
    let jump_strain = |j: usize| -> Vec<f64> {
        let mut v = vec![0.0; m];
        match physics {
            Physics::Conductivity => v[axis] = 1.0,
            Physics::Elasticity => {
                let (k, f) = mandel_index(dim, j, axis);
                v[k] += if j == axis { 1.0 } else { 0.5 * f };
            }
        }
        v
    };
    // Traction component i of a stress: σ·n, or the normal flux.
    let traction = |s: &[f64], i: usize| -> f64 {
        match physics {
            Physics::Conductivity => s[axis],
            Physics::Elasticity => {
                let (k, f) = mandel_index(dim, i, axis);
                s[k] / f
            }
        }
    };
    let basis: Vec<Vec<f64>> = (0..jumps).map(jump_strain).collect();
    let mut result = vec![0.0; m * m];
    for col in 0..m {
        let mut load = vec![0.0; m];
        load[col] = 1.0;
        // Per phase: K_k (acoustic), b_k = traction of L_k ε̄.
        let mut sum_kinv = nalgebra::DMatrix::<f64>::zeros(jumps, jumps);
        let mut sum_kinv_b = nalgebra::DVector::<f64>::zeros(jumps);
        let mut per_phase = Vec::with_capacity(phases.len());
        for (l, &f) in phases.iter().zip(fractions) {
            let mut k = nalgebra::DMatrix::<f64>::zeros(jumps, jumps);
            let mut tmp = vec![0.0; m];
            for j in 0..jumps {
                l.apply(&basis[j], &mut tmp);
                for i in 0..jumps {
                    k[(i, j)] = traction(&tmp, i);
                }
            }
            l.apply(&load, &mut tmp);
            let b = nalgebra::DVector::from_iterator(jumps, (0..jumps).map(|i| traction(&tmp, i)));
            let kinv = k.try_inverse().ok_or_else(|| Error::Breakdown("singular layer acoustic tensor".into()))?;
            sum_kinv += &kinv * f;
            sum_kinv_b += &kinv * &b * f;
            per_phase.push((kinv, b));
        }
        let t = sum_kinv
            .try_inverse()
            .ok_or_else(|| Error::Breakdown("singular laminate system".into()))?
            * sum_kinv_b;
        for ((kinv, b), (l, &f)) in per_phase.iter().zip(phases.iter().zip(fractions)) {
            let a = kinv * (&t - b);
            let mut strain = load.clone();
            for j in 0..jumps {
                for (s, bj) in strain.iter_mut().zip(&basis[j]) {
                    *s += a[j] * bj;
                }
            }
            let mut stress = vec![0.0; m];
            l.apply(&strain, &mut stress);
            for row in 0..m {
                result[row * m + col] += f * stress[row];
            }
        }
    }
    Ok(result)
}

/// `⟨σ:ε⟩` with `ε = ε̄ + e*` and `σ = ∂w(ε)`: the effective quadratic form
/// `L̄ε̄:ε̄` at the solution.
pub fn effective_from_strain(problem: &HomogProblem, e_star: &TensorField) -> Result<f64> {
    let mut strain = e_star.clone();
    strain.add_uniform(problem.load().value());
    let stress = problem.phases().stress(&strain)?;
    stress.dot_l2(&strain)
}

/// `⟨τ⟩:⟨η⟩`, exact at the minimizer of the two-field functional.
pub fn effective_from_pair(tau: &TensorField, eta: &TensorField) -> Result<f64> {
    tau.check_compatible(eta)?;
    Ok(tau.average().iter().zip(eta.average()).map(|(a, b)| a * b).sum())
}

/// Kind of iterate placed in the projection space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// A stress–strain pair `(τ, η)`.
    TwoField,
    /// A strain fluctuation `e*` from a strain-based scheme.
    StrainScheme,
}

/// Coordinates `(ΔConst, ΔCompat, ΔEquil)` of an iterate.
pub fn trajectory_point(problem: &HomogProblem, fields: &[TensorField], kind: TrajectoryKind) -> Result<[f64; 3]> {
    match kind {
        TrajectoryKind::TwoField => {
            let [tau, eta] = fields else {
                return Err(Error::Shape("a two-field iterate needs (τ, η)".into()));
            };
            let e = eval_p(tau, eta, problem.load(), problem.phases(), problem.green())?;
            Ok(trajectory_from_parts(&e.parts))
        }
        TrajectoryKind::StrainScheme => {
            let [e_star] = fields else {
                return Err(Error::Shape("a strain iterate is a single field".into()));
            };
            let mut strain = e_star.clone();
            strain.add_uniform(problem.load().value());
            let stress = problem.phases().stress(&strain)?;
            let g = problem.green().apply_gamma0(&stress)?;
            Ok([0.0, 0.0, 0.5 * g.dot_e(&g, problem.reference())?])
        }
    }
}

/// `(x, y, z) = (ΔConst, ΔCompat, ΔEquil)`.
pub fn trajectory_from_parts(parts: &Parts) -> [f64; 3] {
    [parts.constitutive, parts.compat, parts.equilibrium]
}

/// Which run produced one entry of an assembled effective tensor.
#[derive(Debug, Clone)]
pub struct ColumnSource {
    /// Components `(i, j)` loaded together; `i == j` for a unit load.
    pub components: (usize, usize),
    pub load: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub form: f64,
}

/// Assembled effective tensor in the storage basis of the fields.
#[derive(Debug, Clone)]
pub struct EffectiveTensor {
    pub physics: Physics,
    pub dim: usize,
    /// Row-major `m×m` matrix from the quadratic forms (symmetric by
    /// construction).
    pub matrix: Vec<f64>,
    /// Row-major `m×m` matrix whose column `i` is `⟨σ⟩` under unit load `i`.
    pub mean_stress: Vec<f64>,
    pub sources: Vec<ColumnSource>,
}

impl EffectiveTensor {
    pub fn components(&self) -> usize {
        self.physics.components(self.dim)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.components() + j]
    }

    /// `max |M_ij − M_ji| / max |M_ij|` of the mean-stress matrix.
    pub fn asymmetry(&self) -> f64 {
        let m = self.components();
        let scale = self.mean_stress.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((self.mean_stress[i * m + j] - self.mean_stress[j * m + i]).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn all_converged(&self) -> bool {
        self.sources.iter().all(|s| s.converged)
    }
}

/// Full effective tensor of a linear composite from `m(m+1)/2` solves: unit
/// loads give the diagonal, pair loads give the off-diagonal entries by
/// polarization.
pub fn effective_tensor(phases: &PhaseMap, cfg: &SchemeConfig) -> Result<(EffectiveTensor, Vec<SolveOutcome>)> {
    effective_tensor_with(phases, cfg, |_, _| Ok(()))
}

/// [`effective_tensor`] with an observer called on every trace record,
/// tagged with the load components `(i, j)` of the run it belongs to.
pub fn effective_tensor_with(
    phases: &PhaseMap,
    cfg: &SchemeConfig,
    mut observer: impl FnMut((usize, usize), &TraceRecord) -> Result<()>,
) -> Result<(EffectiveTensor, Vec<SolveOutcome>)> {
    if let Some(k) = phases.first_nonlinear() {
        return Err(Error::NonlinearPhase(k));
    }
    let physics = phases.physics();
    let dim = phases.grid().ndim();
    let m = physics.components(dim);
    let mut matrix = vec![0.0; m * m];
    let mut mean_stress = vec![0.0; m * m];
    let mut sources = Vec::new();
    let mut outcomes = Vec::new();
    let mut diag = vec![0.0; m];
    let mut run = |i: usize, j: usize| -> Result<SolveOutcome> {
        let mut value = vec![0.0; m];
        value[i] += 1.0;
        if j != i {
            value[j] += 1.0;
        }
        let load = MacroscopicLoad::new(physics, dim, value.clone())?;
        let out = Minimizer::new(cfg.clone(), phases.clone(), load)?.run_with(|r, _| observer((i, j), r))?;
        sources.push(ColumnSource {
            components: (i, j),
            load: value,
            iterations: out.iterations,
            converged: out.converged(),
            form: out.effective_form,
        });
        Ok(out)
    };
    for i in 0..m {
        let out = run(i, i)?;
        diag[i] = out.effective_form;
        matrix[i * m + i] = out.effective_form;
        for r in 0..m {
            mean_stress[r * m + i] = out.mean_stress[r];
        }
        outcomes.push(out);
    }
    for i in 0..m {
        for j in i + 1..m {
            let out = run(i, j)?;
            let v = 0.5 * (out.effective_form - diag[i] - diag[j]);
            matrix[i * m + j] = v;
            matrix[j * m + i] = v;
            outcomes.push(out);
        }
    }
    Ok((EffectiveTensor { physics, dim, matrix, mean_stress, sources }, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obnosov_raster_has_quarter_fraction() {
        let g = Grid::new(&[8, 8]).unwrap();
        let m = make_benchmark(&Benchmark::Obnosov, g, Physics::Conductivity, 100.0).unwrap();
        assert_eq!(m.ids().iter().filter(|&&id| id == 1).count(), 16);
        assert_eq!(m.fractions(), vec![0.75, 0.25]);
    }

    #[test]
    fn odd_grid_is_rejected_for_obnosov() {
        let g = Grid::new(&[9, 8]).unwrap();
        assert!(make_benchmark(&Benchmark::Obnosov, g, Physics::Conductivity, 100.0).is_err());
    }

    #[test]
    fn laminate_columns() {
        let g = Grid::new(&[64, 64]).unwrap();
        let b = Benchmark::Laminate { axis: 0, fractions: vec![0.5, 0.5] };
        let m = make_benchmark(&b, g, Physics::Conductivity, 10.0).unwrap();
        for c in 0..g.cells() {
            let i = g.unravel(c)[0];
            assert_eq!(m.ids()[c], u32::from(i >= 32));
        }
        let bad = Benchmark::Laminate { axis: 0, fractions: vec![0.3, 0.7] };
        assert!(make_benchmark(&bad, g, Physics::Conductivity, 10.0).is_err());
    }

    #[test]
    fn homogeneous_is_single_phase() {
        let g = Grid::new(&[4, 4, 4]).unwrap();
        let m = make_benchmark(&Benchmark::Homogeneous, g, Physics::Elasticity, 3.0).unwrap();
        assert_eq!(m.fractions(), vec![1.0]);
    }

    #[test]
    fn checkerboard_is_balanced() {
        let g = Grid::new(&[6, 6]).unwrap();
        let m = make_benchmark(&Benchmark::Checkerboard, g, Physics::Conductivity, 5.0).unwrap();
        assert_eq!(m.fractions(), vec![0.5, 0.5]);
    }

    #[test]
    fn obnosov_closed_form_value() {
        assert!((obnosov_exact(1.0, 100.0) - (301.0f64 / 103.0).sqrt()).abs() < 1e-15);
        assert_eq!(obnosov_exact(2.0, 1.0), 2.0);
    }

    #[test]
    fn conductivity_laminate_gives_mixing_rules() {
        let phases = [
            Stiffness::isotropic_conductivity(2, 1.0).unwrap(),
            Stiffness::isotropic_conductivity(2, 10.0).unwrap(),
        ];
        let l = laminate_effective(&phases, &[0.25, 0.75], 1).unwrap();
        let arith = 0.25 + 7.5;
        let harm = 1.0 / (0.25 + 0.075);
        assert!((l[0] - arith).abs() < 1e-13);
        assert!((l[3] - harm).abs() < 1e-13);
        assert!(l[1].abs() < 1e-15 && l[2].abs() < 1e-15);
    }

    #[test]
    fn default_references() {
        let g = Grid::new(&[8, 8]).unwrap();
        let m = make_benchmark(&Benchmark::Obnosov, g, Physics::Conductivity, 100.0).unwrap();
        let load = MacroscopicLoad::unit(Physics::Conductivity, 2, 0).unwrap();
        let j = default_reference(&m, Functional::J, &load).unwrap();
        let p = default_reference(&m, Functional::P, &load).unwrap();
        assert_eq!(j.as_scalar(), Some(50.5));
        assert!((p.as_scalar().unwrap() - 10.0).abs() < 1e-14);
    }
}
