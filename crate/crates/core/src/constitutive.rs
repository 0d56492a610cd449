//! Local material response: per-phase constitutive laws, the cell → phase
//! map, and the error in constitutive relations.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Grid, Physics, TensorField};
use crate::stiffness::{Stiffness, StiffnessField};
use crate::sum::CompensatedSum;

/// A convex strain-energy density `w(η)` with its Legendre–Fenchel dual
/// `w*(τ)`. Tensors are in the same storage as [`TensorField`] cells.
pub trait ConvexPotential: Debug + Send + Sync {
    fn physics(&self) -> Physics;
    fn dim(&self) -> usize;
    /// `w(η)`.
    fn energy(&self, eta: &[f64]) -> f64;
    /// `∂w/∂η`.
    fn stress(&self, eta: &[f64], out: &mut [f64]);
    /// `w*(τ)`.
    fn dual_energy(&self, tau: &[f64]) -> f64;
    /// `∂w*/∂τ`.
    fn strain(&self, tau: &[f64], out: &mut [f64]);
    /// Smallest and largest secant modulus `|∂w(η)| / |η|` style bounds at
    /// `η`, used to pick a reference medium.
    fn secant_bounds(&self, eta: &[f64]) -> (f64, f64);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w(η) = ½ Lη:η`, `w*(τ) = ½ τ:L⁻¹τ`.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    stiffness: Stiffness,
}

impl QuadraticPotential {
    pub fn new(stiffness: Stiffness) -> Self {
        Self { stiffness }
    }

    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }
}

impl ConvexPotential for QuadraticPotential {
    fn physics(&self) -> Physics {
        self.stiffness.physics()
    }

    fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    fn energy(&self, eta: &[f64]) -> f64 {
        0.5 * self.stiffness.quadratic(eta, eta)
    }

    fn stress(&self, eta: &[f64], out: &mut [f64]) {
        self.stiffness.apply(eta, out)
    }

    fn dual_energy(&self, tau: &[f64]) -> f64 {
        0.5 * self.stiffness.quadratic_inverse(tau, tau)
    }

    fn strain(&self, tau: &[f64], out: &mut [f64]) {
        self.stiffness.apply_inverse(tau, out)
    }

    fn secant_bounds(&self, _eta: &[f64]) -> (f64, f64) {
        (self.stiffness.min_eigenvalue(), self.stiffness.max_eigenvalue())
    }
}

/// Isotropic power law `w(η) = (c/p)|η|^p` with `p > 1`, whose dual is
/// `w*(τ) = (c^{1−q}/q)|τ|^q`, `1/p + 1/q = 1`.
#[derive(Debug, Clone)]
pub struct PowerLawPotential {
    physics: Physics,
    dim: usize,
    modulus: f64,
    exponent: f64,
}

impl PowerLawPotential {
    pub fn new(physics: Physics, dim: usize, modulus: f64, exponent: f64) -> Result<Self> {
        if !(modulus > 0.0 && modulus.is_finite()) {
            return Err(Error::Config(format!("power-law modulus must be positive, got {modulus}")));
        }
        if !(exponent > 1.0 && exponent.is_finite()) {
            return Err(Error::Config(format!("power-law exponent must exceed 1, got {exponent}")));
        }
        Ok(Self { physics, dim, modulus, exponent })
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn dual_exponent(&self) -> f64 {
        self.exponent / (self.exponent - 1.0)
    }
}

impl ConvexPotential for PowerLawPotential {
    fn physics(&self) -> Physics {
        self.physics
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, eta: &[f64]) -> f64 {
        let n = dot(eta, eta).sqrt();
        self.modulus / self.exponent * n.powf(self.exponent)
    }

    fn stress(&self, eta: &[f64], out: &mut [f64]) {
        let n = dot(eta, eta).sqrt();
        let f = if n == 0.0 { 0.0 } else { self.modulus * n.powf(self.exponent - 2.0) };
        for (o, e) in out.iter_mut().zip(eta) {
            *o = f * e;
        }
    }

    fn dual_energy(&self, tau: &[f64]) -> f64 {
        let q = self.dual_exponent();
        let n = dot(tau, tau).sqrt();
        self.modulus.powf(1.0 - q) / q * n.powf(q)
    }

    fn strain(&self, tau: &[f64], out: &mut [f64]) {
        let q = self.dual_exponent();
        let n = dot(tau, tau).sqrt();
        let f = if n == 0.0 { 0.0 } else { self.modulus.powf(1.0 - q) * n.powf(q - 2.0) };
        for (o, t) in out.iter_mut().zip(tau) {
            *o = f * t;
        }
    }

    fn secant_bounds(&self, eta: &[f64]) -> (f64, f64) {
        let s = self.modulus * dot(eta, eta).sqrt().powf(self.exponent - 2.0);
        (s, s)
    }
}

/// The constitutive law of one phase.
#[derive(Debug, Clone)]
pub enum PhaseLaw {
    /// Linear: `σ = Lε`.
    Linear(Stiffness),
    /// Any convex potential, including nonlinear ones.
    Potential(Arc<dyn ConvexPotential>),
}

impl PhaseLaw {
    pub fn physics(&self) -> Physics {
        match self {
            PhaseLaw::Linear(s) => s.physics(),
            PhaseLaw::Potential(p) => p.physics(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseLaw::Linear(s) => s.dim(),
            PhaseLaw::Potential(p) => p.dim(),
        }
    }

    pub fn as_linear(&self) -> Option<&Stiffness> {
        match self {
            PhaseLaw::Linear(s) => Some(s),
            PhaseLaw::Potential(_) => None,
        }
    }

    pub fn energy(&self, eta: &[f64]) -> f64 {
        match self {
            PhaseLaw::Linear(s) => 0.5 * s.quadratic(eta, eta),
            PhaseLaw::Potential(p) => p.energy(eta),
        }
    }

    pub fn dual_energy(&self, tau: &[f64]) -> f64 {
        match self {
            PhaseLaw::Linear(s) => 0.5 * s.quadratic_inverse(tau, tau),
            PhaseLaw::Potential(p) => p.dual_energy(tau),
        }
    }

    pub fn stress(&self, eta: &[f64], out: &mut [f64]) {
        match self {
            PhaseLaw::Linear(s) => s.apply(eta, out),
            PhaseLaw::Potential(p) => p.stress(eta, out),
        }
    }

    pub fn strain(&self, tau: &[f64], out: &mut [f64]) {
        match self {
            PhaseLaw::Linear(s) => s.apply_inverse(tau, out),
            PhaseLaw::Potential(p) => p.strain(tau, out),
        }
    }

    /// Error in constitutive relation at one point.
    pub fn ecr(&self, tau: &[f64], eta: &[f64]) -> f64 {
        match self {
            PhaseLaw::Linear(s) => {
                let m = tau.len();
                let mut l_eta = [0.0; 6];
                s.apply(eta, &mut l_eta[..m]);
                let mut d = [0.0; 6];
                for i in 0..m {
                    d[i] = tau[i] - l_eta[i];
                }
                0.5 * s.quadratic_inverse(&d[..m], &d[..m])
            }
            PhaseLaw::Potential(p) => p.energy(eta) + p.dual_energy(tau) - dot(tau, eta),
        }
    }

    pub fn secant_bounds(&self, eta: &[f64]) -> (f64, f64) {
        match self {
            PhaseLaw::Linear(s) => (s.min_eigenvalue(), s.max_eigenvalue()),
            PhaseLaw::Potential(p) => p.secant_bounds(eta),
        }
    }
}

/// Outcome of sampled convexity, coercivity and Fenchel–Young checks.
#[derive(Debug, Clone, Default)]
pub struct PotentialReport {
    pub samples: usize,
    pub warnings: Vec<String>,
}

impl PotentialReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Spot-checks a potential on random pairs: midpoint convexity, strict
/// monotonicity of `∂w`, the Fenchel–Young inequality and its equality case.
/// Violations are reported, not raised.
pub fn check_potential(p: &dyn ConvexPotential, samples: usize, scale: f64, seed: u64) -> PotentialReport {
    let m = p.physics().components(p.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PotentialReport { samples, warnings: Vec::new() };
    let random = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..m).map(|_| scale * rng.gen_range(-1.0..1.0)).collect() };
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for i in 0..samples {
        let a = random(&mut rng);
        let b = random(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (wa, wb, wm) = (p.energy(&a), p.energy(&b), p.energy(&mid));
        let tol = 1e-12 * (wa.abs() + wb.abs()).max(f64::MIN_POSITIVE);
        if wm > 0.5 * (wa + wb) + tol {
            report.warnings.push(format!("sample {i}: midpoint convexity violated"));
        }
        p.stress(&a, &mut s1);
        p.stress(&b, &mut s2);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mono: f64 = s1.iter().zip(&s2).zip(&diff).map(|((x, y), d)| (x - y) * d).sum();
        if diff.iter().any(|&d| d != 0.0) && mono <= 0.0 {
            report.warnings.push(format!("sample {i}: gradient is not strictly monotone"));
        }
        let fy = p.energy(&a) + p.dual_energy(&b) - dot(&b, &a);
        if fy < -tol {
            report.warnings.push(format!("sample {i}: Fenchel-Young inequality violated ({fy:e})"));
        }
        let eq = p.energy(&a) + p.dual_energy(&s1) - dot(&s1, &a);
        let scale_eq = p.energy(&a).abs() + p.dual_energy(&s1).abs();
        if eq.abs() > 1e-10 * scale_eq.max(f64::MIN_POSITIVE) {
            report.warnings.push(format!("sample {i}: Fenchel-Young equality fails at τ = ∂w(η) ({eq:e})"));
        }
    }
    report
}

/// Cell → phase assignment with a per-phase law table.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    grid: Grid,
    physics: Physics,
    phases: Vec<PhaseLaw>,
    ids: Vec<u32>,
}

impl PhaseMap {
    pub fn new(grid: Grid, phases: Vec<PhaseLaw>, ids: Vec<u32>) -> Result<Self> {
        let first = phases.first().ok_or_else(|| Error::Config("phase table is empty".into()))?;
        let physics = first.physics();
        for (k, law) in phases.iter().enumerate() {
            if law.physics() != physics || law.dim() != grid.ndim() {
                return Err(Error::Config(format!(
                    "phase {k} is {:?} in {}D, expected {:?} in {}D",
                    law.physics(),
                    law.dim(),
                    physics,
                    grid.ndim()
                )));
            }
        }
        if ids.len() != grid.cells() {
            return Err(Error::Shape(format!("phase raster has {} cells, grid has {}", ids.len(), grid.cells())));
        }
        if let Some((cell, id)) = ids.iter().enumerate().find(|(_, &id)| id as usize >= phases.len()) {
            return Err(Error::Config(format!(
                "cell {cell} refers to phase {id} but only {} phases are defined",
                phases.len()
            )));
        }
        Ok(Self { grid, physics, phases, ids })
    }

    /// One law everywhere.
    pub fn uniform(grid: Grid, law: PhaseLaw) -> Result<Self> {
        Self::new(grid, vec![law], vec![0; grid.cells()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn phases(&self) -> &[PhaseLaw] {
        &self.phases
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn law(&self, cell: usize) -> &PhaseLaw {
        &self.phases[self.ids[cell] as usize]
    }

    /// Volume fraction of each phase.
    pub fn fractions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.phases.len()];
        for &id in &self.ids {
            counts[id as usize] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.ids.len() as f64).collect()
    }

    /// Index of the first nonlinear phase actually present, if any.
    pub fn first_nonlinear(&self) -> Option<usize> {
        let present = self.fractions();
        self.phases
            .iter()
            .enumerate()
            .find(|(k, law)| present[*k] > 0.0 && law.as_linear().is_none())
            .map(|(k, _)| k)
    }

    pub fn is_linear(&self) -> bool {
        self.first_nonlinear().is_none()
    }

    fn require_linear(&self) -> Result<()> {
        match self.first_nonlinear() {
            Some(k) => Err(Error::NonlinearPhase(k)),
            None => Ok(()),
        }
    }

    /// The heterogeneous stiffness `L(x)` of a linear composite.
    pub fn stiffness_field(&self) -> Result<StiffnessField> {
        self.require_linear()?;
        let table = self
            .phases
            .iter()
            .map(|law| match law {
                PhaseLaw::Linear(s) => s.clone(),
                // Absent nonlinear phases never get looked up.
                PhaseLaw::Potential(_) => Stiffness::scaled_identity(self.physics, self.grid.ndim(), 1.0)
                    .expect("identity is SPD"),
            })
            .collect();
        StiffnessField::from_phases(self.grid, table, self.ids.clone())
    }

    fn check(&self, field: &TensorField) -> Result<()> {
        if field.grid() != &self.grid || field.physics() != self.physics {
            return Err(Error::Shape("field does not match the phase map".into()));
        }
        Ok(())
    }

    /// `L(x)η` for a linear composite.
    pub fn apply_l(&self, eta: &TensorField) -> Result<TensorField> {
        self.require_linear()?;
        self.stress(eta)
    }

    /// `L(x)⁻¹τ` for a linear composite.
    pub fn invert_l(&self, tau: &TensorField) -> Result<TensorField> {
        self.require_linear()?;
        self.strain(tau)
    }

    /// `∂w(η)` cell by cell (`Lη` for linear phases).
    pub fn stress(&self, eta: &TensorField) -> Result<TensorField> {
        self.check(eta)?;
        Ok(eta.map_cells_indexed(|cell, x, out| self.law(cell).stress(x, out)))
    }

    /// `∂w*(τ)` cell by cell (`L⁻¹τ` for linear phases).
    pub fn strain(&self, tau: &TensorField) -> Result<TensorField> {
        self.check(tau)?;
        Ok(tau.map_cells_indexed(|cell, x, out| self.law(cell).strain(x, out)))
    }

    /// `⟨w(η)⟩`.
    pub fn mean_energy(&self, eta: &TensorField) -> Result<f64> {
        self.check(eta)?;
        let acc: CompensatedSum = (0..eta.cells()).map(|c| self.law(c).energy(eta.cell(c))).collect();
        Ok(acc.value() / eta.cells() as f64)
    }

    /// `⟨w*(τ)⟩`.
    pub fn mean_dual_energy(&self, tau: &TensorField) -> Result<f64> {
        self.check(tau)?;
        let acc: CompensatedSum = (0..tau.cells()).map(|c| self.law(c).dual_energy(tau.cell(c))).collect();
        Ok(acc.value() / tau.cells() as f64)
    }

    /// Error in constitutive relations: the density `r(x, τ, η)` per cell
    /// and its mean.
    pub fn ecr_density(&self, tau: &TensorField, eta: &TensorField) -> Result<(Vec<f64>, f64)> {
        self.check(tau)?;
        self.check(eta)?;
        let density: Vec<f64> = (0..tau.cells()).map(|c| self.law(c).ecr(tau.cell(c), eta.cell(c))).collect();
        let mean = crate::sum::sum(density.iter().copied()) / density.len() as f64;
        Ok((density, mean))
    }

    /// Mean of the error in constitutive relations, `ΔConst`.
    pub fn ecr_mean(&self, tau: &TensorField, eta: &TensorField) -> Result<f64> {
        self.check(tau)?;
        self.check(eta)?;
        let acc: CompensatedSum = (0..tau.cells()).map(|c| self.law(c).ecr(tau.cell(c), eta.cell(c))).collect();
        Ok(acc.value() / tau.cells() as f64)
    }

    /// Smallest and largest modulus over the phases present, using secant
    /// moduli at `eta` for nonlinear phases.
    pub fn modulus_bounds(&self, eta: &[f64]) -> (f64, f64) {
        let present = self.fractions();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (k, law) in self.phases.iter().enumerate() {
            if present[k] == 0.0 {
                continue;
            }
            let (a, b) = law.secant_bounds(eta);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// The same map with every linear phase replaced by its quadratic
    /// potential, which forces the general (potential) code paths.
    pub fn as_potentials(&self) -> PhaseMap {
        let phases = self
            .phases
            .iter()
            .map(|law| match law {
                PhaseLaw::Linear(s) => PhaseLaw::Potential(Arc::new(QuadraticPotential::new(s.clone()))),
                other => other.clone(),
            })
            .collect();
        PhaseMap { grid: self.grid, physics: self.physics, phases, ids: self.ids.clone() }
    }
}
