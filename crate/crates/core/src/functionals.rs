//! Cost functionals of the homogenization problem and their gradients in
//! the energetic metrics.
//!
//! * `J(e*)  = ⟨w(ε̄ + e*)⟩`, gradient `Γ₀ ∂w(ε̄ + e*)` in `⟨·,·⟩ₑ`.
//! * `Jc(s)  = ⟨w*(s)⟩ − ⟨s⟩:ε̄`, gradient `L₀(I − Γ₀L₀)∂w*(s) − L₀ε̄` in `⟨·,·⟩ₛ`.
//! * `N(e*)  = ½‖∇J(e*)‖ₑ²`, gradient `Γ₀LΓ₀L(ε̄ + e*)` (linear phases).
//! * `P(τ,η) = ΔCompat + ΔConst + ΔEquil`, partial gradients in `⟨·,·⟩ₛ` and
//!   `⟨·,·⟩ₑ`.
//!
//! For linear phases `w(η) = ½Lη:η`, so `J` is the usual strain energy.

use crate::constitutive::PhaseMap;
use crate::error::{Error, Result};
use crate::field::{MacroscopicLoad, TensorField};
use crate::green::GreenOperator;
use crate::stiffness::Stiffness;

/// Relative tolerance of admissibility preconditions.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// The three error measures making up `P`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Parts {
    /// `½‖(I − P_E0)η − ε̄‖ₑ²`, distance to kinematic admissibility.
    pub compat: f64,
    /// `⟨r(x, τ, η)⟩`, error in constitutive relations.
    pub constitutive: f64,
    /// `½‖P_S⊥ τ‖ₛ²`, distance to static admissibility.
    pub equilibrium: f64,
}

impl Parts {
    pub fn sum(&self) -> f64 {
        self.compat + self.constitutive + self.equilibrium
    }
}

/// Value, gradient(s) and diagnostics of one functional evaluation.
#[derive(Debug, Clone)]
pub struct FunctionalEval {
    pub value: f64,
    /// Gradient with respect to the strain-like argument.
    pub grad_e: Option<TensorField>,
    /// Gradient with respect to the stress-like argument.
    pub grad_s: Option<TensorField>,
    /// Error measures; strain functionals report `(0, 0, ΔEquil(σ))`.
    pub parts: Parts,
    /// `‖div σ‖_{L²}` of the stress iterate.
    pub div_norm: f64,
    /// Estimate of `L̄ε̄:ε̄` at this iterate.
    pub effective_form: f64,
}

fn check_zero_mean(e_star: &TensorField) -> Result<()> {
    let mean = e_star.average();
    let size = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    if size > ADMISSIBILITY_TOL * e_star.norm_l2() {
        return Err(Error::Precondition(format!("strain fluctuation has nonzero mean (|⟨e*⟩| = {size:e})")));
    }
    Ok(())
}

fn check_load(load: &MacroscopicLoad, green: &GreenOperator) -> Result<()> {
    if load.physics() != green.physics() || load.dim() != green.grid().ndim() {
        return Err(Error::Shape("load does not match the problem".into()));
    }
    Ok(())
}

/// `∂w(ε̄ + e*)` and the total strain.
fn total_strain_and_stress(
    e_star: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
) -> Result<(TensorField, TensorField)> {
    let mut strain = e_star.clone();
    strain.add_uniform(load.value());
    let stress = phases.stress(&strain)?;
    Ok((strain, stress))
}

/// `J(e*)` and `∇J(e*) = Γ₀ ∂w(ε̄ + e*)`.
pub fn eval_j(
    e_star: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
    green: &GreenOperator,
) -> Result<FunctionalEval> {
    check_load(load, green)?;
    check_zero_mean(e_star)?;
    let l0 = green.reference();
    let (strain, stress) = total_strain_and_stress(e_star, load, phases)?;
    let (grad, div_norm) = green.apply_gamma0_with_divergence(&stress)?;
    let equilibrium = 0.5 * grad.dot_e(&grad, l0)?;
    Ok(FunctionalEval {
        value: phases.mean_energy(&strain)?,
        grad_e: Some(grad),
        grad_s: None,
        parts: Parts { compat: 0.0, constitutive: 0.0, equilibrium },
        div_norm,
        effective_form: stress.dot_l2(&strain)?,
    })
}

/// `N(e*) = ½‖Γ₀L(ε̄ + e*)‖ₑ²` and `∇N = Γ₀LΓ₀L(ε̄ + e*)`.
pub fn eval_n(
    e_star: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
    green: &GreenOperator,
) -> Result<FunctionalEval> {
    check_load(load, green)?;
    check_zero_mean(e_star)?;
    if let Some(k) = phases.first_nonlinear() {
        return Err(Error::NonlinearPhase(k));
    }
    let l0 = green.reference();
    let (strain, stress) = total_strain_and_stress(e_star, load, phases)?;
    let (grad_j, div_norm) = green.apply_gamma0_with_divergence(&stress)?;
    let value = 0.5 * grad_j.dot_e(&grad_j, l0)?;
    let grad = green.apply_gamma0(&phases.apply_l(&grad_j)?)?;
    Ok(FunctionalEval {
        value,
        grad_e: Some(grad),
        grad_s: None,
        parts: Parts { compat: 0.0, constitutive: 0.0, equilibrium: value },
        div_norm,
        effective_form: stress.dot_l2(&strain)?,
    })
}

/// `Jc(s) = ⟨w*(s)⟩ − ⟨s⟩:ε̄` on statically admissible `s`, with
/// `∇Jc = L₀(I − Γ₀L₀)∂w*(s) − L₀ε̄`.
pub fn eval_jc(
    s: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
    green: &GreenOperator,
) -> Result<FunctionalEval> {
    check_load(load, green)?;
    let l0 = green.reference();
    let (gamma_s, div_norm) = green.apply_gamma0_with_divergence(s)?;
    let residual = gamma_s.dot_e(&gamma_s, l0)?.max(0.0).sqrt();
    let size = s.norm_s(l0)?;
    if residual > ADMISSIBILITY_TOL * size {
        return Err(Error::Precondition(format!(
            "stress is not statically admissible (‖P_S⊥ s‖ₛ = {residual:e}, ‖s‖ₛ = {size:e})"
        )));
    }
    let mean: Vec<f64> = s.average();
    let work: f64 = mean.iter().zip(load.value()).map(|(a, b)| a * b).sum();
    let strain = phases.strain(s)?;
    let mut projected = strain.clone();
    projected.axpy(-1.0, &green.apply_gamma0(&l0.apply_field(&strain)?)?);
    let mut grad = l0.apply_field(&projected)?;
    let mut l0_load = vec![0.0; load.value().len()];
    l0.apply(load.value(), &mut l0_load);
    let neg: Vec<f64> = l0_load.iter().map(|v| -v).collect();
    grad.add_uniform(&neg);
    Ok(FunctionalEval {
        value: phases.mean_dual_energy(s)? - work,
        grad_e: None,
        grad_s: Some(grad),
        parts: Parts { compat: 0.0, constitutive: 0.0, equilibrium: 0.5 * residual * residual },
        div_norm,
        effective_form: work,
    })
}

/// `P(τ, η)` with its parts and both partial gradients:
/// `∇_τ P = L₀(∂w*(τ) − η) + L₀Γ₀τ`,
/// `∇_η P = L₀⁻¹(∂w(η) − τ) + (I − Γ₀L₀)η − ε̄`.
pub fn eval_p(
    tau: &TensorField,
    eta: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
    green: &GreenOperator,
) -> Result<FunctionalEval> {
    check_load(load, green)?;
    tau.check_compatible(eta)?;
    let l0 = green.reference();

    let (gamma_tau, div_norm) = green.apply_gamma0_with_divergence(tau)?;
    let equilibrium = 0.5 * gamma_tau.dot_e(&gamma_tau, l0)?;

    // (I − P_E0)η − ε̄
    let mut incompat = eta.clone();
    incompat.axpy(-1.0, &green.apply_gamma0(&l0.apply_field(eta)?)?);
    let neg_load: Vec<f64> = load.value().iter().map(|v| -v).collect();
    incompat.add_uniform(&neg_load);
    let compat = 0.5 * incompat.dot_e(&incompat, l0)?;

    let constitutive = phases.ecr_mean(tau, eta)?;

    let mut grad_s = phases.strain(tau)?;
    grad_s.axpy(-1.0, eta);
    grad_s.axpy(1.0, &gamma_tau);
    let grad_s = l0.apply_field(&grad_s)?;

    let mut mismatch = phases.stress(eta)?;
    mismatch.axpy(-1.0, tau);
    let mut grad_e = l0.apply_inverse_field(&mismatch)?;
    grad_e.axpy(1.0, &incompat);

    let parts = Parts { compat, constitutive, equilibrium };
    let mean_tau = tau.average();
    let mean_eta = eta.average();
    Ok(FunctionalEval {
        value: parts.sum(),
        grad_e: Some(grad_e),
        grad_s: Some(grad_s),
        parts,
        div_norm,
        effective_form: mean_tau.iter().zip(&mean_eta).map(|(a, b)| a * b).sum(),
    })
}

/// Closest admissible fields to a pair `(τ, η)`: `s = τ − P_S⊥τ ∈ S` and
/// `e* = P_E0 η ∈ E₀`.
pub fn admissible_projection(tau: &TensorField, eta: &TensorField, green: &GreenOperator) -> Result<(TensorField, TensorField)> {
    let l0 = green.reference();
    let mut s = tau.clone();
    s.axpy(-1.0, &l0.apply_field(&green.apply_gamma0(tau)?)?);
    let e_star = green.apply_gamma0(&l0.apply_field(eta)?)?;
    Ok((s, e_star))
}

/// `Jc(s) + J(e*)` for admissible `s` and `e*`: the gap between the
/// complementary and primal energies, nonnegative and zero only at the
/// solution.
pub fn duality_gap(
    s: &TensorField,
    e_star: &TensorField,
    load: &MacroscopicLoad,
    phases: &PhaseMap,
) -> Result<f64> {
    let mut strain = e_star.clone();
    strain.add_uniform(load.value());
    let j = phases.mean_energy(&strain)?;
    let work: f64 = s.average().iter().zip(load.value()).map(|(a, b)| a * b).sum();
    let jc = phases.mean_dual_energy(s)? - work;
    Ok(j + jc)
}

/// Upper bound `c` in `Jc(s) + J(e*) ≤ c·P(τ, η)` for the admissible
/// projections of any pair, from the extreme eigenvalues of `L₀⁻¹L` over the
/// phases present: `c = 2·max(λmax(L₀⁻¹L), λmax(L⁻¹L₀))`.
pub fn gap_bound_constant(phases: &PhaseMap, l0: &Stiffness) -> Result<f64> {
    if let Some(k) = phases.first_nonlinear() {
        return Err(Error::NonlinearPhase(k));
    }
    let present = phases.fractions();
    let mut c = 0.0f64;
    for (k, law) in phases.phases().iter().enumerate() {
        if present[k] == 0.0 {
            continue;
        }
        let l = law.as_linear().expect("linear phase");
        let (lo, hi) = l0.relative_spectrum(l);
        c = c.max(hi).max(1.0 / lo);
    }
    Ok(2.0 * c)
}
