//! Field generators shared by the integration tests.
//!
//! Admissible fields are synthesized mode by mode from potentials, using
//! the frequency vectors of the operator under test so that the discrete
//! divergence and compatibility conditions hold exactly.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shom::stiffness::mandel_index;
use shom::{GreenOperator, Grid, PhaseLaw, PhaseMap, Physics, Stiffness, TensorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: Grid, physics: Physics, rng: &mut ChaCha8Rng) -> TensorField {
    TensorField::from_fn(grid, physics, |_, out| {
        for v in out {
            *v = rng.gen_range(-1.0..1.0);
        }
    })
}

pub fn random_vector(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random SPD operator `BBᵀ + shift·I`, anisotropic in general.
pub fn random_spd(physics: Physics, dim: usize, shift: f64, rng: &mut ChaCha8Rng) -> Stiffness {
    let m = physics.components(dim);
    let b = random_vector(m * m, rng);
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = (0..m).map(|k| b[i * m + k] * b[j * m + k]).sum::<f64>();
        }
        a[i * m + i] += shift;
    }
    Stiffness::new(physics, dim, a).expect("SPD by construction")
}

/// Two random anisotropic phases scattered over the grid.
pub fn random_two_phase(grid: Grid, physics: Physics, rng: &mut ChaCha8Rng) -> PhaseMap {
    let dim = grid.ndim();
    let phases = vec![
        PhaseLaw::Linear(random_spd(physics, dim, 0.5, rng)),
        PhaseLaw::Linear(random_spd(physics, dim, 5.0, rng)),
    ];
    let ids = (0..grid.cells()).map(|_| u32::from(rng.gen_bool(0.4))).collect();
    PhaseMap::new(grid, phases, ids).expect("valid phase map")
}

fn random_scalar_spectrum(green: &GreenOperator, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let grid = *green.grid();
    let mut buf: Vec<Complex64> =
        (0..grid.cells()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    green.fft().forward_inplace(&mut buf);
    buf
}

fn real_field_from_spectra(green: &GreenOperator, physics: Physics, spectra: Vec<Vec<Complex64>>) -> TensorField {
    let grid = *green.grid();
    let m = spectra.len();
    let mut data = vec![0.0; grid.cells() * m];
    for (c, mut s) in spectra.into_iter().enumerate() {
        green.fft().inverse_inplace(&mut s);
        for (k, z) in s.iter().enumerate() {
            data[k * m + c] = z.re;
        }
    }
    TensorField::from_vec(grid, physics, data).expect("component count")
}

/// Zero-mean compatible strain: the symmetric gradient of a random periodic
/// displacement (or the gradient of a potential for conductivity).
pub fn compatible_strain(green: &GreenOperator, rng: &mut ChaCha8Rng) -> TensorField {
    let grid = *green.grid();
    let dim = grid.ndim();
    let physics = green.physics();
    let m = physics.components(dim);
    let i = Complex64::new(0.0, 1.0);
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); grid.cells()]; m];
    match physics {
        Physics::Conductivity => {
            let u = random_scalar_spectrum(green, rng);
            for k in 0..grid.cells() {
                let xi = green.frequency_vector(k);
                for a in 0..dim {
                    spectra[a][k] = i * xi[a] * u[k];
                }
            }
        }
        Physics::Elasticity => {
            let u: Vec<Vec<Complex64>> = (0..dim).map(|_| random_scalar_spectrum(green, rng)).collect();
            for k in 0..grid.cells() {
                let xi = green.frequency_vector(k);
                for a in 0..dim {
                    for b in a..dim {
                        let (c, f) = mandel_index(dim, a, b);
                        let sym = if a == b { xi[a] * u[a][k] } else { 0.5 * (xi[a] * u[b][k] + xi[b] * u[a][k]) };
                        spectra[c][k] = i * sym * f;
                    }
                }
            }
        }
    }
    for s in &mut spectra {
        s[0] = Complex64::new(0.0, 0.0);
    }
    real_field_from_spectra(green, physics, spectra)
}

/// Statically admissible stress in 2D with the given mean: a rotated
/// gradient (conductivity) or an Airy stress function (elasticity).
pub fn admissible_stress(green: &GreenOperator, mean: &[f64], rng: &mut ChaCha8Rng) -> TensorField {
    let grid = *green.grid();
    assert_eq!(grid.ndim(), 2, "stress synthesis is two-dimensional");
    let physics = green.physics();
    let m = physics.components(2);
    let phi = random_scalar_spectrum(green, rng);
    let i = Complex64::new(0.0, 1.0);
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); grid.cells()]; m];
    for k in 0..grid.cells() {
        let xi = green.frequency_vector(k);
        match physics {
            Physics::Conductivity => {
                spectra[0][k] = i * xi[1] * phi[k];
                spectra[1][k] = -i * xi[0] * phi[k];
            }
            Physics::Elasticity => {
                spectra[0][k] = -xi[1] * xi[1] * phi[k];
                spectra[1][k] = -xi[0] * xi[0] * phi[k];
                spectra[2][k] = xi[0] * xi[1] * phi[k] * std::f64::consts::SQRT_2;
            }
        }
    }
    let mut s = real_field_from_spectra(green, physics, spectra);
    // Scale the fluctuation to order one before adding the mean.
    let size = s.max_abs();
    if size > 0.0 {
        s.scale(1.0 / size);
    }
    s.add_uniform(mean);
    s
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn diff_l2(a: &TensorField, b: &TensorField) -> f64 {
    a.sub(b).norm_l2()
}
