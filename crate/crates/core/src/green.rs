//! Periodic Green's operators of a uniform reference medium and the
//! orthogonal projectors they generate.
//!
//! The strain Green's operator acts in Fourier space through the closed form
//! `Γ̂₀(ξ) = [ξ ⊗ (ξ·L₀·ξ)⁻¹ ⊗ ξ]_sym`, `Γ̂₀(0) = 0`. The stress Green's
//! operator is never assembled on its own; it is evaluated as
//! `Δ₀η = L₀η − L₀⟨η⟩ − L₀Γ₀L₀η`, which makes `Γ₀Δ₀ = 0` hold to round-off.
//!
//! On even axes the unpaired `−N/2` frequency has no conjugate partner on the
//! grid. Its axis component is taken as zero when the symbol is assembled, so
//! the symbol stays even in `ξ`, the operator maps real fields to real fields
//! and every projector below is an exact orthogonal projector of the discrete
//! space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{GridFft, Spectra};
use crate::field::{Grid, Physics, TensorField};
use crate::stiffness::{mandel_index, Stiffness};

/// Grids above `64^d` cells always use a precomputed symbol table.
const TABLE_THRESHOLD_SIDE: usize = 64;

/// Target subspace of [`GreenOperator::project`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// Zero-mean compatible strains, `P = Γ₀L₀`.
    E0,
    /// Complement of uniform and compatible strains, `P = L₀⁻¹Δ₀`.
    EPerp,
    /// Zero-mean self-equilibrated stresses, `P = Δ₀L₀⁻¹`.
    S0,
    /// Complement of admissible stresses, `P = L₀Γ₀`.
    SPerp,
}

/// The three mutually `L²`-orthogonal parts of a field.
#[derive(Debug, Clone)]
pub struct L2Decomposition {
    pub mean: TensorField,
    pub compatible: TensorField,
    pub incompatible: TensorField,
}

/// `Γ₀` (and through it `Δ₀`) for a uniform reference stiffness on a grid.
#[derive(Debug)]
pub struct GreenOperator {
    grid: Grid,
    physics: Physics,
    reference: Stiffness,
    fft: GridFft,
    /// Packed upper triangles of `Γ̂₀(ξ)`, one per frequency.
    table: Option<Vec<f64>>,
}

fn tri_len(m: usize) -> usize {
    m * (m + 1) / 2
}

#[inline]
fn tri_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

fn to_tensor(dim: usize, v: &[f64]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            let (k, f) = mandel_index(dim, i, j);
            t[i][j] = v[k] / f;
        }
    }
    t
}

fn to_mandel(dim: usize, t: &[[f64; 3]; 3], out: &mut [f64]) {
    for i in 0..dim {
        for j in i..dim {
            let (k, f) = mandel_index(dim, i, j);
            out[k] = 0.5 * (t[i][j] + t[j][i]) * f;
        }
    }
}

fn invert_small(dim: usize, a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    if dim == 2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!(det > 0.0, "acoustic tensor is singular");
        inv[0][0] = a[1][1] / det;
        inv[1][1] = a[0][0] / det;
        inv[0][1] = -a[0][1] / det;
        inv[1][0] = -a[1][0] / det;
    } else {
        let c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
        let c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
        let c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
        let det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
        assert!(det > 0.0, "acoustic tensor is singular");
        inv[0][0] = c00 / det;
        inv[1][0] = c01 / det;
        inv[2][0] = c02 / det;
        inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
        inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
        inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
        inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
        inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
        inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    }
    inv
}

/// `Γ̂₀(ξ)` as a packed symmetric matrix on tensor components.
fn assemble_symbol(reference: &Stiffness, xi: &[f64; 3], out: &mut [f64]) {
    let dim = reference.dim();
    let m = reference.components();
    out.iter_mut().for_each(|v| *v = 0.0);
    if xi[..dim].iter().all(|&x| x == 0.0) {
        return;
    }
    match reference.physics() {
        Physics::Conductivity => {
            let mut lxi = [0.0; 3];
            reference.apply(&xi[..dim], &mut lxi[..dim]);
            let acoustic: f64 = (0..dim).map(|i| xi[i] * lxi[i]).sum();
            for i in 0..dim {
                for j in i..dim {
                    out[tri_index(m, i, j)] = xi[i] * xi[j] / acoustic;
                }
            }
        }
        Physics::Elasticity => {
            // Acoustic tensor A_ik = [L₀ sym(e_k ⊗ ξ)]_ij ξ_j.
            let mut acoustic = [[0.0; 3]; 3];
            let mut v = [0.0; 6];
            let mut lv = [0.0; 6];
            for k in 0..dim {
                let mut t = [[0.0; 3]; 3];
                for l in 0..dim {
                    t[k][l] += 0.5 * xi[l];
                    t[l][k] += 0.5 * xi[l];
                }
                to_mandel(dim, &t, &mut v[..m]);
                reference.apply(&v[..m], &mut lv[..m]);
                let s = to_tensor(dim, &lv[..m]);
                for i in 0..dim {
                    acoustic[i][k] = (0..dim).map(|j| s[i][j] * xi[j]).sum();
                }
            }
            let n = invert_small(dim, &acoustic);
            // Column q of the Mandel matrix is Γ̂₀ applied to basis element q.
            let mut col = [0.0; 6];
            for q in 0..m {
                let mut basis = [0.0; 6];
                basis[q] = 1.0;
                let tau = to_tensor(dim, &basis[..m]);
                let mut txi = [0.0; 3];
                for k in 0..dim {
                    txi[k] = (0..dim).map(|l| tau[k][l] * xi[l]).sum();
                }
                let mut g = [0.0; 3];
                for j in 0..dim {
                    g[j] = (0..dim).map(|k| n[j][k] * txi[k]).sum();
                }
                let mut e = [[0.0; 3]; 3];
                for i in 0..dim {
                    for j in 0..dim {
                        e[i][j] = 0.5 * (xi[i] * g[j] + xi[j] * g[i]);
                    }
                }
                to_mandel(dim, &e, &mut col[..m]);
                for p in 0..=q {
                    out[tri_index(m, p, q)] = col[p];
                }
            }
        }
    }
}

impl GreenOperator {
    /// Builds the operator for a uniform SPD reference medium.
    pub fn new(reference: Stiffness, grid: Grid) -> Result<Self> {
        if reference.dim() != grid.ndim() {
            return Err(Error::Shape(format!(
                "reference medium is {}D, grid is {}D",
                reference.dim(),
                grid.ndim()
            )));
        }
        let physics = reference.physics();
        let fft = GridFft::new(grid);
        let mut op = Self { grid, physics, reference, fft, table: None };
        if grid.cells() > TABLE_THRESHOLD_SIDE.pow(grid.ndim() as u32) {
            op.build_table();
        }
        Ok(op)
    }

    /// Forces the precomputed symbol table regardless of grid size.
    pub fn with_table(mut self) -> Self {
        if self.table.is_none() {
            self.build_table();
        }
        self
    }

    fn build_table(&mut self) {
        let t = tri_len(self.reference.components());
        let mut table = vec![0.0; t * self.grid.cells()];
        for (k, chunk) in table.chunks_exact_mut(t).enumerate() {
            let xi = self.frequency_vector(k);
            assemble_symbol(&self.reference, &xi, chunk);
        }
        self.table = Some(table);
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn reference(&self) -> &Stiffness {
        &self.reference
    }

    pub fn fft(&self) -> &GridFft {
        &self.fft
    }

    /// Frequency vector used for the flat spectral index `k`; components of
    /// unpaired Nyquist indices are zero.
    pub fn frequency_vector(&self, k: usize) -> [f64; 3] {
        let idx = self.grid.unravel(k);
        let mut xi = [0.0; 3];
        for a in 0..self.grid.ndim() {
            if !self.grid.is_nyquist(a, idx[a]) {
                xi[a] = self.grid.frequency(a, idx[a]);
            }
        }
        xi
    }

    /// `Γ̂₀` at spectral index `k` as a full row-major `m×m` matrix.
    pub fn symbol(&self, k: usize) -> Vec<f64> {
        let m = self.reference.components();
        let mut packed = vec![0.0; tri_len(m)];
        self.symbol_packed(k, &mut packed);
        let mut full = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                full[i * m + j] = packed[tri_index(m, i, j)];
            }
        }
        full
    }

    fn symbol_packed(&self, k: usize, out: &mut [f64]) {
        match &self.table {
            Some(table) => {
                let t = out.len();
                out.copy_from_slice(&table[k * t..(k + 1) * t]);
            }
            None => assemble_symbol(&self.reference, &self.frequency_vector(k), out),
        }
    }

    fn check(&self, field: &TensorField) -> Result<()> {
        if field.grid() != &self.grid || field.physics() != self.physics {
            return Err(Error::Shape(format!(
                "field {:?} {:?} does not match Green operator {:?} {:?}",
                field.physics(),
                field.grid().dims(),
                self.physics,
                self.grid.dims()
            )));
        }
        Ok(())
    }

    /// Multiplies spectra by `Γ̂₀(ξ)` frequency by frequency.
    fn apply_symbol(&self, spectra: &mut Spectra) {
        let m = spectra.len();
        let t = tri_len(m);
        let mut packed = vec![0.0; t];
        let mut input = [Complex64::new(0.0, 0.0); 6];
        let cells = self.grid.cells();
        let iso_conductivity = match (&self.table, self.physics) {
            (None, Physics::Conductivity) => self.reference.as_scalar(),
            _ => None,
        };
        for k in 0..cells {
            for c in 0..m {
                input[c] = spectra[c][k];
            }
            if let Some(l0) = iso_conductivity {
                let xi = self.frequency_vector(k);
                let xi2: f64 = xi.iter().map(|x| x * x).sum();
                if xi2 == 0.0 {
                    for s in spectra.iter_mut() {
                        s[k] = Complex64::new(0.0, 0.0);
                    }
                    continue;
                }
                let dot: Complex64 = (0..m).map(|c| input[c] * xi[c]).sum();
                let f = dot / (l0 * xi2);
                for c in 0..m {
                    spectra[c][k] = f * xi[c];
                }
                continue;
            }
            self.symbol_packed(k, &mut packed);
            for p in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for q in 0..m {
                    acc += input[q] * packed[tri_index(m, p, q)];
                }
                spectra[p][k] = acc;
            }
        }
    }

    /// Squared `L²` norm of the divergence of a field given its spectra.
    fn divergence_norm_sq(&self, spectra: &Spectra) -> f64 {
        let dim = self.grid.ndim();
        let m = spectra.len();
        let mut acc = crate::sum::CompensatedSum::new();
        let mut v = [Complex64::new(0.0, 0.0); 6];
        for k in 0..self.grid.cells() {
            let xi = self.frequency_vector(k);
            for c in 0..m {
                v[c] = spectra[c][k];
            }
            match self.physics {
                Physics::Conductivity => {
                    let d: Complex64 = (0..dim).map(|j| v[j] * xi[j]).sum();
                    acc.add(d.norm_sqr());
                }
                Physics::Elasticity => {
                    for i in 0..dim {
                        let mut d = Complex64::new(0.0, 0.0);
                        for j in 0..dim {
                            let (c, f) = mandel_index(dim, i, j);
                            d += v[c] * (xi[j] / f);
                        }
                        acc.add(d.norm_sqr());
                    }
                }
            }
        }
        acc.value()
    }

    /// `Γ₀τ`: the zero-mean compatible strain solving the periodic Eshelby
    /// problem with polarization `τ`.
    pub fn apply_gamma0(&self, tau: &TensorField) -> Result<TensorField> {
        self.check(tau)?;
        let mut spectra = self.fft.forward_field(tau);
        self.apply_symbol(&mut spectra);
        Ok(self.fft.inverse_field(&spectra, self.physics))
    }

    /// `Γ₀τ` together with `‖div τ‖_{L²}`, sharing one forward transform.
    pub fn apply_gamma0_with_divergence(&self, tau: &TensorField) -> Result<(TensorField, f64)> {
        self.check(tau)?;
        let mut spectra = self.fft.forward_field(tau);
        let div = self.divergence_norm_sq(&spectra).sqrt();
        self.apply_symbol(&mut spectra);
        Ok((self.fft.inverse_field(&spectra, self.physics), div))
    }

    /// `‖div s‖_{L²}` computed in Fourier space.
    pub fn divergence_norm(&self, s: &TensorField) -> Result<f64> {
        self.check(s)?;
        Ok(self.divergence_norm_sq(&self.fft.forward_field(s)).sqrt())
    }

    /// Largest `|ξ·ŝ(ξ)| / (|ξ| ‖ŝ‖)` over nonzero frequencies, relative to
    /// the largest spectral amplitude of the field.
    pub fn divergence_residual(&self, s: &TensorField) -> Result<f64> {
        self.check(s)?;
        let spectra = self.fft.forward_field(s);
        let dim = self.grid.ndim();
        let amp = spectra.iter().flatten().fold(0.0f64, |a, z| a.max(z.norm()));
        if amp == 0.0 {
            return Ok(0.0);
        }
        let mut worst = 0.0f64;
        for k in 0..self.grid.cells() {
            let xi = self.frequency_vector(k);
            let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let rows = if self.physics == Physics::Conductivity { 1 } else { dim };
            for i in 0..rows {
                let mut d = Complex64::new(0.0, 0.0);
                for j in 0..dim {
                    let (c, f) = match self.physics {
                        Physics::Conductivity => (j, 1.0),
                        Physics::Elasticity => mandel_index(dim, i, j),
                    };
                    d += spectra[c][k] * (xi[j] / f);
                }
                worst = worst.max(d.norm() / (norm * amp));
            }
        }
        Ok(worst)
    }

    /// `Δ₀η = L₀η − L₀⟨η⟩ − L₀Γ₀L₀η`.
    pub fn apply_delta0(&self, eta: &TensorField) -> Result<TensorField> {
        self.check(eta)?;
        let l0 = &self.reference;
        let l0_eta = l0.apply_field(eta)?;
        let gamma = self.apply_gamma0(&l0_eta)?;
        let mut out = l0_eta.fluctuation();
        out.axpy(-1.0, &l0.apply_field(&gamma)?);
        Ok(out)
    }

    /// Orthogonal projection onto one of the four subspaces, orthogonal for
    /// the strain (`E0`, `EPerp`) or stress (`S0`, `SPerp`) energetic product.
    pub fn project(&self, f: &TensorField, which: Subspace) -> Result<TensorField> {
        self.check(f)?;
        let l0 = &self.reference;
        match which {
            Subspace::E0 => self.apply_gamma0(&l0.apply_field(f)?),
            Subspace::EPerp => {
                let p = self.apply_gamma0(&l0.apply_field(f)?)?;
                let mut out = f.fluctuation();
                out.axpy(-1.0, &p);
                Ok(out)
            }
            Subspace::S0 => {
                let p = l0.apply_field(&self.apply_gamma0(f)?)?;
                let mut out = f.fluctuation();
                out.axpy(-1.0, &p);
                Ok(out)
            }
            Subspace::SPerp => l0.apply_field(&self.apply_gamma0(f)?),
        }
    }

    /// Splits `ζ` into mean, `L₀^{1/2}Γ₀L₀^{1/2}ζ` and
    /// `L₀^{-1/2}Δ₀L₀^{-1/2}ζ`, three parts orthogonal in plain `L²`.
    pub fn decompose_l2(&self, zeta: &TensorField) -> Result<L2Decomposition> {
        self.check(zeta)?;
        let l0 = &self.reference;
        let mean = TensorField::uniform(self.grid, self.physics, &zeta.average())?;
        let half = zeta.map_cells(|x, out| l0.apply_sqrt(x, out));
        let g = self.apply_gamma0(&half)?;
        let compatible = g.map_cells(|x, out| l0.apply_sqrt(x, out));
        let inv_half = zeta.map_cells(|x, out| l0.apply_inv_sqrt(x, out));
        let d = self.apply_delta0(&inv_half)?;
        let incompatible = d.map_cells(|x, out| l0.apply_inv_sqrt(x, out));
        Ok(L2Decomposition { mean, compatible, incompatible })
    }
}
