//! Periodic grids and the tensor fields that live on them.
//!
//! A [`TensorField`] stores one tensor per cell of a regular periodic grid,
//! cell-major in C order (slowest axis first) with the component index
//! fastest. Symmetric second-order tensors are stored in the orthonormal
//! symmetric basis (see [`crate::stiffness::mandel_index`]), so the double
//! contraction of two stored tensors is the plain dot product of their
//! components. All averages and scalar products use one quadrature point per
//! cell and compensated summation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::stiffness::{Stiffness, StiffnessField};
use crate::sum::CompensatedSum;

/// Which constitutive problem a field belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Physics {
    /// Vector fields (gradient / flux); also antiplane elasticity.
    Conductivity,
    /// Symmetric second-order tensor fields (strain / stress).
    Elasticity,
}

impl Physics {
    /// Number of stored components per cell in dimension `dim`.
    pub fn components(self, dim: usize) -> usize {
        match self {
            Physics::Conductivity => dim,
            Physics::Elasticity => dim * (dim + 1) / 2,
        }
    }

    pub fn code(self) -> char {
        match self {
            Physics::Conductivity => 'C',
            Physics::Elasticity => 'E',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'C' => Some(Physics::Conductivity),
            'E' => Some(Physics::Elasticity),
            _ => None,
        }
    }
}

/// A regular periodic grid over a box-shaped unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    ndim: usize,
    dims: [usize; 3],
    lengths: [f64; 3],
}

impl Grid {
    /// Unit-length cell edges.
    pub fn new(dims: &[usize]) -> Result<Self> {
        let lengths = vec![1.0; dims.len()];
        Self::with_lengths(dims, &lengths)
    }

    pub fn with_lengths(dims: &[usize], lengths: &[f64]) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {}", dims.len())));
        }
        if lengths.len() != dims.len() {
            return Err(Error::Grid("one edge length per axis is required".into()));
        }
        if let Some(n) = dims.iter().find(|&&n| n < 2) {
            return Err(Error::Grid(format!("every axis needs at least 2 cells, got {n}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Grid("edge lengths must be positive and finite".into()));
        }
        let mut d = [1usize; 3];
        let mut l = [1.0; 3];
        d[..dims.len()].copy_from_slice(dims);
        l[..dims.len()].copy_from_slice(lengths);
        Ok(Self { ndim: dims.len(), dims: d, lengths: l })
    }

    /// Square (cube) grid with `n` cells per axis.
    pub fn square(ndim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.ndim]
    }

    /// Total number of cells `N = ∏ Nⱼ`.
    pub fn cells(&self) -> usize {
        self.dims().iter().product()
    }

    /// Multi-index of a flat C-order cell index.
    pub fn unravel(&self, mut cell: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for axis in (0..self.ndim).rev() {
            idx[axis] = cell % self.dims[axis];
            cell /= self.dims[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.dims()).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Signed integer wavenumber of FFT index `i` along `axis`, in the
    /// half-open range `[−N/2, N/2)`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        let n = self.dims[axis];
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// True for the unpaired `−N/2` index of an even axis.
    pub fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        let n = self.dims[axis];
        n.is_multiple_of(2) && i == n / 2
    }

    /// Reciprocal-lattice frequency `kⱼ · 2π/Yⱼ` of FFT index `i`.
    pub fn frequency(&self, axis: usize, i: usize) -> f64 {
        self.wavenumber(axis, i) as f64 * 2.0 * PI / self.lengths[axis]
    }

    /// Coordinates of the grid point of a cell (origin at the corner of the
    /// box).
    pub fn position(&self, cell: usize) -> [f64; 3] {
        let idx = self.unravel(cell);
        let mut x = [0.0; 3];
        for a in 0..self.ndim {
            x[a] = idx[a] as f64 * self.lengths[a] / self.dims[a] as f64;
        }
        x
    }
}

/// A tensor per cell of a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    physics: Physics,
    ncomp: usize,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: Grid, physics: Physics) -> Self {
        let ncomp = physics.components(grid.ndim());
        Self { grid, physics, ncomp, data: vec![0.0; ncomp * grid.cells()] }
    }

    /// The same tensor in every cell.
    pub fn uniform(grid: Grid, physics: Physics, value: &[f64]) -> Result<Self> {
        let ncomp = physics.components(grid.ndim());
        if value.len() != ncomp {
            return Err(Error::Shape(format!("uniform value has {} components, expected {ncomp}", value.len())));
        }
        let mut data = Vec::with_capacity(ncomp * grid.cells());
        for _ in 0..grid.cells() {
            data.extend_from_slice(value);
        }
        Ok(Self { grid, physics, ncomp, data })
    }

    pub fn from_vec(grid: Grid, physics: Physics, data: Vec<f64>) -> Result<Self> {
        let ncomp = physics.components(grid.ndim());
        if data.len() != ncomp * grid.cells() {
            return Err(Error::Shape(format!(
                "field data has {} values, expected {}",
                data.len(),
                ncomp * grid.cells()
            )));
        }
        Ok(Self { grid, physics, ncomp, data })
    }

    /// Field from a function of the cell position.
    pub fn from_fn(grid: Grid, physics: Physics, mut f: impl FnMut([f64; 3], &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, physics);
        let ncomp = out.ncomp;
        for (cell, chunk) in out.data.chunks_exact_mut(ncomp).enumerate() {
            f(grid.position(cell), chunk);
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn components(&self) -> usize {
        self.ncomp
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    #[inline]
    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.data[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn check_compatible(&self, other: &TensorField) -> Result<()> {
        if self.grid != other.grid || self.physics != other.physics {
            return Err(Error::Shape(format!(
                "fields differ: {:?} {:?} vs {:?} {:?}",
                self.physics,
                self.grid.dims(),
                other.physics,
                other.grid.dims()
            )));
        }
        Ok(())
    }

    /// New field obtained by applying `f(input_cell, output_cell)` per cell.
    pub fn map_cells(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> TensorField {
        let mut out = TensorField::zeros(self.grid, self.physics);
        for (x, y) in self.data.chunks_exact(self.ncomp).zip(out.data.chunks_exact_mut(self.ncomp)) {
            f(x, y);
        }
        out
    }

    pub fn map_cells_indexed(&self, mut f: impl FnMut(usize, &[f64], &mut [f64])) -> TensorField {
        let mut out = TensorField::zeros(self.grid, self.physics);
        for (cell, (x, y)) in
            self.data.chunks_exact(self.ncomp).zip(out.data.chunks_exact_mut(self.ncomp)).enumerate()
        {
            f(cell, x, y);
        }
        out
    }

    /// Mean over the unit cell, `⟨f⟩`.
    pub fn average(&self) -> Vec<f64> {
        let mut acc = vec![CompensatedSum::new(); self.ncomp];
        for chunk in self.data.chunks_exact(self.ncomp) {
            for (a, v) in acc.iter_mut().zip(chunk) {
                a.add(*v);
            }
        }
        let n = self.cells() as f64;
        acc.iter().map(|a| a.value() / n).collect()
    }

    /// `self ← self + alpha · x`.
    pub fn axpy(&mut self, alpha: f64, x: &TensorField) {
        debug_assert!(self.check_compatible(x).is_ok());
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> TensorField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self + other`.
    pub fn add(&self, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// `self − other`.
    pub fn sub(&self, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Adds the same tensor to every cell.
    pub fn add_uniform(&mut self, value: &[f64]) {
        debug_assert_eq!(value.len(), self.ncomp);
        for chunk in self.data.chunks_exact_mut(self.ncomp) {
            for (a, v) in chunk.iter_mut().zip(value) {
                *a += v;
            }
        }
    }

    /// Field minus its mean.
    pub fn fluctuation(&self) -> TensorField {
        let mean: Vec<f64> = self.average().iter().map(|v| -v).collect();
        let mut out = self.clone();
        out.add_uniform(&mean);
        out
    }

    /// Plain `L²` product `⟨f : g⟩`.
    pub fn dot_l2(&self, other: &TensorField) -> Result<f64> {
        self.check_compatible(other)?;
        let acc: CompensatedSum = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(acc.value() / self.cells() as f64)
    }

    pub fn norm_l2(&self) -> f64 {
        let acc: CompensatedSum = self.data.iter().map(|a| a * a).collect();
        (acc.value() / self.cells() as f64).sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn check_reference(&self, l0: &Stiffness) -> Result<()> {
        if l0.physics() != self.physics || l0.dim() != self.grid.ndim() {
            return Err(Error::Shape("reference medium does not match the field".into()));
        }
        Ok(())
    }

    /// Energetic strain product `⟨η, η̃⟩ₑ = ⟨L₀ η : η̃⟩`.
    pub fn dot_e(&self, other: &TensorField, l0: &Stiffness) -> Result<f64> {
        self.check_compatible(other)?;
        self.check_reference(l0)?;
        let acc: CompensatedSum = self
            .data
            .chunks_exact(self.ncomp)
            .zip(other.data.chunks_exact(self.ncomp))
            .map(|(a, b)| l0.quadratic(a, b))
            .collect();
        Ok(acc.value() / self.cells() as f64)
    }

    /// Energetic stress product `⟨τ, τ̃⟩ₛ = ⟨τ : L₀⁻¹ τ̃⟩`.
    pub fn dot_s(&self, other: &TensorField, l0: &Stiffness) -> Result<f64> {
        self.check_compatible(other)?;
        self.check_reference(l0)?;
        let acc: CompensatedSum = self
            .data
            .chunks_exact(self.ncomp)
            .zip(other.data.chunks_exact(self.ncomp))
            .map(|(a, b)| l0.quadratic_inverse(a, b))
            .collect();
        Ok(acc.value() / self.cells() as f64)
    }

    /// `‖η‖ₑ`.
    pub fn norm_e(&self, l0: &Stiffness) -> Result<f64> {
        Ok(self.dot_e(self, l0)?.max(0.0).sqrt())
    }

    /// `‖τ‖ₛ`.
    pub fn norm_s(&self, l0: &Stiffness) -> Result<f64> {
        Ok(self.dot_s(self, l0)?.max(0.0).sqrt())
    }

    /// `⟨L η : η̃⟩` with a spatially varying operator.
    pub fn dot_with(&self, other: &TensorField, l: &StiffnessField) -> Result<f64> {
        l.dot(self, other)
    }
}

/// Applied macroscopic strain (or gradient) `ε̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroscopicLoad {
    physics: Physics,
    dim: usize,
    value: Vec<f64>,
}

impl MacroscopicLoad {
    pub fn new(physics: Physics, dim: usize, value: Vec<f64>) -> Result<Self> {
        if value.len() != physics.components(dim) {
            return Err(Error::Shape(format!(
                "load has {} components, expected {}",
                value.len(),
                physics.components(dim)
            )));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("load entries must be finite".into()));
        }
        Ok(Self { physics, dim, value })
    }

    /// Unit load along stored component `k`.
    pub fn unit(physics: Physics, dim: usize, k: usize) -> Result<Self> {
        let mut value = vec![0.0; physics.components(dim)];
        *value.get_mut(k).ok_or_else(|| Error::Config(format!("no load component {k}")))? = 1.0;
        Self::new(physics, dim, value)
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    /// `|ε̄|²` (Frobenius).
    pub fn norm_squared(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum()
    }

    pub fn as_field(&self, grid: Grid) -> Result<TensorField> {
        TensorField::uniform(grid, self.physics, &self.value)
    }
}
