//! Symmetric positive-definite constitutive operators acting on tensor
//! components, uniform ([`Stiffness`]) or attached to grid cells
//! ([`StiffnessField`]).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::field::{Grid, Physics, TensorField};
use crate::sum::CompensatedSum;

/// Component index and coordinate factor of the tensor entry `(i, j)` in the
/// orthonormal symmetric (Mandel) basis.
///
/// Off-diagonal entries carry a factor `√2`, so the double contraction of two
/// symmetric tensors is the plain dot product of their stored components.
pub fn mandel_index(dim: usize, i: usize, j: usize) -> (usize, f64) {
    if i == j {
        return (i, 1.0);
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let k = match (dim, a, b) {
        (2, 0, 1) => 2,
        (3, 1, 2) => 3,
        (3, 0, 2) => 4,
        (3, 0, 1) => 5,
        _ => panic!("no symmetric component ({i},{j}) in dimension {dim}"),
    };
    (k, std::f64::consts::SQRT_2)
}

/// A uniform symmetric positive-definite operator on tensor components.
///
/// For conductivity this is a `d×d` SPD matrix; for elasticity it is the
/// `m×m` Mandel matrix of a stiffness tensor with major and minor symmetries,
/// `m = d(d+1)/2`. Inverse, square root and inverse square root are computed
/// once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Stiffness {
    physics: Physics,
    dim: usize,
    m: usize,
    matrix: Vec<f64>,
    inverse: Vec<f64>,
    sqrt: Vec<f64>,
    inv_sqrt: Vec<f64>,
    eig_min: f64,
    eig_max: f64,
}

impl Stiffness {
    /// Builds an operator from a row-major `m×m` matrix.
    pub fn new(physics: Physics, dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        let m = physics.components(dim);
        if matrix.len() != m * m {
            return Err(Error::Shape(format!(
                "constitutive matrix has {} entries, expected {}",
                matrix.len(),
                m * m
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("constitutive matrix has non-finite entries".into()));
        }
        let scale = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..m {
            for j in 0..i {
                if (matrix[i * m + j] - matrix[j * m + i]).abs() > 1e-12 * scale {
                    return Err(Error::Config(format!(
                        "constitutive matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let a = DMatrix::from_row_slice(m, m, &matrix);
        let a = (&a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(a.clone());
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if !(eig_min > 0.0) {
            return Err(Error::NotPositiveDefinite(eig_min));
        }
        let q = &eig.eigenvectors;
        let from_spectrum = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            let mat = q * diag * q.transpose();
            let mut out = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    out[i * m + j] = 0.5 * (mat[(i, j)] + mat[(j, i)]);
                }
            }
            out
        };
        let inverse = from_spectrum(&|l| 1.0 / l);
        let sqrt = from_spectrum(&|l| l.sqrt());
        let inv_sqrt = from_spectrum(&|l| 1.0 / l.sqrt());
        let mut matrix = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                matrix[i * m + j] = a[(i, j)];
            }
        }
        Ok(Self { physics, dim, m, matrix, inverse, sqrt, inv_sqrt, eig_min, eig_max })
    }

    /// `value · I` on the tensor components.
    pub fn scaled_identity(physics: Physics, dim: usize, value: f64) -> Result<Self> {
        let m = physics.components(dim);
        let mut matrix = vec![0.0; m * m];
        for i in 0..m {
            matrix[i * m + i] = value;
        }
        Self::new(physics, dim, matrix)
    }

    /// Isotropic conductivity (or antiplane shear modulus) `l · I`.
    pub fn isotropic_conductivity(dim: usize, l: f64) -> Result<Self> {
        Self::scaled_identity(Physics::Conductivity, dim, l)
    }

    /// Isotropic stiffness `k I⊗I + 2μ (I_sym − I⊗I/d)` from the
    /// `d`-dimensional bulk modulus `k` and the shear modulus `μ`.
    pub fn isotropic_elastic(dim: usize, bulk: f64, shear: f64) -> Result<Self> {
        let m = Physics::Elasticity.components(dim);
        let mut matrix = vec![0.0; m * m];
        let lambda = bulk - 2.0 * shear / dim as f64;
        for i in 0..m {
            matrix[i * m + i] = 2.0 * shear;
        }
        for i in 0..dim {
            for j in 0..dim {
                matrix[i * m + j] += lambda;
            }
        }
        Self::new(Physics::Elasticity, dim, matrix)
    }

    /// Isotropic stiffness from Lamé constants.
    pub fn isotropic_lame(dim: usize, lambda: f64, mu: f64) -> Result<Self> {
        Self::isotropic_elastic(dim, lambda + 2.0 * mu / dim as f64, mu)
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored tensor components.
    pub fn components(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &[f64] {
        &self.inverse
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig_min
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig_max
    }

    /// Entry `(i, j)` of the matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.m + j]
    }

    /// The isotropic scalar if the operator is a multiple of the identity.
    pub fn as_scalar(&self) -> Option<f64> {
        let c = self.matrix[0];
        let m = self.m;
        let tol = 1e-14 * c.abs();
        let ok = (0..m).all(|i| {
            (0..m).all(|j| {
                let expect = if i == j { c } else { 0.0 };
                (self.matrix[i * m + j] - expect).abs() <= tol
            })
        });
        ok.then_some(c)
    }

    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.matrix, self.m, x, out);
    }

    #[inline]
    pub fn apply_inverse(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.inverse, self.m, x, out);
    }

    #[inline]
    pub fn apply_sqrt(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.sqrt, self.m, x, out);
    }

    #[inline]
    pub fn apply_inv_sqrt(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.inv_sqrt, self.m, x, out);
    }

    /// `x : L y`.
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..m {
            let row = &self.matrix[i * m..(i + 1) * m];
            acc += x[i] * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    /// `x : L⁻¹ y`.
    pub fn quadratic_inverse(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..m {
            let row = &self.inverse[i * m..(i + 1) * m];
            acc += x[i] * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    /// Generalized eigenvalue extremes of `other` relative to `self`, i.e.
    /// the spectrum of `self⁻¹ · other`.
    pub fn relative_spectrum(&self, other: &Stiffness) -> (f64, f64) {
        let m = self.m;
        let s = DMatrix::from_row_slice(m, m, &self.inv_sqrt);
        let o = DMatrix::from_row_slice(m, m, &other.matrix);
        let c = &s * o * &s;
        let c = (&c + c.transpose()) * 0.5;
        let e = SymmetricEigen::new(c).eigenvalues;
        (e.min(), e.max())
    }

    fn check_field(&self, field: &TensorField) -> Result<()> {
        if field.physics() != self.physics || field.grid().ndim() != self.dim {
            return Err(Error::Shape(format!(
                "operator for {:?} in {}D applied to {:?} field in {}D",
                self.physics,
                self.dim,
                field.physics(),
                field.grid().ndim()
            )));
        }
        Ok(())
    }

    /// Cell-wise application to a field.
    pub fn apply_field(&self, field: &TensorField) -> Result<TensorField> {
        self.check_field(field)?;
        Ok(field.map_cells(|x, out| self.apply(x, out)))
    }

    /// Cell-wise application of the inverse.
    pub fn apply_inverse_field(&self, field: &TensorField) -> Result<TensorField> {
        self.check_field(field)?;
        Ok(field.map_cells(|x, out| self.apply_inverse(x, out)))
    }
}

#[inline]
pub(crate) fn mat_vec(matrix: &[f64], m: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..m {
        let row = &matrix[i * m..(i + 1) * m];
        out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// A cell-wise SPD operator `L(x)` stored as a table of distinct values and a
/// cell → entry index.
#[derive(Debug, Clone)]
pub struct StiffnessField {
    grid: Grid,
    physics: Physics,
    table: Vec<Stiffness>,
    index: Option<Vec<u32>>,
}

impl StiffnessField {
    /// The same operator in every cell.
    pub fn uniform(grid: Grid, stiffness: Stiffness) -> Self {
        Self { grid, physics: stiffness.physics(), table: vec![stiffness], index: None }
    }

    /// Per-phase storage with a cell → phase index.
    pub fn from_phases(grid: Grid, table: Vec<Stiffness>, index: Vec<u32>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Config("empty phase table".into()));
        }
        if index.len() != grid.cells() {
            return Err(Error::Shape(format!(
                "phase index has {} cells, grid has {}",
                index.len(),
                grid.cells()
            )));
        }
        let physics = table[0].physics();
        if table.iter().any(|s| s.physics() != physics || s.dim() != grid.ndim()) {
            return Err(Error::Shape("phase table mixes physics or dimensions".into()));
        }
        if let Some((cell, id)) = index.iter().enumerate().find(|(_, &id)| id as usize >= table.len()) {
            return Err(Error::Config(format!("cell {cell} refers to missing phase {id}")));
        }
        Ok(Self { grid, physics, table, index: Some(index) })
    }

    /// One row-major matrix per cell; rejects any cell that is not SPD and
    /// names it.
    pub fn from_cells(grid: Grid, physics: Physics, cells: Vec<Vec<f64>>) -> Result<Self> {
        if cells.len() != grid.cells() {
            return Err(Error::Shape(format!(
                "{} cell matrices for a grid of {} cells",
                cells.len(),
                grid.cells()
            )));
        }
        let mut table = Vec::with_capacity(cells.len());
        for (cell, matrix) in cells.into_iter().enumerate() {
            match Stiffness::new(physics, grid.ndim(), matrix) {
                Ok(s) => table.push(s),
                Err(Error::NotPositiveDefinite(min_eigenvalue)) => {
                    return Err(Error::SingularCell { cell, min_eigenvalue })
                }
                Err(e) => return Err(e),
            }
        }
        let index = (0..table.len() as u32).collect();
        Ok(Self { grid, physics, table, index: Some(index) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn table(&self) -> &[Stiffness] {
        &self.table
    }

    pub fn is_uniform(&self) -> bool {
        self.index.is_none() || self.table.len() == 1
    }

    /// The single value of a uniform field; configuration error otherwise.
    pub fn as_uniform(&self) -> Result<&Stiffness> {
        if self.is_uniform() {
            Ok(&self.table[0])
        } else {
            Err(Error::Config("reference medium must be spatially uniform".into()))
        }
    }

    /// Operator at a cell.
    #[inline]
    pub fn at(&self, cell: usize) -> &Stiffness {
        match &self.index {
            None => &self.table[0],
            Some(index) => &self.table[index[cell] as usize],
        }
    }

    fn check(&self, field: &TensorField) -> Result<()> {
        if field.grid() != &self.grid || field.physics() != self.physics {
            return Err(Error::Shape("field does not match the stiffness field".into()));
        }
        Ok(())
    }

    pub fn apply(&self, field: &TensorField) -> Result<TensorField> {
        self.check(field)?;
        Ok(field.map_cells_indexed(|cell, x, out| self.at(cell).apply(x, out)))
    }

    pub fn apply_inverse(&self, field: &TensorField) -> Result<TensorField> {
        self.check(field)?;
        Ok(field.map_cells_indexed(|cell, x, out| self.at(cell).apply_inverse(x, out)))
    }

    /// `⟨L η : η̃⟩` with the spatially varying operator.
    pub fn dot(&self, a: &TensorField, b: &TensorField) -> Result<f64> {
        self.check(a)?;
        a.check_compatible(b)?;
        let acc: CompensatedSum = (0..a.cells()).map(|c| self.at(c).quadratic(a.cell(c), b.cell(c))).collect();
        Ok(acc.value() / a.cells() as f64)
    }

    /// `⟨τ : L⁻¹ τ̃⟩`, the dual form.
    pub fn dot_inverse(&self, a: &TensorField, b: &TensorField) -> Result<f64> {
        self.check(a)?;
        a.check_compatible(b)?;
        let acc: CompensatedSum =
            (0..a.cells()).map(|c| self.at(c).quadratic_inverse(a.cell(c), b.cell(c))).collect();
        Ok(acc.value() / a.cells() as f64)
    }
}
