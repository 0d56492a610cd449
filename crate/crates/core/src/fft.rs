//! Multi-dimensional discrete Fourier transforms on a periodic grid.
//!
//! Normalization: the forward transform carries the `1/N` factor and the
//! inverse is an unscaled sum, so that the zero-frequency coefficient of a
//! field is exactly its average.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::{Grid, Physics, TensorField};

/// Forward/inverse transform plans for one grid.
pub struct GridFft {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    mirror: Vec<usize>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("dims", &self.grid.dims()).finish()
    }
}

/// Per-component spectra of a real field.
pub type Spectra = Vec<Vec<Complex64>>;

impl GridFft {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.dims().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.dims().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let mirror = (0..grid.cells())
            .map(|cell| {
                let idx = grid.unravel(cell);
                let mut m = [0usize; 3];
                for (a, &n) in grid.dims().iter().enumerate() {
                    m[a] = (n - idx[a]) % n;
                }
                grid.ravel(&m[..grid.ndim()])
            })
            .collect();
        Self { grid, forward, inverse, mirror }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Flat index of the frequency `−ξ` for the frequency stored at `k`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        self.mirror[k]
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let dims = self.grid.dims();
        assert_eq!(buf.len(), self.grid.cells());
        let ndim = dims.len();
        let mut scratch = Vec::new();
        let mut tmp = Vec::new();
        for axis in 0..ndim {
            let n = dims[axis];
            let stride: usize = dims[axis + 1..].iter().product();
            let plan = &plans[axis];
            let need = plan.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, Complex64::new(0.0, 0.0));
            }
            if stride == 1 {
                plan.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let block = n * stride;
            tmp.resize(block, Complex64::new(0.0, 0.0));
            for chunk in buf.chunks_exact_mut(block) {
                transpose::transpose(chunk, &mut tmp, stride, n);
                plan.process_with_scratch(&mut tmp, &mut scratch);
                transpose::transpose(&tmp, chunk, n, stride);
            }
        }
    }

    /// In-place forward transform, scaled by `1/N`.
    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.forward);
        let scale = 1.0 / self.grid.cells() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// In-place unscaled inverse transform.
    pub fn inverse_inplace(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inverse);
    }

    /// Spectra of every component of a real field.
    ///
    /// Components are transformed two at a time as the real and imaginary
    /// parts of one complex signal and separated with the conjugate symmetry
    /// of real-input transforms.
    pub fn forward_field(&self, field: &TensorField) -> Spectra {
        let m = field.components();
        let cells = field.cells();
        let data = field.as_slice();
        let mut out: Spectra = Vec::with_capacity(m);
        let mut c = 0;
        while c < m {
            let mut z: Vec<Complex64> = if c + 1 < m {
                (0..cells).map(|k| Complex64::new(data[k * m + c], data[k * m + c + 1])).collect()
            } else {
                (0..cells).map(|k| Complex64::new(data[k * m + c], 0.0)).collect()
            };
            self.forward_inplace(&mut z);
            if c + 1 < m {
                let mut a = vec![Complex64::new(0.0, 0.0); cells];
                let mut b = vec![Complex64::new(0.0, 0.0); cells];
                for k in 0..cells {
                    let zk = z[k];
                    let zm = z[self.mirror[k]].conj();
                    a[k] = (zk + zm) * 0.5;
                    b[k] = (zk - zm) * Complex64::new(0.0, -0.5);
                }
                out.push(a);
                out.push(b);
                c += 2;
            } else {
                out.push(z);
                c += 1;
            }
        }
        out
    }

    /// Spectra through one complex transform per component, without pairing.
    pub fn forward_field_unpaired(&self, field: &TensorField) -> Spectra {
        let m = field.components();
        let data = field.as_slice();
        (0..m)
            .map(|c| {
                let mut z: Vec<Complex64> =
                    (0..field.cells()).map(|k| Complex64::new(data[k * m + c], 0.0)).collect();
                self.forward_inplace(&mut z);
                z
            })
            .collect()
    }

    /// Real field from conjugate-symmetric spectra (imaginary residue is
    /// discarded).
    pub fn inverse_field(&self, spectra: &[Vec<Complex64>], physics: Physics) -> TensorField {
        let m = spectra.len();
        let cells = self.grid.cells();
        let mut out = TensorField::zeros(self.grid, physics);
        assert_eq!(out.components(), m, "spectra do not match the physics");
        let data = out.as_mut_slice();
        let mut c = 0;
        while c < m {
            let mut z: Vec<Complex64> = if c + 1 < m {
                let i = Complex64::new(0.0, 1.0);
                spectra[c].iter().zip(&spectra[c + 1]).map(|(a, b)| a + i * b).collect()
            } else {
                spectra[c].clone()
            };
            self.inverse_inplace(&mut z);
            for k in 0..cells {
                data[k * m + c] = z[k].re;
                if c + 1 < m {
                    data[k * m + c + 1] = z[k].im;
                }
            }
            c += 2;
        }
        out
    }
}
