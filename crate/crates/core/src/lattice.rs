//! Rectangular lattices in the complex plane and scalar fields sampled on
//! them.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Grid of `nx × ny` points spanning `[x_min, x_max] × [y_min, y_max]`,
/// endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Lattice {
    /// `[-1.5, 1.5]²` with 200 points per side.
    fn default() -> Self {
        Self::square(1.5, 200).expect("valid default lattice")
    }
}

impl Lattice {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::InvalidLattice(format!(
                "empty extent [{x_min}, {x_max}] × [{y_min}, {y_max}]"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite()) {
            return Err(Error::InvalidLattice("non-finite bounds".into()));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidLattice(format!(
                "need at least 3 points per side, got {nx} × {ny}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        })
    }

    /// `[-half, half]²` with `n` points per side.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    /// Square lattice centred at the origin with spacing `h`, covering at
    /// least `[-half, half]²`.
    pub fn with_spacing(half: f64, h: f64) -> Result<Self> {
        let steps = (2.0 * half / h).round() as usize;
        let half = steps as f64 * h / 2.0;
        Self::square(half, steps + 1)
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy()
    }

    /// Lattice point in column `i` (x) and row `j` (y).
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x(i), self.y(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Indices of the lattice point nearest to `z`, if `z` is inside the
    /// bounding box.
    pub fn nearest(&self, z: Complex64) -> Option<(usize, usize)> {
        if z.re < self.x_min || z.re > self.x_max || z.im < self.y_min || z.im > self.y_max {
            return None;
        }
        let i = ((z.re - self.x_min) / self.hx()).round() as usize;
        let j = ((z.im - self.y_min) / self.hy()).round() as usize;
        Some((i.min(self.nx - 1), j.min(self.ny - 1)))
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Whether the closed disk `|z − center| ≤ radius` lies strictly inside
    /// the ring of boundary points.
    pub fn contains_disk(&self, center: Complex64, radius: f64) -> bool {
        center.re - radius > self.x_min + self.hx()
            && center.re + radius < self.x_max - self.hx()
            && center.im - radius > self.y_min + self.hy()
            && center.im + radius < self.y_max - self.hy()
    }

    /// Samples `f` at every lattice point.
    pub fn sample<T, F>(&self, f: F) -> GridField<T>
    where
        F: Fn(Complex64) -> T,
    {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                values.push(f(self.point(i, j)));
            }
        }
        GridField {
            lattice: *self,
            values,
            mask: vec![true; self.len()],
        }
    }
}

/// Values on a lattice, stored row-major with rows of constant `y`
/// (ascending). `mask[k] == false` marks an excluded cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T = f64> {
    pub lattice: Lattice,
    pub values: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Copy> GridField<T> {
    pub fn new(lattice: Lattice, values: Vec<T>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            lattice,
            mask: vec![true; values.len()],
            values,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.lattice.index(i, j)]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.mask[self.lattice.index(i, j)]
    }

    pub fn map<U, F: Fn(T) -> U>(&self, f: F) -> GridField<U> {
        GridField {
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }
}

impl GridField<f64> {
    /// `Σ value × cell area` over unmasked cells.
    pub fn mass(&self) -> f64 {
        self.masked_sum(|_, _| true)
    }

    /// Mass of the positive part.
    pub fn positive_mass(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(v, &m)| m && v.is_finite() && **v > 0.0)
            .map(|(v, _)| *v)
            .sum::<f64>()
            * self.lattice.cell_area()
    }

    /// Mass of the unmasked cells for which `keep(point, value)` holds.
    pub fn masked_sum<F: Fn(Complex64, f64) -> bool>(&self, keep: F) -> f64 {
        let mut total = 0.0;
        for j in 0..self.lattice.ny {
            for i in 0..self.lattice.nx {
                let k = self.lattice.index(i, j);
                let v = self.values[k];
                if self.mask[k] && v.is_finite() && keep(self.lattice.point(i, j), v) {
                    total += v;
                }
            }
        }
        total * self.lattice.cell_area()
    }

    /// Largest unmasked value.
    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(v, &m)| m && v.is_finite())
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Five-point discrete Laplacian. The boundary ring, and any cell whose
/// stencil touches a masked cell, is set to zero and masked.
pub fn laplacian<T>(field: &GridField<T>) -> GridField<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let lat = field.lattice;
    let (nx, ny) = (lat.nx, lat.ny);
    let inv_hx2 = 1.0 / (lat.hx() * lat.hx());
    let inv_hy2 = 1.0 / (lat.hy() * lat.hy());
    let mut values = vec![T::default(); lat.len()];
    let mut mask = vec![false; lat.len()];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            let stencil = [k, k - 1, k + 1, k - nx, k + nx];
            if stencil.iter().any(|&s| !field.mask[s]) {
                continue;
            }
            let f = &field.values;
            let centre = f[k] * 2.0;
            let dxx = (f[k + 1] + f[k - 1] - centre) * inv_hx2;
            let dyy = (f[k + nx] + f[k - nx] - centre) * inv_hy2;
            values[k] = dxx + dyy;
            mask[k] = true;
        }
    }
    GridField {
        lattice: lat,
        values,
        mask,
    }
}
