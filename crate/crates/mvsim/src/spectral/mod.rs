//! Periodic grid, discrete Fourier transforms and spectral operators on the
//! torus [0, 2pi)^2.
//!
//! Normalization (used by every norm in the crate): for grid values v(x_j)
//! the forward transform produces
//!
//!   coeff(k) = (1/n^2) * sum_j v(x_j) exp(-i k . x_j),
//!
//! so coeff(0,0) is the *average* of the field and Parseval reads
//!
//!   ||v||_{L^2}^2 = sum_j |v(x_j)|^2 (2pi/n)^2 = (2pi)^2 sum_k |coeff(k)|^2.
//!
//! Wavenumbers per axis are {-n/2, ..., n/2-1}; the Nyquist row/column is
//! zeroed by every derivative multiplier.

mod fft;

use crate::error::{MvError, Result};
use num_complex::Complex64;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Square spectral grid with n modes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    dealias_fraction: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, 2.0 / 3.0)
    }

    pub fn with_dealias(n: usize, dealias_fraction: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(MvError::InvalidArgument(format!(
                "grid size must be a power of two >= 8, got {n}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(MvError::InvalidArgument(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(Self { n, dealias_fraction })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Grid spacing h = 2pi/n.
    #[inline]
    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    /// Quadrature weight of one cell, h^2.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Signed wavenumber for a storage index along one axis.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> i64 {
        if idx < self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    /// Modes with max(|k1|,|k2|) above this are removed by `dealias`.
    #[inline]
    pub fn dealias_cutoff(&self) -> f64 {
        self.dealias_fraction * self.n as f64 / 2.0
    }

    /// Physical coordinate of a grid point index.
    #[inline]
    pub fn coord(&self, idx: usize) -> f64 {
        idx as f64 * self.spacing()
    }
}

/// Complex Fourier coefficients of a real c-component field.
///
/// Storage is `[component][ky][kx]` row-major; index `(c, iy, ix)` holds the
/// coefficient of the mode `(k1, k2) = (wavenumber(ix), wavenumber(iy))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self { grid, components, coeffs: vec![Complex64::default(); components * grid.n * grid.n] }
    }

    pub fn from_coeffs(grid: Grid, components: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), components * grid.n * grid.n);
        Self { grid, components, coeffs }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn coeff(&self, c: usize, iy: usize, ix: usize) -> Complex64 {
        let n = self.grid.n;
        self.coeffs[(c * n + iy) * n + ix]
    }

    #[inline]
    pub fn coeff_mut(&mut self, c: usize, iy: usize, ix: usize) -> &mut Complex64 {
        let n = self.grid.n;
        &mut self.coeffs[(c * n + iy) * n + ix]
    }

    /// One component as a coefficient slice.
    pub fn component(&self, c: usize) -> &[Complex64] {
        let n2 = self.grid.n * self.grid.n;
        &self.coeffs[c * n2..(c + 1) * n2]
    }

    /// Extract one component as a scalar field.
    pub fn extract_component(&self, c: usize) -> SpectralField {
        SpectralField::from_coeffs(self.grid, 1, self.component(c).to_vec())
    }

    /// Mean value per component (the k = 0 coefficient).
    pub fn mean(&self) -> Vec<f64> {
        (0..self.components).map(|c| self.coeff(c, 0, 0).re).collect()
    }

    /// True if every k = 0 coefficient vanishes (within `tol`).
    pub fn is_mean_free(&self, tol: f64) -> bool {
        (0..self.components).all(|c| self.coeff(c, 0, 0).norm() <= tol)
    }

    /// Subtract the mean from every component.
    pub fn remove_mean(&self) -> SpectralField {
        let mut out = self.clone();
        for c in 0..self.components {
            *out.coeff_mut(c, 0, 0) = Complex64::default();
        }
        out
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        for z in out.coeffs.iter_mut() {
            *z *= a;
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_compatible(self, other);
        let mut out = self.clone();
        for (z, w) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *z += w;
        }
        out
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert_compatible(self, other);
        let mut out = self.clone();
        for (z, w) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *z -= w;
        }
        out
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_compatible(self, other);
        for (z, w) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *z += a * w;
        }
    }

    /// L^2 inner product with another field (summed over components),
    /// by Parseval.
    pub fn l2_inner(&self, other: &SpectralField) -> f64 {
        assert_compatible(self, other);
        let a = TWO_PI * TWO_PI;
        a * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| (x.conj() * y).re)
            .sum::<f64>()
    }

    /// L^2 norm squared over all components, by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        let a = TWO_PI * TWO_PI;
        a * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Largest coefficient magnitude over all components and modes.
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn assert_compatible(a: &SpectralField, b: &SpectralField) {
    assert_eq!(a.grid.n, b.grid.n, "mismatched grids");
    assert_eq!(a.components, b.components, "mismatched component counts");
}

/// Real grid values of a c-component field, `[component][y][x]` row-major.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub grid: Grid,
    pub components: usize,
    pub values: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self { grid, components, values: vec![0.0; components * grid.n * grid.n] }
    }

    #[inline]
    pub fn value(&self, c: usize, iy: usize, ix: usize) -> f64 {
        let n = self.grid.n;
        self.values[(c * n + iy) * n + ix]
    }

    #[inline]
    pub fn value_mut(&mut self, c: usize, iy: usize, ix: usize) -> &mut f64 {
        let n = self.grid.n;
        &mut self.values[(c * n + iy) * n + ix]
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n2 = self.grid.n * self.grid.n;
        &self.values[c * n2..(c + 1) * n2]
    }

    /// Fill from a pointwise function of (x1, x2) returning `components` values.
    pub fn from_fn(grid: Grid, components: usize, f: impl Fn(f64, f64) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(grid, components);
        let n = grid.n;
        for iy in 0..n {
            for ix in 0..n {
                let vals = f(grid.coord(ix), grid.coord(iy));
                assert_eq!(vals.len(), components);
                for (c, v) in vals.into_iter().enumerate() {
                    *out.value_mut(c, iy, ix) = v;
                }
            }
        }
        out
    }

    /// Pointwise Euclidean magnitude across components.
    pub fn magnitude(&self, iy: usize, ix: usize) -> f64 {
        (0..self.components).map(|c| self.value(c, iy, ix).powi(2)).sum::<f64>().sqrt()
    }
}

/// Forward DFT of real grid values.
pub fn forward_transform(values: &PhysicalField) -> Result<SpectralField> {
    if !values.values.iter().all(|v| v.is_finite()) {
        return Err(MvError::InvalidField);
    }
    let n = values.grid.n;
    let mut out = SpectralField::zeros(values.grid, values.components);
    let norm = 1.0 / (n * n) as f64;
    for c in 0..values.components {
        let mut buf: Vec<Complex64> =
            values.component(c).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::fft2_inplace(&mut buf, n, true);
        for (dst, z) in out.coeffs[c * n * n..(c + 1) * n * n].iter_mut().zip(buf) {
            *dst = z * norm;
        }
    }
    Ok(out)
}

/// Inverse DFT back to real grid values. Fails if the coefficients are not
/// conjugate-symmetric (imaginary residue above 1e-10 relative to the field
/// scale).
pub fn inverse_transform(f: &SpectralField) -> Result<PhysicalField> {
    let n = f.grid.n;
    let mut out = PhysicalField::zeros(f.grid, f.components);
    let scale = 1.0 + f.max_coeff_norm() * (n * n) as f64;
    for c in 0..f.components {
        let mut buf: Vec<Complex64> = f.component(c).to_vec();
        fft::fft2_inplace(&mut buf, n, false);
        let mut imag_max = 0.0f64;
        for (dst, z) in out.values[c * n * n..(c + 1) * n * n].iter_mut().zip(buf) {
            imag_max = imag_max.max(z.im.abs());
            *dst = z.re;
        }
        let residue = imag_max / scale;
        if residue > 1e-10 {
            return Err(MvError::NotRealField { residue });
        }
    }
    Ok(out)
}

/// Inverse DFT that keeps the complex values (used by verifiers that operate
/// on single complex modes).
pub fn inverse_transform_complex(f: &SpectralField) -> Vec<Complex64> {
    let n = f.grid.n;
    let mut out = Vec::with_capacity(f.coeffs.len());
    for c in 0..f.components {
        let mut buf: Vec<Complex64> = f.component(c).to_vec();
        fft::fft2_inplace(&mut buf, n, false);
        out.extend(buf);
    }
    out
}

/// Apply a complex multiplier m(k1, k2) to every mode of every component.
pub fn apply_multiplier(f: &SpectralField, m: impl Fn(i64, i64) -> Complex64) -> SpectralField {
    let n = f.grid.n;
    let mut out = f.clone();
    for iy in 0..n {
        let k2 = f.grid.wavenumber(iy);
        for ix in 0..n {
            let k1 = f.grid.wavenumber(ix);
            let w = m(k1, k2);
            for c in 0..f.components {
                *out.coeff_mut(c, iy, ix) = f.coeff(c, iy, ix) * w;
            }
        }
    }
    out
}

#[inline]
fn nyquist(n: usize, k: i64) -> bool {
    k == -(n as i64) / 2
}

/// Spectral gradient of a scalar field: component j carries i*k_j*coeff(k).
pub fn gradient(f: &SpectralField) -> SpectralField {
    assert_eq!(f.components, 1, "gradient expects a scalar field");
    let n = f.grid.n;
    let mut out = SpectralField::zeros(f.grid, 2);
    for iy in 0..n {
        let k2 = f.grid.wavenumber(iy);
        for ix in 0..n {
            let k1 = f.grid.wavenumber(ix);
            if nyquist(n, k1) || nyquist(n, k2) {
                continue;
            }
            let z = f.coeff(0, iy, ix);
            *out.coeff_mut(0, iy, ix) = Complex64::new(0.0, k1 as f64) * z;
            *out.coeff_mut(1, iy, ix) = Complex64::new(0.0, k2 as f64) * z;
        }
    }
    out
}

/// Componentwise gradient of a c-component field, producing 2c components
/// ordered as [d1 f_0, d2 f_0, d1 f_1, d2 f_1, ...].
pub fn gradient_all(f: &SpectralField) -> SpectralField {
    let n = f.grid.n;
    let mut out = SpectralField::zeros(f.grid, 2 * f.components);
    for iy in 0..n {
        let k2 = f.grid.wavenumber(iy);
        for ix in 0..n {
            let k1 = f.grid.wavenumber(ix);
            if nyquist(n, k1) || nyquist(n, k2) {
                continue;
            }
            for c in 0..f.components {
                let z = f.coeff(c, iy, ix);
                *out.coeff_mut(2 * c, iy, ix) = Complex64::new(0.0, k1 as f64) * z;
                *out.coeff_mut(2 * c + 1, iy, ix) = Complex64::new(0.0, k2 as f64) * z;
            }
        }
    }
    out
}

/// Spectral Laplacian, multiplier -|k|^2 with Nyquist modes zeroed.
pub fn laplacian(f: &SpectralField) -> SpectralField {
    let n = f.grid.n;
    apply_multiplier(f, |k1, k2| {
        if nyquist(n, k1) || nyquist(n, k2) {
            Complex64::default()
        } else {
            Complex64::new(-((k1 * k1 + k2 * k2) as f64), 0.0)
        }
    })
}

/// Divergence of a 2-component field.
pub fn divergence(v: &SpectralField) -> SpectralField {
    assert_eq!(v.components, 2, "divergence expects a 2-vector field");
    let n = v.grid.n;
    let mut out = SpectralField::zeros(v.grid, 1);
    for iy in 0..n {
        let k2 = v.grid.wavenumber(iy);
        for ix in 0..n {
            let k1 = v.grid.wavenumber(ix);
            if nyquist(n, k1) || nyquist(n, k2) {
                continue;
            }
            *out.coeff_mut(0, iy, ix) = Complex64::new(0.0, k1 as f64) * v.coeff(0, iy, ix)
                + Complex64::new(0.0, k2 as f64) * v.coeff(1, iy, ix);
        }
    }
    out
}

fn require_mean_free(f: &SpectralField) -> Result<()> {
    let tol = 1e-13 * (1.0 + f.max_coeff_norm());
    for c in 0..f.components {
        let mean = f.coeff(c, 0, 0).norm();
        if mean > tol {
            return Err(MvError::MeanNotZero { mean });
        }
    }
    Ok(())
}

/// Inverse Laplacian on mean-free fields, multiplier -1/|k|^2.
pub fn inverse_laplacian(f: &SpectralField) -> Result<SpectralField> {
    require_mean_free(f)?;
    let mut out = apply_multiplier(f, |k1, k2| {
        let ksq = (k1 * k1 + k2 * k2) as f64;
        if ksq == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(-1.0 / ksq, 0.0)
        }
    });
    for c in 0..out.components {
        *out.coeff_mut(c, 0, 0) = Complex64::default();
    }
    Ok(out)
}

/// (-Delta)^(-1/2) on mean-free fields, multiplier 1/|k|.
pub fn inverse_sqrt_laplacian(f: &SpectralField) -> Result<SpectralField> {
    require_mean_free(f)?;
    let mut out = apply_multiplier(f, |k1, k2| {
        let ksq = (k1 * k1 + k2 * k2) as f64;
        if ksq == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(1.0 / ksq.sqrt(), 0.0)
        }
    });
    for c in 0..out.components {
        *out.coeff_mut(c, 0, 0) = Complex64::default();
    }
    Ok(out)
}

/// Leray projection onto divergence-free fields: (I - k k^T / |k|^2) per
/// mode, mean component preserved.
pub fn leray_project(v: &SpectralField) -> SpectralField {
    assert_eq!(v.components, 2, "leray_project expects a 2-vector field");
    let n = v.grid.n;
    let mut out = v.clone();
    for iy in 0..n {
        let k2 = v.grid.wavenumber(iy) as f64;
        for ix in 0..n {
            let k1 = v.grid.wavenumber(ix) as f64;
            let ksq = k1 * k1 + k2 * k2;
            if ksq == 0.0 {
                continue;
            }
            let v1 = v.coeff(0, iy, ix);
            let v2 = v.coeff(1, iy, ix);
            let kv = (v1 * k1 + v2 * k2) / ksq;
            *out.coeff_mut(0, iy, ix) = v1 - kv * k1;
            *out.coeff_mut(1, iy, ix) = v2 - kv * k2;
        }
    }
    out
}

/// Zero every mode with max(|k1|, |k2|) above the grid's dealias cutoff.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let cutoff = f.grid.dealias_cutoff();
    apply_multiplier(f, |k1, k2| {
        if (k1.abs().max(k2.abs()) as f64) > cutoff {
            Complex64::default()
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Pointwise product of two fields computed in physical space, transformed
/// back and dealiased. For scalar x multi-component, pass the scalar as `a`.
pub fn product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    let pa = inverse_transform(a)?;
    let pb = inverse_transform(b)?;
    let components = if a.components == 1 { b.components } else { a.components };
    assert!(
        a.components == 1 || b.components == 1 || a.components == b.components,
        "product expects matching components or a scalar factor"
    );
    let n = a.grid.n;
    let mut out = PhysicalField::zeros(a.grid, components);
    for c in 0..components {
        let ca = if a.components == 1 { 0 } else { c };
        let cb = if b.components == 1 { 0 } else { c };
        for iy in 0..n {
            for ix in 0..n {
                *out.value_mut(c, iy, ix) = pa.value(ca, iy, ix) * pb.value(cb, iy, ix);
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Zero-pad the spectrum onto a grid of `factor * n` modes per axis (used by
/// oversampled sup-norm evaluation and the padded-product oracle).
pub fn pad_spectrum(f: &SpectralField, factor: usize) -> SpectralField {
    let n = f.grid.n;
    let m = n * factor;
    let big = Grid::with_dealias(m, f.grid.dealias_fraction).expect("padded grid");
    let mut out = SpectralField::zeros(big, f.components);
    for c in 0..f.components {
        for iy in 0..n {
            let k2 = f.grid.wavenumber(iy);
            let jy = if k2 >= 0 { k2 as usize } else { (k2 + m as i64) as usize };
            for ix in 0..n {
                let k1 = f.grid.wavenumber(ix);
                let jx = if k1 >= 0 { k1 as usize } else { (k1 + m as i64) as usize };
                *out.coeff_mut(c, jy, jx) = f.coeff(c, iy, ix);
            }
        }
    }
    out
}

/// Grid sup of the pointwise Euclidean magnitude, evaluated on a grid
/// oversampled by `factor` (band-limited interpolation via zero padding).
pub fn sup_norm_oversampled(f: &SpectralField, factor: usize) -> Result<f64> {
    let big = if factor <= 1 { f.clone() } else { pad_spectrum(f, factor) };
    let phys = inverse_transform(&big)?;
    let n = big.grid().n();
    let mut best = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            best = best.max(phys.magnitude(iy, ix));
        }
    }
    Ok(best)
}
