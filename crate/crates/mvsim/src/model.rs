//! Physical model closures — elastic energy density W, magnetic anisotropy
//! psi, external field H_ext — and the validated simulation state.
//!
//! Conventions: the deformation field F is a 2x2 tensor stored row-major as
//! components [F11, F12, F21, F22]. The solenoidal side condition div F^T = 0
//! uses the row-contraction convention (div A)_i = sum_j d_j A_ij, so each
//! *column* of F is divergence-free: d1 F_1k + d2 F_2k = 0. The magnetization
//! M takes values in R^3 with |M| = 1 pointwise.

use crate::error::{MvError, Result};
use crate::spectral::{
    divergence, forward_transform, inverse_transform, Grid, PhysicalField, SpectralField, TWO_PI,
};

/// Integral over the torus of one component, from the zero mode.
pub fn integral(f: &SpectralField, c: usize) -> f64 {
    TWO_PI * TWO_PI * f.coeff(c, 0, 0).re
}

/// Smooth bounded correction to the quadratic elastic energy:
/// w(A) = amplitude * sum_ij cos(A_ij). All derivatives are bounded by the
/// amplitude, so the growth/convexity assumptions on W survive for
/// amplitude < chi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticPerturbation {
    pub amplitude: f64,
}

/// Elastic energy density W(A) = (chi/2)|A|^2 + optional bounded correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticModel {
    chi: f64,
    perturbation: Option<ElasticPerturbation>,
}

/// Constants certifying the structural assumptions on W:
/// c1 |A|^2 <= W(A) <= (1/c1)(|A|^2 + 1), |W'(A) - chi A| <= c2,
/// |W''(A)| <= c3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ElasticModel {
    pub fn new(chi: f64) -> Result<Self> {
        Self::with_perturbation(chi, None)
    }

    pub fn with_perturbation(chi: f64, perturbation: Option<ElasticPerturbation>) -> Result<Self> {
        if !(chi > 0.0) {
            return Err(MvError::InvalidArgument(format!("chi must be positive, got {chi}")));
        }
        if let Some(p) = perturbation {
            if !(p.amplitude >= 0.0 && p.amplitude < chi) {
                return Err(MvError::InvalidArgument(format!(
                    "perturbation amplitude must lie in [0, chi) to keep W convex, got {}",
                    p.amplitude
                )));
            }
        }
        Ok(Self { chi, perturbation })
    }

    #[inline]
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Pointwise energy density of one tensor value.
    pub fn w(&self, a: &[f64; 4]) -> f64 {
        let sq: f64 = a.iter().map(|x| x * x).sum();
        let mut w = 0.5 * self.chi * sq;
        if let Some(p) = self.perturbation {
            w += p.amplitude * a.iter().map(|x| x.cos()).sum::<f64>();
        }
        w
    }

    /// Pointwise derivative W'(A), a 2x2 tensor.
    pub fn w_prime(&self, a: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.chi * a[i];
            if let Some(p) = self.perturbation {
                out[i] -= p.amplitude * a[i].sin();
            }
        }
        out
    }

    /// Certified structural constants for this model.
    pub fn constants(&self) -> ElasticConstants {
        let amp = self.perturbation.map_or(0.0, |p| p.amplitude);
        // amplitude * sum cos(A_ij) >= 4 amp - (amp/2)|A|^2, so
        // W >= ((chi - amp)/2)|A|^2; and W <= (chi/2)|A|^2 + 4 amp.
        let lower = 0.5 * (self.chi - amp);
        let upper = (0.5 * self.chi).max(4.0 * amp).max(1.0);
        ElasticConstants { c1: lower.min(1.0 / upper), c2: 2.0 * amp, c3: self.chi + amp }
    }
}

/// Uniaxial easy-axis anisotropy psi(M) = (alpha/2)(|M|^2 - (M.axis)^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyModel {
    alpha: f64,
    axis: [f64; 3],
}

impl AnisotropyModel {
    pub fn new(alpha: f64, axis: [f64; 3]) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(MvError::InvalidArgument(format!(
                "anisotropy strength must be nonnegative, got {alpha}"
            )));
        }
        let norm = (axis.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if norm < 1e-12 {
            return Err(MvError::InvalidArgument("anisotropy axis must be nonzero".into()));
        }
        Ok(Self { alpha, axis: [axis[0] / norm, axis[1] / norm, axis[2] / norm] })
    }

    pub fn easy_axis_z(alpha: f64) -> Result<Self> {
        Self::new(alpha, [0.0, 0.0, 1.0])
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn psi(&self, m: &[f64; 3]) -> f64 {
        let msq: f64 = m.iter().map(|x| x * x).sum();
        let proj: f64 = m.iter().zip(&self.axis).map(|(a, b)| a * b).sum();
        0.5 * self.alpha * (msq - proj * proj)
    }

    pub fn psi_prime(&self, m: &[f64; 3]) -> [f64; 3] {
        let proj: f64 = m.iter().zip(&self.axis).map(|(a, b)| a * b).sum();
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.alpha * (m[i] - proj * self.axis[i]);
        }
        out
    }

    /// sup of |psi'| over the unit sphere (= alpha for the uniaxial model).
    pub fn sigma(&self) -> f64 {
        self.alpha
    }
}

/// One travelling component of the external field:
/// amplitude * cos(k . x) * cos(omega t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HextMode {
    pub wavevector: [i64; 2],
    pub amplitude: [f64; 3],
    pub omega: f64,
}

/// External magnetic field as a real trigonometric polynomial in x and t.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExternalField {
    pub constant: [f64; 3],
    pub modes: Vec<HextMode>,
}

/// Sup norms of H_ext, dt H_ext and grad H_ext over [0,T] x T^2, with the
/// sampling density they were computed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HextSupNorms {
    pub h_sup: f64,
    pub dt_h_sup: f64,
    pub grad_h_sup: f64,
    pub spatial_samples: usize,
    pub temporal_samples: usize,
}

impl ExternalField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(h: [f64; 3]) -> Self {
        Self { constant: h, modes: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == [0.0; 3] && self.modes.iter().all(|m| m.amplitude == [0.0; 3])
    }

    /// Pointwise value at (t, x).
    pub fn value(&self, t: f64, x: f64, y: f64) -> [f64; 3] {
        let mut h = self.constant;
        for m in &self.modes {
            let s = (m.wavevector[0] as f64 * x + m.wavevector[1] as f64 * y).cos()
                * (m.omega * t).cos();
            for c in 0..3 {
                h[c] += m.amplitude[c] * s;
            }
        }
        h
    }

    /// Pointwise time derivative at (t, x).
    pub fn dt_value(&self, t: f64, x: f64, y: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for m in &self.modes {
            let s = -(m.wavevector[0] as f64 * x + m.wavevector[1] as f64 * y).cos()
                * m.omega
                * (m.omega * t).sin();
            for c in 0..3 {
                h[c] += m.amplitude[c] * s;
            }
        }
        h
    }

    fn check_window(t: f64, t_final: f64) -> Result<()> {
        if t < -1e-12 || t > t_final + 1e-12 {
            return Err(MvError::OutOfWindow { t, t_final });
        }
        Ok(())
    }

    fn place_modes(&self, grid: Grid, t: f64, time_factor: impl Fn(f64) -> f64) -> Result<SpectralField> {
        let n = grid.n() as i64;
        let mut out = SpectralField::zeros(grid, 3);
        for m in &self.modes {
            let [k1, k2] = m.wavevector;
            if k1.abs() >= n / 2 || k2.abs() >= n / 2 {
                return Err(MvError::InvalidArgument(format!(
                    "external-field wavevector ({k1},{k2}) not representable on an n={n} grid"
                )));
            }
            let s = 0.5 * time_factor(m.omega * t);
            let ix = k1.rem_euclid(n) as usize;
            let iy = k2.rem_euclid(n) as usize;
            let jx = (-k1).rem_euclid(n) as usize;
            let jy = (-k2).rem_euclid(n) as usize;
            for c in 0..3 {
                out.coeff_mut(c, iy, ix).re += m.amplitude[c] * s;
                if (ix, iy) != (jx, jy) {
                    out.coeff_mut(c, jy, jx).re += m.amplitude[c] * s;
                } else {
                    // k = 0 mode: cos(k.x) = 1, no conjugate partner.
                    out.coeff_mut(c, iy, ix).re += m.amplitude[c] * s;
                }
            }
        }
        for c in 0..3 {
            out.coeff_mut(c, 0, 0).re += self.constant[c];
        }
        Ok(out)
    }

    /// Exact spectral representation of H_ext(t, .) on the given grid.
    pub fn eval(&self, grid: Grid, t: f64, t_final: f64) -> Result<SpectralField> {
        Self::check_window(t, t_final)?;
        self.place_modes(grid, t, f64::cos)
    }

    /// Exact spectral representation of dt H_ext(t, .).
    pub fn dt_eval(&self, grid: Grid, t: f64, t_final: f64) -> Result<SpectralField> {
        Self::check_window(t, t_final)?;
        let mut out = SpectralField::zeros(grid, 3);
        for m in &self.modes {
            let scaled = ExternalField {
                constant: [0.0; 3],
                modes: vec![HextMode {
                    wavevector: m.wavevector,
                    amplitude: [
                        -m.amplitude[0] * m.omega,
                        -m.amplitude[1] * m.omega,
                        -m.amplitude[2] * m.omega,
                    ],
                    omega: m.omega,
                }],
            };
            out = out.add(&scaled.place_modes(grid, t, f64::sin)?);
        }
        Ok(out)
    }

    /// Sup norms over [0, T] x T^2 by dense sampling (pointwise vector
    /// magnitudes on a `spatial` x `spatial` x `temporal` lattice).
    pub fn sup_norms(&self, t_final: f64) -> HextSupNorms {
        let spatial = 64usize;
        let temporal = 257usize;
        let mut h_sup = 0.0f64;
        let mut dt_sup = 0.0f64;
        let mut grad_sup = 0.0f64;
        let mag = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for it in 0..temporal {
            let t = t_final * it as f64 / (temporal - 1) as f64;
            for iy in 0..spatial {
                let y = TWO_PI * iy as f64 / spatial as f64;
                for ix in 0..spatial {
                    let x = TWO_PI * ix as f64 / spatial as f64;
                    h_sup = h_sup.max(mag(self.value(t, x, y)));
                    dt_sup = dt_sup.max(mag(self.dt_value(t, x, y)));
                    // Frobenius norm of the 3x2 spatial gradient.
                    let mut g = 0.0;
                    for m in &self.modes {
                        let phase = m.wavevector[0] as f64 * x + m.wavevector[1] as f64 * y;
                        let s = -phase.sin() * (m.omega * t).cos();
                        for c in 0..3 {
                            let gx = m.amplitude[c] * m.wavevector[0] as f64 * s;
                            let gy = m.amplitude[c] * m.wavevector[1] as f64 * s;
                            g += gx * gx + gy * gy;
                        }
                    }
                    grad_sup = grad_sup.max(g.sqrt());
                }
            }
        }
        HextSupNorms {
            h_sup,
            dt_h_sup: dt_sup,
            grad_h_sup: grad_sup,
            spatial_samples: spatial,
            temporal_samples: temporal,
        }
    }
}

/// All model parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub nu: f64,
    pub kappa: f64,
    pub mu0: f64,
    pub elastic: ElasticModel,
    pub aniso: AnisotropyModel,
    pub hext: ExternalField,
    pub t_final: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(MvError::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.kappa > 0.0) {
            return Err(MvError::InvalidArgument(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(MvError::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        Ok(())
    }

    /// Sensible defaults for unit-coefficient experiments.
    pub fn default_with(hext: ExternalField, t_final: f64) -> Self {
        Self {
            nu: 1.0,
            kappa: 1.0,
            mu0: 1.0,
            elastic: ElasticModel::new(1.0).expect("default chi"),
            aniso: AnisotropyModel::easy_axis_z(0.0).expect("default axis"),
            hext,
            t_final,
        }
    }
}

/// Full simulation state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Velocity, 2 components.
    pub u: SpectralField,
    /// Deformation tensor, 4 components row-major [F11, F12, F21, F22].
    pub f: SpectralField,
    /// Magnetization, 3 components.
    pub m: SpectralField,
    /// Cached pressure, scalar.
    pub p: SpectralField,
}

impl SimState {
    pub fn new(t: f64, u: SpectralField, f: SpectralField, m: SpectralField, p: SpectralField) -> Self {
        assert_eq!(u.components(), 2, "velocity must have 2 components");
        assert_eq!(f.components(), 4, "deformation must have 4 components");
        assert_eq!(m.components(), 3, "magnetization must have 3 components");
        assert_eq!(p.components(), 1, "pressure must be scalar");
        let n = u.grid().n();
        assert!(
            f.grid().n() == n && m.grid().n() == n && p.grid().n() == n,
            "all state fields must share one grid"
        );
        Self { t, u, f, m, p }
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    /// Uniform rest state: u = 0, F = 0, M = axis everywhere.
    pub fn equilibrium(grid: Grid, axis: [f64; 3]) -> Self {
        let mut m = SpectralField::zeros(grid, 3);
        for c in 0..3 {
            m.coeff_mut(c, 0, 0).re = axis[c];
        }
        Self::new(
            0.0,
            SpectralField::zeros(grid, 2),
            SpectralField::zeros(grid, 4),
            m,
            SpectralField::zeros(grid, 1),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.f.is_finite() && self.m.is_finite() && self.p.is_finite()
    }
}

/// Residuals of the three pointwise constraints, with their tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// max |coeff| of div u.
    pub div_u: f64,
    /// max |coeff| of the row-wise divergence of F.
    pub div_ft: f64,
    /// max over grid points of ||M| - 1|.
    pub unit_m: f64,
    pub div_u_tol: f64,
    pub div_ft_tol: f64,
    pub unit_m_tol: f64,
}

impl ConstraintReport {
    pub fn pass(&self) -> bool {
        self.div_u <= self.div_u_tol && self.div_ft <= self.div_ft_tol && self.unit_m <= self.unit_m_tol
    }
}

/// Column k of F as a 2-vector field (F_1k, F_2k).
pub fn deformation_column(f: &SpectralField, k: usize) -> SpectralField {
    let grid = f.grid();
    let n = grid.n();
    let mut out = SpectralField::zeros(grid, 2);
    for iy in 0..n {
        for ix in 0..n {
            *out.coeff_mut(0, iy, ix) = f.coeff(k, iy, ix);
            *out.coeff_mut(1, iy, ix) = f.coeff(2 + k, iy, ix);
        }
    }
    out
}

/// Largest coefficient of div F^T, i.e. of the divergences d1 F_1k + d2 F_2k
/// of the two columns of F.
pub fn deformation_divergence_residual(f: &SpectralField) -> f64 {
    (0..2)
        .map(|k| divergence(&deformation_column(f, k)).max_coeff_norm())
        .fold(0.0, f64::max)
}

/// Largest pointwise deviation of |M| from 1 on the physical grid.
pub fn unit_magnetization_residual(m: &SpectralField) -> Result<f64> {
    let phys = inverse_transform(m)?;
    let n = m.grid().n();
    let mut worst = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            worst = worst.max((phys.magnitude(iy, ix) - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Evaluate the three constraint residuals against the default tolerances.
pub fn validate_state(s: &SimState) -> Result<ConstraintReport> {
    validate_state_with(s, 1e-10, 1e-8, 1e-10)
}

pub fn validate_state_with(
    s: &SimState,
    div_u_tol: f64,
    div_ft_tol: f64,
    unit_m_tol: f64,
) -> Result<ConstraintReport> {
    Ok(ConstraintReport {
        div_u: divergence(&s.u).max_coeff_norm(),
        div_ft: deformation_divergence_residual(&s.f),
        unit_m: unit_magnetization_residual(&s.m)?,
        div_u_tol,
        div_ft_tol,
        unit_m_tol,
    })
}

/// Pointwise elastic energy density W(F) as a scalar field.
pub fn elastic_energy(elastic: &ElasticModel, f: &SpectralField) -> Result<SpectralField> {
    assert_eq!(f.components(), 4);
    let phys = inverse_transform(f)?;
    let n = f.grid().n();
    let mut out = PhysicalField::zeros(f.grid(), 1);
    for iy in 0..n {
        for ix in 0..n {
            let a = [
                phys.value(0, iy, ix),
                phys.value(1, iy, ix),
                phys.value(2, iy, ix),
                phys.value(3, iy, ix),
            ];
            *out.value_mut(0, iy, ix) = elastic.w(&a);
        }
    }
    forward_transform(&out)
}

/// Pointwise W'(F) as a 2x2 tensor field.
pub fn elastic_stress_arg(elastic: &ElasticModel, f: &SpectralField) -> Result<SpectralField> {
    assert_eq!(f.components(), 4);
    let phys = inverse_transform(f)?;
    let n = f.grid().n();
    let mut out = PhysicalField::zeros(f.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            let a = [
                phys.value(0, iy, ix),
                phys.value(1, iy, ix),
                phys.value(2, iy, ix),
                phys.value(3, iy, ix),
            ];
            let wp = elastic.w_prime(&a);
            for c in 0..4 {
                *out.value_mut(c, iy, ix) = wp[c];
            }
        }
    }
    forward_transform(&out)
}

/// Pointwise anisotropy density psi(M) as a scalar field.
pub fn anisotropy(aniso: &AnisotropyModel, m: &SpectralField) -> Result<SpectralField> {
    assert_eq!(m.components(), 3);
    let phys = inverse_transform(m)?;
    let n = m.grid().n();
    let mut out = PhysicalField::zeros(m.grid(), 1);
    for iy in 0..n {
        for ix in 0..n {
            let mv = [phys.value(0, iy, ix), phys.value(1, iy, ix), phys.value(2, iy, ix)];
            *out.value_mut(0, iy, ix) = aniso.psi(&mv);
        }
    }
    forward_transform(&out)
}

/// Pointwise psi'(M) as a 3-vector field.
pub fn anisotropy_grad(aniso: &AnisotropyModel, m: &SpectralField) -> Result<SpectralField> {
    assert_eq!(m.components(), 3);
    let phys = inverse_transform(m)?;
    let n = m.grid().n();
    let mut out = PhysicalField::zeros(m.grid(), 3);
    for iy in 0..n {
        for ix in 0..n {
            let mv = [phys.value(0, iy, ix), phys.value(1, iy, ix), phys.value(2, iy, ix)];
            let g = aniso.psi_prime(&mv);
            for c in 0..3 {
                *out.value_mut(c, iy, ix) = g[c];
            }
        }
    }
    forward_transform(&out)
}
