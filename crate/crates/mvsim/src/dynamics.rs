//! Right-hand sides of the coupled system, the pressure, and the
//! semi-implicit (IMEX) time stepper.
//!
//! The continuous system on the torus:
//!
//!   dt u + u.grad u - nu Lap u + grad p
//!         = -div(grad M (.) grad M - W'(F) F^T) + mu0 grad^T H_ext M
//!   div u = 0
//!   dt F + u.grad F - grad u F = kappa Lap F,          div F^T = 0
//!   dt M + u.grad M = -M x H_eff - M x (M x H_eff),    |M| = 1
//!   H_eff = Lap M + mu0 H_ext - psi'(M)
//!
//! Time discretization: Crank-Nicolson on the diffusive parts (nu Lap u,
//! kappa Lap F, and the Lap M hidden in -M x (M x H_eff), which equals
//! Lap M + |grad M|^2 M when |M| = 1), combined with a Heun two-stage
//! predictor-corrector on everything else. The scheme is second order in
//! time; the velocity is Leray-projected and the magnetization renormalized
//! after each full step.

use crate::error::{MvError, Result};
use crate::model::{
    anisotropy_grad, elastic_stress_arg, unit_magnetization_residual, ModelParams, SimState,
};
use crate::spectral::{
    apply_multiplier, dealias, divergence, forward_transform, gradient_all, inverse_laplacian,
    inverse_transform, laplacian, leray_project, sup_norm_oversampled, PhysicalField,
    SpectralField,
};
use num_complex::Complex64;

/// Time-step parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Renormalize M every this many steps (1 = every step).
    pub renormalize_every: usize,
    /// Advective CFL safety factor in (0, 1): dt <= cfl_safety * h / max|u|.
    pub cfl_safety: f64,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Result<Self> {
        Self::with_options(dt, 1, 0.5)
    }

    pub fn with_options(dt: f64, renormalize_every: usize, cfl_safety: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(MvError::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if renormalize_every == 0 {
            return Err(MvError::InvalidArgument(
                "renormalize_every must be at least 1".into(),
            ));
        }
        if !(cfl_safety > 0.0 && cfl_safety < 1.0) {
            return Err(MvError::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1), got {cfl_safety}"
            )));
        }
        Ok(Self { dt, renormalize_every, cfl_safety })
    }
}

fn to_physical(f: &SpectralField) -> Result<PhysicalField> {
    inverse_transform(f)
}

/// Advection (u . grad) f for a field with any number of components.
pub fn advect(u: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    assert_eq!(u.components(), 2);
    let g = gradient_all(f);
    let pu = to_physical(u)?;
    let pg = to_physical(&g)?;
    let n = f.grid().n();
    let mut out = PhysicalField::zeros(f.grid(), f.components());
    for c in 0..f.components() {
        for iy in 0..n {
            for ix in 0..n {
                *out.value_mut(c, iy, ix) = pu.value(0, iy, ix) * pg.value(2 * c, iy, ix)
                    + pu.value(1, iy, ix) * pg.value(2 * c + 1, iy, ix);
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Stretching term (grad u F)_{ik} = sum_j d_j u_i F_{jk}.
pub fn velocity_gradient_times_f(u: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    assert_eq!(u.components(), 2);
    assert_eq!(f.components(), 4);
    let gu = to_physical(&gradient_all(u))?; // [d1u1, d2u1, d1u2, d2u2]
    let pf = to_physical(f)?; // [F11, F12, F21, F22]
    let n = f.grid().n();
    let mut out = PhysicalField::zeros(f.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                for k in 0..2 {
                    let mut acc = 0.0;
                    for j in 0..2 {
                        acc += gu.value(2 * i + j, iy, ix) * pf.value(2 * j + k, iy, ix);
                    }
                    *out.value_mut(2 * i + k, iy, ix) = acc;
                }
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Kramers tensor (grad M (.) grad M)_{ij} = d_i M . d_j M.
pub fn grad_m_outer(m: &SpectralField) -> Result<SpectralField> {
    assert_eq!(m.components(), 3);
    let gm = to_physical(&gradient_all(m))?; // [d1 M_c, d2 M_c] interleaved
    let n = m.grid().n();
    let mut out = PhysicalField::zeros(m.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for c in 0..3 {
                        acc += gm.value(2 * c + i, iy, ix) * gm.value(2 * c + j, iy, ix);
                    }
                    *out.value_mut(2 * i + j, iy, ix) = acc;
                }
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Elastic stress W'(F) F^T: (i,j) entry sum_k W'(F)_{ik} F_{jk}.
pub fn elastic_stress(params: &ModelParams, f: &SpectralField) -> Result<SpectralField> {
    let wp = to_physical(&elastic_stress_arg(&params.elastic, f)?)?;
    let pf = to_physical(f)?;
    let n = f.grid().n();
    let mut out = PhysicalField::zeros(f.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..2 {
                        acc += wp.value(2 * i + k, iy, ix) * pf.value(2 * j + k, iy, ix);
                    }
                    *out.value_mut(2 * i + j, iy, ix) = acc;
                }
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// u (x) u as a 2x2 tensor field.
pub fn outer_uu(u: &SpectralField) -> Result<SpectralField> {
    assert_eq!(u.components(), 2);
    let pu = to_physical(u)?;
    let n = u.grid().n();
    let mut out = PhysicalField::zeros(u.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                for j in 0..2 {
                    *out.value_mut(2 * i + j, iy, ix) =
                        pu.value(i, iy, ix) * pu.value(j, iy, ix);
                }
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Row-contraction divergence of a 2x2 tensor: (div T)_i = sum_j d_j T_{ij}.
pub fn tensor_divergence(t: &SpectralField) -> SpectralField {
    assert_eq!(t.components(), 4);
    let g = gradient_all(t); // [d1 T11, d2 T11, d1 T12, d2 T12, ...]
    let grid = t.grid();
    let n = grid.n();
    let mut out = SpectralField::zeros(grid, 2);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                // d1 T_{i1} + d2 T_{i2}
                let d1 = g.coeff(2 * (2 * i) , iy, ix);
                let d2 = g.coeff(2 * (2 * i + 1) + 1, iy, ix);
                *out.coeff_mut(i, iy, ix) = d1 + d2;
            }
        }
    }
    out
}

/// Zeeman force density (grad^T H M)_j = sum_i d_j H_i M_i.
pub fn zeeman_force(h: &SpectralField, m: &SpectralField) -> Result<SpectralField> {
    assert_eq!(h.components(), 3);
    assert_eq!(m.components(), 3);
    let gh = to_physical(&gradient_all(h))?;
    let pm = to_physical(m)?;
    let n = m.grid().n();
    let mut out = PhysicalField::zeros(m.grid(), 2);
    for iy in 0..n {
        for ix in 0..n {
            for j in 0..2 {
                let mut acc = 0.0;
                for i in 0..3 {
                    acc += gh.value(2 * i + j, iy, ix) * pm.value(i, iy, ix);
                }
                *out.value_mut(j, iy, ix) = acc;
            }
        }
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Effective magnetic field H_eff = Lap M + mu0 H_ext - psi'(M), dealiased.
pub fn effective_field(m: &SpectralField, t: f64, params: &ModelParams) -> Result<SpectralField> {
    let mut h = laplacian(m);
    if !params.hext.is_zero() {
        h.axpy(params.mu0, &params.hext.eval(m.grid(), t, params.t_final)?);
    }
    let psi_p = anisotropy_grad(&params.aniso, m)?;
    h.axpy(-1.0, &psi_p);
    Ok(dealias(&h))
}

/// Full LLG right-hand side dt M = -(u.grad)M - M x H_eff - M x (M x H_eff).
pub fn llg_rhs(state: &SimState, params: &ModelParams) -> Result<SpectralField> {
    let drift = unit_magnetization_residual(&state.m)?;
    if drift > 1e-6 {
        return Err(MvError::ConstraintDrift { residual: drift });
    }
    let h = effective_field(&state.m, state.t, params)?;
    let pm = to_physical(&state.m)?;
    let ph = to_physical(&h)?;
    let n = state.grid().n();
    let mut out = PhysicalField::zeros(state.grid(), 3);
    for iy in 0..n {
        for ix in 0..n {
            let mv = [pm.value(0, iy, ix), pm.value(1, iy, ix), pm.value(2, iy, ix)];
            let hv = [ph.value(0, iy, ix), ph.value(1, iy, ix), ph.value(2, iy, ix)];
            let mxh = cross3(mv, hv);
            let mxmxh = cross3(mv, mxh);
            for c in 0..3 {
                *out.value_mut(c, iy, ix) = -mxh[c] - mxmxh[c];
            }
        }
    }
    let mut rhs = dealias(&forward_transform(&out)?);
    rhs.axpy(-1.0, &advect(&state.u, &state.m)?);
    Ok(rhs)
}

#[inline]
fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Explicit part of dt F: -(u.grad)F + grad u F (kappa Lap F is implicit).
pub fn deformation_rhs(state: &SimState, _params: &ModelParams) -> Result<SpectralField> {
    let mut rhs = velocity_gradient_times_f(&state.u, &state.f)?;
    rhs.axpy(-1.0, &advect(&state.u, &state.f)?);
    Ok(rhs)
}

/// Explicit part of dt u before Leray projection:
/// -(u.grad)u - div(grad M (.) grad M - W'(F) F^T) + mu0 grad^T H_ext M.
pub fn momentum_rhs(state: &SimState, params: &ModelParams) -> Result<SpectralField> {
    let mut tensor = grad_m_outer(&state.m)?;
    tensor.axpy(-1.0, &elastic_stress(params, &state.f)?);
    let mut rhs = tensor_divergence(&tensor).scaled(-1.0);
    rhs.axpy(-1.0, &advect(&state.u, &state.u)?);
    if !params.hext.is_zero() && params.mu0 != 0.0 {
        let h = params.hext.eval(state.grid(), state.t, params.t_final)?;
        rhs.axpy(params.mu0, &zeeman_force(&h, &state.m)?);
    }
    Ok(dealias(&rhs))
}

/// Pressure from the momentum equation's divergence:
/// Lap p = div div (W'(F) F^T - grad M (.) grad M - u (x) u),
/// equivalently grad p is the gradient part that Leray projection removes
/// from the explicit momentum right-hand side (external field excluded).
pub fn pressure(state: &SimState, params: &ModelParams) -> Result<SpectralField> {
    let mut tensor = elastic_stress(params, &state.f)?;
    tensor.axpy(-1.0, &grad_m_outer(&state.m)?);
    tensor.axpy(-1.0, &outer_uu(&state.u)?);
    let divdiv = divergence(&tensor_divergence(&tensor));
    inverse_laplacian(&divdiv)
}

/// Pointwise renormalization M -> M/|M|, re-transformed and dealiased.
pub fn renormalize_magnetization(m: &SpectralField) -> Result<SpectralField> {
    let phys = to_physical(m)?;
    let n = m.grid().n();
    let mut min_norm = f64::INFINITY;
    let mut out = PhysicalField::zeros(m.grid(), 3);
    for iy in 0..n {
        for ix in 0..n {
            let mag = phys.magnitude(iy, ix);
            min_norm = min_norm.min(mag);
            if mag > 0.0 {
                for c in 0..3 {
                    *out.value_mut(c, iy, ix) = phys.value(c, iy, ix) / mag;
                }
            }
        }
    }
    if min_norm <= 0.5 {
        return Err(MvError::MagnetizationCollapse { min_norm });
    }
    Ok(dealias(&forward_transform(&out)?))
}

/// Crank-Nicolson diffusion update: per mode
/// ((1 - a|k|^2) old + dt * explicit) / (1 + a|k|^2), with a = dt * c / 2.
fn cn_diffuse(old: &SpectralField, explicit: &SpectralField, c: f64, dt: f64) -> SpectralField {
    let a = 0.5 * dt * c;
    let mut out = old.clone();
    let half = apply_multiplier(old, |k1, k2| {
        let ksq = (k1 * k1 + k2 * k2) as f64;
        Complex64::new(1.0 - a * ksq, 0.0)
    });
    out.coeffs_mut().copy_from_slice(half.coeffs());
    out.axpy(dt, explicit);
    apply_multiplier(&out, |k1, k2| {
        let ksq = (k1 * k1 + k2 * k2) as f64;
        Complex64::new(1.0 / (1.0 + a * ksq), 0.0)
    })
}

struct ExplicitRhs {
    u: SpectralField,
    f: SpectralField,
    m: SpectralField,
}

fn explicit_rhs(state: &SimState, params: &ModelParams) -> Result<ExplicitRhs> {
    // The Lap M part of the dissipative LLG term is stepped implicitly, so
    // subtract it from the explicit magnetization right-hand side.
    let mut m_rhs = llg_rhs(state, params)?;
    m_rhs.axpy(-1.0, &laplacian(&state.m));
    Ok(ExplicitRhs {
        u: leray_project(&momentum_rhs(state, params)?),
        f: deformation_rhs(state, params)?,
        m: m_rhs,
    })
}

/// Advance one time step with the CN/Heun IMEX scheme.
pub fn step(state: &SimState, stepper: &StepperConfig, params: &ModelParams) -> Result<SimState> {
    params.validate()?;
    let dt = stepper.dt;
    let grid = state.grid();

    // Advective CFL check.
    let umax = sup_norm_oversampled(&state.u, 1)?;
    if umax > 1e-12 {
        let limit = stepper.cfl_safety * grid.spacing() / umax;
        if dt > limit {
            return Err(MvError::StepRejected { dt, limit });
        }
    }

    let rhs0 = explicit_rhs(state, params)?;

    // Predictor: CN diffusion with the explicit terms frozen at t^n.
    let u_star = dealias(&leray_project(&cn_diffuse(&state.u, &rhs0.u, params.nu, dt)));
    let f_star = dealias(&cn_diffuse(&state.f, &rhs0.f, params.kappa, dt));
    let m_star = dealias(&cn_diffuse(&state.m, &rhs0.m, 1.0, dt));
    let predicted = SimState::new(state.t + dt, u_star, f_star, m_star, state.p.clone());
    if !predicted.is_finite() {
        return Err(MvError::NumericalBlowup { t: state.t + dt, indicator_history: Vec::new() });
    }

    // Corrector: Heun average of the explicit terms.
    let rhs1 = explicit_rhs(&predicted, params)?;
    let avg_u = rhs0.u.add(&rhs1.u).scaled(0.5);
    let avg_f = rhs0.f.add(&rhs1.f).scaled(0.5);
    let avg_m = rhs0.m.add(&rhs1.m).scaled(0.5);
    let u_new = dealias(&leray_project(&cn_diffuse(&state.u, &avg_u, params.nu, dt)));
    let f_new = dealias(&cn_diffuse(&state.f, &avg_f, params.kappa, dt));
    let mut m_new = dealias(&cn_diffuse(&state.m, &avg_m, 1.0, dt));

    let t_new = state.t + dt;
    let step_index = (t_new / dt).round() as usize;
    if step_index % stepper.renormalize_every == 0 {
        m_new = renormalize_magnetization(&m_new)?;
    }

    let mut out = SimState::new(t_new, u_new, f_new, m_new, state.p.clone());
    out.p = pressure(&out, params)?;
    if !out.is_finite() {
        return Err(MvError::NumericalBlowup { t: t_new, indicator_history: Vec::new() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
