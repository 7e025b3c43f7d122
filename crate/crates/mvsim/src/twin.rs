//! Twin-trajectory machinery: the negative-order difference energy of two
//! runs, its dissipation, the Osgood modulus and bound, and ensemble
//! verifiers for the three pairing estimates used in the continuous
//! dependence argument (convection commutator, precession cross-term,
//! elastic log-interpolation).

use crate::dynamics::{step, StepperConfig};
use crate::error::{MvError, Result};
use crate::lp::{hdot_inner, low_pass};
use crate::model::{elastic_stress_arg, ElasticModel, ModelParams, SimState};
use crate::spectral::{
    forward_transform, gradient_all, inverse_transform, laplacian, PhysicalField, SpectralField,
};

/// Split a field into its average vector and its mean-free part.
pub fn mean_split(f: &SpectralField) -> (Vec<f64>, SpectralField) {
    (f.mean(), f.remove_mean())
}

/// Squared negative-half-order seminorm (direct Fourier form, mean
/// excluded).
fn hm_half_sq(f: &SpectralField) -> f64 {
    hdot_inner(f, f, -0.5).max(0.0)
}

/// The four squared pieces of the difference energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaComponents {
    /// |mean(du)|^2.
    pub mean_u_sq: f64,
    /// ||du^h||^2 in the homogeneous -1/2 norm.
    pub u_h_sq: f64,
    /// ||dF||^2 in the homogeneous -1/2 norm.
    pub f_sq: f64,
    /// ||dM||^2 in the inhomogeneous 1/2 norm (L^2 part + homogeneous 1/2
    /// part).
    pub m_sq: f64,
}

impl DeltaComponents {
    pub fn energy(&self) -> f64 {
        0.5 * (self.mean_u_sq + self.u_h_sq + self.f_sq + self.m_sq)
    }
}

fn check_compatible(s1: &SimState, s2: &SimState) -> Result<()> {
    if s1.grid().n() != s2.grid().n() {
        return Err(MvError::IncompatibleStates(format!(
            "grid sizes differ: {} vs {}",
            s1.grid().n(),
            s2.grid().n()
        )));
    }
    if (s1.t - s2.t).abs() > 1e-12 * (1.0 + s1.t.abs()) {
        return Err(MvError::IncompatibleStates(format!(
            "times differ: {} vs {}",
            s1.t, s2.t
        )));
    }
    Ok(())
}

/// Difference energy of two same-time states:
/// half of |mean du|^2 + ||du^h||^2_{-1/2} + ||dF||^2_{-1/2}
/// + ||dM||^2_{1/2 (inhomogeneous)}.
pub fn delta_energy(s1: &SimState, s2: &SimState) -> Result<(f64, DeltaComponents)> {
    check_compatible(s1, s2)?;
    let du = s1.u.sub(&s2.u);
    let df = s1.f.sub(&s2.f);
    let dm = s1.m.sub(&s2.m);
    let (mean_u, du_h) = mean_split(&du);
    let comps = DeltaComponents {
        mean_u_sq: mean_u.iter().map(|v| v * v).sum(),
        u_h_sq: hm_half_sq(&du_h),
        f_sq: hm_half_sq(&df),
        m_sq: dm.l2_norm_sq() + hdot_inner(&dm, &dm, 0.5).max(0.0),
    };
    Ok((comps.energy(), comps))
}

/// Difference dissipation:
/// nu ||grad du||^2_{-1/2} + kappa ||grad dF||^2_{-1/2}
/// + ||Lap dM||^2_{-1/2}.
pub fn delta_dissipation(s1: &SimState, s2: &SimState, params: &ModelParams) -> Result<f64> {
    check_compatible(s1, s2)?;
    let du = s1.u.sub(&s2.u);
    let df = s1.f.sub(&s2.f);
    let dm = s1.m.sub(&s2.m);
    Ok(params.nu * hm_half_sq(&gradient_all(&du))
        + params.kappa * hm_half_sq(&gradient_all(&df))
        + hm_half_sq(&laplacian(&dm)))
}

/// Osgood modulus mu(r) = r (1 + ln(1 + 1/r)), extended by mu(0) = 0.
pub fn osgood_modulus(r: f64) -> Result<f64> {
    if r < 0.0 || !r.is_finite() {
        return Err(MvError::InvalidArgument(format!(
            "modulus argument must be nonnegative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(r * (1.0 + (1.0 / r).ln_1p()))
}

/// Quadrature of int_a^b dr / mu(r) (log substitution; the integrand is
/// smooth in s = ln(1/r)).
pub fn osgood_integral(a: f64, b: f64) -> Result<f64> {
    if !(0.0 < a && a < b) {
        return Err(MvError::InvalidArgument(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    // r = e^{-s}: int dr / mu(r) = int ds / (1 + ln(1 + e^{s})).
    let s_lo = (1.0 / b).ln();
    let s_hi = (1.0 / a).ln();
    let steps = 20_000usize;
    let h = (s_hi - s_lo) / steps as f64;
    let g = |s: f64| {
        // ln(1 + e^s) computed stably for large s.
        let l = if s > 30.0 { s } else { s.exp().ln_1p() }; // ln(1 + e^s)
        1.0 / (1.0 + l)
    };
    let mut acc = 0.5 * (g(s_lo) + g(s_hi));
    for i in 1..steps {
        acc += g(s_lo + i as f64 * h);
    }
    Ok(acc * h)
}

/// Marker for a twin run that ended early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwinEvent {
    /// One trajectory stopped integrating (index 0 or 1) at time t.
    Blowup { which: usize, t: f64 },
}

/// Lockstep record of the difference energy and dissipation of two runs.
#[derive(Debug, Clone)]
pub struct DeltaEnergyTrace {
    pub times: Vec<f64>,
    pub delta_e: Vec<f64>,
    pub delta_d: Vec<f64>,
    pub components: Vec<DeltaComponents>,
    pub event: Option<TwinEvent>,
}

/// Advance two states in lockstep with the same stepper, recording the
/// difference energy and dissipation at every step. A blow-up in either
/// trajectory ends the trace with an event marker instead of an error.
pub fn twin_run(
    s1: SimState,
    s2: SimState,
    params: &ModelParams,
    stepper: &StepperConfig,
    steps: usize,
) -> Result<DeltaEnergyTrace> {
    check_compatible(&s1, &s2)?;
    let mut a = s1;
    let mut b = s2;
    let mut trace = DeltaEnergyTrace {
        times: Vec::with_capacity(steps + 1),
        delta_e: Vec::with_capacity(steps + 1),
        delta_d: Vec::with_capacity(steps + 1),
        components: Vec::with_capacity(steps + 1),
        event: None,
    };
    let record = |a: &SimState, b: &SimState, trace: &mut DeltaEnergyTrace| -> Result<()> {
        let (e, comps) = delta_energy(a, b)?;
        trace.times.push(a.t);
        trace.delta_e.push(e);
        trace.delta_d.push(delta_dissipation(a, b, params)?);
        trace.components.push(comps);
        Ok(())
    };
    record(&a, &b, &mut trace)?;
    for _ in 0..steps {
        let na = match step(&a, stepper, params) {
            Ok(s) => s,
            Err(MvError::NumericalBlowup { t, .. }) => {
                trace.event = Some(TwinEvent::Blowup { which: 0, t });
                return Ok(trace);
            }
            Err(MvError::StepRejected { .. }) => {
                trace.event = Some(TwinEvent::Blowup { which: 0, t: a.t });
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        let nb = match step(&b, stepper, params) {
            Ok(s) => s,
            Err(MvError::NumericalBlowup { t, .. }) => {
                trace.event = Some(TwinEvent::Blowup { which: 1, t });
                return Ok(trace);
            }
            Err(MvError::StepRejected { .. }) => {
                trace.event = Some(TwinEvent::Blowup { which: 1, t: b.t });
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        a = na;
        b = nb;
        record(&a, &b, &mut trace)?;
    }
    Ok(trace)
}

/// Discrete surrogate for the Osgood density: the minimal stepwise
/// f(s) >= 0 with
///   dE(s + dt) - dE(s) + int_s^{s+dt} dD <= dt f(s) mu(dE(s)).
#[derive(Debug, Clone)]
pub struct OsgoodReport {
    pub f_hat: Vec<f64>,
    /// Trapezoid-free (rectangle) integral of f_hat over the trace.
    pub f_integral: f64,
    /// True when the whole trace had dE = 0 (the bound is vacuous).
    pub vacuous: bool,
}

pub fn osgood_bound_check(trace: &DeltaEnergyTrace) -> Result<OsgoodReport> {
    let n = trace.times.len();
    if n < 2 {
        return Err(MvError::InvalidArgument("trace needs at least two samples".into()));
    }
    let mut f_hat = Vec::with_capacity(n - 1);
    let mut integral = 0.0;
    let mut any_positive = false;
    for i in 0..n - 1 {
        let dt = trace.times[i + 1] - trace.times[i];
        let e = trace.delta_e[i];
        let mu = osgood_modulus(e)?;
        // Windows where the energy vanishes exactly contribute nothing (the
        // inequality restarts from zero there).
        let f = if mu == 0.0 {
            0.0
        } else {
            any_positive = true;
            let diss = 0.5 * dt * (trace.delta_d[i] + trace.delta_d[i + 1]);
            ((trace.delta_e[i + 1] - e + diss) / (dt * mu)).max(0.0)
        };
        integral += f * dt;
        f_hat.push(f);
    }
    Ok(OsgoodReport { f_hat, f_integral: integral, vacuous: !any_positive })
}

// ---------------------------------------------------------------------------
// Pairing estimates.
// ---------------------------------------------------------------------------

/// Pointwise product of a scalar spectral field and one component of
/// another, without dealiasing.
fn grid_mul(
    a: &PhysicalField,
    ca: usize,
    b: &PhysicalField,
    cb: usize,
    out: &mut PhysicalField,
    co: usize,
    add: bool,
) {
    let n = out.grid.n();
    for iy in 0..n {
        for ix in 0..n {
            let v = a.value(ca, iy, ix) * b.value(cb, iy, ix);
            let slot = out.value_mut(co, iy, ix);
            if add {
                *slot += v;
            } else {
                *slot = v;
            }
        }
    }
}

/// v . grad B computed by pointwise products of the physical fields
/// (no dealiasing — these checks pair exact grid quantities).
fn convect(v: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    assert_eq!(v.components(), 2);
    let pv = inverse_transform(v)?;
    let gb = inverse_transform(&gradient_all(b))?;
    let mut out = PhysicalField::zeros(b.grid(), b.components());
    for c in 0..b.components() {
        grid_mul(&pv, 0, &gb, 2 * c, &mut out, c, false);
        grid_mul(&pv, 1, &gb, 2 * c + 1, &mut out, c, true);
    }
    forward_transform(&out)
}

/// Ratio |<v . grad B, B>_{-1/2}| / (||grad v||_{L^2} ||grad B||_{-1/2}
/// ||B||_{-1/2}) for mean-free divergence-free v and mean-free B.
pub fn convection_commutator_check(v: &SpectralField, b: &SpectralField) -> Result<f64> {
    let div_res = crate::spectral::divergence(v).l2_norm();
    if div_res > 1e-10 {
        return Err(MvError::NotSolenoidal { residual: div_res });
    }
    if !v.is_mean_free(1e-12) || !b.is_mean_free(1e-12) {
        return Err(MvError::MeanNotZero { mean: 0.0 });
    }
    let lhs = hdot_inner(&convect(v, b)?, b, -0.5).abs();
    let den = gradient_all(v).l2_norm()
        * hm_half_sq(&gradient_all(b)).sqrt()
        * hm_half_sq(b).sqrt();
    Ok(if den == 0.0 { 0.0 } else { lhs / den })
}

/// Pointwise 3D cross product of physical fields.
fn cross_product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    assert_eq!(a.components(), 3);
    assert_eq!(b.components(), 3);
    let pa = inverse_transform(a)?;
    let pb = inverse_transform(b)?;
    let n = a.grid().n();
    let mut out = PhysicalField::zeros(a.grid(), 3);
    for iy in 0..n {
        for ix in 0..n {
            let av = [pa.value(0, iy, ix), pa.value(1, iy, ix), pa.value(2, iy, ix)];
            let bv = [pb.value(0, iy, ix), pb.value(1, iy, ix), pb.value(2, iy, ix)];
            *out.value_mut(0, iy, ix) = av[1] * bv[2] - av[2] * bv[1];
            *out.value_mut(1, iy, ix) = av[2] * bv[0] - av[0] * bv[2];
            *out.value_mut(2, iy, ix) = av[0] * bv[1] - av[1] * bv[0];
        }
    }
    forward_transform(&out)
}

/// Smallest constant C with
/// |<M2^h x Lap dM, Lap dM>_{-1/2}|
///   <= C (1 + ||grad M2||^2)||Lap M2||^2 ||grad dM||^2_{-1/2}
///      + eps ||Lap dM||^2_{-1/2},   eps = 1/4 fixed.
pub fn precession_paraproduct_check(m2: &SpectralField, delta_m: &SpectralField) -> Result<f64> {
    const EPS: f64 = 0.25;
    let (_, m2_h) = mean_split(m2);
    let lap_dm = laplacian(delta_m);
    let lhs = hdot_inner(&cross_product(&m2_h, &lap_dm)?, &lap_dm, -0.5).abs();
    let damping = EPS * hm_half_sq(&lap_dm);
    let body = (1.0 + gradient_all(m2).l2_norm_sq())
        * laplacian(m2).l2_norm_sq()
        * hm_half_sq(&gradient_all(delta_m));
    if body == 0.0 {
        return Ok(if lhs <= damping { 0.0 } else { f64::INFINITY });
    }
    Ok(((lhs - damping) / body).max(0.0))
}

/// Frequency cutoff index of the log-interpolation estimate:
/// N = ceil(2 log2(e) ln(1 + 1/dE)).
pub fn log_cutoff_index(delta_e: f64) -> i32 {
    (2.0 * std::f64::consts::LOG2_E * (1.0 + 1.0 / delta_e).ln()).ceil() as i32
}

fn h1_norm_sq(f: &SpectralField) -> f64 {
    f.l2_norm_sq() + gradient_all(f).l2_norm_sq()
}

/// A B^T for 4-component row-major matrix fields: (i, j) = sum_k A_ik B_jk.
fn mat_mul_transpose(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    assert_eq!(a.components(), 4);
    assert_eq!(b.components(), 4);
    let pa = inverse_transform(a)?;
    let pb = inverse_transform(b)?;
    let n = a.grid().n();
    let mut out = PhysicalField::zeros(a.grid(), 4);
    for iy in 0..n {
        for ix in 0..n {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..2 {
                        acc += pa.value(2 * i + k, iy, ix) * pb.value(2 * j + k, iy, ix);
                    }
                    *out.value_mut(2 * i + j, iy, ix) = acc;
                }
            }
        }
    }
    forward_transform(&out)
}

/// Outcome of the elastic log-interpolation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimateReport {
    pub lhs: f64,
    /// Body of the right-hand side multiplying the fitted constant (the
    /// dE ln(1 + 1/dE) group plus the plain dE group).
    pub rhs_body: f64,
    /// The fixed eps-damping terms (eps = 1/4).
    pub damping: f64,
    pub fitted_c: f64,
    /// Cutoff index used for the low/high frequency split of the first
    /// elastic factor.
    pub cutoff: i32,
}

/// Evaluates |<dW'(F) F1^T + W'(F2) dF^T, grad du>_{-1/2}| against the
/// log-interpolation right-hand side with eps = 1/4, using the
/// low/high-frequency split of F1 at the energy-dependent cutoff index.
/// Returns the smallest passing constant. Degenerate (dE = 0) inputs are
/// skipped with a zero report.
pub fn elastic_log_estimate_check(
    state1: &SimState,
    state2: &SimState,
    elastic: &ElasticModel,
    delta_e: f64,
) -> Result<LogEstimateReport> {
    const EPS: f64 = 0.25;
    check_compatible(state1, state2)?;
    if delta_e <= 0.0 {
        return Ok(LogEstimateReport { lhs: 0.0, rhs_body: 0.0, damping: 0.0, fitted_c: 0.0, cutoff: 0 });
    }
    let cutoff = log_cutoff_index(delta_e);
    let df = state1.f.sub(&state2.f);
    let du = state1.u.sub(&state2.u);
    let dwp = elastic_stress_arg(elastic, &state1.f)?.sub(&elastic_stress_arg(elastic, &state2.f)?);
    // Split the first factor at the cutoff: dW'(F)(S_N F1)^T carries the
    // low frequencies, dW'(F)((Id - S_N) F1)^T the remainder; their sum is
    // the full pairing.
    let f1_low = low_pass(&state1.f, cutoff);
    let f1_high = state1.f.sub(&f1_low);
    let grad_du = gradient_all(&du);
    let pairing = |tensor: &SpectralField| hdot_inner(tensor, &grad_du, -0.5);
    let low_part = pairing(&mat_mul_transpose(&dwp, &f1_low)?);
    let high_part = pairing(&mat_mul_transpose(&dwp, &f1_high)?);
    let second = pairing(&mat_mul_transpose(&elastic_stress_arg(elastic, &state2.f)?, &df)?);
    let lhs = (low_part + high_part + second).abs();

    let f2_l2 = state2.f.l2_norm();
    let ff_h1 = h1_norm_sq(&state1.f) + h1_norm_sq(&state2.f);
    let all_h1 =
        (ff_h1 + h1_norm_sq(&state1.u) + h1_norm_sq(&state2.u)).sqrt().powf(1.5);
    let log_factor = (1.0 + 1.0 / delta_e).ln();
    let group1 = (1.0 + f2_l2).powi(6) * ff_h1 * delta_e * log_factor;
    let group2 = (all_h1 + (1.0 + f2_l2).powi(6) * ff_h1) * delta_e;
    let rhs_body = group1 + group2;
    let damping = EPS * (hm_half_sq(&grad_du) + hm_half_sq(&gradient_all(&df)));
    let fitted_c = if rhs_body > 0.0 { ((lhs - damping) / rhs_body).max(0.0) } else { 0.0 };
    Ok(LogEstimateReport { lhs, rhs_body, damping, fitted_c, cutoff })
}
