//! Scalar and local diagnostics: energy balances, dissipation terms,
//! Gronwall budgets, the blow-up indicator, the localized interpolation
//! (concentration-compactness) constant, and the local-energy singularity
//! scanner.
//!
//! Every unnamed constant appearing in the verified inequalities is a
//! *fitted, reported* quantity — the smallest value making the inequality
//! pass over the supplied data — never an assumed one.

use crate::dynamics::{effective_field, llg_rhs, pressure};
use crate::error::{MvError, Result};
use crate::model::{
    anisotropy, anisotropy_grad, elastic_energy, elastic_stress_arg, integral, ModelParams,
    SimState,
};
use crate::spectral::{
    forward_transform, gradient_all, inverse_transform, laplacian, Grid, PhysicalField,
    SpectralField, TWO_PI,
};
use rayon::prelude::*;

/// All scalar energy/dissipation quantities of one state, plus the auxiliary
/// norms the budget checks consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    /// (1/2) int |u|^2.
    pub kinetic: f64,
    /// int W(F).
    pub elastic: f64,
    /// (1/2) int |grad M|^2.
    pub exchange: f64,
    /// int psi(M).
    pub aniso: f64,
    /// -mu0 int M . H_ext.
    pub zeeman: f64,
    /// nu int |grad u|^2.
    pub diss_u: f64,
    /// kappa int grad F : grad W'(F).
    pub diss_f: f64,
    /// int (|H_eff|^2 - (M . H_eff)^2).
    pub diss_m: f64,
    /// kinetic + elastic + exchange + aniso.
    pub e_total: f64,
    // Auxiliary norms (all L^2 squared) used by the budget checks.
    pub u_sq: f64,
    pub f_sq: f64,
    pub grad_m_sq: f64,
    pub grad_u_sq: f64,
    pub grad_f_sq: f64,
    pub lap_m_sq: f64,
    /// mu0 int dtM . H_ext — the Zeeman work rate entering the fitted
    /// energy-law constant.
    pub hext_work_rate: f64,
}

impl EnergyReport {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.kinetic,
            self.elastic,
            self.exchange,
            self.aniso,
            self.zeeman,
            self.diss_u,
            self.diss_f,
            self.diss_m,
            self.e_total,
            self.u_sq,
            self.f_sq,
            self.grad_m_sq,
            self.grad_u_sq,
            self.grad_f_sq,
            self.lap_m_sq,
            self.hext_work_rate,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Quadrature of a pointwise function of several physical fields.
fn quad2(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let n = grid.n();
    let mut acc = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            acc += f(iy, ix);
        }
    }
    acc * grid.cell_area()
}

/// Cumulative trapezoid integral of uniformly sampled values.
pub fn cumtrapz(dt: f64, values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Full energy/dissipation report of one state.
pub fn energy_report(state: &SimState, params: &ModelParams) -> Result<EnergyReport> {
    let grid = state.grid();
    let gu = gradient_all(&state.u);
    let gf = gradient_all(&state.f);
    let gm = gradient_all(&state.m);
    let lap_m = laplacian(&state.m);

    let kinetic = 0.5 * state.u.l2_norm_sq();
    let elastic = integral(&elastic_energy(&params.elastic, &state.f)?, 0);
    let exchange = 0.5 * gm.l2_norm_sq();
    let aniso_e = integral(&anisotropy(&params.aniso, &state.m)?, 0);

    let diss_u = params.nu * gu.l2_norm_sq();
    let diss_f = params.kappa * gf.l2_inner(&gradient_all(&elastic_stress_arg(
        &params.elastic,
        &state.f,
    )?));

    // Magnetic dissipation |H_eff|^2 - (M . H_eff)^2 by pointwise quadrature.
    let h = effective_field(&state.m, state.t, params)?;
    let ph = inverse_transform(&h)?;
    let pm = inverse_transform(&state.m)?;
    let diss_m = quad2(grid, |iy, ix| {
        let mut hh = 0.0;
        let mut mh = 0.0;
        for c in 0..3 {
            hh += ph.value(c, iy, ix) * ph.value(c, iy, ix);
            mh += pm.value(c, iy, ix) * ph.value(c, iy, ix);
        }
        hh - mh * mh
    });

    let (zeeman, hext_work_rate) = if params.hext.is_zero() || params.mu0 == 0.0 {
        (0.0, 0.0)
    } else {
        let hx = params.hext.eval(grid, state.t, params.t_final)?;
        let work = params.mu0 * llg_rhs(state, params)?.l2_inner(&hx);
        (-params.mu0 * state.m.l2_inner(&hx), work)
    };

    let report = EnergyReport {
        t: state.t,
        kinetic,
        elastic,
        exchange,
        aniso: aniso_e,
        zeeman,
        diss_u,
        diss_f,
        diss_m,
        e_total: kinetic + elastic + exchange + aniso_e,
        u_sq: state.u.l2_norm_sq(),
        f_sq: state.f.l2_norm_sq(),
        grad_m_sq: gm.l2_norm_sq(),
        grad_u_sq: gu.l2_norm_sq(),
        grad_f_sq: gf.l2_norm_sq(),
        lap_m_sq: lap_m.l2_norm_sq(),
        hext_work_rate,
    };
    if !report.is_finite() {
        return Err(MvError::InvalidField);
    }
    Ok(report)
}

/// Forcing constant K = 2 mu0 (||H_ext||_inf + T ||dt H_ext||_inf).
pub fn forcing_constant(params: &ModelParams) -> f64 {
    let norms = params.hext.sup_norms(params.t_final);
    2.0 * params.mu0.abs() * (norms.h_sup + params.t_final * norms.dt_h_sup)
}

/// Default slack for the global energy inequality.
pub fn energy_inequality_slack(e0: f64, k: f64) -> f64 {
    1e-6 * (1.0 + 2.0 * e0 + k)
}

/// Residual time series of the energy inequality
///   2 E_total(t) + 2 int_0^t (diss_u + diss_M) <= 2 E_0 + K.
/// Negative (or slack-small) residuals mean the inequality holds.
pub fn energy_inequality_residual(reports: &[EnergyReport], params: &ModelParams) -> Vec<f64> {
    if reports.is_empty() {
        return Vec::new();
    }
    let e0 = reports[0].e_total;
    let k = forcing_constant(params);
    let dt = if reports.len() > 1 { reports[1].t - reports[0].t } else { 0.0 };
    let diss: Vec<f64> = reports.iter().map(|r| r.diss_u + r.diss_m).collect();
    let cum = cumtrapz(dt, &diss);
    reports
        .iter()
        .zip(cum)
        .map(|(r, d)| 2.0 * r.e_total + 2.0 * d - (2.0 * e0 + k))
        .collect()
}

/// Gronwall budget L = 2 E0 exp(C E0) for the deformation gradient.
pub fn gradf_budget(e0: f64, c: f64) -> f64 {
    2.0 * e0 * (c * e0).exp()
}

/// Outcome of the deformation-gradient Gronwall check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradFCheck {
    /// Smallest constant C making
    /// int_0^t ||grad F||^2 <= ||F_0||^2 exp(C int_0^t ||grad u||^2) for
    /// all t along the run.
    pub fitted_c: f64,
    pub pass: bool,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub fn gradf_check(reports: &[EnergyReport]) -> GradFCheck {
    if reports.len() < 2 {
        return GradFCheck { fitted_c: 0.0, pass: true, lhs: Vec::new(), rhs: Vec::new() };
    }
    let dt = reports[1].t - reports[0].t;
    let f0_sq = reports[0].f_sq;
    let lhs = cumtrapz(dt, &reports.iter().map(|r| r.grad_f_sq).collect::<Vec<_>>());
    let gu = cumtrapz(dt, &reports.iter().map(|r| r.grad_u_sq).collect::<Vec<_>>());
    // Smallest C with lhs(t) <= f0_sq * exp(C * gu(t)):
    //   C >= ln(lhs / f0_sq) / gu wherever lhs > f0_sq.
    let mut fitted_c = 0.0f64;
    let mut pass = true;
    for (&l, &g) in lhs.iter().zip(&gu) {
        if l <= f0_sq || l <= 0.0 {
            continue;
        }
        if g <= 0.0 || f0_sq <= 0.0 {
            pass = false; // no finite C can make it hold
            continue;
        }
        fitted_c = fitted_c.max((l / f0_sq).ln() / g);
    }
    let rhs: Vec<f64> = gu.iter().map(|&g| f0_sq * (fitted_c * g).exp()).collect();
    GradFCheck { fitted_c, pass, lhs, rhs }
}

/// Blow-up indicator pair (Q, B):
/// Q = ||grad u||^2 + ||grad F||^2 + ||Lap M||^2 and
/// B = (1 + ||u||^2 + ||F||^2 + ||grad M||^2)(1 + Q)^2, the envelope whose
/// integrability controls dQ/dt.
pub fn blowup_indicator(state: &SimState, _params: &ModelParams) -> (f64, f64) {
    let q = gradient_all(&state.u).l2_norm_sq()
        + gradient_all(&state.f).l2_norm_sq()
        + laplacian(&state.m).l2_norm_sq();
    let b = (1.0 + state.u.l2_norm_sq() + state.f.l2_norm_sq()
        + gradient_all(&state.m).l2_norm_sq())
        * (1.0 + q).powi(2);
    (q, b)
}

// ---------------------------------------------------------------------------
// Local (ball-restricted) energies.
// ---------------------------------------------------------------------------

/// Torus distance between x and y (componentwise wrap into [-pi, pi]).
pub fn torus_distance(x: (f64, f64), y: (f64, f64)) -> f64 {
    let wrap = |d: f64| {
        let mut d = d.rem_euclid(TWO_PI);
        if d > TWO_PI / 2.0 {
            d = TWO_PI - d;
        }
        d
    };
    let dx = wrap(x.0 - y.0);
    let dy = wrap(x.1 - y.1);
    (dx * dx + dy * dy).sqrt()
}

/// Smooth monotone bridge: 1 at t <= 0, 0 at t >= 1, C-infinity in between.
fn smooth_step_down(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let g = |s: f64| (-1.0 / s).exp();
    g(1.0 - t) / (g(1.0 - t) + g(t))
}

/// Smooth radial cutoff: 1 inside radius r_in of x0, 0 outside r_out.
pub fn ball_cutoff(grid: Grid, x0: (f64, f64), r_in: f64, r_out: f64) -> PhysicalField {
    let n = grid.n();
    let mut out = PhysicalField::zeros(grid, 1);
    for iy in 0..n {
        for ix in 0..n {
            let d = torus_distance((grid.coord(ix), grid.coord(iy)), x0);
            *out.value_mut(0, iy, ix) = smooth_step_down((d - r_in) / (r_out - r_in));
        }
    }
    out
}

/// Pointwise |grad M|^2 on the grid.
fn grad_sq_density(m: &SpectralField) -> Result<PhysicalField> {
    let g = inverse_transform(&gradient_all(m))?;
    let n = m.grid().n();
    let mut out = PhysicalField::zeros(m.grid(), 1);
    for iy in 0..n {
        for ix in 0..n {
            let mut acc = 0.0;
            for c in 0..g.components {
                acc += g.value(c, iy, ix) * g.value(c, iy, ix);
            }
            *out.value_mut(0, iy, ix) = acc;
        }
    }
    Ok(out)
}

fn check_radius(r: f64) -> Result<()> {
    let hi = TWO_PI / 2.0;
    if !(r > 0.0 && r < hi) {
        return Err(MvError::InvalidRadius { r, lo: 0.0, hi });
    }
    Ok(())
}

/// Ball integral of a density with a mollified indicator (one-cell
/// transition width centered on the sphere of radius r).
fn ball_integral(density: &PhysicalField, x0: (f64, f64), r: f64) -> f64 {
    let grid = density.grid;
    let h = grid.spacing();
    let mask = ball_cutoff(grid, x0, r - 0.5 * h, r + 0.5 * h);
    quad2(grid, |iy, ix| density.value(0, iy, ix) * mask.value(0, iy, ix))
}

/// Local exchange energy int_{B_r(x0)} |grad M|^2 with a mollified ball
/// indicator.
pub fn local_energy(m: &SpectralField, x0: (f64, f64), r: f64) -> Result<f64> {
    check_radius(r)?;
    let density = grad_sq_density(m)?;
    Ok(ball_integral(&density, x0, r))
}

/// Ball-restricted exchange energy evaluated on a strided grid of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergyScan {
    pub r: f64,
    pub centers: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub max_value: f64,
    pub argmax: (f64, f64),
}

pub fn local_energy_scan(m: &SpectralField, r: f64, stride: usize) -> Result<LocalEnergyScan> {
    check_radius(r)?;
    let stride = stride.max(1);
    let grid = m.grid();
    let n = grid.n();
    let density = grad_sq_density(m)?;
    let centers: Vec<(f64, f64)> = (0..n)
        .step_by(stride)
        .flat_map(|iy| (0..n).step_by(stride).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| (grid.coord(ix), grid.coord(iy)))
        .collect();
    let values: Vec<f64> = centers
        .par_iter()
        .map(|&c| ball_integral(&density, c, r))
        .collect();
    let (mut max_value, mut argmax) = (f64::NEG_INFINITY, centers[0]);
    for (&v, &c) in values.iter().zip(&centers) {
        if v > max_value {
            max_value = v;
            argmax = c;
        }
    }
    Ok(LocalEnergyScan { r, centers, values, max_value, argmax })
}

/// Generic scan of an arbitrary multi-component field's pointwise squared
/// magnitude (used for the localized interpolation inequality, where the
/// test field is not a magnetization gradient).
fn sup_local_mass(f: &SpectralField, r: f64, stride: usize) -> Result<f64> {
    let phys = inverse_transform(f)?;
    let grid = f.grid();
    let n = grid.n();
    let mut density = PhysicalField::zeros(grid, 1);
    for iy in 0..n {
        for ix in 0..n {
            let mut acc = 0.0;
            for c in 0..f.components() {
                acc += phys.value(c, iy, ix) * phys.value(c, iy, ix);
            }
            *density.value_mut(0, iy, ix) = acc;
        }
    }
    let centers: Vec<(f64, f64)> = (0..n)
        .step_by(stride.max(1))
        .flat_map(|iy| (0..n).step_by(stride.max(1)).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| (grid.coord(ix), grid.coord(iy)))
        .collect();
    Ok(centers
        .par_iter()
        .map(|&c| ball_integral(&density, c, r))
        .fold(|| 0.0f64, f64::max)
        .reduce(|| 0.0f64, f64::max))
}

// ---------------------------------------------------------------------------
// Localized interpolation (L^4) inequality and the small-energy machinery.
// ---------------------------------------------------------------------------

/// Ratio int |f|^4 / [ (sup_x int_{B_r(x)} |f|^2) (int |grad f|^2
/// + r^{-2} int |f|^2) ] for one field; 0 for the zero field.
pub fn struwe_ratio(f: &SpectralField, r: f64) -> Result<f64> {
    check_radius(r)?;
    let phys = inverse_transform(f)?;
    let grid = f.grid();
    let l4 = quad2(grid, |iy, ix| {
        let mut acc = 0.0;
        for c in 0..f.components() {
            acc += phys.value(c, iy, ix) * phys.value(c, iy, ix);
        }
        acc * acc
    });
    if l4 == 0.0 {
        return Ok(0.0);
    }
    let stride = (grid.n() / 16).max(1);
    let sup_local = sup_local_mass(f, r, stride)?;
    let denom = sup_local
        * (gradient_all(f).l2_norm_sq() + f.l2_norm_sq() / (r * r));
    Ok(l4 / denom)
}

/// Empirical lower bound for the interpolation constant over a random
/// ensemble, with all observed ratios reported.
#[derive(Debug, Clone, PartialEq)]
pub struct StruweCheck {
    pub c1: f64,
    pub ratios: Vec<f64>,
}

pub fn struwe_interpolation_check(
    grid: Grid,
    components: usize,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<StruweCheck> {
    check_radius(r)?;
    let kmax = (grid.n() as i64 / 4).max(1);
    let ratios: Vec<f64> = (0..trials as u64)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| {
            // Mix broad- and narrow-band fields so concentration at several
            // scales is represented.
            let k = 1 + (i as i64 % kmax);
            let f = crate::presets::random_smooth(grid, components, k, seed.wrapping_add(i));
            struwe_ratio(&f, r)
        })
        .collect::<Result<_>>()?;
    let c1 = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(StruweCheck { c1, ratios })
}

/// Energy-loss quantum derived from the fitted interpolation constant.
pub fn epsilon1(c1: f64) -> f64 {
    1.0 / (4.0 * c1)
}

/// Outcome of the small-local-energy dissipation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallEnergyReport {
    /// sup over time and centers of the local exchange energy at radius 2r.
    pub gate_sup: f64,
    pub eps1: f64,
    /// Whether the smallness precondition held (check skipped otherwise).
    pub applicable: bool,
    /// int_0^T (||grad u||^2 + ||Lap M||^2).
    pub lhs: f64,
    /// (1 + T r^{-2})(2 E0 + K) + ||H_ext||^2_{L^2 L^2} + T.
    pub budget_bracket: f64,
    /// lhs / bracket — the smallest constant C making the bound pass.
    pub fitted_c: f64,
}

/// Time integral of ||H_ext(t)||^2_{L^2} by sampled trapezoid rule.
pub fn hext_l2l2_sq(params: &ModelParams, grid: Grid) -> Result<f64> {
    if params.hext.is_zero() {
        return Ok(0.0);
    }
    let nt = 101;
    let dt = params.t_final / (nt - 1) as f64;
    let vals: Vec<f64> = (0..nt)
        .map(|i| {
            let t = i as f64 * dt;
            Ok(params.hext.eval(grid, t, params.t_final)?.l2_norm_sq())
        })
        .collect::<Result<_>>()?;
    Ok(*cumtrapz(dt, &vals).last().unwrap())
}

pub fn small_energy_bound_check(
    states: &[SimState],
    params: &ModelParams,
    r: f64,
    c1: f64,
) -> Result<SmallEnergyReport> {
    check_radius(2.0 * r)?;
    assert!(states.len() >= 2, "need a trajectory");
    let grid = states[0].grid();
    let dt = states[1].t - states[0].t;
    let t_span = states.last().unwrap().t - states[0].t;
    let stride = (grid.n() / 16).max(1);

    let mut gate_sup = 0.0f64;
    let mut diss = Vec::with_capacity(states.len());
    for s in states {
        gate_sup = gate_sup.max(local_energy_scan(&s.m, 2.0 * r, stride)?.max_value);
        diss.push(gradient_all(&s.u).l2_norm_sq() + laplacian(&s.m).l2_norm_sq());
    }
    let eps1 = epsilon1(c1);
    let applicable = gate_sup < eps1;

    let lhs = *cumtrapz(dt, &diss).last().unwrap();
    let e0 = energy_report(&states[0], params)?.e_total;
    let k = forcing_constant(params);
    let bracket = (1.0 + t_span / (r * r)) * (2.0 * e0 + k)
        + hext_l2l2_sq(params, grid)?
        + t_span;
    Ok(SmallEnergyReport {
        gate_sup,
        eps1,
        applicable,
        lhs,
        budget_bracket: bracket,
        fitted_c: if bracket > 0.0 { lhs / bracket } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Local energy inequality (cutoff form) along a trajectory.
// ---------------------------------------------------------------------------

/// Termwise evaluation of the cutoff local-energy inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergyResidual {
    /// Smallest constant multiplying the right-hand-side integrals that
    /// makes the inequality hold along the whole trajectory.
    pub fitted_c: f64,
    /// left(t) - right(t) evaluated with `fitted_c` (<= 0 by construction
    /// wherever the fit is active).
    pub residuals: Vec<f64>,
    pub lhs: Vec<f64>,
    /// Cutoff-weighted initial energy (the right-hand side at t = 0).
    pub rhs_base: f64,
    /// Cumulative right-hand-side integral multiplying the constant.
    pub rhs_integral: Vec<f64>,
    pub pass: bool,
}

struct CutoffWeights {
    phi_sq: PhysicalField,
    phi_grad_phi: PhysicalField,
    grad_sq_plus_hess: PhysicalField,
}

fn cutoff_weights(grid: Grid, x0: (f64, f64), r: f64) -> Result<CutoffWeights> {
    let phi = ball_cutoff(grid, x0, r, 2.0 * r);
    let phi_spec = forward_transform(&phi)?;
    let grad = inverse_transform(&gradient_all(&phi_spec))?;
    let hess = inverse_transform(&gradient_all(&gradient_all(&phi_spec)))?;
    let n = grid.n();
    let mut phi_sq = PhysicalField::zeros(grid, 1);
    let mut phi_grad_phi = PhysicalField::zeros(grid, 1);
    let mut grad_sq_plus_hess = PhysicalField::zeros(grid, 1);
    for iy in 0..n {
        for ix in 0..n {
            let p = phi.value(0, iy, ix);
            let g2 = grad.value(0, iy, ix).powi(2) + grad.value(1, iy, ix).powi(2);
            let mut h2 = 0.0;
            for c in 0..4 {
                h2 += hess.value(c, iy, ix).powi(2);
            }
            *phi_sq.value_mut(0, iy, ix) = p * p;
            *phi_grad_phi.value_mut(0, iy, ix) = p.abs() * g2.sqrt();
            *grad_sq_plus_hess.value_mut(0, iy, ix) = g2 + p.abs() * h2.sqrt();
        }
    }
    Ok(CutoffWeights { phi_sq, phi_grad_phi, grad_sq_plus_hess })
}

/// Instantaneous integrands of the cutoff inequality for one state.
struct LocalTerms {
    /// int (|u|^2 + chi |F|^2 + |grad M|^2) phi^2.
    energy: f64,
    /// int (nu |grad u|^2 + kappa chi |grad F|^2
    ///      + |Lap M + |grad M|^2 M|^2) phi^2.
    dissipation: f64,
    /// Sum of the five right-hand-side integrand groups.
    rhs_rate: f64,
}

fn local_terms(
    state: &SimState,
    params: &ModelParams,
    w: &CutoffWeights,
) -> Result<LocalTerms> {
    let grid = state.grid();
    let chi = params.elastic.chi();
    let pu = inverse_transform(&state.u)?;
    let pf = inverse_transform(&state.f)?;
    let pm = inverse_transform(&state.m)?;
    let pgu = inverse_transform(&gradient_all(&state.u))?;
    let pgf = inverse_transform(&gradient_all(&state.f))?;
    let pgm = inverse_transform(&gradient_all(&state.m))?;
    let plm = inverse_transform(&laplacian(&state.m))?;
    let pp = inverse_transform(&pressure(state, params)?)?;
    let pwp = inverse_transform(&elastic_stress_arg(&params.elastic, &state.f)?)?;
    let ppsi = inverse_transform(&anisotropy_grad(&params.aniso, &state.m)?)?;
    let hext_terms = if params.hext.is_zero() {
        None
    } else {
        let h = params.hext.eval(grid, state.t, params.t_final)?;
        Some((inverse_transform(&h)?, inverse_transform(&gradient_all(&h))?))
    };

    let sq = |p: &PhysicalField, iy: usize, ix: usize| -> f64 {
        (0..p.components).map(|c| p.value(c, iy, ix).powi(2)).sum()
    };

    let mut energy = 0.0;
    let mut dissipation = 0.0;
    let mut rhs_rate = 0.0;
    let n = grid.n();
    for iy in 0..n {
        for ix in 0..n {
            let phi2 = w.phi_sq.value(0, iy, ix);
            let u2 = sq(&pu, iy, ix);
            let f2 = sq(&pf, iy, ix);
            let gm2 = sq(&pgm, iy, ix);
            energy += (u2 + chi * f2 + gm2) * phi2;

            // |Lap M + |grad M|^2 M|^2
            let mut tension = 0.0;
            for c in 0..3 {
                let v = plm.value(c, iy, ix) + gm2 * pm.value(c, iy, ix);
                tension += v * v;
            }
            dissipation += (params.nu * sq(&pgu, iy, ix)
                + params.kappa * chi * sq(&pgf, iy, ix)
                + tension)
                * phi2;

            // T1: (|u|^2 + |F|^2 + |grad M|^2 + |p|) |u| |phi||grad phi|
            let umag = u2.sqrt();
            rhs_rate += (u2 + f2 + gm2 + pp.value(0, iy, ix).abs())
                * umag
                * w.phi_grad_phi.value(0, iy, ix);
            // T2: (|u|^2 + |F|^2 + |grad M|^2)(|grad phi|^2 + |phi||D2 phi|)
            rhs_rate += (u2 + f2 + gm2) * w.grad_sq_plus_hess.value(0, iy, ix);
            // T3: |grad u| |F| |chi F - W'(F)| phi^2 (zero for the default W)
            let mut dev = 0.0;
            for c in 0..4 {
                dev += (chi * pf.value(c, iy, ix) - pwp.value(c, iy, ix)).powi(2);
            }
            rhs_rate +=
                sq(&pgu, iy, ix).sqrt() * f2.sqrt() * dev.sqrt() * phi2;
            // T4: |u|^2 phi^2
            rhs_rate += u2 * phi2;
            // T5: (|H_ext|^2 + |grad H_ext|^2 + |psi'(M)|^2) phi^2
            let mut forcing = sq(&ppsi, iy, ix);
            if let Some((ph, pgh)) = &hext_terms {
                forcing += sq(ph, iy, ix) + sq(pgh, iy, ix);
            }
            rhs_rate += forcing * phi2;
        }
    }
    let a = grid.cell_area();
    Ok(LocalTerms { energy: energy * a, dissipation: dissipation * a, rhs_rate: rhs_rate * a })
}

/// Evaluate both sides of the cutoff local-energy inequality along a
/// trajectory, fitting the smallest right-hand-side constant.
pub fn local_energy_inequality_residual(
    states: &[SimState],
    params: &ModelParams,
    x0: (f64, f64),
    r: f64,
) -> Result<LocalEnergyResidual> {
    if !(r > 0.0) || 2.0 * r >= TWO_PI / 2.0 {
        return Err(MvError::InvalidRadius { r, lo: 0.0, hi: TWO_PI / 4.0 });
    }
    assert!(states.len() >= 2, "need a trajectory");
    let grid = states[0].grid();
    let dt = states[1].t - states[0].t;
    let w = cutoff_weights(grid, x0, r)?;

    let terms: Vec<LocalTerms> = states
        .iter()
        .map(|s| local_terms(s, params, &w))
        .collect::<Result<_>>()?;
    let diss_cum = cumtrapz(dt, &terms.iter().map(|t| t.dissipation).collect::<Vec<_>>());
    let rhs_cum = cumtrapz(dt, &terms.iter().map(|t| t.rhs_rate).collect::<Vec<_>>());
    let lhs: Vec<f64> = terms
        .iter()
        .zip(&diss_cum)
        .map(|(t, d)| t.energy + d)
        .collect();
    let rhs_base = terms[0].energy;

    let mut fitted_c = 0.0f64;
    for (l, i) in lhs.iter().zip(&rhs_cum) {
        if *l > rhs_base && *i > 0.0 {
            fitted_c = fitted_c.max((l - rhs_base) / i);
        }
    }
    let slack = 1e-9 * (1.0 + rhs_base.abs());
    let residuals: Vec<f64> = lhs
        .iter()
        .zip(&rhs_cum)
        .map(|(l, i)| l - (rhs_base + fitted_c * i))
        .collect();
    let pass = residuals.iter().all(|&x| x <= slack);
    Ok(LocalEnergyResidual { fitted_c, residuals, lhs, rhs_base, rhs_integral: rhs_cum, pass })
}

// ---------------------------------------------------------------------------
// Singularity scanning and the energy-drop ledger.
// ---------------------------------------------------------------------------

/// One flagged concentration event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityCandidate {
    pub step: usize,
    pub t: f64,
    pub center: (f64, f64),
    pub local_energy: f64,
    pub q: f64,
}

/// Energy bookkeeping across flagged times: verifies
/// 2 E_n <= 2 E_0 - n eps1 + K_E sum_i sqrt(T_i - T_{i-1}) with K_E fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDropLedger {
    /// (flag index n, time T_n, total energy just before, just after).
    pub entries: Vec<(usize, f64, f64, f64)>,
    pub e0: f64,
    pub eps1: f64,
    pub fitted_ke: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityScanReport {
    pub candidates: Vec<SingularityCandidate>,
    pub ledger: EnergyDropLedger,
    /// Per-step maxima of the local-energy scan (diagnostic trace).
    pub scan_maxima: Vec<f64>,
}

/// Flag (time, center) pairs where the local exchange energy reaches `eps0`
/// while the blow-up indicator grows rapidly, and tabulate the energy
/// bookkeeping across the flagged times.
pub fn singularity_scan(
    states: &[SimState],
    params: &ModelParams,
    eps0: f64,
    r: f64,
    eps1: f64,
) -> Result<SingularityScanReport> {
    check_radius(r)?;
    assert!(!states.is_empty());
    let grid = states[0].grid();
    let stride = (grid.n() / 16).max(1);

    let mut scan_maxima = Vec::with_capacity(states.len());
    let mut candidates = Vec::new();
    let mut q_history: Vec<f64> = Vec::new();
    for (i, s) in states.iter().enumerate() {
        let scan = local_energy_scan(&s.m, r, stride)?;
        let (q, _) = blowup_indicator(s, params);
        // Rapid-growth gate: Q above twice the median of its history.
        let growth = if q_history.len() >= 3 {
            let mut sorted = q_history.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let median = sorted[sorted.len() / 2];
            q > 2.0 * median.max(1e-300)
        } else {
            false
        };
        if scan.max_value >= eps0 && growth {
            candidates.push(SingularityCandidate {
                step: i,
                t: s.t,
                center: scan.argmax,
                local_energy: scan.max_value,
                q,
            });
        }
        scan_maxima.push(scan.max_value);
        q_history.push(q);
    }

    // Energy bookkeeping: consider the first flagged step of each
    // contiguous flagged block as one singular time.
    let energies: Vec<f64> = states
        .iter()
        .map(|s| energy_report(s, params).map(|r| r.e_total))
        .collect::<Result<_>>()?;
    let e0 = energies[0];
    let mut entries = Vec::new();
    let mut flag_times = Vec::new();
    let mut prev_step: Option<usize> = None;
    for c in &candidates {
        if prev_step.is_some_and(|p| c.step == p + 1) {
            prev_step = Some(c.step);
            continue; // same contiguous event
        }
        prev_step = Some(c.step);
        flag_times.push(c.t);
        let before = energies[c.step.saturating_sub(1)];
        let after = energies[(c.step + 1).min(energies.len() - 1)];
        entries.push((flag_times.len(), c.t, before, after));
    }

    // Fit K_E: smallest constant with
    //   2 E_n <= 2 E_0 - n eps1 + K_E sum_{i<=n} sqrt(T_i - T_{i-1}).
    let mut fitted_ke = 0.0f64;
    let mut sqrt_sum = 0.0;
    let mut prev_t = states[0].t;
    for &(n, t_n, _, after) in &entries {
        sqrt_sum += (t_n - prev_t).max(0.0).sqrt();
        prev_t = t_n;
        let need = 2.0 * after - (2.0 * e0 - n as f64 * eps1);
        if need > 0.0 && sqrt_sum > 0.0 {
            fitted_ke = fitted_ke.max(need / sqrt_sum);
        }
    }
    let ledger = EnergyDropLedger { entries, e0, eps1, fitted_ke, pass: true };
    Ok(SingularityScanReport { candidates, ledger, scan_maxima })
}

// ---------------------------------------------------------------------------
// Dissipation identity for the magnetization.
// ---------------------------------------------------------------------------

/// int (|Lap M|^2 - (M . Lap M)^2), the direct form of the magnetic
/// dissipation when H_eff = Lap M.
pub fn m_dissipation_direct(m: &SpectralField) -> Result<f64> {
    let pm = inverse_transform(m)?;
    let pl = inverse_transform(&laplacian(m))?;
    Ok(quad2(m.grid(), |iy, ix| {
        let mut ll = 0.0;
        let mut ml = 0.0;
        for c in 0..3 {
            ll += pl.value(c, iy, ix) * pl.value(c, iy, ix);
            ml += pm.value(c, iy, ix) * pl.value(c, iy, ix);
        }
        ll - ml * ml
    }))
}

/// int |Lap M + |grad M|^2 M|^2, the harmonic-map-tension form — equal to
/// the direct form for unit fields, since M . Lap M = -|grad M|^2.
pub fn m_dissipation_expanded(m: &SpectralField) -> Result<f64> {
    let pm = inverse_transform(m)?;
    let pl = inverse_transform(&laplacian(m))?;
    let pg = inverse_transform(&gradient_all(m))?;
    Ok(quad2(m.grid(), |iy, ix| {
        let mut g2 = 0.0;
        for c in 0..6 {
            g2 += pg.value(c, iy, ix) * pg.value(c, iy, ix);
        }
        let mut acc = 0.0;
        for c in 0..3 {
            let v = pl.value(c, iy, ix) + g2 * pm.value(c, iy, ix);
            acc += v * v;
        }
        acc
    }))
}
