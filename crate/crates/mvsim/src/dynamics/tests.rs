use super::*;
use crate::model::{AnisotropyModel, ElasticModel, ExternalField, HextMode};
use crate::spectral::{gradient, Grid, PhysicalField};
use crate::presets::{random_deformation, random_magnetization, random_smooth, random_velocity, smooth_state};

fn params_free(t_final: f64) -> ModelParams {
    ModelParams::default_with(ExternalField::zero(), t_final)
}

fn random_state(grid: Grid, seed: u64, scale: f64) -> SimState {
    smooth_state(grid, seed, scale).unwrap()
}

fn state_diff(a: &SimState, b: &SimState) -> f64 {
    a.u.sub(&b.u)
        .max_coeff_norm()
        .max(a.f.sub(&b.f).max_coeff_norm())
        .max(a.m.sub(&b.m).max_coeff_norm())
}

#[test]
fn equilibrium_is_fixed_point() {
    let grid = Grid::new(16).unwrap();
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(1.0).unwrap();
    let state = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    let stepper = StepperConfig::new(1e-2).unwrap();
    let next = step(&state, &stepper, &params).unwrap();
    assert!(state_diff(&next, &state) < 1e-13);
    assert!(next.p.max_coeff_norm() < 1e-13);
}

#[test]
fn effective_field_trivial_cases() {
    let grid = Grid::new(16).unwrap();
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(1.0).unwrap();
    // M = axis: equilibrium, H_eff = 0.
    let s = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    assert!(effective_field(&s.m, 0.0, &params).unwrap().max_coeff_norm() < 1e-15);
    // M = e1, axis = e3: H_eff = -psi'(e1) = -e1.
    let s = SimState::equilibrium(grid, [1.0, 0.0, 0.0]);
    let h = effective_field(&s.m, 0.0, &params).unwrap();
    assert!((h.coeff(0, 0, 0).re + 1.0).abs() < 1e-14);
    assert!(h.sub(&s.m.scaled(-1.0)).max_coeff_norm() < 1e-14);
    // Parallel field: LLG right-hand side vanishes.
    let rhs = llg_rhs(&s, &params).unwrap();
    assert!(rhs.max_coeff_norm() < 1e-13);
}

/// Symbolic oracle on a one-mode profile M = (sin x1, 0, cos x1):
/// Lap M = -M_perp with M_perp = (sin x1, 0, cos x1) itself, so
/// H_eff = -M - psi'(M) evaluated analytically.
#[test]
fn effective_field_one_mode_profile() {
    let grid = Grid::new(32).unwrap();
    let alpha = 0.7;
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(alpha).unwrap();
    let phys = PhysicalField::from_fn(grid, 3, |x, _| vec![x.sin(), 0.0, x.cos()]);
    let m = forward_transform(&phys).unwrap();
    let h = inverse_transform(&effective_field(&m, 0.0, &params).unwrap()).unwrap();
    for iy in 0..32 {
        for ix in 0..32 {
            let x = grid.coord(ix);
            // Lap M = -(sin x, 0, cos x); psi'(M) = alpha (sin x, 0, 0).
            let expect = [-(1.0 + alpha) * x.sin(), 0.0, -x.cos()];
            for c in 0..3 {
                assert!((h.value(c, iy, ix) - expect[c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn llg_rhs_is_pointwise_orthogonal_to_m() {
    // Well-resolved state on a finer grid: the only orthogonality error is
    // the dealias truncation, which is tiny for a smooth unit field.
    let grid = Grid::new(64).unwrap();
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(0.5).unwrap();
    let state = SimState::new(
        0.0,
        random_velocity(grid, 2, 1, 0.3),
        random_deformation(grid, 2, 11, 0.3),
        random_magnetization(grid, 1, 21, 0.3).unwrap(),
        SpectralField::zeros(grid, 1),
    );
    let rhs = llg_rhs(&state, &params).unwrap();
    let pm = inverse_transform(&state.m).unwrap();
    let pr = inverse_transform(&rhs).unwrap();
    let mut worst = 0.0f64;
    for iy in 0..64 {
        for ix in 0..64 {
            let mut dot = 0.0;
            for c in 0..3 {
                dot += pm.value(c, iy, ix) * pr.value(c, iy, ix);
            }
            worst = worst.max(dot.abs());
        }
    }
    assert!(worst < 1e-8, "orthogonality residual {worst}");
}

#[test]
fn llg_rhs_rejects_drifted_magnetization() {
    let grid = Grid::new(16).unwrap();
    let params = params_free(1.0);
    let mut s = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    s.m = s.m.scaled(1.001); // |M| = 1.001 everywhere
    assert!(matches!(llg_rhs(&s, &params), Err(MvError::ConstraintDrift { .. })));
}

#[test]
fn deformation_rhs_trivial_cases() {
    let grid = Grid::new(16).unwrap();
    let params = params_free(1.0);
    // u = 0 -> rhs = 0.
    let s = random_state(grid, 2, 0.3);
    let still = SimState::new(0.0, SpectralField::zeros(grid, 2), s.f.clone(), s.m.clone(),
                              s.p.clone());
    assert!(deformation_rhs(&still, &params).unwrap().max_coeff_norm() < 1e-15);

    // F constant -> rhs = grad u F0.
    let mut f0 = SpectralField::zeros(grid, 4);
    f0.coeff_mut(0, 0, 0).re = 0.7;
    f0.coeff_mut(3, 0, 0).re = -0.2;
    let moving = SimState::new(0.0, random_velocity(grid, 2, 3, 0.5), f0.clone(), s.m.clone(),
                               s.p.clone());
    let rhs = deformation_rhs(&moving, &params).unwrap();
    let expect = velocity_gradient_times_f(&moving.u, &f0).unwrap();
    assert!(rhs.sub(&expect).max_coeff_norm() < 1e-14);
}

/// Integration by parts: with divergence-free columns of F,
/// each entry of the stretching term integrates to zero.
#[test]
fn stretching_term_integrates_to_zero() {
    let grid = Grid::new(32).unwrap();
    let u = random_velocity(grid, 4, 5, 1.0);
    let f = random_deformation(grid, 4, 6, 1.0);
    let s = velocity_gradient_times_f(&u, &f).unwrap();
    for c in 0..4 {
        assert!(s.coeff(c, 0, 0).norm() < 1e-10, "component {c}");
    }
}

/// Spectral-convolution oracle for the advection product on a tiny grid.
#[test]
fn advect_matches_brute_force_convolution() {
    let grid = Grid::new(8).unwrap();
    let u = random_velocity(grid, 2, 7, 1.0);
    let f = random_smooth(grid, 1, 2, 8);
    let fast = advect(&u, &f).unwrap();

    // Direct convolution of coefficient arrays: (u_j d_j f)(k)
    //   = sum_{k'} u_j(k') * (i (k - k')_j) f(k - k'),
    // over all representable mode pairs without wrap-around.
    let n = 8i64;
    let mut worst = 0.0f64;
    for ky in -3..=3i64 {
        for kx in -3..=3i64 {
            let mut acc = Complex64::default();
            for qy in -3..=3i64 {
                for qx in -3..=3i64 {
                    let (ry, rx) = (ky - qy, kx - qx);
                    if rx.abs() > 3 || ry.abs() > 3 {
                        continue;
                    }
                    let iu = |k: i64| k.rem_euclid(n) as usize;
                    let fv = f.coeff(0, iu(ry), iu(rx));
                    let u1 = u.coeff(0, iu(qy), iu(qx));
                    let u2 = u.coeff(1, iu(qy), iu(qx));
                    acc += u1 * Complex64::new(0.0, rx as f64) * fv
                        + u2 * Complex64::new(0.0, ry as f64) * fv;
                }
            }
            let iu = |k: i64| k.rem_euclid(n) as usize;
            // Only compare modes the dealiased product keeps (cutoff 8/3).
            if kx.abs().max(ky.abs()) as f64 > grid.dealias_cutoff() {
                continue;
            }
            worst = worst.max((fast.coeff(0, iu(ky), iu(kx)) - acc).norm());
        }
    }
    assert!(worst < 1e-13, "convolution mismatch {worst}");
}

#[test]
fn pressure_trivial_and_shear_cases() {
    let grid = Grid::new(16).unwrap();
    let params = params_free(1.0);
    // Zero u, F and constant M -> p = 0.
    let s = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    assert!(pressure(&s, &params).unwrap().max_coeff_norm() < 1e-15);

    // u = (sin x2, sin x1): div div (u (x) u) = 2 cos x1 cos x2, so
    // p = Lap^{-1}(-2 cos x1 cos x2) = cos x1 cos x2.
    let phys = PhysicalField::from_fn(grid, 2, |x, y| vec![y.sin(), x.sin()]);
    let mut s2 = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    s2.u = forward_transform(&phys).unwrap();
    let p = inverse_transform(&pressure(&s2, &params).unwrap()).unwrap();
    for iy in 0..16 {
        for ix in 0..16 {
            let expect = grid.coord(ix).cos() * grid.coord(iy).cos();
            assert!((p.value(0, iy, ix) - expect).abs() < 1e-12);
        }
    }
}

/// grad p must be exactly the gradient part that Leray projection removes
/// from the momentum right-hand side (with no external field).
#[test]
fn pressure_is_consistent_with_leray_projection() {
    let grid = Grid::new(32).unwrap();
    let mut params = params_free(1.0);
    params.elastic = ElasticModel::new(1.4).unwrap();
    let state = random_state(grid, 11, 0.4);
    let rhs = momentum_rhs(&state, &params).unwrap();
    let p = pressure(&state, &params).unwrap();
    let mut recon = leray_project(&rhs);
    recon.axpy(1.0, &gradient(&p));
    assert!(recon.sub(&rhs).max_coeff_norm() < 1e-10);
}

/// All mean-free terms drop out of the momentum integral: the only mean
/// contribution is the Zeeman force.
#[test]
fn momentum_mean_reduces_to_zeeman_force() {
    let grid = Grid::new(32).unwrap();
    let mut params = params_free(1.0);
    params.mu0 = 0.8;
    params.hext = ExternalField {
        constant: [0.0, 0.0, 0.1],
        modes: vec![HextMode { wavevector: [1, 2], amplitude: [0.5, -0.3, 0.2], omega: 1.0 }],
    };
    let state = random_state(grid, 13, 0.3);
    let rhs = momentum_rhs(&state, &params).unwrap();
    let h = params.hext.eval(grid, 0.0, 1.0).unwrap();
    let zee = zeeman_force(&h, &state.m).unwrap();
    for c in 0..2 {
        let lhs = rhs.coeff(c, 0, 0);
        let want = zee.coeff(c, 0, 0) * params.mu0;
        assert!((lhs - want).norm() < 1e-12);
    }
    // And with no external field, the momentum integral vanishes entirely.
    let free = params_free(1.0);
    let rhs0 = momentum_rhs(&state, &free).unwrap();
    assert!(rhs0.coeff(0, 0, 0).norm() < 1e-12);
    assert!(rhs0.coeff(1, 0, 0).norm() < 1e-12);
}

#[test]
fn renormalize_magnetization_cases() {
    let grid = Grid::new(32).unwrap();
    // Already unit: unchanged (up to the dealias tail, which is ~amp^cutoff).
    let m = random_magnetization(grid, 1, 17, 0.05).unwrap();
    let r = renormalize_magnetization(&m).unwrap();
    assert!(r.sub(&m).max_coeff_norm() < 1e-12);
    // Constant (0,0,2) -> (0,0,1).
    let mut m2 = SpectralField::zeros(grid, 3);
    m2.coeff_mut(2, 0, 0).re = 2.0;
    let r2 = renormalize_magnetization(&m2).unwrap();
    assert!((r2.coeff(2, 0, 0).re - 1.0).abs() < 1e-15);
    // Collapse detection.
    let tiny = SpectralField::zeros(grid, 3);
    assert!(matches!(
        renormalize_magnetization(&tiny),
        Err(MvError::MagnetizationCollapse { .. })
    ));
}

/// Pure heat-flow sub-problem: u = 0, F = 0, M = normalize(e3 + eps cos(x1) e1).
/// The transverse mode decays like exp(-|k|^2 t) to O(dt^2) per step.
#[test]
fn magnetization_mode_decays_at_heat_rate() {
    let grid = Grid::new(32).unwrap();
    let params = params_free(1.0);
    let eps = 1e-4;
    let phys = PhysicalField::from_fn(grid, 3, |x, _| {
        let m = [eps * x.cos(), 0.0, 1.0];
        let mag = (m[0] * m[0] + m[2] * m[2]).sqrt();
        vec![m[0] / mag, m[1] / mag, m[2] / mag]
    });
    let m0 = forward_transform(&phys).unwrap();
    let state = SimState::new(
        0.0,
        SpectralField::zeros(grid, 2),
        SpectralField::zeros(grid, 4),
        m0.clone(),
        SpectralField::zeros(grid, 1),
    );
    let dt = 1e-3;
    // No renormalization, to expose the raw decay rate.
    let stepper = StepperConfig::with_options(dt, usize::MAX, 0.5).unwrap();
    let next = step(&state, &stepper, &params).unwrap();
    let amp = |m: &SpectralField| {
        (m.coeff(0, 0, 1).norm_sqr() + m.coeff(1, 0, 1).norm_sqr()).sqrt()
    };
    let ratio = amp(&next.m) / amp(&m0);
    assert!(
        (ratio - (-dt).exp()).abs() < 10.0 * dt * dt,
        "decay ratio {ratio} vs {}",
        (-dt).exp()
    );
}

#[test]
fn step_preserves_constraints() {
    let grid = Grid::new(32).unwrap();
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(0.3).unwrap();
    let mut state = random_state(grid, 23, 0.2);
    let stepper = StepperConfig::new(2e-3).unwrap();
    for _ in 0..10 {
        state = step(&state, &stepper, &params).unwrap();
    }
    let report = crate::model::validate_state(&state).unwrap();
    assert!(report.div_u < 1e-12, "div u residual {}", report.div_u);
    assert!(report.div_ft < 1e-8, "div F^T residual {}", report.div_ft);
    assert!(report.unit_m < 1e-10, "unit-M residual {}", report.unit_m);
}

#[test]
fn mean_of_f_is_conserved() {
    let grid = Grid::new(32).unwrap();
    let params = params_free(1.0);
    let mut state = random_state(grid, 29, 0.2);
    let f_mean: Vec<f64> = state.f.mean();
    let stepper = StepperConfig::new(2e-3).unwrap();
    for _ in 0..10 {
        state = step(&state, &stepper, &params).unwrap();
    }
    for (a, b) in state.f.mean().iter().zip(&f_mean) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn mean_velocity_follows_zeeman_forcing() {
    // d/dt (mean u) = mu0 * mean(grad^T H M): one step should reproduce the
    // discrete version to O(dt^2) per step (2nd-order scheme).
    let grid = Grid::new(32).unwrap();
    let mut params = params_free(1.0);
    params.mu0 = 0.6;
    params.hext = ExternalField {
        constant: [0.0; 3],
        modes: vec![HextMode { wavevector: [1, 0], amplitude: [0.4, 0.1, -0.2], omega: 2.0 }],
    };
    let state = random_state(grid, 31, 0.1);
    let dt = 1e-3;
    let stepper = StepperConfig::new(dt).unwrap();
    let next = step(&state, &stepper, &params).unwrap();
    for c in 0..2 {
        let h0 = params.hext.eval(grid, 0.0, 1.0).unwrap();
        let z0 = zeeman_force(&h0, &state.m).unwrap().coeff(c, 0, 0).re;
        let drift = (next.u.coeff(c, 0, 0).re - state.u.coeff(c, 0, 0).re) / dt;
        // The step uses a Heun average of the forcing, so comparing against
        // the t = 0 value leaves an O(dt) discrepancy.
        assert!((drift - params.mu0 * z0).abs() < 1e-3);
    }
}

#[test]
fn energy_decays_without_forcing() {
    // With H_ext = 0 and psi = 0 the total energy is non-increasing.
    let grid = Grid::new(32).unwrap();
    let params = params_free(1.0);
    let mut state = random_state(grid, 37, 0.2);
    let stepper = StepperConfig::new(2e-3).unwrap();
    let energy = |s: &SimState| -> f64 {
        let ke = s.u.l2_norm_sq();
        let el = 2.0 * crate::model::integral(
            &crate::model::elastic_energy(&params.elastic, &s.f).unwrap(), 0);
        let ex = gradient_all(&s.m).l2_norm_sq();
        0.5 * (ke + el + ex)
    };
    let mut prev = energy(&state);
    for _ in 0..10 {
        state = step(&state, &stepper, &params).unwrap();
        let e = energy(&state);
        assert!(e <= prev + 1e-10, "energy increased: {prev} -> {e}");
        prev = e;
    }
}

#[test]
fn cfl_violation_is_rejected() {
    let grid = Grid::new(16).unwrap();
    let params = params_free(1.0);
    let mut state = SimState::equilibrium(grid, [0.0, 0.0, 1.0]);
    state.u = random_velocity(grid, 2, 41, 5.0);
    let stepper = StepperConfig::new(1.0).unwrap(); // absurdly large dt
    assert!(matches!(step(&state, &stepper, &params), Err(MvError::StepRejected { .. })));
}

/// Richardson study: halving dt reduces the one-shot global error about 4x.
#[test]
fn stepping_is_second_order_in_time() {
    let grid = Grid::new(16).unwrap();
    let mut params = params_free(1.0);
    params.aniso = AnisotropyModel::easy_axis_z(0.2).unwrap();
    let state0 = random_state(grid, 43, 0.05);
    let t_end = 0.04;
    let run = |dt: f64| -> SimState {
        let stepper = StepperConfig::with_options(dt, usize::MAX, 0.9).unwrap();
        let mut s = state0.clone();
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            s = step(&s, &stepper, &params).unwrap();
        }
        s
    };
    let coarse = run(4e-3);
    let medium = run(2e-3);
    let fine = run(1e-3);
    let e1 = state_diff(&coarse, &medium);
    let e2 = state_diff(&medium, &fine);
    let ratio = e1 / e2;
    assert!(
        (3.3..=4.7).contains(&ratio),
        "Richardson ratio {ratio} (errors {e1:.3e}, {e2:.3e})"
    );
}

#[test]
fn magnetization_drift_without_renormalization_is_small() {
    let grid = Grid::new(32).unwrap();
    let params = params_free(1.0);
    let state = random_state(grid, 47, 0.2);
    let dt = 2e-3;
    let no_renorm = StepperConfig::with_options(dt, usize::MAX, 0.5).unwrap();
    let with_renorm = StepperConfig::new(dt).unwrap();
    let drifted = step(&state, &no_renorm, &params).unwrap();
    let clean = step(&state, &with_renorm, &params).unwrap();
    let res_drift = unit_magnetization_residual(&drifted.m).unwrap();
    let res_clean = unit_magnetization_residual(&clean.m).unwrap();
    assert!(res_drift < 10.0 * dt * dt, "raw drift {res_drift}");
    assert!(res_clean < 1e-12, "post-renormalization residual {res_clean}");
}
