use super::*;
use crate::presets::random_smooth;
use crate::spectral::Grid;

const TOL: f64 = 1e-12;

fn p(x: f64) -> Exponent {
    Exponent::new(x).unwrap()
}

fn inf() -> Exponent {
    Exponent::Infinity
}

/// Real single-mode field cos(k . x) as a spectral field.
fn cosine_mode(grid: Grid, k: (i64, i64)) -> SpectralField {
    let n = grid.n();
    let idx = |k: i64| -> usize {
        if k >= 0 {
            k as usize
        } else {
            (k + n as i64) as usize
        }
    };
    let mut f = SpectralField::zeros(grid, 1);
    *f.coeff_mut(0, idx(k.1), idx(k.0)) = Complex64::new(0.5, 0.0);
    *f.coeff_mut(0, idx(-k.1), idx(-k.0)) += Complex64::new(0.5, 0.0);
    f
}

// ---------------------------------------------------------------------------
// Profile.
// ---------------------------------------------------------------------------

#[test]
fn profile_shape_and_support() {
    let pr = DyadicProfile;
    assert_eq!(pr.chi(0.0), 1.0);
    assert_eq!(pr.chi(1.0), 1.0);
    assert_eq!(pr.chi(2.0), 0.0);
    assert_eq!(pr.chi(5.0), 0.0);
    // Nonincreasing.
    let mut prev = f64::INFINITY;
    for i in 0..=400 {
        let v = pr.chi(i as f64 * 0.01);
        assert!(v <= prev + 1e-15);
        prev = v;
    }
    // Annular support [1/2, 2].
    for r in [0.1, 0.3, 0.5, 2.0, 2.5, 10.0] {
        assert_eq!(pr.phi(r), 0.0, "phi({r}) must vanish");
    }
    assert!(pr.phi(1.0) == 1.0, "phi(1) = chi(1) - chi(2) = 1");
    assert!(pr.phi(0.75) > 0.0 && pr.phi(1.5) > 0.0);
}

#[test]
fn partition_of_unity_on_sampled_radii() {
    let pr = DyadicProfile;
    for i in 0..500 {
        // Radii spanning [1, 64] logarithmically plus the integer lattice radii.
        let r = (i as f64 / 499.0 * 6.0).exp2();
        let sum: f64 = (-10..=20).map(|q| pr.phi_q(q, r)).sum();
        assert!((sum - 1.0).abs() < TOL, "partition fails at r = {r}: {sum}");
    }
}

#[test]
fn low_pass_symbol_telescopes_the_blocks() {
    let pr = DyadicProfile;
    for r in [0.7, 1.0, 1.9, 3.3, 7.2, 12.0] {
        let direct: f64 = (-10..=6).map(|j| pr.phi_q(j, r)).sum::<f64>();
        assert!((pr.chi_q(7, r) - direct).abs() < TOL);
    }
}

// ---------------------------------------------------------------------------
// Blocks.
// ---------------------------------------------------------------------------

#[test]
fn constant_field_has_zero_blocks() {
    let grid = Grid::new(16).unwrap();
    let mut f = SpectralField::zeros(grid, 1);
    *f.coeff_mut(0, 0, 0) = Complex64::new(3.0, 0.0);
    let (q_min, q_max) = block_range(grid);
    for q in q_min..=q_max {
        assert_eq!(dyadic_block(&f, q).max_coeff_norm(), 0.0);
    }
    assert_eq!(low_pass(&f, 3).max_coeff_norm(), 0.0);
}

#[test]
fn single_mode_block_weights() {
    // |k| = 3 sits in blocks q = 1 (phi(3/2)) and q = 2 (phi(3/4)) only,
    // with weights summing to 1.
    let grid = Grid::new(32).unwrap();
    let f = cosine_mode(grid, (3, 0));
    let pr = DyadicProfile;
    let (q_min, q_max) = block_range(grid);
    for q in q_min..=q_max {
        let b = dyadic_block(&f, q);
        let expect = pr.phi_q(q, 3.0);
        if q == 1 || q == 2 {
            assert!(expect > 0.0);
            assert!((b.coeff(0, 0, 3).re - 0.5 * expect).abs() < TOL);
        } else {
            assert_eq!(b.max_coeff_norm(), 0.0, "block {q} must vanish for |k| = 3");
        }
    }
    assert!((pr.phi_q(1, 3.0) + pr.phi_q(2, 3.0) - 1.0).abs() < TOL);
}

#[test]
fn reconstruction_recovers_mean_free_part() {
    let grid = Grid::new(32).unwrap();
    let f = random_smooth(grid, 2, 10, 4);
    let rec = decompose(&f).reconstruct();
    let err = rec.sub(&f.remove_mean()).max_coeff_norm();
    assert!(err < TOL, "reconstruction error {err}");
}

#[test]
fn block_support_is_exact() {
    let grid = Grid::new(64).unwrap();
    let f = random_smooth(grid, 1, 20, 9);
    let (q_min, q_max) = block_range(grid);
    let n = grid.n();
    for q in q_min..=q_max {
        let b = dyadic_block(&f, q);
        let lo = ((q - 1) as f64).exp2();
        let hi = ((q + 1) as f64).exp2();
        for iy in 0..n {
            for ix in 0..n {
                let k1 = grid.wavenumber(ix) as f64;
                let k2 = grid.wavenumber(iy) as f64;
                let r = (k1 * k1 + k2 * k2).sqrt();
                if r < lo || r > hi {
                    assert_eq!(b.coeff(0, iy, ix).norm(), 0.0, "leakage at |k| = {r}, q = {q}");
                }
            }
        }
    }
}

#[test]
fn distant_blocks_are_orthogonal() {
    let grid = Grid::new(64).unwrap();
    let f = random_smooth(grid, 1, 20, 17);
    let (q_min, q_max) = block_range(grid);
    for j in q_min..=q_max {
        for q in q_min..=q_max {
            if (j - q).abs() >= 2 {
                let jj = dyadic_block(&dyadic_block(&f, q), j);
                assert_eq!(jj.max_coeff_norm(), 0.0, "blocks {j} and {q} must not overlap");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Norms.
// ---------------------------------------------------------------------------

#[test]
fn besov_norm_of_zero_and_single_mode() {
    let grid = Grid::new(32).unwrap();
    assert_eq!(besov_norm(&SpectralField::zeros(grid, 1), 0.5, p(2.0), p(2.0)).unwrap(), 0.0);

    // |k| = 4 = 2^2 sits at the annulus center of q = 2 with weight
    // phi(1) = 1, so the Besov norm is 2^{2s} times the L^2 norm.
    let f = cosine_mode(grid, (4, 0));
    let l2 = f.l2_norm();
    for s in [-0.5, 0.0, 1.0] {
        let b = besov_norm(&f, s, p(2.0), p(2.0)).unwrap();
        assert!((b - (2.0 * s).exp2() * l2).abs() < 1e-10, "s = {s}: {b}");
    }
}

#[test]
fn sobolev_norm_single_mode_multiplier() {
    let grid = Grid::new(32).unwrap();
    let f = cosine_mode(grid, (3, 0));
    let got = sobolev_norm_hom(&f, -0.5);
    let expect = 3.0f64.powf(-0.5) * f.l2_norm();
    assert!((got - expect).abs() < 1e-12);
    // s = 0 reduces to the mean-free L^2 norm.
    assert!((sobolev_norm_hom(&f, 0.0) - f.l2_norm()).abs() < 1e-12);
}

#[test]
fn hdot_inner_is_a_scalar_product() {
    let grid = Grid::new(32).unwrap();
    let f = random_smooth(grid, 1, 8, 21).remove_mean();
    let g = random_smooth(grid, 1, 8, 22).remove_mean();
    let h = random_smooth(grid, 1, 8, 23).remove_mean();
    let s = 0.5;
    // Symmetry, bilinearity, Cauchy-Schwarz (direct form).
    assert!((hdot_inner(&f, &g, s) - hdot_inner(&g, &f, s)).abs() < 1e-10);
    let lin = hdot_inner(&f.add(&g.scaled(2.0)), &h, s)
        - hdot_inner(&f, &h, s)
        - 2.0 * hdot_inner(&g, &h, s);
    assert!(lin.abs() < 1e-9, "bilinearity defect {lin}");
    assert!(
        hdot_inner(&f, &g, s).abs()
            <= sobolev_norm_hom(&f, s) * sobolev_norm_hom(&g, s) * (1.0 + 1e-12)
    );
    // norm^2 = inner(f, f).
    assert!((hdot_inner(&f, &f, s) - sobolev_norm_hom(&f, s).powi(2)).abs() < 1e-10);
    // Block form is symmetric too.
    assert!((hdot_inner_lp(&f, &g, s) - hdot_inner_lp(&g, &f, s)).abs() < 1e-10);
}

#[test]
fn besov22_equivalent_to_direct_sobolev() {
    // The ratio must stay inside a fixed interval across fields, indices,
    // and resolutions.
    let mut ratios = Vec::new();
    for &n in &[32usize, 64] {
        let grid = Grid::new(n).unwrap();
        for seed in 0..6u64 {
            let f = random_smooth(grid, 1, (n / 3) as i64, 31 + seed);
            for &s in &[-0.5, 0.5] {
                let b = besov_norm(&f, s, p(2.0), p(2.0)).unwrap();
                let d = sobolev_norm_hom(&f, s);
                ratios.push(b / d);
                // The block-form Sobolev norm is *identical* to the Besov
                // (2,2) norm by construction.
                assert!((sobolev_norm_lp(&f, s) - b).abs() < 1e-9 * (1.0 + b));
            }
        }
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(lo > 0.5 && hi < 2.0, "equivalence ratios outside [{lo}, {hi}]");
    assert!(hi / lo < 1.5, "equivalence constant unstable: [{lo}, {hi}]");
}

#[test]
fn lp_norm_agrees_with_closed_forms() {
    let grid = Grid::new(32).unwrap();
    let f = cosine_mode(grid, (3, 0));
    // ||cos||_{L^2}^2 = (2pi)^2 / 2.
    let l2 = lp_norm(&f, p(2.0)).unwrap();
    assert!((l2 - (crate::spectral::TWO_PI * crate::spectral::TWO_PI / 2.0).sqrt()).abs() < 1e-12);
    // ||cos||_{L^4}^4 = (2pi)^2 * 3/8.
    let l4 = lp_norm(&f, p(4.0)).unwrap();
    let expect = (crate::spectral::TWO_PI * crate::spectral::TWO_PI * 3.0 / 8.0).powf(0.25);
    assert!((l4 - expect).abs() < 1e-12);
    // Sup norm 1 (oversampled).
    let linf = lp_norm(&f, inf()).unwrap();
    assert!((linf - 1.0).abs() < 1e-10);
    // Sequence norms.
    assert_eq!(lr_seq_norm(&[3.0, 4.0], p(2.0)), 5.0);
    assert_eq!(lr_seq_norm(&[3.0, 4.0], inf()), 4.0);
    assert!(Exponent::new(0.5).is_err());
}

// ---------------------------------------------------------------------------
// Paraproducts.
// ---------------------------------------------------------------------------

#[test]
fn paraproducts_require_mean_free_input() {
    let grid = Grid::new(16).unwrap();
    let mut f = SpectralField::zeros(grid, 1);
    *f.coeff_mut(0, 0, 0) = Complex64::new(1.0, 0.0);
    let g = cosine_mode(grid, (1, 0));
    assert!(matches!(bony_paraproducts(&f, &g), Err(MvError::MeanNotZero { .. })));
}

#[test]
fn paraproducts_reconstruct_the_product() {
    let grid = Grid::new(64).unwrap();
    // Band-limited inputs so the grid product does not alias.
    let u = random_shell(grid, 1, 1.0, 10.0, 3).remove_mean();
    let v = random_shell(grid, 1, 1.0, 10.0, 4).remove_mean();
    let parts = bony_paraproducts(&u, &v).unwrap();
    let sum = parts.low_high.add(&parts.high_low);
    let product = grid_product(&u, &v).unwrap();
    let err = sum.sub(&product).max_coeff_norm();
    assert!(err < 1e-10, "reconstruction error {err}");
}

#[test]
fn separated_frequencies_land_in_the_low_high_piece() {
    let grid = Grid::new(64).unwrap();
    let u = cosine_mode(grid, (1, 0)); // low
    let v = cosine_mode(grid, (16, 0)); // high, |k_v| = 16 |k_u|
    let parts = bony_paraproducts(&u, &v).unwrap();
    let product = grid_product(&u, &v).unwrap();
    assert!(parts.low_high.sub(&product).max_coeff_norm() < TOL);
    assert!(parts.high_low.max_coeff_norm() < TOL);
}

#[test]
fn equal_single_modes_reconstruct_their_square() {
    let grid = Grid::new(32).unwrap();
    let u = cosine_mode(grid, (2, 1));
    let parts = bony_paraproducts(&u, &u).unwrap();
    let sum = parts.low_high.add(&parts.high_low);
    // cos^2 has mean 1/2; the paraproduct pieces rebuild the full square.
    let sq = grid_product(&u, &u).unwrap();
    assert!((sum.coeff(0, 0, 0).re - 0.5).abs() < TOL);
    assert!(sum.sub(&sq).max_coeff_norm() < TOL);
}

#[test]
fn paraproduct_pieces_are_quasi_orthogonal() {
    let grid = Grid::new(64).unwrap();
    let u = random_shell(grid, 1, 1.0, 8.0, 5).remove_mean();
    let v = random_shell(grid, 1, 1.0, 8.0, 6).remove_mean();
    let (q_min, q_max) = block_range(grid);
    for q in q_min..=q_max {
        let piece = grid_product(&low_pass(&u, q - 1), &dyadic_block(&v, q)).unwrap();
        for j in q_min..=q_max {
            if (q - j).abs() >= 5 {
                let b = dyadic_block(&piece, j);
                assert!(
                    b.max_coeff_norm() < TOL,
                    "block {j} of the (q = {q}) low-high piece must vanish"
                );
            }
        }
        let ball_piece = grid_product(&low_pass(&v, q + 2), &dyadic_block(&u, q)).unwrap();
        for j in (q + 6)..=q_max {
            assert!(
                dyadic_block(&ball_piece, j).max_coeff_norm() < TOL,
                "block {j} of the (q = {q}) ball piece must vanish"
            );
        }
    }
}

#[test]
fn block_split_sums_to_the_product_block() {
    let grid = Grid::new(64).unwrap();
    let u = random_shell(grid, 1, 1.0, 12.0, 7).remove_mean();
    let v = random_shell(grid, 1, 1.0, 12.0, 8).remove_mean();
    let product = grid_product(&u, &v).unwrap();
    let (q_min, q_max) = block_range(grid);
    for q in q_min..=q_max {
        let [t1, t2, t3, t4] = bony_block_split(&u, &v, q).unwrap();
        let sum = t1.add(&t2).add(&t3).add(&t4);
        let expect = dyadic_block(&product, q);
        let err = sum.sub(&expect).max_coeff_norm();
        assert!(err < 1e-10, "four-term split fails at q = {q}: {err}");
    }
}

// ---------------------------------------------------------------------------
// Bernstein.
// ---------------------------------------------------------------------------

#[test]
fn bernstein_single_mode_gradient_is_exact() {
    let grid = Grid::new(32).unwrap();
    for k in [1i64, 2, 4, 8] {
        let f = cosine_mode(grid, (k, 0));
        let ratio =
            lp_norm(&gradient_all(&f), p(2.0)).unwrap() / (k as f64 * lp_norm(&f, p(2.0)).unwrap());
        assert!((ratio - 1.0).abs() < 1e-12, "|k| = {k}: ratio {ratio}");
    }
}

#[test]
fn bernstein_ensemble_ratios_are_stable() {
    let grid = Grid::new(32).unwrap();
    let report =
        bernstein_verify(grid, 1, p(2.0), p(2.0), &[1, 2, 3], 6, 12345).unwrap();
    assert!(report.pass, "trend {} ratios {:?}", report.trend, report.ball_ratios);
    for (&up, &lo) in report.annulus_upper.iter().zip(&report.annulus_lower) {
        assert!(lo > 0.3 && up < 3.0, "annulus two-sided bound [{lo}, {up}]");
    }
}

#[test]
fn bernstein_linfty_from_l2_is_bounded() {
    let grid = Grid::new(32).unwrap();
    let report = bernstein_verify(grid, 0, p(2.0), inf(), &[1, 2, 3], 6, 999).unwrap();
    assert!(report.pass, "trend {}", report.trend);
    for r in &report.ball_ratios {
        assert!(*r < 2.0, "L-infinity Bernstein ratio {r}");
    }
}

#[test]
fn bernstein_rejects_decreasing_exponents() {
    let grid = Grid::new(16).unwrap();
    assert!(matches!(
        bernstein_verify(grid, 0, inf(), p(2.0), &[1], 1, 0),
        Err(MvError::InvalidExponents(_))
    ));
}

// ---------------------------------------------------------------------------
// Commutator.
// ---------------------------------------------------------------------------

#[test]
fn commutator_of_two_modes_matches_hand_convolution() {
    // u = cos(x), v = cos(4x): uv = (cos 3x + cos 5x)/2. Block q = 2 leaves
    // v untouched (phi(1) = 1), so the commutator is
    // (phi_2(3) - 1)/2 cos 3x + (phi_2(5) - 1)/2 cos 5x.
    let grid = Grid::new(16).unwrap();
    let u = cosine_mode(grid, (1, 0));
    let v = cosine_mode(grid, (4, 0));
    let pr = DyadicProfile;
    let comm = dyadic_block(&grid_product(&u, &v).unwrap(), 2)
        .sub(&grid_product(&u, &dyadic_block(&v, 2)).unwrap());
    let mut expect = cosine_mode(grid, (3, 0)).scaled(0.5 * (pr.phi_q(2, 3.0) - 1.0));
    expect = expect.add(&cosine_mode(grid, (5, 0)).scaled(0.5 * (pr.phi_q(2, 5.0) - 1.0)));
    assert!(comm.sub(&expect).max_coeff_norm() < TOL);

    let ratio = commutator_norm_check(&u, &v, 2, p(2.0), p(2.0), inf()).unwrap();
    assert!(ratio.is_finite() && ratio > 0.0);
}

#[test]
fn commutator_vanishes_for_zero_velocity() {
    let grid = Grid::new(16).unwrap();
    let u = SpectralField::zeros(grid, 1);
    let v = cosine_mode(grid, (3, 0));
    let ratio = commutator_norm_check(&u, &v, 2, p(2.0), p(2.0), inf()).unwrap();
    assert_eq!(ratio, 0.0);
}

#[test]
fn commutator_ratios_bounded_over_ensemble() {
    let grid = Grid::new(64).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..4u64 {
        let u = random_shell(grid, 1, 1.0, 4.0, 100 + seed).remove_mean();
        let v = random_shell(grid, 1, 1.0, 16.0, 200 + seed).remove_mean();
        for q in 1..=4 {
            let ratio = commutator_norm_check(&u, &v, q, p(2.0), p(2.0), inf()).unwrap();
            assert!(ratio.is_finite());
            worst = worst.max(ratio);
        }
    }
    assert!(worst > 0.0 && worst < 50.0, "commutator ratio envelope {worst}");
}

#[test]
fn commutator_rejects_inconsistent_exponents() {
    let grid = Grid::new(16).unwrap();
    let u = cosine_mode(grid, (1, 0));
    let v = cosine_mode(grid, (2, 0));
    assert!(matches!(
        commutator_norm_check(&u, &v, 1, p(2.0), p(2.0), p(2.0)),
        Err(MvError::InvalidExponents(_))
    ));
}

// ---------------------------------------------------------------------------
// Product law, negative characterization, embedding.
// ---------------------------------------------------------------------------

#[test]
fn product_law_trivial_and_invalid_cases() {
    let grid = Grid::new(32).unwrap();
    let z = SpectralField::zeros(grid, 1);
    let g = cosine_mode(grid, (2, 0));
    assert_eq!(product_law_check(&z, &g, 0.5, 0.5).unwrap(), 0.0);
    assert!(matches!(product_law_check(&g, &g, 1.5, 0.5), Err(MvError::InvalidExponents(_))));
    assert!(matches!(product_law_check(&g, &g, 0.5, -0.75), Err(MvError::InvalidExponents(_))));
}

#[test]
fn product_law_ratios_bounded_for_both_pairings() {
    let grid = Grid::new(64).unwrap();
    for &(s, t) in &[(0.5, 0.5), (0.75, -0.25)] {
        let mut worst = 0.0f64;
        for seed in 0..5u64 {
            let a = random_shell(grid, 1, 1.0, 12.0, 300 + seed).remove_mean();
            let b = random_shell(grid, 1, 1.0, 12.0, 400 + seed).remove_mean();
            let r = product_law_check(&a, &b, s, t).unwrap();
            assert!(r.is_finite());
            worst = worst.max(r);
        }
        assert!(worst > 0.0 && worst < 20.0, "(s, t) = ({s}, {t}) envelope {worst}");
    }
}

#[test]
fn negative_characterization_two_sided() {
    let grid = Grid::new(32).unwrap();
    assert!(matches!(
        negative_characterization_check(&cosine_mode(grid, (2, 0)), 0.5, p(2.0), p(2.0)),
        Err(MvError::InvalidExponents(_))
    ));
    assert_eq!(
        negative_characterization_check(&SpectralField::zeros(grid, 1), -0.5, p(2.0), p(2.0))
            .unwrap(),
        0.0
    );
    let single = negative_characterization_check(&cosine_mode(grid, (3, 0)), -0.5, p(2.0), p(2.0))
        .unwrap();
    assert!(single.is_finite() && single > 0.0);
    for seed in 0..4u64 {
        let f = random_smooth(grid, 1, 10, 500 + seed).remove_mean();
        let r = negative_characterization_check(&f, -0.5, p(2.0), p(2.0)).unwrap();
        assert!(r > 0.2 && r < 5.0, "two-sided equivalence ratio {r}");
    }
}

#[test]
fn embedding_ratio_bounded_and_identity_case() {
    let grid = Grid::new(32).unwrap();
    let f = random_smooth(grid, 1, 8, 600).remove_mean();
    // Identity exponents: ratio exactly 1.
    let same = embedding_check(&f, 0.5, p(2.0), p(2.0), p(2.0), p(2.0)).unwrap();
    assert!((same - 1.0).abs() < 1e-12);
    // L^2 -> L^infinity embedding with the regularity drop d(1/2 - 0) = 1.
    let r = embedding_check(&f, 0.5, p(2.0), inf(), p(1.0), p(2.0)).unwrap();
    assert!(r.is_finite() && r > 0.0 && r < 5.0, "embedding ratio {r}");
    assert!(matches!(
        embedding_check(&f, 0.5, inf(), p(2.0), p(1.0), p(2.0)),
        Err(MvError::InvalidExponents(_))
    ));
    assert_eq!(embedding_check(&SpectralField::zeros(grid, 1), 0.5, p(2.0), p(2.0), p(1.0), p(1.0)).unwrap(), 0.0);
}
