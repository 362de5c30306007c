//! Property tests for the identities the analysis relies on.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use quantcap_core::analysis::{
    awgn_linear_rate, feasible_fractions, kl_divergence, noise_floor, noise_free_rate, powers_from_fractions,
    predict_spectrum, SubbandPlan,
};
use quantcap_core::bounds::{rate_function, rate_upper_bound, EnergyClasses};
use quantcap_core::moments::{chain_moments, tx_moments, ChannelSpec, MomentMethod};
use quantcap_core::quantizer::{constellation_of, Constellation, QuantizerSpec};
use quantcap_core::{AgnMoments, Complex64};

const Q: MomentMethod = MomentMethod::Quadrature { nodes: 129 };

fn quantizer() -> impl Strategy<Value = QuantizerSpec> {
    (1u32..=6, 0.2f64..5.0).prop_map(|(b, c)| QuantizerSpec::uniform(b, c))
}

fn loaded(pbar: f64) -> impl Strategy<Value = QuantizerSpec> {
    (1u32..=6, 1.0f64..5.0).prop_map(move |(b, k)| QuantizerSpec::uniform_loaded(b, k, pbar))
}

/// Random simplex of 1 to 5 entries bounded away from zero.
fn simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..=5).prop_map(|w| {
        let s: f64 = w.iter().sum();
        let mut d: Vec<f64> = w.iter().map(|x| x / s).collect();
        let rest: f64 = d[1..].iter().sum();
        d[0] = 1.0 - rest;
        d
    })
}

fn plan() -> impl Strategy<Value = SubbandPlan> {
    simplex().prop_flat_map(|d| {
        let m = d.len();
        (Just(d), prop::collection::vec(0.0f64..4.0, m))
            .prop_filter_map("some power", |(d, p)| SubbandPlan::new(d, p).ok())
    })
}

/// A feasible output-fraction vector for `(deltas, m)`.
fn feasible_nu(deltas: &[f64], m: &AgnMoments, w: &[f64]) -> Vec<f64> {
    let floor = noise_floor(deltas, m);
    let slack = 1.0 - floor.iter().sum::<f64>();
    let ws: f64 = w.iter().sum();
    let mut nu: Vec<f64> = floor.iter().zip(w).map(|(f, x)| f + slack * x / ws).collect();
    let tail: f64 = nu[1..].iter().sum();
    nu[0] = 1.0 - tail;
    nu
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn orthogonality_and_energy_identities(q in quantizer(), pbar in 0.1f64..5.0) {
        let m = tx_moments(&q, pbar, Q).unwrap();
        // E|Q(U)|² computed independently over a fine grid.
        let sd = (0.5 * pbar).sqrt();
        let n = 20_000;
        let (mut e_xu, mut e_x2, mut norm) = (0.0, 0.0, 0.0);
        let qq = q.compile().unwrap();
        for i in 0..n {
            let z = -9.0 + 18.0 * (i as f64 + 0.5) / n as f64;
            let w = (-0.5 * z * z).exp();
            let u = z * sd;
            let x = qq.apply_dim(u);
            e_xu += x * u * w;
            e_x2 += x * x * w;
            norm += w;
        }
        let (e_xu, e_x2) = (2.0 * e_xu / norm, 2.0 * e_x2 / norm);
        // Residual E[(Q(U) − αU)* U] over both dimensions.
        let residual = e_xu - m.alpha.re * pbar;
        prop_assert!(residual.abs() < 2e-3 * pbar, "residual {residual}");
        prop_assert!(((m.alpha_sq() + m.tau) * pbar - e_x2).abs() < 2e-3 * e_x2.max(1.0));
        prop_assert!(m.tau >= 0.0);
        prop_assert!(m.alpha.im == 0.0);
    }

    #[test]
    fn energy_identity_is_exact(q in quantizer(), pbar in 0.1f64..5.0) {
        // With S = Q(U), (|α|² + τ) P̄ = E|Q(U)|² by construction.
        let m = tx_moments(&q, pbar, Q).unwrap();
        let direct = m.alpha_sq() * pbar + m.tau * pbar;
        let via = m.output_energy();
        prop_assert!((direct - via).abs() <= 1e-12 * via);
        let mc = quantcap_core::moments::tx_moments_estimate(&q, pbar, MomentMethod::MonteCarlo { samples: 20_000, seed: 3 }).unwrap();
        prop_assert!((mc.moments.alpha.re - m.alpha.re).abs() < 5.0 * mc.alpha_stderr + 1e-12);
        prop_assert!((mc.moments.tau - m.tau).abs() < 5.0 * mc.tau_stderr + 1e-12);
    }

    #[test]
    fn scale_covariance(b in 1u32..=6, c in 0.2f64..4.0, pbar in 0.1f64..4.0) {
        let m1 = tx_moments(&QuantizerSpec::uniform(b, c), pbar, Q).unwrap();
        let m4 = tx_moments(&QuantizerSpec::uniform(b, 2.0 * c), 4.0 * pbar, Q).unwrap();
        assert_abs_diff_eq!(m1.alpha.re, m4.alpha.re, epsilon = 1e-12);
        assert_abs_diff_eq!(m1.tau, m4.tau, epsilon = 1e-12);
        let ch1 = chain_moments(&QuantizerSpec::uniform(b, c), &ChannelSpec::awgn(0.3 * pbar), &QuantizerSpec::uniform(2, c), pbar, Q).unwrap();
        let ch4 = chain_moments(&QuantizerSpec::uniform(b, 2.0 * c), &ChannelSpec::awgn(1.2 * pbar), &QuantizerSpec::uniform(2, 2.0 * c), 4.0 * pbar, Q).unwrap();
        assert_abs_diff_eq!(ch1.alpha.re, ch4.alpha.re, epsilon = 1e-10);
        assert_abs_diff_eq!(ch1.tau, ch4.tau, epsilon = 1e-10);
    }

    #[test]
    fn spectrum_conservation(p in plan(), b in 1u32..=6, k in 1.0f64..5.0) {
        let q = QuantizerSpec::uniform_loaded(b, k, p.pbar());
        let m = tx_moments(&q, p.pbar(), Q).unwrap();
        let r = predict_spectrum(&p, &m).unwrap();
        let sum: f64 = r.s_m.iter().sum();
        prop_assert!((sum - r.s_tot).abs() <= 1e-12 * r.s_tot);
        prop_assert!((r.s_tot - m.output_energy()).abs() <= 1e-12 * r.s_tot);
        prop_assert!((r.nu_m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (nu, floor) in r.nu_m.iter().zip(&r.nu_min_m) {
            prop_assert!(*nu >= floor - 1e-15);
        }
        prop_assert!(feasible_fractions(p.deltas(), &m, &r.nu_m).unwrap());
    }

    #[test]
    fn fraction_round_trip(d in simplex(), w in prop::collection::vec(0.01f64..1.0, 5), q in loaded(1.0)) {
        let m = tx_moments(&q, 1.0, Q).unwrap();
        let nu = feasible_nu(&d, &m, &w[..d.len()]);
        let powers = powers_from_fractions(&d, &m, 1.0, &nu).unwrap();
        let plan = SubbandPlan::new(d.clone(), powers).unwrap();
        let back = predict_spectrum(&plan, &m).unwrap();
        for (a, b) in back.nu_m.iter().zip(&nu) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_free_rate_matches_awgn_at_zero_noise(p in plan(), q in loaded(1.0)) {
        let plan = SubbandPlan::new(p.deltas().to_vec(), p.powers().iter().map(|x| x / p.pbar()).collect()).unwrap();
        let m = tx_moments(&q, 1.0, Q).unwrap();
        let s = predict_spectrum(&plan, &m).unwrap();
        let a = awgn_linear_rate(&plan, &m, 0.0).unwrap().r_lin;
        let b = noise_free_rate(plan.deltas(), &m, &s.nu_m).unwrap().r_lin;
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn awgn_rate_monotonicity(p in plan(), q in loaded(1.0), s1 in 0.0f64..5.0, ds in 0.0f64..5.0, band in 0usize..5, dp in 0.0f64..2.0) {
        let plan = SubbandPlan::new(p.deltas().to_vec(), p.powers().iter().map(|x| x / p.pbar()).collect()).unwrap();
        let m = tx_moments(&q, 1.0, Q).unwrap();
        let r1 = awgn_linear_rate(&plan, &m, s1).unwrap().r_lin;
        let r2 = awgn_linear_rate(&plan, &m, s1 + ds).unwrap().r_lin;
        prop_assert!(r2 <= r1 + 1e-12);
        // Raising one band's power at fixed moments and P̄ cannot lower the rate.
        let band = band % plan.num_bands();
        let terms = quantcap_core::analysis::linear_rate_from_powers(plan.deltas(), plan.powers(), &m.with_added_noise(s1)).unwrap();
        let mut more = plan.powers().to_vec();
        more[band] += dp;
        let terms2 = quantcap_core::analysis::linear_rate_from_powers(plan.deltas(), &more, &m.with_added_noise(s1)).unwrap();
        prop_assert!(terms2.iter().sum::<f64>() >= terms.iter().sum::<f64>() - 1e-12);
    }

    #[test]
    fn floor_sharpness(q in loaded(1.0), t in -0.2f64..0.2) {
        let m = tx_moments(&q, 1.0, Q).unwrap();
        prop_assume!(m.tau > 1e-9);
        let d = [0.4, 0.6];
        let floor = noise_floor(&d, &m)[1];
        let nu2 = (floor + t * floor).clamp(1e-9, 1.0 - 1e-9);
        let nu = [1.0 - nu2, nu2];
        let feasible = feasible_fractions(&d, &m, &nu).unwrap();
        let powers = powers_from_fractions(&d, &m, 1.0, &nu);
        // Feasible exactly when the implied second-band power is nonnegative.
        let implied = (nu2 / d[1] * (m.alpha_sq() + m.tau) - m.tau) / m.alpha_sq();
        prop_assert_eq!(feasible, implied >= -1e-12 / m.alpha_sq());
        prop_assert_eq!(feasible, powers.is_ok());
    }

    #[test]
    fn cumulant_convexity_and_rate_function_shape(b in 1u32..=4, c in 0.5f64..3.0) {
        let cset = constellation_of(&QuantizerSpec::uniform(b, c)).unwrap();
        let cls = EnergyClasses::new(&cset);
        for i in 0..=40 {
            let theta = -4.0 + 0.2 * i as f64;
            prop_assert!(cls.cumulant_second_derivative(theta) >= -1e-12);
        }
        if cls.len() > 1 {
            let (lo, hi) = (cls.e_min(), cls.e_max());
            let grid: Vec<f64> = (1..40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
            let rates: Vec<f64> = grid.iter().map(|&s| rate_function(&cset, s).unwrap().rate).collect();
            for w in rates.windows(3) {
                prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
            }
            prop_assert!(rates.iter().all(|&r| r >= 0.0));
            prop_assert!(rate_function(&cset, cls.e_mean()).unwrap().rate.abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_law_matches_target_energy(b in 1u32..=4, c in 0.5f64..3.0, f in 0.02f64..0.98) {
        let cset = constellation_of(&QuantizerSpec::uniform(b, c)).unwrap();
        let cls = EnergyClasses::new(&cset);
        prop_assume!(cls.len() > 1);
        let s = cls.e_min() + f * (cls.e_max() - cls.e_min());
        let p = rate_function(&cset, s).unwrap();
        let mean = cls.cumulant_derivative(p.theta);
        prop_assert!((mean - s).abs() <= 1e-8 * s);
    }

    #[test]
    fn upper_bound_dominates_linear_rate(q in loaded(1.0), d in simplex(), w in prop::collection::vec(0.01f64..1.0, 5)) {
        let m = tx_moments(&q, 1.0, Q).unwrap();
        let cset = constellation_of(&q).unwrap();
        let nu = feasible_nu(&d, &m, &w[..d.len()]);
        let s_tot = m.output_energy();
        let s_m: Vec<f64> = nu.iter().map(|v| v * s_tot).collect();
        let ub = rate_upper_bound(&cset, &s_m, &d).unwrap();
        let lin = noise_free_rate(&d, &m, &nu).unwrap();
        prop_assert!(ub.r_upper >= lin.r_lin - 1e-12, "{} < {}", ub.r_upper, lin.r_lin);
        // Both bounds lose the same divergence relative to the flat spectrum.
        let flat: Vec<f64> = d.iter().map(|x| x * s_tot).collect();
        let ub_flat = rate_upper_bound(&cset, &flat, &d).unwrap();
        prop_assert!((ub_flat.r_upper - ub.r_upper - kl_divergence(&d, &nu)).abs() < 1e-12);
    }
}

#[test]
fn boundary_energy_uses_class_multiplicity() {
    let c = Constellation::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 2.0),
    ])
    .unwrap();
    let ub = rate_upper_bound(&c, &[1.0], &[1.0]).unwrap();
    assert_abs_diff_eq!(ub.h_max, 1.0, epsilon = 1e-15);
    assert!(ub.theta_star.is_none());
}
