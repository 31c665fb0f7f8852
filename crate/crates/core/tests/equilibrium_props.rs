mod common;

use std::f64::consts::PI;

use common::{monomial, pearson, stable_zoo};
use fracpoly::equilibrium::{
    correlation, cross_moment, fhat_matrix, fhat_scalar, lrd_asymptote, stationary_moment, EquilibriumContext,
};
use fracpoly::mittag::ml_real;
use fracpoly::models::generator_matrix;
use fracpoly::polybasis::product_into;
use fracpoly::quadrature::{integrate_real, QuadOptions};
use proptest::prelude::*;

/// `F̂_{s,t}(β)` from the overshoot `O = σ_{L_t} − t`, whose density is
/// `sin(πα)/π · t^α / (o^α (t+o))`: by the strong Markov property
/// `F̂ = P(O ≥ s) + ∫₀^s f_O(o) E_α(−β(s−o)^α) do`.
fn fhat_via_overshoot(alpha: f64, beta: f64, s: f64, t: f64) -> f64 {
    let dens = |o: f64| (PI * alpha).sin() / PI * t.powf(alpha) / (o.powf(alpha) * (t + o));
    // o = u^{1/(1−α)} removes the o^{−α} singularity.
    let k = 1.0 / (1.0 - alpha);
    let upper = s.powf(1.0 - alpha);
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 4000 };
    let jac = |u: f64| k * u.powf(k - 1.0);
    let (head, _) = integrate_real(
        |u| {
            let o = u.powf(k);
            dens(o) * ml_real(alpha, -beta * (s - o).max(0.0).powf(alpha)).unwrap() * jac(u)
        },
        0.0,
        upper,
        opts,
    )
    .unwrap();
    let (mass, _) = integrate_real(|u| dens(u.powf(k)) * jac(u), 0.0, upper, opts).unwrap();
    head + (1.0 - mass)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn increment_transform_matches_overshoot_law(
        alpha in 0.2f64..0.9,
        beta in 0.1f64..5.0,
        s in 0.05f64..60.0,
        t in 0.2f64..3.0,
    ) {
        let direct = fhat_scalar(alpha, beta, s, t).unwrap();
        let oracle = fhat_via_overshoot(alpha, beta, s, t);
        prop_assert!((direct - oracle).abs() <= 1e-8, "{} vs {}", direct, oracle);
    }

    #[test]
    fn increment_transform_is_a_decreasing_probability(
        alpha in 0.05f64..0.95,
        beta in 0.0f64..10.0,
        t in 0.0f64..5.0,
    ) {
        let mut prev = 1.0 + 1e-12;
        for i in 0..25 {
            let s = 0.01 * 1.6f64.powi(i);
            let v = fhat_scalar(alpha, beta, s, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&v), "s={} v={}", s, v);
            prop_assert!(v <= prev + 1e-12, "s={} v={} prev={}", s, v, prev);
            prev = v;
        }
    }
}

#[test]
fn zero_lag_cross_moment_is_time_invariant() {
    for (model, _) in stable_zoo() {
        let dim = model.state_dim();
        let ctx = EquilibriumContext::new(&model, 2).unwrap();
        let mut e = vec![0; dim];
        e[0] = 1;
        let p = monomial(dim, &e);
        e[0] = 2;
        let q = monomial(dim, &e);
        let both = product_into(
            &p.embed(ctx.generator().basis()).unwrap(),
            &q.embed(ctx.generator().basis()).unwrap(),
            ctx.generator_double().basis(),
        )
        .unwrap();
        let want = stationary_moment(&ctx, &both).unwrap();
        for t in [0.0, 0.5, 3.0, 40.0] {
            for alpha in [None, Some(0.4), Some(0.9)] {
                let got = cross_moment(&ctx, &p, &q, 0.0, t, alpha).unwrap();
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "{} t={t} {alpha:?}: {got} vs {want}",
                    model.name()
                );
            }
        }
    }
}

#[test]
fn matrix_transform_has_scalar_transform_on_its_spectrum() {
    // Univariate generators are upper triangular, so the spectrum is the diagonal.
    for (model, _) in stable_zoo().into_iter().filter(|(m, _)| m.state_dim() == 1) {
        let g = generator_matrix(&model, 4).unwrap();
        for (alpha, s, t) in [(0.3, 0.5, 1.0), (0.7, 5.0, 2.0), (0.5, 50.0, 1.0)] {
            let f = fhat_matrix(alpha, &g, s, t).unwrap();
            for i in 0..g.matrix().nrows() {
                let lam = g.matrix()[(i, i)];
                let want = if lam == 0.0 { 1.0 } else { fhat_scalar(alpha, -lam, s, t).unwrap() };
                assert!((f[(i, i)] - want).abs() <= 1e-8, "{} i={i}: {} vs {want}", model.name(), f[(i, i)]);
            }
        }
    }
}

#[test]
fn classical_correlation_decays_fast_fractional_follows_power_law() {
    let ctx = EquilibriumContext::new(&pearson(), 1).unwrap();
    let (alpha, t) = (0.5, 1.0);
    let s = 1e3 * t;
    let classical = correlation(&ctx, s, t, None).unwrap();
    assert!(classical.correlation < 1e-100);
    let frac = correlation(&ctx, s, t, Some(alpha)).unwrap();
    let ratio = frac.correlation / lrd_asymptote(alpha, frac.beta, s, t).unwrap();
    assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    // The covariance route agrees with the closed form.
    assert!((frac.covariance / frac.variance - frac.correlation).abs() < 1e-9);
}
