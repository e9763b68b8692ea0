//! Property tests for the measure, operator, constant and rate layers.

use std::sync::OnceLock;

use kfp_lab::equilibria::{build_equilibrium, diffusion_sigma, Equilibrium, PotentialSpec, XMode};
use kfp_lab::grid::{inner_product_mu, norm_beta, norm_mu, weighted_moment, Field, Grid1D, PhaseGrid, Variable};
use kfp_lab::hypocoercivity::{decay_envelope, delta_star, lambda_rate, rate_form, EnvelopeKind};
use kfp_lab::operators::{assemble, OperatorSet};
use kfp_lab::rates::{bihari_lasalle_envelope, classify_regime, fit_series, FitKind, Regime};
use kfp_lab::spectral::poincare_on;
use proptest::prelude::*;

struct Model {
    eq: Equilibrium,
    ops: OperatorSet,
}

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| {
        let grid = PhaseGrid::new(8.0, 8.0, 33, 33).unwrap();
        let eq = build_equilibrium(&PotentialSpec::power(2.0, 2.0), &grid).unwrap();
        let ops = assemble(&eq).unwrap();
        Model { eq, ops }
    })
}

fn soft_model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| {
        let grid = PhaseGrid::new(8.0, 14.0, 33, 41).unwrap();
        let eq = build_equilibrium(&PotentialSpec::power(2.0, 1.5), &grid).unwrap();
        let ops = assemble(&eq).unwrap();
        Model { eq, ops }
    })
}

/// Smooth field `f_star * p(x, v)` with a low-degree polynomial `p`.
fn poly_field(eq: &Equilibrium, c: &[f64; 6]) -> Field {
    let grid = eq.grid();
    let mut f = Field::from_fn(grid, |x, v| {
        let (a, b) = (x / 4.0, v / 4.0);
        c[0] + c[1] * a + c[2] * b + c[3] * a * b + c[4] * a * a + c[5] * b * b
    });
    for (fv, s) in f.values.iter_mut().zip(&eq.f_star.values) {
        *fv *= s;
    }
    f
}

fn coeffs() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(a in coeffs(), b in coeffs(), s in -3.0f64..3.0) {
        let eq = &model().eq;
        let (f, g) = (poly_field(eq, &a), poly_field(eq, &b));
        let fg = inner_product_mu(&f, &g, eq).unwrap();
        let gf = inner_product_mu(&g, &f, eq).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg.abs()));
        let lhs = inner_product_mu(&f.axpy(s, &g), &g, eq).unwrap();
        let rhs = fg + s * inner_product_mu(&g, &g, eq).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs() + rhs.abs()));
        let bound = norm_mu(&f, eq).unwrap() * norm_mu(&g, eq).unwrap();
        prop_assert!(fg.abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn beta_norm_is_weaker(a in coeffs()) {
        let eq = &soft_model().eq;
        let f = poly_field(eq, &a);
        let nb = norm_beta(&f, 0.5, eq).unwrap();
        let nm = norm_mu(&f, eq).unwrap();
        prop_assert!(nb <= nm * (1.0 + 1e-12));
        prop_assert!((norm_beta(&f, 1.5, eq).unwrap() - nm).abs() <= 1e-12 * nm);
    }

    #[test]
    fn moments_increase_with_power(a in coeffs(), p in 0.0f64..3.0, dp in 0.0f64..2.0) {
        let eq = &model().eq;
        let f = poly_field(eq, &a);
        for var in [Variable::X, Variable::V] {
            let lo = weighted_moment(&f, var, p, eq).unwrap();
            let hi = weighted_moment(&f, var, p + dp, eq).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sigma_is_continuous_in_beta(beta in 0.3f64..3.0) {
        let h = 1e-4;
        let s0 = diffusion_sigma(beta, 1).unwrap();
        let s1 = diffusion_sigma(beta + h, 1).unwrap();
        prop_assert!(s0 > 0.0);
        prop_assert!((s1 - s0).abs() <= 1e-2 * s0);
    }

    #[test]
    fn rate_constants_are_consistent(
        lm in 0.05f64..3.0,
        lbig in 0.05f64..3.0,
        cm in 0.05f64..5.0,
        frac in 0.05f64..0.95,
        x in -5.0f64..5.0,
        y in -5.0f64..5.0,
    ) {
        let ds = delta_star(lm, lbig, cm).unwrap();
        prop_assert!(ds > 0.0 && ds < lm);
        let delta = frac * ds;
        let lam = lambda_rate(lm, lbig, cm, delta).unwrap();
        let km = lbig / (1.0 + lbig);
        prop_assert!(lam >= 0.0);
        prop_assert!(lam <= 2.0 * (lm - delta).min(delta * km) * (1.0 + 1e-12));
        let q = rate_form(lm, lbig, cm, delta, lam, x, y);
        prop_assert!(q >= -1e-9 * (x * x + y * y) * (1.0 + cm * cm));
    }

    #[test]
    fn envelopes_are_nonincreasing(h0 in 0.01f64..10.0, c in 0.01f64..3.0, zeta in 0.1f64..4.0) {
        let times: Vec<f64> = (0..60).map(|i| 0.5 * i as f64).collect();
        let env = [
            decay_envelope(EnvelopeKind::Exponential { rate: c }, h0, &times),
            decay_envelope(EnvelopeKind::Algebraic { c, zeta }, h0, &times),
            bihari_lasalle_envelope(h0, c, zeta, &times),
        ];
        for e in &env {
            prop_assert!((e[0] - h0).abs() <= 1e-12 * h0);
            prop_assert!(e.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn soft_velocity_exponent_grows_with_ell(beta in 0.1f64..0.95, ell in 0.1f64..5.0, dl in 0.0f64..3.0) {
        let mode = XMode::Power { alpha: 2.0 };
        let a = classify_regime(mode, beta, 0.0, ell, 1).unwrap();
        let b = classify_regime(mode, beta, 0.0, ell + dl, 1).unwrap();
        prop_assert_eq!(a.regime, Regime::Algebraic);
        prop_assert!(a.exponent.unwrap() <= b.exponent.unwrap());
        let zero = classify_regime(XMode::Zero, beta, 0.0, ell, 1).unwrap();
        prop_assert!(zero.exponent.unwrap() <= 0.5);
    }

    #[test]
    fn fits_recover_exact_laws(rate in 0.05f64..3.0, zeta in 0.2f64..4.0, c in 0.1f64..10.0) {
        let times: Vec<f64> = (0..80).map(|i| 0.25 * i as f64).collect();
        let exp: Vec<f64> = times.iter().map(|t| c * (-rate * t).exp()).collect();
        let alg: Vec<f64> = times.iter().map(|t| c * (1.0 + t).powf(-zeta)).collect();
        let w = (times[40], times[79]);
        let fe = fit_series(&times, &exp, FitKind::Exponential, w).unwrap();
        let fa = fit_series(&times, &alg, FitKind::Algebraic, w).unwrap();
        prop_assert!((fe.value - rate).abs() <= 1e-8 * rate);
        prop_assert!((fa.value - zeta).abs() <= 1e-8 * zeta);
        prop_assert!(fe.r_squared > 1.0 - 1e-10 && fa.r_squared > 1.0 - 1e-10);
    }

    #[test]
    fn poincare_gap_is_scale_invariant(scale in 1e-3f64..1e3) {
        let spec = PotentialSpec::power(2.0, 2.0);
        let g = Grid1D::new(6.0, 121).unwrap();
        let base = poincare_on(&spec, &g, 1.0).unwrap();
        let scaled = poincare_on(&spec, &g, scale).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-8 * base);
    }

    #[test]
    fn convex_restriction_keeps_the_gap(x in 2.0f64..10.0) {
        // Uniform convexity of phi survives restriction to any interval.
        let spec = PotentialSpec::power(2.0, 2.0);
        let n = 2 * (x / 0.05).round() as usize + 1;
        let g = Grid1D::new(x, n).unwrap();
        prop_assert!(poincare_on(&spec, &g, 1.0).unwrap() >= 1.0 - 2e-3);
    }
}

#[test]
fn equilibrium_factorizes() {
    let eq = &model().eq;
    let (nx, nv) = eq.f_star.shape();
    for i in 0..nx {
        for j in 0..nv {
            let expect = eq.rho_star.values[i] * eq.g_star[j];
            assert!((eq.f_star.get(i, j) - expect).abs() <= 1e-14 * (1.0 + expect));
        }
    }
}

#[test]
fn odd_velocity_moments_vanish() {
    let eq = &model().eq;
    let grid = eq.grid();
    let w = grid.v.weights();
    for p in [1, 3, 5] {
        let s: f64 = grid
            .v
            .nodes()
            .iter()
            .zip(&w)
            .zip(&eq.g_star)
            .map(|((v, w), g)| w * g * v.powi(p))
            .sum();
        assert!(s.abs() < 1e-14, "odd moment {p}: {s}");
    }
}

#[test]
fn collision_is_dissipative_and_transport_skew() {
    let Model { eq, ops } = model();
    for c in [[1.0, 0.3, -0.7, 0.2, 0.5, -0.4], [0.0, 1.0, 1.0, -1.0, 0.0, 0.3]] {
        let f = poly_field(eq, &c);
        let g = poly_field(eq, &[0.2, -1.0, 0.4, 0.0, 0.1, 0.9]);
        let lff = inner_product_mu(&ops.apply_l(&f), &f, eq).unwrap();
        assert!(lff <= 1e-12);
        let tfg = inner_product_mu(&ops.apply_t(&f), &g, eq).unwrap();
        let tgf = inner_product_mu(&ops.apply_t(&g), &f, eq).unwrap();
        assert!((tfg + tgf).abs() < 1e-10 * (1.0 + tfg.abs()));
    }
}

#[test]
fn poincare_gap_shrinks_toward_full_line() {
    let spec = PotentialSpec::power(2.0, 2.0);
    let sweep = kfp_lab::spectral::domain_sweep(&[3.0, 6.0, 8.0], 0.05, |g| poincare_on(&spec, g, 1.0)).unwrap();
    assert!(sweep[0].1 >= sweep[1].1 - 1e-9);
    assert!((sweep[2].1 - 1.0).abs() < 2e-3, "{sweep:?}");
}
