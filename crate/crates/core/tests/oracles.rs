//! Independent oracles for closed-form constants and discrete identities.

use std::f64::consts::PI;

use kfp_lab::equilibria::{
    build_equilibrium, diffusion_sigma, moment_closed_form, velocity_mass, Equilibrium, PotentialSpec,
};
use kfp_lab::evolution::{
    bump_initial, run_trajectory, InitialState, MomentPowers, Schedule, Scheme, TrajectoryOptions,
};
use kfp_lab::grid::{inner_product_mu, DensityField, Grid1D, PhaseGrid};
use kfp_lab::hypocoercivity::{entropy_h, hypo_constants, lambda_rate, random_states, step_ratios};
use kfp_lab::operators::{apply_a_u, assemble, lift, solve_elliptic, OperatorSet};
use kfp_lab::spectral::{macro_coercivity, micro_coercivity, position_gap};

fn model(spec: PotentialSpec, xw: f64, vw: f64, nx: usize, nv: usize) -> (Equilibrium, OperatorSet) {
    let grid = PhaseGrid::new(xw, vw, nx, nv).unwrap();
    let eq = build_equilibrium(&spec, &grid).unwrap();
    let ops = assemble(&eq).unwrap();
    (eq, ops)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn br(v: f64) -> f64 {
    (1.0 + v * v).sqrt()
}

#[test]
fn sigma_gaussian_closed_forms() {
    let s1 = diffusion_sigma(2.0, 1).unwrap();
    let s3 = diffusion_sigma(2.0, 3).unwrap();
    let c1 = (-0.5f64).exp() * (2.0 * PI).sqrt();
    let c3 = (-0.5f64).exp() * (2.0 * PI).powf(1.5);
    assert!((s1 - c1).abs() < 1e-9 * c1, "{s1} vs {c1}");
    assert!((s3 - c3).abs() < 1e-9 * c3, "{s3} vs {c3}");
    assert!((s1 - 1.5203).abs() < 1e-4);
    assert!((s3 - 9.552).abs() < 1e-3);
}

#[test]
fn sigma_matches_simpson_for_soft_and_hard_tails() {
    for beta in [0.5, 1.0, 1.5, 3.0] {
        let integrand = |v: f64| v * v * br(v).powf(2.0 * beta - 4.0) * (-br(v).powf(beta) / beta).exp();
        let reach = if beta < 1.0 { 4000.0 } else { 200.0 };
        let oracle = 2.0 * simpson(integrand, 0.0, reach, 400_000);
        let got = diffusion_sigma(beta, 1).unwrap();
        assert!((got - oracle).abs() < 1e-7 * oracle, "beta {beta}: {got} vs {oracle}");
        let m = 2.0 * simpson(|v| (-br(v).powf(beta) / beta).exp(), 0.0, reach, 400_000);
        let vm = velocity_mass(beta, 1).unwrap();
        assert!((vm - m).abs() < 1e-7 * m);
    }
}

#[test]
fn gaussian_partition_function() {
    let (eq, _) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 129, 129);
    let z = 2.0 * PI * (-1.0f64).exp();
    assert!((eq.z_constant - z).abs() < 1e-6 * z, "{} vs {z}", eq.z_constant);
    assert!((eq.sigma_normalized - 1.0).abs() < 1e-9);
}

#[test]
fn moment_constant_and_bound() {
    let (exact, bound) = moment_closed_form(2.0, 2.0, 1).unwrap();
    let oracle = 2.0 * (-0.5f64).exp() * (2.0 * PI).sqrt();
    assert!((exact - oracle).abs() < 1e-9 * oracle);
    assert!((exact - 3.041).abs() < 1e-3);
    assert!((bound - 5.013).abs() < 1e-3);
    for (k, eta) in [(0.5, 0.5), (1.0, 1.0), (3.0, 2.0), (4.0, 0.7)] {
        let (e, b) = moment_closed_form(k, eta, 1).unwrap();
        let reach = if eta < 1.0 { 20_000.0 } else { 400.0 };
        let o = 2.0
            * simpson(
                |x| br(x).powf(k) * (-br(x).powf(eta) / eta).exp(),
                0.0,
                reach,
                2_000_000,
            );
        assert!((e - o).abs() < 1e-6 * o, "k {k} eta {eta}: {e} vs {o}");
        assert!(e <= b);
    }
}

#[test]
fn rate_for_unit_constants() {
    let lam = lambda_rate(1.0, 1.0, 1.0, 0.3).unwrap();
    assert!((lam - 0.2080).abs() < 1e-4, "{lam}");
}

#[test]
fn ornstein_uhlenbeck_gaps() {
    let spec = PotentialSpec::power(2.0, 2.0);
    let g = Grid1D::new(8.0, 321).unwrap();
    let gap = position_gap(&spec, &g).unwrap().unwrap();
    assert!((gap - 1.0).abs() < 1e-3, "{gap}");
    let (eq, ops) = model(spec, 8.0, 8.0, 161, 161);
    let lm = micro_coercivity(&eq).unwrap();
    assert!((lm - 1.0).abs() < 2e-3, "{lm}");
    // lambda_M = sigma_n lambda_P.
    let lbig = macro_coercivity(&ops).unwrap();
    assert!((lbig - eq.sigma_normalized).abs() < 5e-3, "{lbig}");
}

#[test]
fn gap_transfers_through_sigma() {
    let spec = PotentialSpec::power(2.0, 1.5);
    let (eq, ops) = model(spec, 8.0, 14.0, 161, 81);
    let lp = position_gap(&spec, &eq.grid().x).unwrap().unwrap();
    let lbig = macro_coercivity(&ops).unwrap();
    let expect = eq.sigma_normalized * lp;
    assert!((lbig - expect).abs() < 1e-2 * expect, "{lbig} vs {expect}");
}

#[test]
fn elliptic_solve_identities() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 81, 81);
    let nx = eq.grid().nx();
    let u = solve_elliptic(&DensityField::new(vec![1.0; nx]), &ops).unwrap();
    // Zero extension perturbs only the outermost cells, where rho_star is negligible.
    let wx = eq.grid().x.weights();
    let weighted: f64 = (0..nx)
        .map(|i| wx[i] * eq.rho_star.values[i] * (u.values[i] - 1.0).powi(2))
        .sum();
    assert!(weighted < 1e-12, "{weighted}");
    for (x, v) in eq.grid().x.nodes().iter().zip(&u.values) {
        if x.abs() <= 4.0 {
            assert!((v - 1.0).abs() < 1e-10, "u({x}) = {v}");
        }
    }
    // Energy identity for (G + K) u = G r: u^T G u + u^T K u = r^T G u.
    let r = DensityField::from_fn(&eq.grid().x, |x| (0.7 * x).sin() + 0.2 * x);
    let u = solve_elliptic(&r, &ops).unwrap();
    let gu: f64 = (0..nx)
        .map(|i| wx[i] * eq.rho_star.values[i] * u.values[i] * u.values[i])
        .sum();
    let gr: f64 = (0..nx)
        .map(|i| wx[i] * eq.rho_star.values[i] * r.values[i] * u.values[i])
        .sum();
    let uf = lift(&u, &eq);
    let tu = ops.apply_t(&uf);
    let ku = inner_product_mu(&tu, &tu, &eq).unwrap();
    assert!((gu + ku - gr).abs() < 1e-10 * gr.abs());
}

#[test]
fn a_annihilates_equilibrium() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let u = apply_a_u(&eq.f_star, &eq, &ops).unwrap();
    let m = u.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(m < 1e-12, "{m}");
}

#[test]
fn transport_of_macro_state_gives_diffusion_energy() {
    // ||T (u f_star)||^2 = sigma_n int |u'|^2 rho_star dx.
    let (eq, ops) = model(PotentialSpec::power(2.0, 1.5), 8.0, 14.0, 161, 161);
    let u = DensityField::from_fn(&eq.grid().x, |x| (0.5 * x).sin());
    let tf = ops.apply_t(&lift(&u, &eq));
    let lhs = inner_product_mu(&tf, &tf, &eq).unwrap();
    let zx = simpson(|x| (-br(x).powi(2) / 2.0).exp(), -8.0, 8.0, 4000);
    let rhs = eq.sigma_normalized
        * simpson(
            |x| (0.25 * (0.5 * x).cos().powi(2)) * (-br(x).powi(2) / 2.0).exp() / zx,
            -8.0,
            8.0,
            4000,
        );
    assert!((lhs - rhs).abs() < 1e-2 * rhs, "{lhs} vs {rhs}");
}

#[test]
fn entropy_is_equivalent_to_norm() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let delta = 0.4;
    for f in random_states(&eq, 12, 7) {
        let n2 = inner_product_mu(&f, &f, &eq).unwrap();
        let h = entropy_h(&f, delta, &eq, &ops).unwrap();
        assert!(h >= 0.5 * (1.0 - delta) * n2 * (1.0 - 1e-12));
        assert!(h <= 0.5 * (1.0 + delta) * n2 * (1.0 + 1e-12));
    }
}

#[test]
fn step_ratios_are_finite() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let states = random_states(&eq, 16, 3);
    let r = step_ratios(&states, &eq, &ops).unwrap();
    for v in [r.al_linear, r.al_sqrt, r.at_perp, r.improved_poincare] {
        assert!(v.is_finite() && v >= 0.0, "{r:?}");
    }
    assert!(r.al_sqrt > 0.0 && r.at_perp > 0.0);
    // |phi'|^2 = x^2 <= X^2 for the quadratic potential.
    assert!(r.improved_poincare <= 64.0);
}

#[test]
fn dissipation_matches_entropy_slope() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let c = hypo_constants(&eq, &ops, None, 1).unwrap();
    let f0 = bump_initial(&eq, 0.8, 0.0, 0.0, 1.5, 2.0);
    let opts = TrajectoryOptions {
        schedule: Schedule {
            dt: 0.005,
            t_final: 2.0,
            sample_stride: 4,
        },
        delta: c.delta,
        powers: MomentPowers { k: vec![], ell: vec![] },
        scheme: Scheme::CrankNicolson,
        monitor_max_principle: false,
    };
    let rec = run_trajectory(&InitialState::Kinetic(f0), &opts, &eq, &ops).unwrap();
    let n = rec.len();
    for k in 1..n - 1 {
        let (d, fd) = (rec.dissipation_d[k], rec.dissipation_fd[k]);
        assert!(
            (d - fd).abs() < 2e-2 * d.abs().max(1e-12),
            "t {}: {d} vs {fd}",
            rec.times[k]
        );
    }
}
