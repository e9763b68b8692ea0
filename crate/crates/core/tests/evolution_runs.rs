//! Trajectory-level checks: stationarity, time-step convergence and the diffusion limit.

use kfp_lab::equilibria::{build_equilibrium, Equilibrium, PotentialSpec};
use kfp_lab::evolution::{
    bump_initial, run_trajectory, InitialState, KineticStepper, MacroStepper, MomentPowers, Schedule, Scheme,
    TrajectoryOptions,
};
use kfp_lab::grid::{Field, PhaseGrid};
use kfp_lab::hypocoercivity::hypo_constants;
use kfp_lab::operators::{assemble, density, OperatorSet};

fn model(spec: PotentialSpec, xw: f64, vw: f64, nx: usize, nv: usize) -> (Equilibrium, OperatorSet) {
    let grid = PhaseGrid::new(xw, vw, nx, nv).unwrap();
    let eq = build_equilibrium(&spec, &grid).unwrap();
    let ops = assemble(&eq).unwrap();
    (eq, ops)
}

fn options(dt: f64, t_final: f64, delta: f64, scheme: Scheme) -> TrajectoryOptions {
    TrajectoryOptions {
        schedule: Schedule {
            dt,
            t_final,
            sample_stride: 1,
        },
        delta,
        powers: MomentPowers {
            k: vec![2.0],
            ell: vec![2.0],
        },
        scheme,
        monitor_max_principle: true,
    }
}

#[test]
fn equilibrium_stays_put() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let c = hypo_constants(&eq, &ops, None, 1).unwrap();
    let mut opts = options(0.1, 10.0, c.delta, Scheme::ImplicitEuler);
    opts.schedule.sample_stride = 5;
    let rec = run_trajectory(&InitialState::Kinetic(eq.f_star.clone()), &opts, &eq, &ops).unwrap();
    assert!(rec.norm_sq_mu.iter().all(|n| *n < 1e-6), "{:?}", rec.norm_sq_mu);
    assert!(rec.max_principle_ok.iter().all(|b| *b));
}

#[test]
fn implicit_euler_is_first_order() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 7.0, 7.0, 41, 41);
    let f0 = bump_initial(&eq, 0.8, 0.5, 0.0, 1.2, 2.0);
    let finals: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|dt| {
            let rec = run_trajectory(
                &InitialState::Kinetic(f0.clone()),
                &options(*dt, 1.0, 0.0, Scheme::ImplicitEuler),
                &eq,
                &ops,
            )
            .unwrap();
            *rec.norm_sq_mu.last().unwrap()
        })
        .collect();
    let ratio = (finals[0] - finals[1]).abs() / (finals[1] - finals[2]).abs();
    assert!((1.6..2.4).contains(&ratio), "ratio {ratio}, finals {finals:?}");
    let cn: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|dt| {
            let rec = run_trajectory(
                &InitialState::Kinetic(f0.clone()),
                &options(*dt, 1.0, 0.0, Scheme::CrankNicolson),
                &eq,
                &ops,
            )
            .unwrap();
            *rec.norm_sq_mu.last().unwrap()
        })
        .collect();
    let cn_ratio = (cn[0] - cn[1]).abs() / (cn[1] - cn[2]).abs();
    assert!(cn_ratio > 3.0, "CN ratio {cn_ratio}");
}

#[test]
fn entropy_decreases_and_moments_stay_bounded() {
    let (eq, ops) = model(PotentialSpec::power(2.0, 2.0), 8.0, 8.0, 65, 65);
    let c = hypo_constants(&eq, &ops, None, 1).unwrap();
    let f0 = bump_initial(&eq, 0.8, 1.0, 0.5, 1.5, 2.0);
    let mut opts = options(0.05, 5.0, c.delta, Scheme::ImplicitEuler);
    opts.schedule.sample_stride = 2;
    let rec = run_trajectory(&InitialState::Kinetic(f0), &opts, &eq, &ops).unwrap();
    let h0 = rec.entropy_h[0];
    assert!(rec.entropy_h.windows(2).all(|w| w[1] <= w[0] + 1e-8 * h0));
    assert!(rec.max_principle_ok.iter().all(|b| *b));
    let j = &rec.moments_j[0].1;
    assert!(j.iter().all(|v| *v <= 2.0 * j[0].max(1.0) * rec.bound_constant.powi(2)));
    let m0 = rec.mass[0];
    assert!(rec.mass.iter().all(|m| (m - m0).abs() <= 1e-9 * m0.abs().max(1.0)));
}

#[test]
fn density_follows_heat_flow_at_large_scales() {
    // Without confinement the equation is invariant under parabolic rescaling,
    // so a wide initial profile enters the diffusive regime after the initial layer.
    let (eq, ops) = model(PotentialSpec::zero(2.0), 60.0, 8.0, 241, 33);
    let s0 = 16.0;
    let profile = |x: f64| (-x * x / (2.0 * s0)).exp();
    let g = &eq.g_star;
    let nv = g.len();
    let mut f = Field::from_fn(eq.grid(), |x, _| profile(x));
    for (k, v) in f.values.iter_mut().enumerate() {
        *v *= g[k % nv];
    }
    let dt = 0.1;
    let ks = KineticStepper::new(&eq, &ops, dt, Scheme::ImplicitEuler).unwrap();
    let ms = MacroStepper::new(&ops, dt).unwrap();
    let mut rho = density(&f, &eq);
    let wx = eq.grid().x.weights();
    let l2 = |a: &[f64]| a.iter().zip(&wx).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    for step in 1..=200 {
        f = ks.step(&f).unwrap();
        rho = ms.step(&rho).unwrap();
        let t = step as f64 * dt;
        if t >= 5.0 && step % 25 == 0 {
            let rk = density(&f, &eq);
            let diff: Vec<f64> = rk.values.iter().zip(&rho.values).map(|(a, b)| a - b).collect();
            let rel = l2(&diff) / l2(&rho.values);
            assert!(rel < 0.10, "t = {t}: relative L2 gap {rel}");
        }
    }
}
