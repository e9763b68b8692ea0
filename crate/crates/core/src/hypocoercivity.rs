//! Constant algebra (`delta_star`, `lambda`), the entropy `H`, the entropy
//! production `D` and decay envelopes.

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{inner_product_mu, mass, norm_beta, norm_mu, DensityField, Field};
use crate::operators::{
    apply_a_u, apply_pi, atpi_quadratic_form, lift, lifted_inner, macroscopic_u, solve_elliptic, OperatorSet,
};
use crate::spectral::{macro_coercivity, micro_coercivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypoConstants {
    pub lambda_m: f64,
    #[serde(rename = "lambda_M")]
    pub lambda_big_m: f64,
    #[serde(rename = "c_M")]
    pub c_m: f64,
    pub delta_star: f64,
    pub delta: f64,
    pub lambda_rate: f64,
}

/// `K_M = lambda_M / (1 + lambda_M)`.
pub fn k_m(lambda_big_m: f64) -> f64 {
    lambda_big_m / (1.0 + lambda_big_m)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {v}")))
    }
}

/// `delta_star = 4 K_M lambda_m / (4 K_M + C_M^2)`.
pub fn delta_star(lambda_m: f64, lambda_big_m: f64, c_m: f64) -> Result<f64> {
    positive("lambda_m", lambda_m)?;
    positive("lambda_M", lambda_big_m)?;
    positive("C_M", c_m)?;
    let km = k_m(lambda_big_m);
    Ok(4.0 * km * lambda_m / (4.0 * km + c_m * c_m))
}

/// `delta^2 (C_M + lambda/2)^2 - 4 (lambda_m - delta - lambda/2)(delta K_M - lambda/2)`.
pub fn rate_quadratic(lambda_m: f64, lambda_big_m: f64, c_m: f64, delta: f64, lambda: f64) -> f64 {
    let s = 0.5 * lambda;
    delta * delta * (c_m + s).powi(2) - 4.0 * (lambda_m - delta - s) * (delta * k_m(lambda_big_m) - s)
}

/// `(lambda_m - delta - lambda/2) X^2 - delta (C_M + lambda/2) X Y + (delta K_M - lambda/2) Y^2`.
pub fn rate_form(lambda_m: f64, lambda_big_m: f64, c_m: f64, delta: f64, lambda: f64, x: f64, y: f64) -> f64 {
    let s = 0.5 * lambda;
    (lambda_m - delta - s) * x * x - delta * (c_m + s) * x * y + (delta * k_m(lambda_big_m) - s) * y * y
}

/// The root of [`rate_quadratic`] in `[0, min(2(lambda_m - delta), 2 delta K_M)]`.
pub fn lambda_rate(lambda_m: f64, lambda_big_m: f64, c_m: f64, delta: f64) -> Result<f64> {
    let ds = delta_star(lambda_m, lambda_big_m, c_m)?;
    if !(delta > 0.0 && delta < ds) {
        return Err(Error::Argument(format!(
            "delta must lie in (0, delta_star = {ds}), got {delta}"
        )));
    }
    let km = k_m(lambda_big_m);
    let (a, b) = (lambda_m - delta, delta * km);
    // Quadratic in s = lambda / 2: qa s^2 + qb s + qc.
    let qa = delta * delta - 4.0;
    let qb = 2.0 * c_m * delta * delta + 4.0 * (a + b);
    let qc = delta * delta * c_m * c_m - 4.0 * a * b;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::Infeasible("rate quadratic has no real root".into()));
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let hi = a.min(b);
    let mut s = [q / qa, qc / q]
        .into_iter()
        .filter(|s| *s >= -1e-14 && *s <= hi + 1e-14)
        .fold(f64::NAN, |acc, s| if acc.is_nan() { s } else { acc.min(s) });
    if s.is_nan() {
        return Err(Error::Infeasible(format!(
            "no admissible root in [0, {hi}] for delta = {delta}"
        )));
    }
    for _ in 0..3 {
        let val = qa * s * s + qb * s + qc;
        let der = 2.0 * qa * s + qb;
        if der != 0.0 {
            s -= val / der;
        }
    }
    Ok(2.0 * s.clamp(0.0, hi))
}

/// `H[f] = 1/2 ||f||^2 + delta <A f, f>`.
pub fn entropy_h(f: &Field, delta: f64, eq: &Equilibrium, ops: &OperatorSet) -> Result<f64> {
    if !(0.0..2.0).contains(&delta) {
        return Err(Error::Argument(format!("delta must lie in [0, 2), got {delta}")));
    }
    let nf = inner_product_mu(f, f, eq)?;
    if delta == 0.0 {
        return Ok(0.5 * nf);
    }
    let u = apply_a_u(f, eq, ops)?;
    Ok(0.5 * nf + delta * lifted_inner(&u, f, eq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationComponents {
    /// `-<L f, f>`
    pub minus_lff: f64,
    /// `<A T Pi f, f>`
    pub atpi: f64,
    /// `<T A f, f>`
    pub taf: f64,
    /// `<A T (1 - Pi) f, f>`
    pub at_perp: f64,
    /// `<A L f, f>`
    pub alf: f64,
    pub total: f64,
    /// `||(1 - Pi) f||_beta^2 + <A T Pi f, Pi f>`
    pub kappa_denominator: f64,
    pub perp_norm: f64,
    pub perp_beta_norm: f64,
    pub norm_at_perp: f64,
    pub norm_alf: f64,
}

pub fn dissipation_components(
    f: &Field,
    delta: f64,
    eq: &Equilibrium,
    ops: &OperatorSet,
) -> Result<DissipationComponents> {
    let lf = ops.apply_l(f);
    let minus_lff = -inner_product_mu(&lf, f, eq)?;
    let pf = apply_pi(f, eq);
    let perp = f.sub(&pf);
    let atpi = atpi_quadratic_form(f, eq, ops)?;
    let af = lift(&apply_a_u(f, eq, ops)?, eq);
    let taf = inner_product_mu(&ops.apply_t(&af), f, eq)?;
    let u_perp = apply_a_u(&ops.apply_t(&perp), eq, ops)?;
    let at_perp = lifted_inner(&u_perp, f, eq);
    let u_l = apply_a_u(&lf, eq, ops)?;
    let alf = lifted_inner(&u_l, f, eq);
    let total = minus_lff + delta * atpi - delta * (taf - at_perp + alf);
    let perp_beta_norm = norm_beta(&perp, eq.spec().beta, eq)?;
    Ok(DissipationComponents {
        minus_lff,
        atpi,
        taf,
        at_perp,
        alf,
        total,
        kappa_denominator: perp_beta_norm * perp_beta_norm + atpi,
        perp_norm: norm_mu(&perp, eq)?,
        perp_beta_norm,
        norm_at_perp: lifted_norm(&u_perp, eq),
        norm_alf: lifted_norm(&u_l, eq),
    })
}

fn lifted_norm(u: &DensityField, eq: &Equilibrium) -> f64 {
    let wx = eq.grid().x.weights();
    u.values
        .iter()
        .zip(&eq.rho_star.values)
        .zip(&wx)
        .map(|((a, r), w)| a * a * r * w)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeKind {
    /// `h0 e^{-rate t}`
    Exponential { rate: f64 },
    /// `h0 (1 + c h0^{1/zeta} t)^{-zeta}`
    Algebraic { c: f64, zeta: f64 },
}

pub fn decay_envelope(kind: EnvelopeKind, h0: f64, times: &[f64]) -> Vec<f64> {
    match kind {
        EnvelopeKind::Exponential { rate } => times.iter().map(|t| h0 * (-rate * t).exp()).collect(),
        EnvelopeKind::Algebraic { c, zeta } => {
            let k = c * h0.powf(1.0 / zeta);
            times.iter().map(|t| h0 * (1.0 + k * t).powf(-zeta)).collect()
        }
    }
}

/// Seeded random states `f_star * h` with `h` a random low-degree polynomial plus nodal noise;
/// for integrable equilibria the `f_star` component is removed.
pub fn random_states(eq: &Equilibrium, count: usize, seed: u64) -> Vec<Field> {
    let grid = eq.grid();
    let sx = grid.x.half_width().min(3.0);
    let sv = grid.v.half_width().min(3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|n| {
            let mut c = [[0.0f64; 4]; 4];
            for row in c.iter_mut() {
                for e in row.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
            }
            let noise = if n % 2 == 0 { 0.0 } else { rng.gen_range(0.05..0.5) };
            let mut values = Vec::with_capacity(grid.len());
            for (i, &x) in grid.x.nodes().iter().enumerate() {
                let px = [1.0, x / sx, (x / sx).powi(2), (x / sx).powi(3)];
                for (j, &v) in grid.v.nodes().iter().enumerate() {
                    let pv = [1.0, v / sv, (v / sv).powi(2), (v / sv).powi(3)];
                    let mut h = 0.0;
                    for a in 0..4 {
                        for b in 0..4 {
                            h += c[a][b] * px[a] * pv[b];
                        }
                    }
                    if noise > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        h += noise * z;
                    }
                    values.push(h * eq.f_star.get(i, j));
                }
            }
            let mut f = eq.f_star.with_values(values);
            if eq.integrable {
                let m = mass(&f, grid);
                f = f.axpy(-m, &eq.f_star);
            }
            f
        })
        .collect()
}

/// `sup (||A T (1-Pi) f|| + ||A L f||) / ||(1-Pi) f||` over the supplied states.
pub fn estimate_c_m(states: &[Field], eq: &Equilibrium, ops: &OperatorSet) -> Result<f64> {
    let ratios: Vec<Result<f64>> = exec::map_indexed(states.len(), |k| {
        let d = dissipation_components(&states[k], 0.0, eq, ops)?;
        Ok((d.norm_at_perp + d.norm_alf) / d.perp_norm)
    });
    let mut best = 0.0f64;
    for r in ratios {
        best = best.max(r?);
    }
    Ok(best)
}

/// Suprema of the ratios controlling the cross terms, over states normalized to `||f|| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRatios {
    /// `|<A L (1-Pi) f, f>| / (||(1-Pi) f||_beta <A T Pi f, Pi f>)`
    pub al_linear: f64,
    /// `|<A L (1-Pi) f, f>| / (||(1-Pi) f||_beta <A T Pi f, Pi f>^{1/2})`
    pub al_sqrt: f64,
    /// `|<A T (1-Pi) f, Pi f>| / (||(1-Pi) f||_beta <A T Pi f, Pi f>^{1/2})`
    pub at_perp: f64,
    /// `int |u'|^2 |phi'|^2 rho_star / int |u'|^2 rho_star` for the elliptic solution `u`.
    pub improved_poincare: f64,
}

pub fn step_ratios(states: &[Field], eq: &Equilibrium, ops: &OperatorSet) -> Result<StepRatios> {
    let beta = eq.spec().beta;
    let xg = &eq.grid().x;
    let dx = xg.spacing();
    let mids: Vec<(f64, f64)> = (0..xg.count() - 1)
        .map(|i| {
            let m = xg.midpoint(i as isize);
            (eq.rho_star_at(m), eq.spec().dphi(m).powi(2))
        })
        .collect();
    let per_state: Vec<Result<Option<[f64; 4]>>> = exec::map_indexed(states.len(), |k| {
        let n = norm_mu(&states[k], eq)?;
        if n == 0.0 {
            return Ok(None);
        }
        let f = states[k].scaled(1.0 / n);
        let pf = apply_pi(&f, eq);
        let perp = f.sub(&pf);
        let perp_b = norm_beta(&perp, beta, eq)?;
        let atpi = atpi_quadratic_form(&f, eq, ops)?;
        if !(atpi > 1e-14 && perp_b > 1e-14) {
            return Ok(None);
        }
        let al = lifted_inner(&apply_a_u(&ops.apply_l(&perp), eq, ops)?, &f, eq).abs();
        let at = lifted_inner(&apply_a_u(&ops.apply_t(&perp), eq, ops)?, &pf, eq).abs();
        let u = solve_elliptic(&macroscopic_u(&f, eq), ops)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, (r, dphi2)) in mids.iter().enumerate() {
            let du = (u.values[i + 1] - u.values[i]) / dx;
            num += r * du * du * dphi2;
            den += r * du * du;
        }
        let ip = if den > 0.0 { num / den } else { 0.0 };
        Ok(Some([
            al / (perp_b * atpi),
            al / (perp_b * atpi.sqrt()),
            at / (perp_b * atpi.sqrt()),
            ip,
        ]))
    });
    let mut sup = [0.0f64; 4];
    for r in per_state {
        if let Some(v) = r? {
            for k in 0..4 {
                sup[k] = sup[k].max(v[k]);
            }
        }
    }
    Ok(StepRatios {
        al_linear: sup[0],
        al_sqrt: sup[1],
        at_perp: sup[2],
        improved_poincare: sup[3],
    })
}

/// Number of random states used for the empirical `C_M`.
pub const C_M_SUITE: usize = 32;

/// Full constant bundle; `delta = None` selects `delta_star / 2`.
pub fn hypo_constants(eq: &Equilibrium, ops: &OperatorSet, delta: Option<f64>, seed: u64) -> Result<HypoConstants> {
    let states = random_states(eq, C_M_SUITE, seed);
    let (lm, lbig, cm) = {
        let parts: Vec<Result<f64>> = exec::map_indexed(3, |k| match k {
            0 => micro_coercivity(eq),
            1 => macro_coercivity(ops),
            _ => estimate_c_m(&states, eq, ops),
        });
        let mut it = parts.into_iter();
        (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?)
    };
    let ds = delta_star(lm, lbig, cm)?;
    let delta = delta.unwrap_or(0.5 * ds);
    let rate = lambda_rate(lm, lbig, cm, delta)?;
    Ok(HypoConstants {
        lambda_m: lm,
        lambda_big_m: lbig,
        c_m: cm,
        delta_star: ds,
        delta,
        lambda_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_star_examples() {
        assert_eq!(delta_star(1.0, 1.0, 1.0).unwrap(), 2.0 / 3.0);
        assert!((delta_star(2.0, 1.0, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_rate_example() {
        let l = lambda_rate(1.0, 1.0, 1.0, 0.3).unwrap();
        assert!((l - 0.2080).abs() < 1e-3, "{l}");
        assert!(rate_quadratic(1.0, 1.0, 1.0, 0.3, l).abs() < 1e-12);
    }

    #[test]
    fn envelopes_start_at_h0() {
        let t = [0.0, 1.0, 3.0];
        let e = decay_envelope(EnvelopeKind::Exponential { rate: 0.7 }, 2.0, &t);
        assert_eq!(e[0], 2.0);
        let a = decay_envelope(EnvelopeKind::Algebraic { c: 0.5, zeta: 1.0 }, 2.0, &t);
        for (ti, ai) in t.iter().zip(&a) {
            assert!((ai - 2.0 / (1.0 + ti)).abs() < 1e-15);
        }
    }
}
