//! Fast invariant suite behind the `check` command.

use crate::equilibria::{build_equilibrium, PotentialSpec};
use crate::error::Result;
use crate::evolution::{KineticStepper, Scheme};
use crate::grid::{inner_product_mu, mass, norm_mu, Grid1D, PhaseGrid};
use crate::hypocoercivity::{delta_star, lambda_rate, random_states, rate_quadratic};
use crate::operators::{apply_a, apply_pi, assemble};
use crate::rates::{bihari_lasalle_envelope, bihari_lasalle_rk4, fit_series, FitKind};
use crate::spectral::poincare_constant;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn constant_algebra() -> Result<(bool, String)> {
    let ds = delta_star(1.0, 1.0, 1.0)?;
    let l = lambda_rate(1.0, 1.0, 1.0, 0.3)?;
    let res = rate_quadratic(1.0, 1.0, 1.0, 0.3, l).abs();
    Ok((
        ds == 2.0 / 3.0 && res < 1e-12,
        format!("delta_star = {ds}, lambda = {l:.6}, residual = {res:.1e}"),
    ))
}

fn operator_structure() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (spec, xw, vw) in [
        (PotentialSpec::power(2.0, 2.0), 8.0, 8.0),
        (PotentialSpec::power(1.0, 1.5), 22.0, 14.0),
    ] {
        let grid = PhaseGrid::new(xw, vw, 41, 41)?;
        let eq = build_equilibrium(&spec, &grid)?;
        let ops = assemble(&eq)?;
        let states = random_states(&eq, 4, 3);
        for f in &states {
            for g in &states {
                let n = norm_mu(f, &eq)? * norm_mu(g, &eq)?;
                let sym = inner_product_mu(&ops.apply_l(f), g, &eq)? - inner_product_mu(f, &ops.apply_l(g), &eq)?;
                let skew = inner_product_mu(&ops.apply_t(f), g, &eq)? + inner_product_mu(f, &ops.apply_t(g), &eq)?;
                let pi = inner_product_mu(&apply_pi(f, &eq), g, &eq)? - inner_product_mu(f, &apply_pi(g, &eq), &eq)?;
                worst = worst.max(sym.abs() / n).max(skew.abs() / n).max(pi.abs() / n);
            }
            let pf = apply_pi(f, &eq);
            let nf = norm_mu(f, &eq)?;
            worst = worst.max(norm_mu(&apply_pi(&pf, &eq).sub(&pf), &eq)? / nf);
            worst = worst.max(norm_mu(&apply_pi(&ops.apply_t(&pf), &eq), &eq)? / nf);
            let a = apply_a(f, &eq, &ops)?;
            let perp = norm_mu(&f.sub(&pf), &eq)?;
            if norm_mu(&a, &eq)? > 0.5 * perp * (1.0 + 1e-8) {
                worst = worst.max(1.0);
            }
        }
    }
    Ok((worst < 1e-10, format!("max relative defect {worst:.1e}")))
}

fn step_conservation() -> Result<(bool, String)> {
    let grid = PhaseGrid::new(7.0, 7.0, 33, 33)?;
    let eq = build_equilibrium(&PotentialSpec::power(2.0, 2.0), &grid)?;
    let ops = assemble(&eq)?;
    let stepper = KineticStepper::new(&eq, &ops, 0.1, Scheme::ImplicitEuler)?;
    let mut ok = true;
    let mut drift = 0.0f64;
    for f in random_states(&eq, 3, 5) {
        let g = stepper.step(&f)?;
        drift = drift.max((mass(&g, &grid) - mass(&f, &grid)).abs() / norm_mu(&f, &eq)?);
        ok &= norm_mu(&g, &eq)? <= norm_mu(&f, &eq)?;
    }
    Ok((ok && drift < 1e-9, format!("mass drift {drift:.1e}")))
}

fn exact_fits() -> Result<(bool, String)> {
    let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
    let y: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
    let a = fit_series(&t, &y, FitKind::Algebraic, (0.0, 9.75))?;
    let y: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
    let e = fit_series(&t, &y, FitKind::Exponential, (0.0, 9.75))?;
    Ok((
        (a.value - 2.0).abs() < 1e-6 && (e.value - 3.0).abs() < 1e-6,
        format!("algebraic {:.8}, exponential {:.8}", a.value, e.value),
    ))
}

fn envelopes() -> Result<(bool, String)> {
    let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    let mut worst = 0.0f64;
    for zeta in [0.5, 1.0, 2.0] {
        let a = bihari_lasalle_envelope(1.5, 0.7, zeta, &t);
        let b = bihari_lasalle_rk4(1.5, 0.7, zeta, &t, 1e-3);
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok((worst < 1e-6, format!("max deviation {worst:.1e}")))
}

fn gaussian_poincare() -> Result<(bool, String)> {
    let est = poincare_constant(&PotentialSpec::power(2.0, 2.0), &Grid1D::new(10.0, 129)?)?;
    Ok((
        (est.constant - 1.0).abs() < 0.02,
        format!("constant {:.5}", est.constant),
    ))
}

pub fn run_checks() -> Vec<CheckResult> {
    vec![
        result("constant_algebra", constant_algebra()),
        result("operator_structure", operator_structure()),
        result("step_conservation", step_conservation()),
        result("exact_fits", exact_fits()),
        result("bihari_lasalle", envelopes()),
        result("gaussian_poincare", gaussian_poincare()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
