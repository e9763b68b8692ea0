//! Potentials, the Gibbs state, the diffusion coefficient and moment formulas.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{bracket, DensityField, Field, PhaseGrid, Variable};
use crate::quadrature::integrate_half_line;
use statrs::function::gamma::{gamma, ln_gamma};

/// Boundary-to-peak ratio of `f_star` required on the truncated box.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XMode {
    Power { alpha: f64 },
    Logarithmic { gamma: f64 },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub x_mode: XMode,
    pub beta: f64,
}

impl PotentialSpec {
    pub fn power(alpha: f64, beta: f64) -> Self {
        PotentialSpec {
            x_mode: XMode::Power { alpha },
            beta,
        }
    }

    pub fn logarithmic(gamma: f64, beta: f64) -> Self {
        PotentialSpec {
            x_mode: XMode::Logarithmic { gamma },
            beta,
        }
    }

    pub fn zero(beta: f64) -> Self {
        PotentialSpec {
            x_mode: XMode::Zero,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Argument(format!("beta must be positive, got {}", self.beta)));
        }
        match self.x_mode {
            XMode::Power { alpha } if !(alpha > 0.0) || !alpha.is_finite() => {
                Err(Error::Argument(format!("alpha must be positive, got {alpha}")))
            }
            XMode::Logarithmic { gamma } if !(gamma > 0.0) || !gamma.is_finite() => {
                Err(Error::Argument(format!("gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `e^{-phi}` is integrable on R^d.
    pub fn integrable(&self, d: usize) -> bool {
        match self.x_mode {
            XMode::Power { .. } => true,
            XMode::Logarithmic { gamma } => gamma > d as f64,
            XMode::Zero => false,
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match self.x_mode {
            XMode::Power { alpha } => bracket(x).powf(alpha) / alpha,
            XMode::Logarithmic { gamma } => gamma * bracket(x).ln(),
            XMode::Zero => 0.0,
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        let b = bracket(x);
        match self.x_mode {
            XMode::Power { alpha } => x * b.powf(alpha - 2.0),
            XMode::Logarithmic { gamma } => gamma * x / (b * b),
            XMode::Zero => 0.0,
        }
    }

    pub fn psi(&self, v: f64) -> f64 {
        bracket(v).powf(self.beta) / self.beta
    }

    pub fn dpsi(&self, v: f64) -> f64 {
        v * bracket(v).powf(self.beta - 2.0)
    }
}

/// `phi(point)` for `Variable::X`, `psi(point)` for `Variable::V`.
pub fn eval_potential(spec: &PotentialSpec, variable: Variable, point: f64) -> Result<f64> {
    spec.validate()?;
    Ok(match variable {
        Variable::X => spec.phi(point),
        Variable::V => spec.psi(point),
    })
}

/// Discrete Gibbs state and the measure weights derived from it.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    spec: PotentialSpec,
    grid: PhaseGrid,
    pub f_star: Field,
    pub rho_star: DensityField,
    /// Velocity profile `e^{-psi} / sum(w_v e^{-psi})`.
    pub g_star: Vec<f64>,
    pub z_constant: f64,
    /// The diffusion coefficient as printed, without velocity normalization.
    pub sigma: f64,
    /// `sigma / int e^{-psi} dv`, the coefficient the diffusion limit actually produces.
    pub sigma_normalized: f64,
    pub integrable: bool,
    z_x: f64,
    z_v: f64,
    weights: Vec<f64>,
    mu_weights: Vec<f64>,
}

impl Equilibrium {
    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Tensor quadrature weights `w_ij`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_ij / f_star_ij`.
    pub fn mu_weights(&self) -> &[f64] {
        &self.mu_weights
    }

    pub(crate) fn mu_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mu = &self.mu_weights;
        exec::sum(a.len(), |k| mu[k] * a[k] * b[k])
    }

    /// `rho_star` at an arbitrary position, with the discrete normalization.
    pub fn rho_star_at(&self, x: f64) -> f64 {
        (-self.spec.phi(x)).exp() / self.z_x
    }

    /// `g_star` at an arbitrary velocity, with the discrete normalization.
    pub fn g_star_at(&self, v: f64) -> f64 {
        (-self.spec.psi(v)).exp() / self.z_v
    }
}

pub fn build_equilibrium(spec: &PotentialSpec, grid: &PhaseGrid) -> Result<Equilibrium> {
    build_equilibrium_with_tol(spec, grid, DEFAULT_BOUNDARY_TOL)
}

pub fn build_equilibrium_with_tol(spec: &PotentialSpec, grid: &PhaseGrid, boundary_tol: f64) -> Result<Equilibrium> {
    spec.validate()?;
    let integrable = spec.integrable(1);
    let ex: Vec<f64> = grid.x.nodes().iter().map(|x| (-spec.phi(*x)).exp()).collect();
    let ev: Vec<f64> = grid.v.nodes().iter().map(|v| (-spec.psi(*v)).exp()).collect();
    let z_x = if integrable { grid.x.integrate(&ex) } else { 1.0 };
    let z_v = grid.v.integrate(&ev);
    let rho: Vec<f64> = ex.iter().map(|e| e / z_x).collect();
    let g: Vec<f64> = ev.iter().map(|e| e / z_v).collect();
    if rho.iter().chain(&g).any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidEquilibrium(
            "f_star underflows or is non-finite on the grid".into(),
        ));
    }

    let v_ratio = g[0].max(g[g.len() - 1]) / g.iter().cloned().fold(0.0, f64::max);
    if v_ratio > boundary_tol {
        return Err(Error::Truncation(format!(
            "velocity boundary carries f_star ratio {v_ratio:.3e} > {boundary_tol:.1e}; enlarge v_half_width"
        )));
    }
    if integrable {
        let x_ratio = rho[0].max(rho[rho.len() - 1]) / rho.iter().cloned().fold(0.0, f64::max);
        if x_ratio > boundary_tol {
            return Err(Error::Truncation(format!(
                "position boundary carries f_star ratio {x_ratio:.3e} > {boundary_tol:.1e}; enlarge x_half_width"
            )));
        }
    }

    let mut f = Vec::with_capacity(grid.len());
    for r in &rho {
        for gv in &g {
            f.push(r * gv);
        }
    }
    let f_star = Field::from_values(grid, f)?;
    let weights = grid.weights();
    let mu_weights = weights.iter().zip(&f_star.values).map(|(w, fs)| w / fs).collect();
    let sigma = diffusion_sigma(spec.beta, 1)?;
    let sigma_normalized = sigma / velocity_mass(spec.beta, 1)?;
    Ok(Equilibrium {
        spec: *spec,
        grid: grid.clone(),
        f_star,
        rho_star: DensityField::new(rho),
        g_star: g,
        z_constant: z_x * z_v,
        sigma,
        sigma_normalized,
        integrable,
        z_x,
        z_v,
        weights,
        mu_weights,
    })
}

/// `|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

fn radial_integral<F: Fn(f64) -> f64>(d: usize, f: F) -> Result<f64> {
    let area = sphere_area(d);
    let dm1 = (d - 1) as i32;
    integrate_half_line(|r| r.powi(dm1) * f(r), QUAD_TOL).map(|v| area * v)
}

fn check_beta_d(beta: f64, d: usize) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Argument(format!("beta must be positive, got {beta}")));
    }
    if d == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// `sigma = (1/d) int |v|^2 <v>^{2 beta - 4} e^{-<v>^beta / beta} dv`.
pub fn diffusion_sigma(beta: f64, d: usize) -> Result<f64> {
    check_beta_d(beta, d)?;
    let s = radial_integral(d, |r| {
        let b = bracket(r);
        r * r * b.powf(2.0 * beta - 4.0) * (-b.powf(beta) / beta).exp()
    })?;
    Ok(s / d as f64)
}

/// `int e^{-<v>^beta / beta} dv` over R^d.
pub fn velocity_mass(beta: f64, d: usize) -> Result<f64> {
    check_beta_d(beta, d)?;
    radial_integral(d, |r| (-bracket(r).powf(beta) / beta).exp())
}

/// `M_{k,eta} = int <x>^k e^{-<x>^eta / eta} dx` by quadrature, and the Gamma-function upper bound.
pub fn moment_closed_form(k: f64, eta: f64, d: usize) -> Result<(f64, f64)> {
    if !(k >= 0.0) || !(eta > 0.0) || d == 0 {
        return Err(Error::Argument(format!(
            "need k >= 0, eta > 0, d >= 1; got k = {k}, eta = {eta}, d = {d}"
        )));
    }
    let exact = radial_integral(d, |r| {
        let b = bracket(r);
        b.powf(k) * (-b.powf(eta) / eta).exp()
    })?;
    let df = d as f64;
    let lead = 1f64.max(2f64.powf(k / 2.0 - 1.0)) * sphere_area(d);
    let log_terms = [ln_gamma(df / eta), (k / eta) * eta.ln() + ln_gamma((df + k) / eta)];
    let pref = ((df - eta) / eta) * eta.ln();
    let bound = lead * (log_terms[0] + pref).exp() + lead * (log_terms[1] + pref).exp();
    if !bound.is_finite() || !exact.is_finite() {
        return Err(Error::Numerical(format!(
            "moment formula out of range for k = {k}, eta = {eta}"
        )));
    }
    Ok((exact, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_values() {
        let s = PotentialSpec::power(2.0, 1.0);
        assert_eq!(eval_potential(&s, Variable::X, 0.0).unwrap(), 0.5);
        assert_eq!(eval_potential(&s, Variable::V, 0.0).unwrap(), 1.0);
        let l = PotentialSpec::logarithmic(3.0, 2.0);
        assert_eq!(eval_potential(&l, Variable::X, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = [
            PotentialSpec::power(0.5, 0.5),
            PotentialSpec::power(2.0, 2.0),
            PotentialSpec::logarithmic(3.0, 1.5),
        ];
        for s in specs {
            for &z in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
                let h = 1e-6;
                let dphi = (s.phi(z + h) - s.phi(z - h)) / (2.0 * h);
                let dpsi = (s.psi(z + h) - s.psi(z - h)) / (2.0 * h);
                assert!((dphi - s.dphi(z)).abs() < 1e-8);
                assert!((dpsi - s.dpsi(z)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn truncation_is_detected() {
        let grid = PhaseGrid::new(8.0, 8.0, 33, 33).unwrap();
        let err = build_equilibrium(&PotentialSpec::power(2.0, 0.5), &grid).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }
}
