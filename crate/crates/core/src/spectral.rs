//! Functional-inequality constants as constrained generalized eigenvalues.
//!
//! Every eigenvalue-based constant is the minimum of
//! `u^T K u / u^T M u` over `{u : p^T u = 0}`, where `K` is a banded stiffness
//! matrix, `M` a positive diagonal mass matrix and `p` the weights defining the
//! subtracted average. Inverse iteration runs on `M^{-1/2} K M^{-1/2}`.

use crate::equilibria::{Equilibrium, PotentialSpec, XMode};
use crate::error::{Error, Result};
use crate::grid::{bracket, DensityField, Grid1D};
use crate::linalg::SymBanded;
use crate::operators::OperatorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    Poincare,
    WeightedPoincare,
    HardyPoincare,
    Nash,
    Ckn,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InequalityEstimate {
    pub kind: InequalityKind,
    pub constant: f64,
    pub grid_spacing: f64,
    pub converged: bool,
}

/// Which measure defines the average `u_bar` subtracted on the mass side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageChoice {
    #[default]
    MassWeighted,
    /// Average against the measure carried by the gradient term.
    LhsWeighted,
}

#[derive(Debug, Clone)]
pub struct Pencil {
    pub stiffness: SymBanded,
    pub mass: Vec<f64>,
    pub average_weights: Vec<f64>,
}

impl Pencil {
    /// Stiffness `sum_i s_{i+1/2} (u_{i+1} - u_i)^2 / h` and mass `w_i m(x_i)` on a 1-D grid.
    pub fn from_weights<S, M>(grid: &Grid1D, stiff_weight: S, mass_weight: M, avg: AverageChoice) -> Self
    where
        S: Fn(f64) -> f64,
        M: Fn(f64) -> f64,
    {
        let n = grid.count();
        let h = grid.spacing();
        let mut stiffness = SymBanded::zeros(n, 1);
        for i in 0..n - 1 {
            let c = stiff_weight(grid.midpoint(i as isize)) / h;
            stiffness.add(i, i, c);
            stiffness.add(i + 1, i + 1, c);
            stiffness.add(i + 1, i, -c);
        }
        let w = grid.weights();
        let mass: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&w)
            .map(|(x, wi)| wi * mass_weight(*x))
            .collect();
        let average_weights = match avg {
            AverageChoice::MassWeighted => mass.clone(),
            AverageChoice::LhsWeighted => grid
                .nodes()
                .iter()
                .zip(&w)
                .map(|(x, wi)| wi * stiff_weight(*x))
                .collect(),
        };
        Pencil {
            stiffness,
            mass,
            average_weights,
        }
    }

    /// `u^T K u / (u - u_bar)^T M (u - u_bar)`.
    pub fn quotient(&self, u: &[f64]) -> f64 {
        let pw: f64 = self.average_weights.iter().sum();
        let ubar: f64 = self.average_weights.iter().zip(u).map(|(p, x)| p * x).sum::<f64>() / pw;
        let den: f64 = self.mass.iter().zip(u).map(|(m, x)| m * (x - ubar).powi(2)).sum();
        self.stiffness.quadratic(u) / den
    }

    /// Smallest constrained eigenvalue and its eigenvector (in `u` coordinates).
    pub fn smallest(&self) -> Result<(f64, Vec<f64>)> {
        smallest_constrained(&self.stiffness, &self.mass, &self.average_weights)
    }
}

/// Minimum of `u^T K u / u^T M u` subject to `p^T u = 0`.
pub fn smallest_constrained(stiffness: &SymBanded, mass: &[f64], p: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = stiffness.n();
    if mass.len() != n || p.len() != n || n < 3 {
        return Err(Error::Dimension("pencil sizes disagree".into()));
    }
    if mass.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Numerical("mass weights must be positive".into()));
    }
    let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let c = stiffness.congruence_inv_sqrt(mass);
    let mut q: Vec<f64> = p.iter().zip(&sqrt_m).map(|(a, s)| a / s).collect();
    normalize(&mut q);
    let max_diag = (0..n).map(|i| c.get(i, i)).fold(0.0, f64::max);
    let tau = 1e-6 * max_diag.max(1e-300);
    let mut shifted = c.clone();
    for i in 0..n {
        shifted.add(i, i, tau);
    }
    let chol = shifted.cholesky()?;
    let zq = chol.solve(&q);
    let qzq = dot(&q, &zq);

    // Start from a low-degree mix so both parities are represented.
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let s = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            (s + 0.3 * s * s + 0.05) * sqrt_m[i]
        })
        .collect();
    project(&mut y, &q);
    normalize(&mut y);
    let mut lambda = f64::INFINITY;
    for it in 0..200_000 {
        let z1 = chol.solve(&y);
        let mu = dot(&q, &z1) / qzq;
        let mut z: Vec<f64> = z1.iter().zip(&zq).map(|(a, b)| a - mu * b).collect();
        project(&mut z, &q);
        normalize(&mut z);
        let cz = c.apply(&z);
        let new_lambda = dot(&z, &cz);
        let settled = (new_lambda - lambda).abs() <= 1e-14 * new_lambda.abs().max(1e-300);
        lambda = new_lambda;
        y = z;
        if it > 3 && settled {
            let mut r: Vec<f64> = cz.iter().zip(&y).map(|(a, b)| a - lambda * b).collect();
            project(&mut r, &q);
            if dot(&r, &r).sqrt() <= 1e-6 * lambda.abs().max(1e-300) {
                break;
            }
        }
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Numerical(format!(
            "inverse iteration returned a nonpositive eigenvalue {lambda}"
        )));
    }
    let u = y.iter().zip(&sqrt_m).map(|(a, s)| a / s).collect();
    Ok((lambda, u))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(a: &mut [f64]) {
    let n = dot(a, a).sqrt();
    a.iter_mut().for_each(|x| *x /= n);
}

fn project(a: &mut [f64], q: &[f64]) {
    let c = dot(a, q);
    a.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
}

fn refined(grid: &Grid1D, level: u32) -> Result<Grid1D> {
    let factor = 1usize << level;
    Grid1D::new(grid.half_width(), (grid.count() - 1) * factor + 1)
}

/// Evaluates on `grid` and two successive refinements; reports the finest value.
fn with_refinement<F>(kind: InequalityKind, grid: &Grid1D, solve: F) -> Result<InequalityEstimate>
where
    F: Fn(&Grid1D) -> Result<f64>,
{
    let g1 = refined(grid, 1)?;
    let g2 = refined(grid, 2)?;
    let l0 = solve(grid)?;
    let l1 = solve(&g1)?;
    let l2 = solve(&g2)?;
    let converged = ((l1 - l0) / l1).abs() < 0.01 && ((l2 - l1) / l2).abs() < 0.01;
    Ok(InequalityEstimate {
        kind,
        constant: l2,
        grid_spacing: g2.spacing(),
        converged,
    })
}

/// Constant computed by `solve` on grids of fixed spacing and growing half-width.
pub fn domain_sweep<F>(half_widths: &[f64], spacing: f64, solve: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&Grid1D) -> Result<f64>,
{
    if !(spacing > 0.0) {
        return Err(Error::Argument(format!("spacing must be positive, got {spacing}")));
    }
    half_widths
        .iter()
        .map(|&x| {
            let count = 2 * (x / spacing).round() as usize + 1;
            let g = Grid1D::new(x, count)?;
            solve(&g).map(|c| (x, c))
        })
        .collect()
}

/// Spectral gap of `e^{-phi} dx` for the position potential of `spec`.
pub fn poincare_constant(spec: &PotentialSpec, grid: &Grid1D) -> Result<InequalityEstimate> {
    spec.validate()?;
    with_refinement(InequalityKind::Poincare, grid, |g| poincare_on(spec, g, 1.0))
}

/// Same as [`poincare_constant`] for the measure `scale * e^{-phi} dx`, without refinement.
pub fn poincare_on(spec: &PotentialSpec, grid: &Grid1D, scale: f64) -> Result<f64> {
    let w = |x: f64| scale * (-spec.phi(x)).exp();
    Pencil::from_weights(grid, w, w, AverageChoice::MassWeighted)
        .smallest()
        .map(|r| r.0)
}

pub fn weighted_poincare_pencil(alpha: f64, grid: &Grid1D, avg: AverageChoice) -> Pencil {
    let spec = PotentialSpec::power(alpha, 1.0);
    Pencil::from_weights(
        grid,
        |x| (-spec.phi(x)).exp(),
        |x| (-spec.phi(x)).exp() * bracket(x).powf(-2.0 * (1.0 - alpha)),
        avg,
    )
}

/// `int |u'|^2 e^{-phi} >= C int |u - u_bar|^2 <x>^{-2(1-alpha)} e^{-phi}` for `phi = <x>^alpha / alpha`.
pub fn weighted_poincare_constant(alpha: f64, grid: &Grid1D, avg: AverageChoice) -> Result<InequalityEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!(
            "weighted Poincare needs alpha in (0,1), got {alpha}"
        )));
    }
    with_refinement(InequalityKind::WeightedPoincare, grid, |g| {
        weighted_poincare_pencil(alpha, g, avg).smallest().map(|r| r.0)
    })
}

pub fn hardy_poincare_pencil(gamma: f64, k: f64, grid: &Grid1D, avg: AverageChoice) -> Pencil {
    Pencil::from_weights(
        grid,
        |x| bracket(x).powf(k - gamma),
        |x| bracket(x).powf(k - 2.0 - gamma),
        avg,
    )
}

/// `int |u'|^2 <x>^{k-gamma} >= C int |u - u_bar|^2 <x>^{k-2-gamma}`.
pub fn hardy_poincare_constant(gamma: f64, k: f64, grid: &Grid1D, avg: AverageChoice) -> Result<InequalityEstimate> {
    if !(gamma > 0.0) || !k.is_finite() {
        return Err(Error::Argument(format!(
            "invalid Hardy-Poincare parameters gamma = {gamma}, k = {k}"
        )));
    }
    with_refinement(InequalityKind::HardyPoincare, grid, |g| {
        hardy_poincare_pencil(gamma, k, g, avg).smallest().map(|r| r.0)
    })
}

/// Microscopic constant: `-<Lf,f> >= lambda_m ||(1-Pi) f||_beta^2`, exact for the discrete `L`.
pub fn micro_coercivity(eq: &Equilibrium) -> Result<f64> {
    let grid = &eq.grid().v;
    let n = grid.count();
    let h = grid.spacing();
    let mut stiffness = SymBanded::zeros(n, 1);
    for j in 0..n - 1 {
        let c = eq.g_star_at(grid.midpoint(j as isize)) / h;
        stiffness.add(j, j, c);
        stiffness.add(j + 1, j + 1, c);
        stiffness.add(j + 1, j, -c);
    }
    let w = grid.weights();
    let expo = -2.0 * (1.0 - eq.spec().beta).max(0.0);
    let p: Vec<f64> = w.iter().zip(&eq.g_star).map(|(a, b)| a * b).collect();
    let mass: Vec<f64> = p
        .iter()
        .zip(grid.nodes())
        .map(|(a, v)| a * bracket(*v).powf(expo))
        .collect();
    smallest_constrained(&stiffness, &mass, &p).map(|r| r.0)
}

/// Macroscopic constant: `||T Pi f||^2 >= lambda_M ||Pi f||^2` on zero-mass states.
pub fn macro_coercivity(ops: &OperatorSet) -> Result<f64> {
    smallest_constrained(&ops.macro_stiffness, &ops.macro_mass, &ops.macro_mass).map(|r| r.0)
}

/// Poincare constant of the position measure, or `None` when no spectral gap is expected.
pub fn position_gap(spec: &PotentialSpec, grid: &Grid1D) -> Result<Option<f64>> {
    match spec.x_mode {
        XMode::Power { alpha } if alpha >= 1.0 => poincare_on(spec, grid, 1.0).map(Some),
        _ => Ok(None),
    }
}

/// CKN exponent `a = (d + 2k - gamma) / (d + 2 + 2k - gamma)`.
pub fn ckn_exponent(d: usize, k: f64, gamma: f64) -> f64 {
    let d = d as f64;
    (d + 2.0 * k - gamma) / (d + 2.0 + 2.0 * k - gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioKind {
    Nash,
    Ckn { k: f64, gamma: f64 },
}

/// LHS over the RHS product (without the constant); any value is a lower bound on the best constant.
pub fn inequality_ratio(kind: RatioKind, u: &DensityField, grid: &Grid1D) -> Result<f64> {
    if u.len() != grid.count() {
        return Err(Error::Dimension("density does not match grid".into()));
    }
    if u.values.iter().all(|v| *v == 0.0) {
        return Err(Error::Argument("inequality ratio of the zero function".into()));
    }
    if u.values.iter().any(|v| *v < 0.0) {
        return Err(Error::Argument("inequality ratio needs a nonnegative function".into()));
    }
    let h = grid.spacing();
    let x = grid.nodes();
    let (lhs_w, grad_w, mom_w): (Vec<f64>, Vec<f64>, Vec<f64>) = match kind {
        RatioKind::Nash => (vec![1.0; x.len()], vec![1.0; x.len() - 1], vec![1.0; x.len()]),
        RatioKind::Ckn { k, gamma } => (
            x.iter().map(|z| bracket(*z).powf(-gamma)).collect(),
            (0..x.len() - 1)
                .map(|i| bracket(grid.midpoint(i as isize)).powf(-gamma))
                .collect(),
            x.iter().map(|z| bracket(*z).powf(k - gamma)).collect(),
        ),
    };
    let sq: Vec<f64> = u.values.iter().zip(&lhs_w).map(|(a, w)| a * a * w).collect();
    let l2 = grid.integrate(&sq);
    let grad: f64 = (0..x.len() - 1)
        .map(|i| grad_w[i] * (u.values[i + 1] - u.values[i]).powi(2) / h)
        .sum();
    let m: Vec<f64> = u.values.iter().zip(&mom_w).map(|(a, w)| a * w).collect();
    let l1 = grid.integrate(&m);
    match kind {
        RatioKind::Nash => Ok(l2.sqrt() / (grad.sqrt().powf(1.0 / 3.0) * l1.powf(2.0 / 3.0))),
        RatioKind::Ckn { k, gamma } => {
            let a = ckn_exponent(1, k, gamma);
            Ok(l2 / (grad.powf(a) * l1.powf(2.0 * (1.0 - a))))
        }
    }
}

/// Family maximum of the ratio over Gaussians and compact bumps of several widths.
pub fn family_lower_bound(kind: RatioKind, grid: &Grid1D) -> Result<f64> {
    let mut best = 0.0f64;
    for &s in &[0.5, 0.8, 1.0, 1.5, 2.0] {
        let gauss = DensityField::from_fn(grid, |x| (-x * x / (2.0 * s * s)).exp());
        best = best.max(inequality_ratio(kind, &gauss, grid)?);
        let bump = DensityField::from_fn(grid, |x| {
            let r = x / (2.0 * s);
            if r.abs() < 1.0 {
                (1.0 - r * r).powi(2)
            } else {
                0.0
            }
        });
        best = best.max(inequality_ratio(kind, &bump, grid)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_gap_is_one() {
        let g = Grid1D::new(8.0, 257).unwrap();
        let l = poincare_on(&PotentialSpec::power(2.0, 1.0), &g, 1.0).unwrap();
        assert!((l - 1.0).abs() < 1e-3, "{l}");
    }

    #[test]
    fn ckn_exponent_arithmetic() {
        assert!((ckn_exponent(1, 2.0, 0.0) - 5.0 / 7.0).abs() < 1e-15);
    }
}
