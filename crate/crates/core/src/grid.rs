//! Truncated phase space, trapezoid quadrature and the weighted measure
//! `dmu = dx dv / f_star`.

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::exec;

/// `<v> = sqrt(1 + v^2)`.
pub fn bracket(v: f64) -> f64 {
    (1.0 + v * v).sqrt()
}

/// Uniform odd-sized grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
    spacing: f64,
    half_width: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, count: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Validation(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if count < 3 || count.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "node count must be odd and at least 3, got {count}"
            )));
        }
        let spacing = 2.0 * half_width / (count - 1) as f64;
        let mid = count / 2;
        let mut nodes = vec![0.0; count];
        for i in 0..mid {
            let x = -half_width + i as f64 * spacing;
            nodes[i] = x;
            nodes[count - 1 - i] = -x;
        }
        Ok(Grid1D {
            nodes,
            spacing,
            half_width,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Position halfway between node `i` and node `i + 1`; `i` may be -1 or `count - 1`.
    /// Mirrored midpoints are exact negatives of each other.
    pub fn midpoint(&self, i: isize) -> f64 {
        let n = self.count() as isize;
        if 2 * i + 2 > n {
            -self.midpoint(n - 2 - i)
        } else {
            -self.half_width + (i as f64 + 0.5) * self.spacing
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.count();
        let mut w = vec![self.spacing; n];
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub x: Grid1D,
    pub v: Grid1D,
}

impl PhaseGrid {
    pub fn new(x_half_width: f64, v_half_width: f64, nx: usize, nv: usize) -> Result<Self> {
        Ok(PhaseGrid {
            x: Grid1D::new(x_half_width, nx)?,
            v: Grid1D::new(v_half_width, nv)?,
        })
    }

    pub fn nx(&self) -> usize {
        self.x.count()
    }

    pub fn nv(&self) -> usize {
        self.v.count()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.nv()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv() + j
    }

    /// Tensor trapezoid weights, x-major.
    pub fn weights(&self) -> Vec<f64> {
        let wx = self.x.weights();
        let wv = self.v.weights();
        let mut w = Vec::with_capacity(self.len());
        for a in &wx {
            for b in &wv {
                w.push(a * b);
            }
        }
        w
    }
}

/// Real values on phase space, x-major: entry `(i, j)` sits at `i * nv + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    nv: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Field {
            nx: grid.nx(),
            nv: grid.nv(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &PhaseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("field contains non-finite values".into()));
        }
        Ok(Field {
            nx: grid.nx(),
            nv: grid.nv(),
            values,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &PhaseGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x.nodes() {
            for &v in grid.v.nodes() {
                values.push(f(x, v));
            }
        }
        Field {
            nx: grid.nx(),
            nv: grid.nv(),
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.nv)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nv + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.nv + j] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field {
            nx: self.nx,
            nv: self.nv,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        assert_eq!(self.shape(), other.shape());
        Field {
            nx: self.nx,
            nv: self.nv,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), self.values.len());
        Field {
            nx: self.nx,
            nv: self.nv,
            values,
        }
    }
}

/// Real values on the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        DensityField { values }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid1D, f: F) -> Self {
        DensityField {
            values: grid.nodes().iter().map(|x| f(*x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    X,
    V,
}

fn check(f: &Field, eq: &Equilibrium) -> Result<()> {
    let grid = eq.grid();
    if f.shape() != (grid.nx(), grid.nv()) {
        return Err(Error::Dimension(format!(
            "field shape {:?} does not match grid {}x{}",
            f.shape(),
            grid.nx(),
            grid.nv()
        )));
    }
    Ok(())
}

/// `sum_ij w_ij f_ij g_ij / f_star_ij`.
pub fn inner_product_mu(f: &Field, g: &Field, eq: &Equilibrium) -> Result<f64> {
    check(f, eq)?;
    check(g, eq)?;
    Ok(eq.mu_dot(&f.values, &g.values))
}

pub fn norm_mu(f: &Field, eq: &Equilibrium) -> Result<f64> {
    inner_product_mu(f, f, eq).map(f64::sqrt)
}

/// `||f||_beta`: the mu-norm with velocity weight `<v>^{-2 (1 - beta)_+}`.
pub fn norm_beta(f: &Field, beta: f64, eq: &Equilibrium) -> Result<f64> {
    check(f, eq)?;
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be positive, got {beta}")));
    }
    let expo = -2.0 * (1.0 - beta).max(0.0);
    if expo == 0.0 {
        return norm_mu(f, eq);
    }
    let wv: Vec<f64> = eq.grid().v.nodes().iter().map(|v| bracket(*v).powf(expo)).collect();
    let nv = eq.grid().nv();
    let mu = eq.mu_weights();
    Ok(exec::sum(f.values.len(), |k| mu[k] * wv[k % nv] * f.values[k] * f.values[k]).sqrt())
}

/// `J_p = int int f^2 <x>^p / f_star` (variable X) or `K_p` with `<v>^p` (variable V).
pub fn weighted_moment(f: &Field, variable: Variable, power: f64, eq: &Equilibrium) -> Result<f64> {
    check(f, eq)?;
    if !(power >= 0.0) {
        return Err(Error::Argument(format!(
            "moment power must be nonnegative, got {power}"
        )));
    }
    let grid = eq.grid();
    let nv = grid.nv();
    let mu = eq.mu_weights();
    let w: Vec<f64> = match variable {
        Variable::X => grid.x.nodes(),
        Variable::V => grid.v.nodes(),
    }
    .iter()
    .map(|z| bracket(*z).powf(power))
    .collect();
    let val = match variable {
        Variable::X => exec::sum(f.values.len(), |k| mu[k] * w[k / nv] * f.values[k] * f.values[k]),
        Variable::V => exec::sum(f.values.len(), |k| mu[k] * w[k % nv] * f.values[k] * f.values[k]),
    };
    Ok(val)
}

/// `sum_ij w_ij f_ij`.
pub fn mass(f: &Field, grid: &PhaseGrid) -> f64 {
    let w = grid.weights();
    exec::sum(f.values.len(), |k| w[k] * f.values[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_exactly_symmetric() {
        let g = Grid1D::new(8.0, 129).unwrap();
        for i in 0..g.count() {
            assert_eq!(g.node(i), -g.node(g.count() - 1 - i));
        }
        assert_eq!(g.node(64), 0.0);
        assert!((g.spacing() * 128.0 - 16.0).abs() < 1e-14);
    }

    #[test]
    fn even_count_rejected() {
        assert!(Grid1D::new(8.0, 64).is_err());
    }

    #[test]
    fn odd_integrand_vanishes() {
        let g = Grid1D::new(8.0, 65).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|v| v * v * v * (-v * v).exp() + v.sin()).collect();
        assert!(g.integrate(&vals).abs() < 1e-15);
    }
}
