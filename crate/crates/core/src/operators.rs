//! Discrete collision `L`, transport `T`, projection `Pi`, the auxiliary
//! elliptic problem, the operator `A` and the macroscopic generator.
//!
//! With `h = f / f_star` and `W` the tensor quadrature weights, the operators
//! are stored as `L f = W^{-1} Ls h` and `T f = W^{-1} S h` where `Ls` is
//! symmetric and `S` is antisymmetric, so `<Lf, g>_mu = h_g^T Ls h_f` and
//! `<Tf, g>_mu = h_g^T S h_f`. `S` is built from corner values of `f_star`
//! (a discrete stream function), so its interior divergence vanishes exactly.

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::grid::{DensityField, Field};
use crate::linalg::{BandedCholesky, Csr, SymBanded, Tridiag};

#[derive(Debug, Clone)]
pub struct OperatorSet {
    nx: usize,
    nv: usize,
    collision_form: Csr,
    transport_form: Csr,
    /// `L` acting on fields.
    pub collision_l: Csr,
    /// `T` acting on fields.
    pub transport_t: Csr,
    /// `g -> sigma d_x(rho_star d_x(g / rho_star))` on densities.
    pub macro_generator: Tridiag,
    /// `u -> u + (T Pi)^*(T Pi) u` in the basis `u f_star`, as the matrix `G + K`.
    pub elliptic_matrix: SymBanded,
    /// `K[k][l] = <T(e_k f_star), T(e_l f_star)>_mu`.
    pub macro_stiffness: SymBanded,
    /// `G = diag(w_x rho_star)`, the Gram matrix of `u f_star`.
    pub macro_mass: Vec<f64>,
    elliptic_factor: BandedCholesky,
    y_scale: Vec<f64>,
}

pub fn assemble(eq: &Equilibrium) -> Result<OperatorSet> {
    let grid = eq.grid();
    let (nx, nv) = (grid.nx(), grid.nv());
    let (dx, dv) = (grid.x.spacing(), grid.v.spacing());
    let wx = grid.x.weights();
    let w = eq.weights();
    let fs = &eq.f_star.values;
    let rho = &eq.rho_star.values;
    if fs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidEquilibrium("nonpositive f_star node".into()));
    }

    let rho_mid: Vec<f64> = (-1..nx as isize).map(|i| eq.rho_star_at(grid.x.midpoint(i))).collect();
    let g_mid: Vec<f64> = (-1..nv as isize).map(|j| eq.g_star_at(grid.v.midpoint(j))).collect();
    // rho_mid[i + 1] sits at x_{i+1/2}; g_mid[j + 1] at v_{j+1/2}.
    let a = |i: usize, j: usize| -rho_mid[i + 1] * (g_mid[j + 1] - g_mid[j]) / dv;
    let b = |i: usize, j: usize| g_mid[j + 1] * (rho_mid[i + 1] - rho_mid[i]) / dx;

    let idx = |i: usize, j: usize| i * nv + j;
    let mut ls_rows = Vec::with_capacity(nx * nv);
    let mut s_rows = Vec::with_capacity(nx * nv);
    for i in 0..nx {
        let c = wx[i] * rho[i] / dv;
        for j in 0..nv {
            let mut lrow = Vec::with_capacity(3);
            let mut diag = 0.0;
            if j > 0 {
                let m = c * g_mid[j];
                lrow.push((idx(i, j - 1), m));
                diag -= m;
            }
            if j + 1 < nv {
                let m = c * g_mid[j + 1];
                lrow.push((idx(i, j + 1), m));
                diag -= m;
            }
            lrow.push((idx(i, j), diag));
            ls_rows.push(lrow);

            let mut srow = Vec::with_capacity(4);
            if i + 1 < nx {
                srow.push((idx(i + 1, j), 0.5 * dv * a(i, j)));
            }
            if i > 0 {
                srow.push((idx(i - 1, j), -0.5 * dv * a(i - 1, j)));
            }
            if j + 1 < nv {
                srow.push((idx(i, j + 1), 0.5 * dx * b(i, j)));
            }
            if j > 0 {
                srow.push((idx(i, j - 1), -0.5 * dx * b(i, j - 1)));
            }
            s_rows.push(srow);
        }
    }
    let collision_form = Csr::from_rows(nx * nv, ls_rows);
    let transport_form = Csr::from_rows(nx * nv, s_rows);
    let to_field = |r: usize, c: usize, v: f64| v / (w[r] * fs[c]);
    let collision_l = collision_form.map_entries(to_field);
    let transport_t = transport_form.map_entries(to_field);

    // Columns of T Pi in the basis u_k f_star: C[(i,j), k].
    let mut stiffness = SymBanded::zeros(nx, 2);
    for i in 0..nx {
        for j in 0..nv {
            let r = idx(i, j);
            let (cols, vals) = transport_form.row(r);
            let mut coef = [0.0; 3];
            for (c, v) in cols.iter().zip(vals) {
                let k = c / nv;
                coef[k + 1 - i] += v;
            }
            let scale = 1.0 / (w[r] * fs[r]);
            for p in 0..3 {
                for q in 0..=p {
                    let (kp, kq) = (i + p, i + q);
                    if kp < 1 || kq < 1 || kp > nx || kq > nx {
                        continue;
                    }
                    stiffness.add(kp - 1, kq - 1, coef[p] * coef[q] * scale);
                }
            }
        }
    }
    let macro_mass: Vec<f64> = (0..nx).map(|i| wx[i] * rho[i]).collect();
    let mut elliptic_matrix = stiffness.clone();
    for (i, g) in macro_mass.iter().enumerate() {
        elliptic_matrix.add(i, i, *g);
    }
    let elliptic_factor = elliptic_matrix.cholesky()?;

    let sigma = eq.sigma_normalized;
    let mut lower = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    for i in 0..nx {
        let s = sigma / (wx[i] * dx);
        if i > 0 {
            lower[i] = s * rho_mid[i] / rho[i - 1];
            diag[i] -= s * rho_mid[i] / rho[i];
        }
        if i + 1 < nx {
            upper[i] = s * rho_mid[i + 1] / rho[i + 1];
            diag[i] -= s * rho_mid[i + 1] / rho[i];
        }
    }

    Ok(OperatorSet {
        nx,
        nv,
        collision_form,
        transport_form,
        collision_l,
        transport_t,
        macro_generator: Tridiag { lower, diag, upper },
        elliptic_matrix,
        macro_stiffness: stiffness,
        macro_mass,
        elliptic_factor,
        y_scale: eq.mu_weights().iter().map(|m| m.sqrt()).collect(),
    })
}

impl OperatorSet {
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.nv)
    }

    pub fn apply_l(&self, f: &Field) -> Field {
        f.with_values(self.collision_l.apply(&f.values))
    }

    pub fn apply_t(&self, f: &Field) -> Field {
        f.with_values(self.transport_t.apply(&f.values))
    }

    /// `sqrt(w / f_star)`: the change of variables `y = s f` turning `<.,.>_mu` into the Euclidean product.
    pub fn y_scale(&self) -> &[f64] {
        &self.y_scale
    }

    /// `L` in the variable `y = s f`; symmetric.
    pub fn collision_y(&self, eq: &Equilibrium) -> Csr {
        scaled_form(&self.collision_form, eq)
    }

    /// `T` in the variable `y = s f`; antisymmetric.
    pub fn transport_y(&self, eq: &Equilibrium) -> Csr {
        scaled_form(&self.transport_form, eq)
    }

    /// `<L f, g>_mu` as the bilinear form on `h = f / f_star`.
    pub fn collision_form(&self) -> &Csr {
        &self.collision_form
    }

    pub fn transport_form(&self) -> &Csr {
        &self.transport_form
    }

    pub fn apply_macro(&self, g: &DensityField) -> DensityField {
        let mut out = vec![0.0; g.len()];
        self.macro_generator.matvec(&g.values, &mut out);
        DensityField::new(out)
    }
}

fn scaled_form(form: &Csr, eq: &Equilibrium) -> Csr {
    let w = eq.weights();
    let fs = &eq.f_star.values;
    let d: Vec<f64> = w.iter().zip(fs).map(|(a, b)| 1.0 / (a * b).sqrt()).collect();
    form.map_entries(|r, c, v| v * d[r] * d[c])
}

/// `rho_f(x_i) = sum_j w_j f_ij`.
pub fn density(f: &Field, eq: &Equilibrium) -> DensityField {
    let grid = eq.grid();
    let nv = grid.nv();
    let wv = grid.v.weights();
    DensityField::new(
        f.values
            .chunks(nv)
            .map(|row| row.iter().zip(&wv).map(|(a, b)| a * b).sum())
            .collect(),
    )
}

/// `u f_star` for a function `u` of position.
pub fn lift(u: &DensityField, eq: &Equilibrium) -> Field {
    let nv = eq.grid().nv();
    let fs = &eq.f_star.values;
    let values = (0..fs.len()).map(|k| u.values[k / nv] * fs[k]).collect();
    eq.f_star.with_values(values)
}

/// `u_f = rho_f / rho_star`.
pub fn macroscopic_u(f: &Field, eq: &Equilibrium) -> DensityField {
    let rho = density(f, eq);
    DensityField::new(rho.values.iter().zip(&eq.rho_star.values).map(|(r, s)| r / s).collect())
}

/// `Pi f = rho_f g_star`.
pub fn apply_pi(f: &Field, eq: &Equilibrium) -> Field {
    lift(&macroscopic_u(f, eq), eq)
}

/// Solves `u - (sigma / rho_star) d_x(rho_star d_x u) = rhs` in its discrete form `(G + K) u = G rhs`.
pub fn solve_elliptic(rhs: &DensityField, ops: &OperatorSet) -> Result<DensityField> {
    if rhs.len() != ops.nx {
        return Err(Error::Dimension(format!(
            "elliptic right-hand side has {} entries, grid has {}",
            rhs.len(),
            ops.nx
        )));
    }
    let b: Vec<f64> = rhs.values.iter().zip(&ops.macro_mass).map(|(r, g)| r * g).collect();
    let u = ops.elliptic_factor.solve(&b);
    let res = ops.elliptic_matrix.apply(&u);
    let num: f64 = res.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|c| c * c).sum::<f64>().sqrt();
    if den > 0.0 && num > 1e-10 * den {
        return Err(Error::Numerical(format!(
            "elliptic solve residual {:.3e} exceeds tolerance",
            num / den
        )));
    }
    Ok(DensityField::new(u))
}

/// `A f = (1 + (T Pi)^* (T Pi))^{-1} (T Pi)^* f` with `(T Pi)^* = -Pi T`; returned as `u f_star`.
pub fn apply_a(f: &Field, eq: &Equilibrium, ops: &OperatorSet) -> Result<Field> {
    apply_a_u(f, eq, ops).map(|u| lift(&u, eq))
}

/// The macroscopic profile `u` with `A f = u f_star`.
pub fn apply_a_u(f: &Field, eq: &Equilibrium, ops: &OperatorSet) -> Result<DensityField> {
    let tf = ops.apply_t(f);
    let ug = macroscopic_u(&tf, eq);
    let neg = DensityField::new(ug.values.iter().map(|v| -v).collect());
    solve_elliptic(&neg, ops)
}

/// `<A T Pi f, Pi f>` through the elliptic solution `u` with right-hand side `u_f`:
/// `u^T K u + (K u)^T G^{-1} (K u)`, the discrete `sigma int |u'|^2 rho + sigma^2 int |(rho u')'|^2 / rho`.
pub fn atpi_quadratic_form(f: &Field, eq: &Equilibrium, ops: &OperatorSet) -> Result<f64> {
    let uf = macroscopic_u(f, eq);
    let u = solve_elliptic(&uf, ops)?;
    let ku = ops.macro_stiffness.apply(&u.values);
    let first: f64 = ku.iter().zip(&u.values).map(|(a, b)| a * b).sum();
    let second: f64 = ku.iter().zip(&ops.macro_mass).map(|(a, g)| a * a / g).sum();
    Ok(first + second)
}

/// `<u f_star, g>_mu = sum_i w_i u_i rho_g(x_i)`.
pub fn lifted_inner(u: &DensityField, g: &Field, eq: &Equilibrium) -> f64 {
    let rho = density(g, eq);
    let wx = eq.grid().x.weights();
    u.values
        .iter()
        .zip(&rho.values)
        .zip(&wx)
        .map(|((a, b), w)| a * b * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{build_equilibrium, PotentialSpec};
    use crate::grid::{inner_product_mu, PhaseGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(alpha: f64, beta: f64) -> (Equilibrium, OperatorSet) {
        let (xw, vw, n) = if beta < 1.0 { (8.0, 110.0, 41) } else { (8.0, 8.0, 41) };
        let xw = if alpha < 1.0 { 110.0 } else { xw };
        let grid = PhaseGrid::new(xw, vw, n, n).unwrap();
        let eq = build_equilibrium(&PotentialSpec::power(alpha, beta), &grid).unwrap();
        let ops = assemble(&eq).unwrap();
        (eq, ops)
    }

    fn random_field(eq: &Equilibrium, rng: &mut ChaCha8Rng) -> Field {
        let vals = eq.f_star.values.iter().map(|f| f * rng.gen_range(-1.0..1.0)).collect();
        eq.f_star.with_values(vals)
    }

    #[test]
    fn structure_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (alpha, beta) in [(2.0, 2.0), (0.5, 0.5), (2.0, 0.5)] {
            let (eq, ops) = setup(alpha, beta);
            for _ in 0..5 {
                let f = random_field(&eq, &mut rng);
                let g = random_field(&eq, &mut rng);
                let lf = ops.apply_l(&f);
                let lg = ops.apply_l(&g);
                let tf = ops.apply_t(&f);
                let tg = ops.apply_t(&g);
                let scale =
                    inner_product_mu(&lf, &lf, &eq).unwrap().sqrt() * inner_product_mu(&g, &g, &eq).unwrap().sqrt();
                let sym = inner_product_mu(&lf, &g, &eq).unwrap() - inner_product_mu(&f, &lg, &eq).unwrap();
                assert!(sym.abs() < 1e-12 * scale, "symmetry {sym}");
                let tscale =
                    inner_product_mu(&tf, &tf, &eq).unwrap().sqrt() * inner_product_mu(&g, &g, &eq).unwrap().sqrt();
                let skew = inner_product_mu(&tf, &g, &eq).unwrap() + inner_product_mu(&f, &tg, &eq).unwrap();
                assert!(skew.abs() < 1e-12 * tscale, "skew {skew}");
                let pf = apply_pi(&f, &eq);
                let ptp = apply_pi(&ops.apply_t(&pf), &eq);
                let n = inner_product_mu(&ptp, &ptp, &eq).unwrap().sqrt();
                let nt = inner_product_mu(&ops.apply_t(&pf), &ops.apply_t(&pf), &eq)
                    .unwrap()
                    .sqrt();
                assert!(n < 1e-12 * nt, "H3 {n} vs {nt}");
            }
        }
    }

    #[test]
    fn two_routes_for_atpi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (eq, ops) = setup(2.0, 2.0);
        for _ in 0..5 {
            let f = random_field(&eq, &mut rng);
            let pf = apply_pi(&f, &eq);
            let a = apply_a(&ops.apply_t(&pf), &eq, &ops).unwrap();
            let composed = inner_product_mu(&a, &pf, &eq).unwrap();
            let form = atpi_quadratic_form(&f, &eq, &ops).unwrap();
            assert!((composed - form).abs() < 1e-9 * form.abs(), "{composed} {form}");
        }
    }
}
