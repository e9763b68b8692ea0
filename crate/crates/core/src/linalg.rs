//! Sparse and banded linear algebra used by the discrete operators.

use crate::error::{Error, Result};
use crate::exec;

const ROW_BLOCK: usize = 512;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    /// Build from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = col.len();
            for (c, v) in row {
                assert!(c < n_cols, "column {c} out of range");
                if col.len() > start && *col.last().unwrap() == c {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            col,
            val,
        }
    }

    pub fn identity(n: usize) -> Self {
        Csr::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        exec::fill_blocks(y, ROW_BLOCK, |b, out| {
            let r0 = b * ROW_BLOCK;
            for (k, yk) in out.iter_mut().enumerate() {
                let (cols, vals) = self.row(r0 + k);
                let mut s = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    s += v * x[*c];
                }
                *yk = s;
            }
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// New matrix with the same pattern and entries `f(row, col, value)`.
    pub fn map_entries<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> Csr {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.val[k] = f(r, self.col[k], self.val[k]);
            }
        }
        out
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Csr, b: f64) -> Csr {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let rows = (0..self.n_rows)
            .map(|r| {
                let (c1, v1) = self.row(r);
                let (c2, v2) = other.row(r);
                c1.iter()
                    .zip(v1)
                    .map(|(c, v)| (*c, a * v))
                    .chain(c2.iter().zip(v2).map(|(c, v)| (*c, b * v)))
                    .collect()
            })
            .collect();
        Csr::from_rows(self.n_cols, rows)
    }

    pub fn transpose(&self) -> Csr {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                rows[*c].push((r, *v));
            }
        }
        Csr::from_rows(self.n_rows, rows)
    }
}

/// General tridiagonal matrix: `lower[i]` couples row i to i-1, `upper[i]` to i+1.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// LU factorization without pivoting (Thomas algorithm).
    pub fn factor(&self) -> Result<TridiagLu> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut piv = self.diag[i];
            if i > 0 {
                piv -= self.lower[i] * c[i - 1];
            }
            if !piv.is_finite() || piv.abs() < f64::MIN_POSITIVE * 1e10 {
                return Err(Error::Numerical(format!(
                    "zero pivot in tridiagonal factorization at row {i}"
                )));
            }
            d[i] = piv;
            c[i] = if i + 1 < n { self.upper[i] / piv } else { 0.0 };
        }
        Ok(TridiagLu {
            lower: self.lower.clone(),
            c,
            d,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TridiagLu {
    lower: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl TridiagLu {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            let mut z = rhs[i];
            if i > 0 {
                z -= self.lower[i] * out[i - 1];
            }
            out[i] = z / self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] -= self.c[i] * out[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; rhs.len()];
        self.solve_into(rhs, &mut out);
        out
    }
}

/// Symmetric banded matrix stored by its lower band.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, p: usize) -> Self {
        SymBanded {
            n,
            p,
            band: vec![0.0; n * (p + 1)],
        }
    }

    pub fn from_diag(d: &[f64], p: usize) -> Self {
        let mut m = SymBanded::zeros(d.len(), p);
        for (i, v) in d.iter().enumerate() {
            m.add(i, i, *v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i - j <= self.p).then(|| i * (self.p + 1) + (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.band[s])
    }

    /// Adds `v` to entries (i,j) and (j,i) of the symmetric matrix.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band {}", self.p));
        self.band[s] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let lo = i.saturating_sub(p);
            let hi = (i + p).min(n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.get(i, j) * x[j];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `D^{-1/2} self D^{-1/2}` for a positive diagonal `d`.
    pub fn congruence_inv_sqrt(&self, d: &[f64]) -> SymBanded {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in 0..=self.p.min(i) {
                let j = i - k;
                out.band[i * (self.p + 1) + k] /= (d[i] * d[j]).sqrt();
            }
        }
        out
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, p) = (self.n, self.p);
        let w = p + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let mut s = self.get(i, j);
                let mlo = lo.max(j.saturating_sub(p));
                for m in mlo..j {
                    s -= l[i * w + (i - m)] * l[j * w + (j - m)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Numerical(format!(
                            "banded matrix not positive definite at row {i}"
                        )));
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, p, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    p: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for m in i.saturating_sub(p)..i {
                s -= self.l[i * w + (i - m)] * y[m];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for m in (i + 1)..(i + p + 1).min(n) {
                s -= self.l[m * w + (m - i)] * y[m];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned BiCGSTAB for `A x = b`, starting from the contents of `x`.
pub fn bicgstab<A, P>(apply: A, precond: P, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = exec::norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut [f64], tmp: &mut [f64]| {
        apply(x, tmp);
        for k in 0..n {
            r[k] = b[k] - tmp[k];
        }
        exec::norm2(r) / bnorm
    };
    let mut rel = true_residual(x, &mut r, &mut tmp);
    let mut iterations = 0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut restarts = 0;
    while rel > tol && iterations < max_iter {
        let rhat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let mut breakdown = false;
        while iterations < max_iter {
            iterations += 1;
            let rho_new = exec::dot(&rhat, &r);
            if rho_new.abs() < 1e-300 || omega == 0.0 {
                breakdown = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
            precond(&p, &mut ph);
            apply(&ph, &mut v);
            let denom = exec::dot(&rhat, &v);
            if denom.abs() < 1e-300 {
                breakdown = true;
                break;
            }
            alpha = rho / denom;
            for k in 0..n {
                s[k] = r[k] - alpha * v[k];
            }
            if exec::norm2(&s) / bnorm <= tol * 0.5 {
                for k in 0..n {
                    x[k] += alpha * ph[k];
                }
                r.copy_from_slice(&s);
                break;
            }
            precond(&s, &mut sh);
            apply(&sh, &mut t);
            let tt = exec::dot(&t, &t);
            omega = if tt > 0.0 { exec::dot(&t, &s) / tt } else { 0.0 };
            for k in 0..n {
                x[k] += alpha * ph[k] + omega * sh[k];
                r[k] = s[k] - omega * t[k];
            }
            if exec::norm2(&r) / bnorm <= tol * 0.5 {
                break;
            }
        }
        rel = true_residual(x, &mut r, &mut tmp);
        if !rel.is_finite() {
            return Err(Error::Numerical("BiCGSTAB produced a non-finite iterate".into()));
        }
        if breakdown || rel > tol {
            restarts += 1;
            if restarts > 20 {
                break;
            }
        }
    }
    if rel > tol {
        return Err(Error::Numerical(format!(
            "BiCGSTAB stalled: relative residual {rel:.3e} after {iterations} iterations"
        )));
    }
    Ok(SolveStats {
        iterations,
        relative_residual: rel,
    })
}
