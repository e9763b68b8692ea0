//! Time integration of the kinetic equation and of its macroscopic diffusion
//! limit, with the monitors recorded along a trajectory.

use crate::equilibria::Equilibrium;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{bracket, mass, weighted_moment, DensityField, Field, Variable};
use crate::hypocoercivity::{dissipation_components, entropy_h};
use crate::linalg::{bicgstab, Csr, Tridiag, TridiagLu};
use crate::operators::OperatorSet;
use serde::Serialize;

pub const SOLVER_TOL: f64 = 1e-10;
const MAX_ITER: usize = 2000;
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Kinetic,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > self.dt && self.t_final.is_finite()) {
            return Err(Error::Validation(format!(
                "t_final must exceed dt, got t_final = {}, dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::Validation("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Implicit solver for `y' = (L_y - T_y) y` in the variable `y = s f`.
pub struct KineticStepper {
    scale: Vec<f64>,
    system: Csr,
    explicit: Option<Csr>,
    v_lines: Vec<TridiagLu>,
    x_lines: Vec<TridiagLu>,
    nx: usize,
    nv: usize,
    pub dt: f64,
    pub scheme: Scheme,
}

impl KineticStepper {
    pub fn new(eq: &Equilibrium, ops: &OperatorSet, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let (nx, nv) = ops.shape();
        let gen = ops.collision_y(eq).combine(1.0, &ops.transport_y(eq), -1.0);
        let theta = match scheme {
            Scheme::ImplicitEuler => dt,
            Scheme::CrankNicolson => 0.5 * dt,
        };
        let n = nx * nv;
        let system = Csr::identity(n).combine(1.0, &gen, -theta);
        let explicit = match scheme {
            Scheme::ImplicitEuler => None,
            Scheme::CrankNicolson => Some(Csr::identity(n).combine(1.0, &gen, theta)),
        };
        let v_lines = (0..nx)
            .map(|i| {
                let base = i * nv;
                let mut t = Tridiag {
                    lower: vec![0.0; nv],
                    diag: vec![0.0; nv],
                    upper: vec![0.0; nv],
                };
                for j in 0..nv {
                    let r = base + j;
                    t.diag[j] = system.get(r, r);
                    if j > 0 {
                        t.lower[j] = system.get(r, r - 1);
                    }
                    if j + 1 < nv {
                        t.upper[j] = system.get(r, r + 1);
                    }
                }
                t.factor()
            })
            .collect::<Result<Vec<_>>>()?;
        let x_lines = (0..nv)
            .map(|j| {
                let mut t = Tridiag {
                    lower: vec![0.0; nx],
                    diag: vec![1.0; nx],
                    upper: vec![0.0; nx],
                };
                for i in 0..nx {
                    let r = i * nv + j;
                    if i > 0 {
                        t.lower[i] = system.get(r, r - nv);
                    }
                    if i + 1 < nx {
                        t.upper[i] = system.get(r, r + nv);
                    }
                }
                t.factor()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KineticStepper {
            scale: ops.y_scale().to_vec(),
            system,
            explicit,
            v_lines,
            x_lines,
            nx,
            nv,
            dt,
            scheme,
        })
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let nv = self.nv;
        let nx = self.nx;
        let mut tmp = vec![0.0; r.len()];
        exec::fill_blocks(&mut tmp, nv, |i, out| {
            self.v_lines[i].solve_into(&r[i * nv..(i + 1) * nv], out)
        });
        let cols: Vec<Vec<f64>> = exec::map_indexed(nv, |j| {
            let col: Vec<f64> = (0..nx).map(|i| tmp[i * nv + j]).collect();
            self.x_lines[j].solve(&col)
        });
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                z[i * nv + j] = *v;
            }
        }
    }

    pub fn step(&self, f: &Field) -> Result<Field> {
        if f.shape() != (self.nx, self.nv) {
            return Err(Error::Dimension(format!(
                "field shape {:?} does not match operators {:?}",
                f.shape(),
                (self.nx, self.nv)
            )));
        }
        let y: Vec<f64> = f.values.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        let rhs = match &self.explicit {
            Some(e) => e.apply(&y),
            None => y.clone(),
        };
        let mut sol = y;
        let stats = bicgstab(
            |x, out| self.system.matvec(x, out),
            |r, z| self.precondition(r, z),
            &rhs,
            &mut sol,
            SOLVER_TOL,
            MAX_ITER,
        )?;
        if stats.relative_residual > SOLVER_TOL || sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "kinetic solve did not converge: residual {:.3e} after {} iterations (dt = {})",
                stats.relative_residual, stats.iterations, self.dt
            )));
        }
        Ok(f.with_values(sol.iter().zip(&self.scale).map(|(a, s)| a / s).collect()))
    }
}

/// One implicit step of the kinetic equation; builds a fresh stepper.
pub fn step_kinetic(f: &Field, dt: f64, eq: &Equilibrium, ops: &OperatorSet) -> Result<Field> {
    KineticStepper::new(eq, ops, dt, Scheme::ImplicitEuler)?.step(f)
}

/// Factored `I - dt M` for the macroscopic equation.
pub struct MacroStepper {
    lu: TridiagLu,
    pub dt: f64,
}

impl MacroStepper {
    pub fn new(ops: &OperatorSet, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let m = &ops.macro_generator;
        let t = Tridiag {
            lower: m.lower.iter().map(|a| -dt * a).collect(),
            diag: m.diag.iter().map(|a| 1.0 - dt * a).collect(),
            upper: m.upper.iter().map(|a| -dt * a).collect(),
        };
        Ok(MacroStepper { lu: t.factor()?, dt })
    }

    pub fn step(&self, rho: &DensityField) -> Result<DensityField> {
        if rho.len() != self.lu.len() {
            return Err(Error::Dimension(format!(
                "density length {} does not match operators {}",
                rho.len(),
                self.lu.len()
            )));
        }
        let out = self.lu.solve(&rho.values);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite macroscopic state".into()));
        }
        Ok(DensityField::new(out))
    }
}

pub fn step_macro(rho: &DensityField, dt: f64, _eq: &Equilibrium, ops: &OperatorSet) -> Result<DensityField> {
    MacroStepper::new(ops, dt)?.step(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub norm_sq_mu: Vec<f64>,
    pub entropy_h: Vec<f64>,
    /// Direct evaluation of the entropy production.
    pub dissipation_d: Vec<f64>,
    /// Central difference of `entropy_h`.
    pub dissipation_fd: Vec<f64>,
    pub moments_j: Vec<(f64, Vec<f64>)>,
    pub moments_k: Vec<(f64, Vec<f64>)>,
    pub max_principle_ok: Vec<bool>,
    pub envelope: Vec<f64>,
    pub mass: Vec<f64>,
    pub bound_constant: f64,
    pub status: RunStatus,
    pub last_good_time: f64,
    pub failure: Option<String>,
}

impl TrajectoryRecord {
    fn new(k: &[f64], ell: &[f64], bound_constant: f64) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            norm_sq_mu: Vec::new(),
            entropy_h: Vec::new(),
            dissipation_d: Vec::new(),
            dissipation_fd: Vec::new(),
            moments_j: k.iter().map(|p| (*p, Vec::new())).collect(),
            moments_k: ell.iter().map(|p| (*p, Vec::new())).collect(),
            max_principle_ok: Vec::new(),
            envelope: Vec::new(),
            mass: Vec::new(),
            bound_constant,
            status: RunStatus::Completed,
            last_good_time: 0.0,
            failure: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn finish(&mut self) {
        let n = self.times.len();
        self.dissipation_fd = (0..n)
            .map(|k| {
                if n < 2 {
                    return 0.0;
                }
                let (a, b) = if k == 0 {
                    (0, 1)
                } else if k + 1 == n {
                    (n - 2, n - 1)
                } else {
                    (k - 1, k + 1)
                };
                -(self.entropy_h[b] - self.entropy_h[a]) / (self.times[b] - self.times[a])
            })
            .collect();
        if self.envelope.len() != n {
            self.envelope = vec![f64::NAN; n];
        }
    }
}

/// Initial state for a trajectory.
#[derive(Debug, Clone)]
pub enum InitialState {
    Kinetic(Field),
    Macro(DensityField),
}

#[derive(Debug, Clone)]
pub struct MomentPowers {
    pub k: Vec<f64>,
    pub ell: Vec<f64>,
}

pub struct TrajectoryOptions {
    pub schedule: Schedule,
    pub delta: f64,
    pub powers: MomentPowers,
    pub scheme: Scheme,
    pub monitor_max_principle: bool,
}

pub fn run_trajectory(
    f0: &InitialState,
    opts: &TrajectoryOptions,
    eq: &Equilibrium,
    ops: &OperatorSet,
) -> Result<TrajectoryRecord> {
    opts.schedule.validate()?;
    match f0 {
        InitialState::Kinetic(f) => run_kinetic(f, opts, eq, ops),
        InitialState::Macro(r) => run_macro(r, opts, eq, ops),
    }
}

fn bound_constant(values: &[f64], reference: &[f64]) -> f64 {
    values
        .iter()
        .zip(reference)
        .filter(|(_, r)| **r > 0.0)
        .map(|(a, r)| a / r)
        .fold(0.0, f64::max)
}

fn run_kinetic(f0: &Field, opts: &TrajectoryOptions, eq: &Equilibrium, ops: &OperatorSet) -> Result<TrajectoryRecord> {
    if f0.shape() != (eq.grid().nx(), eq.grid().nv()) || !f0.is_finite() {
        return Err(Error::Dimension(
            "initial field does not match the grid or is not finite".into(),
        ));
    }
    let c = bound_constant(&f0.values, &eq.f_star.values);
    let mut rec = TrajectoryRecord::new(&opts.powers.k, &opts.powers.ell, c);
    let stepper = KineticStepper::new(eq, ops, opts.schedule.dt, opts.scheme)?;
    // Track the deviation from f_star when it is integrable.
    let mut g = if eq.integrable { f0.sub(&eq.f_star) } else { f0.clone() };
    let record = |rec: &mut TrajectoryRecord, t: f64, g: &Field| -> Result<()> {
        let full = if eq.integrable { g.add(&eq.f_star) } else { g.clone() };
        let d = dissipation_components(g, opts.delta, eq, ops)?;
        let h = entropy_h(g, opts.delta, eq, ops)?;
        rec.times.push(t);
        rec.norm_sq_mu.push(eq.mu_dot(&g.values, &g.values));
        rec.entropy_h.push(h);
        rec.dissipation_d.push(d.total);
        for (p, series) in rec.moments_j.iter_mut() {
            series.push(weighted_moment(&full, Variable::X, *p, eq)?);
        }
        for (p, series) in rec.moments_k.iter_mut() {
            series.push(weighted_moment(&full, Variable::V, *p, eq)?);
        }
        let ok = !opts.monitor_max_principle
            || full
                .values
                .iter()
                .zip(&eq.f_star.values)
                .all(|(f, s)| *f <= c * s + MAX_PRINCIPLE_TOL);
        rec.max_principle_ok.push(ok);
        rec.mass.push(mass(&full, eq.grid()));
        rec.last_good_time = t;
        Ok(())
    };
    record(&mut rec, 0.0, &g)?;
    let steps = opts.schedule.steps();
    for n in 1..=steps {
        match stepper.step(&g) {
            Ok(next) if next.is_finite() => g = next,
            Ok(_) => {
                fail(&mut rec, "non-finite state".into());
                break;
            }
            Err(e) => {
                fail(&mut rec, e.to_string());
                break;
            }
        }
        if n % opts.schedule.sample_stride == 0 || n == steps {
            record(&mut rec, n as f64 * opts.schedule.dt, &g)?;
        }
    }
    rec.finish();
    Ok(rec)
}

fn fail(rec: &mut TrajectoryRecord, msg: String) {
    rec.status = RunStatus::Failed;
    rec.failure = Some(msg);
}

fn run_macro(
    rho0: &DensityField,
    opts: &TrajectoryOptions,
    eq: &Equilibrium,
    ops: &OperatorSet,
) -> Result<TrajectoryRecord> {
    let nx = eq.grid().nx();
    if rho0.len() != nx || rho0.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension(
            "initial density does not match the grid or is not finite".into(),
        ));
    }
    let rs = &eq.rho_star.values;
    let c = bound_constant(&rho0.values, rs);
    let mut rec = TrajectoryRecord::new(&opts.powers.k, &[], c);
    let stepper = MacroStepper::new(ops, opts.schedule.dt)?;
    let wx = eq.grid().x.weights();
    let xs = eq.grid().x.nodes().to_vec();
    let mut g = if eq.integrable {
        DensityField::new(rho0.values.iter().zip(rs).map(|(a, b)| a - b).collect())
    } else {
        rho0.clone()
    };
    let record = |rec: &mut TrajectoryRecord, t: f64, g: &DensityField| {
        let full: Vec<f64> = if eq.integrable {
            g.values.iter().zip(rs).map(|(a, b)| a + b).collect()
        } else {
            g.values.clone()
        };
        let norm = (0..nx).map(|i| wx[i] * g.values[i] * g.values[i] / rs[i]).sum::<f64>();
        let mg = ops.apply_macro(g);
        let d = -2.0 * (0..nx).map(|i| wx[i] * mg.values[i] * g.values[i] / rs[i]).sum::<f64>();
        rec.times.push(t);
        rec.norm_sq_mu.push(norm);
        rec.entropy_h.push(norm);
        rec.dissipation_d.push(d);
        for (p, series) in rec.moments_j.iter_mut() {
            series.push(
                (0..nx)
                    .map(|i| wx[i] * full[i] * full[i] * bracket(xs[i]).powf(*p) / rs[i])
                    .sum(),
            );
        }
        let ok = !opts.monitor_max_principle || full.iter().zip(rs).all(|(f, s)| *f <= c * s + MAX_PRINCIPLE_TOL);
        rec.max_principle_ok.push(ok);
        rec.mass.push((0..nx).map(|i| wx[i] * full[i]).sum());
        rec.last_good_time = t;
    };
    record(&mut rec, 0.0, &g);
    let steps = opts.schedule.steps();
    for n in 1..=steps {
        match stepper.step(&g) {
            Ok(next) => g = next,
            Err(e) => {
                fail(&mut rec, e.to_string());
                break;
            }
        }
        if n % opts.schedule.sample_stride == 0 || n == steps {
            record(&mut rec, n as f64 * opts.schedule.dt, &g);
        }
    }
    rec.finish();
    Ok(rec)
}

/// `z = ((x - x0)^2 + (v - v0)^2) / (2 w^2)`; positive lobe at `(x0, v0)`, negative at `(-x0, -v0)`.
fn signed_bump(x: f64, v: f64, x0: f64, v0: f64, w: f64) -> f64 {
    let a = ((x - x0).powi(2) + (v - v0).powi(2)) / (2.0 * w * w);
    let b = ((x + x0).powi(2) + (v + v0).powi(2)) / (2.0 * w * w);
    (-a).exp() - (-b).exp()
}

/// `clamp(f_star (1 + eps b), 0, cap f_star)` with a signed two-lobe bump `b`.
pub fn bump_initial(eq: &Equilibrium, eps: f64, x0: f64, v0: f64, width: f64, cap: f64) -> Field {
    let grid = eq.grid();
    let mut f = eq.f_star.clone();
    for (i, &x) in grid.x.nodes().iter().enumerate() {
        for (j, &v) in grid.v.nodes().iter().enumerate() {
            let s = eq.f_star.get(i, j);
            f.set(
                i,
                j,
                (s * (1.0 + eps * signed_bump(x, v, x0, v0, width))).clamp(0.0, cap * s),
            );
        }
    }
    f
}

/// Product of Gaussians in `x` and `v` with unit mass, capped at `cap f_star`.
pub fn shifted_gaussian_initial(eq: &Equilibrium, x0: f64, sx: f64, v0: f64, sv: f64, cap: f64) -> Field {
    let grid = eq.grid();
    let raw = Field::from_fn(grid, |x, v| {
        (-(x - x0).powi(2) / (2.0 * sx * sx) - (v - v0).powi(2) / (2.0 * sv * sv)).exp()
    });
    let m = mass(&raw, grid);
    let mut f = raw.scaled(1.0 / m);
    for k in 0..f.values.len() {
        f.values[k] = f.values[k].min(cap * eq.f_star.values[k]);
    }
    f
}

/// `f_star (1 + eps v / <v> e^{-(x - x0)^2 / (2 w^2)})` with `|eps| <= 1`.
pub fn odd_velocity_initial(eq: &Equilibrium, eps: f64, x0: f64, width: f64) -> Field {
    let grid = eq.grid();
    let e = eps.clamp(-1.0, 1.0);
    let mut f = eq.f_star.clone();
    for (i, &x) in grid.x.nodes().iter().enumerate() {
        let ex = (-(x - x0).powi(2) / (2.0 * width * width)).exp();
        for (j, &v) in grid.v.nodes().iter().enumerate() {
            let s = eq.f_star.get(i, j);
            f.set(i, j, (s * (1.0 + e * v / bracket(v) * ex)).clamp(0.0, 2.0 * s));
        }
    }
    f
}

/// Gaussian density with variance `s0` and unit mass.
pub fn gaussian_density(eq: &Equilibrium, x0: f64, s0: f64) -> DensityField {
    DensityField::from_fn(&eq.grid().x, |x| {
        (-(x - x0).powi(2) / (2.0 * s0)).exp() / (2.0 * std::f64::consts::PI * s0).sqrt()
    })
}

/// `clamp(rho_star (1 + eps b(x)), 0, 2 rho_star)` with a signed two-lobe bump.
pub fn bump_density(eq: &Equilibrium, eps: f64, x0: f64, width: f64) -> DensityField {
    let xs = eq.grid().x.nodes();
    DensityField::new(
        xs.iter()
            .zip(&eq.rho_star.values)
            .map(|(&x, &r)| (r * (1.0 + eps * signed_bump(x, 0.0, x0, 0.0, width))).clamp(0.0, 2.0 * r))
            .collect(),
    )
}
