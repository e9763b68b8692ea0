//! Scenario execution, report emission and batch sweeps.

pub mod check;
pub mod config;

pub use config::{DeltaChoice, InitialData, ScenarioConfig};

use crate::equilibria::{build_equilibrium_with_tol, Equilibrium};
use crate::error::{Error, Result};
use crate::evolution::{
    bump_density, bump_initial, gaussian_density, odd_velocity_initial, run_trajectory, shifted_gaussian_initial,
    InitialState, Mode, MomentPowers, RunStatus, Schedule, TrajectoryOptions, TrajectoryRecord,
};
use crate::exec;
use crate::grid::PhaseGrid;
use crate::hypocoercivity::hypo_constants;
use crate::operators::{assemble, OperatorSet};
use crate::rates::{
    algebraic_envelope, classify_macro, classify_regime, dominated, fit_series, tail_window, window_sensitivity,
    FitKind, Regime, RegimePrediction, WindowSensitivity,
};
use crate::spectral::position_gap;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Relative slack when checking that a series stays below its envelope.
pub const ENVELOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConstantsReport {
    pub lambda_m: Option<f64>,
    #[serde(rename = "lambda_M")]
    pub lambda_big_m: Option<f64>,
    #[serde(rename = "c_M")]
    pub c_m: Option<f64>,
    pub delta_star: Option<f64>,
    pub delta: Option<f64>,
    pub lambda_rate: Option<f64>,
    pub sigma: f64,
    pub sigma_normalized: f64,
    pub position_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEcho {
    pub x_half_width: f64,
    pub v_half_width: f64,
    pub nx: usize,
    pub nv: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSummary {
    pub series: &'static str,
    pub kind: FitKind,
    pub constant: f64,
    pub exponent_or_rate: f64,
    pub from_time: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub status: RunStatus,
    pub last_good_time: f64,
    pub failure: Option<String>,
    pub mode: Mode,
    pub regime: Option<Regime>,
    pub predicted_exponent_or_rate: Option<f64>,
    pub fitted_value: Option<f64>,
    pub r_squared: Option<f64>,
    pub fit_kind: Option<FitKind>,
    pub fit_window: Option<[f64; 2]>,
    pub window_sensitivity: Vec<WindowSensitivity>,
    pub envelope: Option<EnvelopeSummary>,
    pub entropy_monotone: Option<bool>,
    pub max_principle_ok: Option<bool>,
    pub mass_drift: Option<f64>,
    pub constants: ConstantsReport,
    pub grid: GridEcho,
    pub schedule: Schedule,
    pub paper_case: Option<String>,
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: ScenarioConfig,
    pub summary: Summary,
    pub record: Option<TrajectoryRecord>,
    /// Process exit code the outcome maps to.
    pub exit_code: i32,
}

impl ReportBundle {
    pub fn failed(&self) -> bool {
        self.summary.status == RunStatus::Failed
    }
}

fn tagged(stage: &str, e: &Error) -> String {
    format!("[{stage}] {e}")
}

fn empty_summary(cfg: &ScenarioConfig) -> Summary {
    Summary {
        name: cfg.name.clone(),
        status: RunStatus::Completed,
        last_good_time: 0.0,
        failure: None,
        mode: cfg.mode,
        regime: None,
        predicted_exponent_or_rate: None,
        fitted_value: None,
        r_squared: None,
        fit_kind: None,
        fit_window: None,
        window_sensitivity: Vec::new(),
        envelope: None,
        entropy_monotone: None,
        max_principle_ok: None,
        mass_drift: None,
        constants: ConstantsReport::default(),
        grid: GridEcho {
            x_half_width: cfg.x_half_width,
            v_half_width: cfg.v_half_width,
            nx: cfg.nx,
            nv: cfg.nv,
        },
        schedule: cfg.schedule,
        paper_case: None,
        config: cfg.echo(),
    }
}

/// Equilibrium and operators for a configuration.
pub fn build_model(cfg: &ScenarioConfig) -> std::result::Result<(Equilibrium, OperatorSet), (String, Error)> {
    let grid =
        PhaseGrid::new(cfg.x_half_width, cfg.v_half_width, cfg.nx, cfg.nv).map_err(|e| ("grid".to_string(), e))?;
    let eq = build_equilibrium_with_tol(&cfg.potential, &grid, cfg.boundary_tolerance)
        .map_err(|e| ("equilibria".to_string(), e))?;
    let ops = assemble(&eq).map_err(|e| ("operators".to_string(), e))?;
    Ok((eq, ops))
}

/// Constants for a configuration; in macro mode the kinetic constants are optional.
pub fn compute_constants(cfg: &ScenarioConfig, eq: &Equilibrium, ops: &OperatorSet) -> Result<ConstantsReport> {
    let delta = match cfg.delta {
        DeltaChoice::Auto => None,
        DeltaChoice::Value(d) => Some(d),
    };
    let mut rep = ConstantsReport {
        sigma: eq.sigma,
        sigma_normalized: eq.sigma_normalized,
        position_gap: position_gap(eq.spec(), &eq.grid().x)?,
        ..ConstantsReport::default()
    };
    match hypo_constants(eq, ops, delta, cfg.seed) {
        Ok(h) => {
            rep.lambda_m = Some(h.lambda_m);
            rep.lambda_big_m = Some(h.lambda_big_m);
            rep.c_m = Some(h.c_m);
            rep.delta_star = Some(h.delta_star);
            rep.delta = Some(h.delta);
            rep.lambda_rate = Some(h.lambda_rate);
        }
        Err(e) if cfg.mode == Mode::Kinetic => return Err(e),
        Err(_) => {}
    }
    Ok(rep)
}

pub fn initial_state(cfg: &ScenarioConfig, eq: &Equilibrium) -> InitialState {
    match cfg.initial_data {
        InitialData::Bump {
            eps,
            x0,
            v0,
            width,
            cap,
        } => InitialState::Kinetic(bump_initial(eq, eps, x0, v0, width, cap)),
        InitialData::Gaussian { x0, sx, v0, sv, cap } => {
            InitialState::Kinetic(shifted_gaussian_initial(eq, x0, sx, v0, sv, cap))
        }
        InitialData::OddV { eps, x0, width } => InitialState::Kinetic(odd_velocity_initial(eq, eps, x0, width)),
        InitialData::DensityGaussian { x0, s0 } => InitialState::Macro(gaussian_density(eq, x0, s0)),
        InitialData::DensityBump { eps, x0, width } => InitialState::Macro(bump_density(eq, eps, x0, width)),
    }
}

fn predict(cfg: &ScenarioConfig, consts: &ConstantsReport) -> Result<RegimePrediction> {
    let k = cfg.moment_k.iter().copied().fold(0.0, f64::max);
    let ell = cfg.moment_ell.iter().copied().fold(0.0, f64::max);
    match cfg.mode {
        Mode::Kinetic => {
            let p = classify_regime(cfg.potential.x_mode, cfg.potential.beta, k, ell, cfg.d)?;
            match consts.lambda_rate {
                Some(l) => p.with_rate(l),
                None => Ok(p),
            }
        }
        Mode::Macro => {
            let p = classify_macro(cfg.potential.x_mode, k, cfg.d)?;
            match consts.position_gap {
                Some(g) => p.with_rate(2.0 * consts.sigma_normalized * g),
                None => Ok(p),
            }
        }
    }
}

/// Run a configuration end to end. Validation problems are returned as errors
/// before any computation; later failures produce a bundle marked as failed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let mut summary = empty_summary(cfg);
    let fail = |mut summary: Summary, stage: &str, e: Error, record: Option<TrajectoryRecord>| {
        summary.status = RunStatus::Failed;
        summary.failure = Some(tagged(stage, &e));
        ReportBundle {
            config: cfg.clone(),
            summary,
            record,
            exit_code: e.exit_code().max(1),
        }
    };
    let (eq, ops) = match build_model(cfg) {
        Ok(m) => m,
        Err((stage, e)) => return Ok(fail(summary, &stage, e, None)),
    };
    let consts = match compute_constants(cfg, &eq, &ops) {
        Ok(c) => c,
        Err(e) => return Ok(fail(summary, "hypocoercivity", e, None)),
    };
    summary.constants = consts.clone();
    let prediction = match predict(cfg, &consts) {
        Ok(p) => p,
        Err(e) => return Ok(fail(summary, "rates", e, None)),
    };
    summary.regime = Some(prediction.regime);
    summary.predicted_exponent_or_rate = prediction.value();
    summary.paper_case = Some(prediction.source.clone());
    let f0 = initial_state(cfg, &eq);
    let opts = TrajectoryOptions {
        schedule: cfg.schedule,
        delta: consts.delta.unwrap_or(0.0),
        powers: MomentPowers {
            k: cfg.moment_k.clone(),
            ell: cfg.moment_ell.clone(),
        },
        scheme: cfg.scheme,
        monitor_max_principle: true,
    };
    let mut record = match run_trajectory(&f0, &opts, &eq, &ops) {
        Ok(r) => r,
        Err(e) => return Ok(fail(summary, "evolution", e, None)),
    };
    summary.last_good_time = record.last_good_time;
    summary.max_principle_ok = Some(record.max_principle_ok.iter().all(|b| *b));
    summary.mass_drift = record
        .mass
        .iter()
        .map(|m| (m - record.mass[0]).abs())
        .fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))));
    let h0 = record.entropy_h[0];
    summary.entropy_monotone = Some(record.entropy_h.windows(2).all(|w| w[1] <= w[0] + 1e-8 * h0));
    if record.status == RunStatus::Failed {
        summary.status = RunStatus::Failed;
        summary.failure = record.failure.as_ref().map(|m| format!("[evolution] {m}"));
        record.envelope = vec![f64::NAN; record.len()];
        return Ok(ReportBundle {
            config: cfg.clone(),
            summary,
            record: Some(record),
            exit_code: 2,
        });
    }
    let kind = match prediction.regime {
        Regime::Exponential => FitKind::Exponential,
        _ => FitKind::Algebraic,
    };
    let window = tail_window(&record.times, cfg.fit_window);
    summary.fit_kind = Some(kind);
    summary.fit_window = Some([window.0, window.1]);
    summary.window_sensitivity = window_sensitivity(&record.times, &record.norm_sq_mu, kind);
    match fit_series(&record.times, &record.norm_sq_mu, kind, window) {
        Ok(fit) => {
            summary.fitted_value = Some(fit.value);
            summary.r_squared = Some(fit.r_squared);
        }
        Err(e) => return Ok(fail(summary, "rates", e, Some(record))),
    }
    summary.envelope = envelope(cfg, &prediction, &mut record, window.0);
    Ok(ReportBundle {
        config: cfg.clone(),
        summary,
        record: Some(record),
        exit_code: 0,
    })
}

fn envelope(
    cfg: &ScenarioConfig,
    prediction: &RegimePrediction,
    record: &mut TrajectoryRecord,
    window_start: f64,
) -> Option<EnvelopeSummary> {
    let times = record.times.clone();
    let out = match (prediction.regime, prediction.rate, prediction.exponent) {
        (Regime::Exponential, Some(rate), _) => {
            let (series, name) = match cfg.mode {
                Mode::Kinetic => (&record.entropy_h, "entropy_H"),
                Mode::Macro => (&record.norm_sq_mu, "norm_sq_mu"),
            };
            let c = series[0];
            let env: Vec<f64> = times.iter().map(|t| c * (-rate * t).exp()).collect();
            let dom = dominated(&times, series, &env, 0.0, ENVELOPE_TOL);
            record.envelope = env;
            Some(EnvelopeSummary {
                series: name,
                kind: FitKind::Exponential,
                constant: c,
                exponent_or_rate: rate,
                from_time: 0.0,
                dominated: dom,
            })
        }
        (Regime::Algebraic, _, Some(zeta)) => {
            let (c, env) = algebraic_envelope(&times, &record.norm_sq_mu, zeta, window_start);
            let dom = dominated(&times, &record.norm_sq_mu, &env, window_start, ENVELOPE_TOL);
            record.envelope = env;
            Some(EnvelopeSummary {
                series: "norm_sq_mu",
                kind: FitKind::Algebraic,
                constant: c,
                exponent_or_rate: zeta,
                from_time: window_start,
                dominated: dom,
            })
        }
        _ => None,
    };
    if out.is_none() {
        record.envelope = vec![f64::NAN; times.len()];
    }
    out
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

/// CSV text: `t, norm_sq_mu, entropy_H, dissipation_D, envelope, J_<k>..., K_<l>..., max_principle_ok`.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut s = String::from("t,norm_sq_mu,entropy_H,dissipation_D,envelope");
    for (p, _) in &record.moments_j {
        let _ = write!(s, ",J_{p}");
    }
    for (p, _) in &record.moments_k {
        let _ = write!(s, ",K_{p}");
    }
    s.push_str(",max_principle_ok\n");
    for k in 0..record.len() {
        let env = record.envelope.get(k).copied().unwrap_or(f64::NAN);
        let _ = write!(
            s,
            "{},{},{},{},{}",
            num(record.times[k]),
            num(record.norm_sq_mu[k]),
            num(record.entropy_h[k]),
            num(record.dissipation_d[k]),
            num(env)
        );
        for (_, series) in record.moments_j.iter().chain(&record.moments_k) {
            let _ = write!(s, ",{}", num(series[k]));
        }
        let _ = writeln!(s, ",{}", record.max_principle_ok[k]);
    }
    s
}

pub fn summary_json(summary: &Summary) -> Result<String> {
    serde_json::to_string_pretty(summary)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Numerical(format!("summary serialization failed: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write the CSV trajectory (when present) and the JSON summary into `dir`.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> Result<(PathBuf, Option<PathBuf>)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = match &bundle.record {
        Some(rec) => {
            let p = dir.join(&bundle.config.csv);
            write_file(&p, &trajectory_csv(rec))?;
            Some(p)
        }
        None => None,
    };
    let json = dir.join(&bundle.config.json);
    write_file(&json, &summary_json(&bundle.summary)?)?;
    Ok((json, csv))
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexEntry {
    pub config: String,
    pub summary: Option<String>,
    pub status: String,
    pub exit_code: i32,
}

/// Read a list of configuration paths, one per line, relative to the list file.
pub fn read_config_list(list: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
    let base = list.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect())
}

/// Run every configuration concurrently, each into `out/<name>/`, and write `out/index.json`.
pub fn run_batch(
    configs: &[PathBuf],
    out: &Path,
    adjust: &(dyn Fn(&mut ScenarioConfig) + Sync),
) -> Result<(PathBuf, Vec<IndexEntry>)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let loaded: Vec<Result<ScenarioConfig>> = configs
        .iter()
        .map(|p| {
            let mut c = ScenarioConfig::load(p)?;
            adjust(&mut c);
            c.validate()?;
            Ok(c)
        })
        .collect();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let dirs: Vec<String> = loaded
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let base = c
                .as_ref()
                .map(|c| c.name.clone())
                .unwrap_or_else(|_| format!("config{i}"));
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect();
    let entries: Vec<IndexEntry> = exec::map_indexed(configs.len(), |i| {
        let config = configs[i].display().to_string();
        let outcome = loaded[i]
            .as_ref()
            .map_err(|e| (e.to_string(), e.exit_code()))
            .and_then(|cfg| {
                let bundle = run_scenario(cfg).map_err(|e| (e.to_string(), e.exit_code()))?;
                let (json, _) =
                    emit_report(&bundle, &out.join(&dirs[i])).map_err(|e| (e.to_string(), e.exit_code()))?;
                Ok((json, bundle))
            });
        match outcome {
            Ok((json, bundle)) => IndexEntry {
                config,
                summary: Some(json.display().to_string()),
                status: if bundle.failed() {
                    "failed".into()
                } else {
                    "completed".into()
                },
                exit_code: bundle.exit_code,
            },
            Err((msg, code)) => IndexEntry {
                config,
                summary: None,
                status: format!("error: {msg}"),
                exit_code: code,
            },
        }
    });
    let index = out.join("index.json");
    let text = serde_json::to_string_pretty(&entries)
        .map_err(|e| Error::Numerical(format!("index serialization failed: {e}")))?;
    write_file(&index, &(text + "\n"))?;
    Ok((index, entries))
}
