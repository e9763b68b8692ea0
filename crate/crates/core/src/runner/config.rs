//! Flat `key = value` scenario configuration.

use crate::equilibria::{PotentialSpec, XMode, DEFAULT_BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::evolution::{Mode, Schedule, Scheme};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaChoice {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `clamp(f_star (1 + eps b), 0, cap f_star)` with a signed two-lobe bump.
    Bump {
        eps: f64,
        x0: f64,
        v0: f64,
        width: f64,
        cap: f64,
    },
    Gaussian {
        x0: f64,
        sx: f64,
        v0: f64,
        sv: f64,
        cap: f64,
    },
    OddV {
        eps: f64,
        x0: f64,
        width: f64,
    },
    /// Macroscopic Gaussian with variance `s0`.
    DensityGaussian {
        x0: f64,
        s0: f64,
    },
    DensityBump {
        eps: f64,
        x0: f64,
        width: f64,
    },
}

impl InitialData {
    pub fn is_macro(&self) -> bool {
        matches!(
            self,
            InitialData::DensityGaussian { .. } | InitialData::DensityBump { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub potential: PotentialSpec,
    pub d: usize,
    pub x_half_width: f64,
    pub v_half_width: f64,
    pub nx: usize,
    pub nv: usize,
    pub schedule: Schedule,
    pub scheme: Scheme,
    pub delta: DeltaChoice,
    pub moment_k: Vec<f64>,
    pub moment_ell: Vec<f64>,
    pub initial_data: InitialData,
    pub boundary_tolerance: f64,
    pub fit_window: f64,
    pub seed: u64,
    pub csv: String,
    pub json: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "scenario".into(),
            mode: Mode::Kinetic,
            potential: PotentialSpec::power(2.0, 2.0),
            d: 1,
            x_half_width: 8.0,
            v_half_width: 8.0,
            nx: 129,
            nv: 129,
            schedule: Schedule {
                dt: 0.05,
                t_final: 10.0,
                sample_stride: 5,
            },
            scheme: Scheme::ImplicitEuler,
            delta: DeltaChoice::Auto,
            moment_k: vec![2.0],
            moment_ell: vec![2.0],
            initial_data: InitialData::Bump {
                eps: 0.8,
                x0: 1.0,
                v0: 0.5,
                width: 1.0,
                cap: 2.0,
            },
            boundary_tolerance: DEFAULT_BOUNDARY_TOL,
            fit_window: 0.5,
            seed: 1,
            csv: "trajectory.csv".into(),
            json: "summary.json".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "name",
    "mode",
    "x_mode",
    "alpha",
    "gamma",
    "beta",
    "d",
    "x_half_width",
    "v_half_width",
    "nx",
    "nv",
    "dt",
    "t_final",
    "sample_stride",
    "scheme",
    "delta",
    "moment_k",
    "moment_ell",
    "initial_data",
    "init_eps",
    "init_x0",
    "init_v0",
    "init_width",
    "init_sx",
    "init_sv",
    "init_s0",
    "init_cap",
    "boundary_tolerance",
    "fit_window",
    "seed",
    "csv",
    "json",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Validation(format!("line {}: unknown key '{k}'", n + 1)));
        }
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::Validation(format!("line {}: duplicate key '{k}'", n + 1)));
        }
    }
    Ok(map)
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Validation(format!("{key}: '{s}' is not a finite number"))),
        }
    }

    fn int(&self, key: &str, default: u64) -> Result<u64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| Error::Validation(format!("{key}: '{s}' is not a nonnegative integer"))),
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(s) if s.is_empty() => Ok(Vec::new()),
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite() && *v >= 0.0)
                        .ok_or_else(|| Error::Validation(format!("{key}: '{p}' is not a nonnegative number")))
                })
                .collect(),
        }
    }

    fn text(&self, key: &str, default: &str) -> String {
        self.0.get(key).cloned().unwrap_or_else(|| default.to_string())
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let r = Reader(&map);
        let base = ScenarioConfig::default();
        let mode = match r.text("mode", "kinetic").as_str() {
            "kinetic" => Mode::Kinetic,
            "macro" => Mode::Macro,
            other => return Err(Error::Validation(format!("mode: unknown value '{other}'"))),
        };
        let beta = r.real("beta", 2.0)?;
        let potential = match r.text("x_mode", "power").as_str() {
            "power" => PotentialSpec::power(r.real("alpha", 2.0)?, beta),
            "logarithmic" => PotentialSpec::logarithmic(r.real("gamma", 2.0)?, beta),
            "zero" => PotentialSpec::zero(beta),
            other => return Err(Error::Validation(format!("x_mode: unknown value '{other}'"))),
        };
        let scheme = match r.text("scheme", "implicit_euler").as_str() {
            "implicit_euler" => Scheme::ImplicitEuler,
            "crank_nicolson" => Scheme::CrankNicolson,
            other => return Err(Error::Validation(format!("scheme: unknown value '{other}'"))),
        };
        let delta = match r.text("delta", "auto").as_str() {
            "auto" => DeltaChoice::Auto,
            _ => DeltaChoice::Value(r.real("delta", 0.0)?),
        };
        let default_init = match mode {
            Mode::Kinetic => "bump",
            Mode::Macro => "density_gaussian",
        };
        let initial_data = match r.text("initial_data", default_init).as_str() {
            "bump" => InitialData::Bump {
                eps: r.real("init_eps", 0.8)?,
                x0: r.real("init_x0", 1.0)?,
                v0: r.real("init_v0", 0.5)?,
                width: r.real("init_width", 1.0)?,
                cap: r.real("init_cap", 2.0)?,
            },
            "gaussian" => InitialData::Gaussian {
                x0: r.real("init_x0", 0.0)?,
                sx: r.real("init_sx", 1.0)?,
                v0: r.real("init_v0", 0.0)?,
                sv: r.real("init_sv", 1.0)?,
                cap: r.real("init_cap", 10.0)?,
            },
            "odd_v" => InitialData::OddV {
                eps: r.real("init_eps", 0.8)?,
                x0: r.real("init_x0", 0.0)?,
                width: r.real("init_width", 1.0)?,
            },
            "density_gaussian" => InitialData::DensityGaussian {
                x0: r.real("init_x0", 0.0)?,
                s0: r.real("init_s0", 1.0)?,
            },
            "density_bump" => InitialData::DensityBump {
                eps: r.real("init_eps", 0.8)?,
                x0: r.real("init_x0", 1.0)?,
                width: r.real("init_width", 1.0)?,
            },
            other => return Err(Error::Validation(format!("initial_data: unknown value '{other}'"))),
        };
        let cfg = ScenarioConfig {
            name: r.text("name", &base.name),
            mode,
            potential,
            d: r.int("d", 1)? as usize,
            x_half_width: r.real("x_half_width", base.x_half_width)?,
            v_half_width: r.real("v_half_width", base.v_half_width)?,
            nx: r.int("nx", base.nx as u64)? as usize,
            nv: r.int("nv", base.nv as u64)? as usize,
            schedule: Schedule {
                dt: r.real("dt", base.schedule.dt)?,
                t_final: r.real("t_final", base.schedule.t_final)?,
                sample_stride: r.int("sample_stride", base.schedule.sample_stride as u64)? as usize,
            },
            scheme,
            delta,
            moment_k: r.list("moment_k", &base.moment_k)?,
            moment_ell: r.list("moment_ell", &base.moment_ell)?,
            initial_data,
            boundary_tolerance: r.real("boundary_tolerance", base.boundary_tolerance)?,
            fit_window: r.real("fit_window", base.fit_window)?,
            seed: r.int("seed", base.seed)?,
            csv: r.text("csv", &base.csv),
            json: r.text("json", &base.json),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if !text
            .lines()
            .any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("name"))
        {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                cfg.name = stem.to_string();
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let v = |msg: String| Err(Error::Validation(msg));
        if self.nx.is_multiple_of(2) || self.nv.is_multiple_of(2) || self.nx < 3 || self.nv < 3 {
            return v(format!(
                "nx and nv must be odd and at least 3, got nx = {}, nv = {}",
                self.nx, self.nv
            ));
        }
        if !(self.x_half_width > 0.0 && self.v_half_width > 0.0) {
            return v("half widths must be positive".into());
        }
        if self.d != 1 {
            return v(format!("trajectories are computed for d = 1 only, got d = {}", self.d));
        }
        self.schedule.validate()?;
        self.potential
            .validate()
            .map_err(|e| Error::Validation(e.to_string()))?;
        if let DeltaChoice::Value(d) = self.delta {
            if !(d > 0.0) {
                return v(format!("delta must be positive, got {d}"));
            }
        }
        if !(self.boundary_tolerance > 0.0 && self.boundary_tolerance < 1.0) {
            return v("boundary_tolerance must lie in (0, 1)".into());
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return v("fit_window must lie in (0, 1]".into());
        }
        match (self.mode, self.initial_data.is_macro()) {
            (Mode::Kinetic, true) => return v("macroscopic initial data requires mode = macro".into()),
            (Mode::Macro, false) => return v("kinetic initial data requires mode = kinetic".into()),
            _ => {}
        }
        if self.mode == Mode::Kinetic && matches!(self.potential.x_mode, XMode::Logarithmic { .. }) {
            return v("logarithmic confinement is available in mode = macro only".into());
        }
        if let InitialData::DensityGaussian { s0, .. } = self.initial_data {
            if !(s0 > 0.0) {
                return v("init_s0 must be positive".into());
            }
        }
        for name in [&self.csv, &self.json] {
            if name.is_empty() || name.contains('/') || name.contains('\\') {
                return v(format!("output name '{name}' must be a plain file name"));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it reproduces this configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("name", self.name.clone());
        put(
            "mode",
            match self.mode {
                Mode::Kinetic => "kinetic".into(),
                Mode::Macro => "macro".into(),
            },
        );
        match self.potential.x_mode {
            XMode::Power { alpha } => {
                put("x_mode", "power".into());
                put("alpha", alpha.to_string());
            }
            XMode::Logarithmic { gamma } => {
                put("x_mode", "logarithmic".into());
                put("gamma", gamma.to_string());
            }
            XMode::Zero => put("x_mode", "zero".into()),
        }
        put("beta", self.potential.beta.to_string());
        put("d", self.d.to_string());
        put("x_half_width", self.x_half_width.to_string());
        put("v_half_width", self.v_half_width.to_string());
        put("nx", self.nx.to_string());
        put("nv", self.nv.to_string());
        put("dt", self.schedule.dt.to_string());
        put("t_final", self.schedule.t_final.to_string());
        put("sample_stride", self.schedule.sample_stride.to_string());
        put(
            "scheme",
            match self.scheme {
                Scheme::ImplicitEuler => "implicit_euler".into(),
                Scheme::CrankNicolson => "crank_nicolson".into(),
            },
        );
        put(
            "delta",
            match self.delta {
                DeltaChoice::Auto => "auto".into(),
                DeltaChoice::Value(d) => d.to_string(),
            },
        );
        let join = |v: &[f64]| v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        put("moment_k", join(&self.moment_k));
        put("moment_ell", join(&self.moment_ell));
        match self.initial_data {
            InitialData::Bump {
                eps,
                x0,
                v0,
                width,
                cap,
            } => {
                put("initial_data", "bump".into());
                put("init_eps", eps.to_string());
                put("init_x0", x0.to_string());
                put("init_v0", v0.to_string());
                put("init_width", width.to_string());
                put("init_cap", cap.to_string());
            }
            InitialData::Gaussian { x0, sx, v0, sv, cap } => {
                put("initial_data", "gaussian".into());
                put("init_x0", x0.to_string());
                put("init_sx", sx.to_string());
                put("init_v0", v0.to_string());
                put("init_sv", sv.to_string());
                put("init_cap", cap.to_string());
            }
            InitialData::OddV { eps, x0, width } => {
                put("initial_data", "odd_v".into());
                put("init_eps", eps.to_string());
                put("init_x0", x0.to_string());
                put("init_width", width.to_string());
            }
            InitialData::DensityGaussian { x0, s0 } => {
                put("initial_data", "density_gaussian".into());
                put("init_x0", x0.to_string());
                put("init_s0", s0.to_string());
            }
            InitialData::DensityBump { eps, x0, width } => {
                put("initial_data", "density_bump".into());
                put("init_eps", eps.to_string());
                put("init_x0", x0.to_string());
                put("init_width", width.to_string());
            }
        }
        put("boundary_tolerance", self.boundary_tolerance.to_string());
        put("fit_window", self.fit_window.to_string());
        put("seed", self.seed.to_string());
        put("csv", self.csv.clone());
        put("json", self.json.clone());
        m
    }

    pub fn echo_text(&self) -> String {
        self.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_echo_round_trips() {
        let cfg = ScenarioConfig::parse("beta = 0.5\nv_half_width = 105\nnv = 421 # wide\n").unwrap();
        assert_eq!(cfg.potential.beta, 0.5);
        assert_eq!(ScenarioConfig::parse(&cfg.echo_text()).unwrap(), cfg);
    }

    #[test]
    fn even_grid_is_rejected() {
        let e = ScenarioConfig::parse("nx = 128\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(ScenarioConfig::parse("colour = red\n").is_err());
    }
}
