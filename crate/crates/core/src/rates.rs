//! Regime classification, least-squares rate fits and Bihari-LaSalle envelopes.

use crate::equilibria::XMode;
use crate::error::{Error, Result};
use crate::evolution::TrajectoryRecord;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exponential,
    Algebraic,
    NoDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimePrediction {
    pub regime: Regime,
    pub exponent: Option<f64>,
    pub rate: Option<f64>,
    pub source: String,
}

impl RegimePrediction {
    fn algebraic(exponent: f64, source: &str) -> Self {
        RegimePrediction {
            regime: Regime::Algebraic,
            exponent: Some(exponent),
            rate: None,
            source: source.into(),
        }
    }

    fn exponential(source: &str) -> Self {
        RegimePrediction {
            regime: Regime::Exponential,
            exponent: None,
            rate: None,
            source: source.into(),
        }
    }

    /// Attach the pipeline rate to an exponential prediction.
    pub fn with_rate(mut self, rate: f64) -> Result<Self> {
        if self.regime == Regime::Exponential {
            if !(rate > 0.0) {
                return Err(Error::Numerical(format!(
                    "exponential rate must be positive, got {rate}"
                )));
            }
            self.rate = Some(rate);
        }
        Ok(self)
    }

    /// Predicted exponent (algebraic) or rate (exponential).
    pub fn value(&self) -> Option<f64> {
        match self.regime {
            Regime::Exponential => self.rate,
            Regime::Algebraic => self.exponent,
            Regime::NoDecay => None,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {v}")))
    }
}

/// Decay law for the squared norm of `f - f_star` (or of `f` without equilibrium) in the kinetic equation.
pub fn classify_regime(x_mode: XMode, beta: f64, k: f64, ell: f64, d: usize) -> Result<RegimePrediction> {
    check_positive("beta", beta)?;
    if d == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    let soft_v = beta < 1.0;
    if soft_v {
        check_positive("ell", ell)?;
    }
    let ell_exp = ell / (2.0 * (1.0 - beta));
    match x_mode {
        XMode::Power { alpha } => {
            check_positive("alpha", alpha)?;
            let soft_x = alpha < 1.0;
            if soft_x {
                check_positive("k", k)?;
            }
            let k_exp = k / (2.0 * (1.0 - alpha));
            Ok(match (soft_x, soft_v) {
                (false, false) => RegimePrediction::exponential("thm2.case1"),
                (false, true) => RegimePrediction::algebraic(ell_exp, "thm2.case2"),
                (true, false) => RegimePrediction::algebraic(k_exp, "thm2.case3"),
                (true, true) => RegimePrediction::algebraic(k_exp.min(ell_exp), "thm2.case4"),
            })
        }
        XMode::Zero => {
            let half_d = d as f64 / 2.0;
            Ok(if soft_v {
                RegimePrediction::algebraic(half_d.min(ell_exp), "thm2.case6")
            } else {
                RegimePrediction::algebraic(half_d, "thm2.case5")
            })
        }
        XMode::Logarithmic { .. } => Err(Error::Argument(
            "logarithmic confinement is covered only for the macroscopic equation".into(),
        )),
    }
}

/// Decay law for the macroscopic diffusion equation.
pub fn classify_macro(x_mode: XMode, k: f64, d: usize) -> Result<RegimePrediction> {
    if d == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    let df = d as f64;
    match x_mode {
        XMode::Zero => Ok(RegimePrediction::algebraic(df / 2.0, "table1.nash")),
        XMode::Logarithmic { gamma } => {
            check_positive("gamma", gamma)?;
            if gamma < df {
                Ok(RegimePrediction::algebraic((df - gamma) / 2.0, "table1.ckn"))
            } else if gamma > df {
                check_positive("k", k)?;
                Ok(RegimePrediction::algebraic(k / 2.0, "table1.hardy_poincare"))
            } else {
                Err(Error::Argument(format!("gamma = d = {d} is a borderline case")))
            }
        }
        XMode::Power { alpha } => {
            check_positive("alpha", alpha)?;
            if alpha < 1.0 {
                check_positive("k", k)?;
                Ok(RegimePrediction::algebraic(
                    k / (2.0 * (1.0 - alpha)),
                    "table1.weighted_poincare",
                ))
            } else {
                Ok(RegimePrediction::exponential("table1.poincare"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Exponential,
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub value: f64,
    pub r_squared: f64,
    /// `log y` at the abscissa origin of the regression.
    pub intercept: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares fit of `log y` against `t` or `log(1 + t)` over samples with `t` in `[t_lo, t_hi]`.
pub fn fit_series(times: &[f64], values: &[f64], kind: FitKind, window: (f64, f64)) -> Result<Fit> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    let (lo, hi) = window;
    if !(lo <= hi) || times.is_empty() || lo < times[0] - 1e-12 || hi > times[times.len() - 1] + 1e-12 {
        return Err(Error::Fitting(format!(
            "window [{lo}, {hi}] is outside the recorded times"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, y) in times.iter().zip(values) {
        if *t >= lo - 1e-12 && *t <= hi + 1e-12 {
            if !(*y > 0.0 && y.is_finite()) {
                return Err(Error::Fitting(format!("nonpositive value {y} at t = {t}")));
            }
            xs.push(match kind {
                FitKind::Exponential => *t,
                FitKind::Algebraic => t.ln_1p(),
            });
            ys.push(y.ln());
        }
    }
    let n = xs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::Fitting(format!(
            "{n} samples in window, at least {MIN_FIT_SAMPLES} required"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fitting("degenerate window".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(Fit {
        value: -slope,
        r_squared,
        intercept: my - slope * mx,
        samples: n,
    })
}

pub fn fit_rate(record: &TrajectoryRecord, kind: FitKind, window: (f64, f64)) -> Result<Fit> {
    fit_series(&record.times, &record.norm_sq_mu, kind, window)
}

/// Window covering the last `fraction` of the recorded time span.
pub fn tail_window(times: &[f64], fraction: f64) -> (f64, f64) {
    let t_end = times.last().copied().unwrap_or(0.0);
    let t0 = times.first().copied().unwrap_or(0.0);
    (t_end - fraction * (t_end - t0), t_end)
}

pub const DEFAULT_WINDOW: f64 = 0.5;
pub const SENSITIVITY_WINDOWS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Clone, Serialize)]
pub struct WindowSensitivity {
    pub fraction: f64,
    pub value: Option<f64>,
    pub r_squared: Option<f64>,
}

pub fn window_sensitivity(times: &[f64], values: &[f64], kind: FitKind) -> Vec<WindowSensitivity> {
    SENSITIVITY_WINDOWS
        .iter()
        .map(|&fraction| {
            let fit = fit_series(times, values, kind, tail_window(times, fraction)).ok();
            WindowSensitivity {
                fraction,
                value: fit.map(|f| f.value),
                r_squared: fit.map(|f| f.r_squared),
            }
        })
        .collect()
}

/// `h0 (1 + (c / zeta) h0^{1/zeta} t)^{-zeta}`, the solution of `z' = -c z^{1 + 1/zeta}`, `z(0) = h0`.
pub fn bihari_lasalle_envelope(h0: f64, c: f64, zeta: f64, times: &[f64]) -> Vec<f64> {
    let k = c / zeta * h0.powf(1.0 / zeta);
    times.iter().map(|t| h0 * (1.0 + k * t).powf(-zeta)).collect()
}

/// Classical RK4 for `z' = -c z^{1 + 1/zeta}` sampled at `times`, with at most `max_step` per step.
pub fn bihari_lasalle_rk4(h0: f64, c: f64, zeta: f64, times: &[f64], max_step: f64) -> Vec<f64> {
    let rhs = |z: f64| -c * z.max(0.0).powf(1.0 + 1.0 / zeta);
    let mut z = h0;
    let mut t = 0.0;
    times
        .iter()
        .map(|&target| {
            let span = target - t;
            if span > 0.0 {
                let n = (span / max_step).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    let k1 = rhs(z);
                    let k2 = rhs(z + 0.5 * h * k1);
                    let k3 = rhs(z + 0.5 * h * k2);
                    let k4 = rhs(z + h * k3);
                    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                t = target;
            }
            z
        })
        .collect()
}

/// `C (1 + t)^{-zeta}` with the smallest `C` dominating `values` on `t <= t_split`.
pub fn algebraic_envelope(times: &[f64], values: &[f64], zeta: f64, t_split: f64) -> (f64, Vec<f64>) {
    let c = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t <= t_split + 1e-12)
        .map(|(t, y)| y * (1.0 + t).powf(zeta))
        .fold(0.0, f64::max);
    (c, times.iter().map(|t| c * (1.0 + t).powf(-zeta)).collect())
}

/// Whether `values <= envelope (1 + rel_tol)` for all `t >= t_from`.
pub fn dominated(times: &[f64], values: &[f64], envelope: &[f64], t_from: f64, rel_tol: f64) -> bool {
    times
        .iter()
        .zip(values.iter().zip(envelope))
        .filter(|(t, _)| **t >= t_from - 1e-12)
        .all(|(_, (y, e))| *y <= e * (1.0 + rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinetic_cases() {
        let p = classify_regime(XMode::Power { alpha: 2.0 }, 2.0, 2.0, 2.0, 1).unwrap();
        assert_eq!(p.regime, Regime::Exponential);
        let p = classify_regime(XMode::Power { alpha: 2.0 }, 0.5, 2.0, 3.0, 1).unwrap();
        assert_eq!(p.exponent, Some(3.0));
        let p = classify_regime(XMode::Zero, 1.5, 0.0, 0.0, 1).unwrap();
        assert_eq!(p.exponent, Some(0.5));
        assert_eq!(p.source, "thm2.case5");
        assert!(classify_regime(XMode::Logarithmic { gamma: 2.0 }, 2.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn exact_fits() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let f = fit_series(&t, &y, FitKind::Algebraic, (0.0, 9.8)).unwrap();
        assert!((f.value - 2.0).abs() < 1e-6 && f.r_squared > 0.999999);
        let y: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let f = fit_series(&t, &y, FitKind::Exponential, (0.0, 9.8)).unwrap();
        assert!((f.value - 3.0).abs() < 1e-6);
    }

    #[test]
    fn envelope_matches_rk4() {
        let t: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        for zeta in [0.5, 1.0, 2.0] {
            let a = bihari_lasalle_envelope(2.0, 0.8, zeta, &t);
            let b = bihari_lasalle_rk4(2.0, 0.8, zeta, &t, 1e-3);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-6, "{zeta}: {x} {y}");
            }
        }
    }
}
