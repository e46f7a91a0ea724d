//! Sweep configuration, concurrence-curve datasets and parameter reports.
//!
//! A sweep evaluates the concurrence of the evolved, projected SPDC state
//! over a grid of `W = w0/r0` values, either through the full numeric
//! pipeline (evolve at given `K` with `t = 1.72 W^{5/3}/K`, project onto the
//! ±q qubit subspace, compute the concurrence) or through the closed-form
//! single-phase-screen expressions. Output is CSV with fixed formatting so
//! identical configurations produce byte-identical files.

use crate::entangle::{chi, concurrence, sps_concurrence};
use crate::error::{Error, Result};
use crate::evolve::{evolve_spdc, Scenario};
use crate::params::{weak_scint_t, TurbulenceScales};
use crate::project::project_qubit;
use rayon::prelude::*;
use std::str::FromStr;

/// What a sweep evaluates per grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepScenario {
    /// Full pipeline, both photons in the same medium.
    Correlated,
    /// Full pipeline, independent media.
    Uncorrelated,
    /// Closed-form single-phase-screen curve, correlated chi.
    SpsCorrelated,
    /// Closed-form single-phase-screen curve, uncorrelated chi.
    SpsUncorrelated,
}

impl SweepScenario {
    pub fn label(self) -> &'static str {
        match self {
            SweepScenario::Correlated => "correlated",
            SweepScenario::Uncorrelated => "uncorrelated",
            SweepScenario::SpsCorrelated => "sps-correlated",
            SweepScenario::SpsUncorrelated => "sps-uncorrelated",
        }
    }

    pub fn is_sps(self) -> bool {
        matches!(
            self,
            SweepScenario::SpsCorrelated | SweepScenario::SpsUncorrelated
        )
    }
}

impl FromStr for SweepScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlated" => Ok(SweepScenario::Correlated),
            "uncorrelated" => Ok(SweepScenario::Uncorrelated),
            "sps-correlated" => Ok(SweepScenario::SpsCorrelated),
            "sps-uncorrelated" => Ok(SweepScenario::SpsUncorrelated),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected correlated, uncorrelated, \
                 sps-correlated or sps-uncorrelated)"
            ))),
        }
    }
}

/// Sweep over `W` (and `K` for the numeric scenarios).
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub q: u32,
    pub scenario: SweepScenario,
    /// Turbulence strengths; ignored for the sps-* scenarios.
    pub k_values: Vec<f64>,
    /// (min, max, count) for the W grid.
    pub w_range: (f64, f64, usize),
    pub output_path: String,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        let (lo, hi, count) = self.w_range;
        if !(lo >= 0.0) || !(hi > lo) || count < 2 {
            return Err(Error::Config(format!(
                "W range needs 0 <= min < max and count >= 2, got {lo}:{hi}:{count}"
            )));
        }
        if !self.scenario.is_sps() {
            if self.k_values.is_empty() {
                return Err(Error::Config(
                    "numeric scenarios need at least one K".into(),
                ));
            }
            if self.k_values.iter().any(|&k| !(k > 0.0)) {
                return Err(Error::Config("all K values must be positive".into()));
            }
        }
        Ok(())
    }

    fn w_grid(&self) -> Vec<f64> {
        let (lo, hi, count) = self.w_range;
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    }
}

/// One output row of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub scenario: SweepScenario,
    pub q: u32,
    /// Empty for sps-* rows, where no K enters.
    pub strength: Option<f64>,
    pub w_ratio: f64,
    /// Empty for sps-* rows.
    pub t: Option<f64>,
    pub concurrence: f64,
    pub clamped: bool,
}

/// Concurrence of the evolved, projected SPDC state at `(K, W)`.
pub fn pipeline_concurrence(
    scenario: Scenario,
    q: u32,
    strength: f64,
    w_ratio: f64,
) -> Result<(f64, f64, bool)> {
    let t = if w_ratio == 0.0 {
        0.0
    } else {
        weak_scint_t(w_ratio, strength)?
    };
    // The pump waist cancels in the trace-normalized projection.
    let kernel = evolve_spdc(scenario, strength, t, 1.0)?;
    let state = project_qubit(&kernel, q, t)?;
    let c = concurrence(&state)?;
    Ok((t, c.value, c.clamped))
}

/// Evaluate all grid points of a sweep, in deterministic row order.
pub fn sweep_rows(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let ws = config.w_grid();
    match config.scenario {
        SweepScenario::SpsCorrelated | SweepScenario::SpsUncorrelated => {
            let correlated = config.scenario == SweepScenario::SpsCorrelated;
            ws.iter()
                .map(|&w| {
                    let c = sps_concurrence(config.q, chi(w, correlated))?;
                    Ok(SweepRow {
                        scenario: config.scenario,
                        q: config.q,
                        strength: None,
                        w_ratio: w,
                        t: None,
                        concurrence: c,
                        clamped: false,
                    })
                })
                .collect()
        }
        SweepScenario::Correlated | SweepScenario::Uncorrelated => {
            let scenario = match config.scenario {
                SweepScenario::Correlated => Scenario::Correlated,
                _ => Scenario::Uncorrelated,
            };
            let mut points: Vec<(f64, f64)> = Vec::new();
            for &k in &config.k_values {
                for &w in &ws {
                    points.push((k, w));
                }
            }
            // Grid points are independent; compute in parallel, then emit in
            // the deterministic (K, W) order of `points`.
            let rows: Vec<Result<SweepRow>> = points
                .par_iter()
                .map(|&(k, w)| {
                    let (t, c, clamped) = pipeline_concurrence(scenario, config.q, k, w)?;
                    Ok(SweepRow {
                        scenario: config.scenario,
                        q: config.q,
                        strength: Some(k),
                        w_ratio: w,
                        t: Some(t),
                        concurrence: c,
                        clamped,
                    })
                })
                .collect();
            rows.into_iter().collect()
        }
    }
}

/// Fixed scientific formatting: 12 significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.11e}")
}

/// Render rows as CSV with the fixed header
/// `scenario,q,K,W,t,concurrence,clamped`.
pub fn format_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("scenario,q,K,W,t,concurrence,clamped\n");
    for r in rows {
        let k = r.strength.map(fmt).unwrap_or_default();
        let t = r.t.map(fmt).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario.label(),
            r.q,
            k,
            fmt(r.w_ratio),
            t,
            fmt(r.concurrence),
            r.clamped
        ));
    }
    out
}

/// Run a sweep and return the CSV text.
pub fn run_sweep(config: &SweepConfig) -> Result<String> {
    Ok(format_csv(&sweep_rows(config)?))
}

/// Human-readable report of every derived parameter, echoing the inputs.
pub fn report_params(scales: &TurbulenceScales) -> String {
    let direct = scales.rytov_direct();
    let from_ratio = scales.rytov_from_ratio();
    let rel = if direct > 0.0 {
        (direct - from_ratio).abs() / direct
    } else {
        0.0
    };
    let mut out = String::new();
    out.push_str("inputs:\n");
    out.push_str(&format!("  Cn^2       = {:e} m^-2/3\n", scales.cn2()));
    out.push_str(&format!("  lambda     = {:e} m\n", scales.wavelength()));
    out.push_str(&format!("  waist      = {:e} m\n", scales.waist()));
    out.push_str(&format!("  distance   = {:e} m\n", scales.distance()));
    out.push_str("derived:\n");
    out.push_str(&format!(
        "  k          = {:.6e} rad/m\n",
        scales.wavenumber()
    ));
    out.push_str(&format!("  r0         = {:.6e} m\n", scales.fried()));
    out.push_str(&format!("  W = w0/r0  = {:.6e}\n", scales.w_ratio()));
    out.push_str(&format!("  K          = {:.6e}\n", scales.strength()));
    out.push_str(&format!(
        "  t = z/zR   = {:.6e}\n",
        scales.normalized_distance()
    ));
    out.push_str(&format!("  sigma_R^2  = {:.6e} (direct)\n", direct));
    out.push_str(&format!("  sigma_R^2  = {:.6e} (from W, K)\n", from_ratio));
    out.push_str(&format!("  zeta       = {:.6e} m^-1/3\n", scales.zeta()));
    if let Some(beta) = scales.beta() {
        out.push_str(&format!("  beta       = {:.6e}\n", beta));
    }
    if rel > 0.01 {
        out.push_str(&format!(
            "  WARNING: Rytov cross-check disagrees by {:.2}% (> 1%)\n",
            rel * 100.0
        ));
    } else {
        out.push_str(&format!(
            "  Rytov cross-check agrees to {:.3}% (within 1%)\n",
            rel * 100.0
        ));
    }
    out
}

/// Key-value sweep configuration file: one `key = value` per line,
/// `#` comments. Recognized keys: `q`, `scenario`, `K` (comma list),
/// `W` (`min:max:count`), `out`.
#[derive(Clone, Debug, Default)]
pub struct PartialConfig {
    pub q: Option<u32>,
    pub scenario: Option<SweepScenario>,
    pub k_values: Option<Vec<f64>>,
    pub w_range: Option<(f64, f64, usize)>,
    pub output_path: Option<String>,
}

/// Parse a comma-separated list of positive reals.
pub fn parse_k_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad K value '{p}': {e}")))
        })
        .collect()
}

/// Parse `min:max:count`.
pub fn parse_w_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "W range must be min:max:count, got '{s}'"
        )));
    }
    let lo = parts[0]
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad W min: {e}")))?;
    let hi = parts[1]
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad W max: {e}")))?;
    let count = parts[2]
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad W count: {e}")))?;
    Ok((lo, hi, count))
}

impl PartialConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PartialConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "q" => {
                    cfg.q = Some(
                        value
                            .parse()
                            .map_err(|e| Error::Config(format!("bad q: {e}")))?,
                    )
                }
                "scenario" => cfg.scenario = Some(value.parse()?),
                "K" => cfg.k_values = Some(parse_k_list(value)?),
                "W" => cfg.w_range = Some(parse_w_range(value)?),
                "out" => cfg.output_path = Some(value.to_string()),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Fill any missing field from `other` (flags override file values by
    /// applying the file as the fallback).
    pub fn or(self, fallback: PartialConfig) -> PartialConfig {
        PartialConfig {
            q: self.q.or(fallback.q),
            scenario: self.scenario.or(fallback.scenario),
            k_values: self.k_values.or(fallback.k_values),
            w_range: self.w_range.or(fallback.w_range),
            output_path: self.output_path.or(fallback.output_path),
        }
    }

    /// Materialize with defaults for anything still unset. The default K set
    /// spans weak to strong scintillation.
    pub fn build(self) -> Result<SweepConfig> {
        let config = SweepConfig {
            q: self.q.unwrap_or(1),
            scenario: self.scenario.unwrap_or(SweepScenario::Uncorrelated),
            k_values: self
                .k_values
                .unwrap_or_else(|| vec![0.1, 1.0, 10.0, 100.0, 1e4]),
            w_range: self.w_range.unwrap_or((0.0, 2.0, 41)),
            output_path: self.output_path.unwrap_or_else(|| "sweep.csv".into()),
        };
        config.validate()?;
        Ok(config)
    }
}
