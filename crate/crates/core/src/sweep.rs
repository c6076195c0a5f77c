//! Two-axis parameter sweeps over (α, ρ, N) emitting plot-ready rows.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{solve, uncoded_baseline, Regime};
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::verify::linspace;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits written to CSV.
pub const CSV_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Rho,
    Files,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Rho => "rho",
            SweepParam::Files => "files",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepParam::Alpha),
            "rho" => Ok(SweepParam::Rho),
            "n" | "files" => Ok(SweepParam::Files),
            other => Err(Error::InvalidSweep(format!("unknown axis parameter '{other}'"))),
        }
    }
}

/// One swept parameter and its values, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Axis {
    /// `steps` evenly spaced values over `[min, max]`.
    pub fn range(param: SweepParam, min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min < max) || steps < 2 {
            return Err(Error::InvalidSweep(format!(
                "{} axis needs min < max and at least 2 steps (got {min}..{max}, {steps})",
                param.name()
            )));
        }
        let mut values = linspace(min, max, steps);
        if param == SweepParam::Files {
            values.iter_mut().for_each(|v| *v = v.round());
            values.dedup();
        }
        Self::list(param, values)
    }

    /// Explicit values; must be strictly increasing with at least two entries.
    pub fn list(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSweep(format!(
                "{} axis needs at least two values",
                param.name()
            )));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSweep(format!(
                "{} axis values must be strictly increasing",
                param.name()
            )));
        }
        if param == SweepParam::Files && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::InvalidSweep("files axis takes positive integers".into()));
        }
        Ok(Self { param, values })
    }

    /// Parses `min:max:steps` or a comma-separated list.
    pub fn parse(param: SweepParam, text: &str) -> Result<Self> {
        let bad = |_| Error::InvalidSweep(format!("cannot parse axis values '{text}'"));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() == 3 {
            let min: f64 = parts[0].trim().parse().map_err(bad)?;
            let max: f64 = parts[1].trim().parse().map_err(bad)?;
            let steps: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSweep(format!("bad step count in '{text}'")))?;
            return Self::range(param, min, max, steps);
        }
        let values = text
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        Self::list(param, values)
    }
}

/// Fixed parameters plus two swept axes; the first axis is the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub users: usize,
    pub files: usize,
    pub rho: f64,
    pub alpha: f64,
    pub axes: [Axis; 2],
    #[serde(default)]
    pub allow_rho_gt_1: bool,
}

impl SweepSpec {
    pub fn new(
        users: usize,
        files: usize,
        rho: f64,
        alpha: f64,
        axes: [Axis; 2],
        allow_rho_gt_1: bool,
    ) -> Result<Self> {
        let spec = Self { users, files, rho, alpha, axes, allow_rho_gt_1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidSweep(format!(
                "both axes sweep {}",
                self.axes[0].param.name()
            )));
        }
        for axis in &self.axes {
            Axis::list(axis.param, axis.values.clone())?;
        }
        // every grid point must be a valid instance
        for point in self.points() {
            self.config_at(point)?;
        }
        Ok(())
    }

    /// `K = 5, N = 10`, α over `[0, 1]` by ρ over `[0, 0.3]`: optimal type map.
    pub fn figure1() -> Self {
        Self::new(
            5,
            10,
            0.0,
            0.0,
            [
                Axis::range(SweepParam::Rho, 0.0, 0.3, 31).expect("static axis"),
                Axis::range(SweepParam::Alpha, 0.0, 1.0, 101).expect("static axis"),
            ],
            false,
        )
        .expect("static spec")
    }

    /// `K = 5`, α over `[0, 1]` by `N ∈ {5, 10, 20, 50, 100}` at ρ = 0.01.
    pub fn figure2() -> Self {
        Self::new(
            5,
            5,
            0.01,
            0.0,
            [
                Axis::range(SweepParam::Alpha, 0.0, 1.0, 21).expect("static axis"),
                Axis::list(SweepParam::Files, vec![5.0, 10.0, 20.0, 50.0, 100.0]).expect("static axis"),
            ],
            false,
        )
        .expect("static spec")
    }

    /// `K = 5, N = 10`, α over `[0, 1]` by ρ over `[0, 0.3]`: caching gain.
    pub fn figure3() -> Self {
        Self::new(
            5,
            10,
            0.0,
            0.0,
            [
                Axis::range(SweepParam::Alpha, 0.0, 1.0, 21).expect("static axis"),
                Axis::range(SweepParam::Rho, 0.0, 0.3, 61).expect("static axis"),
            ],
            false,
        )
        .expect("static spec")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "figure1" | "fig1" | "1" => Ok(Self::figure1()),
            "figure2" | "fig2" | "2" => Ok(Self::figure2()),
            "figure3" | "fig3" | "3" => Ok(Self::figure3()),
            other => Err(Error::InvalidSweep(format!("unknown preset '{other}'"))),
        }
    }

    /// Grid points as `(outer value, inner value)`, row-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let [outer, inner] = &self.axes;
        outer
            .values
            .iter()
            .flat_map(|&o| inner.values.iter().map(move |&i| (o, i)))
            .collect()
    }

    pub fn config_at(&self, (outer, inner): (f64, f64)) -> Result<SystemConfig<f64>> {
        let (mut files, mut rho, mut alpha) = (self.files, self.rho, self.alpha);
        for (axis, v) in self.axes.iter().zip([outer, inner]) {
            match axis.param {
                SweepParam::Alpha => alpha = v,
                SweepParam::Rho => rho = v,
                SweepParam::Files => files = v as usize,
            }
        }
        if self.allow_rho_gt_1 {
            SystemConfig::with_unbounded_rho(self.users, files, rho, alpha)
        } else {
            SystemConfig::new(self.users, files, rho, alpha)
        }
    }
}

/// Delivery rate of the optimum against the best uncoded-delivery allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRecord {
    pub config: SystemConfig<f64>,
    pub r_delivery_opt: f64,
    pub r_delivery_uncoded: f64,
    pub gain: f64,
}

pub fn gain_record(config: &SystemConfig<f64>) -> GainRecord {
    let opt = solve(config).r_delivery;
    let uncoded = uncoded_baseline(config).r_delivery;
    GainRecord { config: *config, r_delivery_opt: opt, r_delivery_uncoded: uncoded, gain: uncoded - opt }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub users: usize,
    pub files: usize,
    pub rho: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub support: Vec<usize>,
    pub dominant_type: usize,
    pub r_placement: f64,
    pub r_delivery: f64,
    pub r_delivery_uncoded: f64,
    pub gain: f64,
}

fn evaluate(config: &SystemConfig<f64>) -> Result<SweepRow> {
    let sol = solve(config);
    sol.check_invariants(config)?;
    let gain = gain_record(config);
    if gain.gain < -1e-9 {
        return Err(Error::Invariant(format!(
            "negative gain {} at K={} N={} rho={} alpha={}",
            gain.gain,
            config.users(),
            config.files(),
            config.rho(),
            config.alpha()
        )));
    }
    Ok(SweepRow {
        users: config.users(),
        files: config.files(),
        rho: config.rho(),
        alpha: config.alpha(),
        regime: sol.regime,
        dominant_type: sol.dominant_type(),
        support: sol.support,
        r_placement: sol.r_placement,
        r_delivery: sol.r_delivery,
        r_delivery_uncoded: gain.r_delivery_uncoded,
        gain: gain.gain,
    })
}

/// Evaluates every grid point (in parallel) and returns rows in row-major order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.points()
        .into_par_iter()
        .map(|p| spec.config_at(p).and_then(|cfg| evaluate(&cfg)))
        .collect()
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits.saturating_sub(1), x);
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const CSV_HEADER: &str =
    "users,files,rho,alpha,regime,boundary_a,support,dominant_type,r_placement,r_delivery,r_delivery_uncoded,gain";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let g = |x: f64| format_sig(x, CSV_DIGITS);
    for r in rows {
        let support: Vec<String> = r.support.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.users,
            r.files,
            g(r.rho),
            g(r.alpha),
            r.regime.label(),
            r.regime.boundary().map(|a| a.to_string()).unwrap_or_default(),
            support.join(";"),
            r.dominant_type,
            g(r.r_placement),
            g(r.r_delivery),
            g(r.r_delivery_uncoded),
            g(r.gain),
        )?;
    }
    out.flush()
}

/// Sidecar metadata written next to a sweep dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest<'a> {
    pub spec: &'a SweepSpec,
    pub version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub row_count: usize,
}

impl<'a> Manifest<'a> {
    pub fn new(spec: &'a SweepSpec, row_count: usize) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self { spec, version: VERSION, timestamp, row_count }
    }
}
