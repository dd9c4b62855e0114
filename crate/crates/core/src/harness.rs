//! Config-driven experiment sweeps with byte-reproducible output.
//!
//! A config is a flat `key=value` text file. Blank lines and `#` comments
//! are ignored; list values are comma separated.
//!
//! ```text
//! x_law=normal
//! y_law=pareto_sq:alpha=1.5
//! n_grid=100,1000,10000
//! gamma=1.5
//! replicates=10000
//! sample_replicates_for_distance=100000
//! seed=42
//! outputs=delta_mc,delta_laplace,rate_fit
//! statistic=psi
//! timing=false
//! ```
//!
//! `SELFNORM_SEED`, when set, overrides `seed`. Wall times are recorded only
//! with `timing=true`; otherwise the column is 0 so output bytes depend on
//! the config alone.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_kolmogorov, bound_wasserstein};
use crate::delta_engine::{
    asym_fin, asym_fin3, asym_inf, asym_stable, delta_laplace, delta_mc, DeltaEstimate, MIN_REPLICATES,
};
use crate::distances::{kolmogorov_to_normal, wasserstein_to_normal};
use crate::distributions::{DistributionSpec, ExtReal, TailTarget};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, panels, QuadOptions};
use crate::regression::fit_rate;
use crate::rng::{hash64, SeededStream};
use crate::specfun::normal_cdf;
use crate::statistics::{psi_slices, rho_slices, self_norm_plain, student_t_from_psi};

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "SELFNORM_SEED";

/// Fixed CSV header.
pub const CSV_HEADER: [&str; 11] = [
    "x_law",
    "y_law",
    "statistic",
    "n",
    "quantity",
    "method",
    "gamma",
    "value",
    "stderr",
    "wall_time_ms",
    "seed",
];

// stream tags keep the Δ draws and the distance draws independent
const TAG_DELTA: u64 = 1;
const TAG_DISTANCE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Output {
    DeltaMc,
    DeltaLaplace,
    AsymFin3,
    AsymFin,
    AsymInf,
    AsymStable,
    DkEmpirical,
    DwEmpirical,
    Bounds,
    RateFit,
}

impl Output {
    pub const ALL: [Output; 10] = [
        Output::DeltaMc,
        Output::DeltaLaplace,
        Output::AsymFin3,
        Output::AsymFin,
        Output::AsymInf,
        Output::AsymStable,
        Output::DkEmpirical,
        Output::DwEmpirical,
        Output::Bounds,
        Output::RateFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::DeltaMc => "delta_mc",
            Output::DeltaLaplace => "delta_laplace",
            Output::AsymFin3 => "asym_fin3",
            Output::AsymFin => "asym_fin",
            Output::AsymInf => "asym_inf",
            Output::AsymStable => "asym_stable",
            Output::DkEmpirical => "dk_empirical",
            Output::DwEmpirical => "dw_empirical",
            Output::Bounds => "bounds",
            Output::RateFit => "rate_fit",
        }
    }

    /// Quantities this output writes for each n.
    pub fn quantities(self) -> &'static [&'static str] {
        match self {
            Output::Bounds => &["bound_dk", "bound_dw"],
            Output::RateFit => &[],
            Output::DeltaMc => &["delta_mc"],
            Output::DeltaLaplace => &["delta_laplace"],
            Output::AsymFin3 => &["asym_fin3"],
            Output::AsymFin => &["asym_fin"],
            Output::AsymInf => &["asym_inf"],
            Output::AsymStable => &["asym_stable"],
            Output::DkEmpirical => &["dk_empirical"],
            Output::DwEmpirical => &["dw_empirical"],
        }
    }
}

impl FromStr for Output {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Output::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown output '{s}'")))
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which statistic the distance outputs sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// ψ_n = Σ X_i Y_i / V_n
    Psi,
    /// √n ρ_n
    RhoScaled,
    /// S_n / V_n
    Plain,
    /// Student's T_n
    StudentT,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Psi => "psi",
            Statistic::RhoScaled => "rho_scaled",
            Statistic::Plain => "plain",
            Statistic::StudentT => "student_t",
        }
    }

    fn uses_x(self) -> bool {
        matches!(self, Statistic::Psi | Statistic::RhoScaled)
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi" => Ok(Statistic::Psi),
            "rho_scaled" => Ok(Statistic::RhoScaled),
            "plain" => Ok(Statistic::Plain),
            "student_t" => Ok(Statistic::StudentT),
            _ => Err(Error::Config(format!("unknown statistic '{s}'"))),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub x_law: DistributionSpec,
    pub y_law: DistributionSpec,
    pub n_grid: Vec<usize>,
    pub gamma: f64,
    pub replicates: usize,
    pub sample_replicates_for_distance: usize,
    pub seed: u64,
    pub outputs: Vec<Output>,
    pub statistic: Statistic,
    pub timing: bool,
}

const KEYS: [&str; 10] = [
    "x_law",
    "y_law",
    "n_grid",
    "gamma",
    "replicates",
    "sample_replicates_for_distance",
    "seed",
    "outputs",
    "statistic",
    "timing",
];

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    // allow 1e4 style for round numbers
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e18 => Ok(v as usize),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let r = match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    r.map_err(|_| format!("'{s}' is not a 64-bit unsigned seed"))
}

impl ExperimentConfig {
    /// Parse config text; `context` names the source in error messages.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut seen: Vec<(&str, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                context: context.to_string(),
                line: line_no,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            let k = k.trim();
            let key = KEYS
                .iter()
                .copied()
                .find(|&known| known == k)
                .ok_or_else(|| err(format!("unknown key '{k}'")))?;
            if seen.iter().any(|(s, _, _)| *s == key) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            seen.push((key, v.trim().to_string(), line_no));
        }
        let get = |key: &str| {
            seen.iter()
                .find(|(k, _, _)| *k == key)
                .map(|(_, v, l)| (v.as_str(), *l))
        };
        let field_err = |line: usize, msg: String| Error::Parse {
            context: context.to_string(),
            line,
            msg,
        };
        let required =
            |key: &str| get(key).ok_or_else(|| Error::Config(format!("{context}: missing required key '{key}'")));

        let law = |key: &str, default: Option<DistributionSpec>| -> Result<DistributionSpec> {
            match get(key) {
                Some((v, l)) => v.parse().map_err(|e: Error| field_err(l, e.to_string())),
                None => default.ok_or_else(|| Error::Config(format!("{context}: missing required key '{key}'"))),
            }
        };
        let count = |key: &str, default: usize| -> Result<usize> {
            match get(key) {
                Some((v, l)) => parse_count(v).map_err(|m| field_err(l, format!("{key}: {m}"))),
                None => Ok(default),
            }
        };

        let (grid_text, grid_line) = required("n_grid")?;
        let n_grid = grid_text
            .split(',')
            .map(|s| parse_count(s.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| field_err(grid_line, format!("n_grid: {m}")))?;
        let (out_text, out_line) = required("outputs")?;
        let outputs = out_text
            .split(',')
            .map(|s| s.trim().parse::<Output>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| field_err(out_line, e.to_string()))?;
        let gamma = match get("gamma") {
            Some((v, l)) => v
                .parse::<f64>()
                .map_err(|_| field_err(l, format!("gamma: '{v}' is not a number")))?,
            None => 1.5,
        };
        let seed = match get("seed") {
            Some((v, l)) => parse_seed(v).map_err(|m| field_err(l, m))?,
            None => 0,
        };
        let statistic = match get("statistic") {
            Some((v, l)) => v.parse().map_err(|e: Error| field_err(l, e.to_string()))?,
            None => Statistic::Psi,
        };
        let timing = match get("timing") {
            Some(("true", _)) => true,
            Some(("false", _)) | None => false,
            Some((v, l)) => return Err(field_err(l, format!("timing must be true or false, got '{v}'"))),
        };
        let cfg = ExperimentConfig {
            x_law: law("x_law", Some(DistributionSpec::Normal01))?,
            y_law: law("y_law", None)?,
            n_grid,
            gamma,
            replicates: count("replicates", 10_000)?,
            sample_replicates_for_distance: count("sample_replicates_for_distance", 100_000)?,
            seed,
            outputs,
            statistic,
            timing,
        };
        cfg.validate_shape()?;
        Ok(cfg)
    }

    /// Read a config file and apply the `SELFNORM_SEED` override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.apply_env_seed()?;
        Ok(cfg)
    }

    /// Replace the seed with `SELFNORM_SEED` when it is set.
    pub fn apply_env_seed(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse_seed(v.trim()).map_err(|m| Error::Config(format!("{SEED_ENV}: {m}")))?;
        }
        Ok(())
    }

    /// Render back to the config text format.
    pub fn to_text(&self) -> String {
        let grid: Vec<String> = self.n_grid.iter().map(|n| n.to_string()).collect();
        let outs: Vec<&str> = self.outputs.iter().map(|o| o.name()).collect();
        format!(
            "x_law={}\ny_law={}\nn_grid={}\ngamma={}\nreplicates={}\nsample_replicates_for_distance={}\nseed={}\noutputs={}\nstatistic={}\ntiming={}\n",
            self.x_law,
            self.y_law,
            grid.join(","),
            self.gamma,
            self.replicates,
            self.sample_replicates_for_distance,
            self.seed,
            outs.join(","),
            self.statistic,
            self.timing
        )
    }

    fn validate_shape(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid is empty".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid entries must be at least 1".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "n_grid must be strictly increasing: {:?}",
                self.n_grid
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "replicates must be at least {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if self.outputs.is_empty() {
            return Err(Error::Config("outputs is empty".into()));
        }
        if !(self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite, got {}", self.gamma)));
        }
        for (i, o) in self.outputs.iter().enumerate() {
            if self.outputs[..i].contains(o) {
                return Err(Error::Config(format!("output '{o}' listed twice")));
            }
        }
        Ok(())
    }

    /// Every violated precondition of the requested outputs, one message each.
    pub fn precondition_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let y = &self.y_law;
        let g = self.gamma;
        let n_min = self.n_grid.first().copied().unwrap_or(0);
        if let DistributionSpec::PointMass { c } = y {
            if *c == 0.0 {
                v.push(format!("y_law {y} is identically zero, so V_n = 0"));
            }
        }
        let second = y.second_moment().unwrap_or(ExtReal::Infinite);
        for &o in &self.outputs {
            match o {
                Output::DeltaMc => {
                    if g < 1.0 {
                        v.push(format!("delta_mc requires γ >= 1: γ={g}"));
                    }
                }
                Output::DeltaLaplace => {
                    if !(g > 1.0) {
                        v.push(format!("delta_laplace requires γ > 1: γ={g}"));
                    }
                    if n_min < 2 {
                        v.push(format!("delta_laplace requires n >= 2: smallest n is {n_min}"));
                    }
                }
                Output::AsymFin3 => {
                    let p = 2.0 * g;
                    if !(p > 2.0 && p <= 3.0) {
                        v.push(format!("asym_fin3 requires 2 < p = 2γ <= 3: p={p}"));
                    } else if let Ok(ExtReal::Infinite) = y.abs_moment(p) {
                        v.push(format!("asym_fin3 requires finite E|Y|^{p}: infinite for {y}"));
                    }
                    if !second.is_finite() {
                        v.push(format!("asym_fin3 requires EY² < ∞: infinite for {y}"));
                    }
                }
                Output::AsymFin => match y.tail_model_for(TailTarget::Square) {
                    Err(_) => v.push(format!("asym_fin requires a regularly varying Y² tail: none for {y}")),
                    Ok(t) => {
                        if !(1.0..2.0).contains(&t.alpha) {
                            v.push(format!("asym_fin requires 1 <= α < 2: α={}", t.alpha));
                        }
                        if !(g > t.alpha) {
                            v.push(format!("asym_fin requires γ > α: γ={g}, α={}", t.alpha));
                        }
                        if !second.is_finite() {
                            v.push(format!("asym_fin requires EY² < ∞: infinite for {y}"));
                        }
                        if (n_min as f64) < t.x0 {
                            v.push(format!("asym_fin requires n >= x0 = {}: smallest n is {n_min}", t.x0));
                        }
                    }
                },
                Output::AsymInf => {
                    if !(g > 1.0) {
                        v.push(format!("asym_inf requires γ > 1: γ={g}"));
                    }
                    match y.tail_model_for(TailTarget::Square) {
                        Err(_) => v.push(format!("asym_inf requires a regularly varying Y² tail: none for {y}")),
                        Ok(t) => {
                            if t.alpha != 1.0 {
                                v.push(format!("asym_inf requires α = 1: α={}", t.alpha));
                            }
                            if second.is_finite() {
                                v.push(format!("asym_inf requires EY² = ∞: finite for {y}"));
                            }
                        }
                    }
                }
                Output::AsymStable => match y.tail_model_for(TailTarget::Abs) {
                    Err(_) => v.push(format!(
                        "asym_stable requires a regularly varying |Y| tail: none for {y}"
                    )),
                    Ok(t) => {
                        if !(t.alpha > 0.0 && t.alpha < 2.0) {
                            v.push(format!("asym_stable requires 0 < α < 2 for |Y|: α={}", t.alpha));
                        } else if !(g > 0.5 * t.alpha) {
                            v.push(format!("asym_stable requires γ > α/2: γ={g}, α={}", t.alpha));
                        }
                    }
                },
                Output::DkEmpirical | Output::DwEmpirical => {
                    if self.sample_replicates_for_distance == 0 {
                        v.push(format!("{o} requires sample_replicates_for_distance >= 1"));
                    }
                    if self.statistic == Statistic::StudentT && n_min < 2 {
                        v.push(format!("{o} with statistic student_t requires n >= 2"));
                    }
                    if self.statistic.uses_x() {
                        if let DistributionSpec::PointMass { c } = self.x_law {
                            if c == 0.0 {
                                v.push(format!("{o}: x_law {} is identically zero", self.x_law));
                            }
                        }
                    }
                }
                Output::Bounds => {
                    if let Err(e) = self.x_law.x_moments() {
                        v.push(format!("bounds require X with EX = 0, EX² = 1 and finite E|X|³: {e}"));
                    }
                }
                Output::RateFit => {
                    if self.n_grid.len() < 3 {
                        v.push(format!(
                            "rate_fit requires at least 3 grid points: got {}",
                            self.n_grid.len()
                        ));
                    }
                    if !self.outputs.iter().any(|o| fittable(*o)) {
                        v.push("rate_fit requires another output to fit".into());
                    }
                }
            }
        }
        v
    }

    /// Number of rows a successful run emits.
    pub fn expected_rows(&self) -> usize {
        let per_n: usize = self.outputs.iter().map(|o| o.quantities().len()).sum();
        let fits = if self.outputs.contains(&Output::RateFit) {
            self.outputs
                .iter()
                .filter(|o| fittable(**o))
                .map(|o| o.quantities().len())
                .sum()
        } else {
            0
        };
        per_n * self.n_grid.len() + fits
    }
}

fn fittable(o: Output) -> bool {
    !matches!(o, Output::RateFit | Output::AsymStable)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub x_law: String,
    pub y_law: String,
    pub statistic: String,
    pub n: usize,
    pub quantity: String,
    pub method: String,
    pub gamma: f64,
    pub value: f64,
    /// Monte Carlo standard error, DKW radius or slack, depending on the
    /// quantity; 0 for exact values.
    pub stderr: f64,
    pub wall_time_ms: u64,
    pub seed: u64,
}

/// Base stream for one grid cell: `hash64(seed, n, tag)`. Replicate `r`
/// then uses `child(r)`.
pub fn cell_stream(seed: u64, n: usize, tag: u64) -> SeededStream {
    SeededStream::new(seed, hash64(&[seed, n as u64, tag]))
}

/// `∫ sqrt(Φ(1-Φ)) dx`; `J/√m` is the scale of `W₁(F_m, Φ)` for m draws.
pub fn wasserstein_slack_constant() -> f64 {
    let pts = panels(-40.0, 40.0, 2.0);
    integrate(
        |x: f64| {
            let p = normal_cdf(x);
            let q = normal_cdf(-x);
            (p * q).sqrt()
        },
        &pts,
        QuadOptions::rel(1e-12),
    )
    .map(|r| r.value)
    .unwrap_or(f64::NAN)
}

/// `m` independent draws of a statistic on samples of size `n`. Draw `r`
/// fills X then Y from `stream.child(r)`.
pub fn statistic_draws(
    x_law: &DistributionSpec,
    y_law: &DistributionSpec,
    statistic: Statistic,
    n: usize,
    m: usize,
    stream: SeededStream,
) -> Result<Vec<f64>> {
    (0..m)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(x, y), r| {
                let mut rng = stream.child(r as u64).rng();
                if statistic.uses_x() {
                    x_law.fill(&mut rng, x);
                }
                y_law.fill(&mut rng, y);
                match statistic {
                    Statistic::Psi => psi_slices(x, y),
                    Statistic::RhoScaled => Ok((n as f64).sqrt() * rho_slices(x, y)?),
                    Statistic::Plain => self_norm_plain(y),
                    Statistic::StudentT => student_t_from_psi(self_norm_plain(y)?, n),
                }
            },
        )
        .collect()
}

/// Paired draws of `(ψ_n, √n ρ_n)` from the same samples.
pub fn paired_psi_rho(
    x_law: &DistributionSpec,
    y_law: &DistributionSpec,
    n: usize,
    m: usize,
    stream: SeededStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n]),
            |(x, y), r| {
                let mut rng = stream.child(r as u64).rng();
                x_law.fill(&mut rng, x);
                y_law.fill(&mut rng, y);
                Ok((psi_slices(x, y)?, (n as f64).sqrt() * rho_slices(x, y)?))
            },
        )
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    n: usize,
}

impl Cell<'_> {
    fn row(
        &self,
        quantity: &str,
        method: &str,
        gamma: f64,
        value: f64,
        stderr: f64,
        started: Instant,
    ) -> ExperimentRow {
        let cfg = self.cfg;
        ExperimentRow {
            x_law: cfg.x_law.to_string(),
            y_law: cfg.y_law.to_string(),
            statistic: cfg.statistic.to_string(),
            n: self.n,
            quantity: quantity.to_string(),
            method: method.to_string(),
            gamma,
            value,
            stderr,
            wall_time_ms: if cfg.timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            seed: cfg.seed,
        }
    }

    fn delta_row(&self, quantity: &str, est: DeltaEstimate, started: Instant) -> ExperimentRow {
        self.row(quantity, est.method.name(), est.gamma, est.value, est.stderr, started)
    }

    /// Δ at γ = 3/2, exact where the Laplace identity applies.
    fn delta_for_bounds(&self) -> Result<DeltaEstimate> {
        let y = &self.cfg.y_law;
        if self.n >= 2 && y.capabilities().laplace {
            delta_laplace(y, self.n, 1.5)
        } else {
            delta_mc(
                y,
                self.n,
                1.5,
                self.cfg.replicates,
                cell_stream(self.cfg.seed, self.n, TAG_DELTA),
            )
        }
    }

    fn rows_for(&self, o: Output, draws: &mut Option<Vec<f64>>) -> Result<Vec<ExperimentRow>> {
        let cfg = self.cfg;
        let (n, g, y) = (self.n, cfg.gamma, &cfg.y_law);
        let t0 = Instant::now();
        let one = |r: ExperimentRow| Ok(vec![r]);
        match o {
            Output::DeltaMc => {
                let est = delta_mc(y, n, g, cfg.replicates, cell_stream(cfg.seed, n, TAG_DELTA))?;
                one(self.delta_row(o.name(), est, t0))
            }
            Output::DeltaLaplace => one(self.delta_row(o.name(), delta_laplace(y, n, g)?, t0)),
            Output::AsymFin3 => one(self.delta_row(o.name(), asym_fin3(y, n, 2.0 * g)?, t0)),
            Output::AsymFin => one(self.delta_row(o.name(), asym_fin(y, n, g)?, t0)),
            Output::AsymInf => one(self.delta_row(o.name(), asym_inf(y, n, g)?, t0)),
            Output::AsymStable => {
                let mut est = asym_stable(y, g)?;
                est.n = n;
                one(self.delta_row(o.name(), est, t0))
            }
            Output::DkEmpirical | Output::DwEmpirical => {
                if draws.is_none() {
                    *draws = Some(statistic_draws(
                        &cfg.x_law,
                        y,
                        cfg.statistic,
                        n,
                        cfg.sample_replicates_for_distance,
                        cell_stream(cfg.seed, n, TAG_DISTANCE),
                    )?);
                }
                let sample = draws.as_deref().expect("filled above");
                if o == Output::DkEmpirical {
                    let d = kolmogorov_to_normal(sample)?;
                    one(self.row(o.name(), "ecdf", g, d.value, d.mc_error_hint.unwrap_or(0.0), t0))
                } else {
                    let d = wasserstein_to_normal(sample)?;
                    let slack = wasserstein_slack_constant() / (d.m as f64).sqrt();
                    one(self.row(o.name(), "ecdf", g, d.value, slack, t0))
                }
            }
            Output::Bounds => {
                let xm = cfg.x_law.x_moments()?;
                let delta = self.delta_for_bounds()?;
                let method = delta.method.name();
                let dk = bound_kolmogorov(xm.xi3, delta.value)?;
                let dw = bound_wasserstein(xm.xi3, delta.value)?;
                Ok(vec![
                    self.row("bound_dk", method, 1.5, dk.value, 0.56 * xm.xi3 * delta.stderr, t0),
                    self.row("bound_dw", method, 1.5, dw.value, xm.xi3 * delta.stderr, t0),
                ])
            }
            Output::RateFit => Ok(Vec::new()),
        }
    }
}

/// Run every requested output at every n, in grid order then config order,
/// followed by the rate fits.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate_shape()?;
    let violations = cfg.precondition_violations();
    if !violations.is_empty() {
        return Err(Error::Precondition(violations.join("; ")));
    }
    let mut rows = Vec::with_capacity(cfg.expected_rows());
    for &n in &cfg.n_grid {
        let cell = Cell { cfg, n };
        let mut draws = None;
        for &o in &cfg.outputs {
            rows.extend(cell.rows_for(o, &mut draws)?);
        }
    }
    if cfg.outputs.contains(&Output::RateFit) {
        let n_max = *cfg.n_grid.last().expect("grid checked non-empty");
        let fit_rows: Vec<ExperimentRow> = cfg
            .outputs
            .iter()
            .filter(|o| fittable(**o))
            .flat_map(|o| o.quantities().iter())
            .map(|q| {
                let series: Vec<&ExperimentRow> = rows.iter().filter(|r| r.quantity == *q).collect();
                let ns: Vec<usize> = series.iter().map(|r| r.n).collect();
                let vals: Vec<f64> = series.iter().map(|r| r.value).collect();
                let t0 = Instant::now();
                let fit = fit_rate(&ns, &vals)?;
                let cell = Cell { cfg, n: n_max };
                Ok(cell.row(
                    &format!("rate_slope:{q}"),
                    "ols",
                    cfg.gamma,
                    fit.slope,
                    fit.slope_stderr,
                    t0,
                ))
            })
            .collect::<Result<_>>()?;
        rows.extend(fit_rows);
    }
    Ok(rows)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<ExperimentRow>> {
    match threads {
        None => run_experiment(cfg),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {k} worker threads: {e}")))?
            .install(|| run_experiment(cfg)),
    }
}

// ---------------------------------------------------------------------------
// output

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

/// 17 significant digits; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// CSV text with the fixed header.
pub fn to_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.x_law.clone(),
            r.y_law.clone(),
            r.statistic.clone(),
            r.n.to_string(),
            r.quantity.clone(),
            r.method.clone(),
            format_float(r.gamma),
            format_float(r.value),
            format_float(r.stderr),
            r.wall_time_ms.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn to_json(rows: &[ExperimentRow]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::Config(format!("json: {e}")))
}

/// Write rows to `path` as CSV or JSON.
pub fn emit(rows: &[ExperimentRow], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(rows)?,
        Format::Json => to_json(rows)? + "\n",
    };
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    Ok(())
}

/// Parse CSV text produced by [`to_csv`].
pub fn parse_csv(text: &str, context: &str) -> Result<Vec<ExperimentRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            context: context.to_string(),
            line: 1,
            msg: format!("unexpected header; expected {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_err)?;
        let perr = |msg: String| Error::Parse {
            context: context.to_string(),
            line,
            msg,
        };
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| perr(format!("{}: '{}' is not a number", CSV_HEADER[j], &rec[j])))
        };
        let int = |j: usize| -> Result<u64> {
            rec[j]
                .parse::<u64>()
                .map_err(|_| perr(format!("{}: '{}' is not an integer", CSV_HEADER[j], &rec[j])))
        };
        if rec.len() != CSV_HEADER.len() {
            return Err(perr(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        rows.push(ExperimentRow {
            x_law: rec[0].to_string(),
            y_law: rec[1].to_string(),
            statistic: rec[2].to_string(),
            n: int(3)? as usize,
            quantity: rec[4].to_string(),
            method: rec[5].to_string(),
            gamma: num(6)?,
            value: num(7)?,
            stderr: num(8)?,
            wall_time_ms: int(9)?,
            seed: int(10)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, &path.display().to_string())
}

/// Aligned plain-text table of the rows.
pub fn render_table(rows: &[ExperimentRow]) -> String {
    let header = ["n", "quantity", "method", "gamma", "value", "stderr"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.n.to_string(),
                r.quantity.clone(),
                r.method.clone(),
                format!("{}", r.gamma),
                format!("{:.6e}", r.value),
                format!("{:.2e}", r.stderr),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    if let Some(r) = rows.first() {
        out.push_str(&format!(
            "# x_law={} y_law={} statistic={} seed={}\n",
            r.x_law, r.y_law, r.statistic, r.seed
        ));
    }
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(width)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 1 || i == 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    for row in &body {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// A matplotlib script plotting every quantity against n on log-log axes.
pub fn plot_script(csv_path: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Generated by selfnorm. Plots each quantity against n on log-log axes.
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {path:?}
series = defaultdict(list)
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        if row["quantity"].startswith("rate_slope:"):
            continue
        key = (row["quantity"], row["method"])
        series[key].append((int(row["n"]), float(row["value"]), float(row["stderr"])))

fig, ax = plt.subplots(figsize=(7, 5))
for (quantity, method), pts in sorted(series.items()):
    pts.sort()
    ns = [p[0] for p in pts]
    vals = [p[1] for p in pts]
    errs = [p[2] for p in pts]
    ax.errorbar(ns, vals, yerr=errs, marker="o", capsize=3, label=f"{{quantity}} ({{method}})")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("n")
ax.set_ylabel("value")
ax.legend()
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
"#,
        path = csv_path
    )
}
