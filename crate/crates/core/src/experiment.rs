//! Convergence experiments: distances from generated samples to a reference,
//! one CSV row per size and metric.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget;
use crate::error::{invalid, Error, Result};
use crate::generators::Generator;
use crate::graphon::unlabeled_cut_distance;
use crate::io;
use crate::profiles::dm_estimate;
use crate::pvariable::StepPVariable;
use crate::quotient::quotient_set_distance;
use crate::realgraphon::{avq_set_distance, real_cut_distance};
use crate::seed;
use crate::strategy::{CutMode, Strategy, LOCAL_RESTARTS};

const TAG_SAMPLE: u32 = 0xc00;
const TAG_REFERENCE: u32 = 0xd00;
/// Trend slack for metrics without a configured one.
pub const DEFAULT_SLACK: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dm,
    Cut,
    Quotient,
    Avq,
    RealCutOfContraction,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Dm => "dm",
            Metric::Cut => "cut",
            Metric::Quotient => "quotient",
            Metric::Avq => "avq",
            Metric::RealCutOfContraction => "real_cut_of_contraction",
        }
    }

    pub fn default_slack(&self) -> f64 {
        match self {
            Metric::RealCutOfContraction => 0.05,
            _ => DEFAULT_SLACK,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| invalid(format!("unknown metric {s:?}")))
    }
}

/// Where the reference P-variable comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Generator(Generator),
    File { file: PathBuf },
}

impl Reference {
    fn resolve(&self, n: usize, seed: u64) -> Result<StepPVariable> {
        match self {
            Reference::Generator(g) => g.generate(n, seed),
            Reference::File { file } => io::read_pvariable(file),
        }
    }
}

fn default_k_max() -> usize {
    2
}

fn default_strategy() -> String {
    "exhaustive".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub sizes: Vec<usize>,
    pub reference: Reference,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// `exhaustive`, `random:M` or `local:M`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// `exhaustive` or `heuristic:R` for cut metrics; defaults to exhaustive
    /// when the strategy is exhaustive and the size allows it.
    #[serde(default)]
    pub cut_mode: Option<String>,
    pub seed: u64,
    /// Per-metric trend slack.
    #[serde(default)]
    pub slack: BTreeMap<Metric, f64>,
    /// Record wall time; off keeps reports byte-identical across runs.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.sizes.is_empty() || self.sizes[0] == 0 {
            return Err(invalid("sizes must be non-empty and positive"));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sizes must be strictly increasing"));
        }
        if self.metrics.is_empty() {
            return Err(invalid("no metrics requested"));
        }
        if self.k_max == 0 {
            return Err(invalid("k_max must be at least 1"));
        }
        self.strategy()?;
        if let Some(m) = &self.cut_mode {
            m.parse::<CutMode>()?;
        }
        Ok(())
    }

    fn strategy(&self) -> Result<Strategy> {
        Ok(self.strategy.parse::<Strategy>()?.with_seed(self.seed))
    }

    fn cut_mode(&self, n: usize) -> Result<CutMode> {
        Ok(match &self.cut_mode {
            Some(m) => m.parse::<CutMode>()?.with_seed(self.seed),
            None if self.strategy()?.is_exhaustive() && n <= budget::UNLABELED_EXHAUSTIVE_N => CutMode::Exhaustive,
            None => CutMode::Heuristic {
                restarts: LOCAL_RESTARTS,
                seed: self.seed,
            },
        })
    }

    pub fn slack(&self, m: Metric) -> f64 {
        self.slack.get(&m).copied().unwrap_or_else(|| m.default_slack())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub n: usize,
    pub metric: Metric,
    pub lower: f64,
    pub upper: f64,
    pub seconds: Option<f64>,
}

/// Per-metric trend: every upper bound is at most the previous one plus slack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub metric: Metric,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
    pub trends: Vec<Trend>,
}

impl Report {
    pub fn all_trends_hold(&self) -> bool {
        self.trends.iter().all(|t| t.holds)
    }

    pub fn rows_for(&self, metric: Metric) -> impl Iterator<Item = &Row> + '_ {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// `n,metric,lower,upper,seconds` rows followed by one `trend` row per
    /// metric with `pass` or `fail` in the `lower` column and the slack in
    /// the `upper` column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "metric", "lower", "upper", "seconds"])?;
        for r in &self.rows {
            let secs = r.seconds.map(|s| format!("{s:.6}")).unwrap_or_default();
            w.write_record([
                r.n.to_string(),
                r.metric.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                secs,
            ])?;
        }
        for t in &self.trends {
            let verdict = if t.holds { "pass" } else { "fail" };
            w.write_record(["trend", t.metric.name(), verdict, &t.slack.to_string(), ""])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn measure(spec: &ExperimentSpec, n: usize, metric: Metric) -> Result<Row> {
    let start = Instant::now();
    let sample = spec
        .generator
        .generate(n, seed::derive(spec.seed, TAG_SAMPLE, n as u64))?;
    let reference = spec
        .reference
        .resolve(n, seed::derive(spec.seed, TAG_REFERENCE, n as u64))?;
    let strategy = spec.strategy()?;
    let (lower, upper) = match metric {
        Metric::Dm => {
            let d = dm_estimate(&sample, &reference, spec.k_max, &strategy)?;
            (d.lower, d.upper)
        }
        Metric::Cut => {
            let b = unlabeled_cut_distance(&sample, &reference, &spec.cut_mode(n)?)?;
            (b.lower, b.upper)
        }
        Metric::Quotient => {
            let b = quotient_set_distance(&sample, &reference, spec.k_max, &strategy)?.labeled;
            (b.lower, b.upper)
        }
        Metric::Avq => {
            let b = avq_set_distance(&sample, &reference, spec.k_max, &strategy)?.bounds;
            (b.lower, b.upper)
        }
        Metric::RealCutOfContraction => {
            let b = real_cut_distance(&sample.contraction(), &reference.contraction(), &spec.cut_mode(n)?)?;
            (b.lower, b.upper)
        }
    };
    Ok(Row {
        n,
        metric,
        lower,
        upper,
        seconds: spec.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Runs every `(size, metric)` pair in parallel; rows are sorted by
/// `(n, metric)`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let mut metrics = spec.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let jobs: Vec<(usize, Metric)> = spec
        .sizes
        .iter()
        .flat_map(|&n| metrics.iter().map(move |&m| (n, m)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, m)| measure(spec, n, m))
        .collect::<Result<Vec<Row>>>()?;
    let trends = metrics
        .iter()
        .map(|&metric| {
            let slack = spec.slack(metric);
            let uppers: Vec<f64> = rows.iter().filter(|r| r.metric == metric).map(|r| r.upper).collect();
            Trend {
                metric,
                slack,
                holds: uppers.windows(2).all(|w| w[1] <= w[0] + slack),
            }
        })
        .collect();
    Ok(Report { rows, trends })
}
