use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solver::{KansaIntegrator, Scheme};
use crate::SurfaceKind;

/// Default kernel length scale used by every experiment.
pub const DEFAULT_KERNEL_SCALE: f64 = std::f64::consts::SQRT_2 / 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    ConvergeTime,
    ConvergeSpace,
    Shu,
    TorusKnot,
    Turing,
    PushforwardCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ConvergeTime,
        Experiment::ConvergeSpace,
        Experiment::Shu,
        Experiment::TorusKnot,
        Experiment::Turing,
        Experiment::PushforwardCheck,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.to_string() == s.trim().to_ascii_lowercase().replace('_', "-"))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::ConvergeTime => "converge-time",
            Experiment::ConvergeSpace => "converge-space",
            Experiment::Shu => "shu",
            Experiment::TorusKnot => "torus-knot",
            Experiment::Turing => "turing",
            Experiment::PushforwardCheck => "pushforward-check",
        })
    }
}

/// Surface selection: an analytic surface or a point cloud from `node_file`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceChoice {
    Implicit(SurfaceKind),
    Cloud,
}

impl SurfaceChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cloud" | "point-cloud" | "pointcloud" => Some(SurfaceChoice::Cloud),
            other => SurfaceKind::parse(other).map(SurfaceChoice::Implicit),
        }
    }
}

impl fmt::Display for SurfaceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceChoice::Implicit(k) => k.fmt(f),
            SurfaceChoice::Cloud => f.write_str("cloud"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pattern {
    #[default]
    Spots,
    Stripes,
}

/// Every setting of an experiment run. List-valued keys take comma-separated
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub surfaces: Vec<SurfaceChoice>,
    /// `None` picks the field that goes with the surface.
    pub velocity: Option<String>,
    pub scheme: Scheme,
    pub kansa_integrator: KansaIntegrator,
    pub rk_stages: usize,
    pub substeps: usize,
    pub dt: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub kernel_order: Vec<u32>,
    pub kernel_scale: f64,
    /// `None` uses the experiment's default (desk or full scale).
    pub nodes: Option<Vec<usize>>,
    pub node_file: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub t_final: Option<f64>,
    pub full_scale: bool,
    pub baseline: bool,
    pub conservative: bool,
    pub pattern: Pattern,
    pub eps_w: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub strip_width: f64,
    pub snapshot_times: Option<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub a33: f64,
    pub k_nn: usize,
}

const KEYS: &[&str] = &[
    "experiment",
    "surface",
    "velocity",
    "scheme",
    "kansa_integrator",
    "rk_stages",
    "substeps",
    "dt",
    "epsilon",
    "kernel_order",
    "kernel_scale",
    "nodes",
    "node_file",
    "seed",
    "out",
    "t_final",
    "full_scale",
    "baseline",
    "conservative",
    "pattern",
    "eps_w",
    "k1",
    "k2",
    "strip_width",
    "snapshot_times",
    "offsets",
    "a33",
    "k_nn",
];

impl ExperimentConfig {
    /// Defaults for an experiment (desk-scale node counts for the heavy
    /// torus and Turing runs).
    pub fn defaults(experiment: Experiment) -> Self {
        use std::f64::consts::PI;
        let base = ExperimentConfig {
            experiment,
            surfaces: vec![SurfaceChoice::Implicit(SurfaceKind::Circle)],
            velocity: None,
            scheme: Scheme::Cn,
            kansa_integrator: KansaIntegrator::default(),
            rk_stages: 2,
            substeps: 1,
            dt: vec![0.1, 0.05, 0.01, 0.001],
            epsilon: vec![1.0, 1e-3, 1e-5],
            kernel_order: vec![5],
            kernel_scale: DEFAULT_KERNEL_SCALE,
            nodes: None,
            node_file: None,
            seed: 0,
            out: None,
            t_final: None,
            full_scale: false,
            baseline: true,
            conservative: true,
            pattern: Pattern::Spots,
            eps_w: None,
            k1: None,
            k2: None,
            strip_width: 0.2,
            snapshot_times: None,
            offsets: vec![-0.1, -0.05, 0.05, 0.1],
            a33: 1.0,
            k_nn: crate::geometry::DEFAULT_K_NN,
        };
        match experiment {
            Experiment::ConvergeTime => base,
            Experiment::ConvergeSpace => ExperimentConfig {
                scheme: Scheme::Bdf3,
                rk_stages: 3,
                dt: vec![1e-4],
                epsilon: vec![1.0, 1e-5],
                kernel_order: vec![3, 4, 5],
                ..base
            },
            Experiment::Shu => ExperimentConfig {
                dt: vec![0.01, 0.005, 0.001, 0.0005],
                epsilon: vec![1e-3, 1e-6],
                kernel_order: vec![4],
                ..base
            },
            Experiment::TorusKnot => ExperimentConfig {
                surfaces: vec![SurfaceChoice::Implicit(SurfaceKind::Torus)],
                dt: vec![PI / 500.0],
                epsilon: vec![1e-6],
                kernel_order: vec![6],
                ..base
            },
            Experiment::Turing => ExperimentConfig {
                surfaces: vec![SurfaceChoice::Implicit(SurfaceKind::Sphere)],
                dt: vec![0.5],
                epsilon: vec![],
                kernel_order: vec![4],
                baseline: false,
                ..base
            },
            Experiment::PushforwardCheck => ExperimentConfig {
                surfaces: vec![
                    SurfaceChoice::Implicit(SurfaceKind::Sphere),
                    SurfaceChoice::Implicit(SurfaceKind::Torus),
                ],
                baseline: false,
                ..base
            },
        }
    }

    /// Applies one `key = value` setting; `line` is 0 for command-line flags.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let bad = |msg: String| Error::config(key, line, msg);
        let v = value.trim();
        match key {
            "experiment" => {
                self.experiment = Experiment::parse(v).ok_or_else(|| bad(format!("unknown experiment `{v}`")))?;
            }
            "surface" => {
                self.surfaces = split(v)
                    .map(|s| SurfaceChoice::parse(s).ok_or_else(|| bad(format!("unknown surface `{s}`"))))
                    .collect::<Result<_>>()?;
            }
            "velocity" => self.velocity = Some(v.to_string()),
            "scheme" => self.scheme = Scheme::parse(v).ok_or_else(|| bad(format!("unknown scheme `{v}`")))?,
            "kansa_integrator" => {
                self.kansa_integrator = KansaIntegrator::parse(v).ok_or_else(|| bad(format!("unknown integrator `{v}`")))?;
            }
            "rk_stages" => self.rk_stages = parse_one(v).map_err(bad)?,
            "substeps" => self.substeps = parse_one(v).map_err(bad)?,
            "dt" => self.dt = parse_list(v).map_err(bad)?,
            "epsilon" => self.epsilon = parse_list(v).map_err(bad)?,
            "kernel_order" => self.kernel_order = parse_list(v).map_err(bad)?,
            "kernel_scale" => self.kernel_scale = parse_one(v).map_err(bad)?,
            "nodes" => self.nodes = Some(parse_list(v).map_err(bad)?),
            "node_file" => self.node_file = Some(PathBuf::from(v)),
            "seed" => self.seed = parse_one(v).map_err(bad)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "t_final" => self.t_final = Some(parse_one(v).map_err(bad)?),
            "full_scale" => self.full_scale = parse_bool(v).map_err(bad)?,
            "baseline" => self.baseline = parse_bool(v).map_err(bad)?,
            "conservative" => self.conservative = parse_bool(v).map_err(bad)?,
            "pattern" => {
                self.pattern = match v.to_ascii_lowercase().as_str() {
                    "spots" => Pattern::Spots,
                    "stripes" => Pattern::Stripes,
                    _ => return Err(bad(format!("pattern must be spots or stripes, got `{v}`"))),
                }
            }
            "eps_w" => self.eps_w = Some(parse_one(v).map_err(bad)?),
            "k1" => self.k1 = Some(parse_one(v).map_err(bad)?),
            "k2" => self.k2 = Some(parse_one(v).map_err(bad)?),
            "strip_width" => self.strip_width = parse_one(v).map_err(bad)?,
            "snapshot_times" => self.snapshot_times = Some(parse_list(v).map_err(bad)?),
            "offsets" => self.offsets = parse_list(v).map_err(bad)?,
            "a33" => self.a33 = parse_one(v).map_err(bad)?,
            "k_nn" => self.k_nn = parse_one(v).map_err(bad)?,
            _ => {
                let hint = KEYS
                    .iter()
                    .find(|k| edit_distance(k, key) <= 2)
                    .map(|k| format!("; did you mean `{k}`?"))
                    .unwrap_or_default();
                return Err(bad(format!("unknown key{hint}")));
            }
        }
        Ok(())
    }

    /// Cross-field validation.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Error::config(key, 0, msg);
        if self.surfaces.is_empty() {
            return Err(bad("surface", "no surface given".into()));
        }
        if self.dt.iter().any(|d| !(*d > 0.0)) || (self.dt.is_empty() && self.experiment != Experiment::PushforwardCheck) {
            return Err(bad("dt", "time steps must be positive".into()));
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0)) {
            return Err(bad("epsilon", "diffusion coefficients must be non-negative".into()));
        }
        if self.kernel_order.is_empty() || self.kernel_order.iter().any(|m| *m < 2) {
            return Err(bad("kernel_order", "kernel orders must be at least 2".into()));
        }
        if !(self.kernel_scale > 0.0) {
            return Err(bad("kernel_scale", "must be positive".into()));
        }
        if !(1..=3).contains(&self.rk_stages) {
            return Err(bad("rk_stages", format!("must be 1, 2 or 3, got {}", self.rk_stages)));
        }
        if self.t_final.is_some_and(|t| !(t >= 0.0)) {
            return Err(bad("t_final", "must be non-negative".into()));
        }
        if self.nodes.as_ref().is_some_and(|n| n.is_empty() || n.iter().any(|n| *n < 4)) {
            return Err(bad("nodes", "node counts must be at least 4".into()));
        }
        if !(self.strip_width > 0.0) {
            return Err(bad("strip_width", "must be positive".into()));
        }
        let circle_only = matches!(self.experiment, Experiment::ConvergeTime | Experiment::ConvergeSpace | Experiment::Shu);
        let first = self.surfaces[0];
        if circle_only && first != SurfaceChoice::Implicit(SurfaceKind::Circle) {
            return Err(bad("surface", format!("{} runs on the circle, got {first}", self.experiment)));
        }
        if self.experiment == Experiment::TorusKnot && first != SurfaceChoice::Implicit(SurfaceKind::Torus) {
            return Err(bad("surface", format!("torus-knot runs on the torus, got {first}")));
        }
        if self.experiment == Experiment::Turing
            && (first == SurfaceChoice::Implicit(SurfaceKind::Circle) || first == SurfaceChoice::Implicit(SurfaceKind::Plane)) {
                return Err(bad("surface", format!("Turing runs on closed 2-surfaces, got {first}")));
            }
        if self.surfaces.contains(&SurfaceChoice::Cloud) && self.node_file.is_none() {
            return Err(bad("node_file", "a point-cloud surface needs a node file".into()));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Node counts to run, from the config or the experiment's defaults.
    pub fn node_counts(&self) -> Vec<usize> {
        if let Some(n) = &self.nodes {
            return n.clone();
        }
        let full = self.full_scale;
        match self.experiment {
            Experiment::ConvergeTime => vec![200],
            Experiment::ConvergeSpace => vec![50, 80, 100, 120],
            Experiment::Shu => vec![500],
            Experiment::TorusKnot => vec![if full { 11600 } else { 3000 }],
            Experiment::Turing => vec![match (self.surfaces[0], full) {
                (_, false) => 1500,
                (SurfaceChoice::Implicit(SurfaceKind::Torus), true) => 5312,
                (SurfaceChoice::Implicit(SurfaceKind::Bretzel2), true) => 7216,
                (SurfaceChoice::Implicit(SurfaceKind::Cpd), true) => 6256,
                (_, true) => 4482,
            }],
            Experiment::PushforwardCheck => vec![60],
        }
    }

    pub fn final_time(&self) -> f64 {
        use std::f64::consts::PI;
        if let Some(t) = self.t_final {
            return t;
        }
        match self.experiment {
            Experiment::ConvergeTime | Experiment::ConvergeSpace | Experiment::PushforwardCheck => 1.0,
            Experiment::Shu | Experiment::TorusKnot => 2.0 * PI,
            Experiment::Turing => turing_row(self.surfaces[0], self.pattern).t_final,
        }
    }

    /// Turing parameters: the reference row for the surface and pattern, with
    /// per-key overrides.
    pub fn turing_row(&self) -> TuringRow {
        let mut row = turing_row(self.surfaces[0], self.pattern);
        if let Some(e) = self.eps_w {
            row.eps_w = e;
        }
        if let Some(k) = self.k1 {
            row.k1 = k;
        }
        if let Some(k) = self.k2 {
            row.k2 = k;
        }
        row.t_final = self.final_time_or(row.t_final);
        row
    }

    fn final_time_or(&self, t: f64) -> f64 {
        self.t_final.unwrap_or(t)
    }
}

/// One row of the Turing parameter tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuringRow {
    pub eps_w: f64,
    pub k1: f64,
    pub k2: f64,
    pub t_final: f64,
}

/// Reference `(eps_w, k1, k2, T)` per surface and pattern; point clouds use
/// the Stanford Bunny/Cow row.
pub fn turing_row(surface: SurfaceChoice, pattern: Pattern) -> TuringRow {
    let (eps_w, k1, k2, t_final) = match (surface, pattern) {
        (SurfaceChoice::Implicit(SurfaceKind::Torus), Pattern::Spots) => (3.50e-3, 0.02, 0.2, 1200.0),
        (SurfaceChoice::Implicit(SurfaceKind::Torus), Pattern::Stripes) => (8.87e-4, 3.5, 0.0, 6000.0),
        (SurfaceChoice::Implicit(SurfaceKind::Bretzel2), Pattern::Spots) => (2.50e-3, 0.02, 0.2, 1000.0),
        (SurfaceChoice::Implicit(SurfaceKind::Bretzel2), Pattern::Stripes) => (1.80e-4, 3.5, 0.0, 6000.0),
        (SurfaceChoice::Implicit(SurfaceKind::Cpd), Pattern::Spots) => (2.50e-3, 0.02, 0.2, 600.0),
        (SurfaceChoice::Implicit(SurfaceKind::Cpd), Pattern::Stripes) => (3.50e-4, 3.5, 0.0, 8000.0),
        (SurfaceChoice::Cloud, Pattern::Spots) => (1.50e-3, 0.02, 0.2, 600.0),
        (SurfaceChoice::Cloud, Pattern::Stripes) => (8.87e-4, 3.0, 0.0, 6000.0),
        (_, Pattern::Spots) => (6.50e-3, 0.02, 0.2, 600.0),
        (_, Pattern::Stripes) => (8.87e-4, 3.5, 0.0, 6000.0),
    };
    TuringRow { eps_w, k1, k2, t_final }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    let out: Vec<T> = split(v).map(parse_one).collect::<std::result::Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != *cb)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Reads `key = value` lines after a single `[experiment]` header.
/// Returns the pairs with their line numbers.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let name = content.trim_start_matches('[').trim_end_matches(']').trim();
            if name != "experiment" || !content.ends_with(']') {
                return Err(Error::config(content, line, "only an [experiment] section is allowed"));
            }
            if header {
                return Err(Error::config(content, line, "duplicate [experiment] header"));
            }
            header = true;
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::config(content, line, "expected `key = value`"));
        };
        let key = k.trim().to_string();
        if !header {
            return Err(Error::config(key, line, "key before the [experiment] header"));
        }
        if out.iter().any(|(seen, _, _)| *seen == key) {
            return Err(Error::config(key, line, "duplicate key"));
        }
        out.push((key, v.trim().to_string(), line));
    }
    Ok(out)
}

/// Merges a config file (optional) with flag overrides; flags win. The
/// experiment is taken from the flags first, then the file.
pub fn parse_config(path: Option<&Path>, flags: &[(String, String)]) -> Result<ExperimentConfig> {
    let file = match path {
        Some(p) => read_config_file(p)?,
        None => Vec::new(),
    };
    let experiment_value = flags
        .iter()
        .find(|(k, _)| k == "experiment")
        .map(|(_, v)| (v.clone(), 0))
        .or_else(|| file.iter().find(|(k, _, _)| k == "experiment").map(|(_, v, l)| (v.clone(), *l)));
    let Some((exp, line)) = experiment_value else {
        return Err(Error::config("experiment", 0, "no experiment given"));
    };
    let experiment = Experiment::parse(&exp).ok_or_else(|| Error::config("experiment", line, format!("unknown experiment `{exp}`")))?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    for (k, v, l) in &file {
        if k != "experiment" {
            cfg.set(k, v, *l)?;
        }
    }
    for (k, v) in flags {
        if k != "experiment" {
            cfg.set(k, v, 0)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
