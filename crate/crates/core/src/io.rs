//! Configuration files, environment overrides, and the on-disk formats for
//! trajectories, tables, and run manifests.
//!
//! Configs are TOML (`key = value` with `[section]` headers) or the
//! equivalent JSON object. A run manifest may be passed wherever a config is
//! expected; its stored config is used. Unknown keys are rejected.
//!
//! Environment variables `GLAVG_<KEY>` and `GLAVG_<SECTION>__<KEY>` override
//! file values (`GLAVG_COUPLING__B_G=2`). Values are read as TOML literals,
//! so lists are written `[0.1, 0.01]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::averaging::{AveragedConfig, FbarMode, FrozenConfig};
use crate::config::{default_dt, default_x0, Switches, SystemConfig};
use crate::coupling::{Coupling, CouplingPreset};
use crate::error::{Error, Result};
use crate::experiments::{DeltaSweep, ErrorTable, GalerkinRow, StudyConfig};
use crate::noise::{Decay, NoiseSpectrum};
use crate::parallel::Executor;
use crate::rng::{path_seed, stream_seed, Stream};
use crate::sim::{Component, Trajectory};
use crate::spectral::SpectralField;

pub const ENV_PREFIX: &str = "GLAVG_";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub slow_c0: Option<f64>,
    /// Slow decay `β` in `c₀ λ_k^{-β}`.
    pub beta: Option<f64>,
    pub fast_c0: Option<f64>,
    pub gamma_exponent: Option<f64>,
    /// Explicit per-`k` scales; override the power laws.
    pub slow_raw: Option<Vec<f64>>,
    pub fast_raw: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub preset: Option<CouplingPreset>,
    pub a_f: Option<f64>,
    pub a_g: Option<f64>,
    pub b_g: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x_cos: Option<Vec<f64>>,
    pub x_sin: Option<Vec<f64>>,
    pub y_cos: Option<Vec<f64>>,
    pub y_sin: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenSection {
    pub burn_in: Option<f64>,
    pub averaging_time: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub antithetic: Option<bool>,
    pub batches: Option<usize>,
    pub spread_threshold: Option<f64>,
    /// Horizon of `frozen` runs; defaults to `burn_in + averaging_time`.
    pub horizon: Option<f64>,
    /// Frozen slow state; defaults to the initial slow state.
    pub x_cos: Option<Vec<f64>>,
    pub x_sin: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragedSection {
    pub fbar_mode: Option<FbarMode>,
    pub macro_step: Option<f64>,
    pub antithetic: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub eps_grid: Option<Vec<f64>>,
    pub delta_grid: Option<Vec<f64>>,
    pub m_grid: Option<Vec<usize>>,
    pub paths: Option<usize>,
    pub p: Option<f64>,
    pub executor: Option<Executor>,
    pub max_flagged_fraction: Option<f64>,
}

/// Config file as written by the user; absent keys take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub eps: Option<f64>,
    #[serde(rename = "T", alias = "t", alias = "horizon")]
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub m: Option<usize>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub record_stride: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub switches: Switches,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub frozen: FrozenSection,
    #[serde(default)]
    pub averaged: AveragedSection,
    #[serde(default)]
    pub study: StudySection,
}

/// Everything a subcommand needs, with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub frozen: FrozenConfig,
    pub frozen_x: SpectralField,
    pub frozen_horizon: f64,
    pub averaged: AveragedConfig,
    pub study: StudyConfig,
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
}

pub const DEFAULT_EPS_GRID: [f64; 4] = [0.1, 0.02, 0.004, 0.0008];
pub const DEFAULT_DELTA_GRID: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const DEFAULT_M_GRID: [usize; 4] = [8, 16, 32, 64];
pub const DEFAULT_PATHS: usize = 200;

fn field(
    m: usize,
    cos: &Option<Vec<f64>>,
    sin: &Option<Vec<f64>>,
    what: &str,
) -> Result<Option<SpectralField>> {
    if cos.is_none() && sin.is_none() {
        return Ok(None);
    }
    let (c, s) = (
        cos.clone().unwrap_or_default(),
        sin.clone().unwrap_or_default(),
    );
    if c.len() > m || s.len() > m {
        return Err(Error::Config(format!("{what} has more than m = {m} modes")));
    }
    SpectralField::from_parts(m, &c, &s).map(Some)
}

fn spectrum(
    alpha: f64,
    raw: &Option<Vec<f64>>,
    slow: bool,
    c0: f64,
    exponent: f64,
) -> NoiseSpectrum {
    let mut spec = if slow {
        NoiseSpectrum::slow(alpha, c0, exponent)
    } else {
        NoiseSpectrum::fast(alpha, c0, exponent)
    };
    if let Some(r) = raw {
        spec.decay = Decay::Raw(r.clone());
    }
    spec
}

impl ConfigFile {
    /// Applies defaults and every validation gate.
    pub fn resolve(&self) -> Result<RunConfig> {
        let eps = self
            .eps
            .ok_or_else(|| Error::Config("missing key `eps`".into()))?;
        let horizon = self
            .horizon
            .ok_or_else(|| Error::Config("missing key `T`".into()))?;
        let mut sys = SystemConfig::new(eps, horizon);
        if let Some(m) = self.m {
            sys = sys.with_modes(m);
        }
        if let Some(alpha) = self.alpha {
            sys = sys.with_alpha(alpha);
        }
        if let Some(delta) = self.delta {
            sys.delta = delta;
        }
        sys.dt = self.dt.unwrap_or_else(|| default_dt(eps, sys.delta));
        sys.record_stride = self.record_stride.unwrap_or(1);
        sys.seed = self.seed.unwrap_or(0);

        let n = &self.noise;
        sys.slow_noise = spectrum(
            sys.alpha,
            &n.slow_raw,
            true,
            n.slow_c0.unwrap_or(1.0),
            n.beta.unwrap_or(1.0),
        );
        sys.fast_noise = spectrum(
            sys.alpha,
            &n.fast_raw,
            false,
            n.fast_c0.unwrap_or(1.0),
            n.gamma_exponent.unwrap_or(0.5),
        );

        let c = &self.coupling;
        sys.coupling = Coupling::from_preset(
            c.preset.unwrap_or_default(),
            c.a_f.unwrap_or(1.0),
            c.a_g.unwrap_or(1.0),
            c.b_g.unwrap_or(1.0),
        );
        sys.switches = self.switches;

        let m = sys.m;
        let i = &self.initial;
        sys.x0 = field(m, &i.x_cos, &i.x_sin, "initial x")?.unwrap_or_else(|| default_x0(m));
        sys.y0 =
            field(m, &i.y_cos, &i.y_sin, "initial y")?.unwrap_or_else(|| SpectralField::zeros(m));
        sys.validate()?;

        let f = &self.frozen;
        let mut frozen =
            FrozenConfig::for_system(&sys, f.seed.unwrap_or_else(|| path_seed(sys.seed, 0)));
        frozen.burn_in = f.burn_in.unwrap_or(frozen.burn_in);
        frozen.averaging_time = f.averaging_time.unwrap_or(frozen.averaging_time);
        frozen.dt = f.dt.unwrap_or(frozen.dt);
        frozen.antithetic = f.antithetic.unwrap_or(false);
        frozen.batches = f.batches.unwrap_or(frozen.batches);
        frozen.spread_threshold = f.spread_threshold.unwrap_or(frozen.spread_threshold);
        frozen.validate(&sys)?;
        let frozen_x = field(m, &f.x_cos, &f.x_sin, "frozen x")?.unwrap_or_else(|| sys.x0.clone());
        let frozen_horizon = f.horizon.unwrap_or(frozen.burn_in + frozen.averaging_time);

        let a = &self.averaged;
        let mut averaged = AveragedConfig::for_system(&sys);
        averaged.mode = a.fbar_mode;
        averaged.macro_step = a.macro_step.unwrap_or(averaged.macro_step);
        averaged.inner.burn_in = frozen.burn_in;
        averaged.inner.averaging_time = frozen.averaging_time;
        averaged.inner.dt = frozen.dt;
        averaged.inner.batches = frozen.batches;
        averaged.inner.spread_threshold = frozen.spread_threshold;
        averaged.inner.antithetic = a.antithetic.unwrap_or(true);

        let s = &self.study;
        let mut study = StudyConfig::new(&sys, s.paths.unwrap_or(DEFAULT_PATHS));
        study.p = s.p.unwrap_or(1.0);
        study.executor = s.executor.unwrap_or_default();
        study.max_flagged_fraction = s.max_flagged_fraction.unwrap_or(study.max_flagged_fraction);
        study.averaged = averaged.clone();
        if !(study.p >= 1.0 && study.p < sys.alpha) {
            return Err(Error::condition(
                "moment order",
                format!(
                    "p must satisfy 1 <= p < alpha = {}, got {}",
                    sys.alpha, study.p
                ),
            ));
        }

        Ok(RunConfig {
            system: sys,
            frozen,
            frozen_x,
            frozen_horizon,
            averaged,
            study,
            eps_grid: s
                .eps_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec()),
            delta_grid: s
                .delta_grid
                .clone()
                .unwrap_or_else(|| DEFAULT_DELTA_GRID.to_vec()),
            m_grid: s.m_grid.clone().unwrap_or_else(|| DEFAULT_M_GRID.to_vec()),
        })
    }
}

fn opt_vec(v: &[f64]) -> Option<Vec<f64>> {
    Some(v.to_vec())
}

impl RunConfig {
    /// Fully explicit config file that resolves back to `self`.
    pub fn echo(&self) -> ConfigFile {
        let sys = &self.system;
        let (slow_c0, beta, slow_raw) = match &sys.slow_noise.decay {
            Decay::PowerLaw { c0, exponent } => (Some(*c0), Some(*exponent), None),
            Decay::Raw(r) => (None, None, Some(r.clone())),
        };
        let (fast_c0, gamma_exponent, fast_raw) = match &sys.fast_noise.decay {
            Decay::PowerLaw { c0, exponent } => (Some(*c0), Some(*exponent), None),
            Decay::Raw(r) => (None, None, Some(r.clone())),
        };
        let c = sys.coupling;
        ConfigFile {
            eps: Some(sys.eps),
            horizon: Some(sys.horizon),
            dt: Some(sys.dt),
            m: Some(sys.m),
            alpha: Some(sys.alpha),
            delta: Some(sys.delta),
            record_stride: Some(sys.record_stride),
            seed: Some(sys.seed),
            noise: NoiseSection {
                slow_c0,
                beta,
                fast_c0,
                gamma_exponent,
                slow_raw,
                fast_raw,
            },
            // the four coefficients are stored through the standard preset's
            // parameters when they fit it, which covers every preset
            coupling: coupling_section(c),
            switches: sys.switches,
            initial: InitialSection {
                x_cos: opt_vec(sys.x0.cos()),
                x_sin: opt_vec(sys.x0.sin()),
                y_cos: opt_vec(sys.y0.cos()),
                y_sin: opt_vec(sys.y0.sin()),
            },
            frozen: FrozenSection {
                burn_in: Some(self.frozen.burn_in),
                averaging_time: Some(self.frozen.averaging_time),
                dt: Some(self.frozen.dt),
                seed: Some(self.frozen.seed),
                antithetic: Some(self.frozen.antithetic),
                batches: Some(self.frozen.batches),
                spread_threshold: Some(self.frozen.spread_threshold),
                horizon: Some(self.frozen_horizon),
                x_cos: opt_vec(self.frozen_x.cos()),
                x_sin: opt_vec(self.frozen_x.sin()),
            },
            averaged: AveragedSection {
                fbar_mode: self.averaged.mode,
                macro_step: Some(self.averaged.macro_step),
                antithetic: Some(self.averaged.inner.antithetic),
            },
            study: StudySection {
                eps_grid: Some(self.eps_grid.clone()),
                delta_grid: Some(self.delta_grid.clone()),
                m_grid: Some(self.m_grid.clone()),
                paths: Some(self.study.paths),
                p: Some(self.study.p),
                executor: Some(self.study.executor),
                max_flagged_fraction: Some(self.study.max_flagged_fraction),
            },
        }
    }
}

fn coupling_section(c: Coupling) -> CouplingSection {
    use CouplingPreset::*;
    let (preset, a_f, a_g, b_g) = if c.f_y == 0.5 * c.f_x && c.f_x != 0.0 {
        (Standard, c.f_x, c.g_x, c.g_y)
    } else if c.f_y == 0.0 && c.f_x != 0.0 {
        (SlowOnly, c.f_x, c.g_x, c.g_y)
    } else if c.f_x == 0.0 && c.g_x == 0.0 && c.g_y == 0.0 && c.f_y != 0.0 {
        (Symmetric, c.f_y, 0.0, 0.0)
    } else if c.f_x == 0.0 && c.g_x == 0.0 {
        (XFree, 2.0 * c.f_y, 0.0, c.g_y)
    } else {
        (Zero, 0.0, c.g_x, c.g_y)
    };
    CouplingSection {
        preset: Some(preset),
        a_f: Some(a_f),
        a_g: Some(a_g),
        b_g: Some(b_g),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn is_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{')
}

/// Parses config text into a generic value; a manifest yields its config.
fn parse_value(path: &Path, text: &str) -> Result<serde_json::Value> {
    let value: serde_json::Value = if is_json(path, text) {
        serde_json::from_str(text).map_err(|e| format_err(path, e))?
    } else {
        toml::from_str(text).map_err(|e| format_err(path, e))?
    };
    match value.get("manifest_version") {
        Some(_) => value
            .get("config")
            .cloned()
            .ok_or_else(|| format_err(path, "manifest has no `config`")),
        None => Ok(value),
    }
}

/// Applies `GLAVG_<KEY>` / `GLAVG_<SECTION>__<KEY>` overrides.
pub fn apply_env_overrides(
    value: &mut serde_json::Value,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<()> {
    let root = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a table".into()))?;
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let parsed: serde_json::Value =
            toml::from_str::<BTreeMap<String, serde_json::Value>>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or(serde_json::Value::String(raw.clone()));
        let parts: Vec<String> = rest.split("__").map(|p| p.to_ascii_lowercase()).collect();
        match parts.as_slice() {
            [k] => {
                let k = if k == "t" { "T".to_string() } else { k.clone() };
                root.insert(k, parsed);
            }
            [section, k] => {
                let entry = root
                    .entry(section.clone())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()));
                entry
                    .as_object_mut()
                    .ok_or_else(|| Error::Config(format!("`{section}` is not a section")))?
                    .insert(k.clone(), parsed);
            }
            _ => {
                return Err(Error::Config(format!(
                    "cannot map environment variable {key}"
                )))
            }
        }
    }
    Ok(())
}

/// Reads a config (or manifest) and applies the given environment overrides.
pub fn parse_config_with_env(
    path: &Path,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(ConfigFile, RunConfig)> {
    parse_config_text(path, &read_text(path)?, vars)
}

/// Parses config text; `source` names it in errors and picks the format by
/// extension (JSON also when the text starts with `{`).
pub fn parse_config_text(
    source: &Path,
    text: &str,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(ConfigFile, RunConfig)> {
    let mut value = parse_value(source, text)?;
    apply_env_overrides(&mut value, vars)?;
    let file: ConfigFile =
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    let run = file.resolve()?;
    Ok((file, run))
}

/// [`parse_config_with_env`] with the process environment.
pub fn parse_config(path: &Path) -> Result<(ConfigFile, RunConfig)> {
    parse_config_with_env(path, std::env::vars())
}

/// Serializes a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| format_err(path, format!("not a number: {s:?}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_comment(out: &mut impl Write, path: &Path, manifest: Option<&str>) -> Result<()> {
    if let Some(name) = manifest {
        writeln!(out, "# manifest={name}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    format_err(path, e)
}

/// Header `t,c1..cm,s1..sm`.
pub fn trajectory_header(m: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=m).map(|k| format!("c{k}")))
        .chain((1..=m).map(|k| format!("s{k}")))
        .collect()
}

/// CSV trajectory; `manifest` adds a leading `# manifest=<name>` line.
pub fn write_trajectory(traj: &Trajectory, path: &Path, manifest: Option<&str>) -> Result<()> {
    let mut out = create(path)?;
    write_comment(&mut out, path, manifest)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(traj.m))
        .map_err(|e| csv_err(path, e))?;
    for (t, x) in traj.times.iter().zip(&traj.snapshots) {
        let row = std::iter::once(*t)
            .chain(x.coeffs().iter().copied())
            .map(fmt_f64);
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path, component: Component) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || header.len() % 2 == 0 || &header[0] != "t" {
        return Err(format_err(path, "header must be t,c1..cm,s1..sm"));
    }
    let m = (header.len() - 1) / 2;
    if header.iter().collect::<Vec<_>>() != trajectory_header(m) {
        return Err(format_err(path, "header must be t,c1..cm,s1..sm"));
    }
    let mut traj = Trajectory::new(component, m);
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals = rec
            .iter()
            .map(|s| parse_f64(path, s))
            .collect::<Result<Vec<_>>>()?;
        let field = SpectralField::from_coeffs(m, vals[1..].to_vec())?;
        traj.push(vals[0], field).map_err(|e| format_err(path, e))?;
    }
    Ok(traj)
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    t: f64,
    coeffs: Vec<f64>,
}

/// One `{"t": .., "coeffs": [..]}` object per line.
pub fn write_trajectory_jsonl(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for (t, x) in traj.times.iter().zip(&traj.snapshots) {
        let line = serde_json::to_string(&Snapshot {
            t: *t,
            coeffs: x.coeffs().to_vec(),
        })
        .map_err(|e| format_err(path, e))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory_jsonl(path: &Path, component: Component, m: usize) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut traj = Trajectory::new(component, m);
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let snap: Snapshot = serde_json::from_str(&line).map_err(|e| format_err(path, e))?;
        traj.push(snap.t, SpectralField::from_coeffs(m, snap.coeffs)?)
            .map_err(|e| format_err(path, e))?;
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(v),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(v) => v as f64,
            Cell::Float(v) => v,
        }
    }
}

/// A study table: one row per grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }
}

impl From<&ErrorTable> for Table {
    fn from(t: &ErrorTable) -> Self {
        let mut table = Table::new(&[
            "eps",
            "n_paths",
            "n_flagged",
            "mean_err_p",
            "median_err",
            "trimmed_mean_10pct",
            "q25",
            "q75",
        ]);
        for r in &t.rows {
            table.rows.push(vec![
                Cell::Float(r.eps),
                Cell::Int(r.n_paths as u64),
                Cell::Int(r.n_flagged as u64),
                Cell::Float(r.mean_err_p),
                Cell::Float(r.median_err),
                Cell::Float(r.trimmed_mean_10pct),
                Cell::Float(r.q25),
                Cell::Float(r.q75),
            ]);
        }
        table
    }
}

impl From<&DeltaSweep> for Table {
    fn from(s: &DeltaSweep) -> Self {
        let mut table = Table::new(&[
            "delta",
            "n_paths",
            "n_flagged",
            "median_y_integral",
            "median_x_sup",
        ]);
        for r in &s.rows {
            table.rows.push(vec![
                Cell::Float(r.delta),
                Cell::Int(r.n_paths as u64),
                Cell::Int(r.n_flagged as u64),
                Cell::Float(r.median_y_integral),
                Cell::Float(r.median_x_sup),
            ]);
        }
        table
    }
}

impl From<&[GalerkinRow]> for Table {
    fn from(rows: &[GalerkinRow]) -> Self {
        let mut table = Table::new(&["m", "n_paths", "n_flagged", "median_diff", "q25", "q75"]);
        for r in rows {
            table.rows.push(vec![
                Cell::Int(r.m as u64),
                Cell::Int(r.n_paths as u64),
                Cell::Int(r.n_flagged as u64),
                Cell::Float(r.median_diff),
                Cell::Float(r.q25),
                Cell::Float(r.q75),
            ]);
        }
        table
    }
}

pub fn write_table(table: &Table, path: &Path, manifest: Option<&str>) -> Result<()> {
    let mut out = create(path)?;
    write_comment(&mut out, path, manifest)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header)
        .map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.render()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table back; integer-looking cells become [`Cell::Int`].
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    let mut table = Table {
        header: header.iter().map(String::from).collect(),
        rows: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| match s.parse::<u64>() {
                Ok(v) => Ok(Cell::Int(v)),
                Err(_) => parse_f64(path, s).map(Cell::Float),
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows.push(row);
    }
    Ok(table)
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub software_version: String,
    pub command: String,
    pub master_seed: u64,
    /// Path-0 seeds and the frozen stream seed, named by stream.
    pub derived_seeds: BTreeMap<String, u64>,
    pub config: ConfigFile,
    pub wall_clock_seconds: f64,
    pub flagged_paths: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, run: &RunConfig) -> Self {
        let master = run.system.seed;
        let path0 = path_seed(master, 0);
        let derived_seeds = BTreeMap::from([
            ("path_0".to_string(), path0),
            ("path_0_slow".to_string(), stream_seed(path0, Stream::Slow)),
            ("path_0_fast".to_string(), stream_seed(path0, Stream::Fast)),
            ("frozen_path".to_string(), run.frozen.seed),
            (
                "frozen_stream".to_string(),
                stream_seed(run.frozen.seed, Stream::Frozen),
            ),
        ]);
        RunManifest {
            manifest_version: 1,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: master,
            derived_seeds,
            config: run.echo(),
            wall_clock_seconds: 0.0,
            flagged_paths: 0,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| format_err(path, e))
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| format_err(path, e))?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
