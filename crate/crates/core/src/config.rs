//! Run configuration: a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [grid]
//! nx = 256
//! ny = 256
//! lx = 160
//! ly = 160
//!
//! [kernels]
//! l = rational
//! j = bessel-smoother
//!
//! [forcing]
//! name = gaussian
//! amplitude = -2
//!
//! [run]
//! epsilon = 0.5
//! ```
//!
//! Kernel parameters are written `l_<param>` / `j_<param>` (for example
//! `j_sigma = 2`). A forcing may instead be read from a checkpoint file with
//! `file = path`. `#` starts a comment. Unknown sections and keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forcing::forcing_catalog;
use crate::kernels::{kernel_catalog, KernelRole};
use crate::spectral::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Eikonal,
    StuartLandau,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Eikonal => "eikonal",
            Model::StuartLandau => "stuart-landau",
        }
    }
}

/// A catalog entry with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSpec {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

impl NamedSpec {
    pub fn new(name: &str) -> Self {
        NamedSpec {
            name: name.to_string(),
            params: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.retain(|(k, _)| k != key);
        self.params.push((key.to_string(), value));
        self
    }

    pub fn param_refs(&self) -> Vec<(&str, f64)> {
        self.params.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingChoice {
    Catalog(NamedSpec),
    /// Samples read from a checkpoint file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid2D,
    pub l_kernel: NamedSpec,
    pub j_kernel: NamedSpec,
    pub forcing: ForcingChoice,
    pub model: Model,
    pub eps: f64,
    /// Background wavevector of the affine phase part.
    pub q: (f64, f64),
    pub dt: f64,
    pub t_end: f64,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_stride: usize,
    /// Grid indices `(i, j)` sampled every step.
    pub probes: Vec<(usize, usize)>,
    pub dealias: bool,
    /// When false the quadratic term is dropped and only `L` and the
    /// forcing act.
    pub nonlinear: bool,
    pub seed: u64,
    /// Amplitude of the seeded initial perturbation; 0 starts from rest.
    pub init_noise: f64,
    /// Complex coefficient `a + ib` of the coupling in the oscillator model.
    pub coupling: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        let grid = Grid2D::default();
        SimConfig {
            grid,
            l_kernel: NamedSpec::new("laplacian"),
            j_kernel: NamedSpec::new("identity"),
            forcing: ForcingChoice::Catalog(NamedSpec::new("gaussian").with("amplitude", -2.0).with("width", 1.0)),
            model: Model::Eikonal,
            eps: 0.5,
            q: (0.0, 0.0),
            dt: 0.5,
            t_end: 2000.0,
            snapshot_stride: 0,
            probes: vec![(grid.nx() / 2, grid.ny() / 2)],
            dealias: true,
            nonlinear: true,
            seed: 0,
            init_noise: 0.0,
            coupling: (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Trailing fraction of the probe series used for the frequency fit.
    pub window_fraction: f64,
    pub n_max: usize,
    /// Radial bins for polar decomposition; 0 picks one per grid spacing.
    pub nbins: usize,
    pub epsilons: Vec<f64>,
    pub shoot_radius: Option<f64>,
    pub schrod_radius: Option<f64>,
    pub schrod_cells: usize,
    /// Whether `sweep` also runs a simulation per `eps`.
    pub sweep_simulate: bool,
    pub decay_gamma: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window_fraction: 0.25,
            n_max: 8,
            nbins: 0,
            epsilons: vec![0.3, 0.4, 0.5, 0.6],
            shoot_radius: None,
            schrod_radius: None,
            schrod_cells: 2000,
            sweep_simulate: false,
            decay_gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub sim: SimConfig,
    pub analysis: AnalysisConfig,
}

const SECTIONS: [&str; 6] = ["grid", "kernels", "forcing", "run", "probes", "analysis"];

fn keys_for(section: &str) -> &'static [&'static str] {
    match section {
        "grid" => &["nx", "ny", "lx", "ly"],
        "kernels" => &["l", "j"],
        "forcing" => &["name", "file"],
        "run" => &[
            "model",
            "epsilon",
            "dt",
            "t_end",
            "snapshot_stride",
            "qx",
            "qy",
            "dealias",
            "nonlinear",
            "seed",
            "init_noise",
            "coupling_re",
            "coupling_im",
        ],
        "probes" => &["points"],
        "analysis" => &[
            "window_fraction",
            "n_max",
            "nbins",
            "epsilons",
            "shoot_radius",
            "schrod_radius",
            "schrod_cells",
            "sweep_simulate",
            "decay_gamma",
        ],
        _ => &[],
    }
}

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn parse_f64(e: &Entry) -> Result<f64> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| Error::config(Some(e.line), format!("`{}` expects a number, got `{}`", e.key, e.value)))?;
    if !v.is_finite() {
        return Err(Error::config(Some(e.line), format!("`{}` must be finite", e.key)));
    }
    Ok(v)
}

fn parse_usize(e: &Entry) -> Result<usize> {
    e.value.parse().map_err(|_| {
        Error::config(
            Some(e.line),
            format!("`{}` expects a non-negative integer, got `{}`", e.key, e.value),
        )
    })
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(Some(e.line), format!("`{}` expects true or false, got `{}`", e.key, e.value))),
    }
}

fn parse_opt_radius(e: &Entry) -> Result<Option<f64>> {
    if e.value == "auto" {
        return Ok(None);
    }
    let v = parse_f64(e)?;
    if !(v > 0.0) {
        return Err(Error::config(Some(e.line), format!("`{}` must be positive or `auto`", e.key)));
    }
    Ok(Some(v))
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    /// Parses and checks a config. Semantic checks that need the forcing
    /// mass live in [`Config::check_pacemaker`].
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(Some(line_no), format!("malformed section header `{line}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::config(
                        Some(line_no),
                        format!("unknown section `[{name}]`; known: {}", SECTIONS.join(", ")),
                    ));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(Some(line_no), format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let sec = section
                .clone()
                .ok_or_else(|| Error::config(Some(line_no), format!("key `{key}` appears before any section")))?;
            if key.is_empty() || value.is_empty() {
                return Err(Error::config(Some(line_no), format!("empty key or value in `{line}`")));
            }
            let free_form = match sec.as_str() {
                "kernels" => key.starts_with("l_") || key.starts_with("j_"),
                "forcing" => key != "name" && key != "file",
                _ => false,
            };
            if !free_form && !keys_for(&sec).contains(&key.as_str()) {
                return Err(Error::config(
                    Some(line_no),
                    format!("unknown key `{key}` in [{sec}]; known: {}", keys_for(&sec).join(", ")),
                ));
            }
            if entries.iter().any(|e| e.section == sec && e.key == key) {
                return Err(Error::config(Some(line_no), format!("duplicate key `{key}` in [{sec}]")));
            }
            entries.push(Entry {
                line: line_no,
                section: sec,
                key,
                value,
            });
        }
        Config::from_entries(&entries)
    }

    fn from_entries(entries: &[Entry]) -> Result<Config> {
        let mut sim = SimConfig::default();
        let mut an = AnalysisConfig::default();
        let get = |sec: &str, key: &str| entries.iter().find(|e| e.section == sec && e.key == key);

        let (mut nx, mut ny, mut lx, mut ly) = (sim.grid.nx(), sim.grid.ny(), sim.grid.lx(), sim.grid.ly());
        let mut grid_line = None;
        for e in entries.iter().filter(|e| e.section == "grid") {
            grid_line = Some(e.line);
            match e.key.as_str() {
                "nx" => nx = parse_usize(e)?,
                "ny" => ny = parse_usize(e)?,
                "lx" => lx = parse_f64(e)?,
                "ly" => ly = parse_f64(e)?,
                _ => unreachable!(),
            }
        }
        sim.grid = Grid2D::new(nx, ny, lx, ly).map_err(|err| Error::config(grid_line, err.to_string()))?;
        sim.probes = vec![(nx / 2, ny / 2)];

        let mut l = NamedSpec::new(get("kernels", "l").map(|e| e.value.as_str()).unwrap_or("laplacian"));
        let mut j = NamedSpec::new(get("kernels", "j").map(|e| e.value.as_str()).unwrap_or("identity"));
        for e in entries.iter().filter(|e| e.section == "kernels") {
            if let Some(p) = e.key.strip_prefix("l_") {
                l = l.with(p, parse_f64(e)?);
            } else if let Some(p) = e.key.strip_prefix("j_") {
                j = j.with(p, parse_f64(e)?);
            }
        }
        for (spec, role, key) in [(&l, KernelRole::Linear, "l"), (&j, KernelRole::Smoothing, "j")] {
            let line = entries
                .iter()
                .find(|e| e.section == "kernels" && (e.key == key || e.key.starts_with(&format!("{key}_"))))
                .map(|e| e.line);
            let k = kernel_catalog(&spec.name, &spec.param_refs()).map_err(|err| Error::config(line, err.to_string()))?;
            if k.role() != role {
                return Err(Error::config(
                    line,
                    format!("kernel `{}` cannot be used as `{key}`", spec.name),
                ));
            }
            if !k.time_integrable() {
                return Err(Error::config(
                    line,
                    format!("kernel `{}` is not localized enough for time integration", spec.name),
                ));
            }
        }
        sim.l_kernel = NormalizedSpec::normalize(l, KernelRole::Linear)?;
        sim.j_kernel = NormalizedSpec::normalize(j, KernelRole::Smoothing)?;

        let forcing_entries: Vec<&Entry> = entries.iter().filter(|e| e.section == "forcing").collect();
        if let Some(file) = get("forcing", "file") {
            if forcing_entries.len() > 1 {
                return Err(Error::config(Some(file.line), "`file` excludes every other forcing key"));
            }
            sim.forcing = ForcingChoice::File(PathBuf::from(&file.value));
        } else if !forcing_entries.is_empty() {
            let name_entry = get("forcing", "name");
            let name = name_entry.map(|e| e.value.as_str()).unwrap_or("gaussian");
            let mut params = Vec::new();
            for e in forcing_entries.iter().filter(|e| e.key != "name") {
                params.push((e.key.as_str(), parse_f64(e)?));
            }
            let line = name_entry.map(|e| e.line).or(forcing_entries.first().map(|e| e.line));
            let f = forcing_catalog(name, &params).map_err(|err| Error::config(line, err.to_string()))?;
            let mut spec = NamedSpec::new(name);
            for (k, v) in f.params() {
                spec = spec.with(k, *v);
            }
            sim.forcing = ForcingChoice::Catalog(spec);
        }

        for e in entries.iter().filter(|e| e.section == "run") {
            match e.key.as_str() {
                "model" => {
                    sim.model = match e.value.as_str() {
                        "eikonal" => Model::Eikonal,
                        "stuart-landau" => Model::StuartLandau,
                        other => {
                            return Err(Error::config(
                                Some(e.line),
                                format!("unknown model `{other}`; known: eikonal, stuart-landau"),
                            ))
                        }
                    }
                }
                "epsilon" => sim.eps = parse_f64(e)?,
                "dt" => {
                    sim.dt = parse_f64(e)?;
                    if !(sim.dt > 0.0) {
                        return Err(Error::config(Some(e.line), format!("dt must be positive, got {}", sim.dt)));
                    }
                }
                "t_end" => {
                    sim.t_end = parse_f64(e)?;
                    if sim.t_end < 0.0 {
                        return Err(Error::config(Some(e.line), format!("t_end must be >= 0, got {}", sim.t_end)));
                    }
                }
                "snapshot_stride" => sim.snapshot_stride = parse_usize(e)?,
                "qx" => sim.q.0 = parse_f64(e)?,
                "qy" => sim.q.1 = parse_f64(e)?,
                "dealias" => sim.dealias = parse_bool(e)?,
                "nonlinear" => sim.nonlinear = parse_bool(e)?,
                "seed" => {
                    sim.seed = e.value.parse().map_err(|_| {
                        Error::config(Some(e.line), format!("`seed` expects an unsigned integer, got `{}`", e.value))
                    })?
                }
                "init_noise" => {
                    sim.init_noise = parse_f64(e)?;
                    if sim.init_noise < 0.0 {
                        return Err(Error::config(Some(e.line), "init_noise must be >= 0"));
                    }
                }
                "coupling_re" => sim.coupling.0 = parse_f64(e)?,
                "coupling_im" => sim.coupling.1 = parse_f64(e)?,
                _ => unreachable!(),
            }
        }
        if sim.model == Model::StuartLandau && !(sim.coupling.0 > 0.0) {
            let line = get("run", "coupling_re").map(|e| e.line);
            return Err(Error::config(line, "coupling_re must be positive for a well-posed oscillator model"));
        }

        if let Some(e) = get("probes", "points") {
            let mut pts = Vec::new();
            for item in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (i, j) = item
                    .split_once(':')
                    .ok_or_else(|| Error::config(Some(e.line), format!("probe `{item}` is not `i:j`")))?;
                let i: usize = i.trim().parse().map_err(|_| Error::config(Some(e.line), format!("bad probe `{item}`")))?;
                let j: usize = j.trim().parse().map_err(|_| Error::config(Some(e.line), format!("bad probe `{item}`")))?;
                if i >= nx || j >= ny {
                    return Err(Error::config(
                        Some(e.line),
                        format!("probe {i}:{j} is off the {nx}x{ny} grid"),
                    ));
                }
                pts.push((i, j));
            }
            sim.probes = pts;
        }

        for e in entries.iter().filter(|e| e.section == "analysis") {
            match e.key.as_str() {
                "window_fraction" => {
                    an.window_fraction = parse_f64(e)?;
                    if !(an.window_fraction > 0.0 && an.window_fraction <= 1.0) {
                        return Err(Error::config(Some(e.line), "window_fraction must lie in (0, 1]"));
                    }
                }
                "n_max" => an.n_max = parse_usize(e)?,
                "nbins" => an.nbins = parse_usize(e)?,
                "epsilons" => {
                    an.epsilons = e
                        .value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<f64>()
                                .ok()
                                .filter(|v| v.is_finite())
                                .ok_or_else(|| Error::config(Some(e.line), format!("bad epsilon `{s}`")))
                        })
                        .collect::<Result<_>>()?
                }
                "shoot_radius" => an.shoot_radius = parse_opt_radius(e)?,
                "schrod_radius" => an.schrod_radius = parse_opt_radius(e)?,
                "schrod_cells" => {
                    an.schrod_cells = parse_usize(e)?;
                    if an.schrod_cells < 4 {
                        return Err(Error::config(Some(e.line), "schrod_cells must be at least 4"));
                    }
                }
                "sweep_simulate" => an.sweep_simulate = parse_bool(e)?,
                "decay_gamma" => an.decay_gamma = parse_f64(e)?,
                _ => unreachable!(),
            }
        }
        Ok(Config { sim, analysis: an })
    }

    /// Refuses `eps * M > 0` unless `allow_positive` is set, in which case
    /// it and `eps * M = 0` produce warnings.
    pub fn check_pacemaker(&self, mass: f64, allow_positive: bool) -> Result<Vec<String>> {
        let em = self.sim.eps * mass;
        let mut warnings = Vec::new();
        if em > 0.0 {
            if !allow_positive {
                return Err(Error::config(
                    None,
                    format!(
                        "eps * M = {em} > 0: no target pattern is expected; pass --allow-positive-mass to run anyway"
                    ),
                ));
            }
            warnings.push(format!("eps * M = {em} > 0: outside the pacemaker regime"));
        } else if em == 0.0 {
            warnings.push("eps * M = 0: the forcing does not act as a pacemaker".to_string());
        }
        Ok(warnings)
    }

    /// Every key with its value, in a fixed order; parsing the result gives
    /// back an identical config.
    pub fn to_canonical_string(&self) -> String {
        let s = &self.sim;
        let a = &self.analysis;
        let mut out = String::new();
        let f = |v: f64| format!("{v:?}");
        let _ = writeln!(out, "[grid]");
        let _ = writeln!(out, "nx = {}", s.grid.nx());
        let _ = writeln!(out, "ny = {}", s.grid.ny());
        let _ = writeln!(out, "lx = {}", f(s.grid.lx()));
        let _ = writeln!(out, "ly = {}", f(s.grid.ly()));
        let _ = writeln!(out, "\n[kernels]");
        let _ = writeln!(out, "l = {}", s.l_kernel.name);
        for (k, v) in &s.l_kernel.params {
            let _ = writeln!(out, "l_{k} = {}", f(*v));
        }
        let _ = writeln!(out, "j = {}", s.j_kernel.name);
        for (k, v) in &s.j_kernel.params {
            let _ = writeln!(out, "j_{k} = {}", f(*v));
        }
        let _ = writeln!(out, "\n[forcing]");
        match &s.forcing {
            ForcingChoice::Catalog(spec) => {
                let _ = writeln!(out, "name = {}", spec.name);
                for (k, v) in &spec.params {
                    let _ = writeln!(out, "{k} = {}", f(*v));
                }
            }
            ForcingChoice::File(p) => {
                let _ = writeln!(out, "file = {}", p.display());
            }
        }
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "model = {}", s.model.as_str());
        let _ = writeln!(out, "epsilon = {}", f(s.eps));
        let _ = writeln!(out, "dt = {}", f(s.dt));
        let _ = writeln!(out, "t_end = {}", f(s.t_end));
        let _ = writeln!(out, "snapshot_stride = {}", s.snapshot_stride);
        let _ = writeln!(out, "qx = {}", f(s.q.0));
        let _ = writeln!(out, "qy = {}", f(s.q.1));
        let _ = writeln!(out, "dealias = {}", s.dealias);
        let _ = writeln!(out, "nonlinear = {}", s.nonlinear);
        let _ = writeln!(out, "seed = {}", s.seed);
        let _ = writeln!(out, "init_noise = {}", f(s.init_noise));
        let _ = writeln!(out, "coupling_re = {}", f(s.coupling.0));
        let _ = writeln!(out, "coupling_im = {}", f(s.coupling.1));
        let _ = writeln!(out, "\n[probes]");
        let pts: Vec<String> = s.probes.iter().map(|(i, j)| format!("{i}:{j}")).collect();
        let _ = writeln!(out, "points = {}", pts.join(", "));
        let _ = writeln!(out, "\n[analysis]");
        let _ = writeln!(out, "window_fraction = {}", f(a.window_fraction));
        let _ = writeln!(out, "n_max = {}", a.n_max);
        let _ = writeln!(out, "nbins = {}", a.nbins);
        let eps: Vec<String> = a.epsilons.iter().map(|v| f(*v)).collect();
        let _ = writeln!(out, "epsilons = {}", eps.join(", "));
        let r = |v: Option<f64>| v.map(f).unwrap_or_else(|| "auto".to_string());
        let _ = writeln!(out, "shoot_radius = {}", r(a.shoot_radius));
        let _ = writeln!(out, "schrod_radius = {}", r(a.schrod_radius));
        let _ = writeln!(out, "schrod_cells = {}", a.schrod_cells);
        let _ = writeln!(out, "sweep_simulate = {}", a.sweep_simulate);
        let _ = writeln!(out, "decay_gamma = {}", f(a.decay_gamma));
        out
    }
}

/// Fills in every catalog default so that equal kernels compare equal.
struct NormalizedSpec;

impl NormalizedSpec {
    fn normalize(spec: NamedSpec, role: KernelRole) -> Result<NamedSpec> {
        let k = kernel_catalog(&spec.name, &spec.param_refs())?;
        debug_assert_eq!(k.role(), role);
        let mut out = NamedSpec::new(&spec.name);
        for (key, v) in k.params() {
            out = out.with(key, *v);
        }
        Ok(out)
    }
}
