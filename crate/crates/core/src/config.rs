//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [fluid]            # or [direct] with a, b, optional b_tilde, alpha
//! sigma = 1.0
//! alpha = 1.5
//!
//! [domain]
//! half_length = 1.0
//! n_cells = 128
//!
//! [initial]
//! kind = cosine      # constant | cosine | samples
//! c0 = 1.0
//! c1 = 0.5
//! k = 1
//! ```
//!
//! Every key has a default except `[initial] kind`, `[direct] a` and
//! `[direct] b`. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::grid::{FilmState, Grid1D};
use crate::rheology::{derive_params, FluidParams};
use crate::stepper::SolverConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum Coefficients {
    Fluid {
        sigma: f64,
        mu0: f64,
        tau_star: f64,
        alpha: f64,
    },
    Direct {
        a: f64,
        b: f64,
        b_tilde: Option<f64>,
        alpha: f64,
    },
}

impl Coefficients {
    pub fn alpha(&self) -> f64 {
        match *self {
            Coefficients::Fluid { alpha, .. } | Coefficients::Direct { alpha, .. } => alpha,
        }
    }

    pub fn with_alpha(self, new_alpha: f64) -> Self {
        match self {
            Coefficients::Fluid {
                sigma,
                mu0,
                tau_star,
                ..
            } => Coefficients::Fluid {
                sigma,
                mu0,
                tau_star,
                alpha: new_alpha,
            },
            Coefficients::Direct { a, b, .. } => Coefficients::Direct {
                a,
                b,
                b_tilde: None,
                alpha: new_alpha,
            },
        }
    }

    pub fn params(&self) -> Result<FluidParams, ConfigError> {
        let wrap = |e: crate::Error| match e {
            crate::Error::Domain { name, reason } => invalid(name, reason),
            other => invalid("fluid", other.to_string()),
        };
        match *self {
            Coefficients::Fluid {
                sigma,
                mu0,
                tau_star,
                alpha,
            } => derive_params(sigma, mu0, tau_star, alpha).map_err(wrap),
            Coefficients::Direct {
                a,
                b,
                b_tilde,
                alpha,
            } => {
                let p = FluidParams::from_coefficients(a, b, alpha).map_err(wrap)?;
                if let Some(bt) = b_tilde {
                    if (bt - p.b_tilde).abs() > 1e-9 * p.b_tilde.max(1e-300) {
                        return Err(invalid(
                            "b_tilde",
                            format!(
                                "inconsistent with b and alpha (expected {})",
                                p.b_tilde
                            ),
                        ));
                    }
                }
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainConfig {
    pub half_length: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Constant { value: f64 },
    /// `c0 + c1 cos(k pi x / l)`
    Cosine { c0: f64, c1: f64, k: u32 },
    /// One height per line, `n_cells + 1` values.
    Samples { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write `snap_<step>.csv` every this many steps; 0 keeps only the first
    /// and last snapshot.
    pub snapshot_interval: usize,
    /// Write every n-th diagnostics record (the last one is always kept).
    pub diagnostics_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("output"),
            snapshot_interval: 0,
            diagnostics_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmsConfig {
    pub c0: f64,
    pub c1: f64,
    pub k: u32,
    pub lambda: f64,
    pub levels: usize,
    pub horizon: f64,
    pub base_steps: usize,
    /// Required observed order; defaults to 1.8 for Lipschitz coefficients
    /// (`alpha >= 2` or `b = 0`) and 1.3 otherwise.
    pub min_order: Option<f64>,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            c0: 1.0,
            c1: 0.2,
            k: 1,
            lambda: 1.0,
            levels: 4,
            horizon: 1e-2,
            base_steps: 4,
            min_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub coefficients: Coefficients,
    pub domain: DomainConfig,
    pub initial: InitialCondition,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub mms: Option<MmsConfig>,
}

impl RunConfig {
    pub fn params(&self) -> Result<FluidParams, ConfigError> {
        self.coefficients.params()
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        Grid1D::new(self.domain.half_length, self.domain.n_cells)
            .map_err(|e| invalid("n_cells", e.to_string()))
    }

    /// Initial film; relative sample paths resolve against `base_dir`.
    pub fn initial_state(&self, base_dir: &Path) -> Result<FilmState, ConfigError> {
        let grid = self.grid()?;
        let l = grid.half_length();
        let state = match &self.initial {
            InitialCondition::Constant { value } => FilmState::constant(&grid, *value),
            InitialCondition::Cosine { c0, c1, k } => {
                let kappa = *k as f64 * std::f64::consts::PI / l;
                FilmState::from_fn(&grid, 0.0, |x| c0 + c1 * (kappa * x).cos())
            }
            InitialCondition::Samples { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| invalid("path", format!("{}: {e}", full.display())))?;
                let values = parse_samples(&text)?;
                FilmState::new(0.0, values, &grid)
            }
        }
        .map_err(|e| invalid("initial", e.to_string()))?;
        state
            .check_positive()
            .map_err(|e| invalid("initial", e.to_string()))?;
        Ok(state)
    }

    /// Text form accepted by [`parse_config`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match self.coefficients {
            Coefficients::Fluid {
                sigma,
                mu0,
                tau_star,
                alpha,
            } => {
                s.push_str("[fluid]\n");
                kv(&mut s, "sigma", num(sigma));
                kv(&mut s, "mu0", num(mu0));
                kv(&mut s, "tau_star", num(tau_star));
                kv(&mut s, "alpha", num(alpha));
            }
            Coefficients::Direct {
                a,
                b,
                b_tilde,
                alpha,
            } => {
                s.push_str("[direct]\n");
                kv(&mut s, "a", num(a));
                kv(&mut s, "b", num(b));
                if let Some(bt) = b_tilde {
                    kv(&mut s, "b_tilde", num(bt));
                }
                kv(&mut s, "alpha", num(alpha));
            }
        }
        s.push_str("\n[domain]\n");
        kv(&mut s, "half_length", num(self.domain.half_length));
        kv(&mut s, "n_cells", self.domain.n_cells.to_string());
        s.push_str("\n[initial]\n");
        match &self.initial {
            InitialCondition::Constant { value } => {
                kv(&mut s, "kind", "constant".into());
                kv(&mut s, "value", num(*value));
            }
            InitialCondition::Cosine { c0, c1, k } => {
                kv(&mut s, "kind", "cosine".into());
                kv(&mut s, "c0", num(*c0));
                kv(&mut s, "c1", num(*c1));
                kv(&mut s, "k", k.to_string());
            }
            InitialCondition::Samples { path } => {
                kv(&mut s, "kind", "samples".into());
                kv(&mut s, "path", path.display().to_string());
            }
        }
        let c = &self.solver;
        s.push_str("\n[solver]\n");
        kv(&mut s, "dt_initial", num(c.dt_initial));
        kv(&mut s, "dt_min", num(c.dt_min));
        kv(&mut s, "dt_max", num(c.dt_max));
        kv(&mut s, "t_end", num(c.t_end));
        kv(&mut s, "picard_max", c.picard_max.to_string());
        kv(&mut s, "picard_tol", num(c.picard_tol));
        kv(&mut s, "epsilon", num(c.epsilon));
        if let Some(t) = c.touchdown_threshold {
            kv(&mut s, "touchdown_threshold", num(t));
        }
        kv(&mut s, "blowup_norm_cap", num(c.blowup_norm_cap));
        kv(&mut s, "growth_factor", num(c.growth_factor));
        kv(&mut s, "use_regularized", c.use_regularized.to_string());
        kv(&mut s, "linearization", c.linearization.to_string());
        s.push_str("\n[output]\n");
        kv(&mut s, "directory", self.output.directory.display().to_string());
        kv(&mut s, "snapshot_interval", self.output.snapshot_interval.to_string());
        kv(&mut s, "diagnostics_every", self.output.diagnostics_every.to_string());
        if let Some(m) = &self.mms {
            s.push_str("\n[mms]\n");
            kv(&mut s, "c0", num(m.c0));
            kv(&mut s, "c1", num(m.c1));
            kv(&mut s, "k", m.k.to_string());
            kv(&mut s, "lambda", num(m.lambda));
            kv(&mut s, "levels", m.levels.to_string());
            kv(&mut s, "horizon", num(m.horizon));
            kv(&mut s, "base_steps", m.base_steps.to_string());
            if let Some(o) = m.min_order {
                kv(&mut s, "min_order", num(o));
            }
        }
        s
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_samples(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(line, l)| {
            l.parse::<f64>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("sample `{l}` is not a number"),
            })
        })
        .collect()
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("fluid", &["sigma", "mu0", "tau_star", "alpha"]),
    ("direct", &["a", "b", "b_tilde", "alpha"]),
    ("domain", &["half_length", "n_cells"]),
    ("initial", &["kind", "value", "c0", "c1", "k", "path"]),
    (
        "solver",
        &[
            "dt_initial",
            "dt_min",
            "dt_max",
            "t_end",
            "picard_max",
            "picard_tol",
            "epsilon",
            "touchdown_threshold",
            "blowup_norm_cap",
            "growth_factor",
            "use_regularized",
            "linearization",
        ],
    ),
    ("output", &["directory", "snapshot_interval", "diagnostics_every"]),
    (
        "mms",
        &["c0", "c1", "k", "lambda", "levels", "horizon", "base_steps", "min_order"],
    ),
];

/// Key/value pairs of one section, with source line numbers.
struct Section {
    entries: BTreeMap<String, (String, usize)>,
    taken: Vec<String>,
    name: &'static str,
}

impl Section {
    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.taken.push(key.to_string());
        }
        v
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| ConfigError::Parse {
                line,
                message: format!("`{key}` expects {what}, got `{v}`"),
            }),
        }
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parsed(key, "a number")?.unwrap_or(default))
    }

    fn opt_real(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(key, "a number")
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parsed(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.parsed(key, "`true` or `false`")?.unwrap_or(default))
    }

    /// Errors on keys that were present but not consumed.
    fn finish(self, context: &str) -> Result<(), ConfigError> {
        for (key, (_, line)) in &self.entries {
            if !self.taken.contains(key) {
                return Err(ConfigError::Parse {
                    line: *line,
                    message: format!("key `{key}` is not used by {context} in [{}]", self.name),
                });
            }
        }
        Ok(())
    }
}

fn empty_section(name: &'static str) -> Section {
    Section {
        entries: BTreeMap::new(),
        taken: Vec::new(),
        name,
    }
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut sections: BTreeMap<&'static str, Section> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("malformed section header `{content}`"),
            })?;
            let name = name.trim();
            let (known, _) = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("unknown section [{name}]"),
                })?;
            if sections.contains_key(known) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(known, empty_section(known));
            current = Some(known);
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let section = current.ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("key `{key}` appears before any [section]"),
        })?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key `{key}` in [{section}]"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{key}` has no value"),
            });
        }
        let sec = sections.get_mut(section).expect("section registered");
        if sec
            .entries
            .insert(key.to_string(), (value.to_string(), line))
            .is_some()
        {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}` in [{section}]"),
            });
        }
    }

    let coefficients = match (sections.remove("fluid"), sections.remove("direct")) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "direct",
                "give either a [fluid] or a [direct] block, not both",
            ))
        }
        (None, None) => return Err(invalid("fluid", "missing [fluid] or [direct] block")),
        (Some(mut s), None) => {
            let c = Coefficients::Fluid {
                sigma: s.real("sigma", 1.0)?,
                mu0: s.real("mu0", 1.0)?,
                tau_star: s.real("tau_star", 1.0)?,
                alpha: s.real("alpha", 1.5)?,
            };
            s.finish("the fluid block")?;
            c
        }
        (None, Some(mut s)) => {
            let a = s.opt_real("a")?.ok_or_else(|| invalid("a", "required in [direct]"))?;
            let b = s.opt_real("b")?.ok_or_else(|| invalid("b", "required in [direct]"))?;
            let c = Coefficients::Direct {
                a,
                b,
                b_tilde: s.opt_real("b_tilde")?,
                alpha: s.real("alpha", 1.5)?,
            };
            s.finish("the direct block")?;
            c
        }
    };
    coefficients.params()?;

    let mut s = sections.remove("domain").unwrap_or_else(|| empty_section("domain"));
    let domain = DomainConfig {
        half_length: s.real("half_length", 1.0)?,
        n_cells: s.count("n_cells", 128)?,
    };
    s.finish("the domain")?;
    Grid1D::new(domain.half_length, domain.n_cells).map_err(|e| match e {
        crate::Error::Domain { name, reason } => invalid(name, reason),
        other => invalid("domain", other.to_string()),
    })?;

    let mut s = sections
        .remove("initial")
        .ok_or_else(|| invalid("initial", "missing [initial] block"))?;
    let (kind, kind_line) = s
        .raw("kind")
        .ok_or_else(|| invalid("kind", "required in [initial]"))?;
    let initial = match kind.as_str() {
        "constant" => InitialCondition::Constant {
            value: s.real("value", 1.0)?,
        },
        "cosine" => InitialCondition::Cosine {
            c0: s.real("c0", 1.0)?,
            c1: s.real("c1", 0.5)?,
            k: s.parsed("k", "a positive integer")?.unwrap_or(1),
        },
        "samples" => InitialCondition::Samples {
            path: PathBuf::from(
                s.raw("path")
                    .ok_or_else(|| invalid("path", "required for kind = samples"))?
                    .0,
            ),
        },
        other => {
            return Err(ConfigError::Parse {
                line: kind_line,
                message: format!("unknown initial kind `{other}` (constant, cosine, samples)"),
            })
        }
    };
    s.finish(&format!("kind = {kind}"))?;
    match initial {
        InitialCondition::Constant { value } if !(value.is_finite() && value > 0.0) => {
            return Err(invalid("value", "initial height must be positive"))
        }
        InitialCondition::Cosine { c0, c1, k } => {
            if !(c0.is_finite() && c1.is_finite() && c1.abs() < c0) {
                return Err(invalid("c1", "need |c1| < c0 for a positive film"));
            }
            if k == 0 {
                return Err(invalid("k", "wavenumber must be at least 1"));
            }
        }
        _ => {}
    }

    let d = SolverConfig::default();
    let mut s = sections.remove("solver").unwrap_or_else(|| empty_section("solver"));
    let solver = SolverConfig {
        dt_initial: s.real("dt_initial", d.dt_initial)?,
        dt_min: s.real("dt_min", d.dt_min)?,
        dt_max: s.real("dt_max", d.dt_max)?,
        t_end: s.real("t_end", d.t_end)?,
        picard_max: s.count("picard_max", d.picard_max)?,
        picard_tol: s.real("picard_tol", d.picard_tol)?,
        epsilon: s.real("epsilon", d.epsilon)?,
        touchdown_threshold: s.opt_real("touchdown_threshold")?,
        blowup_norm_cap: s.real("blowup_norm_cap", d.blowup_norm_cap)?,
        growth_factor: s.real("growth_factor", d.growth_factor)?,
        use_regularized: s.flag("use_regularized", d.use_regularized)?,
        linearization: s
            .parsed("linearization", "`picard` or `newton`")?
            .unwrap_or(d.linearization),
    };
    s.finish("the solver")?;
    solver.validate().map_err(|e| match e {
        crate::Error::Domain { name, reason } => invalid(name, reason),
        other => invalid("solver", other.to_string()),
    })?;

    let d = OutputConfig::default();
    let mut s = sections.remove("output").unwrap_or_else(|| empty_section("output"));
    let output = OutputConfig {
        directory: s
            .raw("directory")
            .map(|(v, _)| PathBuf::from(v))
            .unwrap_or(d.directory),
        snapshot_interval: s.count("snapshot_interval", d.snapshot_interval)?,
        diagnostics_every: s.count("diagnostics_every", d.diagnostics_every)?,
    };
    s.finish("the output")?;
    if output.diagnostics_every == 0 {
        return Err(invalid("diagnostics_every", "must be at least 1"));
    }

    let mms = match sections.remove("mms") {
        None => None,
        Some(mut s) => {
            let d = MmsConfig::default();
            let m = MmsConfig {
                c0: s.real("c0", d.c0)?,
                c1: s.real("c1", d.c1)?,
                k: s.parsed("k", "a positive integer")?.unwrap_or(d.k),
                lambda: s.real("lambda", d.lambda)?,
                levels: s.count("levels", d.levels)?,
                horizon: s.real("horizon", d.horizon)?,
                base_steps: s.count("base_steps", d.base_steps)?,
                min_order: s.opt_real("min_order")?,
            };
            s.finish("the mms block")?;
            if m.levels < 3 {
                return Err(invalid("levels", "need at least 3 refinement levels"));
            }
            if !(m.horizon.is_finite() && m.horizon > 0.0) || m.base_steps == 0 {
                return Err(invalid("horizon", "need a positive horizon and base_steps >= 1"));
            }
            crate::mms::ManufacturedSolution::new(m.c0, m.c1, m.lambda, m.k, domain.half_length)
                .map_err(|e| match e {
                    crate::Error::Domain { name, reason } => invalid(name, reason),
                    other => invalid("mms", other.to_string()),
                })?;
            Some(m)
        }
    };

    Ok(RunConfig {
        coefficients,
        domain,
        initial,
        solver,
        output,
        mms,
    })
}
