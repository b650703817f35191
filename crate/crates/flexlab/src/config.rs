//! Run configuration: one TOML document naming a command plus that command's section.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Cutoff,
    Tangent,
    Cover,
    Setcutoff,
    Glue,
    Staircase,
    Curve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cutoff => "cutoff",
            Command::Tangent => "tangent",
            Command::Cover => "cover",
            Command::Setcutoff => "setcutoff",
            Command::Glue => "glue",
            Command::Staircase => "staircase",
            Command::Curve => "curve",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffSection {
    pub delta: f64,
    pub eps: f64,
    pub order: usize,
    pub samples: usize,
    pub certify: bool,
}

impl Default for CutoffSection {
    fn default() -> Self {
        CutoffSection { delta: 0.1, eps: 0.5, order: 3, samples: 10_000, certify: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TangentSection {
    /// A named set (corner, parabola, line, sequence, disk, point, union, intersection) or a
    /// file of points, one `x y [z]` per line.
    pub set: String,
    pub point: Vec<f64>,
    /// Defaults to `2^{−i}`, `i = 0..=12`.
    pub radii: Option<Vec<f64>>,
    pub samples: usize,
}

impl Default for TangentSection {
    fn default() -> Self {
        TangentSection { set: "corner".into(), point: vec![0.0, 0.0], radii: None, samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    pub set: String,
    pub eps: f64,
    pub samples: usize,
}

impl Default for CoverSection {
    fn default() -> Self {
        CoverSection { set: "disk".into(), eps: 0.1, samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetcutoffSection {
    pub set: String,
    pub samples: usize,
    pub delta: f64,
    pub lambda: f64,
    pub order: usize,
    /// Samples with `|x|_∞ ≤ k_halfwidth` form `K`.
    pub k_halfwidth: f64,
    /// `U = (−u_halfwidth, u_halfwidth)ⁿ`.
    pub u_halfwidth: f64,
    /// Output grid points per axis over `[−1, 1]ⁿ`.
    pub grid: usize,
}

impl Default for SetcutoffSection {
    fn default() -> Self {
        SetcutoffSection {
            set: "corner".into(),
            samples: 201,
            delta: 0.1,
            lambda: 0.5,
            order: 1,
            k_halfwidth: 0.5,
            u_halfwidth: 1.5,
            grid: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlueSection {
    /// staircase-step, remark32 or remark33.
    pub fixture: String,
    pub delta_schedule: Option<Vec<f64>>,
    pub eps_schedule: Option<Vec<f64>>,
}

impl Default for GlueSection {
    fn default() -> Self {
        GlueSection { fixture: "staircase-step".into(), delta_schedule: None, eps_schedule: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaircaseSection {
    #[serde(rename = "K")]
    pub k_slope: f64,
    pub eps: f64,
    /// Defaults to `2·max(sup|f′|, |K|) + 1`.
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    /// dyadic or vdc.
    pub seq: String,
    /// `id` or a file of `x y dy` Hermite nodes.
    pub f: String,
    /// harmonic or geometric.
    pub budget: String,
    pub report_grid: usize,
    pub quad_points: usize,
    /// Rows of the `(x, f_N, f_N′)` table.
    pub plot_samples: usize,
}

impl Default for StaircaseSection {
    fn default() -> Self {
        StaircaseSection {
            k_slope: 0.0,
            eps: 1e-4,
            l: None,
            n: 200,
            seq: "dyadic".into(),
            f: "id".into(),
            budget: "harmonic".into(),
            report_grid: 4097,
            quad_points: 8,
            plot_samples: 2001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub mu: f64,
    pub eps: f64,
    pub bump: f64,
    pub samples: usize,
    pub seed: u64,
    pub delta_schedule: Option<Vec<f64>>,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection { mu: 2.0, eps: 0.1, bump: 1.0, samples: 4096, seed: 0x5eed, delta_schedule: None }
    }
}

/// Overrides of the certification grid; absent fields keep the command's own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_samples: Option<usize>,
    pub t_samples: Option<usize>,
    pub refine: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// CSV table; standard output when absent.
    pub table: Option<String>,
    /// JSON report; standard output when absent.
    pub report: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<TangentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setcutoff: Option<SetcutoffSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glue: Option<GlueSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staircase: Option<StaircaseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn single(message: impl Into<String>) -> Self {
        ConfigError { issues: vec![ConfigIssue { line: None, key: None, message: message.into() }] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match (&issue.line, &issue.key) {
                (Some(l), Some(k)) => write!(f, "line {l}: `{k}`: {}", issue.message)?,
                (Some(l), None) => write!(f, "line {l}: {}", issue.message)?,
                (None, Some(k)) => write!(f, "`{k}`: {}", issue.message)?,
                (None, None) => write!(f, "{}", issue.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// A config for `command` with that command's section at its defaults.
    pub fn new(command: Command) -> Self {
        let mut c = RunConfig {
            command,
            cutoff: None,
            tangent: None,
            cover: None,
            setcutoff: None,
            glue: None,
            staircase: None,
            curve: None,
            grid: GridSection::default(),
            output: OutputSection::default(),
        };
        c.fill_defaults();
        c
    }

    /// Inserts the default section for the command when the document omitted it.
    pub fn fill_defaults(&mut self) {
        match self.command {
            Command::Cutoff => drop(self.cutoff.get_or_insert_with(Default::default)),
            Command::Tangent => drop(self.tangent.get_or_insert_with(Default::default)),
            Command::Cover => drop(self.cover.get_or_insert_with(Default::default)),
            Command::Setcutoff => drop(self.setcutoff.get_or_insert_with(Default::default)),
            Command::Glue => drop(self.glue.get_or_insert_with(Default::default)),
            Command::Staircase => drop(self.staircase.get_or_insert_with(Default::default)),
            Command::Curve => drop(self.curve.get_or_insert_with(Default::default)),
        }
    }

    fn present_sections(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut add = |present: bool, name| {
            if present {
                v.push(name)
            }
        };
        add(self.cutoff.is_some(), "cutoff");
        add(self.tangent.is_some(), "tangent");
        add(self.cover.is_some(), "cover");
        add(self.setcutoff.is_some(), "setcutoff");
        add(self.glue.is_some(), "glue");
        add(self.staircase.is_some(), "staircase");
        add(self.curve.is_some(), "curve");
        v
    }

    /// Range checks, as `(section, key, message)`.
    pub fn validate(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        let mut bad = |section: &str, key: &str, message: String| {
            out.push((section.to_string(), key.to_string(), message));
        };
        let delta_msg = |d: f64| format!("δ = {d} is outside (0, 1/4); the cutoff τ_(δ,ε) needs 0 < δ < 1/4");
        let unit = |v: f64| v > 0.0 && v < 1.0;
        for s in self.present_sections() {
            if s != self.command.name() {
                bad(s, "", format!("section [{s}] does not apply to command `{}`", self.command.name()));
            }
        }
        if let Some(c) = &self.cutoff {
            if !(c.delta > 0.0 && c.delta < 0.25) {
                bad("cutoff", "delta", delta_msg(c.delta));
            }
            if !unit(c.eps) {
                bad("cutoff", "eps", format!("ε = {} is outside (0, 1)", c.eps));
            }
            if c.order > 6 {
                bad("cutoff", "order", format!("order {} exceeds the jet truncation 6", c.order));
            }
            if c.samples < 2 {
                bad("cutoff", "samples", "need at least 2 samples".into());
            }
        }
        if let Some(t) = &self.tangent {
            if t.samples < 2 {
                bad("tangent", "samples", "need at least 2 samples".into());
            }
            if let Some(r) = &t.radii {
                if r.is_empty() || r.iter().any(|&x| !(x > 0.0)) {
                    bad("tangent", "radii", "radii must be a nonempty list of positive numbers".into());
                }
            }
        }
        if let Some(c) = &self.cover {
            if !(c.eps > 0.0) {
                bad("cover", "eps", format!("ε = {} must be positive", c.eps));
            }
        }
        if let Some(s) = &self.setcutoff {
            if !(s.delta > 0.0 && s.delta < 0.25) {
                bad("setcutoff", "delta", delta_msg(s.delta));
            }
            if !unit(s.lambda) {
                bad("setcutoff", "lambda", format!("Λ = {} is outside (0, 1)", s.lambda));
            }
            if s.order > 6 {
                bad("setcutoff", "order", format!("order {} exceeds the jet truncation 6", s.order));
            }
            if !(s.k_halfwidth > 0.0 && s.u_halfwidth > s.k_halfwidth) {
                bad("setcutoff", "u_halfwidth", "need 0 < k_halfwidth < u_halfwidth".into());
            }
            if s.grid < 2 {
                bad("setcutoff", "grid", "need at least 2 grid points per axis".into());
            }
        }
        if let Some(g) = &self.glue {
            if !["staircase-step", "remark32", "remark33"].contains(&g.fixture.as_str()) {
                bad("glue", "fixture", format!("unknown fixture `{}` (staircase-step, remark32, remark33)", g.fixture));
            }
            if let Some(d) = &g.delta_schedule {
                if let Some(&x) = d.iter().find(|&&x| !(x > 0.0 && x < 0.25)) {
                    bad("glue", "delta_schedule", delta_msg(x));
                }
            }
            if let Some(e) = &g.eps_schedule {
                if e.is_empty() || e.iter().any(|&x| !(x > 0.0)) {
                    bad("glue", "eps_schedule", "ε schedule must be a nonempty list of positive numbers".into());
                }
            }
        }
        if let Some(s) = &self.staircase {
            if !(s.eps > 0.0) {
                bad("staircase", "eps", format!("ε = {} must be positive", s.eps));
            }
            if s.n < 1 {
                bad("staircase", "N", "N must be at least 1".into());
            }
            if !s.k_slope.is_finite() {
                bad("staircase", "K", "K must be finite".into());
            }
            if s.seq.parse::<crate::staircase::SequenceKind>().is_err() {
                bad("staircase", "seq", format!("unknown sequence `{}` (dyadic, vdc)", s.seq));
            }
            if s.budget.parse::<crate::staircase::BudgetRule>().is_err() {
                bad("staircase", "budget", format!("unknown budget rule `{}` (harmonic, geometric)", s.budget));
            }
            if s.report_grid < 2 || s.plot_samples < 2 || s.quad_points < 1 {
                bad("staircase", "report_grid", "grids need at least 2 points and quadrature at least 1".into());
            }
        }
        if let Some(c) = &self.curve {
            if !(c.mu > 1.0) || !c.mu.is_finite() {
                bad("curve", "mu", format!("μ = {} must be > 1", c.mu));
            }
            if !(c.eps >= 0.0 && c.eps < 1.0) {
                bad("curve", "eps", format!("ε = {} is outside [0, 1)", c.eps));
            }
            if !(c.bump > 0.0 && c.bump < std::f64::consts::FRAC_PI_2) {
                bad("curve", "bump", format!("bump half-width {} is outside (0, π/2)", c.bump));
            }
            if c.samples < 8 {
                bad("curve", "samples", "need at least 8 samples".into());
            }
            if let Some(d) = &c.delta_schedule {
                if let Some(&x) = d.iter().find(|&&x| !(x > 0.0 && x < 0.25)) {
                    bad("curve", "delta_schedule", delta_msg(x));
                }
            }
        }
        if self.grid.x_samples.is_some_and(|n| n < 2) || self.grid.t_samples.is_some_and(|n| n < 2) {
            bad("grid", "x_samples", "grids need at least 2 samples".into());
        }
        out
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]`, or of the section header when `key` is empty.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a TOML run configuration. Unknown keys, duplicate keys and
/// out-of-range values are reported with line numbers.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        issues: vec![ConfigIssue {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            key: None,
            message: e.message().trim().to_string(),
        }],
    })?;
    let issues: Vec<ConfigIssue> = cfg
        .validate()
        .into_iter()
        .map(|(section, key, message)| ConfigIssue {
            line: locate(text, &section, &key),
            key: (!key.is_empty()).then(|| format!("{section}.{key}")),
            message,
        })
        .collect();
    if !issues.is_empty() {
        return Err(ConfigError { issues });
    }
    cfg.fill_defaults();
    Ok(cfg)
}
