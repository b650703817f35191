//! Executes a [`RunConfig`] and renders the result as a JSON report plus an optional CSV table.

use crate::config::{Command, ConfigError, GridSection, RunConfig};
use crate::convexcurve::{self, CurveError, CurveParams};
use crate::cutoff::{certify_tau_bounds, Cutoff};
use crate::flexcore::{calibrate, fixtures, GridSpec, JetMap, Schedule};
use crate::staircase::{self, BaseFunction, HermiteSpline, StaircaseConfig, StaircaseError};
use crate::tangent::{
    covering_net, default_radii, estimate_tangent, set_cutoff, AxisBox, Descriptor, SampledSet, TangentError,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

/// Failures that stop a run before it produces a report (exit status 2).
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub version: &'static str,
    /// The configuration after defaults were filled in.
    pub input: Value,
    pub certified: bool,
    pub result: Value,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub table: Option<Table>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.certified {
            0
        } else {
            1
        }
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes the table and the report to their files, or to `stdout` (table first) when a path is absent.
    pub fn emit(&self, table: Option<&Path>, report: Option<&Path>, stdout: &mut dyn Write) -> io::Result<()> {
        if let Some(t) = &self.table {
            match table {
                Some(p) => std::fs::write(p, t.to_csv())?,
                None => stdout.write_all(t.to_csv().as_bytes())?,
            }
        }
        match report {
            Some(p) => std::fs::write(p, self.report_json())?,
            None => stdout.write_all(self.report_json().as_bytes())?,
        }
        stdout.flush()
    }
}

fn grid_note(x: usize, t: usize) -> String {
    format!("margins were checked on a finite grid ({x} x-samples × {t} t-samples per candidate); this is numerical evidence, not a proof")
}

fn apply_grid(mut g: GridSpec, o: &GridSection) -> GridSpec {
    if let Some(x) = o.x_samples {
        g.x_samples = x;
    }
    if let Some(t) = o.t_samples {
        g.t_samples = t;
    }
    if let Some(r) = o.refine {
        g.refine = r;
    }
    g
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// A named set sampled `samples` times over `[−1, 1]²`, or a file with one point per line.
pub fn load_set(spec: &str, samples: usize) -> Result<SampledSet, RunError> {
    if let Some(d) = Descriptor::by_name(spec) {
        return Ok(SampledSet::from_descriptor(d, samples));
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| RunError::Input(format!("set `{spec}` is neither a known set nor a readable file: {e}")))?;
    let mut pts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Input(format!("{spec}: line {}: {e}", i + 1)))?;
        pts.push(p);
    }
    SampledSet::new(pts).map_err(|e| RunError::Input(format!("{spec}: {e}")))
}

/// Runs the configured command. Numerical failures produce an uncertified report, not an error.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(ConfigError {
            issues: errs
                .into_iter()
                .map(|(s, k, message)| crate::config::ConfigIssue {
                    line: None,
                    key: (!k.is_empty()).then(|| format!("{s}.{k}")),
                    message,
                })
                .collect(),
        }
        .into());
    }
    let mut cfg = cfg.clone();
    cfg.fill_defaults();
    let mut input = to_value(&cfg);
    if let Value::Object(m) = &mut input {
        m.remove("output");
    }
    let (certified, result, table, notes) = match cfg.command {
        Command::Cutoff => run_cutoff(&cfg)?,
        Command::Tangent => run_tangent(&cfg)?,
        Command::Cover => run_cover(&cfg)?,
        Command::Setcutoff => run_setcutoff(&cfg)?,
        Command::Glue => run_glue(&cfg)?,
        Command::Staircase => run_staircase(&cfg)?,
        Command::Curve => run_curve(&cfg)?,
    };
    Ok(RunOutput {
        report: RunReport {
            command: cfg.command.name(),
            version: env!("CARGO_PKG_VERSION"),
            input,
            certified,
            result,
            notes,
            wall_clock_s: None,
        },
        table,
    })
}

type Outcome = (bool, Value, Option<Table>, Vec<String>);

fn run_cutoff(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.cutoff.as_ref().expect("section filled");
    let c = Cutoff::new(s.delta, s.eps).map_err(|e| RunError::Input(e.to_string()))?;
    let mut header = vec!["r".to_string(), "tau".to_string()];
    header.extend((1..=s.order).map(|k| format!("d{k}")));
    let mut table = Table { header, rows: Vec::with_capacity(s.samples) };
    let (lo, hi) = ((s.delta * s.eps / 2.0).ln(), (2.0 * s.eps).ln());
    let (mut range_ok, mut monotone_ok, mut finite) = (true, true, true);
    let mut prev = f64::INFINITY;
    for i in 0..s.samples {
        let r = (lo + (hi - lo) * i as f64 / (s.samples - 1) as f64).exp();
        let j = c.eval(r, s.order);
        let mut row = vec![r, j.value()];
        row.extend((1..=s.order).map(|k| j.deriv(k)));
        range_ok &= (0.0..=1.0).contains(&j.value());
        monotone_ok &= j.value() <= prev;
        finite &= row.iter().all(|v| v.is_finite());
        prev = j.value();
        table.rows.push(row);
    }
    let mut result = json!({
        "delta": s.delta,
        "eps": s.eps,
        "plateau_radius": c.plateau_radius(),
        "range_ok": range_ok,
        "monotone_ok": monotone_ok,
        "finite": finite,
    });
    if s.certify && s.order >= 1 {
        let b =
            certify_tau_bounds(s.order, &[s.delta], &[s.eps], s.samples).map_err(|e| RunError::Input(e.to_string()))?;
        range_ok &= b.range_ok;
        monotone_ok &= b.monotone_ok;
        finite &= b.finite;
        result["bounds"] = to_value(&b.entries);
        result["C_hat"] = to_value(&b.c_hat);
    }
    let notes = vec![format!("bounds are suprema over {} log-spaced radii in [δε/2, 2ε]", s.samples)];
    Ok((range_ok && monotone_ok && finite, result, Some(table), notes))
}

fn run_tangent(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.tangent.as_ref().expect("section filled");
    let set = load_set(&s.set, s.samples)?;
    let radii = s.radii.clone().unwrap_or_else(default_radii);
    match estimate_tangent(&set, &s.point, &radii) {
        Ok(e) => Ok((true, to_value(&e), None, vec![])),
        Err(e @ (TangentError::Inconclusive(_) | TangentError::NoNeighbors)) => {
            let per_radius = match &e {
                TangentError::Inconclusive(v) => to_value(v),
                _ => Value::Null,
            };
            Ok((false, json!({ "error": e.to_string(), "per_radius": per_radius, "radii": radii }), None, vec![]))
        }
        Err(e) => Err(RunError::Input(e.to_string())),
    }
}

fn run_cover(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.cover.as_ref().expect("section filled");
    let set = load_set(&s.set, s.samples)?;
    let net = covering_net(&set.points, s.eps);
    let axes = ["x", "y", "z"];
    let mut table = Table::new(&axes[..set.dim]);
    table.rows = net.centers.clone();
    let result = json!({
        "eps": net.eps,
        "samples": set.points.len(),
        "centers": net.centers.len(),
        "multiplicity": net.multiplicity,
        "multiplicity_bound": 10usize.pow(set.dim as u32),
        "multiplicity_ok": net.multiplicity_ok,
        "min_separation": net.min_separation,
        "max_cover_distance": net.max_cover_distance,
    });
    Ok((net.multiplicity_ok, result, Some(table), vec![]))
}

fn run_setcutoff(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.setcutoff.as_ref().expect("section filled");
    let set = load_set(&s.set, s.samples)?;
    let n = set.dim;
    let k: Vec<usize> =
        (0..set.points.len()).filter(|&i| set.points[i].iter().all(|x| x.abs() <= s.k_halfwidth)).collect();
    if k.is_empty() {
        return Err(RunError::Input(format!("no samples with |x|∞ ≤ {}", s.k_halfwidth)));
    }
    let u = AxisBox { lo: vec![-s.u_halfwidth; n], hi: vec![s.u_halfwidth; n] };
    let rho = match set_cutoff(&set, &k, &u, s.delta, s.lambda, s.order, &default_radii()) {
        Ok(rho) => rho,
        Err(e @ (TangentError::NoAdmissibleEps(_) | TangentError::Inconclusive(_) | TangentError::NoNeighbors)) => {
            return Ok((false, json!({ "error": e.to_string() }), None, vec![]))
        }
        Err(e) => return Err(RunError::Input(e.to_string())),
    };
    use crate::flexcore::CutoffField;
    let one_on_k = k.iter().all(|&i| rho.value(&set.points[i]) == 1.0);
    let inside_u = rho.support_balls().iter().all(|(c, r)| u.contains_ball(c, *r));
    let axes = ["x", "y", "z"];
    let mut header: Vec<&str> = axes[..n].to_vec();
    header.push("rho");
    let mut table = Table::new(&header);
    let g = s.grid;
    let total = g.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            x.push(-1.0 + 2.0 * (rem % g) as f64 / (g - 1) as f64);
            rem /= g;
        }
        x.reverse();
        let v = rho.value(&x);
        x.push(v);
        table.rows.push(x);
    }
    let layers: Vec<Value> = rho
        .layers
        .iter()
        .map(|l| json!({ "ell": l.ell, "eps": l.eps, "centers": l.centers.len(), "multiplicity": l.multiplicity }))
        .collect();
    let result = json!({
        "k_samples": k.len(),
        "centers": rho.center_count(),
        "layers": layers,
        "one_on_k": one_on_k,
        "support_inside_u": inside_u,
    });
    Ok((one_on_k && inside_u, result, Some(table), vec![]))
}

fn run_glue(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.glue.as_ref().expect("section filled");
    let fx =
        fixtures::by_name(&s.fixture).ok_or_else(|| RunError::Input(format!("unknown fixture `{}`", s.fixture)))?;
    let schedule = Schedule {
        deltas: s.delta_schedule.clone().unwrap_or_else(|| fx.schedule.deltas.clone()),
        eps: s.eps_schedule.clone().unwrap_or_else(|| fx.schedule.eps.clone()),
    };
    let grid = apply_grid(fx.grid.clone(), &cfg.grid);
    let notes = vec![grid_note(grid.x_samples, grid.t_samples)];
    match calibrate(&fx.problem(), &schedule, &grid) {
        Ok(o) => {
            let result = json!({ "fixture": fx.name, "schedule": schedule, "outcome": o });
            Ok((o.report.certified, result, None, notes))
        }
        Err(f) => {
            let result = json!({ "fixture": fx.name, "schedule": schedule, "failure": f });
            Ok((false, result, None, notes))
        }
    }
}

fn run_staircase(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.staircase.as_ref().expect("section filled");
    let f = if s.f == "id" {
        BaseFunction::Identity
    } else {
        let text = std::fs::read_to_string(&s.f).map_err(|e| RunError::Input(format!("{}: {e}", s.f)))?;
        let spline = HermiteSpline::parse(&text).map_err(|e| RunError::Input(format!("{}: {e}", s.f)))?;
        BaseFunction::Cubic { spline }
    };
    let mut sc = StaircaseConfig::new(f, s.k_slope, s.eps, s.n);
    sc.l = s.l;
    sc.sequence = s.seq.parse().map_err(RunError::Input)?;
    sc.budget = s.budget.parse().map_err(RunError::Input)?;
    sc.grid = apply_grid(sc.grid, &cfg.grid);
    sc.report_grid = s.report_grid;
    sc.quad_points = s.quad_points;
    let notes = vec![grid_note(sc.grid.x_samples, sc.grid.t_samples)];
    match staircase::run(&sc) {
        Ok((state, rep)) => {
            let mut table = Table::new(&["x", "f_N", "df_N"]);
            let m = s.plot_samples;
            table.rows = (0..m)
                .map(|i| {
                    let x = i as f64 / (m - 1) as f64;
                    vec![x, state.value(x), state.slope(x)]
                })
                .collect();
            let certified = rep.slope_ok && rep.cauchy_ok && rep.sup_dist < s.eps;
            Ok((certified, to_value(&rep), Some(table), notes))
        }
        Err(e @ (StaircaseError::Config(_) | StaircaseError::Spline { .. })) => Err(RunError::Input(e.to_string())),
        Err(e) => {
            let failure = match &e {
                StaircaseError::StepFailed { failure, .. } => to_value(failure),
                _ => Value::Null,
            };
            Ok((false, json!({ "error": e.to_string(), "failure": failure }), None, notes))
        }
    }
}

fn run_curve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let s = cfg.curve.as_ref().expect("section filled");
    let mut p = CurveParams::new(s.mu, s.eps);
    p.bump_halfwidth = s.bump;
    p.samples = s.samples;
    p.seed = s.seed;
    if let Some(d) = &s.delta_schedule {
        p.deltas = d.clone();
    }
    p.grid = apply_grid(p.grid, &cfg.grid);
    let notes = vec![grid_note(p.grid.x_samples, p.grid.t_samples)];
    let built = match convexcurve::build(&p) {
        Ok(b) => b,
        Err(CurveError::Param(m)) => return Err(RunError::Input(m)),
        Err(e) => {
            let failure = match &e {
                CurveError::Calibration(f) => to_value(f),
                _ => Value::Null,
            };
            return Ok((false, json!({ "error": e.to_string(), "failure": failure }), None, notes));
        }
    };
    let rep = convexcurve::convexity_report(&built);
    let tol = 1e-3;
    let certified = rep.kappa_min >= 1.0 - s.eps - tol
        && rep.kappa_min_arc >= s.mu - tol
        && rep.opposite_identical
        && rep.simple
        && rep.enclosing.ok;
    let mut table = Table::new(&["theta", "x", "y", "kappa"]);
    let at1 = built.at(1.0);
    table.rows = (0..s.samples)
        .map(|i| {
            let th = -PI + TAU * i as f64 / s.samples as f64;
            let j = at1.eval(&[th], 0);
            let k = convexcurve::curvature(&at1, th).unwrap_or(f64::NAN);
            vec![th, j[0].value(), j[1].value(), k]
        })
        .collect();
    Ok((certified, to_value(&rep), Some(table), notes))
}
