//! Dense staircase: starting from a C¹ function on [0,1], glue in affine pieces of slope `K`
//! around the points of a dense sequence, one step at a time, with per-step budgets.

use crate::cutoff::Cutoff;
use crate::flexcore::{
    calibrate, AffineMap, CalibrationFailure, Domain, GlueProblem, GridSpec, JetMap, Schedule, StepRelation,
    StraightLine, V0,
};
use crate::jet::Jet;
use crate::multijet::MultiJet;
use crate::quad::{gauss_integrate, gauss_legendre};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StaircaseError {
    #[error("invalid staircase configuration: {0}")]
    Config(String),
    #[error("bad piecewise-cubic spec at line {line}: {message}")]
    Spline { line: usize, message: String },
    #[error("step {nu} at p = {p}: calibration failed ({attempts} support sizes tried, last h = {h:e})")]
    StepFailed { nu: usize, p: f64, h: f64, attempts: usize, failure: Box<CalibrationFailure> },
    #[error("step {nu} at p = {p}: support half-width {h:e} fell below floating-point resolution (budget {budget:e})")]
    Resolution { nu: usize, p: f64, h: f64, budget: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Dyadic,
    Vdc,
}

impl std::str::FromStr for SequenceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dyadic" => Ok(SequenceKind::Dyadic),
            "vdc" | "van-der-corput" => Ok(SequenceKind::Vdc),
            other => Err(format!("unknown sequence `{other}` (expected dyadic or vdc)")),
        }
    }
}

/// First `n` points of the chosen enumeration of the dyadic rationals in (0,1).
pub fn dense_sequence(kind: SequenceKind, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    match kind {
        SequenceKind::Dyadic => {
            let mut level = 1u32;
            while out.len() < n {
                let denom = (1u64 << level) as f64;
                let mut k = 1u64;
                while k < (1u64 << level) && out.len() < n {
                    out.push(k as f64 / denom);
                    k += 2;
                }
                level += 1;
            }
        }
        SequenceKind::Vdc => {
            for i in 1..=n as u64 {
                let (mut v, mut bit, mut m) = (0.0, 0.5, i);
                while m > 0 {
                    if m & 1 == 1 {
                        v += bit;
                    }
                    bit /= 2.0;
                    m >>= 1;
                }
                out.push(v);
            }
        }
    }
    out
}

/// Cubic Hermite interpolant through `(x, y, y′)` nodes, extended affinely past the end nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteSpline {
    nodes: Vec<(f64, f64, f64)>,
}

impl HermiteSpline {
    pub fn new(nodes: Vec<(f64, f64, f64)>) -> Result<Self, StaircaseError> {
        if nodes.len() < 2 {
            return Err(StaircaseError::Config("a piecewise cubic needs at least two nodes".into()));
        }
        if nodes.iter().any(|&(x, y, d)| !(x.is_finite() && y.is_finite() && d.is_finite())) {
            return Err(StaircaseError::Config("non-finite spline node".into()));
        }
        if nodes.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(StaircaseError::Config("spline nodes must be strictly increasing in x".into()));
        }
        if nodes[0].0 > 0.0 || nodes[nodes.len() - 1].0 < 1.0 {
            return Err(StaircaseError::Config("spline nodes must cover [0, 1]".into()));
        }
        Ok(HermiteSpline { nodes })
    }

    /// One node per line, `x y dy`, whitespace-separated; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, StaircaseError> {
        let mut nodes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            match vals {
                Ok(v) if v.len() == 3 => nodes.push((v[0], v[1], v[2])),
                Ok(v) => {
                    return Err(StaircaseError::Spline {
                        line: i + 1,
                        message: format!("expected 3 numbers, found {}", v.len()),
                    })
                }
                Err(e) => return Err(StaircaseError::Spline { line: i + 1, message: e.to_string() }),
            }
        }
        HermiteSpline::new(nodes).map_err(|e| match e {
            StaircaseError::Config(m) => StaircaseError::Spline { line: 0, message: m },
            other => other,
        })
    }

    pub fn nodes(&self) -> &[(f64, f64, f64)] {
        &self.nodes
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        let n = self.nodes.len();
        let (x0, y0, d0) = self.nodes[0];
        let (xn, yn, dn) = self.nodes[n - 1];
        if x < x0 {
            return affine_jet(x, x0, y0, d0, order);
        }
        if x >= xn {
            return affine_jet(x, xn, yn, dn, order);
        }
        let i = self.nodes.partition_point(|node| node.0 <= x) - 1;
        let (xa, ya, da) = self.nodes[i];
        let (xb, yb, db) = self.nodes[i + 1];
        let w = xb - xa;
        let s = (Jet::variable(x, order) - xa) / w;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = s3 * 2.0 - s2 * 3.0 + 1.0;
        let h10 = s3 - s2 * 2.0 + s;
        let h01 = s2 * 3.0 - s3 * 2.0;
        let h11 = s3 - s2;
        h00 * ya + h10 * (w * da) + h01 * yb + h11 * (w * db)
    }

    fn max_abs_slope(&self) -> f64 {
        // |p′| on each cubic piece is maximal at an end or at the vertex of the quadratic p′.
        let mut m = 0.0f64;
        for w in self.nodes.windows(2) {
            let (xa, xb) = (w[0].0, w[1].0);
            m = m.max(w[0].2.abs()).max(w[1].2.abs());
            let d = |x: f64| self.jet(x, 2);
            let (ja, jb) = (d(xa), d(xb));
            let (s_a, s_b) = (ja.deriv(2), jb.deriv(2));
            if s_a != s_b {
                let xv = xa + (xb - xa) * s_a / (s_a - s_b);
                if xv > xa && xv < xb {
                    m = m.max(self.jet(xv, 1).deriv(1).abs());
                }
            }
        }
        m
    }
}

fn affine_jet(x: f64, x0: f64, y0: f64, slope: f64, order: usize) -> Jet {
    let mut c = [0.0; 7];
    c[0] = y0 + slope * (x - x0);
    if order >= 1 {
        c[1] = slope;
    }
    Jet::from_taylor(&c[..=order])
}

/// The input function `f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseFunction {
    Identity,
    Cubic { spline: HermiteSpline },
}

impl BaseFunction {
    pub fn jet(&self, x: f64, order: usize) -> Jet {
        match self {
            BaseFunction::Identity => Jet::variable(x, order),
            BaseFunction::Cubic { spline } => spline.jet(x, order),
        }
    }

    /// `sup |f′|` over [0,1].
    pub fn max_abs_slope(&self) -> f64 {
        match self {
            BaseFunction::Identity => 1.0,
            BaseFunction::Cubic { spline } => spline.max_abs_slope(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            BaseFunction::Identity => Vec::new(),
            BaseFunction::Cubic { spline } => spline.nodes.iter().map(|n| n.0).collect(),
        }
    }
}

impl JetMap for BaseFunction {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        vec![MultiJet::from_jet(&self.jet(x[0], order))]
    }
}

/// `γ(x) = f_prev(p) + K·(x − p)`.
pub fn affine_target(f_prev: &dyn JetMap, p: f64, k: f64) -> AffineMap {
    AffineMap { p, value: f_prev.eval(&[p], 0)[0].value(), slope: k }
}

/// Sorted union of disjoint open intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn insert(&mut self, lo: f64, hi: f64) {
        let mut lo = lo;
        let mut hi = hi;
        let mut kept = Vec::with_capacity(self.intervals.len() + 1);
        for &(a, b) in &self.intervals {
            if b < lo || a > hi {
                kept.push((a, b));
            } else {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        let at = kept.partition_point(|iv| iv.0 < lo);
        kept.insert(at, (lo, hi));
        self.intervals = kept;
    }

    fn locate(&self, x: f64) -> Option<(f64, f64)> {
        let i = self.intervals.partition_point(|iv| iv.0 <= x);
        (i > 0).then(|| self.intervals[i - 1]).filter(|iv| x <= iv.1)
    }

    pub fn contains_open(&self, x: f64) -> bool {
        self.locate(x).is_some_and(|(a, b)| a < x && x < b)
    }

    pub fn closure_contains(&self, x: f64) -> bool {
        self.locate(x).is_some()
    }

    /// Distance from `x` to the union (0 inside its closure, ∞ if empty).
    pub fn distance(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| {
                if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// One glued step `f_ν = f_{ν−1} + τ·(γ − f_{ν−1})` around `p`.
#[derive(Clone, Debug, Serialize)]
pub struct GluedStep {
    pub nu: usize,
    pub p: f64,
    /// Half-width of `U_p`.
    pub h: f64,
    pub delta: f64,
    /// Cutoff support radius `ε_c`.
    pub radius: f64,
    pub target: AffineTarget,
    pub margin: f64,
    pub budget: f64,
    /// `sup |f_ν − f_{ν−1}|` on the step's grid.
    pub max_change: f64,
    #[serde(skip)]
    cutoff: Cutoff,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineTarget {
    pub value: f64,
    pub slope: f64,
}

impl GluedStep {
    pub fn plateau(&self) -> (f64, f64) {
        let r = self.cutoff.plateau_radius();
        (self.p - r, self.p + r)
    }

    fn target_jet(&self, x: f64, order: usize) -> Jet {
        affine_jet(x, self.p, self.target.value, self.target.slope, order)
    }

    /// Jet of `τ(|x − p|)` in `x`.
    fn tau(&self, x: f64, order: usize) -> Jet {
        let t = self.cutoff.eval((x - self.p).abs(), order);
        if x >= self.p {
            t
        } else {
            let c: Vec<f64> = t.taylor().iter().enumerate().map(|(i, &v)| if i % 2 == 1 { -v } else { v }).collect();
            Jet::from_taylor(&c)
        }
    }
}

/// What happened at one point of the sequence.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRecord {
    Glued {
        nu: usize,
        p: f64,
        step: usize,
        attempts: usize,
    },
    /// `p` already lay in the closure of the frozen region; `boundary` flags the endpoint case.
    Skipped {
        nu: usize,
        p: f64,
        boundary: bool,
    },
}

/// `f_N` as a closure composition of glued steps over the base function.
#[derive(Clone, Debug, Serialize)]
pub struct PiecewiseGlued {
    pub base: BaseFunction,
    pub k_slope: f64,
    pub steps: Vec<GluedStep>,
    pub frozen: IntervalUnion,
    pub records: Vec<StepRecord>,
    /// Step indices sorted by the left end of their support.
    #[serde(skip)]
    by_left: Vec<usize>,
    #[serde(skip)]
    max_radius: f64,
}

impl PiecewiseGlued {
    pub fn new(base: BaseFunction, k_slope: f64) -> Self {
        PiecewiseGlued {
            base,
            k_slope,
            steps: Vec::new(),
            frozen: IntervalUnion::default(),
            records: Vec::new(),
            by_left: Vec::new(),
            max_radius: 0.0,
        }
    }

    /// Steps whose open support contains `x`, in gluing order.
    pub fn steps_at(&self, x: f64) -> Vec<usize> {
        let lo = self.by_left.partition_point(|&i| self.steps[i].p - self.steps[i].radius <= x - 2.0 * self.max_radius);
        let hi = self.by_left.partition_point(|&i| self.steps[i].p - self.steps[i].radius < x);
        let mut out: Vec<usize> = self.by_left[lo..hi]
            .iter()
            .copied()
            .filter(|&i| (x - self.steps[i].p).abs() < self.steps[i].radius)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn jet(&self, x: f64, order: usize) -> Jet {
        let mut f = self.base.jet(x, order);
        for i in self.steps_at(x) {
            f = self.apply_step(&self.steps[i], x, f, order);
        }
        f
    }

    fn apply_step(&self, s: &GluedStep, x: f64, f: Jet, order: usize) -> Jet {
        let r = (x - s.p).abs();
        if r >= s.radius {
            return f;
        }
        if r <= s.cutoff.plateau_radius() {
            return s.target_jet(x, order);
        }
        let tau = s.tau(x, order);
        f + tau * (s.target_jet(x, order) - f)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.jet(x, 1).deriv(1)
    }

    fn push_step(&mut self, step: GluedStep) {
        self.max_radius = self.max_radius.max(step.radius);
        let (lo, hi) = step.plateau();
        self.frozen.insert(lo, hi);
        self.steps.push(step);
        let idx = self.steps.len() - 1;
        let left = |i: usize| self.steps[i].p - self.steps[i].radius;
        let at = self.by_left.partition_point(|&i| left(i) <= left(idx));
        self.by_left.insert(at, idx);
    }

    /// Breakpoints of the piecewise description: support ends, collar ends and a geometric
    /// refinement of the logarithmic region of every cutoff.
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0, 1.0];
        b.extend(self.base.breakpoints().into_iter().filter(|x| (0.0..=1.0).contains(x)));
        for s in &self.steps {
            let de = s.cutoff.plateau_radius();
            let mut radii = vec![s.radius, 0.9 * s.radius, 0.5 * s.radius, de, 1.1 * de];
            let mut r = 0.5 * s.radius;
            while r > 1.1 * de {
                radii.push(r);
                r /= 2.0;
            }
            for r in radii {
                b.push(s.p - r);
                b.push(s.p + r);
            }
        }
        b.retain(|x| (0.0..=1.0).contains(x));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

impl JetMap for PiecewiseGlued {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        vec![MultiJet::from_jet(&self.jet(x[0], order))]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetRule {
    /// `b_ν = ε/(ν(ν+1))`, summing to `ε·N/(N+1)`.
    Harmonic,
    /// `b_ν = ε·2^{−ν}`, summing to `ε·(1 − 2^{−N})`.
    Geometric,
}

impl BudgetRule {
    pub fn budget(self, eps: f64, nu: usize) -> f64 {
        match self {
            BudgetRule::Harmonic => eps / (nu as f64 * (nu as f64 + 1.0)),
            BudgetRule::Geometric => eps * 0.5f64.powi(nu as i32),
        }
    }

    /// `Σ_{ν ≤ N} b_ν`.
    pub fn total(self, eps: f64, n: usize) -> f64 {
        match self {
            BudgetRule::Harmonic => eps * n as f64 / (n as f64 + 1.0),
            BudgetRule::Geometric => eps * (1.0 - 0.5f64.powi(n as i32)),
        }
    }
}

impl std::str::FromStr for BudgetRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "harmonic" => Ok(BudgetRule::Harmonic),
            "geometric" => Ok(BudgetRule::Geometric),
            other => Err(format!("unknown budget rule `{other}` (expected harmonic or geometric)")),
        }
    }
}

/// Per-step gluing parameters.
#[derive(Clone, Debug)]
pub struct StepParams {
    pub l: f64,
    pub deltas: Vec<f64>,
    pub grid: GridSpec,
    /// Calibration attempts (each halving `h`) once the budget check passes.
    pub max_attempts: usize,
}

impl StepParams {
    pub fn new(l: f64) -> Self {
        StepParams {
            l,
            deltas: (0..12).map(|i| 0.1 * 0.1f64.powi(i)).collect(),
            grid: GridSpec { x_samples: 512, t_samples: 16, refine: false },
            max_attempts: 4,
        }
    }
}

/// `h` may not drop below this many ulps of `p`.
const RESOLUTION_ULPS: f64 = 1e6;
const BUDGET_GRID: usize = 256;

fn ulp(x: f64) -> f64 {
    let x = x.abs().max(f64::MIN_POSITIVE);
    f64::from_bits(x.to_bits() + 1) - x
}

impl PiecewiseGlued {
    /// Process the `nu`-th point with budget `budget`.
    pub fn step(&mut self, nu: usize, p: f64, budget: f64, params: &StepParams) -> Result<StepRecord, StaircaseError> {
        if !(budget > 0.0) {
            return Err(StaircaseError::Config(format!("budget must be positive, got {budget}")));
        }
        if self.frozen.closure_contains(p) {
            let rec = StepRecord::Skipped { nu, p, boundary: !self.frozen.contains_open(p) };
            self.records.push(rec.clone());
            return Ok(rec);
        }
        let prev = Arc::new(self.clone());
        let target = affine_target(prev.as_ref(), p, self.k_slope);
        let mut h = 0.5 * self.frozen.distance(p).min(p).min(1.0 - p);
        let mut attempts = 0;
        loop {
            if h < RESOLUTION_ULPS * ulp(p) {
                return Err(StaircaseError::Resolution { nu, p, h, budget });
            }
            let gap = (0..=BUDGET_GRID)
                .map(|i| {
                    let x = p - h + 2.0 * h * i as f64 / BUDGET_GRID as f64;
                    (target.value + target.slope * (x - p) - prev.value(x)).abs()
                })
                .fold(0.0, f64::max);
            if !(gap < budget) {
                h /= 2.0;
                continue;
            }
            attempts += 1;
            let family = StraightLine { from: prev.as_ref(), to: &target, domain: Domain::interval(p - h, p + h) };
            let relation = StepRelation { l: params.l, reference: prev.clone(), budget };
            let problem = GlueProblem {
                f0: prev.as_ref(),
                family: &family,
                relation: &relation,
                v0: V0::finite(vec![vec![p]]),
                k: 1,
            };
            let schedule = Schedule { deltas: params.deltas.clone(), eps: vec![h] };
            match calibrate(&problem, &schedule, &params.grid) {
                Ok(out) => {
                    let radius = out.radii[0];
                    let mut step = GluedStep {
                        nu,
                        p,
                        h,
                        delta: out.delta,
                        radius,
                        target: AffineTarget { value: target.value, slope: target.slope },
                        margin: out.report.min_margin,
                        budget,
                        max_change: 0.0,
                        cutoff: Cutoff::unchecked(out.delta, radius),
                    };
                    step.max_change = (0..=BUDGET_GRID)
                        .map(|i| {
                            let x = p - radius + 2.0 * radius * i as f64 / BUDGET_GRID as f64;
                            let before = prev.jet(x, 0);
                            (self.apply_step(&step, x, before, 0).value() - before.value()).abs()
                        })
                        .fold(0.0, f64::max);
                    self.push_step(step);
                    let rec = StepRecord::Glued { nu, p, step: self.steps.len() - 1, attempts };
                    self.records.push(rec.clone());
                    return Ok(rec);
                }
                Err(failure) if attempts >= params.max_attempts => {
                    return Err(StaircaseError::StepFailed { nu, p, h, attempts, failure: Box::new(failure) });
                }
                Err(_) => h /= 2.0,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StaircaseConfig {
    pub f: BaseFunction,
    pub k_slope: f64,
    pub eps: f64,
    /// Global slope bound; `None` picks `2·max(sup|f′|, |K|) + 1`.
    pub l: Option<f64>,
    pub sequence: SequenceKind,
    pub n: usize,
    pub budget: BudgetRule,
    pub grid: GridSpec,
    /// Uniform report grid on [0,1]; step supports get their own local grids on top.
    pub report_grid: usize,
    pub quad_points: usize,
}

impl StaircaseConfig {
    pub fn new(f: BaseFunction, k_slope: f64, eps: f64, n: usize) -> Self {
        StaircaseConfig {
            f,
            k_slope,
            eps,
            l: None,
            sequence: SequenceKind::Dyadic,
            n,
            budget: BudgetRule::Harmonic,
            grid: StepParams::new(1.0).grid,
            report_grid: 4097,
            quad_points: 8,
        }
    }

    pub fn slope_bound(&self) -> f64 {
        self.l.unwrap_or_else(|| 2.0 * self.f.max_abs_slope().max(self.k_slope.abs()) + 1.0)
    }

    pub fn validate(&self) -> Result<(), StaircaseError> {
        let l = self.slope_bound();
        let need = self.f.max_abs_slope().max(self.k_slope.abs());
        if !(l > need) {
            return Err(StaircaseError::Config(format!("L = {l} must exceed max(sup|f′|, |K|) = {need}")));
        }
        if !(self.eps > 0.0) {
            return Err(StaircaseError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.n < 1 {
            return Err(StaircaseError::Config("N must be at least 1".into()));
        }
        if !self.k_slope.is_finite() {
            return Err(StaircaseError::Config("K must be finite".into()));
        }
        if self.report_grid < 2 || self.quad_points < 1 {
            return Err(StaircaseError::Config("report grid and quadrature order must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepSummary {
    pub p: f64,
    pub h: f64,
    pub delta: f64,
    pub margin: f64,
    pub budget: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FtcReport {
    pub lhs: f64,
    pub rhs: f64,
    pub coverage: f64,
    pub plateau_contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseReport {
    pub n: usize,
    pub l: f64,
    pub sup_dist: f64,
    pub drift_bound: f64,
    pub slope_max: f64,
    pub slope_ok: bool,
    pub f_at_0: f64,
    pub f_at_1: f64,
    pub coverage: f64,
    pub integral_lhs: f64,
    pub integral_rhs: f64,
    pub plateau_contribution: f64,
    pub complement_contribution: f64,
    pub plateau_count: usize,
    pub plateaus: Vec<(f64, f64)>,
    /// Largest `|f_N′(x) − K|` and `|f_N″(x)|` over the processed points and plateau samples.
    pub plateau_defect: f64,
    pub points_covered: bool,
    pub boundary_skips: Vec<f64>,
    pub cauchy_ok: bool,
    pub per_step: Vec<StepSummary>,
}

/// Composite Gauss-Legendre quadrature of the exact derivative jets over [0,1], split at every
/// breakpoint of the piecewise description.
pub fn ftc_check(state: &PiecewiseGlued, quad_points: usize) -> FtcReport {
    let rule = gauss_legendre(quad_points.max(1));
    let b = state.breakpoints();
    let lhs: f64 = b.windows(2).map(|w| gauss_integrate(|x| state.slope(x), w[0], w[1], &rule)).sum();
    let rhs = state.value(1.0) - state.value(0.0);
    let coverage = state.frozen.intervals().iter().map(|&(a, b)| b.min(1.0) - a.max(0.0)).filter(|w| *w > 0.0).sum();
    FtcReport { lhs, rhs, coverage, plateau_contribution: state.k_slope * coverage }
}

/// Sample grid for reports: uniform on [0,1] plus a local grid on every step support.
fn report_grid(state: &PiecewiseGlued, uniform: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..uniform).map(|i| i as f64 / (uniform - 1) as f64).collect();
    for s in &state.steps {
        for i in 0..=64 {
            let u = -1.0 + 2.0 * i as f64 / 64.0;
            xs.push(s.p + u * s.radius);
        }
        let de = s.cutoff.plateau_radius();
        let mut r = s.radius;
        while r > de {
            xs.push(s.p - r);
            xs.push(s.p + r);
            r /= 1.5;
        }
    }
    xs.retain(|x| (0.0..=1.0).contains(x));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

pub fn build_report(state: &PiecewiseGlued, config: &StaircaseConfig) -> StaircaseReport {
    let l = config.slope_bound();
    let xs = report_grid(state, config.report_grid);
    let (mut sup_dist, mut slope_max) = (0.0f64, 0.0f64);
    for &x in &xs {
        let j = state.jet(x, 1);
        sup_dist = sup_dist.max((j.value() - config.f.jet(x, 0).value()).abs());
        slope_max = slope_max.max(j.deriv(1).abs());
    }
    let mut plateau_defect = 0.0f64;
    let mut probe = |x: f64| {
        let j = state.jet(x, 2);
        plateau_defect = plateau_defect.max((j.deriv(1) - state.k_slope).abs()).max(j.deriv(2).abs());
    };
    for s in &state.steps {
        let (a, b) = s.plateau();
        for i in 1..16 {
            probe(a + (b - a) * i as f64 / 16.0);
        }
    }
    let points: Vec<f64> = state
        .records
        .iter()
        .map(|r| match r {
            StepRecord::Glued { p, .. } | StepRecord::Skipped { p, .. } => *p,
        })
        .collect();
    for &p in &points {
        probe(p);
    }
    let boundary_skips: Vec<f64> = state
        .records
        .iter()
        .filter_map(|r| match r {
            StepRecord::Skipped { p, boundary: true, .. } => Some(*p),
            _ => None,
        })
        .collect();
    let points_covered = points.iter().all(|&p| state.frozen.contains_open(p) || boundary_skips.contains(&p));
    let ftc = ftc_check(state, config.quad_points);
    StaircaseReport {
        n: config.n,
        l,
        sup_dist,
        drift_bound: config.budget.total(config.eps, config.n),
        slope_max,
        slope_ok: slope_max <= l,
        f_at_0: state.value(0.0),
        f_at_1: state.value(1.0),
        coverage: ftc.coverage,
        integral_lhs: ftc.lhs,
        integral_rhs: ftc.rhs,
        plateau_contribution: ftc.plateau_contribution,
        complement_contribution: ftc.lhs - ftc.plateau_contribution,
        plateau_count: state.frozen.intervals().len(),
        plateaus: state.frozen.intervals().to_vec(),
        plateau_defect,
        points_covered,
        boundary_skips,
        cauchy_ok: state.steps.iter().all(|s| s.max_change < s.budget),
        per_step: state
            .steps
            .iter()
            .map(|s| StepSummary { p: s.p, h: s.h, delta: s.delta, margin: s.margin, budget: s.budget })
            .collect(),
    }
}

/// `N` sequential steps along the dense sequence, then the report.
pub fn run(config: &StaircaseConfig) -> Result<(PiecewiseGlued, StaircaseReport), StaircaseError> {
    config.validate()?;
    let mut params = StepParams::new(config.slope_bound());
    params.grid = config.grid.clone();
    let mut state = PiecewiseGlued::new(config.f.clone(), config.k_slope);
    for (i, p) in dense_sequence(config.sequence, config.n).into_iter().enumerate() {
        let nu = i + 1;
        state.step(nu, p, config.budget.budget(config.eps, nu), &params)?;
    }
    let report = build_report(&state, config);
    Ok((state, report))
}
