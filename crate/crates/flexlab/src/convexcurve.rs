//! Plane-curve convexity: push the curvature of the unit circle up to `μ` near `p = (1, 0)`
//! while keeping it above `1 − ε` everywhere and leaving the far semicircle untouched.

use crate::cutoff::smooth_step;
use crate::flexcore::{
    calibrate, glue, plane_curvature, radial_grid, CalibrationFailure, CalibrationOutcome, Curvature,
    DeformationFamily, Domain, FlexError, GlueProblem, GluedFamily, GridSpec, JetMap, Schedule, V0,
};
use crate::multijet::MultiJet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("invalid curve parameter: {0}")]
    Param(String),
    #[error("curve is not immersed at θ = {0}")]
    NotImmersed(f64),
    #[error("no monotone reparametrization found for μ = {mu} within the plateau schedule")]
    Monotonicity { mu: f64 },
    #[error("deformation family misses its curvature target by {0:e}")]
    FamilyConvexity(f64),
    #[error("calibration failed: {0:?}")]
    Calibration(Box<CalibrationFailure>),
    #[error(transparent)]
    Flex(#[from] FlexError),
}

/// `θ ↦ (cos θ, sin θ)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnitCircle;

impl JetMap for UnitCircle {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        let th = MultiJet::variable(1, order, 0, x[0]);
        vec![th.cos(), th.sin()]
    }
}

/// `θ ↦ (a cos θ, b sin θ)`; a circle of radius `r` is `Ellipse { a: r, b: r }`.
#[derive(Clone, Copy, Debug)]
pub struct Ellipse {
    pub a: f64,
    pub b: f64,
}

impl JetMap for Ellipse {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        let th = MultiJet::variable(1, order, 0, x[0]);
        vec![th.cos() * self.a, th.sin() * self.b]
    }
}

/// Signed curvature of a parametrized plane curve; counterclockwise circles are positive.
pub fn curvature(c: &dyn JetMap, theta: f64) -> Result<f64, CurveError> {
    let j = c.eval(&[theta], 2);
    plane_curvature(&j[0], &j[1]).ok_or(CurveError::NotImmersed(theta))
}

/// `Ψ(t)(θ) = θ + (λ(t) − 1)·θ·β(θ)` with `λ(t) = μ/(μ − (μ−1)t)`. The bump `β` is 1 on
/// `|θ| ≤ w₁`, 0 on `|θ| ≥ w`, and falls off in `ln|θ|` in between, so `θβ′` is bounded by
/// `max σ′ / ln(w/w₁)` and shrinking `w₁` makes every `Ψ(t)` monotone.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PsiFamily {
    pub mu: f64,
    pub halfwidth: f64,
    pub plateau: f64,
}

impl PsiFamily {
    /// `λ(t)` as a jet in whatever variables `t` carries.
    fn lambda(&self, t: &MultiJet) -> MultiJet {
        let denom = (t * (1.0 - self.mu)) + self.mu;
        denom.recip() * self.mu
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        self.mu / (self.mu - (self.mu - 1.0) * t)
    }

    fn beta(&self, th: &MultiJet) -> MultiJet {
        let a = th.value().abs();
        let (n, order) = (th.nvars(), th.order());
        if a <= self.plateau {
            return MultiJet::constant(n, order, 1.0);
        }
        if a >= self.halfwidth {
            return MultiJet::zero(n, order);
        }
        let r = if th.value() < 0.0 { -th } else { th.clone() };
        let v = (r * (1.0 / self.plateau)).ln() * (1.0 / (self.halfwidth / self.plateau).ln());
        -v.compose_jet(&smooth_step(v.value(), order)) + 1.0
    }

    /// `Ψ(t)` with `t` and `θ` given as jets.
    pub fn apply(&self, t: &MultiJet, th: &MultiJet) -> MultiJet {
        let stretch = self.lambda(t) + -1.0;
        th + &(&stretch * &(th * &self.beta(th)))
    }

    /// `min ∂_θΨ(t)(θ)` over a log-spaced `θ` grid on `(0, w)` and the given times (`Ψ` is odd in `θ`).
    pub fn min_derivative(&self, ts: &[f64]) -> f64 {
        let lo = (self.plateau / 2.0).ln();
        let hi = self.halfwidth.ln();
        let mut m = f64::INFINITY;
        for i in 0..=512 {
            let th = (lo + (hi - lo) * i as f64 / 512.0).exp();
            for &t in ts {
                let tj = MultiJet::constant(1, 1, t);
                let d = self.apply(&tj, &MultiJet::variable(1, 1, 0, th)).deriv(&[1]);
                m = m.min(d);
            }
        }
        m
    }
}

/// Builds `Ψ` with support half-width `w`, shrinking the plateau by 4× until every `Ψ(t)` is
/// monotone on the grid.
pub fn psi_family(mu: f64, bump_halfwidth: f64) -> Result<PsiFamily, CurveError> {
    if !(mu > 1.0) || !mu.is_finite() {
        return Err(CurveError::Param(format!("μ must be > 1, got {mu}")));
    }
    if !(bump_halfwidth > 0.0 && bump_halfwidth < FRAC_PI_2) {
        return Err(CurveError::Param(format!("bump half-width must lie in (0, π/2), got {bump_halfwidth}")));
    }
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    let mut plateau = bump_halfwidth / 4.0;
    for _ in 0..24 {
        let psi = PsiFamily { mu, halfwidth: bump_halfwidth, plateau };
        if psi.min_derivative(&ts) > 0.0 {
            return Ok(psi);
        }
        plateau /= 4.0;
    }
    Err(CurveError::Monotonicity { mu })
}

/// `F̃(t)(θ) = (1 − (μ−1)t/μ)·c(Ψ(t)(θ)) + ((μ−1)t/μ)·p` on the arc `|θ| < π/2`.
pub struct CurveFamily {
    pub psi: PsiFamily,
    domain: Domain,
}

pub fn deformation_family(psi: PsiFamily) -> CurveFamily {
    CurveFamily { psi, domain: Domain::interval(-FRAC_PI_2, FRAC_PI_2) }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FamilyCertificate {
    /// `max_t |F(t)(p) − p|`
    pub value_deviation: f64,
    /// `max_t |∂_θF(t)(p) − c′(0)|`
    pub slope_deviation: f64,
    /// `max |κ(F(t)) − λ(t)|` over the grid.
    pub convexity_defect: f64,
}

impl CurveFamily {
    fn combine(&self, t: &MultiJet, th: &MultiJet) -> Vec<MultiJet> {
        let mu = self.psi.mu;
        let s = t * ((mu - 1.0) / mu);
        let keep = -&s + 1.0;
        let psi = self.psi.apply(t, th);
        vec![&(&keep * &psi.cos()) + &s, &keep * &psi.sin()]
    }

    /// Frozen 1-jet at `p` and the curvature of every `F(t)` on a grid of the arc.
    pub fn certify(&self, ts: &[f64], samples: usize) -> FamilyCertificate {
        let mut cert = FamilyCertificate { value_deviation: 0.0, slope_deviation: 0.0, convexity_defect: 0.0 };
        for &t in ts {
            let j = self.eval(t, &[0.0], 1);
            let (x, y) = (j[0].drop_first_var(), j[1].drop_first_var());
            cert.value_deviation = cert.value_deviation.max((x.value() - 1.0).hypot(y.value()));
            cert.slope_deviation = cert.slope_deviation.max(x.deriv(&[1]).hypot(y.deriv(&[1]) - 1.0));
            let lambda = self.psi.lambda_at(t);
            for i in 1..samples {
                let th = -FRAC_PI_2 + PI * i as f64 / samples as f64;
                let j = self.eval(t, &[th], 2);
                let k = plane_curvature(&j[0].drop_first_var(), &j[1].drop_first_var()).unwrap_or(f64::NEG_INFINITY);
                cert.convexity_defect = cert.convexity_defect.max((k - lambda).abs());
            }
        }
        cert
    }
}

impl DeformationFamily for CurveFamily {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        2
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        let vars = MultiJet::variables(&[t, x[0]], order);
        self.combine(&vars[0], &vars[1])
    }
}

#[derive(Clone, Debug)]
pub struct CurveParams {
    pub mu: f64,
    pub eps: f64,
    pub bump_halfwidth: f64,
    pub deltas: Vec<f64>,
    /// Cutoff support radii as fractions of the plateau of `β`, where `F̃_t` is `O(θ²)`.
    pub support_fractions: Vec<f64>,
    pub grid: GridSpec,
    /// Polygon resolution for the simplicity, identity and enclosing checks.
    pub samples: usize,
    /// Seed of the shuffle in the enclosing-circle computation.
    pub seed: u64,
}

impl CurveParams {
    pub fn new(mu: f64, eps: f64) -> Self {
        CurveParams {
            mu,
            eps,
            bump_halfwidth: 1.0,
            // second-order jets of τ scale like (δε)^{-2}, which overflows below about 1e-154
            deltas: (1..=14).map(|i| 10f64.powi(-10 * i)).collect(),
            support_fractions: vec![1.0, 0.5],
            grid: GridSpec::default(),
            samples: 4096,
            seed: 0x5eed,
        }
    }
}

/// The glued curve family together with its calibration.
pub struct BuiltCurve {
    pub params: CurveParams,
    pub family: CurveFamily,
    pub certificate: FamilyCertificate,
    pub outcome: CalibrationOutcome,
    circle: UnitCircle,
}

/// `θ` reduced to `(−π, π]`.
fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

impl BuiltCurve {
    pub fn glued(&self) -> GluedFamily<'_> {
        glue(&self.circle, &self.family, &self.outcome.cutoff, 2).expect("validated during calibration")
    }

    /// Jets of `f(t)` at angle `θ`.
    pub fn jets(&self, t: f64, theta: f64, order: usize) -> Vec<MultiJet> {
        self.glued().eval(t, &[wrap(theta)], order)
    }

    pub fn at(&self, t: f64) -> CurveAt<'_> {
        CurveAt { curve: self, t }
    }

    /// Half-width of the arc on which `f(t) = F(t)`.
    pub fn plateau_halfwidth(&self) -> f64 {
        self.outcome.delta * self.outcome.radii[0]
    }

    pub fn support_halfwidth(&self) -> f64 {
        self.outcome.radii[0]
    }
}

/// `f(t)` of a built curve as a closed curve in `θ`.
pub struct CurveAt<'a> {
    curve: &'a BuiltCurve,
    t: f64,
}

impl JetMap for CurveAt<'_> {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        self.curve.jets(self.t, x[0], order)
    }
}

/// Glues `F̃` into the unit circle at `θ = 0` against `κ > 1 − ε`.
pub fn build(params: &CurveParams) -> Result<BuiltCurve, CurveError> {
    if !(params.eps >= 0.0 && params.eps < 1.0) {
        return Err(CurveError::Param(format!("ε must lie in [0, 1), got {}", params.eps)));
    }
    if params.samples < 8 {
        return Err(CurveError::Param("at least 8 samples are needed".into()));
    }
    let psi = psi_family(params.mu, params.bump_halfwidth)?;
    let family = deformation_family(psi);
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    let certificate = family.certify(&ts, 256);
    if !(certificate.convexity_defect < 1e-6) {
        return Err(CurveError::FamilyConvexity(certificate.convexity_defect));
    }
    let circle = UnitCircle;
    let relation = Curvature { kappa0: 1.0 - params.eps };
    let problem =
        GlueProblem { f0: &circle, family: &family, relation: &relation, v0: V0::finite(vec![vec![0.0]]), k: 2 };
    let schedule = Schedule {
        deltas: params.deltas.clone(),
        eps: params.support_fractions.iter().map(|f| f * psi.plateau).collect(),
    };
    let outcome = calibrate(&problem, &schedule, &params.grid).map_err(|f| CurveError::Calibration(Box::new(f)))?;
    Ok(BuiltCurve { params: params.clone(), family, certificate, outcome, circle })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeKappa {
    pub t: f64,
    pub kappa_min: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnclosingCheck {
    pub center: [f64; 2],
    pub radius: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
    pub support_halfwidth: f64,
    pub bump_halfwidth: f64,
    pub bump_plateau: f64,
    pub samples: usize,
    pub seed: u64,
    pub calibration_margin: f64,
    pub family: FamilyCertificate,
    pub kappa_min: f64,
    pub kappa_by_t: Vec<TimeKappa>,
    /// `|θ| < arc`: the plateau arc, where `f(1) = F(1)`.
    pub arc: f64,
    pub kappa_min_arc: f64,
    pub opposite_identical: bool,
    pub simple: bool,
    pub enclosing: EnclosingCheck,
}

pub const REPORT_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const ENCLOSING_TOL: f64 = 1e-3;

/// Uniform samples of the whole circle plus the cutoff's own radial grid around `θ = 0`.
fn kappa_grid(curve: &BuiltCurve) -> Vec<f64> {
    let n = curve.params.samples;
    let mut th: Vec<f64> = (0..n).map(|i| -PI + TAU * i as f64 / n as f64).collect();
    let local = radial_grid(&[0.0], curve.support_halfwidth(), curve.outcome.delta, curve.params.grid.x_samples)
        .expect("1-D grid");
    th.extend(local.into_iter().map(|v| v[0]));
    th.sort_by(f64::total_cmp);
    th.dedup();
    th
}

fn min_kappa(c: &dyn JetMap, thetas: &[f64]) -> (f64, f64) {
    let ks: Vec<f64> = thetas.par_iter().map(|&th| curvature(c, th).unwrap_or(f64::NEG_INFINITY)).collect();
    thetas.iter().zip(ks).fold((f64::INFINITY, 0.0), |(m, at), (&th, k)| if k < m { (k, th) } else { (m, at) })
}

pub fn polygon(c: &dyn JetMap, samples: usize) -> Vec<[f64; 2]> {
    (0..samples)
        .map(|i| {
            let j = c.eval(&[-PI + TAU * i as f64 / samples as f64], 0);
            [j[0].value(), j[1].value()]
        })
        .collect()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// No two non-adjacent edges of the closed polygon cross.
pub fn is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    !(0..n).into_par_iter().any(|i| {
        let (a, b) = edge(i);
        (i + 2..n).any(|j| {
            if i == 0 && j == n - 1 {
                return false;
            }
            let (c, d) = edge(j);
            segments_cross(a, b, c, d)
        })
    })
}

fn circle2(a: [f64; 2], b: [f64; 2]) -> ([f64; 2], f64) {
    let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    (c, (a[0] - c[0]).hypot(a[1] - c[1]))
}

fn circle3(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = 2.0 * orient(a, b, c);
    if d.abs() < 1e-300 {
        let candidates = [circle2(a, b), circle2(a, c), circle2(b, c)];
        return candidates.into_iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    }
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], ux.hypot(uy))
}

fn inside(c: &([f64; 2], f64), p: [f64; 2]) -> bool {
    (p[0] - c.0[0]).hypot(p[1] - c.0[1]) <= c.1 * (1.0 + 1e-12) + 1e-15
}

/// Smallest enclosing circle (Welzl's algorithm over a seeded shuffle).
pub fn min_enclosing_circle(points: &[[f64; 2]], seed: u64) -> ([f64; 2], f64) {
    let mut p = points.to_vec();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let Some(&first) = p.first() else {
        return ([0.0, 0.0], 0.0);
    };
    let mut c = (first, 0.0);
    for i in 1..p.len() {
        if inside(&c, p[i]) {
            continue;
        }
        c = (p[i], 0.0);
        for j in 0..i {
            if inside(&c, p[j]) {
                continue;
            }
            c = circle2(p[i], p[j]);
            for k in 0..j {
                if !inside(&c, p[k]) {
                    c = circle3(p[i], p[j], p[k]);
                }
            }
        }
    }
    c
}

/// Radius of the smallest circle around `samples` points of `c` against `1/m + 10⁻³`.
pub fn enclosing_check(c: &dyn JetMap, m: f64, samples: usize, seed: u64) -> EnclosingCheck {
    let (center, radius) = min_enclosing_circle(&polygon(c, samples), seed);
    let bound = 1.0 / m + ENCLOSING_TOL;
    EnclosingCheck { center, radius, bound, ok: radius <= bound }
}

/// Checks of a built curve on its sample grids.
pub fn convexity_report(curve: &BuiltCurve) -> ConvexityReport {
    let p = &curve.params;
    let grid = kappa_grid(curve);
    let kappa_by_t: Vec<TimeKappa> = REPORT_TIMES
        .iter()
        .map(|&t| {
            let (k, th) = min_kappa(&curve.at(t), &grid);
            TimeKappa { t, kappa_min: k, theta: th }
        })
        .collect();
    let kappa_min = kappa_by_t.iter().map(|k| k.kappa_min).fold(f64::INFINITY, f64::min);
    let arc = curve.plateau_halfwidth();
    let arc_grid: Vec<f64> = (0..=64).map(|i| arc * (-1.0 + 2.0 * i as f64 / 64.0) * (1.0 - 1e-9)).collect();
    let (kappa_min_arc, _) = min_kappa(&curve.at(1.0), &arc_grid);
    let n = p.samples;
    let opposite_identical = REPORT_TIMES.iter().all(|&t| {
        (0..=n).all(|i| {
            let th = FRAC_PI_2 + PI * i as f64 / n as f64;
            let j = curve.jets(t, th, 0);
            let w = wrap(th);
            // keep LLVM from fusing the pair into `sincos`, which rounds differently
            j[0].value() == w.cos() && j[1].value() == std::hint::black_box(w).sin()
        })
    });
    let final_curve = curve.at(1.0);
    let simple = is_simple(&polygon(&final_curve, n));
    let enclosing = enclosing_check(&final_curve, 1.0 - p.eps, n, p.seed);
    ConvexityReport {
        mu: p.mu,
        eps: p.eps,
        delta: curve.outcome.delta,
        support_halfwidth: curve.support_halfwidth(),
        bump_halfwidth: curve.family.psi.halfwidth,
        bump_plateau: curve.family.psi.plateau,
        samples: n,
        seed: p.seed,
        calibration_margin: curve.outcome.report.min_margin,
        family: curve.certificate,
        kappa_min,
        kappa_by_t,
        arc,
        kappa_min_arc,
        opposite_identical,
        simple,
        enclosing,
    }
}
