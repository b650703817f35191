//! The logarithmic cutoff family `τ_{δ,ε}` and its building blocks.
//!
//! `τ` is assembled from a smooth step `s`, a lower clamp `χ` and a
//! truncated logarithm `ln̂`, each with collar width 0.1. On the plateau
//! `r ≤ δε` and past `r ≥ ε` the jets are returned as exact constants.

use crate::jet::{Jet, MAX_ORDER};
use crate::multijet::MultiJet;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CutoffError {
    #[error("delta = {0} outside (0, 1/4)")]
    DeltaRange(f64),
    #[error("eps = {0} outside (0, 1)")]
    EpsRange(f64),
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("order {0} exceeds the maximum {MAX_ORDER}")]
    Order(usize),
    #[error("grid misconfigured: {0}")]
    Grid(String),
    #[error("degenerate subspace: {0}")]
    Subspace(String),
}

/// Below this (in unit collar coordinates) `exp(-1/x)` is taken to be zero.
const SIGMA_CLAMP: f64 = 1e-3;
const COLLAR: f64 = 0.1;

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, flat to infinite order at both ends.
pub fn smooth_step(x: f64, order: usize) -> Jet {
    assert!(order <= MAX_ORDER);
    if x <= SIGMA_CLAMP {
        return Jet::zero(order);
    }
    if x >= 1.0 - SIGMA_CLAMP {
        return Jet::constant(1.0, order);
    }
    // σ(x)/(σ(x)+σ(1−x)) = 1/(1+exp(g)) with g = 1/x − 1/(1−x)
    let xv = Jet::variable(x, order);
    let g = xv.recip() - (1.0 - xv).recip();
    if g.value() > 0.0 {
        let e = (-g).exp();
        e / (e + 1.0)
    } else {
        let e = g.exp();
        (e + 1.0).recip()
    }
}

/// Lower clamp: 1 on `(0, 1]`, identity on `[1.1, ∞)`.
pub fn chi(r: f64, order: usize) -> Result<Jet, CutoffError> {
    if r <= 0.0 {
        return Err(CutoffError::NonPositive(r));
    }
    if order > MAX_ORDER {
        return Err(CutoffError::Order(order));
    }
    Ok(chi_jet(r, order))
}

fn chi_jet(r: f64, order: usize) -> Jet {
    if r <= 1.0 {
        return Jet::constant(1.0, order);
    }
    if r >= 1.0 + COLLAR {
        return Jet::variable(r, order);
    }
    let rv = Jet::variable(r, order);
    let u = (rv - 1.0) / COLLAR;
    let s = u.compose(&smooth_step(u.value(), order));
    (rv - 1.0) * s + 1.0
}

/// Truncated logarithm: `ln r` on `(0, 0.9]`, zero on `[1, ∞)`.
pub fn lnhat(r: f64, order: usize) -> Result<Jet, CutoffError> {
    if r <= 0.0 {
        return Err(CutoffError::NonPositive(r));
    }
    if order > MAX_ORDER {
        return Err(CutoffError::Order(order));
    }
    Ok(lnhat_jet(r, order))
}

fn lnhat_jet(r: f64, order: usize) -> Jet {
    if r >= 1.0 {
        return Jet::zero(order);
    }
    let rv = Jet::variable(r, order);
    if r <= 1.0 - COLLAR {
        return rv.ln();
    }
    // 1 − step(u) = step(1 − u); evaluating the right side keeps relative accuracy as r → 1
    let w = (1.0 - rv) / COLLAR;
    rv.ln() * w.compose(&smooth_step(w.value(), order))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffParams {
    pub delta: f64,
    pub eps: f64,
}

impl CutoffParams {
    pub fn new(delta: f64, eps: f64) -> Result<Self, CutoffError> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(CutoffError::DeltaRange(delta));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CutoffError::EpsRange(eps));
        }
        Ok(CutoffParams { delta, eps })
    }
}

/// `τ_{δ,ε}`: 1 below `δε`, 0 above `ε`, `ln(r/ε)/ln δ` in between (away from collars).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub params: CutoffParams,
    ln_delta: f64,
}

impl Cutoff {
    pub fn new(delta: f64, eps: f64) -> Result<Self, CutoffError> {
        Ok(Cutoff::from_params(CutoffParams::new(delta, eps)?))
    }

    pub fn from_params(params: CutoffParams) -> Self {
        Cutoff { params, ln_delta: params.delta.ln() }
    }

    /// Like [`Cutoff::new`] but without the `ε < 1` cap, for radii measured
    /// in units where the support may exceed 1. The formulas are scale-free.
    pub(crate) fn unchecked(delta: f64, eps: f64) -> Self {
        assert!(delta > 0.0 && delta < 0.25 && eps > 0.0);
        Cutoff { params: CutoffParams { delta, eps }, ln_delta: delta.ln() }
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn ln_delta(&self) -> f64 {
        self.ln_delta
    }

    /// Radius below which τ ≡ 1.
    pub fn plateau_radius(&self) -> f64 {
        self.params.delta * self.params.eps
    }

    /// Jet of τ in `r`. Any real `r` is accepted; `r ≤ δε` lies on the plateau.
    pub fn eval(&self, r: f64, order: usize) -> Jet {
        let CutoffParams { delta, eps } = self.params;
        if r <= delta * eps {
            return Jet::constant(1.0, order);
        }
        if r >= eps {
            return Jet::zero(order);
        }
        if r >= eps / 2.0 {
            self.outer_branch(r, order)
        } else {
            self.inner_branch(r, order)
        }
    }

    /// `ln̂(r/ε)/ln δ`
    pub(crate) fn outer_branch(&self, r: f64, order: usize) -> Jet {
        let eps = self.params.eps;
        let u = Jet::variable(r, order) / eps;
        u.compose(&lnhat_jet(u.value(), order)) / self.ln_delta
    }

    /// `1 + ln χ(r/(δε)) / ln δ`
    pub(crate) fn inner_branch(&self, r: f64, order: usize) -> Jet {
        let de = self.params.delta * self.params.eps;
        let u = Jet::variable(r, order) / de;
        let c = u.compose(&chi_jet(u.value(), order));
        c.ln() / self.ln_delta + 1.0
    }

    /// τ composed with a multivariate radius function. Plateau checks happen
    /// on the value before any derivative of `r` is touched.
    pub fn compose(&self, r: &MultiJet) -> MultiJet {
        let r0 = r.value();
        if r0 <= self.plateau_radius() {
            return MultiJet::constant(r.nvars(), r.order(), 1.0);
        }
        if r0 >= self.params.eps {
            return MultiJet::zero(r.nvars(), r.order());
        }
        r.compose_jet(&self.eval(r0, r.order()))
    }
}

/// Free-function form of [`Cutoff::eval`].
pub fn tau_eval(c: &Cutoff, r: f64, order: usize) -> Jet {
    c.eval(r, order)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundEntry {
    pub k: usize,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub argmax_r: f64,
    pub delta: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// One entry per (k, δ, ε).
    pub entries: Vec<BoundEntry>,
    /// `Ĉ_k` over the whole grid, indexed by k (index 0 unused).
    pub c_hat: Vec<f64>,
    /// Per k: max over δ of the per-δ supremum divided by the min.
    pub delta_spread: Vec<f64>,
    pub range_ok: bool,
    pub monotone_ok: bool,
    pub finite: bool,
}

impl BoundReport {
    pub fn delta_uniform(&self, factor: f64) -> bool {
        self.delta_spread.iter().skip(1).all(|&s| s <= factor)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Empirical `Ĉ_k = sup |τ^(k)(r)|·r^k·|ln δ|` on log-spaced radii in `[δε/2, 2ε]`.
pub fn certify_tau_bounds(
    k_max: usize,
    delta_grid: &[f64],
    eps_grid: &[f64],
    r_samples: usize,
) -> Result<BoundReport, CutoffError> {
    if k_max > MAX_ORDER {
        return Err(CutoffError::Order(k_max));
    }
    if delta_grid.is_empty() || eps_grid.is_empty() || r_samples < 2 {
        return Err(CutoffError::Grid("empty grid or fewer than two samples".into()));
    }
    let mut entries = Vec::new();
    let mut c_hat = vec![0.0f64; k_max + 1];
    let mut per_delta = vec![vec![0.0f64; delta_grid.len()]; k_max + 1];
    let mut range_ok = true;
    let mut monotone_ok = true;
    for (di, &delta) in delta_grid.iter().enumerate() {
        for &eps in eps_grid {
            let c = Cutoff::new(delta, eps)?;
            let rs = log_grid(delta * eps / 2.0, 2.0 * eps, r_samples);
            let mut best = vec![(0.0f64, 0.0f64); k_max + 1];
            let mut prev = f64::INFINITY;
            for &r in &rs {
                let j = c.eval(r, k_max);
                let v = j.value();
                range_ok &= (0.0..=1.0).contains(&v);
                monotone_ok &= v <= prev;
                prev = v;
                for (k, b) in best.iter_mut().enumerate().skip(1) {
                    let q = j.deriv(k).abs() * r.powi(k as i32) * c.ln_delta().abs();
                    if q > b.0 {
                        *b = (q, r);
                    }
                }
            }
            for (k, &(q, r)) in best.iter().enumerate().skip(1) {
                entries.push(BoundEntry { k, c_hat: q, argmax_r: r, delta, eps });
                c_hat[k] = c_hat[k].max(q);
                per_delta[k][di] = per_delta[k][di].max(q);
            }
        }
    }
    let delta_spread = per_delta
        .iter()
        .map(|v| {
            let mx = v.iter().cloned().fold(0.0, f64::max);
            let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
            if mx == 0.0 {
                1.0
            } else {
                mx / mn
            }
        })
        .collect();
    let finite = c_hat.iter().all(|v| v.is_finite());
    Ok(BoundReport { entries, c_hat, delta_spread, range_ok, monotone_ok, finite })
}

/// Affine subspace `point + span(directions)` of ℝⁿ, directions orthonormalized.
#[derive(Clone, Debug, Serialize)]
pub struct AffineSubspace {
    pub point: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl AffineSubspace {
    pub fn new(point: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self, CutoffError> {
        let n = point.len();
        if n == 0 || n > 3 {
            return Err(CutoffError::Subspace(format!("ambient dimension {n} not in 1..=3")));
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for d in directions {
            if d.len() != n {
                return Err(CutoffError::Subspace("direction length mismatch".into()));
            }
            let mut v = d.clone();
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(CutoffError::Subspace("directions linearly dependent".into()));
            }
            basis.push(v.iter().map(|x| x / norm).collect());
        }
        if basis.len() >= n {
            return Err(CutoffError::Subspace("subspace is the full space; distance vanishes".into()));
        }
        Ok(AffineSubspace { point, directions: basis })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Squared distance as a polynomial jet at `x`.
    pub fn dist_sq_jet(&self, x: &[f64], order: usize) -> MultiJet {
        let n = x.len();
        let vars = MultiJet::variables(x, order);
        let diff: Vec<MultiJet> = vars.iter().zip(&self.point).map(|(v, p)| v.add_scalar(-p)).collect();
        let mut q = MultiJet::zero(n, order);
        for d in &diff {
            q = &q + &(d * d);
        }
        for dir in &self.directions {
            let mut proj = MultiJet::zero(n, order);
            for (d, &c) in diff.iter().zip(dir) {
                proj = &proj + &d.scale(c);
            }
            q = &q - &(&proj * &proj);
        }
        q
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        self.dist_sq_jet(x, 0).value().max(0.0).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComposedBound {
    pub alpha: Vec<usize>,
    /// sup |D^α(τ∘r)|·Ω^{|α|}·|ln δ|
    pub unshifted: f64,
    /// sup |D^α(τ∘(r−ε′))|·(δε)^{|α|}·|ln δ|
    pub shifted: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComposedBoundReport {
    pub delta: f64,
    pub eps: f64,
    pub shift: f64,
    pub bounds: Vec<ComposedBound>,
    pub range_ok: bool,
}

fn multi_indices(n: usize, max: usize) -> Vec<Vec<usize>> {
    let l = crate::multijet::layout(n, max);
    (0..l.len()).map(|i| l.exponent(i).iter().map(|&e| e as usize).collect()).collect()
}

/// Jet of `τ(dist(x, X) − shift)`, skipping the square root on plateaus.
pub(crate) fn cutoff_of_distance(c: &Cutoff, q: &MultiJet, shift: f64) -> MultiJet {
    let r0 = q.value().max(0.0).sqrt();
    if r0 - shift <= c.plateau_radius() {
        return MultiJet::constant(q.nvars(), q.order(), 1.0);
    }
    if r0 - shift >= c.eps() {
        return MultiJet::zero(q.nvars(), q.order());
    }
    let r = q.sqrt().add_scalar(-shift);
    c.compose(&r)
}

/// Grid certification of the composed-distance derivative bounds on `[-2ε, 2ε]ⁿ` around `X`.
pub fn certify_composed_bounds(
    x: &AffineSubspace,
    c: &Cutoff,
    shift: f64,
    alpha_max: usize,
    per_axis: usize,
) -> Result<ComposedBoundReport, CutoffError> {
    if alpha_max > 2 {
        return Err(CutoffError::Order(alpha_max));
    }
    if !(0.0..=c.eps()).contains(&shift) {
        return Err(CutoffError::Grid(format!("shift {shift} outside [0, eps]")));
    }
    if per_axis < 2 {
        return Err(CutoffError::Grid("need at least two samples per axis".into()));
    }
    let n = x.point.len();
    if n > 2 {
        return Err(CutoffError::Subspace("composed bounds are certified for n ≤ 2".into()));
    }
    let alphas = multi_indices(n, alpha_max);
    let mut bounds: Vec<ComposedBound> =
        alphas.iter().map(|a| ComposedBound { alpha: a.clone(), unshifted: 0.0, shifted: 0.0 }).collect();
    let (delta, eps) = (c.delta(), c.eps());
    let de = delta * eps;
    let lnd = c.ln_delta().abs();
    let h = 4.0 * eps / (per_axis - 1) as f64;
    let total = per_axis.pow(n as u32);
    let mut range_ok = true;
    let mut pt = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for (d, v) in pt.iter_mut().enumerate() {
            *v = x.point[d] - 2.0 * eps + h * (rem % per_axis) as f64;
            rem /= per_axis;
        }
        let q = x.dist_sq_jet(&pt, alpha_max);
        let r0 = q.value().max(0.0).sqrt();
        let omega = de.max(r0);
        let a = cutoff_of_distance(c, &q, 0.0);
        let b = cutoff_of_distance(c, &q, shift);
        range_ok &= (0.0..=1.0).contains(&a.value()) && (0.0..=1.0).contains(&b.value());
        for (bnd, alpha) in bounds.iter_mut().zip(&alphas) {
            let k: usize = alpha.iter().sum();
            bnd.unshifted = bnd.unshifted.max(a.deriv(alpha).abs() * omega.powi(k as i32) * lnd);
            bnd.shifted = bnd.shifted.max(b.deriv(alpha).abs() * de.powi(k as i32) * lnd);
        }
    }
    Ok(ComposedBoundReport { delta, eps, shift, bounds, range_ok })
}
