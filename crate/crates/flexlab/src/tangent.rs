//! Generalized tangent spaces of sampled closed sets, covering nets, two-factor
//! set cutoffs and Taylor defects along the tangent spaces.

use crate::cutoff::{cutoff_of_distance, AffineSubspace, Cutoff, CutoffError};
use crate::flexcore::{CutoffField, JetMap};
use crate::multijet::MultiJet;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TangentError {
    #[error("ambient dimension {0} not in 1..=3")]
    Dimension(usize),
    #[error("point {0:?} is not within 1e-9 of a sample")]
    NotInSet(Vec<f64>),
    #[error("no other sample within the largest radius")]
    NoNeighbors,
    #[error("inconclusive: tangent dimension never stabilized (per radius: {0:?})")]
    Inconclusive(Vec<Option<usize>>),
    #[error("K is not uniform: tangent dimensions {0:?}")]
    NotUniform(Vec<usize>),
    #[error("no admissible ε below Λ for the stratum ℓ = {0}; enlarge U or shrink Λ")]
    NoAdmissibleEps(usize),
    #[error("(k−1)-jet does not vanish at {point:?} (|coefficient| = {value})")]
    JetNotVanishing { point: Vec<f64>, value: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
}

/// Analytic planar sets used as oracles; samples near a point are regenerated densely from these.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Descriptor {
    /// `{(t, |t|)}`
    Corner,
    /// `{(t, t²)}`
    Parabola,
    /// `{(t, 0)}`
    Line,
    /// `{(1/n, 0) : n ≥ 1} ∪ {(0, 0)}`
    Sequence,
    /// closed unit disk
    Disk,
    Point(Vec<f64>),
    Union(Box<Descriptor>, Box<Descriptor>),
    Intersection(Box<Descriptor>, Box<Descriptor>),
    Scaled(Box<Descriptor>, f64),
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Symmetric parameter grid on `[c − r, c + r]` that always contains `c` and 0 when in range.
fn param_grid(c: f64, r: f64, m: usize) -> Vec<f64> {
    let half = (m / 2).max(1);
    let mut v: Vec<f64> = (-(half as i64)..=half as i64).map(|i| c + r * i as f64 / half as f64).collect();
    if (c - r..=c + r).contains(&0.0) {
        v.push(0.0);
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl Descriptor {
    pub fn by_name(name: &str) -> Option<Descriptor> {
        Some(match name {
            "corner" => Descriptor::Corner,
            "parabola" => Descriptor::Parabola,
            "line" => Descriptor::Line,
            "sequence" => Descriptor::Sequence,
            "disk" => Descriptor::Disk,
            "point" => Descriptor::Point(vec![0.0, 0.0]),
            "union" => Descriptor::Union(Box::new(Descriptor::Parabola), Box::new(Descriptor::Line)),
            "intersection" => Descriptor::Intersection(Box::new(Descriptor::Parabola), Box::new(Descriptor::Line)),
            _ => return None,
        })
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        match self {
            Descriptor::Corner => (p[1] - p[0].abs()).abs() <= tol,
            Descriptor::Parabola => (p[1] - p[0] * p[0]).abs() <= tol,
            Descriptor::Line => p[1].abs() <= tol,
            Descriptor::Sequence => {
                if p[1].abs() > tol {
                    return false;
                }
                if p[0].abs() <= tol {
                    return true;
                }
                if p[0] <= 0.0 {
                    return false;
                }
                let n = (1.0 / p[0]).round();
                n >= 1.0 && (1.0 / n - p[0]).abs() <= tol
            }
            Descriptor::Disk => p[0].hypot(p[1]) <= 1.0 + tol,
            Descriptor::Point(q) => dist(p, q) <= tol,
            Descriptor::Union(a, b) => a.contains(p, tol) || b.contains(p, tol),
            Descriptor::Intersection(a, b) => a.contains(p, tol) && b.contains(p, tol),
            Descriptor::Scaled(a, s) => a.contains(&[p[0] / s, p[1] / s], tol / s),
        }
    }

    /// About `m` points of `A ∩ B̄(r, a)`; curves share one parameter grid so unions line up.
    pub fn sample_ball(&self, a: &[f64], r: f64, m: usize) -> Vec<Vec<f64>> {
        let keep = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> { v.into_iter().filter(|p| dist(p, a) <= r).collect() };
        match self {
            Descriptor::Corner => keep(param_grid(a[0], r, m).into_iter().map(|t| vec![t, t.abs()]).collect()),
            Descriptor::Parabola => keep(param_grid(a[0], r, m).into_iter().map(|t| vec![t, t * t]).collect()),
            Descriptor::Line => keep(param_grid(a[0], r, m).into_iter().map(|t| vec![t, 0.0]).collect()),
            Descriptor::Sequence => {
                let hi = a[0] + r;
                if hi <= 0.0 {
                    return keep(vec![vec![0.0, 0.0]]);
                }
                let n_min = (1.0 / hi).ceil().max(1.0) as u64;
                let lo = a[0] - r;
                let n_max = if lo > 0.0 { (1.0 / lo).floor() as u64 } else { u64::MAX };
                let n_max = n_max.min(n_min + m as u64);
                let mut v: Vec<Vec<f64>> = (n_min..=n_max).map(|n| vec![1.0 / n as f64, 0.0]).collect();
                v.push(vec![0.0, 0.0]);
                keep(v)
            }
            Descriptor::Disk => {
                let side = ((m as f64).sqrt().ceil() as usize).max(3);
                let g0 = param_grid(a[0], r, side);
                let g1 = param_grid(a[1], r, side);
                let mut v = vec![a.to_vec()];
                for &x in &g0 {
                    for &y in &g1 {
                        if x.hypot(y) <= 1.0 {
                            v.push(vec![x, y]);
                        }
                    }
                }
                keep(v)
            }
            Descriptor::Point(q) => keep(vec![q.clone()]),
            Descriptor::Union(x, y) => {
                let mut v = x.sample_ball(a, r, m);
                v.extend(y.sample_ball(a, r, m));
                v
            }
            Descriptor::Intersection(x, y) => {
                x.sample_ball(a, r, m).into_iter().filter(|p| y.contains(p, 1e-12)).collect()
            }
            Descriptor::Scaled(x, s) => {
                x.sample_ball(&[a[0] / s, a[1] / s], r / s, m).into_iter().map(|p| vec![p[0] * s, p[1] * s]).collect()
            }
        }
    }
}

/// Finitely many samples of a closed set `A ⊂ ℝⁿ`, optionally with its analytic description.
#[derive(Clone, Debug, Serialize)]
pub struct SampledSet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub descriptor: Option<Descriptor>,
}

const RESAMPLE: usize = 240;

impl SampledSet {
    /// Removes duplicates up to 10⁻¹².
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, TangentError> {
        let dim = points.first().map_or(0, |p| p.len());
        if !(1..=3).contains(&dim) || points.iter().any(|p| p.len() != dim) {
            return Err(TangentError::Dimension(dim));
        }
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        let mut sorted = points;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        for p in sorted {
            if !pts.iter().rev().take(8).any(|q| dist(q, &p) <= 1e-12) {
                pts.push(p);
            }
        }
        Ok(SampledSet { dim, points: pts, descriptor: None })
    }

    /// `m` samples of the descriptor over the window `[−1, 1]²`.
    pub fn from_descriptor(d: Descriptor, m: usize) -> Self {
        let pts = d.sample_ball(&[0.0, 0.0], std::f64::consts::SQRT_2, m);
        let mut s = SampledSet::new(pts).expect("planar samples");
        s.points.retain(|p| p[0].abs() <= 1.0 && p[1].abs() <= 1.0);
        s.descriptor = Some(d);
        s
    }

    pub fn scaled(&self, s: f64) -> Self {
        SampledSet {
            dim: self.dim,
            points: self.points.iter().map(|p| p.iter().map(|x| x * s).collect()).collect(),
            descriptor: self.descriptor.clone().map(|d| Descriptor::Scaled(Box::new(d), s)),
        }
    }

    /// Points of `A` in `B̄(r, a)`, regenerated from the descriptor when there is one.
    pub fn local_points(&self, a: &[f64], r: f64) -> Vec<Vec<f64>> {
        match &self.descriptor {
            Some(d) => d.sample_ball(a, r, RESAMPLE),
            None => self.points.iter().filter(|p| dist(p, a) <= r).cloned().collect(),
        }
    }

    fn contains_sample(&self, a: &[f64]) -> bool {
        match &self.descriptor {
            Some(d) => d.contains(a, 1e-9),
            None => self.points.iter().any(|p| dist(p, a) <= 1e-9),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentEstimate {
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub dim: usize,
    pub radius_used: f64,
}

pub const THETA: f64 = 0.1;

pub fn default_radii() -> Vec<f64> {
    (0..=12).map(|i| 0.5f64.powi(i)).collect()
}

/// Principal directions of the chord set `{(q − p)/|q − p|}`: the smallest `d` for which the top
/// `d` eigenvectors of `Σ s sᵀ` leave every chord with a residual below `θ`.
fn secant_span(points: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut secants: Vec<DVector<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d = dist(p, q);
            if d > 0.0 {
                secants.push(DVector::from_iterator(n, p.iter().zip(q).map(|(a, b)| (b - a) / d)));
            }
        }
    }
    if secants.is_empty() {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for s in &secants {
        m += s * s.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for &i in &order {
        basis.push(eig.eigenvectors.column(i).into_owned());
        let residual = secants
            .iter()
            .map(|s| {
                let proj = basis.iter().fold(DVector::zeros(n), |acc, b| acc + b * b.dot(s));
                (s - proj).norm()
            })
            .fold(0.0, f64::max);
        if residual < THETA {
            break;
        }
    }
    basis.into_iter().map(|b| b.iter().copied().collect()).collect()
}

/// Flips each basis vector so its largest-magnitude component is positive; a full span becomes the standard basis.
fn normalize_basis(basis: Vec<Vec<f64>>, n: usize) -> Vec<Vec<f64>> {
    if basis.len() == n {
        return (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    }
    basis
        .into_iter()
        .map(|v| {
            let k = (0..n).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
            if v[k] < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        })
        .collect()
}

/// Secant-span estimate of `T_a A`: the span of chord directions between samples in `B(r, a)`,
/// taken at the smallest radius whose dimension agrees with the next larger radius.
pub fn estimate_tangent(set: &SampledSet, a: &[f64], radii: &[f64]) -> Result<TangentEstimate, TangentError> {
    let n = set.dim;
    if a.len() != n {
        return Err(TangentError::Dimension(a.len()));
    }
    if !set.contains_sample(a) {
        return Err(TangentError::NotInSet(a.to_vec()));
    }
    let mut dims: Vec<Option<usize>> = Vec::with_capacity(radii.len());
    let mut spans = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut pts = set.local_points(a, r);
        if !pts.iter().any(|p| dist(p, a) <= 1e-9) {
            pts.push(a.to_vec());
        }
        let resolved = set.descriptor.is_some() || pts.len() > n;
        let span = secant_span(&pts, n);
        dims.push(resolved.then_some(span.len()));
        spans.push(span);
    }
    if set.descriptor.is_none() && dims.first().copied().flatten().is_none() {
        return Err(TangentError::NoNeighbors);
    }
    let stable = (1..radii.len()).rev().find(|&i| dims[i].is_some() && dims[i] == dims[i - 1]);
    match stable {
        Some(i) => {
            let basis = normalize_basis(spans.swap_remove(i), n);
            Ok(TangentEstimate { base: a.to_vec(), dim: basis.len(), basis, radius_used: radii[i] })
        }
        None => Err(TangentError::Inconclusive(dims)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Stratification {
    /// `sigma[ℓ + 1]` lists the indices of `Σ_ℓ = {a : dim T_a A ≥ n − ℓ}` for `ℓ = −1..=n`.
    pub sigma: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl Stratification {
    pub fn level(&self, ell: i64) -> &[usize] {
        &self.sigma[(ell + 1) as usize]
    }
}

/// Builds the chain from per-sample estimates; flags samples whose neighbours within the
/// stabilization radius have larger tangent spaces.
pub fn stratify(set: &SampledSet, estimates: &[TangentEstimate]) -> Stratification {
    let n = set.dim;
    let mut sigma = vec![Vec::new()];
    for ell in 0..=n {
        sigma.push((0..estimates.len()).filter(|&i| estimates[i].dim + ell >= n).collect());
    }
    let mut warnings = Vec::new();
    for e in estimates {
        if let Some(o) =
            estimates.iter().find(|o| o.dim > e.dim && dist(&o.base, &e.base) < e.radius_used && o.base != e.base)
        {
            warnings.push(format!(
                "upper semicontinuity violated at sampling resolution: dim {} at {:?} next to dim {} at {:?}",
                e.dim, e.base, o.dim, o.base
            ));
        }
    }
    Stratification { sigma, warnings }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringNet {
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    /// Indices of the centers in the input list.
    pub center_indices: Vec<usize>,
    /// Max over samples of the number of balls `B(2ε, a_i)` containing it.
    pub multiplicity: usize,
    pub min_separation: f64,
    pub max_cover_distance: f64,
    pub multiplicity_ok: bool,
}

/// Greedy maximal family with pairwise distances ≥ ε, so the balls `B(ε/2, a_i)` are disjoint.
pub fn covering_net(points: &[Vec<f64>], eps: f64) -> CoveringNet {
    let n = points.first().map_or(1, |p| p.len());
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut idx = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if centers.iter().all(|c| dist(c, p) >= eps) {
            centers.push(p.clone());
            idx.push(i);
        }
    }
    let mut multiplicity = 0;
    let mut max_cover = 0.0f64;
    for p in points {
        let mut count = 0;
        let mut nearest = f64::INFINITY;
        for c in &centers {
            let d = dist(c, p);
            nearest = nearest.min(d);
            if d < 2.0 * eps {
                count += 1;
            }
        }
        multiplicity = multiplicity.max(count);
        max_cover = max_cover.max(nearest);
    }
    let mut min_sep = f64::INFINITY;
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            min_sep = min_sep.min(dist(a, b));
        }
    }
    let multiplicity_ok = multiplicity <= 10usize.pow(n as u32);
    CoveringNet {
        eps,
        centers,
        center_indices: idx,
        multiplicity,
        min_separation: min_sep,
        max_cover_distance: max_cover,
        multiplicity_ok,
    }
}

/// `a + T_a A` and `a + (T_a A)^⊥`; `None` stands for the full space.
fn subspaces(e: &TangentEstimate) -> Result<(Option<AffineSubspace>, Option<AffineSubspace>), CutoffError> {
    let n = e.base.len();
    let tangent = if e.dim == n { None } else { Some(AffineSubspace::new(e.base.clone(), e.basis.clone())?) };
    let mut normal_dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut v: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        for b in e.basis.iter().chain(normal_dirs.iter()) {
            let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            normal_dirs.push(v.iter().map(|x| x / norm).collect());
        }
    }
    let normal = if e.dim == 0 { None } else { Some(AffineSubspace::new(e.base.clone(), normal_dirs)?) };
    Ok((tangent, normal))
}

fn r_of(s: &Option<AffineSubspace>, x: &[f64]) -> f64 {
    s.as_ref().map_or(0.0, |s| s.dist(x))
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxEntry {
    pub eps: f64,
    pub inclusion_ok: bool,
    pub stability_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub delta: f64,
    pub accepted_eps: Option<f64>,
    pub entries: Vec<ApproxEntry>,
}

/// Points at which two distance functions are compared on `B(ρ, a)`.
fn probe_points(a: &[f64], rho: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![a.to_vec()];
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .filter_map(|code| {
            let v: Vec<f64> = (0..n).map(|j| ((code / 3usize.pow(j as u32)) % 3) as f64 - 1.0).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
        })
        .collect();
    for f in [0.3, 0.6, 0.95] {
        for d in &dirs {
            out.push(a.iter().zip(d).map(|(x, y)| x + f * rho * y).collect());
        }
    }
    out
}

/// The two approximation conditions at scale `ε` with tolerance `tol·ε`, for centers `cs`
/// (condition (ii) only between centers at most `pair_reach·ε` apart, tested on `B(probe·ε, a)`).
#[allow(clippy::too_many_arguments)]
fn approx_conditions(
    set: &SampledSet,
    cs: &[(Vec<f64>, Option<AffineSubspace>)],
    eps: f64,
    tol: f64,
    pair_reach: f64,
    probe: f64,
) -> (bool, bool) {
    let mut inclusion = true;
    for (a, t) in cs {
        inclusion &= set.local_points(a, eps).iter().filter(|p| dist(p, a) < eps).all(|p| r_of(t, p) < tol * eps);
        if !inclusion {
            break;
        }
    }
    let mut stability = true;
    'outer: for (a, t) in cs {
        let mut probes = probe_points(a, probe * eps);
        probes.extend(set.local_points(a, probe * eps));
        for (b, u) in cs {
            if dist(a, b) > pair_reach * eps {
                continue;
            }
            for x in &probes {
                if (r_of(t, x) - r_of(u, x)).abs() >= tol * eps {
                    stability = false;
                    break 'outer;
                }
            }
        }
    }
    (inclusion, stability)
}

/// Largest `ε` of the schedule for which, on samples, `A ∩ B(ε, a) ⊂ {r_a < δε}` and
/// `|r_{a′} − r_a| < δε` on `B(ε, a)` for all tested centers `a, a′ ∈ K` with `a′ ∈ B(ε, a)`.
pub fn check_approximation(
    set: &SampledSet,
    k: &[TangentEstimate],
    delta: f64,
    eps_schedule: &[f64],
) -> Result<ApproxReport, TangentError> {
    let mut dims: Vec<usize> = k.iter().map(|e| e.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    if dims.len() > 1 {
        return Err(TangentError::NotUniform(dims));
    }
    let cs: Vec<(Vec<f64>, Option<AffineSubspace>)> =
        k.iter().map(|e| Ok((e.base.clone(), subspaces(e)?.0))).collect::<Result<_, CutoffError>>()?;
    let mut entries = Vec::new();
    let mut accepted: Option<f64> = None;
    for &eps in eps_schedule {
        let (i, ii) = approx_conditions(set, &cs, eps, delta, 1.0, 1.0);
        if i && ii {
            accepted = Some(accepted.map_or(eps, |a| a.max(eps)));
        }
        entries.push(ApproxEntry { eps, inclusion_ok: i, stability_ok: ii });
    }
    Ok(ApproxReport { delta, accepted_eps: accepted, entries })
}

/// Open axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn contains_ball(&self, c: &[f64], r: f64) -> bool {
        c.iter().zip(&self.lo).zip(&self.hi).all(|((&x, &lo), &hi)| x - r > lo && x + r < hi)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterCutoff {
    pub center: Vec<f64>,
    pub eps: f64,
    pub tangent_dim: usize,
    #[serde(skip)]
    tangent: Option<AffineSubspace>,
    #[serde(skip)]
    normal: Option<AffineSubspace>,
}

impl CenterCutoff {
    /// `τ_a = τ_{δ,ε}(r_{a⊥} − (1−δ)ε) · τ_{δ,δε}(r_a)`.
    fn eval(&self, delta: f64, x: &[f64], order: usize) -> MultiJet {
        let n = x.len();
        let eps = self.eps;
        let tau1 = match &self.normal {
            Some(s) => {
                cutoff_of_distance(&Cutoff::unchecked(delta, eps), &s.dist_sq_jet(x, order), (1.0 - delta) * eps)
            }
            None => MultiJet::constant(n, order, 1.0),
        };
        if tau1.is_exact_zero() {
            return tau1;
        }
        let tau2 = match &self.tangent {
            Some(s) => cutoff_of_distance(&Cutoff::unchecked(delta, delta * eps), &s.dist_sq_jet(x, order), 0.0),
            None => MultiJet::constant(n, order, 1.0),
        };
        if tau1.is_exact_constant(1.0) {
            return tau2;
        }
        if tau2.is_exact_constant(1.0) {
            return tau1;
        }
        &tau1 * &tau2
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffLayer {
    /// Stratum index `ℓ`: the layer's centers have tangent dimension `n − ℓ`.
    pub ell: usize,
    pub eps: f64,
    pub centers: Vec<CenterCutoff>,
    pub multiplicity: usize,
}

/// `ρ = 1 − Π_i (1 − τ_{a_i})` over all layers, equal to 1 near `K` and supported in `U`.
#[derive(Clone, Debug, Serialize)]
pub struct SetCutoff {
    pub dim: usize,
    pub delta: f64,
    pub lambda: f64,
    pub order: usize,
    pub layers: Vec<CutoffLayer>,
}

impl SetCutoff {
    pub fn eval_jet(&self, x: &[f64], order: usize) -> MultiJet {
        let n = x.len();
        let mut prod: Option<MultiJet> = None;
        for c in self.layers.iter().flat_map(|l| l.centers.iter()) {
            if dist(x, &c.center) >= 2.0 * c.eps {
                continue;
            }
            let t = c.eval(self.delta, x, order);
            if t.is_exact_zero() {
                continue;
            }
            let f = &t.scale(-1.0) + 1.0;
            prod = Some(match prod {
                None => f,
                Some(p) => &p * &f,
            });
        }
        match prod {
            None => MultiJet::zero(n, order),
            Some(p) => &p.scale(-1.0) + 1.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval_jet(x, 0).value()
    }

    pub fn center_count(&self) -> usize {
        self.layers.iter().map(|l| l.centers.len()).sum()
    }
}

impl CutoffField for SetCutoff {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], order: usize) -> MultiJet {
        self.eval_jet(x, order)
    }
    fn support_balls(&self) -> Vec<(Vec<f64>, f64)> {
        self.layers.iter().flat_map(|l| l.centers.iter().map(|c| (c.center.clone(), 2.0 * c.eps))).collect()
    }
    fn plateau_balls(&self) -> Vec<(Vec<f64>, f64)> {
        self.layers
            .iter()
            .flat_map(|l| l.centers.iter().map(|c| (c.center.clone(), self.delta * self.delta * c.eps)))
            .collect()
    }
}

/// Two-factor cutoff around the samples `k` of `A`, built stratum by stratum.
pub fn set_cutoff(
    set: &SampledSet,
    k: &[usize],
    u: &AxisBox,
    delta: f64,
    lambda: f64,
    order: usize,
    radii: &[f64],
) -> Result<SetCutoff, TangentError> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(TangentError::Parameter(format!("δ = {delta} outside (0, 1/4)")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(TangentError::Parameter(format!("Λ = {lambda} outside (0, 1)")));
    }
    let n = set.dim;
    let estimates: Vec<TangentEstimate> =
        k.iter().map(|&i| estimate_tangent(set, &set.points[i], radii)).collect::<Result<_, _>>()?;
    let mut sc = SetCutoff { dim: n, delta, lambda, order, layers: Vec::new() };
    for ell in 0..=n {
        let stratum: Vec<&TangentEstimate> =
            estimates.iter().filter(|e| e.dim + ell == n && sc.value(&e.base) < 1.0).collect();
        if stratum.is_empty() {
            continue;
        }
        let pts: Vec<Vec<f64>> = stratum.iter().map(|e| e.base.clone()).collect();
        let mut chosen = None;
        for j in 1..=40 {
            let eps = lambda * 0.5f64.powi(j);
            let net = covering_net(&pts, eps);
            if !net.centers.iter().all(|c| u.contains_ball(c, 2.0 * eps)) {
                continue;
            }
            let cs: Vec<(Vec<f64>, Option<AffineSubspace>)> = net
                .center_indices
                .iter()
                .map(|&i| Ok((pts[i].clone(), subspaces(stratum[i])?.0)))
                .collect::<Result<_, CutoffError>>()?;
            let (i, ii) = approx_conditions(set, &cs, eps, delta * delta, 4.0, 2.0);
            if i && ii {
                chosen = Some((eps, net));
                break;
            }
        }
        let (eps, net) = chosen.ok_or(TangentError::NoAdmissibleEps(ell))?;
        let centers = net
            .center_indices
            .iter()
            .map(|&i| {
                let (tangent, normal) = subspaces(stratum[i])?;
                Ok(CenterCutoff { center: pts[i].clone(), eps, tangent_dim: stratum[i].dim, tangent, normal })
            })
            .collect::<Result<_, CutoffError>>()?;
        sc.layers.push(CutoffLayer { ell, eps, centers, multiplicity: net.multiplicity });
    }
    Ok(sc)
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorDefect {
    /// sup of `|𝒯_{a,k}F(x)| / r_a(x)^k` over the grid.
    pub defect: f64,
    /// `(ρ, sup_{|x−a|<ρ} |ℛ_{a,k}F(x)| / |x−a|^k)` for shrinking `ρ`.
    pub remainder: Vec<(f64, f64)>,
}

/// Degree-`k` Taylor polynomial at points of `A` measured against the distance to `a + T_a A`.
pub fn taylor_defect(
    f: &dyn JetMap,
    set: &SampledSet,
    k_est: &[TangentEstimate],
    k: usize,
    grid: &[Vec<f64>],
) -> Result<TaylorDefect, TangentError> {
    if k == 0 {
        return Err(TangentError::Parameter("k must be at least 1".into()));
    }
    for p in &set.points {
        let j = &f.eval(p, k - 1)[0];
        if let Some(v) = j.coeffs().iter().map(|c| c.abs()).find(|&c| c > 1e-9) {
            return Err(TangentError::JetNotVanishing { point: p.clone(), value: v });
        }
    }
    let radii: Vec<f64> = (0..9).map(|j| 0.5f64.powi(j)).collect();
    let mut defect = 0.0f64;
    let mut rem = vec![0.0f64; radii.len()];
    for e in k_est {
        let a = &e.base;
        let (tangent, _) = subspaces(e)?;
        let jet = &f.eval(a, k)[0];
        for x in grid {
            let d = dist(x, a);
            if d >= 1.0 {
                continue;
            }
            let h: Vec<f64> = x.iter().zip(a).map(|(p, q)| p - q).collect();
            let taylor = jet.eval_homogeneous(&h, k);
            let ra = r_of(&tangent, x);
            if ra > 1e-6 {
                defect = defect.max(taylor.abs() / ra.powi(k as i32));
            }
            if d > 0.0 {
                let full = jet.eval_poly(&h);
                let r = (f.eval(x, 0)[0].value() - full).abs() / d.powi(k as i32);
                for (slot, &rho) in rem.iter_mut().zip(&radii) {
                    if d < rho {
                        *slot = slot.max(r);
                    }
                }
            }
        }
    }
    Ok(TaylorDefect { defect, remainder: radii.into_iter().zip(rem).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexcore::ClosureMap;
    use proptest::prelude::*;

    fn named(name: &str) -> SampledSet {
        SampledSet::from_descriptor(Descriptor::by_name(name).unwrap(), 101)
    }

    fn est(name: &str, a: [f64; 2]) -> TangentEstimate {
        estimate_tangent(&named(name), &a, &default_radii()).unwrap()
    }

    fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(u, v)| u.iter().zip(v).all(|(x, y)| (x - y).abs() <= tol))
    }

    #[test]
    fn corner_point_has_full_tangent_space() {
        assert_eq!(est("corner", [0.0, 0.0]).dim, 2);
        let e = est("corner", [0.3, 0.3]);
        let s = 0.5f64.sqrt();
        assert!(close(&e.basis, &[vec![s, s]], 1e-12));
    }

    #[test]
    fn parabola_tangent_is_horizontal() {
        let e = est("parabola", [0.0, 0.0]);
        assert!(close(&e.basis, &[vec![1.0, 0.0]], 1e-10));
    }

    #[test]
    fn sequence_points_and_limit() {
        assert_eq!(est("sequence", [1.0, 0.0]).dim, 0);
        assert_eq!(est("sequence", [1.0 / 3.0, 0.0]).dim, 0);
        assert!(close(&est("sequence", [0.0, 0.0]).basis, &[vec![1.0, 0.0]], 1e-12));
    }

    #[test]
    fn union_and_intersection_of_tangent_curves() {
        assert_eq!(est("union", [0.0, 0.0]).dim, 2);
        assert_eq!(est("intersection", [0.0, 0.0]).dim, 0);
        assert_eq!(est("line", [0.2, 0.0]).dim, 1);
    }

    #[test]
    fn sampled_parabola_without_descriptor() {
        let pts = (0..=100).map(|i| {
            let t = -1.0 + i as f64 / 50.0;
            vec![t, t * t]
        });
        let s = SampledSet::new(pts.collect()).unwrap();
        let e = estimate_tangent(&s, &[0.0, 0.0], &default_radii()).unwrap();
        assert_eq!(e.dim, 1);
        assert!(close(&e.basis, &[vec![1.0, 0.0]], 1e-9));
    }

    #[test]
    fn isolated_sample_without_descriptor_is_inconclusive() {
        let s = SampledSet::new(vec![vec![0.0, 0.0], vec![0.9, 0.0], vec![0.0, 0.9]]).unwrap();
        assert!(matches!(estimate_tangent(&s, &[0.0, 0.0], &default_radii()), Err(TangentError::Inconclusive(_))));
        assert!(matches!(estimate_tangent(&s, &[0.5, 0.5], &default_radii()), Err(TangentError::NotInSet(_))));
    }

    #[test]
    fn duplicates_are_removed() {
        let s = SampledSet::new(vec![vec![0.0, 0.0], vec![1e-13, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(s.points.len(), 2);
    }

    #[test]
    fn scale_equivariance_on_the_examples() {
        for (name, a) in
            [("corner", [0.0, 0.0]), ("parabola", [0.0, 0.0]), ("sequence", [0.0, 0.0]), ("sequence", [0.5, 0.0])]
        {
            let s = named(name);
            for lambda in [0.25, 3.0] {
                let b = estimate_tangent(&s.scaled(lambda), &[a[0] * lambda, a[1] * lambda], &default_radii()).unwrap();
                let e = est(name, a);
                assert!(close(&e.basis, &b.basis, 1e-9), "{name} λ={lambda}");
            }
        }
    }

    fn all_estimates(s: &SampledSet) -> Vec<TangentEstimate> {
        s.points.iter().map(|p| estimate_tangent(s, p, &default_radii()).unwrap()).collect()
    }

    #[test]
    fn corner_strata() {
        let s = named("corner");
        let st = stratify(&s, &all_estimates(&s));
        let origin = s.points.iter().position(|p| p == &vec![0.0, 0.0]).unwrap();
        assert!(st.level(-1).is_empty());
        assert_eq!(st.level(0), &[origin]);
        assert_eq!(st.level(1).len(), s.points.len());
        assert_eq!(st.level(2).len(), s.points.len());
    }

    #[test]
    fn disk_and_point_strata() {
        let d = SampledSet::from_descriptor(Descriptor::Disk, 64);
        let st = stratify(&d, &all_estimates(&d));
        for ell in 0..=2 {
            assert_eq!(st.level(ell).len(), d.points.len());
        }
        let p = SampledSet {
            descriptor: Some(Descriptor::Point(vec![0.0, 0.0])),
            ..SampledSet::new(vec![vec![0.0, 0.0]]).unwrap()
        };
        let st = stratify(&p, &all_estimates(&p));
        assert!(st.level(0).is_empty() && st.level(1).is_empty());
        assert_eq!(st.level(2), &[0]);
    }

    #[test]
    fn unit_square_net_multiplicity() {
        let pts: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i % 40) as f64 / 39.0, (i / 40) as f64 / 24.0]).collect();
        let net = covering_net(&pts, 0.1);
        assert!(net.multiplicity <= 100 && net.multiplicity_ok);
        assert!(net.min_separation >= 0.05);
        assert!(net.max_cover_distance < 0.1);
    }

    #[test]
    fn single_point_and_segment_nets() {
        let net = covering_net(&[vec![0.3, 0.3]], 0.1);
        assert_eq!((net.centers.len(), net.multiplicity), (1, 1));
        let seg: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64 / 100.0, 0.0]).collect();
        let net = covering_net(&seg, 0.25);
        assert!(seg.iter().all(|p| net.centers.iter().any(|c| dist(c, p) <= 0.25)));
    }

    #[test]
    fn parabola_arc_approximation_scale() {
        let s = SampledSet::from_descriptor(Descriptor::Parabola, 201);
        let k: Vec<TangentEstimate> = s
            .points
            .iter()
            .filter(|p| p[0].abs() <= 0.05)
            .map(|p| estimate_tangent(&s, p, &default_radii()).unwrap())
            .collect();
        let sched: Vec<f64> = (0..12).map(|j| 0.5f64.powi(j)).collect();
        let r = check_approximation(&s, &k, 0.1, &sched).unwrap();
        // chord deviation ≤ ε² and tangent tilt ≤ 2ε·ε give |r_a′ − r_a| ≤ 3ε² < δε once ε < δ/3
        assert_eq!(r.accepted_eps, Some(1.0 / 32.0));
    }

    #[test]
    fn line_accepts_every_scale() {
        let s = named("line");
        let k: Vec<TangentEstimate> =
            s.points.iter().take(20).map(|p| estimate_tangent(&s, p, &default_radii()).unwrap()).collect();
        let r = check_approximation(&s, &k, 0.05, &[0.5, 0.25, 0.125]).unwrap();
        assert_eq!(r.accepted_eps, Some(0.5));
        let c = named("corner");
        let k = vec![estimate_tangent(&c, &[0.0, 0.0], &default_radii()).unwrap()];
        assert_eq!(check_approximation(&c, &k, 0.1, &[0.5]).unwrap().accepted_eps, Some(0.5));
    }

    #[test]
    fn mixed_dimensions_are_not_uniform() {
        let c = named("corner");
        let k = vec![est("corner", [0.0, 0.0]), est("corner", [0.5, 0.5])];
        assert!(matches!(check_approximation(&c, &k, 0.1, &[0.1]), Err(TangentError::NotUniform(_))));
    }

    fn origin_cutoff() -> SetCutoff {
        let p = SampledSet {
            descriptor: Some(Descriptor::Point(vec![0.0, 0.0])),
            ..SampledSet::new(vec![vec![0.0, 0.0]]).unwrap()
        };
        let u = AxisBox { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        set_cutoff(&p, &[0], &u, 0.1, 0.5, 2, &default_radii()).unwrap()
    }

    #[test]
    fn origin_cutoff_is_radial() {
        let c = origin_cutoff();
        let eps = c.layers[0].eps;
        assert_eq!(c.value(&[0.0, 0.0]), 1.0);
        assert_eq!(c.value(&[0.0, 0.9 * 0.01 * eps]), 1.0);
        assert_eq!(c.value(&[2.0 * eps, 0.0]), 0.0);
        let a = c.value(&[0.03 * eps, 0.04 * eps]);
        let b = c.value(&[0.05 * eps, 0.0]);
        assert!(a > 0.0 && a < 1.0 && (a - b).abs() < 1e-15);
    }

    #[test]
    fn corner_cutoff_covers_k() {
        let s = named("corner");
        let k: Vec<usize> = (0..s.points.len()).filter(|&i| s.points[i][0].abs() <= 0.5).collect();
        let u = AxisBox { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        let c = set_cutoff(&s, &k, &u, 0.1, 0.5, 2, &default_radii()).unwrap();
        assert_eq!(c.layers.iter().map(|l| l.ell).collect::<Vec<_>>(), vec![0, 1]);
        for &i in &k {
            assert_eq!(c.value(&s.points[i]), 1.0);
        }
        for (center, r) in c.support_balls() {
            assert!(u.contains_ball(&center, r));
        }
        assert_eq!(c.value(&[0.95, -0.9]), 0.0);
    }

    #[test]
    fn cutoff_rejects_tight_box() {
        let p = SampledSet {
            descriptor: Some(Descriptor::Point(vec![0.0, 0.0])),
            ..SampledSet::new(vec![vec![0.0, 0.0]]).unwrap()
        };
        let u = AxisBox { lo: vec![0.0, -1.0], hi: vec![1.0, 1.0] };
        assert_eq!(
            set_cutoff(&p, &[0], &u, 0.1, 0.5, 1, &default_radii()).unwrap_err(),
            TangentError::NoAdmissibleEps(2)
        );
    }

    #[test]
    fn taylor_defect_on_axis() {
        let s = named("line");
        let f = ClosureMap::new(2, 1, |v| vec![&v[1] * &v[1]]);
        let k: Vec<TangentEstimate> =
            [[0.0, 0.0], [0.5, 0.0]].iter().map(|a| estimate_tangent(&s, a, &default_radii()).unwrap()).collect();
        let grid: Vec<Vec<f64>> =
            (0..21).flat_map(|i| (0..21).map(move |j| vec![-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64])).collect();
        let d = taylor_defect(&f, &s, &k, 2, &grid).unwrap();
        assert!((d.defect - 1.0).abs() < 1e-12);
        assert!(d.remainder.iter().all(|&(_, r)| r < 1e-12));
        let zero = ClosureMap::new(2, 1, |v| vec![v[0].scale(0.0)]);
        assert_eq!(taylor_defect(&zero, &s, &k, 2, &grid).unwrap().defect, 0.0);
        assert!(matches!(
            taylor_defect(&ClosureMap::new(2, 1, |v| vec![v[1].clone()]), &s, &k, 2, &grid),
            Err(TangentError::JetNotVanishing { .. })
        ));
    }

    #[test]
    fn taylor_defect_on_parabola_is_finite() {
        let s = SampledSet::from_descriptor(Descriptor::Parabola, 101);
        let f = ClosureMap::new(2, 1, |v| {
            let g = &v[1] - &(&v[0] * &v[0]);
            vec![&g * &g]
        });
        let k: Vec<TangentEstimate> = s
            .points
            .iter()
            .filter(|p| p[0].abs() <= 0.1)
            .map(|p| estimate_tangent(&s, p, &default_radii()).unwrap())
            .collect();
        let grid: Vec<Vec<f64>> =
            (0..41).flat_map(|i| (0..41).map(move |j| vec![-1.0 + 0.05 * i as f64, -1.0 + 0.05 * j as f64])).collect();
        let d = taylor_defect(&f, &s, &k, 2, &grid).unwrap();
        assert!(d.defect.is_finite() && d.defect > 0.5 && d.defect < 10.0, "{}", d.defect);
        let last = d.remainder.last().unwrap().1;
        assert!(last < d.remainder[0].1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn nets_separate_cover_and_bound_multiplicity(
            pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..300),
            eps in 0.02f64..0.5,
        ) {
            let net = covering_net(&pts, eps);
            for (i, a) in net.centers.iter().enumerate() {
                for b in &net.centers[i + 1..] {
                    prop_assert!(dist(a, b) >= eps / 2.0);
                }
            }
            for p in &pts {
                prop_assert!(net.centers.iter().any(|c| dist(c, p) < eps) || net.centers.contains(p));
            }
            prop_assert!(net.multiplicity <= 100);
        }

        #[test]
        fn strata_are_nested(dims in prop::collection::vec(0usize..=2, 1..30)) {
            let pts: Vec<Vec<f64>> = (0..dims.len()).map(|i| vec![i as f64, 0.0]).collect();
            let s = SampledSet::new(pts.clone()).unwrap();
            let est: Vec<TangentEstimate> = pts.iter().zip(&dims).map(|(p, &d)| TangentEstimate {
                base: p.clone(), basis: vec![vec![1.0, 0.0]; d], dim: d, radius_used: 0.1,
            }).collect();
            let st = stratify(&s, &est);
            for w in st.sigma.windows(2) {
                prop_assert!(w[0].iter().all(|i| w[1].contains(i)));
            }
            prop_assert_eq!(st.sigma.last().unwrap().len(), pts.len());
        }

        #[test]
        fn set_cutoff_values_in_unit_interval(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let c = origin_cutoff();
            let v = c.value(&[x * 0.06, y * 0.06]);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn set_cutoff_jets_match_finite_differences(rr in 0.004f64..0.024, th in 0.0f64..std::f64::consts::TAU) {
            let c = origin_cutoff();
            let eps = c.layers[0].eps * 0.1;
            // stay off the branch switch of the profile at ε/2
            prop_assume!((rr - eps / 2.0).abs() > 1e-4);
            let x = [rr * th.cos(), rr * th.sin()];
            let j = c.eval_jet(&x, 2);
            let h = 1e-7;
            for (axis, alpha) in [(0, [1, 0]), (1, [0, 1])] {
                let mut p = x;
                p[axis] += h;
                let mut m = x;
                m[axis] -= h;
                let fd = (c.value(&p) - c.value(&m)) / (2.0 * h);
                let d = j.deriv(&alpha);
                prop_assert!((d - fd).abs() <= 1e-4 * d.abs().max(1.0), "{} vs {}", d, fd);
            }
            // second derivative against differences of the exact first derivative
            let mut p = x;
            p[0] += h;
            let mut m = x;
            m[0] -= h;
            let fd2 = (c.eval_jet(&p, 1).deriv(&[1, 0]) - c.eval_jet(&m, 1).deriv(&[1, 0])) / (2.0 * h);
            let d2 = j.deriv(&[2, 0]);
            prop_assert!((d2 - fd2).abs() <= 1e-4 * d2.abs().max(1.0), "{} vs {}", d2, fd2);
        }
    }
}
