use super::{CutoffField, DeformationFamily, FlexError, JetMap, OpenRelation};
use crate::cutoff::{cutoff_of_distance, Cutoff};
use crate::jet::MAX_ORDER;
use crate::multijet::MultiJet;
use rayon::prelude::*;
use serde::Serialize;

/// `ρ = 1 − Π(1 − τ_{δ,ε_i}(|x − p_i|))` around finitely many points.
#[derive(Clone, Debug)]
pub struct RadialCutoff {
    centers: Vec<Vec<f64>>,
    cutoffs: Vec<Cutoff>,
}

impl RadialCutoff {
    /// One radius per center. Radii are not capped at 1; the profile is scale-free.
    pub fn new(centers: Vec<Vec<f64>>, radii: &[f64], delta: f64) -> Result<Self, FlexError> {
        if centers.len() != radii.len() || centers.is_empty() {
            return Err(FlexError::Parameter("need one positive radius per center".into()));
        }
        if !(delta > 0.0 && delta < 0.25) {
            return Err(FlexError::Parameter(format!("delta = {delta} outside (0, 1/4)")));
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(FlexError::Parameter("radii must be positive".into()));
        }
        let cutoffs = radii.iter().map(|&e| Cutoff::unchecked(delta, e)).collect();
        Ok(RadialCutoff { centers, cutoffs })
    }

    pub fn delta(&self) -> f64 {
        self.cutoffs[0].delta()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.cutoffs.iter().map(|c| c.eps()).collect()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    fn factor(&self, i: usize, x: &[f64], order: usize) -> MultiJet {
        let p = &self.centers[i];
        let vars = MultiJet::variables(x, order);
        let mut q = MultiJet::zero(x.len(), order);
        for (v, &c) in vars.iter().zip(p) {
            let d = v.add_scalar(-c);
            q = &q + &(&d * &d);
        }
        cutoff_of_distance(&self.cutoffs[i], &q, 0.0)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl CutoffField for RadialCutoff {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn eval(&self, x: &[f64], order: usize) -> MultiJet {
        let active: Vec<usize> =
            (0..self.centers.len()).filter(|&i| dist(x, &self.centers[i]) < self.cutoffs[i].eps()).collect();
        match active.len() {
            0 => MultiJet::zero(x.len(), order),
            1 => self.factor(active[0], x, order),
            _ => {
                let mut prod = MultiJet::constant(x.len(), order, 1.0);
                for i in active {
                    let f = self.factor(i, x, order);
                    prod = &prod * &(&f.scale(-1.0) + 1.0);
                }
                &prod.scale(-1.0) + 1.0
            }
        }
    }

    fn support_balls(&self) -> Vec<(Vec<f64>, f64)> {
        self.centers.iter().cloned().zip(self.cutoffs.iter().map(|c| c.eps())).collect()
    }

    fn plateau_balls(&self) -> Vec<(Vec<f64>, f64)> {
        self.centers.iter().cloned().zip(self.cutoffs.iter().map(|c| c.plateau_radius())).collect()
    }
}

/// Sample points covering a ball: uniform radii plus log-spaced radii that resolve the collars.
pub fn radial_grid(center: &[f64], radius: f64, delta: f64, samples: usize) -> Result<Vec<Vec<f64>>, FlexError> {
    let n = center.len();
    let half = (samples / 2).max(2);
    let uniform: Vec<f64> = (0..half).map(|i| radius * (i as f64 + 0.5) / half as f64).collect();
    let (lo, hi) = ((delta * radius / 2.0).ln(), radius.ln());
    let logs: Vec<f64> = (0..half).map(|i| (lo + (hi - lo) * i as f64 / (half - 1) as f64).exp()).collect();
    let mut out = vec![center.to_vec()];
    match n {
        1 => {
            for r in uniform.iter().step_by(2).chain(logs.iter().step_by(2)) {
                out.push(vec![center[0] - r]);
                out.push(vec![center[0] + r]);
            }
        }
        2 => {
            let angles = 32;
            let stride = (2 * half * angles / samples.max(1)).max(1);
            for r in uniform.iter().step_by(stride).chain(logs.iter().step_by(stride)) {
                for a in 0..angles {
                    let th = std::f64::consts::TAU * (a as f64 + 0.25) / angles as f64;
                    out.push(vec![center[0] + r * th.cos(), center[1] + r * th.sin()]);
                }
            }
        }
        _ => return Err(FlexError::Dimension(format!("radial grids support n ≤ 2, got {n}"))),
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Ok(out)
}

/// The glued family `f(t)(v) = F̃(t·τ(v), v)` inside `U`, `f₀` elsewhere.
pub struct GluedFamily<'a> {
    pub f0: &'a dyn JetMap,
    pub family: &'a dyn DeformationFamily,
    pub tau: &'a dyn CutoffField,
    pub k: usize,
}

pub fn glue<'a>(
    f0: &'a dyn JetMap,
    family: &'a dyn DeformationFamily,
    tau: &'a dyn CutoffField,
    k: usize,
) -> Result<GluedFamily<'a>, FlexError> {
    if k > MAX_ORDER {
        return Err(FlexError::Order(k));
    }
    if f0.dim() != family.dim() || tau.dim() != f0.dim() || f0.components() != family.components() {
        return Err(FlexError::Dimension("f₀, F and τ disagree on dimensions".into()));
    }
    for (center, radius) in tau.support_balls() {
        if !family.domain().contains_ball(&center, radius) {
            return Err(FlexError::SupportOutsideDomain { center, radius });
        }
    }
    Ok(GluedFamily { f0, family, tau, k })
}

impl GluedFamily<'_> {
    fn compose_at(&self, s: &MultiJet, x: &[f64], outer: Vec<MultiJet>) -> Vec<MultiJet> {
        let mut inners = Vec::with_capacity(x.len() + 1);
        inners.push(s.clone());
        inners.extend(MultiJet::variables(x, s.order()));
        outer.iter().map(|o| MultiJet::compose(o, &inners)).collect()
    }

    pub fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        self.eval_ts(&[t], x, order).pop().unwrap()
    }

    /// Jets of `f(t)` at `x` for several `t`, sharing the cutoff evaluation.
    pub fn eval_ts(&self, ts: &[f64], x: &[f64], order: usize) -> Vec<Vec<MultiJet>> {
        let tau = self.tau.eval(x, order);
        if tau.is_exact_zero() {
            let f = self.f0.eval(x, order);
            return vec![f; ts.len()];
        }
        if tau.is_exact_constant(1.0) {
            return self
                .family
                .eval_many(ts, x, order)
                .into_iter()
                .zip(ts)
                .map(
                    |(jets, &t)| {
                        if t == 0.0 {
                            self.f0.eval(x, order)
                        } else {
                            jets.iter().map(|j| j.drop_first_var()).collect()
                        }
                    },
                )
                .collect();
        }
        let tau0 = tau.value();
        let svals: Vec<f64> = ts.iter().map(|&t| t * tau0).collect();
        let outers = self.family.eval_many(&svals, x, order);
        ts.iter()
            .zip(outers)
            .map(|(&t, outer)| if t == 0.0 { self.f0.eval(x, order) } else { self.compose_at(&tau.scale(t), x, outer) })
            .collect()
    }

    /// Balls on which `f(t) = F(t)` exactly.
    pub fn plateau(&self) -> Vec<(Vec<f64>, f64)> {
        self.tau.plateau_balls()
    }

    /// `f(t)` as a section.
    pub fn at(&self, t: f64) -> GluedAt<'_> {
        GluedAt { g: self, t }
    }
}

pub struct GluedAt<'a> {
    g: &'a GluedFamily<'a>,
    t: f64,
}

impl JetMap for GluedAt<'_> {
    fn dim(&self) -> usize {
        self.g.f0.dim()
    }
    fn components(&self) -> usize {
        self.g.f0.components()
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        self.g.eval(self.t, x, order)
    }
}

/// `|D^α f(t)(x) − (D^α F̃)(tτ(x), x)|`, maximized over components.
pub fn error_term(g: &GluedFamily, t: f64, x: &[f64], alpha: &[usize]) -> f64 {
    let order = alpha.iter().sum::<usize>();
    let tau = g.tau.eval(x, order);
    if tau.is_exact_zero() {
        return 0.0;
    }
    let glued = g.eval(t, x, order);
    let outer = g.family.eval(t * tau.value(), x, order);
    glued.iter().zip(&outer).map(|(a, b)| (a.deriv(alpha) - b.drop_first_var().deriv(alpha)).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub min_margin: f64,
    pub argmin_t: f64,
    pub argmin_x: Vec<f64>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub certified: bool,
    pub grid_x: usize,
    pub grid_t: usize,
}

/// Minimum margin of `f(t)` over the product grid. Reduction order is fixed so results do not depend on threads.
pub fn verify_relation(g: &GluedFamily, rel: &dyn OpenRelation, t_grid: &[f64], x_grid: &[Vec<f64>]) -> MarginReport {
    let order = rel.order();
    let per_x: Vec<(f64, f64)> = x_grid
        .par_iter()
        .map(|x| {
            let jets = g.eval_ts(t_grid, x, order);
            let mut best = (f64::INFINITY, f64::NAN);
            for (j, &t) in jets.iter().zip(t_grid) {
                let m = rel.margin(x, j);
                let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
                if m < best.0 {
                    best = (m, t);
                }
            }
            best
        })
        .collect();
    let mut report = MarginReport {
        min_margin: f64::INFINITY,
        argmin_t: f64::NAN,
        argmin_x: Vec::new(),
        delta: None,
        eps: None,
        certified: false,
        grid_x: x_grid.len(),
        grid_t: t_grid.len(),
    };
    for (x, (m, t)) in x_grid.iter().zip(per_x) {
        if m < report.min_margin {
            report.min_margin = m;
            report.argmin_t = t;
            report.argmin_x = x.clone();
        }
    }
    report.certified = report.min_margin > 0.0;
    report
}
