//! Ready-made gluing problems: a single staircase step and two configurations that must fail.

use super::{
    AffineMap, ClosureFamily, ClosureMap, DeformationFamily, Domain, GlueProblem, GridSpec, JetMap, OpenRelation,
    Schedule, SlopeBound, StepRelation, V0,
};
use crate::multijet::MultiJet;
use std::sync::Arc;

pub struct Fixture {
    pub name: &'static str,
    pub f0: Arc<dyn JetMap>,
    pub family: Box<dyn DeformationFamily>,
    pub relation: Box<dyn OpenRelation>,
    pub v0: V0,
    pub k: usize,
    pub schedule: Schedule,
    pub grid: GridSpec,
}

impl Fixture {
    pub fn problem(&self) -> GlueProblem<'_> {
        GlueProblem {
            f0: self.f0.as_ref(),
            family: self.family.as_ref(),
            relation: self.relation.as_ref(),
            v0: self.v0.clone(),
            k: self.k,
        }
    }
}

pub fn by_name(name: &str) -> Option<Fixture> {
    match name {
        "staircase-step" => Some(staircase_step()),
        "remark32" => Some(remark32()),
        "remark33" => Some(remark33()),
        _ => None,
    }
}

fn default_deltas(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.1 * 0.1f64.powi(i as i32)).collect()
}

/// First staircase step for `f = id`, `K = 0`, `ε = 10⁻⁴`, `L = 3` at `p = 1/2` with budget `ε/2`.
pub fn staircase_step() -> Fixture {
    let (p, budget) = (0.5, 5e-5);
    let h = 0.8 * budget;
    let f0: Arc<dyn JetMap> = Arc::new(AffineMap { p, value: p, slope: 1.0 });
    let family = ClosureFamily::new(1, 1, Domain::interval(p - h, p + h), move |v| {
        let (t, x) = (&v[0], &v[1]);
        vec![x + &(t * &(x.scale(-1.0) + p))]
    });
    Fixture {
        name: "staircase-step",
        relation: Box::new(StepRelation { l: 3.0, reference: f0.clone(), budget }),
        f0,
        family: Box::new(family),
        v0: V0::finite(vec![vec![p]]),
        k: 1,
        schedule: Schedule { deltas: default_deltas(12), eps: vec![h] },
        grid: GridSpec::default(),
    }
}

/// `V₀ = {±1}` with `F(t) = ±10t` near `±1`: no section with slope in `(−1, 1)` can match both.
pub fn remark33() -> Fixture {
    let domain = Domain { boxes: vec![vec![(-2.0, 0.0)], vec![(0.0, 2.0)]] };
    let family = ClosureFamily::new(1, 1, domain, |v| {
        let sign = v[1].value().signum();
        vec![v[0].scale(10.0 * sign)]
    });
    Fixture {
        name: "remark33",
        f0: Arc::new(AffineMap { p: 0.0, value: 0.0, slope: 0.0 }),
        family: Box::new(family),
        relation: Box::new(SlopeBound { l: 1.0 }),
        v0: V0::finite(vec![vec![-1.0], vec![1.0]]),
        k: 1,
        schedule: Schedule { deltas: default_deltas(10), eps: vec![0.9, 0.45, 0.225] },
        grid: GridSpec::default(),
    }
}

/// `|∂f/∂x| < 2` in the plane.
struct PartialXBound;

impl OpenRelation for PartialXBound {
    fn order(&self) -> usize {
        1
    }
    fn margin(&self, _x: &[f64], jets: &[MultiJet]) -> f64 {
        (2.0 - jets[0].deriv(&[1, 0]).abs()) / 2.0
    }
}

/// `F(t)(x, y) = t·x·sin(1/y)` on `y > 0` with `V₀` the ray `x = 0, y > 0`, sampled at `y = 2^{-j}`.
/// The ray is not closed: `∂_x F(1) = sin(1/y)` has no limit at the origin.
pub fn remark32() -> Fixture {
    let domain = Domain { boxes: vec![vec![(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)]] };
    let family = ClosureFamily::new(2, 1, domain, |v| vec![&(&v[0] * &v[1]) * &v[2].recip().sin()]);
    let points = (1..=12).map(|j| vec![0.0, 0.5f64.powi(j)]).collect();
    Fixture {
        name: "remark32",
        f0: Arc::new(ClosureMap::new(2, 1, |v| vec![v[0].scale(0.0)])),
        family: Box::new(family),
        relation: Box::new(PartialXBound),
        v0: V0 { points, limit_points: vec![vec![0.0, 0.0]] },
        k: 1,
        schedule: Schedule { deltas: default_deltas(6), eps: vec![0.5, 0.25] },
        grid: GridSpec::default(),
    }
}
