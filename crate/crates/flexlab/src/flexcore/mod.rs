//! Gluing engine: `f(t)(v) = F̃(t·τ(v), v)` with exact jets, margin
//! certification on grids and a calibration search over cutoff parameters.

mod calibrate;
pub mod fixtures;
mod glue;
mod k0;
mod maps;
mod mollify;
mod relation;

pub use calibrate::{calibrate, CalibrationFailure, CalibrationOutcome, FailureReason, GridSpec, Schedule, TraceEntry};
pub use glue::{error_term, glue, radial_grid, verify_relation, GluedFamily, MarginReport, RadialCutoff};
pub use k0::{glue_k0, k0_profile, GluedK0};
pub use maps::{AffineMap, ClosureFamily, ClosureMap, StraightLine};
pub use mollify::{bump, mollify_path, MollifiedPath};
pub use relation::{plane_curvature, Curvature, OpenRelation, SlopeBound, StepRelation, Unrestricted};

use crate::multijet::MultiJet;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FlexError {
    #[error("cutoff support not contained in U (ball at {center:?}, radius {radius})")]
    SupportOutsideDomain { center: Vec<f64>, radius: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pinching r ≤ r* ≤ r + 1/2 violated at {0:?}")]
    Pinching(Vec<f64>),
    #[error("quadrature produced a non-finite value at t = {0}")]
    Quadrature(f64),
    #[error("order {0} exceeds the jet truncation")]
    Order(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// A section `v ↦ jet` on an open subset of ℝⁿ; vector-valued maps return one jet per component.
pub trait JetMap: Send + Sync {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet>;
}

/// A path of local sections `F(t)` on `U`. Jets are taken jointly in `(t, x)`, `t` first.
pub trait DeformationFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;
    fn domain(&self) -> &Domain;
    fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet>;

    /// Jets at several times for the same `x`; families that can share work across `t` override this.
    fn eval_many(&self, ts: &[f64], x: &[f64], order: usize) -> Vec<Vec<MultiJet>> {
        ts.iter().map(|&t| self.eval(t, x, order)).collect()
    }
}

/// A cutoff field `τ` on ℝⁿ with known support and plateau.
pub trait CutoffField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], order: usize) -> MultiJet;
    /// Closed balls whose union contains `supp τ`.
    fn support_balls(&self) -> Vec<(Vec<f64>, f64)>;
    /// Open balls on which `τ ≡ 1`.
    fn plateau_balls(&self) -> Vec<(Vec<f64>, f64)>;
}

/// Union of open axis-aligned boxes (bounds may be infinite).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub boxes: Vec<Vec<(f64, f64)>>,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain { boxes: vec![vec![(lo, hi)]] }
    }

    pub fn whole(n: usize) -> Self {
        Domain { boxes: vec![vec![(f64::NEG_INFINITY, f64::INFINITY); n]] }
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(0, |b| b.len())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }

    /// Distance from `x` to the complement, 0 if outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.iter().zip(x).map(|(&(lo, hi), &v)| (v - lo).min(hi - v)).fold(f64::INFINITY, f64::min).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Whether the closed ball lies inside one of the boxes.
    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        self.boundary_distance(center) > radius
    }
}

/// The closed set `V₀` carried by a gluing problem, as sample points plus
/// accumulation points that the samples approach but that are not in `V₀`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct V0 {
    pub points: Vec<Vec<f64>>,
    pub limit_points: Vec<Vec<f64>>,
}

impl V0 {
    pub fn finite(points: Vec<Vec<f64>>) -> Self {
        V0 { points, limit_points: Vec::new() }
    }
}

/// Everything `calibrate` needs: `f₀`, the local family, the relation, `V₀` and `k`.
pub struct GlueProblem<'a> {
    pub f0: &'a dyn JetMap,
    pub family: &'a dyn DeformationFamily,
    pub relation: &'a dyn OpenRelation,
    pub v0: V0,
    pub k: usize,
}

#[cfg(test)]
mod tests;
