use super::JetMap;
use crate::multijet::MultiJet;
use std::sync::Arc;

/// An open relation on k-jets, given through a margin that is positive exactly inside.
pub trait OpenRelation: Send + Sync {
    /// Jet order the relation reads.
    fn order(&self) -> usize;
    fn margin(&self, x: &[f64], jets: &[MultiJet]) -> f64;
    fn holds(&self, x: &[f64], jets: &[MultiJet]) -> bool {
        self.margin(x, jets) > 0.0
    }
}

/// The full jet space.
pub struct Unrestricted {
    pub order: usize,
}

impl OpenRelation for Unrestricted {
    fn order(&self) -> usize {
        self.order
    }
    fn margin(&self, _x: &[f64], _jets: &[MultiJet]) -> f64 {
        1.0
    }
}

/// `|f′| < L` for scalar functions of one variable; margin is `(L − |f′|)/L`.
pub struct SlopeBound {
    pub l: f64,
}

impl OpenRelation for SlopeBound {
    fn order(&self) -> usize {
        1
    }
    fn margin(&self, _x: &[f64], jets: &[MultiJet]) -> f64 {
        (self.l - jets[0].deriv(&[1]).abs()) / self.l
    }
}

/// `{|f′| < L} ∩ {|f − reference| < budget}`, margins normalized and combined by `min`.
pub struct StepRelation {
    pub l: f64,
    pub reference: Arc<dyn JetMap>,
    pub budget: f64,
}

impl OpenRelation for StepRelation {
    fn order(&self) -> usize {
        1
    }
    fn margin(&self, x: &[f64], jets: &[MultiJet]) -> f64 {
        let slope = (self.l - jets[0].deriv(&[1]).abs()) / self.l;
        let r = self.reference.eval(x, 0)[0].value();
        let value = (self.budget - (jets[0].value() - r).abs()) / self.budget;
        slope.min(value)
    }
}

/// Signed curvature `(x′y″ − y′x″)/|c′|³` of a plane curve from 2-jets; `None` where `c′ = 0`.
pub fn plane_curvature(x: &MultiJet, y: &MultiJet) -> Option<f64> {
    let (x1, y1) = (x.deriv(&[1]), y.deriv(&[1]));
    let (x2, y2) = (x.deriv(&[2]), y.deriv(&[2]));
    let speed = x1.hypot(y1);
    (speed > 0.0).then(|| (x1 * y2 - y1 * x2) / speed.powi(3))
}

/// `κ > κ₀` for plane curves; margin is `κ − κ₀`.
pub struct Curvature {
    pub kappa0: f64,
}

impl OpenRelation for Curvature {
    fn order(&self) -> usize {
        2
    }
    fn margin(&self, _x: &[f64], jets: &[MultiJet]) -> f64 {
        plane_curvature(&jets[0], &jets[1]).map_or(f64::NEG_INFINITY, |k| k - self.kappa0)
    }
}
