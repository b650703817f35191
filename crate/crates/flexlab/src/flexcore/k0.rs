use super::{DeformationFamily, FlexError, JetMap};
use crate::cutoff::smooth_step;

type Scalar = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// The `k = 0` gluing `f(t)(v) = F(t·τ(r*(v)))(v)` with `τ = 1` on `[0, 1]` and `τ = 0` on `[2, ∞)`.
pub struct GluedK0<'a> {
    f0: &'a dyn JetMap,
    family: &'a dyn DeformationFamily,
    r_star: &'a Scalar,
}

/// `τ(r) = 1 − s(r − 1)` with the smooth step `s`.
pub fn k0_profile(r: f64) -> f64 {
    1.0 - smooth_step(r - 1.0, 0).value()
}

/// Checks `r ≤ r* ≤ r + 1/2` and that `{r* < 2}` lies in `U` on the given grid.
pub fn glue_k0<'a>(
    f0: &'a dyn JetMap,
    family: &'a dyn DeformationFamily,
    r: &Scalar,
    r_star: &'a Scalar,
    grid: &[Vec<f64>],
) -> Result<GluedK0<'a>, FlexError> {
    if f0.dim() != family.dim() || f0.components() != family.components() {
        return Err(FlexError::Dimension("f₀ and F disagree on dimensions".into()));
    }
    for x in grid {
        let (d, ds) = (r(x), r_star(x));
        if !(d <= ds && ds <= d + 0.5) {
            return Err(FlexError::Pinching(x.clone()));
        }
        if ds < 2.0 && !family.domain().contains(x) {
            return Err(FlexError::SupportOutsideDomain { center: x.clone(), radius: 0.0 });
        }
    }
    Ok(GluedK0 { f0, family, r_star })
}

impl GluedK0<'_> {
    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let rs = (self.r_star)(x);
        let tau = if rs >= 2.0 { 0.0 } else { k0_profile(rs) };
        if t == 0.0 || tau == 0.0 {
            return self.f0.eval(x, 0).iter().map(|j| j.value()).collect();
        }
        self.family.eval(t * tau, x, 0).iter().map(|j| j.value()).collect()
    }

    /// Largest jump between consecutive points of `path`; shrinks under refinement when `f(t)` is continuous.
    pub fn continuity_modulus(&self, t: f64, path: &[Vec<f64>]) -> f64 {
        let vals: Vec<Vec<f64>> = path.iter().map(|x| self.eval(t, x)).collect();
        vals.windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}
