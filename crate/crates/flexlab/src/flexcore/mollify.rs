use super::{DeformationFamily, Domain, FlexError};
use crate::jet::Jet;
use crate::multijet::{layout, MultiJet};
use crate::quad::adaptive_simpson;
use std::sync::OnceLock;

const TOL: f64 = 1e-8;

fn raw_bump(u: f64, order: usize) -> Jet {
    if u.abs() >= 1.0 {
        return Jet::zero(order);
    }
    let v = Jet::variable(u, order);
    let w = (1.0 - v * v).recip();
    (w * -1.0).exp()
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| adaptive_simpson(&|u| vec![raw_bump(u, 0).value()], -1.0, 1.0, 1e-15)[0])
}

/// The mollifier `χ(u) ∝ exp(−1/(1−u²))` on [−1, 1], normalized to unit mass.
pub fn bump(u: f64, order: usize) -> Jet {
    raw_bump(u, order) * (1.0 / bump_mass())
}

/// `F_s^δ(t) = ∫ χ(u) 𝐅(s, (1+2δ)t − δ − δu) du` where `𝐅(s, σ) = F(s·clamp(σ, 0, 1))`.
pub struct MollifiedPath<'a> {
    family: &'a dyn DeformationFamily,
    delta: f64,
    s: f64,
    /// Largest deviation from the three endpoint identities seen on the certification grid.
    pub endpoint_error: f64,
}

pub fn mollify_path<'a>(
    family: &'a dyn DeformationFamily,
    delta: f64,
    s: f64,
    check_points: &[Vec<f64>],
) -> Result<MollifiedPath<'a>, FlexError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(FlexError::Parameter(format!("mollification width {delta} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(FlexError::Parameter(format!("path parameter s = {s} outside [0, 1]")));
    }
    let mut m = MollifiedPath { family, delta, s, endpoint_error: 0.0 };
    let zero = MollifiedPath { s: 0.0, ..m.shallow() };
    let mut err = 0.0f64;
    for x in check_points {
        let f0 = family.eval(0.0, x, 0);
        let fs = family.eval(s, x, 0);
        let pairs = [
            (m.try_eval(0.0, x, 0)?, &f0, 0.0),
            (m.try_eval(1.0, x, 0)?, &fs, 1.0),
            (zero.try_eval(0.5, x, 0)?, &f0, 0.5),
        ];
        for (got, want, t) in pairs {
            for (g, w) in got.iter().zip(want.iter()) {
                let d = (g.value() - w.value()).abs();
                if !d.is_finite() {
                    return Err(FlexError::Quadrature(t));
                }
                err = err.max(d);
            }
        }
    }
    m.endpoint_error = err;
    Ok(m)
}

impl<'a> MollifiedPath<'a> {
    fn shallow(&self) -> MollifiedPath<'a> {
        MollifiedPath { family: self.family, delta: self.delta, s: self.s, endpoint_error: self.endpoint_error }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn path(&self, sigma: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        let t = self.s * sigma.clamp(0.0, 1.0);
        self.family.eval(t, x, order).iter().map(|j| j.drop_first_var()).collect()
    }

    pub fn try_eval(&self, t: f64, x: &[f64], order: usize) -> Result<Vec<MultiJet>, FlexError> {
        let d = self.delta;
        let c = (1.0 + 2.0 * d) * t - d;
        let n = x.len();
        let full = layout(n + 1, order);
        let comps = self.family.components();
        if c + d <= 0.0 || c - d >= 1.0 || self.s == 0.0 {
            let sigma = if c + d <= 0.0 { 0.0 } else { 1.0 };
            return Ok(self.path(sigma, x, order).iter().map(|j| j.prepend_var()).collect());
        }
        let xl = layout(n, order);
        let width = comps * xl.len();
        // integrand: for each t-order a, χ_a(u) times every x-coefficient of 𝐅
        let integrand = |u: f64| {
            let chi = bump(u, order);
            let fx = self.path(c - d * u, x, order);
            let mut out = vec![0.0; (order + 1) * width];
            for a in 0..=order {
                let ca = chi.taylor()[a];
                for (k, j) in fx.iter().enumerate() {
                    for (i, v) in j.coeffs().iter().enumerate() {
                        out[a * width + k * xl.len() + i] = ca * v;
                    }
                }
            }
            out
        };
        let mut breaks = vec![-1.0, 1.0];
        for sigma in [0.0, 1.0] {
            let u = (c - sigma) / d;
            if u > -1.0 && u < 1.0 {
                breaks.push(u);
            }
        }
        breaks.sort_by(f64::total_cmp);
        let mut total = vec![0.0; (order + 1) * width];
        for w in breaks.windows(2) {
            let part = adaptive_simpson(&integrand, w[0], w[1], TOL / 4.0);
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(FlexError::Quadrature(t));
        }
        // d/dt acts through c with factor (1+2δ), and u = (c − σ)/δ contributes 1/δ per order
        let k = (1.0 + 2.0 * d) / d;
        let mut out = Vec::with_capacity(comps);
        for comp in 0..comps {
            let mut coeffs = vec![0.0; full.len()];
            for (idx, cf) in coeffs.iter_mut().enumerate() {
                let alpha: Vec<usize> = full.exponent(idx).iter().map(|&e| e as usize).collect();
                let a = alpha[0];
                let xi = xl.index(&alpha[1..]).expect("x-degree within order");
                *cf = k.powi(a as i32) * total[a * width + comp * xl.len() + xi];
            }
            out.push(MultiJet::from_coeffs(n + 1, order, coeffs));
        }
        Ok(out)
    }
}

impl DeformationFamily for MollifiedPath<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }
    fn components(&self) -> usize {
        self.family.components()
    }
    fn domain(&self) -> &Domain {
        self.family.domain()
    }
    fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        self.try_eval(t, x, order).unwrap_or_else(|_| {
            let nan = MultiJet::constant(x.len() + 1, order, f64::NAN);
            vec![nan; self.family.components()]
        })
    }
}
