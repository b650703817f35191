//! Univariate truncated Taylor arithmetic.
//!
//! A [`Jet`] stores normalized Taylor coefficients `f^(k)(x0) / k!` up to a
//! fixed order. Elementary functions are applied by substituting the
//! shifted inner jet into the outer function's Taylor series at the inner
//! value, which is the same code path used by [`crate::multijet::MultiJet`].

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 6;

const FACT: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];

pub(crate) fn factorial(k: usize) -> f64 {
    FACT[k]
}

/// Value and derivatives of a scalar function of one variable, truncated at `order`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; MAX_ORDER + 1],
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = value;
        Jet { order, c }
    }

    /// The identity map seen at `x`.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut j = Jet::constant(x, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn zero(order: usize) -> Self {
        Jet::constant(0.0, order)
    }

    /// Build from normalized Taylor coefficients.
    pub fn from_taylor(coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty() && coeffs.len() <= MAX_ORDER + 1);
        let mut c = [0.0; MAX_ORDER + 1];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Jet { order: coeffs.len() - 1, c }
    }

    /// Build from plain derivatives `(f, f', f'', ...)`.
    pub fn from_derivs(derivs: &[f64]) -> Self {
        let t: Vec<f64> = derivs.iter().enumerate().map(|(k, d)| d / factorial(k)).collect();
        Jet::from_taylor(&t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative (not the Taylor coefficient).
    pub fn deriv(&self, k: usize) -> f64 {
        if k > self.order {
            0.0
        } else {
            self.c[k] * factorial(k)
        }
    }

    /// `(f, f', ..., f^(order))`, the layout used in reports.
    pub fn derivs(&self) -> Vec<f64> {
        (0..=self.order).map(|k| self.deriv(k)).collect()
    }

    pub fn taylor(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut c = [0.0; MAX_ORDER + 1];
        c[..=order].copy_from_slice(&self.c[..=order]);
        Jet { order, c }
    }

    pub fn is_finite(&self) -> bool {
        self.taylor().iter().all(|v| v.is_finite())
    }

    /// True when every coefficient is exactly zero.
    pub fn is_exact_zero(&self) -> bool {
        self.taylor().iter().all(|&v| v == 0.0)
    }

    /// True when the jet is exactly the constant `v`.
    pub fn is_exact_constant(&self, v: f64) -> bool {
        self.c[0] == v && self.taylor()[1..].iter().all(|&x| x == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for v in &mut out.c[..=self.order] {
            *v *= s;
        }
        out
    }

    /// Substitute this jet (the inner function) into a Taylor series given
    /// at this jet's value. `series[k]` is the k-th normalized coefficient.
    pub fn compose_series(&self, series: &[f64]) -> Self {
        let m = self.order;
        let mut h = *self;
        h.c[0] = 0.0;
        let mut r = Jet::constant(series[m], m);
        for k in (0..m).rev() {
            r = r * h;
            r.c[0] += series[k];
        }
        r
    }

    /// `outer ∘ self`, where `outer` is a jet of the outer function taken at `self.value()`.
    pub fn compose(&self, outer: &Jet) -> Self {
        let m = self.order.min(outer.order);
        self.truncate(m).compose_series(outer.taylor())
    }

    pub fn recip(&self) -> Self {
        self.compose_series(&series::recip(self.value(), self.order))
    }
    pub fn exp(&self) -> Self {
        self.compose_series(&series::exp(self.value(), self.order))
    }
    pub fn ln(&self) -> Self {
        self.compose_series(&series::ln(self.value(), self.order))
    }
    pub fn sqrt(&self) -> Self {
        self.compose_series(&series::powf(self.value(), 0.5, self.order))
    }
    pub fn powf(&self, p: f64) -> Self {
        self.compose_series(&series::powf(self.value(), p, self.order))
    }
    pub fn sin(&self) -> Self {
        self.compose_series(&series::sin(self.value(), self.order))
    }
    pub fn cos(&self) -> Self {
        self.compose_series(&series::cos(self.value(), self.order))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = self.c[k] + o.c[k];
        }
        Jet { order, c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = self.c[k] - o.c[k];
        }
        Jet { order, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for i in 0..=order {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..=(order - i) {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { order, c }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, s: f64) -> Jet {
        self.c[0] -= s;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, s: f64) -> Jet {
        self.scale(1.0 / s)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        -j + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

/// Normalized Taylor coefficients of elementary functions at a base point.
pub mod series {
    use super::{factorial, MAX_ORDER};

    pub type Series = [f64; MAX_ORDER + 1];

    pub fn recip(y: f64, m: usize) -> Series {
        let mut s = [0.0; MAX_ORDER + 1];
        let inv = 1.0 / y;
        let mut p = inv;
        for (k, v) in s.iter_mut().enumerate().take(m + 1) {
            *v = if k % 2 == 0 { p } else { -p };
            p *= inv;
        }
        s
    }

    pub fn exp(y: f64, m: usize) -> Series {
        let mut s = [0.0; MAX_ORDER + 1];
        let e = y.exp();
        for (k, v) in s.iter_mut().enumerate().take(m + 1) {
            *v = e / factorial(k);
        }
        s
    }

    pub fn ln(y: f64, m: usize) -> Series {
        let mut s = [0.0; MAX_ORDER + 1];
        s[0] = y.ln();
        let inv = 1.0 / y;
        let mut p = 1.0;
        for (k, v) in s.iter_mut().enumerate().take(m + 1).skip(1) {
            p *= inv;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *v = sign * p / k as f64;
        }
        s
    }

    /// `y^p` expanded around `y > 0`.
    pub fn powf(y: f64, p: f64, m: usize) -> Series {
        let mut s = [0.0; MAX_ORDER + 1];
        let mut binom = 1.0;
        for (k, v) in s.iter_mut().enumerate().take(m + 1) {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            *v = binom * y.powf(p - k as f64);
        }
        s
    }

    // `sincos` can differ from `sin`/`cos` in the last bit, and LLVM fuses adjacent calls into
    // it; `black_box` keeps the values equal to the scalar calls.
    pub fn sin(y: f64, m: usize) -> Series {
        let (sn, cs) = (y.sin(), std::hint::black_box(y).cos());
        let cyc = [sn, cs, -sn, -cs];
        let mut s = [0.0; MAX_ORDER + 1];
        for (k, v) in s.iter_mut().enumerate().take(m + 1) {
            *v = cyc[k % 4] / factorial(k);
        }
        s
    }

    pub fn cos(y: f64, m: usize) -> Series {
        let (sn, cs) = (y.sin(), std::hint::black_box(y).cos());
        let cyc = [cs, -sn, -cs, sn];
        let mut s = [0.0; MAX_ORDER + 1];
        for (k, v) in s.iter_mut().enumerate().take(m + 1) {
            *v = cyc[k % 4] / factorial(k);
        }
        s
    }
}
