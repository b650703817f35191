//! Truncated Taylor polynomials in several variables (total degree ≤ order).
//!
//! Coefficients are normalized (`D^β f / β!`) and laid out by graded
//! lexicographic monomial order; layouts for up to four variables are
//! precomputed once and shared.

use crate::jet::{factorial, series, Jet, MAX_ORDER};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

pub const MAX_VARS: usize = 4;

#[derive(Debug)]
pub struct Layout {
    pub nvars: usize,
    pub order: usize,
    exps: Vec<[u8; MAX_VARS]>,
    degree: Vec<u8>,
    lookup: Vec<u16>,
    products: Vec<(u16, u16, u16)>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps: Vec<[u8; MAX_VARS]> = Vec::new();
        for d in 0..=order {
            let mut cur = [0u8; MAX_VARS];
            gen_degree(nvars, d, 0, &mut cur, &mut exps);
        }
        let side = order + 1;
        let mut lookup = vec![u16::MAX; side.pow(nvars as u32)];
        for (i, e) in exps.iter().enumerate() {
            lookup[dense_index(e, nvars, side)] = i as u16;
        }
        let degree: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let mut products = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if (degree[i] + degree[j]) as usize <= order {
                    let mut e = [0u8; MAX_VARS];
                    for v in 0..nvars {
                        e[v] = exps[i][v] + exps[j][v];
                    }
                    let k = lookup[dense_index(&e, nvars, side)];
                    products.push((i as u16, j as u16, k));
                }
            }
        }
        Layout { nvars, order, exps, degree, lookup, products }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, i: usize) -> &[u8] {
        &self.exps[i][..self.nvars]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i] as usize
    }

    /// Index of a multi-index, or `None` if its degree exceeds the order.
    pub fn index(&self, alpha: &[usize]) -> Option<usize> {
        if alpha.len() != self.nvars || alpha.iter().sum::<usize>() > self.order {
            return None;
        }
        let mut e = [0u8; MAX_VARS];
        for (v, &a) in alpha.iter().enumerate() {
            e[v] = a as u8;
        }
        let i = self.lookup[dense_index(&e, self.nvars, self.order + 1)];
        (i != u16::MAX).then_some(i as usize)
    }
}

fn dense_index(e: &[u8; MAX_VARS], nvars: usize, side: usize) -> usize {
    let mut idx = 0;
    for &ev in e.iter().take(nvars) {
        idx = idx * side + ev as usize;
    }
    idx
}

fn gen_degree(nvars: usize, d: usize, v: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
    if v + 1 == nvars {
        cur[v] = d as u8;
        out.push(*cur);
        cur[v] = 0;
        return;
    }
    for a in (0..=d).rev() {
        cur[v] = a as u8;
        gen_degree(nvars, d - a, v + 1, cur, out);
    }
    cur[v] = 0;
}

pub fn layout(nvars: usize, order: usize) -> &'static Layout {
    static TABLE: OnceLock<Vec<Layout>> = OnceLock::new();
    assert!((1..=MAX_VARS).contains(&nvars), "unsupported variable count {nvars}");
    assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
    let t = TABLE.get_or_init(|| {
        let mut v = Vec::new();
        for n in 1..=MAX_VARS {
            for m in 0..=MAX_ORDER {
                v.push(Layout::build(n, m));
            }
        }
        v
    });
    &t[(nvars - 1) * (MAX_ORDER + 1) + order]
}

/// Multivariate truncated Taylor polynomial around a base point.
#[derive(Clone, Debug)]
pub struct MultiJet {
    layout: &'static Layout,
    c: Vec<f64>,
}

impl PartialEq for MultiJet {
    fn eq(&self, o: &Self) -> bool {
        self.nvars() == o.nvars() && self.order() == o.order() && self.c == o.c
    }
}

impl MultiJet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        let layout = layout(nvars, order);
        let mut c = vec![0.0; layout.len()];
        c[0] = value;
        MultiJet { layout, c }
    }

    pub fn zero(nvars: usize, order: usize) -> Self {
        MultiJet::constant(nvars, order, 0.0)
    }

    /// Coordinate function `x_var` seen at a point whose `var`-th coordinate is `x`.
    pub fn variable(nvars: usize, order: usize, var: usize, x: f64) -> Self {
        let mut j = MultiJet::constant(nvars, order, x);
        if order >= 1 {
            let mut alpha = vec![0; nvars];
            alpha[var] = 1;
            let i = j.layout.index(&alpha).unwrap();
            j.c[i] = 1.0;
        }
        j
    }

    /// All coordinate functions at `x`.
    pub fn variables(x: &[f64], order: usize) -> Vec<MultiJet> {
        (0..x.len()).map(|i| MultiJet::variable(x.len(), order, i, x[i])).collect()
    }

    pub fn from_coeffs(nvars: usize, order: usize, c: Vec<f64>) -> Self {
        let layout = layout(nvars, order);
        assert_eq!(c.len(), layout.len());
        MultiJet { layout, c }
    }

    /// Wrap a univariate jet as a one-variable multijet.
    pub fn from_jet(j: &Jet) -> Self {
        MultiJet::from_coeffs(1, j.order(), j.taylor().to_vec())
    }

    /// View a one-variable multijet as a univariate jet.
    pub fn to_jet(&self) -> Jet {
        assert_eq!(self.nvars(), 1);
        Jet::from_taylor(&self.c)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Normalized coefficient `D^α f / α!`.
    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        self.layout.index(alpha).map_or(0.0, |i| self.c[i])
    }

    /// Partial derivative `D^α f` at the base point.
    pub fn deriv(&self, alpha: &[usize]) -> f64 {
        let f: f64 = alpha.iter().map(|&a| factorial(a)).product();
        self.coeff(alpha) * f
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn is_exact_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn is_exact_constant(&self, v: f64) -> bool {
        self.c[0] == v && self.c[1..].iter().all(|&x| x == 0.0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order() {
            return self.clone();
        }
        let l = layout(self.nvars(), order);
        MultiJet { layout: l, c: self.c[..l.len()].to_vec() }
    }

    pub fn scale(&self, s: f64) -> Self {
        MultiJet { layout: self.layout, c: self.c.iter().map(|v| v * s).collect() }
    }

    /// Evaluate the Taylor polynomial at displacement `h` from the base point.
    pub fn eval_poly(&self, h: &[f64]) -> f64 {
        self.eval_poly_filtered(h, |_| true)
    }

    /// Evaluate only the homogeneous part of degree `d` at displacement `h`.
    pub fn eval_homogeneous(&self, h: &[f64], d: usize) -> f64 {
        self.eval_poly_filtered(h, |deg| deg == d)
    }

    fn eval_poly_filtered(&self, h: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.c.len() {
            if !keep(self.layout.degree(i)) {
                continue;
            }
            let mut term = self.c[i];
            for (v, &e) in self.layout.exponent(i).iter().enumerate() {
                term *= h[v].powi(e as i32);
            }
            sum += term;
        }
        sum
    }

    /// Embed into `nvars + 1` variables with a new leading variable on which nothing depends.
    pub fn prepend_var(&self) -> Self {
        let n = self.nvars();
        let l = layout(n + 1, self.order());
        let mut c = vec![0.0; l.len()];
        let mut alpha = vec![0usize; n + 1];
        for i in 0..self.c.len() {
            for (v, &e) in self.layout.exponent(i).iter().enumerate() {
                alpha[v + 1] = e as usize;
            }
            c[l.index(&alpha).unwrap()] = self.c[i];
        }
        MultiJet { layout: l, c }
    }

    /// Restrict to the slice where the leading variable stays at its base value.
    pub fn drop_first_var(&self) -> Self {
        let n = self.nvars();
        assert!(n >= 2);
        let l = layout(n - 1, self.order());
        let mut c = vec![0.0; l.len()];
        for i in 0..self.c.len() {
            let e = self.layout.exponent(i);
            if e[0] != 0 {
                continue;
            }
            let alpha: Vec<usize> = e[1..].iter().map(|&x| x as usize).collect();
            c[l.index(&alpha).unwrap()] = self.c[i];
        }
        MultiJet { layout: l, c }
    }

    /// Substitute into a univariate Taylor series at this jet's value.
    pub fn compose_series(&self, s: &[f64]) -> Self {
        let m = self.order();
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = MultiJet::constant(self.nvars(), m, s[m]);
        for k in (0..m).rev() {
            r = &r * &h;
            r.c[0] += s[k];
        }
        r
    }

    /// `outer ∘ self` for a univariate outer jet taken at `self.value()`.
    pub fn compose_jet(&self, outer: &Jet) -> Self {
        let m = self.order().min(outer.order());
        self.truncate(m).compose_series(outer.taylor())
    }

    /// `outer(inners)`: `outer` is a Taylor polynomial in `inners.len()`
    /// variables taken at the inner values.
    pub fn compose(outer: &MultiJet, inners: &[MultiJet]) -> MultiJet {
        assert_eq!(outer.nvars(), inners.len());
        let n = inners[0].nvars();
        let m = inners[0].order().min(outer.order());
        let hs: Vec<MultiJet> = inners
            .iter()
            .map(|j| {
                let mut h = j.truncate(m);
                h.c[0] = 0.0;
                h
            })
            .collect();
        // powers[v][e] = h_v^e
        let mut powers: Vec<Vec<MultiJet>> = Vec::with_capacity(hs.len());
        for h in &hs {
            let mut p = vec![MultiJet::constant(n, m, 1.0)];
            for e in 1..=m {
                let next = &p[e - 1] * h;
                p.push(next);
            }
            powers.push(p);
        }
        let mut out = MultiJet::zero(n, m);
        let ol = outer.layout;
        for i in 0..outer.c.len() {
            if ol.degree(i) > m || outer.c[i] == 0.0 {
                continue;
            }
            let exps = ol.exponent(i);
            let mut term: Option<MultiJet> = None;
            for (v, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                term = Some(match term {
                    None => powers[v][e as usize].clone(),
                    Some(t) => &t * &powers[v][e as usize],
                });
            }
            match term {
                None => out.c[0] += outer.c[i],
                Some(t) => {
                    for (o, x) in out.c.iter_mut().zip(&t.c) {
                        *o += outer.c[i] * x;
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        self.compose_series(&series::recip(self.value(), self.order()))
    }
    pub fn exp(&self) -> Self {
        self.compose_series(&series::exp(self.value(), self.order()))
    }
    pub fn ln(&self) -> Self {
        self.compose_series(&series::ln(self.value(), self.order()))
    }
    pub fn sqrt(&self) -> Self {
        self.compose_series(&series::powf(self.value(), 0.5, self.order()))
    }
    pub fn sin(&self) -> Self {
        self.compose_series(&series::sin(self.value(), self.order()))
    }
    pub fn cos(&self) -> Self {
        self.compose_series(&series::cos(self.value(), self.order()))
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut o = self.clone();
        o.c[0] += s;
        o
    }
}

impl Mul for &MultiJet {
    type Output = MultiJet;
    fn mul(self, o: &MultiJet) -> MultiJet {
        let (a, b) = if self.order() <= o.order() { (self, o) } else { (o, self) };
        let b = if b.order() == a.order() { b.clone() } else { b.truncate(a.order()) };
        debug_assert_eq!(a.nvars(), b.nvars());
        let mut c = vec![0.0; a.c.len()];
        for &(i, j, k) in &a.layout.products {
            c[k as usize] += a.c[i as usize] * b.c[j as usize];
        }
        MultiJet { layout: a.layout, c }
    }
}

impl Add for &MultiJet {
    type Output = MultiJet;
    fn add(self, o: &MultiJet) -> MultiJet {
        let m = self.order().min(o.order());
        let l = layout(self.nvars(), m);
        let c = (0..l.len()).map(|i| self.c[i] + o.c[i]).collect();
        MultiJet { layout: l, c }
    }
}

impl Sub for &MultiJet {
    type Output = MultiJet;
    fn sub(self, o: &MultiJet) -> MultiJet {
        let m = self.order().min(o.order());
        let l = layout(self.nvars(), m);
        let c = (0..l.len()).map(|i| self.c[i] - o.c[i]).collect();
        MultiJet { layout: l, c }
    }
}

impl Neg for &MultiJet {
    type Output = MultiJet;
    fn neg(self) -> MultiJet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for MultiJet {
            type Output = MultiJet;
            fn $m(self, o: MultiJet) -> MultiJet {
                (&self).$m(&o)
            }
        }
        impl $tr<&MultiJet> for MultiJet {
            type Output = MultiJet;
            fn $m(self, o: &MultiJet) -> MultiJet {
                (&self).$m(o)
            }
        }
        impl $tr<MultiJet> for &MultiJet {
            type Output = MultiJet;
            fn $m(self, o: MultiJet) -> MultiJet {
                self.$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for MultiJet {
    type Output = MultiJet;
    fn neg(self) -> MultiJet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &MultiJet {
    type Output = MultiJet;
    fn mul(self, s: f64) -> MultiJet {
        self.scale(s)
    }
}

impl Mul<f64> for MultiJet {
    type Output = MultiJet;
    fn mul(self, s: f64) -> MultiJet {
        self.scale(s)
    }
}

impl Add<f64> for MultiJet {
    type Output = MultiJet;
    fn add(self, s: f64) -> MultiJet {
        self.add_scalar(s)
    }
}

impl Add<f64> for &MultiJet {
    type Output = MultiJet;
    fn add(self, s: f64) -> MultiJet {
        self.add_scalar(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn layout_sizes_are_binomial() {
        // C(n+m, m)
        assert_eq!(layout(1, 6).len(), 7);
        assert_eq!(layout(2, 2).len(), 6);
        assert_eq!(layout(3, 6).len(), 84);
        assert_eq!(layout(4, 6).len(), 210);
    }

    #[test]
    fn mixed_partials_of_product() {
        // f = x^2 y at (1.5, -2): f_x = 2xy, f_xy = 2x, f_yy = 0, f_xx = 2y
        let v = MultiJet::variables(&[1.5, -2.0], 3);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert_relative_eq!(f.deriv(&[1, 0]), 2.0 * 1.5 * -2.0);
        assert_relative_eq!(f.deriv(&[1, 1]), 3.0);
        assert_relative_eq!(f.deriv(&[2, 0]), -4.0);
        assert_relative_eq!(f.deriv(&[0, 2]), 0.0);
        assert_relative_eq!(f.deriv(&[2, 1]), 2.0);
    }

    #[test]
    fn bivariate_compose_matches_direct() {
        // g(s, x) = s * x^2 + sin(s), with s = x*y and x = x at (0.3, 0.7)
        let v = MultiJet::variables(&[0.3, 0.7], 3);
        let s = &v[0] * &v[1];
        let direct = &(&s * &(&v[0] * &v[0])) + &s.sin();
        let outer_v = MultiJet::variables(&[s.value(), 0.3], 3);
        let outer = &(&outer_v[0] * &(&outer_v[1] * &outer_v[1])) + &outer_v[0].sin();
        let composed = MultiJet::compose(&outer, &[s.clone(), v[0].clone()]);
        for (a, b) in composed.coeffs().iter().zip(direct.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn prepend_then_drop_is_identity() {
        let v = MultiJet::variables(&[0.2, 0.4], 4);
        let f = (&v[0] * &v[1]).exp();
        let back = f.prepend_var().drop_first_var();
        assert_eq!(back, f);
    }

    #[test]
    fn homogeneous_part_evaluation() {
        let v = MultiJet::variables(&[0.0, 0.0], 2);
        let f = &(&v[1] * &v[1]) + &v[0];
        assert_relative_eq!(f.eval_homogeneous(&[0.5, 3.0], 2), 9.0);
        assert_relative_eq!(f.eval_homogeneous(&[0.5, 3.0], 1), 0.5);
    }
}
