use super::{DeformationFamily, Domain, JetMap};
use crate::multijet::MultiJet;

type MapFn = dyn Fn(&[MultiJet]) -> Vec<MultiJet> + Send + Sync;

/// A section given by a formula in jet arithmetic; the closure receives the coordinate jets.
pub struct ClosureMap {
    dim: usize,
    components: usize,
    f: Box<MapFn>,
}

impl ClosureMap {
    pub fn new(
        dim: usize,
        components: usize,
        f: impl Fn(&[MultiJet]) -> Vec<MultiJet> + Send + Sync + 'static,
    ) -> Self {
        ClosureMap { dim, components, f: Box::new(f) }
    }
}

impl JetMap for ClosureMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        (self.f)(&MultiJet::variables(x, order))
    }
}

/// A family given by a formula; the closure receives `[t, x_1, ..., x_n]` as jets.
pub struct ClosureFamily {
    dim: usize,
    components: usize,
    domain: Domain,
    f: Box<MapFn>,
}

impl ClosureFamily {
    pub fn new(
        dim: usize,
        components: usize,
        domain: Domain,
        f: impl Fn(&[MultiJet]) -> Vec<MultiJet> + Send + Sync + 'static,
    ) -> Self {
        ClosureFamily { dim, components, domain, f: Box::new(f) }
    }
}

impl DeformationFamily for ClosureFamily {
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        let mut p = Vec::with_capacity(x.len() + 1);
        p.push(t);
        p.extend_from_slice(x);
        (self.f)(&MultiJet::variables(&p, order))
    }
}

/// `F(t) = (1−t)·from + t·to` on `domain`.
pub struct StraightLine<'a> {
    pub from: &'a dyn JetMap,
    pub to: &'a dyn JetMap,
    pub domain: Domain,
}

impl StraightLine<'_> {
    fn combine(a: &[MultiJet], b: &[MultiJet], t: f64, order: usize) -> Vec<MultiJet> {
        a.iter()
            .zip(b)
            .map(|(a, b)| {
                let tv = MultiJet::variable(a.nvars() + 1, order, 0, t);
                let al = a.prepend_var();
                let diff = &b.prepend_var() - &al;
                &al + &(&tv * &diff)
            })
            .collect()
    }
}

impl DeformationFamily for StraightLine<'_> {
    fn dim(&self) -> usize {
        self.from.dim()
    }
    fn components(&self) -> usize {
        self.from.components()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn eval(&self, t: f64, x: &[f64], order: usize) -> Vec<MultiJet> {
        let a = self.from.eval(x, order);
        let b = self.to.eval(x, order);
        Self::combine(&a, &b, t, order)
    }
    fn eval_many(&self, ts: &[f64], x: &[f64], order: usize) -> Vec<Vec<MultiJet>> {
        let a = self.from.eval(x, order);
        let b = self.to.eval(x, order);
        ts.iter().map(|&t| Self::combine(&a, &b, t, order)).collect()
    }
}

/// `x ↦ value + slope·(x − p)` on ℝ.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub p: f64,
    pub value: f64,
    pub slope: f64,
}

impl JetMap for AffineMap {
    fn dim(&self) -> usize {
        1
    }
    fn components(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
        let mut c = vec![0.0; order + 1];
        c[0] = self.value + self.slope * (x[0] - self.p);
        if order >= 1 {
            c[1] = self.slope;
        }
        vec![MultiJet::from_coeffs(1, order, c)]
    }
}
