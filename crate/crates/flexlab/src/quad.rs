//! Quadrature rules shared by mollification and the staircase integral checks.

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_a^b f` with an `n`-point Gauss–Legendre rule.
pub fn gauss_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (m, h) = ((a + b) / 2.0, (b - a) / 2.0);
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

fn simpson(fa: &[f64], fm: &[f64], fb: &[f64], h: f64) -> Vec<f64> {
    fa.iter().zip(fm).zip(fb).map(|((a, m), b)| h / 6.0 * (a + 4.0 * m + b)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Adaptive Simpson for vector-valued integrands, error controlled in the max norm.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, tol: f64) -> Vec<f64> {
    let (fa, fb, fm) = (f(a), f(b), f((a + b) / 2.0));
    let whole = simpson(&fa, &fm, &fb, b - a);
    let mut out = vec![0.0; fa.len()];
    recurse(f, a, b, &fa, &fm, &fb, &whole, tol, 48, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &dyn Fn(f64) -> Vec<f64>,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    out: &mut [f64],
) {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, &flm, fm, m - a);
    let right = simpson(fm, &frm, fb, b - m);
    let mut both = left.clone();
    add_scaled(&mut both, &right, 1.0);
    let err = max_diff(&both, whole);
    if depth == 0 || err <= 15.0 * tol || !err.is_finite() {
        add_scaled(out, &both, 1.0);
        let corr: Vec<f64> = both.iter().zip(whole).map(|(x, y)| (x - y) / 15.0).collect();
        add_scaled(out, &corr, 1.0);
        return;
    }
    recurse(f, a, m, fa, &flm, fm, &left, tol / 2.0, depth - 1, out);
    recurse(f, m, b, fm, &frm, fb, &right, tol / 2.0, depth - 1, out);
}
