use super::*;
use crate::cutoff::Cutoff;
use proptest::prelude::*;
use std::sync::Arc;

const P: f64 = 0.3;
const EPS: f64 = 0.2;
const DELTA: f64 = 0.05;

fn identity() -> AffineMap {
    AffineMap { p: 0.0, value: 0.0, slope: 1.0 }
}

/// `F(t)(x) = (1−t)x + t·p` near `p`.
fn collapse_family() -> ClosureFamily {
    ClosureFamily::new(1, 1, Domain::interval(P - 0.5, P + 0.5), |v| {
        let (t, x) = (&v[0], &v[1]);
        vec![&(&t.scale(-1.0) + 1.0) * x + t.scale(P)]
    })
}

fn radial() -> RadialCutoff {
    RadialCutoff::new(vec![vec![P]], &[EPS], DELTA).unwrap()
}

struct ConstField(f64);

impl CutoffField for ConstField {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], order: usize) -> MultiJet {
        MultiJet::constant(x.len(), order, self.0)
    }
    fn support_balls(&self) -> Vec<(Vec<f64>, f64)> {
        if self.0 == 0.0 {
            Vec::new()
        } else {
            vec![(vec![P], 0.4)]
        }
    }
    fn plateau_balls(&self) -> Vec<(Vec<f64>, f64)> {
        Vec::new()
    }
}

fn value(g: &GluedFamily, t: f64, x: f64) -> f64 {
    g.eval(t, &[x], 0)[0].value()
}

#[test]
fn zero_cutoff_leaves_f0() {
    let (f0, fam, tau) = (identity(), collapse_family(), ConstField(0.0));
    let g = glue(&f0, &fam, &tau, 1).unwrap();
    for &x in &[0.1, 0.3, 0.45] {
        for &t in &[0.0, 0.5, 1.0] {
            assert_eq!(value(&g, t, x), x);
        }
    }
}

#[test]
fn unit_cutoff_gives_family_end() {
    let (f0, fam, tau) = (identity(), collapse_family(), ConstField(1.0));
    let g = glue(&f0, &fam, &tau, 1).unwrap();
    for &x in &[0.1, 0.3, 0.45] {
        assert_eq!(value(&g, 1.0, x), P);
        assert_eq!(g.eval(1.0, &[x], 1)[0].deriv(&[1]), 0.0);
    }
}

#[test]
fn collapse_keeps_center_fixed() {
    let (f0, fam, tau) = (identity(), collapse_family(), radial());
    let g = glue(&f0, &fam, &tau, 1).unwrap();
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        assert!((value(&g, t, P) - P).abs() <= f64::EPSILON * P);
    }
    // between the plateau and the support edge f(1) interpolates
    let x = P + 0.7 * EPS;
    let v = value(&g, 1.0, x);
    assert!(v > P && v < x);
}

#[test]
fn endpoint_identities() {
    let (f0, fam, tau) = (identity(), collapse_family(), radial());
    let g = glue(&f0, &fam, &tau, 2).unwrap();
    for i in 0..400 {
        let x = P - 0.45 + 0.9 * i as f64 / 399.0;
        let j0 = g.eval(0.0, &[x], 2);
        let f = f0.eval(&[x], 2);
        for a in 0..=2 {
            assert!((j0[0].deriv(&[a]) - f[0].deriv(&[a])).abs() < 1e-12);
        }
        for &t in &[0.25, 1.0] {
            let jt = g.eval(t, &[x], 2);
            if (x - P).abs() >= EPS {
                assert_eq!(jt, f);
            }
            if (x - P).abs() < DELTA * EPS {
                let ft: Vec<MultiJet> = fam.eval(t, &[x], 2).iter().map(|j| j.drop_first_var()).collect();
                assert_eq!(jt, ft);
            }
        }
    }
}

#[test]
fn error_term_matches_hand_chain_rule() {
    let (f0, fam, tau) = (identity(), collapse_family(), radial());
    let g = glue(&f0, &fam, &tau, 1).unwrap();
    let x = P + 0.7 * EPS;
    let c = Cutoff::new(DELTA, EPS).unwrap();
    let tj = c.eval(x - P, 1);
    // ∂_t F̃ = p − x, so the correction is τ′(x)·(p − x)
    let expected = (tj.deriv(1) * (P - x)).abs();
    let got = error_term(&g, 1.0, &[x], &[1]);
    assert!((got - expected).abs() < 1e-12 * expected.max(1.0), "{got} vs {expected}");
    assert!(expected > 1e-3);
    assert!(error_term(&g, 1.0, &[P + 0.5 * DELTA * EPS], &[1]) < 1e-12);
    assert_eq!(error_term(&g, 1.0, &[P + 1.5 * EPS], &[1]), 0.0);
}

#[test]
fn support_outside_domain_is_rejected() {
    let f0 = identity();
    let fam = collapse_family();
    let tau = RadialCutoff::new(vec![vec![P]], &[0.6], DELTA).unwrap();
    assert!(matches!(glue(&f0, &fam, &tau, 1), Err(FlexError::SupportOutsideDomain { .. })));
}

#[test]
fn verify_with_zero_cutoff_reports_f0_margin() {
    let (f0, fam, tau) = (identity(), collapse_family(), ConstField(0.0));
    let g = glue(&f0, &fam, &tau, 1).unwrap();
    let rel = SlopeBound { l: 4.0 };
    let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
    let r = verify_relation(&g, &rel, &[0.0, 0.5, 1.0], &xs);
    assert_eq!(r.min_margin, 0.75);
    assert!(r.certified);
}

fn fd_check(g: &GluedFamily, t: f64, x: f64) {
    let jets = g.eval(t, &[x], 2);
    let h = 1e-4 * EPS;
    let f = |y: f64| value(g, t, y);
    // five-point stencils: the collar's higher derivatives are too large for the three-point ones
    let (fm2, fm1, f0, fp1, fp2) = (f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h));
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    let (j1, j2) = (jets[0].deriv(&[1]), jets[0].deriv(&[2]));
    assert!((j1 - d1).abs() <= 1e-4 * j1.abs().max(1.0), "f′ {j1} vs {d1} at t={t}, x={x}");
    assert!((j2 - d2).abs() <= 1e-4 * j2.abs().max(1.0), "f″ {j2} vs {d2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn glued_jets_match_finite_differences(t in 0.0f64..1.0, u in 0.12f64..0.95) {
        let (f0, fam, tau) = (identity(), collapse_family(), radial());
        let g = glue(&f0, &fam, &tau, 2).unwrap();
        // avoid the seams at the plateau edge, the branch switch and the support edge
        let x = P + u * EPS;
        prop_assume!(((x - P) - EPS / 2.0).abs() > 1e-3 && (x - P) < 0.95 * EPS);
        fd_check(&g, t, x);
    }

    #[test]
    fn straight_line_values_are_confined(t in 0.0f64..=1.0, x in -0.2f64..0.8) {
        let f0 = identity();
        let target = AffineMap { p: P, value: P, slope: -0.5 };
        let line = StraightLine { from: &f0, to: &target, domain: Domain::interval(P - 0.5, P + 0.5) };
        let tau = radial();
        let g = glue(&f0, &line, &tau, 1).unwrap();
        let v = value(&g, t, x);
        let (a, b) = (x, target.eval(&[x], 0)[0].value());
        prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
    }
}

#[test]
fn mollify_constant_path_is_constant() {
    let fam = ClosureFamily::new(1, 1, Domain::whole(1), |v| vec![v[1].sin()]);
    let m = mollify_path(&fam, 0.1, 1.0, &[vec![0.2]]).unwrap();
    for &t in &[0.0, 0.05, 0.3, 0.7, 1.0] {
        let j = m.eval(t, &[0.2], 2);
        assert!((j[0].value() - 0.2f64.sin()).abs() < 1e-8);
        assert!(j[0].deriv(&[1, 0]).abs() < 1e-7);
    }
}

/// `F(t)(x) = x + |t − 1/2|`, kinked in `t`.
fn kinked() -> ClosureFamily {
    ClosureFamily::new(1, 1, Domain::whole(1), |v| {
        let t = &v[0];
        let k = if t.value() >= 0.5 { t.add_scalar(-0.5) } else { t.scale(-1.0).add_scalar(0.5) };
        vec![&v[1] + &k]
    })
}

#[test]
fn mollify_endpoints_and_s_zero() {
    let fam = kinked();
    let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.25]).collect();
    for s in [1.0, 0.8] {
        let m = mollify_path(&fam, 0.1, s, &pts).unwrap();
        assert!(m.endpoint_error < 1e-8, "{}", m.endpoint_error);
        for x in &pts {
            assert!((m.eval(1.0, x, 0)[0].value() - (x[0] + (s - 0.5f64).abs())).abs() < 1e-8);
            assert!((m.eval(0.0, x, 0)[0].value() - (x[0] + 0.5)).abs() < 1e-8);
        }
    }
    let m0 = mollify_path(&fam, 0.1, 0.0, &pts).unwrap();
    for t in [0.1, 0.5, 0.9] {
        assert!((m0.eval(t, &[0.25], 0)[0].value() - 0.75).abs() < 1e-8);
    }
}

#[test]
fn mollified_path_is_smooth_in_t() {
    let fam = kinked();
    let m = mollify_path(&fam, 0.1, 1.0, &[]).unwrap();
    // at the old kink the t-derivative exists and vanishes by symmetry of χ about the kink
    let c = (0.5 + 0.1) / 1.2;
    let j = m.eval(c, &[0.0], 2);
    assert!(j[0].deriv(&[1, 0]).abs() < 1e-6);
    for &t in &[0.3, c, 0.6] {
        let j = m.eval(t, &[0.0], 1);
        let h = 1e-4;
        let fd = (m.eval(t + h, &[0.0], 0)[0].value() - m.eval(t - h, &[0.0], 0)[0].value()) / (2.0 * h);
        assert!((j[0].deriv(&[1, 0]) - fd).abs() < 1e-5);
        assert!((j[0].deriv(&[0, 1]) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn bump_has_unit_mass_and_compact_support() {
    let mass = crate::quad::adaptive_simpson(&|u| vec![bump(u, 0).value()], -1.0, 1.0, 1e-13)[0];
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(bump(1.0, 3).is_exact_zero() && bump(-1.2, 3).is_exact_zero());
    assert!(bump(0.0, 1).deriv(1).abs() < 1e-15);
}

#[test]
fn mollify_rejects_bad_width() {
    let fam = kinked();
    assert!(mollify_path(&fam, 0.0, 1.0, &[]).is_err());
    assert!(mollify_path(&fam, 1.5, 1.0, &[]).is_err());
}

fn shift_family() -> ClosureFamily {
    ClosureFamily::new(1, 1, Domain::interval(-3.0, 3.0), |v| vec![v[1].scale(0.0) + v[0].scale(5.0)])
}

#[test]
fn k0_regions() {
    let f0 = ClosureMap::new(1, 1, |v| vec![v[0].scale(0.0)]);
    let fam = shift_family();
    let r = |x: &[f64]| x[0].abs();
    let r_star = |x: &[f64]| x[0].abs() + 0.25;
    let grid: Vec<Vec<f64>> = (0..201).map(|i| vec![-2.5 + 5.0 * i as f64 / 200.0]).collect();
    let g = glue_k0(&f0, &fam, &r, &r_star, &grid).unwrap();
    assert_eq!(g.eval(0.7, &[1.8]), vec![0.0]);
    assert_eq!(g.eval(0.7, &[0.5]), vec![3.5]);
    assert_eq!(g.eval(0.0, &[0.5]), vec![0.0]);
    let mid = g.eval(1.0, &[1.2])[0];
    assert!(mid > 0.0 && mid < 5.0);
}

#[test]
fn k0_pinching_violation() {
    let f0 = ClosureMap::new(1, 1, |v| vec![v[0].scale(0.0)]);
    let fam = shift_family();
    let r = |x: &[f64]| x[0].abs();
    let bad = |x: &[f64]| x[0].abs() + 0.75;
    let grid = vec![vec![0.0], vec![1.0]];
    assert!(matches!(glue_k0(&f0, &fam, &r, &bad, &grid), Err(FlexError::Pinching(_))));
}

#[test]
fn k0_continuity_modulus_shrinks() {
    let f0 = ClosureMap::new(1, 1, |v| vec![v[0].scale(0.0)]);
    let fam = shift_family();
    let r = |x: &[f64]| x[0].abs();
    let r_star = |x: &[f64]| x[0].abs() + 0.25 * (x[0] * 3.0).sin().abs();
    let g = glue_k0(&f0, &fam, &r, &r_star, &[]).unwrap();
    let path = |n: usize| -> Vec<Vec<f64>> { (0..=n).map(|i| vec![-2.5 + 5.0 * i as f64 / n as f64]).collect() };
    let (a, b) = (g.continuity_modulus(1.0, &path(200)), g.continuity_modulus(1.0, &path(400)));
    assert!(b < 0.6 * a, "{a} {b}");
}

#[test]
fn calibrate_staircase_step_succeeds() {
    let f = fixtures::staircase_step();
    let o = calibrate(&f.problem(), &f.schedule, &f.grid).unwrap();
    assert!(o.report.min_margin > 0.0);
    assert_eq!(o.report.delta, Some(o.delta));
    let p = f.problem();
    let g = o.glued(&p);
    // the frozen value at the center and the plateau
    assert_eq!(g.eval(1.0, &[0.5], 1)[0].value(), 0.5);
    assert_eq!(g.eval(1.0, &[0.5], 1)[0].deriv(&[1]), 0.0);
}

#[test]
fn staircase_step_margin_does_not_decrease_with_delta() {
    let f = fixtures::staircase_step();
    let p = f.problem();
    let h = f.schedule.eps[0];
    let ts = f.grid.t_grid();
    let mut last = f64::NEG_INFINITY;
    for delta in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        let c = RadialCutoff::new(vec![vec![0.5]], &[0.9 * h], delta).unwrap();
        let g = glue(p.f0, p.family, &c, 1).unwrap();
        let xs = radial_grid(&[0.5], 0.9 * h, 0.0125, 2048).unwrap();
        let m = verify_relation(&g, p.relation, &ts, &xs).min_margin;
        assert!(m >= last - 1e-12, "margin {m} after {last} at δ={delta}");
        last = m;
    }
}

#[test]
fn remark33_fails_with_negative_margins() {
    let f = fixtures::remark33();
    let e = calibrate(&f.problem(), &f.schedule, &f.grid).unwrap_err();
    assert_eq!(e.reason, FailureReason::ScheduleExhausted);
    assert_eq!(e.trace.len(), f.schedule.deltas.len() * f.schedule.eps.len());
    assert!(e.trace.iter().all(|t| t.min_margin < 0.0));
    assert_eq!(e.freeze_violations.len(), 2);
    assert!(e.precondition_margin > 0.0);
}

#[test]
fn remark32_fails_on_limit_point() {
    let f = fixtures::remark32();
    let e = calibrate(&f.problem(), &f.schedule, &f.grid).unwrap_err();
    match e.reason {
        FailureReason::NonClosedV0 { limit_point, head_quotient, tail_quotient } => {
            assert_eq!(limit_point, vec![0.0, 0.0]);
            assert!(tail_quotient > 16.0 * head_quotient);
        }
        r => panic!("unexpected {r:?}"),
    }
    assert!(e.trace.iter().any(|t| t.min_margin > 0.0));
}

#[test]
fn smooth_family_on_the_same_ray_calibrates() {
    let f = fixtures::remark32();
    let fam = ClosureFamily::new(2, 1, f.family.domain().clone(), |v| vec![&(&v[0] * &v[1]) * &v[2]]);
    let p = GlueProblem { family: &fam, ..f.problem() };
    assert!(calibrate(&p, &f.schedule, &f.grid).is_ok());
}

#[test]
fn step_relation_combines_by_min() {
    let rel = StepRelation { l: 2.0, reference: Arc::new(identity()), budget: 0.1 };
    let j = AffineMap { p: 0.0, value: 0.05, slope: 1.0 }.eval(&[0.0], 1);
    assert!((rel.margin(&[0.0], &j) - 0.5).abs() < 1e-15);
    let j = AffineMap { p: 0.0, value: 0.0, slope: 1.8 }.eval(&[0.0], 1);
    assert!((rel.margin(&[0.0], &j) - 0.1).abs() < 1e-15);
}
