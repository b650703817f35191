use flexlab::convexcurve::*;
use flexlab::flexcore::{DeformationFamily, JetMap};
use flexlab::multijet::MultiJet;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

fn ellipse_kappa(a: f64, b: f64, th: f64) -> f64 {
    a * b / (a * a * th.sin().powi(2) + b * b * th.cos().powi(2)).powf(1.5)
}

#[test]
fn circle_curvatures() {
    for th in [0.0, 0.3, 2.0, -1.0, 5.5] {
        assert!((curvature(&UnitCircle, th).unwrap() - 1.0).abs() < 1e-14);
        assert!((curvature(&Ellipse { a: 0.5, b: 0.5 }, th).unwrap() - 2.0).abs() < 1e-13);
    }
    assert!((curvature(&Ellipse { a: 2.0, b: 1.0 }, 0.0).unwrap() - 2.0).abs() < 1e-14);
    assert!(matches!(curvature(&Ellipse { a: 0.0, b: 0.0 }, 1.0), Err(CurveError::NotImmersed(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ellipse_matches_closed_form(a in 0.2f64..5.0, b in 0.2f64..5.0, th in -PI..PI) {
        let k = curvature(&Ellipse { a, b }, th).unwrap();
        let expected = ellipse_kappa(a, b, th);
        prop_assert!((k - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn psi_is_monotone_and_fixes_zero(mu in 1.05f64..6.0, w in 0.2f64..1.5, t in 0.0f64..=1.0) {
        let psi = psi_family(mu, w).unwrap();
        let tj = MultiJet::constant(1, 1, t);
        let at0 = psi.apply(&tj, &MultiJet::variable(1, 1, 0, 0.0));
        prop_assert_eq!(at0.value(), 0.0);
        prop_assert!((at0.deriv(&[1]) - psi.lambda_at(t)).abs() < 1e-14);
        for i in 0..200 {
            let th = -w + 2.0 * w * i as f64 / 199.0;
            prop_assert!(psi.apply(&tj, &MultiJet::variable(1, 1, 0, th)).deriv(&[1]) > 0.0);
        }
    }

    #[test]
    fn family_freezes_one_jet_and_hits_target_curvature(t in 0.0f64..=1.0, th in -1.5f64..1.5) {
        let fam = deformation_family(psi_family(2.0, 1.0).unwrap());
        let j = fam.eval(t, &[0.0], 1);
        let (x, y) = (j[0].drop_first_var(), j[1].drop_first_var());
        prop_assert!((x.value() - 1.0).abs() <= 1e-12 && y.value().abs() <= 1e-12);
        prop_assert!(x.deriv(&[1]).abs() <= 1e-9 && (y.deriv(&[1]) - 1.0).abs() <= 1e-9);
        let j = fam.eval(t, &[th], 2);
        let k = flexlab::flexcore::plane_curvature(&j[0].drop_first_var(), &j[1].drop_first_var()).unwrap();
        prop_assert!((k - 2.0 / (2.0 - t)).abs() < 1e-12);
    }
}

#[test]
fn psi_endpoints() {
    let psi = psi_family(2.0, 1.0).unwrap();
    let one = MultiJet::constant(1, 1, 1.0);
    let zero = MultiJet::constant(1, 1, 0.0);
    assert_eq!(psi.apply(&one, &MultiJet::variable(1, 1, 0, 0.0)).deriv(&[1]), 2.0);
    for th in [-1.2, -0.4, 0.01, 0.7, 1.0, 1.3] {
        let x = MultiJet::variable(1, 1, 0, th);
        assert_eq!(psi.apply(&zero, &x).value(), th);
        if th.abs() >= 1.0 {
            assert_eq!(psi.apply(&one, &x).value(), th);
        }
    }
    assert!(psi_family(1.0, 1.0).is_err());
    assert!(psi_family(2.0, 1.6).is_err());
}

#[test]
fn family_at_zero_is_the_circle() {
    let fam = deformation_family(psi_family(3.0, 1.0).unwrap());
    for i in 0..50 {
        let th = -1.5 + 3.0 * i as f64 / 49.0;
        let j = fam.eval(0.0, &[th], 0);
        let c = UnitCircle.eval(&[th], 0);
        assert_eq!(j[0].value(), c[0].value());
        assert_eq!(j[1].value(), c[1].value());
    }
    let cert = fam.certify(&[0.0, 0.5, 1.0], 64);
    assert!(cert.value_deviation <= 1e-12 && cert.slope_deviation <= 1e-9);
    assert!(cert.convexity_defect < 1e-9);
}

#[test]
fn simplicity_test() {
    assert!(is_simple(&polygon(&UnitCircle, 512)));
    struct Eight;
    impl JetMap for Eight {
        fn dim(&self) -> usize {
            1
        }
        fn components(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], order: usize) -> Vec<MultiJet> {
            // phase-shifted so the crossing is not a polygon vertex
            let th = MultiJet::variable(1, order, 0, x[0] + 0.1);
            vec![th.sin(), (&th * 2.0).sin()]
        }
    }
    assert!(!is_simple(&polygon(&Eight, 512)));
}

#[test]
fn enclosing_circles_of_circles() {
    let c = enclosing_check(&UnitCircle, 1.0, 4096, 1);
    assert!((c.radius - 1.0).abs() < 1e-12 && c.ok);
    let c = enclosing_check(&Ellipse { a: 0.5, b: 0.5 }, 2.0, 4096, 1);
    assert!((c.radius - 0.5).abs() < 1e-12 && c.ok);
    let c = enclosing_check(&Ellipse { a: 2.0, b: 1.0 }, 1.0, 4096, 1);
    assert!((c.radius - 2.0).abs() < 1e-12 && !c.ok);
}

fn brute_force_radius(p: &[[f64; 2]]) -> f64 {
    let covers = |c: [f64; 2], r: f64| p.iter().all(|q| (q[0] - c[0]).hypot(q[1] - c[1]) <= r * (1.0 + 1e-9) + 1e-12);
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let c = [(p[i][0] + p[j][0]) / 2.0, (p[i][1] + p[j][1]) / 2.0];
            let r = (p[i][0] - c[0]).hypot(p[i][1] - c[1]);
            if covers(c, r) {
                best = best.min(r);
            }
            for k in j + 1..p.len() {
                let (a, b, cc) = (p[i], p[j], p[k]);
                let d = 2.0 * ((b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]));
                if d.abs() < 1e-12 {
                    continue;
                }
                let (bx, by, cx, cy) = (b[0] - a[0], b[1] - a[1], cc[0] - a[0], cc[1] - a[1]);
                let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
                let (ux, uy) = ((cy * b2 - by * c2) / d, (bx * c2 - cx * b2) / d);
                if covers([a[0] + ux, a[1] + uy], ux.hypot(uy)) {
                    best = best.min(ux.hypot(uy));
                }
            }
        }
    }
    best
}

proptest! {
    #[test]
    fn welzl_matches_brute_force(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..9), seed in any::<u64>()) {
        let p: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let (_, r) = min_enclosing_circle(&p, seed);
        prop_assert!((r - brute_force_radius(&p)).abs() <= 1e-9);
    }
}

#[test]
fn short_build_certifies_and_reports() {
    let mut p = CurveParams::new(2.0, 0.1);
    p.deltas = vec![1e-70];
    p.samples = 1024;
    let c = build(&p).unwrap();
    let r = convexity_report(&c);
    assert!(r.kappa_min >= 0.9 && r.kappa_min_arc >= 1.9);
    assert!(r.opposite_identical && r.simple && r.enclosing.ok);
    assert!(r.support_halfwidth <= r.bump_plateau);
    for &t in &REPORT_TIMES {
        let j = c.jets(t, 0.0, 1);
        assert!((j[0].value() - 1.0).abs() <= 1e-12 && j[1].value().abs() <= 1e-12);
        assert!(j[0].deriv(&[1]).abs() <= 1e-9 && (j[1].deriv(&[1]) - 1.0).abs() <= 1e-9);
    }
    // closed curve: jets agree across θ = ±π
    let (a, b) = (c.jets(1.0, PI, 2), c.jets(1.0, PI - TAU, 2));
    assert_eq!(a, b);
    // outside the cutoff support every f(t) is the circle
    for th in [FRAC_PI_2, 2.0, -2.5, -FRAC_PI_2] {
        assert_eq!(c.jets(1.0, th, 2), UnitCircle.eval(&[th], 2));
    }
}

#[test]
fn rigid_case_fails() {
    let mut p = CurveParams::new(2.0, 0.0);
    p.deltas = vec![1e-10, 1e-70];
    match build(&p) {
        Err(CurveError::Calibration(f)) => {
            assert_eq!(f.trace.len(), 4);
            assert!(f.trace.iter().all(|e| e.min_margin < 0.0));
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("κ ≥ 1 everywhere with κ = 2 at p must not certify"),
    }
}

#[test]
fn nearly_flat_deformation() {
    let mut p = CurveParams::new(1.05, 0.1);
    p.samples = 512;
    let c = build(&p).unwrap();
    let r = convexity_report(&c);
    assert!(r.kappa_min > 0.9 && r.kappa_min < 1.0 + 1e-12);
    assert!(r.kappa_by_t.iter().all(|k| (k.kappa_min - 1.0).abs() < 0.1));
}

#[test]
fn bad_parameters() {
    assert!(matches!(build(&CurveParams::new(2.0, 1.0)), Err(CurveError::Param(_))));
    assert!(matches!(build(&CurveParams::new(0.5, 0.1)), Err(CurveError::Param(_))));
}
