use proptest::prelude::*;

use qschro::coeffs::pos_neg_parts;
use qschro::conditions::{
    build_cutoff, build_rho, check_growth, verify_caccioppoli, CutoffParams, IntervalScheme, WeightFunction,
};
use qschro::lagrange_forms::{bracket_drift, bump, lagrange_residual, quadratic_form};
use qschro::propagate::{integrate, integrate_span};
use qschro::quasi::{apply_l, domain_function, QuasiState, ShinZettlSystem, Side};
use qschro::report::Verdict;
use qschro::spectral::{default_windows, null_probe};
use qschro::{CoefficientField, Limit, PiecewisePoly, Tolerances, C64};

fn cx() -> impl Strategy<Value = C64> + Clone {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn real() -> impl Strategy<Value = C64> + Clone {
    (-1.0..1.0f64).prop_map(|a| C64::new(a, 0.0))
}

/// Piecewise polynomial with up to three breakpoints in `[-3, 3]` and
/// pieces of degree at most `deg`.
fn pp(coef: impl Strategy<Value = C64> + Clone + 'static, deg: usize) -> impl Strategy<Value = PiecewisePoly> {
    prop::collection::btree_set(-30i32..30, 0..4).prop_flat_map(move |set| {
        let breaks: Vec<f64> = set.into_iter().map(|k| k as f64 / 10.0).collect();
        let n = breaks.len() + 1;
        prop::collection::vec(prop::collection::vec(coef.clone(), 0..=deg + 1), n)
            .prop_map(move |pieces| PiecewisePoly::from_global(breaks.clone(), pieces).unwrap())
    })
}

fn field() -> impl Strategy<Value = CoefficientField> {
    (pp(cx(), 1), pp(cx(), 1), pp(cx(), 1)).prop_map(|(s, q, r)| CoefficientField::new(s, q, r).unwrap())
}

fn real_field() -> impl Strategy<Value = CoefficientField> {
    (pp(real(), 1), pp(real(), 1), pp(real(), 1)).prop_map(|(s, q, r)| CoefficientField::new(s, q, r).unwrap())
}

fn close(a: C64, b: C64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + a.norm().max(b.norm()))
}

fn light() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #[test]
    fn algebra_closure(f in pp(cx(), 3), g in pp(cx(), 3), k in cx(), xs in prop::collection::vec(-5.0..5.0f64, 100)) {
        let sum = f.add(&g);
        let prod = f.mul(&g);
        let scaled = f.scale(k);
        let conj = f.conj();
        let (re, im) = (f.re(), f.im());
        for x in xs {
            let (fx, gx) = (f.at(x), g.at(x));
            prop_assert!(close(sum.at(x), fx + gx, 1e-12));
            prop_assert!(close(prod.at(x), fx * gx, 1e-12 * (1.0 + gx.norm())));
            prop_assert!(close(scaled.at(x), fx * k, 1e-12));
            prop_assert!(close(conj.at(x), fx.conj(), 1e-12));
            prop_assert!(close(re.at(x) + im.at(x) * C64::i(), fx, 1e-12));
        }
    }

    #[test]
    fn jump_bookkeeping(f in pp(cx(), 3)) {
        for &x in f.breakpoints() {
            let d = f.eval(x, Limit::Right) - f.eval(x, Limit::Left);
            prop_assert!(close(d, f.jump_at(x), 1e-12));
        }
        let listed = f.jumps();
        let nonzero = f.breakpoints().iter().filter(|&&x| f.jump_at(x) != C64::new(0.0, 0.0)).count();
        prop_assert_eq!(listed.len(), nonzero);
        for (x, j) in listed {
            prop_assert_eq!(j, f.jump_at(x));
        }
    }

    #[test]
    fn positive_and_negative_parts(f in pp(real(), 3)) {
        let parts = pos_neg_parts(&f, -4.0, 4.0, 0.05).unwrap();
        for ((x, p), m) in parts.x.iter().zip(&parts.plus).zip(&parts.minus) {
            prop_assert!((p - m - f.at(*x).re).abs() <= 1e-12 * (1.0 + f.at(*x).norm()));
            prop_assert!(p.min(*m) == 0.0);
        }
    }

    #[test]
    fn adjoint_entries(c in field(), lam in cx(), xs in prop::collection::vec(-4.0..4.0f64, 100)) {
        let adj = ShinZettlSystem::assemble(&c, Side::Adjoint, lam);
        let (g1, g2) = c.derive_g();
        for x in xs {
            let m = adj.matrix_at(x, Limit::Right);
            let (a1, a2, s) = (g2.at(x).conj(), g1.at(x).conj(), c.s.at(x).conj());
            prop_assert!(close(m[0][0], a1, 1e-13));
            prop_assert!(close(m[0][1], C64::new(1.0, 0.0), 0.0));
            prop_assert!(close(m[1][0], -a1 * a2 + s - lam, 1e-13));
            prop_assert!(close(m[1][1], -a2, 1e-13));
        }
    }

    #[test]
    fn real_data_is_formally_symmetric(c in real_field(), lam in cx(), xs in prop::collection::vec(-4.0..4.0f64, 100)) {
        let d = ShinZettlSystem::assemble(&c, Side::Direct, lam);
        let a = ShinZettlSystem::assemble(&c, Side::Adjoint, lam);
        for x in xs {
            prop_assert_eq!(d.matrix_at(x, Limit::Right), a.matrix_at(x, Limit::Right));
        }
    }

    #[test]
    fn apply_l_matches_classical_expression(
        s in prop::collection::vec(cx(), 0..3),
        q in prop::collection::vec(cx(), 0..3),
        r in prop::collection::vec(cx(), 0..3),
        u in prop::collection::vec(cx(), 1..5),
        xs in prop::collection::vec(-1.5..1.5f64, 20),
    ) {
        let c = CoefficientField::new(PiecewisePoly::polynomial(&s), PiecewisePoly::polynomial(&q), PiecewisePoly::polynomial(&r)).unwrap();
        let u = PiecewisePoly::polynomial(&u);
        let lu = apply_l(&c, Side::Direct, &u, -2.0, 2.0).unwrap();
        let h = 1e-4;
        let ev = |f: &PiecewisePoly, x: f64| f.at(x);
        let d1 = |f: &dyn Fn(f64) -> C64, x: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        for x in xs {
            let upp = (ev(&u, x + h) - 2.0 * ev(&u, x) + ev(&u, x - h)) / (h * h);
            let qp = d1(&|t| ev(&c.q, t), x);
            let ru = |t: f64| ev(&c.r, t) * ev(&u, t);
            let classical = -upp + (ev(&c.s, x) + qp) * ev(&u, x)
                + C64::i() * (d1(&ru, x) + ev(&c.r, x) * d1(&|t| ev(&u, t), x));
            let mag = upp.norm() + ev(&u, x).norm() * (1.0 + ev(&c.s, x).norm() + qp.norm() + ev(&c.r, x).norm());
            prop_assert!((lu.at(x) - classical).norm() <= 1e-6 * (1.0 + mag), "x = {x}: {} vs {classical}", lu.at(x));
        }
    }

    #[test]
    fn form_parts_sum_exactly(c in field(), center in -2.0..2.0f64) {
        let u = domain_function(&c, Side::Direct, &bump(center, 0.5, 1.0));
        let f = quadratic_form(&c, &u, center - 3.0, center + 3.0).unwrap();
        prop_assert_eq!(f.value, f.kinetic + f.coupling + f.potential);
    }

    #[test]
    fn hermitian_form_is_real(c in real_field(), center in -2.0..2.0f64) {
        let u = domain_function(&c, Side::Direct, &bump(center, 0.5, 1.0));
        prop_assume!(u.is_real(0.0));
        let f = quadratic_form(&c, &u, center - 3.0, center + 3.0).unwrap();
        prop_assert!(f.value.im.abs() <= 1e-10 * (1.0 + f.magnitude()), "{:?}", f);
    }

    #[test]
    fn cutoffs_satisfy_their_invariants(n in 1i64..6, delta in 0.5..2.0f64, gap in 0.5..3.0f64) {
        build_cutoff(n, CutoffParams::ThmA).unwrap().verify(64).unwrap();
        let scheme = IntervalScheme::symmetric(n + 1, delta, |k| {
            let a = k as f64 * (delta + gap);
            (a, a + delta)
        }).unwrap();
        build_cutoff(n, CutoffParams::ThmB(&scheme)).unwrap().verify(64).unwrap();
    }

    #[test]
    fn rho_chain_rule(n in 1i64..3, slope in 0.2..0.8f64) {
        let m = PiecewisePoly::from_global(vec![0.0], vec![vec![C64::new(1.0, 0.0), C64::new(-slope, 0.0)], vec![C64::new(1.0, 0.0), C64::new(slope, 0.0)]]).unwrap();
        let w = WeightFunction::new(m, 60.0).unwrap();
        let rho = build_rho(&w).unwrap();
        let phi = build_cutoff(n, CutoffParams::ThmARho(&rho)).unwrap();
        phi.verify(64).unwrap();
        let dphi = phi.phi.derivative();
        let (a, b) = (phi.left.0, phi.right.1);
        for x in qschro::coeffs::uniform_nodes(a, b, 4000) {
            prop_assert!((dphi.at(x).re * w.eval(x)).abs() <= phi.k * (1.0 + 1e-3));
        }
        for y in [-(n as f64) - 0.5, 0.3, n as f64 + 0.7] {
            let x = rho.inverse(y).unwrap();
            prop_assert!((rho.eval(x) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn growth_failures_survive_longer_horizons(p in 2usize..5, h in 20.0..40.0f64) {
        let mut coeffs = vec![0.0; p + 1];
        coeffs[p] = -1.0;
        let r1 = PiecewisePoly::real_polynomial(&coeffs);
        let m = PiecewisePoly::from_global(vec![0.0], vec![vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]]).unwrap();
        let short = check_growth(&r1, &WeightFunction::new(m.clone(), h).unwrap()).unwrap();
        let long = check_growth(&r1, &WeightFunction::new(m, 2.0 * h).unwrap()).unwrap();
        prop_assert_eq!(short.verdict, Verdict::Fails);
        prop_assert_eq!(long.verdict, Verdict::Fails);
    }
}

proptest! {
    #![proptest_config(light())]

    #[test]
    fn spurious_breakpoints_are_transparent(c in field(), lam in cx(), extra in -2.5..2.5f64) {
        let tol = Tolerances::default();
        let refined = CoefficientField::new(c.s.refine(&[extra]), c.q.refine(&[extra]), c.r.refine(&[extra])).unwrap();
        let start = |side| QuasiState::new(-3.0, C64::new(1.0, 0.0), C64::new(0.0, 1.0), side);
        let a = integrate(&ShinZettlSystem::assemble(&c, Side::Direct, lam), start(Side::Direct), 3.0, tol).unwrap();
        let b = integrate(&ShinZettlSystem::assemble(&refined, Side::Direct, lam), start(Side::Direct), 3.0, tol).unwrap();
        for x in [-1.0, 0.05, 2.9] {
            let (p, q) = (a.eval(x), b.eval(x));
            let scale = (p.logscale).exp() * (1.0 + p.norm());
            let d = (p.y0 * p.logscale.exp() - q.y0 * q.logscale.exp()).norm();
            prop_assert!(d <= 10.0 * tol.atol * scale + 1e3 * tol.rtol * scale, "x = {x}: {d:e}");
        }
    }

    #[test]
    fn delta_jump_law(k in -3.0..3.0f64, at in -1.0..1.0f64, lam in cx(), y0 in cx(), y1 in cx()) {
        let c = CoefficientField::delta_well(at, k);
        let tol = Tolerances::default();
        let sys = ShinZettlSystem::assemble(&c, Side::Direct, lam);
        let t = integrate_span(&sys, QuasiState::new(-2.0, y0, y1, Side::Direct), -2.0, 2.0, tol).unwrap();
        let (l, r) = (t.eval_side(at, Limit::Left), t.eval_side(at, Limit::Right));
        let scale = 1.0 + l.norm();
        prop_assert!((l.y1 - r.y1).norm() <= 10.0 * tol.atol * scale);
        let jump = t.derivative(at, Limit::Right) - t.derivative(at, Limit::Left);
        prop_assert!((jump - r.y0 * k).norm() <= 10.0 * tol.atol * scale);
    }

    #[test]
    fn bracket_is_constant(c in field(), lam in cx()) {
        let tol = Tolerances::default();
        let one = C64::new(1.0, 0.0);
        let u = integrate(&ShinZettlSystem::assemble(&c, Side::Direct, lam), QuasiState::new(-4.0, one, one, Side::Direct), 4.0, tol).unwrap();
        let v = integrate(&ShinZettlSystem::assemble(&c, Side::Adjoint, lam.conj()), QuasiState::new(-4.0, one, -one, Side::Adjoint), 4.0, tol).unwrap();
        let drift = bracket_drift(&u, &v, -4.0, 4.0, 200).unwrap();
        prop_assert!(drift.rel() <= 1e-8, "{drift:?}");
    }

    #[test]
    fn lagrange_identity_with_masses(c in field(), lu in cx(), lv in cx()) {
        let tol = Tolerances::default();
        let one = C64::new(1.0, 0.0);
        let u = integrate(&ShinZettlSystem::assemble(&c, Side::Direct, lu), QuasiState::new(-4.0, one, -one, Side::Direct), 4.0, tol).unwrap();
        let v = integrate(&ShinZettlSystem::assemble(&c, Side::Adjoint, lv), QuasiState::new(4.0, one, one, Side::Adjoint), -4.0, tol).unwrap();
        let res = lagrange_residual(&u, &v, -4.0, 4.0).unwrap();
        prop_assert!(res.rel() <= 1e-8, "{res:?}");
    }

    #[test]
    fn caccioppoli_audit(s0 in 0.0..2.0f64, r1 in -0.5..0.5f64, n in 1i64..3) {
        // s >= 1 makes Re(phi v, l+[phi v]) >= |phi v|^2 for real Q
        let c = CoefficientField::new(
            PiecewisePoly::real_constant(1.0 + s0),
            PiecewisePoly::zero(),
            PiecewisePoly::constant(C64::new(0.0, r1)),
        ).unwrap();
        let phi = build_cutoff(n, CutoffParams::ThmA).unwrap();
        let sys = ShinZettlSystem::assemble(&c, Side::Adjoint, C64::new(0.0, 0.0));
        let one = C64::new(1.0, 0.0);
        let v = integrate_span(&sys, QuasiState::new(0.0, one, C64::new(0.0, 0.0), Side::Adjoint), -5.0, 5.0, Tolerances::default()).unwrap();
        let rep = verify_caccioppoli(&c, &v, &phi).unwrap();
        prop_assert!(rep.residual.rel() <= 1e-7, "{rep:?}");
        if rep.audit_applicable {
            prop_assert!(rep.audit_holds, "{rep:?}");
        }
    }

    #[test]
    fn gram_nesting(lam in -2.0..0.9f64, k in 0.0..1.0f64) {
        let c = CoefficientField::new(PiecewisePoly::zero(), PiecewisePoly::step(0.0, C64::new(k, 0.0)), PiecewisePoly::zero()).unwrap();
        let rep = null_probe(&c, C64::new(lam, 0.0), &default_windows(12.0), Tolerances::default()).unwrap();
        prop_assert!(rep.nested, "{:?}", rep.ln_n);
    }
}
