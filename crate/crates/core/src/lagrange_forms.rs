//! Lagrange brackets, the Lagrange identity, the quadratic form of the
//! pre-minimal operator and sampled numerical ranges.

use rayon::prelude::*;

use crate::coeffs::{CoefficientField, Limit, PiecewisePoly};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::propagate::Trajectory;
use crate::quad::gk15;
use crate::quasi::{self, QuasiState, Side, SideCoefficients};
use crate::report::{ConditionReport, Residual, Table, Verdict, Witness};
use crate::scaled::Scaled;
use crate::C64;

/// `[u, v](x) = u conj(v^{1}) - u^[1] conj(v)`, true value
/// `value * exp(logscale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketValue {
    pub x: f64,
    pub value: C64,
    /// `|u||v^[1]| + |u^[1]||v|`, same log-scale as `value`.
    pub terms: f64,
    pub logscale: f64,
}

impl BracketValue {
    pub fn scaled(&self) -> Scaled {
        Scaled::new(self.value, self.logscale)
    }
}

/// Bracket of a direct-side state `u` and an adjoint-side state `v`.
pub fn bracket(u: &QuasiState, v: &QuasiState) -> Result<BracketValue> {
    if u.side != Side::Direct || v.side != Side::Adjoint {
        return Err(Error::SideMismatch);
    }
    if (u.x - v.x).abs() > 1e-12 * (1.0 + u.x.abs()) {
        return Err(Error::InvalidArgument(format!("bracket at different points {} and {}", u.x, v.x)));
    }
    Ok(BracketValue {
        x: u.x,
        value: u.y0 * v.y1.conj() - u.y1 * v.y0.conj(),
        terms: u.y0.norm() * v.y1.norm() + u.y1.norm() * v.y0.norm(),
        logscale: u.logscale + v.logscale,
    })
}

pub fn bracket_at(u: &Trajectory, v: &Trajectory, x: f64) -> Result<BracketValue> {
    bracket(&u.eval(x), &v.eval(x))
}

/// Bracket of two explicit functions from their exact quasi-derivatives.
pub fn bracket_of_functions(c: &CoefficientField, u: &PiecewisePoly, v: &PiecewisePoly, x: f64) -> Result<C64> {
    let qu = quasi::quasi_derivatives(c, Side::Direct, u, x, Limit::Right)?;
    let qv = quasi::quasi_derivatives(c, Side::Adjoint, v, x, Limit::Right)?;
    Ok(qu.y0 * qv.y1.conj() - qu.y1 * qv.y0.conj())
}

/// Union of the step knots of both trajectories inside `[a, b]`.
fn common_mesh(u: &Trajectory, v: &Trajectory, a: f64, b: f64) -> Vec<f64> {
    let mut x: Vec<f64> = u.knots().into_iter().chain(v.knots()).filter(|&t| t > a && t < b).collect();
    x.push(a);
    x.push(b);
    x.sort_by(f64::total_cmp);
    x.dedup();
    x
}

/// `(int u conj(v), int |u||v|)` over `[a, b]`. The integrand is a
/// polynomial of degree 8 on each cell of the common mesh, so one
/// Gauss–Kronrod panel per cell is exact up to rounding.
pub fn inner_product(u: &Trajectory, v: &Trajectory, a: f64, b: f64) -> (Scaled, Scaled) {
    let mut total = Scaled::ZERO;
    let mut mass = Scaled::ZERO;
    for w in common_mesh(u, v, a, b).windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let log = u.eval(mid).logscale + v.eval(mid).logscale;
        // Evaluation inside the cell stays on the same pair of steps.
        let f = |x: f64| {
            let (p, q) = (u.eval(x), v.eval(x));
            p.y0 * q.y0.conj() * (p.logscale + q.logscale - log).exp()
        };
        let g = |x: f64| C64::new(f(x).norm(), 0.0);
        total = total.add(Scaled::new(gk15(&f, w[0], w[1]).0, log));
        mass = mass.add(Scaled::new(gk15(&g, w[0], w[1]).0, log));
    }
    (total, mass)
}

/// Converts a pair of log-scaled (residual, scale) numbers to a
/// [`Residual`]; when the scale is beyond double range both are divided by
/// it so that `rel()` stays meaningful.
fn residual_of(abs: Scaled, scale: Scaled) -> Residual {
    let top = abs.ln_abs().max(scale.ln_abs());
    if top < 600.0 {
        return Residual { abs: abs.value().norm(), scale: scale.value().norm() };
    }
    let ratio = (abs.ln_abs() - scale.ln_abs()).exp();
    Residual { abs: ratio * 2.0, scale: 1.0 }
}

/// Residual of the Lagrange identity on `[a, b]` for trajectories
/// `l[u] = lu u` and `l+[v] = lv v`:
/// `(lu - conj lv) int u conj(v) = [u, v](b) - [u, v](a)`.
pub fn lagrange_residual(u: &Trajectory, v: &Trajectory, a: f64, b: f64) -> Result<Residual> {
    if u.side() != Side::Direct || v.side() != Side::Adjoint {
        return Err(Error::SideMismatch);
    }
    let (ua, ub) = u.interval();
    let (va, vb) = v.interval();
    if a < ua.max(va) || b > ub.min(vb) || !(a < b) {
        return Err(Error::InvalidArgument(format!("[{a}, {b}] not covered by both trajectories")));
    }
    let shift = u.lambda() - v.lambda().conj();
    let (ip, mass) = inner_product(u, v, a, b);
    let lhs = ip.mul_c(shift);
    let at_b = bracket_at(u, v, b)?.scaled();
    let at_a = bracket_at(u, v, a)?.scaled();
    let rhs = at_b.sub(at_a);
    let diff = lhs.sub(rhs);
    let scale = mass
        .mul_c(C64::new(shift.norm(), 0.0))
        .add(Scaled::new(C64::new(at_b.mant.norm(), 0.0), at_b.log))
        .add(Scaled::new(C64::new(at_a.mant.norm(), 0.0), at_a.log));
    Ok(residual_of(diff, scale))
}

/// Residual of the Lagrange identity for explicit functions, computed by
/// exact piecewise algebra:
/// `int l[u] conj(v) - int u conj(l+[v]) = [u, v](b) - [u, v](a)`.
pub fn lagrange_residual_functions(
    c: &CoefficientField,
    u: &PiecewisePoly,
    v: &PiecewisePoly,
    a: f64,
    b: f64,
) -> Result<Residual> {
    let lu = quasi::apply_l(c, Side::Direct, u, a, b)?;
    let lv = quasi::apply_l(c, Side::Adjoint, v, a, b)?;
    let i1 = lu.mul(&v.conj()).integrate(a, b);
    let i2 = u.mul(&lv.conj()).integrate(a, b);
    let bb = bracket_of_functions(c, u, v, b)?;
    let ba = bracket_of_functions(c, u, v, a)?;
    let abs = (i1 - i2 - (bb - ba)).norm();
    Ok(Residual { abs, scale: i1.norm() + i2.norm() + bb.norm() + ba.norm() })
}

/// Maximum deviation of `[u, v](x)` from `[u, v](a)` over `n + 1` sample
/// points, together with the largest bracket magnitude seen.
pub fn bracket_drift(u: &Trajectory, v: &Trajectory, a: f64, b: f64, n: usize) -> Result<Residual> {
    let first = bracket_at(u, v, a)?.scaled();
    let mut worst = Scaled::ZERO;
    let mut scale = Scaled::new(C64::new(first.mant.norm(), 0.0), first.log);
    for x in crate::coeffs::uniform_nodes(a, b, n) {
        let bx = bracket_at(u, v, x)?;
        let d = bx.scaled().sub(first);
        if d.ln_abs() > worst.ln_abs() {
            worst = d;
        }
        let m = Scaled::new(C64::new(bx.terms, 0.0), bx.logscale);
        if m.ln_abs() > scale.ln_abs() {
            scale = m;
        }
    }
    Ok(residual_of(worst, scale))
}

/// Value of the quadratic form and its three parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormValue {
    pub value: C64,
    pub kinetic: C64,
    pub coupling: C64,
    pub potential: C64,
}

impl FormValue {
    fn from_parts(kinetic: C64, coupling: C64, potential: C64) -> Self {
        FormValue { value: kinetic + coupling + potential, kinetic, coupling, potential }
    }

    pub fn magnitude(&self) -> f64 {
        self.kinetic.norm() + self.coupling.norm() + self.potential.norm()
    }
}

fn check_test_function(u: &PiecewisePoly, a: f64, b: f64) -> Result<()> {
    let tol = 1e-10 * u.coeff_scale().max(1.0);
    if !u.vanishes_outside(a, b, tol) || u.at(a).norm() > tol || u.eval(b, Limit::Left).norm() > tol {
        return Err(Error::Unsupported(format!("test function must vanish at and outside [{a}, {b}]")));
    }
    if let Some(&(x, j)) = u.jumps().iter().find(|(_, j)| j.norm() > tol) {
        return Err(Error::Unsupported(format!("test function jumps by {} at x = {x}", j.norm())));
    }
    Ok(())
}

pub(crate) fn form_with(coeffs: &SideCoefficients, u: &PiecewisePoly, a: f64, b: f64) -> FormValue {
    let du = u.derivative();
    let (ubar, dubar) = (u.conj(), du.conj());
    let kinetic = du.mul(&dubar).integrate(a, b);
    let coupling = -coeffs.g1.mul(u).mul(&dubar).add(&coeffs.g2.mul(&du).mul(&ubar)).integrate(a, b);
    let potential = coeffs.s.mul(u).mul(&ubar).integrate(a, b);
    FormValue::from_parts(kinetic, coupling, potential)
}

/// `int |u'|^2 - int (G1 u conj(u') + G2 u' conj(u)) + int s |u|^2` for a
/// continuous `u` supported in `[a, b]`, by exact piecewise quadrature.
pub fn quadratic_form(c: &CoefficientField, u: &PiecewisePoly, a: f64, b: f64) -> Result<FormValue> {
    quadratic_form_side(c, Side::Direct, u, a, b)
}

/// The form of `l` (direct) or of `l+` (adjoint).
pub fn quadratic_form_side(c: &CoefficientField, side: Side, u: &PiecewisePoly, a: f64, b: f64) -> Result<FormValue> {
    check_test_function(u, a, b)?;
    Ok(form_with(&SideCoefficients::new(c, side), u, a, b))
}

/// `|form(u) - int l[u] conj(u)|`; `u` must also have a continuous
/// quasi-derivative.
pub fn form_vs_operator_check(c: &CoefficientField, u: &PiecewisePoly, a: f64, b: f64) -> Result<Residual> {
    let form = quadratic_form(c, u, a, b)?;
    let lu = quasi::apply_l(c, Side::Direct, u, a, b)?;
    let direct = lu.mul(&u.conj()).integrate(a, b);
    Ok(Residual { abs: (form.value - direct).norm(), scale: form.magnitude() + direct.norm() })
}

/// Closed sector `|Im w| <= tan(theta) Re w` with vertex 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub half_angle: f64,
}

impl Sector {
    pub fn new(half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!("sector half-angle {half_angle} not in (0, pi/2]")));
        }
        Ok(Sector { half_angle })
    }

    pub fn contains(&self, w: C64) -> bool {
        let slack = 1e-12 * w.norm();
        if w.re < -slack {
            return false;
        }
        if self.half_angle >= std::f64::consts::FRAC_PI_2 {
            return true;
        }
        w.im.abs() <= self.half_angle.tan() * w.re + slack
    }
}

/// A compactly supported test function with its support window.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub u: PiecewisePoly,
    pub a: f64,
    pub b: f64,
}

impl TestFunction {
    pub fn new(u: PiecewisePoly, a: f64, b: f64) -> Self {
        TestFunction { u, a, b }
    }

    pub fn bump(center: f64, plateau: f64, ramp: f64) -> Self {
        let half = 0.5 * plateau + ramp;
        TestFunction { u: bump(center, plateau, ramp), a: center - half, b: center + half }
    }
}

/// Samples `w(u) = form(u) / |u|^2` on both sides. Fails with a witness if
/// some `w` leaves the sector (right half-plane when no sector is given).
pub fn numerical_range_sample(
    c: &CoefficientField,
    family: &[TestFunction],
    sector: Option<Sector>,
) -> Result<ConditionReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty test-function family".into()));
    }
    let sector = sector.unwrap_or(Sector { half_angle: std::f64::consts::FRAC_PI_2 });
    let direct = SideCoefficients::new(c, Side::Direct);
    let adjoint = SideCoefficients::new(c, Side::Adjoint);
    let values: Vec<Result<(C64, C64)>> = family
        .par_iter()
        .enumerate()
        .map(|(index, t)| {
            check_test_function(&t.u, t.a, t.b)?;
            let norm = t.u.mul(&t.u.conj()).integrate(t.a, t.b).re;
            if !(norm > 0.0) {
                return Err(Error::ZeroNorm { index });
            }
            let wd = form_with(&direct, &t.u, t.a, t.b).value / norm;
            let wa = form_with(&adjoint, &t.u, t.a, t.b).value / norm;
            Ok((wd, wa))
        })
        .collect();
    let mut table = Table::new("numerical_range", &["index", "re_direct", "im_direct", "re_adjoint", "im_adjoint"]);
    let mut min_re = f64::INFINITY;
    let mut max_arg = 0.0f64;
    let mut witness = None;
    for (i, v) in values.into_iter().enumerate() {
        let (wd, wa) = v?;
        table.push(vec![i as f64, wd.re, wd.im, wa.re, wa.im]);
        for (w, side) in [(wd, "direct"), (wa, "adjoint")] {
            min_re = min_re.min(w.re);
            if w.norm() > 0.0 {
                max_arg = max_arg.max(w.arg().abs());
            }
            if witness.is_none() && !sector.contains(w) {
                let t = &family[i];
                witness = Some(Witness {
                    x: 0.5 * (t.a + t.b),
                    value: w.re,
                    note: format!("test function {i} ({side} side) gives w = {} {:+}i", w.re, w.im),
                });
            }
        }
    }
    let verdict = if witness.is_some() { Verdict::Fails } else { Verdict::HoldsOnSample };
    let mut report = ConditionReport::new("numerical-range", verdict);
    report.witness = witness;
    report.set_constant("min_re_w", min_re);
    report.set_constant("max_abs_arg_w", max_arg);
    report.set_constant("sector_half_angle", sector.half_angle);
    report.tables.push(table);
    Ok(report)
}

/// Cubic smoothstep `3t^2 - 2t^3` rising over `[0, w]`, in the local
/// variable `x - lo`.
pub fn smoothstep_up(w: f64) -> Poly {
    Poly::from_real(&[0.0, 0.0, 3.0 / (w * w), -2.0 / (w * w * w)])
}

/// `1 - smoothstep` falling over `[0, w]`.
pub fn smoothstep_down(w: f64) -> Poly {
    Poly::from_real(&[1.0, 0.0, -3.0 / (w * w), 2.0 / (w * w * w)])
}

/// Zero outside `[l0, r1]`, one on `[l1, r0]`, cubic smoothstep ramps on
/// `[l0, l1]` and `[r0, r1]`.
pub fn plateau_cutoff(l0: f64, l1: f64, r0: f64, r1: f64) -> Result<PiecewisePoly> {
    if !(l0 < l1 && l1 <= r0 && r0 < r1) {
        return Err(Error::InvalidArgument(format!("bad cut-off nodes {l0}, {l1}, {r0}, {r1}")));
    }
    let one = Poly::from_real(&[1.0]);
    let (breaks, pieces) = if l1 == r0 {
        (vec![l0, l1, r1], vec![Poly::zero(), smoothstep_up(l1 - l0), smoothstep_down(r1 - r0), Poly::zero()])
    } else {
        (
            vec![l0, l1, r0, r1],
            vec![Poly::zero(), smoothstep_up(l1 - l0), one, smoothstep_down(r1 - r0), Poly::zero()],
        )
    };
    PiecewisePoly::new(breaks, pieces)
}

/// Smoothstep bump: one on a plateau of width `plateau` around `center`,
/// ramps of width `ramp` on both sides.
pub fn bump(center: f64, plateau: f64, ramp: f64) -> PiecewisePoly {
    let h = 0.5 * plateau.max(0.0);
    plateau_cutoff(center - h - ramp, center - h, center + h, center + h + ramp).expect("ramp width must be positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::{integrate, Tolerances};
    use crate::quasi::ShinZettlSystem;
    use std::f64::consts::PI;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn sine_proxy() -> PiecewisePoly {
        let nodes = crate::coeffs::uniform_nodes(0.0, PI, 32);
        let (p, err) = PiecewisePoly::taylor_proxy(&nodes, 8, 1.0, |x0| {
            let d = [x0.sin(), x0.cos(), -x0.sin(), -x0.cos()];
            let mut fact = 1.0;
            (0..=8)
                .map(|k| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    re(d[k % 4] / fact)
                })
                .collect()
        })
        .unwrap();
        assert!(err < 1e-10);
        p
    }

    #[test]
    fn bracket_examples() {
        let u = QuasiState::new(0.3, re(1.0), re(0.0), Side::Direct);
        let v = QuasiState::new(0.3, re(0.3), re(1.0), Side::Adjoint);
        assert_eq!(bracket(&u, &v).unwrap().value, re(1.0));
        let v = QuasiState::new(0.3, re(1.0), re(0.0), Side::Adjoint);
        assert_eq!(bracket(&u, &v).unwrap().value, re(0.0));
        assert_eq!(bracket(&u, &u), Err(Error::SideMismatch));
    }

    #[test]
    fn hyperbolic_bracket_is_constant() {
        let c = CoefficientField::free();
        let tol = Tolerances::default();
        let su = ShinZettlSystem::assemble(&c, Side::Direct, re(-1.0));
        let sv = ShinZettlSystem::assemble(&c, Side::Adjoint, re(-1.0));
        let u = integrate(&su, QuasiState::new(0.0, re(1.0), re(1.0), Side::Direct), 2.0, tol).unwrap();
        let v = integrate(&sv, QuasiState::new(0.0, re(1.0), re(-1.0), Side::Adjoint), 2.0, tol).unwrap();
        for x in [0.0, 0.7, 2.0] {
            assert!((bracket_at(&u, &v, x).unwrap().value - re(-2.0)).norm() < 1e-9);
        }
        assert!(lagrange_residual(&u, &v, 0.0, 2.0).unwrap().rel() < 1e-9);
    }

    #[test]
    fn lagrange_identity_for_polynomials() {
        let c = CoefficientField::free();
        let u = PiecewisePoly::real_polynomial(&[0.0, 0.0, 1.0]);
        let v = PiecewisePoly::real_polynomial(&[0.0, 1.0]);
        assert!((bracket_of_functions(&c, &u, &v, 1.5).unwrap() - re(-2.25)).norm() < 1e-14);
        assert!(lagrange_residual_functions(&c, &u, &v, -1.0, 2.0).unwrap().abs < 1e-9);
    }

    #[test]
    fn form_of_sine() {
        let u = sine_proxy();
        let f = quadratic_form(&CoefficientField::free(), &u, 0.0, PI).unwrap();
        assert!((f.value - re(PI / 2.0)).norm() < 1e-8);
        let c = CoefficientField::new(PiecewisePoly::real_constant(1.0), PiecewisePoly::zero(), PiecewisePoly::zero())
            .unwrap();
        assert!((quadratic_form(&c, &u, 0.0, PI).unwrap().value - re(PI)).norm() < 1e-8);
        let c = CoefficientField::new(PiecewisePoly::zero(), PiecewisePoly::zero(), PiecewisePoly::real_constant(1.0))
            .unwrap();
        let f = quadratic_form(&c, &u, 0.0, PI).unwrap();
        assert!(f.coupling.norm() < 1e-12);
        assert_eq!(f.value, f.kinetic + f.coupling + f.potential);
    }

    #[test]
    fn form_rejects_non_vanishing() {
        let u = PiecewisePoly::real_constant(1.0);
        assert!(matches!(quadratic_form(&CoefficientField::free(), &u, 0.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn form_matches_operator() {
        let phi = bump(0.0, 1.0, 1.0);
        let r = form_vs_operator_check(&CoefficientField::free(), &phi, -2.0, 2.0).unwrap();
        assert!(r.rel() < 1e-9);

        let c = CoefficientField::delta_well(0.0, -2.0);
        let u = quasi::domain_function(&c, Side::Direct, &bump(0.0, 1.0, 1.0));
        let r = form_vs_operator_check(&c, &u, -2.0, 2.0).unwrap();
        assert!(r.rel() < 1e-8, "{r:?}");

        let c = CoefficientField::new(
            PiecewisePoly::zero(),
            PiecewisePoly::zero(),
            PiecewisePoly::polynomial(&[re(0.0), -C64::i()]),
        )
        .unwrap();
        let u = bump(0.3, 0.5, 1.0);
        assert!(form_vs_operator_check(&c, &u, -1.0, 2.0).unwrap().rel() < 1e-8);
    }

    #[test]
    fn free_range_is_accretive() {
        let family: Vec<_> = (0..5).map(|k| TestFunction::bump(k as f64, 0.5, 1.0 + k as f64)).collect();
        let rep = numerical_range_sample(&CoefficientField::free(), &family, None).unwrap();
        assert_eq!(rep.verdict, Verdict::HoldsOnSample);
        assert!(rep.constant("min_re_w").unwrap() > 0.0);
    }

    #[test]
    fn negative_potential_witness() {
        let c = CoefficientField::new(PiecewisePoly::real_constant(-1.0), PiecewisePoly::zero(), PiecewisePoly::zero())
            .unwrap();
        let rep = numerical_range_sample(&c, &[TestFunction::bump(0.0, 20.0, 5.0)], None).unwrap();
        assert_eq!(rep.verdict, Verdict::Fails);
        assert!(rep.witness.unwrap().value < 0.0);
    }

    #[test]
    fn zero_norm_is_reported() {
        let t = TestFunction::new(PiecewisePoly::zero(), 0.0, 1.0);
        let err = numerical_range_sample(&CoefficientField::free(), &[t], None).unwrap_err();
        assert_eq!(err, Error::ZeroNorm { index: 0 });
    }

    #[test]
    fn bump_shape() {
        let b = bump(1.0, 2.0, 0.5);
        assert_eq!(b.at(1.0), re(1.0));
        assert_eq!(b.at(2.0), re(1.0));
        assert!((b.at(2.25) - re(0.5)).norm() < 1e-15);
        assert_eq!(b.at(2.5), re(0.0));
        assert!(b.jumps().is_empty());
        assert!(b.derivative().jumps().iter().all(|(_, j)| j.norm() < 1e-12));
    }
}
