//! The Shin–Zettl first-order system and quasi-derivatives.
//!
//! For `l` the state is `(u, u^[1])` with `u^[1] = u' - G1 u`; for the
//! formal adjoint `l+` it is `(v, v^{1})` with `v^{1} = v' - conj(G2) v`.
//! Both are handled by one code path: the adjoint side is the direct side
//! with `(G1, G2, s)` replaced by `(conj G2, conj G1, conj s)`.

use crate::coeffs::{CoefficientField, Limit, PiecewisePoly};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::report::Residual;
use crate::C64;

/// Relative size of a jump in `u^[1]` that is still treated as rounding.
pub const CONTINUITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Direct,
    Adjoint,
}

impl Side {
    pub fn label(&self) -> &'static str {
        match self {
            Side::Direct => "direct",
            Side::Adjoint => "adjoint",
        }
    }
}

/// `(G1, G2, s)` as seen from one side of the operator pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SideCoefficients {
    pub g1: PiecewisePoly,
    pub g2: PiecewisePoly,
    pub s: PiecewisePoly,
}

impl SideCoefficients {
    pub fn new(c: &CoefficientField, side: Side) -> Self {
        let (g1, g2) = c.derive_g();
        match side {
            Side::Direct => SideCoefficients { g1, g2, s: c.s.clone() },
            Side::Adjoint => SideCoefficients { g1: g2.conj(), g2: g1.conj(), s: c.s.conj() },
        }
    }
}

/// `Y' = A(x; lambda) Y` with
/// `A = [[G1, 1], [-G1 G2 + s - lambda, -G2]]` (side-specific `G1, G2, s`).
#[derive(Clone, Debug, PartialEq)]
pub struct ShinZettlSystem {
    side: Side,
    lambda: C64,
    coeffs: SideCoefficients,
    a11: PiecewisePoly,
    a21: PiecewisePoly,
    a22: PiecewisePoly,
    breaks: Vec<f64>,
}

/// Local polynomial entries of `A` on one smooth segment, in the variable
/// `x - origin`. The `(1, 2)` entry is identically one.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    pub origin: f64,
    pub a11: Poly,
    pub a21: Poly,
    pub a22: Poly,
}

impl Segment {
    #[inline]
    pub fn apply(&self, x: f64, y: [C64; 2]) -> [C64; 2] {
        let t = x - self.origin;
        [self.a11.eval(t) * y[0] + y[1], self.a21.eval(t) * y[0] + self.a22.eval(t) * y[1]]
    }

    /// `(A' + A^2) Y`, the second derivative of the state.
    pub fn second(&self, x: f64, y: [C64; 2]) -> [C64; 2] {
        let t = x - self.origin;
        let (a11, a21, a22) = (self.a11.eval(t), self.a21.eval(t), self.a22.eval(t));
        let d11 = self.a11.derivative().eval(t);
        let d21 = self.a21.derivative().eval(t);
        let d22 = self.a22.derivative().eval(t);
        // A^2 with a12 = 1
        let s11 = a11 * a11 + a21;
        let s12 = a11 + a22;
        let s21 = a21 * a11 + a22 * a21;
        let s22 = a21 + a22 * a22;
        [
            (d11 + s11) * y[0] + s12 * y[1],
            (d21 + s21) * y[0] + (d22 + s22) * y[1],
        ]
    }
}

impl ShinZettlSystem {
    pub fn assemble(c: &CoefficientField, side: Side, lambda: C64) -> Self {
        let coeffs = SideCoefficients::new(c, side);
        let a11 = coeffs.g1.clone();
        let a21 = coeffs.g1.mul(&coeffs.g2).neg().add(&coeffs.s).add_const(-lambda);
        let a22 = coeffs.g2.neg();
        let mut breaks: Vec<f64> = a11
            .breakpoints()
            .iter()
            .chain(a21.breakpoints())
            .chain(a22.breakpoints())
            .copied()
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        ShinZettlSystem { side, lambda, coeffs, a11, a21, a22, breaks }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn coefficients(&self) -> &SideCoefficients {
        &self.coeffs
    }

    /// Entry `(i, j)`, zero-based.
    pub fn entry(&self, i: usize, j: usize) -> PiecewisePoly {
        match (i, j) {
            (0, 0) => self.a11.clone(),
            (0, 1) => PiecewisePoly::real_constant(1.0),
            (1, 0) => self.a21.clone(),
            (1, 1) => self.a22.clone(),
            _ => panic!("entry index out of range"),
        }
    }

    pub fn matrix_at(&self, x: f64, lim: Limit) -> [[C64; 2]; 2] {
        [
            [self.a11.eval(x, lim), C64::new(1.0, 0.0)],
            [self.a21.eval(x, lim), self.a22.eval(x, lim)],
        ]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Antiderivative of `tr A = G1 - G2`, vanishing at `anchor`.
    pub fn trace_integral(&self, anchor: f64) -> PiecewisePoly {
        self.a11.add(&self.a22).antiderivative(anchor)
    }

    /// Local entries valid on the open interval between two consecutive
    /// breakpoints containing `(lo, hi)`, expanded about `lo`.
    pub(crate) fn segment(&self, lo: f64, hi: f64) -> Segment {
        let mid = 0.5 * (lo + hi);
        let local = |f: &PiecewisePoly| {
            let (o, p) = f.local_at(mid, Limit::Right);
            p.shift(lo - o)
        };
        Segment { origin: lo, a11: local(&self.a11), a21: local(&self.a21), a22: local(&self.a22) }
    }
}

/// Point value of the continuous state `(u, u^[1])` or `(v, v^{1})`.
///
/// The true state is `(y0, y1) * exp(logscale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiState {
    pub x: f64,
    pub y0: C64,
    pub y1: C64,
    pub side: Side,
    pub logscale: f64,
}

impl QuasiState {
    pub fn new(x: f64, y0: C64, y1: C64, side: Side) -> Self {
        QuasiState { x, y0, y1, side, logscale: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        self.y0.norm().max(self.y1.norm())
    }
}

/// `u`, `u^[1]` and `u^[2]` of an explicit function at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiValues {
    pub y0: C64,
    pub y1: C64,
    pub y2: C64,
}

/// `u^[1] = u' - G1 u` (side-specific `G1`) as a piecewise polynomial.
pub fn first_quasi(coeffs: &SideCoefficients, u: &PiecewisePoly) -> PiecewisePoly {
    u.derivative().sub(&coeffs.g1.mul(u))
}

/// `u^[2] = (u^[1])' + G2 u^[1] + (G1 G2 - s) u`, with the classical
/// piecewise derivative of `u^[1]`.
pub fn second_quasi(coeffs: &SideCoefficients, u: &PiecewisePoly) -> PiecewisePoly {
    let u1 = first_quasi(coeffs, u);
    u1.derivative()
        .add(&coeffs.g2.mul(&u1))
        .add(&coeffs.g1.mul(&coeffs.g2).sub(&coeffs.s).mul(u))
}

fn continuity_defect(f: &PiecewisePoly, x: f64) -> (f64, f64) {
    let l = f.eval(x, Limit::Left);
    let r = f.eval(x, Limit::Right);
    ((r - l).norm(), l.norm().max(r.norm()))
}

/// Fails with `DiscontinuousQuasiDerivative` if `f` jumps anywhere in
/// `[a, b]` by more than `CONTINUITY_TOL * (1 + |f|)`.
pub fn check_continuity(f: &PiecewisePoly, a: f64, b: f64) -> Result<()> {
    for &x in f.breakpoints().iter().filter(|&&x| x >= a && x <= b) {
        let (jump, mag) = continuity_defect(f, x);
        if jump > CONTINUITY_TOL * (1.0 + mag) {
            return Err(Error::DiscontinuousQuasiDerivative { x, jump });
        }
    }
    Ok(())
}

/// One-sided quasi-derivatives of `u` at `x`. The state `(u, u^[1])` must
/// be continuous at `x`; `u^[2]` may jump and is returned from the side
/// `lim`.
pub fn quasi_derivatives(
    c: &CoefficientField,
    side: Side,
    u: &PiecewisePoly,
    x: f64,
    lim: Limit,
) -> Result<QuasiValues> {
    let coeffs = SideCoefficients::new(c, side);
    let u1 = first_quasi(&coeffs, u);
    let (jump, mag) = continuity_defect(&u1, x);
    if jump > CONTINUITY_TOL * (1.0 + mag) {
        return Err(Error::DiscontinuousQuasiDerivative { x, jump });
    }
    let u2 = second_quasi(&coeffs, u);
    Ok(QuasiValues { y0: u.eval(x, lim), y1: u1.eval(x, lim), y2: u2.eval(x, lim) })
}

/// `l[u]` (direct) or `l+[u]` (adjoint) as a piecewise polynomial, after
/// checking that `u^[1]` is continuous on `[a, b]`.
pub fn apply_l(c: &CoefficientField, side: Side, u: &PiecewisePoly, a: f64, b: f64) -> Result<PiecewisePoly> {
    apply_with(&SideCoefficients::new(c, side), u, a, b)
}

/// `apply_l` for functions defined only on `[a, b]`: continuity is
/// checked at interior breakpoints, the endpoints may jump to zero tails.
pub fn apply_l_interior(c: &CoefficientField, side: Side, u: &PiecewisePoly, a: f64, b: f64) -> Result<PiecewisePoly> {
    let coeffs = SideCoefficients::new(c, side);
    let u1 = first_quasi(&coeffs, u);
    for &x in u1.breakpoints().iter().filter(|&&x| x > a && x < b) {
        let (jump, mag) = continuity_defect(&u1, x);
        if jump > CONTINUITY_TOL * (1.0 + mag) {
            return Err(Error::DiscontinuousQuasiDerivative { x, jump });
        }
    }
    Ok(second_quasi(&coeffs, u).neg())
}

pub(crate) fn apply_with(coeffs: &SideCoefficients, u: &PiecewisePoly, a: f64, b: f64) -> Result<PiecewisePoly> {
    check_continuity(&first_quasi(coeffs, u), a, b)?;
    Ok(second_quasi(coeffs, u).neg())
}

/// Sample grid on `[a, b]`: uniform nodes plus both one-sided limits at
/// every breakpoint, encoded as `(x, limit)`.
pub(crate) fn sample_grid(a: f64, b: f64, n: usize, breaks: &[f64]) -> Vec<(f64, Limit)> {
    let mut pts: Vec<(f64, Limit)> =
        crate::coeffs::uniform_nodes(a, b, n).into_iter().map(|x| (x, Limit::Right)).collect();
    for &x in breaks.iter().filter(|&&x| x > a && x < b) {
        pts.push((x, Limit::Left));
        pts.push((x, Limit::Right));
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    pts
}

/// Sup-norm residual of the product rule
/// `l[phi u] = phi l[u] - phi'' u - 2 phi' u' + (G1 - G2) phi' u`
/// over a sample grid of `[a, b]`, with side-specific `G1, G2`.
pub fn product_rule_check(
    c: &CoefficientField,
    side: Side,
    phi: &PiecewisePoly,
    u: &PiecewisePoly,
    a: f64,
    b: f64,
) -> Result<Residual> {
    if !phi.is_real(0.0) {
        return Err(Error::ComplexValued("cut-off function".into()));
    }
    let coeffs = SideCoefficients::new(c, side);
    let lhs = apply_with(&coeffs, &phi.mul(u), a, b)?;
    let lu = apply_with(&coeffs, u, a, b)?;
    let dphi = phi.derivative();
    let terms = [
        phi.mul(&lu),
        dphi.derivative().mul(u).neg(),
        dphi.mul(&u.derivative()).scale(C64::new(-2.0, 0.0)),
        coeffs.g1.sub(&coeffs.g2).mul(&dphi).mul(u),
    ];
    let rhs = terms.iter().skip(1).fold(terms[0].clone(), |acc, t| acc.add(t));
    let mut breaks: Vec<f64> = lhs.breakpoints().iter().chain(rhs.breakpoints()).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut abs = 0.0f64;
    let mut scale = 0.0f64;
    for (x, lim) in sample_grid(a, b, 2000, &breaks) {
        abs = abs.max((lhs.eval(x, lim) - rhs.eval(x, lim)).norm());
        let mag = lhs.eval(x, lim).norm() + terms.iter().map(|t| t.eval(x, lim).norm()).sum::<f64>();
        scale = scale.max(mag);
    }
    Ok(Residual { abs, scale })
}

/// Corrects a continuous `base` by local kinks `alpha_j (x - x_j)^+` so
/// that the result has a continuous quasi-derivative: at every breakpoint
/// `x_j` the jump of `u'` equals the jump of `G1` times `u(x_j)`. Each kink
/// is switched off by a smoothstep before the next breakpoint, so compact
/// support of `base` is preserved up to that margin.
pub fn domain_function(c: &CoefficientField, side: Side, base: &PiecewisePoly) -> PiecewisePoly {
    let coeffs = SideCoefficients::new(c, side);
    let mut pts: Vec<f64> = base.breakpoints().iter().chain(coeffs.g1.breakpoints()).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut u = base.clone();
    for (j, &x) in pts.iter().enumerate() {
        let du = u.derivative();
        let have = du.jump_at(x);
        let want = coeffs.g1.jump_at(x) * u.at(x);
        let alpha = want - have;
        if alpha != C64::new(0.0, 0.0) {
            let gap = pts.get(j + 1).map_or(2.0, |&next| next - x);
            u = u.add(&local_kink(x, (0.25 * gap).min(0.5)).scale(alpha));
        }
    }
    u
}

/// `(x - at)^+` on `[at, at + eps]`, faded to zero with a C1 smoothstep on
/// `[at + eps, at + 2 eps]`.
fn local_kink(at: f64, eps: f64) -> PiecewisePoly {
    let fade = Poly::from_real(&[eps, 1.0]).mul(&crate::lagrange_forms::smoothstep_down(eps));
    PiecewisePoly::new(
        vec![at, at + eps, at + 2.0 * eps],
        vec![Poly::zero(), Poly::from_real(&[0.0, 1.0]), fade, Poly::zero()],
    )
    .expect("kink nodes are increasing")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn field(s: PiecewisePoly, q: PiecewisePoly, r: PiecewisePoly) -> CoefficientField {
        CoefficientField::new(s, q, r).unwrap()
    }

    /// `e^{-|x|}` on [-1, 1] as a degree-8 piecewise Taylor proxy.
    fn decaying_exp_proxy() -> PiecewisePoly {
        let nodes = crate::coeffs::uniform_nodes(-1.0, 1.0, 20);
        let (p, err) = PiecewisePoly::taylor_proxy(&nodes, 8, 1.0, |x0| {
            let sgn: f64 = if x0 < 0.0 { 1.0 } else { -1.0 };
            let mut fact = 1.0;
            (0..=8)
                .map(|k| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    re((-x0.abs()).exp() * sgn.powi(k) / fact)
                })
                .collect()
        })
        .unwrap();
        assert!(err < 1e-10);
        p
    }

    #[test]
    fn free_system() {
        let sys = ShinZettlSystem::assemble(&CoefficientField::free(), Side::Direct, re(0.0));
        assert_eq!(sys.matrix_at(0.3, Limit::Right), [[re(0.0), re(1.0)], [re(0.0), re(0.0)]]);
        let sys = ShinZettlSystem::assemble(&CoefficientField::free(), Side::Direct, re(-1.0));
        assert_eq!(sys.matrix_at(0.3, Limit::Right), [[re(0.0), re(1.0)], [re(1.0), re(0.0)]]);
    }

    #[test]
    fn delta_well_system() {
        let sys = ShinZettlSystem::assemble(&CoefficientField::delta_well(0.0, -2.0), Side::Direct, re(0.0));
        let right = sys.matrix_at(1.0, Limit::Right);
        assert_eq!(right[0][0], re(-2.0));
        assert_eq!(right[1][0], re(-4.0));
        assert_eq!(right[1][1], re(2.0));
        let left = sys.matrix_at(-1.0, Limit::Right);
        assert_eq!(left, [[re(0.0), re(1.0)], [re(0.0), re(0.0)]]);
    }

    #[test]
    fn quasi_derivatives_examples() {
        let u = PiecewisePoly::real_polynomial(&[0.0, 1.0]);
        let free = CoefficientField::free();
        let v = quasi_derivatives(&free, Side::Direct, &u, 0.7, Limit::Right).unwrap();
        assert_eq!((v.y0, v.y1, v.y2), (re(0.7), re(1.0), re(0.0)));

        let c = field(PiecewisePoly::zero(), PiecewisePoly::zero(), PiecewisePoly::real_constant(1.0));
        let v = quasi_derivatives(&c, Side::Direct, &u, 0.7, Limit::Right).unwrap();
        assert!((v.y1 - C64::new(1.0, -0.7)).norm() < 1e-15);
    }

    #[test]
    fn delta_well_quasi_derivative_is_continuous() {
        let c = CoefficientField::delta_well(0.0, -2.0);
        let u = decaying_exp_proxy();
        let l = quasi_derivatives(&c, Side::Direct, &u, 0.0, Limit::Left).unwrap();
        let r = quasi_derivatives(&c, Side::Direct, &u, 0.0, Limit::Right).unwrap();
        assert!((l.y1 - re(1.0)).norm() < 1e-9);
        assert!((r.y1 - re(1.0)).norm() < 1e-9);
        let du = u.derivative();
        assert!((du.jump_at(0.0) - re(-2.0)).norm() < 1e-9);
    }

    #[test]
    fn discontinuous_quasi_derivative_is_reported() {
        let c = CoefficientField::delta_well(0.0, -2.0);
        let bump = PiecewisePoly::real_constant(1.0);
        let err = quasi_derivatives(&c, Side::Direct, &bump, 0.0, Limit::Right).unwrap_err();
        assert!(matches!(err, Error::DiscontinuousQuasiDerivative { .. }));
        assert!(apply_l(&c, Side::Direct, &bump, -1.0, 1.0).is_err());
    }

    #[test]
    fn apply_l_examples() {
        let free = CoefficientField::free();
        let u = PiecewisePoly::real_polynomial(&[0.0, 0.0, 1.0]);
        let l = apply_l(&free, Side::Direct, &u, -1.0, 1.0).unwrap();
        assert_eq!(l.at(0.3), re(-2.0));

        let c = field(PiecewisePoly::real_constant(1.0), PiecewisePoly::zero(), PiecewisePoly::zero());
        let l = apply_l(&c, Side::Direct, &PiecewisePoly::real_constant(1.0), -1.0, 1.0).unwrap();
        assert_eq!(l.at(0.3), re(1.0));
    }

    #[test]
    fn adjoint_swaps_and_conjugates() {
        let c = field(
            PiecewisePoly::constant(C64::new(0.5, 1.5)),
            PiecewisePoly::step(0.2, C64::new(-1.0, 0.3)),
            PiecewisePoly::polynomial(&[C64::new(0.1, -0.4), C64::new(0.0, 1.0)]),
        );
        let adj = ShinZettlSystem::assemble(&c, Side::Adjoint, C64::new(0.3, 0.2));
        let (g1, g2) = c.conj().derive_g();
        for x in [-1.0, 0.2, 0.9] {
            let m = adj.matrix_at(x, Limit::Right);
            // conj(G2) of the original equals G1 of the conjugated field
            assert!((m[0][0] - g1.at(x)).norm() < 1e-14);
            assert!((m[1][1] + g2.at(x)).norm() < 1e-14);
        }
    }

    #[test]
    fn domain_function_has_continuous_quasi_derivative() {
        let c = field(
            PiecewisePoly::zero(),
            PiecewisePoly::step(-0.5, re(1.5)).add(&PiecewisePoly::step(0.5, re(-2.0))),
            PiecewisePoly::step(0.1, C64::new(0.0, 0.7)),
        );
        for side in [Side::Direct, Side::Adjoint] {
            let base = PiecewisePoly::real_polynomial(&[1.0, 0.5, -0.2]);
            let u = domain_function(&c, side, &base);
            let coeffs = SideCoefficients::new(&c, side);
            assert!(check_continuity(&first_quasi(&coeffs, &u), -2.0, 2.0).is_ok());
        }
    }

    #[test]
    fn product_rule_free_bump() {
        let free = CoefficientField::free();
        let phi = crate::lagrange_forms::bump(0.0, 1.0, 1.0);
        let res = product_rule_check(&free, Side::Direct, &phi, &phi, -2.0, 2.0).unwrap();
        assert!(res.rel() <= 1e-9, "{res:?}");
    }
}
