//! Adaptive Dormand–Prince 5(4) integration of `Y' = A(x; lambda) Y`.
//!
//! Coefficient breakpoints are hard mesh nodes: no step straddles one, and
//! the state `(y0, y1)` passes through unchanged. Solutions are rescaled
//! whenever `|Y|` exceeds [`RESCALE_THRESHOLD`]; each step remembers the
//! exponent in force while it was taken.

use crate::coeffs::{Limit, PiecewisePoly};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quasi::{QuasiState, Segment, ShinZettlSystem, Side};
use crate::scaled::Scaled;
use crate::C64;

pub const RESCALE_THRESHOLD: f64 = 1e100;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_RTOL: f64 = 1e-10;
/// Steps shorter than this fraction of the interval length abort.
pub const UNDERFLOW_FRACTION: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: DEFAULT_ATOL, rtol: DEFAULT_RTOL }
    }
}

impl Tolerances {
    pub fn new(atol: f64, rtol: f64) -> Result<Self> {
        if !(atol > 0.0 && rtol > 0.0 && atol.is_finite() && rtol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerances must be positive, got {atol}, {rtol}")));
        }
        Ok(Tolerances { atol, rtol })
    }

    pub fn tighter(&self, factor: f64) -> Self {
        Tolerances { atol: self.atol / factor, rtol: self.rtol / factor }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output (Hairer's contd5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type Vec2 = [C64; 2];

#[inline]
fn axpy(y: Vec2, terms: &[(f64, &Vec2)], h: f64) -> Vec2 {
    let mut out = y;
    for (c, k) in terms {
        out[0] += k[0] * (h * c);
        out[1] += k[1] * (h * c);
    }
    out
}

/// One accepted step with its degree-4 continuous extension.
#[derive(Clone, Debug)]
struct Step {
    start: f64,
    h: f64,
    rcont: [Vec2; 5],
    logscale: f64,
}

impl Step {
    fn lo(&self) -> f64 {
        self.start.min(self.start + self.h)
    }

    fn hi(&self) -> f64 {
        self.start.max(self.start + self.h)
    }

    fn eval(&self, x: f64) -> Vec2 {
        let theta = (x - self.start) / self.h;
        let t1 = 1.0 - theta;
        let r = &self.rcont;
        let f = |i: usize| r[0][i] + (r[1][i] + (r[2][i] + (r[3][i] + r[4][i] * t1) * theta) * t1) * theta;
        [f(0), f(1)]
    }

    fn scale_by(&mut self, z: C64, dlog: f64) {
        for r in self.rcont.iter_mut() {
            r[0] *= z;
            r[1] *= z;
        }
        self.logscale += dlog;
    }
}

/// Dense-output solution of the system over an interval.
///
/// The true state at `x` is `eval(x)` with `y * exp(logscale)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    system: ShinZettlSystem,
    a: f64,
    b: f64,
    direction: Direction,
    tol: Tolerances,
    // sorted by position along the x axis
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn system(&self) -> &ShinZettlSystem {
        &self.system
    }

    pub fn side(&self) -> Side {
        self.system.side()
    }

    pub fn lambda(&self) -> C64 {
        self.system.lambda()
    }

    /// Covered interval `[lo, hi]`.
    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step boundaries in increasing order.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.steps.iter().map(Step::lo).collect();
        if let Some(last) = self.steps.last() {
            k.push(last.hi());
        }
        k
    }

    pub fn max_logscale(&self) -> f64 {
        self.steps.iter().map(|s| s.logscale).fold(f64::NEG_INFINITY, f64::max)
    }

    fn step_index(&self, x: f64, lim: Limit) -> usize {
        let i = match lim {
            Limit::Right => self.steps.partition_point(|s| s.hi() <= x),
            Limit::Left => self.steps.partition_point(|s| s.hi() < x),
        };
        i.min(self.steps.len() - 1)
    }

    /// State at `x` (clamped into the covered interval).
    pub fn eval(&self, x: f64) -> QuasiState {
        self.eval_side(x, Limit::Right)
    }

    pub fn eval_side(&self, x: f64, lim: Limit) -> QuasiState {
        let x = x.clamp(self.a, self.b);
        let s = &self.steps[self.step_index(x, lim)];
        let y = s.eval(x);
        QuasiState { x, y0: y[0], y1: y[1], side: self.side(), logscale: s.logscale }
    }

    /// `(y0, y1)` as log-scaled numbers.
    pub fn scaled(&self, x: f64) -> [Scaled; 2] {
        let q = self.eval(x);
        [Scaled::new(q.y0, q.logscale), Scaled::new(q.y1, q.logscale)]
    }

    /// Classical derivative `y0' = G1 y0 + y1` (one-sided at breakpoints),
    /// in the same scale as `eval_side(x, lim)`.
    pub fn derivative(&self, x: f64, lim: Limit) -> C64 {
        let q = self.eval_side(x, lim);
        let m = self.system.matrix_at(q.x, lim);
        m[0][0] * q.y0 + q.y1
    }

    /// Multiplies the whole trajectory by `z * exp(dlog)`.
    pub fn scale(&mut self, z: C64, dlog: f64) {
        for s in self.steps.iter_mut() {
            s.scale_by(z, dlog);
        }
    }

    /// Glues two trajectories of the same system that meet at one point.
    pub fn join(left: Trajectory, right: Trajectory) -> Result<Trajectory> {
        if left.system != right.system {
            return Err(Error::InvalidArgument("joined trajectories belong to different systems".into()));
        }
        let gap = (left.b - right.a).abs();
        if gap > 1e-12 * (1.0 + left.b.abs()) {
            return Err(Error::InvalidArgument(format!("trajectories do not meet ({} vs {})", left.b, right.a)));
        }
        let mut steps = left.steps;
        steps.extend(right.steps);
        let tol = Tolerances { atol: left.tol.atol.max(right.tol.atol), rtol: left.tol.rtol.max(right.tol.rtol) };
        Ok(Trajectory { system: left.system, a: left.a, b: right.b, direction: left.direction, tol, steps })
    }

    /// Re-fits the trajectory's `y0` as a piecewise quintic Hermite
    /// interpolant matching `u`, `u'` and `u''` at the nodes, with pieces no
    /// longer than `hmax`. Returns the fit and the common log-scale it is
    /// expressed in.
    pub fn refit(&self, hmax: f64) -> (PiecewisePoly, f64) {
        let base = self.max_logscale();
        let mut breaks = Vec::new();
        let mut pieces = vec![Poly::zero()];
        for s in &self.steps {
            let (lo, hi) = (s.lo(), s.hi());
            let seg = self.system.segment(lo, hi);
            let w = (s.logscale - base).exp();
            let n = ((hi - lo) / hmax).ceil().max(1.0) as usize;
            let nodes = crate::coeffs::uniform_nodes(lo, hi, n);
            let jet = |x: f64| {
                let y = s.eval(x);
                let y = [y[0] * w, y[1] * w];
                let d1 = seg.apply(x, y)[0];
                let d2 = seg.second(x, y)[0];
                (y[0], d1, d2)
            };
            for pair in nodes.windows(2) {
                breaks.push(pair[0]);
                pieces.push(hermite5(jet(pair[0]), jet(pair[1]), pair[1] - pair[0]));
            }
        }
        if let Some(&last) = self.knots().last() {
            breaks.push(last);
            pieces.push(Poly::zero());
        }
        let pp = PiecewisePoly::new(breaks, pieces).expect("refit nodes are increasing");
        (pp, base)
    }
}

/// Quintic matching value, first and second derivative at both ends of
/// `[0, h]`.
fn hermite5(f0: (C64, C64, C64), f1: (C64, C64, C64), h: f64) -> Poly {
    let (u0, d0, s0) = f0;
    let (u1, d1, s1) = f1;
    let r0 = u1 - (u0 + d0 * h + s0 * (0.5 * h * h));
    let r1 = (d1 - (d0 + s0 * h)) * h;
    let r2 = (s1 - s0) * (h * h);
    let a = r0 * 10.0 - r1 * 4.0 + r2 * 0.5;
    let b = r0 * -15.0 + r1 * 7.0 - r2;
    let c = r0 * 6.0 - r1 * 3.0 + r2 * 0.5;
    Poly::new(vec![u0, d0, s0 * 0.5, a / h.powi(3), b / h.powi(4), c / h.powi(5)])
}

fn err_norm(y: &Vec2, ynew: &Vec2, e: &Vec2, tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = tol.atol + tol.rtol * y[i].norm().max(ynew[i].norm());
        acc += (e[i].norm() / sc).powi(2);
    }
    (acc / 2.0).sqrt()
}

struct Stepper<'a> {
    tol: &'a Tolerances,
    interval: f64,
}

impl Stepper<'_> {
    /// Integrates one smooth segment from `x0` to `x1`, appending steps.
    fn segment(
        &self,
        seg: &Segment,
        x0: f64,
        x1: f64,
        y: &mut Vec2,
        logscale: &mut f64,
        h_guess: &mut f64,
        out: &mut Vec<Step>,
    ) -> Result<()> {
        let dir = (x1 - x0).signum();
        let len = (x1 - x0).abs();
        let f = |x: f64, y: &Vec2| seg.apply(x, *y);
        let mut x = x0;
        let mut k1 = f(x, y);
        let mut h = if *h_guess > 0.0 { h_guess.min(len) } else { initial_step(y, &k1, self.tol).min(len) };
        let hmin = UNDERFLOW_FRACTION * self.interval;
        loop {
            let remaining = (x1 - x).abs();
            if remaining <= 1e-15 * (1.0 + x1.abs()) {
                break;
            }
            let mut last = false;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
                last = true;
            }
            if h < hmin {
                return Err(Error::StepUnderflow { x, h });
            }
            let hs = h * dir;
            let k2 = f(x + C2 * hs, &axpy(*y, &[(A21, &k1)], hs));
            let k3 = f(x + C3 * hs, &axpy(*y, &[(A31, &k1), (A32, &k2)], hs));
            let k4 = f(x + C4 * hs, &axpy(*y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs));
            let k5 = f(x + C5 * hs, &axpy(*y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs));
            let k6 = f(x + hs, &axpy(*y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs));
            let xe = if last { x1 } else { x + hs };
            let ynew = axpy(*y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], hs);
            let k7 = f(xe, &ynew);
            let e = axpy(
                [C64::new(0.0, 0.0); 2],
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
                hs,
            );
            let err = err_norm(y, &ynew, &e, self.tol);
            if !err.is_finite() {
                h *= 0.2;
                continue;
            }
            if err <= 1.0 {
                let mut rc = [[C64::new(0.0, 0.0); 2]; 5];
                for i in 0..2 {
                    let dy = ynew[i] - y[i];
                    let bspl = k1[i] * hs - dy;
                    rc[0][i] = y[i];
                    rc[1][i] = dy;
                    rc[2][i] = bspl;
                    rc[3][i] = dy - k7[i] * hs - bspl;
                    rc[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * hs;
                }
                out.push(Step { start: x, h: xe - x, rcont: rc, logscale: *logscale });
                x = xe;
                *y = ynew;
                k1 = k7;
                let norm = y[0].norm().max(y[1].norm());
                if norm > RESCALE_THRESHOLD {
                    *y = [y[0] / norm, y[1] / norm];
                    k1 = [k1[0] / norm, k1[1] / norm];
                    *logscale += norm.ln();
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h *= fac;
                    *h_guess = h;
                }
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        Ok(())
    }
}

fn initial_step(y: &Vec2, f: &Vec2, tol: &Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..2 {
        let sc = tol.atol + tol.rtol * y[i].norm();
        d0 += (y[i].norm() / sc).powi(2);
        d1 += (f[i].norm() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / 2.0).sqrt(), (d1 / 2.0).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.clamp(1e-6, 1.0)
}

/// Integrates from `start` to `to` (either direction).
pub fn integrate(sys: &ShinZettlSystem, start: QuasiState, to: f64, tol: Tolerances) -> Result<Trajectory> {
    if start.side != sys.side() {
        return Err(Error::SideMismatch);
    }
    if !(to.is_finite() && start.x.is_finite()) || to == start.x {
        return Err(Error::InvalidArgument(format!("cannot integrate from {} to {}", start.x, to)));
    }
    Tolerances::new(tol.atol, tol.rtol)?;
    let x0 = start.x;
    let direction = if to > x0 { Direction::Forward } else { Direction::Backward };
    let (lo, hi) = (x0.min(to), x0.max(to));
    let mut nodes: Vec<f64> = vec![lo];
    nodes.extend(sys.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
    nodes.push(hi);
    if direction == Direction::Backward {
        nodes.reverse();
    }
    let stepper = Stepper { tol: &tol, interval: hi - lo };
    let mut y = [start.y0, start.y1];
    let mut logscale = start.logscale;
    let mut h_guess = 0.0;
    let mut steps = Vec::new();
    for w in nodes.windows(2) {
        let seg = sys.segment(w[0].min(w[1]), w[0].max(w[1]));
        stepper.segment(&seg, w[0], w[1], &mut y, &mut logscale, &mut h_guess, &mut steps)?;
    }
    if direction == Direction::Backward {
        steps.reverse();
    }
    Ok(Trajectory { system: sys.clone(), a: lo, b: hi, direction, tol, steps })
}

/// Integrates from an interior `start` to both ends of `[a, b]` and joins
/// the two halves.
pub fn integrate_span(sys: &ShinZettlSystem, start: QuasiState, a: f64, b: f64, tol: Tolerances) -> Result<Trajectory> {
    let x0 = start.x;
    if !(a <= x0 && x0 <= b && a < b) {
        return Err(Error::InvalidArgument(format!("anchor {x0} outside [{a}, {b}]")));
    }
    if x0 == a {
        return integrate(sys, start, b, tol);
    }
    if x0 == b {
        return integrate(sys, start, a, tol);
    }
    let left = integrate(sys, start, a, tol)?;
    let right = integrate(sys, start, b, tol)?;
    Trajectory::join(left, right)
}

/// Solutions with initial states `(1, 0)` and `(0, 1)` at `x0`.
#[derive(Clone, Debug)]
pub struct FundamentalSystem {
    pub x0: f64,
    pub y1: Trajectory,
    pub y2: Trajectory,
}

impl FundamentalSystem {
    pub fn side(&self) -> Side {
        self.y1.side()
    }
}

pub fn fundamental(sys: &ShinZettlSystem, x0: f64, a: f64, b: f64, tol: Tolerances) -> Result<FundamentalSystem> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let side = sys.side();
    let (y1, y2) = rayon::join(
        || integrate_span(sys, QuasiState::new(x0, one, zero, side), a, b, tol),
        || integrate_span(sys, QuasiState::new(x0, zero, one, side), a, b, tol),
    );
    Ok(FundamentalSystem { x0, y1: y1?, y2: y2? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientField;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn free(lambda: f64) -> ShinZettlSystem {
        ShinZettlSystem::assemble(&CoefficientField::free(), Side::Direct, re(lambda))
    }

    #[test]
    fn linear_solution() {
        let sys = free(0.0);
        let t = integrate(&sys, QuasiState::new(0.0, re(0.0), re(1.0), Side::Direct), 2.0, Tolerances::default())
            .unwrap();
        let q = t.eval(2.0);
        assert!((q.y0 - re(2.0)).norm() < 1e-9);
        assert!((q.y1 - re(1.0)).norm() < 1e-9);
    }

    #[test]
    fn exponential_solution() {
        let sys = free(-1.0);
        let t = integrate(&sys, QuasiState::new(0.0, re(1.0), re(1.0), Side::Direct), 1.0, Tolerances::default())
            .unwrap();
        assert!((t.eval(1.0).y0 - re(1f64.exp())).norm() < 1e-8);
        for x in [0.13, 0.5, 0.77] {
            assert!((t.eval(x).y0 - re(f64::exp(x))).norm() < 1e-9, "dense output at {x}");
        }
    }

    #[test]
    fn backward_integration() {
        let sys = free(-1.0);
        let t = integrate(&sys, QuasiState::new(1.0, re(1.0), re(-1.0), Side::Direct), -1.0, Tolerances::default())
            .unwrap();
        assert_eq!(t.direction(), Direction::Backward);
        assert!((t.eval(-1.0).y0 - re(2f64.exp())).norm() < 1e-8);
    }

    #[test]
    fn delta_well_bound_state() {
        let c = CoefficientField::delta_well(0.0, -2.0);
        let sys = ShinZettlSystem::assemble(&c, Side::Direct, re(-1.0));
        let e8 = (-8f64).exp();
        let t = integrate(&sys, QuasiState::new(-8.0, re(e8), re(e8), Side::Direct), 8.0, Tolerances::default())
            .unwrap();
        let u = t.eval(8.0);
        assert!(((u.y0 - re(e8)) / e8).norm() < 1e-5);
        assert!(((u.y1 - re(e8)) / e8).norm() < 1e-5);
        let jump = t.derivative(0.0, Limit::Right) - t.derivative(0.0, Limit::Left);
        assert!((jump - t.eval(0.0).y0 * -2.0).norm() < 1e-10);
    }

    #[test]
    fn fundamental_hyperbolic() {
        let fs = fundamental(&free(-1.0), 0.0, -1.0, 1.0, Tolerances::default()).unwrap();
        let q = fs.y1.eval(1.0);
        assert!((q.y0 - re(1f64.cosh())).norm() < 1e-9);
        assert!((q.y1 - re(1f64.sinh())).norm() < 1e-9);
        let q = fs.y2.eval(-1.0);
        assert!((q.y0 - re(-(1f64.sinh()))).norm() < 1e-9);
    }

    #[test]
    fn fundamental_free_linear() {
        let fs = fundamental(&free(0.0), 0.0, -3.0, 3.0, Tolerances::default()).unwrap();
        for x in [-3.0, -0.4, 2.2] {
            assert!((fs.y1.eval(x).y0 - re(1.0)).norm() < 1e-10);
            assert!((fs.y2.eval(x).y0 - re(x)).norm() < 1e-10);
        }
    }

    #[test]
    fn rescaling_keeps_direction() {
        let sys = free(-400.0);
        let t = integrate(&sys, QuasiState::new(0.0, re(1.0), re(20.0), Side::Direct), 15.0, Tolerances::default())
            .unwrap();
        let q = t.eval(15.0);
        assert!(q.logscale > 200.0);
        assert!((q.y1 / q.y0 - re(20.0)).norm() < 1e-8);
        assert!((q.logscale + q.y0.norm().ln() - 300.0).abs() < 1e-8);
    }

    #[test]
    fn refit_of_sine() {
        let sys = free(4.0);
        let t = integrate(&sys, QuasiState::new(0.0, re(0.0), re(2.0), Side::Direct), 3.0, Tolerances::default())
            .unwrap();
        let (p, base) = t.refit(0.05);
        assert_eq!(base, 0.0);
        for x in [0.1, 1.0, 2.9] {
            assert!((p.at(x) - re((2.0 * x).sin())).norm() < 1e-9);
            let d2 = p.derivative().derivative().at(x);
            assert!((d2 + re(4.0 * (2.0 * x).sin())).norm() < 1e-5);
        }
    }

    #[test]
    fn side_must_match() {
        let st = QuasiState::new(0.0, re(1.0), re(0.0), Side::Adjoint);
        assert!(matches!(integrate(&free(0.0), st, 1.0, Tolerances::default()), Err(Error::SideMismatch)));
    }
}
