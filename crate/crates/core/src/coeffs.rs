//! Piecewise-polynomial coefficient data.
//!
//! The coefficients `s`, `Q` and `r` of the expression are stored exactly as
//! piecewise polynomials with finitely many breakpoints. A step in `Q` is a
//! Dirac mass in `q = s + Q'`; steps in `r` are allowed as well since only
//! `G1 = Q + i r` and `G2 = Q - i r` enter the first-order system.

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::C64;

pub const DEFAULT_MAX_DEGREE: usize = 8;

/// Which one-sided limit to take at a breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Limit {
    Left,
    Right,
}

/// A complex function that is polynomial between consecutive breakpoints.
///
/// With breakpoints `b_0 < ... < b_{n-1}` there are `n + 1` pieces: the left
/// tail on `(-inf, b_0)`, the interior pieces `[b_{k-1}, b_k)` and the right
/// tail `[b_{n-1}, inf)`. Piece `k` is stored in the local variable
/// `x - origin(k)`, where the origin is the left breakpoint of the piece
/// (`b_0` for the left tail, `0` when there are no breakpoints).
///
/// Jumps are not stored separately: the jump at `b_k` is the difference of
/// the adjacent pieces there, so one-sided values and jump heights can never
/// disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Poly>,
}

impl PiecewisePoly {
    /// Builds from breakpoints and pieces already expressed in local
    /// coordinates.
    pub fn new(breaks: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if pieces.len() != breaks.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} pieces for {} breakpoints, got {}",
                breaks.len() + 1,
                breaks.len(),
                pieces.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("breakpoints must be finite".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        if pieces.iter().flat_map(|p| p.coeffs()).any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(PiecewisePoly { breaks, pieces })
    }

    /// Builds from pieces given as coefficients of powers of the global `x`.
    pub fn from_global(breaks: Vec<f64>, pieces: Vec<Vec<C64>>) -> Result<Self> {
        let n = breaks.len();
        let local = pieces
            .into_iter()
            .enumerate()
            .map(|(k, c)| Poly::new(c).shift(origin_of(&breaks, k.min(n))))
            .collect();
        Self::new(breaks, local)
    }

    pub fn zero() -> Self {
        PiecewisePoly { breaks: Vec::new(), pieces: vec![Poly::zero()] }
    }

    pub fn constant(a: C64) -> Self {
        PiecewisePoly { breaks: Vec::new(), pieces: vec![Poly::constant(a)] }
    }

    pub fn real_constant(a: f64) -> Self {
        Self::constant(C64::new(a, 0.0))
    }

    /// A single polynomial on the whole line, coefficients of powers of `x`.
    pub fn polynomial(coeffs: &[C64]) -> Self {
        PiecewisePoly { breaks: Vec::new(), pieces: vec![Poly::new(coeffs.to_vec())] }
    }

    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        PiecewisePoly { breaks: Vec::new(), pieces: vec![Poly::from_real(coeffs)] }
    }

    /// `height * H(x - at)` with the right-continuous Heaviside function.
    pub fn step(at: f64, height: C64) -> Self {
        PiecewisePoly { breaks: vec![at], pieces: vec![Poly::zero(), Poly::constant(height)] }
    }

    /// `|x - at|`.
    pub fn abs_shifted(at: f64) -> Self {
        PiecewisePoly {
            breaks: vec![at],
            pieces: vec![Poly::from_real(&[0.0, -1.0]), Poly::from_real(&[0.0, 1.0])],
        }
    }

    /// `max(x - at, 0)`.
    pub fn ramp(at: f64) -> Self {
        PiecewisePoly { breaks: vec![at], pieces: vec![Poly::zero(), Poly::from_real(&[0.0, 1.0])] }
    }

    /// Piecewise Taylor proxy of a function on `[nodes[0], nodes[last]]`,
    /// zero outside. `taylor(x0)` returns `f^(k)(x0) / k!` for
    /// `k = 0..=degree`; each sub-interval is expanded about its midpoint.
    ///
    /// With `bound >= sup |f^(degree+1)|` on the window, the returned error
    /// is a certified sup-norm bound for the proxy on the window.
    pub fn taylor_proxy(
        nodes: &[f64],
        degree: usize,
        bound: f64,
        taylor: impl Fn(f64) -> Vec<C64>,
    ) -> Result<(Self, f64)> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("taylor proxy needs at least two nodes".into()));
        }
        let mut pieces = vec![Poly::zero()];
        let mut max_half = 0.0f64;
        for w in nodes.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let mut c = taylor(mid);
            c.truncate(degree + 1);
            pieces.push(Poly::new(c).shift(w[0] - mid));
            max_half = max_half.max(0.5 * (w[1] - w[0]));
        }
        pieces.push(Poly::zero());
        let fact: f64 = (1..=degree + 1).map(|k| k as f64).product();
        let err = bound * max_half.powi(degree as i32 + 1) / fact;
        Ok((Self::new(nodes.to_vec(), pieces)?, err))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn origin(&self, k: usize) -> f64 {
        origin_of(&self.breaks, k)
    }

    /// Interval covered by piece `k`, with infinite ends for the tails.
    pub fn piece_interval(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.breaks[k - 1] };
        let hi = if k == self.breaks.len() { f64::INFINITY } else { self.breaks[k] };
        (lo, hi)
    }

    pub fn piece_index(&self, x: f64, lim: Limit) -> usize {
        match lim {
            Limit::Right => self.breaks.partition_point(|&b| b <= x),
            Limit::Left => self.breaks.partition_point(|&b| b < x),
        }
    }

    /// Local polynomial and origin of the piece containing the open
    /// interval around `x` from the side `lim`.
    pub fn local_at(&self, x: f64, lim: Limit) -> (f64, &Poly) {
        let k = self.piece_index(x, lim);
        (self.origin(k), &self.pieces[k])
    }

    pub fn eval(&self, x: f64, lim: Limit) -> C64 {
        let k = self.piece_index(x, lim);
        self.pieces[k].eval(x - self.origin(k))
    }

    /// Right-sided value.
    pub fn at(&self, x: f64) -> C64 {
        self.eval(x, Limit::Right)
    }

    pub fn jump_at(&self, x: f64) -> C64 {
        self.eval(x, Limit::Right) - self.eval(x, Limit::Left)
    }

    /// Nonzero jumps as `(location, right - left)`.
    pub fn jumps(&self) -> Vec<(f64, C64)> {
        self.breaks
            .iter()
            .map(|&b| (b, self.jump_at(b)))
            .filter(|(_, j)| *j != C64::new(0.0, 0.0))
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.pieces.iter().flat_map(|p| p.coeffs()).all(|a| a.im.abs() <= tol)
    }

    /// Inserts additional (possibly spurious) breakpoints.
    pub fn refine(&self, extra: &[f64]) -> Self {
        let mut breaks = extra.to_vec();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let other = PiecewisePoly { pieces: vec![Poly::zero(); breaks.len() + 1], breaks };
        self.zip(&other, |a, _| a.clone())
    }

    /// Applies `op` piecewise on the common refinement of both breakpoint sets.
    fn zip(&self, other: &Self, op: impl Fn(&Poly, &Poly) -> Poly) -> Self {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(other.breaks.iter()).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let n = breaks.len();
        let mut pieces = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let o = origin_of(&breaks, k);
            let (ia, ib) = if k == 0 {
                (0, 0)
            } else {
                let left = breaks[k - 1];
                (
                    self.breaks.partition_point(|&b| b <= left),
                    other.breaks.partition_point(|&b| b <= left),
                )
            };
            let pa = self.pieces[ia].shift(o - self.origin(ia));
            let pb = other.pieces[ib].shift(o - other.origin(ib));
            pieces.push(op(&pa, &pb));
        }
        PiecewisePoly { breaks, pieces }
    }

    fn map(&self, op: impl Fn(&Poly) -> Poly) -> Self {
        PiecewisePoly { breaks: self.breaks.clone(), pieces: self.pieces.iter().map(op).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, Poly::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, Poly::sub)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, Poly::mul)
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map(|p| p.scale(a))
    }

    pub fn neg(&self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn add_const(&self, a: C64) -> Self {
        self.map(|p| p.add(&Poly::constant(a)))
    }

    pub fn conj(&self) -> Self {
        self.map(Poly::conj)
    }

    pub fn re(&self) -> Self {
        self.map(Poly::re)
    }

    pub fn im(&self) -> Self {
        self.map(Poly::im)
    }

    /// Piecewise classical derivative; Dirac masses at jumps are dropped.
    pub fn derivative(&self) -> Self {
        self.map(Poly::derivative)
    }

    /// Continuous antiderivative `F` with `F(anchor) = 0`. Jumps of `f`
    /// become kinks of `F`.
    pub fn antiderivative(&self, anchor: f64) -> Self {
        let n = self.breaks.len();
        let mut pieces: Vec<Poly> = self.pieces.iter().map(Poly::antiderivative).collect();
        // Each antiderivative vanishes at its own origin; chain the constants
        // so that F is continuous at every breakpoint.
        for k in 1..=n {
            let prev_end = pieces[k - 1].eval(self.breaks[k - 1] - self.origin(k - 1));
            pieces[k] = pieces[k].add(&Poly::constant(prev_end));
        }
        let f = PiecewisePoly { breaks: self.breaks.clone(), pieces };
        let shift = f.at(anchor);
        f.add_const(-shift)
    }

    /// Exact integral over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64) -> C64 {
        let f = self.antiderivative(a);
        f.at(b)
    }

    /// True when the function is identically zero outside `[a, b]`.
    pub fn vanishes_outside(&self, a: f64, b: f64, tol: f64) -> bool {
        (0..self.pieces.len()).all(|k| {
            let (lo, hi) = self.piece_interval(k);
            let outside = lo < a || hi > b;
            !outside || self.pieces[k].is_negligible(tol)
        })
    }

    /// Sup of the real part over `[a, b]`, including one-sided limits at
    /// interior breakpoints. Pieces that only touch an endpoint are
    /// ignored. Returns `(x, value)` of a maximizer.
    pub fn sup_re_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut best = (a, f64::NEG_INFINITY);
        let mut consider = |x: f64, v: f64| {
            if v > best.1 {
                best = (x, v);
            }
        };
        for k in 0..self.pieces.len() {
            let (lo, hi) = self.piece_interval(k);
            let lo = lo.max(a);
            let hi = hi.min(b);
            if lo > hi || (lo == hi && a < b) {
                continue;
            }
            let o = self.origin(k);
            let p = &self.pieces[k];
            consider(lo, p.eval(lo - o).re);
            consider(hi, p.eval(hi - o).re);
            for t in p.derivative().real_roots_in(lo - o, hi - o) {
                consider(t + o, p.eval(t).re);
            }
        }
        best
    }

    /// Largest modulus of the local coefficients, a cheap magnitude scale.
    pub fn coeff_scale(&self) -> f64 {
        self.pieces.iter().flat_map(|p| p.coeffs()).map(|a| a.norm()).fold(0.0, f64::max)
    }
}

fn origin_of(breaks: &[f64], k: usize) -> f64 {
    match (breaks.is_empty(), k) {
        (true, _) => 0.0,
        (false, 0) => breaks[0],
        (false, k) => breaks[k - 1],
    }
}

/// Uniformly spaced nodes `a = x_0 < ... < x_n = b`.
pub fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 }).collect()
}

/// The coefficient triple `(s, Q, r)` with `q = s + Q'`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub s: PiecewisePoly,
    pub q: PiecewisePoly,
    pub r: PiecewisePoly,
}

impl CoefficientField {
    pub fn new(s: PiecewisePoly, q: PiecewisePoly, r: PiecewisePoly) -> Result<Self> {
        Self::with_max_degree(s, q, r, DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(
        s: PiecewisePoly,
        q: PiecewisePoly,
        r: PiecewisePoly,
        max_degree: usize,
    ) -> Result<Self> {
        for (name, f) in [("s", &s), ("Q", &q), ("r", &r)] {
            if f.max_degree() > max_degree {
                return Err(Error::InvalidArgument(format!(
                    "{name} has degree {} above the cap {max_degree}",
                    f.max_degree()
                )));
            }
        }
        Ok(CoefficientField { s, q, r })
    }

    /// `q = r = 0`.
    pub fn free() -> Self {
        CoefficientField {
            s: PiecewisePoly::zero(),
            q: PiecewisePoly::zero(),
            r: PiecewisePoly::zero(),
        }
    }

    /// `q = c * delta(x - at)`, `r = 0`.
    pub fn delta_well(at: f64, c: f64) -> Self {
        CoefficientField {
            s: PiecewisePoly::zero(),
            q: PiecewisePoly::step(at, C64::new(c, 0.0)),
            r: PiecewisePoly::zero(),
        }
    }

    pub fn g1(&self) -> PiecewisePoly {
        self.q.add(&self.r.scale(C64::i()))
    }

    pub fn g2(&self) -> PiecewisePoly {
        self.q.sub(&self.r.scale(C64::i()))
    }

    pub fn derive_g(&self) -> (PiecewisePoly, PiecewisePoly) {
        (self.g1(), self.g2())
    }

    /// `Re r`.
    pub fn r0(&self) -> PiecewisePoly {
        self.r.re()
    }

    /// `Im r`.
    pub fn r1(&self) -> PiecewisePoly {
        self.r.im()
    }

    pub fn is_real(&self) -> bool {
        self.s.is_real(0.0) && self.q.is_real(0.0) && self.r.is_real(0.0)
    }

    pub fn conj(&self) -> Self {
        CoefficientField { s: self.s.conj(), q: self.q.conj(), r: self.r.conj() }
    }

    pub fn max_degree(&self) -> usize {
        self.s.max_degree().max(self.q.max_degree()).max(self.r.max_degree())
    }
}

/// Positive and negative parts of a real function sampled on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledParts {
    pub x: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

/// Samples `f+ = (|f| + f)/2` and `f- = (|f| - f)/2` on `[a, b]` with
/// spacing at most `h`. Sign changes of `f` inside the window are added to
/// the mesh so that the supports of the two parts are resolved exactly.
pub fn pos_neg_parts(f: &PiecewisePoly, a: f64, b: f64, h: f64) -> Result<SampledParts> {
    if !(b > a) || !(h > 0.0) {
        return Err(Error::InvalidArgument("need a < b and h > 0".into()));
    }
    let scale = f.coeff_scale().max(1.0);
    if !f.is_real(1e-14 * scale) {
        return Err(Error::ComplexValued("pos_neg_parts".into()));
    }
    let n = ((b - a) / h).ceil() as usize;
    let mut x = uniform_nodes(a, b, n.max(1));
    x.extend(f.breakpoints().iter().copied().filter(|&t| t > a && t < b));
    for k in 0..f.pieces().len() {
        let (lo, hi) = f.piece_interval(k);
        let lo = lo.max(a);
        let hi = hi.min(b);
        if lo >= hi {
            continue;
        }
        let o = f.origin(k);
        x.extend(f.pieces()[k].real_roots_in(lo - o, hi - o).into_iter().map(|t| t + o));
    }
    x.sort_by(f64::total_cmp);
    x.dedup();
    let values: Vec<f64> = x.iter().map(|&t| f.at(t).re).collect();
    let plus = values.iter().map(|v| v.max(0.0)).collect();
    let minus = values.iter().map(|v| (-v).max(0.0)).collect();
    Ok(SampledParts { x, plus, minus })
}
