//! Checkers for the growth and interval hypotheses of the uniqueness
//! theorems, the cut-off sequences used in their proofs, and the integral
//! identity those proofs rest on.
//!
//! No verdict here is a proof. `HoldsOnHorizon` means the sampled data on
//! the horizon show no counterexample and no growth trend;
//! `DivergenceConsistent` means the partial integrals keep growing at the
//! horizon.

use rayon::prelude::*;

use crate::coeffs::{uniform_nodes, CoefficientField, Limit, PiecewisePoly};
use crate::error::{Error, Result};
use crate::lagrange_forms::{plateau_cutoff, smoothstep_down, smoothstep_up};
use crate::poly::Poly;
use crate::propagate::Trajectory;
use crate::quad;
use crate::quasi::{self, Side};
use crate::report::{ConditionReport, Residual, Table, Verdict, Witness};
use crate::C64;

/// Largest slope of the cubic smoothstep on a unit ramp.
pub const SMOOTHSTEP_K: f64 = 1.5;
/// A later window may exceed an earlier one by this fraction before it
/// counts as growth.
pub const GROWTH_SLACK: f64 = 0.05;
/// Partial integrals still count as diverging when the last doubling of
/// the horizon added at least this fraction of the previous increment.
pub const DIVERGENCE_RATIO: f64 = 0.9;
pub const DIVERGENCE_MARGIN: f64 = 1e-3;
const QUAD_TOL: f64 = 1e-14;

/// Weight `m` with the symmetric horizon `[-X, X]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    pub m: PiecewisePoly,
    pub horizon: f64,
}

impl WeightFunction {
    pub fn new(m: PiecewisePoly, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let scale = m.coeff_scale().max(1.0);
        if !m.is_real(1e-14 * scale) {
            let x = m
                .pieces()
                .iter()
                .enumerate()
                .find(|(_, p)| p.coeffs().iter().any(|a| a.im.abs() > 1e-14 * scale))
                .map(|(k, _)| m.origin(k))
                .unwrap_or(0.0);
            return Err(Error::NonRealM { x });
        }
        let jumps = m.jumps();
        if let Some(&(x, _)) = jumps.iter().find(|(_, j)| j.norm() > 1e-12 * scale) {
            return Err(Error::InvalidArgument(format!("weight must be continuous, jumps at x = {x}")));
        }
        Ok(WeightFunction { m: m.re(), horizon })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.m.at(x).re
    }

    /// `(x, m(x))` at the minimum of `m` on the horizon.
    pub fn minimum(&self) -> (f64, f64) {
        let (x, v) = self.m.neg().sup_re_on(-self.horizon, self.horizon);
        (x, -v)
    }

    fn splits(&self, a: f64, b: f64) -> Vec<f64> {
        self.m.breakpoints().iter().copied().filter(|&t| t > a && t < b).collect()
    }

    /// `int_a^b ds / m(s)`.
    pub fn integral_inverse(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let f = |s: f64| C64::new(1.0 / self.eval(s), 0.0);
        sign * quad::integrate_split(&f, lo, hi, &self.splits(lo, hi), QUAD_TOL, QUAD_TOL).re
    }

    /// `int_X^inf ds / m` (or `int_-inf^-X`) when the tail of `m` is a
    /// polynomial of degree at least two; `None` otherwise.
    pub fn tail_integral(&self, right: bool) -> Option<f64> {
        let pieces = self.m.pieces();
        let k = if right { pieces.len() - 1 } else { 0 };
        let sign: f64 = if right { 1.0 } else { -1.0 };
        // Global polynomial in t = sign * x.
        let global = pieces[k].shift(-self.m.origin(k));
        let coeffs: Vec<C64> =
            global.coeffs().iter().enumerate().map(|(j, a)| a * sign.powi(j as i32)).collect();
        let d = coeffs.len().checked_sub(1)?;
        if d < 2 || coeffs[d].re <= 0.0 {
            return None;
        }
        let edge = self.m.breakpoints().iter().map(|b| sign * b).fold(0.0f64, f64::max);
        let start = edge.max(self.horizon);
        let mut total = self.integral_inverse(sign * self.horizon, sign * start).abs();
        // int_start^inf dt / p(t) = int_0^{1/start} s^(d-2) / rev(s) ds.
        let rev = Poly::new(coeffs.iter().rev().copied().collect());
        let f = |s: f64| C64::new(s.powi(d as i32 - 2) / rev.eval(s).re, 0.0);
        total += quad::integrate(&f, 0.0, 1.0 / start, QUAD_TOL, QUAD_TOL).re;
        Some(total)
    }
}

fn divergence_trend(i: &[f64; 4]) -> (bool, f64, f64) {
    let d2 = i[2] - i[1];
    let d3 = i[3] - i[2];
    let ratio = if d2 > 0.0 { d3 / d2 } else { f64::INFINITY };
    (ratio >= DIVERGENCE_RATIO && d3 > DIVERGENCE_MARGIN, d3, ratio)
}

/// Checks `m >= 1` on the horizon and the growth trend of
/// `I(T) = int_0^T ds / m` on both tails.
pub fn check_m(w: &WeightFunction) -> Result<ConditionReport> {
    let x = w.horizon;
    if x < 10.0 {
        return Err(Error::InvalidArgument(format!("horizon {x} below 10")));
    }
    let (xmin, mmin) = w.minimum();
    if mmin < 1.0 {
        let mut rep = ConditionReport::new("weight", Verdict::Fails);
        rep.witness = Some(Witness { x: xmin, value: mmin, note: "m < 1".into() });
        rep.set_constant("min_m", mmin);
        return Ok(rep);
    }
    let grid: Vec<f64> = (1..=16).map(|k| x * k as f64 / 16.0).collect();
    let mut table = Table::new("partial_integrals", &["T", "I_plus", "I_minus"]);
    let rows: Vec<[f64; 3]> =
        grid.par_iter().map(|&t| [t, w.integral_inverse(0.0, t), w.integral_inverse(-t, 0.0)]).collect();
    for r in &rows {
        table.push(r.to_vec());
    }
    let at = |t: f64, right: bool| if right { w.integral_inverse(0.0, t) } else { w.integral_inverse(-t, 0.0) };
    let mut rep = ConditionReport::new("weight", Verdict::DivergenceConsistent);
    rep.set_constant("min_m", mmin);
    let mut all_diverge = true;
    for (right, tag) in [(true, "plus"), (false, "minus")] {
        let i = [at(x / 8.0, right), at(x / 4.0, right), at(x / 2.0, right), at(x, right)];
        let (diverging, d3, ratio) = divergence_trend(&i);
        rep.set_constant(&format!("I_{tag}"), i[3]);
        rep.set_constant(&format!("increment_ratio_{tag}"), ratio);
        if !diverging {
            all_diverge = false;
            // Aitken extrapolation over the doubling sequence.
            let d2 = i[2] - i[1];
            let denom = d3 - d2;
            let aitken = if denom != 0.0 { i[3] - d3 * d3 / denom } else { i[3] };
            rep.set_constant(&format!("I_{tag}_aitken"), aitken);
            if let Some(tail) = w.tail_integral(right) {
                rep.set_constant(&format!("I_{tag}_limit"), i[3] + tail);
            }
            rep.notes.push(format!("I on the {tag} tail is saturating (last increment {d3:.3e})"));
        }
    }
    if !all_diverge {
        rep.verdict = Verdict::Inconclusive;
    }
    rep.tables.push(table);
    Ok(rep)
}

/// `int_0^T ds / m(s)`; negative `T` integrates the left tail.
pub fn partial_integral(w: &WeightFunction, t: f64) -> f64 {
    w.integral_inverse(0.0, t).abs()
}

/// Sup of `max(f, 0) / m` over `[a, b]`, found exactly from the critical
/// points of `f / m` on every polynomial piece. Returns `(x, value)`.
pub fn sup_ratio(f: &PiecewisePoly, m: &PiecewisePoly, a: f64, b: f64) -> (f64, f64) {
    let mut nodes: Vec<f64> = f.breakpoints().iter().chain(m.breakpoints()).copied().filter(|&t| t > a && t < b).collect();
    nodes.push(a);
    nodes.push(b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut best = (a, 0.0f64);
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let local = |g: &PiecewisePoly| {
            let (o, p) = g.local_at(mid, Limit::Right);
            p.shift(lo - o).re()
        };
        let (pf, pm) = (local(f), local(m));
        let ratio = |t: f64| pf.eval(t).re / pm.eval(t).re;
        let crit = pf.derivative().mul(&pm).sub(&pf.mul(&pm.derivative()));
        let mut cands = vec![0.0, hi - lo];
        cands.extend(crit.real_roots_in(0.0, hi - lo));
        for t in cands {
            let v = ratio(t);
            if v > best.1 {
                best = (lo + t, v);
            }
        }
    }
    best
}

/// Per-bin suprema of `r1+ / m` on the left tail and `r1- / m` on the
/// right tail, bins indexed by distance from the origin.
fn growth_bins(r1: &PiecewisePoly, w: &WeightFunction, bins: usize) -> Vec<(f64, f64, f64, f64)> {
    let x = w.horizon;
    let neg = r1.neg();
    (0..bins)
        .into_par_iter()
        .map(|k| {
            let (t0, t1) = (x * k as f64 / bins as f64, x * (k + 1) as f64 / bins as f64);
            let (xl, vl) = sup_ratio(r1, &w.m, -t1, -t0);
            let (xr, vr) = sup_ratio(&neg, &w.m, t0, t1);
            if vl >= vr {
                (t1, xl, vl, vr)
            } else {
                (t1, xr, vr, vl)
            }
        })
        .collect()
}

/// Checks `r1+ = O(m)` at `-inf` and `r1- = O(m)` at `+inf` on the
/// horizon of `w`.
pub fn check_growth(r1: &PiecewisePoly, w: &WeightFunction) -> Result<ConditionReport> {
    if !r1.is_real(1e-14 * r1.coeff_scale().max(1.0)) {
        return Err(Error::ComplexValued("r1".into()));
    }
    let r1 = r1.re();
    const BINS: usize = 64;
    let bins = growth_bins(&r1, w, BINS);
    let mut table = Table::new("growth_envelope", &["abs_x", "sup_ratio", "x_at_sup", "envelope"]);
    let mut envelope = vec![0.0; BINS];
    let mut running = 0.0f64;
    for k in (0..BINS).rev() {
        running = running.max(bins[k].2);
        envelope[k] = running;
    }
    for (k, b) in bins.iter().enumerate() {
        table.push(vec![b.0, b.2, b.1, envelope[k]]);
    }
    let window_sup = |from: usize, to: usize| {
        bins[from..to].iter().fold((0.0, 0.0f64), |acc, b| if b.2 > acc.1 { (b.1, b.2) } else { acc })
    };
    let (_, s1) = window_sup(BINS / 8, BINS / 4);
    let (_, s2) = window_sup(BINS / 4, BINS / 2);
    let (_, s3) = window_sup(BINS / 2, BINS);
    let growing = s3 > s2 * (1.0 + GROWTH_SLACK) && (s3 - s2) >= DIVERGENCE_RATIO * (s2 - s1);
    let c = s3;
    let n0_bin = (0..BINS).find(|&k| envelope[k] <= (1.0 + 0.01) * c).unwrap_or(0);
    let n0 = if n0_bin == 0 { 0.0 } else { bins[n0_bin - 1].0.ceil() };
    let mut rep = ConditionReport::new("growth", if growing { Verdict::Fails } else { Verdict::HoldsOnHorizon });
    rep.set_constant("C", c);
    rep.set_constant("N0", n0);
    rep.set_constant("sup_eighth_quarter", s1);
    rep.set_constant("sup_quarter_half", s2);
    rep.set_constant("sup_outer_half", s3);
    if growing {
        let edge = bins[BINS - 1];
        rep.witness = Some(Witness {
            x: edge.1,
            value: edge.2,
            note: format!("ratio keeps growing: {s1:.4e}, {s2:.4e}, {s3:.4e} on doubling windows"),
        });
    } else if c == 0.0 {
        rep.notes.push("r1+ vanishes on the left tail and r1- on the right tail".into());
    }
    rep.tables.push(table);
    Ok(rep)
}

/// Weight conditions plus growth bound.
pub fn check_a(r1: &PiecewisePoly, w: &WeightFunction) -> Result<ConditionReport> {
    let weight = check_m(w)?;
    let growth = check_growth(r1, w)?;
    let verdict = match (weight.verdict, growth.verdict) {
        (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
        (Verdict::DivergenceConsistent, Verdict::HoldsOnHorizon) => Verdict::HoldsOnHorizon,
        _ => Verdict::Inconclusive,
    };
    let mut rep = ConditionReport::new("check-a", verdict);
    rep.witness = weight.witness.clone().or_else(|| growth.witness.clone());
    for (k, v) in weight.constants.iter().chain(growth.constants.iter()) {
        rep.set_constant(k, *v);
    }
    rep.notes.push(format!("weight: {}", weight.verdict));
    rep.notes.push(format!("growth: {}", growth.verdict));
    rep.notes.extend(weight.notes.into_iter().chain(growth.notes));
    rep.tables.extend(weight.tables.into_iter().chain(growth.tables));
    Ok(rep)
}

/// Tabulated `rho(x) = int_0^x ds / m(s)` on the horizon.
#[derive(Clone, Debug)]
pub struct RhoMap {
    weight: WeightFunction,
    x: Vec<f64>,
    rho: Vec<f64>,
}

pub fn build_rho(w: &WeightFunction) -> Result<RhoMap> {
    let (xmin, mmin) = w.minimum();
    if mmin < 1.0 {
        return Err(Error::InvalidArgument(format!("m = {mmin} < 1 at x = {xmin}")));
    }
    let x_max = w.horizon;
    let mut x = uniform_nodes(-x_max, x_max, 2048);
    x.extend(w.m.breakpoints().iter().copied().filter(|&t| t.abs() < x_max));
    x.push(0.0);
    x.sort_by(f64::total_cmp);
    x.dedup();
    let i0 = x.iter().position(|&t| t == 0.0).expect("origin is a node");
    let cells: Vec<f64> = x.par_windows(2).map(|p| w.integral_inverse(p[0], p[1])).collect();
    let mut rho = vec![0.0; x.len()];
    for k in i0 + 1..x.len() {
        rho[k] = rho[k - 1] + cells[k - 1];
    }
    for k in (0..i0).rev() {
        rho[k] = rho[k + 1] - cells[k];
    }
    Ok(RhoMap { weight: w.clone(), x, rho })
}

impl RhoMap {
    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    /// Range `[rho(-X), rho(X)]`.
    pub fn range(&self) -> (f64, f64) {
        (self.rho[0], *self.rho.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.x[0], *self.x.last().unwrap());
        let k = self.x.partition_point(|&t| t <= x).saturating_sub(1).min(self.x.len() - 2);
        // integrate from the nearer tabulated node
        if x - self.x[k] <= self.x[k + 1] - x {
            self.rho[k] + self.weight.integral_inverse(self.x[k], x)
        } else {
            self.rho[k + 1] - self.weight.integral_inverse(x, self.x[k + 1])
        }
    }

    /// `rho'(x) = 1 / m(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        1.0 / self.weight.eval(x)
    }

    /// Solves `rho(x) = y` by safeguarded Newton iteration.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (lo_r, hi_r) = self.range();
        if !(y >= lo_r && y <= hi_r) {
            return Err(Error::InvalidArgument(format!("rho^-1({y}) outside tabulated range [{lo_r}, {hi_r}]")));
        }
        let k = self.rho.partition_point(|&r| r <= y).saturating_sub(1).min(self.x.len() - 2);
        let (mut a, mut b) = (self.x[k], self.x[k + 1]);
        let mut x = 0.5 * (a + b);
        for _ in 0..100 {
            let f = self.eval(x) - y;
            if f == 0.0 {
                return Ok(x);
            }
            if f > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let newton = x - f * self.weight.eval(x);
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (b - a) <= 1e-15 * (1.0 + x.abs()) || f.abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutoffKind {
    ThmA,
    ThmARho,
    ThmB,
}

impl CutoffKind {
    pub fn label(&self) -> &'static str {
        match self {
            CutoffKind::ThmA => "thmA",
            CutoffKind::ThmARho => "thmA-rho",
            CutoffKind::ThmB => "thmB",
        }
    }
}

/// Intervals `Delta_n = [a_n, b_n]` for `n` in `-N..=-1` and `1..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalScheme {
    intervals: Vec<(i64, f64, f64)>,
    pub delta: f64,
}

impl IntervalScheme {
    /// Intervals are sorted by index; a negative index must lie left of
    /// the origin side of the scheme, positive right.
    pub fn new(mut intervals: Vec<(i64, f64, f64)>, delta: f64) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::BadScheme("no intervals".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::BadScheme(format!("delta must be positive, got {delta}")));
        }
        intervals.sort_by_key(|iv| iv.0);
        for &(n, a, b) in &intervals {
            if n == 0 {
                return Err(Error::BadScheme("index 0 is not used".into()));
            }
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::BadScheme(format!("interval {n} = [{a}, {b}] is empty")));
            }
        }
        for w in intervals.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::BadScheme(format!("index {} repeated", w[0].0)));
            }
            if w[0].2 > w[1].1 {
                return Err(Error::BadScheme(format!(
                    "intervals {} and {} overlap or are out of order",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(IntervalScheme { intervals, delta })
    }

    /// Mirror-symmetric scheme from right-hand intervals `n -> [a_n, b_n]`,
    /// `Delta_-n = [-b_n, -a_n]`.
    pub fn symmetric(n_max: i64, delta: f64, right: impl Fn(i64) -> (f64, f64)) -> Result<Self> {
        let mut iv = Vec::new();
        for n in 1..=n_max {
            let (a, b) = right(n);
            iv.push((n, a, b));
            iv.push((-n, -b, -a));
        }
        Self::new(iv, delta)
    }

    pub fn intervals(&self) -> &[(i64, f64, f64)] {
        &self.intervals
    }

    pub fn get(&self, n: i64) -> Option<(f64, f64)> {
        self.intervals.iter().find(|iv| iv.0 == n).map(|iv| (iv.1, iv.2))
    }

    pub fn max_index(&self) -> i64 {
        self.intervals.iter().map(|iv| iv.0.abs()).max().unwrap_or(0)
    }
}

/// One member `phi_n` of a cut-off sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSequence {
    pub kind: CutoffKind,
    pub n: i64,
    pub phi: PiecewisePoly,
    pub k: f64,
    pub delta: Option<f64>,
    /// Left and right transition intervals.
    pub left: (f64, f64),
    pub right: (f64, f64),
    /// Weight for the chain-rule bound of `thmA-rho`.
    pub weight: Option<WeightFunction>,
}

/// Parameters for [`build_cutoff`].
#[derive(Clone, Debug)]
pub enum CutoffParams<'a> {
    ThmA,
    ThmARho(&'a RhoMap),
    ThmB(&'a IntervalScheme),
}

/// Cubic Hermite interpolant on `[0, h]` matching value and slope.
fn hermite3(f0: f64, d0: f64, f1: f64, d1: f64, h: f64) -> Poly {
    let c2 = (3.0 * (f1 - f0) / h - 2.0 * d0 - d1) / h;
    let c3 = (d0 + d1 - 2.0 * (f1 - f0) / h) / (h * h);
    Poly::from_real(&[f0, d0, c2, c3])
}

const RHO_CELLS: usize = 64;

fn rho_cutoff(rho: &RhoMap, n: i64) -> Result<(PiecewisePoly, (f64, f64), (f64, f64))> {
    let nf = n as f64;
    let (lo_r, hi_r) = rho.range();
    if -(nf + 1.0) < lo_r || nf + 1.0 > hi_r {
        return Err(Error::InvalidArgument(format!("rho range [{lo_r}, {hi_r}] does not cover n + 1 = {}", nf + 1.0)));
    }
    let (l0, l1, r0, r1) = (rho.inverse(-nf - 1.0)?, rho.inverse(-nf)?, rho.inverse(nf)?, rho.inverse(nf + 1.0)?);
    // phi(rho(x)) and its derivative S'(.) / m(x) on each transition.
    let up = smoothstep_up(1.0);
    let down = smoothstep_down(1.0);
    let value = |x: f64, rising: bool| {
        let y = rho.eval(x);
        let (p, t) = if rising { (&up, y + nf + 1.0) } else { (&down, y - nf) };
        let t = t.clamp(0.0, 1.0);
        (p.eval(t).re, p.derivative().eval(t).re * rho.derivative(x))
    };
    let mut breaks = Vec::new();
    let mut pieces = vec![Poly::zero()];
    for (a, b, rising) in [(l0, l1, true), (r0, r1, false)] {
        let nodes = uniform_nodes(a, b, RHO_CELLS);
        for w in nodes.windows(2) {
            let (f0, d0) = value(w[0], rising);
            let (f1, d1) = value(w[1], rising);
            breaks.push(w[0]);
            pieces.push(hermite3(f0, d0, f1, d1, w[1] - w[0]));
        }
        breaks.push(b);
        pieces.push(if rising { Poly::from_real(&[1.0]) } else { Poly::zero() });
    }
    if l1 == r0 {
        return Err(Error::InvalidArgument("rho cut-off needs n >= 1".into()));
    }
    // the plateau piece after l1 is already the constant one
    Ok((PiecewisePoly::new(breaks, pieces)?, (l0, l1), (r0, r1)))
}

/// Builds `phi_n` and verifies its invariants.
pub fn build_cutoff(n: i64, params: CutoffParams<'_>) -> Result<CutoffSequence> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("cut-off index must be >= 1, got {n}")));
    }
    let nf = n as f64;
    let seq = match params {
        CutoffParams::ThmA => CutoffSequence {
            kind: CutoffKind::ThmA,
            n,
            phi: plateau_cutoff(-nf - 1.0, -nf, nf, nf + 1.0)?,
            k: SMOOTHSTEP_K,
            delta: None,
            left: (-nf - 1.0, -nf),
            right: (nf, nf + 1.0),
            weight: None,
        },
        CutoffParams::ThmARho(rho) => {
            let (phi, left, right) = rho_cutoff(rho, n)?;
            CutoffSequence {
                kind: CutoffKind::ThmARho,
                n,
                phi,
                k: SMOOTHSTEP_K,
                delta: None,
                left,
                right,
                weight: Some(rho.weight().clone()),
            }
        }
        CutoffParams::ThmB(scheme) => {
            let (Some(left), Some(right)) = (scheme.get(-n), scheme.get(n)) else {
                return Err(Error::BadScheme(format!("scheme has no intervals with index +-{n}")));
            };
            if left.1 > right.0 {
                return Err(Error::BadScheme(format!("Delta_-{n} and Delta_{n} overlap")));
            }
            if left.1 >= 0.0 || right.0 <= 0.0 {
                return Err(Error::BadScheme(format!("Delta_-{n} must lie left of 0 and Delta_{n} right of 0")));
            }
            CutoffSequence {
                kind: CutoffKind::ThmB,
                n,
                phi: plateau_cutoff(left.0, left.1, right.0, right.1)?,
                k: SMOOTHSTEP_K,
                delta: Some(scheme.delta),
                left,
                right,
                weight: None,
            }
        }
    };
    seq.verify(512)?;
    Ok(seq)
}

impl CutoffSequence {
    /// Slope bound at `x`: `K`, `K / |Delta|` or `K / m(x)` by kind.
    pub fn slope_bound(&self, x: f64) -> f64 {
        match self.kind {
            CutoffKind::ThmA => self.k,
            CutoffKind::ThmARho => self.k / self.weight.as_ref().map_or(1.0, |w| w.eval(x)),
            CutoffKind::ThmB => {
                let len = if x < 0.0 { self.left.1 - self.left.0 } else { self.right.1 - self.right.0 };
                self.k / len
            }
        }
    }

    /// Re-checks the invariants on a mesh with `per_unit` points per unit
    /// length, plus all breakpoints.
    pub fn verify(&self, per_unit: usize) -> Result<()> {
        let (lo, hi) = (self.left.0, self.right.1);
        let span = hi - lo;
        let n = ((span * per_unit as f64).ceil() as usize).clamp(64, 200_000);
        let mut mesh = uniform_nodes(lo - 1.0, hi + 1.0, n);
        mesh.extend(self.phi.breakpoints());
        let dphi = self.phi.derivative();
        let tol = 1e-12;
        let bad = |what: &str, x: f64| Err(Error::InvalidArgument(format!("cut-off {} fails {what} at x = {x}", self.n)));
        if !self.phi.vanishes_outside(lo, hi, 1e-12) {
            return bad("support", lo);
        }
        if !self.phi.is_real(0.0) {
            return Err(Error::ComplexValued("cut-off".into()));
        }
        for &(x, j) in &self.phi.jumps() {
            if j.norm() > 1e-9 {
                return bad("continuity", x);
            }
        }
        // C1 is verified by looking at derivative jumps.
        for &(x, j) in &dphi.jumps() {
            if j.norm() > 1e-6 * (1.0 + self.slope_bound(x)) {
                return bad("C1 continuity", x);
            }
        }
        // The rho variant is a cubic Hermite fit; its slope may exceed the
        // exact chain-rule value by the interpolation error.
        let slope_slack = if self.kind == CutoffKind::ThmARho { 1e-3 } else { tol };
        for &x in &mesh {
            for lim in [Limit::Left, Limit::Right] {
                let v = self.phi.eval(x, lim).re;
                let d = dphi.eval(x, lim).re;
                if !(-tol..=1.0 + tol).contains(&v) {
                    return bad("0 <= phi <= 1", x);
                }
                if x >= self.left.1 && x <= self.right.0 && (v - 1.0).abs() > tol {
                    return bad("phi = 1 on the core", x);
                }
                if x > self.left.0 && x < self.left.1 && d < -tol {
                    return bad("phi' >= 0 on the left transition", x);
                }
                if x > self.right.0 && x < self.right.1 && d > tol {
                    return bad("phi' <= 0 on the right transition", x);
                }
                if d.abs() > self.slope_bound(x) * (1.0 + slope_slack) + tol {
                    return bad("slope bound", x);
                }
            }
        }
        Ok(())
    }
}

/// Checks `|Delta_n| >= delta` and estimates the constant `C` with
/// `r1+ <= C |Delta_-n|` on `Delta_-n` and `r1- <= C |Delta_n|` on
/// `Delta_n`.
pub fn check_intervals(r1: &PiecewisePoly, scheme: &IntervalScheme) -> Result<ConditionReport> {
    if !r1.is_real(1e-14 * r1.coeff_scale().max(1.0)) {
        return Err(Error::ComplexValued("r1".into()));
    }
    let r1 = r1.re();
    let neg = r1.neg();
    let mut table = Table::new("interval_constants", &["n", "a", "b", "length", "sup_part", "ratio"]);
    let mut rep = ConditionReport::new("check-b", Verdict::HoldsOnHorizon);
    let rows: Vec<(i64, f64, f64, f64, f64)> = scheme
        .intervals()
        .par_iter()
        .map(|&(n, a, b)| {
            let f = if n < 0 { &r1 } else { &neg };
            let (x, v) = f.sup_re_on(a, b);
            (n, a, b, x, v.max(0.0))
        })
        .collect();
    let mut c = 0.0f64;
    let mut min_len = f64::INFINITY;
    for &(n, a, b, _, sup) in &rows {
        let len = b - a;
        min_len = min_len.min(len);
        let ratio = sup / len;
        c = c.max(ratio);
        table.push(vec![n as f64, a, b, len, sup, ratio]);
        if len < scheme.delta && rep.witness.is_none() {
            rep.verdict = Verdict::Fails;
            rep.witness = Some(Witness {
                x: 0.5 * (a + b),
                value: len,
                note: format!("|Delta_{n}| = {len} < delta = {}", scheme.delta),
            });
        }
    }
    // Uniformity of C over the stored range: compare the outer half of the
    // indices with the inner half.
    let n_max = scheme.max_index();
    let split = (n_max + 1) / 2;
    let max_over = |outer: bool| {
        rows.iter()
            .filter(|r| (r.0.abs() > split) == outer)
            .map(|r| (r.4 / (r.2 - r.1), r))
            .fold((0.0f64, None), |acc, (v, r)| if v > acc.0 || acc.1.is_none() { (v, Some(r)) } else { acc })
    };
    let (inner, _) = max_over(false);
    let (outer, worst) = max_over(true);
    if n_max >= 2 && outer > inner * (1.0 + GROWTH_SLACK) && rep.witness.is_none() {
        rep.verdict = Verdict::Fails;
        if let Some(&(n, _, _, x, sup)) = worst {
            rep.witness = Some(Witness {
                x,
                value: sup,
                note: format!("per-interval constant grows: {outer:.4e} on Delta_{n} vs {inner:.4e} on the inner half"),
            });
        }
    }
    rep.set_constant("C", c);
    rep.set_constant("delta", scheme.delta);
    rep.set_constant("min_length", min_len);
    rep.set_constant("C_inner_half", inner);
    rep.set_constant("C_outer_half", outer);
    rep.tables.push(table);
    Ok(rep)
}

/// Both sides of
/// `Re (phi v, l+[phi v]) = Re(lambda) int phi^2 |v|^2 + int (phi')^2 |v|^2
/// + 2 int r1 phi' phi |v|^2` for an adjoint solution `l+[v] = lambda v`
/// (the proofs use `lambda = 0`), and the inequality audit.
#[derive(Clone, Debug, PartialEq)]
pub struct CaccioppoliReport {
    /// Left side, via the operator applied to the re-fitted `phi v`.
    pub left: f64,
    /// Right side, by quadrature of the dense output.
    pub right: f64,
    pub residual: Residual,
    /// `int phi^2 |v|^2`, the squared norm of `phi v`.
    pub mass: f64,
    /// Common log-scale of `left`, `right` and `mass`.
    pub logscale: f64,
    /// The audit applies when `Re (phi v, l+[phi v]) >= |phi v|^2`.
    pub audit_applicable: bool,
    /// `mass <= int (phi')^2 |v|^2 + 2 int r1 phi' phi |v|^2`.
    pub audit_holds: bool,
}

/// Maximum sub-interval length of the re-fitted solution.
pub const REFIT_HMAX: f64 = 0.01;

pub fn verify_caccioppoli(c: &CoefficientField, v: &Trajectory, phi: &CutoffSequence) -> Result<CaccioppoliReport> {
    if v.side() != Side::Adjoint {
        return Err(Error::SideMismatch);
    }
    let (a, b) = (phi.left.0, phi.right.1);
    let (va, vb) = v.interval();
    if a < va || b > vb {
        return Err(Error::InvalidArgument(format!("solution covers [{va}, {vb}], cut-off needs [{a}, {b}]")));
    }
    let (vfit, base) = v.refit(REFIT_HMAX);
    let w = phi.phi.mul(&vfit);
    let lw = quasi::apply_l(c, Side::Adjoint, &w, a, b)?;
    let left = w.mul(&lw.conj()).integrate(a, b).re;

    // Right side from the dense output, one panel per cell of the mesh
    // made of step knots and cut-off breakpoints.
    let r1 = c.r1();
    let dphi = phi.phi.derivative();
    let mut mesh: Vec<f64> = v
        .knots()
        .into_iter()
        .chain(phi.phi.breakpoints().iter().copied())
        .chain(r1.breakpoints().iter().copied())
        .filter(|&t| t > a && t < b)
        .collect();
    mesh.push(a);
    mesh.push(b);
    mesh.sort_by(f64::total_cmp);
    mesh.dedup();
    let mut grad = 0.0;
    let mut cross = 0.0;
    let mut mass = 0.0;
    for cell in mesh.windows(2) {
        let lim = Limit::Right;
        let at = |x: f64| {
            let q = v.eval(x);
            let v2 = q.y0.norm_sqr() * (2.0 * (q.logscale - base)).exp();
            let p = phi.phi.eval(x, lim).re;
            let dp = dphi.eval(x, lim).re;
            (p, dp, v2)
        };
        let g = |x: f64| {
            let (_, dp, v2) = at(x);
            C64::new(dp * dp * v2, 0.0)
        };
        let h = |x: f64| {
            let (p, dp, v2) = at(x);
            C64::new(2.0 * r1.eval(x, lim).re * dp * p * v2, 0.0)
        };
        let m = |x: f64| {
            let (p, _, v2) = at(x);
            C64::new(p * p * v2, 0.0)
        };
        grad += quad::gk15(&g, cell[0], cell[1]).0.re;
        cross += quad::gk15(&h, cell[0], cell[1]).0.re;
        mass += quad::gk15(&m, cell[0], cell[1]).0.re;
    }
    let shift = v.lambda().re * mass;
    let right = shift + grad + cross;
    let residual = Residual { abs: (left - right).abs(), scale: left.abs() + grad.abs() + cross.abs() + shift.abs() };
    let audit_applicable = left >= mass;
    let audit_holds = mass <= grad + cross + 1e-9 * (1.0 + residual.scale);
    Ok(CaccioppoliReport {
        left,
        right,
        residual,
        mass,
        logscale: 2.0 * base,
        audit_applicable,
        audit_holds: !audit_applicable || audit_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::{integrate_span, Tolerances};
    use crate::quasi::{QuasiState, ShinZettlSystem};

    fn one_plus_abs() -> PiecewisePoly {
        PiecewisePoly::abs_shifted(0.0).add_const(C64::new(1.0, 0.0))
    }

    fn minus_x() -> PiecewisePoly {
        PiecewisePoly::real_polynomial(&[0.0, -1.0])
    }

    #[test]
    fn unit_weight_diverges() {
        let w = WeightFunction::new(PiecewisePoly::real_constant(1.0), 20.0).unwrap();
        let rep = check_m(&w).unwrap();
        assert_eq!(rep.verdict, Verdict::DivergenceConsistent);
        assert!((rep.constant("I_plus").unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn log_weight() {
        let x = 4f64.exp() - 1.0;
        let w = WeightFunction::new(one_plus_abs(), 100.0).unwrap();
        assert!((partial_integral(&w, x) - 4.0).abs() < 1e-10);
        assert!((partial_integral(&w, -x) - 4.0).abs() < 1e-10);
        assert_eq!(check_m(&w).unwrap().verdict, Verdict::DivergenceConsistent);
    }

    #[test]
    fn quadratic_weight_saturates() {
        let w = WeightFunction::new(PiecewisePoly::real_polynomial(&[1.0, 0.0, 1.0]), 100.0).unwrap();
        let rep = check_m(&w).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!((rep.constant("I_plus_limit").unwrap() - half_pi).abs() < 1e-10);
        assert!((rep.constant("I_minus_limit").unwrap() - half_pi).abs() < 1e-10);
    }

    #[test]
    fn weight_below_one_fails() {
        let w = WeightFunction::new(PiecewisePoly::real_constant(0.5), 20.0).unwrap();
        let rep = check_m(&w).unwrap();
        assert_eq!(rep.verdict, Verdict::Fails);
        assert_eq!(rep.witness.unwrap().value, 0.5);
    }

    #[test]
    fn complex_weight_rejected() {
        let m = PiecewisePoly::constant(C64::new(1.0, 0.5));
        assert!(matches!(WeightFunction::new(m, 20.0), Err(Error::NonRealM { .. })));
    }

    #[test]
    fn linear_r1_against_linear_weight() {
        let w = WeightFunction::new(one_plus_abs(), 50.0).unwrap();
        let rep = check_growth(&minus_x(), &w).unwrap();
        assert_eq!(rep.verdict, Verdict::HoldsOnHorizon);
        let c = rep.constant("C").unwrap();
        assert!(c < 1.0 && c > 0.95, "C = {c}");
    }

    #[test]
    fn favourable_signs_give_zero_constant() {
        let w = WeightFunction::new(PiecewisePoly::real_constant(1.0), 50.0).unwrap();
        let rep = check_growth(&PiecewisePoly::real_polynomial(&[0.0, 1.0]), &w).unwrap();
        assert_eq!(rep.verdict, Verdict::HoldsOnHorizon);
        assert_eq!(rep.constant("C").unwrap(), 0.0);
    }

    #[test]
    fn cubic_r1_fails() {
        let w = WeightFunction::new(one_plus_abs(), 50.0).unwrap();
        let r1 = PiecewisePoly::real_polynomial(&[0.0, 0.0, 0.0, -1.0]);
        let rep = check_growth(&r1, &w).unwrap();
        assert_eq!(rep.verdict, Verdict::Fails);
        let wit = rep.witness.unwrap();
        assert!(wit.x.abs() > 49.0);
    }

    #[test]
    fn rho_examples() {
        let w = WeightFunction::new(PiecewisePoly::real_constant(1.0), 20.0).unwrap();
        let rho = build_rho(&w).unwrap();
        assert!((rho.eval(3.3) - 3.3).abs() < 1e-12);
        let w = WeightFunction::new(one_plus_abs(), 20.0).unwrap();
        let rho = build_rho(&w).unwrap();
        let e = 1f64.exp();
        assert!((rho.eval(e - 1.0) - 1.0).abs() < 1e-10);
        assert!((rho.eval(1.0 - e) + 1.0).abs() < 1e-10);
        assert!((rho.inverse(1.0).unwrap() - (e - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn thm_a_cutoff() {
        let c = build_cutoff(3, CutoffParams::ThmA).unwrap();
        assert_eq!(c.k, 1.5);
        assert_eq!(c.phi.at(3.0).re, 1.0);
        assert_eq!(c.phi.at(-3.0).re, 1.0);
        assert_eq!(c.phi.at(4.0).re, 0.0);
        let (_, s) = c.phi.derivative().neg().sup_re_on(3.0, 4.0);
        assert!((s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rho_cutoff_with_unit_weight_matches_thm_a() {
        let w = WeightFunction::new(PiecewisePoly::real_constant(1.0), 20.0).unwrap();
        let rho = build_rho(&w).unwrap();
        let a = build_cutoff(2, CutoffParams::ThmA).unwrap();
        let b = build_cutoff(2, CutoffParams::ThmARho(&rho)).unwrap();
        for x in uniform_nodes(-4.0, 4.0, 97) {
            assert!((a.phi.at(x) - b.phi.at(x)).norm() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn thm_b_cutoff_slope() {
        let scheme = IntervalScheme::symmetric(4, 1.0, |n| (2.0 * n as f64, 2.0 * n as f64 + 1.0)).unwrap();
        let c = build_cutoff(2, CutoffParams::ThmB(&scheme)).unwrap();
        let (_, s) = c.phi.derivative().sup_re_on(-5.0, -4.0);
        assert!((s - 1.5).abs() < 1e-12);
        let scheme = IntervalScheme::symmetric(4, 1.0, |n| (3.0 * n as f64, 3.0 * n as f64 + 2.0)).unwrap();
        let c = build_cutoff(2, CutoffParams::ThmB(&scheme)).unwrap();
        let (_, s) = c.phi.derivative().sup_re_on(-8.0, -6.0);
        assert!((s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn overlapping_scheme_rejected() {
        let r = IntervalScheme::new(vec![(1, 0.5, 2.0), (2, 1.5, 3.0)], 0.5);
        assert!(matches!(r, Err(Error::BadScheme(_))));
    }

    #[test]
    fn intervals_zero_on_intervals() {
        // spikes of growing height between the unit intervals [2n, 2n+1]
        let mut breaks = Vec::new();
        let mut pieces = vec![vec![]];
        for n in -6i64..6 {
            let a = 2.0 * n as f64 + 1.0;
            breaks.extend([a, a + 1.0]);
            let h = 10f64.powi(n.unsigned_abs() as i32);
            // -h * (x - a)(a + 1 - x), a negative bump on the gap
            pieces.push(vec![C64::new(h * a * (a + 1.0), 0.0), C64::new(-h * (2.0 * a + 1.0), 0.0), C64::new(h, 0.0)]);
            pieces.push(vec![]);
        }
        let r1 = PiecewisePoly::from_global(breaks, pieces).unwrap();
        let scheme = IntervalScheme::symmetric(5, 1.0, |n| (2.0 * n as f64, 2.0 * n as f64 + 1.0)).unwrap();
        let rep = check_intervals(&r1, &scheme).unwrap();
        assert_eq!(rep.verdict, Verdict::HoldsOnHorizon);
        assert_eq!(rep.constant("C").unwrap(), 0.0);
    }

    #[test]
    fn intervals_linear_growth_fails() {
        let scheme = IntervalScheme::symmetric(8, 1.0, |n| (2.0 * n as f64, 2.0 * n as f64 + 1.0)).unwrap();
        let rep = check_intervals(&minus_x(), &scheme).unwrap();
        assert_eq!(rep.verdict, Verdict::Fails);
        let t = rep.table("interval_constants").unwrap();
        let row = t.rows.iter().find(|r| r[0] == 3.0).unwrap();
        assert!((row[5] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn intervals_geometric_hold() {
        let scheme = IntervalScheme::symmetric(8, 1.0, |n| (2f64.powi(n as i32), 2f64.powi(n as i32 + 1))).unwrap();
        let rep = check_intervals(&minus_x(), &scheme).unwrap();
        assert_eq!(rep.verdict, Verdict::HoldsOnHorizon);
        assert!((rep.constant("C").unwrap() - 2.0).abs() < 1e-12);
        let scheme = IntervalScheme::symmetric(8, 1.0, |n| ((n * n) as f64, (n * n + n) as f64)).unwrap();
        assert_eq!(check_intervals(&minus_x(), &scheme).unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn caccioppoli_free_constant() {
        let c = CoefficientField::free();
        let sys = ShinZettlSystem::assemble(&c, Side::Adjoint, C64::new(0.0, 0.0));
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let phi = build_cutoff(2, CutoffParams::ThmA).unwrap();
        let v = integrate_span(&sys, QuasiState::new(0.0, one, zero, Side::Adjoint), -4.0, 4.0, Tolerances::default())
            .unwrap();
        let rep = verify_caccioppoli(&c, &v, &phi).unwrap();
        assert!(rep.residual.rel() < 1e-9, "{rep:?}");
        // int (phi')^2 over two unit smoothstep ramps is 2 * 6/5
        assert!((rep.right - 2.4).abs() < 1e-9);

        let v = integrate_span(&sys, QuasiState::new(0.0, zero, one, Side::Adjoint), -4.0, 4.0, Tolerances::default())
            .unwrap();
        let rep = verify_caccioppoli(&c, &v, &phi).unwrap();
        assert!(rep.residual.rel() < 1e-8, "{rep:?}");
    }
}
