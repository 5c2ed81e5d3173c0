//! Finite-interval eigenvalues by shooting, and the null-space probe.

use rayon::prelude::*;

use crate::coeffs::{uniform_nodes, CoefficientField};
use crate::error::{Error, Result};
use crate::lagrange_forms::{inner_product, numerical_range_sample, TestFunction};
use crate::propagate::{fundamental, integrate, Tolerances, Trajectory};
use crate::quasi::{self, QuasiState, ShinZettlSystem, Side};
use crate::report::{Residual, Table, Verdict};
use crate::scaled::Scaled;
use crate::C64;

/// `grows` needs `N(T_max) >= PROBE_GROWTH_FACTOR * N(T_0)`.
pub const PROBE_GROWTH_FACTOR: f64 = 100.0;
/// `bounded` when the last window changes `N` by less than this fraction.
pub const PROBE_SATURATION: f64 = 0.01;
/// Below `N / lambda_max` of this size the Gram determinant is lost to
/// cancellation.
pub const PROBE_RESOLUTION: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const ACCEPT_REL: f64 = 1e-9;
pub const MERGE_TOL: f64 = 1e-8;
pub const DEFAULT_SCAN_POINTS: usize = 400;

/// Separated condition `alpha y0 + beta y1 = 0` at each end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub left: (C64, C64),
    pub right: (C64, C64),
}

impl BoundaryCondition {
    pub fn new(left: (C64, C64), right: (C64, C64)) -> Result<Self> {
        for (end, (a, b)) in [("left", left), ("right", right)] {
            if a.norm() == 0.0 && b.norm() == 0.0 {
                return Err(Error::InvalidArgument(format!("{end} boundary condition is (0, 0)")));
            }
            if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("{end} boundary condition is not finite")));
            }
        }
        Ok(BoundaryCondition { left, right })
    }

    pub fn dirichlet() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        BoundaryCondition { left: (one, zero), right: (one, zero) }
    }

    /// Initial state at `a` satisfying the left condition.
    fn left_state(&self) -> (C64, C64) {
        (-self.left.1, self.left.0)
    }

    fn right_state(&self) -> (C64, C64) {
        (-self.right.1, self.right.0)
    }
}

/// `D(lambda)` with the magnitude of the terms that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Characteristic {
    pub d: Scaled,
    /// `|Y_L| |Y_R| |exp(int tr A)|` at the matching point.
    pub scale: Scaled,
}

impl Characteristic {
    /// `|D| / scale`.
    pub fn relative(&self) -> f64 {
        if self.d.is_zero() {
            return 0.0;
        }
        (self.d.ln_abs() - self.scale.ln_abs()).exp()
    }
}

struct Shot {
    left: Trajectory,
    right: Trajectory,
    ch: Characteristic,
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
    }
    Ok(())
}

fn scaled_norm(y0: C64, y1: C64, log: f64) -> Scaled {
    Scaled::new(C64::new(y0.norm().hypot(y1.norm()), 0.0), log)
}

fn shoot(c: &CoefficientField, a: f64, b: f64, bc: &BoundaryCondition, lambda: C64, tol: Tolerances) -> Result<Shot> {
    check_interval(a, b)?;
    let sys = ShinZettlSystem::assemble(c, Side::Direct, lambda);
    let xm = 0.5 * (a + b);
    let (l0, l1) = bc.left_state();
    let (r0, r1) = bc.right_state();
    let (left, right) = rayon::join(
        || integrate(&sys, QuasiState::new(a, l0, l1, Side::Direct), xm, tol),
        || integrate(&sys, QuasiState::new(b, r0, r1, Side::Direct), xm, tol),
    );
    let (left, right) = (left?, right?);
    let yl = left.eval(xm);
    let yr = right.eval(xm);
    let w = Scaled::new(yl.y0 * yr.y1 - yl.y1 * yr.y0, yl.logscale + yr.logscale);
    let tr = sys.trace_integral(xm).at(b);
    let growth = Scaled { mant: C64::from_polar(1.0, tr.im), log: tr.re };
    let scale = scaled_norm(yl.y0, yl.y1, yl.logscale)
        .mul(scaled_norm(yr.y0, yr.y1, yr.logscale))
        .mul(Scaled { mant: C64::new(1.0, 0.0), log: tr.re });
    Ok(Shot { left, right, ch: Characteristic { d: w.mul(growth), scale } })
}

/// `D(lambda) = alpha_b y0(b) + beta_b y1(b)` for the solution with
/// `(y0, y1)(a) = (-beta_a, alpha_a)`. Evaluated through the Wronskian of
/// the left and right solutions at the midpoint, which equals `D` after
/// transport by `exp(int tr A)`.
pub fn characteristic(
    c: &CoefficientField,
    a: f64,
    b: f64,
    bc: &BoundaryCondition,
    lambda: C64,
    tol: Tolerances,
) -> Result<Characteristic> {
    Ok(shoot(c, a, b, bc, lambda, tol)?.ch)
}

/// The same `D(lambda)` by a single integration from `a` to `b`.
pub fn characteristic_direct(
    c: &CoefficientField,
    a: f64,
    b: f64,
    bc: &BoundaryCondition,
    lambda: C64,
    tol: Tolerances,
) -> Result<Characteristic> {
    check_interval(a, b)?;
    let sys = ShinZettlSystem::assemble(c, Side::Direct, lambda);
    let (l0, l1) = bc.left_state();
    let t = integrate(&sys, QuasiState::new(a, l0, l1, Side::Direct), b, tol)?;
    let y = t.eval(b);
    let (al, be) = bc.right;
    let d = Scaled::new(al * y.y0 + be * y.y1, y.logscale);
    let scale = Scaled::new(C64::new((al.norm() + be.norm()) * y.y0.norm().hypot(y.y1.norm()), 0.0), y.logscale);
    Ok(Characteristic { d, scale })
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: C64,
    /// `|D(lambda)| / scale` at acceptance.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Eigenfunction on `[a, b]`: left solution joined to the rescaled
    /// right solution.
    pub eigenfunction: Trajectory,
    /// Relative mismatch of the two halves at the matching point.
    pub mismatch: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchMode {
    /// Sign changes of `Re D` on a uniform grid, refined by bisection.
    Scan { lo: f64, hi: f64, points: usize },
    /// Newton iteration from each seed.
    Newton { seeds: Vec<C64> },
}

#[derive(Clone, Debug, Default)]
pub struct EigenSearch {
    pub found: Vec<EigenResult>,
    /// Seeds or brackets that did not converge.
    pub failures: Vec<Error>,
}

fn eigen_result(shot: Shot, lambda: C64, iterations: usize) -> Result<EigenResult> {
    let Shot { left, mut right, ch } = shot;
    let (_, xm) = left.interval();
    let yl = left.eval(xm);
    let yr = right.eval(xm);
    // least-squares factor k with Y_R k ~ Y_L
    let nr = yr.y0.norm_sqr() + yr.y1.norm_sqr();
    if nr == 0.0 {
        return Err(Error::OverflowUnrecoverable("right solution vanished at the matching point".into()));
    }
    let k = (yl.y0 * yr.y0.conj() + yl.y1 * yr.y1.conj()) / nr;
    let dlog = yl.logscale - yr.logscale;
    right.scale(k, dlog);
    let yr = right.eval(xm);
    let diff = ((yl.y0 - yr.y0).norm()).hypot((yl.y1 - yr.y1).norm());
    let mismatch = diff / yl.y0.norm().hypot(yl.y1.norm()).max(f64::MIN_POSITIVE);
    let residual = ch.relative();
    let eigenfunction = Trajectory::join(left, right)?;
    Ok(EigenResult { lambda, residual, iterations, converged: residual <= ACCEPT_REL, eigenfunction, mismatch })
}

fn sign_re(ch: &Characteristic) -> f64 {
    if ch.d.is_zero() {
        0.0
    } else {
        ch.d.mant.re.signum()
    }
}

fn bisect(
    c: &CoefficientField,
    a: f64,
    b: f64,
    bc: &BoundaryCondition,
    mut lo: f64,
    mut hi: f64,
    mut s_lo: f64,
    tol: Tolerances,
) -> Result<EigenResult> {
    let mut it = 0;
    while it < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 4.0 * f64::EPSILON * (1.0 + mid.abs()) {
            break;
        }
        it += 1;
        let ch = characteristic(c, a, b, bc, C64::new(mid, 0.0), tol)?;
        let s = sign_re(&ch);
        if s == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if s == s_lo {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
        }
    }
    let lam = C64::new(0.5 * (lo + hi), 0.0);
    eigen_result(shoot(c, a, b, bc, lam, tol)?, lam, it)
}

fn newton(
    c: &CoefficientField,
    a: f64,
    b: f64,
    bc: &BoundaryCondition,
    seed: C64,
    tol: Tolerances,
) -> Result<EigenResult> {
    let mut lam = seed;
    for it in 0..=NEWTON_MAX_ITER {
        let shot = shoot(c, a, b, bc, lam, tol)?;
        if shot.ch.relative() <= ACCEPT_REL {
            return eigen_result(shot, lam, it);
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let h = 1e-6 * (1.0 + lam.norm());
        let (dp, dm) = rayon::join(
            || characteristic(c, a, b, bc, lam + h, tol),
            || characteristic(c, a, b, bc, lam - h, tol),
        );
        let deriv = dp?.d.sub(dm?.d);
        if deriv.is_zero() {
            return Err(Error::NoConvergence { seed: format!("{seed}"), reason: "zero derivative".into() });
        }
        let step = shot.ch.d.ratio(deriv) * (2.0 * h);
        if !(step.re.is_finite() && step.im.is_finite()) {
            return Err(Error::NoConvergence { seed: format!("{seed}"), reason: "non-finite Newton step".into() });
        }
        lam -= step;
        if step.norm() <= 1e-15 * (1.0 + lam.norm()) {
            let shot = shoot(c, a, b, bc, lam, tol)?;
            let res = eigen_result(shot, lam, it + 1)?;
            if res.converged {
                return Ok(res);
            }
            return Err(Error::NoConvergence {
                seed: format!("{seed}"),
                reason: format!("stagnated at {lam} with |D|/scale = {:e}", res.residual),
            });
        }
    }
    Err(Error::NoConvergence { seed: format!("{seed}"), reason: format!("{NEWTON_MAX_ITER} iterations") })
}

/// Eigenvalues of the problem on `[a, b]` with separated conditions.
pub fn eigenvalues(
    c: &CoefficientField,
    a: f64,
    b: f64,
    bc: &BoundaryCondition,
    mode: &SearchMode,
    tol: Tolerances,
) -> Result<EigenSearch> {
    check_interval(a, b)?;
    let mut search = EigenSearch::default();
    let outcomes: Vec<Result<EigenResult>> = match mode {
        SearchMode::Scan { lo, hi, points } => {
            if !(lo < hi) || *points < 2 {
                return Err(Error::InvalidArgument(format!("bad scan range [{lo}, {hi}] with {points} points")));
            }
            let grid = uniform_nodes(*lo, *hi, *points);
            let signs: Vec<f64> = grid
                .par_iter()
                .map(|&l| characteristic(c, a, b, bc, C64::new(l, 0.0), tol).map(|ch| sign_re(&ch)))
                .collect::<Result<_>>()?;
            let brackets: Vec<(f64, f64, f64)> = (0..grid.len() - 1)
                .filter(|&k| signs[k] != 0.0 && signs[k + 1] != signs[k])
                .map(|k| (grid[k], grid[k + 1], signs[k]))
                .collect();
            brackets.par_iter().map(|&(l, h, s)| bisect(c, a, b, bc, l, h, s, tol)).collect()
        }
        SearchMode::Newton { seeds } => seeds.par_iter().map(|&s| newton(c, a, b, bc, s, tol)).collect(),
    };
    for o in outcomes {
        match o {
            Ok(r) => {
                let dup = search
                    .found
                    .iter()
                    .any(|f| (f.lambda - r.lambda).norm() <= MERGE_TOL * (1.0 + r.lambda.norm()));
                if !dup {
                    search.found.push(r);
                }
            }
            Err(e @ Error::NoConvergence { .. }) => search.failures.push(e),
            Err(e) => return Err(e),
        }
    }
    search.found.sort_by(|x, y| x.lambda.re.total_cmp(&y.lambda.re).then(x.lambda.im.total_cmp(&y.lambda.im)));
    Ok(search)
}

/// `|| l[u] - lambda u ||_2 / ((1 + |lambda|) ||u||_2)` on the re-fitted
/// eigenfunction.
pub fn eigen_residual(c: &CoefficientField, r: &EigenResult, hmax: f64) -> Result<Residual> {
    let (a, b) = r.eigenfunction.interval();
    let (u, _) = r.eigenfunction.refit(hmax);
    let lu = quasi::apply_l_interior(c, Side::Direct, &u, a, b)?;
    let diff = lu.sub(&u.scale(r.lambda));
    let num = diff.mul(&diff.conj()).integrate(a, b).re.max(0.0).sqrt();
    let den = u.mul(&u.conj()).integrate(a, b).re.sqrt() * (1.0 + r.lambda.norm());
    Ok(Residual { abs: num / den, scale: 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProbeClass {
    Grows,
    Bounded,
    Inconclusive,
}

impl ProbeClass {
    pub fn label(&self) -> &'static str {
        match self {
            ProbeClass::Grows => "grows",
            ProbeClass::Bounded => "bounded",
            ProbeClass::Inconclusive => "inconclusive",
        }
    }

    pub fn verdict(&self) -> Verdict {
        match self {
            ProbeClass::Grows => Verdict::HoldsOnHorizon,
            ProbeClass::Bounded => Verdict::Fails,
            ProbeClass::Inconclusive => Verdict::Inconclusive,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub lambda: C64,
    pub windows: Vec<f64>,
    /// Smallest Gram eigenvalue per window.
    pub n: Vec<f64>,
    /// `ln N(T)`, finite even where `N` itself overflows.
    pub ln_n: Vec<f64>,
    /// Leading windows whose `N` is above the cancellation floor
    /// `PROBE_RESOLUTION * lambda_max`; only these are classified.
    pub resolved: usize,
    pub class: ProbeClass,
    /// `N` never decreased between resolved windows.
    pub nested: bool,
    /// The sampled numerical range left the right half-plane, so no
    /// theorem backs the classification.
    pub exploratory: bool,
    pub table: Table,
}

/// Default windows `1, 2, 4, ...` doubling up to `tmax`.
pub fn default_windows(tmax: f64) -> Vec<f64> {
    let mut w = Vec::new();
    let mut t = 1.0;
    while t < tmax {
        w.push(t);
        t *= 2.0;
    }
    w.push(tmax);
    w
}

/// Smallest and largest eigenvalue of the Hermitian 2x2 Gram matrix, in
/// log form.
fn gram_eigen(g11: Scaled, g22: Scaled, g12: Scaled) -> Result<(f64, f64)> {
    let base = g11.ln_abs().max(g22.ln_abs());
    if !base.is_finite() {
        return Err(Error::OverflowUnrecoverable("Gram diagonal vanished or overflowed".into()));
    }
    let norm = |s: Scaled| (s.ln_abs() - base).exp() * if s.is_zero() { 0.0 } else { s.mant.re.signum() };
    let a = norm(g11);
    let d = norm(g22);
    let off = if g12.is_zero() { 0.0 } else { (g12.ln_abs() - base).exp() };
    let tr = a + d;
    let det = a * d - off * off;
    let lmax = 0.5 * tr + (0.25 * (a - d).powi(2) + off * off).sqrt();
    let lmin = (det / lmax).max(0.0);
    Ok((lmin.ln() + base, lmax.ln() + base))
}

fn default_family() -> Vec<TestFunction> {
    let mut f = Vec::new();
    for center in [-4.0, -1.0, 0.0, 1.5, 4.0] {
        for (plateau, ramp) in [(0.0, 0.5), (1.0, 1.0), (4.0, 3.0)] {
            f.push(TestFunction::bump(center, plateau, ramp));
        }
    }
    f
}

/// Gram matrices of the adjoint fundamental system of
/// `l+[v] = conj(lambda) v` on `[-T, T]` over expanding windows.
pub fn null_probe(c: &CoefficientField, lambda: C64, windows: &[f64], tol: Tolerances) -> Result<ProbeReport> {
    if !(lambda.re < 1.0) {
        return Err(Error::InvalidArgument(format!("probe needs Re lambda < 1, got {lambda}")));
    }
    if windows.is_empty() || windows.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("windows must be positive".into()));
    }
    let mut windows = windows.to_vec();
    windows.sort_by(f64::total_cmp);
    windows.dedup();
    let tmax = *windows.last().unwrap();
    if tmax < 10.0 {
        return Err(Error::InvalidArgument(format!("T_max = {tmax} below 10")));
    }
    let sys = ShinZettlSystem::assemble(c, Side::Adjoint, lambda.conj());
    let fs = fundamental(&sys, 0.0, -tmax, tmax, tol)?;
    let (v1, v2) = (&fs.y1, &fs.y2);
    let rows: Vec<Result<((f64, f64), Scaled, Scaled, Scaled)>> = windows
        .par_iter()
        .map(|&t| {
            let (g11, _) = inner_product(v1, v1, -t, t);
            let (g22, _) = inner_product(v2, v2, -t, t);
            let (g12, _) = inner_product(v1, v2, -t, t);
            Ok((gram_eigen(g11, g22, g12)?, g11, g22, g12))
        })
        .collect();
    let mut table =
        Table::new("gram", &["T", "ln_g11", "ln_g22", "ln_abs_g12", "ln_lambda_max", "ln_N", "N", "resolved"]);
    let mut ln_n = Vec::new();
    let mut resolved = 0;
    for (t, r) in windows.iter().zip(rows) {
        let ((l, lmax), g11, g22, g12) = r?;
        let ok = l - lmax >= PROBE_RESOLUTION.ln();
        if ok && resolved == ln_n.len() {
            resolved += 1;
        }
        table.push(vec![*t, g11.ln_abs(), g22.ln_abs(), g12.ln_abs(), lmax, l, l.exp(), if ok { 1.0 } else { 0.0 }]);
        ln_n.push(l);
    }
    let n: Vec<f64> = ln_n.iter().map(|l| l.exp()).collect();
    let used = &ln_n[..resolved];
    let nested = used.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    let class = if resolved < 2 {
        ProbeClass::Inconclusive
    } else {
        let grew = used[resolved - 1] - used[0] >= PROBE_GROWTH_FACTOR.ln();
        let last_rel = (used[resolved - 1] - used[resolved - 2]).exp_m1();
        if grew && nested {
            ProbeClass::Grows
        } else if last_rel.abs() < PROBE_SATURATION {
            ProbeClass::Bounded
        } else {
            ProbeClass::Inconclusive
        }
    };
    let range = numerical_range_sample(c, &default_family(), None)?;
    Ok(ProbeReport { lambda, windows, n, ln_n, resolved, class, nested, exploratory: range.verdict.is_fail(), table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn free_sine_characteristic() {
        let c = CoefficientField::free();
        let bc = BoundaryCondition::dirichlet();
        let tol = Tolerances::default();
        let d4 = characteristic(&c, 0.0, PI, &bc, re(4.0), tol).unwrap();
        assert!(d4.d.value().norm() < 1e-9);
        let d2 = characteristic(&c, 0.0, PI, &bc, re(2.0), tol).unwrap();
        let exact = (2f64.sqrt() * PI).sin() / 2f64.sqrt();
        assert!((d2.d.value() - re(exact)).norm() < 1e-9);
        let direct = characteristic_direct(&c, 0.0, PI, &bc, re(2.0), tol).unwrap();
        assert!((direct.d.value() - re(exact)).norm() < 1e-9);
    }

    #[test]
    fn free_spectrum_scan() {
        let c = CoefficientField::free();
        let mode = SearchMode::Scan { lo: 0.5, hi: 30.0, points: 120 };
        let s = eigenvalues(&c, 0.0, PI, &BoundaryCondition::dirichlet(), &mode, Tolerances::default()).unwrap();
        let got: Vec<f64> = s.found.iter().map(|r| r.lambda.re).collect();
        assert_eq!(got.len(), 5);
        for (k, l) in got.iter().enumerate() {
            let n2 = ((k + 1) * (k + 1)) as f64;
            assert!((l - n2).abs() / n2 < 1e-6);
        }
    }

    #[test]
    fn delta_well_ground_state() {
        let c = CoefficientField::delta_well(0.0, -2.0);
        let bc = BoundaryCondition::dirichlet();
        let ch = characteristic(&c, -20.0, 20.0, &bc, re(-1.0), Tolerances::default()).unwrap();
        assert!(ch.relative() <= 1e-6);
        let mode = SearchMode::Scan { lo: -2.0, hi: -0.5, points: 30 };
        let s = eigenvalues(&c, -20.0, 20.0, &bc, &mode, Tolerances::default()).unwrap();
        assert_eq!(s.found.len(), 1);
        assert!((s.found[0].lambda.re + 1.0).abs() < 1e-6);
    }

    #[test]
    fn drift_operator_newton() {
        // r = -i: -u'' + 2u' has eigenvalues n^2 + 1 under Dirichlet conditions
        let c = CoefficientField::new(
            crate::PiecewisePoly::zero(),
            crate::PiecewisePoly::zero(),
            crate::PiecewisePoly::constant(-C64::i()),
        )
        .unwrap();
        let mode = SearchMode::Newton { seeds: vec![re(1.0), re(4.0), re(9.0)] };
        let s = eigenvalues(&c, 0.0, PI, &BoundaryCondition::dirichlet(), &mode, Tolerances::default()).unwrap();
        let got: Vec<C64> = s.found.iter().map(|r| r.lambda).collect();
        assert_eq!(got.len(), 3, "{got:?} {:?}", s.failures);
        for (k, l) in got.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((l - re(n * n + 1.0)).norm() < 1e-7, "{l}");
        }
    }

    #[test]
    fn probe_free_zero() {
        let r = null_probe(&CoefficientField::free(), re(0.0), &default_windows(40.0), Tolerances::default()).unwrap();
        assert_eq!(r.class, ProbeClass::Grows);
        assert!(r.nested);
        for (t, n) in r.windows.iter().zip(&r.n) {
            if *t >= 2.0 {
                assert!((n / (2.0 * t) - 1.0).abs() < 1e-6, "T = {t}: N = {n}");
            }
        }
    }

    #[test]
    fn probe_free_shifted() {
        let r = null_probe(&CoefficientField::free(), re(-1.0), &default_windows(40.0), Tolerances::default()).unwrap();
        assert_eq!(r.class, ProbeClass::Grows);
        for (t, n) in r.windows.iter().zip(&r.n) {
            let exact = (2.0 * t).sinh() / 2.0 - t;
            assert!((n / exact - 1.0).abs() < 1e-5, "T = {t}: N = {n}, exact {exact}");
        }
    }

    #[test]
    fn probe_delta_well_bound_state() {
        // e^{-|x|} solves l+ v = -v, so the smallest Gram eigenvalue tends to 1/2
        let c = CoefficientField::delta_well(0.0, -2.0);
        let r = null_probe(&c, re(-1.0), &default_windows(20.0), Tolerances::default()).unwrap();
        assert_eq!(r.class, ProbeClass::Bounded);
        assert!(r.resolved >= 3 && r.resolved < r.windows.len());
        assert!((r.n[r.resolved - 1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn probe_rejects_bad_shift() {
        assert!(null_probe(&CoefficientField::free(), re(2.0), &[10.0], Tolerances::default()).is_err());
    }
}
