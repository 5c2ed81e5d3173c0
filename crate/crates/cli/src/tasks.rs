//! One function per task; each fills a report and returns the outcome.

use num_complex::Complex64 as C64;
use qschro::conditions::{
    build_cutoff, build_rho, check_a, check_intervals, verify_caccioppoli, CutoffParams, IntervalScheme,
    WeightFunction,
};
use qschro::lagrange_forms::{
    bracket_at, bracket_drift, form_vs_operator_check, inner_product, lagrange_residual, numerical_range_sample,
    quadratic_form, Sector, TestFunction,
};
use qschro::propagate::{integrate_span, Tolerances};
use qschro::quasi::{domain_function, QuasiState, ShinZettlSystem, Side};
use qschro::report::Verdict;
use qschro::spectral::{
    default_windows, eigen_residual, eigenvalues, null_probe, BoundaryCondition, ProbeClass, SearchMode,
};
use qschro::{CoefficientField, PiecewisePoly};

use crate::output::Report;
use crate::problem::{validation, CutoffKindName, Initial, Num, PieceSpec, Problem, SearchSpec, SideName, TaskName};
use crate::Failure;

pub const DEFAULT_HORIZON: f64 = 50.0;
pub const DEFAULT_TMAX: f64 = 40.0;
pub const DEFAULT_SAMPLES: usize = 101;
/// Acceptance bounds on `Residual::rel` for the identity checks.
pub const LAGRANGE_TOL: f64 = 1e-8;
pub const FORM_TOL: f64 = 1e-8;
pub const CACCIOPPOLI_TOL: f64 = 1e-7;
/// Step cap of the re-fitted eigenfunction.
const EIGEN_REFIT_HMAX: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Fail => 2,
            Status::Inconclusive => 3,
        }
    }

    fn of(v: Verdict) -> Status {
        match v {
            Verdict::HoldsOnHorizon | Verdict::HoldsOnSample | Verdict::DivergenceConsistent => Status::Success,
            Verdict::Fails => Status::Fail,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }

    fn worst(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
            (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
            _ => Status::Success,
        }
    }
}

/// Fills in every default so the echoed problem is explicit.
pub fn normalize(p: &mut Problem, task: TaskName) {
    p.task = Some(task);
    let tol = Tolerances::default();
    p.tolerances.get_or_insert(crate::problem::Tols { atol: Num(tol.atol), rtol: Num(tol.rtol) });
    match task {
        TaskName::Solve => {
            p.lambda.get_or_insert(crate::problem::Cx(C64::new(0.0, 0.0)));
            p.samples.get_or_insert(DEFAULT_SAMPLES);
        }
        TaskName::Eig => {
            let one = crate::problem::Cx(C64::new(1.0, 0.0));
            let zero = crate::problem::Cx(C64::new(0.0, 0.0));
            p.bc.get_or_insert(crate::problem::BcSpec { left: [one, zero], right: [one, zero] });
        }
        TaskName::Bracket => {
            let l = *p.lambda.get_or_insert(crate::problem::Cx(C64::new(0.0, 0.0)));
            p.lambda_v.get_or_insert(crate::problem::Cx(l.0.conj()));
            p.samples.get_or_insert(DEFAULT_SAMPLES);
        }
        TaskName::CheckA | TaskName::CheckB => {
            if task == TaskName::CheckA {
                p.horizon.get_or_insert(Num(DEFAULT_HORIZON));
            }
            if p.probe == Some(true) {
                fill_probe(p);
            }
        }
        TaskName::Probe => fill_probe(p),
        TaskName::Verify => {
            p.lambda.get_or_insert(crate::problem::Cx(C64::new(0.0, 0.0)));
            if matches!(p.cutoff.map(|c| c.kind), Some(CutoffKindName::ThmARho)) {
                p.horizon.get_or_insert(Num(DEFAULT_HORIZON));
            }
        }
        TaskName::Form => {}
    }
}

fn fill_probe(p: &mut Problem) {
    p.lambda.get_or_insert(crate::problem::Cx(C64::new(0.0, 0.0)));
    let tmax = p.tmax.get_or_insert(Num(DEFAULT_TMAX)).0;
    if p.windows.is_none() {
        p.windows = Some(default_windows(tmax).into_iter().map(Num).collect());
    }
}

fn require<'a, T>(x: &'a Option<T>, field: &str, task: TaskName) -> Result<&'a T, Failure> {
    x.as_ref().ok_or_else(|| validation(field, format!("required by task {}", task.label())))
}

fn field(p: &Problem) -> Result<CoefficientField, Failure> {
    let get = |spec: &Option<PieceSpec>, name: &str| match spec {
        Some(s) => s.build(&format!("coefficients.{name}")),
        None => Ok(PiecewisePoly::zero()),
    };
    let c = &p.coefficients;
    CoefficientField::new(get(&c.s, "s")?, get(&c.q, "Q")?, get(&c.r, "r")?)
        .map_err(|e| validation("coefficients", e))
}

fn tolerances(p: &Problem) -> Result<Tolerances, Failure> {
    let t = p.tolerances.expect("normalized");
    Tolerances::new(t.atol.0, t.rtol.0).map_err(|e| validation("tolerances", e))
}

fn window(p: &Problem, task: TaskName) -> Result<(f64, f64), Failure> {
    let [a, b] = require(&p.window, "window", task)?;
    if !(a.0 < b.0) {
        return Err(validation("window", format!("[{}, {}] is not an interval", a.0, b.0)));
    }
    Ok((a.0, b.0))
}

fn side_of(s: Option<SideName>) -> Side {
    match s {
        Some(SideName::Adjoint) => Side::Adjoint,
        _ => Side::Direct,
    }
}

fn weight(p: &Problem, task: TaskName) -> Result<WeightFunction, Failure> {
    let m = require(&p.m, "m", task)?.build("m")?;
    let horizon = p.horizon.expect("normalized").0;
    WeightFunction::new(m, horizon).map_err(|e| validation("m", e))
}

fn scheme(p: &Problem, task: TaskName) -> Result<IntervalScheme, Failure> {
    let s = require(&p.scheme, "scheme", task)?;
    IntervalScheme::new(s.intervals.iter().map(|(n, a, b)| (*n, a.0, b.0)).collect(), s.delta.0)
        .map_err(|e| validation("scheme", e))
}

pub fn run(p: &Problem, task: TaskName, out: &mut Report) -> Result<Status, Failure> {
    let c = field(p)?;
    let tol = tolerances(p)?;
    match task {
        TaskName::Solve => solve(p, &c, tol, out),
        TaskName::Eig => eig(p, &c, tol, out),
        TaskName::Bracket => bracket(p, &c, tol, out),
        TaskName::Form => form(p, &c, out),
        TaskName::CheckA => {
            let w = weight(p, task)?;
            let rep = check_a(&c.r1(), &w)?;
            out.condition("check_a", &rep);
            let status = Status::of(rep.verdict);
            if p.probe == Some(true) {
                return Ok(status.worst(probe(p, &c, tol, out)?));
            }
            Ok(status)
        }
        TaskName::CheckB => {
            let rep = check_intervals(&c.r1(), &scheme(p, task)?)?;
            out.condition("check_b", &rep);
            let status = Status::of(rep.verdict);
            if p.probe == Some(true) {
                return Ok(status.worst(probe(p, &c, tol, out)?));
            }
            Ok(status)
        }
        TaskName::Probe => probe(p, &c, tol, out),
        TaskName::Verify => verify(p, &c, tol, out),
    }
}

fn start_state(init: &Initial, side: Side) -> QuasiState {
    QuasiState::new(init.x.0, init.y0.0, init.y1.0, side)
}

fn solve(p: &Problem, c: &CoefficientField, tol: Tolerances, out: &mut Report) -> Result<Status, Failure> {
    let task = TaskName::Solve;
    let (a, b) = window(p, task)?;
    let init = require(&p.initial, "initial", task)?;
    let side = side_of(init.side);
    let lambda = p.lambda.expect("normalized").0;
    let sys = ShinZettlSystem::assemble(c, side, lambda);
    let t = integrate_span(&sys, start_state(init, side), a, b, tol)?;
    out.kv("solve.side", side.label());
    out.complex("solve.lambda", lambda);
    out.kv("solve.steps", t.len().to_string());
    out.real("solve.max_logscale", t.max_logscale());
    let n = p.samples.expect("normalized").max(2);
    let rows: Vec<Vec<f64>> = qschro::coeffs::uniform_nodes(a, b, n - 1)
        .into_iter()
        .map(|x| {
            let q = t.eval(x);
            vec![x, q.y0.re, q.y0.im, q.y1.re, q.y1.im, q.logscale]
        })
        .collect();
    out.csv("trajectory", &["x", "re_y0", "im_y0", "re_y1", "im_y1", "logscale"], &rows);
    Ok(Status::Success)
}

fn eig(p: &Problem, c: &CoefficientField, tol: Tolerances, out: &mut Report) -> Result<Status, Failure> {
    let task = TaskName::Eig;
    let (a, b) = window(p, task)?;
    let bc = p.bc.expect("normalized");
    let bc = BoundaryCondition::new((bc.left[0].0, bc.left[1].0), (bc.right[0].0, bc.right[1].0))
        .map_err(|e| validation("bc", e))?;
    let mode = match require(&p.search, "search", task)? {
        SearchSpec::Scan { lo, hi, points } => {
            if !(lo.0 < hi.0) || *points < 2 {
                return Err(validation("search.scan", "needs lo < hi and at least 2 points"));
            }
            SearchMode::Scan { lo: lo.0, hi: hi.0, points: *points }
        }
        SearchSpec::Newton { seeds } => {
            if seeds.is_empty() {
                return Err(validation("search.newton.seeds", "empty"));
            }
            SearchMode::Newton { seeds: seeds.iter().map(|s| s.0).collect() }
        }
    };
    let search = eigenvalues(c, a, b, &bc, &mode, tol)?;
    out.kv("eig.count", search.found.len().to_string());
    let mut rows = Vec::new();
    for (k, r) in search.found.iter().enumerate() {
        let res = eigen_residual(c, r, EIGEN_REFIT_HMAX)?;
        out.complex(&format!("eig.lambda_{}", k + 1), r.lambda);
        rows.push(vec![
            (k + 1) as f64,
            r.lambda.re,
            r.lambda.im,
            r.residual,
            r.iterations as f64,
            r.mismatch,
            res.rel(),
            if r.converged { 1.0 } else { 0.0 },
        ]);
    }
    out.csv(
        "eigenvalues",
        &["index", "re_lambda", "im_lambda", "d_rel", "iterations", "mismatch", "l2_residual", "converged"],
        &rows,
    );
    for (k, e) in search.failures.iter().enumerate() {
        out.kv(&format!("eig.failure.{k}"), e.to_string());
    }
    if search.found.is_empty() && !search.failures.is_empty() {
        return Err(Failure::Numeric(format!("no seed converged: {}", search.failures[0])));
    }
    Ok(Status::Success)
}

fn bracket(p: &Problem, c: &CoefficientField, tol: Tolerances, out: &mut Report) -> Result<Status, Failure> {
    let task = TaskName::Bracket;
    let (a, b) = window(p, task)?;
    let lu = p.lambda.expect("normalized").0;
    let lv = p.lambda_v.expect("normalized").0;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let iu = p.initial.map(|i| start_state(&i, Side::Direct)).unwrap_or(QuasiState::new(a, zero, one, Side::Direct));
    let iv =
        p.initial_v.map(|i| start_state(&i, Side::Adjoint)).unwrap_or(QuasiState::new(a, one, zero, Side::Adjoint));
    let (u, v) = rayon::join(
        || integrate_span(&ShinZettlSystem::assemble(c, Side::Direct, lu), iu, a, b, tol),
        || integrate_span(&ShinZettlSystem::assemble(c, Side::Adjoint, lv), iv, a, b, tol),
    );
    let (u, v) = (u?, v?);
    let res = lagrange_residual(&u, &v, a, b)?;
    let (ip, _) = inner_product(&u, &v, a, b);
    out.complex("bracket.lambda_u", lu);
    out.complex("bracket.lambda_v", lv);
    for (name, x) in [("a", a), ("b", b)] {
        let br = bracket_at(&u, &v, x)?;
        out.complex(&format!("bracket.at_{name}"), br.value);
        out.real(&format!("bracket.at_{name}.logscale"), br.logscale);
    }
    out.complex("bracket.inner_product", ip.mant);
    out.real("bracket.inner_product.logscale", ip.log);
    out.real("bracket.lagrange_residual", res.rel());
    let mut ok = res.rel() <= LAGRANGE_TOL;
    if (lu - lv.conj()).norm() == 0.0 {
        let drift = bracket_drift(&u, &v, a, b, p.samples.expect("normalized"))?;
        out.real("bracket.drift", drift.rel());
        ok &= drift.rel() <= LAGRANGE_TOL;
    }
    Ok(if ok { Status::Success } else { Status::Fail })
}

fn form(p: &Problem, c: &CoefficientField, out: &mut Report) -> Result<Status, Failure> {
    let bumps = require(&p.bumps, "bumps", TaskName::Form)?;
    if bumps.is_empty() {
        return Err(validation("bumps", "empty"));
    }
    let mut family = Vec::new();
    let mut rows = Vec::new();
    let mut ok = true;
    for (k, [center, plateau, ramp]) in bumps.iter().enumerate() {
        if !(ramp.0 > 0.0) || plateau.0 < 0.0 {
            return Err(validation(&format!("bumps[{k}]"), "needs plateau >= 0 and ramp > 0"));
        }
        let t = TestFunction::bump(center.0, plateau.0, ramp.0);
        let u = domain_function(c, Side::Direct, &t.u);
        let (a, b) = (t.a - 1.0, t.b + 1.0);
        let f = quadratic_form(c, &u, a, b)?;
        let r = form_vs_operator_check(c, &u, a, b)?;
        ok &= r.rel() <= FORM_TOL;
        rows.push(vec![k as f64, f.value.re, f.value.im, f.kinetic.re, f.coupling.re, f.coupling.im, r.rel()]);
        family.push(TestFunction::new(u, a, b));
    }
    out.csv("forms", &["index", "re_form", "im_form", "kinetic", "re_coupling", "im_coupling", "form_residual"], &rows);
    let sector = match p.sector {
        Some(s) => Some(Sector::new(s.0).map_err(|e| validation("sector", e))?),
        None => None,
    };
    let range = numerical_range_sample(c, &family, sector)?;
    out.condition("numerical_range", &range);
    let status = Status::of(range.verdict);
    Ok(if ok { status } else { Status::Fail })
}

fn probe(p: &Problem, c: &CoefficientField, tol: Tolerances, out: &mut Report) -> Result<Status, Failure> {
    let lambda = p.lambda.expect("normalized").0;
    let windows: Vec<f64> = p.windows.as_ref().expect("normalized").iter().map(|w| w.0).collect();
    let rep = null_probe(c, lambda, &windows, tol)?;
    out.complex("probe.lambda", rep.lambda);
    out.kv("probe.class", rep.class.label());
    out.kv("probe.resolved_windows", rep.resolved.to_string());
    out.kv("probe.nested", rep.nested.to_string());
    out.kv("probe.exploratory", rep.exploratory.to_string());
    out.real("probe.ln_growth", rep.ln_n.last().unwrap() - rep.ln_n[0]);
    out.table(&rep.table);
    Ok(match rep.class {
        ProbeClass::Grows => Status::Success,
        ProbeClass::Bounded => Status::Fail,
        ProbeClass::Inconclusive => Status::Inconclusive,
    })
}

fn verify(p: &Problem, c: &CoefficientField, tol: Tolerances, out: &mut Report) -> Result<Status, Failure> {
    let task = TaskName::Verify;
    let spec = require(&p.cutoff, "cutoff", task)?;
    let lambda = p.lambda.expect("normalized").0;
    let rho;
    let sch;
    let params = match spec.kind {
        CutoffKindName::ThmA => CutoffParams::ThmA,
        CutoffKindName::ThmARho => {
            rho = build_rho(&weight(p, task)?)?;
            CutoffParams::ThmARho(&rho)
        }
        CutoffKindName::ThmB => {
            sch = scheme(p, task)?;
            CutoffParams::ThmB(&sch)
        }
    };
    let phi = build_cutoff(spec.n, params).map_err(|e| validation("cutoff", e))?;
    let (a, b) = (phi.left.0, phi.right.1);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let init = p.initial.map(|i| start_state(&i, Side::Adjoint)).unwrap_or(QuasiState::new(0.0, one, zero, Side::Adjoint));
    let sys = ShinZettlSystem::assemble(c, Side::Adjoint, lambda.conj());
    let v = integrate_span(&sys, init, a.min(init.x), b.max(init.x), tol)?;
    let rep = verify_caccioppoli(c, &v, &phi)?;
    out.kv("verify.cutoff", phi.kind.label());
    out.kv("verify.n", phi.n.to_string());
    out.real("verify.support_left", a);
    out.real("verify.support_right", b);
    out.real("verify.K", phi.k);
    out.real("verify.left", rep.left);
    out.real("verify.right", rep.right);
    out.real("verify.mass", rep.mass);
    out.real("verify.logscale", rep.logscale);
    out.real("verify.residual", rep.residual.rel());
    out.kv("verify.audit_applicable", rep.audit_applicable.to_string());
    out.kv("verify.audit_holds", rep.audit_holds.to_string());
    Ok(if rep.residual.rel() <= CACCIOPPOLI_TOL { Status::Success } else { Status::Fail })
}
