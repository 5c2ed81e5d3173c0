//! Adaptive Gauss–Kronrod (7, 15) quadrature for complex integrands.

use crate::C64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod panel: returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive bisection until the panel error estimate falls below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate(f: &impl Fn(f64) -> C64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> C64 {
    if a == b {
        return C64::new(0.0, 0.0);
    }
    let (whole, _) = gk15(f, a, b);
    recurse(f, a, b, abs_tol, rel_tol, whole.norm(), 0)
}

fn recurse(f: &impl Fn(f64) -> C64, a: f64, b: f64, abs_tol: f64, rel_tol: f64, scale: f64, depth: u32) -> C64 {
    let (v, err) = gk15(f, a, b);
    if err <= abs_tol.max(rel_tol * scale) || depth >= 48 {
        return v;
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, 0.5 * abs_tol, rel_tol, scale, depth + 1)
        + recurse(f, m, b, 0.5 * abs_tol, rel_tol, scale, depth + 1)
}

/// Integrates over `[a, b]` split at the given interior points.
pub fn integrate_split(
    f: &impl Fn(f64) -> C64,
    a: f64,
    b: f64,
    splits: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> C64 {
    let mut pts = vec![a];
    pts.extend(splits.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| integrate(f, w[0], w[1], abs_tol, rel_tol)).sum()
}
