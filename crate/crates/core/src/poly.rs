//! Dense complex polynomials in a local variable `t`.
//!
//! A [`Poly`] carries no origin of its own; [`crate::coeffs::PiecewisePoly`]
//! attaches one per piece so that every piece is evaluated close to zero.

use num_complex::Complex64;

use crate::C64;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    c: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        let mut p = Poly { c: coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { c: Vec::new() }
    }

    pub fn constant(a: C64) -> Self {
        Self::new(vec![a])
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// All coefficients below `tol` in modulus.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.c.iter().all(|a| a.norm() <= tol)
    }

    fn trim(&mut self) {
        while matches!(self.c.last(), Some(a) if *a == C64::new(0.0, 0.0)) {
            self.c.pop();
        }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in self.c.iter().rev() {
            acc = acc * t + a;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.c.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, a)| a * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at `t = 0`.
    pub fn antiderivative(&self) -> Poly {
        if self.c.is_empty() {
            return Poly::zero();
        }
        let mut out = Vec::with_capacity(self.c.len() + 1);
        out.push(C64::new(0.0, 0.0));
        for (k, a) in self.c.iter().enumerate() {
            out.push(a / (k as f64 + 1.0));
        }
        Poly::new(out)
    }

    pub fn scale(&self, a: C64) -> Poly {
        Poly::new(self.c.iter().map(|b| b * a).collect())
    }

    pub fn conj(&self) -> Poly {
        Poly::new(self.c.iter().map(|a| a.conj()).collect())
    }

    pub fn re(&self) -> Poly {
        Poly::new(self.c.iter().map(|a| C64::new(a.re, 0.0)).collect())
    }

    pub fn im(&self) -> Poly {
        Poly::new(self.c.iter().map(|a| C64::new(a.im, 0.0)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.c.len().max(other.c.len());
        let zero = C64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|k| {
                    self.c.get(k).copied().unwrap_or(zero) + other.c.get(k).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Re-expand about a new local origin: returns `q` with `q(s) = p(s + delta)`.
    pub fn shift(&self, delta: f64) -> Poly {
        if delta == 0.0 || self.c.len() <= 1 {
            return self.clone();
        }
        // Repeated synthetic division (Taylor shift), O(d^2).
        let mut a = self.c.clone();
        let n = a.len();
        for i in 0..n {
            for k in (i..n - 1).rev() {
                let next = a[k + 1];
                a[k] += next * delta;
            }
        }
        Poly::new(a)
    }

    /// Real roots of the real part of `p` in `[lo, hi]`, located by sign
    /// changes on a sampling grid and refined by bisection to machine
    /// precision. Roots of even multiplicity that do not change sign are
    /// only reported when a grid node lands on them exactly.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut roots = Vec::new();
        if self.is_zero() || !(hi > lo) {
            return roots;
        }
        let f = |t: f64| self.eval(t).re;
        let n = (16 * self.degree()).max(64);
        let mut t_prev = lo;
        let mut f_prev = f(lo);
        if f_prev == 0.0 {
            roots.push(lo);
        }
        for k in 1..=n {
            let t = if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 };
            let ft = f(t);
            if ft == 0.0 {
                roots.push(t);
            } else if f_prev != 0.0 && (f_prev < 0.0) != (ft < 0.0) {
                roots.push(bisect(&f, t_prev, t, f_prev));
            }
            t_prev = t;
            f_prev = ft;
        }
        roots
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

impl From<Vec<Complex64>> for Poly {
    fn from(c: Vec<Complex64>) -> Self {
        Poly::new(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn shift_matches_direct_evaluation() {
        let p = Poly::new(vec![c(1.0), C64::new(-2.0, 0.5), c(0.25), c(3.0)]);
        let q = p.shift(1.7);
        for &s in &[-1.0, 0.0, 0.3, 2.0] {
            assert!((q.eval(s) - p.eval(s + 1.7)).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_and_antiderivative() {
        let p = Poly::from_real(&[0.0, 0.0, 3.0]);
        assert_eq!(p.antiderivative().eval(1.0), c(1.0));
        assert_eq!(p.derivative(), Poly::from_real(&[0.0, 6.0]));
    }

    #[test]
    fn roots_of_quadratic() {
        let p = Poly::from_real(&[-1.0, 0.0, 1.0]);
        let r = p.real_roots_in(0.0, 2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }
}
