//! Complex numbers carried as `mantissa * exp(log)` so that products and
//! sums of exponentially large solution values stay representable.

use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub mant: C64,
    pub log: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: C64::new(0.0, 0.0), log: 0.0 };

    pub fn new(mant: C64, log: f64) -> Self {
        Scaled { mant, log }.normalized()
    }

    pub fn from_c64(z: C64) -> Self {
        Scaled::new(z, 0.0)
    }

    /// Moves the magnitude of the mantissa into the exponent.
    pub fn normalized(self) -> Self {
        let m = self.mant.norm();
        if m == 0.0 || !m.is_finite() {
            return Scaled { mant: self.mant, log: if m == 0.0 { 0.0 } else { self.log } };
        }
        let l = m.ln();
        Scaled { mant: self.mant / m, log: self.log + l }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.norm() == 0.0
    }

    /// Natural log of the modulus (`-inf` for zero).
    pub fn ln_abs(&self) -> f64 {
        let m = self.mant.norm();
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            m.ln() + self.log
        }
    }

    /// Plain value; may overflow to infinity or underflow to zero.
    pub fn value(&self) -> C64 {
        if self.is_zero() {
            return self.mant;
        }
        self.mant * self.log.exp()
    }

    pub fn mul(self, other: Scaled) -> Scaled {
        Scaled::new(self.mant * other.mant, self.log + other.log)
    }

    pub fn mul_c(self, z: C64) -> Scaled {
        Scaled::new(self.mant * z, self.log)
    }

    pub fn conj(self) -> Scaled {
        Scaled { mant: self.mant.conj(), log: self.log }
    }

    pub fn neg(self) -> Scaled {
        Scaled { mant: -self.mant, log: self.log }
    }

    pub fn add(self, other: Scaled) -> Scaled {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.log >= other.log { (self, other) } else { (other, self) };
        Scaled::new(hi.mant + lo.mant * (lo.log - hi.log).exp(), hi.log)
    }

    pub fn sub(self, other: Scaled) -> Scaled {
        self.add(other.neg())
    }

    /// `self / other` as a plain complex number.
    pub fn ratio(self, other: Scaled) -> C64 {
        (self.mant / other.mant) * (self.log - other.log).exp()
    }
}
