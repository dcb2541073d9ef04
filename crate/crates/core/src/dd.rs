//! Minimal double-double arithmetic: an unevaluated sum hi + lo with
//! |lo| ≤ ulp(hi)/2, built from error-free two-sum and fused two-product.

use std::ops::{Add, AddAssign, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    /// Nearest f64.
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn add(self, o: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Add<f64> for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn add(self, o: f64) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, o);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, o: DoubleDouble) {
        *self = *self + o;
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn sub(self, o: DoubleDouble) -> DoubleDouble {
        self + DoubleDouble {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn mul(self, o: f64) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, o);
        let (hi, lo) = quick_two_sum(p, self.lo.mul_add(o, e));
        DoubleDouble { hi, lo }
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    #[inline]
    fn mul(self, o: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_bits_below_f64_resolution() {
        let one = DoubleDouble::from(1.0);
        let tiny = DoubleDouble::from(1e-20);
        let s = one + tiny;
        assert_eq!(s.hi(), 1.0);
        assert_eq!(s.lo(), 1e-20);
        assert_eq!((s - one).to_f64(), 1e-20);
    }

    #[test]
    fn product_is_exact_for_f64_operands() {
        let a = DoubleDouble::from(1.0 + f64::EPSILON);
        let p = a * (1.0 - f64::EPSILON);
        assert_eq!(p.hi(), 1.0);
        assert_eq!(p.lo(), -f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn third_roundtrip() {
        let third = DoubleDouble::new(1.0 / 3.0, 1.850371707708594e-17);
        let r = third * 3.0 - DoubleDouble::from(1.0);
        assert!(r.to_f64().abs() < 1e-31);
    }
}
