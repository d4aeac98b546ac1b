//! Closed intervals with outward-sound arithmetic for support propagation.
//!
//! Rounding is not directed; results are widened by a few ulps relative to
//! their magnitude, which is ample for support bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

const WIDEN: f64 = 4.0 * f64::EPSILON;

fn widen(lo: f64, hi: f64) -> Interval {
    Interval { lo: lo - WIDEN * lo.abs(), hi: hi + WIDEN * hi.abs() }
}

// `div` can fail on intervals containing zero, so the arithmetic stays inherent.
#[allow(clippy::should_implement_trait)]
impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Interval `[c - r, c + r]`.
    pub fn centered(c: f64, r: f64) -> Self {
        Interval::new(c - r, c + r)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        widen(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        widen(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        widen(lo, hi)
    }

    pub fn scale(self, k: f64) -> Interval {
        self.mul(Interval::point(k))
    }

    pub fn recip(self) -> Result<Interval> {
        if self.contains_zero() {
            return Err(Error::UnboundedSupport(format!("reciprocal of [{}, {}] which contains zero", self.lo, self.hi)));
        }
        Ok(widen(1.0 / self.hi, 1.0 / self.lo))
    }

    pub fn div(self, o: Interval) -> Result<Interval> {
        Ok(self.mul(o.recip()?))
    }

    pub fn abs(self) -> Interval {
        Interval { lo: self.mig(), hi: self.mag() }
    }

    pub fn sgn(self) -> Interval {
        Interval { lo: self.lo.signum_or_zero(), hi: self.hi.signum_or_zero() }
    }

    pub fn exp(self) -> Interval {
        widen(self.lo.exp(), self.hi.exp())
    }

    /// `ln |x|`.
    pub fn ln_abs(self) -> Result<Interval> {
        if self.contains_zero() {
            return Err(Error::UnboundedSupport("logarithm of an interval containing zero".into()));
        }
        let a = self.abs();
        Ok(widen(a.lo.ln(), a.hi.ln()))
    }

    pub fn powi(self, n: i32) -> Result<Interval> {
        if n == 0 {
            return Ok(Interval::point(1.0));
        }
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let (a, b) = (self.lo.powi(n), self.hi.powi(n));
        if n % 2 == 1 {
            Ok(widen(a, b))
        } else if self.contains_zero() {
            Ok(widen(0.0, a.max(b)))
        } else {
            Ok(widen(a.min(b), a.max(b)))
        }
    }

    /// `|x|^p` for real `p`.
    pub fn pow_abs(self, p: f64) -> Result<Interval> {
        let a = self.abs();
        if p < 0.0 && a.lo == 0.0 {
            return Err(Error::UnboundedSupport("negative power of an interval touching zero".into()));
        }
        let (x, y) = (a.lo.powf(p), a.hi.powf(p));
        Ok(widen(x.min(y), x.max(y)))
    }

    /// Split into `n` equal pieces.
    pub fn split(&self, n: usize) -> Vec<Interval> {
        let n = n.max(1);
        let h = self.width() / n as f64;
        (0..n)
            .map(|i| {
                let lo = self.lo + h * i as f64;
                let hi = if i + 1 == n { self.hi } else { self.lo + h * (i + 1) as f64 };
                Interval { lo, hi }
            })
            .collect()
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Axis-aligned box, one interval per coordinate.
pub type BoxN = Vec<Interval>;

pub fn box_intersect(a: &[Interval], b: &[Interval]) -> Option<BoxN> {
    a.iter().zip(b).map(|(x, y)| x.intersect(y)).collect()
}

pub fn box_hull(a: &[Interval], b: &[Interval]) -> BoxN {
    a.iter().zip(b).map(|(x, y)| x.hull(y)).collect()
}

pub fn box_contains(b: &[Interval], p: &[f64]) -> bool {
    b.iter().zip(p).all(|(i, &x)| i.contains(x))
}

pub fn box_subset(inner: &[Interval], outer: &[Interval]) -> bool {
    inner.iter().zip(outer).all(|(i, o)| i.is_subset_of(o))
}

/// All boxes of the `n^d` grid subdivision.
pub fn subdivide(bx: &[Interval], n: usize) -> Vec<BoxN> {
    let mut out: Vec<BoxN> = vec![Vec::with_capacity(bx.len())];
    for iv in bx {
        let pieces = iv.split(n);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                pieces.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(*p);
                    v
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_encloses_samples() {
        let x = Interval::new(-1.0, 2.0);
        let y = Interval::new(0.5, 3.0);
        let prod = x.mul(y);
        let quot = x.div(y).unwrap();
        for i in 0..=10 {
            for j in 0..=10 {
                let a = -1.0 + 0.3 * i as f64;
                let b = 0.5 + 0.25 * j as f64;
                assert!(prod.contains(a * b));
                assert!(quot.contains(a / b));
            }
        }
        assert!(y.div(x).is_err());
    }

    #[test]
    fn subdivision_counts() {
        let b = vec![Interval::new(0.0, 1.0), Interval::new(1.0, 2.0)];
        assert_eq!(subdivide(&b, 3).len(), 9);
    }
}
