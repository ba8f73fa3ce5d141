//! Closed intervals with outward rounding.
//!
//! Every arithmetic result is widened by one ulp on each side, which is enough
//! to swallow the round-to-nearest error of a single IEEE operation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(v: f64) -> f64 {
    if v.is_finite() {
        v.next_down()
    } else {
        v
    }
}

fn up(v: f64) -> f64 {
    if v.is_finite() {
        v.next_up()
    } else {
        v
    }
}

// Rounded results are nudged by one ulp unless the operation was exact,
// which keeps enclosures of exactly representable data tight.
fn prod_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if a.mul_add(b, -p) == 0.0 {
        p
    } else {
        down(p)
    }
}

fn prod_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if a.mul_add(b, -p) == 0.0 {
        p
    } else {
        up(p)
    }
}

// exact iff the two-sum error term vanishes
fn sum_exact(a: f64, b: f64, s: f64) -> bool {
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    err == 0.0 && s.is_finite()
}

fn sum_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if sum_exact(a, b, s) {
        s
    } else {
        down(s)
    }
}

fn sum_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if sum_exact(a, b, s) {
        s
    } else {
        up(s)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn hull(&self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval {
            lo: sum_down(self.lo, o.lo),
            hi: sum_up(self.hi, o.hi),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn sub(self, o: Interval) -> Interval {
        self.add(o.neg())
    }

    pub fn mul(self, o: Interval) -> Interval {
        let pairs = [
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(prod_down(a, b));
            hi = hi.max(prod_up(a, b));
        }
        Interval { lo, hi }
    }

    /// Splits at the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.mid();
        (
            Interval { lo: self.lo, hi: m },
            Interval { lo: m, hi: self.hi },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_boxes() {
        let r = Interval::new(-1.0, 1.0).mul(Interval::new(0.0, 2.0));
        assert!(r.lo <= -2.0 && r.hi >= 2.0);
        assert!(r.lo > -2.0001 && r.hi < 2.0001);
    }

    #[test]
    fn identity_is_tight() {
        let r = Interval::new(3.0, 5.0).mul(Interval::point(1.0));
        assert_eq!(r, Interval::new(3.0, 5.0));
    }

    #[test]
    fn outward_rounding_covers_float_sum() {
        let a = Interval::point(0.1);
        let b = Interval::point(0.2);
        let s = a.add(b);
        assert!(s.contains(0.1 + 0.2));
        assert!(s.lo < s.hi);
    }
}
