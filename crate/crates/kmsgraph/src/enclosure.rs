//! Outward-rounded enclosures of non-negative extended reals.
//!
//! Every series value in this crate is an `Enc`: an interval `[lo, hi]` with
//! `0 <= lo <= hi <= +inf` guaranteed to contain the true value. All arithmetic
//! widens outward after each operation, so enclosures stay sound under f64
//! rounding. Multiplication uses the convention `0 * inf = 0`, which matrix
//! powers over `[0, inf]` require and which stock interval libraries do not
//! provide.

use serde::{Deserialize, Serialize};

/// Number of ulps by which transcendental results (exp, ln, powf) are widened.
/// libm implementations are not correctly rounded but are well within 2 ulps.
const TRANS_ULPS: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enc {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        x
    } else {
        x.next_down().max(0.0)
    }
}

fn up(x: f64) -> f64 {
    // A computed upper bound of exactly 0 only arises from exact zeros, so it
    // needs no widening (and 0 * inf = 0 depends on keeping it exact).
    if x.is_infinite() || x == 0.0 {
        x
    } else {
        x.next_up()
    }
}

fn down_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = down(x);
    }
    x
}

fn up_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = up(x);
    }
    x
}

impl Enc {
    pub const ZERO: Enc = Enc { lo: 0.0, hi: 0.0 };
    pub const ONE: Enc = Enc { lo: 1.0, hi: 1.0 };
    /// The completely uninformative enclosure `[0, inf]`.
    pub const UNKNOWN: Enc = Enc {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Enc {
        assert!(lo >= 0.0 && lo <= hi, "invalid enclosure [{lo}, {hi}]");
        Enc { lo, hi }
    }

    /// Point enclosure of an exactly representable value.
    pub fn exact(x: f64) -> Enc {
        assert!(x >= 0.0 && !x.is_nan());
        Enc { lo: x, hi: x }
    }

    /// Enclosure of a value known only up to f64 rounding (1 ulp each way).
    pub fn around(x: f64) -> Enc {
        assert!(x >= 0.0 && !x.is_nan());
        Enc {
            lo: down(x),
            hi: up(x),
        }
    }

    pub fn infinite() -> Enc {
        Enc {
            lo: f64::INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.hi.is_infinite() {
            self.lo
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersects(&self, other: &Enc) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Smallest enclosure containing both.
    pub fn hull(&self, other: &Enc) -> Enc {
        Enc {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(&self, other: &Enc) -> Enc {
        Enc {
            lo: down(self.lo + other.lo),
            hi: up(self.hi + other.hi),
        }
    }

    /// Honors 0 * inf = 0: a structurally absent term (exact zero) kills an
    /// infinite factor.
    pub fn mul(&self, other: &Enc) -> Enc {
        fn m(a: f64, b: f64) -> f64 {
            if a == 0.0 || b == 0.0 {
                0.0
            } else {
                a * b
            }
        }
        Enc {
            lo: down(m(self.lo, other.lo)),
            hi: up(m(self.hi, other.hi)),
        }
    }

    /// Division; `other` must be bounded away from zero for a finite hi.
    pub fn div(&self, other: &Enc) -> Enc {
        let lo = if other.hi == 0.0 {
            f64::INFINITY
        } else if self.lo == 0.0 {
            0.0
        } else {
            down(self.lo / other.hi)
        };
        let hi = if other.lo == 0.0 {
            if self.hi == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else if self.hi == 0.0 {
            0.0
        } else {
            up(self.hi / other.lo)
        };
        Enc { lo, hi }
    }

    pub fn scale(&self, k: f64) -> Enc {
        self.mul(&Enc::exact(k))
    }

    pub fn pow(&self, n: u32) -> Enc {
        let mut acc = Enc::ONE;
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// `1 / (1 - self)` when `self.hi < 1`; geometric series total.
    pub fn geometric_total(&self) -> Option<Enc> {
        if self.hi >= 1.0 {
            return None;
        }
        let one = Enc::ONE;
        let denom = Enc {
            lo: down(1.0 - self.hi),
            hi: up(1.0 - self.lo),
        };
        Some(one.div(&denom))
    }

    /// Geometric tail `self^(n+1) / (1 - self)` when `self.hi < 1`.
    pub fn geometric_tail(&self, n: u32) -> Option<Enc> {
        let total = self.geometric_total()?;
        Some(self.pow(n + 1).mul(&total))
    }
}

/// Enclosure of `a - b` clamped to the nonnegative axis (for quantities known
/// to be nonnegative, e.g. remainders of series against their exact totals).
pub fn sub_clamped(a: &Enc, b: &Enc) -> Enc {
    let lo = (a.lo - b.hi).max(0.0);
    let hi = (a.hi - b.lo).max(lo);
    Enc {
        lo: down(lo),
        hi: up(hi),
    }
}

/// Enclosure of `exp(x)` for arbitrary real `x` (result is nonnegative).
pub fn exp_enc(x: f64) -> Enc {
    if x == 0.0 {
        return Enc::ONE;
    }
    let y = x.exp();
    Enc {
        lo: down_n(y, TRANS_ULPS),
        hi: up_n(y, TRANS_ULPS),
    }
}

/// Enclosure of `exp(i)` for an interval `[xlo, xhi]` of real arguments.
pub fn exp_interval(xlo: f64, xhi: f64) -> Enc {
    debug_assert!(xlo <= xhi);
    Enc {
        lo: down_n(xlo.exp(), TRANS_ULPS),
        hi: up_n(xhi.exp(), TRANS_ULPS),
    }
}

/// Enclosure of `exp(-beta * f)` where both arguments are exact f64 inputs.
/// The product is widened one ulp before exponentiating.
pub fn edge_weight(beta: f64, f: f64) -> Enc {
    let p = -beta * f;
    if p == 0.0 {
        return Enc::ONE;
    }
    exp_interval(p.next_down(), p.next_up())
}

/// Enclosure of `x^p` for `x > 0` exact, real exponent `p`.
pub fn powf_enc(x: f64, p: f64) -> Enc {
    assert!(x > 0.0);
    let y = x.powf(p);
    Enc {
        lo: down_n(y, TRANS_ULPS),
        hi: up_n(y, TRANS_ULPS),
    }
}

/// Enclosure of `ln(x)` for `x >= 1` (nonnegative result).
pub fn ln_enc(x: f64) -> Enc {
    assert!(x >= 1.0);
    let y = x.ln();
    Enc {
        lo: down_n(y, TRANS_ULPS),
        hi: up_n(y, TRANS_ULPS),
    }
}

/// Sum of a slice of enclosures.
pub fn sum_enc(terms: &[Enc]) -> Enc {
    let mut acc = Enc::ZERO;
    for t in terms {
        acc = acc.add(t);
    }
    acc
}

/// Budget for series evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeriesBudget {
    pub max_terms: usize,
    pub target_width: f64,
    pub tail_policy: TailPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailPolicy {
    /// Use tail bounds declared by weight families / recipes.
    DeclaredBound,
    /// Assume a verified geometric ratio `r < 1` past the evaluated prefix.
    GeometricRatio(f64),
    /// No tail certification: results are lower bounds (hi = inf).
    None,
}

impl Default for SeriesBudget {
    fn default() -> Self {
        SeriesBudget {
            max_terms: 4096,
            target_width: 1e-9,
            tail_policy: TailPolicy::DeclaredBound,
        }
    }
}

impl SeriesBudget {
    pub fn with_max_terms(mut self, n: usize) -> Self {
        self.max_terms = n;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_contains() {
        let e = Enc::exact(0.5);
        assert!(e.contains(0.5));
        assert_eq!(e.width(), 0.0);
    }

    #[test]
    fn outward_add() {
        let a = Enc::around(0.1);
        let b = Enc::around(0.2);
        let s = a.add(&b);
        assert!(s.lo < 0.1 + 0.2 && s.hi > 0.1f64 + 0.2 - 1e-15);
        assert!(s.contains(0.30000000000000004));
    }

    #[test]
    fn zero_times_infinity() {
        let z = Enc::ZERO;
        let inf = Enc::infinite();
        assert_eq!(z.mul(&inf), Enc::ZERO);
        assert_eq!(inf.mul(&z), Enc::ZERO);
    }

    #[test]
    fn exp_contains_true_value() {
        let e = exp_enc(-1.0);
        assert!(e.contains(0.36787944117144233));
        assert!(e.width() < 1e-15);
    }

    #[test]
    fn edge_weight_log2() {
        // 2 * exp(-ln 2) must enclose a value within a few ulps of 1.
        let w = edge_weight(std::f64::consts::LN_2, 1.0).scale(2.0);
        assert!(w.lo < 1.0 + 1e-15 && w.hi > 1.0 - 1e-15);
        assert!(w.width() < 1e-14);
    }

    #[test]
    fn geometric() {
        let r = Enc::exact(0.5);
        let total = r.geometric_total().unwrap();
        assert!(total.contains(2.0));
        let tail = r.geometric_tail(3).unwrap();
        assert!(tail.contains(0.0625 * 2.0));
    }

    #[test]
    fn division_by_zero_interval() {
        let one = Enc::ONE;
        let z = Enc::ZERO;
        assert!(one.div(&z).hi.is_infinite());
    }
}
