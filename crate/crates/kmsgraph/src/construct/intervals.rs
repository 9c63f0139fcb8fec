//! Summability-interval machinery.
//!
//! A sequence triple (a, b, c) of positive integers determines the interval
//! J(a,b,c) of those beta for which both
//!     sum_k (b_k / (a_1...a_k)) e^{-k beta}   and
//!     sum_k (c_k / (a_1...a_k)) e^{+k beta}
//! converge. `interval_sequences` realizes any prescribed interval with
//! endpoints r > 0 and R (possibly infinite) in any of the six open/closed
//! shapes, by choosing rational targets q_n ~ s^{-n} (s = e^{-r}) and
//! q'_n ~ S^{-n} (S = e^{R}), damped by n^{-2} on each closed endpoint, and
//! clearing denominators. Membership of a probe beta is then decided by
//! certified partial sums: geometric or zeta tail bounds for convergence,
//! certified term lower bounds for divergence.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

mod inf_f64 {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<f64, E> {
                Ok(x)
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<f64, E> {
                match s {
                    "inf" => Ok(f64::INFINITY),
                    _ => Err(E::custom(format!("unexpected endpoint '{s}'"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

use crate::enclosure::{exp_interval, Enc};
use crate::error::{Error, Result};

/// Outward f64 enclosure of a positive rational.
pub fn rat_enc(q: &BigRational) -> Enc {
    debug_assert!(!q.is_negative());
    let x = q.to_f64().unwrap_or(f64::INFINITY);
    if x.is_infinite() {
        return Enc {
            lo: f64::MAX,
            hi: f64::INFINITY,
        };
    }
    // BigRational::to_f64 is correctly rounded in num-rational >= 0.4, but we
    // widen generously rather than depend on that.
    let mut lo = x;
    let mut hi = x;
    for _ in 0..4 {
        lo = lo.next_down();
        hi = hi.next_up();
    }
    Enc {
        lo: lo.max(0.0),
        hi,
    }
}

/// Outward f64 enclosure of a nonnegative big integer.
pub fn biguint_enc(u: &BigUint) -> Enc {
    let x = u.to_f64().unwrap_or(f64::INFINITY);
    if x.is_infinite() {
        return Enc {
            lo: f64::MAX,
            hi: f64::INFINITY,
        };
    }
    let mut lo = x;
    let mut hi = x;
    for _ in 0..2 {
        lo = lo.next_down();
        hi = hi.next_up();
    }
    Enc {
        lo: lo.max(0.0),
        hi,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub lower: f64,
    /// `f64::INFINITY` for unbounded intervals; serialized as the string
    /// "inf" (JSON has no infinity literal).
    #[serde(with = "inf_f64")]
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl IntervalSpec {
    pub fn new(lower: f64, upper: f64, lower_closed: bool, upper_closed: bool) -> IntervalSpec {
        IntervalSpec {
            lower,
            upper,
            lower_closed,
            upper_closed,
        }
    }

    pub fn is_empty(&self) -> bool {
        if self.lower > self.upper {
            return true;
        }
        self.lower == self.upper && !(self.lower_closed && self.upper_closed)
    }

    pub fn contains(&self, beta: f64) -> bool {
        let above = if self.lower_closed {
            beta >= self.lower
        } else {
            beta > self.lower
        };
        let below = if self.upper_closed {
            beta <= self.upper
        } else {
            beta < self.upper
        };
        above && below
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyInterval);
        }
        if !(self.lower > 0.0) {
            return Err(Error::Precondition("interval lower endpoint must be > 0".into()));
        }
        if self.upper.is_infinite() && self.upper_closed {
            return Err(Error::Precondition("unbounded interval cannot be upper-closed".into()));
        }
        Ok(())
    }
}

impl std::fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lower_closed { "[" } else { "]" },
            self.lower,
            if self.upper.is_infinite() {
                "inf".to_string()
            } else {
                format!("{}", self.upper)
            },
            if self.upper_closed { "]" } else { "[" },
        )
    }
}

/// Which side of the interval a target stream controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Orientation {
    /// The b-series (terms carry e^{-k beta}); controls the lower endpoint.
    Lower,
    /// The c-series (terms carry e^{+k beta}); controls the upper endpoint.
    Upper,
}

/// Certified structural bounds on one target stream: the k-th target lies in
/// `[(1 - 1/k^2) base^k / damp_k, base^k / damp_k]` where `base = e^{-r}`-power
/// style growth is expressed through the endpoint, and `damp_k = k^2` on a
/// closed endpoint. `factorial` streams are `1/k!` (converge for every beta).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideProfile {
    pub orientation: Orientation,
    pub endpoint: f64,
    pub damped: bool,
    pub factorial: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TripleRule {
    /// Only the explicitly materialized prefix exists.
    Finite,
    /// All entries equal 1.
    AllOnes,
    /// Deterministic realization of an interval.
    Interval(IntervalSpec),
}

/// The (a, b, c) streams with their exact rational targets
/// q_n = b_n / (a_1...a_n) and q'_n = c_n / (a_1...a_n).
#[derive(Clone, Debug)]
pub struct SequenceTriple {
    pub rule: TripleRule,
    pub profiles: Option<(SideProfile, SideProfile)>,
    a: Vec<BigUint>,
    b: Vec<BigUint>,
    c: Vec<BigUint>,
    /// Running products P_n = a_1...a_n.
    prod: Vec<BigUint>,
    q: Vec<BigRational>,
    qp: Vec<BigRational>,
}

impl SequenceTriple {
    fn empty(rule: TripleRule) -> SequenceTriple {
        SequenceTriple {
            rule,
            profiles: None,
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            prod: Vec::new(),
            q: Vec::new(),
            qp: Vec::new(),
        }
    }

    pub fn all_ones() -> SequenceTriple {
        SequenceTriple::empty(TripleRule::AllOnes)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Appends one index with the given exact targets.
    fn push_targets(&mut self, q: BigRational, qp: BigRational) {
        assert!(q.is_positive() && qp.is_positive());
        let p_prev = self
            .prod
            .last()
            .cloned()
            .unwrap_or_else(BigUint::one);
        let l = q
            .denom()
            .magnitude()
            .lcm(qp.denom().magnitude());
        let a_n = &l / l.gcd(&p_prev);
        let a_n = if a_n.is_zero() { BigUint::one() } else { a_n };
        let p_n = &p_prev * &a_n;
        let p_int = BigInt::from(p_n.clone());
        let b_n = (&q * &p_int).to_integer();
        let c_n = (&qp * &p_int).to_integer();
        debug_assert_eq!(BigRational::new(b_n.clone(), p_int.clone()), q);
        debug_assert_eq!(BigRational::new(c_n.clone(), p_int), qp);
        assert!(b_n.is_positive() && c_n.is_positive());
        self.a.push(a_n);
        self.b.push(b_n.magnitude().clone());
        self.c.push(c_n.magnitude().clone());
        self.prod.push(p_n);
        self.q.push(q);
        self.qp.push(qp);
    }

    /// Materializes entries through index `n` (1-based).
    pub fn extend_to(&mut self, n: usize) {
        while self.len() < n {
            let k = self.len() + 1;
            match self.rule {
                TripleRule::Finite => panic!("finite triple has no entry {k}"),
                TripleRule::AllOnes => {
                    self.push_targets(
                        BigRational::from_integer(1.into()),
                        BigRational::from_integer(1.into()),
                    );
                }
                TripleRule::Interval(iv) => {
                    let (lower, upper) = self.profiles.expect("interval triple has profiles");
                    let mut q = choose_target(iv.lower * k as f64, k);
                    if lower.damped {
                        q /= BigRational::from_u64((k * k) as u64).unwrap();
                    }
                    let mut qp = if upper.factorial {
                        let mut f = BigUint::one();
                        for i in 2..=k as u64 {
                            f *= i;
                        }
                        BigRational::new(BigInt::one(), BigInt::from(f))
                    } else {
                        choose_target(-iv.upper * k as f64, k)
                    };
                    if upper.damped {
                        qp /= BigRational::from_u64((k * k) as u64).unwrap();
                    }
                    self.push_targets(q, qp);
                }
            }
        }
    }

    /// 1-based accessors; the triple must already be materialized that far
    /// (or be rule-based, in which case it extends itself).
    pub fn a(&mut self, n: usize) -> BigUint {
        self.extend_to(n);
        self.a[n - 1].clone()
    }

    pub fn b(&mut self, n: usize) -> BigUint {
        self.extend_to(n);
        self.b[n - 1].clone()
    }

    pub fn c(&mut self, n: usize) -> BigUint {
        self.extend_to(n);
        self.c[n - 1].clone()
    }

    /// d_i = c_i * a_{i+1} ... a_{2i}.
    pub fn d(&mut self, i: usize) -> BigUint {
        self.extend_to(2 * i);
        let mut d = self.c[i - 1].clone();
        for j in (i + 1)..=(2 * i) {
            d *= &self.a[j - 1];
        }
        d
    }

    /// Exact target q_n = b_n / (a_1...a_n).
    pub fn q(&mut self, n: usize) -> BigRational {
        self.extend_to(n);
        self.q[n - 1].clone()
    }

    /// Exact target q'_n = c_n / (a_1...a_n).
    pub fn qp(&mut self, n: usize) -> BigRational {
        self.extend_to(n);
        self.qp[n - 1].clone()
    }

    /// P_n = a_1...a_n.
    pub fn prod(&mut self, n: usize) -> BigUint {
        self.extend_to(n);
        self.prod[n - 1].clone()
    }
}

/// Largest integer numerator num with num/den <= the true value e^{t}; the
/// result is certified via outward rational/enclosure comparison.
/// Certified rational bounds lo <= e^t <= hi, valid far outside the f64
/// exponent range: t is reduced by a power of two, the fractional part goes
/// through f64 exp with a generous widening for the reduction error, and the
/// power of two is restored exactly.
fn exp_rational_bounds(t: f64) -> (BigRational, BigRational) {
    let ln2 = std::f64::consts::LN_2;
    let m = (t / ln2).round();
    let r = t - m * ln2;
    // |r| <= 0.35 + rounding; the reduction error |t - (m ln2 + r)| is far
    // below this slack even for |m| in the thousands.
    let slack = 1e-9;
    let e = exp_interval(r - slack, r + slack);
    let mi = m as i64;
    let two = BigInt::from(2);
    let pow = if mi >= 0 {
        BigRational::from_integer(two.pow(mi as u32))
    } else {
        BigRational::new(BigInt::one(), two.pow((-mi) as u32))
    };
    let lo = BigRational::from_float(e.lo).unwrap_or_else(BigRational::zero) * &pow;
    let hi = BigRational::from_float(e.hi).expect("finite upper bound") * pow;
    (lo, hi)
}

#[allow(dead_code)]
fn floor_under_exp(t: f64, den: &BigUint) -> BigUint {
    // The floor is taken in exact rational arithmetic against a certified
    // lower bound, so num/den <= e^t holds with no further checking.
    let (lo, _) = exp_rational_bounds(t);
    if !lo.is_positive() {
        return BigUint::zero();
    }
    let fl = (lo * BigRational::from_integer(BigInt::from(den.clone())))
        .floor()
        .to_integer();
    if fl.is_negative() {
        BigUint::zero()
    } else {
        fl.magnitude().clone()
    }
}

/// Deterministic rational q with (1 - 1/k^2) e^{t} <= q <= e^{t}, denominator a
/// power-of-two multiple of 2k^2.
fn choose_target(t: f64, k: usize) -> BigRational {
    let (lo, hi) = exp_rational_bounds(t);
    assert!(lo.is_positive(), "no positive lower bound for e^{t}");
    let floor_of = |den: &BigUint| -> BigUint {
        let fl = (&lo * BigRational::from_integer(BigInt::from(den.clone())))
            .floor()
            .to_integer();
        fl.magnitude().clone()
    };
    let frac = BigRational::new(
        BigInt::from((k * k).max(1) as u64 - 1),
        BigInt::from((k * k).max(1) as u64),
    );
    let need = &frac * &hi;
    let mut den = BigUint::from(2u64 * (k * k) as u64);
    loop {
        let num = floor_of(&den);
        if !num.is_zero() {
            let q = BigRational::new(BigInt::from(num), BigInt::from(den.clone()));
            // q <= lo <= e^t by construction; certify q >= (1 - 1/k^2) e^t
            // through the exact upper bound.
            if k == 1 || q >= need {
                return q;
            }
        }
        den *= 2u32;
        assert!(
            den.bits() < 8000,
            "target selection failed to certify at k={k}, t={t}"
        );
    }
}

/// Clears denominators of two positive rational streams into an integer
/// triple with q_n = b_n/(a_1...a_n), q'_n = c_n/(a_1...a_n) exactly.
pub fn clear_denominators(q: &[BigRational], qp: &[BigRational]) -> SequenceTriple {
    assert_eq!(q.len(), qp.len());
    let mut t = SequenceTriple::empty(TripleRule::Finite);
    for (qn, qpn) in q.iter().zip(qp) {
        t.push_targets(qn.clone(), qpn.clone());
    }
    t
}

/// Deterministic triple whose summability interval equals `iv`.
pub fn interval_sequences(iv: IntervalSpec) -> Result<SequenceTriple> {
    iv.validate()?;
    let mut t = SequenceTriple::empty(TripleRule::Interval(iv));
    t.profiles = Some((
        SideProfile {
            orientation: Orientation::Lower,
            endpoint: iv.lower,
            damped: iv.lower_closed,
            factorial: false,
        },
        SideProfile {
            orientation: Orientation::Upper,
            endpoint: iv.upper,
            damped: iv.upper_closed,
            factorial: iv.upper.is_infinite(),
        },
    ));
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SideReport {
    Converges(Enc),
    /// Terms certified bounded away from zero (or growing) past this index.
    Diverges { from_index: usize },
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Membership {
    Member { b_sum: Enc, c_sum: Enc },
    NotMember { lower: SideReport, upper: SideReport },
    Indeterminate,
}

fn term_exponent(orientation: Orientation, k: usize, beta: f64) -> Enc {
    // e^{-k beta} for the b-series, e^{+k beta} for the c-series.
    let t = match orientation {
        Orientation::Lower => -(k as f64) * beta,
        Orientation::Upper => (k as f64) * beta,
    };
    exp_interval(t.next_down(), t.next_up())
}

fn decide_side(
    triple: &mut SequenceTriple,
    profile: SideProfile,
    beta: f64,
    max_terms: usize,
) -> SideReport {
    let coeff = |t: &mut SequenceTriple, k: usize| match profile.orientation {
        Orientation::Lower => t.q(k),
        Orientation::Upper => t.qp(k),
    };
    if profile.factorial {
        // Terms e^{k beta} / k!; geometric past k >= 2 e^{beta}.
        let n0 = (2.0 * beta.exp()).ceil().max(8.0) as usize;
        if n0 > 4000 {
            return SideReport::Indeterminate;
        }
        let n = n0.max(24);
        let mut partial = Enc::ZERO;
        let mut last = Enc::ZERO;
        for k in 1..=n {
            last = rat_enc(&coeff(triple, k)).mul(&term_exponent(profile.orientation, k, beta));
            partial = partial.add(&last);
        }
        let tail = last.scale(1.0); // ratio <= 1/2 past n: tail <= last term
        return SideReport::Converges(partial.add(&tail));
    }
    // rho encloses e^{r - beta} (lower) or e^{beta - R} (upper): the certified
    // per-term growth base relative to the endpoint.
    let d = match profile.orientation {
        Orientation::Lower => profile.endpoint - beta,
        Orientation::Upper => beta - profile.endpoint,
    };
    let rho = if d == 0.0 {
        Enc::ONE
    } else {
        exp_interval(d.next_down(), d.next_up())
    };
    if rho.hi < 1.0 {
        // Geometric convergence: terms <= rho^k (damping only helps).
        let need = ((1e-14f64).ln() / rho.hi.ln()).ceil();
        let cap = max_terms.clamp(40, 600);
        let n = (need as usize).clamp(40, cap);
        let mut partial = Enc::ZERO;
        for k in 1..=n {
            let u = rat_enc(&coeff(triple, k)).mul(&term_exponent(profile.orientation, k, beta));
            partial = partial.add(&u);
        }
        let tail = rho.geometric_tail(n as u32).expect("rho < 1");
        return SideReport::Converges(partial.add(&Enc::new(0.0, tail.hi)));
    }
    if profile.damped && rho.hi <= 1.0 {
        // Exactly at the closed endpoint: terms <= 1/k^2, zeta tail <= 1/N.
        let n = max_terms.clamp(64, 400);
        let mut partial = Enc::ZERO;
        for k in 1..=n {
            let u = rat_enc(&coeff(triple, k)).mul(&term_exponent(profile.orientation, k, beta));
            partial = partial.add(&u);
        }
        return SideReport::Converges(partial.add(&Enc::new(0.0, 1.0 / n as f64)));
    }
    if !profile.damped && rho.lo >= 1.0 {
        // Terms >= (1 - 1/k^2) rho^k >= 3/4 for k >= 2: divergence.
        return SideReport::Diverges { from_index: 2 };
    }
    if profile.damped && rho.lo > 1.0 {
        // Terms >= (1 - 1/k^2) rho^k / k^2 -> infinity; certified once
        // rho.lo^k / k^2 is increasing and >= 1.
        let mut k = 2usize;
        loop {
            let grow = rho.lo.powi(k as i32) / ((k * k) as f64);
            let ratio = rho.lo * ((k as f64) / (k as f64 + 1.0)).powi(2);
            if grow >= 2.0 && ratio > 1.0 {
                return SideReport::Diverges { from_index: k };
            }
            k += 1;
            if k > 1_000_000 {
                return SideReport::Indeterminate;
            }
        }
    }
    SideReport::Indeterminate
}

/// Decides beta ∈ J(a,b,c) by certified sums. Requires an interval-rule triple
/// (its structural bounds are established at construction time).
pub fn j_membership(triple: &mut SequenceTriple, beta: f64, max_terms: usize) -> Result<Membership> {
    let (lower, upper) = triple
        .profiles
        .ok_or_else(|| Error::Precondition("triple has no side profiles".into()))?;
    let lo_report = decide_side(triple, lower, beta, max_terms);
    let up_report = decide_side(triple, upper, beta, max_terms);
    Ok(match (&lo_report, &up_report) {
        (SideReport::Converges(b), SideReport::Converges(c)) => Membership::Member {
            b_sum: *b,
            c_sum: *c,
        },
        (SideReport::Indeterminate, _) | (_, SideReport::Indeterminate) => Membership::Indeterminate,
        _ => Membership::NotMember {
            lower: lo_report,
            upper: up_report,
        },
    })
}
