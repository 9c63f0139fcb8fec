//! Greedy completion of a power series to total exactly 1.
//!
//! Given D in ]0,1[ and a stream (a_n) with certified sum(a_n D^n) < 1 - D,
//! places correction masses c_{n_m} = k_m at a sparse set of indices so that
//! the completed stream b_1 = 1, b_n = a_n + c_n satisfies
//! sum(b_n D^n) = 1, with b_n^{1/n} having limsup D^{-1} and b_n - a_n >= 2
//! infinitely often. The slack s = 1 - D - sum(a_n D^n) is consumed along the
//! schedule s_m = s (1 - 2^{-m}); the m-th placement index n_m is the least
//! admissible one with 3 D^{n_m} below 1/m of the remaining gap, and k_m the
//! least count overshooting the scheduled mass.

use num_bigint::BigUint;
use num_traits::{FromPrimitive, One, Zero};

use crate::enclosure::Enc;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Placement {
    pub m: u32,
    pub r_m: u64,
    pub n_m: u64,
    pub k_m: BigUint,
    /// Enclosure of s_m - sum_{i<=m} k_i D^{n_i} (the remaining gap).
    pub gap: Enc,
}

#[derive(Clone, Debug)]
pub struct GreedyCompletion {
    pub d: Enc,
    /// s = 1 - D - sum(a_n D^n).
    pub s: Enc,
    placements: Vec<Placement>,
    /// sum_{i <= m} k_i D^{n_i} so far.
    sigma: Enc,
}

fn sub_clamped(a: &Enc, b: &Enc) -> Enc {
    let lo = (a.lo - b.hi).max(0.0);
    let hi = (a.hi - b.lo).max(lo);
    Enc::new(lo.next_down().max(0.0), hi.next_up())
}

impl GreedyCompletion {
    /// `sa` must enclose sum_{n>=2} a_n D^n; errors unless sa.hi + d.hi < 1
    /// can be certified.
    pub fn start(d: Enc, sa: Enc) -> Result<GreedyCompletion> {
        if !(d.lo > 0.0 && d.hi < 1.0) {
            return Err(Error::Precondition("D must lie strictly in ]0,1[".into()));
        }
        if !(sa.hi + d.hi < 1.0) {
            if std::env::var("KMS_DBG").is_ok() { panic!("SE here"); } return Err(Error::SlackExhausted);
        }
        let s = sub_clamped(&Enc::ONE, &d.add(&sa));
        if s.lo <= 0.0 {
            if std::env::var("KMS_DBG").is_ok() { panic!("SE here"); } return Err(Error::SlackExhausted);
        }
        Ok(GreedyCompletion {
            d,
            s,
            placements: Vec::new(),
            sigma: Enc::ZERO,
        })
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    /// s_m = s (1 - 2^{-m}).
    pub fn s_m(&self, m: u32) -> Enc {
        self.s.scale(1.0 - 0.5f64.powi(m as i32))
    }

    fn d_pow(&self, n: u64) -> Enc {
        self.d.pow(n as u32)
    }

    /// Computes the next placement (m = current count + 1).
    ///
    /// The remaining gap is tracked by its own recurrence
    /// `gap_m = gap_{m-1}/m - (mass_m - target_m)` rather than as
    /// `s_m - sigma`: the latter cancels two O(1) quantities and loses the
    /// gap (which shrinks superexponentially) to f64 noise within ~17
    /// placements. Errors with `SlackExhausted` once D^{n_m} leaves the f64
    /// range, which bounds how deep the completion can be materialized.
    pub fn place_next(&mut self) -> Result<&Placement> {
        let m = self.placements.len() as u32 + 1;
        let step = self.s.scale(0.5f64.powi(m as i32)); // s_m - s_{m-1}, exact form
        // r_m forces placement indices sparse enough that (s_m - s_{m-1})^{1/r_m} -> 1.
        let r_m = ((-(m as f64) * step.mid().ln()).ceil().max(1.0)) as u64;
        let gap_prev = if m == 1 {
            // Bootstrap: the gap constraint for m = 1 is against s_1 itself.
            self.s_m(1)
        } else {
            self.placements.last().unwrap().gap
        };
        if gap_prev.lo <= 0.0 {
            if std::env::var("KMS_DBG").is_ok() { panic!("SE here"); } return Err(Error::SlackExhausted);
        }
        let floor_n = match self.placements.last() {
            Some(p) => p.n_m,
            None => 1,
        };
        let mut n_m = r_m.max(floor_n + 1).max(2);
        loop {
            let dn = self.d_pow(n_m);
            if dn.hi == 0.0 || n_m >= 100_000 {
                if std::env::var("KMS_DBG").is_ok() { panic!("SE here"); } return Err(Error::SlackExhausted);
            }
            if 3.0 * dn.hi <= gap_prev.lo / m as f64 {
                break;
            }
            n_m += 1;
        }
        let dn = self.d_pow(n_m);
        if dn.lo <= 0.0 {
            if std::env::var("KMS_DBG").is_ok() { panic!("SE here"); } return Err(Error::SlackExhausted);
        }
        // Least k with k D^{n_m} exceeding the scheduled mass for this stage.
        let target = if m == 1 {
            sub_clamped(&gap_prev, &dn.scale(3.0))
        } else {
            step.add(&gap_prev.scale((m as f64 - 1.0) / m as f64))
        };
        let k_m = if target.hi <= 0.0 {
            BigUint::one()
        } else {
            let k = (target.hi / dn.lo).floor();
            BigUint::from_f64(k).unwrap_or_else(BigUint::zero) + BigUint::one()
        };
        let mass = dn.mul(&super::intervals::biguint_enc(&k_m));
        self.sigma = self.sigma.add(&mass);
        let excess = sub_clamped(&mass, &target);
        let gap = if m == 1 {
            // gap_1 = s_1 - mass = 3 D^{n_1} - excess.
            sub_clamped(&dn.scale(3.0), &excess)
        } else {
            // gap_m = gap_{m-1} + step - mass = gap_{m-1}/m - excess.
            sub_clamped(&gap_prev.scale(1.0 / m as f64), &excess)
        };
        self.placements.push(Placement {
            m,
            r_m,
            n_m,
            k_m,
            gap,
        });
        Ok(self.placements.last().unwrap())
    }

    /// Materializes placements until the next placement index would exceed `n`.
    pub fn place_through(&mut self, n: u64) -> Result<()> {
        loop {
            let last = self.placements.last().map(|p| p.n_m).unwrap_or(0);
            if last > n {
                return Ok(());
            }
            self.place_next()?;
        }
    }

    /// The correction c_n (zero except at placement indices).
    pub fn correction(&mut self, n: u64) -> Result<BigUint> {
        if n < 2 {
            return Ok(BigUint::zero());
        }
        self.place_through(n)?;
        for p in &self.placements {
            if p.n_m == n {
                return Ok(p.k_m.clone());
            }
        }
        Ok(BigUint::zero())
    }
}

/// Convenience wrapper matching the operation signature: runs `m_placements`
/// placements and returns the completion state.
pub fn greedy_completion(d: Enc, sa: Enc, m_placements: u32) -> Result<GreedyCompletion> {
    let mut g = GreedyCompletion::start(d, sa)?;
    for _ in 0..m_placements {
        g.place_next()?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn precondition_violated() {
        let d = Enc::exact(0.5);
        // sum a_n D^n = 1/2 = 1 - D: no slack.
        assert!(matches!(
            GreedyCompletion::start(d, Enc::exact(0.5)),
            Err(Error::SlackExhausted)
        ));
    }

    #[test]
    fn empty_a_stream_half() {
        let d = Enc::exact(0.5);
        let mut g = GreedyCompletion::start(d, Enc::ZERO).unwrap();
        for _ in 0..12 {
            g.place_next().unwrap();
        }
        // Gap after m placements obeys 0 < gap <= s/m.
        for p in g.placements() {
            assert!(p.gap.hi > 0.0, "gap must stay positive (m={})", p.m);
            assert!(
                p.gap.lo <= g.s.hi / p.m as f64 + 1e-12,
                "gap too large at m={}: {:?}",
                p.m,
                p.gap
            );
        }
        // Placement masses witness the growth rate: k_m D^{n_m} >= s_m - s_{m-1}
        // (the bootstrap placement targets s_1 minus its own gap reserve
        // instead, so start at m = 2).
        for p in g.placements().iter().skip(1) {
            let mass = g.d.pow(p.n_m as u32).scale(p.k_m.to_f64().unwrap());
            let step = g.s.scale(0.5f64.powi(p.m as i32));
            assert!(mass.hi >= step.lo, "mass under scheduled step at m={}", p.m);
        }
        // Indices strictly increase.
        let ns: Vec<u64> = g.placements().iter().map(|p| p.n_m).collect();
        assert!(ns.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn partial_sums_approach_one() {
        let d = Enc::exact(0.5);
        let mut g = GreedyCompletion::start(d, Enc::ZERO).unwrap();
        for _ in 0..12 {
            g.place_next().unwrap();
        }
        // b_1 = 1 contributes D; corrections contribute sigma; total -> 1 - s + sigma -> 1.
        let total = g.d.add(&g.sigma);
        let m = g.placements().len() as f64;
        assert!(total.hi <= 1.0 + 1e-12);
        assert!(1.0 - total.lo <= g.s.hi / m + g.s.hi * 0.5f64.powi(12) + 1e-9);
    }
}
