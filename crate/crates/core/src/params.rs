//! Feasibility logic: the five executability conditions, the heavy-line
//! counting bound, and the two asymptotic parameter regimes. All arithmetic
//! is integer-exact; boundary cases must not wobble.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{sigma, Space};
use crate::protocol::prime_power;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("regime parameters are infeasible at a = {a}")]
    RegimeInfeasibleAtThisA { a: u64 },
    #[error("{0} is not a valid regime (expected d3 or d4)")]
    BadRegime(String),
}

/// Evaluation of the five executability conditions for (a, c, d, k).
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub a: u64,
    pub b: i64,
    pub c: u64,
    pub d: u32,
    pub k: u64,
    /// a is a prime power
    pub cond1: bool,
    /// b = a^d - a - c >= 0
    pub cond2: bool,
    /// 1 <= k < a
    pub cond3: bool,
    /// every (a+c)-set meets at most k lines in >= a-k points
    pub cond4: bool,
    /// sigma_d(a) >= k(c+3): enough directions to colour
    pub cond5: bool,
    /// which test established cond4
    pub via: &'static str,
    /// the weaker c < ak - (3/2)k(k+1) form, reported informationally
    pub simplified_bound: bool,
    pub feasible: bool,
}

/// True iff a set of `size_e` points meets at most `k` lines in >= q-k
/// points, by the counting bound: size_e < (k+1)(q-k) - k(k+1)/2.
/// Sufficient, not necessary.
pub fn bound_heavy_lines(q: u64, k: u64, size_e: u64) -> bool {
    assert!(k < q, "need 0 <= k < q");
    let q = q as i128;
    let k = k as i128;
    let bound = (k + 1) * (q - k) - k * (k + 1) / 2;
    (size_e as i128) < bound
}

pub fn feasible(a: u64, c: u64, d: u32, k: u64) -> FeasibilityReport {
    let b128 = (a as i128).pow(d) - a as i128 - c as i128;
    let cond1 = prime_power(a).is_some();
    let cond2 = b128 >= 0;
    let cond3 = k >= 1 && k < a;
    let cond4 = cond3 && bound_heavy_lines(a, k, a + c);
    let cond5 = k >= 1 && sigma(d, a) as u128 >= k as u128 * (c as u128 + 3);
    let simplified_bound =
        cond3 && (c as i128) < (a as i128) * (k as i128) - 3 * (k as i128) * (k as i128 + 1) / 2;
    FeasibilityReport {
        a,
        b: b128.clamp(i64::MIN as i128, i64::MAX as i128) as i64,
        c,
        d,
        k,
        cond1,
        cond2,
        cond3,
        cond4,
        cond5,
        via: "counting-bound",
        simplified_bound,
        feasible: cond1 && cond2 && cond3 && cond4 && cond5,
    }
}

/// Exact form of the fourth condition, by minimum-cover search: over every
/// set of k+1 distinct lines, the smallest point set making all of them
/// (q-k)-heavy; the condition holds iff that minimum exceeds `size_e` for
/// every choice. Shared points are exactly pairwise intersections, so the
/// search branches on which intersections to use and fills the rest of each
/// quota from private points. Returns None when the search exceeds `budget`
/// line subsets.
pub fn exact_heavy_bound(space: &Space, k: u64, size_e: u64, budget: u64) -> Option<bool> {
    use itertools::Itertools;
    let q = space.q();
    if k >= q {
        return Some(false);
    }
    let quota = (q - k) as usize;
    let lines = space.all_lines();
    let subsets = binom(lines.len() as u64, k + 1)?;
    if subsets > budget {
        return None;
    }
    for combo in (0..lines.len()).combinations(k as usize + 1) {
        // distinct pairwise intersection points of the chosen lines
        let mut shared: Vec<u64> = Vec::new();
        for i in 0..combo.len() {
            for j in i + 1..combo.len() {
                for &p in &lines[combo[i]].points {
                    if lines[combo[j]].contains(p) && !shared.contains(&p) {
                        shared.push(p);
                    }
                }
            }
        }
        let mut best = usize::MAX;
        for mask in 0u32..(1 << shared.len()) {
            let chosen: Vec<u64> = shared
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            let mut size = chosen.len();
            for &li in &combo {
                let hit = chosen.iter().filter(|&&p| lines[li].contains(p)).count();
                size += quota.saturating_sub(hit);
            }
            best = best.min(size);
        }
        if best as u64 <= size_e {
            return Some(false);
        }
    }
    Some(true)
}

fn binom(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Smallest k >= 1 making (a, c, d, k) feasible.
pub fn search_k(a: u64, c: u64, d: u32) -> Option<u64> {
    (1..a).find(|&k| feasible(a, c, d, k).feasible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    D3,
    D4,
}

impl std::str::FromStr for Regime {
    type Err = ParamsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "d3" => Ok(Regime::D3),
            "d4" => Ok(Regime::D4),
            other => Err(ParamsError::BadRegime(other.into())),
        }
    }
}

fn round_sqrt(a: u64) -> u64 {
    let s = a.isqrt();
    if a > s * (s + 1) {
        s + 1
    } else {
        s
    }
}

/// Parameters in the two regimes where c grows superlinearly in a:
/// d=3 with k near sqrt(a) and c near a^(3/2)/2, or d=4 with k near a/2
/// and c near a^2/9. Errors when the regime is not yet feasible at this a.
pub fn suggest_params(a: u64, regime: Regime) -> Result<(u64, u64, u64, FeasibilityReport), ParamsError> {
    let (d, k, c) = match regime {
        Regime::D3 => (3, round_sqrt(a), (a * a * a).isqrt() / 2),
        Regime::D4 => (4, a.div_ceil(2), a * a / 9),
    };
    let report = feasible(a, c, d, k);
    if !report.feasible {
        return Err(ParamsError::RegimeInfeasibleAtThisA { a });
    }
    let b = report.b as u64;
    Ok((k, c, b, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub a: u64,
    pub d: u32,
    pub k: u64,
    pub c_max: u64,
    pub b: u64,
}

/// Feasibility atlas: for each prime power a <= max_a, dimension, and k,
/// the largest feasible c (feasibility is monotone decreasing in c, so the
/// maximum is the minimum of the per-condition caps).
pub fn sweep(max_a: u64) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for a in 2..=max_a {
        if prime_power(a).is_none() {
            continue;
        }
        for d in 2..=4u32 {
            for k in 1..a {
                // cond4: a + c < (k+1)(a-k) - k(k+1)/2
                let bound = (k as i128 + 1) * (a as i128 - k as i128)
                    - (k as i128) * (k as i128 + 1) / 2;
                let cap4 = bound - a as i128 - 1;
                // cond5: c <= sigma_d(a)/k - 3
                let cap5 = (sigma(d, a) / k) as i128 - 3;
                // cond2: c <= a^d - a
                let cap2 = (a as i128).pow(d) - a as i128;
                let c_max = cap4.min(cap5).min(cap2);
                if c_max < 0 {
                    continue;
                }
                let report = feasible(a, c_max as u64, d, k);
                debug_assert!(report.feasible);
                rows.push(SweepRow {
                    a,
                    d,
                    k,
                    c_max: c_max as u64,
                    b: report.b as u64,
                });
            }
        }
    }
    rows
}
