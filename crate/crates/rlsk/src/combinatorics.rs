//! Exact hypergeometric transition mathematics and the greedy-optimal
//! policies derived from it.
//!
//! Probabilities are assembled structurally: a term enters `p_improve` only
//! when the corresponding flip outcome improves fitness, so impossible moves
//! yield an exact zero in every scalar type (no cancellation involved).

use crate::error::{Error, Result};
use crate::num::{big_to_f64, DriftScalar};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

/// Binomial coefficient, exact. `k > n` gives 0.
pub fn choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for j in 0..k {
        acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    acc
}

thread_local! {
    static CHOOSE_ROWS: RefCell<HashMap<u64, Rc<Vec<f64>>>> = RefCell::new(HashMap::new());
}

/// Binomial coefficient in f64, 0 outside the triangle. Rows are cached per n;
/// values are exact integers as long as they fit the 53-bit mantissa.
pub fn choose_f64(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let (n, k) = (n as u64, k as usize);
    CHOOSE_ROWS.with(|cell| {
        let mut map = cell.borrow_mut();
        let row = map.entry(n).or_insert_with(|| {
            let mut row = Vec::with_capacity(n as usize + 1);
            let mut acc = 1.0f64;
            row.push(acc);
            for j in 0..n {
                acc = acc * (n - j) as f64 / (j + 1) as f64;
                row.push(acc);
            }
            Rc::new(row)
        });
        row[k]
    })
}

/// log C(n, k); display-range fallback for coefficients beyond f64.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0f64;
    for j in 0..k {
        acc += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
    }
    acc
}

/// One-step transition profile at a fitness level: improvement probability and
/// expected accepted gain per step.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftProfile<S> {
    pub p_improve: S,
    pub expected_drift: S,
}

impl<S: DriftScalar> DriftProfile<S> {
    fn zero() -> Self {
        Self {
            p_improve: S::zero(),
            expected_drift: S::zero(),
        }
    }
}

/// Landscapes with an analytic transition model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftModel {
    LeadingOnes,
    OneMax,
    Jump { gap: usize },
}

/// P(a uniform k-flip on an n-bit string with `zeros` zero-bits hits exactly
/// j of the zeros).
pub fn hyper_pmf<S: DriftScalar>(zeros: usize, n: usize, k: usize, j: usize) -> Result<S> {
    if zeros > n || k < 1 || k > n || j > k {
        return Err(Error::Param(format!(
            "hyper_pmf out of range: zeros={zeros} n={n} k={k} j={j}"
        )));
    }
    Ok(hyper_pmf_total(zeros, n, k, j))
}

/// Total pmf used internally: support violations give an exact zero.
fn hyper_pmf_total<S: DriftScalar>(zeros: usize, n: usize, k: usize, j: usize) -> S {
    if j > zeros || k - j > n - zeros {
        return S::zero();
    }
    let num = choose(zeros as u64, j as u64) * choose((n - zeros) as u64, (k - j) as u64);
    let den = choose(n as u64, k as u64);
    S::from_big_ratio(&num, &den)
}

/// Exact drift profile for a k-flip at the given fitness level.
///
/// Levels: LeadingOnes/OneMax use the level directly (prefix length / count of
/// ones); Jump uses the fitness value, valid in the normal region and at the
/// valley edge (`gap ..= n`).
pub fn analytic_drift<S: DriftScalar>(
    model: DriftModel,
    n: usize,
    level: usize,
    k: usize,
) -> Result<DriftProfile<S>> {
    if k < 1 || k > n {
        return Err(Error::Param(format!("k={k} out of range 1..={n}")));
    }
    match model {
        DriftModel::LeadingOnes => {
            if level >= n {
                return Err(Error::Param(format!(
                    "LeadingOnes level {level} out of range 0..{n}"
                )));
            }
            // Improve iff the flip set contains the leftmost zero and none of
            // the `level` leading ones.
            let num = choose((n - level - 1) as u64, (k - 1) as u64);
            let den = choose(n as u64, k as u64);
            let p = S::from_big_ratio(&num, &den);
            // Free riders: each tail bit past the flipped zero is uniform, so
            // the expected gain is 2 - 2^-(n-level-1) regardless of k.
            let tail = (n - level - 1) as u64;
            let gain = S::from_usize(2)
                - S::from_big_ratio(&BigUint::one(), &(BigUint::one() << tail));
            Ok(DriftProfile {
                expected_drift: p.clone() * gain,
                p_improve: p,
            })
        }
        DriftModel::OneMax => {
            if level > n {
                return Err(Error::Param(format!(
                    "OneMax level {level} out of range 0..={n}"
                )));
            }
            let zeros = n - level;
            let mut profile = DriftProfile::zero();
            for j in 0..=k {
                let delta = 2 * j as i64 - k as i64;
                if delta <= 0 {
                    continue;
                }
                let pmf: S = hyper_pmf_total(zeros, n, k, j);
                profile.expected_drift =
                    profile.expected_drift + pmf.clone() * S::from_usize(delta as usize);
                profile.p_improve = profile.p_improve + pmf;
            }
            Ok(profile)
        }
        DriftModel::Jump { gap } => {
            if gap < 1 || gap >= n {
                return Err(Error::Param(format!("jump gap {gap} out of range 1..{n}")));
            }
            if level < gap || level > n {
                return Err(Error::Param(format!(
                    "Jump level {level} outside normal region {gap}..={n}"
                )));
            }
            let ones = level - gap;
            let zeros = n - ones;
            let mut profile = DriftProfile::zero();
            for j in 0..=k {
                let next_ones = ones as i64 + 2 * j as i64 - k as i64;
                if next_ones < 0 {
                    continue;
                }
                let next_ones = next_ones as usize;
                let gain = if next_ones == n {
                    // Offspring is the optimum: gain (n+gap) - (gap+ones).
                    n - ones
                } else if next_ones > n - gap {
                    continue; // valley offspring are rejected
                } else if next_ones > ones {
                    next_ones - ones
                } else {
                    continue; // neutral or worsening
                };
                let pmf: S = hyper_pmf_total(zeros, n, k, j);
                profile.expected_drift =
                    profile.expected_drift + pmf.clone() * S::from_usize(gain);
                profile.p_improve = profile.p_improve + pmf;
            }
            Ok(profile)
        }
    }
}

/// Index of the maximum, ties resolved toward the smaller index.
pub fn argmax_smallest<S: PartialOrd>(values: &[S]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy-optimal mutation strength at a fitness level.
///
/// LeadingOnes uses the closed form floor(n / (level+1)); OneMax and Jump take
/// the argmax of the exact drift over k in 1..=n, ties toward smaller k.
pub fn optimal_k(model: DriftModel, n: usize, level: usize) -> Result<usize> {
    match model {
        DriftModel::LeadingOnes => {
            if level >= n {
                return Err(Error::Param(format!(
                    "LeadingOnes level {level} out of range 0..{n}"
                )));
            }
            Ok(n / (level + 1))
        }
        _ => {
            let drifts: Vec<f64> = (1..=n)
                .map(|k| analytic_drift::<f64>(model, n, level, k).map(|d| d.expected_drift))
                .collect::<Result<_>>()?;
            Ok(argmax_smallest(&drifts) + 1)
        }
    }
}

/// Expected waiting time for the Jump valley crossing: C(n, gap) steps.
pub fn expected_crossing_time(n: usize, gap: usize) -> Result<f64> {
    if gap < 1 || gap >= n {
        return Err(Error::Param(format!("jump gap {gap} out of range 1..{n}")));
    }
    Ok(big_to_f64(&choose(n as u64, gap as u64)))
}
