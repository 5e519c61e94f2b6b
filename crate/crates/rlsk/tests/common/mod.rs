//! Shared brute-force oracle: exhaustive flip-set enumeration of one-step
//! transition profiles, independent of the analytic drift implementation.

use rlsk::combinatorics::DriftModel;

/// All k-subsets of 0..n.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            recurse(n, k, i + 1, current, out);
            current.pop();
        }
    }
    recurse(n, k, 0, &mut current, &mut out);
    out
}

fn fitness(model: DriftModel, bits: &[u8]) -> f64 {
    match model {
        DriftModel::LeadingOnes => rlsk::problem::leading_ones(bits) as f64,
        DriftModel::OneMax => rlsk::problem::one_max(bits) as f64,
        DriftModel::Jump { gap } => rlsk::problem::jump_fitness(bits, gap).unwrap() as f64,
    }
}

/// Exact (p_improve, expected_drift) for a k-flip, by enumerating every flip
/// set on every state consistent with the fitness level.
///
/// For the count-based landscapes a single canonical state suffices by
/// symmetry; for LeadingOnes every tail behind the leftmost zero is
/// enumerated and averaged uniformly.
pub fn brute_force_profile(model: DriftModel, n: usize, level: usize, k: usize) -> (f64, f64) {
    let states: Vec<Vec<u8>> = match model {
        DriftModel::LeadingOnes => {
            let tail_len = n - level - 1;
            (0..(1u32 << tail_len))
                .map(|pattern| {
                    let mut bits = vec![1u8; level];
                    bits.push(0);
                    for t in 0..tail_len {
                        bits.push(((pattern >> t) & 1) as u8);
                    }
                    bits
                })
                .collect()
        }
        DriftModel::OneMax => {
            let mut bits = vec![0u8; n];
            for b in bits.iter_mut().take(level) {
                *b = 1;
            }
            vec![bits]
        }
        DriftModel::Jump { gap } => {
            let ones = level - gap;
            let mut bits = vec![0u8; n];
            for b in bits.iter_mut().take(ones) {
                *b = 1;
            }
            vec![bits]
        }
    };
    let flips = subsets(n, k);
    let mut improving = 0f64;
    let mut gain = 0f64;
    let mut total = 0f64;
    for state in &states {
        let f0 = fitness(model, state);
        for flip in &flips {
            let mut y = state.clone();
            for &i in flip {
                y[i] ^= 1;
            }
            let f1 = fitness(model, &y);
            total += 1.0;
            if f1 > f0 {
                improving += 1.0;
                gain += f1 - f0;
            }
        }
    }
    (improving / total, gain / total)
}
