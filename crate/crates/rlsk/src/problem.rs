//! The four fitness landscapes and the NK instance generator.

use crate::error::{Error, Result};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

/// Length of the maximal all-ones prefix.
pub fn leading_ones(bits: &[u8]) -> usize {
    bits.iter().take_while(|&&b| b == 1).count()
}

/// Count of ones.
pub fn one_max(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

/// Jump fitness: `gap + |x|` in the normal region (|x| <= n-gap) and at the
/// optimum, `n - |x|` inside the valley.
pub fn jump_fitness(bits: &[u8], jump_gap: usize) -> Result<usize> {
    let n = bits.len();
    if jump_gap < 1 || jump_gap >= n {
        return Err(Error::Param(format!("jump gap {jump_gap} out of range 1..{n}")));
    }
    let m = one_max(bits);
    if m == n {
        Ok(n + jump_gap)
    } else if m > n - jump_gap {
        Ok(n - m)
    } else {
        Ok(jump_gap + m)
    }
}

/// An NK landscape instance: per-position epistatic neighbours plus a
/// contribution table of 2^(K+1) uniform values per position.
///
/// Regeneration from `(n, K, seed)` is canonical; the serialized form exists
/// for auditability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NkInstance {
    pub n: usize,
    #[serde(rename = "K")]
    pub k_epistasis: usize,
    pub seed: i64,
    pub neighbors: Vec<Vec<usize>>,
    pub tables: Vec<Vec<f64>>,
}

/// Generate an NK instance deterministically from its seed.
///
/// Draw order, per position i in 0..n: first the K neighbours (uniform subset
/// of positions != i via partial Fisher-Yates over the remaining indices),
/// then all n tables position by position, 2^(K+1) uniform [0,1) values each.
pub fn nk_generate(n: usize, k_epistasis: usize, seed: i64) -> Result<NkInstance> {
    if k_epistasis >= n {
        return Err(Error::Param(format!(
            "NK epistasis K={k_epistasis} must be < n={n}"
        )));
    }
    let mut rng = Stream::seed(seed);
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&p| p != i).collect();
        let picks = rng.k_subset(n - 1, k_epistasis);
        neighbors.push(picks.into_iter().map(|p| others[p]).collect());
    }
    let rows = 1usize << (k_epistasis + 1);
    let mut tables = Vec::with_capacity(n);
    for _ in 0..n {
        tables.push((0..rows).map(|_| rng.unit()).collect());
    }
    Ok(NkInstance {
        n,
        k_epistasis,
        seed,
        neighbors,
        tables,
    })
}

/// NK fitness: sum over positions of the contribution selected by the
/// (K+1)-bit pattern (own bit is the most significant index bit, neighbours
/// follow in stored order).
pub fn nk_fitness(bits: &[u8], instance: &NkInstance) -> f64 {
    debug_assert_eq!(bits.len(), instance.n);
    let k = instance.k_epistasis;
    let mut total = 0.0;
    for i in 0..instance.n {
        let mut idx = (bits[i] as usize) << k;
        for (shift, &nb) in instance.neighbors[i].iter().enumerate() {
            idx |= (bits[nb] as usize) << (k - 1 - shift);
        }
        total += instance.tables[i][idx];
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LeadingOnes,
    OneMax,
    Jump,
    Nk,
}

/// One benchmark with its parameters (and, for NK, a generated instance).
#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    pub n: usize,
    pub jump_gap: Option<usize>,
    pub nk: Option<NkInstance>,
}

impl Problem {
    pub fn leading_ones(n: usize) -> Self {
        Self { kind: ProblemKind::LeadingOnes, n, jump_gap: None, nk: None }
    }

    pub fn one_max(n: usize) -> Self {
        Self { kind: ProblemKind::OneMax, n, jump_gap: None, nk: None }
    }

    pub fn jump(n: usize, gap: usize) -> Result<Self> {
        if gap < 1 || gap >= n {
            return Err(Error::Param(format!("jump gap {gap} out of range 1..{n}")));
        }
        Ok(Self { kind: ProblemKind::Jump, n, jump_gap: Some(gap), nk: None })
    }

    pub fn nk(n: usize, k_epistasis: usize, instance_seed: i64) -> Result<Self> {
        let instance = nk_generate(n, k_epistasis, instance_seed)?;
        Ok(Self { kind: ProblemKind::Nk, n, jump_gap: None, nk: Some(instance) })
    }

    pub fn fitness(&self, bits: &[u8]) -> f64 {
        match self.kind {
            ProblemKind::LeadingOnes => leading_ones(bits) as f64,
            ProblemKind::OneMax => one_max(bits) as f64,
            ProblemKind::Jump => {
                jump_fitness(bits, self.jump_gap.expect("jump problem has a gap")).unwrap() as f64
            }
            ProblemKind::Nk => nk_fitness(bits, self.nk.as_ref().expect("nk instance")),
        }
    }

    /// Known optimum value, if any. NK optima are unknown: episodes report
    /// best fitness and never count as successes.
    pub fn optimum(&self) -> Option<f64> {
        match self.kind {
            ProblemKind::LeadingOnes | ProblemKind::OneMax => Some(self.n as f64),
            ProblemKind::Jump => Some((self.n + self.jump_gap.unwrap()) as f64),
            ProblemKind::Nk => None,
        }
    }

    /// Normalization scale for world-model scores (n + gap for Jump, n
    /// otherwise; NK contributions sum to at most n).
    pub fn optimum_scale(&self) -> f64 {
        match self.kind {
            ProblemKind::Jump => (self.n + self.jump_gap.unwrap()) as f64,
            _ => self.n as f64,
        }
    }

    pub fn id(&self) -> String {
        match self.kind {
            ProblemKind::LeadingOnes => format!("lo_n{}", self.n),
            ProblemKind::OneMax => format!("om_n{}", self.n),
            ProblemKind::Jump => format!("jump_n{}_gap{}", self.n, self.jump_gap.unwrap()),
            ProblemKind::Nk => {
                let nk = self.nk.as_ref().unwrap();
                format!("nk_n{}_k{}_s{}", self.n, nk.k_epistasis, nk.seed)
            }
        }
    }
}
