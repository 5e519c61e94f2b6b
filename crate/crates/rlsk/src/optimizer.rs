//! (1+1)-RLS_k dynamics and episode execution under any policy.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

/// Full optimizer state: bitstring, cached fitness, and the counters policies
/// and world models condition on.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub bits: Vec<u8>,
    pub fitness: f64,
    pub step: u64,
    pub stagnation: u64,
    pub n: usize,
}

impl SearchState {
    /// Initial state: first n draws of the episode stream, bit = draw mod 2.
    pub fn initial(problem: &Problem, rng: &mut Stream) -> Self {
        let bits: Vec<u8> = (0..problem.n).map(|_| rng.bit()).collect();
        let fitness = problem.fitness(&bits);
        Self {
            bits,
            fitness,
            step: 0,
            stagnation: 0,
            n: problem.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    pub n: usize,
    pub budget: u64,
    pub episode_index: u64,
    pub base_seed_multiplier: i64,
}

impl EpisodeConfig {
    pub fn new(n: usize, budget: u64, episode_index: u64) -> Self {
        Self {
            n,
            budget,
            episode_index,
            base_seed_multiplier: 31,
        }
    }

    /// Matched-seed contract: episode seed = multiplier * episode index.
    pub fn seed(&self) -> i64 {
        self.base_seed_multiplier * self.episode_index as i64
    }
}

/// One step's log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    /// Step index (0-based).
    pub t: u64,
    /// Fitness before the step.
    pub f0: f64,
    /// Mutation strength used.
    pub k: usize,
    /// Fitness after elitist acceptance.
    pub f1: f64,
    /// Offspring accepted (f(y) >= f(x)).
    pub acc: bool,
    /// Stagnation counter before the step.
    pub stag: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub problem: String,
    pub policy: String,
    pub seed: i64,
    pub success: bool,
    pub steps: u64,
    pub final_fitness: f64,
    pub records: Vec<TransitionRecord>,
}

/// What a policy observes before emitting k.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub fitness: f64,
    pub n: usize,
    pub stagnation: u64,
    pub step: u64,
    pub budget: u64,
}

/// Per-step mutation-strength controller. State is episode-local; a fresh
/// policy value is constructed per episode.
pub trait KPolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize>;

    /// Called after each step with whether fitness strictly improved.
    fn feedback(&mut self, _improved: bool) {}

    /// World-model invocations made so far (planner-backed policies).
    fn model_calls(&self) -> u64 {
        0
    }
}

/// One elitist step: flip a uniform k-subset, keep the offspring iff
/// f(y) >= f(x). Updates step and stagnation counters.
pub fn rls_step(
    state: &mut SearchState,
    k: usize,
    rng: &mut Stream,
    problem: &Problem,
) -> Result<TransitionRecord> {
    if k < 1 || k > state.n {
        return Err(Error::Param(format!("k={k} out of range 1..={}", state.n)));
    }
    debug_assert_eq!(
        state.fitness,
        problem.fitness(&state.bits),
        "fitness cache out of sync with bits"
    );
    let before = state.fitness;
    let stagnation_before = state.stagnation;
    let flips = rng.k_subset(state.n, k);
    for &i in &flips {
        state.bits[i] ^= 1;
    }
    let candidate = problem.fitness(&state.bits);
    let accepted = candidate >= before;
    if accepted {
        state.fitness = candidate;
    } else {
        for &i in &flips {
            state.bits[i] ^= 1;
        }
    }
    state.step += 1;
    if state.fitness > before {
        state.stagnation = 0;
    } else {
        state.stagnation += 1;
    }
    Ok(TransitionRecord {
        t: state.step - 1,
        f0: before,
        k,
        f1: state.fitness,
        acc: accepted,
        stag: stagnation_before,
    })
}

/// Run one episode to the optimum or budget exhaustion.
///
/// Deterministic given (problem instance, policy, config): the initial
/// bitstring and all flip sets come from the episode stream, so every policy
/// faces the same initial state under matched seeds.
pub fn run_episode(
    problem: &Problem,
    policy: &mut dyn KPolicy,
    config: &EpisodeConfig,
) -> Result<Trajectory> {
    let seed = config.seed();
    let mut rng = Stream::seed(seed);
    let mut state = SearchState::initial(problem, &mut rng);
    let optimum = problem.optimum();
    let at_optimum = |f: f64| optimum.is_some_and(|o| f >= o);
    let mut records = Vec::new();
    while state.step < config.budget && !at_optimum(state.fitness) {
        let obs = Observation {
            fitness: state.fitness,
            n: state.n,
            stagnation: state.stagnation,
            step: state.step,
            budget: config.budget,
        };
        let k = policy.next_k(&obs).map_err(|e| Error::Episode {
            step: state.step,
            source: Box::new(e),
        })?;
        let before = state.fitness;
        let record = rls_step(&mut state, k, &mut rng, problem).map_err(|e| Error::Episode {
            step: state.step,
            source: Box::new(e),
        })?;
        policy.feedback(state.fitness > before);
        records.push(record);
    }
    Ok(Trajectory {
        problem: problem.id(),
        policy: String::new(),
        seed,
        success: at_optimum(state.fitness),
        steps: records.len() as u64,
        final_fitness: state.fitness,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Problem;

    struct Fixed(usize);
    impl KPolicy for Fixed {
        fn next_k(&mut self, _obs: &Observation) -> Result<usize> {
            Ok(self.0)
        }
    }

    #[test]
    fn optimum_cannot_be_improved() {
        let problem = Problem::one_max(4);
        let mut state = SearchState {
            bits: vec![1, 1, 1, 1],
            fitness: 4.0,
            step: 0,
            stagnation: 0,
            n: 4,
        };
        let mut rng = Stream::seed(3);
        let rec = rls_step(&mut state, 1, &mut rng, &problem).unwrap();
        assert!(!rec.acc);
        assert_eq!(rec.f1, 4.0);
        assert_eq!(state.stagnation, 1);
    }

    #[test]
    fn full_complement_flip_is_accepted() {
        let problem = Problem::one_max(4);
        let mut state = SearchState {
            bits: vec![0, 0, 0, 0],
            fitness: 0.0,
            step: 0,
            stagnation: 5,
            n: 4,
        };
        let mut rng = Stream::seed(3);
        let rec = rls_step(&mut state, 4, &mut rng, &problem).unwrap();
        assert!(rec.acc);
        assert_eq!(rec.f1, 4.0);
        assert_eq!(rec.stag, 5);
        assert_eq!(state.stagnation, 0);
        assert_eq!(state.bits, vec![1, 1, 1, 1]);
    }

    #[test]
    fn two_flip_outcome_distribution_matches_enumeration() {
        // x=1100, k=2: of the 6 flip sets, exactly one (both zeros) improves
        // to f=4; the four one-one/one-zero swaps are neutral (accepted, f=2);
        // flipping both ones is rejected. Expected: f1=4 with p=1/6, else 2.
        let problem = Problem::one_max(4);
        let mut rng = Stream::seed(99);
        let mut improved = 0u32;
        let trials = 60_000;
        for _ in 0..trials {
            let mut state = SearchState {
                bits: vec![1, 1, 0, 0],
                fitness: 2.0,
                step: 0,
                stagnation: 0,
                n: 4,
            };
            let rec = rls_step(&mut state, 2, &mut rng, &problem).unwrap();
            assert!(rec.f1 == 4.0 || rec.f1 == 2.0);
            assert!(rec.f1 >= rec.f0);
            if rec.f1 == 4.0 {
                improved += 1;
            }
        }
        let freq = improved as f64 / trials as f64;
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "improvement frequency {freq}");
    }

    #[test]
    fn k_out_of_range_is_a_parameter_error() {
        let problem = Problem::one_max(4);
        let mut state = SearchState {
            bits: vec![0, 0, 0, 0],
            fitness: 0.0,
            step: 0,
            stagnation: 0,
            n: 4,
        };
        let mut rng = Stream::seed(3);
        assert!(rls_step(&mut state, 0, &mut rng, &problem).is_err());
        assert!(rls_step(&mut state, 5, &mut rng, &problem).is_err());
    }

    #[test]
    fn zero_budget_gives_empty_trajectory() {
        let problem = Problem::one_max(8);
        let config = EpisodeConfig::new(8, 0, 4);
        let traj = run_episode(&problem, &mut Fixed(1), &config).unwrap();
        assert_eq!(traj.steps, 0);
        assert!(traj.records.is_empty());
        assert_eq!(traj.success, traj.final_fitness == 8.0);
    }

    #[test]
    fn episodes_are_deterministic() {
        let problem = Problem::one_max(20);
        let config = EpisodeConfig::new(20, 100, 7);
        let a = run_episode(&problem, &mut Fixed(2), &config).unwrap();
        let b = run_episode(&problem, &mut Fixed(2), &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn elitism_and_contiguity_hold() {
        let problem = Problem::leading_ones(16);
        let config = EpisodeConfig::new(16, 300, 12);
        let traj = run_episode(&problem, &mut Fixed(1), &config).unwrap();
        for pair in traj.records.windows(2) {
            assert_eq!(pair[0].f1, pair[1].f0, "records must be contiguous");
        }
        for rec in &traj.records {
            assert!(rec.f1 >= rec.f0, "elitism: fitness never decreases");
        }
        assert!(traj.steps <= 300);
    }

    #[test]
    fn stagnation_counts_steps_since_improvement() {
        let problem = Problem::one_max(10);
        let config = EpisodeConfig::new(10, 200, 3);
        let traj = run_episode(&problem, &mut Fixed(1), &config).unwrap();
        let mut expected = 0u64;
        for rec in &traj.records {
            assert_eq!(rec.stag, expected);
            expected = if rec.f1 > rec.f0 { 0 } else { expected + 1 };
        }
    }
}
