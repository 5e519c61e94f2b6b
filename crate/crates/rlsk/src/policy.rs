//! Mutation-strength control policies: the exact oracles, adaptive
//! multiplicative rules, heuristics, fixed/random schedules, and the
//! world-model planner wrapped as a policy.
//!
//! Policies are addressed by id strings (see [`parse_policy`]); a fresh
//! [`KPolicy`] value is built per episode so all adaptation state is
//! episode-local.

use crate::combinatorics::{optimal_k, DriftModel};
use crate::error::{Error, Result};
use crate::optimizer::{KPolicy, Observation};
use crate::planner::{greedy_select, mcts_select, PlannerConfig, PlannerMode};
use crate::problem::{Problem, ProblemKind};
use crate::rng::Stream;
use crate::wmdl::{parse_wmdl, Binding, BoundModel, WmProgram, WmState};
use std::sync::Arc;

/// Display/action grid shared by random_k, the DQN and heatmap columns.
pub fn action_grid(n: usize) -> Vec<usize> {
    [1, 2, 3, 4, 5, 7, 10, 15, 20, 25, 30, 40, 50]
        .into_iter()
        .filter(|&k| k <= n)
        .collect()
}

/// Parsed policy identifier.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Exact drift-maximizing policy (closed form for LeadingOnes).
    Optimal,
    /// The Jump greedy-optimal policy (same oracle, named per the roster).
    GreedyOpt,
    EaAlpha { a: f64, b: f64 },
    FifthRule,
    SelfAdjusting,
    /// k=1 until `stagnation >= threshold` (defaults to n), then k_jump.
    Stagnation { threshold: Option<u64> },
    RlsFixed { k: usize },
    RlsJumpK,
    RandomK,
    Decreasing,
    SqrtN,
    KIPlus1,
    AdaptiveFitness,
    /// World-model planner over a program file.
    Cwm { path: String, mode: PlannerMode },
}

impl PolicySpec {
    pub fn id(&self) -> String {
        match self {
            PolicySpec::Optimal => "optimal".into(),
            PolicySpec::GreedyOpt => "greedy_opt".into(),
            PolicySpec::EaAlpha { a, b } => format!("ea_alpha_{a}_{b}"),
            PolicySpec::FifthRule => "fifth_rule".into(),
            PolicySpec::SelfAdjusting => "self_adjusting".into(),
            PolicySpec::Stagnation { .. } => "stagnation".into(),
            PolicySpec::RlsFixed { k: 1 } => "rls_1".into(),
            PolicySpec::RlsFixed { k } => format!("static_{k}"),
            PolicySpec::RlsJumpK => "rls_jump_k".into(),
            PolicySpec::RandomK => "random_k".into(),
            PolicySpec::Decreasing => "decreasing".into(),
            PolicySpec::SqrtN => "sqrt_n".into(),
            PolicySpec::KIPlus1 => "k_i_plus_1".into(),
            PolicySpec::AdaptiveFitness => "adaptive_fitness".into(),
            PolicySpec::Cwm { path, mode } => match mode {
                PlannerMode::Greedy => format!("cwm_greedy:{path}"),
                PlannerMode::Mcts => format!("cwm_mcts:{path}"),
            },
        }
    }
}

/// Parse a policy id string. `cwm_greedy:<path.wmdl>` binds a world-model
/// file to the greedy planner; `cwm_mcts:<path.wmdl>` to the UCT planner.
pub fn parse_policy(id: &str) -> Result<PolicySpec> {
    if let Some(path) = id.strip_prefix("cwm_greedy:") {
        return Ok(PolicySpec::Cwm { path: path.into(), mode: PlannerMode::Greedy });
    }
    if let Some(path) = id.strip_prefix("cwm_mcts:") {
        return Ok(PolicySpec::Cwm { path: path.into(), mode: PlannerMode::Mcts });
    }
    if let Some(rest) = id.strip_prefix("ea_alpha_") {
        let parts: Vec<&str> = rest.splitn(2, '_').collect();
        if parts.len() == 2 {
            let a: f64 = parts[0].parse().map_err(|_| bad_id(id))?;
            let b: f64 = parts[1].parse().map_err(|_| bad_id(id))?;
            if a <= 1.0 || b <= 0.0 || b >= 1.0 {
                return Err(Error::Config(format!(
                    "ea_alpha requires A > 1 and 0 < b < 1, got A={a} b={b}"
                )));
            }
            return Ok(PolicySpec::EaAlpha { a, b });
        }
        return Err(bad_id(id));
    }
    if let Some(k) = id.strip_prefix("static_") {
        let k: usize = k.parse().map_err(|_| bad_id(id))?;
        return Ok(PolicySpec::RlsFixed { k });
    }
    if let Some(k) = id.strip_prefix("rls_") {
        if k != "jump_k" {
            let k: usize = k.parse().map_err(|_| bad_id(id))?;
            return Ok(PolicySpec::RlsFixed { k });
        }
    }
    Ok(match id {
        "optimal" => PolicySpec::Optimal,
        "greedy_opt" => PolicySpec::GreedyOpt,
        "fifth_rule" => PolicySpec::FifthRule,
        "self_adjusting" => PolicySpec::SelfAdjusting,
        "stagnation" => PolicySpec::Stagnation { threshold: None },
        "rls_jump_k" => PolicySpec::RlsJumpK,
        "random_k" => PolicySpec::RandomK,
        "decreasing" => PolicySpec::Decreasing,
        "sqrt_n" => PolicySpec::SqrtN,
        "k_i_plus_1" => PolicySpec::KIPlus1,
        "adaptive_fitness" => PolicySpec::AdaptiveFitness,
        _ => return Err(bad_id(id)),
    })
}

fn bad_id(id: &str) -> Error {
    Error::Config(format!("unknown policy id '{id}'"))
}

/// The four problem-agnostic collection policies.
pub fn agnostic_roster() -> Vec<PolicySpec> {
    vec![
        PolicySpec::RandomK,
        PolicySpec::RlsFixed { k: 1 },
        PolicySpec::SqrtN,
        PolicySpec::Decreasing,
    ]
}

/// Collection roster for the unimodal problems: the agnostic four plus
/// fixed-floor(n/2) and k=i+1.
pub fn unimodal_roster(n: usize) -> Vec<PolicySpec> {
    let mut roster = agnostic_roster();
    roster.push(PolicySpec::RlsFixed { k: (n / 2).max(1) });
    roster.push(PolicySpec::KIPlus1);
    roster
}

fn drift_model(problem: &Problem) -> Option<DriftModel> {
    match problem.kind {
        ProblemKind::LeadingOnes => Some(DriftModel::LeadingOnes),
        ProblemKind::OneMax => Some(DriftModel::OneMax),
        ProblemKind::Jump => Some(DriftModel::Jump { gap: problem.jump_gap.unwrap() }),
        ProblemKind::Nk => None,
    }
}

/// Fitness level a policy conditions on: the integer fitness value for the
/// unimodal problems, the fitness value for Jump.
fn fitness_level(fitness: f64) -> usize {
    fitness.max(0.0).round() as usize
}

struct OraclePolicy {
    /// k per fitness level, precomputed at episode start.
    table: Vec<usize>,
    gap: usize,
}

impl OraclePolicy {
    fn new(problem: &Problem) -> Result<Self> {
        let model = drift_model(problem).ok_or_else(|| {
            Error::Config("the optimal policy needs an analytic drift model (not NK)".into())
        })?;
        let n = problem.n;
        let levels: Vec<usize> = match model {
            DriftModel::LeadingOnes | DriftModel::OneMax => (0..n).collect(),
            DriftModel::Jump { gap } => (gap..=n).collect(),
        };
        let mut table = vec![1usize; levels.iter().copied().max().unwrap_or(0) + 1];
        for level in levels {
            table[level] = optimal_k(model, n, level)?;
        }
        Ok(Self {
            table,
            gap: problem.jump_gap.unwrap_or(0),
        })
    }
}

impl KPolicy for OraclePolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize> {
        let level = fitness_level(obs.fitness);
        // Valley fitness values (below the table's meaningful range for Jump)
        // should not occur under elitism; fall back to k=1 if they do.
        if self.gap > 0 && level < self.gap {
            return Ok(1);
        }
        Ok(self.table.get(level).copied().unwrap_or(1))
    }
}

struct MultiplicativePolicy {
    k_real: f64,
    n: usize,
    up: f64,
    down: f64,
}

impl MultiplicativePolicy {
    /// k <- k*up on improvement, k <- k*down otherwise, clamped to [1, n].
    fn new(n: usize, up: f64, down: f64) -> Self {
        Self { k_real: 1.0, n, up, down }
    }
}

impl KPolicy for MultiplicativePolicy {
    fn next_k(&mut self, _obs: &Observation) -> Result<usize> {
        Ok(round_half_away(self.k_real).clamp(1, self.n as i64) as usize)
    }

    fn feedback(&mut self, improved: bool) {
        self.k_real *= if improved { self.up } else { self.down };
        self.k_real = self.k_real.clamp(1.0, self.n as f64);
    }
}

fn round_half_away(v: f64) -> i64 {
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        (v - 0.5).ceil() as i64
    }
}

struct StagnationPolicy {
    threshold: u64,
    k_jump: usize,
}

impl KPolicy for StagnationPolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize> {
        Ok(if obs.stagnation >= self.threshold {
            self.k_jump
        } else {
            1
        })
    }
}

struct FixedPolicy(usize);

impl KPolicy for FixedPolicy {
    fn next_k(&mut self, _obs: &Observation) -> Result<usize> {
        Ok(self.0)
    }
}

struct RandomKPolicy {
    grid: Vec<usize>,
    rng: Stream,
}

impl KPolicy for RandomKPolicy {
    fn next_k(&mut self, _obs: &Observation) -> Result<usize> {
        Ok(self.grid[self.rng.below(self.grid.len())])
    }
}

/// Schedules that are pure functions of the observation.
struct SchedulePolicy(fn(&Observation) -> usize);

impl KPolicy for SchedulePolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize> {
        Ok(self.0(obs).clamp(1, obs.n))
    }
}

/// World-model planner as a policy.
pub struct CwmPolicy {
    model: Arc<BoundModel>,
    planner: PlannerConfig,
    rng: Stream,
}

impl CwmPolicy {
    pub fn new(model: Arc<BoundModel>, planner: PlannerConfig, episode_seed: i64) -> Self {
        Self {
            model,
            planner,
            rng: Stream::policy_substream(episode_seed),
        }
    }
}

impl KPolicy for CwmPolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize> {
        let state = WmState {
            fitness: obs.fitness,
            step: obs.step,
            stagnation: obs.stagnation,
        };
        match self.planner.mode {
            PlannerMode::Greedy => greedy_select(&self.model, &state),
            PlannerMode::Mcts => mcts_select(&self.model, &state, &self.planner, &mut self.rng),
        }
    }

    fn model_calls(&self) -> u64 {
        self.model.model_calls()
    }
}

/// Load and bind a world-model program for a problem.
pub fn bind_program(program: WmProgram, problem: &Problem, budget: u64) -> BoundModel {
    let mut const_overrides = Vec::new();
    if let Some(gap) = problem.jump_gap {
        const_overrides.push(("k_jump".to_string(), gap as f64));
    }
    if let Some(optimum) = problem.optimum() {
        const_overrides.push(("optimum".to_string(), optimum));
    }
    BoundModel::new(
        program,
        &Binding {
            n: problem.n,
            budget,
            optimum_scale: problem.optimum_scale(),
            const_overrides,
        },
    )
}

pub fn load_model(path: &str, problem: &Problem, budget: u64) -> Result<Arc<BoundModel>> {
    let text = std::fs::read_to_string(path)?;
    let program = parse_wmdl(&text).map_err(Error::Parse)?;
    Ok(Arc::new(bind_program(program, problem, budget)))
}

/// Everything needed to instantiate per-episode policy values.
pub struct PolicyFactory {
    spec: PolicySpec,
    problem_n: usize,
    gap: Option<usize>,
    kind: ProblemKind,
    model: Option<Arc<BoundModel>>,
    planner: PlannerConfig,
}

impl PolicyFactory {
    /// Validates the (policy, problem) pairing once, up front.
    pub fn new(
        spec: PolicySpec,
        problem: &Problem,
        budget: u64,
        planner: PlannerConfig,
    ) -> Result<Self> {
        match &spec {
            PolicySpec::Optimal | PolicySpec::GreedyOpt => {
                if problem.kind == ProblemKind::Nk {
                    return Err(Error::Config(
                        "no analytic oracle exists for NK; use an empirical world model".into(),
                    ));
                }
            }
            PolicySpec::Stagnation { .. } | PolicySpec::RlsJumpK => {
                if problem.kind != ProblemKind::Jump {
                    return Err(Error::Config(format!(
                        "policy '{}' requires the jump gap parameter",
                        spec.id()
                    )));
                }
            }
            PolicySpec::RlsFixed { k } if *k < 1 || *k > problem.n => {
                return Err(Error::Config(format!("fixed k={k} out of range 1..={}", problem.n)));
            }
            _ => {}
        }
        let model = match &spec {
            PolicySpec::Cwm { path, mode } => {
                let model = load_model(path, problem, budget)?;
                let _ = mode;
                Some(model)
            }
            _ => None,
        };
        Ok(Self {
            spec,
            problem_n: problem.n,
            gap: problem.jump_gap,
            kind: problem.kind,
            model,
            planner,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// Total world-model calls across every episode policy built so far.
    pub fn model_calls(&self) -> u64 {
        self.model.as_ref().map(|m| m.model_calls()).unwrap_or(0)
    }

    pub fn build(&self, problem: &Problem, episode_seed: i64) -> Result<Box<dyn KPolicy>> {
        Ok(match &self.spec {
            PolicySpec::Optimal | PolicySpec::GreedyOpt => Box::new(OraclePolicy::new(problem)?),
            PolicySpec::EaAlpha { a, b } => {
                Box::new(MultiplicativePolicy::new(self.problem_n, *a, a.powf(-1.0 / b)))
            }
            // Rechenberg-style one-fifth rule: grow by F on success, shrink by
            // F^(-1/4) on failure, F = 1.5.
            PolicySpec::FifthRule => {
                Box::new(MultiplicativePolicy::new(self.problem_n, 1.5, 1.5f64.powf(-0.25)))
            }
            // Success halves the strength, failure grows it by 2^(1/4).
            PolicySpec::SelfAdjusting => {
                Box::new(MultiplicativePolicy::new(self.problem_n, 0.5, 2f64.powf(0.25)))
            }
            // Default threshold 2n: a threshold of n lets a mid-climb stall
            // at m = n-gap-1 latch k_jump, a state k_jump moves cannot leave.
            PolicySpec::Stagnation { threshold } => Box::new(StagnationPolicy {
                threshold: threshold.unwrap_or(2 * self.problem_n as u64),
                k_jump: self.gap.expect("validated at construction"),
            }),
            PolicySpec::RlsFixed { k } => Box::new(FixedPolicy(*k)),
            PolicySpec::RlsJumpK => Box::new(FixedPolicy(self.gap.expect("validated"))),
            PolicySpec::RandomK => Box::new(RandomKPolicy {
                grid: action_grid(self.problem_n),
                rng: Stream::policy_substream(episode_seed),
            }),
            PolicySpec::Decreasing => Box::new(SchedulePolicy(|obs| {
                let level = fitness_level(obs.fitness);
                obs.n.saturating_sub(level).max(1)
            })),
            PolicySpec::SqrtN => Box::new(SchedulePolicy(|obs| {
                (obs.n as f64).sqrt().round() as usize
            })),
            PolicySpec::KIPlus1 => Box::new(SchedulePolicy(|obs| {
                (fitness_level(obs.fitness) + 1).min(obs.n)
            })),
            // k shrinks linearly from 10 to 1 as fitness approaches the
            // optimistic maximum (n); excluded from all quantitative gates.
            PolicySpec::AdaptiveFitness => Box::new(SchedulePolicy(|obs| {
                let frac = (obs.fitness / obs.n as f64).clamp(0.0, 1.0);
                (((1.0 - frac) * 10.0).round() as usize).max(1)
            })),
            PolicySpec::Cwm { .. } => Box::new(CwmPolicy::new(
                self.model.as_ref().expect("model loaded").clone(),
                self.planner,
                episode_seed,
            )),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(fitness: f64, n: usize, stagnation: u64, step: u64) -> Observation {
        Observation { fitness, n, stagnation, step, budget: 10_000 }
    }

    #[test]
    fn ea_alpha_shrinks_on_failure() {
        // A=2, b=0.5: failure multiplies by 2^(-1/0.5) = 1/4.
        let mut p = MultiplicativePolicy::new(50, 2.0, 2f64.powf(-2.0));
        p.k_real = 4.0;
        p.feedback(false);
        assert_eq!(p.next_k(&obs(0.0, 50, 0, 0)).unwrap(), 1);
    }

    #[test]
    fn ea_alpha_collapses_under_perpetual_failure() {
        let spec = parse_policy("ea_alpha_2_0.5").unwrap();
        let problem = Problem::one_max(50);
        let factory =
            PolicyFactory::new(spec, &problem, 1000, PlannerConfig::default()).unwrap();
        let mut p = factory.build(&problem, 0).unwrap();
        // force k up to n first
        for _ in 0..20 {
            p.feedback(true);
        }
        assert_eq!(p.next_k(&obs(0.0, 50, 0, 0)).unwrap(), 50);
        for _ in 0..200 {
            p.feedback(false);
        }
        assert_eq!(p.next_k(&obs(0.0, 50, 0, 0)).unwrap(), 1);
    }

    #[test]
    fn decreasing_schedule_follows_fitness() {
        let spec = parse_policy("decreasing").unwrap();
        let problem = Problem::one_max(50);
        let factory =
            PolicyFactory::new(spec, &problem, 1000, PlannerConfig::default()).unwrap();
        let mut p = factory.build(&problem, 0).unwrap();
        assert_eq!(p.next_k(&obs(10.0, 50, 0, 0)).unwrap(), 40);
        assert_eq!(p.next_k(&obs(50.0, 50, 0, 0)).unwrap(), 1);
    }

    #[test]
    fn stagnation_policy_waits_then_jumps() {
        let problem = Problem::jump(50, 2).unwrap();
        let spec = parse_policy("stagnation").unwrap();
        let factory =
            PolicyFactory::new(spec, &problem, 10_000, PlannerConfig::default()).unwrap();
        let mut p = factory.build(&problem, 0).unwrap();
        // threshold defaults to 2n = 100
        assert_eq!(p.next_k(&obs(50.0, 50, 99, 100)).unwrap(), 1);
        assert_eq!(p.next_k(&obs(50.0, 50, 100, 101)).unwrap(), 2);
        assert_eq!(p.next_k(&obs(50.0, 50, 160, 111)).unwrap(), 2);
    }

    #[test]
    fn random_k_stays_on_the_grid() {
        let problem = Problem::one_max(50);
        let factory = PolicyFactory::new(
            PolicySpec::RandomK,
            &problem,
            1000,
            PlannerConfig::default(),
        )
        .unwrap();
        let grid = action_grid(50);
        let mut p = factory.build(&problem, 31).unwrap();
        for step in 0..500 {
            let k = p.next_k(&obs(10.0, 50, 0, step)).unwrap();
            assert!(grid.contains(&k));
        }
    }

    #[test]
    fn oracle_rejects_nk() {
        let problem = Problem::nk(20, 2, 0).unwrap();
        let err = PolicyFactory::new(
            PolicySpec::Optimal,
            &problem,
            1000,
            PlannerConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn jump_specific_policies_need_jump() {
        let problem = Problem::one_max(50);
        assert!(PolicyFactory::new(
            PolicySpec::RlsJumpK,
            &problem,
            1000,
            PlannerConfig::default()
        )
        .is_err());
        assert!(PolicyFactory::new(
            PolicySpec::Stagnation { threshold: None },
            &problem,
            1000,
            PlannerConfig::default()
        )
        .is_err());
    }

    #[test]
    fn policy_ids_round_trip() {
        for id in [
            "optimal",
            "greedy_opt",
            "ea_alpha_2_0.5",
            "ea_alpha_1.3_0.75",
            "fifth_rule",
            "self_adjusting",
            "stagnation",
            "rls_1",
            "rls_jump_k",
            "random_k",
            "decreasing",
            "sqrt_n",
            "k_i_plus_1",
            "static_5",
            "adaptive_fitness",
            "cwm_greedy:models/lo_reference.wmdl",
        ] {
            let spec = parse_policy(id).unwrap();
            assert_eq!(spec.id(), id, "id round-trip");
        }
        assert_eq!(parse_policy("static_1").unwrap(), PolicySpec::RlsFixed { k: 1 });
        assert!(parse_policy("nope").is_err());
        assert!(parse_policy("ea_alpha_0.5_0.5").is_err());
    }

    #[test]
    fn emitted_k_always_in_range() {
        let problem = Problem::one_max(7);
        for id in ["sqrt_n", "decreasing", "k_i_plus_1", "adaptive_fitness"] {
            let factory = PolicyFactory::new(
                parse_policy(id).unwrap(),
                &problem,
                100,
                PlannerConfig::default(),
            )
            .unwrap();
            let mut p = factory.build(&problem, 0).unwrap();
            for f in 0..=7 {
                let k = p.next_k(&obs(f as f64, 7, 0, 0)).unwrap();
                assert!((1..=7).contains(&k), "{id} emitted {k}");
            }
        }
    }
}
