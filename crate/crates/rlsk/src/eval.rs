//! Matched-seed policy comparison, statistical tests, policy-quality
//! correlation metrics, heatmap export, and plot-ready CSV reports.

use crate::combinatorics::{analytic_drift, optimal_k, DriftModel};
use crate::data::TransitionTable;
use crate::error::{Error, Result};
use crate::optimizer::{run_episode, EpisodeConfig};
use crate::planner::PlannerConfig;
use crate::policy::{action_grid, PolicyFactory, PolicySpec};
use crate::problem::{Problem, ProblemKind};
use crate::stats;
use crate::wmdl::{BoundModel, WmState};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// What the per-run value means: steps to the optimum (budget when missed)
/// or best fitness reached (NK, where no optimum is known).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Steps,
    BestFitness,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyStats {
    pub id: String,
    pub runs: u64,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub successes: u64,
    pub success_rate: f64,
    /// Set when runs == 1, where the reported std of 0 is vacuous.
    pub single_run: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub statistic: f64,
    pub p_value: f64,
    pub kind: String,
    pub significant: bool,
}

/// One evaluation episode across every policy (the audit matrix row).
#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub episode: u64,
    pub seed: i64,
    pub initial_fitness: f64,
    pub values: Vec<f64>,
    pub successes: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub problem: String,
    pub metric: Metric,
    pub budget: u64,
    pub policies: Vec<PolicyStats>,
    pub tests: Vec<PairwiseTest>,
    pub matrix: Vec<RunRow>,
}

impl EvalReport {
    pub fn stats_for(&self, id: &str) -> Option<&PolicyStats> {
        self.policies.iter().find(|p| p.id == id)
    }

    pub fn values_for(&self, id: &str) -> Option<Vec<f64>> {
        let idx = self.policies.iter().position(|p| p.id == id)?;
        Some(self.matrix.iter().map(|row| row.values[idx]).collect())
    }

    pub fn test_between(&self, a: &str, b: &str) -> Option<&PairwiseTest> {
        self.tests
            .iter()
            .find(|t| (t.a == a && t.b == b) || (t.a == b && t.b == a))
    }
}

/// Evaluate policies over matched seeds (episode i uses seed 31*i for every
/// policy). Step counts are capped at the budget; unsuccessful runs count as
/// the full budget. NK reports best fitness instead of steps.
pub fn evaluate(
    problem: &Problem,
    specs: &[PolicySpec],
    runs: u64,
    budget: u64,
    base_seed_multiplier: i64,
    planner: PlannerConfig,
) -> Result<EvalReport> {
    if runs < 1 {
        return Err(Error::Param("need at least one run".into()));
    }
    let metric = match problem.kind {
        ProblemKind::Nk => Metric::BestFitness,
        _ => Metric::Steps,
    };
    let factories: Vec<PolicyFactory> = specs
        .iter()
        .map(|s| PolicyFactory::new(s.clone(), problem, budget, planner))
        .collect::<Result<_>>()?;

    struct EpisodeOutcome {
        value: f64,
        success: bool,
        initial_fitness: f64,
    }

    let mut per_policy: Vec<Vec<EpisodeOutcome>> = Vec::with_capacity(specs.len());
    for factory in &factories {
        let outcomes: Vec<EpisodeOutcome> = (0..runs)
            .into_par_iter()
            .map(|episode| {
                let config = EpisodeConfig {
                    n: problem.n,
                    budget,
                    episode_index: episode,
                    base_seed_multiplier,
                };
                let mut policy = factory.build(problem, config.seed())?;
                let traj = run_episode(problem, policy.as_mut(), &config)?;
                let initial_fitness = traj
                    .records
                    .first()
                    .map(|r| r.f0)
                    .unwrap_or(traj.final_fitness);
                let value = match metric {
                    Metric::Steps => {
                        if traj.success {
                            traj.steps as f64
                        } else {
                            budget as f64
                        }
                    }
                    Metric::BestFitness => traj.final_fitness,
                };
                Ok(EpisodeOutcome { value, success: traj.success, initial_fitness })
            })
            .collect::<Result<_>>()?;
        per_policy.push(outcomes);
    }

    let policies: Vec<PolicyStats> = specs
        .iter()
        .zip(&per_policy)
        .map(|(spec, outcomes)| {
            let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
            let successes = outcomes.iter().filter(|o| o.success).count() as u64;
            PolicyStats {
                id: spec.id(),
                runs,
                mean: stats::mean(&values),
                std: stats::std_dev(&values),
                median: stats::median(&values),
                successes,
                success_rate: successes as f64 / runs as f64,
                single_run: runs == 1,
            }
        })
        .collect();

    let mut tests = Vec::new();
    for i in 0..specs.len() {
        for j in (i + 1)..specs.len() {
            let a: Vec<f64> = per_policy[i].iter().map(|o| o.value).collect();
            let b: Vec<f64> = per_policy[j].iter().map(|o| o.value).collect();
            let r = stats::mann_whitney_u(&a, &b)?;
            tests.push(PairwiseTest {
                a: specs[i].id(),
                b: specs[j].id(),
                statistic: r.u,
                p_value: r.p_two_sided,
                kind: if r.exact { "mwu_exact".into() } else { "mwu".into() },
                significant: r.p_two_sided < 0.05,
            });
        }
    }

    let matrix: Vec<RunRow> = (0..runs as usize)
        .map(|e| {
            let initial_fitness = per_policy[0][e].initial_fitness;
            // matched-seed audit: identical initial bitstrings across policies
            for outcomes in &per_policy {
                assert_eq!(
                    outcomes[e].initial_fitness, initial_fitness,
                    "matched-seed audit failed at episode {e}"
                );
            }
            RunRow {
                episode: e as u64,
                seed: base_seed_multiplier * e as i64,
                initial_fitness,
                values: per_policy.iter().map(|o| o[e].value).collect(),
                successes: per_policy.iter().map(|o| o[e].success).collect(),
            }
        })
        .collect();

    Ok(EvalReport {
        problem: problem.id(),
        metric,
        budget,
        policies,
        tests,
        matrix,
    })
}

/// Paired evaluation over NK instances: per-instance mean best fitness per
/// policy, with paired t-tests over the instance means.
#[derive(Debug, Clone, Serialize)]
pub struct NkPairedReport {
    pub instance_seeds: Vec<i64>,
    pub policy_ids: Vec<String>,
    /// policy x instance mean best fitness
    pub instance_means: Vec<Vec<f64>>,
    pub overall_means: Vec<f64>,
    pub paired: Vec<PairwiseTest>,
}

pub fn nk_paired_evaluation(
    n: usize,
    k_epistasis: usize,
    instance_seeds: &[i64],
    specs: &[PolicySpec],
    runs: u64,
    budget: u64,
    planner: PlannerConfig,
) -> Result<NkPairedReport> {
    let mut instance_means = vec![Vec::new(); specs.len()];
    for &seed in instance_seeds {
        let problem = Problem::nk(n, k_epistasis, seed)?;
        let report = evaluate(&problem, specs, runs, budget, 31, planner)?;
        for (i, p) in report.policies.iter().enumerate() {
            instance_means[i].push(p.mean);
        }
    }
    let mut paired = Vec::new();
    for i in 0..specs.len() {
        for j in (i + 1)..specs.len() {
            let r = stats::paired_t(&instance_means[i], &instance_means[j])?;
            paired.push(PairwiseTest {
                a: specs[i].id(),
                b: specs[j].id(),
                statistic: r.t,
                p_value: r.p_two_sided,
                kind: if r.degenerate {
                    "paired_t_degenerate".into()
                } else {
                    "paired_t".into()
                },
                significant: r.p_two_sided < 0.05,
            });
        }
    }
    Ok(NkPairedReport {
        instance_seeds: instance_seeds.to_vec(),
        policy_ids: specs.iter().map(|s| s.id()).collect(),
        overall_means: instance_means.iter().map(|m| stats::mean(m)).collect(),
        instance_means,
        paired,
    })
}

// --- policy-quality correlation ------------------------------------------

/// Ranking ground truth for correlation metrics.
pub enum OracleRanking<'a> {
    Analytic(DriftModel),
    /// Held-out empirical table: drift estimate is the cell's mean delta.
    Empirical(&'a TransitionTable),
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub exact_match: f64,
    pub valley_edge_tau: Option<f64>,
    pub levels_used: usize,
    pub levels_skipped: usize,
}

/// Rank the action grid by model score and by oracle drift at each fitness
/// level; correlations are averaged uniformly over levels and exact_match is
/// the fraction of levels whose argmax agrees (ties toward smaller k).
pub fn policy_correlation(
    model: &BoundModel,
    oracle: &OracleRanking,
    problem: &Problem,
    levels: &[f64],
) -> Result<CorrelationReport> {
    let grid = action_grid(problem.n);
    let mut taus = Vec::new();
    let mut rhos = Vec::new();
    let mut exact = 0usize;
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut valley_edge_tau = None;

    for &level in levels {
        let (ks, oracle_drift): (Vec<usize>, Vec<f64>) = match oracle {
            OracleRanking::Analytic(m) => {
                let drifts: Vec<f64> = grid
                    .iter()
                    .map(|&k| {
                        analytic_drift::<f64>(*m, problem.n, level as usize, k)
                            .map(|d| d.expected_drift)
                    })
                    .collect::<Result<_>>()?;
                (grid.clone(), drifts)
            }
            OracleRanking::Empirical(table) => {
                let bin = table.bin_of(level);
                let mut ks = Vec::new();
                let mut drifts = Vec::new();
                for &k in &table.ks {
                    if let Some(cell) = table.cell(bin, k) {
                        ks.push(k);
                        drifts.push(cell.df);
                    }
                }
                (ks, drifts)
            }
        };
        if ks.len() < 2 {
            skipped += 1;
            continue;
        }
        let state = WmState { fitness: level, step: 0, stagnation: 0 };
        let mut scores = Vec::with_capacity(ks.len());
        for &k in &ks {
            let predicted = model.predict(&state, k)?;
            scores.push(model.evaluate(&predicted, k)?);
        }
        let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
        let _ = &kf;
        let tau = stats::kendall_tau_b(&scores, &oracle_drift);
        let rho = stats::spearman_rho(&scores, &oracle_drift);
        taus.push(tau);
        rhos.push(rho);
        if argmax_k(&ks, &scores) == argmax_k(&ks, &oracle_drift) {
            exact += 1;
        }
        used += 1;
        if problem.kind == ProblemKind::Jump && level == problem.n as f64 {
            valley_edge_tau = Some(tau);
        }
    }
    if used == 0 {
        return Err(Error::Param("no levels with at least two ranked actions".into()));
    }
    Ok(CorrelationReport {
        kendall_tau: stats::mean(&taus),
        spearman_rho: stats::mean(&rhos),
        exact_match: exact as f64 / used as f64,
        valley_edge_tau,
        levels_used: used,
        levels_skipped: skipped,
    })
}

fn argmax_k(ks: &[usize], values: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    ks[best]
}

/// Decision levels for a problem: every level where the optimizer still has
/// a move to make (Jump: the normal region plus the valley edge).
pub fn default_levels(problem: &Problem) -> Vec<f64> {
    match problem.kind {
        ProblemKind::LeadingOnes | ProblemKind::OneMax => {
            (0..problem.n).map(|i| i as f64).collect()
        }
        ProblemKind::Jump => {
            let gap = problem.jump_gap.unwrap();
            (gap..=problem.n).map(|i| i as f64).collect()
        }
        ProblemKind::Nk => Vec::new(),
    }
}

// --- heatmap ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapGrid {
    pub fitness_levels: Vec<f64>,
    pub k_values: Vec<usize>,
    /// scores[level][k index]
    pub scores: Vec<Vec<f64>>,
    /// Greedy-optimal k per level, snapped to the nearest displayed column.
    pub overlay: Option<Vec<usize>>,
}

/// Score the model over (fitness level, k) cells, with the oracle overlay
/// snapped to the displayed grid for problems that have one.
pub fn heatmap(
    model: &BoundModel,
    problem: &Problem,
    fitness_levels: &[f64],
    k_values: &[usize],
) -> Result<HeatmapGrid> {
    let mut scores = Vec::with_capacity(fitness_levels.len());
    for &level in fitness_levels {
        let state = WmState { fitness: level, step: 0, stagnation: 0 };
        let mut row = Vec::with_capacity(k_values.len());
        for &k in k_values {
            let predicted = model.predict(&state, k)?;
            row.push(model.evaluate(&predicted, k)?);
        }
        scores.push(row);
    }
    let drift_model = match problem.kind {
        ProblemKind::LeadingOnes => Some(DriftModel::LeadingOnes),
        ProblemKind::OneMax => Some(DriftModel::OneMax),
        ProblemKind::Jump => Some(DriftModel::Jump { gap: problem.jump_gap.unwrap() }),
        ProblemKind::Nk => None,
    };
    let overlay = match drift_model {
        Some(m) => {
            let mut snapped = Vec::with_capacity(fitness_levels.len());
            for &level in fitness_levels {
                let k_star = optimal_k(m, problem.n, level as usize)?;
                snapped.push(snap_to_grid(k_star, k_values));
            }
            Some(snapped)
        }
        None => None,
    };
    Ok(HeatmapGrid {
        fitness_levels: fitness_levels.to_vec(),
        k_values: k_values.to_vec(),
        scores,
        overlay,
    })
}

/// Nearest displayed column, ties toward the smaller k.
fn snap_to_grid(k: usize, grid: &[usize]) -> usize {
    *grid
        .iter()
        .min_by_key(|&&g| (g.abs_diff(k), g))
        .expect("nonempty grid")
}

// --- CSV export -------------------------------------------------------------

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// report.csv: one row per policy.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("policy,runs,mean,std,median,successes,success_rate\n");
    for p in &report.policies {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.id, p.runs, p.mean, p.std, p.median, p.successes, p.success_rate
        ));
    }
    out
}

/// tests.csv: pairwise statistics (alpha = 0.05 annotated per row).
pub fn tests_csv(tests: &[PairwiseTest]) -> String {
    let mut out = String::from("a,b,kind,statistic,p_value,significant_at_0.05\n");
    for t in tests {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.a,
            t.b,
            t.kind,
            t.statistic,
            format_p(t.p_value),
            t.significant
        ));
    }
    out
}

/// p-values reported to four significant digits.
fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else {
        format!("{p:.3e}")
    }
}

/// matrix.csv: run-level audit (episode, seed, initial fitness, one column
/// per policy).
pub fn matrix_csv(report: &EvalReport) -> String {
    let mut out = String::from("episode,seed,initial_fitness");
    for p in &report.policies {
        out.push_str(&format!(",{}", p.id));
        out.push_str(&format!(",{}_success", p.id));
    }
    out.push('\n');
    for row in &report.matrix {
        out.push_str(&format!("{},{},{}", row.episode, row.seed, row.initial_fitness));
        for (v, s) in row.values.iter().zip(&row.successes) {
            out.push_str(&format!(",{v},{s}"));
        }
        out.push('\n');
    }
    out
}

/// heatmap.csv: long format (fitness, k, score, optimal flag).
pub fn heatmap_csv(grid: &HeatmapGrid) -> String {
    let mut out = String::from("fitness,k,score,is_optimal_column\n");
    for (i, &level) in grid.fitness_levels.iter().enumerate() {
        for (j, &k) in grid.k_values.iter().enumerate() {
            let star = grid
                .overlay
                .as_ref()
                .map(|o| o[i] == k)
                .unwrap_or(false);
            out.push_str(&format!("{},{},{},{}\n", level, k, grid.scores[i][j], star));
        }
    }
    out
}

/// Write the full report bundle into a directory.
pub fn write_report_dir(report: &EvalReport, dir: &Path) -> Result<()> {
    write_file(&dir.join("report.csv"), &report_csv(report))?;
    write_file(&dir.join("tests.csv"), &tests_csv(&report.tests))?;
    write_file(&dir.join("matrix.csv"), &matrix_csv(report))?;
    Ok(())
}
