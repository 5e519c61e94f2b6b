//! World-model synthesis: prompt construction, the external LLM call, and the
//! parse -> validate -> refine loop. Responses are never executed; the only
//! ingestion path is the world-model parser.

use crate::data::{Dataset, TransitionTable};
use crate::error::{Error, Result};
use crate::eval::{policy_correlation, OracleRanking};
use crate::optimizer::TransitionRecord;
use crate::policy::bind_program;
use crate::problem::{Problem, ProblemKind};
use crate::wmdl::{parse_wmdl, render_diagnostics, WmProgram, WmState};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAX_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Math,
    Empirical,
    Both,
}

/// Everything that goes into a synthesis prompt. Construction is
/// deterministic: the same spec renders byte-identical text.
#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub mode: PromptMode,
    pub problem_text: String,
    pub transitions: Vec<TransitionRecord>,
    pub table: Option<TransitionTable>,
    pub token_budget_hint: Option<u32>,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PromptMode::Empirical | PromptMode::Both if self.table.is_none() => Err(
                Error::Config("empirical prompt mode requires a transition table".into()),
            ),
            PromptMode::Math | PromptMode::Both if self.problem_text.trim().is_empty() => Err(
                Error::Config("math prompt mode requires a problem description".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Built-in problem descriptions for the math prompt section.
pub fn problem_description(problem: &Problem) -> String {
    let n = problem.n;
    match problem.kind {
        ProblemKind::LeadingOnes => format!(
            "The optimizer maximizes LeadingOnes over bitstrings of length {n}: the fitness is \
             the length of the longest all-ones prefix. The optimum value is {n}. Each step \
             flips exactly k distinct uniformly random bits and keeps the offspring iff its \
             fitness is >= the parent's."
        ),
        ProblemKind::OneMax => format!(
            "The optimizer maximizes OneMax over bitstrings of length {n}: the fitness is the \
             number of ones. The optimum value is {n}. Each step flips exactly k distinct \
             uniformly random bits and keeps the offspring iff its fitness is >= the parent's."
        ),
        ProblemKind::Jump => {
            let gap = problem.jump_gap.unwrap();
            format!(
                "The optimizer maximizes a jump landscape over bitstrings of length {n} with gap \
                 parameter {gap}: with m ones, fitness is {gap} + m while m <= {} or m = {n} \
                 (the optimum, value {}), and {n} - m inside the deceptive valley \
                 {} < m < {n}. Each step flips exactly k distinct uniformly random bits and \
                 keeps the offspring iff its fitness is >= the parent's.",
                n - gap,
                n + gap,
                n - gap
            )
        }
        ProblemKind::Nk => {
            let k = problem.nk.as_ref().map(|i| i.k_epistasis).unwrap_or(0);
            format!(
                "The optimizer maximizes a rugged epistatic landscape over bitstrings of length \
                 {n}: fitness is a sum of {n} per-position contributions, each depending on the \
                 position's bit and {k} neighbour bits through random lookup tables in [0,1). \
                 No closed-form transition model exists; rely on the empirical table. Each step \
                 flips exactly k distinct uniformly random bits and keeps the offspring iff its \
                 fitness is >= the parent's."
            )
        }
    }
}

/// The language contract included in every prompt.
pub const WMDL_CONTRACT: &str = r#"Respond with one fenced code block tagged `wmdl` containing a complete model:

    model <name>
    constants { <name> = <number>; ... }              # optional
    tables { <name> = [ (f_lo, f_hi, k, p, df), ... ]; }   # optional inline data
    actions {
      when <guard over state> -> [<k values, expressions, or lo .. hi ranges>];
      ...
      when true -> [...];                             # required default rule
    }
    transition { p = <expr>; gain = <expr>; }         # P(improve) and mean gain per improvement
    evaluate { <expr over the predicted state> }      # higher is better
    terminal { <boolean expr> }

State variables: n, fitness, norm_fitness, stagnation, step, budget, and (inside
transition/evaluate) the action k. Operators: + - * / ^, comparisons, and/or/not,
if <cond> then <a> else <b>. Builtins: choose(n, k); hyper(zeros, n, k, j) for the
hypergeometric pmf and hyper(zeros, n, k, j_lo, j_hi) for an interval of it;
min, max, floor, abs, exp, ln; table_p(<table>, fitness, k) and
table_df(<table>, fitness, k) for nearest-bin lookups into a tables entry.
The planner picks argmax_k evaluate(predict(state, k)); predicted fitness is
fitness + max(0, p * gain)."#;

/// Render the spec as a deterministic markdown document.
pub fn build_prompt(spec: &PromptSpec) -> Result<String> {
    spec.validate()?;
    let mut out = String::new();
    out.push_str("# Optimizer world-model synthesis\n\n");
    if matches!(spec.mode, PromptMode::Math | PromptMode::Both) {
        out.push_str("## Problem\n\n");
        out.push_str(&spec.problem_text);
        out.push_str("\n\n");
    }
    out.push_str("## Sampled transitions\n\n");
    if spec.transitions.is_empty() {
        out.push_str("(no samples)\n\n");
    } else {
        out.push_str("```\n   t      f0    k      f1  acc  stag\n");
        for r in &spec.transitions {
            out.push_str(&format!(
                "{:>4}  {:>6.2} {:>4}  {:>6.2}  {:>3}  {:>4}\n",
                r.t,
                r.f0,
                r.k,
                r.f1,
                if r.acc { "yes" } else { "no" },
                r.stag
            ));
        }
        out.push_str("```\n\n");
    }
    if matches!(spec.mode, PromptMode::Empirical | PromptMode::Both) {
        let table = spec.table.as_ref().expect("validated");
        out.push_str("## Empirical transition table\n\n```\nfitness        k  P(impr)  mean_df\n");
        for cell in &table.cells {
            out.push_str(&format!(
                "[{:>3}, {:>3})  {:>4}    {:>5.3}   {:>+6.3}\n",
                table.bins[cell.bin], table.bins[cell.bin + 1], cell.k, cell.p, cell.df
            ));
        }
        out.push_str("```\n\nUse this table in the transition section.\n");
        out.push_str("At low fitness, large k helps. At high fitness, only small k works.\n\n");
    }
    out.push_str("## World-model language\n\n");
    out.push_str(WMDL_CONTRACT);
    out.push_str("\n\n## Instructions\n\nEmit only the fenced `wmdl` block.\n");
    if let Some(budget) = spec.token_budget_hint {
        out.push_str(&format!("Keep the response under roughly {budget} tokens.\n"));
    }
    Ok(out)
}

/// FNV-1a, used as the cache key for prompts (not cryptographic).
pub fn prompt_hash(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

// --- model validation -------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ValidationMetrics {
    pub structural_ok: bool,
    pub issues: Vec<String>,
    /// Rank correlation of the model's action ranking against the oracle
    /// (analytic where one exists, held-out empirical otherwise).
    pub tau_vs_reference: f64,
    /// Fraction of populated held-out cells whose predicted drift sign
    /// matches the empirical sign.
    pub sign_agreement: f64,
}

impl ValidationMetrics {
    /// Acceptance rule for the refinement loop.
    pub fn accepted(&self) -> bool {
        self.structural_ok && self.sign_agreement >= 0.6
    }
}

/// Structural checks plus quantitative agreement against held-out data.
///
/// The held-out split is the last 20% of episodes per policy in the dataset.
pub fn validate_model(
    program: &WmProgram,
    heldout: &Dataset,
    problem: &Problem,
    budget: u64,
) -> Result<ValidationMetrics> {
    if heldout.trajectories.is_empty() {
        return Err(Error::Param("held-out dataset is empty".into()));
    }
    let mut issues = Vec::new();
    let model = bind_program(program.clone(), problem, budget);

    // probe the full surface over a grid of states and actions
    let max_f = heldout
        .records()
        .map(|r| r.f1)
        .fold(problem.optimum_scale(), f64::max);
    let probe_levels: Vec<f64> = (0..=10).map(|i| max_f * i as f64 / 10.0).collect();
    'probe: for &fitness in &probe_levels {
        for stagnation in [0u64, 200] {
            let state = WmState { fitness, step: 1, stagnation };
            let actions = match model.actions(&state) {
                Ok(a) if a.is_empty() => {
                    issues.push(format!("empty action list at fitness {fitness}"));
                    continue;
                }
                Ok(a) => a,
                Err(e) => {
                    issues.push(format!("actions failed at fitness {fitness}: {e}"));
                    break 'probe;
                }
            };
            if let Err(e) = model.terminal(&state) {
                issues.push(format!("terminal failed at fitness {fitness}: {e}"));
                break 'probe;
            }
            for k in actions {
                match model.predict(&state, k) {
                    Ok(p) => {
                        if let Err(e) = model.evaluate(&p, k) {
                            issues.push(format!("evaluate failed at fitness {fitness} k={k}: {e}"));
                            break 'probe;
                        }
                    }
                    Err(e) => {
                        issues.push(format!("predict failed at fitness {fitness} k={k}: {e}"));
                        break 'probe;
                    }
                }
            }
        }
    }
    let structural_ok = issues.is_empty();

    // held-out empirical table for sign agreement
    let edges = crate::data::default_bin_edges(max_f);
    let grid = crate::data::campaign_k_grid(problem.n);
    let table = crate::data::build_table(heldout, &edges, &grid)?;
    // Sign agreement over cells with observed improvement: under elitism the
    // empirical mean delta is never negative, so zero-drift cells carry no
    // sign information and would let a constant model through.
    let mut signs_checked = 0usize;
    let mut signs_matched = 0usize;
    if structural_ok {
        for cell in &table.cells {
            if cell.df <= 1e-9 {
                continue;
            }
            let level = 0.5 * (table.bins[cell.bin] + table.bins[cell.bin + 1]);
            let state = WmState { fitness: level, step: 1, stagnation: 0 };
            let Ok(pred) = model.predict(&state, cell.k) else { continue };
            let model_drift = pred.expected_fitness - level;
            signs_checked += 1;
            if model_drift > 1e-9 {
                signs_matched += 1;
            }
        }
    }
    let sign_agreement = if signs_checked == 0 {
        0.0
    } else {
        signs_matched as f64 / signs_checked as f64
    };

    let tau = if !structural_ok {
        0.0
    } else {
        let oracle = match problem.kind {
            ProblemKind::LeadingOnes => {
                Some(OracleRanking::Analytic(crate::combinatorics::DriftModel::LeadingOnes))
            }
            ProblemKind::OneMax => {
                Some(OracleRanking::Analytic(crate::combinatorics::DriftModel::OneMax))
            }
            ProblemKind::Jump => Some(OracleRanking::Analytic(
                crate::combinatorics::DriftModel::Jump { gap: problem.jump_gap.unwrap() },
            )),
            ProblemKind::Nk => None,
        };
        let (oracle, levels) = match &oracle {
            Some(o) => (o, crate::eval::default_levels(problem)),
            None => (
                &OracleRanking::Empirical(&table),
                table
                    .bins
                    .windows(2)
                    .map(|w| 0.5 * (w[0] + w[1]))
                    .collect::<Vec<f64>>(),
            ),
        };
        match policy_correlation(&model, oracle, problem, &levels) {
            Ok(report) => report.kendall_tau,
            Err(_) => 0.0,
        }
    };

    Ok(ValidationMetrics {
        structural_ok,
        issues,
        tau_vs_reference: tau,
        sign_agreement,
    })
}

/// Last 20% of episodes per policy.
pub fn heldout_split(dataset: &Dataset) -> (Dataset, Dataset) {
    let mut train = Dataset { meta: dataset.meta.clone(), trajectories: Vec::new() };
    let mut heldout = Dataset { meta: dataset.meta.clone(), trajectories: Vec::new() };
    for policy in &dataset.meta.roster {
        let of_policy: Vec<_> = dataset
            .trajectories
            .iter()
            .filter(|t| &t.policy == policy)
            .cloned()
            .collect();
        let cut = of_policy.len() - of_policy.len() / 5;
        for (i, t) in of_policy.into_iter().enumerate() {
            if i < cut {
                train.trajectories.push(t);
            } else {
                heldout.trajectories.push(t);
            }
        }
    }
    (train, heldout)
}

// --- the synthesis loop -------------------------------------------------------

/// Where responses come from: a live HTTP endpoint (configured through
/// LLM_ENDPOINT / LLM_API_KEY / LLM_MODEL_ID) or a canned fixture for offline
/// runs and tests.
pub enum Endpoint {
    Http {
        url: String,
        api_key: String,
        model_id: String,
        max_tokens: u32,
    },
    /// Responses consumed in order; attempts beyond the last entry fail.
    Fixture(Vec<String>),
}

impl Endpoint {
    pub fn from_env() -> Result<Self> {
        let url = std::env::var("LLM_ENDPOINT")
            .map_err(|_| Error::Config("LLM_ENDPOINT is not set (or use an offline fixture)".into()))?;
        let api_key = std::env::var("LLM_API_KEY").unwrap_or_default();
        let model_id = std::env::var("LLM_MODEL_ID")
            .map_err(|_| Error::Config("LLM_MODEL_ID is not set".into()))?;
        Ok(Endpoint::Http { url, api_key, model_id, max_tokens: 4000 })
    }

    pub fn fixture_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Endpoint::Fixture(serde_json::from_str(&text)?))
    }
}

#[derive(Debug, Serialize)]
struct LlmRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct LlmResponse {
    text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub prompt_hash: String,
    pub response: String,
    pub diagnostics: Vec<String>,
    pub metrics: Option<ValidationMetrics>,
}

#[derive(Serialize)]
pub struct SynthesisReport {
    pub attempts: Vec<Attempt>,
    #[serde(skip)]
    pub accepted: Option<WmProgram>,
    pub accepted_text: Option<String>,
}

/// Extract the first fenced code block (preferring ```wmdl) from a response.
pub fn extract_block(response: &str) -> Option<String> {
    for tag in ["```wmdl", "```"] {
        if let Some(start) = response.find(tag) {
            let body_start = start + tag.len();
            let body = &response[body_start..];
            let body = body.strip_prefix('\n').unwrap_or(body);
            if let Some(end) = body.find("```") {
                return Some(body[..end].to_string());
            }
        }
    }
    None
}

fn call_endpoint(
    endpoint: &mut Endpoint,
    prompt: &str,
    attempt: usize,
    cache_dir: Option<&Path>,
) -> Result<String> {
    let key = prompt_hash(prompt);
    if let Some(dir) = cache_dir {
        let path = dir.join(format!("{key}.txt"));
        if path.exists() {
            return Ok(std::fs::read_to_string(path)?);
        }
    }
    let text = match endpoint {
        Endpoint::Fixture(responses) => responses
            .get(attempt)
            .cloned()
            .ok_or_else(|| Error::Synthesis(format!("fixture exhausted at attempt {attempt}")))?,
        Endpoint::Http { url, api_key, model_id, max_tokens } => {
            let request = LlmRequest { model: model_id, prompt, max_tokens: *max_tokens };
            let mut call = ureq::post(url).set("content-type", "application/json");
            if !api_key.is_empty() {
                call = call.set("authorization", &format!("Bearer {api_key}"));
            }
            let body = call
                .send_string(&serde_json::to_string(&request)?)
                .map_err(|e| Error::Synthesis(format!("endpoint call failed: {e}")))?
                .into_string()
                .map_err(|e| Error::Synthesis(format!("unreadable endpoint response: {e}")))?;
            let response: LlmResponse = serde_json::from_str(&body)
                .map_err(|e| Error::Synthesis(format!("malformed endpoint response: {e}")))?;
            response.text
        }
    };
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{key}.txt")), &text)?;
    }
    Ok(text)
}

/// Up to [`MAX_ATTEMPTS`] rounds of prompt -> response -> parse -> validate;
/// diagnostics from a failed attempt are appended to the retry prompt.
pub fn synthesize(
    spec: &PromptSpec,
    endpoint: &mut Endpoint,
    heldout: &Dataset,
    problem: &Problem,
    budget: u64,
    cache_dir: Option<&Path>,
) -> Result<SynthesisReport> {
    let base_prompt = build_prompt(spec)?;
    let mut report = SynthesisReport { attempts: Vec::new(), accepted: None, accepted_text: None };
    let mut feedback: Option<String> = None;
    for attempt in 0..MAX_ATTEMPTS {
        let prompt = match &feedback {
            None => base_prompt.clone(),
            Some(diag) => format!(
                "{base_prompt}\n## Previous attempt failed\n\n{diag}\n\nRegenerate the complete model.\n"
            ),
        };
        let hash = prompt_hash(&prompt);
        let response = match call_endpoint(endpoint, &prompt, attempt, cache_dir) {
            Ok(r) => r,
            Err(e) => {
                let message = e.to_string();
                report.attempts.push(Attempt {
                    prompt_hash: hash,
                    response: String::new(),
                    diagnostics: vec![message.clone()],
                    metrics: None,
                });
                feedback = Some(message);
                continue;
            }
        };
        let mut diagnostics = Vec::new();
        let mut metrics = None;
        let mut accepted = None;
        match extract_block(&response) {
            None => diagnostics.push("no fenced code block found in the response".into()),
            Some(block) => match parse_wmdl(&block) {
                Err(parse_diags) => diagnostics.push(render_diagnostics(&parse_diags)),
                Ok(program) => {
                    let m = validate_model(&program, heldout, problem, budget)?;
                    if m.accepted() {
                        accepted = Some((program, block));
                    } else {
                        diagnostics.push(format!(
                            "validation rejected the model: structural_ok={} sign_agreement={:.3} (needs >= 0.6); issues: {}",
                            m.structural_ok,
                            m.sign_agreement,
                            m.issues.join("; ")
                        ));
                    }
                    metrics = Some(m);
                }
            },
        }
        report.attempts.push(Attempt {
            prompt_hash: hash,
            response,
            diagnostics: diagnostics.clone(),
            metrics,
        });
        if let Some((program, text)) = accepted {
            report.accepted = Some(program);
            report.accepted_text = Some(text);
            return Ok(report);
        }
        feedback = Some(diagnostics.join("\n"));
    }
    Ok(report)
}
