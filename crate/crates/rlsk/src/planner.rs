//! Turns a world model into a per-step decision: greedy one-step lookahead,
//! plus a minimal UCT planner over the deterministic expectation tree for the
//! overhead comparison.

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::wmdl::{BoundModel, WmState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerMode {
    Greedy,
    Mcts,
}

#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub mode: PlannerMode,
    pub mcts_iterations: u32,
    pub mcts_exploration_c: f64,
    pub mcts_max_depth: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            mode: PlannerMode::Greedy,
            mcts_iterations: 5000,
            mcts_exploration_c: std::f64::consts::SQRT_2,
            mcts_max_depth: 3,
        }
    }
}

/// One-step lookahead: evaluate every legal action once (one predict + one
/// evaluate each) and return the argmax, ties toward the smaller k.
pub fn greedy_select(model: &BoundModel, state: &WmState) -> Result<usize> {
    let actions = model.actions(state)?;
    if actions.is_empty() {
        return Err(Error::Config("world model returned no legal actions".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for &k in &actions {
        let predicted = model.predict(state, k).map_err(|e| annotate(e, k))?;
        let score = model.evaluate(&predicted, k).map_err(|e| annotate(e, k))?;
        let better = match best {
            None => true,
            Some((bk, bs)) => score > bs || (score == bs && k < bk),
        };
        if better {
            best = Some((k, score));
        }
    }
    Ok(best.expect("nonempty actions").0)
}

fn annotate(e: crate::wmdl::ModelError, k: usize) -> Error {
    Error::Model(crate::wmdl::ModelError {
        message: format!("{} (while scoring k={k})", e.message),
        line: e.line,
        col: e.col,
    })
}

struct Node {
    state: WmState,
    actions: Vec<usize>,
    untried: Vec<usize>,
    /// (action, child node index, visits, total value)
    children: Vec<(usize, usize, u32, f64)>,
    visits: u32,
}

/// UCT over the deterministic expectation tree. The model is an expectation
/// (one child per action), so this exists to reproduce the cost/no-benefit
/// comparison against greedy, not to outperform it.
pub fn mcts_select(
    model: &BoundModel,
    state: &WmState,
    config: &PlannerConfig,
    rng: &mut Stream,
) -> Result<usize> {
    let root_actions = model.actions(state)?;
    if root_actions.is_empty() {
        return Err(Error::Config("world model returned no legal actions".into()));
    }
    if root_actions.len() == 1 {
        return Ok(root_actions[0]);
    }
    let mut nodes = vec![Node {
        state: *state,
        actions: root_actions.clone(),
        untried: root_actions,
        children: Vec::new(),
        visits: 0,
    }];

    for _ in 0..config.mcts_iterations {
        // selection
        let mut path: Vec<(usize, usize)> = Vec::new(); // (node, child slot)
        let mut node_id = 0usize;
        let mut depth = 0u32;
        loop {
            if depth >= config.mcts_max_depth
                || model.terminal(&nodes[node_id].state)?
                || !nodes[node_id].untried.is_empty()
                || nodes[node_id].children.is_empty()
            {
                break;
            }
            let node = &nodes[node_id];
            let ln_n = (node.visits.max(1) as f64).ln();
            let mut best = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for (slot, (_, _, visits, total)) in node.children.iter().enumerate() {
                let mean = total / *visits as f64;
                let score = mean + config.mcts_exploration_c * (ln_n / *visits as f64).sqrt();
                if score > best_score {
                    best_score = score;
                    best = slot;
                }
            }
            path.push((node_id, best));
            node_id = node.children[best].1;
            depth += 1;
        }

        // expansion + rollout value
        let value = if depth < config.mcts_max_depth
            && !model.terminal(&nodes[node_id].state)?
            && !nodes[node_id].untried.is_empty()
        {
            let pick = rng.below(nodes[node_id].untried.len());
            let k = nodes[node_id].untried.swap_remove(pick);
            let parent_state = nodes[node_id].state;
            let predicted = model.predict(&parent_state, k)?;
            let mut value = model.evaluate(&predicted, k)?;
            let child_state = WmState {
                fitness: predicted.expected_fitness,
                step: predicted.step,
                stagnation: predicted.stagnation,
            };
            let child_id = nodes.len();
            nodes.push(Node {
                state: child_state,
                actions: Vec::new(),
                untried: Vec::new(),
                children: Vec::new(),
                visits: 0,
            });
            // populate child's action lists lazily on first visit
            if depth + 1 < config.mcts_max_depth && !model.terminal(&child_state)? {
                let acts = model.actions(&child_state)?;
                let child = &mut nodes[child_id];
                child.actions = acts.clone();
                child.untried = acts;
            }
            nodes[node_id].children.push((k, child_id, 0, 0.0));
            path.push((node_id, nodes[node_id].children.len() - 1));

            // rollout: repeated greedy one-step lookahead to the depth cap
            let mut rollout_state = child_state;
            let mut rollout_depth = depth + 1;
            while rollout_depth < config.mcts_max_depth && !model.terminal(&rollout_state)? {
                let k = greedy_select(model, &rollout_state)?;
                let predicted = model.predict(&rollout_state, k)?;
                value = model.evaluate(&predicted, k)?;
                rollout_state = WmState {
                    fitness: predicted.expected_fitness,
                    step: predicted.step,
                    stagnation: predicted.stagnation,
                };
                rollout_depth += 1;
            }
            value
        } else {
            // re-evaluate the leaf through its incoming edge
            match path.last() {
                Some(&(parent, slot)) => {
                    let (k, _, _, _) = nodes[parent].children[slot];
                    let predicted = model.predict(&nodes[parent].state, k)?;
                    model.evaluate(&predicted, k)?
                }
                None => 0.0,
            }
        };

        // backup
        nodes[node_id].visits += 1;
        for (node, slot) in path {
            nodes[node].visits += 1;
            let child = &mut nodes[node].children[slot];
            child.2 += 1;
            child.3 += value;
        }
    }

    // most-visited root action, ties toward the smaller k
    let root = &nodes[0];
    let mut best_k = root.actions[0];
    let mut best_visits = 0u32;
    for &(k, _, visits, _) in &root.children {
        if visits > best_visits || (visits == best_visits && k < best_k) {
            best_visits = visits;
            best_k = k;
        }
    }
    Ok(best_k)
}
