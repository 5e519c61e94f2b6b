//! Online Q-learning baseline: a small fully-connected network trained with
//! experience replay and a periodically synced target copy. The layers,
//! backprop, and optimizer are implemented here (no learning framework) so
//! the finite-difference gradient check exercises the real code path; only
//! the inner matrix multiply is delegated to a GEMM kernel.

use crate::error::{Error, Result};
use crate::num::NetScalar;
use crate::optimizer::{rls_step, KPolicy, Observation, SearchState};
use crate::policy::action_grid;
use crate::problem::{Problem, ProblemKind};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimKind {
    /// Plain stochastic gradient descent.
    Sgd,
    /// Adam (beta1 0.9, beta2 0.999).
    Adam,
}

#[derive(Debug, Clone)]
pub struct DqnConfig {
    pub hidden_sizes: Vec<usize>,
    pub replay_capacity: usize,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub discount: f64,
    pub learning_rate: f64,
    pub optimizer: OptimKind,
    pub batch_size: usize,
    pub warmup_steps: u64,
    /// Gradient updates happen every this many environment steps.
    pub update_period: u64,
    pub training_episodes: u64,
    pub budget: u64,
}

impl DqnConfig {
    pub fn standard(training_episodes: u64, budget: u64) -> Self {
        Self {
            hidden_sizes: vec![128, 128],
            replay_capacity: 50_000,
            target_sync_interval: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            discount: 0.99,
            learning_rate: 1.5e-3,
            optimizer: OptimKind::Sgd,
            batch_size: 64,
            warmup_steps: 1_000,
            update_period: 4,
            training_episodes,
            budget,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::Config("epsilon_end must not exceed epsilon_start".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay capacity below batch size".into()));
        }
        Ok(())
    }

    /// Linear anneal over the first 80% of the planned environment steps
    /// (training_episodes * budget), then flat at epsilon_end.
    pub fn epsilon(&self, env_step: u64) -> f64 {
        let cutoff = 0.8 * (self.training_episodes * self.budget) as f64;
        if cutoff <= 0.0 || env_step as f64 >= cutoff {
            self.epsilon_end
        } else {
            let frac = env_step as f64 / cutoff;
            self.epsilon_start - (self.epsilon_start - self.epsilon_end) * frac
        }
    }
}

// --- network ---------------------------------------------------------------

#[derive(Debug, Clone)]
struct Dense<F> {
    w: Vec<F>, // out x in, row-major
    b: Vec<F>,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone)]
pub struct Network<F> {
    layers: Vec<Dense<F>>,
    pub sizes: Vec<usize>,
}

/// Gradients in the same layout as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    w: Vec<Vec<F>>,
    b: Vec<Vec<F>>,
}

impl<F: NetScalar> Network<F> {
    /// He-uniform init from the given stream; biases start at zero.
    pub fn new(sizes: &[usize], rng: &mut Stream) -> Self {
        assert!(sizes.len() >= 2);
        let mut layers = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| F::lit((rng.unit() * 2.0 - 1.0) * bound))
                .collect();
            layers.push(Dense {
                w,
                b: vec![F::zero(); fan_out],
                rows: fan_out,
                cols: fan_in,
            });
        }
        Self { layers, sizes: sizes.to_vec() }
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Forward pass over a batch (row-major batch x input). Returns all
    /// activations; the last entry is the Q output (no final nonlinearity).
    pub fn forward_batch(&self, input: &[F], batch: usize) -> Vec<Vec<F>> {
        debug_assert_eq!(input.len(), batch * self.input_dim());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let x = activations.last().unwrap();
            let mut y = vec![F::zero(); batch * layer.rows];
            // y[batch x out] = x[batch x in] . w^T[in x out]
            F::gemm(
                batch,
                layer.cols,
                layer.rows,
                F::one(),
                x,
                layer.cols as isize,
                1,
                &layer.w,
                1,
                layer.cols as isize,
                F::zero(),
                &mut y,
                layer.rows as isize,
                1,
            );
            let last = li + 1 == self.layers.len();
            for r in 0..batch {
                for o in 0..layer.rows {
                    let idx = r * layer.rows + o;
                    y[idx] = y[idx] + layer.b[o];
                    if !last && y[idx] < F::zero() {
                        y[idx] = F::zero();
                    }
                }
            }
            activations.push(y);
        }
        activations
    }

    pub fn q_values(&self, features: &[F]) -> Vec<F> {
        self.forward_batch(features, 1).pop().unwrap()
    }

    /// Backprop of dL/dOutput through the ReLU stack; returns parameter
    /// gradients.
    pub fn backward_batch(
        &self,
        activations: &[Vec<F>],
        mut d_out: Vec<F>,
        batch: usize,
    ) -> Gradients<F> {
        let mut gw: Vec<Vec<F>> = self.layers.iter().map(|l| vec![F::zero(); l.w.len()]).collect();
        let mut gb: Vec<Vec<F>> = self.layers.iter().map(|l| vec![F::zero(); l.b.len()]).collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &activations[li];
            // dW[out x in] = dY^T[out x batch] . X[batch x in]
            F::gemm(
                layer.rows,
                batch,
                layer.cols,
                F::one(),
                &d_out,
                1,
                layer.rows as isize,
                x,
                layer.cols as isize,
                1,
                F::zero(),
                &mut gw[li],
                layer.cols as isize,
                1,
            );
            for r in 0..batch {
                for o in 0..layer.rows {
                    gb[li][o] = gb[li][o] + d_out[r * layer.rows + o];
                }
            }
            if li > 0 {
                // dX[batch x in] = dY[batch x out] . W[out x in]
                let mut dx = vec![F::zero(); batch * layer.cols];
                F::gemm(
                    batch,
                    layer.rows,
                    layer.cols,
                    F::one(),
                    &d_out,
                    layer.rows as isize,
                    1,
                    &layer.w,
                    layer.cols as isize,
                    1,
                    F::zero(),
                    &mut dx,
                    layer.cols as isize,
                    1,
                );
                // ReLU gate of the previous activation
                for (dxi, &ai) in dx.iter_mut().zip(activations[li].iter()) {
                    if ai <= F::zero() {
                        *dxi = F::zero();
                    }
                }
                d_out = dx;
            }
        }
        Gradients { w: gw, b: gb }
    }

    pub fn finite_parameters(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn param_mut(&mut self, idx: usize) -> &mut F {
        let mut i = idx;
        for l in self.layers.iter_mut() {
            if i < l.w.len() {
                return &mut l.w[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return &mut l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range");
    }
}

// --- Adam ------------------------------------------------------------------

enum Optimizer<F> {
    Sgd { lr: f64 },
    Adam(Adam<F>),
}

impl<F: NetScalar> Optimizer<F> {
    fn new(net: &Network<F>, kind: OptimKind, lr: f64) -> Self {
        match kind {
            OptimKind::Sgd => Optimizer::Sgd { lr },
            OptimKind::Adam => Optimizer::Adam(Adam::new(net, lr)),
        }
    }

    fn step(&mut self, net: &mut Network<F>, grads: &Gradients<F>) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = F::lit(*lr);
                for (li, layer) in net.layers.iter_mut().enumerate() {
                    for (p, g) in layer.w.iter_mut().zip(&grads.w[li]) {
                        *p = *p - lr * *g;
                    }
                    for (p, g) in layer.b.iter_mut().zip(&grads.b[li]) {
                        *p = *p - lr * *g;
                    }
                }
            }
            Optimizer::Adam(adam) => adam.step(net, grads),
        }
    }
}

struct Adam<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: i32,
    lr: f64,
}

impl<F: NetScalar> Adam<F> {
    fn new(net: &Network<F>, lr: f64) -> Self {
        let shapes: Vec<Vec<F>> = net
            .layers
            .iter()
            .flat_map(|l| [vec![F::zero(); l.w.len()], vec![F::zero(); l.b.len()]])
            .collect();
        Self { m: shapes.clone(), v: shapes, t: 0, lr }
    }

    fn step(&mut self, net: &mut Network<F>, grads: &Gradients<F>) {
        self.t += 1;
        let b1 = F::lit(0.9);
        let b2 = F::lit(0.999);
        let eps = F::lit(1e-8);
        let bc1 = F::lit(1.0 - 0.9f64.powi(self.t));
        let bc2 = F::lit(1.0 - 0.999f64.powi(self.t));
        let lr = F::lit(self.lr);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            for (slot, (params, grad)) in [(&mut layer.w, &grads.w[li]), (&mut layer.b, &grads.b[li])]
                .into_iter()
                .enumerate()
            {
                let state_idx = li * 2 + slot;
                for (i, p) in params.iter_mut().enumerate() {
                    let g = grad[i];
                    let m = &mut self.m[state_idx][i];
                    *m = b1 * *m + (F::one() - b1) * g;
                    let v = &mut self.v[state_idx][i];
                    *v = b2 * *v + (F::one() - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

// --- replay ------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Transition {
    features: [f32; 4],
    action: usize,
    reward: f32,
    next_features: [f32; 4],
    done: bool,
}

/// FIFO ring buffer with uniform sampling.
struct ReplayBuffer {
    buf: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    fn new(capacity: usize) -> Self {
        Self { buf: Vec::with_capacity(capacity.min(1 << 20)), capacity, next: 0 }
    }

    fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    fn len(&self) -> usize {
        self.buf.len()
    }

    fn sample<'a>(&'a self, batch: usize, rng: &mut Stream) -> Vec<&'a Transition> {
        (0..batch).map(|_| &self.buf[rng.below(self.buf.len())]).collect()
    }
}

// --- state encoding -----------------------------------------------------------

/// Four features in [0,1]: normalized fitness, progress, region indicator,
/// saturated stagnation. Region: Jump uses normal/edge/optimum (0, 1/2, 1);
/// other landscapes use the fitness tercile.
pub fn encode_state(
    problem: &Problem,
    fitness: f64,
    step: u64,
    stagnation: u64,
    budget: u64,
) -> [f32; 4] {
    let scale = problem.optimum_scale();
    let region = match problem.kind {
        ProblemKind::Jump => {
            let n = problem.n as f64;
            let gap = problem.jump_gap.unwrap() as f64;
            if fitness >= n + gap {
                2.0
            } else if fitness == n {
                1.0
            } else {
                0.0
            }
        }
        _ => {
            let t = (3.0 * fitness / scale).floor();
            t.clamp(0.0, 2.0)
        }
    };
    let cap = 2 * problem.n as u64;
    [
        (fitness / scale) as f32,
        (step as f64 / budget.max(1) as f64) as f32,
        (region / 2.0) as f32,
        (stagnation.min(cap) as f64 / cap as f64) as f32,
    ]
}

/// Epsilon-greedy action over the grid: explore uniformly with probability
/// epsilon, otherwise argmax Q with ties to the smallest index.
pub fn act<F: NetScalar>(
    net: &Network<F>,
    features: &[f32; 4],
    epsilon: f64,
    grid: &[usize],
    rng: &mut Stream,
) -> usize {
    if epsilon > 0.0 && rng.unit() < epsilon {
        return grid[rng.below(grid.len())];
    }
    let input: Vec<F> = features.iter().map(|&v| F::lit(v as f64)).collect();
    let q = net.q_values(&input);
    let mut best = 0usize;
    for i in 1..q.len() {
        if q[i] > q[best] {
            best = i;
        }
    }
    grid[best]
}

// --- training -------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub steps: u64,
    pub success: bool,
    /// Success rate over the trailing 50 episodes.
    pub rolling_success: f64,
}

pub struct TrainedAgent {
    pub net: Network<f32>,
    pub grid: Vec<usize>,
    pub config: DqnConfig,
    pub log: Vec<EpisodeLog>,
}

struct TdBatch<F> {
    states: Vec<F>,
    actions: Vec<usize>,
    targets: Vec<F>,
}

fn td_targets<F: NetScalar>(
    online: &Network<F>,
    target: &Network<F>,
    samples: &[&Transition],
    discount: f64,
) -> TdBatch<F> {
    let batch = samples.len();
    let dim = online.input_dim();
    let mut next_states = Vec::with_capacity(batch * dim);
    let mut states = Vec::with_capacity(batch * dim);
    for t in samples {
        states.extend(t.features.iter().map(|&v| F::lit(v as f64)));
        next_states.extend(t.next_features.iter().map(|&v| F::lit(v as f64)));
    }
    let q_next = target.forward_batch(&next_states, batch).pop().unwrap();
    let out = target.output_dim();
    let mut targets = Vec::with_capacity(batch);
    for (i, t) in samples.iter().enumerate() {
        let mut max_q = q_next[i * out];
        for a in 1..out {
            if q_next[i * out + a] > max_q {
                max_q = q_next[i * out + a];
            }
        }
        let cont = if t.done { F::zero() } else { F::lit(discount) * max_q };
        targets.push(F::lit(t.reward as f64) + cont);
    }
    TdBatch {
        states,
        actions: samples.iter().map(|t| t.action).collect(),
        targets,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TdLoss {
    /// Plain squared error; the form the finite-difference check verifies.
    Squared,
    /// Huber (smooth-L1, delta = 1): quadratic near zero, linear beyond, so a
    /// single rare high-error sample cannot dominate an update.
    Huber,
}

/// Mean TD loss over the batch and its parameter gradients for frozen
/// targets.
fn td_loss_and_grads<F: NetScalar>(
    net: &Network<F>,
    batch: &TdBatch<F>,
    loss_kind: TdLoss,
) -> (f64, Gradients<F>) {
    let b = batch.actions.len();
    let out = net.output_dim();
    let activations = net.forward_batch(&batch.states, b);
    let q = activations.last().unwrap();
    let mut d_out = vec![F::zero(); b * out];
    let mut loss = 0.0f64;
    let scale = F::lit(1.0 / b as f64);
    for i in 0..b {
        let a = batch.actions[i];
        let err = q[i * out + a] - batch.targets[i];
        let e = err.to_f64x();
        match loss_kind {
            TdLoss::Squared => {
                loss += e * e;
                d_out[i * out + a] = scale * (err + err);
            }
            TdLoss::Huber => {
                if e.abs() <= 1.0 {
                    loss += 0.5 * e * e;
                    d_out[i * out + a] = scale * err;
                } else {
                    loss += e.abs() - 0.5;
                    d_out[i * out + a] = scale * F::lit(e.signum());
                }
            }
        }
    }
    loss /= b as f64;
    let grads = net.backward_batch(&activations, d_out, b);
    (loss, grads)
}

/// Train online on the problem. Deterministic given the training seed: the
/// environment stream for episode e derives from (seed, e) and the agent
/// stream (init, exploration, replay sampling) from the seed's policy
/// substream. Single-threaded by construction.
pub fn train(problem: &Problem, config: &DqnConfig, training_seed: i64) -> Result<TrainedAgent> {
    config.validate()?;
    let grid = action_grid(problem.n);
    let mut sizes = vec![4usize];
    sizes.extend(&config.hidden_sizes);
    sizes.push(grid.len());
    let mut agent_rng = Stream::policy_substream(training_seed);
    let mut online: Network<f32> = Network::new(&sizes, &mut agent_rng);
    let mut target = online.clone();
    let mut optimizer = Optimizer::new(&online, config.optimizer, config.learning_rate);
    let mut replay = ReplayBuffer::new(config.replay_capacity);
    let mut log = Vec::with_capacity(config.training_episodes as usize);
    let mut recent: std::collections::VecDeque<bool> = std::collections::VecDeque::new();
    let mut env_step = 0u64;
    let optimum = problem.optimum();

    for episode in 0..config.training_episodes {
        let mut env_rng = Stream::derive(training_seed, episode);
        let mut state = SearchState::initial(problem, &mut env_rng);
        let mut success = optimum.is_some_and(|o| state.fitness >= o);
        while state.step < config.budget && !success {
            let features =
                encode_state(problem, state.fitness, state.step, state.stagnation, config.budget);
            let eps = config.epsilon(env_step);
            let k = act(&online, &features, eps, &grid, &mut agent_rng);
            let action = grid.iter().position(|&g| g == k).unwrap();
            let before = state.fitness;
            rls_step(&mut state, k, &mut env_rng, problem)?;
            success = optimum.is_some_and(|o| state.fitness >= o);
            let next_features =
                encode_state(problem, state.fitness, state.step, state.stagnation, config.budget);
            replay.push(Transition {
                features,
                action,
                reward: (state.fitness - before) as f32,
                next_features,
                done: success,
            });
            env_step += 1;
            if env_step >= config.warmup_steps
                && env_step.is_multiple_of(config.update_period)
                && replay.len() >= config.batch_size
            {
                let samples = replay.sample(config.batch_size, &mut agent_rng);
                let batch = td_targets(&online, &target, &samples, config.discount);
                let (loss, grads) = td_loss_and_grads(&online, &batch, TdLoss::Huber);
                optimizer.step(&mut online, &grads);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        step: env_step,
                        detail: format!("non-finite TD loss {loss}"),
                    });
                }
            }
            if env_step.is_multiple_of(config.target_sync_interval) {
                if !online.finite_parameters() {
                    return Err(Error::Diverged {
                        step: env_step,
                        detail: "non-finite network parameter".into(),
                    });
                }
                target = online.clone();
            }
        }
        recent.push_back(success);
        if recent.len() > 50 {
            recent.pop_front();
        }
        log.push(EpisodeLog {
            episode,
            steps: state.step,
            success,
            rolling_success: recent.iter().filter(|&&s| s).count() as f64 / recent.len() as f64,
        });
    }
    if !online.finite_parameters() {
        return Err(Error::Diverged { step: env_step, detail: "non-finite network parameter".into() });
    }
    Ok(TrainedAgent { net: online, grid, config: config.clone(), log })
}

// --- gradient check ----------------------------------------------------------

/// Maximum relative error between analytic TD-loss gradients and central
/// finite differences (step 1e-5) over every parameter.
pub fn gradient_check(net: &Network<f64>, samples: &[([f32; 4], usize, f64)]) -> f64 {
    let batch = TdBatch {
        states: samples
            .iter()
            .flat_map(|(f, _, _)| f.iter().map(|&v| v as f64))
            .collect(),
        actions: samples.iter().map(|(_, a, _)| *a).collect(),
        targets: samples.iter().map(|(_, _, y)| *y).collect(),
    };
    let (_, grads) = td_loss_and_grads(net, &batch, TdLoss::Squared);
    let flat: Vec<f64> = grads
        .w
        .iter()
        .zip(&grads.b)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
        .collect();
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    let h = 1e-5;
    for (idx, &analytic) in flat.iter().enumerate() {
        let original = *probe.param_mut(idx);
        *probe.param_mut(idx) = original + h;
        let (loss_plus, _) = td_loss_and_grads(&probe, &batch, TdLoss::Squared);
        *probe.param_mut(idx) = original - h;
        let (loss_minus, _) = td_loss_and_grads(&probe, &batch, TdLoss::Squared);
        *probe.param_mut(idx) = original;
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    debug_assert_eq!(flat.len(), net.param_count());
    worst
}

// --- serialization -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct AgentFile {
    pub sizes: Vec<usize>,
    pub action_grid: Vec<usize>,
    /// Row-major weights then biases, one pair per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub fn save_agent(agent: &TrainedAgent, path: &std::path::Path) -> Result<()> {
    let file = AgentFile {
        sizes: agent.net.sizes.clone(),
        action_grid: agent.grid.clone(),
        weights: agent
            .net
            .layers
            .iter()
            .map(|l| l.w.iter().map(|&v| v as f64).collect())
            .collect(),
        biases: agent
            .net
            .layers
            .iter()
            .map(|l| l.b.iter().map(|&v| v as f64).collect())
            .collect(),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_agent(path: &std::path::Path) -> Result<(Network<f32>, Vec<usize>)> {
    let file: AgentFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut rng = Stream::seed(0);
    let mut net: Network<f32> = Network::new(&file.sizes, &mut rng);
    for (li, layer) in net.layers.iter_mut().enumerate() {
        if file.weights[li].len() != layer.w.len() || file.biases[li].len() != layer.b.len() {
            return Err(Error::Config("agent file layer shapes do not match".into()));
        }
        layer.w = file.weights[li].iter().map(|&v| v as f32).collect();
        layer.b = file.biases[li].iter().map(|&v| v as f32).collect();
    }
    Ok((net, file.action_grid))
}

/// Greedy (epsilon = 0) trained agent as an evaluation policy.
pub struct DqnPolicy {
    net: Network<f32>,
    grid: Vec<usize>,
    problem: Problem,
    budget: u64,
}

impl DqnPolicy {
    pub fn new(net: Network<f32>, grid: Vec<usize>, problem: Problem, budget: u64) -> Self {
        Self { net, grid, problem, budget }
    }
}

impl KPolicy for DqnPolicy {
    fn next_k(&mut self, obs: &Observation) -> Result<usize> {
        let features =
            encode_state(&self.problem, obs.fitness, obs.step, obs.stagnation, self.budget);
        let mut rng = Stream::seed(0); // unused at epsilon = 0
        Ok(act(&self.net, &features, 0.0, &self.grid, &mut rng))
    }
}
