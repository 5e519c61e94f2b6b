//! World-model interpreter: expression evaluation and the
//! predict / actions / evaluate / terminal surface planners consume.

use super::ast::*;
use super::ModelError;
use crate::combinatorics::choose_f64;
use std::sync::atomic::{AtomicU64, Ordering};

/// Optimizer state as seen by a world model.
#[derive(Debug, Clone, Copy)]
pub struct WmState {
    pub fitness: f64,
    pub step: u64,
    pub stagnation: u64,
}

/// Deterministic expectation of the next state under action k.
#[derive(Debug, Clone, Copy)]
pub struct PredictedState {
    pub expected_fitness: f64,
    pub norm_fitness: f64,
    pub p_improve: f64,
    pub step: u64,
    pub stagnation: u64,
}

/// Problem-level bindings the harness supplies when instantiating a program:
/// dimensions, budget, score scale, and constant overrides (e.g. `k_jump`
/// for a Jump problem so one model file generalizes across gaps).
#[derive(Debug, Clone)]
pub struct Binding {
    pub n: usize,
    pub budget: u64,
    pub optimum_scale: f64,
    pub const_overrides: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Num(f64),
    Bool(bool),
}

struct Ctx<'a> {
    n: f64,
    budget: f64,
    fitness: f64,
    norm_fitness: f64,
    stagnation: f64,
    step: f64,
    k: Option<f64>,
    consts: &'a [f64],
    tables: &'a [NamedTable],
}

fn err(span: Span, message: impl Into<String>) -> ModelError {
    ModelError {
        message: message.into(),
        line: span.line,
        col: span.col,
    }
}

fn num(v: Value, span: Span, what: &str) -> Result<f64, ModelError> {
    match v {
        Value::Num(x) => Ok(x),
        Value::Bool(_) => Err(err(span, format!("{what} must be numeric, got a boolean"))),
    }
}

fn boolean(v: Value, span: Span, what: &str) -> Result<bool, ModelError> {
    match v {
        Value::Bool(b) => Ok(b),
        Value::Num(_) => Err(err(span, format!("{what} must be boolean, got a number"))),
    }
}

fn eval(expr: &Expr, ctx: &Ctx) -> Result<Value, ModelError> {
    match &expr.kind {
        ExprKind::Num(v) => Ok(Value::Num(*v)),
        ExprKind::Bool(b) => Ok(Value::Bool(*b)),
        ExprKind::Var { name, slot } => match slot {
            Slot::State(sv) => {
                let v = match sv {
                    StateVar::N => ctx.n,
                    StateVar::Fitness => ctx.fitness,
                    StateVar::NormFitness => ctx.norm_fitness,
                    StateVar::Stagnation => ctx.stagnation,
                    StateVar::Step => ctx.step,
                    StateVar::Budget => ctx.budget,
                    StateVar::K => ctx
                        .k
                        .ok_or_else(|| err(expr.span, "'k' is not bound in this context"))?,
                };
                Ok(Value::Num(v))
            }
            Slot::Const(idx) => ctx
                .consts
                .get(*idx)
                .map(|v| Value::Num(*v))
                .ok_or_else(|| err(expr.span, format!("unbound constant '{name}'"))),
        },
        ExprKind::Unary(op, inner) => {
            let v = eval(inner, ctx)?;
            match op {
                UnaryOp::Neg => Ok(Value::Num(-num(v, inner.span, "operand of '-'")?)),
                UnaryOp::Not => Ok(Value::Bool(!boolean(v, inner.span, "operand of 'not'")?)),
            }
        }
        ExprKind::Binary(op, lhs, rhs) => {
            use BinOp::*;
            match op {
                And => {
                    let l = boolean(eval(lhs, ctx)?, lhs.span, "operand of 'and'")?;
                    if !l {
                        return Ok(Value::Bool(false));
                    }
                    Ok(Value::Bool(boolean(eval(rhs, ctx)?, rhs.span, "operand of 'and'")?))
                }
                Or => {
                    let l = boolean(eval(lhs, ctx)?, lhs.span, "operand of 'or'")?;
                    if l {
                        return Ok(Value::Bool(true));
                    }
                    Ok(Value::Bool(boolean(eval(rhs, ctx)?, rhs.span, "operand of 'or'")?))
                }
                _ => {
                    let l = num(eval(lhs, ctx)?, lhs.span, "left operand")?;
                    let r = num(eval(rhs, ctx)?, rhs.span, "right operand")?;
                    let v = match op {
                        Add => Value::Num(l + r),
                        Sub => Value::Num(l - r),
                        Mul => Value::Num(l * r),
                        Div => {
                            if r == 0.0 {
                                return Err(err(expr.span, "division by zero"));
                            }
                            Value::Num(l / r)
                        }
                        Pow => {
                            let v = l.powf(r);
                            if !v.is_finite() {
                                return Err(err(expr.span, format!("non-finite result of {l} ^ {r}")));
                            }
                            Value::Num(v)
                        }
                        Lt => Value::Bool(l < r),
                        Le => Value::Bool(l <= r),
                        Gt => Value::Bool(l > r),
                        Ge => Value::Bool(l >= r),
                        Eq => Value::Bool(l == r),
                        Ne => Value::Bool(l != r),
                        And | Or => unreachable!(),
                    };
                    Ok(v)
                }
            }
        }
        ExprKind::If(cond, then, alt) => {
            if boolean(eval(cond, ctx)?, cond.span, "if condition")? {
                eval(then, ctx)
            } else {
                eval(alt, ctx)
            }
        }
        ExprKind::Call(builtin, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(num(eval(a, ctx)?, a.span, "builtin argument")?);
            }
            let v = match builtin {
                Builtin::Choose => choose_f64(vals[0].floor() as i64, vals[1].floor() as i64),
                Builtin::Hyper => {
                    let z = vals[0].floor() as i64;
                    let n = vals[1].floor() as i64;
                    let k = vals[2].floor() as i64;
                    if vals.len() == 4 {
                        hyper_total(z, n, k, vals[3].floor() as i64, vals[3].floor() as i64)
                    } else {
                        hyper_total(z, n, k, vals[3].floor() as i64, vals[4].floor() as i64)
                    }
                }
                Builtin::Min => vals[0].min(vals[1]),
                Builtin::Max => vals[0].max(vals[1]),
                Builtin::Floor => vals[0].floor(),
                Builtin::Abs => vals[0].abs(),
                Builtin::Exp => vals[0].exp(),
                Builtin::Ln => {
                    if vals[0] <= 0.0 {
                        return Err(err(expr.span, format!("ln of non-positive value {}", vals[0])));
                    }
                    vals[0].ln()
                }
            };
            Ok(Value::Num(v))
        }
        ExprKind::Table { fun, table, index, fitness, k, .. } => {
            let f = num(eval(fitness, ctx)?, fitness.span, "table fitness")?;
            let kv = num(eval(k, ctx)?, k.span, "table k")?;
            let t = ctx
                .tables
                .get(*index)
                .ok_or_else(|| err(expr.span, format!("unbound table '{table}'")))?;
            Ok(Value::Num(table_lookup(t, f, kv, *fun)))
        }
    }
}

/// Hypergeometric probability mass over j in [j_lo, j_hi], total: any
/// out-of-domain input contributes zero rather than an error. k = 0 is a
/// valid degenerate draw (all mass at j = 0) so partial-mean identities that
/// recurse to one draw fewer stay exact.
fn hyper_total(zeros: i64, n: i64, k: i64, j_lo: i64, j_hi: i64) -> f64 {
    if zeros < 0 || n < 1 || zeros > n || k < 0 || k > n {
        return 0.0;
    }
    let den = choose_f64(n, k);
    let lo = j_lo.max(0);
    let hi = j_hi.min(k);
    let mut acc = 0.0;
    for j in lo..=hi {
        acc += choose_f64(zeros, j) * choose_f64(n - zeros, k - j);
    }
    acc / den
}

/// Nearest-bin, nearest-k lookup; clamped and total by construction.
/// Empty tables yield 0.
fn table_lookup(table: &NamedTable, fitness: f64, k: f64, fun: TableFn) -> f64 {
    let mut best: Option<(f64, f64, f64, &TableRow)> = None;
    for row in &table.rows {
        let bin_dist = if fitness >= row.lo && fitness < row.hi {
            0.0
        } else if fitness < row.lo {
            row.lo - fitness
        } else {
            fitness - row.hi
        };
        let k_dist = (row.k - k).abs();
        let candidate = (bin_dist, k_dist, row.k, row);
        let better = match &best {
            None => true,
            Some((bd, kd, bk, _)) => {
                (bin_dist, k_dist, row.k) < (*bd, *kd, *bk)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    match best {
        Some((_, _, _, row)) => match fun {
            TableFn::P => row.p,
            TableFn::Df => row.df,
        },
        None => 0.0,
    }
}

/// A program bound to a problem context, ready for planning. Counts model
/// calls (one per `predict`) for the planner cost accounting.
pub struct BoundModel {
    program: WmProgram,
    consts: Vec<f64>,
    n: usize,
    budget: u64,
    scale: f64,
    calls: AtomicU64,
}

impl BoundModel {
    pub fn new(program: WmProgram, binding: &Binding) -> Self {
        let consts = program
            .constants
            .iter()
            .map(|(name, default)| {
                binding
                    .const_overrides
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
                    .unwrap_or(*default)
            })
            .collect();
        Self {
            program,
            consts,
            n: binding.n,
            budget: binding.budget,
            scale: binding.optimum_scale,
            calls: AtomicU64::new(0),
        }
    }

    pub fn program(&self) -> &WmProgram {
        &self.program
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn model_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    fn state_ctx(&self, state: &WmState) -> Ctx<'_> {
        Ctx {
            n: self.n as f64,
            budget: self.budget as f64,
            fitness: state.fitness,
            norm_fitness: state.fitness / self.scale,
            stagnation: state.stagnation as f64,
            step: state.step as f64,
            k: None,
            consts: &self.consts,
            tables: &self.program.tables,
        }
    }

    /// Legal actions: the first rule whose guard holds supplies the list;
    /// duplicates removed preserving order, values clamped to [1, n].
    pub fn actions(&self, state: &WmState) -> Result<Vec<usize>, ModelError> {
        let ctx = self.state_ctx(state);
        for rule in &self.program.actions {
            if boolean(eval(&rule.guard, &ctx)?, rule.guard.span, "actions guard")? {
                let mut out: Vec<usize> = Vec::new();
                for item in &rule.items {
                    match item {
                        ActionItem::Single(e) => {
                            let v = num(eval(e, &ctx)?, e.span, "action")?;
                            push_action(&mut out, v, self.n);
                        }
                        ActionItem::Range(lo, hi) => {
                            let lo = num(eval(lo, &ctx)?, lo.span, "range start")?;
                            let hi = num(eval(hi, &ctx)?, hi.span, "range end")?;
                            let lo = round_k(lo).max(1);
                            let hi = round_k(hi).min(self.n as i64);
                            for k in lo..=hi {
                                if !out.contains(&(k as usize)) {
                                    out.push(k as usize);
                                }
                            }
                        }
                    }
                }
                return Ok(out);
            }
        }
        Err(ModelError {
            message: "no actions rule matched".into(),
            line: 0,
            col: 0,
        })
    }

    /// Expected next state under action k: expected_fitness = fitness +
    /// max(0, p * gain); the stagnation counter is modelled as resetting when
    /// improvement is more likely than not.
    pub fn predict(&self, state: &WmState, k: usize) -> Result<PredictedState, ModelError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut ctx = self.state_ctx(state);
        ctx.k = Some(k as f64);
        let p = num(
            eval(&self.program.transition_p, &ctx)?,
            self.program.transition_p.span,
            "transition p",
        )?;
        let gain = num(
            eval(&self.program.transition_gain, &ctx)?,
            self.program.transition_gain.span,
            "transition gain",
        )?;
        let expected_fitness = state.fitness + (p * gain).max(0.0);
        Ok(PredictedState {
            expected_fitness,
            norm_fitness: expected_fitness / self.scale,
            p_improve: p,
            step: state.step + 1,
            stagnation: if p < 0.5 { state.stagnation + 1 } else { 0 },
        })
    }

    /// Score a predicted state; higher is better.
    pub fn evaluate(&self, predicted: &PredictedState, k: usize) -> Result<f64, ModelError> {
        let ctx = Ctx {
            n: self.n as f64,
            budget: self.budget as f64,
            fitness: predicted.expected_fitness,
            norm_fitness: predicted.norm_fitness,
            stagnation: predicted.stagnation as f64,
            step: predicted.step as f64,
            k: Some(k as f64),
            consts: &self.consts,
            tables: &self.program.tables,
        };
        num(
            eval(&self.program.evaluate, &ctx)?,
            self.program.evaluate.span,
            "evaluate",
        )
    }

    pub fn terminal(&self, state: &WmState) -> Result<bool, ModelError> {
        let ctx = self.state_ctx(state);
        boolean(
            eval(&self.program.terminal, &ctx)?,
            self.program.terminal.span,
            "terminal",
        )
    }
}

fn round_k(v: f64) -> i64 {
    // nearest, half away from zero
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        (v - 0.5).ceil() as i64
    }
}

fn push_action(out: &mut Vec<usize>, value: f64, n: usize) {
    let k = round_k(value).clamp(1, n as i64) as usize;
    if !out.contains(&k) {
        out.push(k);
    }
}
