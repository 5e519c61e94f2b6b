//! World-model program representation.

pub use super::lexer::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// State variables every program may reference. In `evaluate`, `fitness` and
/// `norm_fitness` refer to the predicted values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateVar {
    N,
    Fitness,
    NormFitness,
    Stagnation,
    Step,
    Budget,
    K,
}

impl StateVar {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "n" => StateVar::N,
            "fitness" => StateVar::Fitness,
            "norm_fitness" => StateVar::NormFitness,
            "stagnation" => StateVar::Stagnation,
            "step" => StateVar::Step,
            "budget" => StateVar::Budget,
            "k" => StateVar::K,
            _ => return None,
        })
    }
}

/// Identifier resolution, filled in by the bind pass after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    State(StateVar),
    Const(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Choose,
    Hyper,
    Min,
    Max,
    Floor,
    Abs,
    Exp,
    Ln,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Choose => "choose",
            Builtin::Hyper => "hyper",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Floor => "floor",
            Builtin::Abs => "abs",
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "choose" => Builtin::Choose,
            "hyper" => Builtin::Hyper,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "floor" => Builtin::Floor,
            "abs" => Builtin::Abs,
            "exp" => Builtin::Exp,
            "ln" => Builtin::Ln,
            _ => return None,
        })
    }

    /// Allowed argument counts. `hyper` has a pmf form (zeros, n, k, j) and an
    /// interval form (zeros, n, k, j_lo, j_hi).
    pub fn arities(self) -> &'static [usize] {
        match self {
            Builtin::Choose | Builtin::Min | Builtin::Max => &[2],
            Builtin::Hyper => &[4, 5],
            Builtin::Floor | Builtin::Abs | Builtin::Exp | Builtin::Ln => &[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFn {
    P,
    Df,
}

impl TableFn {
    pub fn name(self) -> &'static str {
        match self {
            TableFn::P => "table_p",
            TableFn::Df => "table_df",
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Num(f64),
    Bool(bool),
    Var {
        name: String,
        slot: Slot,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    /// table_p / table_df lookup; `index` resolved by the bind pass.
    Table {
        fun: TableFn,
        table: String,
        index: usize,
        fitness: Box<Expr>,
        k: Box<Expr>,
    },
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Structural equality ignoring spans (round-trip comparisons).
pub fn expr_eq(a: &Expr, b: &Expr) -> bool {
    use ExprKind::*;
    match (&a.kind, &b.kind) {
        (Num(x), Num(y)) => x.to_bits() == y.to_bits(),
        (Bool(x), Bool(y)) => x == y,
        (Var { name: nx, .. }, Var { name: ny, .. }) => nx == ny,
        (Unary(ox, ex), Unary(oy, ey)) => ox == oy && expr_eq(ex, ey),
        (Binary(ox, lx, rx), Binary(oy, ly, ry)) => {
            ox == oy && expr_eq(lx, ly) && expr_eq(rx, ry)
        }
        (If(cx, tx, ex), If(cy, ty, ey)) => expr_eq(cx, cy) && expr_eq(tx, ty) && expr_eq(ex, ey),
        (Call(fx, ax), Call(fy, ay)) => {
            fx == fy && ax.len() == ay.len() && ax.iter().zip(ay).all(|(x, y)| expr_eq(x, y))
        }
        (
            Table { fun: fx, table: tx, fitness: ffx, k: kx, .. },
            Table { fun: fy, table: ty, fitness: ffy, k: ky, .. },
        ) => fx == fy && tx == ty && expr_eq(ffx, ffy) && expr_eq(kx, ky),
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub enum ActionItem {
    Single(Expr),
    Range(Expr, Expr),
}

#[derive(Debug, Clone)]
pub struct ActionRule {
    pub guard: Expr,
    pub items: Vec<ActionItem>,
}

/// Inline empirical row: fitness bin [lo, hi), mutation strength, improvement
/// probability and mean fitness delta.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub lo: f64,
    pub hi: f64,
    pub k: f64,
    pub p: f64,
    pub df: f64,
}

#[derive(Debug, Clone)]
pub struct NamedTable {
    pub name: String,
    pub rows: Vec<TableRow>,
}

/// A parsed and bound world-model program.
#[derive(Debug, Clone)]
pub struct WmProgram {
    pub name: String,
    pub constants: Vec<(String, f64)>,
    pub tables: Vec<NamedTable>,
    pub actions: Vec<ActionRule>,
    pub transition_p: Expr,
    pub transition_gain: Expr,
    pub evaluate: Expr,
    pub terminal: Expr,
}

/// Structural program equality ignoring spans.
pub fn program_eq(a: &WmProgram, b: &WmProgram) -> bool {
    fn item_eq(a: &ActionItem, b: &ActionItem) -> bool {
        match (a, b) {
            (ActionItem::Single(x), ActionItem::Single(y)) => expr_eq(x, y),
            (ActionItem::Range(lx, hx), ActionItem::Range(ly, hy)) => {
                expr_eq(lx, ly) && expr_eq(hx, hy)
            }
            _ => false,
        }
    }
    a.name == b.name
        && a.constants.len() == b.constants.len()
        && a.constants.iter().zip(&b.constants).all(|(x, y)| {
            x.0 == y.0 && x.1.to_bits() == y.1.to_bits()
        })
        && a.tables.len() == b.tables.len()
        && a.tables.iter().zip(&b.tables).all(|(x, y)| {
            x.name == y.name
                && x.rows.len() == y.rows.len()
                && x.rows.iter().zip(&y.rows).all(|(r, s)| {
                    r.lo.to_bits() == s.lo.to_bits()
                        && r.hi.to_bits() == s.hi.to_bits()
                        && r.k.to_bits() == s.k.to_bits()
                        && r.p.to_bits() == s.p.to_bits()
                        && r.df.to_bits() == s.df.to_bits()
                })
        })
        && a.actions.len() == b.actions.len()
        && a.actions.iter().zip(&b.actions).all(|(x, y)| {
            expr_eq(&x.guard, &y.guard)
                && x.items.len() == y.items.len()
                && x.items.iter().zip(&y.items).all(|(i, j)| item_eq(i, j))
        })
        && expr_eq(&a.transition_p, &b.transition_p)
        && expr_eq(&a.transition_gain, &b.transition_gain)
        && expr_eq(&a.evaluate, &b.evaluate)
        && expr_eq(&a.terminal, &b.terminal)
}
