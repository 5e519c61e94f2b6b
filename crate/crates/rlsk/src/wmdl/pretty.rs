//! Canonical formatter. `parse(pretty_print(p))` is AST-identical to `p`;
//! numeric literals use the shortest lossless representation.

use super::ast::*;

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

// Precedence levels for minimal parenthesization. Higher binds tighter.
const PREC_IF: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_CMP: u8 = 4;
const PREC_ADD: u8 = 5;
const PREC_MUL: u8 = 6;
const PREC_NEG: u8 = 7;
const PREC_POW: u8 = 8;
const PREC_ATOM: u8 = 9;

fn op_prec(op: BinOp) -> u8 {
    use BinOp::*;
    match op {
        Or => PREC_OR,
        And => PREC_AND,
        Lt | Le | Gt | Ge | Eq | Ne => PREC_CMP,
        Add | Sub => PREC_ADD,
        Mul | Div => PREC_MUL,
        Pow => PREC_POW,
    }
}

fn write_expr(out: &mut String, expr: &Expr, min_prec: u8) {
    let prec = match &expr.kind {
        ExprKind::If(..) => PREC_IF,
        ExprKind::Binary(op, ..) => op_prec(*op),
        ExprKind::Unary(UnaryOp::Not, _) => PREC_NOT,
        ExprKind::Unary(UnaryOp::Neg, _) => PREC_NEG,
        _ => PREC_ATOM,
    };
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match &expr.kind {
        ExprKind::Num(v) => out.push_str(&fmt_num(*v)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Var { name, .. } => out.push_str(name),
        ExprKind::Unary(UnaryOp::Neg, inner) => {
            out.push('-');
            write_expr(out, inner, PREC_NEG);
        }
        ExprKind::Unary(UnaryOp::Not, inner) => {
            out.push_str("not ");
            write_expr(out, inner, PREC_NOT);
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let p = op_prec(*op);
            // left-associative except pow; comparisons do not chain
            let (lp, rp) = match op {
                BinOp::Pow => (PREC_ATOM, PREC_NEG),
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => {
                    (p + 1, p + 1)
                }
                _ => (p, p + 1),
            };
            write_expr(out, lhs, lp);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(out, rhs, rp);
        }
        ExprKind::If(cond, then, alt) => {
            out.push_str("if ");
            write_expr(out, cond, PREC_OR);
            out.push_str(" then ");
            write_expr(out, then, PREC_IF);
            out.push_str(" else ");
            write_expr(out, alt, PREC_IF);
        }
        ExprKind::Call(builtin, args) => {
            out.push_str(builtin.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, PREC_IF);
            }
            out.push(')');
        }
        ExprKind::Table { fun, table, fitness, k, .. } => {
            out.push_str(fun.name());
            out.push('(');
            out.push_str(table);
            out.push_str(", ");
            write_expr(out, fitness, PREC_IF);
            out.push_str(", ");
            write_expr(out, k, PREC_IF);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

pub fn expr_to_string(expr: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, expr, PREC_IF);
    s
}

/// Canonical text form of a program.
pub fn pretty_print(program: &WmProgram) -> String {
    let mut out = String::new();
    out.push_str("model ");
    out.push_str(&program.name);
    out.push('\n');

    if !program.constants.is_empty() {
        out.push_str("\nconstants {\n");
        for (name, value) in &program.constants {
            out.push_str(&format!("  {name} = {};\n", fmt_num(*value)));
        }
        out.push_str("}\n");
    }

    if !program.tables.is_empty() {
        out.push_str("\ntables {\n");
        for table in &program.tables {
            out.push_str(&format!("  {} = [\n", table.name));
            for row in &table.rows {
                out.push_str(&format!(
                    "    ({}, {}, {}, {}, {}),\n",
                    fmt_num(row.lo),
                    fmt_num(row.hi),
                    fmt_num(row.k),
                    fmt_num(row.p),
                    fmt_num(row.df)
                ));
            }
            out.push_str("  ];\n");
        }
        out.push_str("}\n");
    }

    out.push_str("\nactions {\n");
    for rule in &program.actions {
        out.push_str("  when ");
        out.push_str(&expr_to_string(&rule.guard));
        out.push_str(" -> [");
        for (i, item) in rule.items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            match item {
                ActionItem::Single(e) => out.push_str(&expr_to_string(e)),
                ActionItem::Range(lo, hi) => {
                    // range endpoints sit above '..'; compounds get parens
                    let mut s = String::new();
                    write_expr(&mut s, lo, PREC_ADD);
                    s.push_str(" .. ");
                    write_expr(&mut s, hi, PREC_ADD);
                    out.push_str(&s);
                }
            }
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");

    out.push_str("\ntransition {\n  p = ");
    out.push_str(&expr_to_string(&program.transition_p));
    out.push_str(";\n  gain = ");
    out.push_str(&expr_to_string(&program.transition_gain));
    out.push_str(";\n}\n");

    out.push_str("\nevaluate {\n  ");
    out.push_str(&expr_to_string(&program.evaluate));
    out.push_str("\n}\n");

    out.push_str("\nterminal {\n  ");
    out.push_str(&expr_to_string(&program.terminal));
    out.push_str("\n}\n");

    out
}
