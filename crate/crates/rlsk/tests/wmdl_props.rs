//! Property test: any well-formed program survives pretty-print -> reparse
//! with an identical AST.

use proptest::prelude::*;
use rlsk::wmdl::{
    parse_wmdl, pretty_print, program_eq, ActionItem, ActionRule, BinOp, Builtin, Expr, ExprKind,
    NamedTable, Span, TableFn, TableRow, UnaryOp, WmProgram,
};

fn expr(kind: ExprKind) -> Expr {
    Expr { kind, span: Span::default() }
}

#[derive(Clone, Copy)]
struct Scope {
    n_consts: usize,
    n_tables: usize,
    allow_k: bool,
}

fn leaf(scope: Scope) -> BoxedStrategy<Expr> {
    let mut vars = vec!["n", "fitness", "norm_fitness", "stagnation", "step", "budget"];
    if scope.allow_k {
        vars.push("k");
    }
    let var = proptest::sample::select(vars).prop_map(|name| {
        expr(ExprKind::Var {
            name: name.to_string(),
            slot: rlsk::wmdl::Slot::State(rlsk::wmdl::StateVar::N),
        })
    });
    let consts = if scope.n_consts > 0 {
        Some((0..scope.n_consts).prop_map(|i| {
            expr(ExprKind::Var {
                name: format!("c{i}"),
                slot: rlsk::wmdl::Slot::State(rlsk::wmdl::StateVar::N),
            })
        }))
    } else {
        None
    };
    // non-negative finite literals only: a negative literal prints as a
    // unary minus and would reparse as Neg(Num)
    let num = prop_oneof![
        (0u32..1000).prop_map(|v| expr(ExprKind::Num(v as f64))),
        (0u64..u64::MAX).prop_map(|bits| {
            let v = f64::from_bits(bits).abs();
            let v = if v.is_finite() { v } else { 1.5 };
            expr(ExprKind::Num(v))
        }),
    ];
    let boolean = any::<bool>().prop_map(|b| expr(ExprKind::Bool(b)));
    match consts {
        Some(c) => prop_oneof![num, boolean, var, c].boxed(),
        None => prop_oneof![num, boolean, var].boxed(),
    }
}

fn arb_expr(scope: Scope, depth: u32) -> BoxedStrategy<Expr> {
    leaf(scope)
        .prop_recursive(depth, 64, 4, move |inner| {
            let binop = proptest::sample::select(vec![
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Div,
                BinOp::Pow,
                BinOp::Lt,
                BinOp::Le,
                BinOp::Gt,
                BinOp::Ge,
                BinOp::Eq,
                BinOp::Ne,
                BinOp::And,
                BinOp::Or,
            ]);
            let unary = proptest::sample::select(vec![UnaryOp::Neg, UnaryOp::Not]);
            let call = proptest::sample::select(vec![
                Builtin::Choose,
                Builtin::Hyper,
                Builtin::Min,
                Builtin::Max,
                Builtin::Floor,
                Builtin::Abs,
                Builtin::Exp,
                Builtin::Ln,
            ]);
            let table_call = if scope.n_tables > 0 {
                Some((
                    0..scope.n_tables,
                    proptest::sample::select(vec![TableFn::P, TableFn::Df]),
                    inner.clone(),
                    inner.clone(),
                ))
            } else {
                None
            };
            let base = prop_oneof![
                (binop, inner.clone(), inner.clone()).prop_map(|(op, a, b)| expr(
                    ExprKind::Binary(op, Box::new(a), Box::new(b))
                )),
                (unary, inner.clone()).prop_map(|(op, a)| expr(ExprKind::Unary(
                    op,
                    Box::new(a)
                ))),
                (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| expr(
                    ExprKind::If(Box::new(c), Box::new(t), Box::new(e))
                )),
                (call, proptest::collection::vec(inner.clone(), 5)).prop_map(|(f, args)| {
                    let arity = f.arities()[0];
                    expr(ExprKind::Call(f, args.into_iter().take(arity).collect()))
                }),
            ];
            match table_call {
                Some(t) => prop_oneof![
                    base,
                    t.prop_map(|(idx, fun, f, k)| expr(ExprKind::Table {
                        fun,
                        table: format!("t{idx}"),
                        index: usize::MAX,
                        fitness: Box::new(f),
                        k: Box::new(k),
                    }))
                ]
                .boxed(),
                None => base.boxed(),
            }
        })
        .boxed()
}

fn arb_program() -> impl Strategy<Value = WmProgram> {
    let consts = proptest::collection::vec(-1e6f64..1e6f64, 0..3);
    let tables = proptest::collection::vec(
        proptest::collection::vec(
            (-100.0f64..100.0, 0.0f64..10.0, 1u32..50, 0.0f64..1.0, -5.0f64..5.0),
            0..4,
        ),
        0..2,
    );
    (consts, tables).prop_flat_map(|(consts, tables)| {
        let scope_state = Scope {
            n_consts: consts.len(),
            n_tables: tables.len(),
            allow_k: false,
        };
        let scope_action = scope_state;
        let scope_transition = Scope { allow_k: true, ..scope_state };
        let constants: Vec<(String, f64)> = consts
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("c{i}"), *v))
            .collect();
        let named_tables: Vec<NamedTable> = tables
            .iter()
            .enumerate()
            .map(|(i, rows)| NamedTable {
                name: format!("t{i}"),
                rows: rows
                    .iter()
                    .map(|(lo, width, k, p, df)| TableRow {
                        lo: *lo,
                        hi: lo + width,
                        k: *k as f64,
                        p: *p,
                        df: *df,
                    })
                    .collect(),
            })
            .collect();
        let item = prop_oneof![
            arb_expr(scope_action, 3).prop_map(ActionItem::Single),
            (arb_expr(scope_action, 2), arb_expr(scope_action, 2))
                .prop_map(|(lo, hi)| ActionItem::Range(lo, hi)),
        ];
        let guarded_rule = (arb_expr(scope_action, 3), proptest::collection::vec(item, 1..4))
            .prop_map(|(guard, items)| ActionRule { guard, items });
        let default_items = prop_oneof![
            arb_expr(scope_action, 3).prop_map(ActionItem::Single),
            (arb_expr(scope_action, 2), arb_expr(scope_action, 2))
                .prop_map(|(lo, hi)| ActionItem::Range(lo, hi)),
        ];
        let default_rule = proptest::collection::vec(default_items, 1..4).prop_map(|items| {
            ActionRule { guard: expr(ExprKind::Bool(true)), items }
        });
        (
            proptest::collection::vec(guarded_rule, 0..3),
            default_rule,
            arb_expr(scope_transition, 4),
            arb_expr(scope_transition, 4),
            arb_expr(scope_transition, 3),
            arb_expr(scope_state, 3),
        )
            .prop_map(
                move |(mut rules, default, p, gain, evaluate, terminal)| {
                    rules.push(default);
                    WmProgram {
                        name: "generated".into(),
                        constants: constants.clone(),
                        tables: named_tables.clone(),
                        actions: rules,
                        transition_p: p,
                        transition_gain: gain,
                        evaluate,
                        terminal,
                    }
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pretty_print_round_trips(program in arb_program()) {
        let text = pretty_print(&program);
        let reparsed = parse_wmdl(&text)
            .unwrap_or_else(|d| panic!("reparse failed: {d:?}\n--- printed ---\n{text}"));
        prop_assert!(
            program_eq(&program, &reparsed),
            "AST changed through print/parse:\n{text}"
        );
        // and printing the reparse is a fixed point
        prop_assert_eq!(text, pretty_print(&reparsed));
    }
}
