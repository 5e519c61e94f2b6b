//! Recursive-descent parser and the identifier bind pass.

use super::ast::*;
use super::lexer::{lex, Span, Tok, Token};
use super::Diagnostic;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let span = self.span();
        Err(Diagnostic {
            line: span.line,
            col: span.col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {tok}, found {}", self.peek()))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    /// Signed numeric literal (constants and table rows only).
    fn literal(&mut self) -> PResult<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            other => self.err(format!("expected numeric literal, found {other}")),
        }
    }

    // --- expressions (precedence climbing) ---

    fn expr(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Ident("if".into()) {
            let span = self.span();
            self.bump();
            let cond = self.expr()?;
            self.expect(Tok::Ident("then".into()))?;
            let then = self.expr()?;
            self.expect(Tok::Ident("else".into()))?;
            let alt = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::If(Box::new(cond), Box::new(then), Box::new(alt)),
                span,
            });
        }
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::Ident("or".into()) {
            let span = self.span();
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == Tok::Ident("and".into()) {
            let span = self.span();
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Ident("not".into()) {
            let span = self.span();
            self.bump();
            let inner = self.not_expr()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Not, Box::new(inner)),
                span,
            });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(lhs),
        };
        let span = self.span();
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Expr {
            kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        })
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            let span = self.span();
            self.bump();
            let inner = self.unary_expr()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Neg, Box::new(inner)),
                span,
            });
        }
        self.pow_expr()
    }

    fn pow_expr(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            let span = self.span();
            self.bump();
            // right-associative; exponent may carry a unary minus
            let exp = self.unary_expr()?;
            return Ok(Expr {
                kind: ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)),
                span,
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Num(v), span })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "true" => return Ok(Expr { kind: ExprKind::Bool(true), span }),
                    "false" => return Ok(Expr { kind: ExprKind::Bool(false), span }),
                    _ => {}
                }
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            // table lookups take a table name as first argument
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    self.call(name, args, span)
                } else {
                    Ok(Expr {
                        kind: ExprKind::Var {
                            name,
                            slot: Slot::State(StateVar::N), // placeholder until bind
                        },
                        span,
                    })
                }
            }
            other => self.err(format!("expected expression, found {other}")),
        }
    }

    fn call(&mut self, name: String, mut args: Vec<Expr>, span: Span) -> PResult<Expr> {
        if name == "table_p" || name == "table_df" {
            let fun = if name == "table_p" { TableFn::P } else { TableFn::Df };
            if args.len() != 3 {
                return Err(Diagnostic {
                    line: span.line,
                    col: span.col,
                    message: format!("{name} expects (table, fitness, k), got {} args", args.len()),
                });
            }
            let k = args.pop().unwrap();
            let fitness = args.pop().unwrap();
            let table = match args.pop().unwrap().kind {
                ExprKind::Var { name, .. } => name,
                _ => {
                    return Err(Diagnostic {
                        line: span.line,
                        col: span.col,
                        message: format!("first argument of {name} must be a table name"),
                    })
                }
            };
            return Ok(Expr {
                kind: ExprKind::Table {
                    fun,
                    table,
                    index: usize::MAX,
                    fitness: Box::new(fitness),
                    k: Box::new(k),
                },
                span,
            });
        }
        match Builtin::from_name(&name) {
            Some(builtin) => {
                if !builtin.arities().contains(&args.len()) {
                    return Err(Diagnostic {
                        line: span.line,
                        col: span.col,
                        message: format!(
                            "{name} expects {:?} arguments, got {}",
                            builtin.arities(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr { kind: ExprKind::Call(builtin, args), span })
            }
            None => Err(Diagnostic {
                line: span.line,
                col: span.col,
                message: format!("unknown function '{name}'"),
            }),
        }
    }

    // --- sections ---

    fn program(&mut self) -> PResult<RawProgram> {
        self.expect(Tok::Ident("model".into()))?;
        let name = self.expect_ident()?;
        let mut raw = RawProgram {
            name,
            ..RawProgram::default()
        };
        while *self.peek() != Tok::Eof {
            let span = self.span();
            let section = self.expect_ident()?;
            match section.as_str() {
                "constants" => {
                    if raw.constants.is_some() {
                        return dup(span, "constants");
                    }
                    self.expect(Tok::LBrace)?;
                    let mut consts = Vec::new();
                    while *self.peek() != Tok::RBrace {
                        let name = self.expect_ident()?;
                        self.expect(Tok::Assign)?;
                        let value = self.literal()?;
                        self.expect(Tok::Semi)?;
                        consts.push((name, value));
                    }
                    self.bump();
                    raw.constants = Some(consts);
                }
                "tables" => {
                    if raw.tables.is_some() {
                        return dup(span, "tables");
                    }
                    self.expect(Tok::LBrace)?;
                    let mut tables = Vec::new();
                    while *self.peek() != Tok::RBrace {
                        tables.push(self.table()?);
                    }
                    self.bump();
                    raw.tables = Some(tables);
                }
                "actions" => {
                    if raw.actions.is_some() {
                        return dup(span, "actions");
                    }
                    self.expect(Tok::LBrace)?;
                    let mut rules = Vec::new();
                    while *self.peek() != Tok::RBrace {
                        self.expect(Tok::Ident("when".into()))?;
                        let guard = self.expr()?;
                        self.expect(Tok::Arrow)?;
                        self.expect(Tok::LBracket)?;
                        let mut items = Vec::new();
                        loop {
                            let first = self.expr()?;
                            if *self.peek() == Tok::DotDot {
                                self.bump();
                                let hi = self.expr()?;
                                items.push(ActionItem::Range(first, hi));
                            } else {
                                items.push(ActionItem::Single(first));
                            }
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                        self.expect(Tok::RBracket)?;
                        self.expect(Tok::Semi)?;
                        rules.push(ActionRule { guard, items });
                    }
                    self.bump();
                    raw.actions = Some(rules);
                }
                "transition" => {
                    if raw.transition.is_some() {
                        return dup(span, "transition");
                    }
                    self.expect(Tok::LBrace)?;
                    self.expect(Tok::Ident("p".into()))?;
                    self.expect(Tok::Assign)?;
                    let p = self.expr()?;
                    self.expect(Tok::Semi)?;
                    self.expect(Tok::Ident("gain".into()))?;
                    self.expect(Tok::Assign)?;
                    let gain = self.expr()?;
                    self.expect(Tok::Semi)?;
                    self.expect(Tok::RBrace)?;
                    raw.transition = Some((p, gain));
                }
                "evaluate" => {
                    if raw.evaluate.is_some() {
                        return dup(span, "evaluate");
                    }
                    self.expect(Tok::LBrace)?;
                    let e = self.expr()?;
                    self.expect(Tok::RBrace)?;
                    raw.evaluate = Some(e);
                }
                "terminal" => {
                    if raw.terminal.is_some() {
                        return dup(span, "terminal");
                    }
                    self.expect(Tok::LBrace)?;
                    let e = self.expr()?;
                    self.expect(Tok::RBrace)?;
                    raw.terminal = Some(e);
                }
                other => {
                    return Err(Diagnostic {
                        line: span.line,
                        col: span.col,
                        message: format!("unknown section '{other}'"),
                    })
                }
            }
        }
        Ok(raw)
    }

    fn table(&mut self) -> PResult<NamedTable> {
        let name = self.expect_ident()?;
        self.expect(Tok::Assign)?;
        self.expect(Tok::LBracket)?;
        let mut rows = Vec::new();
        while *self.peek() != Tok::RBracket {
            self.expect(Tok::LParen)?;
            let lo = self.literal()?;
            self.expect(Tok::Comma)?;
            let hi = self.literal()?;
            self.expect(Tok::Comma)?;
            let k = self.literal()?;
            self.expect(Tok::Comma)?;
            let p = self.literal()?;
            self.expect(Tok::Comma)?;
            let df = self.literal()?;
            self.expect(Tok::RParen)?;
            rows.push(TableRow { lo, hi, k, p, df });
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        self.bump();
        self.expect(Tok::Semi)?;
        Ok(NamedTable { name, rows })
    }
}

fn dup<T>(span: Span, section: &str) -> PResult<T> {
    Err(Diagnostic {
        line: span.line,
        col: span.col,
        message: format!("duplicate section '{section}'"),
    })
}

#[derive(Default)]
struct RawProgram {
    name: String,
    constants: Option<Vec<(String, f64)>>,
    tables: Option<Vec<NamedTable>>,
    actions: Option<Vec<ActionRule>>,
    transition: Option<(Expr, Expr)>,
    evaluate: Option<Expr>,
    terminal: Option<Expr>,
}

/// Where an expression lives; controls which state variables are in scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Guard,
    ActionItem,
    Transition,
    Evaluate,
    Terminal,
}

impl Section {
    fn allows_k(self) -> bool {
        matches!(self, Section::Transition | Section::Evaluate)
    }

    fn name(self) -> &'static str {
        match self {
            Section::Guard => "actions guard",
            Section::ActionItem => "actions list",
            Section::Transition => "transition",
            Section::Evaluate => "evaluate",
            Section::Terminal => "terminal",
        }
    }
}

struct Binder<'a> {
    constants: &'a [(String, f64)],
    tables: &'a [NamedTable],
    diagnostics: Vec<Diagnostic>,
}

impl Binder<'_> {
    fn bind(&mut self, expr: &mut Expr, section: Section) {
        match &mut expr.kind {
            ExprKind::Num(_) | ExprKind::Bool(_) => {}
            ExprKind::Var { name, slot } => {
                if let Some(sv) = StateVar::from_name(name) {
                    if sv == StateVar::K && !section.allows_k() {
                        self.diagnostics.push(Diagnostic {
                            line: expr.span.line,
                            col: expr.span.col,
                            message: format!("'k' is not available in a {}", section.name()),
                        });
                    }
                    *slot = Slot::State(sv);
                } else if let Some(idx) =
                    self.constants.iter().position(|(n, _)| n == name)
                {
                    *slot = Slot::Const(idx);
                } else {
                    self.diagnostics.push(Diagnostic {
                        line: expr.span.line,
                        col: expr.span.col,
                        message: format!("unknown identifier '{name}'"),
                    });
                }
            }
            ExprKind::Unary(_, inner) => self.bind(inner, section),
            ExprKind::Binary(_, lhs, rhs) => {
                self.bind(lhs, section);
                self.bind(rhs, section);
            }
            ExprKind::If(c, t, e) => {
                self.bind(c, section);
                self.bind(t, section);
                self.bind(e, section);
            }
            ExprKind::Call(_, args) => {
                for a in args {
                    self.bind(a, section);
                }
            }
            ExprKind::Table { table, index, fitness, k, .. } => {
                match self.tables.iter().position(|t| &t.name == table) {
                    Some(i) => *index = i,
                    None => self.diagnostics.push(Diagnostic {
                        line: expr.span.line,
                        col: expr.span.col,
                        message: format!("unknown table '{table}'"),
                    }),
                }
                self.bind(fitness, section);
                self.bind(k, section);
            }
        }
    }
}

/// Parse world-model source into a bound program, or a list of diagnostics.
pub fn parse_wmdl(src: &str) -> Result<WmProgram, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut parser = Parser { toks, pos: 0 };
    let raw = parser.program().map_err(|d| vec![d])?;

    let mut diagnostics = Vec::new();
    let constants = raw.constants.unwrap_or_default();
    let tables = raw.tables.unwrap_or_default();
    for (i, (name, _)) in constants.iter().enumerate() {
        if StateVar::from_name(name).is_some() {
            diagnostics.push(Diagnostic {
                line: 1,
                col: 1,
                message: format!("constant '{name}' shadows a state variable"),
            });
        }
        if constants[..i].iter().any(|(n, _)| n == name) {
            diagnostics.push(Diagnostic {
                line: 1,
                col: 1,
                message: format!("duplicate constant '{name}'"),
            });
        }
    }
    for (i, t) in tables.iter().enumerate() {
        if tables[..i].iter().any(|u| u.name == t.name) {
            diagnostics.push(Diagnostic {
                line: 1,
                col: 1,
                message: format!("duplicate table '{}'", t.name),
            });
        }
    }
    for section in ["actions", "transition", "evaluate", "terminal"] {
        let missing = match section {
            "actions" => raw.actions.is_none(),
            "transition" => raw.transition.is_none(),
            "evaluate" => raw.evaluate.is_none(),
            _ => raw.terminal.is_none(),
        };
        if missing {
            diagnostics.push(Diagnostic {
                line: 1,
                col: 1,
                message: format!("missing required section '{section}'"),
            });
        }
    }
    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }

    let mut actions = raw.actions.unwrap();
    let (mut transition_p, mut transition_gain) = raw.transition.unwrap();
    let mut evaluate = raw.evaluate.unwrap();
    let mut terminal = raw.terminal.unwrap();

    // the last rule must be the unguarded default
    match actions.last() {
        Some(rule) if matches!(rule.guard.kind, ExprKind::Bool(true)) => {}
        Some(rule) => diagnostics.push(Diagnostic {
            line: rule.guard.span.line,
            col: rule.guard.span.col,
            message: "the last actions rule must have guard 'true'".into(),
        }),
        None => diagnostics.push(Diagnostic {
            line: 1,
            col: 1,
            message: "actions section needs at least one rule".into(),
        }),
    }

    {
        let mut binder = Binder {
            constants: &constants,
            tables: &tables,
            diagnostics: Vec::new(),
        };
        for rule in &mut actions {
            binder.bind(&mut rule.guard, Section::Guard);
            for item in &mut rule.items {
                match item {
                    ActionItem::Single(e) => binder.bind(e, Section::ActionItem),
                    ActionItem::Range(lo, hi) => {
                        binder.bind(lo, Section::ActionItem);
                        binder.bind(hi, Section::ActionItem);
                    }
                }
            }
        }
        binder.bind(&mut transition_p, Section::Transition);
        binder.bind(&mut transition_gain, Section::Transition);
        binder.bind(&mut evaluate, Section::Evaluate);
        binder.bind(&mut terminal, Section::Terminal);
        diagnostics.extend(binder.diagnostics);
    }

    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }

    Ok(WmProgram {
        name: raw.name,
        constants,
        tables,
        actions,
        transition_p,
        transition_gain,
        evaluate,
        terminal,
    })
}
