//! Tokenizer for world-model source text. Tracks line/column for diagnostics.

use super::Diagnostic;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    // punctuation
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Assign,
    Arrow,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Num(v) => write!(f, "number {v:?}"),
            Tok::LBrace => write!(f, "'{{'"),
            Tok::RBrace => write!(f, "'}}'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Comma => write!(f, "','"),
            Tok::Semi => write!(f, "';'"),
            Tok::Assign => write!(f, "'='"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::DotDot => write!(f, "'..'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Caret => write!(f, "'^'"),
            Tok::Lt => write!(f, "'<'"),
            Tok::Le => write!(f, "'<='"),
            Tok::Gt => write!(f, "'>'"),
            Tok::Ge => write!(f, "'>='"),
            Tok::EqEq => write!(f, "'=='"),
            Tok::Ne => write!(f, "'!='"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Token { tok: $tok, span: Span { line, col } });
            i += $len;
            col += $len as u32;
        }};
    }
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '{' => push!(Tok::LBrace, 1),
            '}' => push!(Tok::RBrace, 1),
            '[' => push!(Tok::LBracket, 1),
            ']' => push!(Tok::RBracket, 1),
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            ',' => push!(Tok::Comma, 1),
            ';' => push!(Tok::Semi, 1),
            '+' => push!(Tok::Plus, 1),
            '*' => push!(Tok::Star, 1),
            '/' => push!(Tok::Slash, 1),
            '^' => push!(Tok::Caret, 1),
            '-' => {
                if bytes.get(i + 1) == Some(&'>') {
                    push!(Tok::Arrow, 2);
                } else {
                    push!(Tok::Minus, 1);
                }
            }
            '.' => {
                if bytes.get(i + 1) == Some(&'.') {
                    push!(Tok::DotDot, 2);
                } else {
                    return Err(Diagnostic {
                        line,
                        col,
                        message: "unexpected '.'".into(),
                    });
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::EqEq, 2);
                } else {
                    push!(Tok::Assign, 1);
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Le, 2);
                } else {
                    push!(Tok::Lt, 1);
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ge, 2);
                } else {
                    push!(Tok::Gt, 1);
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push!(Tok::Ne, 2);
                } else {
                    return Err(Diagnostic {
                        line,
                        col,
                        message: "unexpected '!' (use 'not' for negation)".into(),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                let start_col = col;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                // fractional part, but not the start of a '..' range
                if i < bytes.len() && bytes[i] == '.' && bytes.get(i + 1) != Some(&'.') {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let value: f64 = text.parse().map_err(|_| Diagnostic {
                    line,
                    col: start_col,
                    message: format!("malformed number '{text}'"),
                })?;
                col += (i - start) as u32;
                out.push(Token {
                    tok: Tok::Num(value),
                    span: Span { line, col: start_col },
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let start_col = col;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                col += (i - start) as u32;
                out.push(Token {
                    tok: Tok::Ident(text),
                    span: Span { line, col: start_col },
                });
            }
            other => {
                return Err(Diagnostic {
                    line,
                    col,
                    message: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_spans() {
        let toks = lex("a >= 2.5 -> [1 .. n] # comment\nfoo").unwrap();
        assert_eq!(toks.len(), 11, "ten tokens plus Eof");
        assert_eq!(toks[0].tok, Tok::Ident("a".into()));
        assert_eq!(toks[1].tok, Tok::Ge);
        assert_eq!(toks[2].tok, Tok::Num(2.5));
        assert_eq!(toks[3].tok, Tok::Arrow);
        assert_eq!(toks[9].tok, Tok::Ident("foo".into()));
        assert_eq!(toks[9].span, Span { line: 2, col: 1 });
    }

    #[test]
    fn range_after_integer() {
        let toks = lex("[1..5]").unwrap();
        assert_eq!(toks[1].tok, Tok::Num(1.0));
        assert_eq!(toks[2].tok, Tok::DotDot);
        assert_eq!(toks[3].tok, Tok::Num(5.0));
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(lex("a ? b").is_err());
        assert!(lex("a ! b").is_err());
    }
}
