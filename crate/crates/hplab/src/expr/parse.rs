//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | postfix
//! postfix := atom ("^" unary)?          // power is non-associative
//! atom    := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Subtraction and division are desugared to `Add`/`Neg` and `Mul`/`Pow`
//! at parse time. The identifier `i` is the imaginary unit in complex mode
//! and an unknown identifier in real mode; `lap` is accepted only through
//! [`parse_operator`]. Unknown identifiers in call position are rejected;
//! bare identifiers other than `eta`, `t`, and `i` become named parameters.

use super::{EvalMode, Expr, ExprError, Func, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LPar,
    RPar,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number `{x}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LPar => "`(`".into(),
            Tok::RPar => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let c = bytes[pos] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => pos += 1,
            '+' => {
                toks.push((Tok::Plus, pos));
                pos += 1;
            }
            '-' => {
                toks.push((Tok::Minus, pos));
                pos += 1;
            }
            '*' => {
                toks.push((Tok::Star, pos));
                pos += 1;
            }
            '/' => {
                toks.push((Tok::Slash, pos));
                pos += 1;
            }
            '^' => {
                toks.push((Tok::Caret, pos));
                pos += 1;
            }
            '(' => {
                toks.push((Tok::LPar, pos));
                pos += 1;
            }
            ')' => {
                toks.push((Tok::RPar, pos));
                pos += 1;
            }
            ',' => {
                toks.push((Tok::Comma, pos));
                pos += 1;
            }
            '0'..='9' | '.' => {
                let start = pos;
                while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                    pos += 1;
                }
                if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                    let mut probe = pos + 1;
                    if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                        probe += 1;
                    }
                    if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                        pos = probe;
                        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                            pos += 1;
                        }
                    }
                }
                let text = &src[start..pos];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: "a numeric literal".into(),
                    found: format!("`{text}`"),
                })?;
                toks.push((Tok::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = pos;
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                toks.push((Tok::Ident(src[start..pos].to_owned()), start));
            }
            other => {
                return Err(ExprError::Syntax {
                    offset: pos,
                    expected: "a number, identifier, operator, or parenthesis".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    toks.push((Tok::End, src.len()));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    cursor: usize,
    mode: EvalMode,
    allow_lap: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.cursor].0
    }

    fn offset(&self) -> usize {
        self.toks[self.cursor].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.cursor].0.clone();
        if self.cursor + 1 < self.toks.len() {
            self.cursor += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(Expr::add(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    factors.push(Expr::powf(rhs, -1.0));
                }
                _ => break,
            }
        }
        Ok(Expr::mul(factors))
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            let expo = self.exponent()?;
            return Ok(Expr::pow(base, expo));
        }
        Ok(base)
    }

    /// Exponent position: signs and an atom, but no further `^`, keeping
    /// the power operator non-associative (`2^3^2` is a syntax error).
    fn exponent(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::neg(self.exponent()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(Expr::num(x)),
            Tok::LPar => {
                let inner = self.expr()?;
                if !matches!(self.peek(), Tok::RPar) {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                if matches!(self.peek(), Tok::LPar) {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Tok::Comma) {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if !matches!(self.peek(), Tok::RPar) {
                        return Err(self.unexpected("`,` or `)`"));
                    }
                    self.bump();
                    let f = Func::from_name(&name).ok_or_else(|| ExprError::UnknownIdentifier {
                        offset,
                        name: name.clone(),
                    })?;
                    if f == Func::Lap && !self.allow_lap {
                        return Err(ExprError::UnknownIdentifier { offset, name });
                    }
                    if args.len() != f.arity() {
                        return Err(ExprError::Arity {
                            offset,
                            name,
                            expected: f.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Fun(f, args))
                } else {
                    match name.as_str() {
                        "eta" => Ok(Expr::Var(Var::Eta)),
                        "t" => Ok(Expr::Var(Var::T)),
                        "i" => match self.mode {
                            EvalMode::Complex => Ok(Expr::complex(0.0, 1.0)),
                            EvalMode::Real => Err(ExprError::UnknownIdentifier { offset, name }),
                        },
                        _ => Ok(Expr::Param(name)),
                    }
                }
            }
            other => Err(ExprError::Syntax {
                offset,
                expected: "a number, identifier, unary `-`, or `(`".into(),
                found: other.describe(),
            }),
        }
    }
}

fn parse_with(src: &str, mode: EvalMode, allow_lap: bool) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        cursor: 0,
        mode,
        allow_lap,
    };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::End) {
        return Err(p.unexpected("`+`, `-`, `*`, `/`, or end of input"));
    }
    Ok(e)
}

/// Parses a plain expression over `eta`, `t`, and free parameters.
pub fn parse(src: &str, mode: EvalMode) -> Result<Expr, ExprError> {
    parse_with(src, mode, false)
}

/// Parses an operator specification: the plain grammar extended with the
/// field placeholder `u` (an ordinary parameter) and the `lap(.)` function.
pub fn parse_operator(src: &str, mode: EvalMode) -> Result<Expr, ExprError> {
    parse_with(src, mode, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, Bindings, EvalPoint};

    fn eval_real(src: &str, eta: f64, t: f64) -> f64 {
        let e = parse(src, EvalMode::Real).unwrap();
        evaluate(
            &e,
            EvalPoint::new(eta, t).unwrap(),
            &Bindings::new(),
            EvalMode::Real,
        )
        .unwrap()
        .re()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval_real("1 + 2*3", 1.0, 0.0), 7.0);
        assert_eq!(eval_real("(1 + 2)*3", 1.0, 0.0), 9.0);
        assert_eq!(eval_real("2^3", 1.0, 0.0), 8.0);
        assert_eq!(
            eval_real("-2^2", 1.0, 0.0),
            -4.0,
            "unary minus applies to the power"
        );
        assert_eq!(eval_real("2^-2", 1.0, 0.0), 0.25);
        assert_eq!(eval_real("7/2", 1.0, 0.0), 3.5);
        assert_eq!(eval_real("1 - 2 - 3", 1.0, 0.0), -4.0);
    }

    #[test]
    fn power_is_non_associative() {
        let err = parse("2^3^2", EvalMode::Real).unwrap_err();
        match err {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert_eq!(eval_real("2^(3^2)", 1.0, 0.0), 512.0);
        assert_eq!(eval_real("(2^3)^2", 1.0, 0.0), 64.0);
    }

    #[test]
    fn byte_offsets_point_at_the_problem() {
        match parse("sinh(eta) + ", EvalMode::Real).unwrap_err() {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 12),
            other => panic!("unexpected {other:?}"),
        }
        match parse("2 + $", EvalMode::Real).unwrap_err() {
            ExprError::Syntax { offset, found, .. } => {
                assert_eq!(offset, 4);
                assert!(found.contains('$'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_function_is_rejected() {
        match parse("foo(eta)", EvalMode::Real).unwrap_err() {
            ExprError::UnknownIdentifier { name, offset } => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_is_checked() {
        match parse("mlf(0.5)", EvalMode::Real).unwrap_err() {
            ExprError::Arity {
                name,
                expected,
                got,
                ..
            } => {
                assert_eq!(name, "mlf");
                assert_eq!((expected, got), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("sinh(eta, t)", EvalMode::Real).is_err());
    }

    #[test]
    fn imaginary_unit_requires_complex_mode() {
        assert!(matches!(
            parse("i*t", EvalMode::Real).unwrap_err(),
            ExprError::UnknownIdentifier { .. }
        ));
        assert!(parse("i*t", EvalMode::Complex).is_ok());
    }

    #[test]
    fn lap_requires_operator_grammar() {
        assert!(matches!(
            parse("lap(u)", EvalMode::Real).unwrap_err(),
            ExprError::UnknownIdentifier { .. }
        ));
        let op = parse_operator("lap(u^n) - u", EvalMode::Real).unwrap();
        let mut params = Vec::new();
        op.collect_params(&mut params);
        assert_eq!(params, vec!["n".to_string(), "u".into()]);
    }

    #[test]
    fn scientific_notation_and_decimals() {
        assert_eq!(eval_real("1e-3", 1.0, 0.0), 1e-3);
        assert_eq!(eval_real("2.5E2", 1.0, 0.0), 250.0);
        assert_eq!(eval_real("0.125", 1.0, 0.0), 0.125);
    }

    #[test]
    fn unary_minus_on_literals_folds_to_constants() {
        let e = parse("-2", EvalMode::Real).unwrap();
        assert_eq!(e, Expr::num(-2.0));
        let e = parse("eta^-1", EvalMode::Real).unwrap();
        assert!(
            matches!(e, Expr::Pow(..)),
            "negative exponent stays a constant power"
        );
    }
}
