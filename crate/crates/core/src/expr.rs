//! Scalar coefficient expressions: parsing and evaluation.
//!
//! Coefficients like p(x), h(t,x) or initial data arrive as text in config
//! files. The grammar is a small recursive-descent parser over real literals,
//! the variables `x` and `t`, the binary operators `+ - * / ^` (with `^`
//! right-associative and binding tighter than unary minus), unary minus and
//! the functions `sin cos exp log abs sqrt min max`.
//!
//! Expressions are immutable after parsing and evaluation is pure, so values
//! can be shared freely across threads.

use std::fmt;

use thiserror::Error;

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    T,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::T => write!(f, "t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions. `Min` and `Max` take two arguments, the rest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

/// Parsed abstract syntax tree of a coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    Var(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("expression is empty")]
    Empty,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Variable bindings for evaluation. `t` is optional; evaluating an
/// expression that mentions `t` without a binding is an error.
#[derive(Debug, Clone, Copy)]
pub struct Bindings {
    pub x: f64,
    pub t: Option<f64>,
}

impl Bindings {
    pub fn x_only(x: f64) -> Self {
        Bindings { x, t: None }
    }

    pub fn xt(x: f64, t: f64) -> Self {
        Bindings { x, t: Some(t) }
    }
}

impl Expression {
    /// Parse an expression from source text.
    pub fn parse(src: &str) -> Result<Expression, ParseError> {
        if src.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expression()?;
        match parser.peek() {
            Token::End => Ok(expr),
            tok => Err(ParseError::Syntax {
                position: parser.position(),
                message: format!("unexpected `{}`", tok),
            }),
        }
    }

    /// Evaluate at the given bindings. Deterministic: identical bindings
    /// produce bit-identical results.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        let v = match self {
            Expression::Literal(c) => *c,
            Expression::Var(Var::X) => b.x,
            Expression::Var(Var::T) => b.t.ok_or(EvalError::Unbound(Var::T))?,
            Expression::Neg(e) => -e.eval(b)?,
            Expression::Binary(op, lhs, rhs) => {
                let l = lhs.eval(b)?;
                let r = rhs.eval(b)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::Domain(format!("division of {l} by zero")));
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        // Negative base with a non-integer exponent would
                        // produce NaN silently; reject it instead.
                        if l < 0.0 && r.fract() != 0.0 {
                            return Err(EvalError::Domain(format!(
                                "{l}^{r}: negative base with non-integer exponent"
                            )));
                        }
                        l.powf(r)
                    }
                }
            }
            Expression::Call(func, args) => {
                let a0 = args[0].eval(b)?;
                match func {
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Exp => a0.exp(),
                    Func::Log => {
                        if a0 <= 0.0 {
                            return Err(EvalError::Domain(format!("log of nonpositive {a0}")));
                        }
                        a0.ln()
                    }
                    Func::Abs => a0.abs(),
                    Func::Sqrt => {
                        if a0 < 0.0 {
                            return Err(EvalError::Domain(format!("sqrt of negative {a0}")));
                        }
                        a0.sqrt()
                    }
                    Func::Min => a0.min(args[1].eval(b)?),
                    Func::Max => a0.max(args[1].eval(b)?),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain(format!("non-finite result {v}")))
        }
    }

    /// Evaluate with only `x` bound.
    pub fn eval_x(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(&Bindings::x_only(x))
    }

    /// Evaluate with both `x` and `t` bound.
    pub fn eval_xt(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        self.eval(&Bindings::xt(x, t))
    }

    /// Whether the expression references the time variable `t`.
    pub fn uses_t(&self) -> bool {
        match self {
            Expression::Literal(_) => false,
            Expression::Var(v) => *v == Var::T,
            Expression::Neg(e) => e.uses_t(),
            Expression::Binary(_, l, r) => l.uses_t() || r.uses_t(),
            Expression::Call(_, args) => args.iter().any(|a| a.uses_t()),
        }
    }
}

// Pretty-printing emits fully parenthesized text so that re-parsing yields an
// evaluation-equivalent tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Literal(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expression::Var(v) => write!(f, "{v}"),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expression::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Plus => write!(f, "+"),
            Token::Minus => write!(f, "-"),
            Token::Star => write!(f, "*"),
            Token::Slash => write!(f, "/"),
            Token::Caret => write!(f, "^"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
            Token::Comma => write!(f, ","),
            Token::End => write!(f, "end of input"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent suffix like 1e-3.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    position: start,
                    message: format!("invalid number `{text}`"),
                })?;
                tokens.push((Token::Number(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(src[start..i].to_string()), start));
            }
            other => {
                return Err(ParseError::Syntax {
                    position: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    tokens.push((Token::End, src.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

// Grammar (precedence low to high, `^` right-associative and binding
// tighter than unary minus):
//   expression := term (('+' | '-') term)*
//   term       := unary (('*' | '/') unary)*
//   unary      := '-' unary | power
//   power      := atom ('^' unary)?
//   atom       := number | ident '(' args ')' | 'x' | 't' | '(' expression ')'
impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, expected: Token) -> Result<(), ParseError> {
        if *self.peek() == expected {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                position: self.position(),
                message: format!("expected `{}`, found `{}`", expected, self.peek()),
            })
        }
    }

    fn expression(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() == Token::Minus {
            self.advance();
            Ok(Expression::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.advance();
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary()?;
            Ok(Expression::Binary(
                BinOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let position = self.position();
        match self.advance() {
            Token::Number(v) => Ok(Expression::Literal(v)),
            Token::LParen => {
                let inner = self.expression()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Expression::Var(Var::X)),
                "t" => Ok(Expression::Var(Var::T)),
                _ => {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        position,
                        name: name.clone(),
                    })?;
                    self.expect(Token::LParen)?;
                    let mut args = vec![self.expression()?];
                    while *self.peek() == Token::Comma {
                        self.advance();
                        args.push(self.expression()?);
                    }
                    self.expect(Token::RParen)?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Syntax {
                            position,
                            message: format!(
                                "{} takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Expression::Call(func, args))
                }
            },
            tok => Err(ParseError::Syntax {
                position,
                message: format!("expected a value, found `{tok}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eval_str(src: &str, x: f64) -> f64 {
        Expression::parse(src).unwrap().eval_x(x).unwrap()
    }

    #[test]
    fn literals_and_variables() {
        assert_eq!(eval_str("2 + 0.5*sin(3.14159265*x)", 0.0), 2.0);
        assert_eq!(eval_str("x^2", 3.0), 9.0);
        assert_eq!(eval_str("min(3, 1+x)", 5.0), 3.0);
        assert_eq!(eval_str("exp(0)", 1.0), 1.0);
        assert_eq!(eval_str("x - x", 7.25), 0.0);
        assert_eq!(eval_str("2 - 1/(1+x^2)", 1.0), 1.5);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval_str("2+3*4", 0.0), 14.0);
        // `^` is right-associative: 2^(3^2) = 512, not (2^3)^2 = 64.
        assert_eq!(eval_str("2^3^2", 0.0), 512.0);
        // `^` binds tighter than unary minus.
        assert_eq!(eval_str("-2^2", 0.0), -4.0);
        assert_eq!(eval_str("(-2)^2", 0.0), 4.0);
        assert_eq!(eval_str("6/3/2", 0.0), 1.0);
        assert_eq!(eval_str("1e-3 * 2", 0.0), 0.002);
    }

    #[test]
    fn time_variable() {
        let e = Expression::parse("t*x + 1").unwrap();
        assert!(e.uses_t());
        assert_eq!(e.eval_xt(2.0, 3.0).unwrap(), 7.0);
        assert_eq!(e.eval_x(2.0), Err(EvalError::Unbound(Var::T)));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Expression::parse("1 + @") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match Expression::parse("foo(1)") {
            Err(ParseError::UnknownIdentifier { name, .. }) => assert_eq!(name, "foo"),
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        assert_eq!(Expression::parse("  "), Err(ParseError::Empty));
        assert!(Expression::parse("min(1)").is_err());
        assert!(Expression::parse("1 +").is_err());
        assert!(Expression::parse("(1").is_err());
    }

    #[test]
    fn domain_errors() {
        let log = Expression::parse("log(x)").unwrap();
        assert!(matches!(log.eval_x(-1.0), Err(EvalError::Domain(_))));
        assert!(matches!(log.eval_x(0.0), Err(EvalError::Domain(_))));
        assert_relative_eq!(log.eval_x(1.0).unwrap(), 0.0);

        let sqrt = Expression::parse("sqrt(x)").unwrap();
        assert!(matches!(sqrt.eval_x(-0.5), Err(EvalError::Domain(_))));

        let div = Expression::parse("1/x").unwrap();
        assert!(matches!(div.eval_x(0.0), Err(EvalError::Domain(_))));

        // Negative base with non-integer exponent is rejected, integer is fine.
        let pow = Expression::parse("x^0.5").unwrap();
        assert!(matches!(pow.eval_x(-2.0), Err(EvalError::Domain(_))));
        let ipow = Expression::parse("x^3").unwrap();
        assert_eq!(ipow.eval_x(-2.0).unwrap(), -8.0);

        // Overflow to infinity is reported, not returned.
        let huge = Expression::parse("exp(x)").unwrap();
        assert!(matches!(huge.eval_x(1e6), Err(EvalError::Domain(_))));
    }

    #[test]
    fn determinism() {
        let e = Expression::parse("sin(x)*exp(x/3) - sqrt(abs(x))^1.5").unwrap();
        let a = e.eval_x(0.7311).unwrap();
        let b = e.eval_x(0.7311).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn arb_expr() -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (0.0f64..10.0).prop_map(Expression::Literal),
            Just(Expression::Var(Var::X)),
            Just(Expression::Var(Var::T)),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Binary(
                    BinOp::Add,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Binary(
                    BinOp::Mul,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Binary(
                    BinOp::Sub,
                    Box::new(a),
                    Box::new(b)
                )),
                inner.clone().prop_map(|a| Expression::Neg(Box::new(a))),
                inner
                    .clone()
                    .prop_map(|a| Expression::Call(Func::Sin, vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expression::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        // The parser returns a result on arbitrary input; it never panics.
        #[test]
        fn parser_total_on_arbitrary_input(src in ".{0,64}") {
            let _ = Expression::parse(&src);
        }

        // Parse-print-parse yields an evaluation-equivalent tree, bit for bit.
        #[test]
        fn print_parse_round_trip(e in arb_expr(), x in -5.0f64..5.0, t in -5.0f64..5.0) {
            let reparsed = Expression::parse(&e.to_string()).unwrap();
            let b = Bindings::xt(x, t);
            match (e.eval(&b), reparsed.eval(&b)) {
                (Ok(a), Ok(c)) => prop_assert_eq!(a.to_bits(), c.to_bits()),
                (Err(_), Err(_)) => {}
                (a, c) => prop_assert!(false, "mismatch: {:?} vs {:?}", a, c),
            }
        }
    }
}
