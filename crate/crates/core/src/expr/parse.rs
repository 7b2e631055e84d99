use super::{Expr, OpKind};

/// A parse failure. `token` is the 1-based index of the offending token,
/// where the end of input counts as one token past the last.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at token {token} (offset {offset}): {message}")]
pub struct ParseError {
    pub token: usize,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(i64),
    Var,
    Param(usize),
    Func(OpKind),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |count: usize, offset: usize, message: String| ParseError {
        token: count + 1,
        offset,
        message,
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'.' || bytes[i] == b'e' || bytes[i] == b'E') {
                return Err(err(
                    out.len(),
                    start,
                    "only integer literals are allowed; use a parameter for real constants".into(),
                ));
            }
            let n = src[start..i]
                .parse::<i64>()
                .map_err(|_| err(out.len(), start, "integer literal out of range".into()))?;
            Tok::Num(n)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            match word {
                "p" => Tok::Var,
                "sqrt" => Tok::Func(OpKind::Sqrt),
                "square" => Tok::Func(OpKind::Square),
                "cube" => Tok::Func(OpKind::Cube),
                w if w.len() > 1
                    && w.starts_with('c')
                    && w[1..].bytes().all(|b| b.is_ascii_digit()) =>
                {
                    match w[1..].parse::<usize>() {
                        Ok(k) if k >= 1 => Tok::Param(k),
                        _ => {
                            return Err(err(
                                out.len(),
                                start,
                                format!("invalid parameter `{w}`; parameters are c1, c2, ..."),
                            ))
                        }
                    }
                }
                w => return Err(err(out.len(), start, format!("unknown identifier `{w}`"))),
            }
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(out.len(), start, format!("unexpected character `{c}`"))),
            }
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token {
        tok: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let message = message.into();
        let message = if matches!(self.peek(), Tok::End) {
            format!("{message} (reached end of input)")
        } else {
            message
        };
        ParseError {
            token: self.pos + 1,
            offset: self.tokens[self.pos].offset,
            message,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => OpKind::Add,
                Tok::Op('-') => OpKind::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => OpKind::Mul,
                Tok::Op('/') => OpKind::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Op('-')) {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Int(n) => Expr::Int(-n),
                other => Expr::mul(Expr::Int(-1), other),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Tok::Op('^')) {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Var => {
                self.bump();
                Ok(Expr::Var)
            }
            Tok::Param(k) => {
                self.bump();
                Ok(Expr::Param(k))
            }
            Tok::Func(op) => {
                self.bump();
                if !matches!(self.peek(), Tok::LParen) {
                    return Err(self.error(format!("expected `(` after `{}`", op.symbol())));
                }
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::unary(op, inner))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(self.error("expected a number, `p`, a parameter, a function or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::RParen) {
            self.bump();
            Ok(())
        } else {
            Err(self.error("expected `)`"))
        }
    }
}

/// Parses the infix grammar produced by [`Expr::render`]: `+ - * / ^`,
/// unary minus, `sqrt`, `square`, `cube`, integer literals, `p`, and `c1..cN`.
/// Parameters are renumbered by order of first appearance.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    let e = parser.expr()?;
    if !matches!(parser.peek(), Tok::End) {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(e.renumber_params())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_langmuir() {
        let e = parse("c1*p/(c2+p)").unwrap();
        assert_eq!(e.render(), "(c1 * p) / (c2 + p)");
        assert_eq!(e.complexity(), 7);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("p - p - p").unwrap().render(), "(p - p) - p");
        assert_eq!(parse("p ^ 2 ^ 3").unwrap().render(), "p ^ (2 ^ 3)");
        assert_eq!(parse("1 + 2 * p").unwrap().render(), "1 + (2 * p)");
    }

    #[test]
    fn unary_minus() {
        assert_eq!(parse("-3").unwrap(), Expr::Int(-3));
        assert_eq!(parse("-p").unwrap().render(), "(-1) * p");
        assert_eq!(parse("(-3) ^ 2").unwrap(), Expr::pow(Expr::Int(-3), Expr::Int(2)));
        assert_eq!(parse("-p ^ 2").unwrap().render(), "(-1) * (p ^ 2)");
    }

    #[test]
    fn renumbers_by_first_appearance() {
        assert_eq!(parse("c3 + c1 * c3").unwrap().render(), "c1 + (c2 * c1)");
    }

    #[test]
    fn functions() {
        let e = parse("sqrt(p) + square(c1) - cube(p)").unwrap();
        assert_eq!(e.render(), "(sqrt(p) + square(c1)) - cube(p)");
    }

    #[test]
    fn error_at_end_of_input() {
        let err = parse("c1 +").unwrap_err();
        assert_eq!(err.token, 3);
        assert!(err.message.contains("end of input"));
    }

    #[test]
    fn error_positions() {
        assert_eq!(parse("p * * p").unwrap_err().token, 3);
        assert_eq!(parse("(p + 1").unwrap_err().token, 5);
        assert_eq!(parse("p $ 1").unwrap_err().token, 2);
        assert_eq!(parse("p + q").unwrap_err().token, 3);
        assert!(parse("1.5 * p").is_err());
        assert!(parse("c0").is_err());
        assert!(parse("p p").is_err());
    }
}
