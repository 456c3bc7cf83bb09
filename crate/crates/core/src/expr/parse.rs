use super::{BinOp, ExprError, Expression, Func, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax { offset, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when followed by digits, so "2eta" stays "2" "eta"
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
            Tok::Num(value)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(syntax(start, format!("unexpected character `{ch}`")));
                }
            }
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token { tok: Tok::Eof, offset: src.len() });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

/// Parses expression source text.
///
/// Errors carry the byte offset where parsing stopped.
pub fn parse(source: &str) -> Result<Expression, ExprError> {
    let mut p = Parser { tokens: lex(source)?, pos: 0 };
    let e = p.expr()?;
    let t = p.peek();
    match t.tok {
        Tok::Eof => Ok(e),
        Tok::RParen => Err(syntax(t.offset, "unmatched closing parenthesis")),
        _ => Err(syntax(t.offset, "expected operator or end of input")),
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.peek().tok == Tok::Op('-') {
            self.next();
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            // right operand may itself carry a sign or another power
            let exponent = self.unary()?;
            return Ok(Expression::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parenthesized(&mut self, open: usize) -> Result<Expression, ExprError> {
        let inner = self.expr()?;
        let t = self.next();
        match t.tok {
            Tok::RParen => Ok(inner),
            Tok::Eof => Err(syntax(t.offset, format!("unclosed parenthesis opened at offset {open}; expected `)`"))),
            _ => Err(syntax(t.offset, "expected `)` or operator")),
        }
    }

    fn primary(&mut self) -> Result<Expression, ExprError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expression::Num(v)),
            Tok::LParen => self.parenthesized(t.offset),
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ExprError::UnknownFunction { name: name.clone(), offset: t.offset })?;
                    let open = self.next().offset;
                    let arg = self.parenthesized(open)?;
                    return Ok(Expression::Call(func, Box::new(arg)));
                }
                Ok(match name.as_str() {
                    "xi" => Expression::Var(Var::Xi),
                    "eta" => Expression::Var(Var::Eta),
                    "pi" => Expression::Num(std::f64::consts::PI),
                    _ => Expression::Param(name),
                })
            }
            Tok::Eof => Err(syntax(t.offset, "unexpected end of input; expected a value")),
            Tok::RParen => Err(syntax(t.offset, "unexpected `)`; expected a value")),
            Tok::Op(c) => Err(syntax(t.offset, format!("unexpected `{c}`; expected a value"))),
        }
    }
}
