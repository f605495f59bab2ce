//! Text readers for rationals and polynomials such as `x^2*y - 3/2*z + 1`.

use std::collections::BTreeSet;

use formsos::Polynomial;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("invalid number '{0}'")]
    Number(String),
    #[error("unexpected character '{0}' at offset {1}")]
    Char(char, usize),
    #[error("unknown variable '{0}'")]
    Variable(String),
    #[error("unexpected {0}")]
    Syntax(String),
    #[error("division by a non-constant or zero expression")]
    Division,
    #[error("exponent must be a non-negative integer below 256")]
    Exponent,
}

/// Integers, `a/b`, and decimals with an optional exponent (`1.5e-3`).
pub fn parse_rational(text: &str) -> Result<BigRational, ParseError> {
    let s = text.trim();
    let bad = || ParseError::Number(text.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let n: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let shift = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(n);
    if shift >= 0 {
        r *= BigRational::from_integer(Pow::pow(&ten, shift as u32));
    } else {
        r /= BigRational::from_integer(Pow::pow(&ten, shift.unsigned_abs()));
    }
    Ok(if neg { -r } else { r })
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(BigRational),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token::Num(parse_rational(&s)?));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(ParseError::Char(c, i));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' {
                acc * rhs
            } else {
                if !rhs.is_constant() || rhs.is_zero() {
                    return Err(ParseError::Division);
                }
                let c = rhs.coefficient(&formsos::Monomial::one(self.names.len()));
                acc.scale(&c.recip())
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, ParseError> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        match self.tokens.get(self.pos) {
            Some(Token::Num(k)) if k.is_integer() => {
                self.pos += 1;
                let k: u32 = k
                    .to_integer()
                    .try_into()
                    .ok()
                    .filter(|k| *k < 256)
                    .ok_or(ParseError::Exponent)?;
                Ok(base.pow(k))
            }
            _ => Err(ParseError::Exponent),
        }
    }

    fn atom(&mut self) -> Result<Polynomial, ParseError> {
        let n = self.names.len();
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        match tok {
            Some(Token::Num(c)) => Ok(Polynomial::constant(n, c)),
            Some(Token::Ident(name)) => self
                .names
                .iter()
                .position(|v| *v == name)
                .map(|k| Polynomial::var(n, k))
                .ok_or(ParseError::Variable(name)),
            Some(Token::Op('(')) => {
                let inner = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(ParseError::Syntax("end of input, expected ')'".into()));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Op(c)) => Err(ParseError::Syntax(format!("'{c}'"))),
            None => Err(ParseError::Syntax("end of input".into())),
        }
    }
}

/// Parses `text` over the variables `names`, in that order.
pub fn parse_polynomial(text: &str, names: &[String]) -> Result<Polynomial, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        names,
    };
    let out = p.expr()?;
    match p.tokens.get(p.pos) {
        None => Ok(out),
        Some(t) => Err(ParseError::Syntax(format!("trailing {t:?}"))),
    }
}

/// Identifiers appearing in `text`, sorted.
pub fn infer_variables(text: &str) -> Result<Vec<String>, ParseError> {
    let set: BTreeSet<String> = tokenize(text)?
        .into_iter()
        .filter_map(|t| match t {
            Token::Ident(s) => Some(s),
            _ => None,
        })
        .collect();
    Ok(set.into_iter().collect())
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
