//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! disj   := conj ('|' conj)*
//! conj   := unary ('&' unary)*
//! unary  := '!' atom
//!         | '<' NUM ',' prog '>' unary
//!         | '[' NUM ',' prog ']' unary
//!         | ('mu' | 'nu') IDENT '.' disj
//!         | '(' disj ')'
//!         | atom
//! atom   := 'true' | 'false' | IDENT | '#' IDENT
//! prog   := IDENT ['-']
//! ```
//!
//! An identifier bound by an enclosing `mu`/`nu` is a fixpoint variable,
//! otherwise it is an atomic proposition. A fixpoint body scopes as far to the
//! right as possible.

use super::{Formula, Program};
use thiserror::Error;

/// Errors reported by [`parse`], with the byte offset where they occurred.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("negation applied to a non-atom at {pos}")]
    NegatedNonAtom { pos: usize },
    #[error("fixpoint variable `{var}` bound at {pos} does not occur free in its body")]
    VacuousBinder { pos: usize, var: String },
}

/// Parses a formula, returning an AST in positive normal form.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { src: text, pos: 0, bound: Vec::new() };
    let f = p.disj()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    bound: Vec<String>,
}

const KEYWORDS: [&str; 4] = ["true", "false", "mu", "nu"];

impl Parser<'_> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c)))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        let mut chars = self.src[start..].char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let mut end = self.src.len();
        for (i, c) in chars {
            if !(c.is_ascii_alphanumeric() || c == '_' || c == '\'') {
                end = start + i;
                break;
            }
        }
        self.pos = end;
        Some(self.src[start..end].to_string())
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a grade"));
        }
        self.src[start..self.pos].parse().map_err(|_| ParseError::Syntax { pos: start, msg: "grade out of range".into() })
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let name = self.ident().ok_or_else(|| self.err("expected a program name"))?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.err("keyword used as program name"));
        }
        let inverted = self.eat('-');
        Ok(Program { name, inverted })
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.conj()?;
        while self.eat('|') {
            let r = self.conj()?;
            f = Formula::or(f, r);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut f = self.unary()?;
        while self.eat('&') {
            let r = self.unary()?;
            f = Formula::and(f, r);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.eat('!') {
            return match self.atom()? {
                Some(Formula::Var(_)) | None => Err(ParseError::NegatedNonAtom { pos: start }),
                Some(a) => Ok(a.negate_dual()),
            };
        }
        if self.eat('<') {
            let n = self.number()?;
            self.expect(',')?;
            let prog = self.program()?;
            self.expect('>')?;
            let body = self.unary()?;
            return Ok(Formula::at_least(n, prog, body));
        }
        if self.eat('[') {
            let n = self.number()?;
            self.expect(',')?;
            let prog = self.program()?;
            self.expect(']')?;
            let body = self.unary()?;
            return Ok(Formula::all_but(n, prog, body));
        }
        if self.eat('(') {
            let f = self.disj()?;
            self.expect(')')?;
            return Ok(f);
        }
        let save = self.pos;
        if let Some(word) = self.ident() {
            if word == "mu" || word == "nu" {
                let var = self.ident().ok_or_else(|| self.err("expected a fixpoint variable"))?;
                if KEYWORDS.contains(&var.as_str()) {
                    return Err(self.err("keyword used as variable"));
                }
                self.expect('.')?;
                self.bound.push(var.clone());
                let body = self.disj();
                self.bound.pop();
                let body = body?;
                if !body.has_free_var(&var) {
                    return Err(ParseError::VacuousBinder { pos: start, var });
                }
                return Ok(if word == "mu" { Formula::mu(var, body) } else { Formula::nu(var, body) });
            }
            self.pos = save;
        }
        match self.atom()? {
            Some(a) => Ok(a),
            None => Err(self.err("expected a formula")),
        }
    }

    /// Parses `true`, `false`, a proposition, a bound variable or a nominal.
    fn atom(&mut self) -> Result<Option<Formula>, ParseError> {
        self.skip_ws();
        if self.eat('#') {
            let name = self.ident().ok_or_else(|| self.err("expected a nominal name"))?;
            return Ok(Some(Formula::nominal(name)));
        }
        let save = self.pos;
        match self.ident() {
            Some(w) if w == "true" => Ok(Some(Formula::True)),
            Some(w) if w == "false" => Ok(Some(Formula::False)),
            Some(w) if w == "mu" || w == "nu" => {
                self.pos = save;
                Ok(None)
            }
            Some(w) => {
                if self.bound.contains(&w) {
                    Ok(Some(Formula::Var(w)))
                } else {
                    Ok(Some(Formula::prop(w)))
                }
            }
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(parse("p & !p").unwrap(), Formula::and(Formula::prop("p"), Formula::not_prop("p")));
        assert_eq!(parse("<2,a> true").unwrap(), Formula::at_least(2, Program::new("a"), Formula::True));
        assert_eq!(
            parse("mu y. p | <0,a> y").unwrap(),
            Formula::mu("y", Formula::or(Formula::prop("p"), Formula::at_least(0, Program::new("a"), Formula::var("y"))))
        );
    }

    #[test]
    fn precedence_and_inverse() {
        let f = parse("p | q & r").unwrap();
        assert_eq!(f, Formula::or(Formula::prop("p"), Formula::and(Formula::prop("q"), Formula::prop("r"))));
        let g = parse("<0,a-> p | q").unwrap();
        assert_eq!(
            g,
            Formula::or(Formula::at_least(0, Program::inverse_of("a"), Formula::prop("p")), Formula::prop("q"))
        );
        assert_eq!(parse("!#o").unwrap(), Formula::not_nominal("o"));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("!(p & q)"), Err(ParseError::NegatedNonAtom { .. })));
        assert!(matches!(parse("mu y. p"), Err(ParseError::VacuousBinder { .. })));
        assert!(matches!(parse("mu y. !y"), Err(ParseError::NegatedNonAtom { .. })));
        assert!(matches!(parse("p &"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("<x,a> p"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn display_round_trip() {
        for s in ["p & !p", "mu y. p | <0,a> y", "nu z. [1,b-] (z & q) | #o", "<2,a> true & [0,a] false"] {
            let f = parse(s).unwrap();
            assert_eq!(parse(&f.to_string()).unwrap(), f, "{}", f);
        }
    }
}
