//! Formulas of the logic of knowledge and linear time, with an ASCII
//! concrete syntax.
//!
//! ```text
//! phi ::= true | false | atom | atom@k | !phi | phi & phi | phi | phi
//!       | phi => phi | phi <=> phi | X phi | X^n phi | G phi | F phi
//!       | K[agent] phi | dhat[i] | ( phi )
//! atom ::= name | name=value
//! ```
//!
//! `&` binds tighter than `|`, which binds tighter than `=>` and `<=>`
//! (both right associative). `K[c]` names the coordinator; participants
//! are numbered from 2. `dhat[i]` abbreviates
//! `K[i] (held<i>=commit | held<i>=abort)`. `atom@k` reads the atom `k`
//! rounds in the past and is false before round `k`.

use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::{agent_name, AgentId, COORDINATOR};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom { name: String, back: u32 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    PowerNext(u32, Box<Formula>),
    Globally(Box<Formula>),
    Finally(Box<Formula>),
    Knows(AgentId, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom { name: name.into(), back: 0 }
    }

    pub fn falsum() -> Formula {
        Formula::not(Formula::True)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn power_next(n: u32, f: Formula) -> Formula {
        Formula::PowerNext(n, Box::new(f))
    }

    pub fn globally(f: Formula) -> Formula {
        Formula::Globally(Box::new(f))
    }

    pub fn finally(f: Formula) -> Formula {
        Formula::Finally(Box::new(f))
    }

    pub fn knows(agent: AgentId, f: Formula) -> Formula {
        Formula::Knows(agent, Box::new(f))
    }

    /// `dhat[i]`: participant `i` knows which decision it holds.
    pub fn dhat(i: AgentId) -> Formula {
        Formula::knows(
            i,
            Formula::or(
                Formula::atom(format!("held{i}=commit")),
                Formula::atom(format!("held{i}=abort")),
            ),
        )
    }

    /// Left-nested conjunction; `true` when empty.
    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        fs.into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `false` when empty.
    pub fn or_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        fs.into_iter().reduce(Formula::or).unwrap_or_else(Formula::falsum)
    }

    /// Whether the formula talks only about the present and the past, so
    /// that its value at round `m` depends on rounds `0..=m` alone.
    pub fn is_present_time(&self) -> bool {
        match self {
            Formula::True | Formula::Atom { .. } => true,
            Formula::Not(a) | Formula::Knows(_, a) => a.is_present_time(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.is_present_time() && b.is_present_time()
            }
            Formula::PowerNext(0, a) => a.is_present_time(),
            Formula::Next(_) | Formula::PowerNext(..) | Formula::Globally(_) | Formula::Finally(_) => {
                false
            }
        }
    }

    /// Whether the formula uses only atoms and boolean connectives.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::Atom { .. } => true,
            Formula::Not(a) => a.is_propositional(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.is_propositional() && b.is_propositional()
            }
            _ => false,
        }
    }

    /// Every atom name occurring in the formula, in order of appearance.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True => {}
            Formula::Atom { name, .. } => out.push(name),
            Formula::Not(a)
            | Formula::Next(a)
            | Formula::PowerNext(_, a)
            | Formula::Globally(a)
            | Formula::Finally(a)
            | Formula::Knows(_, a) => a.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom { name, back: 0 } => f.write_str(name),
            Formula::Atom { name, back } => write!(f, "{name}@{back}"),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} => {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <=> {b})"),
            Formula::Next(a) => write!(f, "X {a}"),
            Formula::PowerNext(n, a) => write!(f, "X^{n} {a}"),
            Formula::Globally(a) => write!(f, "G {a}"),
            Formula::Finally(a) => write!(f, "F {a}"),
            Formula::Knows(i, a) => write!(f, "K[{}] {a}", agent_name(*i)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(u32),
    Bang,
    Amp,
    Bar,
    Arrow,
    DoubleArrow,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Caret,
    Eq,
    At,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("number `{s}` out of range"),
            })?;
            // digits directly followed by letters form an identifier
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            } else {
                out.push((start, Tok::Num(n)));
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let tok = if two.starts_with("<=>") {
            i += 3;
            Tok::DoubleArrow
        } else if two.starts_with("=>") {
            i += 2;
            Tok::Arrow
        } else {
            i += 1;
            match c {
                '!' => Tok::Bang,
                '&' => Tok::Amp,
                '|' => Tok::Bar,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                '^' => Tok::Caret,
                '=' => Tok::Eq,
                '@' => Tok::At,
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.column(), msg: msg.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        match self.peek() {
            Some(Tok::Arrow) => {
                self.pos += 1;
                Ok(Formula::implies(lhs, self.formula()?))
            }
            Some(Tok::DoubleArrow) => {
                self.pos += 1;
                Ok(Formula::iff(lhs, self.formula()?))
            }
            _ => Ok(lhs),
        }
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut f = self.conjunction()?;
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn agent(&mut self) -> Result<AgentId> {
        self.expect(Tok::LBrack, "`[`")?;
        let agent = match self.bump() {
            Some(Tok::Ident(s)) if s == "c" => COORDINATOR,
            Some(Tok::Num(n)) if n >= 1 => n as AgentId,
            _ => {
                self.pos -= 1;
                return self.err("expected agent (`c` or a number)");
            }
        };
        self.expect(Tok::RBrack, "`]`")?;
        Ok(agent)
    }

    fn unary(&mut self) -> Result<Formula> {
        let Some(tok) = self.bump() else {
            return self.err("unexpected end of formula");
        };
        match tok {
            Tok::Bang => Ok(Formula::not(self.unary()?)),
            Tok::LParen => {
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(id) => match id.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::falsum()),
                "X" if self.peek() == Some(&Tok::Caret) => {
                    self.pos += 1;
                    match self.bump() {
                        Some(Tok::Num(n)) => Ok(Formula::power_next(n, self.unary()?)),
                        _ => {
                            self.pos -= 1;
                            self.err("expected exponent after `X^`")
                        }
                    }
                }
                "X" => Ok(Formula::next(self.unary()?)),
                "G" => Ok(Formula::globally(self.unary()?)),
                "F" => Ok(Formula::finally(self.unary()?)),
                "K" => {
                    let a = self.agent()?;
                    Ok(Formula::knows(a, self.unary()?))
                }
                "dhat" => {
                    let a = self.agent()?;
                    if a == COORDINATOR {
                        self.pos -= 2;
                        return self.err("dhat[] takes a participant");
                    }
                    Ok(Formula::dhat(a))
                }
                _ => self.atom(id),
            },
            _ => {
                self.pos -= 1;
                self.err("expected a formula")
            }
        }
    }

    fn atom(&mut self, mut name: String) -> Result<Formula> {
        if self.peek() == Some(&Tok::Eq) {
            self.pos += 1;
            match self.bump() {
                Some(Tok::Ident(v)) => {
                    name.push('=');
                    name.push_str(&v);
                }
                _ => {
                    self.pos -= 1;
                    return self.err("expected a value after `=`");
                }
            }
        }
        let mut back = 0;
        if self.peek() == Some(&Tok::At) {
            self.pos += 1;
            match self.bump() {
                Some(Tok::Num(n)) => back = n,
                _ => {
                    self.pos -= 1;
                    return self.err("expected a round offset after `@`");
                }
            }
        }
        Ok(Formula::Atom { name, back })
    }
}

pub fn parse(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.chars().count() };
    let f = p.formula()?;
    if p.pos < p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knows_dhat_expands() {
        let f = parse("K[c] dhat[2]").unwrap();
        assert_eq!(f, Formula::knows(COORDINATOR, Formula::dhat(2)));
    }

    #[test]
    fn power_next_of_implication() {
        let f = parse("X^3 (p => q)").unwrap();
        assert_eq!(
            f,
            Formula::power_next(3, Formula::implies(Formula::atom("p"), Formula::atom("q")))
        );
    }

    #[test]
    fn global_consistency_instance() {
        let f = parse("G !(outcome2=abort & outcome3=commit)").unwrap();
        assert_eq!(
            f,
            Formula::globally(Formula::not(Formula::and(
                Formula::atom("outcome2=abort"),
                Formula::atom("outcome3=commit"),
            )))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse("a | b & c => d => e").unwrap();
        let expect = Formula::implies(
            Formula::or(Formula::atom("a"), Formula::and(Formula::atom("b"), Formula::atom("c"))),
            Formula::implies(Formula::atom("d"), Formula::atom("e")),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn past_indexing() {
        assert_eq!(
            parse("ack2@1").unwrap(),
            Formula::Atom { name: "ack2".into(), back: 1 }
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("a & (b | ") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 9),
            other => panic!("{other:?}"),
        }
        match parse("K[x] a") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse("a b").is_err());
        assert!(parse("a # b").is_err());
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            "[a-e]".prop_map(Formula::atom),
            ("[a-e]", 1u32..3).prop_map(|(n, b)| Formula::Atom { name: n, back: b }),
            ("[pv]", 2usize..5, prop_oneof![Just("yes"), Just("no")])
                .prop_map(|(f, i, v)| Formula::atom(format!("{f}{i}={v}"))),
        ];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::iff(a, b)),
                inner.clone().prop_map(Formula::next),
                (0u32..4, inner.clone()).prop_map(|(n, a)| Formula::power_next(n, a)),
                inner.clone().prop_map(Formula::globally),
                inner.clone().prop_map(Formula::finally),
                (1usize..4, inner).prop_map(|(i, a)| Formula::knows(i, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(f in arb_formula()) {
            let printed = f.to_string();
            prop_assert_eq!(parse(&printed).unwrap(), f);
        }
    }
}
