//! Boolean condition expressions used by policies and by field-path filters.
//!
//! Policy conditions reference attributes by bare name (`allowEduForAds = true`);
//! filters inside field paths reference attributes of the current element with an
//! `@.` prefix (`@.field31 = 's1'`). Both share one grammar with precedence
//! `NOT > AND > OR`. A bare attribute with no operator is sugar for `= true`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::lexer::{is_keyword, tokenize, CmpOp, SyntaxError, Tok, Token};

/// Where an attribute's value comes from at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrClass {
    /// A field of the element being filtered (`@.name`).
    Element,
    /// A data-subject consent, looked up in the consent store.
    Consent,
    /// An attribute of the accessor.
    Accessor,
    /// An attribute of the executing system.
    System,
    /// Parsed from a policy condition and not yet classified against a registry.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub class: AttrClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => {
                f.write_char('\'')?;
                f.write_str(&s.replace('\'', "''"))?;
                f.write_char('\'')
            }
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Cmp(CmpOp, Literal),
    Between(Literal, Literal),
    In(Vec<Literal>),
    Like(String),
    IsNull,
}

/// A simple predicate `(x ∘ y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attr: Attribute,
    pub op: Operator,
}

impl Predicate {
    /// `name = true`, the form bare consent names desugar to.
    pub fn is_true(name: impl Into<String>, class: AttrClass) -> Self {
        Predicate {
            attr: Attribute {
                name: name.into(),
                class,
            },
            op: Operator::Cmp(CmpOp::Eq, Literal::Bool(true)),
        }
    }

    /// Polarity when this is a boolean test (`x = true`, `x <> false`, ...).
    pub fn boolean_polarity(&self) -> Option<bool> {
        match &self.op {
            Operator::Cmp(CmpOp::Eq, Literal::Bool(b)) => Some(*b),
            Operator::Cmp(CmpOp::Ne, Literal::Bool(b)) => Some(!*b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Const(bool),
    Pred(Predicate),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn and(l: Condition, r: Condition) -> Self {
        Condition::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Condition, r: Condition) -> Self {
        Condition::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Condition) -> Self {
        Condition::Not(Box::new(c))
    }

    /// Conjunction of `name = true` leaves; `None` for an empty list.
    pub fn all_consents<I, S>(names: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        names
            .into_iter()
            .map(|n| Condition::Pred(Predicate::is_true(n, AttrClass::Consent)))
            .reduce(Condition::and)
    }

    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.visit(&mut |p| out.push(p));
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Predicate)) {
        match self {
            Condition::Const(_) => {}
            Condition::Pred(p) => f(p),
            Condition::Not(c) => c.visit(f),
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut Predicate)) {
        match self {
            Condition::Const(_) => {}
            Condition::Pred(p) => f(p),
            Condition::Not(c) => c.visit_mut(f),
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.visit_mut(f);
                r.visit_mut(f);
            }
        }
    }

    /// Names of attributes of the given class, sorted.
    pub fn attributes_of(&self, class: AttrClass) -> BTreeSet<String> {
        self.predicates()
            .into_iter()
            .filter(|p| p.attr.class == class)
            .map(|p| p.attr.name.clone())
            .collect()
    }

    /// Assigns a class to every unresolved attribute; returns the first name the
    /// lookup cannot classify.
    pub fn classify(
        &mut self,
        mut lookup: impl FnMut(&str) -> Option<AttrClass>,
    ) -> Result<(), String> {
        let mut missing = None;
        self.visit_mut(&mut |p| {
            if p.attr.class == AttrClass::Unresolved {
                match lookup(&p.attr.name) {
                    Some(class) => p.attr.class = class,
                    None => {
                        missing.get_or_insert_with(|| p.attr.name.clone());
                    }
                }
            }
        });
        missing.map_or(Ok(()), Err)
    }

    /// When the condition is a conjunction of positive consent tests, the set of
    /// consent names it requires.
    pub fn consent_conjunction(&self) -> Option<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        fn walk(c: &Condition, out: &mut BTreeSet<String>) -> bool {
            match c {
                Condition::And(l, r) => walk(l, out) && walk(r, out),
                Condition::Pred(p) if p.attr.class == AttrClass::Consent => {
                    if p.boolean_polarity() == Some(true) {
                        out.insert(p.attr.name.clone());
                        true
                    } else {
                        false
                    }
                }
                _ => false,
            }
        }
        walk(self, &mut out).then_some(out)
    }

    /// Canonical text; `parse` of this text yields an equal condition.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, 0);
        s
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 1,
            Condition::And(..) => 2,
            Condition::Not(_) => 3,
            Condition::Const(_) | Condition::Pred(_) => 4,
        }
    }

    fn render_into(&self, out: &mut String, min: u8) {
        let wrap = self.precedence() < min;
        if wrap {
            out.push('(');
        }
        match self {
            Condition::Const(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
            Condition::Pred(p) => render_predicate(p, out),
            Condition::Not(c) => {
                out.push_str("NOT ");
                c.render_into(out, 3);
            }
            Condition::And(l, r) => {
                l.render_into(out, 2);
                out.push_str(" AND ");
                r.render_into(out, 3);
            }
            Condition::Or(l, r) => {
                l.render_into(out, 1);
                out.push_str(" OR ");
                r.render_into(out, 2);
            }
        }
        if wrap {
            out.push(')');
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn render_attr(a: &Attribute, out: &mut String) {
    if a.class == AttrClass::Element {
        out.push_str("@.");
    }
    out.push_str(&a.name);
}

fn render_predicate(p: &Predicate, out: &mut String) {
    render_attr(&p.attr, out);
    match &p.op {
        Operator::Cmp(op, lit) => {
            let _ = write!(out, "{op}{lit}");
        }
        Operator::Between(lo, hi) => {
            let _ = write!(out, " BETWEEN {lo} AND {hi}");
        }
        Operator::In(items) => {
            out.push_str(" IN (");
            for (i, lit) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{lit}");
            }
            out.push(')');
        }
        Operator::Like(pattern) => {
            let _ = write!(out, " LIKE {}", Literal::Str(pattern.clone()));
        }
        Operator::IsNull => out.push_str(" IS NULL"),
    }
}

/// Attribute reference syntax accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dialect {
    /// Bare identifiers, classified later against an attribute registry.
    Policy,
    /// `@.name` references to the current element.
    Filter,
}

/// Parses a policy condition such as `consent3 AND consent4`.
pub fn parse_condition(text: &str) -> Result<Condition, SyntaxError> {
    if text.trim().is_empty() {
        return Err(SyntaxError::new(0, "a condition"));
    }
    let tokens = tokenize(text)?;
    let mut p = CondParser::new(&tokens, Dialect::Policy, text.len());
    let c = p.parse_or()?;
    p.expect_end()?;
    Ok(c)
}

/// Parses a filter predicate such as `@.col1 = 'def'`.
pub fn parse_filter_condition(text: &str) -> Result<Condition, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = CondParser::new(&tokens, Dialect::Filter, text.len());
    let c = p.parse_or()?;
    p.expect_end()?;
    Ok(c)
}

pub(crate) struct CondParser<'t> {
    tokens: &'t [Token],
    pub(crate) pos: usize,
    dialect: Dialect,
    end: usize,
}

impl<'t> CondParser<'t> {
    pub(crate) fn new(tokens: &'t [Token], dialect: Dialect, end: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            dialect,
            end,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn err(&self, expected: &str) -> SyntaxError {
        SyntaxError::new(self.here(), expected)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.tokens.get(self.pos).map(|t| &t.tok);
        self.pos += 1;
        t
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_keyword(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(kw))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        if self.pos < self.tokens.len() {
            Err(self.err("end of condition"))
        } else {
            Ok(())
        }
    }

    pub(crate) fn parse_or(&mut self) -> Result<Condition, SyntaxError> {
        let mut left = self.parse_and()?;
        while self.eat_kw("OR") {
            let right = self.parse_and()?;
            left = Condition::or(left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Condition, SyntaxError> {
        let mut left = self.parse_not()?;
        while self.eat_kw("AND") {
            let right = self.parse_not()?;
            left = Condition::and(left, right);
        }
        Ok(left)
    }

    fn parse_not(&mut self) -> Result<Condition, SyntaxError> {
        if self.eat_kw("NOT") {
            return Ok(Condition::not(self.parse_not()?));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Condition, SyntaxError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let c = self.parse_or()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(c)
            }
            Some(t) if t.is_keyword("TRUE") => {
                self.pos += 1;
                Ok(Condition::Const(true))
            }
            Some(t) if t.is_keyword("FALSE") => {
                self.pos += 1;
                Ok(Condition::Const(false))
            }
            _ => self.parse_predicate(),
        }
    }

    fn parse_attribute(&mut self) -> Result<Attribute, SyntaxError> {
        let class = match self.dialect {
            Dialect::Filter => {
                self.expect(Tok::At, "'@.' attribute reference")?;
                self.expect(Tok::Dot, "'.' after '@'")?;
                AttrClass::Element
            }
            Dialect::Policy => AttrClass::Unresolved,
        };
        match self.peek() {
            Some(Tok::Ident(name)) if class == AttrClass::Element || !is_keyword(name) => {
                let name = name.clone();
                self.pos += 1;
                Ok(Attribute { name, class })
            }
            _ => Err(self.err("attribute name")),
        }
    }

    fn parse_literal(&mut self) -> Result<Literal, SyntaxError> {
        let lit = match self.peek() {
            Some(Tok::Str(s)) => Literal::Str(s.clone()),
            Some(Tok::Int(i)) => Literal::Int(*i),
            Some(Tok::Float(x)) => Literal::Float(*x),
            Some(t) if t.is_keyword("TRUE") => Literal::Bool(true),
            Some(t) if t.is_keyword("FALSE") => Literal::Bool(false),
            _ => return Err(self.err("literal")),
        };
        self.pos += 1;
        Ok(lit)
    }

    fn parse_predicate(&mut self) -> Result<Condition, SyntaxError> {
        let attr = self.parse_attribute()?;
        let pred = |op| Condition::Pred(Predicate { attr: attr.clone(), op });
        if let Some(Tok::Cmp(op)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let lit = self.parse_literal()?;
            return Ok(pred(Operator::Cmp(op, lit)));
        }
        if self.eat_kw("IS") {
            let negated = self.eat_kw("NOT");
            self.expect_kw("NULL")?;
            let c = pred(Operator::IsNull);
            return Ok(if negated { Condition::not(c) } else { c });
        }
        let negated = self.eat_kw("NOT");
        let c = if self.eat_kw("BETWEEN") {
            let lo = self.parse_literal()?;
            self.expect_kw("AND")?;
            let hi = self.parse_literal()?;
            pred(Operator::Between(lo, hi))
        } else if self.eat_kw("IN") {
            self.expect(Tok::LParen, "'('")?;
            let mut items = vec![self.parse_literal()?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                items.push(self.parse_literal()?);
            }
            self.expect(Tok::RParen, "')'")?;
            pred(Operator::In(items))
        } else if self.eat_kw("LIKE") {
            match self.bump() {
                Some(Tok::Str(s)) => {
                    let s = s.clone();
                    pred(Operator::Like(s))
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.err("LIKE pattern string"));
                }
            }
        } else if negated {
            return Err(self.err("BETWEEN, IN or LIKE after NOT"));
        } else {
            // bare attribute: sugar for `= true`
            pred(Operator::Cmp(CmpOp::Eq, Literal::Bool(true)))
        };
        Ok(if negated { Condition::not(c) } else { c })
    }
}
