//! Concrete syntax for scenario files and policies, and the matching renderer.
//!
//! Lexical conventions: an unquoted identifier starting with a lowercase
//! letter is a variable; one starting with an uppercase letter or a digit, or
//! any `'quoted'` name, is a literal. Binders are `?u`, the wildcard is `_`
//! and the arity-agnostic argument list is `(_*)`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::ast::*;
use crate::blp::blp_policy;
use crate::lattice::{Lattice, LatticeError, Level};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Option<PathBuf>,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.file {
            write!(f, "{}:", p.display())?;
        }
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        span: SourceSpan,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: unknown level name `{name}`")]
    UnknownLevelName { span: SourceSpan, name: String },
    #[error("{span}: only one lattice declaration is allowed")]
    DuplicateLatticeDecl { span: SourceSpan },
    #[error("{span}: unknown policy preset `{name}`")]
    UnknownPreset { span: SourceSpan, name: String },
    #[error("{span}: {source}")]
    Lattice {
        span: SourceSpan,
        #[source]
        source: LatticeError,
    },
}

impl ParseError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::UnknownLevelName { span, .. }
            | ParseError::DuplicateLatticeDecl { span }
            | ParseError::UnknownPreset { span, .. }
            | ParseError::Lattice { span, .. } => span,
        }
    }
}

const KEYWORDS: &[&str] = &[
    "lattice", "levels", "order", "location", "state", "policy", "process", "tuple", "out", "in",
    "read", "if", "true", "false", "test", "occurs-in", "Ss", "Cs", "Hs", "Ot", "Ht",
];

const PRESETS: &[&str] = &["BLP"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Whether `s` lexes as a variable when written bare.
pub fn is_var_name(s: &str) -> bool {
    is_ident(s) && s.starts_with(|c: char| c.is_ascii_lowercase()) && !is_keyword(s)
}

fn is_bare_literal(s: &str) -> bool {
    is_ident(s)
        && s.starts_with(|c: char| c.is_ascii_uppercase() || c.is_ascii_digit())
        && !is_keyword(s)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "'{s}'"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const PUNCTS: &[&str] = &[
    "::", ">=", "=>", "||", "&&", ":", "(", ")", "[", "]", "{", "}", ">", "<", "=", ",", ";",
    ".", "@", "|", "!", "?", "+", "*",
];

struct Lexed {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(text: &str, file: &Option<PathBuf>) -> Result<Lexed, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut toks = Vec::new();
    let span = |line, column| SourceSpan {
        file: file.clone(),
        line,
        column,
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let mut word: String = chars[start..i].iter().collect();
            if word == "occurs" && chars[i..].starts_with(&['-', 'i', 'n']) {
                let after = chars.get(i + 3);
                if !after.is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    i += 3;
                    word.push_str("-in");
                }
            }
            col += i - start;
            toks.push((Tok::Ident(word), l0, c0));
            continue;
        }
        if c == '\'' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j] != '\'' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '\'' {
                return Err(ParseError::Syntax {
                    span: span(l0, c0),
                    expected: vec!["closing `'`".into()],
                    found: "end of line".into(),
                });
            }
            toks.push((Tok::Quoted(chars[start..j].iter().collect()), l0, c0));
            col += j + 1 - i;
            i = j + 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                toks.push((Tok::Punct(p), l0, c0));
                i += p.len();
                col += p.len();
            }
            None => {
                return Err(ParseError::Syntax {
                    span: span(l0, c0),
                    expected: vec!["a token".into()],
                    found: format!("`{c}`"),
                })
            }
        }
    }
    toks.push((Tok::Eof, line, col));
    Ok(Lexed { toks })
}

/// A bare or quoted name as written, before it is classified.
struct Name {
    text: String,
    quoted: bool,
    span: SourceSpan,
}

struct Parser<'l> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    file: Option<PathBuf>,
    lattice: Option<&'l Lattice>,
}

type PResult<T> = Result<T, ParseError>;

impl<'l> Parser<'l> {
    fn new(text: &str, file: Option<PathBuf>) -> PResult<Self> {
        let lexed = lex(text, &file)?;
        Ok(Parser {
            toks: lexed.toks,
            pos: 0,
            file,
            lattice: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> SourceSpan {
        let (_, line, column) = self.toks[self.pos];
        SourceSpan {
            file: self.file.clone(),
            line,
            column,
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn at_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.at_punct(p);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(&[&format!("`{p}`")])
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.at_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.err(&[&format!("`{k}`")])
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(&["end of input"])
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) if s != "_" => {
                self.bump();
                Ok(Name {
                    text: s,
                    quoted: false,
                    span,
                })
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(Name {
                    text: s,
                    quoted: true,
                    span,
                })
            }
            _ => self.err(&[what]),
        }
    }

    /// A name that is always a literal (location headers, tuple components).
    fn literal(&mut self) -> PResult<Symbol> {
        Ok(Symbol::from(self.name("a name")?.text))
    }

    fn level(&mut self) -> PResult<Level> {
        let n = self.name("a level name")?;
        self.level_of(n)
    }

    fn level_of(&self, n: Name) -> PResult<Level> {
        let lat = self.lattice.expect("lattice is known before levels are parsed");
        lat.level(&n.text).ok_or(ParseError::UnknownLevelName {
            span: n.span,
            name: n.text,
        })
    }

    fn classify(&self, n: Name) -> PResult<LocRef> {
        if n.quoted {
            return Ok(LocRef::Lit(n.text.into()));
        }
        if is_keyword(&n.text) {
            return Err(ParseError::Syntax {
                span: n.span,
                expected: vec!["a location or variable".into()],
                found: format!("keyword `{}`", n.text),
            });
        }
        if n.text.starts_with(|c: char| c.is_ascii_lowercase() || c == '_') {
            Ok(LocRef::Var(n.text.into()))
        } else {
            Ok(LocRef::Lit(n.text.into()))
        }
    }

    fn locref(&mut self) -> PResult<LocRef> {
        let n = self.name("a location or variable")?;
        self.classify(n)
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        if self.eat_punct("?") {
            let n = self.name("a binder name")?;
            return Ok(Pattern::Binder(n.text.into()));
        }
        if self.at_kw("_") {
            self.bump();
            return Ok(Pattern::Wildcard);
        }
        Ok(Pattern::Ref(self.locref()?))
    }

    fn patterns(&mut self) -> PResult<Vec<Pattern>> {
        self.expect_punct("(")?;
        let mut ps = Vec::new();
        if !self.at_punct(")") {
            ps.push(self.pattern()?);
            while self.eat_punct(",") {
                ps.push(self.pattern()?);
            }
        }
        self.expect_punct(")")?;
        Ok(ps)
    }

    fn action_kind(&mut self) -> PResult<ActionKind> {
        let k = match self.peek() {
            Tok::Ident(s) if s == "out" => ActionKind::Out,
            Tok::Ident(s) if s == "in" => ActionKind::In,
            Tok::Ident(s) if s == "read" => ActionKind::Read,
            _ => return self.err(&["`out`", "`in`", "`read`"]),
        };
        self.bump();
        Ok(k)
    }

    fn at_action(&self) -> bool {
        self.at_kw("out") || self.at_kw("in") || self.at_kw("read")
    }

    fn action(&mut self) -> PResult<Action> {
        let kind = self.action_kind()?;
        let args = self.patterns()?;
        self.expect_punct("@")?;
        let target = self.locref()?;
        Ok(Action { kind, args, target })
    }

    fn action_pattern(&mut self) -> PResult<ActionPattern> {
        let kind = self.action_kind()?;
        let args = if matches!(self.peek_at(1), Tok::Ident(s) if s == "_")
            && *self.peek_at(2) == Tok::Punct("*")
        {
            self.expect_punct("(")?;
            self.bump();
            self.bump();
            self.expect_punct(")")?;
            ArgsPattern::Any
        } else {
            ArgsPattern::List(self.patterns()?)
        };
        self.expect_punct("@")?;
        let target = self.locref()?;
        Ok(ActionPattern { kind, args, target })
    }

    // processes: P ::= S ('|' S)* ; S ::= 0 | *T | (P) | B ('+' B)* ; T ::= 0 | *T | (P) | B ; B ::= a . T

    fn process(&mut self) -> PResult<Process> {
        let mut parts = vec![self.sum()?];
        while self.eat_punct("|") {
            parts.push(self.sum()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Process::Parallel(parts)
        })
    }

    fn sum(&mut self) -> PResult<Process> {
        if !self.at_action() {
            return self.term();
        }
        let mut bs = vec![self.branch()?];
        while self.eat_punct("+") {
            bs.push(self.branch()?);
        }
        Ok(Process::Choice(bs))
    }

    fn term(&mut self) -> PResult<Process> {
        if self.at_kw("0") {
            self.bump();
            return Ok(Process::Nil);
        }
        if self.eat_punct("*") {
            return Ok(Process::Replicate(Box::new(self.term()?)));
        }
        if self.eat_punct("(") {
            let p = self.process()?;
            self.expect_punct(")")?;
            return Ok(p);
        }
        if self.at_action() {
            return Ok(Process::Choice(vec![self.branch()?]));
        }
        self.err(&["`0`", "`*`", "`(`", "an action"])
    }

    fn branch(&mut self) -> PResult<Branch> {
        let action = self.action()?;
        self.expect_punct(".")?;
        let cont = self.term()?;
        Ok(Branch { action, cont })
    }

    // policies, by increasing binding strength: `>`, `=>`, `(+)`/`(x)`, `&&`/`||`, `!`

    fn at_paren_op(&self) -> Option<BinOp> {
        if !self.at_punct("(") || *self.peek_at(2) != Tok::Punct(")") {
            return None;
        }
        match self.peek_at(1) {
            Tok::Punct("+") => Some(BinOp::Oplus),
            Tok::Ident(s) if s == "x" => Some(BinOp::Otimes),
            _ => None,
        }
    }

    fn tier_op(&mut self, tier: u8) -> Option<BinOp> {
        let op = match tier {
            0 if self.at_punct(">") => BinOp::Priority,
            1 if self.at_punct("=>") => BinOp::Implies,
            2 => {
                let op = self.at_paren_op()?;
                self.bump();
                self.bump();
                self.bump();
                return Some(op);
            }
            3 if self.at_punct("&&") => BinOp::And,
            3 if self.at_punct("||") => BinOp::Or,
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn policy(&mut self) -> PResult<Policy> {
        self.policy_tier(0)
    }

    fn policy_tier(&mut self, tier: u8) -> PResult<Policy> {
        if tier == 4 {
            return self.policy_unary();
        }
        let mut lhs = self.policy_tier(tier + 1)?;
        while let Some(op) = self.tier_op(tier) {
            let rhs = self.policy_tier(tier + 1)?;
            lhs = Policy::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn policy_unary(&mut self) -> PResult<Policy> {
        if self.eat_punct("!") {
            return Ok(Policy::Not(Box::new(self.policy_unary()?)));
        }
        if self.at_kw("true") {
            self.bump();
            return Ok(Policy::True);
        }
        if self.at_kw("false") {
            self.bump();
            return Ok(Policy::False);
        }
        if self.eat_punct("(") {
            let p = self.policy()?;
            self.expect_punct(")")?;
            return Ok(p);
        }
        if self.at_punct("[") {
            return self.aspect();
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if s.starts_with(|c: char| c.is_ascii_uppercase()) {
                let span = self.span();
                self.bump();
                return preset(&s).ok_or(ParseError::UnknownPreset { span, name: s });
            }
        }
        self.err(&["a policy"])
    }

    fn aspect(&mut self) -> PResult<Policy> {
        self.expect_punct("[")?;
        let rec = self.rec_tier(1)?;
        self.expect_kw("if")?;
        let subject = self.locref()?;
        self.expect_punct("::")?;
        let action = self.action_pattern()?;
        self.expect_punct(".")?;
        let cont = Symbol::from(self.name("a continuation name")?.text);
        self.expect_punct(":")?;
        let cond = self.cond()?;
        self.expect_punct("]")?;
        Ok(Policy::aspect(
            rec,
            Cut {
                subject,
                action,
                cont,
            },
            cond,
        ))
    }

    fn rec_tier(&mut self, tier: u8) -> PResult<Rec> {
        if tier == 4 {
            return self.rec_unary();
        }
        let mut lhs = self.rec_tier(tier + 1)?;
        while let Some(op) = self.tier_op(tier) {
            let rhs = self.rec_tier(tier + 1)?;
            lhs = Rec::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn occurs_tail(&mut self) -> PResult<(ActionPattern, Symbol)> {
        let ap = self.action_pattern()?;
        self.expect_kw("occurs-in")?;
        let x = Symbol::from(self.name("a continuation name")?.text);
        Ok((ap, x))
    }

    fn rec_unary(&mut self) -> PResult<Rec> {
        if self.eat_punct("!") {
            return Ok(Rec::Not(Box::new(self.rec_unary()?)));
        }
        if self.at_kw("true") {
            self.bump();
            return Ok(Rec::True);
        }
        if self.at_kw("false") {
            self.bump();
            return Ok(Rec::False);
        }
        if self.eat_punct("(") {
            let r = self.rec_tier(1)?;
            self.expect_punct(")")?;
            return Ok(r);
        }
        if self.at_action() {
            let (ap, x) = self.occurs_tail()?;
            return Ok(Rec::OccursIn(ap, x));
        }
        let lhs = self.name("a recommendation")?;
        if self.eat_punct(">=") {
            let rhs = self.name("a level expression")?;
            return Ok(Rec::Geq(self.lev_expr(lhs)?, self.lev_expr(rhs)?));
        }
        if self.eat_punct("=") {
            let a = self.classify(lhs)?;
            let b = self.locref()?;
            return Ok(Rec::Eq(a, b));
        }
        self.err(&["`>=`", "`=`"])
    }

    fn lev_expr(&self, n: Name) -> PResult<LevExpr> {
        if !n.quoted {
            match n.text.as_str() {
                "Ss" => return Ok(LevExpr::Ss),
                "Cs" => return Ok(LevExpr::Cs),
                "Hs" => return Ok(LevExpr::Hs),
                "Ot" => return Ok(LevExpr::Ot),
                "Ht" => return Ok(LevExpr::Ht),
                _ => {}
            }
        }
        Ok(LevExpr::Lit(self.level_of(n)?))
    }

    fn cond(&mut self) -> PResult<Cond> {
        let mut lhs = self.cond_unary()?;
        loop {
            if self.eat_punct("&&") {
                lhs = Cond::And(Box::new(lhs), Box::new(self.cond_unary()?));
            } else if self.eat_punct("||") {
                lhs = Cond::Or(Box::new(lhs), Box::new(self.cond_unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn cond_unary(&mut self) -> PResult<Cond> {
        if self.eat_punct("!") {
            return Ok(Cond::Not(Box::new(self.cond_unary()?)));
        }
        if self.at_kw("true") {
            self.bump();
            return Ok(Cond::True);
        }
        if self.at_kw("false") {
            self.bump();
            return Ok(Cond::False);
        }
        if self.eat_punct("(") {
            let c = self.cond()?;
            self.expect_punct(")")?;
            return Ok(c);
        }
        if self.at_kw("test") {
            self.bump();
            let ps = self.patterns()?;
            self.expect_punct("@")?;
            return Ok(Cond::Present(ps, self.locref()?));
        }
        if self.at_action() {
            let (ap, x) = self.occurs_tail()?;
            return Ok(Cond::OccursIn(ap, x));
        }
        let a = self.locref()?;
        self.expect_punct("=")?;
        Ok(Cond::Eq(a, self.locref()?))
    }

    fn lattice_decl(&mut self) -> PResult<Lattice> {
        let span = self.span();
        self.expect_kw("lattice")?;
        self.expect_punct("{")?;
        self.expect_kw("levels")?;
        self.expect_punct(":")?;
        let mut levels = vec![self.name("a level name")?.text];
        while self.eat_punct(",") {
            levels.push(self.name("a level name")?.text);
        }
        let mut edges = Vec::new();
        if self.eat_punct(";") && self.at_kw("order") {
            self.bump();
            self.expect_punct(":")?;
            loop {
                let mut prev = self.name("a level name")?.text;
                self.expect_punct("<")?;
                loop {
                    let next = self.name("a level name")?.text;
                    edges.push((prev, next.clone()));
                    prev = next;
                    if !self.eat_punct("<") {
                        break;
                    }
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.eat_punct(";");
        }
        self.expect_punct("}")?;
        Lattice::build(&levels, &edges).map_err(|source| ParseError::Lattice { span, source })
    }

    fn state(&mut self) -> PResult<LocalizedState> {
        self.expect_kw("state")?;
        self.expect_punct("<")?;
        let clearance = self.level()?;
        self.expect_punct(",")?;
        let current = self.level()?;
        self.expect_punct(",")?;
        let history = self.level()?;
        self.expect_punct(",")?;
        let classification = self.level()?;
        self.expect_punct(">")?;
        Ok(LocalizedState {
            clearance,
            current,
            history,
            classification,
        })
    }
}

fn preset(name: &str) -> Option<Policy> {
    match name {
        "BLP" => Some(blp_policy()),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    PRESETS
}

/// Parses a complete scenario: one lattice declaration followed by location blocks.
pub fn parse_scenario(text: &str) -> Result<Net, ParseError> {
    parse_with_file(text, None)
}

pub fn parse_scenario_file(text: &str, file: &Path) -> Result<Net, ParseError> {
    parse_with_file(text, Some(file.to_path_buf()))
}

fn parse_with_file(text: &str, file: Option<PathBuf>) -> Result<Net, ParseError> {
    let mut p = Parser::new(text, file)?;
    if !p.at_kw("lattice") {
        return p.err(&["`lattice`"]);
    }
    let lat = Arc::new(p.lattice_decl()?);
    scenario_body(p, lat)
}

fn scenario_body(p: Parser<'_>, lat: Arc<Lattice>) -> Result<Net, ParseError> {
    let mut q = Parser {
        toks: p.toks,
        pos: p.pos,
        file: p.file,
        lattice: Some(&lat),
    };
    let mut net = Net::new(lat.clone());
    while !matches!(q.peek(), Tok::Eof) {
        if q.at_kw("lattice") {
            return Err(ParseError::DuplicateLatticeDecl { span: q.span() });
        }
        q.expect_kw("location")?;
        let name = q.literal()?;
        q.expect_punct("{")?;
        let state = q.state()?;
        q.expect_punct(";")?;
        q.expect_kw("policy")?;
        let policy = Arc::new(q.policy()?);
        q.expect_punct(";")?;
        let body = if q.at_kw("tuple") {
            q.bump();
            q.expect_punct("<")?;
            let mut comps = Vec::new();
            if !q.at_punct(">") {
                comps.push(q.literal()?);
                while q.eat_punct(",") {
                    comps.push(q.literal()?);
                }
            }
            q.expect_punct(">")?;
            Body::Tuple(comps)
        } else if q.at_kw("process") {
            q.bump();
            Body::Process(q.process()?)
        } else {
            return q.err(&["`process`", "`tuple`"]);
        };
        q.eat_punct(";");
        q.expect_punct("}")?;
        let origin = if net.items.iter().any(|it| it.name == name) {
            Origin::Declared
        } else {
            Origin::Base
        };
        net.push(name, Annotation { state, policy }, body, origin);
    }
    Ok(net)
}

/// Parses a standalone policy expression; level literals resolve against `lat`.
pub fn parse_policy(text: &str, lat: &Lattice) -> Result<Policy, ParseError> {
    let mut p = Parser::new(text, None)?;
    p.lattice = Some(lat);
    let pol = p.policy()?;
    p.expect_eof()?;
    Ok(pol)
}

pub fn parse_process(text: &str) -> Result<Process, ParseError> {
    let mut p = Parser::new(text, None)?;
    let proc = p.process()?;
    p.expect_eof()?;
    Ok(proc)
}

// ---------------------------------------------------------------- rendering

fn lit(s: &str) -> String {
    if is_bare_literal(s) {
        s.to_string()
    } else {
        format!("'{s}'")
    }
}

fn level_name(s: &str) -> String {
    if is_ident(s) && !is_keyword(s) && s != "_" {
        s.to_string()
    } else {
        format!("'{s}'")
    }
}

pub fn render_locref(r: &LocRef) -> String {
    match r {
        LocRef::Lit(s) => lit(s.as_str()),
        LocRef::Var(v) => v.to_string(),
    }
}

pub fn render_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Ref(r) => render_locref(r),
        Pattern::Binder(u) => format!("?{u}"),
        Pattern::Wildcard => "_".into(),
    }
}

fn render_patterns(ps: &[Pattern]) -> String {
    ps.iter().map(render_pattern).collect::<Vec<_>>().join(", ")
}

pub fn render_action(a: &Action) -> String {
    format!("{}({})@{}", a.kind, render_patterns(&a.args), render_locref(&a.target))
}

fn render_action_pattern(a: &ActionPattern) -> String {
    let args = match &a.args {
        ArgsPattern::Any => "_*".to_string(),
        ArgsPattern::List(ps) => render_patterns(ps),
    };
    format!("{}({})@{}", a.kind, args, render_locref(&a.target))
}

pub fn render_process(p: &Process) -> String {
    match p {
        Process::Parallel(ps) => ps.iter().map(render_sum).collect::<Vec<_>>().join(" | "),
        other => render_sum(other),
    }
}

fn render_sum(p: &Process) -> String {
    match p {
        Process::Choice(bs) if !bs.is_empty() => {
            bs.iter().map(render_branch).collect::<Vec<_>>().join(" + ")
        }
        other => render_term(other),
    }
}

fn render_term(p: &Process) -> String {
    match p {
        Process::Nil => "0".into(),
        Process::Replicate(q) => format!("*{}", render_term(q)),
        Process::Choice(bs) if bs.len() == 1 => render_branch(&bs[0]),
        other => format!("({})", render_process(other)),
    }
}

fn render_branch(b: &Branch) -> String {
    format!("{} . {}", render_action(&b.action), render_term(&b.cont))
}

fn tier(op: BinOp) -> u8 {
    match op {
        BinOp::Priority => 0,
        BinOp::Implies => 1,
        BinOp::Oplus | BinOp::Otimes => 2,
        BinOp::And | BinOp::Or => 3,
    }
}

fn binary(op: BinOp, l: String, l_tier: u8, r: String, r_tier: u8) -> String {
    let t = tier(op);
    let l = if l_tier < REL && l_tier != t { format!("({l})") } else { l };
    let r = if r_tier < REL { format!("({r})") } else { r };
    format!("{l} {} {r}", op.symbol())
}

/// Comparisons and occurs-in: never split by a binary operator, but
/// bracketed under `!`.
const REL: u8 = 4;
const ATOM: u8 = 5;

pub fn render_policy(p: &Policy, lat: &Lattice) -> String {
    policy_str(p, lat).0
}

fn policy_str(p: &Policy, lat: &Lattice) -> (String, u8) {
    match p {
        Policy::True => ("true".into(), ATOM),
        Policy::False => ("false".into(), ATOM),
        Policy::Not(q) => {
            let (s, t) = policy_str(q, lat);
            (if t < ATOM { format!("!({s})") } else { format!("!{s}") }, ATOM)
        }
        Policy::Bin(op, a, b) => {
            let (ls, lt) = policy_str(a, lat);
            let (rs, rt) = policy_str(b, lat);
            (binary(*op, ls, lt, rs, rt), tier(*op))
        }
        Policy::Aspect(a) => (render_aspect(a, lat), ATOM),
    }
}

fn render_aspect(a: &Aspect, lat: &Lattice) -> String {
    format!(
        "[ {} if {} :: {} . {} : {} ]",
        rec_str(&a.rec, lat).0,
        render_locref(&a.cut.subject),
        render_action_pattern(&a.cut.action),
        a.cut.cont,
        cond_str(&a.cond).0
    )
}

fn lev_str(v: &LevExpr, lat: &Lattice) -> String {
    match v {
        LevExpr::Lit(l) => level_name(lat.name(*l).map(|s| s.as_str()).unwrap_or("?")),
        k => k.keyword().unwrap().to_string(),
    }
}

fn rec_str(r: &Rec, lat: &Lattice) -> (String, u8) {
    match r {
        Rec::True => ("true".into(), ATOM),
        Rec::False => ("false".into(), ATOM),
        Rec::Eq(a, b) => (format!("{} = {}", eq_lhs(a), render_locref(b)), REL),
        Rec::Geq(a, b) => (format!("{} >= {}", lev_str(a, lat), lev_str(b, lat)), REL),
        Rec::OccursIn(ap, x) => (format!("{} occurs-in {x}", render_action_pattern(ap)), REL),
        Rec::Not(q) => {
            let (s, t) = rec_str(q, lat);
            (if t < ATOM { format!("!({s})") } else { format!("!{s}") }, ATOM)
        }
        Rec::Bin(op, a, b) => {
            let (ls, lt) = rec_str(a, lat);
            let (rs, rt) = rec_str(b, lat);
            (binary(*op, ls, lt, rs, rt), tier(*op))
        }
    }
}

fn eq_lhs(r: &LocRef) -> String {
    render_locref(r)
}

fn cond_str(c: &Cond) -> (String, u8) {
    match c {
        Cond::True => ("true".into(), ATOM),
        Cond::False => ("false".into(), ATOM),
        Cond::Eq(a, b) => (format!("{} = {}", render_locref(a), render_locref(b)), REL),
        Cond::OccursIn(ap, x) => (format!("{} occurs-in {x}", render_action_pattern(ap)), REL),
        Cond::Present(ps, at) => (format!("test({})@{}", render_patterns(ps), render_locref(at)), ATOM),
        Cond::Not(q) => {
            let (s, t) = cond_str(q);
            (if t < ATOM { format!("!({s})") } else { format!("!{s}") }, ATOM)
        }
        Cond::And(a, b) | Cond::Or(a, b) => {
            let op = if matches!(c, Cond::And(..)) { BinOp::And } else { BinOp::Or };
            let (ls, lt) = cond_str(a);
            let (rs, rt) = cond_str(b);
            (binary(op, ls, lt, rs, rt), 3)
        }
    }
}

/// Renders a net back to scenario syntax. Items are emitted in order; runtime
/// items are written as ordinary declarations.
pub fn render(net: &Net) -> String {
    let lat = &net.lattice;
    let mut out = String::new();
    let levels: Vec<String> = lat.levels().map(|l| level_name(lat.name(l).unwrap().as_str())).collect();
    out.push_str(&format!("lattice {{ levels: {}", levels.join(", ")));
    let edges: Vec<String> = lat
        .declared_edges()
        .map(|(a, b)| {
            format!(
                "{} < {}",
                level_name(lat.name(a).unwrap().as_str()),
                level_name(lat.name(b).unwrap().as_str())
            )
        })
        .collect();
    if !edges.is_empty() {
        out.push_str(&format!("; order: {}", edges.join(", ")));
    }
    out.push_str(" }\n");
    let blp = blp_policy();
    for it in &net.items {
        let st = &it.annot.state;
        let lv = |l: Level| level_name(lat.name(l).map(|s| s.as_str()).unwrap_or("?"));
        let policy = if *it.annot.policy == blp {
            "BLP".to_string()
        } else {
            render_policy(&it.annot.policy, lat)
        };
        let body = match &it.body {
            Body::Process(p) => format!("process {}", render_process(p)),
            Body::Tuple(t) => format!(
                "tuple <{}>",
                t.iter().map(|s| lit(s.as_str())).collect::<Vec<_>>().join(", ")
            ),
        };
        out.push_str(&format!(
            "location {} {{ state <{}, {}, {}, {}>; policy {}; {}; }}\n",
            lit(it.name.as_str()),
            lv(st.clearance),
            lv(st.current),
            lv(st.history),
            lv(st.classification),
            policy,
            body
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belnap::Four;

    fn chain() -> Lattice {
        Lattice::chain3()
    }

    #[test]
    fn aspect_with_any_args() {
        let lat = chain();
        let p = parse_policy("[ Ss >= Ot if ls :: read(_*)@lt . X : true ]", &lat).unwrap();
        let Policy::Aspect(a) = p else { panic!() };
        assert_eq!(a.rec, Rec::Geq(LevExpr::Ss, LevExpr::Ot));
        assert_eq!(a.cut.subject, LocRef::var("ls"));
        assert_eq!(a.cut.action.kind, ActionKind::Read);
        assert_eq!(a.cut.action.args, ArgsPattern::Any);
        assert_eq!(a.cut.action.target, LocRef::var("lt"));
        assert_eq!(a.cond, Cond::True);
    }

    #[test]
    fn nil_process() {
        assert_eq!(parse_process("0").unwrap(), Process::Nil);
        assert_eq!(render_process(&Process::Nil), "0");
    }

    #[test]
    fn precedence() {
        let lat = chain();
        assert_eq!(parse_policy("true", &lat).unwrap(), Policy::True);
        let p = parse_policy("true (+) false (+) true", &lat).unwrap();
        assert_eq!(
            p,
            Policy::bin(
                BinOp::Oplus,
                Policy::bin(BinOp::Oplus, Policy::True, Policy::False),
                Policy::True
            )
        );
        let p = parse_policy("true > false => !true && false", &lat).unwrap();
        assert_eq!(
            p,
            Policy::bin(
                BinOp::Priority,
                Policy::True,
                Policy::bin(
                    BinOp::Implies,
                    Policy::False,
                    Policy::bin(BinOp::And, Policy::Not(Box::new(Policy::True)), Policy::False)
                )
            )
        );
        let p = parse_policy("true (x) (false || true)", &lat).unwrap();
        assert_eq!(render_policy(&p, &lat), "true (x) (false || true)");
    }

    #[test]
    fn priority_of_two_aspects() {
        let lat = chain();
        let text = "[ true if u :: out(_*)@A . P : true ] > [ false if u :: in(_*)@A . P : true ]";
        let p = parse_policy(text, &lat).unwrap();
        assert!(matches!(p, Policy::Bin(BinOp::Priority, _, _)));
        assert_eq!(render_policy(&p, &lat), text);
    }

    #[test]
    fn airline_aspects() {
        let lat = chain();
        let a11 = "[ !(out(data)@PressRelease occurs-in P) if Government :: read('pass', data)@AirlineDB . P : test('threatlevel', 'high')@AirlineDB ]";
        let a10 = "[ Ss >= Ht if u :: read('pass', _)@AirlineDB . P : true ]";
        for t in [a11, a10] {
            let p = parse_policy(t, &lat).unwrap();
            assert_eq!(render_policy(&p, &lat), t);
        }
    }

    #[test]
    fn scenario_round_trip() {
        let text = "lattice { levels: 1, 2, 3; order: 1 < 2 < 3 }\n\
                    // comment\n\
                    location A { state <1,1,1,1>; policy BLP; process 0; }\n\
                    location B { state <2,2,1,2>; policy BLP; tuple <Report>; }\n\
                    location D { state <3,2,1,3>; policy true; process read(?x)@B . out(x)@A . 0; }\n\
                    location D { state <3,2,1,3>; policy true; process *(in(?y)@D . 0) | 0; }\n";
        let net = parse_scenario(text).unwrap();
        assert_eq!(net.items.len(), 4);
        assert_eq!(net.items[3].origin, Origin::Declared);
        let again = parse_scenario(&render(&net)).unwrap();
        assert_eq!(again, net);
    }

    #[test]
    fn errors() {
        let e = parse_scenario("location A {}").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { .. }));
        let e = parse_scenario("lattice { levels: a }\nlattice { levels: b }").unwrap_err();
        assert!(matches!(e, ParseError::DuplicateLatticeDecl { .. }), "{e}");
        let e = parse_scenario("lattice { levels: a }\nlocation A { state <a,a,a,z>; policy true; process 0; }")
            .unwrap_err();
        assert!(matches!(e, ParseError::UnknownLevelName { ref name, .. } if name == "z"));
        assert_eq!(e.span().line, 2);
        let e = parse_policy("NOPE", &chain()).unwrap_err();
        assert!(matches!(e, ParseError::UnknownPreset { .. }));
        let e = parse_policy("[ Ss >= 7 if u :: read(_*)@A . P : true ]", &chain()).unwrap_err();
        assert!(matches!(e, ParseError::UnknownLevelName { .. }));
        let e = parse_process("out(a)@B .").unwrap_err();
        let ParseError::Syntax { span, .. } = e else { panic!() };
        assert_eq!((span.line, span.column), (1, 11));
        assert!(parse_scenario("lattice { levels: a, b; order: a < b, b < a }").is_err());
    }

    #[test]
    fn quoting() {
        let p = Process::prefix(
            Action::new(ActionKind::Out, vec![Pattern::lit("pass"), Pattern::lit("in"), Pattern::var("u")], LocRef::lit("DB")),
            Process::Nil,
        );
        assert_eq!(render_process(&p), "out('pass', 'in', u)@DB . 0");
        assert_eq!(parse_process(&render_process(&p)).unwrap(), p);
    }

    #[test]
    fn blp_preset_renders_by_name() {
        let lat = chain();
        let p = parse_policy("BLP", &lat).unwrap();
        assert_eq!(p.aspects().len(), 8);
        let expanded = render_policy(&p, &lat);
        assert_eq!(parse_policy(&expanded, &lat).unwrap(), p);
        let _ = Four::ALL;
    }

    mod props {
        use super::*;
        use crate::gen::{random_net, random_policy};
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #[test]
            fn policy_round_trip(seed in any::<u64>()) {
                let lat = Lattice::diamond();
                let p = random_policy(&mut ChaCha8Rng::seed_from_u64(seed), &lat, 5);
                prop_assert_eq!(parse_policy(&render_policy(&p, &lat), &lat).unwrap(), p);
            }

            #[test]
            fn net_round_trip(seed in any::<u64>()) {
                let net = random_net(&mut ChaCha8Rng::seed_from_u64(seed), &Arc::new(Lattice::chain3()));
                prop_assert_eq!(parse_scenario(&render(&net)).unwrap(), net);
            }
        }
    }
}
