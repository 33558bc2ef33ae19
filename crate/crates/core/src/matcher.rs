//! Pattern machinery: flattening actions into token lists, aligning a cut
//! against a concrete action, tuple matching, occurs-in and substitution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::{Action, ActionKind, ActionPattern, ArgsPattern, Branch, Cut, LocRef, Pattern, Process};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("variable `{0}` reached tuple matching unresolved")]
    OpenVariableInPattern(Symbol),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token<'a> {
    Lit(Symbol),
    Var(Symbol),
    Binder(Symbol),
    Wildcard,
    /// The arity-agnostic argument list `_*`.
    AnyArgs,
    Keyword(ActionKind),
    /// Continuation metavariable of a cut.
    Meta(Symbol),
    /// Concrete continuation process.
    Proc(&'a Process),
}

impl fmt::Display for Token<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Lit(s) | Token::Var(s) | Token::Meta(s) => write!(f, "{s}"),
            Token::Binder(s) => write!(f, "?{s}"),
            Token::Wildcard => f.write_str("_"),
            Token::AnyArgs => f.write_str("_*"),
            Token::Keyword(k) => write!(f, "{k}"),
            Token::Proc(_) => f.write_str("P"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenList<'a>(pub Vec<Token<'a>>);

impl fmt::Display for TokenList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("]")
    }
}

/// Argument position of [`extract`].
#[derive(Debug, Clone, Copy)]
pub enum Args<'a> {
    Any,
    List(&'a [Pattern]),
}

impl<'a> From<&'a ArgsPattern> for Args<'a> {
    fn from(a: &'a ArgsPattern) -> Self {
        match a {
            ArgsPattern::Any => Args::Any,
            ArgsPattern::List(ps) => Args::List(ps),
        }
    }
}

/// Continuation position of [`extract`].
#[derive(Debug, Clone, Copy)]
pub enum Slot<'a> {
    Meta(&'a Symbol),
    Proc(&'a Process),
}

fn loc_token<'a>(r: &LocRef) -> Token<'a> {
    match r {
        LocRef::Lit(s) => Token::Lit(s.clone()),
        LocRef::Var(s) => Token::Var(s.clone()),
    }
}

fn pattern_token<'a>(p: &Pattern) -> Token<'a> {
    match p {
        Pattern::Ref(r) => loc_token(r),
        Pattern::Binder(s) => Token::Binder(s.clone()),
        Pattern::Wildcard => Token::Wildcard,
    }
}

/// Flattens `subject :: kind(args)@target . cont` into
/// `[subject, kind, args.., target, cont]`.
pub fn extract<'a>(
    subject: &LocRef,
    kind: ActionKind,
    args: Args<'_>,
    target: &LocRef,
    cont: Slot<'a>,
) -> TokenList<'a> {
    let mut v = vec![loc_token(subject), Token::Keyword(kind)];
    match args {
        Args::Any => v.push(Token::AnyArgs),
        Args::List(ps) => v.extend(ps.iter().map(pattern_token)),
    }
    v.push(loc_token(target));
    v.push(match cont {
        Slot::Meta(x) => Token::Meta(x.clone()),
        Slot::Proc(p) => Token::Proc(p),
    });
    TokenList(v)
}

pub fn extract_cut(cut: &Cut) -> TokenList<'static> {
    extract(
        &cut.subject,
        cut.action.kind,
        (&cut.action.args).into(),
        &cut.action.target,
        Slot::Meta(&cut.cont),
    )
    .into_static()
}

impl TokenList<'_> {
    fn into_static(self) -> TokenList<'static> {
        TokenList(
            self.0
                .into_iter()
                .map(|t| match t {
                    Token::Lit(s) => Token::Lit(s),
                    Token::Var(s) => Token::Var(s),
                    Token::Binder(s) => Token::Binder(s),
                    Token::Wildcard => Token::Wildcard,
                    Token::AnyArgs => Token::AnyArgs,
                    Token::Keyword(k) => Token::Keyword(k),
                    Token::Meta(s) => Token::Meta(s),
                    Token::Proc(_) => panic!("process tokens cannot outlive their process"),
                })
                .collect(),
        )
    }
}

pub fn extract_action<'a>(subject: &Symbol, action: &Action, cont: &'a Process) -> TokenList<'a> {
    extract(
        &LocRef::Lit(subject.clone()),
        action.kind,
        Args::List(&action.args),
        &action.target,
        Slot::Proc(cont),
    )
}

/// A substitution of literals for variables, plus the continuation binding of a cut.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    pub bindings: BTreeMap<Symbol, Symbol>,
    pub continuation: Option<(Symbol, Process)>,
}

impl Substitution {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty() && self.continuation.is_none()
    }

    pub fn get(&self, v: &Symbol) -> Option<&Symbol> {
        self.bindings.get(v)
    }

    fn bind(&mut self, v: &Symbol, l: &Symbol) -> bool {
        match self.bindings.get(v) {
            Some(prev) => prev == l,
            None => {
                self.bindings.insert(v.clone(), l.clone());
                true
            }
        }
    }

    pub fn resolve(&self, r: &LocRef) -> LocRef {
        match r {
            LocRef::Var(v) => match self.bindings.get(v) {
                Some(l) => LocRef::Lit(l.clone()),
                None => r.clone(),
            },
            LocRef::Lit(_) => r.clone(),
        }
    }

    pub fn apply_pattern(&self, p: &Pattern) -> Pattern {
        match p {
            Pattern::Ref(r) => Pattern::Ref(self.resolve(r)),
            other => other.clone(),
        }
    }

    pub fn apply_action_pattern(&self, ap: &ActionPattern) -> ActionPattern {
        ActionPattern {
            kind: ap.kind,
            args: match &ap.args {
                ArgsPattern::Any => ArgsPattern::Any,
                ArgsPattern::List(ps) => {
                    ArgsPattern::List(ps.iter().map(|p| self.apply_pattern(p)).collect())
                }
            },
            target: self.resolve(&ap.target),
        }
    }
}

/// Aligns one cut-side token with one action-side token.
fn align(theta: &mut Substitution, pat: &Token<'_>, act: &Token<'_>) -> bool {
    match (pat, act) {
        (Token::Wildcard, Token::Lit(_) | Token::Var(_) | Token::Binder(_)) => true,
        (Token::Lit(a), Token::Lit(b)) => a == b,
        (Token::Var(u), Token::Lit(l)) => theta.bind(u, l),
        (Token::Keyword(a), Token::Keyword(b)) => a == b,
        (Token::Meta(x), Token::Proc(p)) => {
            theta.continuation = Some((x.clone(), (*p).clone()));
            true
        }
        _ => false,
    }
}

fn align_all(theta: &mut Substitution, pats: &[Token<'_>], acts: &[Token<'_>]) -> bool {
    pats.len() == acts.len() && pats.iter().zip(acts).all(|(p, a)| align(theta, p, a))
}

/// Finds the substitution making a cut's token list agree with a concrete one.
pub fn check(cut: &TokenList<'_>, act: &TokenList<'_>) -> Option<Substitution> {
    let (c, a) = (&cut.0, &act.0);
    let mut theta = Substitution::default();
    let ok = match c.iter().position(|t| *t == Token::AnyArgs) {
        Some(pos) => {
            let (pre, post) = (&c[..pos], &c[pos + 1..]);
            a.len() >= pre.len() + post.len()
                && align_all(&mut theta, pre, &a[..pre.len()])
                && align_all(&mut theta, post, &a[a.len() - post.len()..])
        }
        None => align_all(&mut theta, c, a),
    };
    ok.then_some(theta)
}

/// Matches input patterns against a tuple of literals.
pub fn match_tuple(patterns: &[Pattern], tuple: &[Symbol]) -> Result<Option<Substitution>, MatchError> {
    if patterns.len() != tuple.len() {
        return Ok(None);
    }
    let mut theta = Substitution::default();
    for (p, l) in patterns.iter().zip(tuple) {
        match p {
            Pattern::Ref(LocRef::Lit(a)) => {
                if a != l {
                    return Ok(None);
                }
            }
            Pattern::Ref(LocRef::Var(u)) => return Err(MatchError::OpenVariableInPattern(u.clone())),
            Pattern::Binder(u) => {
                if !theta.bind(u, l) {
                    return Ok(None);
                }
            }
            Pattern::Wildcard => {}
        }
    }
    Ok(Some(theta))
}

fn action_matches(pat: &ActionPattern, a: &Action) -> bool {
    if pat.kind != a.kind {
        return false;
    }
    let mut theta = Substitution::default();
    let args_ok = match &pat.args {
        ArgsPattern::Any => true,
        ArgsPattern::List(ps) => {
            ps.len() == a.args.len()
                && ps
                    .iter()
                    .zip(&a.args)
                    .all(|(p, q)| align(&mut theta, &pattern_token(p), &pattern_token(q)))
        }
    };
    args_ok && align(&mut theta, &loc_token(&pat.target), &loc_token(&a.target))
}

/// Whether some action prefix anywhere in `proc` matches `pat`. Purely syntactic:
/// branches that can never be taken still count.
pub fn occurs_in(pat: &ActionPattern, proc: &Process) -> bool {
    match proc {
        Process::Nil => false,
        Process::Parallel(ps) => ps.iter().any(|p| occurs_in(pat, p)),
        Process::Replicate(p) => occurs_in(pat, p),
        Process::Choice(bs) => bs
            .iter()
            .any(|b| action_matches(pat, &b.action) || occurs_in(pat, &b.cont)),
    }
}

/// Replaces free variables by literals; a binder `?u` shadows `u` in its continuation.
pub fn substitute(proc: &Process, theta: &Substitution) -> Process {
    if theta.bindings.is_empty() {
        return proc.clone();
    }
    subst(proc, theta, &mut Vec::new())
}

fn subst(proc: &Process, theta: &Substitution, shadow: &mut Vec<Symbol>) -> Process {
    let res = |r: &LocRef, shadow: &[Symbol]| match r {
        LocRef::Var(v) if !shadow.contains(v) => theta.resolve(r),
        _ => r.clone(),
    };
    match proc {
        Process::Nil => Process::Nil,
        Process::Parallel(ps) => Process::Parallel(ps.iter().map(|p| subst(p, theta, shadow)).collect()),
        Process::Replicate(p) => Process::Replicate(Box::new(subst(p, theta, shadow))),
        Process::Choice(bs) => Process::Choice(
            bs.iter()
                .map(|b| {
                    let a = &b.action;
                    let args = a
                        .args
                        .iter()
                        .map(|p| match p {
                            Pattern::Ref(r) => Pattern::Ref(res(r, shadow)),
                            other => other.clone(),
                        })
                        .collect();
                    let target = res(&a.target, shadow);
                    let mark = shadow.len();
                    shadow.extend(a.args.iter().filter_map(|p| match p {
                        Pattern::Binder(u) => Some(u.clone()),
                        _ => None,
                    }));
                    let cont = subst(&b.cont, theta, shadow);
                    shadow.truncate(mark);
                    Branch {
                        action: Action::new(a.kind, args, target),
                        cont,
                    }
                })
                .collect(),
        ),
    }
}

/// Variables occurring free in a process.
pub fn free_vars(proc: &Process) -> BTreeSet<Symbol> {
    fn go(p: &Process, bound: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
        let see = |r: &LocRef, bound: &[Symbol], out: &mut BTreeSet<Symbol>| {
            if let LocRef::Var(v) = r {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        };
        match p {
            Process::Nil => {}
            Process::Parallel(ps) => ps.iter().for_each(|q| go(q, bound, out)),
            Process::Replicate(q) => go(q, bound, out),
            Process::Choice(bs) => {
                for b in bs {
                    for a in &b.action.args {
                        if let Pattern::Ref(r) = a {
                            see(r, bound, out);
                        }
                    }
                    see(&b.action.target, bound, out);
                    let mark = bound.len();
                    bound.extend(b.action.args.iter().filter_map(|p| match p {
                        Pattern::Binder(u) => Some(u.clone()),
                        _ => None,
                    }));
                    go(&b.cont, bound, out);
                    bound.truncate(mark);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(proc, &mut Vec::new(), &mut out);
    out
}
