//! Syntax trees for nets, processes, actions, localized states and policies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lattice::{Lattice, Level};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Out,
    In,
    Read,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Out => "out",
            ActionKind::In => "in",
            ActionKind::Read => "read",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A location position: a literal name or a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocRef {
    Lit(Symbol),
    Var(Symbol),
}

impl LocRef {
    pub fn lit(s: &str) -> Self {
        LocRef::Lit(Symbol::new(s))
    }

    pub fn var(s: &str) -> Self {
        LocRef::Var(Symbol::new(s))
    }

    pub fn as_lit(&self) -> Option<&Symbol> {
        match self {
            LocRef::Lit(s) => Some(s),
            LocRef::Var(_) => None,
        }
    }
}

/// An argument position. Binders occur in `in`/`read`; wildcards only inside policies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    Ref(LocRef),
    Binder(Symbol),
    Wildcard,
}

impl Pattern {
    pub fn lit(s: &str) -> Self {
        Pattern::Ref(LocRef::lit(s))
    }

    pub fn var(s: &str) -> Self {
        Pattern::Ref(LocRef::var(s))
    }

    pub fn binder(s: &str) -> Self {
        Pattern::Binder(Symbol::new(s))
    }
}

/// A process action `kind(args)@target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub kind: ActionKind,
    pub args: Vec<Pattern>,
    pub target: LocRef,
}

impl Action {
    pub fn new(kind: ActionKind, args: Vec<Pattern>, target: LocRef) -> Self {
        Action { kind, args, target }
    }
}

/// Argument list of an action pattern; `Any` is the arity-agnostic `(_*)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArgsPattern {
    Any,
    List(Vec<Pattern>),
}

/// An action with wildcards, as trapped by a cut or searched by occurs-in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionPattern {
    pub kind: ActionKind,
    pub args: ArgsPattern,
    pub target: LocRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub action: Action,
    pub cont: Process,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Process {
    #[default]
    Nil,
    /// Guarded sum; a single branch is a plain prefix `a.P`.
    Choice(Vec<Branch>),
    Parallel(Vec<Process>),
    Replicate(Box<Process>),
}

impl Process {
    pub fn prefix(action: Action, cont: Process) -> Self {
        Process::Choice(vec![Branch { action, cont }])
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Nil)
    }
}

/// The four levels attached to a location: clearance, current, history, classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalizedState {
    pub clearance: Level,
    pub current: Level,
    pub history: Level,
    pub classification: Level,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub state: LocalizedState,
    pub policy: Arc<Policy>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Body {
    Process(Process),
    Tuple(Vec<Symbol>),
}

/// How an item came to exist. The base item of a name is the first block declared
/// for it and is the only target of `out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Base,
    Declared,
    Runtime,
}

#[derive(Debug, Clone)]
pub struct LocatedItem {
    /// Run-local identity used by traces; ignored by equality and rendering.
    pub uid: u64,
    pub name: Symbol,
    pub annot: Annotation,
    pub body: Body,
    pub origin: Origin,
}

impl PartialEq for LocatedItem {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.annot == other.annot
            && self.body == other.body
            && self.origin == other.origin
    }
}

impl Eq for LocatedItem {}

impl LocatedItem {
    pub fn is_tuple(&self) -> bool {
        matches!(self.body, Body::Tuple(_))
    }

    pub fn process(&self) -> Option<&Process> {
        match &self.body {
            Body::Process(p) => Some(p),
            Body::Tuple(_) => None,
        }
    }

    pub fn tuple(&self) -> Option<&[Symbol]> {
        match &self.body {
            Body::Tuple(t) => Some(t),
            Body::Process(_) => None,
        }
    }
}

/// A net: a flat multiset of located items over one lattice.
#[derive(Debug, Clone)]
pub struct Net {
    pub lattice: Arc<Lattice>,
    pub items: Vec<LocatedItem>,
    pub next_uid: u64,
}

impl PartialEq for Net {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.items == other.items
    }
}

impl Eq for Net {}

impl Net {
    pub fn new(lattice: Arc<Lattice>) -> Self {
        Net {
            lattice,
            items: Vec::new(),
            next_uid: 0,
        }
    }

    /// Appends an item, assigning it a fresh uid.
    pub fn push(&mut self, name: Symbol, annot: Annotation, body: Body, origin: Origin) -> u64 {
        let uid = self.next_uid;
        self.next_uid += 1;
        self.items.push(LocatedItem {
            uid,
            name,
            annot,
            body,
            origin,
        });
        uid
    }

    pub fn position(&self, uid: u64) -> Option<usize> {
        self.items.iter().position(|it| it.uid == uid)
    }

    /// The distinguished item named `name` that receives `out`s.
    pub fn base_item(&self, name: &Symbol) -> Option<usize> {
        self.items
            .iter()
            .position(|it| it.origin == Origin::Base && &it.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Oplus,
    Otimes,
    Implies,
    Priority,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Oplus => "(+)",
            BinOp::Otimes => "(x)",
            BinOp::Implies => "=>",
            BinOp::Priority => ">",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Policy {
    Aspect(Box<Aspect>),
    Not(Box<Policy>),
    Bin(BinOp, Box<Policy>, Box<Policy>),
    True,
    False,
}

impl Policy {
    pub fn bin(op: BinOp, a: Policy, b: Policy) -> Self {
        Policy::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn aspect(rec: Rec, cut: Cut, cond: Cond) -> Self {
        Policy::Aspect(Box::new(Aspect { rec, cut, cond }))
    }

    /// Aspects in left-to-right order.
    pub fn aspects(&self) -> Vec<&Aspect> {
        fn walk<'a>(p: &'a Policy, out: &mut Vec<&'a Aspect>) {
            match p {
                Policy::Aspect(a) => out.push(a),
                Policy::Not(p) => walk(p, out),
                Policy::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Policy::True | Policy::False => {}
            }
        }
        let mut v = Vec::new();
        walk(self, &mut v);
        v
    }
}

/// `[ rec if cut : cond ]`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Aspect {
    pub rec: Rec,
    pub cut: Cut,
    pub cond: Cond,
}

/// `subject :: action . X`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    pub subject: LocRef,
    pub action: ActionPattern,
    pub cont: Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rec {
    Eq(LocRef, LocRef),
    Not(Box<Rec>),
    /// Any [`BinOp`] except `Priority`.
    Bin(BinOp, Box<Rec>, Box<Rec>),
    True,
    False,
    OccursIn(ActionPattern, Symbol),
    Geq(LevExpr, LevExpr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cond {
    Eq(LocRef, LocRef),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    True,
    False,
    OccursIn(ActionPattern, Symbol),
    /// `test(pattern)@loc`: some tuple at `loc` matches `pattern`.
    Present(Vec<Pattern>, LocRef),
}

/// Level expressions: the five interaction names or a lattice constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevExpr {
    Ss,
    Cs,
    Hs,
    Ot,
    Ht,
    Lit(Level),
}

impl LevExpr {
    pub fn keyword(self) -> Option<&'static str> {
        Some(match self {
            LevExpr::Ss => "Ss",
            LevExpr::Cs => "Cs",
            LevExpr::Hs => "Hs",
            LevExpr::Ot => "Ot",
            LevExpr::Ht => "Ht",
            LevExpr::Lit(_) => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticKind {
    ForeignLevel,
    CurrentAboveClearance,
    TupleLevelsDiffer,
    InconsistentLocation,
    BinderInOut,
    WildcardInProcess,
    FreeVariable,
    EmptyChoice,
    UnknownLocation,
    UnboundPolicyVariable,
    ContinuationMismatch,
    PriorityInRec,
    BinderInPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: Symbol,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "location {}: {}", self.location, self.message)
    }
}

/// Checks the well-formedness invariants of a net. Never mutates its input.
pub fn validate(net: &Net) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let lat = &net.lattice;
    let names: BTreeSet<&Symbol> = net.items.iter().map(|it| &it.name).collect();
    let mut first_seen: BTreeMap<&Symbol, &LocalizedState> = BTreeMap::new();
    let mut checked_policies: Vec<*const Policy> = Vec::new();

    for it in &net.items {
        let mut diag = |kind, message: String| {
            diags.push(Diagnostic {
                location: it.name.clone(),
                kind,
                message,
            })
        };
        let st = &it.annot.state;
        let levels = [st.clearance, st.current, st.history, st.classification];
        if levels.iter().any(|l| !lat.contains(*l)) {
            diag(
                DiagnosticKind::ForeignLevel,
                "localized state mentions a level outside the net's lattice".into(),
            );
            continue;
        }
        if !lat.leq(st.current, st.clearance).unwrap_or(false) {
            diag(
                DiagnosticKind::CurrentAboveClearance,
                "current level exceeds clearance".into(),
            );
        }
        if it.is_tuple()
            && it.origin != Origin::Runtime
            && !(st.clearance == st.classification && st.current == st.classification)
        {
            diag(
                DiagnosticKind::TupleLevelsDiffer,
                "tuple location must have equal clearance, current level and classification"
                    .into(),
            );
        }
        match first_seen.get(&it.name) {
            Some(prev)
                if prev.clearance != st.clearance
                    || prev.current != st.current
                    || prev.classification != st.classification =>
            {
                diag(
                    DiagnosticKind::InconsistentLocation,
                    "items sharing this name disagree on clearance, current level or classification"
                        .into(),
                );
            }
            Some(_) => {}
            None => {
                first_seen.insert(&it.name, st);
            }
        }
        if let Body::Process(p) = &it.body {
            check_process(p, &mut BTreeSet::new(), &names, &mut diag);
        }
        let pp = Arc::as_ptr(&it.annot.policy);
        if !checked_policies.contains(&pp) {
            checked_policies.push(pp);
            check_policy(&it.annot.policy, lat, &mut diag);
        }
    }
    diags
}

fn check_locref(
    r: &LocRef,
    bound: &BTreeSet<Symbol>,
    diag: &mut impl FnMut(DiagnosticKind, String),
) {
    if let LocRef::Var(v) = r {
        if !bound.contains(v) {
            diag(
                DiagnosticKind::FreeVariable,
                format!("variable `{v}` is not bound by an enclosing binder"),
            );
        }
    }
}

fn check_process(
    p: &Process,
    bound: &mut BTreeSet<Symbol>,
    names: &BTreeSet<&Symbol>,
    diag: &mut impl FnMut(DiagnosticKind, String),
) {
    match p {
        Process::Nil => {}
        Process::Parallel(ps) => {
            for q in ps {
                check_process(q, bound, names, diag);
            }
        }
        Process::Replicate(q) => check_process(q, bound, names, diag),
        Process::Choice(bs) => {
            if bs.is_empty() {
                diag(DiagnosticKind::EmptyChoice, "choice without branches".into());
            }
            for b in bs {
                let a = &b.action;
                let mut new_binders = Vec::new();
                for arg in &a.args {
                    match arg {
                        Pattern::Ref(r) => check_locref(r, bound, diag),
                        Pattern::Binder(u) => {
                            if a.kind == ActionKind::Out {
                                diag(
                                    DiagnosticKind::BinderInOut,
                                    format!("`out` cannot bind `?{u}`"),
                                );
                            }
                            new_binders.push(u.clone());
                        }
                        Pattern::Wildcard => diag(
                            DiagnosticKind::WildcardInProcess,
                            "wildcard `_` is only allowed inside policies".into(),
                        ),
                    }
                }
                check_locref(&a.target, bound, diag);
                if let LocRef::Lit(t) = &a.target {
                    if !names.contains(t) {
                        diag(
                            DiagnosticKind::UnknownLocation,
                            format!("action targets undeclared location `{t}`"),
                        );
                    }
                }
                let added: Vec<Symbol> = new_binders
                    .into_iter()
                    .filter(|u| bound.insert(u.clone()))
                    .collect();
                check_process(&b.cont, bound, names, diag);
                for u in added {
                    bound.remove(&u);
                }
            }
        }
    }
}

fn check_policy(p: &Policy, lat: &Lattice, diag: &mut impl FnMut(DiagnosticKind, String)) {
    match p {
        Policy::Aspect(a) => check_aspect(a, lat, diag),
        Policy::Not(q) => check_policy(q, lat, diag),
        Policy::Bin(_, l, r) => {
            check_policy(l, lat, diag);
            check_policy(r, lat, diag);
        }
        Policy::True | Policy::False => {}
    }
}

fn cut_vars(cut: &Cut) -> BTreeSet<Symbol> {
    let mut vs = BTreeSet::new();
    let mut add = |r: &LocRef| {
        if let LocRef::Var(v) = r {
            vs.insert(v.clone());
        }
    };
    add(&cut.subject);
    add(&cut.action.target);
    if let ArgsPattern::List(ps) = &cut.action.args {
        for p in ps {
            if let Pattern::Ref(r) = p {
                add(r);
            }
        }
    }
    vs
}

fn check_aspect(a: &Aspect, lat: &Lattice, diag: &mut impl FnMut(DiagnosticKind, String)) {
    let mut ck = AspectChecker {
        vars: cut_vars(&a.cut),
        cont: &a.cut.cont,
        lat,
        found: Vec::new(),
    };
    if let ArgsPattern::List(ps) = &a.cut.action.args {
        if ps.iter().any(|p| matches!(p, Pattern::Binder(_))) {
            ck.found
                .push((DiagnosticKind::BinderInPolicy, "cuts cannot contain binders".into()));
        }
    }
    ck.rec(&a.rec);
    ck.cond(&a.cond);
    for (k, m) in ck.found {
        diag(k, m);
    }
}

struct AspectChecker<'a> {
    vars: BTreeSet<Symbol>,
    cont: &'a Symbol,
    lat: &'a Lattice,
    found: Vec<(DiagnosticKind, String)>,
}

impl AspectChecker<'_> {
    fn loc(&mut self, r: &LocRef) {
        if let LocRef::Var(v) = r {
            if !self.vars.contains(v) {
                self.found.push((
                    DiagnosticKind::UnboundPolicyVariable,
                    format!("policy variable `{v}` is not bound by the cut"),
                ));
            }
        }
    }

    fn patterns(&mut self, ps: &[Pattern], what: &str) {
        for p in ps {
            match p {
                Pattern::Ref(r) => self.loc(r),
                Pattern::Binder(_) => self.found.push((
                    DiagnosticKind::BinderInPolicy,
                    format!("{what} patterns cannot contain binders"),
                )),
                Pattern::Wildcard => {}
            }
        }
    }

    fn occurs(&mut self, ap: &ActionPattern, x: &Symbol) {
        if x != self.cont {
            self.found.push((
                DiagnosticKind::ContinuationMismatch,
                format!("occurs-in refers to `{x}` but the cut binds `{}`", self.cont),
            ));
        }
        self.loc(&ap.target);
        if let ArgsPattern::List(ps) = &ap.args {
            self.patterns(ps, "occurs-in");
        }
    }

    fn rec(&mut self, r: &Rec) {
        match r {
            Rec::Eq(a, b) => {
                self.loc(a);
                self.loc(b);
            }
            Rec::Not(q) => self.rec(q),
            Rec::Bin(op, a, b) => {
                if *op == BinOp::Priority {
                    self.found.push((
                        DiagnosticKind::PriorityInRec,
                        "priority `>` is not a recommendation operator".into(),
                    ));
                }
                self.rec(a);
                self.rec(b);
            }
            Rec::True | Rec::False => {}
            Rec::OccursIn(ap, x) => self.occurs(ap, x),
            Rec::Geq(a, b) => {
                for v in [a, b] {
                    if let LevExpr::Lit(l) = v {
                        if !self.lat.contains(*l) {
                            self.found.push((
                                DiagnosticKind::ForeignLevel,
                                "recommendation mentions a level outside the net's lattice".into(),
                            ));
                        }
                    }
                }
            }
        }
    }

    fn cond(&mut self, c: &Cond) {
        match c {
            Cond::Eq(a, b) => {
                self.loc(a);
                self.loc(b);
            }
            Cond::Not(q) => self.cond(q),
            Cond::And(a, b) | Cond::Or(a, b) => {
                self.cond(a);
                self.cond(b);
            }
            Cond::True | Cond::False => {}
            Cond::OccursIn(ap, x) => self.occurs(ap, x),
            Cond::Present(ps, at) => {
                self.loc(at);
                self.patterns(ps, "test");
            }
        }
    }
}
