//! Random generators: bounded nets for the lemma harness and arbitrary syntax
//! trees for round-trip testing. All randomness comes from a caller-supplied RNG.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ast::*;
use crate::blp::blp_policy;
use crate::lattice::{Lattice, Level};
use crate::symbol::Symbol;

const LOCATION_NAMES: [&str; 5] = ["A", "B", "C", "D", "E"];
const VALUE_POOL: [&str; 2] = ["K0", "K1"];

/// Shape bounds for harness nets.
#[derive(Debug, Clone, Copy)]
pub struct NetBounds {
    pub max_locations: usize,
    pub max_processes: usize,
    pub max_actions: usize,
    /// Probability that a prefix offers a second branch.
    pub choice_prob: f64,
}

impl Default for NetBounds {
    fn default() -> Self {
        NetBounds {
            max_locations: 5,
            max_processes: 3,
            max_actions: 3,
            choice_prob: 0.2,
        }
    }
}

fn below<R: Rng>(rng: &mut R, lat: &Lattice, top: Level) -> Level {
    let ls: Vec<Level> = lat.levels().filter(|&l| lat.leq(l, top).unwrap()).collect();
    *ls.choose(rng).unwrap()
}

/// A random net under the BLP preset at every location. Every location has
/// classification equal to clearance and bottom history; tuple-holding
/// locations also have current level equal to clearance.
pub fn harness_net<R: Rng>(rng: &mut R, lat: &Arc<Lattice>, bounds: NetBounds) -> Net {
    let n_loc = rng.gen_range(2..=bounds.max_locations.max(2));
    let names = &LOCATION_NAMES[..n_loc];
    let n_proc = rng.gen_range(1..=bounds.max_processes.min(n_loc - 1).max(1));
    let mut order: Vec<usize> = (0..n_loc).collect();
    order.shuffle(rng);
    let procs: Vec<usize> = order[..n_proc].to_vec();
    let policy = Arc::new(blp_policy());
    let levels: Vec<Level> = lat.levels().collect();

    let mut states = Vec::new();
    for i in 0..n_loc {
        let s = *levels.choose(rng).unwrap();
        let c = if procs.contains(&i) { below(rng, lat, s) } else { s };
        states.push(LocalizedState {
            clearance: s,
            current: c,
            history: lat.bottom(),
            classification: s,
        });
    }

    let holders: Vec<&str> = (0..n_loc).filter(|i| !procs.contains(i)).map(|i| names[i]).collect();
    let sites = Sites { all: names, holders: &holders };
    let mut net = Net::new(lat.clone());
    let mut extra_tuples = Vec::new();
    for i in 0..n_loc {
        let annot = Annotation {
            state: states[i],
            policy: policy.clone(),
        };
        let body = if procs.contains(&i) {
            let n_act = rng.gen_range(1..=bounds.max_actions);
            Body::Process(program(rng, &sites, n_act, bounds.choice_prob, &mut Vec::new(), &mut 0))
        } else {
            Body::Tuple(random_tuple(rng))
        };
        net.push(Symbol::new(names[i]), annot.clone(), body, Origin::Base);
        if !procs.contains(&i) && rng.gen_bool(0.3) {
            extra_tuples.push((i, annot));
        }
    }
    for (i, annot) in extra_tuples {
        net.push(Symbol::new(names[i]), annot, Body::Tuple(random_tuple(rng)), Origin::Declared);
    }
    net
}

fn random_tuple<R: Rng>(rng: &mut R) -> Vec<Symbol> {
    let n = rng.gen_range(1..=2);
    (0..n).map(|_| Symbol::new(VALUE_POOL.choose(rng).unwrap())).collect()
}

/// Candidate targets: every location, and those holding tuples initially.
struct Sites<'a> {
    all: &'a [&'a str],
    holders: &'a [&'a str],
}

fn program<R: Rng>(
    rng: &mut R,
    names: &Sites<'_>,
    remaining: usize,
    choice_prob: f64,
    bound: &mut Vec<Symbol>,
    fresh: &mut usize,
) -> Process {
    if remaining == 0 {
        return Process::Nil;
    }
    let mut branches = vec![branch(rng, names, remaining, choice_prob, bound, fresh)];
    if remaining > 1 && rng.gen_bool(choice_prob) {
        branches.push(branch(rng, names, 1, choice_prob, bound, fresh));
    }
    Process::Choice(branches)
}

fn branch<R: Rng>(
    rng: &mut R,
    names: &Sites<'_>,
    remaining: usize,
    choice_prob: f64,
    bound: &mut Vec<Symbol>,
    fresh: &mut usize,
) -> Branch {
    let kind = *[ActionKind::Out, ActionKind::In, ActionKind::Read].choose(rng).unwrap();
    let arity = rng.gen_range(1..=2);
    let mut new_binders = Vec::new();
    let args = (0..arity)
        .map(|_| {
            let roll = if kind == ActionKind::Out { rng.gen_range(1..3) } else { rng.gen_range(-1..3) };
            if roll <= 0 {
                let u = Symbol::from(format!("v{fresh}"));
                *fresh += 1;
                new_binders.push(u.clone());
                Pattern::Binder(u)
            } else if roll == 1 && !bound.is_empty() {
                Pattern::Ref(LocRef::Var(bound.choose(rng).unwrap().clone()))
            } else {
                Pattern::lit(VALUE_POOL.choose(rng).unwrap())
            }
        })
        .collect();
    let pool = if kind != ActionKind::Out && !names.holders.is_empty() && rng.gen_bool(0.7) {
        names.holders
    } else {
        names.all
    };
    let target = LocRef::lit(pool.choose(rng).unwrap());
    let mark = bound.len();
    bound.extend(new_binders);
    let cont = program(rng, names, remaining - 1, choice_prob, bound, fresh);
    bound.truncate(mark);
    Branch {
        action: Action::new(kind, args, target),
        cont,
    }
}

// ------------------------------------------------------- round-trip trees

const LITERALS: [&str; 9] = ["A", "B1", "Report", "0", "pass", "in", "Ss", "hello world", "x-y"];
const VARIABLES: [&str; 5] = ["u", "v", "data", "x1", "lt"];
const BINDERS: [&str; 3] = ["u", "w", "y2"];
const CONTS: [&str; 3] = ["P", "X", "Q"];

fn locref<R: Rng>(rng: &mut R) -> LocRef {
    if rng.gen_bool(0.5) {
        LocRef::lit(LITERALS.choose(rng).unwrap())
    } else {
        LocRef::var(VARIABLES.choose(rng).unwrap())
    }
}

fn pattern<R: Rng>(rng: &mut R, binders: bool) -> Pattern {
    match rng.gen_range(0..if binders { 4 } else { 3 }) {
        0 => Pattern::Wildcard,
        3 => Pattern::binder(BINDERS.choose(rng).unwrap()),
        _ => Pattern::Ref(locref(rng)),
    }
}

fn patterns<R: Rng>(rng: &mut R, binders: bool) -> Vec<Pattern> {
    let n = rng.gen_range(0..=3);
    (0..n).map(|_| pattern(rng, binders)).collect()
}

fn kind<R: Rng>(rng: &mut R) -> ActionKind {
    *[ActionKind::Out, ActionKind::In, ActionKind::Read].choose(rng).unwrap()
}

fn action_pattern<R: Rng>(rng: &mut R) -> ActionPattern {
    ActionPattern {
        kind: kind(rng),
        args: if rng.gen_bool(0.3) {
            ArgsPattern::Any
        } else {
            ArgsPattern::List(patterns(rng, false))
        },
        target: locref(rng),
    }
}

fn lev_expr<R: Rng>(rng: &mut R, lat: &Lattice) -> LevExpr {
    match rng.gen_range(0..6) {
        0 => LevExpr::Ss,
        1 => LevExpr::Cs,
        2 => LevExpr::Hs,
        3 => LevExpr::Ot,
        4 => LevExpr::Ht,
        _ => LevExpr::Lit(*lat.levels().collect::<Vec<_>>().choose(rng).unwrap()),
    }
}

const REC_OPS: [BinOp; 5] = [BinOp::Oplus, BinOp::Otimes, BinOp::Implies, BinOp::And, BinOp::Or];
const ALL_OPS: [BinOp; 6] = [
    BinOp::Oplus,
    BinOp::Otimes,
    BinOp::Implies,
    BinOp::Priority,
    BinOp::And,
    BinOp::Or,
];

pub fn random_rec<R: Rng>(rng: &mut R, lat: &Lattice, depth: usize) -> Rec {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..5) {
            0 => Rec::True,
            1 => Rec::False,
            2 => Rec::Eq(locref(rng), locref(rng)),
            3 => Rec::OccursIn(action_pattern(rng), Symbol::new(CONTS.choose(rng).unwrap())),
            _ => Rec::Geq(lev_expr(rng, lat), lev_expr(rng, lat)),
        };
    }
    if rng.gen_bool(0.25) {
        Rec::Not(Box::new(random_rec(rng, lat, depth - 1)))
    } else {
        Rec::Bin(
            *REC_OPS.choose(rng).unwrap(),
            Box::new(random_rec(rng, lat, depth - 1)),
            Box::new(random_rec(rng, lat, depth - 1)),
        )
    }
}

pub fn random_cond<R: Rng>(rng: &mut R, depth: usize) -> Cond {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..5) {
            0 => Cond::True,
            1 => Cond::False,
            2 => Cond::Eq(locref(rng), locref(rng)),
            3 => Cond::OccursIn(action_pattern(rng), Symbol::new(CONTS.choose(rng).unwrap())),
            _ => Cond::Present(patterns(rng, false), locref(rng)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Cond::Not(Box::new(random_cond(rng, depth - 1))),
        1 => Cond::And(Box::new(random_cond(rng, depth - 1)), Box::new(random_cond(rng, depth - 1))),
        _ => Cond::Or(Box::new(random_cond(rng, depth - 1)), Box::new(random_cond(rng, depth - 1))),
    }
}

pub fn random_policy<R: Rng>(rng: &mut R, lat: &Lattice, depth: usize) -> Policy {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => Policy::True,
            1 => Policy::False,
            _ => Policy::aspect(
                random_rec(rng, lat, 2),
                Cut {
                    subject: locref(rng),
                    action: action_pattern(rng),
                    cont: Symbol::new(CONTS.choose(rng).unwrap()),
                },
                random_cond(rng, 2),
            ),
        };
    }
    if rng.gen_bool(0.2) {
        Policy::Not(Box::new(random_policy(rng, lat, depth - 1)))
    } else {
        Policy::bin(
            *ALL_OPS.choose(rng).unwrap(),
            random_policy(rng, lat, depth - 1),
            random_policy(rng, lat, depth - 1),
        )
    }
}

pub fn random_process<R: Rng>(rng: &mut R, depth: usize) -> Process {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return Process::Nil;
    }
    match rng.gen_range(0..5) {
        0 => Process::Parallel((0..rng.gen_range(2..=3)).map(|_| random_process(rng, depth - 1)).collect()),
        1 => Process::Replicate(Box::new(random_process(rng, depth - 1))),
        _ => Process::Choice(
            (0..rng.gen_range(1..=3))
                .map(|_| Branch {
                    action: Action::new(kind(rng), patterns(rng, true), locref(rng)),
                    cont: random_process(rng, depth - 1),
                })
                .collect(),
        ),
    }
}

/// A syntactically arbitrary net (not necessarily well-formed) over `lat`.
pub fn random_net<R: Rng>(rng: &mut R, lat: &Arc<Lattice>) -> Net {
    let levels: Vec<Level> = lat.levels().collect();
    let mut net = Net::new(lat.clone());
    for _ in 0..rng.gen_range(0..=4) {
        let name = Symbol::new(LITERALS.choose(rng).unwrap());
        let mut lv = || *levels.choose(rng).unwrap();
        let state = LocalizedState {
            clearance: lv(),
            current: lv(),
            history: lv(),
            classification: lv(),
        };
        let policy = if rng.gen_bool(0.2) {
            blp_policy()
        } else {
            random_policy(rng, lat, 3)
        };
        let body = if rng.gen_bool(0.3) {
            Body::Tuple(
                (0..rng.gen_range(0..=3))
                    .map(|_| Symbol::new(LITERALS.choose(rng).unwrap()))
                    .collect(),
            )
        } else {
            Body::Process(random_process(rng, 4))
        };
        let origin = if net.items.iter().any(|it| it.name == name) {
            Origin::Declared
        } else {
            Origin::Base
        };
        net.push(
            name,
            Annotation {
                state,
                policy: Arc::new(policy),
            },
            body,
            origin,
        );
    }
    net
}
