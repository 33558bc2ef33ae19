//! Four-valued meaning of policies for one interaction.

use thiserror::Error;

use crate::ast::{Action, Aspect, BinOp, Cond, LevExpr, LocRef, Net, Pattern, Policy, Process, Rec};
use crate::belnap::{self, Four};
use crate::lattice::{Lattice, LatticeError, Level};
use crate::matcher::{self, MatchError, Substitution};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound by the cut")]
    UnresolvedVariable(Symbol),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// The levels an interaction exposes to recommendations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelBinding {
    /// Subject clearance.
    pub gs: Level,
    /// Subject current level.
    pub gc: Level,
    /// Target classification.
    pub go: Level,
    /// Subject history.
    pub ghs: Level,
    /// Target history.
    pub ght: Level,
}

impl LevelBinding {
    fn resolve(&self, e: LevExpr) -> Level {
        match e {
            LevExpr::Ss => self.gs,
            LevExpr::Cs => self.gc,
            LevExpr::Ot => self.go,
            LevExpr::Hs => self.ghs,
            LevExpr::Ht => self.ght,
            LevExpr::Lit(l) => l,
        }
    }
}

/// Everything a policy may observe about a pending interaction.
#[derive(Debug, Clone, Copy)]
pub struct InteractionView<'a> {
    pub subject: &'a Symbol,
    pub action: &'a Action,
    pub continuation: &'a Process,
    pub levels: LevelBinding,
    /// The net before the interaction.
    pub net: &'a Net,
}

impl InteractionView<'_> {
    fn lattice(&self) -> &Lattice {
        &self.net.lattice
    }
}

pub fn eval_policy(pol: &Policy, iv: &InteractionView<'_>) -> Result<Four, EvalError> {
    Ok(match pol {
        Policy::True => Four::True,
        Policy::False => Four::False,
        Policy::Not(p) => belnap::bnot(eval_policy(p, iv)?),
        Policy::Bin(op, a, b) => combine(*op, eval_policy(a, iv)?, eval_policy(b, iv)?),
        Policy::Aspect(a) => eval_aspect(a, iv)?,
    })
}

fn combine(op: BinOp, a: Four, b: Four) -> Four {
    match op {
        BinOp::Oplus => belnap::oplus(a, b),
        BinOp::Otimes => belnap::otimes(a, b),
        BinOp::Implies => belnap::implies(a, b),
        BinOp::Priority => belnap::priority(a, b),
        BinOp::And => belnap::band(a, b),
        BinOp::Or => belnap::bor(a, b),
    }
}

pub fn eval_aspect(asp: &Aspect, iv: &InteractionView<'_>) -> Result<Four, EvalError> {
    let cut = matcher::extract_cut(&asp.cut);
    let act = matcher::extract_action(iv.subject, iv.action, iv.continuation);
    let Some(theta) = matcher::check(&cut, &act) else {
        return Ok(Four::Bottom);
    };
    if !eval_cond(&asp.cond, &theta, iv)? {
        return Ok(Four::Bottom);
    }
    eval_rec(&asp.rec, &theta, &iv.levels, iv)
}

fn resolve(r: &LocRef, theta: &Substitution) -> Result<Symbol, EvalError> {
    match r {
        LocRef::Lit(l) => Ok(l.clone()),
        LocRef::Var(v) => theta
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::UnresolvedVariable(v.clone())),
    }
}

fn ground_patterns(ps: &[Pattern], theta: &Substitution) -> Result<Vec<Pattern>, EvalError> {
    ps.iter()
        .map(|p| match p {
            Pattern::Ref(r) => Ok(Pattern::Ref(LocRef::Lit(resolve(r, theta)?))),
            other => Ok(other.clone()),
        })
        .collect()
}

fn occurs(
    ap: &crate::ast::ActionPattern,
    x: &Symbol,
    theta: &Substitution,
) -> Result<bool, EvalError> {
    let proc = match &theta.continuation {
        Some((name, p)) if name == x => p,
        _ => return Err(EvalError::UnresolvedVariable(x.clone())),
    };
    let ground = theta.apply_action_pattern(ap);
    resolve(&ground.target, theta)?;
    if let crate::ast::ArgsPattern::List(ps) = &ground.args {
        ground_patterns(ps, theta)?;
    }
    Ok(matcher::occurs_in(&ground, proc))
}

pub fn eval_rec(
    rec: &Rec,
    theta: &Substitution,
    levels: &LevelBinding,
    iv: &InteractionView<'_>,
) -> Result<Four, EvalError> {
    Ok(match rec {
        Rec::True => Four::True,
        Rec::False => Four::False,
        Rec::Eq(a, b) => Four::from_bool(resolve(a, theta)? == resolve(b, theta)?),
        Rec::Geq(a, b) => {
            let (a, b) = (levels.resolve(*a), levels.resolve(*b));
            Four::from_bool(iv.lattice().leq(b, a)?)
        }
        Rec::OccursIn(ap, x) => Four::from_bool(occurs(ap, x, theta)?),
        Rec::Not(r) => belnap::bnot(eval_rec(r, theta, levels, iv)?),
        Rec::Bin(op, a, b) => combine(
            *op,
            eval_rec(a, theta, levels, iv)?,
            eval_rec(b, theta, levels, iv)?,
        ),
    })
}

pub fn eval_cond(cond: &Cond, theta: &Substitution, iv: &InteractionView<'_>) -> Result<bool, EvalError> {
    Ok(match cond {
        Cond::True => true,
        Cond::False => false,
        Cond::Eq(a, b) => resolve(a, theta)? == resolve(b, theta)?,
        Cond::Not(c) => !eval_cond(c, theta, iv)?,
        Cond::And(a, b) => eval_cond(a, theta, iv)? && eval_cond(b, theta, iv)?,
        Cond::Or(a, b) => eval_cond(a, theta, iv)? || eval_cond(b, theta, iv)?,
        Cond::OccursIn(ap, x) => occurs(ap, x, theta)?,
        Cond::Present(ps, at) => {
            let at = resolve(at, theta)?;
            let ps = ground_patterns(ps, theta)?;
            let mut found = false;
            for it in iv.net.items.iter().filter(|it| it.name == at) {
                if let Some(t) = it.tuple() {
                    if matcher::match_tuple(&ps, t)?.is_some() {
                        found = true;
                        break;
                    }
                }
            }
            found
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{ActionKind, Annotation, Body, LocalizedState, Origin};
    use crate::belnap::Four::*;
    use crate::parser::parse_policy;
    use std::sync::Arc;

    struct Fixture {
        net: Net,
        subject: Symbol,
        action: Action,
        cont: Process,
    }

    fn fixture(kind: ActionKind, cont: Process) -> Fixture {
        let lat = Arc::new(Lattice::chain3());
        let l1 = lat.level("1").unwrap();
        let mut net = Net::new(lat);
        net.push(
            "AirlineDB".into(),
            Annotation {
                state: LocalizedState {
                    clearance: l1,
                    current: l1,
                    history: l1,
                    classification: l1,
                },
                policy: Arc::new(Policy::True),
            },
            Body::Tuple(vec!["threatlevel".into(), "high".into()]),
            Origin::Base,
        );
        Fixture {
            net,
            subject: "Government".into(),
            action: Action::new(kind, vec![Pattern::lit("pass"), Pattern::lit("data")], LocRef::lit("AirlineDB")),
            cont,
        }
    }

    fn levels(lat: &Lattice, s: &str, c: &str, o: &str, hs: &str, ht: &str) -> LevelBinding {
        let l = |n| lat.level(n).unwrap();
        LevelBinding {
            gs: l(s),
            gc: l(c),
            go: l(o),
            ghs: l(hs),
            ght: l(ht),
        }
    }

    fn eval(f: &Fixture, lv: LevelBinding, text: &str) -> Four {
        let pol = parse_policy(text, &f.net.lattice).unwrap();
        let iv = InteractionView {
            subject: &f.subject,
            action: &f.action,
            continuation: &f.cont,
            levels: lv,
            net: &f.net,
        };
        eval_policy(&pol, &iv).unwrap()
    }

    #[test]
    fn constants_and_combinators() {
        let f = fixture(ActionKind::Read, Process::Nil);
        let lv = levels(&f.net.lattice, "1", "1", "1", "1", "1");
        assert_eq!(eval(&f, lv, "true"), True);
        assert_eq!(eval(&f, lv, "true (+) false"), Top);
        assert_eq!(eval(&f, lv, "false (+) true"), Top);
        assert_eq!(eval(&f, lv, "[ true if u :: out(_*)@lt . P : true ] > false"), False);
    }

    #[test]
    fn level_recommendations() {
        let f = fixture(ActionKind::Read, Process::Nil);
        let lat = f.net.lattice.clone();
        let asp2 = "[ Ss >= Ot if ls :: read(_*)@lt . X : true ]";
        assert_eq!(eval(&f, levels(&lat, "3", "1", "2", "1", "1"), asp2), True);
        assert_eq!(eval(&f, levels(&lat, "1", "1", "3", "1", "1"), asp2), False);
        assert_eq!(eval(&f, levels(&lat, "1", "1", "1", "1", "1"), "[ 2 >= 2 if ls :: read(_*)@lt . X : true ]"), True);
        let out = fixture(ActionKind::Out, Process::Nil);
        assert_eq!(eval(&out, levels(&lat, "3", "1", "2", "1", "1"), asp2), Bottom);
    }

    #[test]
    fn airline_future_aspect() {
        let asp11 = "[ !(out(data)@PressRelease occurs-in P) if Government :: read('pass', data)@AirlineDB . P : test('threatlevel', 'high')@AirlineDB ]";
        let leak = Process::prefix(
            Action::new(ActionKind::Out, vec![Pattern::lit("data")], LocRef::lit("PressRelease")),
            Process::Nil,
        );
        let f = fixture(ActionKind::Read, Process::Nil);
        let lv = levels(&f.net.lattice, "2", "2", "3", "1", "3");
        assert_eq!(eval(&f, lv, asp11), True);
        let f = fixture(ActionKind::Read, leak);
        assert_eq!(eval(&f, lv, asp11), False);
        let mut f = fixture(ActionKind::Read, Process::Nil);
        f.net.items.clear();
        assert_eq!(eval(&f, lv, asp11), Bottom);
    }

    #[test]
    fn unresolved_variable_is_an_error() {
        let f = fixture(ActionKind::Read, Process::Nil);
        let pol = parse_policy("[ zz = A if u :: read(_*)@lt . P : true ]", &f.net.lattice).unwrap();
        let iv = InteractionView {
            subject: &f.subject,
            action: &f.action,
            continuation: &f.cont,
            levels: levels(&f.net.lattice, "1", "1", "1", "1", "1"),
            net: &f.net,
        };
        assert_eq!(eval_policy(&pol, &iv), Err(EvalError::UnresolvedVariable("zz".into())));
    }

    #[test]
    fn ground_rec_agrees_with_cond() {
        let f = fixture(ActionKind::Read, Process::Nil);
        let lv = levels(&f.net.lattice, "1", "1", "1", "1", "1");
        for e in ["true && false", "true || false", "!false", "!(true && true) || false"] {
            let r = eval(&f, lv, &format!("[ {e} if u :: read(_*)@lt . P : true ]"));
            let c = eval(&f, lv, &format!("[ true if u :: read(_*)@lt . P : {e} ]"));
            assert_eq!(r == True, c == True, "{e}");
        }
    }
}
