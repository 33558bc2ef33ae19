//! Bell-LaPadula: the eight-aspect preset policy, the built-in scenarios, an
//! independent global-state oracle and the lemma harness that compares them.

pub mod harness;
pub mod oracle;
pub mod scenarios;

use crate::ast::{ActionKind, ActionPattern, ArgsPattern, BinOp, Cond, Cut, LevExpr, LocRef, Policy, Rec};

/// One aspect per (property, action) pair: `[ lhs >= rhs if ls :: kind(_*)@lt . P : true ]`.
const BLP_ASPECTS: [(LevExpr, LevExpr, ActionKind); 8] = [
    (LevExpr::Ss, LevExpr::Ot, ActionKind::Read),
    (LevExpr::Ss, LevExpr::Ot, ActionKind::In),
    (LevExpr::Ot, LevExpr::Cs, ActionKind::Out),
    (LevExpr::Ot, LevExpr::Cs, ActionKind::In),
    (LevExpr::Ot, LevExpr::Hs, ActionKind::Out),
    (LevExpr::Ot, LevExpr::Hs, ActionKind::In),
    (LevExpr::Ss, LevExpr::Ht, ActionKind::Read),
    (LevExpr::Ss, LevExpr::Ht, ActionKind::In),
];

fn blp_aspect(lhs: LevExpr, rhs: LevExpr, kind: ActionKind) -> Policy {
    Policy::aspect(
        Rec::Geq(lhs, rhs),
        Cut {
            subject: LocRef::var("ls"),
            action: ActionPattern {
                kind,
                args: ArgsPattern::Any,
                target: LocRef::var("lt"),
            },
            cont: "P".into(),
        },
        Cond::True,
    )
}

/// The eight BLP aspects combined left to right with `(+)`.
pub fn blp_policy() -> Policy {
    BLP_ASPECTS
        .iter()
        .map(|&(l, r, k)| blp_aspect(l, r, k))
        .reduce(|acc, a| Policy::bin(BinOp::Oplus, acc, a))
        .expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Action, Annotation, Body, LocalizedState, Net, Origin, Pattern, Process};
    use crate::belnap::Four;
    use crate::lattice::Lattice;
    use crate::parser::{parse_policy, render_policy};
    use crate::policy_eval::{eval_policy, InteractionView, LevelBinding};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use std::sync::Arc;

    #[test]
    fn preset_round_trips_with_eight_aspects() {
        let lat = Lattice::chain3();
        let p = blp_policy();
        let back = parse_policy(&render_policy(&p, &lat), &lat).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.aspects().len(), 8);
    }

    fn decide(pol: &Policy, kind: ActionKind, lv: LevelBinding, net: &Net) -> Four {
        let action = Action::new(kind, vec![Pattern::lit("X")], LocRef::lit("T"));
        let subject = "S".into();
        let iv = InteractionView {
            subject: &subject,
            action: &action,
            continuation: &Process::Nil,
            levels: lv,
            net,
        };
        eval_policy(pol, &iv).unwrap()
    }

    fn all_bindings(lat: &Lattice) -> Vec<LevelBinding> {
        let ls: Vec<_> = lat.levels().collect();
        let mut v = Vec::new();
        for &gs in &ls {
            for &gc in &ls {
                for &go in &ls {
                    for &ghs in &ls {
                        for &ght in &ls {
                            v.push(LevelBinding { gs, gc, go, ghs, ght });
                        }
                    }
                }
            }
        }
        v
    }

    #[test]
    fn decisions_match_direct_comparisons() {
        let lat = Arc::new(Lattice::diamond());
        let net = Net::new(lat.clone());
        let pol = blp_policy();
        let ge = |a, b| lat.leq(b, a).unwrap();
        for lv in all_bindings(&lat) {
            let read_ok = ge(lv.gs, lv.go) && ge(lv.gs, lv.ght);
            let out_ok = ge(lv.go, lv.gc) && ge(lv.go, lv.ghs);
            for (kind, ok) in [
                (ActionKind::Read, read_ok),
                (ActionKind::Out, out_ok),
                (ActionKind::In, read_ok && out_ok),
            ] {
                let d = decide(&pol, kind, lv, &net);
                assert!(d == Four::True || d == Four::False || d == Four::Top);
                assert_eq!(crate::belnap::grant(d), ok, "{kind} {lv:?}");
            }
        }
    }

    #[test]
    fn single_aspects_never_conflict_and_order_is_irrelevant() {
        let lat = Arc::new(Lattice::chain3());
        let mut net = Net::new(lat.clone());
        let l1 = lat.bottom();
        net.push(
            "T".into(),
            Annotation {
                state: LocalizedState {
                    clearance: l1,
                    current: l1,
                    history: l1,
                    classification: l1,
                },
                policy: Arc::new(Policy::True),
            },
            Body::Tuple(vec!["X".into()]),
            Origin::Base,
        );
        let singles: Vec<Policy> = BLP_ASPECTS.iter().map(|&(l, r, k)| blp_aspect(l, r, k)).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let perms: Vec<Policy> = (0..5)
            .map(|_| {
                let mut s = singles.clone();
                s.shuffle(&mut rng);
                s.into_iter().reduce(|a, b| Policy::bin(BinOp::Oplus, a, b)).unwrap()
            })
            .collect();
        let full = blp_policy();
        for lv in all_bindings(&lat) {
            for kind in [ActionKind::Read, ActionKind::In, ActionKind::Out] {
                for a in &singles {
                    assert_ne!(decide(a, kind, lv, &net), Four::Top);
                }
                let d = decide(&full, kind, lv, &net);
                for p in &perms {
                    assert_eq!(decide(p, kind, lv, &net), d);
                }
            }
        }
    }
}
