//! Belnap's four-valued truth space and its policy combinators.
//!
//! Every binary operator is a bound in one of the two orders on [`Four`]:
//! `and`/`or` are glb/lub in the truth order, `otimes`/`oplus` are glb/lub in
//! the knowledge order. The bounds are found by searching the four-point
//! order rather than by hand-written truth tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum Four {
    /// No decision.
    Bottom,
    True,
    False,
    /// Conflicting decisions.
    Top,
}

pub use Four::{Bottom, False, Top, True};

impl Four {
    pub const ALL: [Four; 4] = [Bottom, True, False, Top];

    pub fn as_str(self) -> &'static str {
        match self {
            Bottom => "bot",
            True => "tt",
            False => "ff",
            Top => "top",
        }
    }

    pub fn from_bool(b: bool) -> Four {
        if b {
            True
        } else {
            False
        }
    }
}

impl From<Four> for &'static str {
    fn from(v: Four) -> Self {
        v.as_str()
    }
}

impl fmt::Display for Four {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Four {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bot" => Ok(Bottom),
            "tt" => Ok(True),
            "ff" => Ok(False),
            "top" => Ok(Top),
            other => Err(format!("not a Belnap value: `{other}`")),
        }
    }
}

impl TryFrom<String> for Four {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Knowledge order: bottom below tt and ff, top above both.
pub fn leq_k(a: Four, b: Four) -> bool {
    a == b || a == Bottom || b == Top
}

/// Truth order: ff below bottom and top, tt above both.
pub fn leq_t(a: Four, b: Four) -> bool {
    a == b || a == False || b == True
}

fn lub(le: fn(Four, Four) -> bool, a: Four, b: Four) -> Four {
    let upper = Four::ALL.into_iter().filter(|&c| le(a, c) && le(b, c));
    let mut least = upper
        .clone()
        .filter(|&c| upper.clone().all(|d| le(c, d)));
    let r = least.next().expect("Four is a lattice under both orders");
    debug_assert!(least.next().is_none());
    r
}

fn glb(le: fn(Four, Four) -> bool, a: Four, b: Four) -> Four {
    let lower = Four::ALL.into_iter().filter(|&c| le(c, a) && le(c, b));
    let mut greatest = lower
        .clone()
        .filter(|&c| lower.clone().all(|d| le(d, c)));
    let r = greatest.next().expect("Four is a lattice under both orders");
    debug_assert!(greatest.next().is_none());
    r
}

/// Conjunction: glb in the truth order.
pub fn band(a: Four, b: Four) -> Four {
    glb(leq_t, a, b)
}

/// Disjunction: lub in the truth order.
pub fn bor(a: Four, b: Four) -> Four {
    lub(leq_t, a, b)
}

/// Consensus: glb in the knowledge order.
pub fn otimes(a: Four, b: Four) -> Four {
    glb(leq_k, a, b)
}

/// Gullibility: lub in the knowledge order.
pub fn oplus(a: Four, b: Four) -> Four {
    lub(leq_k, a, b)
}

/// Negation swaps tt and ff and fixes the two non-classical values.
pub fn bnot(a: Four) -> Four {
    match a {
        True => False,
        False => True,
        v => v,
    }
}

pub fn implies(p1: Four, p2: Four) -> Four {
    if leq_k(p1, True) {
        p2
    } else {
        True
    }
}

/// The first operand unless it is undecided.
pub fn priority(p1: Four, p2: Four) -> Four {
    if p1 == Bottom {
        p2
    } else {
        p1
    }
}

/// Access gate: admits exactly the values at or below tt in the knowledge order.
pub fn grant(p: Four) -> bool {
    leq_k(p, True)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent encoding: (evidence for, evidence against).
    fn enc(v: Four) -> (bool, bool) {
        match v {
            Bottom => (false, false),
            True => (true, false),
            False => (false, true),
            Top => (true, true),
        }
    }

    fn dec((t, f): (bool, bool)) -> Four {
        match (t, f) {
            (false, false) => Bottom,
            (true, false) => True,
            (false, true) => False,
            (true, true) => Top,
        }
    }

    #[test]
    fn orders_match_diagrams() {
        assert!(leq_k(Bottom, True));
        assert!(!leq_k(True, False));
        assert!(leq_t(False, Top));
        assert!(!leq_t(Bottom, Top));
        for a in Four::ALL {
            for b in Four::ALL {
                let (at, af) = enc(a);
                let (bt, bf) = enc(b);
                assert_eq!(leq_k(a, b), at <= bt && af <= bf);
                assert_eq!(leq_t(a, b), at <= bt && af >= bf);
            }
        }
    }

    #[test]
    fn operators_against_pair_encoding() {
        for a in Four::ALL {
            for b in Four::ALL {
                let (at, af) = enc(a);
                let (bt, bf) = enc(b);
                assert_eq!(oplus(a, b), dec((at || bt, af || bf)), "{a} (+) {b}");
                assert_eq!(otimes(a, b), dec((at && bt, af && bf)), "{a} (x) {b}");
                assert_eq!(band(a, b), dec((at && bt, af || bf)), "{a} && {b}");
                assert_eq!(bor(a, b), dec((at || bt, af && bf)), "{a} || {b}");
            }
        }
    }

    #[test]
    fn named_examples() {
        assert_eq!(oplus(True, False), Top);
        assert_eq!(band(True, False), False);
        assert_eq!(otimes(True, Top), True);
        assert_eq!(bnot(Bottom), Bottom);
        assert_eq!(bnot(True), False);
        assert_eq!(bnot(Top), Top);
        assert_eq!(implies(Bottom, False), False);
        assert_eq!(implies(Top, False), True);
        for p in Four::ALL {
            assert_eq!(implies(True, p), p);
        }
        assert_eq!(priority(Bottom, False), False);
        assert_eq!(priority(True, False), True);
        assert_eq!(priority(Bottom, Bottom), Bottom);
        assert!(grant(Bottom));
        assert!(grant(True));
        assert!(!grant(False));
        assert!(!grant(Top));
    }

    #[test]
    fn lattice_laws_and_de_morgan() {
        let ops: [fn(Four, Four) -> Four; 4] = [band, bor, otimes, oplus];
        for op in ops {
            for a in Four::ALL {
                assert_eq!(op(a, a), a);
                for b in Four::ALL {
                    assert_eq!(op(a, b), op(b, a));
                    for c in Four::ALL {
                        assert_eq!(op(op(a, b), c), op(a, op(b, c)));
                    }
                }
            }
        }
        for a in Four::ALL {
            for b in Four::ALL {
                assert_eq!(band(a, bor(a, b)), a);
                assert_eq!(bor(a, band(a, b)), a);
                assert_eq!(otimes(a, oplus(a, b)), a);
                assert_eq!(oplus(a, otimes(a, b)), a);
                assert_eq!(bnot(band(a, b)), bor(bnot(a), bnot(b)));
            }
        }
    }

    #[test]
    fn classical_restriction() {
        let cls = [True, False];
        for a in cls {
            let ba = a == True;
            assert_eq!(bnot(a), Four::from_bool(!ba));
            for b in cls {
                let bb = b == True;
                assert_eq!(band(a, b), Four::from_bool(ba && bb));
                assert_eq!(bor(a, b), Four::from_bool(ba || bb));
                assert_eq!(implies(a, b), Four::from_bool(!ba || bb));
            }
        }
    }

    #[test]
    fn grant_is_not_ff_nor_top() {
        for p in Four::ALL {
            assert_eq!(grant(p), p != False && p != Top);
        }
    }

    #[test]
    fn text_round_trip() {
        for p in Four::ALL {
            assert_eq!(p.as_str().parse::<Four>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert!("maybe".parse::<Four>().is_err());
    }
}
