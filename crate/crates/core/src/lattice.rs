//! Finite lattices of security levels.
//!
//! A [`Lattice`] is declared by its level names and a list of strict edges
//! `a < b`. Construction takes the reflexive-transitive closure, checks
//! antisymmetry, and tabulates the least upper bound of every pair by
//! enumeration. Only joins and a bottom element are required; meets are never
//! used by the policy language.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("level `{0}` is declared more than once")]
    DuplicateLevel(String),
    #[error("unknown level name `{0}`")]
    UnknownLevelName(String),
    #[error("order contains a cycle through `{0}` and `{1}`")]
    CycleInOrder(String, String),
    #[error("levels `{0}` and `{1}` have no unique least upper bound")]
    NotALattice(String, String),
    #[error("the order has no bottom element")]
    NoBottom,
    #[error("level does not belong to this lattice")]
    ForeignLevel,
    #[error("too many levels ({0}); at most {max} are supported", max = u16::MAX)]
    TooManyLevels(usize),
}

/// Content-derived identity of a lattice; equal declarations yield equal ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeId(u64);

/// An element of some [`Lattice`]. Only meaningful relative to that lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Level {
    lattice: LatticeId,
    index: u16,
}

impl Level {
    pub fn lattice_id(&self) -> LatticeId {
        self.lattice
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Lattice {
    id: LatticeId,
    names: Vec<Symbol>,
    by_name: HashMap<Symbol, u16>,
    declared: Vec<(u16, u16)>,
    // row-major n*n reflexive-transitive closure
    order: Vec<bool>,
    joins: Vec<u16>,
    bottom: u16,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("levels", &self.names)
            .field(
                "order",
                &self
                    .declared
                    .iter()
                    .map(|&(a, b)| format!("{}<{}", self.names[a as usize], self.names[b as usize]))
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl Lattice {
    /// Builds and validates a lattice from level names and strict edges `(a, b)` meaning `a < b`.
    pub fn build<S: AsRef<str>>(levels: &[S], edges: &[(S, S)]) -> Result<Lattice, LatticeError> {
        let n = levels.len();
        if n > u16::MAX as usize {
            return Err(LatticeError::TooManyLevels(n));
        }
        if n == 0 {
            return Err(LatticeError::NoBottom);
        }
        let mut names = Vec::with_capacity(n);
        let mut by_name = HashMap::with_capacity(n);
        for (i, l) in levels.iter().enumerate() {
            let sym = Symbol::new(l.as_ref());
            if by_name.insert(sym.clone(), i as u16).is_some() {
                return Err(LatticeError::DuplicateLevel(l.as_ref().to_string()));
            }
            names.push(sym);
        }
        let lookup = |s: &str| {
            by_name
                .get(s)
                .copied()
                .ok_or_else(|| LatticeError::UnknownLevelName(s.to_string()))
        };
        let mut declared = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (ia, ib) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if ia == ib {
                return Err(LatticeError::CycleInOrder(a.as_ref().into(), b.as_ref().into()));
            }
            declared.push((ia, ib));
        }

        let mut order = vec![false; n * n];
        for i in 0..n {
            order[i * n + i] = true;
        }
        for &(a, b) in &declared {
            order[a as usize * n + b as usize] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if order[i * n + k] {
                    for j in 0..n {
                        if order[k * n + j] {
                            order[i * n + j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if order[i * n + j] && order[j * n + i] {
                    return Err(LatticeError::CycleInOrder(
                        names[i].to_string(),
                        names[j].to_string(),
                    ));
                }
            }
        }

        let mut joins = vec![0u16; n * n];
        for i in 0..n {
            for j in i..n {
                let upper: Vec<usize> = (0..n)
                    .filter(|&c| order[i * n + c] && order[j * n + c])
                    .collect();
                let minimal: Vec<usize> = upper
                    .iter()
                    .copied()
                    .filter(|&c| !upper.iter().any(|&d| d != c && order[d * n + c]))
                    .collect();
                if minimal.len() != 1 {
                    return Err(LatticeError::NotALattice(
                        names[i].to_string(),
                        names[j].to_string(),
                    ));
                }
                joins[i * n + j] = minimal[0] as u16;
                joins[j * n + i] = minimal[0] as u16;
            }
        }

        let bottom = (0..n)
            .find(|&b| (0..n).all(|x| order[b * n + x]))
            .ok_or(LatticeError::NoBottom)? as u16;

        let mut h = DefaultHasher::new();
        for nm in &names {
            nm.as_str().hash(&mut h);
        }
        order.hash(&mut h);
        let id = LatticeId(h.finish());

        Ok(Lattice {
            id,
            names,
            by_name,
            declared,
            order,
            joins,
            bottom,
        })
    }

    /// The chain `1 < 2 < 3`.
    pub fn chain3() -> Lattice {
        Lattice::build(&["1", "2", "3"], &[("1", "2"), ("2", "3")]).expect("chain is a lattice")
    }

    /// The four-point diamond `bot < a, b < top` with `a`, `b` incomparable.
    pub fn diamond() -> Lattice {
        Lattice::build(
            &["bot", "a", "b", "top"],
            &[("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")],
        )
        .expect("diamond is a lattice")
    }

    pub fn id(&self) -> LatticeId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        (0..self.names.len()).map(move |i| Level {
            lattice: self.id,
            index: i as u16,
        })
    }

    pub fn level(&self, name: &str) -> Option<Level> {
        self.by_name.get(name).map(|&index| Level {
            lattice: self.id,
            index,
        })
    }

    pub fn bottom(&self) -> Level {
        Level {
            lattice: self.id,
            index: self.bottom,
        }
    }

    pub fn contains(&self, l: Level) -> bool {
        l.lattice == self.id && (l.index as usize) < self.names.len()
    }

    fn idx(&self, l: Level) -> Result<usize, LatticeError> {
        if self.contains(l) {
            Ok(l.index as usize)
        } else {
            Err(LatticeError::ForeignLevel)
        }
    }

    pub fn name(&self, l: Level) -> Result<&Symbol, LatticeError> {
        Ok(&self.names[self.idx(l)?])
    }

    /// Declared strict edges, in declaration order.
    pub fn declared_edges(&self) -> impl Iterator<Item = (Level, Level)> + '_ {
        self.declared.iter().map(move |&(a, b)| {
            (
                Level {
                    lattice: self.id,
                    index: a,
                },
                Level {
                    lattice: self.id,
                    index: b,
                },
            )
        })
    }

    pub fn leq(&self, a: Level, b: Level) -> Result<bool, LatticeError> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        Ok(self.order[a * self.len() + b])
    }

    pub fn join(&self, a: Level, b: Level) -> Result<Level, LatticeError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        Ok(Level {
            lattice: self.id,
            index: self.joins[ia * self.len() + ib],
        })
    }

    /// Join of a finite multiset; the empty join is bottom.
    pub fn join_all<I: IntoIterator<Item = Level>>(&self, xs: I) -> Result<Level, LatticeError> {
        xs.into_iter()
            .try_fold(self.bottom(), |acc, x| self.join(acc, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force least upper bound straight from a declared edge list.
    fn brute_lub(n: usize, edges: &[(usize, usize)], a: usize, b: usize) -> Option<usize> {
        let mut le = vec![vec![false; n]; n];
        for (i, row) in le.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(x, y) in edges {
            le[x][y] = true;
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if !le[i][j] && (0..n).any(|k| le[i][k] && le[k][j]) {
                        le[i][j] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let ubs: Vec<usize> = (0..n).filter(|&c| le[a][c] && le[b][c]).collect();
        let least: Vec<usize> = ubs
            .iter()
            .copied()
            .filter(|&c| ubs.iter().all(|&d| le[c][d]))
            .collect();
        (least.len() == 1).then(|| least[0])
    }

    #[test]
    fn chain_from_natural_order() {
        let l = Lattice::chain3();
        let lv = |s| l.level(s).unwrap();
        assert_eq!(l.bottom(), lv("1"));
        assert!(l.leq(lv("2"), lv("3")).unwrap());
        assert!(!l.leq(lv("3"), lv("2")).unwrap());
        assert_eq!(l.join(lv("1"), lv("3")).unwrap(), lv("3"));
        assert_eq!(l.join_all([lv("1"), lv("3"), lv("2")]).unwrap(), lv("3"));
        assert_eq!(l.join_all([lv("2")]).unwrap(), lv("2"));
    }

    #[test]
    fn single_point() {
        let l = Lattice::build(&["x"], &[]).unwrap();
        assert_eq!(l.name(l.bottom()).unwrap().as_str(), "x");
        assert_eq!(l.join_all([]).unwrap(), l.bottom());
    }

    #[test]
    fn diamond_join_matches_brute_force() {
        let l = Lattice::diamond();
        let edges = [(0, 1), (0, 2), (1, 3), (2, 3)];
        let lv = |s| l.level(s).unwrap();
        assert_eq!(brute_lub(4, &edges, 1, 2), Some(3));
        assert_eq!(l.join(lv("a"), lv("b")).unwrap(), lv("top"));
        assert!(!l.leq(lv("a"), lv("b")).unwrap());
        assert!(l.leq(lv("a"), lv("a")).unwrap());
        for (i, x) in l.levels().enumerate() {
            for (j, y) in l.levels().enumerate() {
                let expect = brute_lub(4, &edges, i, j).unwrap();
                assert_eq!(l.join(x, y).unwrap(), l.levels().nth(expect).unwrap());
            }
        }
    }

    #[test]
    fn empty_join_is_bottom() {
        let l = Lattice::diamond();
        assert_eq!(l.join_all(std::iter::empty()).unwrap(), l.level("bot").unwrap());
    }

    #[test]
    fn rejects_bad_declarations() {
        assert!(matches!(
            Lattice::build(&["a", "b"], &[]),
            Err(LatticeError::NotALattice(..))
        ));
        // common upper bound but two minimal elements below it
        assert!(matches!(
            Lattice::build(&["a", "b", "t"], &[("a", "t"), ("b", "t")]),
            Err(LatticeError::NoBottom)
        ));
        assert!(matches!(
            Lattice::build(&["a", "b"], &[("a", "b"), ("b", "a")]),
            Err(LatticeError::CycleInOrder(..))
        ));
        assert!(matches!(
            Lattice::build(&["a"], &[("a", "z")]),
            Err(LatticeError::UnknownLevelName(n)) if n == "z"
        ));
        assert!(matches!(
            Lattice::build(&["a", "a"], &[]),
            Err(LatticeError::DuplicateLevel(_))
        ));
        // two minimal upper bounds for (a, b): c and d
        assert!(matches!(
            Lattice::build(
                &["z", "a", "b", "c", "d"],
                &[("z", "a"), ("z", "b"), ("a", "c"), ("b", "c"), ("a", "d"), ("b", "d")]
            ),
            Err(LatticeError::NotALattice(..))
        ));
    }

    #[test]
    fn foreign_levels_are_errors() {
        let chain = Lattice::chain3();
        let dia = Lattice::diamond();
        assert_eq!(
            chain.leq(chain.bottom(), dia.bottom()),
            Err(LatticeError::ForeignLevel)
        );
        assert_eq!(chain.join(dia.bottom(), chain.bottom()), Err(LatticeError::ForeignLevel));
    }

    #[test]
    fn equal_declarations_share_identity() {
        assert_eq!(Lattice::chain3().id(), Lattice::chain3().id());
        assert_ne!(Lattice::chain3().id(), Lattice::diamond().id());
    }

    /// Random DAGs on up to 5 nodes: the builder accepts exactly those where every pair has a
    /// unique lub and there is a bottom, and its joins agree with brute force.
    fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..=5).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            let len = pairs.len();
            (Just(n), proptest::collection::vec(any::<bool>(), len)).prop_map(
                move |(n, keep)| {
                    let edges = pairs
                        .iter()
                        .zip(keep)
                        .filter(|(_, k)| *k)
                        .map(|(p, _)| *p)
                        .collect();
                    (n, edges)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn builder_agrees_with_brute_force((n, edges) in dag()) {
            let names: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
            let named: Vec<(String, String)> =
                edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect();
            let all_lubs = (0..n).all(|a| (0..n).all(|b| brute_lub(n, &edges, a, b).is_some()));
            let has_bottom = (0..n).any(|b| (0..n).all(|x| brute_lub(n, &edges, b, x) == Some(x)));
            match Lattice::build(&names, &named) {
                Ok(l) => {
                    prop_assert!(all_lubs && has_bottom);
                    let lv: Vec<Level> = l.levels().collect();
                    for a in 0..n {
                        for b in 0..n {
                            prop_assert_eq!(l.join(lv[a], lv[b]).unwrap(), lv[brute_lub(n, &edges, a, b).unwrap()]);
                        }
                    }
                }
                Err(_) => prop_assert!(!(all_lubs && has_bottom)),
            }
        }

        #[test]
        fn join_laws(a in 0usize..4, b in 0usize..4, c in 0usize..4) {
            let l = Lattice::diamond();
            let lv: Vec<Level> = l.levels().collect();
            let (a, b, c) = (lv[a], lv[b], lv[c]);
            let j = |x, y| l.join(x, y).unwrap();
            prop_assert_eq!(j(j(a, b), c), j(a, j(b, c)));
            prop_assert_eq!(j(a, b), j(b, a));
            prop_assert_eq!(j(a, a), a);
            prop_assert_eq!(l.leq(a, b).unwrap(), j(a, b) == b);
            prop_assert!(l.leq(l.bottom(), a).unwrap());
        }

        #[test]
        fn join_all_peels_any_element(xs in proptest::collection::vec(0usize..4, 1..8), pick in any::<prop::sample::Index>()) {
            let l = Lattice::diamond();
            let lv: Vec<Level> = l.levels().collect();
            let ms: Vec<Level> = xs.iter().map(|&i| lv[i]).collect();
            let k = pick.index(ms.len());
            let mut rest = ms.clone();
            let a = rest.remove(k);
            prop_assert_eq!(
                l.join_all(ms.iter().copied()).unwrap(),
                l.join(l.join_all(rest).unwrap(), a).unwrap()
            );
        }
    }
}
