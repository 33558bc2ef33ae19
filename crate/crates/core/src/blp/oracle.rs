//! Global-state security checker, written from the set-theoretic BLP
//! formulas. It shares nothing with policy evaluation beyond the lattice.
//!
//! Every located item is an entity. Accesses accumulate with the step at which
//! they happened; the history level of an entity is recomputed here from the
//! accesses rather than copied from the engine.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{ActionKind, Net};
use crate::engine::{CreatedBy, Trace, TraceEvent};
use crate::lattice::{Lattice, LatticeError, Level};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Access {
    pub step: usize,
    pub subject: u64,
    pub object: u64,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub name: Symbol,
    pub s: Level,
    pub c: Level,
    pub o: Level,
    /// Entity this one was copied from, and the first step of the parent's
    /// accesses it does not inherit.
    pub parent: Option<(u64, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Ss,
    Star1,
    Star2,
    HistoryRead,
    HistoryWrite,
    HistoryMonotone,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Ss => "ss",
            Property::Star1 => "star1",
            Property::Star2 => "star2",
            Property::HistoryRead => "history-read",
            Property::HistoryWrite => "history-write",
            Property::HistoryMonotone => "history-monotone",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: Property,
    pub access: Option<Access>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SecurityVerdict {
    pub secure: bool,
    pub violations: Vec<Violation>,
}

impl SecurityVerdict {
    fn from(violations: Vec<Violation>) -> Self {
        SecurityVerdict {
            secure: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlobalState {
    pub lattice: Arc<Lattice>,
    pub entities: BTreeMap<u64, Entity>,
    pub accesses: Vec<Access>,
    pub fh: BTreeMap<u64, Level>,
}

/// Uid used for the virtual object of a hypothetical write that never happened.
const PHANTOM: u64 = u64::MAX;

impl GlobalState {
    pub fn initial(net: &Net) -> Self {
        let mut entities = BTreeMap::new();
        let mut fh = BTreeMap::new();
        for it in &net.items {
            let st = &it.annot.state;
            entities.insert(
                it.uid,
                Entity {
                    name: it.name.clone(),
                    s: st.clearance,
                    c: st.current,
                    o: st.classification,
                    parent: None,
                },
            );
            fh.insert(it.uid, st.history);
        }
        GlobalState {
            lattice: net.lattice.clone(),
            entities,
            accesses: Vec::new(),
            fh,
        }
    }

    fn entity(&self, uid: u64) -> Result<&Entity, OracleError> {
        self.entities
            .get(&uid)
            .ok_or_else(|| OracleError::MalformedTrace(format!("unknown entity {uid}")))
    }

    pub fn f_h(&self, uid: u64) -> Option<Level> {
        self.fh.get(&uid).copied()
    }

    fn copy_entity(&mut self, uid: u64, from: u64, inherit_before: usize) -> Result<(), OracleError> {
        let parent = self.entity(from)?.clone();
        self.entities.insert(
            uid,
            Entity {
                parent: Some((from, inherit_before)),
                ..parent
            },
        );
        let h = self.fh[&from];
        self.fh.insert(uid, h);
        Ok(())
    }

    /// Security level of an entity as a writer: current level joined with history.
    fn writer_level(&self, s: u64) -> Result<Level, OracleError> {
        Ok(self.lattice.join(self.entity(s)?.c, self.fh[&s])?)
    }

    /// Security level of an entity as an object being read.
    fn object_level(&self, o: u64) -> Result<Level, OracleError> {
        Ok(self.lattice.join(self.entity(o)?.o, self.fh[&o])?)
    }

    fn perform(
        &mut self,
        step: usize,
        kind: ActionKind,
        s: u64,
        t: u64,
        written: u64,
    ) -> Result<(), OracleError> {
        let lat = self.lattice.clone();
        match kind {
            ActionKind::Read | ActionKind::In => {
                let read_lvl = self.object_level(t)?;
                let write_lvl = self.writer_level(s)?;
                self.accesses.push(Access {
                    step,
                    subject: s,
                    object: t,
                    op: Op::Read,
                });
                if kind == ActionKind::In {
                    self.accesses.push(Access {
                        step,
                        subject: s,
                        object: t,
                        op: Op::Write,
                    });
                    let h = lat.join(self.fh[&t], write_lvl)?;
                    self.fh.insert(t, h);
                }
                let h = lat.join(self.fh[&s], read_lvl)?;
                self.fh.insert(s, h);
            }
            ActionKind::Out => {
                let write_lvl = self.writer_level(s)?;
                let base = self.entity(t)?.clone();
                self.entities.insert(
                    written,
                    Entity {
                        parent: None,
                        ..base
                    },
                );
                let h = lat.join(self.fh[&t], write_lvl)?;
                self.fh.insert(written, h);
                self.accesses.push(Access {
                    step,
                    subject: s,
                    object: written,
                    op: Op::Write,
                });
            }
        }
        Ok(())
    }

    fn register_unfolded(&mut self, ev: &TraceEvent) -> Result<(), OracleError> {
        for c in &ev.created_items {
            if let CreatedBy::Unfolded { parent } = c.origin {
                self.copy_entity(c.uid, parent, ev.step)?;
            }
        }
        Ok(())
    }

    /// Advances the state by one engine event.
    pub fn record(&mut self, ev: &TraceEvent) -> Result<(), OracleError> {
        if !ev.enabled {
            return Ok(());
        }
        self.register_unfolded(ev)?;
        if ev.granted {
            let written = ev
                .created_items
                .iter()
                .find_map(|c| match c.origin {
                    CreatedBy::Written { .. } => Some(c.uid),
                    _ => None,
                })
                .unwrap_or(PHANTOM);
            if ev.kind == ActionKind::Out && written == PHANTOM {
                return Err(OracleError::MalformedTrace(format!(
                    "granted out at step {} created no item",
                    ev.step
                )));
            }
            self.perform(ev.step, ev.kind, ev.subject_uid, ev.target_uid, written)?;
        }
        for c in &ev.created_items {
            if let CreatedBy::Forked { parent } = c.origin {
                self.copy_entity(c.uid, parent, ev.step + 1)?;
            }
        }
        Ok(())
    }

    /// The verdict on the accesses the event's interaction would add if it
    /// were allowed, whatever the engine decided.
    pub fn hypothetical(&self, ev: &TraceEvent) -> Result<SecurityVerdict, OracleError> {
        let mut next = self.clone();
        next.register_unfolded(ev)?;
        let first_new = next.accesses.len();
        next.perform(ev.step, ev.kind, ev.subject_uid, ev.target_uid, PHANTOM)?;
        let mut violations = Vec::new();
        for a in &next.accesses[first_new..] {
            next.check_access(a, &mut violations)?;
        }
        Ok(SecurityVerdict::from(violations))
    }

    /// Reads by `s` strictly before `step`, including those inherited from the
    /// entities `s` was copied from.
    fn earlier_reads(&self, s: u64, step: usize) -> Vec<Access> {
        let mut out = Vec::new();
        let (mut who, mut before) = (s, step);
        loop {
            out.extend(
                self.accesses
                    .iter()
                    .filter(|a| a.op == Op::Read && a.subject == who && a.step < before)
                    .copied(),
            );
            match self.entities.get(&who).and_then(|e| e.parent) {
                Some((p, upto)) => {
                    who = p;
                    before = before.min(upto);
                }
                None => return out,
            }
        }
    }

    fn check_access(&self, a: &Access, out: &mut Vec<Violation>) -> Result<(), OracleError> {
        let lat = &self.lattice;
        let name = |l: Level| lat.name(l).map(|s| s.to_string()).unwrap_or_default();
        let (s, o) = (self.entity(a.subject)?, self.entity(a.object)?);
        let mut push = |property, explanation| {
            out.push(Violation {
                property,
                access: Some(*a),
                explanation,
            })
        };
        match a.op {
            Op::Read => {
                if !lat.leq(o.o, s.s)? {
                    push(
                        Property::Ss,
                        format!("{} (clearance {}) reads {} (classification {})", s.name, name(s.s), o.name, name(o.o)),
                    );
                }
                if !lat.leq(o.o, self.fh[&a.subject])? {
                    push(
                        Property::HistoryRead,
                        format!("history of {} does not cover {}", s.name, o.name),
                    );
                }
            }
            Op::Write => {
                if !lat.leq(s.c, o.o)? {
                    push(
                        Property::Star1,
                        format!("{} (current {}) writes {} (classification {})", s.name, name(s.c), o.name, name(o.o)),
                    );
                }
                for r in self.earlier_reads(a.subject, a.step) {
                    let read = self.entity(r.object)?;
                    if !lat.leq(read.o, o.o)? {
                        push(
                            Property::Star2,
                            format!(
                                "{} read {} ({}) at step {} then writes {} ({})",
                                s.name,
                                read.name,
                                name(read.o),
                                r.step,
                                o.name,
                                name(o.o)
                            ),
                        );
                    }
                }
                if !lat.leq(s.c, self.fh[&a.object])? {
                    push(
                        Property::HistoryWrite,
                        format!("history of {} does not cover writer {}", o.name, s.name),
                    );
                }
            }
        }
        Ok(())
    }
}

/// Evaluates every property over all accesses of the state.
pub fn oracle_check(gs: &GlobalState) -> Result<SecurityVerdict, OracleError> {
    let mut violations = Vec::new();
    for a in &gs.accesses {
        gs.check_access(a, &mut violations)?;
    }
    Ok(SecurityVerdict::from(violations))
}

/// History levels never decrease between two consecutive states.
pub fn history_monotone(before: &GlobalState, after: &GlobalState) -> Result<Vec<Violation>, OracleError> {
    let mut out = Vec::new();
    for (uid, &h0) in &before.fh {
        if let Some(&h1) = after.fh.get(uid) {
            if !before.lattice.leq(h0, h1)? {
                out.push(Violation {
                    property: Property::HistoryMonotone,
                    access: None,
                    explanation: format!("history of entity {uid} decreased"),
                });
            }
        }
    }
    Ok(out)
}

/// The global state after the first `upto` events of a trace.
pub fn state_from_trace(trace: &Trace, upto: usize) -> Result<GlobalState, OracleError> {
    if upto > trace.events.len() {
        return Err(OracleError::MalformedTrace(format!(
            "prefix {upto} exceeds {} events",
            trace.events.len()
        )));
    }
    let mut gs = GlobalState::initial(&trace.initial);
    for ev in &trace.events[..upto] {
        gs.record(ev)?;
    }
    Ok(gs)
}

/// Items of `net` whose engine history differs from the oracle's.
pub fn history_disagreements(net: &Net, gs: &GlobalState) -> Vec<String> {
    let lat = &net.lattice;
    let name = |l: Level| lat.name(l).map(|s| s.to_string()).unwrap_or_default();
    net.items
        .iter()
        .filter_map(|it| match gs.f_h(it.uid) {
            Some(h) if h == it.annot.state.history => None,
            Some(h) => Some(format!(
                "{}#{}: engine {} oracle {}",
                it.name,
                it.uid,
                name(it.annot.state.history),
                name(h)
            )),
            None => Some(format!("{}#{}: unknown to the oracle", it.name, it.uid)),
        })
        .collect()
}
