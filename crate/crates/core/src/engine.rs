//! One-step reaction semantics, schedulers and state-space exploration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ActionKind, Annotation, Body, LocRef, LocalizedState, Net, Origin, Pattern, Process};
use crate::belnap::{self, Four};
use crate::lattice::{LatticeError, Level};
use crate::matcher::{self, MatchError};
use crate::parser::render_pattern;
use crate::policy_eval::{eval_policy, EvalError, InteractionView, LevelBinding};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("redex does not belong to the current net")]
    StaleRedex,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("location {location}: `out` argument `{arg}` is not a literal")]
    OpenArgument { location: Symbol, arg: String },
    #[error("step {step}: scripted interaction `{label}` is not enabled (enabled: {})", available.join(", "))]
    ScriptMismatch {
        step: usize,
        label: String,
        available: Vec<String>,
    },
}

/// How independent work items (exploration frontiers, harness instances) are processed.
/// Defaults to `Rayon` when the `parallel` feature is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Rayon,
}

impl Parallelism {
    /// Order-preserving map.
    pub fn map<T, U, F>(self, xs: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => xs.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => {
                use rayon::prelude::*;
                xs.par_iter().map(f).collect()
            }
        }
    }
}

/// A process branch paired with a target item it can react with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Redex {
    pub subject: usize,
    pub subject_uid: u64,
    /// Thread indices through replicated bodies; empty for a plain choice.
    pub path: Vec<usize>,
    pub branch: usize,
    pub target: usize,
    pub target_uid: u64,
    pub kind: ActionKind,
    pub label: String,
}

impl Redex {
    fn key(&self) -> (u64, Vec<usize>, usize, u64) {
        (self.subject_uid, self.path.clone(), self.branch, self.target_uid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub location: String,
    pub uid: u64,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CreatedBy {
    /// A copy of a replicated body, made before the action fires.
    Unfolded { parent: u64 },
    /// The virtual tuple item produced by an `out`.
    Written { writer: u64, base: u64 },
    /// A parallel component split off the subject's continuation.
    Forked { parent: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedItem {
    pub uid: u64,
    pub name: String,
    pub origin: CreatedBy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: usize,
    pub subject: String,
    pub subject_uid: u64,
    pub kind: ActionKind,
    pub args: Vec<String>,
    pub target: String,
    pub target_uid: u64,
    pub decision: Four,
    pub granted: bool,
    /// False when the policy grants but the tuple does not match; the net is unchanged.
    pub enabled: bool,
    pub theta: Option<BTreeMap<String, String>>,
    pub state_updates: Vec<StateUpdate>,
    pub created_items: Vec<CreatedItem>,
    pub removed_items: Vec<u64>,
}

impl TraceEvent {
    pub fn label(&self) -> String {
        format!("{}:{}@{}", self.subject, self.kind, self.target)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>3} {} ({}) -> {} {}",
            self.step,
            self.label(),
            self.args.join(", "),
            self.decision,
            if !self.enabled {
                "not-enabled"
            } else if self.granted {
                "granted"
            } else {
                "denied"
            }
        );
        for u in &self.state_updates {
            let _ = write!(s, "; H({}) {} -> {}", u.location, u.old, u.new);
        }
        for c in &self.created_items {
            if let CreatedBy::Written { .. } = c.origin {
                let _ = write!(s, "; new tuple at {}", c.name);
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub initial: Net,
    pub events: Vec<TraceEvent>,
    pub final_net: Net,
}

impl Trace {
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_text());
            s.push('\n');
        }
        s
    }
}

fn flatten_into(p: Process, out: &mut Vec<Process>) {
    match p {
        Process::Parallel(ps) => ps.into_iter().for_each(|q| flatten_into(q, out)),
        other => out.push(other),
    }
}

fn flatten(p: &Process) -> Vec<Process> {
    let mut v = Vec::new();
    flatten_into(p.clone(), &mut v);
    v
}

/// Splits parallel compositions into separate items sharing name and annotation.
/// The first component keeps the item's identity; the others are appended.
pub fn normalize(net: &Net) -> Net {
    let mut net = net.clone();
    for i in 0..net.items.len() {
        split_item(&mut net, i, &mut Vec::new());
    }
    net
}

fn split_item(net: &mut Net, i: usize, created: &mut Vec<CreatedItem>) {
    let Some(Process::Parallel(_)) = net.items[i].process() else {
        return;
    };
    let Body::Process(p) = std::mem::replace(&mut net.items[i].body, Body::Process(Process::Nil)) else {
        unreachable!()
    };
    let mut parts = Vec::new();
    flatten_into(p, &mut parts);
    let mut parts = parts.into_iter();
    net.items[i].body = Body::Process(parts.next().unwrap_or_default());
    let (name, annot, parent) = (net.items[i].name.clone(), net.items[i].annot.clone(), net.items[i].uid);
    for q in parts {
        let uid = net.push(name.clone(), annot.clone(), Body::Process(q), Origin::Runtime);
        created.push(CreatedItem {
            uid,
            name: name.to_string(),
            origin: CreatedBy::Forked { parent },
        });
    }
}

fn collect_threads(p: &Process, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Process)>) {
    match p {
        Process::Choice(_) => out.push((path.clone(), p.clone())),
        Process::Replicate(inner) => {
            for (k, th) in flatten(inner).iter().enumerate() {
                path.push(k);
                collect_threads(th, path, out);
                path.pop();
            }
        }
        Process::Parallel(ps) => {
            // not normalized; treat components as siblings of the same item
            for q in ps {
                collect_threads(q, path, out);
            }
        }
        Process::Nil => {}
    }
}

/// All candidate interactions, in a deterministic order.
pub fn enumerate_redexes(net: &Net) -> Vec<Redex> {
    let mut out = Vec::new();
    for (i, it) in net.items.iter().enumerate() {
        let Some(p) = it.process() else { continue };
        let mut threads = Vec::new();
        collect_threads(p, &mut Vec::new(), &mut threads);
        for (path, th) in threads {
            let Process::Choice(bs) = th else { continue };
            for (b, br) in bs.iter().enumerate() {
                let LocRef::Lit(t) = &br.action.target else { continue };
                let targets: Vec<usize> = match br.action.kind {
                    ActionKind::Out => net.base_item(t).into_iter().collect(),
                    ActionKind::In | ActionKind::Read => net
                        .items
                        .iter()
                        .enumerate()
                        .filter(|(_, o)| &o.name == t && o.tuple().is_some_and(|tu| tu.len() == br.action.args.len()))
                        .map(|(j, _)| j)
                        .collect(),
                };
                for j in targets {
                    out.push(Redex {
                        subject: i,
                        subject_uid: it.uid,
                        path: path.clone(),
                        branch: b,
                        target: j,
                        target_uid: net.items[j].uid,
                        kind: br.action.kind,
                        label: format!("{}:{}@{}", it.name, br.action.kind, t),
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        let ka = (&net.items[a.subject].name, a.subject, &a.path, a.branch, &net.items[a.target].name, a.target);
        let kb = (&net.items[b.subject].name, b.subject, &b.path, b.branch, &net.items[b.target].name, b.target);
        ka.cmp(&kb)
    });
    out
}

fn level_name(net: &Net, l: Level) -> String {
    net.lattice.name(l).map(|s| s.to_string()).unwrap_or_else(|_| "?".into())
}

/// Fires one redex. A granted input whose pattern does not match the tuple
/// leaves the net untouched and yields an event with `enabled == false`.
pub fn apply(net: &Net, r: &Redex, step: usize) -> Result<(Net, TraceEvent), EngineError> {
    let ok = |idx: usize, uid: u64| net.items.get(idx).is_some_and(|it| it.uid == uid);
    if !ok(r.subject, r.subject_uid) || !ok(r.target, r.target_uid) {
        return Err(EngineError::StaleRedex);
    }
    let original = net;
    let mut net = net.clone();
    let mut created = Vec::new();

    let mut s = r.subject;
    for &k in &r.path {
        let Some(Process::Replicate(inner)) = net.items[s].process() else {
            return Err(EngineError::StaleRedex);
        };
        let threads = flatten(inner);
        let (name, annot, parent) = (net.items[s].name.clone(), net.items[s].annot.clone(), net.items[s].uid);
        let mut chosen = None;
        for (idx, th) in threads.into_iter().enumerate() {
            let uid = net.push(name.clone(), annot.clone(), Body::Process(th), Origin::Runtime);
            created.push(CreatedItem {
                uid,
                name: name.to_string(),
                origin: CreatedBy::Unfolded { parent },
            });
            if idx == k {
                chosen = Some(net.items.len() - 1);
            }
        }
        s = chosen.ok_or(EngineError::StaleRedex)?;
    }
    let t = r.target;
    let branch = match net.items[s].process() {
        Some(Process::Choice(bs)) => bs.get(r.branch).cloned().ok_or(EngineError::StaleRedex)?,
        _ => return Err(EngineError::StaleRedex),
    };
    let (subj, targ) = (&net.items[s], &net.items[t]);
    let (ss, ts) = (subj.annot.state, targ.annot.state);
    let levels = LevelBinding {
        gs: ss.clearance,
        gc: ss.current,
        go: ts.classification,
        ghs: ss.history,
        ght: ts.history,
    };
    let iv = InteractionView {
        subject: &subj.name,
        action: &branch.action,
        continuation: &branch.cont,
        levels,
        net: &net,
    };
    let decision = belnap::oplus(eval_policy(&subj.annot.policy, &iv)?, eval_policy(&targ.annot.policy, &iv)?);
    let granted = belnap::grant(decision);
    let mut ev = TraceEvent {
        step,
        subject: subj.name.to_string(),
        subject_uid: subj.uid,
        kind: branch.action.kind,
        args: branch.action.args.iter().map(render_pattern).collect(),
        target: targ.name.to_string(),
        target_uid: targ.uid,
        decision,
        granted,
        enabled: true,
        theta: None,
        state_updates: Vec::new(),
        created_items: Vec::new(),
        removed_items: Vec::new(),
    };
    let subject_uid = subj.uid;
    let target_uid = targ.uid;
    let lat = net.lattice.clone();

    if !granted {
        net.items[s].body = Body::Process(Process::Nil);
    } else {
        match branch.action.kind {
            ActionKind::Read | ActionKind::In => {
                let tuple = net.items[t].tuple().ok_or(EngineError::StaleRedex)?;
                let Some(theta) = matcher::match_tuple(&branch.action.args, tuple)? else {
                    ev.enabled = false;
                    return Ok((original.clone(), ev));
                };
                let new_h = lat.join(ss.history, lat.join(ts.classification, ts.history)?)?;
                ev.state_updates.push(StateUpdate {
                    location: ev.subject.clone(),
                    uid: subject_uid,
                    old: level_name(&net, ss.history),
                    new: level_name(&net, new_h),
                });
                ev.theta = Some(
                    theta
                        .bindings
                        .iter()
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect(),
                );
                let item = &mut net.items[s];
                item.annot.state.history = new_h;
                item.body = Body::Process(matcher::substitute(&branch.cont, &theta));
            }
            ActionKind::Out => {
                let mut comps = Vec::with_capacity(branch.action.args.len());
                for a in &branch.action.args {
                    match a {
                        Pattern::Ref(LocRef::Lit(l)) => comps.push(l.clone()),
                        other => {
                            return Err(EngineError::OpenArgument {
                                location: net.items[s].name.clone(),
                                arg: render_pattern(other),
                            })
                        }
                    }
                }
                let h = lat.join(ts.history, lat.join(ss.current, ss.history)?)?;
                let annot = Annotation {
                    state: LocalizedState { history: h, ..ts },
                    policy: net.items[t].annot.policy.clone(),
                };
                let name = net.items[t].name.clone();
                let uid = net.push(name.clone(), annot, Body::Tuple(comps), Origin::Runtime);
                created.push(CreatedItem {
                    uid,
                    name: name.to_string(),
                    origin: CreatedBy::Written {
                        writer: subject_uid,
                        base: target_uid,
                    },
                });
                net.items[s].body = Body::Process(branch.cont.clone());
            }
        }
    }
    split_item(&mut net, s, &mut created);

    let mut removed = Vec::new();
    if granted && branch.action.kind == ActionKind::In {
        removed.push(target_uid);
    }
    net.items.retain(|it| {
        let dead = removed.contains(&it.uid)
            || (it.origin == Origin::Runtime && matches!(it.body, Body::Process(Process::Nil)));
        if dead && !removed.contains(&it.uid) {
            removed.push(it.uid);
        }
        !dead
    });
    ev.created_items = created;
    ev.removed_items = removed;
    Ok((net, ev))
}

#[derive(Debug, Clone)]
pub enum Scheduler {
    SeededRandom(u64),
    /// Redex labels `Subject:kind@Target`, consumed in order; the run stops when exhausted.
    FixedScript(Vec<String>),
}

pub fn run(net: &Net, scheduler: &Scheduler, max_steps: usize) -> Result<Trace, EngineError> {
    let initial = normalize(net);
    let mut net = initial.clone();
    let mut events = Vec::new();
    let mut blocked: HashSet<(u64, Vec<usize>, usize, u64)> = HashSet::new();
    let mut rng = match scheduler {
        Scheduler::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
        Scheduler::FixedScript(_) => None,
    };
    let mut script = match scheduler {
        Scheduler::FixedScript(s) => s.iter(),
        Scheduler::SeededRandom(_) => [].iter(),
    };
    while events.len() < max_steps {
        let rs: Vec<Redex> = enumerate_redexes(&net)
            .into_iter()
            .filter(|r| !blocked.contains(&r.key()))
            .collect();
        if rs.is_empty() {
            break;
        }
        let step = events.len();
        let r = match &mut rng {
            Some(rng) => &rs[rng.gen_range(0..rs.len())],
            None => {
                let Some(label) = script.next() else { break };
                match rs.iter().find(|r| &r.label == label) {
                    Some(r) => r,
                    None => {
                        return Err(EngineError::ScriptMismatch {
                            step,
                            label: label.clone(),
                            available: rs.iter().map(|r| r.label.clone()).collect(),
                        })
                    }
                }
            }
        };
        let (next, ev) = apply(&net, r, step)?;
        if ev.enabled {
            blocked.clear();
            net = next;
        } else {
            blocked.insert(r.key());
        }
        events.push(ev);
    }
    Ok(Trace {
        initial,
        events,
        final_net: net,
    })
}

pub type Successor = (Redex, Net, TraceEvent);

/// Successor nets of `net` through enabled events.
pub fn successors(net: &Net) -> Result<Vec<Successor>, EngineError> {
    let mut out = Vec::new();
    for r in enumerate_redexes(net) {
        let step = 0;
        let (next, ev) = apply(net, &r, step)?;
        if ev.enabled {
            out.push((r, next, ev));
        }
    }
    Ok(out)
}

/// Order-insensitive identity of a net: sorted item renderings without uids.
pub fn canonical_key(net: &Net) -> String {
    let lat = &net.lattice;
    let name = |l: Level| lat.name(l).map(|s| s.to_string()).unwrap_or_default();
    let mut parts: Vec<String> = net
        .items
        .iter()
        .map(|it| {
            let st = &it.annot.state;
            let mut h = std::collections::hash_map::DefaultHasher::new();
            it.annot.policy.hash(&mut h);
            let body = match &it.body {
                Body::Process(p) => crate::parser::render_process(p),
                Body::Tuple(t) => format!("<{}>", t.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")),
            };
            format!(
                "{}{}<{},{},{},{}>#{:x} {}",
                if it.origin == Origin::Base { "^" } else { "" },
                it.name,
                name(st.clearance),
                name(st.current),
                name(st.history),
                name(st.classification),
                h.finish(),
                body
            )
        })
        .collect();
    parts.sort();
    parts.join("\n")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecisionCount {
    pub granted: usize,
    pub denied: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Exploration {
    pub states: usize,
    pub edges: usize,
    pub terminals: usize,
    pub depth: usize,
    /// False when the depth bound left unexplored successors.
    pub complete: bool,
    pub decisions: BTreeMap<String, DecisionCount>,
}

/// Breadth-first reachability up to `depth` steps. Successors of a frontier are
/// computed independently and merged in frontier order, so the result does not
/// depend on `par`.
pub fn explore(net: &Net, depth: usize, par: Parallelism) -> Result<Exploration, EngineError> {
    let start = normalize(net);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(canonical_key(&start));
    let mut frontier = vec![start];
    let mut ex = Exploration {
        states: 1,
        edges: 0,
        terminals: 0,
        depth: 0,
        complete: true,
        decisions: BTreeMap::new(),
    };
    let mut level = 0;
    while !frontier.is_empty() {
        let expanded: Vec<Result<Vec<Successor>, EngineError>> = par.map(&frontier, successors);
        if level == depth {
            if expanded.iter().any(|r| r.as_ref().map_or(true, |v| !v.is_empty())) {
                ex.complete = false;
            }
            for r in &expanded {
                if r.as_ref().is_ok_and(|v| v.is_empty()) {
                    ex.terminals += 1;
                }
            }
            break;
        }
        let keyed: Vec<Vec<(String, Net, TraceEvent)>> = {
            let mut flat = Vec::with_capacity(expanded.len());
            for r in expanded {
                flat.push(r?);
            }
            par.map(&flat, |succs| {
                succs
                    .iter()
                    .map(|(_, n, e)| (canonical_key(n), n.clone(), e.clone()))
                    .collect()
            })
        };
        let mut next = Vec::new();
        for succs in keyed {
            if succs.is_empty() {
                ex.terminals += 1;
            }
            for (key, n, e) in succs {
                ex.edges += 1;
                let d = ex.decisions.entry(e.label()).or_default();
                if e.granted {
                    d.granted += 1;
                } else {
                    d.denied += 1;
                }
                if seen.insert(key) {
                    next.push(n);
                }
            }
        }
        ex.states += next.len();
        frontier = next;
        level += 1;
        ex.depth = level;
    }
    Ok(ex)
}

#[derive(Debug, Clone)]
pub struct Interleavings {
    pub traces: Vec<Trace>,
    /// Set when a path hit the depth bound or the path budget ran out.
    pub truncated: bool,
}

/// Every maximal sequence of enabled events from `net`, by depth-first search.
pub fn interleavings(net: &Net, max_depth: usize, max_paths: usize) -> Result<Interleavings, EngineError> {
    let initial = normalize(net);
    let mut out = Interleavings {
        traces: Vec::new(),
        truncated: false,
    };
    let mut path = Vec::new();
    dfs(&initial, &initial, &mut path, max_depth, max_paths, &mut out)?;
    Ok(out)
}

fn dfs(
    initial: &Net,
    net: &Net,
    path: &mut Vec<TraceEvent>,
    max_depth: usize,
    max_paths: usize,
    out: &mut Interleavings,
) -> Result<(), EngineError> {
    if out.traces.len() >= max_paths {
        out.truncated = true;
        return Ok(());
    }
    let succs = successors(net)?;
    if succs.is_empty() || path.len() >= max_depth {
        if !succs.is_empty() {
            out.truncated = true;
        }
        out.traces.push(Trace {
            initial: initial.clone(),
            events: path.clone(),
            final_net: net.clone(),
        });
        return Ok(());
    }
    for (_, next, mut ev) in succs {
        ev.step = path.len();
        path.push(ev);
        dfs(initial, &next, path, max_depth, max_paths, out)?;
        path.pop();
    }
    Ok(())
}

/// Uids of the items named `name`.
pub fn uids_named(net: &Net, name: &str) -> BTreeSet<u64> {
    net.items.iter().filter(|it| it.name.as_str() == name).map(|it| it.uid).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_scenario;

    const FIG1B: &str = "lattice { levels: 1, 2, 3; order: 1 < 2 < 3 }
        location A { state <1,1,1,1>; policy BLP; process 0; }
        location B { state <2,2,1,2>; policy BLP; tuple <Report>; }
        location C { state <2,2,1,2>; policy BLP; process 0; }
        location D { state <3,2,1,3>; policy BLP; process read(?x)@B . out(x)@C . 0; }";

    #[test]
    fn normalize_splits_parallel() {
        let net = parse_scenario(
            "lattice { levels: a }
             location L { state <a,a,a,a>; policy true; process out(X)@L . 0 | (in(X)@L . 0 | 0); }",
        )
        .unwrap();
        let n = normalize(&net);
        assert_eq!(n.items.len(), 3);
        assert!(n.items[1..].iter().all(|it| it.origin == Origin::Runtime && it.name.as_str() == "L"));
        assert_eq!(normalize(&n), n);
    }

    #[test]
    fn enumerate_fig1b_and_empty() {
        let net = normalize(&parse_scenario(FIG1B).unwrap());
        let rs = enumerate_redexes(&net);
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].label, "D:read@B");
        let tuples = parse_scenario("lattice { levels: a } location T { state <a,a,a,a>; policy true; tuple <X>; }").unwrap();
        assert!(enumerate_redexes(&tuples).is_empty());
    }

    #[test]
    fn two_branch_choice() {
        let net = parse_scenario(
            "lattice { levels: a }
             location T { state <a,a,a,a>; policy true; tuple <X>; }
             location U { state <a,a,a,a>; policy true; tuple <Y>; }
             location P { state <a,a,a,a>; policy true; process read(?x)@T . 0 + read(?y)@U . 0; }",
        )
        .unwrap();
        assert_eq!(enumerate_redexes(&net).len(), 2);
    }

    #[test]
    fn fig1b_read_updates_history_then_out_creates_virtual_tuple() {
        let net = normalize(&parse_scenario(FIG1B).unwrap());
        let lat = net.lattice.clone();
        let r = &enumerate_redexes(&net)[0];
        let (n1, ev) = apply(&net, r, 0).unwrap();
        assert!(ev.granted && ev.enabled);
        assert_eq!(ev.decision, Four::True);
        let d = n1.items.iter().find(|it| it.name.as_str() == "D").unwrap();
        assert_eq!(d.annot.state.history, lat.level("2").unwrap());
        assert_eq!(ev.state_updates[0].new, "2");

        let r = &enumerate_redexes(&n1)[0];
        assert_eq!(r.label, "D:out@C");
        let (n2, ev) = apply(&n1, r, 1).unwrap();
        assert!(ev.granted);
        let c: Vec<_> = n2.items.iter().filter(|it| it.name.as_str() == "C").collect();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].tuple().unwrap()[0].as_str(), "Report");
        assert_eq!(c[1].annot.state.history, lat.level("2").unwrap());
        assert_eq!(c[0].annot.state.history, lat.level("1").unwrap());
        assert!(enumerate_redexes(&n2).is_empty());
    }

    #[test]
    fn out_with_current_three_to_level_one_is_denied() {
        let net = parse_scenario(
            "lattice { levels: 1, 2, 3; order: 1 < 2 < 3 }
             location A { state <1,1,1,1>; policy BLP; process 0; }
             location D { state <3,3,1,3>; policy BLP; process out(Secret)@A . read(?x)@A . 0; }",
        )
        .unwrap();
        let r = &enumerate_redexes(&net)[0];
        let (n, ev) = apply(&net, r, 0).unwrap();
        assert!(!ev.granted);
        assert_eq!(ev.decision, Four::Top);
        assert_eq!(n.items.len(), 2);
        assert_eq!(n.items[1].process(), Some(&Process::Nil));
        assert_eq!(n.items[0], net.items[0]);
    }

    #[test]
    fn input_mismatch_is_not_enabled_and_unchanged() {
        let net = parse_scenario(
            "lattice { levels: a }
             location T { state <a,a,a,a>; policy true; tuple <X>; }
             location P { state <a,a,a,a>; policy true; process in(Y)@T . 0; }",
        )
        .unwrap();
        let r = &enumerate_redexes(&net)[0];
        let (n, ev) = apply(&net, r, 0).unwrap();
        assert!(ev.granted && !ev.enabled);
        assert_eq!(n, net);
        let tr = run(&net, &Scheduler::SeededRandom(3), 10).unwrap();
        assert_eq!(tr.events.len(), 1);
    }

    #[test]
    fn in_removes_tuple_and_replication_unfolds_lazily() {
        let net = parse_scenario(
            "lattice { levels: a }
             location T { state <a,a,a,a>; policy true; tuple <X>; }
             location T { state <a,a,a,a>; policy true; tuple <Y>; }
             location P { state <a,a,a,a>; policy true; process *in(?u)@T . out(u)@P . 0; }",
        )
        .unwrap();
        let tr = run(&net, &Scheduler::SeededRandom(1), 50).unwrap();
        let ins = tr.events.iter().filter(|e| e.kind == ActionKind::In).count();
        let outs = tr.events.iter().filter(|e| e.kind == ActionKind::Out).count();
        assert_eq!((ins, outs), (2, 2));
        let tuples: Vec<&str> = tr.final_net.items.iter().filter_map(|it| it.tuple()).map(|t| t[0].as_str()).collect();
        assert_eq!(tuples.len(), 2);
        assert!(tuples.contains(&"X") && tuples.contains(&"Y"));
        assert_eq!(tr.final_net.items.iter().filter(|it| it.name.as_str() == "T").count(), 0);
    }

    #[test]
    fn script_mismatch() {
        let net = parse_scenario(FIG1B).unwrap();
        let e = run(&net, &Scheduler::FixedScript(vec!["D:out@C".into()]), 10).unwrap_err();
        assert!(matches!(e, EngineError::ScriptMismatch { step: 0, .. }));
        let tr = run(&net, &Scheduler::FixedScript(vec!["D:read@B".into(), "D:out@C".into()]), 10).unwrap();
        assert_eq!(tr.events.len(), 2);
    }

    #[test]
    fn empty_net_runs_and_explores_trivially() {
        let net = parse_scenario("lattice { levels: a }").unwrap();
        assert!(run(&net, &Scheduler::SeededRandom(0), 10).unwrap().events.is_empty());
        let ex = explore(&net, 5, Parallelism::Sequential).unwrap();
        assert_eq!((ex.states, ex.terminals, ex.complete), (1, 1, true));
    }

    #[test]
    fn exploration_independent_of_parallelism() {
        let net = parse_scenario(FIG1B).unwrap();
        let a = explore(&net, 10, Parallelism::Sequential).unwrap();
        let b = explore(&net, 10, Parallelism::default()).unwrap();
        assert_eq!((a.states, a.edges, a.terminals), (b.states, b.edges, b.terminals));
        assert_eq!(a.states, 3);
        let short = explore(&net, 1, Parallelism::Sequential).unwrap();
        assert!(!short.complete);
    }

    #[test]
    fn json_lines_round_trip() {
        let net = parse_scenario(FIG1B).unwrap();
        let tr = run(&net, &Scheduler::SeededRandom(7), 10).unwrap();
        let text = tr.to_json_lines();
        let back: Vec<TraceEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, tr.events);
        assert!(text.contains("\"decision\":\"tt\""));
    }

    mod props {
        use super::*;
        use crate::gen::{harness_net, NetBounds};
        use crate::lattice::Lattice;
        use proptest::prelude::*;
        use std::sync::Arc;

        fn net(seed: u64, diamond: bool) -> Net {
            let lat = Arc::new(if diamond { Lattice::diamond() } else { Lattice::chain3() });
            harness_net(&mut ChaCha8Rng::seed_from_u64(seed), &lat, NetBounds::default())
        }

        proptest! {
            #[test]
            fn parallel_exploration_matches_sequential(seed in any::<u64>(), diamond in any::<bool>()) {
                let n = net(seed, diamond);
                let a = explore(&n, 16, Parallelism::Sequential).unwrap();
                let b = explore(&n, 16, Parallelism::default()).unwrap();
                prop_assert_eq!((a.states, a.edges, a.terminals, a.complete), (b.states, b.edges, b.terminals, b.complete));
                prop_assert_eq!(a.decisions, b.decisions);
            }

            #[test]
            fn seeded_runs_repeat(seed in any::<u64>(), sched in any::<u64>()) {
                let n = net(seed, false);
                let a = run(&n, &Scheduler::SeededRandom(sched), 50).unwrap();
                let b = run(&n, &Scheduler::SeededRandom(sched), 50).unwrap();
                prop_assert_eq!(a.to_json_lines(), b.to_json_lines());
            }

            #[test]
            fn denial_changes_no_history(seed in any::<u64>()) {
                let n = normalize(&net(seed, true));
                for r in enumerate_redexes(&n) {
                    let (_, ev) = apply(&n, &r, 0).unwrap();
                    if !ev.granted {
                        prop_assert!(ev.state_updates.is_empty() && ev.created_items.is_empty());
                    }
                }
            }
        }
    }
}
