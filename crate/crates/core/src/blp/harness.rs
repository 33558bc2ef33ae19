//! Empirical check that the BLP aspects deny exactly the interactions the
//! oracle finds insecure, over every interleaving of random bounded nets.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::oracle::{history_disagreements, history_monotone, GlobalState, Property};
use super::blp_policy;
use crate::ast::{validate, Net, Policy};
use crate::engine::{apply, enumerate_redexes, normalize, Parallelism, TraceEvent};
use crate::gen::{harness_net, NetBounds};
use crate::lattice::Lattice;
use crate::parser::render;

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub instances: usize,
    pub lattice: Arc<Lattice>,
    pub seed: u64,
    pub bounds: NetBounds,
    /// Longest path explored per instance.
    pub max_depth: usize,
    /// Counterexamples kept in full per failure kind.
    pub keep: usize,
    pub parallelism: Parallelism,
    /// Installed at every location of every generated net.
    pub policy: Arc<Policy>,
}

impl HarnessConfig {
    pub fn new(lattice: Lattice, instances: usize) -> Self {
        HarnessConfig {
            instances,
            lattice: Arc::new(lattice),
            seed: 0,
            bounds: NetBounds::default(),
            max_depth: 32,
            keep: 5,
            parallelism: Parallelism::default(),
            policy: Arc::new(blp_policy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Failure {
    /// The oracle finds the interaction insecure but the aspects grant it.
    InsecureGranted,
    /// The aspects deny an interaction the oracle finds secure.
    SecureDenied,
    HistoryDisagreement,
    HistoryDecreased,
    InvalidInstance,
    EngineError,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub instance: usize,
    pub failure: Failure,
    pub detail: String,
    pub scenario: String,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HarnessReport {
    pub instances: usize,
    pub paths: usize,
    pub states: usize,
    pub interactions: usize,
    pub denied: usize,
    pub granted: usize,
    /// Insecure interactions by violated property (an interaction may count twice).
    pub by_property: Vec<(String, usize)>,
    pub insecure_granted: usize,
    pub secure_denied: usize,
    pub history_failures: usize,
    pub other_failures: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl HarnessReport {
    pub fn failures(&self) -> usize {
        self.insecure_granted + self.secure_denied + self.history_failures + self.other_failures
    }

    fn merge(&mut self, o: HarnessReport, keep: usize) {
        self.instances += o.instances;
        self.paths += o.paths;
        self.states += o.states;
        self.interactions += o.interactions;
        self.denied += o.denied;
        self.granted += o.granted;
        for (p, n) in o.by_property {
            match self.by_property.iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += n,
                None => self.by_property.push((p, n)),
            }
        }
        self.insecure_granted += o.insecure_granted;
        self.secure_denied += o.secure_denied;
        self.history_failures += o.history_failures;
        self.other_failures += o.other_failures;
        for c in o.counterexamples {
            if self.counterexamples.iter().filter(|d| d.failure == c.failure).count() < keep {
                self.counterexamples.push(c);
            }
        }
    }

    fn note(&mut self, p: Property) {
        let key = p.to_string();
        match self.by_property.iter_mut().find(|(q, _)| *q == key) {
            Some((_, n)) => *n += 1,
            None => self.by_property.push((key, 1)),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances      {}", self.instances);
        let _ = writeln!(s, "paths          {}", self.paths);
        let _ = writeln!(s, "states         {}", self.states);
        let _ = writeln!(s, "interactions   {} ({} granted, {} denied)", self.interactions, self.granted, self.denied);
        let mut props = self.by_property.clone();
        props.sort();
        for (p, n) in props {
            let _ = writeln!(s, "  insecure via {p}: {n}");
        }
        let _ = writeln!(s, "insecure but granted   {}", self.insecure_granted);
        let _ = writeln!(s, "secure but denied      {}", self.secure_denied);
        let _ = writeln!(s, "history failures       {}", self.history_failures);
        let _ = writeln!(s, "other failures         {}", self.other_failures);
        for c in &self.counterexamples {
            let _ = writeln!(s, "\ncounterexample (instance {}, {:?}): {}", c.instance, c.failure, c.detail);
            s.push_str(&c.scenario);
            for e in &c.events {
                let _ = writeln!(s, "  {}", e.to_text());
            }
        }
        s
    }
}

struct Instance<'a> {
    index: usize,
    initial: &'a Net,
    max_depth: usize,
    keep: usize,
    report: HarnessReport,
    path: Vec<TraceEvent>,
}

impl Instance<'_> {
    fn fail(&mut self, failure: Failure, detail: String, last: Option<&TraceEvent>) {
        match failure {
            Failure::InsecureGranted => self.report.insecure_granted += 1,
            Failure::SecureDenied => self.report.secure_denied += 1,
            Failure::HistoryDisagreement | Failure::HistoryDecreased => self.report.history_failures += 1,
            Failure::InvalidInstance | Failure::EngineError => self.report.other_failures += 1,
        }
        if self.report.counterexamples.len() < self.keep {
            let mut events = self.path.clone();
            events.extend(last.cloned());
            self.report.counterexamples.push(Counterexample {
                instance: self.index,
                failure,
                detail,
                scenario: render(self.initial),
                events,
            });
        }
    }

    fn visit(&mut self, net: &Net, gs: &GlobalState) {
        self.report.states += 1;
        let redexes = enumerate_redexes(net);
        let mut advanced = false;
        for r in &redexes {
            let (next, ev) = match apply(net, r, self.path.len()) {
                Ok(x) => x,
                Err(e) => {
                    self.fail(Failure::EngineError, e.to_string(), None);
                    continue;
                }
            };
            let verdict = match gs.hypothetical(&ev) {
                Ok(v) => v,
                Err(e) => {
                    self.fail(Failure::EngineError, e.to_string(), Some(&ev));
                    continue;
                }
            };
            self.report.interactions += 1;
            if ev.granted {
                self.report.granted += 1;
            } else {
                self.report.denied += 1;
            }
            for v in &verdict.violations {
                self.report.note(v.property);
            }
            if !verdict.secure && ev.granted {
                let why = verdict.violations.iter().map(|v| v.explanation.clone()).collect::<Vec<_>>().join("; ");
                self.fail(Failure::InsecureGranted, why, Some(&ev));
            }
            if verdict.secure && !ev.granted {
                self.fail(Failure::SecureDenied, format!("decision {} on a secure interaction", ev.decision), Some(&ev));
            }
            if !ev.enabled || self.path.len() >= self.max_depth {
                continue;
            }
            advanced = true;
            let mut after = gs.clone();
            if let Err(e) = after.record(&ev) {
                self.fail(Failure::EngineError, e.to_string(), Some(&ev));
                continue;
            }
            let diffs = history_disagreements(&next, &after);
            if !diffs.is_empty() {
                self.fail(Failure::HistoryDisagreement, diffs.join("; "), Some(&ev));
            }
            match history_monotone(gs, &after) {
                Ok(v) if v.is_empty() => {}
                Ok(v) => self.fail(Failure::HistoryDecreased, v[0].explanation.clone(), Some(&ev)),
                Err(e) => self.fail(Failure::EngineError, e.to_string(), Some(&ev)),
            }
            self.path.push(ev);
            self.visit(&next, &after);
            self.path.pop();
        }
        if !advanced {
            self.report.paths += 1;
        }
    }
}

/// Checks one net over all its interleavings.
pub fn check_net(index: usize, net: &Net, max_depth: usize, keep: usize) -> HarnessReport {
    let initial = normalize(net);
    let mut inst = Instance {
        index,
        initial: &initial,
        max_depth,
        keep,
        report: HarnessReport {
            instances: 1,
            ..Default::default()
        },
        path: Vec::new(),
    };
    let diags = validate(&initial);
    if !diags.is_empty() {
        inst.fail(Failure::InvalidInstance, diags[0].to_string(), None);
        return inst.report;
    }
    let gs = GlobalState::initial(&initial);
    inst.visit(&initial, &gs);
    inst.report
}

/// The net generated for instance `index` of a harness run.
pub fn instance_net(cfg: &HarnessConfig, index: usize) -> Net {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let mut net = harness_net(&mut rng, &cfg.lattice, cfg.bounds);
    for it in &mut net.items {
        it.annot.policy = cfg.policy.clone();
    }
    net
}

pub fn lemma_harness(cfg: &HarnessConfig) -> HarnessReport {
    let indices: Vec<usize> = (0..cfg.instances).collect();
    let reports = cfg.parallelism.map(&indices, |&i| {
        let net = instance_net(cfg, i);
        check_net(i, &net, cfg.max_depth, cfg.keep)
    });
    let mut total = HarnessReport::default();
    for r in reports {
        total.merge(r, cfg.keep);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blp::scenarios::builtin_net;

    #[test]
    fn zero_instances_is_vacuous() {
        let r = lemma_harness(&HarnessConfig::new(Lattice::chain3(), 0));
        assert_eq!((r.instances, r.failures()), (0, 0));
    }

    #[test]
    fn fig1a_denial_is_a_star1_violation() {
        let net = builtin_net("fig1a").unwrap().unwrap();
        let r = check_net(0, &net, 32, 5);
        assert_eq!(r.failures(), 0, "{}", r.to_text());
        assert!(r.denied >= 1);
        assert!(r.by_property.iter().any(|(p, _)| p == "star1"));
    }

    #[test]
    fn fig1b_has_no_denials() {
        let net = builtin_net("fig1b").unwrap().unwrap();
        let r = check_net(0, &net, 32, 5);
        assert_eq!((r.failures(), r.denied), (0, 0));
        assert_eq!(r.granted, 2);
    }

    #[test]
    fn small_batch_both_lattices() {
        for lat in [Lattice::chain3(), Lattice::diamond()] {
            let mut cfg = HarnessConfig::new(lat, 40);
            cfg.seed = 1234;
            let r = lemma_harness(&cfg);
            assert_eq!(r.failures(), 0, "{}", r.to_text());
            assert!(r.denied > 0 && r.granted > 0);
        }
    }

    #[test]
    fn weakened_policy_is_caught() {
        use crate::ast::{ActionKind, BinOp, LevExpr};
        use crate::blp::{blp_aspect, BLP_ASPECTS};
        let weakened = BLP_ASPECTS
            .iter()
            .filter(|a| **a != (LevExpr::Ot, LevExpr::Hs, ActionKind::Out))
            .map(|&(l, r, k)| blp_aspect(l, r, k))
            .reduce(|acc, a| Policy::bin(BinOp::Oplus, acc, a))
            .unwrap();
        let mut cfg = HarnessConfig::new(Lattice::chain3(), 1000);
        cfg.policy = Arc::new(weakened);
        let r = lemma_harness(&cfg);
        assert!(r.insecure_granted > 0, "{}", r.to_text());
        assert_eq!(r.secure_denied, 0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut cfg = HarnessConfig::new(Lattice::chain3(), 20);
        cfg.parallelism = Parallelism::Sequential;
        let a = lemma_harness(&cfg);
        cfg.parallelism = Parallelism::default();
        let b = lemma_harness(&cfg);
        assert_eq!((a.states, a.interactions, a.denied), (b.states, b.interactions, b.denied));
    }
}
