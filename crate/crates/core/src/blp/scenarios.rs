//! Scenarios shipped with the binary. The texts are the files under
//! `scenarios/`, compiled in.

use std::collections::BTreeMap;

use crate::ast::Net;
use crate::parser::{parse_scenario, ParseError};

const SOURCES: &[(&str, &str)] = &[
    ("airline", include_str!("../../scenarios/airline.akb")),
    ("airline_calm", include_str!("../../scenarios/airline_calm.akb")),
    ("airline_leak", include_str!("../../scenarios/airline_leak.akb")),
    ("fig1a", include_str!("../../scenarios/fig1a.akb")),
    ("fig1b", include_str!("../../scenarios/fig1b.akb")),
    ("fig1c", include_str!("../../scenarios/fig1c.akb")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// `None` when no builtin has that name.
pub fn builtin_net(name: &str) -> Option<Result<Net, ParseError>> {
    builtin_source(name).map(parse_scenario)
}

pub fn builtin_scenarios() -> BTreeMap<&'static str, Net> {
    SOURCES
        .iter()
        .map(|(n, s)| (*n, parse_scenario(s).expect("builtin scenario parses")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::validate;

    #[test]
    fn all_builtins_parse_and_validate() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 6);
        for (name, net) in &all {
            assert!(validate(net).is_empty(), "{name}: {:?}", validate(net));
        }
        assert_eq!(all["fig1b"].items.len(), 4);
        assert_eq!(all["fig1c"].items.len(), 5);
    }

    #[test]
    fn unknown_name() {
        assert!(builtin_net("nosuch").is_none());
    }
}
