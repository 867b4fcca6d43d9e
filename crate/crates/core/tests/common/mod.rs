#![allow(dead_code)]

use std::sync::OnceLock;

use kbp_commit::atoms::AtomKey;
use kbp_commit::logic::Formula;
use kbp_commit::system::{observation_history, InterpretedSystem};
use kbp_commit::{generate, Config};
use proptest::prelude::*;

pub fn full_system(d: usize) -> &'static InterpretedSystem {
    static SYS: [OnceLock<InterpretedSystem>; 6] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    SYS[d].get_or_init(|| generate(&Config { d, ..Config::default() }).unwrap())
}

/// Direct reading of the satisfaction clauses: knowledge quantifies over
/// every point of every run whose observation history is equal.
pub fn brute_holds(sys: &InterpretedSystem, run: usize, round: usize, f: &Formula) -> bool {
    let len = sys.len();
    let last = len - 1;
    match f {
        Formula::True => true,
        Formula::Atom { name, back } => {
            let back = *back as usize;
            round >= back
                && AtomKey::parse(name, sys.d())
                    .unwrap()
                    .eval(&sys.runs()[run].states[round - back])
        }
        Formula::Not(a) => !brute_holds(sys, run, round, a),
        Formula::And(a, b) => brute_holds(sys, run, round, a) && brute_holds(sys, run, round, b),
        Formula::Or(a, b) => brute_holds(sys, run, round, a) || brute_holds(sys, run, round, b),
        Formula::Implies(a, b) => !brute_holds(sys, run, round, a) || brute_holds(sys, run, round, b),
        Formula::Iff(a, b) => brute_holds(sys, run, round, a) == brute_holds(sys, run, round, b),
        Formula::Next(a) => brute_holds(sys, run, (round + 1).min(last), a),
        Formula::PowerNext(n, a) => {
            let mut m = round;
            for _ in 0..*n {
                m = (m + 1).min(last);
            }
            brute_holds(sys, run, m, a)
        }
        Formula::Globally(a) => (round..len).all(|m| brute_holds(sys, run, m, a)),
        Formula::Finally(a) => (round..len).any(|m| brute_holds(sys, run, m, a)),
        Formula::Knows(agent, a) => {
            let mine = observation_history(&sys.runs()[run], *agent, round);
            (0..sys.runs().len()).all(|r| {
                (0..len).all(|m| {
                    observation_history(&sys.runs()[r], *agent, m) != mine || brute_holds(sys, r, m, a)
                })
            })
        }
    }
}

pub const SMALL_ATOMS: &[&str] = &[
    "vote2=yes",
    "cv=yes",
    "byzantine",
    "trap",
    "decision=commit",
    "decision=abort",
    "rcvdStart2",
    "cvote2=no",
    "pc1=Decide",
    "pc2=AwaitDecision",
    "rdec2=commit",
    "cheating",
];

pub fn formula_strategy(atoms: &'static [&'static str], agents: Vec<usize>) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        proptest::sample::select(atoms).prop_map(Formula::atom),
        (proptest::sample::select(atoms), 1u32..3).prop_map(|(a, k)| Formula::Atom { name: a.to_string(), back: k }),
    ];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        let agents = agents.clone();
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::iff(a, b)),
            inner.clone().prop_map(Formula::next),
            (0u32..4, inner.clone()).prop_map(|(n, a)| Formula::power_next(n, a)),
            inner.clone().prop_map(Formula::globally),
            inner.clone().prop_map(Formula::finally),
            (proptest::sample::select(agents), inner).prop_map(|(i, a)| Formula::knows(i, a)),
        ]
    })
}

/// At most eight runs of the two-agent system, cut after round `horizon`.
pub fn small_system(picks: &[usize], horizon: usize) -> InterpretedSystem {
    let full = full_system(2);
    let runs: Vec<usize> = picks.iter().map(|&p| p % full.runs().len()).collect();
    full.subsystem(&runs).prefix_system(horizon)
}
