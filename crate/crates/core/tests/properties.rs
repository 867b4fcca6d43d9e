mod common;

use kbp_commit::analysis::{eq1, eq2, find_longest, find_shortest, run_table2};
use kbp_commit::atoms::{AtomKey, Observation};
use kbp_commit::checker::{check, indistinguishable, Evaluator};
use kbp_commit::protocol::{
    cheating_ground_truth, Decision, Message, ProgramLocation, Vote, COORDINATOR,
};
use kbp_commit::refinement::{builtin_candidates, evaluator_with, tabulated_row3, verify_candidate};
use kbp_commit::system::Point;
use kbp_commit::trace::{render_system, Trace};
use kbp_commit::{generate, parse, Config, Formula, Policy};
use proptest::prelude::*;

use common::{formula_strategy, full_system};

fn honest(d: usize) -> Config {
    Config { d, byzantine_policy: Policy::Never, ..Config::default() }
}

#[test]
fn honest_coordinator_never_cheats() {
    let sys = generate(&honest(3)).unwrap();
    for p in sys.points() {
        let g = sys.state(p);
        assert!(!cheating_ground_truth(&g.env, &g.coord));
    }
}

#[test]
fn no_voter_never_commits() {
    let sys = full_system(3);
    for p in sys.points() {
        for q in &sys.state(p).parts {
            assert!(!(q.vote == Vote::No && q.outcome == Decision::Commit));
        }
    }
}

#[test]
fn outcomes_are_set_at_most_once() {
    let sys = full_system(3);
    for run in sys.runs() {
        for w in run.states.windows(2) {
            for (a, b) in w[0].parts.iter().zip(&w[1].parts) {
                if a.outcome != Decision::Undecided {
                    assert_eq!(a.outcome, b.outcome);
                }
            }
            if w[0].env.decision != Decision::Undecided {
                assert_eq!(w[0].env.decision, w[1].env.decision);
            }
        }
    }
}

#[test]
fn send_logs_only_grow() {
    let sys = full_system(3);
    for run in sys.runs() {
        for w in run.states.windows(2) {
            assert!(w[1].env.send_log.starts_with(&w[0].env.send_log));
            assert!(w[1].env.peer_log.starts_with(&w[0].env.peer_log));
        }
    }
}

#[test]
fn coordinator_acks_follow_a_decision() {
    let sys = full_system(3);
    for p in sys.points() {
        let g = sys.state(p);
        for (s, &ack) in g.coord.ack.iter().enumerate() {
            if ack {
                assert!(g.env.send_log.iter().any(|r| r.to == s + 2
                    && matches!(r.msg, Message::Decision(_))));
            }
        }
    }
}

#[test]
fn runs_stutter_after_quiescence() {
    let sys = full_system(3);
    for run in sys.runs() {
        let q = run.quiescent_from;
        assert!(q < sys.len());
        assert!(run.states[q..].iter().all(|g| *g == run.states[q]));
    }
}

#[test]
fn histories_grow_one_observation_per_round() {
    let sys = full_system(2);
    for p in sys.points() {
        for a in 1..=2 {
            assert_eq!(sys.observation_history(p.run, a, p.round).len(), p.round + 1);
        }
    }
}

#[test]
fn coordinator_cannot_see_the_trap() {
    let sys = full_system(3);
    let runs = sys.runs();
    let mut pairs = 0;
    for (a, ra) in runs.iter().enumerate() {
        for (b, rb) in runs.iter().enumerate().skip(a + 1) {
            let mut flipped = ra.choice.clone();
            flipped.trap = !flipped.trap;
            if flipped == rb.choice {
                // The trap changes peer traffic only after the announcement.
                for m in 0..=4 {
                    assert!(indistinguishable(sys, Point::new(a, m), Point::new(b, m), COORDINATOR));
                }
                pairs += 1;
            }
        }
    }
    assert!(pairs > 0);
}

#[test]
fn participant_cannot_see_peer_vote_before_opening() {
    let sys = full_system(3);
    let runs = sys.runs();
    let mut pairs = 0;
    for (a, ra) in runs.iter().enumerate() {
        for (b, rb) in runs.iter().enumerate() {
            let mut other = ra.choice.clone();
            other.votes[1] = rb.choice.votes[1];
            if a != b && other == rb.choice && ra.choice.coord_vote == Vote::No && ra.choice.behaviour.is_none() {
                // Decision is abort either way; participant 2 sees the same.
                let ha = sys.observation_history(a, 2, 4);
                let hb = sys.observation_history(b, 2, 4);
                assert_eq!(ha, hb);
                pairs += 1;
            }
        }
    }
    assert!(pairs > 0);
}

#[test]
fn projection_agrees_with_global_atoms() {
    let sys = full_system(3);
    let names = [
        "byzantine", "trap", "cheatingDetected", "decision=commit", "rcvdStart2", "cv=yes",
        "cvote3=no", "ack2", "stop3", "retrans2", "pc1=Done", "outcome1=abort", "pc2=Receive",
        "outcome3=commit", "vote2=yes", "rdec3=abort", "sentAck2", "held2=abort", "ovote2_3=no",
        "odec3_2=commit",
    ];
    for p in sys.points().step_by(7) {
        let g = sys.state(p);
        for name in names {
            let key = AtomKey::parse(name, 3).unwrap();
            for agent in 1..=3 {
                let seen = Observation::of(g, agent).atom(key);
                assert_eq!(seen.is_some(), key.observable_by(agent), "{name} by {agent}");
                if let Some(v) = seen {
                    assert_eq!(v, key.eval(g), "{name}");
                }
            }
        }
    }
}

#[test]
fn prefix_at_last_round_is_identity() {
    let sys = full_system(2);
    let same = sys.prefix_system(sys.last_round());
    assert_eq!(same.runs(), sys.runs());
    assert_eq!(sys.prefix_system(0).runs().len(), sys.runs().len());
    let honest2 = generate(&Config { trap_policy: Policy::Never, ..honest(2) }).unwrap();
    assert_eq!(honest2.prefix_system(1).runs().len(), 4);
}

#[test]
fn honest_context_satisfies_everything() {
    for d in 2..=3 {
        let sys = generate(&honest(d)).unwrap();
        for (id, v) in run_table2(&sys).unwrap() {
            assert!(v.holds, "d={d} {id}: {}", v.header());
        }
    }
}

#[test]
fn byzantine_all_yes_abort_broadcast_exists() {
    let sys = full_system(3);
    assert!(sys.runs().iter().any(|r| {
        let g = r.states.last().unwrap();
        g.parts.iter().all(|p| p.vote == Vote::Yes)
            && g.env.send_log.iter().filter(|s| s.msg == Message::Decision(Decision::Abort)).count() == 2
    }));
}

#[test]
fn knowledge_of_own_termination_is_stable() {
    let sys = full_system(3);
    let mut ev = Evaluator::new(sys);
    for i in 2..=3 {
        let f = Formula::knows(COORDINATOR, Formula::dhat(i));
        let t = ev.table(&f).unwrap();
        for r in 0..sys.runs().len() {
            let row = &t[r * sys.len()..(r + 1) * sys.len()];
            assert!(row.windows(2).all(|w| !w[0] || w[1]), "run {r}");
        }
    }
}

#[test]
fn cheating_knowledge_persists_after_announcement() {
    let sys = full_system(3);
    let mut ev = Evaluator::new(sys);
    for i in 2..=3 {
        let k = ev.table(&Formula::knows(i, parse("cheating").unwrap())).unwrap();
        for r in 0..sys.runs().len() {
            for m in 4..sys.len() - 1 {
                if k[r * sys.len() + m] {
                    assert!(k[r * sys.len() + m + 1]);
                }
            }
        }
    }
}

#[test]
fn search_bounds_are_tight() {
    let sys = full_system(3);
    let (k, shortest) = find_shortest(sys).unwrap();
    let (w, _) = find_longest(sys).unwrap();
    for n in 1..k {
        assert!(check(sys, &eq1(3, n)).unwrap().holds);
    }
    assert!(!check(sys, &eq1(3, k)).unwrap().holds);
    for n in 1..w {
        assert!(!check(sys, &eq2(3, n)).unwrap().holds);
    }
    assert!(check(sys, &eq2(3, w)).unwrap().holds);
    assert!(k <= w);
    let last = shortest.states.last().unwrap();
    assert!(last.parts.iter().all(|p| p.vote == Vote::No));
}

#[test]
fn byzantine_behaviour_does_not_move_the_shortest_bound() {
    let honest2 = generate(&honest(2)).unwrap();
    assert_eq!(find_shortest(&honest2).unwrap().0, find_shortest(full_system(2)).unwrap().0);
}

#[test]
fn tabulated_row_three_misses_the_all_abort_case() {
    assert!(verify_candidate(full_system(2), &tabulated_row3(2, 2)).unwrap().iter().all(|(_, v)| v.holds));
    let verdicts = verify_candidate(full_system(3), &tabulated_row3(3, 2)).unwrap();
    let (_, v) = verdicts.iter().find(|(_, v)| !v.holds).unwrap();
    let g = full_system(3).state(v.point.unwrap());
    assert!(g.env.trap);
    assert!(g.parts.iter().any(|p| p.vote == Vote::No));
    assert!(g.env.decision_channel.iter().all(|&d| d == Decision::Abort));
}

#[test]
fn second_cheating_test_implied_by_first() {
    let sys = full_system(3);
    let cands = builtin_candidates(3);
    for i in 2..=3 {
        let first = cands.iter().find(|c| c.name == format!("cheat1[{i}]")).unwrap();
        let second = cands.iter().find(|c| c.name == format!("cheat2[{i}]")).unwrap();
        let mut ev = Evaluator::new(sys);
        let (a, b) = (ev.table(&first.expr).unwrap(), ev.table(&second.expr).unwrap());
        for p in sys.points() {
            if sys.state(p).participant(i).pc == ProgramLocation::DecideAbort2 {
                let idx = p.run * sys.len() + p.round;
                assert!(!a[idx] || b[idx]);
            }
        }
    }
}

#[test]
fn predicates_constant_on_indistinguishable_points() {
    let sys = full_system(3);
    for c in builtin_candidates(3) {
        let mut ev = evaluator_with(sys, &c).unwrap();
        let t = ev.table(&c.expr).unwrap();
        for m in 0..sys.len() {
            let mut seen = std::collections::HashMap::new();
            for p in sys.points_at(m) {
                let v = t[p.run * sys.len() + m];
                assert_eq!(*seen.entry(sys.history_id(c.agent, p)).or_insert(v), v, "{}", c.name);
            }
        }
    }
}

#[test]
fn conservative_guard_never_licenses_a_commit() {
    let sys = full_system(3);
    let mut ev = Evaluator::new(sys);
    for i in 2..=3 {
        let f = Formula::knows(i, parse("!cheating").unwrap());
        for p in sys.points() {
            let part = sys.state(p).participant(i);
            if part.pc == ProgramLocation::FollowDecision3 && part.received_decision == Decision::Commit {
                assert!(!ev.holds(&f, p).unwrap(), "{p:?}");
            }
        }
    }
}

/// Reading `dhat[i]` as knowledge of the coordinator's own decision makes it
/// a function of time alone, so the bounds degenerate.
#[test]
fn coordinator_decision_reading_of_dhat_collapses() {
    let sys = full_system(3);
    let mut ev = Evaluator::new(sys);
    for i in 2..=3 {
        let f = parse(&format!("K[c] K[{i}] (decision=commit | decision=abort)")).unwrap();
        for m in 0..sys.len() {
            let col = ev.column(&f, m).unwrap();
            assert!(col.iter().all(|&b| b == col[0]), "round {m} splits");
        }
    }
}

#[test]
fn trace_round_trips() {
    let sys = full_system(3);
    let text = render_system(sys);
    let traces = Trace::parse_all(&text).unwrap();
    assert_eq!(traces.len(), sys.runs().len());
    for (r, t) in traces.iter().enumerate() {
        assert_eq!(*t, Trace::of_run(sys, r));
    }
}

#[test]
fn check_reports_first_violating_run_and_witness() {
    let sys = full_system(2);
    let v = check(sys, &parse("X^3 K[2] cheating").unwrap()).unwrap();
    assert!(!v.holds);
    assert_eq!(v.run, Some(0));
    let (p, w) = (v.point.unwrap(), v.witness.unwrap());
    assert!(indistinguishable(sys, p, w, 2));
    assert!(v.trace.is_some() && v.witness_trace.is_some());
    assert!(check(sys, &Formula::True).unwrap().holds);
}

#[test]
fn quiescent_points_reduce_temporal_operators() {
    let sys = full_system(2);
    let last = sys.last_round();
    let mut ev = Evaluator::new(sys);
    for f in ["outcome2=commit", "cheatingDetected", "K[2] cheating"] {
        let f = parse(f).unwrap();
        for r in 0..sys.runs().len() {
            let p = Point::new(r, last);
            let v = ev.holds(&f, p).unwrap();
            assert_eq!(ev.holds(&Formula::globally(f.clone()), p).unwrap(), v);
            assert_eq!(ev.holds(&Formula::finally(f.clone()), p).unwrap(), v);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn indistinguishability_is_an_equivalence(a in 0usize..144, b in 0usize..144, c in 0usize..144, m in 0usize..11, agent in 1usize..=3) {
        let sys = full_system(3);
        let (p, q, r) = (Point::new(a, m), Point::new(b, m), Point::new(c, m));
        prop_assert!(indistinguishable(sys, p, p, agent));
        prop_assert_eq!(indistinguishable(sys, p, q, agent), indistinguishable(sys, q, p, agent));
        if indistinguishable(sys, p, q, agent) && indistinguishable(sys, q, r, agent) {
            prop_assert!(indistinguishable(sys, p, r, agent));
        }
        prop_assert!(!indistinguishable(sys, p, Point::new(b, (m + 1) % 11), agent));
    }

    #[test]
    fn knowledge_is_veridical(f in formula_strategy(common::SMALL_ATOMS, vec![1, 2]), run in 0usize..40, m in 0usize..11, agent in 1usize..=2) {
        let sys = full_system(2);
        let mut ev = Evaluator::new(sys);
        let p = Point::new(run, m);
        if ev.holds(&Formula::knows(agent, f.clone()), p).unwrap() {
            prop_assert!(ev.holds(&f, p).unwrap());
        }
        prop_assert!(ev.holds(&Formula::knows(agent, Formula::True), p).unwrap());
    }

    #[test]
    fn present_time_formulas_agree_on_prefixes(f in formula_strategy(common::SMALL_ATOMS, vec![1, 2]), m in 0usize..11) {
        prop_assume!(f.is_present_time());
        let sys = full_system(2);
        let prefix = sys.prefix_system(m);
        let full = Evaluator::new(sys).column(&f, m).unwrap();
        let cut = Evaluator::new(&prefix).column(&f, m).unwrap();
        prop_assert_eq!(full, cut);
    }

    #[test]
    fn power_next_unfolds(f in formula_strategy(common::SMALL_ATOMS, vec![1, 2]), n in 0u32..4, run in 0usize..40, m in 0usize..11) {
        let sys = full_system(2);
        let mut ev = Evaluator::new(sys);
        let p = Point::new(run, m);
        let mut unfolded = f.clone();
        for _ in 0..n {
            unfolded = Formula::next(unfolded);
        }
        prop_assert_eq!(ev.holds(&Formula::power_next(n, f), p).unwrap(), ev.holds(&unfolded, p).unwrap());
    }
}
