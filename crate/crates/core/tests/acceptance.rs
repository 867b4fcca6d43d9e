//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use kbp_commit::analysis::{bounds, count_messages, run_table2, SpecId, VOTE_ROUND};
use kbp_commit::checker::Evaluator;
use kbp_commit::generator::{generate_with, kbp_mismatches};
use kbp_commit::protocol::{Decision, Message, ProgramLocation, Vote};
use kbp_commit::refinement::{builtin_candidates, naive_stop_guess, verify_candidate, PredicateOracle};
use kbp_commit::system::Point;
use kbp_commit::trace::Trace;
use kbp_commit::{parse, Config, Formula};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};

use common::{brute_holds, formula_strategy, full_system, small_system, SMALL_ATOMS};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verdict_row() -> Outcome {
    let mut notes = Vec::new();
    for d in 2..=4 {
        let start = Instant::now();
        let row = run_table2(full_system(d)).map_err(|e| e.to_string())?;
        let got: Vec<bool> = row.iter().map(|(_, v)| v.holds).collect();
        let want: Vec<bool> = SpecId::ALL.iter().map(|id| id.expected()).collect();
        if got != want {
            return Err(format!("d={d}: got {got:?}, want {want:?}"));
        }
        notes.push(format!("d={d} {:.1}s", start.elapsed().as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn undetected_cheating_trace() -> Outcome {
    let sys = full_system(3);
    let row = run_table2(sys).map_err(|e| e.to_string())?;
    let (_, v) = row.iter().find(|(id, _)| *id == SpecId::S3).unwrap();
    let text = v.trace.as_ref().ok_or("no counterexample")?.render();
    let trace = Trace::parse_all(&text).map_err(|e| e.to_string())?.remove(0);
    let last = trace.states.last().unwrap();
    if !last.parts.iter().all(|p| p.vote == Vote::Yes) {
        return Err("not every participant voted yes".into());
    }
    let sent: Vec<Decision> = last
        .env
        .send_log
        .iter()
        .filter_map(|r| match r.msg {
            Message::Decision(d) => Some(d),
            _ => None,
        })
        .collect();
    let consistent = !sent.is_empty() && sent.iter().all(|&d| d == sent[0]);
    let incorrect = match sent.first() {
        Some(Decision::Abort) => last.coord.coord_vote == Vote::Yes,
        Some(Decision::Commit) => last.coord.coord_vote == Vote::No,
        _ => false,
    };
    if !(consistent && incorrect) {
        return Err(format!("sends {sent:?} with cv={}", last.coord.coord_vote));
    }
    Ok(format!("run {} cv={} broadcast {}", trace.run, last.coord.coord_vote, sent[0]))
}

fn predicate_equivalences() -> Outcome {
    let mut checked = 0;
    for d in 2..=3 {
        let sys = full_system(d);
        for c in builtin_candidates(d) {
            for (n, v) in verify_candidate(sys, &c).map_err(|e| e.to_string())? {
                if !v.holds {
                    return Err(format!("d={d} {} fails at n={n}: {}", c.name, v.header()));
                }
                checked += 1;
            }
        }
        let naive = verify_candidate(sys, &naive_stop_guess(2)).map_err(|e| e.to_string())?;
        let (_, fail) = naive
            .iter()
            .find(|(_, v)| !v.holds)
            .ok_or(format!("d={d}: naive guess passes"))?;
        let p = fail.point.unwrap();
        if sys.state(p).participant(2).vote != Vote::No {
            return Err(format!("d={d}: naive witness has no no-vote"));
        }
    }
    Ok(format!("{checked} obligations hold, naive guess refuted"))
}

/// Counts `round/from>to/msg` records of the clog and plog fields on the
/// last line of a rendered trace.
fn recount(text: &str, lo: usize, hi: usize) -> usize {
    let last = text.lines().rfind(|l| !l.starts_with('#')).unwrap();
    last.split_whitespace()
        .filter_map(|kv| kv.strip_prefix("clog=").or_else(|| kv.strip_prefix("plog=")))
        .filter(|v| *v != "-")
        .flat_map(|v| v.split(','))
        .filter(|rec| {
            let round: usize = rec.split('/').next().unwrap().parse().unwrap();
            (lo..hi).contains(&round)
        })
        .count()
}

fn termination_bounds() -> Outcome {
    let mut notes = Vec::new();
    for d in 2..=4 {
        let b = bounds(full_system(d)).map_err(|e| e.to_string())?;
        let (s, l) = (b.shortest_rounds(), b.longest_rounds());
        let sm = recount(&b.shortest_witness.render(), VOTE_ROUND, b.shortest_k);
        let lm = recount(&b.longest_witness.render(), VOTE_ROUND, b.longest_w);
        let sm2 = count_messages(&b.shortest_witness, VOTE_ROUND..b.shortest_k);
        let lm2 = count_messages(&b.longest_witness, VOTE_ROUND..b.longest_w);
        let want = (1, d - 1, 3, 3 * (d - 1));
        if (s, b.shortest_messages, l, b.longest_messages) != want || (sm, lm) != (sm2, lm2) || sm != want.1 || lm != want.3 {
            return Err(format!(
                "d={d}: got ({s}, {}, {l}, {}), recounted ({sm}, {lm}), want {want:?}",
                b.shortest_messages, b.longest_messages
            ));
        }
        notes.push(format!("d={d} ({s},{sm}) ({l},{lm})"));
    }
    Ok(notes.join(", "))
}

fn semantics_oracle() -> Outcome {
    let mut runner = TestRunner::new(PtConfig { cases: 200, failure_persistence: None, ..PtConfig::default() });
    let strategy = (
        proptest::collection::vec(0usize..40, 1..=8),
        2usize..=4,
        formula_strategy(SMALL_ATOMS, vec![1, 2]),
        any::<prop::sample::Index>(),
        any::<prop::sample::Index>(),
    );
    let count = std::cell::Cell::new(0);
    let result = runner.run(&strategy, |(picks, horizon, f, r, m)| {
        let sys = small_system(&picks, horizon);
        prop_assert!(sys.runs().len() <= 8 && sys.last_round() <= 4);
        let p = Point::new(r.index(sys.runs().len()), m.index(sys.len()));
        let fast = Evaluator::new(&sys).holds(&f, p).unwrap();
        prop_assert_eq!(fast, brute_holds(&sys, p.run, p.round, &f), "{} at {:?}", f, p);
        count.set(count.get() + 1);
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!("{} pairs agree", count.get())),
        Err(e) => Err(e.to_string()),
    }
}

fn knowledge_input_consistency() -> Outcome {
    let sys = full_system(3);
    let bad = kbp_mismatches(sys).map_err(|e| e.to_string())?;
    let inputs: usize = sys.runs().iter().flat_map(|r| &r.inputs).map(|i| i.len()).sum();
    if bad.is_empty() {
        Ok(format!("{inputs} inputs, 0 mismatches"))
    } else {
        Err(format!("{} mismatches, first {:?}", bad.len(), bad[0]))
    }
}

fn behavioural_equivalence() -> Outcome {
    let config = Config { d: 3, ..Config::default() };
    let kbp = full_system(3);
    let oracle = PredicateOracle::new(3, &builtin_candidates(3));
    let concrete = generate_with(&config, &oracle).map_err(|e| e.to_string())?;
    let a: Vec<_> = kbp.runs().iter().map(|r| &r.states).collect();
    let b: Vec<_> = concrete.runs().iter().map(|r| &r.states).collect();
    if a == b {
        Ok(format!("{} runs identical", a.len()))
    } else {
        Err("run sets differ".into())
    }
}

fn conservative_guard() -> Outcome {
    let sys = full_system(3);
    let mut ev = Evaluator::new(sys);
    let mut violations = Vec::new();
    let mut points = 0;
    for i in 2..=3 {
        let knows_honest = Formula::knows(i, parse("!cheating").unwrap());
        for p in sys.points() {
            let part = sys.state(p).participant(i);
            if part.pc == ProgramLocation::FollowDecision3 && part.vote == Vote::Yes {
                points += 1;
                if ev.holds(&knows_honest, p).unwrap() {
                    violations.push((i, p));
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("false at all {points} points"))
    } else {
        let (i, p) = violations[0];
        let g = sys.state(p);
        Err(format!(
            "K[{i}] !cheating holds at {} of {points} points, e.g. run {} round {} (trap={}, votes {:?}, decisions {:?})",
            violations.len(),
            p.run,
            p.round,
            g.env.trap,
            g.parts.iter().map(|q| q.vote).collect::<Vec<_>>(),
            g.env.decision_channel
        ))
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("verdict row for d=2,3,4", verdict_row),
        ("undetected cheating counterexample", undetected_cheating_trace),
        ("built-in predicate equivalences", predicate_equivalences),
        ("termination bounds and message counts", termination_bounds),
        ("semantics oracle equivalence", semantics_oracle),
        ("knowledge inputs match final system", knowledge_input_consistency),
        ("behavioural equivalence with predicates", behavioural_equivalence),
        ("conservative guard never true for yes-voters", conservative_guard),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("PASS {}: {name} ({note})", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name} ({why})", n + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
