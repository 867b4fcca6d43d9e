//! Specification battery and termination bounds.

use std::fmt::{self, Write as _};
use std::ops::Range;

use crate::checker::{check_with, Evaluator, Verdict};
use crate::error::{Error, Result};
use crate::logic::Formula;
use crate::protocol::{AgentId, ProgramLocation, COORDINATOR};
use crate::refinement::reachable_rounds;
use crate::system::InterpretedSystem;
use crate::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecId {
    S1a,
    S1b,
    S2a,
    S2b,
    S3,
    S4a,
    S4b,
}

impl SpecId {
    pub const ALL: [SpecId; 7] =
        [SpecId::S1a, SpecId::S1b, SpecId::S2a, SpecId::S2b, SpecId::S3, SpecId::S4a, SpecId::S4b];

    /// Verdicts reported for the Byzantine context with traps.
    pub fn expected(self) -> bool {
        matches!(self, SpecId::S1b | SpecId::S4a | SpecId::S4b)
    }

    pub fn parse(s: &str) -> Option<SpecId> {
        SpecId::ALL.into_iter().find(|id| id.to_string().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn participants(d: usize) -> impl Iterator<Item = AgentId> {
    2..=d
}

fn coordinator_done(d: usize) -> Formula {
    Formula::and_all(participants(d).map(|i| Formula::knows(COORDINATOR, Formula::dhat(i))))
}

/// The formula of a specification for `d` agents. Specification 3 is
/// checked at the rounds where a participant reaches one of its cheating
/// tests in `sys`.
pub fn spec_formula(id: SpecId, d: usize, sys: &InterpretedSystem) -> Formula {
    fn a(name: impl Into<String>) -> Formula {
        Formula::atom(name)
    }
    let all_yes = || {
        Formula::and_all(
            participants(d)
                .map(|i| a(format!("vote{i}=yes")))
                .chain([a("cv=yes")]),
        )
    };
    let some_no = || {
        Formula::or_all(
            participants(d)
                .map(|i| a(format!("vote{i}=no")))
                .chain([a("cv=no")]),
        )
    };
    match id {
        SpecId::S1a => {
            let clash = (1..=d).flat_map(|i| {
                (1..=d).filter(move |&j| j != i).map(move |j| {
                    Formula::not(Formula::and(
                        a(format!("outcome{i}=abort")),
                        a(format!("outcome{j}=commit")),
                    ))
                })
            });
            Formula::globally(Formula::and_all(clash))
        }
        SpecId::S1b => Formula::finally(Formula::and_all(participants(d).map(|i| {
            Formula::or(a(format!("outcome{i}=commit")), a(format!("outcome{i}=abort")))
        }))),
        SpecId::S2a => {
            Formula::globally(Formula::implies(all_yes(), Formula::finally(a("decision=commit"))))
        }
        SpecId::S2b => {
            Formula::globally(Formula::implies(some_no(), Formula::finally(a("decision=abort"))))
        }
        SpecId::S3 => {
            let tests = [
                ProgramLocation::CheatCheck1,
                ProgramLocation::DecideAbort2,
                ProgramLocation::FollowDecision3,
            ];
            Formula::and_all(participants(d).flat_map(|i| {
                let mut fs: Vec<usize> =
                    tests.iter().flat_map(|&l| reachable_rounds(sys, i, l)).collect();
                fs.sort();
                fs.dedup();
                fs.into_iter().map(move |f| {
                    Formula::power_next(
                        f as u32,
                        Formula::implies(a("cheating"), Formula::knows(i, a("cheating"))),
                    )
                })
            }))
        }
        SpecId::S4a => Formula::finally(coordinator_done(d)),
        SpecId::S4b => Formula::finally(Formula::and_all(participants(d).map(|i| {
            Formula::knows(i, Formula::knows(COORDINATOR, Formula::dhat(i)))
        }))),
    }
}

/// Checks every specification over `sys`.
pub fn run_table2(sys: &InterpretedSystem) -> Result<Vec<(SpecId, Verdict)>> {
    let mut ev = Evaluator::new(sys);
    SpecId::ALL
        .into_iter()
        .map(|id| Ok((id, check_with(&mut ev, &spec_formula(id, sys.d(), sys))?)))
        .collect()
}

pub fn render_table2(d: usize, row: &[(SpecId, Verdict)]) -> String {
    let mut head = format!("{:<4}", "d");
    let mut body = format!("{:<4}", d);
    for (id, v) in row {
        let _ = write!(head, "{:<7}", id.to_string().trim_start_matches('S'));
        let _ = write!(body, "{:<7}", if v.holds { "holds" } else { "fails" });
    }
    format!("{}\n{}\n", head.trim_end(), body.trim_end())
}

pub fn render_table2_records(d: usize, row: &[(SpecId, Verdict)]) -> String {
    row.iter()
        .map(|(id, v)| {
            format!(
                "d={d} spec={id} holds={} run={}\n",
                v.holds,
                v.run.map_or("-".to_string(), |r| r.to_string())
            )
        })
        .collect()
}

/// Round at which participants send their votes. Bounds are reported
/// relative to it.
pub const VOTE_ROUND: usize = 1;

/// Number of sends taken at rounds in `rounds`.
pub fn count_messages(trace: &Trace, rounds: Range<usize>) -> usize {
    trace.messages(rounds).len()
}

/// At `n`: the coordinator cannot yet terminate.
pub fn eq1(d: usize, n: usize) -> Formula {
    Formula::power_next(n as u32, Formula::not(coordinator_done(d)))
}

/// At `n`: the coordinator can terminate.
pub fn eq2(d: usize, n: usize) -> Formula {
    Formula::power_next(n as u32, coordinator_done(d))
}

/// Least `n` in `1..=cap` with `probe(n)` true, assuming monotonicity:
/// doubling from 1, then bisection.
fn least(cap: usize, mut probe: impl FnMut(usize) -> Result<bool>) -> Result<Option<usize>> {
    let mut lo = 0; // probe(lo) known false, or lo = 0
    let mut n = 1;
    loop {
        let at = n.min(cap);
        if probe(at)? {
            let mut hi = at;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if probe(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        if at == cap {
            return Ok(None);
        }
        lo = at;
        n *= 2;
    }
}

/// First `n` at which [`eq1`] fails, with the failing run.
pub fn find_shortest(sys: &InterpretedSystem) -> Result<(usize, Trace)> {
    let d = sys.d();
    let mut ev = Evaluator::new(sys);
    let cap = sys.last_round();
    let k = least(cap, |n| Ok(!check_with(&mut ev, &eq1(d, n))?.holds))?
        .ok_or(Error::BoundUnreachable { horizon: cap })?;
    let v = check_with(&mut ev, &eq1(d, k))?;
    Ok((k, v.trace.expect("failing check has a trace")))
}

/// First `n` at which [`eq2`] holds, with a run that fails it at `n - 1`.
pub fn find_longest(sys: &InterpretedSystem) -> Result<(usize, Trace)> {
    let d = sys.d();
    let mut ev = Evaluator::new(sys);
    let cap = sys.last_round();
    let w = least(cap, |n| Ok(check_with(&mut ev, &eq2(d, n))?.holds))?
        .ok_or(Error::BoundUnreachable { horizon: cap })?;
    let v = check_with(&mut ev, &eq2(d, w - 1))?;
    Ok((w, v.trace.expect("failing check has a trace")))
}

#[derive(Clone, Debug)]
pub struct BoundsResult {
    pub d: usize,
    /// Absolute rounds.
    pub shortest_k: usize,
    pub longest_w: usize,
    pub shortest_witness: Trace,
    pub longest_witness: Trace,
    pub shortest_messages: usize,
    pub longest_messages: usize,
}

impl BoundsResult {
    pub fn shortest_rounds(&self) -> usize {
        self.shortest_k - VOTE_ROUND
    }

    pub fn longest_rounds(&self) -> usize {
        self.longest_w - VOTE_ROUND
    }

    pub fn render(&self) -> String {
        format!(
            "{:<4}{:<12}{:<10}{:<10}{:<12}{:<10}{}\n{:<4}{:<12}{:<10}{:<10}{:<12}{:<10}{}\n",
            "d",
            "shortest_n",
            "shortest",
            "messages",
            "longest_n",
            "longest",
            "messages",
            self.d,
            self.shortest_k,
            self.shortest_rounds(),
            self.shortest_messages,
            self.longest_w,
            self.longest_rounds(),
            self.longest_messages
        )
    }

    pub fn record(&self) -> String {
        format!(
            "d={} vote_round={VOTE_ROUND} shortest_n={} shortest={} shortest_messages={} \
             shortest_run={} longest_n={} longest={} longest_messages={} longest_run={}\n",
            self.d,
            self.shortest_k,
            self.shortest_rounds(),
            self.shortest_messages,
            self.shortest_witness.run,
            self.longest_w,
            self.longest_rounds(),
            self.longest_messages,
            self.longest_witness.run
        )
    }
}

/// Both bounds, with messages counted from the vote round up to the bound.
pub fn bounds(sys: &InterpretedSystem) -> Result<BoundsResult> {
    let (k, sw) = find_shortest(sys)?;
    let (w, lw) = find_longest(sys)?;
    Ok(BoundsResult {
        d: sys.d(),
        shortest_k: k,
        longest_w: w,
        shortest_messages: count_messages(&sw, VOTE_ROUND..k),
        longest_messages: count_messages(&lw, VOTE_ROUND..w),
        shortest_witness: sw,
        longest_witness: lw,
    })
}
