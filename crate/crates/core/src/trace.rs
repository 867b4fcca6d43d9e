//! Line-delimited trace format.
//!
//! One line per `(run, round)`. Fields appear in a fixed order as
//! space-separated `key=value` pairs; vectors are comma separated and
//! indexed by participant, send logs list `round/from>to/message` records
//! and use `-` when empty. Lines starting with `#` are headers.
//!
//! ```text
//! run=0 round=2 byzantine=false behaviour=- sendVector=- decision=undecided ...
//! ```

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::protocol::{
    participant_at, ByzantineBehaviour, CoordinatorState, Decision, DecisionChoice, EnvState,
    GlobalState, Message, ParticipantState, ProgramLocation, SendPattern, SendRecord, Vote,
};
use crate::system::InterpretedSystem;

/// The states of one run up to quiescence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub run: usize,
    pub states: Vec<GlobalState>,
}

impl Trace {
    pub fn of_run(sys: &InterpretedSystem, run: usize) -> Trace {
        let r = &sys.runs()[run];
        let end = (r.quiescent_from + 1).min(r.states.len());
        Trace { run, states: r.states[..end].to_vec() }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (m, g) in self.states.iter().enumerate() {
            out.push_str(&render_state(self.run, m, g));
            out.push('\n');
        }
        out
    }

    /// Every send, by either side, taken at a round in `rounds`.
    pub fn messages(&self, rounds: Range<usize>) -> Vec<SendRecord> {
        let Some(last) = self.states.last() else {
            return Vec::new();
        };
        let mut all: Vec<SendRecord> = last
            .env
            .send_log
            .iter()
            .chain(&last.env.peer_log)
            .filter(|r| rounds.contains(&r.round))
            .copied()
            .collect();
        all.sort();
        all
    }

    /// Groups parsed lines into traces, one per run, in order of appearance.
    pub fn parse_all(text: &str) -> Result<Vec<Trace>> {
        let mut traces: Vec<Trace> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (run, round, g) = parse_state(line).map_err(|msg| Error::Format {
                what: "trace",
                line: n + 1,
                msg,
            })?;
            match traces.last_mut() {
                Some(t) if t.run == run && t.states.len() == round => t.states.push(g),
                _ if round == 0 => traces.push(Trace { run, states: vec![g] }),
                _ => {
                    return Err(Error::Format {
                        what: "trace",
                        line: n + 1,
                        msg: format!("round {round} of run {run} out of sequence"),
                    })
                }
            }
        }
        Ok(traces)
    }
}

/// Every run of a system, each truncated at quiescence.
pub fn render_system(sys: &InterpretedSystem) -> String {
    (0..sys.runs().len()).map(|r| Trace::of_run(sys, r).render()).collect()
}

fn list<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    if xs.is_empty() {
        return "-".into();
    }
    xs.iter().map(f).collect::<Vec<_>>().join(",")
}

fn bit(b: &bool) -> String {
    if *b { "1" } else { "0" }.into()
}

fn record(r: &SendRecord) -> String {
    format!("{}/{}>{}/{}", r.round, r.from, r.to, r.msg)
}

fn choice_name(c: DecisionChoice) -> &'static str {
    match c {
        DecisionChoice::ForceAbort => "force_abort",
        DecisionChoice::ForceCommit => "force_commit",
    }
}

pub fn render_state(run: usize, round: usize, g: &GlobalState) -> String {
    let e = &g.env;
    let c = &g.coord;
    let n = g.parts.len();
    let mut s = String::new();
    let (behaviour, vector) = match &e.behaviour {
        None => ("-".to_string(), "-".to_string()),
        Some(b) => (
            choice_name(b.decision_choice).to_string(),
            list(&b.per_participant(n), |d| d.to_string()),
        ),
    };
    let _ = write!(
        s,
        "run={run} round={round} byzantine={} behaviour={behaviour} sendVector={vector} \
         decision={} rcvdStart={} startDelivered={} trap={} cheatingDetected={} chan={} \
         clog={} plog={} cv={} cvote={} cack={} cpc={} cstop={} cretrans={}",
        e.byzantine,
        e.decision,
        list(&e.rcvd_start_msg, bit),
        list(&e.start_delivered, bit),
        e.trap,
        e.cheating_detected,
        list(&e.decision_channel, |d| d.to_string()),
        list(&e.send_log, record),
        list(&e.peer_log, record),
        c.coord_vote,
        list(&c.vote, |v| v.to_string()),
        list(&c.ack, bit),
        c.pc,
        list(&c.stop_cond, bit),
        list(&c.retrans_cond, bit),
    );
    for p in &g.parts {
        let i = p.id;
        let _ = write!(
            s,
            " p{i}.vote={} p{i}.ack={} p{i}.outcome={} p{i}.pc={} p{i}.rdec={} p{i}.ovote={} p{i}.odec={}",
            p.vote,
            bit(&p.ack),
            p.outcome,
            p.pc,
            p.received_decision,
            list(&p.opened_votes, |v| v.to_string()),
            list(&p.opened_decisions, |d| d.to_string()),
        );
    }
    s
}

type Fields<'a> = Vec<(&'a str, &'a str)>;

fn take<'a>(fields: &mut std::slice::Iter<'_, (&'a str, &'a str)>, key: &str) -> Result<&'a str, String> {
    match fields.next() {
        Some((k, v)) if *k == key => Ok(v),
        Some((k, _)) => Err(format!("expected `{key}`, found `{k}`")),
        None => Err(format!("missing `{key}`")),
    }
}

fn items<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    if v == "-" {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| f(x).ok_or_else(|| format!("bad item `{x}`"))).collect()
}

fn parse_bit(s: &str) -> Option<bool> {
    match s {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn parse_record(s: &str) -> Option<SendRecord> {
    let mut parts = s.splitn(3, '/');
    let round = parts.next()?.parse().ok()?;
    let (from, to) = parts.next()?.split_once('>')?;
    let msg = Message::parse(parts.next()?)?;
    Some(SendRecord { round, from: from.parse().ok()?, to: to.parse().ok()?, msg })
}

fn one<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Result<T, String> {
    f(v).ok_or_else(|| format!("bad value `{v}`"))
}

/// Parses one trace line into `(run, round, state)`.
pub fn parse_state(line: &str) -> Result<(usize, usize, GlobalState), String> {
    let fields: Fields = line
        .split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`")))
        .collect::<Result<_, _>>()?;
    let it = &mut fields.iter();
    let num = |v: &str| v.parse::<usize>().ok();
    let run = one(take(it, "run")?, num)?;
    let round = one(take(it, "round")?, num)?;
    let byzantine = one(take(it, "byzantine")?, parse_bit)?;
    let behaviour_name = take(it, "behaviour")?;
    let vector = items(take(it, "sendVector")?, Decision::parse)?;
    let behaviour = match behaviour_name {
        "-" => None,
        name => {
            let decision_choice = match name {
                "force_abort" => DecisionChoice::ForceAbort,
                "force_commit" => DecisionChoice::ForceCommit,
                other => return Err(format!("bad behaviour `{other}`")),
            };
            Some(ByzantineBehaviour {
                decision_choice,
                send_pattern: SendPattern::ArbitraryVector(vector),
            })
        }
    };
    let env = EnvState {
        byzantine,
        behaviour,
        decision: one(take(it, "decision")?, Decision::parse)?,
        rcvd_start_msg: items(take(it, "rcvdStart")?, parse_bit)?,
        start_delivered: items(take(it, "startDelivered")?, parse_bit)?,
        trap: one(take(it, "trap")?, parse_bit)?,
        cheating_detected: one(take(it, "cheatingDetected")?, parse_bit)?,
        decision_channel: items(take(it, "chan")?, Decision::parse)?,
        send_log: items(take(it, "clog")?, parse_record)?,
        peer_log: items(take(it, "plog")?, parse_record)?,
    };
    let coord = CoordinatorState {
        coord_vote: one(take(it, "cv")?, Vote::parse)?,
        vote: items(take(it, "cvote")?, Vote::parse)?,
        ack: items(take(it, "cack")?, parse_bit)?,
        pc: one(take(it, "cpc")?, ProgramLocation::parse)?,
        stop_cond: items(take(it, "cstop")?, parse_bit)?,
        retrans_cond: items(take(it, "cretrans")?, parse_bit)?,
    };
    let n = coord.vote.len();
    let mut parts = Vec::with_capacity(n);
    for s in 0..n {
        let i = participant_at(s);
        let key = |f: &str| format!("p{i}.{f}");
        parts.push(ParticipantState {
            id: i,
            vote: one(take(it, &key("vote"))?, Vote::parse)?,
            ack: one(take(it, &key("ack"))?, parse_bit)?,
            outcome: one(take(it, &key("outcome"))?, Decision::parse)?,
            pc: one(take(it, &key("pc"))?, ProgramLocation::parse)?,
            received_decision: one(take(it, &key("rdec"))?, Decision::parse)?,
            opened_votes: items(take(it, &key("ovote"))?, Vote::parse)?,
            opened_decisions: items(take(it, &key("odec"))?, Decision::parse)?,
        });
    }
    if let Some((k, _)) = it.next() {
        return Err(format!("unexpected field `{k}`"));
    }
    Ok((run, round, GlobalState { env, coord, parts }))
}
