//! Checking concrete predicates against the knowledge tests they replace.
//!
//! A candidate is a boolean expression over atoms its agent can observe,
//! optionally reading past rounds with `atom@k`. For every round `n` at
//! which its program location is reachable the harness checks
//! `X^n (pc<a>=L => (v <=> target))`, where `v` is the candidate's value.

use std::fmt::Write as _;

use crate::atoms::AtomKey;
use crate::checker::{check_with, Evaluator, Verdict};
use crate::error::{Error, Result};
use crate::generator::KnowledgeOracle;
use crate::logic::{parse, Formula};
use crate::protocol::{agent_name, AgentId, KnowledgeTest, ProgramLocation, COORDINATOR};
use crate::system::InterpretedSystem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidatePredicate {
    pub name: String,
    pub agent: AgentId,
    pub location: ProgramLocation,
    /// The knowledge formula the predicate must be equivalent to.
    pub target: Formula,
    /// Propositional expression over the agent's observable atoms.
    pub expr: Formula,
    /// Rounds to check; `None` means every round the location is reached.
    pub rounds: Option<Vec<usize>>,
}

impl CandidatePredicate {
    pub fn new(
        name: impl Into<String>,
        agent: AgentId,
        location: ProgramLocation,
        target: Formula,
        expr: Formula,
    ) -> CandidatePredicate {
        CandidatePredicate { name: name.into(), agent, location, target, expr, rounds: None }
    }

    /// Candidate for a protocol test, built from expression text.
    fn for_test(test: KnowledgeTest, expr: &str) -> CandidatePredicate {
        let expr = parse(expr).expect("built-in candidate parses");
        CandidatePredicate::new(test.to_string(), test.agent(), test.location(), test.formula(), expr)
    }

    /// The protocol test this candidate implements, matched by name.
    pub fn test(&self, d: usize) -> Option<KnowledgeTest> {
        all_tests(d).into_iter().find(|t| t.to_string() == self.name)
    }

    /// Fails unless every atom of the expression is observable by the agent.
    pub fn check_observable(&self, d: usize) -> Result<()> {
        if !self.expr.is_propositional() {
            return Err(Error::Syntax {
                pos: 0,
                msg: format!("`{}`: candidate expressions must be propositional", self.name),
            });
        }
        for name in self.expr.atoms() {
            if !AtomKey::parse(name, d)?.observable_by(self.agent) {
                return Err(Error::ObservabilityViolation {
                    name: self.name.clone(),
                    atom: name.to_string(),
                    agent: agent_name(self.agent),
                });
            }
        }
        Ok(())
    }

    pub fn value_atom(&self) -> String {
        format!("v:{}", self.name)
    }

    /// The obligation checked at round `n`.
    pub fn obligation(&self, n: usize) -> Formula {
        let at = Formula::atom(format!("pc{}={}", self.agent, self.location));
        Formula::power_next(
            n as u32,
            Formula::implies(at, Formula::iff(Formula::atom(self.value_atom()), self.target.clone())),
        )
    }
}

fn all_tests(d: usize) -> Vec<KnowledgeTest> {
    (2..=d)
        .flat_map(|i| {
            [
                KnowledgeTest::CoordStop(i),
                KnowledgeTest::CoordRetrans(i),
                KnowledgeTest::Cheat1(i),
                KnowledgeTest::Cheat2(i),
                KnowledgeTest::NotCheat3(i),
                KnowledgeTest::PartRetrans(i),
                KnowledgeTest::PartStop(i),
            ]
        })
        .collect()
}

/// Rounds at which some run has `agent` at `location`.
pub fn reachable_rounds(sys: &InterpretedSystem, agent: AgentId, location: ProgramLocation) -> Vec<usize> {
    (0..sys.len())
        .filter(|&m| {
            sys.points_at(m).any(|p| {
                let g = sys.state(p);
                let pc = if agent == COORDINATOR { g.coord.pc } else { g.participant(agent).pc };
                pc == location
            })
        })
        .collect()
}

fn participants(d: usize, except: AgentId) -> impl Iterator<Item = AgentId> + Clone {
    (2..=d).filter(move |&j| j != except)
}

fn join(parts: Vec<String>, op: &str, empty: &str) -> String {
    if parts.is_empty() {
        empty.to_string()
    } else {
        format!("({})", parts.join(op))
    }
}

/// `odec<i>_<j> = odec<i>_<k>` as a disjunction over the decision values.
fn same_decision(i: AgentId, j: AgentId, k: AgentId) -> String {
    let vals = ["undecided", "abort", "commit"]
        .iter()
        .map(|v| format!("(odec{i}_{j}={v} & odec{i}_{k}={v})"))
        .collect();
    join(vals, " | ", "false")
}

fn pairs(d: usize) -> Vec<(AgentId, AgentId)> {
    (2..=d).flat_map(|j| (2..=d).filter(move |&k| k != j).map(move |k| (j, k))).collect()
}

/// Evidence from an opened run: a no vote next to a commit decision, or two
/// different decisions.
fn opened_evidence(d: usize, i: AgentId) -> String {
    let no_commit = (2..=d)
        .flat_map(|j| (2..=d).map(move |k| format!("(ovote{i}_{j}=no & odec{i}_{k}=commit)")))
        .collect();
    let differ = pairs(d).into_iter().map(|(j, k)| format!("!{}", same_decision(i, j, k))).collect();
    format!("({} | {})", join(no_commit, " | ", "false"), join(differ, " | ", "false"))
}

fn all_opened_yes(d: usize, i: AgentId) -> String {
    let peers = participants(d, i).map(|j| format!("ovote{i}_{j}=yes")).collect();
    format!("({} & vote{i}=yes)", join(peers, " & ", "true"))
}

fn all_equal(d: usize, i: AgentId) -> String {
    join(pairs(d).into_iter().map(|(j, k)| same_decision(i, j, k)).collect(), " & ", "true")
}

/// The predicate at (3) exactly as tabulated.
fn row3_tabulated(d: usize, i: AgentId) -> String {
    format!(
        "(vote{i}=yes & !cheatingDetected & !trap) | (trap & {} & {})",
        all_opened_yes(d, i),
        all_equal(d, i)
    )
}

/// The built-in predicates, one per protocol test and participant.
pub fn builtin_candidates(d: usize) -> Vec<CandidatePredicate> {
    let mut out = Vec::new();
    for i in 2..=d {
        out.push(CandidatePredicate::for_test(
            KnowledgeTest::CoordStop(i),
            &format!("cvote{i}=no | ack{i}"),
        ));
        out.push(CandidatePredicate::for_test(KnowledgeTest::CoordRetrans(i), "false"));
    }
    for i in 2..=d {
        let own = format!("(vote{i}=no & rdec{i}=commit)");
        out.push(CandidatePredicate::for_test(
            KnowledgeTest::PartStop(i),
            &format!("vote{i}=no | !rdec{i}=undecided"),
        ));
        out.push(CandidatePredicate::for_test(KnowledgeTest::PartRetrans(i), "false"));
        out.push(CandidatePredicate::for_test(KnowledgeTest::Cheat1(i), &own));
        out.push(CandidatePredicate::for_test(
            KnowledgeTest::Cheat2(i),
            &format!("{own} | cheatingDetected | (trap & {})", opened_evidence(d, i)),
        ));
        let all_abort = (2..=d).map(|j| format!("odec{i}_{j}=abort")).collect();
        out.push(CandidatePredicate::for_test(
            KnowledgeTest::NotCheat3(i),
            &format!(
                "{} | (trap & !cheatingDetected & {})",
                row3_tabulated(d, i),
                join(all_abort, " & ", "true")
            ),
        ));
    }
    out
}

/// The tabulated predicate at (3) without the all-abort case.
pub fn tabulated_row3(d: usize, i: AgentId) -> CandidatePredicate {
    let mut c = CandidatePredicate::for_test(KnowledgeTest::NotCheat3(i), &row3_tabulated(d, i));
    c.name = format!("tabulated.notcheat3[{i}]");
    c
}

/// The guess `c.stop_cond[i] := ack[i]`.
pub fn naive_stop_guess(i: AgentId) -> CandidatePredicate {
    let mut c = CandidatePredicate::for_test(KnowledgeTest::CoordStop(i), &format!("ack{i}"));
    c.name = format!("naive.c.stop_cond[{i}]");
    c
}

/// An evaluator over `sys` with the candidate's value defined as an atom.
pub fn evaluator_with<'a>(sys: &'a InterpretedSystem, cand: &CandidatePredicate) -> Result<Evaluator<'a>> {
    cand.check_observable(sys.d())?;
    let mut ev = Evaluator::new(sys);
    let v = ev.table(&cand.expr)?;
    ev.define(cand.value_atom(), v.to_vec());
    Ok(ev)
}

/// Rounds the candidate is checked at.
pub fn check_rounds(sys: &InterpretedSystem, cand: &CandidatePredicate) -> Result<Vec<usize>> {
    let reachable = reachable_rounds(sys, cand.agent, cand.location);
    let rounds: Vec<usize> = match &cand.rounds {
        None => reachable,
        Some(rs) => rs.iter().copied().filter(|n| reachable.contains(n)).collect(),
    };
    if rounds.is_empty() {
        return Err(Error::InfeasibleObligation {
            name: cand.name.clone(),
            location: cand.location,
            rounds: cand.rounds.clone().unwrap_or_default(),
        });
    }
    Ok(rounds)
}

/// One verdict per checked round.
pub fn verify_candidate(sys: &InterpretedSystem, cand: &CandidatePredicate) -> Result<Vec<(usize, Verdict)>> {
    let rounds = check_rounds(sys, cand)?;
    let mut ev = evaluator_with(sys, cand)?;
    rounds
        .into_iter()
        .map(|n| Ok((n, check_with(&mut ev, &cand.obligation(n))?)))
        .collect()
}

/// Answers protocol tests with candidate predicates instead of knowledge.
pub struct PredicateOracle {
    candidates: Vec<(KnowledgeTest, CandidatePredicate)>,
}

impl PredicateOracle {
    /// Uses every candidate whose name matches a protocol test.
    pub fn new(d: usize, candidates: &[CandidatePredicate]) -> PredicateOracle {
        let candidates = candidates
            .iter()
            .filter_map(|c| c.test(d).map(|t| (t, c.clone())))
            .collect();
        PredicateOracle { candidates }
    }
}

impl KnowledgeOracle for PredicateOracle {
    fn evaluate(
        &self,
        prefix: &InterpretedSystem,
        round: usize,
        queries: &[(usize, KnowledgeTest)],
    ) -> Result<Vec<bool>> {
        let mut ev = Evaluator::new(prefix);
        queries
            .iter()
            .map(|&(r, t)| {
                let (_, cand) = self
                    .candidates
                    .iter()
                    .find(|(ct, _)| *ct == t)
                    .ok_or(Error::MissingKnowledgeInput { test: t, round })?;
                Ok(ev.column(&cand.expr, round)?[r])
            })
            .collect()
    }
}

/// Parses a candidate file.
///
/// ```text
/// [c.stop_cond[2]]
/// agent = c
/// location = CoordTermCheck
/// rounds = auto
/// target = K[c] dhat[2]
/// expr = cvote2=no | ack2
/// ```
pub fn parse_candidates(text: &str) -> Result<Vec<CandidatePredicate>> {
    struct Partial {
        name: String,
        line: usize,
        agent: Option<AgentId>,
        location: Option<ProgramLocation>,
        rounds: Option<Vec<usize>>,
        target: Option<Formula>,
        expr: Option<Formula>,
    }
    let finish = |p: Partial| -> Result<CandidatePredicate> {
        let missing = |what: &str| Error::Format {
            what: "candidate file",
            line: p.line,
            msg: format!("section `{}` lacks `{what}`", p.name),
        };
        Ok(CandidatePredicate {
            agent: p.agent.ok_or_else(|| missing("agent"))?,
            location: p.location.ok_or_else(|| missing("location"))?,
            target: p.target.clone().ok_or_else(|| missing("target"))?,
            expr: p.expr.clone().ok_or_else(|| missing("expr"))?,
            rounds: p.rounds.clone(),
            name: p.name,
        })
    };

    let mut out = Vec::new();
    let mut cur: Option<Partial> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Format { what: "candidate file", line: n + 1, msg };
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if let Some(p) = cur.take() {
                out.push(finish(p)?);
            }
            cur = Some(Partial {
                name: name.to_string(),
                line: n + 1,
                agent: None,
                location: None,
                rounds: None,
                target: None,
                expr: None,
            });
            continue;
        }
        let p = cur.as_mut().ok_or_else(|| bad("entry outside a section".into()))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, got `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "agent" => {
                p.agent = Some(match value {
                    "c" => COORDINATOR,
                    v => v.parse().map_err(|_| bad(format!("bad agent `{v}`")))?,
                })
            }
            "location" => {
                p.location = Some(
                    ProgramLocation::parse(value)
                        .ok_or_else(|| bad(format!("unknown location `{value}`")))?,
                )
            }
            "rounds" => {
                p.rounds = match value {
                    "auto" => None,
                    v => Some(
                        v.split(',')
                            .map(|r| r.trim().parse().map_err(|_| bad(format!("bad round `{r}`"))))
                            .collect::<Result<_>>()?,
                    ),
                }
            }
            "target" => p.target = Some(parse(value)?),
            "expr" => p.expr = Some(parse(value)?),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    if let Some(p) = cur {
        out.push(finish(p)?);
    }
    Ok(out)
}

pub fn render_candidates(cands: &[CandidatePredicate]) -> String {
    let mut s = String::new();
    for c in cands {
        let rounds = match &c.rounds {
            None => "auto".to_string(),
            Some(rs) => rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
        };
        let _ = writeln!(
            s,
            "[{}]\nagent = {}\nlocation = {}\nrounds = {rounds}\ntarget = {}\nexpr = {}\n",
            c.name,
            agent_name(c.agent),
            c.location,
            c.target,
            c.expr
        );
    }
    s
}

/// Outcome of one refinement iteration.
#[derive(Clone, Debug)]
pub struct RefineReport {
    pub results: Vec<(String, Vec<(usize, Verdict)>)>,
}

impl RefineReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|(_, vs)| vs.iter().all(|(_, v)| v.holds))
    }

    /// One line per obligation.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (name, vs) in &self.results {
            for (n, v) in vs {
                let pt = |p: Option<crate::system::Point>| {
                    p.map_or("-".to_string(), |p| format!("{}@{}", p.run, p.round))
                };
                let _ = writeln!(
                    s,
                    "obligation={name} n={n} verdict={} point={} witness={}",
                    if v.holds { "holds" } else { "fails" },
                    pt(v.point),
                    pt(v.witness)
                );
            }
        }
        s
    }
}

pub fn refine_loop(sys: &InterpretedSystem, cands: &[CandidatePredicate]) -> Result<RefineReport> {
    for c in cands {
        c.check_observable(sys.d())?;
    }
    let results = cands
        .iter()
        .map(|c| Ok((c.name.clone(), verify_candidate(sys, c)?)))
        .collect::<Result<_>>()?;
    Ok(RefineReport { results })
}
