//! Atomic propositions and per-agent observations.
//!
//! Every atom is a `field=value` test (or a bare boolean field) read
//! directly off a [`GlobalState`]. Indices follow agent numbering: `1` is
//! the coordinator, `2..=d` are participants.
//!
//! | atom | meaning | observed by |
//! |------|---------|-------------|
//! | `byzantine` | the coordinator is faulty | c |
//! | `decision=D` | the coordinator's decision | c |
//! | `cv=V` | the coordinator's own vote | c |
//! | `cvote<i>=V` | vote of `i` as received by c | c |
//! | `ack<i>` | c has received an ack from `i` | c |
//! | `stop<i>`, `retrans<i>` | last termination/retransmission test value | c |
//! | `outcome1=D` | the coordinator's outcome (its decision) | c |
//! | `trap`, `cheatingDetected` | environment flags | participants |
//! | `rcvdStart<i>` | start delivered to `i` | `i` |
//! | `vote<i>=V`, `rdec<i>=D`, `outcome<i>=D`, `sentAck<i>` | local state of `i` | `i` |
//! | `held<i>=D` | decision held by `i`: abort after a no vote, else `rdec<i>` | `i` |
//! | `ovote<i>_<j>=V`, `odec<i>_<j>=D` | trap data `i` received about `j` | `i` |
//! | `pc<a>=L` | program counter of agent `a` | `a` |
//! | `chan<i>=D` | value on the decision channel to `i` | nobody |
//! | `cheating` | ground truth of `cheating_c` | nobody |

use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::{
    cheating_ground_truth, slot, AgentId, ByzantineBehaviour, CoordinatorState, Decision,
    GlobalState, ParticipantState, ProgramLocation, Vote, COORDINATOR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomKey {
    Byzantine,
    Trap,
    CheatingDetected,
    Cheating,
    Decision(Decision),
    RcvdStart(AgentId),
    Chan(AgentId, Decision),
    CoordVote(Vote),
    ReceivedVote(AgentId, Vote),
    Ack(AgentId),
    Stop(AgentId),
    Retrans(AgentId),
    Pc(AgentId, ProgramLocation),
    Outcome(AgentId, Decision),
    Vote(AgentId, Vote),
    ReceivedDecision(AgentId, Decision),
    SentAck(AgentId),
    Held(AgentId, Decision),
    OpenedVote(AgentId, AgentId, Vote),
    OpenedDecision(AgentId, AgentId, Decision),
}

fn split_index(s: &str) -> Option<(&str, &str)> {
    let at = s.find(|c: char| c.is_ascii_digit())?;
    Some((&s[..at], &s[at..]))
}

impl AtomKey {
    /// Parses an atom name for a system with `d` agents.
    pub fn parse(name: &str, d: usize) -> Result<AtomKey> {
        let unknown = || Error::UnknownAtom(name.to_string());
        let (field, value) = match name.split_once('=') {
            Some((f, v)) => (f, Some(v)),
            None => (name, None),
        };
        let vote = || value.and_then(Vote::parse).ok_or_else(unknown);
        let decision = || value.and_then(Decision::parse).ok_or_else(unknown);
        let bare = |k: AtomKey| if value.is_none() { Ok(k) } else { Err(unknown()) };
        let participant = |s: &str| -> Result<AgentId> {
            let i: AgentId = s.parse().map_err(|_| unknown())?;
            if (2..=d).contains(&i) {
                Ok(i)
            } else {
                Err(unknown())
            }
        };

        match field {
            "byzantine" => return bare(AtomKey::Byzantine),
            "trap" => return bare(AtomKey::Trap),
            "cheatingDetected" => return bare(AtomKey::CheatingDetected),
            "cheating" => return bare(AtomKey::Cheating),
            "decision" => return Ok(AtomKey::Decision(decision()?)),
            "cv" => return Ok(AtomKey::CoordVote(vote()?)),
            _ => {}
        }
        let (prefix, index) = split_index(field).ok_or_else(unknown)?;
        if let Some((i, j)) = index.split_once('_') {
            let (i, j) = (participant(i)?, participant(j)?);
            return match prefix {
                "ovote" => Ok(AtomKey::OpenedVote(i, j, vote()?)),
                "odec" => Ok(AtomKey::OpenedDecision(i, j, decision()?)),
                _ => Err(unknown()),
            };
        }
        match prefix {
            "pc" => {
                let a: AgentId = index.parse().map_err(|_| unknown())?;
                if !(1..=d).contains(&a) {
                    return Err(unknown());
                }
                let l = value.and_then(ProgramLocation::parse).ok_or_else(unknown)?;
                Ok(AtomKey::Pc(a, l))
            }
            "outcome" => {
                let a: AgentId = index.parse().map_err(|_| unknown())?;
                if !(1..=d).contains(&a) {
                    return Err(unknown());
                }
                Ok(AtomKey::Outcome(a, decision()?))
            }
            "rcvdStart" => bare(AtomKey::RcvdStart(participant(index)?)),
            "chan" => Ok(AtomKey::Chan(participant(index)?, decision()?)),
            "cvote" => Ok(AtomKey::ReceivedVote(participant(index)?, vote()?)),
            "ack" => bare(AtomKey::Ack(participant(index)?)),
            "stop" => bare(AtomKey::Stop(participant(index)?)),
            "retrans" => bare(AtomKey::Retrans(participant(index)?)),
            "vote" => Ok(AtomKey::Vote(participant(index)?, vote()?)),
            "rdec" => Ok(AtomKey::ReceivedDecision(participant(index)?, decision()?)),
            "sentAck" => bare(AtomKey::SentAck(participant(index)?)),
            "held" => Ok(AtomKey::Held(participant(index)?, decision()?)),
            _ => Err(unknown()),
        }
    }

    /// The single agent whose local state contains this atom, if any.
    /// Environment flags visible to every participant return `None` here;
    /// see [`AtomKey::observable_by`].
    pub fn observable_by(self, agent: AgentId) -> bool {
        use AtomKey::*;
        let coordinator = agent == COORDINATOR;
        match self {
            Byzantine | Decision(_) | CoordVote(_) | ReceivedVote(..) | Ack(_) | Stop(_)
            | Retrans(_) => coordinator,
            Trap | CheatingDetected => !coordinator,
            Cheating | Chan(..) => false,
            Pc(a, _) | Outcome(a, _) => a == agent,
            RcvdStart(i) | Vote(i, _) | ReceivedDecision(i, _) | SentAck(i) | Held(i, _)
            | OpenedVote(i, ..) | OpenedDecision(i, ..) => i == agent,
        }
    }

    pub fn eval(self, g: &GlobalState) -> bool {
        use AtomKey::*;
        match self {
            Byzantine => g.env.byzantine,
            Trap => g.env.trap,
            CheatingDetected => g.env.cheating_detected,
            Cheating => cheating_ground_truth(&g.env, &g.coord),
            Decision(d) => g.env.decision == d,
            RcvdStart(i) => g.env.rcvd_start_msg[slot(i)],
            Chan(i, d) => g.env.decision_channel[slot(i)] == d,
            Pc(COORDINATOR, l) => g.coord.pc == l,
            Outcome(COORDINATOR, d) => g.env.decision == d,
            Pc(a, l) => g.participant(a).pc == l,
            Outcome(a, d) => g.participant(a).outcome == d,
            _ => match Observation::of(g, self.owner()) {
                Observation::Coordinator(v) => v.atom(self),
                Observation::Participant(v) => v.atom(self),
            }
            .expect("owner observes its own atom"),
        }
    }

    fn owner(self) -> AgentId {
        use AtomKey::*;
        match self {
            RcvdStart(i) | Vote(i, _) | ReceivedDecision(i, _) | SentAck(i) | Held(i, _)
            | OpenedVote(i, ..) | OpenedDecision(i, ..) => i,
            _ => COORDINATOR,
        }
    }
}

impl fmt::Display for AtomKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AtomKey::*;
        match self {
            Byzantine => f.write_str("byzantine"),
            Trap => f.write_str("trap"),
            CheatingDetected => f.write_str("cheatingDetected"),
            Cheating => f.write_str("cheating"),
            Decision(d) => write!(f, "decision={d}"),
            RcvdStart(i) => write!(f, "rcvdStart{i}"),
            Chan(i, d) => write!(f, "chan{i}={d}"),
            CoordVote(v) => write!(f, "cv={v}"),
            ReceivedVote(i, v) => write!(f, "cvote{i}={v}"),
            Ack(i) => write!(f, "ack{i}"),
            Stop(i) => write!(f, "stop{i}"),
            Retrans(i) => write!(f, "retrans{i}"),
            Pc(a, l) => write!(f, "pc{a}={l}"),
            Outcome(a, d) => write!(f, "outcome{a}={d}"),
            Vote(i, v) => write!(f, "vote{i}={v}"),
            ReceivedDecision(i, d) => write!(f, "rdec{i}={d}"),
            SentAck(i) => write!(f, "sentAck{i}"),
            Held(i, d) => write!(f, "held{i}={d}"),
            OpenedVote(i, j, v) => write!(f, "ovote{i}_{j}={v}"),
            OpenedDecision(i, j, d) => write!(f, "odec{i}_{j}={d}"),
        }
    }
}

/// What the coordinator sees in one round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoordinatorView {
    pub byzantine: bool,
    pub behaviour: Option<ByzantineBehaviour>,
    pub decision: Decision,
    pub state: CoordinatorState,
}

/// What a participant sees in one round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParticipantView {
    pub state: ParticipantState,
    pub rcvd_start_msg: bool,
    pub trap: bool,
    pub cheating_detected: bool,
}

/// One round's observation of one agent. Two points are indistinguishable
/// to an agent iff the sequences of its observations up to those points
/// are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    Coordinator(CoordinatorView),
    Participant(ParticipantView),
}

impl Observation {
    pub fn of(g: &GlobalState, agent: AgentId) -> Observation {
        if agent == COORDINATOR {
            Observation::Coordinator(CoordinatorView {
                byzantine: g.env.byzantine,
                behaviour: g.env.behaviour.clone(),
                decision: g.env.decision,
                state: g.coord.clone(),
            })
        } else {
            Observation::Participant(ParticipantView {
                state: g.participant(agent).clone(),
                rcvd_start_msg: g.env.rcvd_start_msg[slot(agent)],
                trap: g.env.trap,
                cheating_detected: g.env.cheating_detected,
            })
        }
    }

    /// Value of an atom the observing agent can see; `None` otherwise.
    pub fn atom(&self, key: AtomKey) -> Option<bool> {
        match self {
            Observation::Coordinator(v) => v.atom(key),
            Observation::Participant(v) => v.atom(key),
        }
    }
}

impl CoordinatorView {
    fn atom(&self, key: AtomKey) -> Option<bool> {
        use AtomKey::*;
        let s = &self.state;
        Some(match key {
            Byzantine => self.byzantine,
            Decision(d) | Outcome(COORDINATOR, d) => self.decision == d,
            CoordVote(v) => s.coord_vote == v,
            ReceivedVote(i, v) => s.vote[slot(i)] == v,
            Ack(i) => s.ack[slot(i)],
            Stop(i) => s.stop_cond[slot(i)],
            Retrans(i) => s.retrans_cond[slot(i)],
            Pc(COORDINATOR, l) => s.pc == l,
            _ => return None,
        })
    }
}

impl ParticipantView {
    fn atom(&self, key: AtomKey) -> Option<bool> {
        use AtomKey::*;
        let s = &self.state;
        let me = s.id;
        Some(match key {
            Trap => self.trap,
            CheatingDetected => self.cheating_detected,
            RcvdStart(i) if i == me => self.rcvd_start_msg,
            Pc(a, l) if a == me => s.pc == l,
            Outcome(a, d) if a == me => s.outcome == d,
            Vote(i, v) if i == me => s.vote == v,
            ReceivedDecision(i, d) if i == me => s.received_decision == d,
            SentAck(i) if i == me => s.ack,
            Held(i, d) if i == me => s.held_decision() == d,
            OpenedVote(i, j, v) if i == me => s.opened_votes[slot(j)] == v,
            OpenedDecision(i, j, d) if i == me => s.opened_decisions[slot(j)] == d,
            _ => return None,
        })
    }
}
