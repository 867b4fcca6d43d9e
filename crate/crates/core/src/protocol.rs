//! Domain types and per-round step functions for the coordinator and the
//! participants of the knowledge-based two-phase commit protocol.
//!
//! Agents are numbered as in the protocol description: agent `1` is the
//! coordinator `c`, agents `2..=d` are participants. Knowledge tests are not
//! evaluated here; every step function receives the truth values it needs
//! through [`KnowledgeInputs`] and fails loudly if one is missing.
//!
//! Rounds are lockstep. A step at round `m` reads the global state at `m`
//! and produces the global state at `m + 1`; every message sent during the
//! step is delivered in the state at `m + 1`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::logic::Formula;

/// Agent index. `1` is the coordinator, `2..=d` are participants.
pub type AgentId = usize;

pub const COORDINATOR: AgentId = 1;

/// Position of participant `i` in per-participant vectors.
#[inline]
pub fn slot(participant: AgentId) -> usize {
    debug_assert!(participant >= 2);
    participant - 2
}

/// Inverse of [`slot`].
#[inline]
pub fn participant_at(slot: usize) -> AgentId {
    slot + 2
}

pub fn agent_name(agent: AgentId) -> String {
    if agent == COORDINATOR {
        "c".to_string()
    } else {
        agent.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vote {
    /// Only seen on the coordinator side: the vote has not arrived.
    Undef,
    No,
    Yes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Undecided,
    Abort,
    Commit,
}

impl Decision {
    pub fn is_final(self) -> bool {
        self != Decision::Undecided
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionChoice {
    ForceAbort,
    ForceCommit,
}

impl DecisionChoice {
    pub fn decision(self) -> Decision {
        match self {
            DecisionChoice::ForceAbort => Decision::Abort,
            DecisionChoice::ForceCommit => Decision::Commit,
        }
    }
}

/// How a Byzantine coordinator distributes its announcement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SendPattern {
    BroadcastChosen,
    /// Abort to the first participant, commit to every other one.
    SplitAbortFirst,
    /// Commit to the first participant, abort to every other one.
    SplitCommitFirst,
    /// One value per participant, indexed by [`slot`].
    ArbitraryVector(Vec<Decision>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ByzantineBehaviour {
    pub decision_choice: DecisionChoice,
    pub send_pattern: SendPattern,
}

impl ByzantineBehaviour {
    /// The value sent to each participant, indexed by [`slot`].
    pub fn per_participant(&self, participants: usize) -> Vec<Decision> {
        let chosen = self.decision_choice.decision();
        match &self.send_pattern {
            SendPattern::BroadcastChosen => vec![chosen; participants],
            SendPattern::SplitAbortFirst => (0..participants)
                .map(|s| if s == 0 { Decision::Abort } else { Decision::Commit })
                .collect(),
            SendPattern::SplitCommitFirst => (0..participants)
                .map(|s| if s == 0 { Decision::Commit } else { Decision::Abort })
                .collect(),
            SendPattern::ArbitraryVector(v) => {
                assert_eq!(v.len(), participants, "send vector length mismatch");
                v.clone()
            }
        }
    }

    /// Rewrites every pattern as an explicit vector so that equal behaviours
    /// compare equal.
    pub fn canonical(&self, participants: usize) -> ByzantineBehaviour {
        ByzantineBehaviour {
            decision_choice: self.decision_choice,
            send_pattern: SendPattern::ArbitraryVector(self.per_participant(participants)),
        }
    }
}

/// Program counter labels. The three asterisked tests of the participant
/// program are `CheatCheck1`, `DecideAbort2` and `FollowDecision3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProgramLocation {
    // coordinator
    Start,
    WaitVotes,
    Decide,
    CoordTermCheck,
    CoordRetransLoop,
    // participants
    Init,
    AwaitDecision,
    Receive,
    CheatCheck1,
    DecideAbort2,
    FollowDecision3,
    RetransLoop,
    TermCheck,
    // both
    Done,
}

impl ProgramLocation {
    pub const ALL: [ProgramLocation; 14] = [
        ProgramLocation::Start,
        ProgramLocation::WaitVotes,
        ProgramLocation::Decide,
        ProgramLocation::CoordTermCheck,
        ProgramLocation::CoordRetransLoop,
        ProgramLocation::Init,
        ProgramLocation::AwaitDecision,
        ProgramLocation::Receive,
        ProgramLocation::CheatCheck1,
        ProgramLocation::DecideAbort2,
        ProgramLocation::FollowDecision3,
        ProgramLocation::RetransLoop,
        ProgramLocation::TermCheck,
        ProgramLocation::Done,
    ];

    pub fn parse(s: &str) -> Option<ProgramLocation> {
        Self::ALL.iter().copied().find(|l| l.to_string() == s)
    }
}

impl fmt::Display for ProgramLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vote::Undef => "undef",
            Vote::No => "no",
            Vote::Yes => "yes",
        })
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Undecided => "undecided",
            Decision::Abort => "abort",
            Decision::Commit => "commit",
        })
    }
}

impl Vote {
    pub fn parse(s: &str) -> Option<Vote> {
        match s {
            "undef" => Some(Vote::Undef),
            "no" => Some(Vote::No),
            "yes" => Some(Vote::Yes),
            _ => None,
        }
    }
}

impl Decision {
    pub fn parse(s: &str) -> Option<Decision> {
        match s {
            "undecided" => Some(Decision::Undecided),
            "abort" => Some(Decision::Abort),
            "commit" => Some(Decision::Commit),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Message {
    Start,
    Vote(Vote),
    Decision(Decision),
    Ack,
    OpenVote(Vote),
    OpenDecision(Decision),
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Start => f.write_str("start"),
            Message::Vote(v) => write!(f, "vote:{v}"),
            Message::Decision(d) => write!(f, "{d}"),
            Message::Ack => f.write_str("ack"),
            Message::OpenVote(v) => write!(f, "ovote:{v}"),
            Message::OpenDecision(d) => write!(f, "odec:{d}"),
        }
    }
}

impl Message {
    pub fn parse(s: &str) -> Option<Message> {
        if let Some(v) = s.strip_prefix("vote:") {
            return Vote::parse(v).map(Message::Vote);
        }
        if let Some(v) = s.strip_prefix("ovote:") {
            return Vote::parse(v).map(Message::OpenVote);
        }
        if let Some(v) = s.strip_prefix("odec:") {
            return Decision::parse(v).map(Message::OpenDecision);
        }
        match s {
            "start" => Some(Message::Start),
            "ack" => Some(Message::Ack),
            other => Decision::parse(other).map(Message::Decision),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SendAction {
    pub to: AgentId,
    pub msg: Message,
}

/// One entry of a send log: `msg` went from `from` to `to` during the step
/// taken at `round`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SendRecord {
    pub round: usize,
    pub from: AgentId,
    pub to: AgentId,
    pub msg: Message,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub byzantine: bool,
    /// Present iff `byzantine`; always in canonical vector form.
    pub behaviour: Option<ByzantineBehaviour>,
    pub decision: Decision,
    pub rcvd_start_msg: Vec<bool>,
    /// Environment choice fixed at round 0: whether the start message to
    /// each participant is delivered. Always all-true on reliable channels.
    pub start_delivered: Vec<bool>,
    pub trap: bool,
    pub cheating_detected: bool,
    /// `decision[i]`: the last announcement delivered to participant `i`.
    pub decision_channel: Vec<Decision>,
    /// Every coordinator send, append-only.
    pub send_log: Vec<SendRecord>,
    /// Every participant send, append-only.
    pub peer_log: Vec<SendRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoordinatorState {
    pub coord_vote: Vote,
    pub vote: Vec<Vote>,
    pub ack: Vec<bool>,
    pub pc: ProgramLocation,
    /// Last value used for the termination test on each participant.
    pub stop_cond: Vec<bool>,
    /// Last value used for the retransmission test on each participant.
    pub retrans_cond: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParticipantState {
    pub id: AgentId,
    pub vote: Vote,
    /// Whether this participant has sent an acknowledgement.
    pub ack: bool,
    pub outcome: Decision,
    pub pc: ProgramLocation,
    pub received_decision: Decision,
    /// Values received through the trap exchange, indexed by [`slot`].
    /// The own slot mirrors the participant's own vote and decision.
    pub opened_votes: Vec<Vote>,
    pub opened_decisions: Vec<Decision>,
}

impl ParticipantState {
    /// The decision value this participant holds: abort once it has voted
    /// no, otherwise whatever it has taken from its decision channel.
    pub fn held_decision(&self) -> Decision {
        if self.vote == Vote::No {
            Decision::Abort
        } else {
            self.received_decision
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalState {
    pub env: EnvState,
    pub coord: CoordinatorState,
    pub parts: Vec<ParticipantState>,
}

impl GlobalState {
    /// Number of agents including the coordinator.
    pub fn d(&self) -> usize {
        self.parts.len() + 1
    }

    pub fn participant(&self, i: AgentId) -> &ParticipantState {
        &self.parts[slot(i)]
    }

    pub fn all_done(&self) -> bool {
        self.coord.pc == ProgramLocation::Done
            && self.parts.iter().all(|p| p.pc == ProgramLocation::Done)
    }

    /// Initial state for one combination of nondeterministic choices.
    pub fn initial(choice: &InitialChoice) -> GlobalState {
        let n = choice.votes.len();
        let own_slot = |s: usize, v: Vote| {
            let mut vs = vec![Vote::Undef; n];
            vs[s] = v;
            vs
        };
        let parts = choice
            .votes
            .iter()
            .enumerate()
            .map(|(s, &v)| ParticipantState {
                id: participant_at(s),
                vote: v,
                ack: false,
                outcome: Decision::Undecided,
                pc: ProgramLocation::Init,
                received_decision: Decision::Undecided,
                opened_votes: own_slot(s, v),
                opened_decisions: vec![Decision::Undecided; n],
            })
            .collect();
        GlobalState {
            env: EnvState {
                byzantine: choice.behaviour.is_some(),
                behaviour: choice.behaviour.as_ref().map(|b| b.canonical(n)),
                decision: Decision::Undecided,
                rcvd_start_msg: vec![false; n],
                start_delivered: choice.start_delivered.clone(),
                trap: choice.trap,
                cheating_detected: false,
                decision_channel: vec![Decision::Undecided; n],
                send_log: Vec::new(),
                peer_log: Vec::new(),
            },
            coord: CoordinatorState {
                coord_vote: choice.coord_vote,
                vote: vec![Vote::Undef; n],
                ack: vec![false; n],
                pc: ProgramLocation::Start,
                stop_cond: vec![false; n],
                retrans_cond: vec![false; n],
            },
            parts,
        }
    }
}

/// All nondeterminism of a run, resolved at round 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InitialChoice {
    pub coord_vote: Vote,
    pub votes: Vec<Vote>,
    pub behaviour: Option<ByzantineBehaviour>,
    pub trap: bool,
    pub start_delivered: Vec<bool>,
}

/// The knowledge tests of both programs. The value fed to a step function
/// is the truth value of [`KnowledgeTest::formula`], negation included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KnowledgeTest {
    /// `K_c(dhat_i(decision))` at the coordinator's termination test.
    CoordStop(AgentId),
    /// `!K_c(dhat_i(decision))` at the coordinator's retransmission test.
    CoordRetrans(AgentId),
    /// `K_i(cheating)` at (1).
    Cheat1(AgentId),
    /// `K_i(cheating)` at (2).
    Cheat2(AgentId),
    /// `!K_i(cheating)` at (3).
    NotCheat3(AgentId),
    /// `!K_i(K_c(dhat_i(decision)))` at the participant's ack test.
    PartRetrans(AgentId),
    /// `K_i(K_c(dhat_i(decision)))` at the participant's termination test.
    PartStop(AgentId),
}

impl KnowledgeTest {
    /// The agent that evaluates the test.
    pub fn agent(self) -> AgentId {
        match self {
            KnowledgeTest::CoordStop(_) | KnowledgeTest::CoordRetrans(_) => COORDINATOR,
            KnowledgeTest::Cheat1(i)
            | KnowledgeTest::Cheat2(i)
            | KnowledgeTest::NotCheat3(i)
            | KnowledgeTest::PartRetrans(i)
            | KnowledgeTest::PartStop(i) => i,
        }
    }

    /// The participant the test is about.
    pub fn participant(self) -> AgentId {
        match self {
            KnowledgeTest::CoordStop(i)
            | KnowledgeTest::CoordRetrans(i)
            | KnowledgeTest::Cheat1(i)
            | KnowledgeTest::Cheat2(i)
            | KnowledgeTest::NotCheat3(i)
            | KnowledgeTest::PartRetrans(i)
            | KnowledgeTest::PartStop(i) => i,
        }
    }

    pub fn location(self) -> ProgramLocation {
        match self {
            KnowledgeTest::CoordStop(_) => ProgramLocation::CoordTermCheck,
            KnowledgeTest::CoordRetrans(_) => ProgramLocation::CoordRetransLoop,
            KnowledgeTest::Cheat1(_) => ProgramLocation::CheatCheck1,
            KnowledgeTest::Cheat2(_) => ProgramLocation::DecideAbort2,
            KnowledgeTest::NotCheat3(_) => ProgramLocation::FollowDecision3,
            KnowledgeTest::PartRetrans(_) => ProgramLocation::RetransLoop,
            KnowledgeTest::PartStop(_) => ProgramLocation::TermCheck,
        }
    }

    pub fn formula(self) -> Formula {
        let c = COORDINATOR;
        match self {
            KnowledgeTest::CoordStop(i) => Formula::knows(c, Formula::dhat(i)),
            KnowledgeTest::CoordRetrans(i) => Formula::not(Formula::knows(c, Formula::dhat(i))),
            KnowledgeTest::Cheat1(i) | KnowledgeTest::Cheat2(i) => {
                Formula::knows(i, Formula::atom("cheating"))
            }
            KnowledgeTest::NotCheat3(i) => {
                Formula::not(Formula::knows(i, Formula::atom("cheating")))
            }
            KnowledgeTest::PartRetrans(i) => Formula::not(Formula::knows(
                i,
                Formula::knows(c, Formula::dhat(i)),
            )),
            KnowledgeTest::PartStop(i) => {
                Formula::knows(i, Formula::knows(c, Formula::dhat(i)))
            }
        }
    }

    /// Tests an agent at `pc` must be given, for `d` agents in total.
    pub fn required(agent: AgentId, pc: ProgramLocation, d: usize) -> Vec<KnowledgeTest> {
        if agent == COORDINATOR {
            let all = 2..=d;
            match pc {
                ProgramLocation::CoordTermCheck => all.map(KnowledgeTest::CoordStop).collect(),
                ProgramLocation::CoordRetransLoop => all.map(KnowledgeTest::CoordRetrans).collect(),
                _ => Vec::new(),
            }
        } else {
            match pc {
                ProgramLocation::CheatCheck1 => vec![KnowledgeTest::Cheat1(agent)],
                ProgramLocation::DecideAbort2 => vec![KnowledgeTest::Cheat2(agent)],
                ProgramLocation::FollowDecision3 => vec![KnowledgeTest::NotCheat3(agent)],
                ProgramLocation::RetransLoop => vec![KnowledgeTest::PartRetrans(agent)],
                ProgramLocation::TermCheck => vec![KnowledgeTest::PartStop(agent)],
                _ => Vec::new(),
            }
        }
    }
}

impl fmt::Display for KnowledgeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, i) = match self {
            KnowledgeTest::CoordStop(i) => ("c.stop_cond", i),
            KnowledgeTest::CoordRetrans(i) => ("c.retrans_cond", i),
            KnowledgeTest::Cheat1(i) => ("cheat1", i),
            KnowledgeTest::Cheat2(i) => ("cheat2", i),
            KnowledgeTest::NotCheat3(i) => ("notcheat3", i),
            KnowledgeTest::PartRetrans(i) => ("retrans_cond", i),
            KnowledgeTest::PartStop(i) => ("stop_cond", i),
        };
        write!(f, "{name}[{i}]")
    }
}

pub type KnowledgeInputs = BTreeMap<KnowledgeTest, bool>;

fn input(inputs: &KnowledgeInputs, test: KnowledgeTest, round: usize) -> Result<bool, Error> {
    inputs
        .get(&test)
        .copied()
        .ok_or(Error::MissingKnowledgeInput { test, round })
}

/// Side effects of one agent step besides its new local state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEffects {
    pub sends: Vec<SendAction>,
    /// Coordinator only: new value of the environment's `decision`.
    pub set_decision: Option<Decision>,
    /// Participant only: publish `cheatingDetected`.
    pub announce_cheating: bool,
}

/// The slice of the environment a participant can read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParticipantEnvView {
    pub rcvd_start_msg: bool,
    pub trap: bool,
    pub cheating_detected: bool,
    pub decision_channel: Decision,
}

impl ParticipantEnvView {
    pub fn of(env: &EnvState, i: AgentId) -> ParticipantEnvView {
        ParticipantEnvView {
            rcvd_start_msg: env.rcvd_start_msg[slot(i)],
            trap: env.trap,
            cheating_detected: env.cheating_detected,
            decision_channel: env.decision_channel[slot(i)],
        }
    }
}

/// The honest coordinator's decision rule.
pub fn honest_decision(coord_vote: Vote, votes: &[Vote]) -> Decision {
    if coord_vote == Vote::Yes && votes.iter().all(|&v| v == Vote::Yes) {
        Decision::Commit
    } else {
        Decision::Abort
    }
}

pub fn coordinator_step(
    state: &CoordinatorState,
    env: &EnvState,
    inputs: &KnowledgeInputs,
    round: usize,
) -> Result<(CoordinatorState, StepEffects), Error> {
    let mut next = state.clone();
    let mut fx = StepEffects::default();
    let n = state.vote.len();
    let everyone = || (0..n).map(participant_at);

    match state.pc {
        ProgramLocation::Start => {
            fx.sends = everyone().map(|to| SendAction { to, msg: Message::Start }).collect();
            next.pc = ProgramLocation::WaitVotes;
        }
        ProgramLocation::WaitVotes => next.pc = ProgramLocation::Decide,
        ProgramLocation::Decide => {
            let sent = match &env.behaviour {
                None => {
                    let d = honest_decision(state.coord_vote, &state.vote);
                    fx.set_decision = Some(d);
                    vec![d; n]
                }
                Some(b) => {
                    fx.set_decision = Some(b.decision_choice.decision());
                    b.per_participant(n)
                }
            };
            fx.sends = everyone()
                .zip(sent)
                .map(|(to, d)| SendAction { to, msg: Message::Decision(d) })
                .collect();
            next.pc = ProgramLocation::CoordTermCheck;
        }
        ProgramLocation::CoordTermCheck => {
            let mut all = true;
            for i in everyone() {
                let known = input(inputs, KnowledgeTest::CoordStop(i), round)?;
                next.stop_cond[slot(i)] = known;
                all &= known;
            }
            next.pc = if all {
                ProgramLocation::Done
            } else {
                ProgramLocation::CoordRetransLoop
            };
        }
        ProgramLocation::CoordRetransLoop => {
            for i in everyone() {
                let resend = input(inputs, KnowledgeTest::CoordRetrans(i), round)?;
                next.retrans_cond[slot(i)] = resend;
                if resend {
                    // A Byzantine coordinator repeats what it first sent to i.
                    let d = match &env.behaviour {
                        None => env.decision,
                        Some(b) => b.per_participant(n)[slot(i)],
                    };
                    fx.sends.push(SendAction { to: i, msg: Message::Decision(d) });
                }
            }
            next.pc = ProgramLocation::CoordTermCheck;
        }
        _ => {}
    }
    Ok((next, fx))
}

pub fn participant_step(
    state: &ParticipantState,
    view: ParticipantEnvView,
    inputs: &KnowledgeInputs,
    round: usize,
) -> Result<(ParticipantState, StepEffects), Error> {
    let i = state.id;
    let mut next = state.clone();
    let mut fx = StepEffects::default();

    match state.pc {
        ProgramLocation::Init => {
            if view.rcvd_start_msg {
                fx.sends.push(SendAction { to: COORDINATOR, msg: Message::Vote(state.vote) });
                next.pc = ProgramLocation::AwaitDecision;
            } else if round >= 1 {
                // the start message was lost: stay silent for the whole run
                next.pc = ProgramLocation::Done;
            }
        }
        ProgramLocation::AwaitDecision => next.pc = ProgramLocation::Receive,
        ProgramLocation::Receive => {
            next.received_decision = view.decision_channel;
            next.opened_decisions[slot(i)] = view.decision_channel;
            next.ack = true;
            fx.sends.push(SendAction { to: COORDINATOR, msg: Message::Ack });
            next.pc = ProgramLocation::CheatCheck1;
        }
        ProgramLocation::CheatCheck1 => {
            let knows = input(inputs, KnowledgeTest::Cheat1(i), round)?;
            fx.announce_cheating = knows;
            if view.trap && !knows && !view.cheating_detected {
                fx.sends = open_2pc_run(state);
            }
            next.pc = ProgramLocation::DecideAbort2;
        }
        ProgramLocation::DecideAbort2 => {
            let knows = input(inputs, KnowledgeTest::Cheat2(i), round)?;
            if knows || state.vote == Vote::No {
                next.outcome = Decision::Abort;
                next.pc = ProgramLocation::RetransLoop;
            } else {
                next.pc = ProgramLocation::FollowDecision3;
            }
        }
        ProgramLocation::FollowDecision3 => {
            if input(inputs, KnowledgeTest::NotCheat3(i), round)? {
                next.outcome = state.received_decision;
            }
            next.pc = ProgramLocation::RetransLoop;
        }
        ProgramLocation::RetransLoop => {
            if input(inputs, KnowledgeTest::PartRetrans(i), round)? {
                fx.sends.push(SendAction { to: COORDINATOR, msg: Message::Ack });
                next.ack = true;
            }
            next.pc = ProgramLocation::TermCheck;
        }
        ProgramLocation::TermCheck => {
            next.pc = if input(inputs, KnowledgeTest::PartStop(i), round)? {
                ProgramLocation::Done
            } else {
                ProgramLocation::RetransLoop
            };
        }
        _ => {}
    }
    Ok((next, fx))
}

/// The trap exchange: participant `i` sends its vote and the decision it
/// received to every other participant.
pub fn open_2pc_run(state: &ParticipantState) -> Vec<SendAction> {
    let n = state.opened_votes.len();
    (0..n)
        .map(participant_at)
        .filter(|&j| j != state.id)
        .flat_map(|j| {
            [
                SendAction { to: j, msg: Message::OpenVote(state.vote) },
                SendAction { to: j, msg: Message::OpenDecision(state.received_decision) },
            ]
        })
        .collect()
}

/// Ground truth of `cheating_c`, read off the coordinator's send log.
pub fn cheating_ground_truth(env: &EnvState, coord: &CoordinatorState) -> bool {
    let sent_to = |want: Decision| -> Vec<AgentId> {
        env.send_log
            .iter()
            .filter(|r| r.msg == Message::Decision(want))
            .map(|r| r.to)
            .collect()
    };
    let commits = sent_to(Decision::Commit);
    let aborts = sent_to(Decision::Abort);
    let some_no = coord.vote.contains(&Vote::No) || coord.coord_vote == Vote::No;
    let all_yes = coord.vote.iter().all(|&v| v == Vote::Yes) && coord.coord_vote == Vote::Yes;
    let contradictory = commits.iter().any(|i| aborts.iter().any(|j| i != j));
    (some_no && !commits.is_empty()) || (all_yes && !aborts.is_empty()) || contradictory
}

/// One synchronous round: every agent steps on the state at `round`, then
/// the environment delivers all messages into the next state.
pub fn step(
    global: &GlobalState,
    inputs: &KnowledgeInputs,
    round: usize,
) -> Result<GlobalState, Error> {
    let mut next = global.clone();
    let (coord, cfx) = coordinator_step(&global.coord, &global.env, inputs, round)?;
    next.coord = coord;

    let mut part_fx = Vec::with_capacity(global.parts.len());
    for (s, p) in global.parts.iter().enumerate() {
        let view = ParticipantEnvView::of(&global.env, participant_at(s));
        let (np, fx) = participant_step(p, view, inputs, round)?;
        next.parts[s] = np;
        part_fx.push(fx);
    }

    if let Some(d) = cfx.set_decision {
        next.env.decision = d;
    }
    for send in &cfx.sends {
        next.env.send_log.push(SendRecord {
            round,
            from: COORDINATOR,
            to: send.to,
            msg: send.msg,
        });
        let s = slot(send.to);
        match send.msg {
            Message::Start => {
                if global.env.start_delivered[s] {
                    next.env.rcvd_start_msg[s] = true;
                }
            }
            Message::Decision(d) => next.env.decision_channel[s] = d,
            _ => unreachable!("coordinator sent {}", send.msg),
        }
    }
    for (s, fx) in part_fx.iter().enumerate() {
        let from = participant_at(s);
        if fx.announce_cheating {
            next.env.cheating_detected = true;
        }
        for send in &fx.sends {
            next.env.peer_log.push(SendRecord { round, from, to: send.to, msg: send.msg });
            match send.msg {
                Message::Vote(v) => next.coord.vote[s] = v,
                Message::Ack => next.coord.ack[s] = true,
                Message::OpenVote(v) => next.parts[slot(send.to)].opened_votes[s] = v,
                Message::OpenDecision(d) => next.parts[slot(send.to)].opened_decisions[s] = d,
                _ => unreachable!("participant sent {}", send.msg),
            }
        }
    }
    Ok(next)
}
