//! Runs, interpreted systems and perfect-recall observation histories.

use std::collections::HashMap;

use crate::atoms::Observation;
use crate::protocol::{AgentId, GlobalState, InitialChoice, KnowledgeInputs};

/// A point `(run, round)` of an interpreted system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub run: usize,
    pub round: usize,
}

impl Point {
    pub fn new(run: usize, round: usize) -> Point {
        Point { run, round }
    }
}

/// A finite run. The last state repeats forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub choice: InitialChoice,
    pub states: Vec<GlobalState>,
    /// First round from which the state no longer changes.
    pub quiescent_from: usize,
    /// `inputs[m]`: knowledge inputs given to the step taken at round `m`.
    pub inputs: Vec<KnowledgeInputs>,
}

impl Run {
    pub fn state(&self, round: usize) -> &GlobalState {
        &self.states[round.min(self.states.len() - 1)]
    }

    /// Extends the run with stuttering copies of its last state.
    fn pad_to(&mut self, len: usize) {
        let last = self.states.last().expect("run has a state").clone();
        self.states.resize(len, last);
        self.inputs.resize(len.saturating_sub(1), KnowledgeInputs::new());
    }
}

/// The sequence of observations an agent has made up to some round.
pub type ObservationHistory = Vec<Observation>;

/// A set of runs of equal length together with, for every agent, an
/// interned identifier of its observation history at every point. Two
/// points are indistinguishable to an agent iff the identifiers agree.
#[derive(Clone, Debug)]
pub struct InterpretedSystem {
    d: usize,
    runs: Vec<Run>,
    /// `history[a - 1][run][round]`
    history: Vec<Vec<Vec<u32>>>,
}

impl InterpretedSystem {
    /// Builds a system from runs, padding shorter runs by stuttering and
    /// dropping runs whose state sequence duplicates an earlier one.
    pub fn new(d: usize, runs: Vec<Run>) -> InterpretedSystem {
        let len = runs.iter().map(|r| r.states.len()).max().unwrap_or(1);
        let mut seen: HashMap<Vec<GlobalState>, ()> = HashMap::new();
        let mut kept = Vec::with_capacity(runs.len());
        for mut run in runs {
            run.pad_to(len);
            if seen.insert(run.states.clone(), ()).is_none() {
                kept.push(run);
            }
        }
        let history = (1..=d).map(|a| intern_histories(&kept, a)).collect();
        InterpretedSystem { d, runs: kept, history }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Number of rounds per run, i.e. the last round plus one.
    pub fn len(&self) -> usize {
        self.runs.first().map_or(0, |r| r.states.len())
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn last_round(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn state(&self, p: Point) -> &GlobalState {
        self.runs[p.run].state(p.round)
    }

    pub fn points_at(&self, round: usize) -> impl Iterator<Item = Point> + '_ {
        (0..self.runs.len()).map(move |run| Point { run, round })
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).flat_map(move |round| self.points_at(round))
    }

    /// Interned history identifier of `agent` at `p`.
    pub fn history_id(&self, agent: AgentId, p: Point) -> u32 {
        self.history[agent - 1][p.run][p.round]
    }

    pub fn observation_history(&self, run: usize, agent: AgentId, round: usize) -> ObservationHistory {
        observation_history(&self.runs[run], agent, round)
    }

    /// The system of all prefixes of length `round + 1`, deduplicated.
    pub fn prefix_system(&self, round: usize) -> InterpretedSystem {
        let runs = self
            .runs
            .iter()
            .map(|r| Run {
                choice: r.choice.clone(),
                states: r.states[..=round.min(r.states.len() - 1)].to_vec(),
                quiescent_from: r.quiescent_from.min(round),
                inputs: r.inputs[..round.min(r.inputs.len())].to_vec(),
            })
            .collect();
        InterpretedSystem::new(self.d, runs)
    }

    /// The subsystem made of the listed runs, in the given order.
    pub fn subsystem(&self, runs: &[usize]) -> InterpretedSystem {
        InterpretedSystem::new(self.d, runs.iter().map(|&r| self.runs[r].clone()).collect())
    }
}

/// Projection of a run onto one agent's observations at rounds `0..=round`.
pub fn observation_history(run: &Run, agent: AgentId, round: usize) -> ObservationHistory {
    (0..=round).map(|m| Observation::of(run.state(m), agent)).collect()
}

fn intern_histories(runs: &[Run], agent: AgentId) -> Vec<Vec<u32>> {
    let mut table: HashMap<(u32, Observation), u32> = HashMap::new();
    runs.iter()
        .map(|run| {
            let mut prev = u32::MAX;
            run.states
                .iter()
                .map(|g| {
                    let next = table.len() as u32;
                    prev = *table.entry((prev, Observation::of(g, agent))).or_insert(next);
                    prev
                })
                .collect()
        })
        .collect()
}
