//! Construction of the interpreted system of the knowledge-based programs.
//!
//! All nondeterminism is resolved in the initial state. Runs then advance in
//! lockstep: at round `m` every knowledge test an agent is about to evaluate
//! is answered over the system of length-`m + 1` prefixes, and every run
//! takes one step. Because each test talks only about the present and the
//! agents have perfect recall, the answers at round `m` cannot depend on
//! anything that happens later, so no fixed-point iteration is needed.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;

use crate::checker::Evaluator;
use crate::config::{Config, Policy};
use crate::error::{Error, Result};
use crate::protocol::{
    step, ByzantineBehaviour, Decision, DecisionChoice, GlobalState, InitialChoice, KnowledgeInputs,
    KnowledgeTest, SendPattern, Vote, COORDINATOR,
};
use crate::system::{InterpretedSystem, Point, Run};

/// Supplies the truth value of knowledge tests during generation.
pub trait KnowledgeOracle: Sync {
    /// Answers each `(run, test)` query at `round` of the prefix system.
    fn evaluate(
        &self,
        prefix: &InterpretedSystem,
        round: usize,
        queries: &[(usize, KnowledgeTest)],
    ) -> Result<Vec<bool>>;
}

/// Answers tests by evaluating their formulas with the model checker.
pub struct EpistemicOracle;

impl KnowledgeOracle for EpistemicOracle {
    fn evaluate(
        &self,
        prefix: &InterpretedSystem,
        round: usize,
        queries: &[(usize, KnowledgeTest)],
    ) -> Result<Vec<bool>> {
        let tests: Vec<KnowledgeTest> = queries
            .iter()
            .map(|&(_, t)| t)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let columns: BTreeMap<KnowledgeTest, Vec<bool>> = tests
            .par_iter()
            .map(|&t| Ok((t, Evaluator::new(prefix).column(&t.formula(), round)?)))
            .collect::<Result<_>>()?;
        Ok(queries.iter().map(|&(r, t)| columns[&t][r]).collect())
    }
}

fn product<T: Copy>(values: &[T], n: usize) -> Vec<Vec<T>> {
    (0..n).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Every combination of initial choices, in canonical order: coordinator
/// vote yes before no, participant votes yes before no, honest before
/// Byzantine, forced abort before forced commit, abort before commit in
/// send vectors, no trap before trap, delivered before lost.
pub fn initial_choices(config: &Config) -> Vec<InitialChoice> {
    let n = config.participants();
    let mut behaviours = vec![None];
    if config.byzantine_policy == Policy::Nondeterministic {
        for choice in [DecisionChoice::ForceAbort, DecisionChoice::ForceCommit] {
            for v in product(&[Decision::Abort, Decision::Commit], n) {
                behaviours.push(Some(ByzantineBehaviour {
                    decision_choice: choice,
                    send_pattern: SendPattern::ArbitraryVector(v),
                }));
            }
        }
    }
    let traps: &[bool] = match config.trap_policy {
        Policy::Never => &[false],
        Policy::Nondeterministic => &[false, true],
    };
    let deliveries =
        if config.reliable_channels { vec![vec![true; n]] } else { product(&[true, false], n) };

    let mut out = Vec::new();
    for coord_vote in [Vote::Yes, Vote::No] {
        for votes in product(&[Vote::Yes, Vote::No], n) {
            for behaviour in &behaviours {
                for &trap in traps {
                    for start_delivered in &deliveries {
                        out.push(InitialChoice {
                            coord_vote,
                            votes: votes.clone(),
                            behaviour: behaviour.clone(),
                            trap,
                            start_delivered: start_delivered.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Generates the system, answering knowledge tests with the model checker.
pub fn generate(config: &Config) -> Result<InterpretedSystem> {
    generate_with(config, &EpistemicOracle)
}

pub fn generate_with(config: &Config, oracle: &dyn KnowledgeOracle) -> Result<InterpretedSystem> {
    config.validate()?;
    let d = config.d;
    let mut seen = HashSet::new();
    let mut runs: Vec<Run> = initial_choices(config)
        .into_iter()
        .filter_map(|choice| {
            let g = GlobalState::initial(&choice);
            seen.insert(g.clone()).then(|| Run {
                choice,
                states: vec![g],
                quiescent_from: 0,
                inputs: Vec::new(),
            })
        })
        .collect();

    for m in 0..config.horizon {
        let queries: Vec<(usize, KnowledgeTest)> = runs
            .iter()
            .enumerate()
            .flat_map(|(r, run)| {
                let g = &run.states[m];
                let coord = KnowledgeTest::required(COORDINATOR, g.coord.pc, d);
                let parts = g.parts.iter().flat_map(|p| KnowledgeTest::required(p.id, p.pc, d));
                coord.into_iter().chain(parts).map(move |t| (r, t)).collect::<Vec<_>>()
            })
            .collect();
        let answers = if queries.is_empty() {
            Vec::new()
        } else {
            let prefix = InterpretedSystem::new(d, runs.clone());
            oracle.evaluate(&prefix, m, &queries)?
        };
        let mut inputs = vec![KnowledgeInputs::new(); runs.len()];
        for (&(r, t), v) in queries.iter().zip(answers) {
            inputs[r].insert(t, v);
        }
        runs.par_iter_mut()
            .zip(inputs)
            .try_for_each(|(run, inputs)| -> Result<()> {
                let next = step(&run.states[m], &inputs, m)?;
                run.states.push(next);
                run.inputs.push(inputs);
                Ok(())
            })?;
    }

    for (r, run) in runs.iter_mut().enumerate() {
        run.quiescent_from = run
            .states
            .iter()
            .position(GlobalState::all_done)
            .ok_or(Error::HorizonExceeded { run: r, horizon: config.horizon })?;
    }
    Ok(InterpretedSystem::new(d, runs))
}

/// A knowledge input that disagrees with the formula it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub point: Point,
    pub test: KnowledgeTest,
    pub used: bool,
    pub actual: bool,
}

/// Re-evaluates every knowledge input recorded during generation over the
/// final system.
pub fn kbp_mismatches(sys: &InterpretedSystem) -> Result<Vec<Mismatch>> {
    let mut ev = Evaluator::new(sys);
    let mut out = Vec::new();
    for (r, run) in sys.runs().iter().enumerate() {
        for (m, inputs) in run.inputs.iter().enumerate() {
            for (&test, &used) in inputs {
                let point = Point::new(r, m);
                let actual = ev.holds(&test.formula(), point)?;
                if actual != used {
                    out.push(Mismatch { point, test, used, actual });
                }
            }
        }
    }
    Ok(out)
}

/// Counts of runs and points, for reports.
pub fn stats(sys: &InterpretedSystem) -> String {
    let inputs: usize = sys.runs().iter().flat_map(|r| &r.inputs).map(|i| i.len()).sum();
    let latest = sys.runs().iter().map(|r| r.quiescent_from).max().unwrap_or(0);
    format!(
        "runs={} rounds={} knowledge_inputs={} latest_quiescence={}",
        sys.runs().len(),
        sys.len(),
        inputs,
        latest
    )
}
