//! Evaluation of formulas over an interpreted system.
//!
//! Formulas are evaluated bottom-up into truth tables over all points,
//! memoised per subformula for the lifetime of an [`Evaluator`]. `K[a] phi`
//! holds at `(r, m)` iff `phi` holds at every point `(r', m)` where agent
//! `a` has the same observation history. Equal histories have equal length,
//! so only same-round points are compared. `X` at the last round stays
//! there; `G` and `F` scan the remaining suffix of the run.

use std::collections::HashMap;
use std::rc::Rc;

use crate::atoms::AtomKey;
use crate::error::Result;
use crate::logic::Formula;
use crate::protocol::AgentId;
use crate::system::{InterpretedSystem, Point};
use crate::trace::Trace;

/// Truth values indexed by `run * len + round`.
pub type Table = Vec<bool>;

pub struct Evaluator<'a> {
    sys: &'a InterpretedSystem,
    overlay: HashMap<String, Rc<Table>>,
    memo: HashMap<Formula, Rc<Table>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a InterpretedSystem) -> Evaluator<'a> {
        Evaluator { sys, overlay: HashMap::new(), memo: HashMap::new() }
    }

    /// Adds a derived atom whose value at every point is given directly.
    /// Overlay atoms shadow state atoms of the same name.
    pub fn define(&mut self, name: impl Into<String>, table: Table) {
        assert_eq!(table.len(), self.sys.runs().len() * self.sys.len());
        self.overlay.insert(name.into(), Rc::new(table));
        self.memo.clear();
    }

    pub fn system(&self) -> &'a InterpretedSystem {
        self.sys
    }

    fn idx(&self, p: Point) -> usize {
        p.run * self.sys.len() + p.round
    }

    pub fn holds(&mut self, f: &Formula, p: Point) -> Result<bool> {
        let i = self.idx(p);
        Ok(self.table(f)?[i])
    }

    /// Truth values at every run for one round.
    pub fn column(&mut self, f: &Formula, round: usize) -> Result<Vec<bool>> {
        let t = self.table(f)?;
        let len = self.sys.len();
        Ok((0..self.sys.runs().len()).map(|r| t[r * len + round]).collect())
    }

    pub fn table(&mut self, f: &Formula) -> Result<Rc<Table>> {
        if let Some(t) = self.memo.get(f) {
            return Ok(t.clone());
        }
        let t = Rc::new(self.compute(f)?);
        self.memo.insert(f.clone(), t.clone());
        Ok(t)
    }

    fn compute(&mut self, f: &Formula) -> Result<Table> {
        let len = self.sys.len();
        let runs = self.sys.runs().len();
        let map = |t: &[bool], g: &dyn Fn(bool) -> bool| -> Table { t.iter().map(|&b| g(b)).collect() };
        let zip = |a: &[bool], b: &[bool], g: &dyn Fn(bool, bool) -> bool| -> Table {
            a.iter().zip(b.iter()).map(|(&x, &y)| g(x, y)).collect()
        };
        let shift = |t: &[bool], n: usize| -> Table {
            (0..runs * len)
                .map(|i| {
                    let (r, m) = (i / len, i % len);
                    t[r * len + (m + n).min(len - 1)]
                })
                .collect()
        };
        Ok(match f {
            Formula::True => vec![true; runs * len],
            Formula::Atom { name, back } => {
                let base = self.atom_table(name)?;
                let k = *back as usize;
                (0..runs * len)
                    .map(|i| {
                        let m = i % len;
                        m >= k && base[i - k]
                    })
                    .collect()
            }
            Formula::Not(a) => map(&self.table(a)?, &|x| !x),
            Formula::And(a, b) => zip(&self.table(a)?, &self.table(b)?, &|x, y| x && y),
            Formula::Or(a, b) => zip(&self.table(a)?, &self.table(b)?, &|x, y| x || y),
            Formula::Implies(a, b) => zip(&self.table(a)?, &self.table(b)?, &|x, y| !x || y),
            Formula::Iff(a, b) => zip(&self.table(a)?, &self.table(b)?, &|x, y| x == y),
            Formula::Next(a) => shift(&self.table(a)?, 1),
            Formula::PowerNext(n, a) => shift(&self.table(a)?, *n as usize),
            Formula::Globally(a) | Formula::Finally(a) => {
                let t = self.table(a)?;
                let all = matches!(f, Formula::Globally(_));
                let mut out = vec![false; runs * len];
                for r in 0..runs {
                    let mut acc = all;
                    for m in (0..len).rev() {
                        let v = t[r * len + m];
                        acc = if all { acc && v } else { acc || v };
                        out[r * len + m] = acc;
                    }
                }
                out
            }
            Formula::Knows(agent, a) => {
                let t = self.table(a)?;
                let mut out = vec![false; runs * len];
                for m in 0..len {
                    let mut class: HashMap<u32, bool> = HashMap::new();
                    for p in self.sys.points_at(m) {
                        let e = class.entry(self.sys.history_id(*agent, p)).or_insert(true);
                        *e &= t[p.run * len + m];
                    }
                    for p in self.sys.points_at(m) {
                        out[p.run * len + m] = class[&self.sys.history_id(*agent, p)];
                    }
                }
                out
            }
        })
    }

    fn atom_table(&mut self, name: &str) -> Result<Rc<Table>> {
        if let Some(t) = self.overlay.get(name) {
            return Ok(t.clone());
        }
        let key = AtomKey::parse(name, self.sys.d())?;
        let f = Formula::atom(name);
        if let Some(t) = self.memo.get(&f) {
            return Ok(t.clone());
        }
        let len = self.sys.len();
        let t: Table = (0..self.sys.runs().len() * len)
            .map(|i| key.eval(self.sys.state(Point::new(i / len, i % len))))
            .collect();
        let t = Rc::new(t);
        self.memo.insert(f, t.clone());
        Ok(t)
    }

    /// For `f` false at `p`: the point where the failure shows and, when the
    /// failure is a knowledge formula, a point the agent cannot tell apart
    /// from it at which the known formula is false.
    pub fn explain(&mut self, f: &Formula, p: Point) -> Result<(Point, Option<Point>)> {
        debug_assert!(!self.holds(f, p)?);
        let last = self.sys.last_round();
        match f {
            Formula::And(a, b) => {
                if !self.holds(a, p)? {
                    self.explain(a, p)
                } else {
                    self.explain(b, p)
                }
            }
            Formula::Implies(_, b) => self.explain(b, p),
            Formula::Iff(a, b) => {
                if self.holds(a, p)? {
                    self.explain(b, p)
                } else {
                    self.explain(a, p)
                }
            }
            Formula::Next(a) => self.explain(a, Point::new(p.run, (p.round + 1).min(last))),
            Formula::PowerNext(n, a) => {
                self.explain(a, Point::new(p.run, (p.round + *n as usize).min(last)))
            }
            Formula::Globally(a) => {
                for m in p.round..=last {
                    let q = Point::new(p.run, m);
                    if !self.holds(a, q)? {
                        return self.explain(a, q);
                    }
                }
                unreachable!("G failed without a failing suffix point")
            }
            Formula::Knows(agent, a) => {
                let id = self.sys.history_id(*agent, p);
                for q in self.sys.points_at(p.round) {
                    if self.sys.history_id(*agent, q) == id && !self.holds(a, q)? {
                        return Ok((p, Some(q)));
                    }
                }
                unreachable!("K failed without a witness")
            }
            _ => Ok((p, None)),
        }
    }
}

/// Result of checking a formula at the initial point of every run.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub holds: bool,
    pub formula: String,
    /// First violating run.
    pub run: Option<usize>,
    /// Where the violation shows inside that run.
    pub point: Option<Point>,
    /// A point the relevant agent cannot distinguish from `point`.
    pub witness: Option<Point>,
    pub trace: Option<Trace>,
    pub witness_trace: Option<Trace>,
}

impl Verdict {
    pub fn header(&self) -> String {
        let pt = |p: Option<Point>| p.map_or("-".to_string(), |p| format!("{}@{}", p.run, p.round));
        format!(
            "# verdict holds={} run={} point={} witness={} formula={}",
            self.holds,
            self.run.map_or("-".to_string(), |r| r.to_string()),
            pt(self.point),
            pt(self.witness),
            self.formula
        )
    }

    /// Header line followed by the counterexample and witness traces.
    pub fn render(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for t in [&self.trace, &self.witness_trace].into_iter().flatten() {
            out.push_str(&t.render());
        }
        out
    }
}

pub fn holds(sys: &InterpretedSystem, p: Point, f: &Formula) -> Result<bool> {
    Evaluator::new(sys).holds(f, p)
}

pub fn check(sys: &InterpretedSystem, f: &Formula) -> Result<Verdict> {
    check_with(&mut Evaluator::new(sys), f)
}

/// [`check`] on an evaluator that may carry derived atoms.
pub fn check_with(ev: &mut Evaluator<'_>, f: &Formula) -> Result<Verdict> {
    let sys = ev.system();
    let col = ev.column(f, 0)?;
    let mut verdict = Verdict {
        holds: true,
        formula: f.to_string(),
        run: None,
        point: None,
        witness: None,
        trace: None,
        witness_trace: None,
    };
    if let Some(r) = col.iter().position(|&b| !b) {
        let (p, w) = ev.explain(f, Point::new(r, 0))?;
        verdict.holds = false;
        verdict.run = Some(r);
        verdict.point = Some(p);
        verdict.witness = w;
        verdict.trace = Some(Trace::of_run(sys, r));
        verdict.witness_trace = w.map(|w| Trace::of_run(sys, w.run));
    }
    Ok(verdict)
}

pub fn indistinguishable(sys: &InterpretedSystem, p1: Point, p2: Point, agent: AgentId) -> bool {
    p1.round == p2.round && sys.history_id(agent, p1) == sys.history_id(agent, p2)
}

/// Rejects formulas naming atoms that do not exist for the system.
pub fn validate_atoms(sys: &InterpretedSystem, f: &Formula) -> Result<()> {
    for name in f.atoms() {
        AtomKey::parse(name, sys.d())?;
    }
    Ok(())
}
