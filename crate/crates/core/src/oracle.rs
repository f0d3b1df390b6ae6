//! Brute-force ground truth: boolean satisfaction by direct recursion and
//! exact alignment probability by enumerating every world.
//!
//! Nothing here touches the proof engine; fact matching is a linear scan.

use rayon::prelude::*;
use thiserror::Error;

use crate::checker::{CheckError, Mode};
use crate::fact_db::{DbError, FactDatabase, Grounding, DEFAULT_GROUNDING_CAP};
use crate::spec_lang::{to_nnf, Atom, Formula, Node, Specification, Term};

pub const MAX_ORACLE_FACTS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{count} facts exceed the oracle cap of {cap}")]
    TooManyFacts { count: usize, cap: usize },
    #[error(transparent)]
    Check(#[from] CheckError),
}

struct World<'a> {
    db: &'a FactDatabase,
    truth: &'a [bool],
    g: &'a Grounding,
    vars: &'a [String],
    m: u32,
}

impl World<'_> {
    fn holds(&self, atom: &Atom, t: u32) -> bool {
        let args: Vec<Option<&str>> = atom
            .args
            .iter()
            .map(|a| match a {
                Term::Const(c) => Some(c.as_str()),
                Term::Var(v) => {
                    let i = self.vars.iter().position(|x| x == v).expect("closed spec");
                    Some(self.g.0[i].as_str())
                }
                Term::Wildcard => None,
            })
            .collect();
        self.db.facts().iter().any(|f| {
            self.truth[f.id]
                && f.key.predicate == atom.predicate
                && f.key.time.is_none_or(|ft| ft == t)
                && f.key.args.len() == args.len()
                && f.key.args.iter().zip(&args).all(|(a, p)| p.is_none_or(|p| p == a))
        })
    }

    /// Finite-trace LTL at position `i`; negation is semantic.
    fn suffix(&self, f: &Formula, i: u32) -> bool {
        let m = self.m;
        match &f.node {
            Node::Atom(a) => self.holds(a, i),
            Node::Not(a) => !self.suffix(a, i),
            Node::And(a, b) => self.suffix(a, i) && self.suffix(b, i),
            Node::Or(a, b) => self.suffix(a, i) || self.suffix(b, i),
            Node::Next(a) => i < m && self.suffix(a, i + 1),
            Node::WeakNext(a) => i == m || self.suffix(a, i + 1),
            Node::Always(a) => (i..=m).all(|j| self.suffix(a, j)),
            Node::Finally(a) => (i..=m).any(|j| self.suffix(a, j)),
            Node::Until(a, b) => {
                (i..=m).any(|j| self.suffix(b, j) && (i..j).all(|l| self.suffix(a, l)))
            }
            Node::Release(a, b) => {
                (i..=m).all(|j| self.suffix(b, j))
                    || (i..=m).any(|j| self.suffix(a, j) && (i..=j).all(|l| self.suffix(b, l)))
            }
        }
    }

    /// Interval matching of an NNF formula on `[s, e)`.
    fn interval(&self, f: &Formula, s: u32, e: u32) -> bool {
        let m = self.m;
        match &f.node {
            Node::Atom(a) => (s..e).all(|t| self.holds(a, t)),
            Node::Not(inner) => match &inner.node {
                Node::Atom(a) => (s..e).all(|t| !self.holds(a, t)),
                _ => unreachable!("interval evaluation runs on negation normal form"),
            },
            Node::And(a, b) => match &b.node {
                Node::Finally(c) => {
                    (s + 1..=m + 1).any(|e1| self.interval(a, s, e1))
                        && (s + 1..e).any(|s2| self.interval(c, s2, e))
                }
                _ => self.interval(a, s, e) && self.interval(b, s, e),
            },
            Node::Or(a, b) => self.interval(a, s, e) || self.interval(b, s, e),
            Node::Until(a, b) => {
                (s + 1..e).any(|mid| self.interval(a, s, mid) && self.interval(b, mid, e))
            }
            Node::Always(a) => self.interval(a, s, e),
            Node::Finally(a) => {
                (s..e).any(|s1| (s1 + 1..=e).any(|e1| self.interval(a, s1, e1)))
            }
            Node::Next(_) | Node::WeakNext(_) | Node::Release(..) => {
                unreachable!("rejected before evaluation")
            }
        }
    }
}

fn validate(db: &FactDatabase, body: &Formula, mode: Mode) -> Result<(), CheckError> {
    for a in body.atoms() {
        let decl = db
            .schema()
            .get(&a.predicate)
            .ok_or_else(|| DbError::UnknownPredicate(a.predicate.clone()))?;
        if decl.arity != a.args.len() {
            return Err(DbError::ArityMismatch {
                key: a.to_string(),
                expected: decl.arity,
                found: a.args.len(),
            }
            .into());
        }
    }
    if mode == Mode::Interval {
        let mut bad = None;
        body.visit(&mut |n| match n.node {
            Node::Next(_) => bad = bad.or(Some("next")),
            Node::WeakNext(_) => bad = bad.or(Some("weak next")),
            Node::Release(..) => bad = bad.or(Some("release")),
            _ => {}
        });
        if let Some(op) = bad {
            return Err(CheckError::UnsupportedOperatorInIntervalMode(op));
        }
    }
    Ok(())
}

struct Prepared {
    body: Formula,
    groundings: Vec<Grounding>,
}

fn prepare(db: &FactDatabase, spec: &Specification, mode: Mode) -> Result<Prepared, CheckError> {
    let body = match mode {
        Mode::Suffix => spec.body.clone(),
        Mode::Interval => to_nnf(&spec.body),
    };
    validate(db, &body, mode)?;
    let groundings = db.groundings(spec, DEFAULT_GROUNDING_CAP)?;
    Ok(Prepared { body, groundings })
}

fn sat(db: &FactDatabase, spec: &Specification, p: &Prepared, truth: &[bool], mode: Mode) -> bool {
    let m = db.num_clips();
    p.groundings.iter().any(|g| {
        let w = World { db, truth, g, vars: &spec.vars, m };
        match mode {
            Mode::Suffix => w.suffix(&p.body, 1),
            Mode::Interval => w.interval(&p.body, 1, m + 1),
        }
    })
}

/// Whether the world `truth` (one flag per fact id) satisfies `spec`.
pub fn satisfies(
    db: &FactDatabase,
    spec: &Specification,
    truth: &[bool],
    mode: Mode,
) -> Result<bool, CheckError> {
    let p = prepare(db, spec, mode)?;
    Ok(sat(db, spec, &p, truth, mode))
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Default)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// `Pr(db |= spec)` as the total weight of satisfying worlds. Facts of
/// predicates the spec never mentions are summed out.
pub fn exact_align(db: &FactDatabase, spec: &Specification, mode: Mode) -> Result<f64, OracleError> {
    if db.len() > MAX_ORACLE_FACTS {
        return Err(OracleError::TooManyFacts { count: db.len(), cap: MAX_ORACLE_FACTS });
    }
    let p = prepare(db, spec, mode)?;
    let preds = spec.predicates();
    let relevant: Vec<usize> = db
        .facts()
        .iter()
        .filter(|f| preds.contains(&f.key.predicate.as_str()))
        .map(|f| f.id)
        .collect();
    let n = relevant.len();
    let total: u64 = 1 << n;
    const CHUNK: u64 = 1 << 12;
    let chunks: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Sum::default();
            let mut truth = vec![false; db.len()];
            for w in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut weight = 1.0;
                for (bit, &id) in relevant.iter().enumerate() {
                    let on = (w >> bit) & 1 == 1;
                    truth[id] = on;
                    let pf = db.facts()[id].prob;
                    weight *= if on { pf } else { 1.0 - pf };
                }
                if weight != 0.0 && sat(db, spec, &p, &truth, mode) {
                    acc.add(weight);
                }
            }
            acc.value()
        })
        .collect();
    let mut acc = Sum::default();
    for c in chunks {
        acc.add(c);
    }
    Ok(acc.value())
}

/// Central difference of [`exact_align`] in one fact's probability,
/// one-sided where `p ± eps` would leave `[0, 1]`.
pub fn fd_grad(
    db: &FactDatabase,
    spec: &Specification,
    mode: Mode,
    fact: usize,
    eps: f64,
) -> Result<f64, OracleError> {
    assert!(eps > 0.0, "step must be positive");
    let mut probs = db.probs();
    let p = probs[fact];
    let (lo, hi) = ((p - eps).max(0.0), (p + eps).min(1.0));
    probs[fact] = hi;
    let f_hi = exact_align(&db.with_probs(&probs).map_err(CheckError::from)?, spec, mode)?;
    probs[fact] = lo;
    let f_lo = exact_align(&db.with_probs(&probs).map_err(CheckError::from)?, spec, mode)?;
    Ok((f_hi - f_lo) / (hi - lo))
}
