//! Alignment checker: scores a specification against a probabilistic
//! database by evaluating its negation normal form in the top-k proofs
//! semiring, one grounding at a time.

mod interval;
mod plan;
mod suffix;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::fact_db::{DbError, FactDatabase, Grounding, DEFAULT_GROUNDING_CAP};
use crate::provenance::{self, ProofSet, ProvenanceError, TopK, Witness};
use crate::spec_lang::Specification;

use interval::IntervalEval;
use plan::Plan;
use suffix::SuffixEval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
    #[error("operator `{0}` is not available in interval mode")]
    UnsupportedOperatorInIntervalMode(&'static str),
    #[error("fact {fact} has probability {prob}; a deterministic trace needs 0 or 1")]
    NonDeterministicDatabase { fact: usize, prob: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Finite-trace LTL evaluated from clip 1.
    #[default]
    Suffix,
    /// Interval matching of the whole trace `[1, m+1)`.
    Interval,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suffix" => Ok(Mode::Suffix),
            "interval" => Ok(Mode::Interval),
            other => Err(format!("unknown mode `{other}` (expected suffix or interval)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Suffix => "suffix",
            Mode::Interval => "interval",
        })
    }
}

#[derive(Clone, Debug)]
pub struct AlignConfig {
    /// Proof retention bound; `None` keeps every proof.
    pub k: Option<usize>,
    pub mode: Mode,
    pub grounding_cap: usize,
    pub gradients: bool,
    pub witness_scores: bool,
    /// Keep, per labeled node and clip, the proofs of that node alone
    /// (suffix mode only). Used by the conditional time-span score.
    pub record_subformulas: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            k: Some(5),
            mode: Mode::Suffix,
            grounding_cap: DEFAULT_GROUNDING_CAP,
            gradients: true,
            witness_scores: true,
            record_subformulas: false,
        }
    }
}

impl AlignConfig {
    pub fn exact() -> Self {
        Self { k: None, ..Self::default() }
    }

    pub fn with_k(mut self, k: Option<usize>) -> Self {
        self.k = k;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct AlignmentResult {
    pub score: f64,
    pub grad: BTreeMap<usize, f64>,
    pub proofs: ProofSet,
    pub witness_scores: BTreeMap<String, BTreeMap<Witness, f64>>,
    /// `label -> proofs of the labeled node at clip j` (index `j - 1`).
    pub subformulas: BTreeMap<String, Vec<ProofSet>>,
}

type Recorded = Vec<(String, Vec<ProofSet>)>;

fn eval_grounding(
    plan: &Plan,
    db: &FactDatabase,
    ctx: TopK,
    g: &Grounding,
    cfg: &AlignConfig,
) -> (ProofSet, Recorded) {
    let m = db.num_clips();
    match cfg.mode {
        Mode::Suffix => {
            let mut ev = SuffixEval::new(plan, db, ctx, g);
            let top = ev.eval(plan.root, 1);
            let mut rec = Vec::new();
            if cfg.record_subformulas {
                for (n, label) in plan.labeled_nodes() {
                    rec.push((label.to_string(), (1..=m).map(|j| ev.eval(n, j)).collect()));
                }
            }
            (top, rec)
        }
        Mode::Interval => {
            let mut ev = IntervalEval::new(plan, db, ctx, g);
            (ev.eval(plan.root, 1, m + 1), Vec::new())
        }
    }
}

/// `Pr(db |= spec)` over the retained proofs, with gradients and
/// witness-partitioned scores.
pub fn align(
    db: &FactDatabase,
    spec: &Specification,
    cfg: &AlignConfig,
) -> Result<AlignmentResult, CheckError> {
    let plan = Plan::compile(spec, db, cfg.mode)?;
    let groundings = db.groundings(spec, cfg.grounding_cap)?;
    let probs = db.probs();
    let ctx = TopK::new(&probs, cfg.k);

    let per_grounding: Vec<(ProofSet, Recorded)> = groundings
        .par_iter()
        .map(|g| eval_grounding(&plan, db, ctx, g, cfg))
        .collect();
    let proofs = ctx.or_all(per_grounding.iter().map(|(p, _)| p));

    let (score, grad) = if cfg.gradients {
        provenance::wmc_grad(&proofs, &probs)?
    } else {
        (provenance::wmc(&proofs, &probs)?, BTreeMap::new())
    };

    let mut witness_scores = BTreeMap::new();
    if cfg.witness_scores {
        for (_, label) in plan.labeled_nodes() {
            let by = match provenance::wmc_by_witness(&proofs, &probs, label) {
                Ok(by) => by,
                Err(ProvenanceError::UnknownWitnessLabel(_)) => BTreeMap::new(),
                Err(e) => return Err(e.into()),
            };
            witness_scores.insert(label.to_string(), by);
        }
    }

    let mut subformulas: BTreeMap<String, Vec<ProofSet>> = BTreeMap::new();
    if cfg.record_subformulas && cfg.mode == Mode::Suffix {
        for (_, label) in plan.labeled_nodes() {
            let label = label.to_string();
            let per_clip = (0..db.num_clips() as usize)
                .map(|j| {
                    ctx.or_all(per_grounding.iter().flat_map(|(_, rec)| {
                        rec.iter().filter(|(l, _)| *l == label).map(move |(_, v)| &v[j])
                    }))
                })
                .collect();
            subformulas.insert(label, per_clip);
        }
    }

    Ok(AlignmentResult { score, grad, proofs, witness_scores, subformulas })
}

/// Interval-matching alignment (`cfg.mode` is overridden).
pub fn align_interval(
    db: &FactDatabase,
    spec: &Specification,
    cfg: &AlignConfig,
) -> Result<AlignmentResult, CheckError> {
    align(db, spec, &cfg.clone().with_mode(Mode::Interval))
}

/// Probability that the integrity constraint is violated: the alignment
/// score of its negation. Constraint variables are read universally, so
/// the negation is existential over the same variables.
pub fn violation_score(
    db: &FactDatabase,
    constraint: &Specification,
    cfg: &AlignConfig,
) -> Result<AlignmentResult, CheckError> {
    align(db, &constraint.negated(), cfg)
}

/// Boolean satisfaction on a deterministic trace, by direct recursion.
pub fn check_bool(db: &FactDatabase, spec: &Specification, mode: Mode) -> Result<bool, CheckError> {
    for f in db.facts() {
        if f.prob != 0.0 && f.prob != 1.0 {
            return Err(CheckError::NonDeterministicDatabase { fact: f.id, prob: f.prob });
        }
    }
    let world: Vec<bool> = db.facts().iter().map(|f| f.prob == 1.0).collect();
    crate::oracle::satisfies(db, spec, &world, mode)
}

#[cfg(test)]
mod tests;
