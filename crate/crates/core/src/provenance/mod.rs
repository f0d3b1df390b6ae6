//! Top-k proofs provenance over signed fact literals, exact weighted model
//! counting on the retained DNF, and its gradient.

mod proof;
mod wmc;

pub use proof::{Literal, Proof, Witness};
pub use wmc::{wmc, wmc_by_witness, wmc_grad, WmcWorkspace};

use std::fmt;

use thiserror::Error;

use crate::spec_lang::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProvenanceError {
    #[error("no probability for fact {0}")]
    MissingProbability(usize),
    #[error("witness label `{0}` does not occur")]
    UnknownWitnessLabel(String),
}

/// A bounded DNF: proofs kept in canonical rank order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProofSet {
    proofs: Vec<Proof>,
}

/// The multiplicative unit: one empty proof.
pub fn ps_true() -> ProofSet {
    ProofSet { proofs: vec![Proof::empty()] }
}

/// The additive unit: no proofs.
pub fn ps_false() -> ProofSet {
    ProofSet { proofs: Vec::new() }
}

impl ProofSet {
    pub fn proofs(&self) -> &[Proof] {
        &self.proofs
    }

    pub fn len(&self) -> usize {
        self.proofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proofs.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.proofs.iter().any(|p| p.literals().is_empty())
    }

    /// Fact ids occurring in any proof, ascending.
    pub fn facts(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.proofs.iter().flat_map(|p| p.literals().iter().map(|l| l.fact())).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Proofs satisfying `keep`, without re-truncation.
    pub fn filter(&self, keep: impl Fn(&Proof) -> bool) -> ProofSet {
        ProofSet { proofs: self.proofs.iter().filter(|p| keep(p)).cloned().collect() }
    }

    /// The debug dump: one proof per line, descending probability.
    pub fn dump(&self) -> Vec<String> {
        self.proofs.iter().map(|p| p.to_string()).collect()
    }
}

impl fmt::Display for ProofSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.dump() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Semiring context: fact probabilities used for ranking plus the
/// retention bound (`None` keeps every proof).
#[derive(Clone, Copy, Debug)]
pub struct TopK<'a> {
    pub probs: &'a [f64],
    pub k: Option<usize>,
}

impl<'a> TopK<'a> {
    pub fn new(probs: &'a [f64], k: Option<usize>) -> Self {
        assert!(k != Some(0), "retention bound must be positive");
        Self { probs, k }
    }

    pub fn unbounded(probs: &'a [f64]) -> Self {
        Self::new(probs, None)
    }

    pub fn literal(&self, lit: Literal) -> ProofSet {
        ProofSet { proofs: vec![Proof::single(lit, self.probs)] }
    }

    /// Builds a set from raw literal lists (contradictory ones are dropped).
    pub fn from_clauses(&self, clauses: &[Vec<Literal>]) -> ProofSet {
        self.normalize(
            clauses.iter().filter_map(|c| Proof::from_literals(c.clone(), self.probs)).collect(),
        )
    }

    /// Dedup, absorption among proofs with identical witnesses, then top-k.
    pub fn normalize(&self, mut proofs: Vec<Proof>) -> ProofSet {
        proofs.sort_by(|a, b| {
            a.witnesses()
                .cmp(b.witnesses())
                .then_with(|| a.literals().len().cmp(&b.literals().len()))
                .then_with(|| a.literals().cmp(b.literals()))
        });
        proofs.dedup();
        let mut kept: Vec<Proof> = Vec::with_capacity(proofs.len());
        let mut group_start = 0;
        for p in proofs {
            if kept.get(group_start).is_none_or(|q| q.witnesses() != p.witnesses()) {
                group_start = kept.len();
            }
            let absorbed = kept[group_start..].iter().any(|q| {
                q.literals().len() < p.literals().len() && q.lits_subset_of(&p)
            });
            if !absorbed {
                kept.push(p);
            }
        }
        kept.sort_by(|a, b| a.rank_cmp(b));
        if let Some(k) = self.k {
            kept.truncate(k);
        }
        ProofSet { proofs: kept }
    }

    pub fn or(&self, a: &ProofSet, b: &ProofSet) -> ProofSet {
        if a.is_empty() {
            return self.normalize(b.proofs.clone());
        }
        if b.is_empty() {
            return self.normalize(a.proofs.clone());
        }
        let mut all = Vec::with_capacity(a.len() + b.len());
        all.extend_from_slice(&a.proofs);
        all.extend_from_slice(&b.proofs);
        self.normalize(all)
    }

    pub fn and(&self, a: &ProofSet, b: &ProofSet) -> ProofSet {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for p in &a.proofs {
            for q in &b.proofs {
                if let Some(m) = p.merge(q, self.probs) {
                    out.push(m);
                }
            }
        }
        self.normalize(out)
    }

    pub fn or_all<'s>(&self, sets: impl IntoIterator<Item = &'s ProofSet>) -> ProofSet {
        let mut all = Vec::new();
        for s in sets {
            all.extend_from_slice(&s.proofs);
        }
        self.normalize(all)
    }

    /// Left fold of `and`, stopping early at `false`.
    pub fn and_all<'s>(&self, sets: impl IntoIterator<Item = &'s ProofSet>) -> ProofSet {
        let mut acc = ps_true();
        for s in sets {
            acc = self.and(&acc, s);
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    /// Annotates every proof with `label -> w`.
    pub fn annotate(&self, set: &ProofSet, label: &Label, w: Witness) -> ProofSet {
        let proofs = set
            .proofs
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.annotate(label, w);
                p
            })
            .collect();
        self.normalize(proofs)
    }
}
