use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::spec_lang::Label;

/// A signed fact literal packed as `fact << 1 | negative`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Literal(u32);

impl Literal {
    pub fn pos(fact: usize) -> Self {
        Literal((fact as u32) << 1)
    }

    pub fn neg(fact: usize) -> Self {
        Literal(((fact as u32) << 1) | 1)
    }

    pub fn fact(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn negate(self) -> Self {
        Literal(self.0 ^ 1)
    }

    /// Negative literals carry `1 - p`.
    pub fn weight(self, probs: &[f64]) -> f64 {
        let p = probs[self.fact()];
        if self.is_positive() {
            p
        } else {
            1.0 - p
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.is_positive() { '+' } else { '-' };
        write!(f, "{sign}{}", self.fact())
    }
}

/// Where a labeled subformula was satisfied: a clip (suffix mode) or a
/// half-open clip interval (interval mode).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
#[serde(untagged)]
pub enum Witness {
    At(u32),
    Span(u32, u32),
}

impl Witness {
    pub fn start(self) -> u32 {
        match self {
            Witness::At(t) | Witness::Span(t, _) => t,
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::At(t) => write!(f, "{t}"),
            Witness::Span(s, e) => write!(f, "[{s},{e})"),
        }
    }
}

/// A conjunction of literals plus witness annotations. The cached
/// probability does not take part in equality.
#[derive(Clone, Debug)]
pub struct Proof {
    lits: Vec<Literal>,
    witnesses: Vec<(Label, Witness)>,
    prob: f64,
}

impl PartialEq for Proof {
    fn eq(&self, other: &Self) -> bool {
        self.lits == other.lits && self.witnesses == other.witnesses
    }
}

impl Eq for Proof {}

impl Hash for Proof {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.lits.hash(state);
        self.witnesses.hash(state);
    }
}

impl Proof {
    pub fn empty() -> Self {
        Proof { lits: Vec::new(), witnesses: Vec::new(), prob: 1.0 }
    }

    pub fn single(lit: Literal, probs: &[f64]) -> Self {
        Proof { lits: vec![lit], witnesses: Vec::new(), prob: lit.weight(probs) }
    }

    /// Builds a proof from arbitrary literals; `None` if contradictory.
    pub fn from_literals(mut lits: Vec<Literal>, probs: &[f64]) -> Option<Self> {
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].fact() == w[1].fact()) {
            return None;
        }
        let prob = lits.iter().map(|l| l.weight(probs)).product();
        Some(Proof { lits, witnesses: Vec::new(), prob })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.lits
    }

    pub fn witnesses(&self) -> &[(Label, Witness)] {
        &self.witnesses
    }

    pub fn witness(&self, label: &str) -> Option<Witness> {
        self.witnesses.iter().find(|(l, _)| &**l == label).map(|(_, w)| *w)
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    /// Annotates `label -> w` unless the label is already present.
    pub(crate) fn annotate(&mut self, label: &Label, w: Witness) {
        match self.witnesses.binary_search_by(|(l, _)| l.cmp(label)) {
            Ok(_) => {}
            Err(pos) => self.witnesses.insert(pos, (label.clone(), w)),
        }
    }

    /// Conjunction; `None` when the literal sets contradict.
    ///
    /// A label bound on both sides keeps the earlier witness.
    pub(crate) fn merge(&self, other: &Proof, probs: &[f64]) -> Option<Proof> {
        let mut lits = Vec::with_capacity(self.lits.len() + other.lits.len());
        let (a, b) = (&self.lits, &other.lits);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let (x, y) = (a[i], b[j]);
            if x.fact() == y.fact() {
                if x != y {
                    return None;
                }
                lits.push(x);
                i += 1;
                j += 1;
            } else if x < y {
                lits.push(x);
                i += 1;
            } else {
                lits.push(y);
                j += 1;
            }
        }
        lits.extend_from_slice(&a[i..]);
        lits.extend_from_slice(&b[j..]);
        let prob = lits.iter().map(|l| l.weight(probs)).product();

        let mut witnesses = Vec::with_capacity(self.witnesses.len() + other.witnesses.len());
        let (wa, wb) = (&self.witnesses, &other.witnesses);
        let (mut i, mut j) = (0, 0);
        while i < wa.len() && j < wb.len() {
            match wa[i].0.cmp(&wb[j].0) {
                Ordering::Equal => {
                    witnesses.push((wa[i].0.clone(), wa[i].1.min(wb[j].1)));
                    i += 1;
                    j += 1;
                }
                Ordering::Less => {
                    witnesses.push(wa[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    witnesses.push(wb[j].clone());
                    j += 1;
                }
            }
        }
        witnesses.extend_from_slice(&wa[i..]);
        witnesses.extend_from_slice(&wb[j..]);
        Some(Proof { lits, witnesses, prob })
    }

    /// Whether `self.lits` is a subset of `other.lits`.
    pub(crate) fn lits_subset_of(&self, other: &Proof) -> bool {
        if self.lits.len() > other.lits.len() {
            return false;
        }
        let mut j = 0;
        for &l in &self.lits {
            while j < other.lits.len() && other.lits[j] < l {
                j += 1;
            }
            if j == other.lits.len() || other.lits[j] != l {
                return false;
            }
            j += 1;
        }
        true
    }

    /// Canonical order: descending probability, then literals, then witnesses.
    pub(crate) fn rank_cmp(&self, other: &Proof) -> Ordering {
        other
            .prob
            .total_cmp(&self.prob)
            .then_with(|| self.lits.cmp(&other.lits))
            .then_with(|| self.witnesses.cmp(&other.witnesses))
    }
}

impl fmt::Display for Proof {
    /// `p=<prob> lits=[±id,…] wit={label:t,…}`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={} lits=[", self.prob)?;
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "] wit={{")?;
        for (i, (l, w)) in self.witnesses.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}:{w}")?;
        }
        write!(f, "}}")
    }
}
