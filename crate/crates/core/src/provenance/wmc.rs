//! Exact weighted model counting of a DNF by Shannon expansion.
//!
//! Clause sets are canonicalized (sorted, deduplicated) and memoized per
//! call; variable-disjoint components are counted independently and
//! combined as `1 - prod(1 - p_i)`.

use std::collections::{BTreeMap, HashMap};

use super::{Literal, ProofSet, ProvenanceError, Witness};

type Clauses = Vec<Vec<Literal>>;

/// Memo table for one batch of counts over the same probabilities.
pub struct WmcWorkspace<'a> {
    probs: &'a [f64],
    memo: HashMap<Clauses, f64>,
}

impl<'a> WmcWorkspace<'a> {
    pub fn new(probs: &'a [f64]) -> Self {
        Self { probs, memo: HashMap::new() }
    }

    fn check(&self, clauses: &Clauses) -> Result<(), ProvenanceError> {
        for c in clauses {
            for l in c {
                if l.fact() >= self.probs.len() || !self.probs[l.fact()].is_finite() {
                    return Err(ProvenanceError::MissingProbability(l.fact()));
                }
            }
        }
        Ok(())
    }

    /// Probability that at least one clause holds.
    pub fn count(&mut self, clauses: &[Vec<Literal>]) -> Result<f64, ProvenanceError> {
        let clauses: Clauses = clauses.to_vec();
        self.check(&clauses)?;
        Ok(self.count_canonical(canonical(clauses)))
    }

    fn count_canonical(&mut self, clauses: Clauses) -> f64 {
        if clauses.is_empty() {
            return 0.0;
        }
        if clauses[0].is_empty() {
            return 1.0;
        }
        if clauses.len() == 1 {
            return clauses[0].iter().map(|l| l.weight(self.probs)).product();
        }
        if let Some(&v) = self.memo.get(&clauses) {
            return v;
        }
        let comps = components(&clauses);
        let value = if comps.len() > 1 {
            let mut none = 1.0;
            for comp in comps {
                none *= 1.0 - self.count_canonical(comp);
            }
            1.0 - none
        } else {
            let var = pivot(&clauses);
            let p = self.probs[var];
            let hi = self.count_canonical(condition(&clauses, var, true));
            let lo = self.count_canonical(condition(&clauses, var, false));
            p * hi + (1.0 - p) * lo
        };
        self.memo.insert(clauses, value);
        value
    }

    /// Value and `d value / d p_f` for every fact occurring in `clauses`,
    /// via `WMC[f:=1] - WMC[f:=0]` (the count is multilinear in each `p_f`).
    pub fn count_with_grad(
        &mut self,
        clauses: &[Vec<Literal>],
    ) -> Result<(f64, BTreeMap<usize, f64>), ProvenanceError> {
        let clauses: Clauses = clauses.to_vec();
        self.check(&clauses)?;
        let clauses = canonical(clauses);
        let value = self.count_canonical(clauses.clone());
        let mut facts: Vec<usize> = clauses.iter().flatten().map(|l| l.fact()).collect();
        facts.sort_unstable();
        facts.dedup();
        let mut grad = BTreeMap::new();
        for f in facts {
            let hi = self.count_canonical(condition(&clauses, f, true));
            let lo = self.count_canonical(condition(&clauses, f, false));
            grad.insert(f, hi - lo);
        }
        Ok((value, grad))
    }
}

fn canonical(mut clauses: Clauses) -> Clauses {
    for c in &mut clauses {
        c.sort_unstable();
        c.dedup();
    }
    clauses.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    clauses.dedup();
    if clauses.first().is_some_and(|c| c.is_empty()) {
        return vec![Vec::new()];
    }
    clauses
}

/// Most frequent variable, smallest id on ties.
fn pivot(clauses: &Clauses) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in clauses.iter().flatten() {
        *counts.entry(l.fact()).or_default() += 1;
    }
    let mut best = (0usize, usize::MAX);
    for (f, c) in counts {
        if c > best.0 {
            best = (c, f);
        }
    }
    best.1
}

fn condition(clauses: &Clauses, var: usize, value: bool) -> Clauses {
    let keep = if value { Literal::pos(var) } else { Literal::neg(var) };
    let kill = keep.negate();
    let out = clauses
        .iter()
        .filter(|c| !c.contains(&kill))
        .map(|c| c.iter().copied().filter(|&l| l != keep).collect())
        .collect();
    canonical(out)
}

/// Splits clauses into variable-disjoint groups (union-find over facts).
fn components(clauses: &Clauses) -> Vec<Clauses> {
    let n = clauses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for l in c {
            match owner.get(&l.fact()) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(l.fact(), i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Clauses> = BTreeMap::new();
    for (i, c) in clauses.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(c.clone());
    }
    groups.into_values().collect()
}

fn clauses_of(ps: &ProofSet) -> Clauses {
    ps.proofs().iter().map(|p| p.literals().to_vec()).collect()
}

/// Exact probability that an independent-Bernoulli world satisfies some
/// proof in `ps`.
pub fn wmc(ps: &ProofSet, probs: &[f64]) -> Result<f64, ProvenanceError> {
    WmcWorkspace::new(probs).count(&clauses_of(ps))
}

/// [`wmc`] plus its partial derivative for every fact occurring in `ps`.
pub fn wmc_grad(
    ps: &ProofSet,
    probs: &[f64],
) -> Result<(f64, BTreeMap<usize, f64>), ProvenanceError> {
    WmcWorkspace::new(probs).count_with_grad(&clauses_of(ps))
}

/// Exact count of each partition of `ps` by the witness bound to `label`.
/// Proofs without the label are left out; partitions may overlap in world
/// space, so values need not sum to `wmc(ps)`.
pub fn wmc_by_witness(
    ps: &ProofSet,
    probs: &[f64],
    label: &str,
) -> Result<BTreeMap<Witness, f64>, ProvenanceError> {
    let mut parts: BTreeMap<Witness, Clauses> = BTreeMap::new();
    for p in ps.proofs() {
        if let Some(w) = p.witness(label) {
            parts.entry(w).or_default().push(p.literals().to_vec());
        }
    }
    if parts.is_empty() {
        return Err(ProvenanceError::UnknownWitnessLabel(label.to_string()));
    }
    let mut ws = WmcWorkspace::new(probs);
    let mut out = BTreeMap::new();
    for (w, clauses) in parts {
        out.insert(w, ws.count(&clauses)?);
    }
    Ok(out)
}
