//! Training signals over alignment scores: alignment, batch contrastive,
//! witness-weighted time-span and integrity-constraint losses. Every loss
//! returns its value together with `d loss / d p_f` per fact.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::checker::{align, violation_score, AlignConfig, CheckError};
use crate::fact_db::FactDatabase;
use crate::provenance::{self, ProofSet, ProvenanceError, TopK, Witness};
use crate::spec_lang::Specification;

pub type FactGrad = BTreeMap<usize, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
    #[error("threshold d_tau = {d_tau} must be below d_max = {d_max}")]
    DTauNotBelowDMax { d_tau: f64, d_max: f64 },
    #[error("witness label `{0}` does not occur in the specification")]
    UnknownWitnessLabel(String),
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub align: f64,
    pub contrastive: f64,
    pub temporal: f64,
    pub semantic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { align: 1.0, contrastive: 1.0, temporal: 1.0, semantic: 0.05 }
    }
}

/// How a distance partition of the proofs is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SpanScore {
    /// `Pr(spec and |t_post - t_pre| = d)`.
    #[default]
    Joint,
    /// The joint score divided by the probability that the two labeled
    /// subformulas hold at some pair of clips `d` apart.
    Conditional,
}

#[derive(Clone, Debug)]
pub struct LossConfig {
    pub bce_epsilon: f64,
    pub d_tau_fraction: f64,
    pub weights: LossWeights,
    pub span_score: SpanScore,
    pub align: AlignConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            bce_epsilon: 1e-12,
            d_tau_fraction: 0.9,
            weights: LossWeights::default(),
            span_score: SpanScore::Joint,
            align: AlignConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BatchItem<'a> {
    pub db: &'a FactDatabase,
    pub spec: &'a Specification,
    /// Equal keys mean structurally equal specifications.
    pub key: &'a str,
}

/// `dst += scale * src`
pub fn add_scaled(dst: &mut FactGrad, src: &FactGrad, scale: f64) {
    for (&f, &g) in src {
        *dst.entry(f).or_default() += scale * g;
    }
}

/// Binary cross-entropy with `p` clamped to `[eps, 1 - eps]`; the
/// derivative is 0 where the clamp is active.
pub fn bce(p: f64, target: bool, eps: f64) -> (f64, f64) {
    let clamped = p.clamp(eps, 1.0 - eps);
    let active = p > eps && p < 1.0 - eps;
    if target {
        (-clamped.ln(), if active { -1.0 / clamped } else { 0.0 })
    } else {
        (-(1.0 - clamped).ln(), if active { 1.0 / (1.0 - clamped) } else { 0.0 })
    }
}

/// `bce(Pr(db |= spec), 1)`.
pub fn alignment_loss(item: &BatchItem, cfg: &LossConfig) -> Result<(f64, FactGrad), LossError> {
    let r = align(item.db, item.spec, &cfg.align)?;
    let (l, dl) = bce(r.score, true, cfg.bce_epsilon);
    let mut grad = FactGrad::new();
    add_scaled(&mut grad, &r.grad, dl);
    Ok((l, grad))
}

/// Mean over all `|B|^2` (video, spec) pairs of `bce(score, key_i == key_j)`.
/// Gradients are returned per batch item (its database).
pub fn contrastive_loss(
    batch: &[BatchItem],
    cfg: &LossConfig,
) -> Result<(f64, Vec<FactGrad>), LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut grads = vec![FactGrad::new(); batch.len()];
    for (i, video) in batch.iter().enumerate() {
        for spec in batch {
            let r = align(video.db, spec.spec, &cfg.align)?;
            let (l, dl) = bce(r.score, video.key == spec.key, cfg.bce_epsilon);
            total += l / (n * n);
            add_scaled(&mut grads[i], &r.grad, dl / (n * n));
        }
    }
    Ok((total, grads))
}

/// `0` up to `d_tau`, then linear up to `1` at `d_max`.
pub fn temporal_weight(d: u32, d_max: u32, d_tau: f64) -> Result<f64, LossError> {
    let (d, d_max_f) = (d as f64, d_max as f64);
    if d_tau >= d_max_f {
        return Err(LossError::DTauNotBelowDMax { d_tau, d_max: d_max_f });
    }
    Ok(if d <= d_tau { 0.0 } else { (d - d_tau) / (d_max_f - d_tau) })
}

/// `sum_d w_d * bce(s_d, 1)` over distance partitions with at least one proof.
pub fn weighted_span_loss(
    scores: &BTreeMap<u32, (f64, FactGrad)>,
    d_max: u32,
    d_tau: f64,
    eps: f64,
) -> Result<(f64, FactGrad), LossError> {
    let mut loss = 0.0;
    let mut grad = FactGrad::new();
    for (&d, (s, g)) in scores {
        let w = temporal_weight(d, d_max, d_tau)?;
        if w == 0.0 {
            continue;
        }
        let (l, dl) = bce(*s, true, eps);
        loss += w * l;
        add_scaled(&mut grad, g, w * dl);
    }
    Ok((loss, grad))
}

fn distance(a: Witness, b: Witness) -> u32 {
    a.start().abs_diff(b.start())
}

/// Time-span loss over the witnesses bound to `pre` and `post`.
pub fn temporal_loss(
    item: &BatchItem,
    pre: &str,
    post: &str,
    cfg: &LossConfig,
) -> Result<(f64, FactGrad), LossError> {
    let labels = item.spec.body.labels();
    for l in [pre, post] {
        if !labels.iter().any(|x| &**x == l) {
            return Err(LossError::UnknownWitnessLabel(l.to_string()));
        }
    }
    let m = item.db.num_clips();
    if m < 2 {
        return Ok((0.0, FactGrad::new()));
    }
    let d_max = m - 1;
    let d_tau = cfg.d_tau_fraction * d_max as f64;
    let conditional = cfg.span_score == SpanScore::Conditional;
    let acfg = AlignConfig {
        witness_scores: false,
        gradients: false,
        record_subformulas: conditional,
        ..cfg.align.clone()
    };
    let r = align(item.db, item.spec, &acfg)?;
    let probs = item.db.probs();

    let mut parts: BTreeMap<u32, Vec<Vec<_>>> = BTreeMap::new();
    for p in r.proofs.proofs() {
        if let (Some(a), Some(b)) = (p.witness(pre), p.witness(post)) {
            parts.entry(distance(a, b)).or_default().push(p.literals().to_vec());
        }
    }
    let mut scores = BTreeMap::new();
    for (d, clauses) in parts {
        if temporal_weight(d, d_max, d_tau)? == 0.0 {
            continue;
        }
        let (joint, dj) = provenance::WmcWorkspace::new(&probs).count_with_grad(&clauses)?;
        if !conditional {
            scores.insert(d, (joint, dj));
            continue;
        }
        let ctx = TopK::new(&probs, cfg.align.k);
        let (sp, sq) = (&r.subformulas[pre], &r.subformulas[post]);
        let mut pairs: Vec<ProofSet> = Vec::new();
        for (u, a) in sp.iter().enumerate() {
            for (v, b) in sq.iter().enumerate() {
                if u.abs_diff(v) as u32 == d {
                    pairs.push(ctx.and(a, b));
                }
            }
        }
        let (den, dd) = provenance::wmc_grad(&ctx.or_all(pairs.iter()), &probs)?;
        if den <= 0.0 {
            continue;
        }
        let ratio = (joint / den).min(1.0);
        let mut g = FactGrad::new();
        add_scaled(&mut g, &dj, 1.0 / den);
        add_scaled(&mut g, &dd, -joint / (den * den));
        scores.insert(d, (ratio, g));
    }
    weighted_span_loss(&scores, d_max, d_tau, cfg.bce_epsilon)
}

/// `sum_i w_i * bce(Pr(constraint_i violated), 0)`.
pub fn semantic_loss(
    db: &FactDatabase,
    constraints: &[(Specification, f64)],
    cfg: &LossConfig,
) -> Result<(f64, FactGrad), LossError> {
    let mut loss = 0.0;
    let mut grad = FactGrad::new();
    let acfg = AlignConfig { witness_scores: false, ..cfg.align.clone() };
    for (c, w) in constraints {
        let r = violation_score(db, c, &acfg)?;
        let (l, dl) = bce(r.score, false, cfg.bce_epsilon);
        loss += w * l;
        add_scaled(&mut grad, &r.grad, w * dl);
    }
    Ok((loss, grad))
}
