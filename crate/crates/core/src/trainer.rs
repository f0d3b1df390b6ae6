//! Linear clip-level predictor trained through the alignment losses, plus
//! the F1 and retrieval evaluation protocols.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::checker::{align, AlignConfig, CheckError, Mode};
use crate::fact_db::{DbError, FactDatabase, Schema};
use crate::losses::{self, bce, FactGrad, LossConfig, LossError};
use crate::spec_lang::Specification;
use crate::synthgen::{self, Activation, Episode, HeadSpec, Layout, Regime};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("feature dimension {found} does not match the predictor's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("{have} episodes cannot fill a group of {need}")]
    TooFewEpisodes { have: usize, need: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint does not match the predictor layout: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// Linear heads over clip features, shared across the slots of a head.
/// All weights live in one flat vector: per head, `W` (`width x C`,
/// row-major) followed by the bias (`C`).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorParams {
    pub schema: Schema,
    pub entities: Vec<String>,
    pub values: Vec<String>,
    pub feature_dim: usize,
    pub heads: Vec<HeadSpec>,
    pub theta: Vec<f64>,
    offsets: Vec<usize>,
}

impl PredictorParams {
    pub fn zeros(layout: &Layout, feature_dim: usize) -> Self {
        let mut offsets = Vec::with_capacity(layout.heads.len());
        let mut n = 0;
        for h in &layout.heads {
            offsets.push(n);
            n += (h.width + 1) * h.outputs.len();
        }
        PredictorParams {
            schema: layout.schema.clone(),
            entities: layout.entities.clone(),
            values: layout.values.clone(),
            feature_dim,
            heads: layout.heads.clone(),
            theta: vec![0.0; n],
            offsets,
        }
    }

    /// Weights drawn from `N(0, scale^2)`, zero biases.
    pub fn random(layout: &Layout, feature_dim: usize, seed: u64, scale: f64) -> Self {
        let mut p = Self::zeros(layout, feature_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale.abs()).expect("finite scale");
        for h in 0..p.heads.len() {
            let n = p.heads[h].width * p.heads[h].outputs.len();
            let start = p.offsets[h];
            for x in &mut p.theta[start..start + n] {
                *x = normal.sample(&mut rng);
            }
        }
        p
    }

    /// Sets every bias of the sigmoid heads, e.g. to the logit of a sparse
    /// prior.
    pub fn with_sigmoid_bias(mut self, b: f64) -> Self {
        for h in 0..self.heads.len() {
            if self.heads[h].activation == Activation::Sigmoid {
                for j in 0..self.heads[h].outputs.len() {
                    let i = self.b_index(h, j);
                    self.theta[i] = b;
                }
            }
        }
        self
    }

    pub fn w_index(&self, h: usize, i: usize, j: usize) -> usize {
        self.offsets[h] + i * self.heads[h].outputs.len() + j
    }

    pub fn b_index(&self, h: usize, j: usize) -> usize {
        let head = &self.heads[h];
        self.offsets[h] + head.width * head.outputs.len() + j
    }

    fn logits(&self, h: usize, x: &[f64]) -> Vec<f64> {
        let c = self.heads[h].outputs.len();
        let w = &self.theta[self.offsets[h]..self.offsets[h] + self.heads[h].width * c];
        let mut z: Vec<f64> = (0..c).map(|j| self.theta[self.b_index(h, j)]).collect();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (zj, wij) in z.iter_mut().zip(&w[i * c..(i + 1) * c]) {
                *zj += xi * wij;
            }
        }
        z
    }

    /// Sha256 over the layout, so checkpoints cannot be loaded into a
    /// predictor with different heads.
    pub fn fingerprint(&self) -> String {
        let desc = serde_json::json!({
            "schema": self.schema,
            "entities": self.entities,
            "values": self.values,
            "feature_dim": self.feature_dim,
            "heads": self.heads,
        });
        let digest = Sha256::digest(desc.to_string().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Where a fact's probability came from.
#[derive(Clone, Copy, Debug)]
struct Source {
    head: usize,
    /// Clip index, or 0 for static heads.
    row: usize,
    slot: usize,
    out: usize,
}

/// Predicted database together with what is needed to backpropagate.
pub struct Forward {
    pub db: FactDatabase,
    /// `probs[h][row][slot][j]`
    probs: Vec<Vec<Vec<Vec<f64>>>>,
    /// Per head, the feature rows (clips, or the clip mean for static heads).
    inputs: Vec<Vec<Vec<f64>>>,
    sources: Vec<Source>,
}

pub fn forward(params: &PredictorParams, features: &[Vec<f64>]) -> Result<Forward, TrainError> {
    if features.is_empty() {
        return Err(TrainError::Db(DbError::NoClips));
    }
    for f in features {
        if f.len() != params.feature_dim {
            return Err(TrainError::DimensionMismatch {
                expected: params.feature_dim,
                found: f.len(),
            });
        }
    }
    for head in &params.heads {
        for slot in &head.slots {
            if slot.offset + head.width > params.feature_dim {
                return Err(TrainError::DimensionMismatch {
                    expected: slot.offset + head.width,
                    found: params.feature_dim,
                });
            }
        }
    }
    let m = features.len() as u32;
    let mean: Vec<f64> = (0..params.feature_dim)
        .map(|i| features.iter().map(|f| f[i]).sum::<f64>() / m as f64)
        .collect();
    let mut probs = Vec::with_capacity(params.heads.len());
    let mut inputs = Vec::with_capacity(params.heads.len());
    let mut scored = Vec::new();
    for (h, head) in params.heads.iter().enumerate() {
        let rows: Vec<Vec<f64>> =
            if head.is_static { vec![mean.clone()] } else { features.to_vec() };
        let mut per_row = Vec::with_capacity(rows.len());
        for (r, x) in rows.iter().enumerate() {
            let time = if head.is_static { None } else { Some(r as u32 + 1) };
            let mut per_slot = Vec::with_capacity(head.slots.len());
            for (s, slot) in head.slots.iter().enumerate() {
                let z = params.logits(h, &x[slot.offset..slot.offset + head.width]);
                let p = match head.activation {
                    Activation::Softmax => softmax(&z),
                    Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
                };
                for (j, &pj) in p.iter().enumerate() {
                    let src = Source { head: h, row: r, slot: s, out: j };
                    scored.push((head.key(s, j, time), pj, src));
                }
                per_slot.push(p);
            }
            per_row.push(per_slot);
        }
        probs.push(per_row);
        inputs.push(rows);
    }
    let db = FactDatabase::from_clip_scores(
        params.schema.clone(),
        params.entities.clone(),
        params.values.clone(),
        m,
        scored.iter().map(|(k, p, _)| (k.clone(), *p)),
    )?;
    let mut sources = vec![Source { head: 0, row: 0, slot: 0, out: 0 }; db.len()];
    for (k, _, s) in &scored {
        let id = db.fact_id(k).expect("fact was inserted");
        sources[id] = *s;
    }
    Ok(Forward { db, probs, inputs, sources })
}

/// Predicted probabilistic database for an episode.
pub fn predict(params: &PredictorParams, episode: &Episode) -> Result<FactDatabase, TrainError> {
    Ok(forward(params, &episode.features)?.db)
}

/// Accumulates `d loss / d theta` given `d loss / d p_f`.
fn backward(params: &PredictorParams, fw: &Forward, dp: &FactGrad, grad: &mut [f64]) {
    let mut dprob: Vec<Vec<Vec<Vec<f64>>>> = fw
        .probs
        .iter()
        .map(|rows| rows.iter().map(|slots| slots.iter().map(|p| vec![0.0; p.len()]).collect()).collect())
        .collect();
    for (&f, &g) in dp {
        let s = fw.sources[f];
        dprob[s.head][s.row][s.slot][s.out] += g;
    }
    for (h, head) in params.heads.iter().enumerate() {
        for (r, slots) in dprob[h].iter().enumerate() {
            for (s, gp) in slots.iter().enumerate() {
                if gp.iter().all(|&g| g == 0.0) {
                    continue;
                }
                let p = &fw.probs[h][r][s];
                let dz: Vec<f64> = match head.activation {
                    Activation::Sigmoid => gp.iter().zip(p).map(|(g, p)| g * p * (1.0 - p)).collect(),
                    Activation::Softmax => {
                        let dot: f64 = gp.iter().zip(p).map(|(g, p)| g * p).sum();
                        gp.iter().zip(p).map(|(g, p)| p * (g - dot)).collect()
                    }
                };
                let off = head.slots[s].offset;
                let x = &fw.inputs[h][r][off..off + head.width];
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (j, &d) in dz.iter().enumerate() {
                        grad[params.w_index(h, i, j)] += xi * d;
                    }
                }
                for (j, &d) in dz.iter().enumerate() {
                    grad[params.b_index(h, j)] += d;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub loss: LossConfig,
    pub seed: u64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
    /// Initial bias of sigmoid heads.
    pub init_bias: f64,
    /// Weighted integrity constraints for the semantic loss.
    pub constraints: Vec<(Specification, f64)>,
    /// Witness labels for the temporal loss; used when a spec carries both.
    pub temporal_labels: (String, String),
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 50,
            batch_size: 3,
            optimizer: Optimizer::default(),
            loss: LossConfig::default(),
            seed: 0,
            init_scale: 0.01,
            init_bias: 0.0,
            constraints: Vec::new(),
            temporal_labels: ("pre".into(), "post".into()),
        }
    }
}

impl TrainConfig {
    /// Defaults for a generated regime: MUGEN-like chains are checked in
    /// interval mode with k = 5; 20BN-like episodes use suffix mode, k = 3
    /// and the built-in integrity constraints.
    pub fn for_regime(regime: Regime) -> Self {
        let mut cfg = TrainConfig::default();
        match regime {
            Regime::MugenLike => {
                cfg.loss.align = AlignConfig::default().with_mode(Mode::Interval).with_k(Some(5));
            }
            Regime::Bn20Like => {
                cfg.loss.align = AlignConfig::default().with_k(Some(3));
                cfg.constraints = synthgen::bn20_constraints().into_iter().map(|c| (c, 1.0)).collect();
            }
        }
        cfg
    }

    fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.constraints.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(TrainError::InvalidConfig("constraint weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub align: f64,
    pub contrastive: f64,
    pub temporal: f64,
    pub semantic: f64,
}

impl LossBreakdown {
    fn add_scaled(&mut self, o: &LossBreakdown, s: f64) {
        self.total += s * o.total;
        self.align += s * o.align;
        self.contrastive += s * o.contrastive;
        self.temporal += s * o.temporal;
        self.semantic += s * o.semantic;
    }
}

/// Per-item work that does not depend on the other batch members.
struct ItemTerms {
    temporal: (f64, FactGrad),
    semantic: (f64, FactGrad),
}

fn item_terms(db: &FactDatabase, spec: &Specification, cfg: &TrainConfig) -> Result<ItemTerms, TrainError> {
    let w = &cfg.loss.weights;
    let (pre, post) = &cfg.temporal_labels;
    let labels = spec.body.labels();
    let has = |l: &str| labels.iter().any(|x| &**x == l);
    let temporal = if w.temporal != 0.0 && has(pre) && has(post) {
        let item = losses::BatchItem { db, spec, key: "" };
        losses::temporal_loss(&item, pre, post, &cfg.loss)?
    } else {
        (0.0, FactGrad::new())
    };
    let semantic = if w.semantic != 0.0 && !cfg.constraints.is_empty() {
        losses::semantic_loss(db, &cfg.constraints, &cfg.loss)?
    } else {
        (0.0, FactGrad::new())
    };
    Ok(ItemTerms { temporal, semantic })
}

/// Total loss of a minibatch and its gradient with respect to `theta`.
/// Alignment, temporal and semantic terms are batch means; the
/// contrastive term is the mean over all `B^2` pairs.
pub fn batch_loss(
    params: &PredictorParams,
    batch: &[&Episode],
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, Vec<f64>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let b = batch.len();
    let fws: Vec<Forward> = batch
        .par_iter()
        .map(|e| forward(params, &e.features))
        .collect::<Result<_, _>>()?;
    let keys: Vec<String> = batch.iter().map(|e| e.spec.identity_key()).collect();
    let acfg = AlignConfig { witness_scores: false, ..cfg.loss.align.clone() };
    let pairs: Vec<(usize, usize)> = (0..b).flat_map(|i| (0..b).map(move |j| (i, j))).collect();
    let scores: Vec<(f64, FactGrad)> = pairs
        .par_iter()
        .map(|&(i, j)| align(&fws[i].db, &batch[j].spec, &acfg).map(|r| (r.score, r.grad)))
        .collect::<Result<_, _>>()?;
    let terms: Vec<ItemTerms> = fws
        .par_iter()
        .zip(batch.par_iter())
        .map(|(fw, e)| item_terms(&fw.db, &e.spec, cfg))
        .collect::<Result<_, _>>()?;

    let w = cfg.loss.weights;
    let eps = cfg.loss.bce_epsilon;
    let bf = b as f64;
    let mut out = LossBreakdown::default();
    let mut dp: Vec<FactGrad> = vec![FactGrad::new(); b];
    for (&(i, j), (s, g)) in pairs.iter().zip(&scores) {
        let (l, dl) = bce(*s, keys[i] == keys[j], eps);
        out.contrastive += l / (bf * bf);
        losses::add_scaled(&mut dp[i], g, w.contrastive * dl / (bf * bf));
        if i == j {
            let (l, dl) = bce(*s, true, eps);
            out.align += l / bf;
            losses::add_scaled(&mut dp[i], g, w.align * dl / bf);
        }
    }
    for (i, t) in terms.iter().enumerate() {
        out.temporal += t.temporal.0 / bf;
        out.semantic += t.semantic.0 / bf;
        losses::add_scaled(&mut dp[i], &t.temporal.1, w.temporal / bf);
        losses::add_scaled(&mut dp[i], &t.semantic.1, w.semantic / bf);
    }
    out.total = w.align * out.align
        + w.contrastive * out.contrastive
        + w.temporal * out.temporal
        + w.semantic * out.semantic;
    if !out.total.is_finite() {
        let ids: Vec<&str> = batch.iter().map(|e| e.id.as_str()).collect();
        return Err(TrainError::NonFiniteLoss(format!("{out:?} on episodes {ids:?}")));
    }
    let mut grad = vec![0.0; params.theta.len()];
    for (fw, d) in fws.iter().zip(&dp) {
        backward(params, fw, d, &mut grad);
    }
    Ok((out, grad))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Holds parameters and optimizer state across steps.
pub struct Trainer {
    pub params: PredictorParams,
    pub state: OptimizerState,
    pub cfg: TrainConfig,
}

impl Trainer {
    pub fn new(params: PredictorParams, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let n = params.theta.len();
        Ok(Trainer { params, state: OptimizerState { step: 0, m: vec![0.0; n], v: vec![0.0; n] }, cfg })
    }

    pub fn step(&mut self, batch: &[&Episode]) -> Result<LossBreakdown, TrainError> {
        let (loss, grad) = batch_loss(&self.params, batch, &self.cfg)?;
        let lr = self.cfg.learning_rate;
        self.state.step += 1;
        match self.cfg.optimizer {
            Optimizer::Sgd => {
                for (t, g) in self.params.theta.iter_mut().zip(&grad) {
                    *t -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let k = self.state.step as i32;
                let (c1, c2) = (1.0 - beta1.powi(k), 1.0 - beta2.powi(k));
                let st = &mut self.state;
                for (i, g) in grad.iter().enumerate() {
                    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g;
                    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g * g;
                    let update = lr * (st.m[i] / c1) / ((st.v[i] / c2).sqrt() + eps);
                    self.params.theta[i] -= update;
                }
            }
        }
        Ok(loss)
    }

    /// One pass over `episodes` in a seeded order; returns the mean batch loss.
    pub fn epoch(&mut self, episodes: &[Episode], epoch: usize) -> Result<LossBreakdown, TrainError> {
        if episodes.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..episodes.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);
        let mut mean = LossBreakdown::default();
        let chunks: Vec<&[usize]> = order.chunks(self.cfg.batch_size).collect();
        let n = chunks.len() as f64;
        for chunk in chunks {
            let batch: Vec<&Episode> = chunk.iter().map(|&i| &episodes[i]).collect();
            let l = self.step(&batch)?;
            mean.add_scaled(&l, 1.0 / n);
        }
        Ok(mean)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss_total,loss_align,loss_contrastive,loss_temporal,loss_semantic\n");
        for e in &self.epochs {
            let l = e.loss;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e.epoch, l.total, l.align, l.contrastive, l.temporal, l.semantic
            );
        }
        s
    }
}

/// Trains from `params` for `cfg.epochs` epochs.
pub fn train_from(
    params: PredictorParams,
    episodes: &[Episode],
    cfg: &TrainConfig,
) -> Result<(Trainer, TrainLog), TrainError> {
    if episodes.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut trainer = Trainer::new(params, cfg.clone())?;
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        let loss = trainer.epoch(episodes, epoch)?;
        log::info!("epoch {epoch}: {loss:?}");
        log.epochs.push(EpochLog { epoch, loss });
    }
    Ok((trainer, log))
}

/// Seeded initialization followed by [`train_from`].
pub fn train(
    layout: &Layout,
    episodes: &[Episode],
    cfg: &TrainConfig,
) -> Result<(PredictorParams, TrainLog), TrainError> {
    let f = episodes.first().ok_or(TrainError::EmptyDataset)?.features[0].len();
    let init = PredictorParams::random(layout, f, cfg.seed, cfg.init_scale).with_sigmoid_bias(cfg.init_bias);
    let (trainer, log) = train_from(init, episodes, cfg)?;
    Ok((trainer.params, log))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1, tp, fp, fn_ }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct F1Report {
    pub per_predicate: BTreeMap<String, Prf>,
    /// Mean F1 over predicates that occur in the ground truth.
    pub mean_f1: f64,
}

/// Clip-wise F1 of thresholded predictions against the ground truth.
/// Static facts count once per clip.
pub fn f1_from_dbs(pairs: &[(FactDatabase, &FactDatabase)], threshold: f64) -> F1Report {
    let mut counts: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
    for (pred, truth) in pairs {
        for f in pred.facts() {
            let copies = if f.key.time.is_none() { pred.num_clips() as u64 } else { 1 };
            let actual = truth.fact_id(&f.key).map(|id| truth.facts()[id].prob >= 0.5).unwrap_or(false);
            let predicted = f.prob >= threshold;
            let c = counts.entry(f.key.predicate.clone()).or_default();
            match (predicted, actual) {
                (true, true) => c.0 += copies,
                (true, false) => c.1 += copies,
                (false, true) => c.2 += copies,
                _ => {}
            }
        }
        for f in truth.facts() {
            if f.prob >= 0.5 && pred.fact_id(&f.key).is_none() {
                let copies = if f.key.time.is_none() { truth.num_clips() as u64 } else { 1 };
                counts.entry(f.key.predicate.clone()).or_default().2 += copies;
            }
        }
    }
    let per_predicate: BTreeMap<String, Prf> =
        counts.into_iter().map(|(p, (tp, fp, fn_))| (p, Prf::from_counts(tp, fp, fn_))).collect();
    let supported: Vec<f64> =
        per_predicate.values().filter(|r| r.tp + r.fn_ > 0).map(|r| r.f1).collect();
    let mean_f1 =
        if supported.is_empty() { 0.0 } else { supported.iter().sum::<f64>() / supported.len() as f64 };
    F1Report { per_predicate, mean_f1 }
}

pub fn eval_f1(
    params: &PredictorParams,
    episodes: &[Episode],
    threshold: f64,
) -> Result<F1Report, TrainError> {
    let preds: Vec<FactDatabase> =
        episodes.par_iter().map(|e| predict(params, e)).collect::<Result<_, _>>()?;
    let pairs: Vec<(FactDatabase, &FactDatabase)> =
        preds.into_iter().zip(episodes.iter().map(|e| &e.ground_truth)).collect();
    Ok(f1_from_dbs(&pairs, threshold))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub spec_retrieval_acc: f64,
    pub video_retrieval_acc: f64,
    pub groups: usize,
}

/// Correct rows (spec retrieval) and columns (video retrieval) of a square
/// score matrix `s[video][spec]`; ties count as failures.
pub fn retrieval_counts(s: &[Vec<f64>]) -> (usize, usize) {
    let n = s.len();
    let rows = (0..n).filter(|&i| (0..n).all(|j| j == i || s[i][i] > s[i][j])).count();
    let cols = (0..n).filter(|&j| (0..n).all(|i| i == j || s[j][j] > s[i][j])).count();
    (rows, cols)
}

/// Disjoint seeded groups of `group_size`; leftover episodes are unused.
pub fn retrieval_groups(n: usize, group_size: usize, seed: u64) -> Result<Vec<Vec<usize>>, TrainError> {
    if group_size == 0 || n < group_size {
        return Err(TrainError::TooFewEpisodes { have: n, need: group_size.max(1) });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order.chunks_exact(group_size).map(|c| c.to_vec()).collect())
}

/// Retrieval accuracy over given databases (predicted or ground truth).
pub fn retrieval_from_dbs(
    dbs: &[&FactDatabase],
    specs: &[&Specification],
    group_size: usize,
    seed: u64,
    cfg: &AlignConfig,
) -> Result<RetrievalReport, TrainError> {
    let groups = retrieval_groups(dbs.len(), group_size, seed)?;
    let acfg = AlignConfig { gradients: false, witness_scores: false, ..cfg.clone() };
    let counts: Vec<(usize, usize)> = groups
        .par_iter()
        .map(|g| {
            let mut s = vec![vec![0.0; g.len()]; g.len()];
            for (a, &vi) in g.iter().enumerate() {
                for (b, &sj) in g.iter().enumerate() {
                    s[a][b] = align(dbs[vi], specs[sj], &acfg)?.score;
                }
            }
            Ok(retrieval_counts(&s))
        })
        .collect::<Result<_, CheckError>>()?;
    let total = (groups.len() * group_size) as f64;
    Ok(RetrievalReport {
        spec_retrieval_acc: counts.iter().map(|c| c.0).sum::<usize>() as f64 / total,
        video_retrieval_acc: counts.iter().map(|c| c.1).sum::<usize>() as f64 / total,
        groups: groups.len(),
    })
}

pub fn eval_retrieval(
    params: &PredictorParams,
    episodes: &[Episode],
    group_size: usize,
    seed: u64,
    cfg: &AlignConfig,
) -> Result<RetrievalReport, TrainError> {
    let preds: Vec<FactDatabase> =
        episodes.par_iter().map(|e| predict(params, e)).collect::<Result<_, _>>()?;
    let dbs: Vec<&FactDatabase> = preds.iter().collect();
    let specs: Vec<&Specification> = episodes.iter().map(|e| &e.spec).collect();
    retrieval_from_dbs(&dbs, &specs, group_size, seed, cfg)
}

/// Mean violation probability over episodes and constraints.
pub fn mean_violation(
    params: &PredictorParams,
    episodes: &[Episode],
    constraints: &[Specification],
    cfg: &AlignConfig,
) -> Result<f64, TrainError> {
    if episodes.is_empty() || constraints.is_empty() {
        return Ok(0.0);
    }
    let acfg = AlignConfig { gradients: false, witness_scores: false, ..cfg.clone() };
    let per: Vec<f64> = episodes
        .par_iter()
        .map(|e| {
            let db = predict(params, e)?;
            let mut s = 0.0;
            for c in constraints {
                s += crate::checker::violation_score(&db, c, &acfg)?.score;
            }
            Ok(s)
        })
        .collect::<Result<_, TrainError>>()?;
    Ok(per.iter().sum::<f64>() / (episodes.len() * constraints.len()) as f64)
}

#[derive(Serialize, Deserialize)]
struct HeadRecord {
    #[serde(flatten)]
    spec: HeadSpec,
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    fingerprint: String,
    feature_dim: usize,
    schema: Schema,
    entities: Vec<String>,
    values: Vec<String>,
    heads: Vec<HeadRecord>,
    optimizer: Option<Optimizer>,
    optimizer_state: Option<OptimizerState>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &PredictorParams,
    optimizer: Option<(Optimizer, &OptimizerState)>,
) -> Result<(), TrainError> {
    let heads = params
        .heads
        .iter()
        .enumerate()
        .map(|(h, spec)| {
            let c = spec.outputs.len();
            let start = params.offsets[h];
            HeadRecord {
                spec: spec.clone(),
                rows: spec.width,
                cols: c,
                weights: params.theta[start..start + spec.width * c].to_vec(),
                bias: (0..c).map(|j| params.theta[params.b_index(h, j)]).collect(),
            }
        })
        .collect();
    let file = CheckpointFile {
        fingerprint: params.fingerprint(),
        feature_dim: params.feature_dim,
        schema: params.schema.clone(),
        entities: params.entities.clone(),
        values: params.values.clone(),
        heads,
        optimizer: optimizer.map(|o| o.0),
        optimizer_state: optimizer.map(|o| o.1.clone()),
    };
    let p = path.display().to_string();
    let text = serde_json::to_string(&file).map_err(|source| TrainError::Json { path: p.clone(), source })?;
    fs::write(path, text + "\n").map_err(|source| TrainError::Io { path: p, source })
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(PredictorParams, Option<(Optimizer, OptimizerState)>), TrainError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| TrainError::Io { path: p.clone(), source })?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|source| TrainError::Json { path: p, source })?;
    let layout = Layout {
        schema: file.schema,
        entities: file.entities,
        values: file.values,
        heads: file.heads.iter().map(|h| h.spec.clone()).collect(),
        feature_dim: file.feature_dim,
    };
    let mut params = PredictorParams::zeros(&layout, file.feature_dim);
    if params.fingerprint() != file.fingerprint {
        return Err(TrainError::SchemaMismatch("fingerprint differs".into()));
    }
    for (h, rec) in file.heads.iter().enumerate() {
        let c = rec.spec.outputs.len();
        if rec.rows != rec.spec.width || rec.cols != c || rec.weights.len() != rec.rows * c || rec.bias.len() != c {
            return Err(TrainError::SchemaMismatch(format!("head `{}` has wrong shape", rec.spec.name)));
        }
        let start = params.offsets[h];
        params.theta[start..start + rec.weights.len()].copy_from_slice(&rec.weights);
        for (j, &b) in rec.bias.iter().enumerate() {
            let i = params.b_index(h, j);
            params.theta[i] = b;
        }
    }
    let opt = match (file.optimizer, file.optimizer_state) {
        (Some(o), Some(s)) => Some((o, s)),
        _ => None,
    };
    Ok((params, opt))
}

#[cfg(test)]
mod tests;
