//! Seeded synthetic datasets: MUGEN-like action chains and 20BN-like
//! pre/post-condition episodes with noisy per-clip feature vectors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact_db::{DbError, FactDatabase, FactKey, PredicateDecl, PredicateKind, Schema};
use crate::spec_lang::{
    build_action_chain_spec, build_pre_post_spec, parse_spec, Atom, Formula, SpecError,
    Specification, Term,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    MugenLike,
    Bn20Like,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub regime: Regime,
    pub m: u32,
    #[serde(default = "default_num_actions")]
    pub num_actions: usize,
    #[serde(default = "default_num_entities")]
    pub num_entities: usize,
    /// `None` uses the natural dimension of the regime; a larger value
    /// appends pure-noise coordinates.
    #[serde(default)]
    pub feature_dim: Option<usize>,
    pub feature_noise_sigma: f64,
    pub num_episodes: usize,
}

fn default_num_actions() -> usize {
    6
}

fn default_num_entities() -> usize {
    3
}

impl GenConfig {
    pub fn mugen(seed: u64, num_episodes: usize) -> Self {
        GenConfig {
            seed,
            regime: Regime::MugenLike,
            m: 8,
            num_actions: 6,
            num_entities: 1,
            feature_dim: None,
            feature_noise_sigma: 0.5,
            num_episodes,
        }
    }

    pub fn bn20(seed: u64, num_episodes: usize) -> Self {
        GenConfig {
            seed,
            regime: Regime::Bn20Like,
            m: 8,
            num_actions: 6,
            num_entities: 3,
            feature_dim: None,
            feature_noise_sigma: 0.1,
            num_episodes,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidConfig(msg.to_string()));
        if self.m == 0 || self.num_episodes == 0 || self.num_entities == 0 || self.num_actions == 0
        {
            return bad("all counts must be >= 1");
        }
        if !(self.feature_noise_sigma >= 0.0 && self.feature_noise_sigma.is_finite()) {
            return bad("feature_noise_sigma must be finite and >= 0");
        }
        if self.num_actions > ACTIONS.len() {
            return bad("at most 6 actions are available");
        }
        if self.regime == Regime::Bn20Like {
            if self.num_entities < MAX_TEMPLATE_ARITY {
                return bad("20bn-like episodes need at least 3 entities");
            }
            if self.m < 2 {
                return bad("20bn-like episodes need at least 2 clips");
            }
        }
        let natural = layout(self).feature_dim;
        if matches!(self.feature_dim, Some(f) if f < natural) {
            return Err(SynthError::InvalidConfig(format!(
                "feature_dim must be at least {natural}"
            )));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim.unwrap_or_else(|| layout(self).feature_dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softmax,
    Sigmoid,
}

/// Argument of a head output: an entity of the slot or a fixed constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadArg {
    Slot(usize),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadOutput {
    pub predicate: String,
    pub args: Vec<HeadArg>,
}

/// One entity (or entity tuple) the head is applied to, reading
/// `width` features starting at `offset`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSlot {
    pub entities: Vec<String>,
    pub offset: usize,
}

/// A classification head for one predicate family. The same weights are
/// applied to every slot, like a region classifier over detected objects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub activation: Activation,
    /// Static heads read the clip-averaged feature and emit timeless facts.
    pub is_static: bool,
    pub width: usize,
    pub outputs: Vec<HeadOutput>,
    pub slots: Vec<HeadSlot>,
}

impl HeadSpec {
    pub fn key(&self, slot: usize, out: usize, t: Option<u32>) -> FactKey {
        let o = &self.outputs[out];
        let ents = &self.slots[slot].entities;
        let args: Vec<&str> = o
            .args
            .iter()
            .map(|a| match a {
                HeadArg::Slot(i) => ents[*i].as_str(),
                HeadArg::Const(c) => c.as_str(),
            })
            .collect();
        FactKey::new(&o.predicate, t, &args)
    }
}

/// Everything a predictor needs to turn features into a database.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub schema: Schema,
    pub entities: Vec<String>,
    pub values: Vec<String>,
    pub heads: Vec<HeadSpec>,
    /// Natural feature dimension: one coordinate per fact instantiation.
    pub feature_dim: usize,
}

pub const ACTIONS: [&str; 6] = ["walk", "jump", "kill", "collect", "die", "climb"];
pub const DIRECTIONS: [&str; 4] = ["left", "right", "up", "down"];
const AGENT: &str = "M";

fn valid_pair(action: &str, dir: &str) -> bool {
    !matches!(
        (action, dir),
        ("walk", "up" | "down") | ("climb", "left" | "right") | ("collect", "left" | "right")
    )
}

/// Valid (action, direction) classes in a fixed order.
pub fn mugen_classes(num_actions: usize) -> Vec<(&'static str, &'static str)> {
    ACTIONS[..num_actions]
        .iter()
        .flat_map(|a| DIRECTIONS.iter().filter(|d| valid_pair(a, d)).map(move |d| (*a, *d)))
        .collect()
}

const UNARY: [&str; 5] = ["open", "closed", "deformed", "folded", "upright"];
const BINARY: [&str; 6] = ["on", "touching", "above", "in", "next-to", "behind"];
const STATIC: [&str; 4] = ["is-rigid", "is-bendable", "is-holdable", "is-fluid"];

pub fn mugen_schema(num_actions: usize) -> Schema {
    Schema::new(
        ACTIONS[..num_actions]
            .iter()
            .map(|a| PredicateDecl::new(a, 2, PredicateKind::Evolving))
            .collect(),
    )
    .expect("distinct action names")
}

pub fn bn20_schema() -> Schema {
    let mut decls: Vec<PredicateDecl> =
        UNARY.iter().map(|p| PredicateDecl::new(p, 1, PredicateKind::Evolving)).collect();
    decls.extend(BINARY.iter().map(|p| PredicateDecl::new(p, 2, PredicateKind::Evolving)));
    decls.extend(STATIC.iter().map(|p| PredicateDecl::new(p, 1, PredicateKind::Static)));
    Schema::new(decls).expect("distinct predicate names")
}

fn entity_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("e{i}")).collect()
}

fn family(
    name: &str,
    activation: Activation,
    is_static: bool,
    preds: &[&str],
    slots: Vec<Vec<String>>,
    offset: &mut usize,
) -> HeadSpec {
    let arity = slots.first().map_or(0, Vec::len);
    let outputs = preds
        .iter()
        .map(|p| HeadOutput { predicate: p.to_string(), args: (0..arity).map(HeadArg::Slot).collect() })
        .collect();
    let slots = slots
        .into_iter()
        .map(|entities| {
            let s = HeadSlot { entities, offset: *offset };
            *offset += preds.len();
            s
        })
        .collect();
    HeadSpec { name: name.into(), activation, is_static, width: preds.len(), outputs, slots }
}

pub fn layout(cfg: &GenConfig) -> Layout {
    match cfg.regime {
        Regime::MugenLike => {
            let outputs: Vec<HeadOutput> = mugen_classes(cfg.num_actions)
                .into_iter()
                .map(|(a, d)| HeadOutput {
                    predicate: a.to_string(),
                    args: vec![HeadArg::Slot(0), HeadArg::Const(d.to_string())],
                })
                .collect();
            let feature_dim = outputs.len();
            Layout {
                schema: mugen_schema(cfg.num_actions),
                entities: vec![AGENT.to_string()],
                values: DIRECTIONS.iter().map(|d| d.to_string()).collect(),
                heads: vec![HeadSpec {
                    name: "action".into(),
                    activation: Activation::Softmax,
                    is_static: false,
                    width: cfg.feature_dim.unwrap_or(feature_dim),
                    outputs,
                    slots: vec![HeadSlot { entities: vec![AGENT.to_string()], offset: 0 }],
                }],
                feature_dim,
            }
        }
        Regime::Bn20Like => {
            let ents = entity_names(cfg.num_entities);
            let singles: Vec<Vec<String>> = ents.iter().map(|e| vec![e.clone()]).collect();
            let mut pairs = Vec::new();
            for a in &ents {
                for b in &ents {
                    if a != b {
                        pairs.push(vec![a.clone(), b.clone()]);
                    }
                }
            }
            let mut offset = 0;
            let heads = vec![
                family("attribute", Activation::Sigmoid, false, &UNARY, singles.clone(), &mut offset),
                family("relation", Activation::Sigmoid, false, &BINARY, pairs, &mut offset),
                family("static", Activation::Sigmoid, true, &STATIC, singles, &mut offset),
            ];
            Layout {
                schema: bn20_schema(),
                entities: ents,
                values: vec![],
                heads,
                feature_dim: offset,
            }
        }
    }
}

/// Integrity constraints for the 20BN-like regime; variables are universal.
pub fn bn20_constraints() -> Vec<Specification> {
    let schema = bn20_schema();
    [
        "forall x. G !(open(x) & closed(x))",
        "forall x. G !(is-rigid(x) & is-bendable(x))",
        "forall x. G !(is-rigid(x) & is-fluid(x))",
        "forall x, y. G !(on(x,y) & in(x,y))",
        "forall x, y. G !(above(x,y) & behind(x,y))",
        "forall x. G !(folded(x) & upright(x))",
        "forall x. G !(deformed(x) & upright(x))",
        "forall x. G !(is-rigid(x) & deformed(x))",
        "forall x. G !(is-fluid(x) & is-holdable(x))",
        "forall x, y. G !(touching(x,y) & in(x,y))",
    ]
    .iter()
    .map(|s| parse_spec(s, &schema).expect("built-in constraint parses"))
    .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: String,
    pub num_clips: u32,
    pub ground_truth: FactDatabase,
    /// `features[t - 1]` is the vector of clip `t`.
    pub features: Vec<Vec<f64>>,
    pub spec: Specification,
    pub witness_truth: BTreeMap<String, u32>,
}

fn episode_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn noisy(rng: &mut ChaCha8Rng, clean: Vec<f64>, dim: usize, sigma: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut v = clean;
    v.resize(dim, 0.0);
    for x in &mut v {
        *x += normal.sample(rng);
    }
    v
}

fn episode_id(i: usize) -> String {
    format!("ep{i:05}")
}

pub fn gen_mugen_like(cfg: &GenConfig) -> Result<Vec<Episode>, SynthError> {
    if cfg.regime != Regime::MugenLike {
        return Err(SynthError::InvalidConfig("regime must be mugen_like".into()));
    }
    cfg.validate()?;
    let lay = layout(cfg);
    (0..cfg.num_episodes)
        .into_par_iter()
        .map(|i| mugen_episode(cfg, &lay, i))
        .collect()
}

fn mugen_episode(cfg: &GenConfig, lay: &Layout, index: usize) -> Result<Episode, SynthError> {
    let mut rng = episode_rng(cfg.seed, index);
    let classes = mugen_classes(cfg.num_actions);
    let m = cfg.m;
    let n = rng.gen_range(1..=3usize.min(m as usize));
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    while chosen.len() < n {
        let c = rng.gen_range(0..classes.len());
        if chosen.last() != Some(&c) || classes.len() == 1 {
            chosen.push(c);
        }
    }
    let mut cuts: Vec<u32> = (2..=m).collect::<Vec<_>>();
    cuts.shuffle(&mut rng);
    let mut starts: Vec<u32> = cuts[..n - 1].to_vec();
    starts.push(1);
    starts.sort_unstable();

    let segment_of = |t: u32| starts.iter().rposition(|&s| s <= t).expect("starts at 1");
    let mut facts = Vec::new();
    let mut features = Vec::with_capacity(m as usize);
    for t in 1..=m {
        let c = chosen[segment_of(t)];
        let (a, d) = classes[c];
        facts.push((FactKey::new(a, Some(t), &[AGENT, d]), 1.0));
        let mut onehot = vec![0.0; classes.len()];
        onehot[c] = 1.0;
        features.push(noisy(&mut rng, onehot, cfg.feature_dim(), cfg.feature_noise_sigma));
    }
    let truth = FactDatabase::from_clip_scores(
        lay.schema.clone(),
        lay.entities.clone(),
        lay.values.clone(),
        m,
        facts,
    )?;
    let atoms = chosen
        .iter()
        .map(|&c| {
            let (a, d) = classes[c];
            Atom::ground(a, &[AGENT, d])
        })
        .collect();
    let spec = build_action_chain_spec(atoms)?;
    let witness_truth =
        starts.iter().enumerate().map(|(i, &s)| (format!("act_{}", i + 1), s)).collect();
    Ok(Episode {
        id: episode_id(index),
        num_clips: m,
        ground_truth: truth,
        features,
        spec,
        witness_truth,
    })
}

/// `(negated, predicate, role indices)`
type Lit = (bool, &'static str, &'static [usize]);

struct Template {
    name: &'static str,
    arity: usize,
    pre: &'static [Lit],
    post: &'static [Lit],
}

const MAX_TEMPLATE_ARITY: usize = 3;

const TEMPLATES: [Template; 13] = [
    Template {
        name: "push_off",
        arity: 3,
        pre: &[(false, "on", &[0, 1]), (false, "touching", &[2, 0])],
        post: &[(false, "next-to", &[0, 1]), (true, "on", &[0, 1])],
    },
    Template {
        name: "put_in",
        arity: 2,
        pre: &[(false, "is-holdable", &[0]), (false, "next-to", &[0, 1])],
        post: &[(false, "in", &[0, 1]), (true, "next-to", &[0, 1])],
    },
    Template {
        name: "take_out",
        arity: 2,
        pre: &[(false, "is-holdable", &[0]), (false, "in", &[0, 1])],
        post: &[(false, "next-to", &[0, 1]), (true, "in", &[0, 1])],
    },
    Template {
        name: "open",
        arity: 1,
        pre: &[(false, "is-rigid", &[0]), (false, "closed", &[0])],
        post: &[(false, "open", &[0]), (true, "closed", &[0])],
    },
    Template {
        name: "close",
        arity: 1,
        pre: &[(false, "is-rigid", &[0]), (false, "open", &[0])],
        post: &[(false, "closed", &[0]), (true, "open", &[0])],
    },
    Template {
        name: "fold",
        arity: 1,
        pre: &[(false, "is-bendable", &[0]), (false, "upright", &[0])],
        post: &[(false, "folded", &[0]), (true, "upright", &[0])],
    },
    Template {
        name: "unfold",
        arity: 1,
        pre: &[(false, "is-bendable", &[0]), (false, "folded", &[0])],
        post: &[(false, "upright", &[0]), (true, "folded", &[0])],
    },
    Template {
        name: "squeeze",
        arity: 1,
        pre: &[(false, "is-bendable", &[0]), (false, "upright", &[0])],
        post: &[(false, "deformed", &[0]), (true, "upright", &[0])],
    },
    Template {
        name: "put_behind",
        arity: 2,
        pre: &[(false, "is-holdable", &[0]), (false, "above", &[0, 1])],
        post: &[(false, "behind", &[0, 1]), (true, "above", &[0, 1])],
    },
    Template {
        name: "move_beside",
        arity: 2,
        pre: &[(false, "behind", &[0, 1])],
        post: &[(false, "next-to", &[0, 1]), (true, "behind", &[0, 1])],
    },
    Template {
        name: "put_on",
        arity: 2,
        pre: &[(false, "touching", &[0, 1])],
        post: &[(false, "on", &[0, 1]), (false, "above", &[0, 1])],
    },
    Template {
        name: "lift",
        arity: 2,
        pre: &[(false, "on", &[0, 1]), (false, "touching", &[0, 1])],
        post: &[(false, "above", &[0, 1]), (true, "touching", &[0, 1])],
    },
    Template {
        name: "pour",
        arity: 3,
        pre: &[(false, "is-fluid", &[0]), (false, "in", &[0, 1])],
        post: &[(false, "on", &[0, 2]), (true, "in", &[0, 1])],
    },
];

pub fn template_names() -> Vec<&'static str> {
    TEMPLATES.iter().map(|t| t.name).collect()
}

const ROLE_VARS: [&str; MAX_TEMPLATE_ARITY] = ["v1", "v2", "v3"];

fn condition(lits: &[Lit]) -> Formula {
    let mut parts = lits.iter().map(|(neg, p, roles)| {
        let args = roles.iter().map(|&r| Term::var(ROLE_VARS[r])).collect();
        let a = Formula::atom(Atom::new(*p, args));
        if *neg {
            Formula::not(a)
        } else {
            a
        }
    });
    let first = parts.next().expect("nonempty condition");
    parts.fold(first, Formula::and)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Material {
    Rigid,
    Bendable,
    Fluid,
}

pub fn gen_20bn_like(cfg: &GenConfig) -> Result<Vec<Episode>, SynthError> {
    if cfg.regime != Regime::Bn20Like {
        return Err(SynthError::InvalidConfig("regime must be bn20_like".into()));
    }
    cfg.validate()?;
    let lay = layout(cfg);
    (0..cfg.num_episodes)
        .into_par_iter()
        .map(|i| bn20_episode(cfg, &lay, i))
        .collect()
}

fn bn20_episode(cfg: &GenConfig, lay: &Layout, index: usize) -> Result<Episode, SynthError> {
    let mut rng = episode_rng(cfg.seed, index);
    let tpl = &TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
    let mut order: Vec<usize> = (0..cfg.num_entities).collect();
    order.shuffle(&mut rng);
    let roles = &order[..tpl.arity];

    let mut material: Vec<Material> = (0..cfg.num_entities)
        .map(|_| [Material::Rigid, Material::Bendable, Material::Fluid][rng.gen_range(0..3)])
        .collect();
    let mut holdable: Vec<bool> = (0..cfg.num_entities).map(|_| rng.gen_bool(0.5)).collect();
    for (_, p, rs) in tpl.pre.iter().chain(tpl.post) {
        let e = roles[rs[0]];
        match *p {
            "is-rigid" => material[e] = Material::Rigid,
            "is-bendable" => material[e] = Material::Bendable,
            "is-fluid" => material[e] = Material::Fluid,
            "is-holdable" => {
                holdable[e] = true;
                if material[e] == Material::Fluid {
                    material[e] = Material::Rigid;
                }
            }
            _ => {}
        }
    }
    for e in 0..cfg.num_entities {
        if material[e] == Material::Fluid {
            holdable[e] = false;
        }
    }

    let m = cfg.m;
    let t_pre = rng.gen_range(1..m);
    let t_post = rng.gen_range(t_pre + 1..=m);

    let ents = &lay.entities;
    let mut truth: BTreeMap<FactKey, f64> = BTreeMap::new();
    for e in 0..cfg.num_entities {
        let name = ents[e].as_str();
        let stat = match material[e] {
            Material::Rigid => "is-rigid",
            Material::Bendable => "is-bendable",
            Material::Fluid => "is-fluid",
        };
        truth.insert(FactKey::new(stat, None, &[name]), 1.0);
        if holdable[e] {
            truth.insert(FactKey::new("is-holdable", None, &[name]), 1.0);
        }
    }
    let mut hold = |lits: &[Lit], clips: std::ops::RangeInclusive<u32>| {
        for (neg, p, rs) in lits {
            if *neg || STATIC.contains(p) {
                continue;
            }
            let args: Vec<&str> = rs.iter().map(|&r| ents[roles[r]].as_str()).collect();
            for t in clips.clone() {
                truth.insert(FactKey::new(p, Some(t), &args), 1.0);
            }
        }
    };
    hold(tpl.pre, 1..=t_pre);
    hold(tpl.post, t_post..=m);

    let dim = cfg.feature_dim();
    let mut features = Vec::with_capacity(m as usize);
    for t in 1..=m {
        let mut clean = vec![0.0; lay.feature_dim];
        for h in &lay.heads {
            let time = if h.is_static { None } else { Some(t) };
            for (s, slot) in h.slots.iter().enumerate() {
                for j in 0..h.outputs.len() {
                    if truth.contains_key(&h.key(s, j, time)) {
                        clean[slot.offset + j] = 1.0;
                    }
                }
            }
        }
        features.push(noisy(&mut rng, clean, dim, cfg.feature_noise_sigma));
    }

    let truth = FactDatabase::from_clip_scores(
        lay.schema.clone(),
        lay.entities.clone(),
        lay.values.clone(),
        m,
        truth,
    )?;
    let vars = ROLE_VARS[..tpl.arity].iter().map(|v| v.to_string()).collect();
    let spec = build_pre_post_spec(condition(tpl.pre), condition(tpl.post), vars)?;
    let witness_truth = BTreeMap::from([("pre".to_string(), t_pre), ("post".to_string(), t_post)]);
    Ok(Episode {
        id: episode_id(index),
        num_clips: m,
        ground_truth: truth,
        features,
        spec,
        witness_truth,
    })
}

pub fn generate(cfg: &GenConfig) -> Result<Vec<Episode>, SynthError> {
    match cfg.regime {
        Regime::MugenLike => gen_mugen_like(cfg),
        Regime::Bn20Like => gen_20bn_like(cfg),
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: GenConfig,
    episodes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EpisodeFile {
    id: String,
    features: Vec<Vec<f64>>,
    truth_db: FactDatabase,
    spec: String,
    witness_truth: BTreeMap<String, u32>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> SynthError + '_ {
    move |source| SynthError::Json { path: path.display().to_string(), source }
}

/// Writes `manifest.json` and `episodes/<id>.json` under `dir`.
pub fn write_dataset(dir: &Path, cfg: &GenConfig, episodes: &[Episode]) -> Result<(), SynthError> {
    let ep_dir = dir.join("episodes");
    fs::create_dir_all(&ep_dir).map_err(io_err(&ep_dir))?;
    let manifest = Manifest {
        config: cfg.clone(),
        episodes: episodes.iter().map(|e| e.id.clone()).collect(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(json_err(&path))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    for e in episodes {
        let file = EpisodeFile {
            id: e.id.clone(),
            features: e.features.clone(),
            truth_db: e.ground_truth.clone(),
            spec: e.spec.to_string(),
            witness_truth: e.witness_truth.clone(),
        };
        let path = ep_dir.join(format!("{}.json", e.id));
        let text = serde_json::to_string(&file).map_err(json_err(&path))?;
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<(GenConfig, Vec<Episode>), SynthError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(json_err(&path))?;
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for id in &manifest.episodes {
        let path = dir.join("episodes").join(format!("{id}.json"));
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let f: EpisodeFile = serde_json::from_str(&text).map_err(json_err(&path))?;
        let spec = parse_spec(&f.spec, f.truth_db.schema())?;
        episodes.push(Episode {
            id: f.id,
            num_clips: f.truth_db.num_clips(),
            ground_truth: f.truth_db,
            features: f.features,
            spec,
            witness_truth: f.witness_truth,
        });
    }
    Ok((manifest.config, episodes))
}
