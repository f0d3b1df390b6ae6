//! Probabilistic relational database for a spatio-temporal scene graph.
//!
//! Facts are either static (`is-bendable(e)`, true at every clip) or evolving
//! (`walk(3, M, right)`, tied to one clip). Absent tuples have probability 0.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec_lang::{Atom, Specification, Term};

pub const DEFAULT_GROUNDING_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("clip {time} is outside 1..={num_clips}")]
    TimeOutOfRange { time: u32, num_clips: u32 },
    #[error("duplicate fact {0}")]
    DuplicateKey(String),
    #[error("probability {prob} of {key} is outside [0, 1]")]
    ProbOutOfRange { key: String, prob: f64 },
    #[error("{key}: expected {expected} arguments, found {found}")]
    ArityMismatch { key: String, expected: usize, found: usize },
    #[error("{0}: static facts take no time and evolving facts require one")]
    TimeKindMismatch(String),
    #[error("constant `{0}` is neither a registered entity nor a value")]
    UnknownConstant(String),
    #[error("duplicate predicate declaration `{0}`")]
    DuplicatePredicate(String),
    #[error("predicate `{0}` must have arity >= 1")]
    ZeroArity(String),
    #[error("database needs at least one clip")]
    NoClips,
    #[error("atom {0} is not ground")]
    NotGround(String),
    #[error("{count} groundings exceed the cap of {cap}")]
    GroundingExplosion { count: f64, cap: usize },
    #[error("malformed database JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateKind {
    Static,
    Evolving,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

impl PredicateDecl {
    pub fn new(name: &str, arity: usize, kind: PredicateKind) -> Self {
        Self { name: name.to_string(), arity, kind }
    }
}

/// Declared predicates. Serialized as a plain list.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<PredicateDecl>", into = "Vec<PredicateDecl>")]
pub struct Schema {
    decls: Vec<PredicateDecl>,
    by_name: HashMap<String, usize>,
}

impl Schema {
    pub fn new(decls: Vec<PredicateDecl>) -> Result<Self, DbError> {
        let mut by_name = HashMap::new();
        for (i, d) in decls.iter().enumerate() {
            if d.arity == 0 {
                return Err(DbError::ZeroArity(d.name.clone()));
            }
            if by_name.insert(d.name.clone(), i).is_some() {
                return Err(DbError::DuplicatePredicate(d.name.clone()));
            }
        }
        Ok(Self { decls, by_name })
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDecl> {
        self.by_name.get(name).map(|&i| &self.decls[i])
    }

    pub fn predicates(&self) -> &[PredicateDecl] {
        &self.decls
    }
}

impl TryFrom<Vec<PredicateDecl>> for Schema {
    type Error = DbError;
    fn try_from(v: Vec<PredicateDecl>) -> Result<Self, DbError> {
        Schema::new(v)
    }
}

impl From<Schema> for Vec<PredicateDecl> {
    fn from(s: Schema) -> Self {
        s.decls
    }
}

/// `(predicate, time, args)`; ordered lexicographically in that order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactKey {
    pub predicate: String,
    pub time: Option<u32>,
    pub args: Vec<String>,
}

impl FactKey {
    pub fn new(predicate: &str, time: Option<u32>, args: &[&str]) -> Self {
        Self {
            predicate: predicate.to_string(),
            time,
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn normalized(mut self) -> Self {
        self.predicate = self.predicate.trim().to_string();
        for a in &mut self.args {
            *a = a.trim().to_string();
        }
        self
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        let mut first = true;
        if let Some(t) = self.time {
            write!(f, "{t}")?;
            first = false;
        }
        for a in &self.args {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
            first = false;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub id: usize,
    pub key: FactKey,
    pub prob: f64,
}

/// Assignment of quantified variables to entities, in quantifier order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grounding(pub Vec<String>);

#[derive(Serialize, Deserialize)]
struct RawFact {
    prob: f64,
    pred: String,
    time: Option<u32>,
    args: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawDb {
    num_clips: u32,
    entities: Vec<String>,
    values: Vec<String>,
    schema: Schema,
    facts: Vec<RawFact>,
}

/// Immutable after construction; fact ids are dense `0..len`.
#[derive(Clone, Debug)]
pub struct FactDatabase {
    schema: Schema,
    num_clips: u32,
    entities: Vec<String>,
    values: Vec<String>,
    facts: Vec<Fact>,
    index: HashMap<FactKey, usize>,
    by_pred_time: HashMap<(String, Option<u32>), Vec<usize>>,
}

impl PartialEq for FactDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.num_clips == other.num_clips
            && self.entities == other.entities
            && self.values == other.values
            && self.facts == other.facts
    }
}

impl FactDatabase {
    /// Builds a database keeping the given fact order as id order.
    pub fn new(
        schema: Schema,
        entities: Vec<String>,
        values: Vec<String>,
        num_clips: u32,
        facts: Vec<(FactKey, f64)>,
    ) -> Result<Self, DbError> {
        if num_clips == 0 {
            return Err(DbError::NoClips);
        }
        let entities: Vec<String> =
            entities.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let values: Vec<String> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut db = FactDatabase {
            schema,
            num_clips,
            entities,
            values,
            facts: Vec::with_capacity(facts.len()),
            index: HashMap::with_capacity(facts.len()),
            by_pred_time: HashMap::new(),
        };
        for (key, prob) in facts {
            let key = key.normalized();
            db.validate(&key, prob)?;
            let id = db.facts.len();
            if db.index.insert(key.clone(), id).is_some() {
                return Err(DbError::DuplicateKey(key.to_string()));
            }
            db.by_pred_time
                .entry((key.predicate.clone(), key.time))
                .or_default()
                .push(id);
            db.facts.push(Fact { id, key, prob });
        }
        Ok(db)
    }

    fn validate(&self, key: &FactKey, prob: f64) -> Result<(), DbError> {
        let decl = self
            .schema
            .get(&key.predicate)
            .ok_or_else(|| DbError::UnknownPredicate(key.predicate.clone()))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(DbError::ProbOutOfRange { key: key.to_string(), prob });
        }
        if key.args.len() != decl.arity {
            return Err(DbError::ArityMismatch {
                key: key.to_string(),
                expected: decl.arity,
                found: key.args.len(),
            });
        }
        match (decl.kind, key.time) {
            (PredicateKind::Static, None) => {}
            (PredicateKind::Evolving, Some(t)) => self.check_time(t)?,
            _ => return Err(DbError::TimeKindMismatch(key.to_string())),
        }
        for a in &key.args {
            if !self.is_constant(a) {
                return Err(DbError::UnknownConstant(a.clone()));
            }
        }
        Ok(())
    }

    fn check_time(&self, t: u32) -> Result<(), DbError> {
        if t == 0 || t > self.num_clips {
            Err(DbError::TimeOutOfRange { time: t, num_clips: self.num_clips })
        } else {
            Ok(())
        }
    }

    fn is_constant(&self, s: &str) -> bool {
        self.entities.binary_search_by(|e| e.as_str().cmp(s)).is_ok()
            || self.values.binary_search_by(|e| e.as_str().cmp(s)).is_ok()
    }

    /// Builds a database from classifier outputs; ids follow the
    /// lexicographic `(predicate, time, args)` order.
    pub fn from_clip_scores(
        schema: Schema,
        entities: Vec<String>,
        values: Vec<String>,
        num_clips: u32,
        scores: impl IntoIterator<Item = (FactKey, f64)>,
    ) -> Result<Self, DbError> {
        let mut facts: Vec<(FactKey, f64)> =
            scores.into_iter().map(|(k, p)| (k.normalized(), p)).collect();
        facts.sort_by(|a, b| a.0.cmp(&b.0));
        for w in facts.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DbError::DuplicateKey(w[0].0.to_string()));
            }
        }
        Self::new(schema, entities, values, num_clips, facts)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_clips(&self) -> u32 {
        self.num_clips
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.facts.iter().map(|f| f.prob).collect()
    }

    pub fn fact_id(&self, key: &FactKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Same facts with replaced probabilities.
    pub fn with_probs(&self, probs: &[f64]) -> Result<Self, DbError> {
        assert_eq!(probs.len(), self.facts.len(), "probability vector length");
        let mut out = self.clone();
        for (f, &p) in out.facts.iter_mut().zip(probs) {
            if !(0.0..=1.0).contains(&p) {
                return Err(DbError::ProbOutOfRange { key: f.key.to_string(), prob: p });
            }
            f.prob = p;
        }
        Ok(out)
    }

    /// The fact matching a ground atom at clip `t` (static facts match every clip).
    pub fn lookup(&self, atom: &Atom, t: u32) -> Result<Option<(usize, f64)>, DbError> {
        let decl = self
            .schema
            .get(&atom.predicate)
            .ok_or_else(|| DbError::UnknownPredicate(atom.predicate.clone()))?;
        self.check_time(t)?;
        let mut args = Vec::with_capacity(atom.args.len());
        for a in &atom.args {
            match a {
                Term::Const(c) => args.push(c.clone()),
                _ => return Err(DbError::NotGround(atom.to_string())),
            }
        }
        let time = match decl.kind {
            PredicateKind::Static => None,
            PredicateKind::Evolving => Some(t),
        };
        let key = FactKey { predicate: atom.predicate.clone(), time, args };
        Ok(self.index.get(&key).map(|&id| (id, self.facts[id].prob)))
    }

    /// Ids of facts at clip `t` whose arguments match `pattern`
    /// (`None` is a wildcard). Unknown predicates match nothing.
    pub fn matching(&self, predicate: &str, t: u32, pattern: &[Option<&str>]) -> Vec<usize> {
        let Some(decl) = self.schema.get(predicate) else {
            return Vec::new();
        };
        let time = match decl.kind {
            PredicateKind::Static => None,
            PredicateKind::Evolving => Some(t),
        };
        if pattern.iter().all(Option::is_some) {
            let key = FactKey {
                predicate: predicate.to_string(),
                time,
                args: pattern.iter().map(|a| a.unwrap_or_default().to_string()).collect(),
            };
            return self.index.get(&key).map(|&id| vec![id]).unwrap_or_default();
        }
        let Some(ids) = self.by_pred_time.get(&(predicate.to_string(), time)) else {
            return Vec::new();
        };
        ids.iter()
            .copied()
            .filter(|&id| {
                let args = &self.facts[id].key.args;
                args.len() == pattern.len()
                    && args.iter().zip(pattern).all(|(a, p)| p.is_none_or(|p| p == a))
            })
            .collect()
    }

    /// All assignments of the spec's variables to entities, first variable
    /// most significant.
    pub fn groundings(&self, spec: &Specification, cap: usize) -> Result<Vec<Grounding>, DbError> {
        let k = spec.vars.len();
        let n = self.entities.len();
        let count = (n as f64).powi(k as i32);
        if count > cap as f64 {
            return Err(DbError::GroundingExplosion { count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut idx = vec![0usize; k];
        if k > 0 && n == 0 {
            return Ok(out);
        }
        loop {
            out.push(Grounding(idx.iter().map(|&i| self.entities[i].clone()).collect()));
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("database serializes")
    }

    fn to_raw(&self) -> RawDb {
        RawDb {
            num_clips: self.num_clips,
            entities: self.entities.clone(),
            values: self.values.clone(),
            schema: self.schema.clone(),
            facts: self
                .facts
                .iter()
                .map(|f| RawFact {
                    prob: f.prob,
                    pred: f.key.predicate.clone(),
                    time: f.key.time,
                    args: f.key.args.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DbError> {
        let raw: RawDb = serde_json::from_str(text).map_err(|e| DbError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawDb) -> Result<Self, DbError> {
        let facts = raw
            .facts
            .into_iter()
            .map(|f| (FactKey { predicate: f.pred, time: f.time, args: f.args }, f.prob))
            .collect();
        Self::new(raw.schema, raw.entities, raw.values, raw.num_clips, facts)
    }
}

impl Serialize for FactDatabase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactDatabase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawDb::deserialize(d)?;
        Self::from_raw(raw).map_err(serde::de::Error::custom)
    }
}
