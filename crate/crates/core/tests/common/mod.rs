//! Random small instances shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use stalign::checker::Mode;
use stalign::fact_db::{FactDatabase, FactKey, PredicateDecl, PredicateKind, Schema};
use stalign::spec_lang::{Atom, Formula, Specification, Term};

pub struct Instance {
    pub db: FactDatabase,
    pub spec: Specification,
    pub mode: Mode,
}

pub fn schema() -> Schema {
    Schema::new(vec![
        PredicateDecl::new("p", 1, PredicateKind::Evolving),
        PredicateDecl::new("q", 1, PredicateKind::Evolving),
        PredicateDecl::new("r", 2, PredicateKind::Evolving),
        PredicateDecl::new("s", 1, PredicateKind::Static),
    ])
    .unwrap()
}

const ENTITIES: [&str; 2] = ["a", "b"];

fn random_prob(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..10) {
        0 => 1.0,
        1 => 0.0,
        _ => rng.gen_range(0.05..0.95),
    }
}

pub fn random_db(rng: &mut impl Rng, m: u32, max_facts: usize) -> FactDatabase {
    random_db_favoring(rng, m, max_facts, &[])
}

/// Like [`random_db`], but facts of `preferred` predicates are drawn first.
pub fn random_db_favoring(
    rng: &mut impl Rng,
    m: u32,
    max_facts: usize,
    preferred: &[&str],
) -> FactDatabase {
    let mut keys = Vec::new();
    for t in 1..=m {
        for e in ENTITIES {
            keys.push(FactKey::new("p", Some(t), &[e]));
            keys.push(FactKey::new("q", Some(t), &[e]));
            for e2 in ENTITIES {
                keys.push(FactKey::new("r", Some(t), &[e, e2]));
            }
        }
    }
    for e in ENTITIES {
        keys.push(FactKey::new("s", None, &[e]));
    }
    keys.shuffle(rng);
    keys.sort_by_key(|k| !preferred.contains(&k.predicate.as_str()));
    let n = rng.gen_range(1..=max_facts.min(keys.len()));
    let facts: Vec<(FactKey, f64)> =
        keys.into_iter().take(n).map(|k| (k, random_prob(rng))).collect();
    let entities = ENTITIES.iter().map(|s| s.to_string()).collect();
    FactDatabase::from_clip_scores(schema(), entities, vec![], m, facts).unwrap()
}

fn random_term(rng: &mut impl Rng, quantified: bool) -> Term {
    match rng.gen_range(0..4) {
        0 if quantified => Term::var("x"),
        0 | 1 => Term::constant("a"),
        2 => Term::constant("b"),
        _ => Term::Wildcard,
    }
}

fn random_atom(rng: &mut impl Rng, quantified: bool) -> Formula {
    let atom = match rng.gen_range(0..4) {
        0 => Atom::new("p", vec![random_term(rng, quantified)]),
        1 => Atom::new("q", vec![random_term(rng, quantified)]),
        2 => Atom::new("r", vec![random_term(rng, quantified), random_term(rng, quantified)]),
        _ => Atom::new("s", vec![random_term(rng, quantified)]),
    };
    Formula::atom(atom)
}

/// A formula of depth at most `depth` (an atom has depth 1).
/// Interval formulas use only operators the interval mode accepts after NNF.
fn random_formula(rng: &mut impl Rng, depth: usize, quantified: bool, mode: Mode) -> Formula {
    if depth <= 1 || rng.gen_bool(0.25) {
        let a = random_atom(rng, quantified);
        return if rng.gen_bool(0.3) { Formula::not(a) } else { a };
    }
    let sub = |rng: &mut _| random_formula(rng, depth - 1, quantified, mode);
    let choice = match mode {
        Mode::Suffix => rng.gen_range(0..9),
        Mode::Interval => [1, 2, 3, 4, 5, 8][rng.gen_range(0..6)],
    };
    match choice {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::always(sub(rng)),
        4 => Formula::finally(sub(rng)),
        5 => Formula::until(sub(rng), sub(rng)),
        6 => Formula::next(sub(rng)),
        7 => Formula::not(Formula::until(sub(rng), sub(rng))),
        _ => Formula::and(sub(rng), Formula::finally(sub(rng))),
    }
}

fn label_some(f: &mut Formula, rng: &mut impl Rng, counter: &mut usize) {
    if rng.gen_bool(0.2) {
        *counter += 1;
        f.label = Some(format!("w{counter}").as_str().into());
    }
    match &mut f.node {
        stalign::spec_lang::Node::Atom(_) => {}
        stalign::spec_lang::Node::Not(a)
        | stalign::spec_lang::Node::Next(a)
        | stalign::spec_lang::Node::WeakNext(a)
        | stalign::spec_lang::Node::Always(a)
        | stalign::spec_lang::Node::Finally(a) => label_some(a, rng, counter),
        stalign::spec_lang::Node::And(a, b)
        | stalign::spec_lang::Node::Or(a, b)
        | stalign::spec_lang::Node::Until(a, b)
        | stalign::spec_lang::Node::Release(a, b) => {
            label_some(a, rng, counter);
            label_some(b, rng, counter);
        }
    }
}

pub fn random_spec(rng: &mut impl Rng, depth: usize, mode: Mode) -> Specification {
    let quantified = rng.gen_bool(0.4);
    let mut body = random_formula(rng, depth, quantified, mode);
    label_some(&mut body, rng, &mut 0);
    let vars = if quantified && body.atoms().iter().any(|a| a.vars().next().is_some()) {
        vec!["x".to_string()]
    } else {
        vec![]
    };
    Specification::new(vars, body).unwrap()
}

/// m <= 4, at most 8 facts, depth <= 3.
pub fn random_instance(rng: &mut impl Rng, mode: Mode) -> Instance {
    let m = rng.gen_range(1..=4);
    let spec = random_spec(rng, 3, mode);
    let db = random_db_favoring(rng, m, 8, &spec.predicates());
    Instance { db, spec, mode }
}
