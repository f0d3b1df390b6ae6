use super::*;
use crate::fact_db::{FactKey, PredicateDecl, PredicateKind, Schema};
use crate::oracle;
use crate::spec_lang::parse_spec;

fn mugen_schema() -> Schema {
    Schema::new(vec![
        PredicateDecl::new("climb", 2, PredicateKind::Evolving),
        PredicateDecl::new("walk", 2, PredicateKind::Evolving),
    ])
    .unwrap()
}

/// `trace[t]` is the action at clip `t + 1` ("c" or "w"), probability 1.
fn trace_db(trace: &[&str]) -> FactDatabase {
    let facts = trace.iter().enumerate().map(|(i, a)| {
        let (pred, dir) = if *a == "c" { ("climb", "up") } else { ("walk", "right") };
        (FactKey::new(pred, Some(i as u32 + 1), &["M", dir]), 1.0)
    });
    FactDatabase::from_clip_scores(
        mugen_schema(),
        vec!["M".into()],
        vec!["up".into(), "right".into()],
        trace.len() as u32,
        facts,
    )
    .unwrap()
}

fn climb_walk() -> Specification {
    parse_spec("climb(M,_) U walk(M,right)", &mugen_schema()).unwrap()
}

fn fixture_072() -> FactDatabase {
    FactDatabase::from_clip_scores(
        mugen_schema(),
        vec!["M".into()],
        vec!["up".into(), "right".into()],
        2,
        vec![
            (FactKey::new("climb", Some(1), &["M", "up"]), 0.9),
            (FactKey::new("walk", Some(2), &["M", "right"]), 0.8),
        ],
    )
    .unwrap()
}

#[test]
fn until_on_deterministic_traces() {
    let spec = climb_walk();
    let yes = trace_db(&["c", "c", "w", "w"]);
    let no = trace_db(&["c", "c", "c", "c"]);
    assert_eq!(align(&yes, &spec, &AlignConfig::default()).unwrap().score, 1.0);
    assert_eq!(align(&no, &spec, &AlignConfig::default()).unwrap().score, 0.0);
    assert!(check_bool(&yes, &spec, Mode::Suffix).unwrap());
    assert!(!check_bool(&no, &spec, Mode::Suffix).unwrap());
    assert!(check_bool(&trace_db(&["w"]), &spec, Mode::Suffix).unwrap());
}

#[test]
fn probabilistic_until() {
    let db = fixture_072();
    let r = align(&db, &climb_walk(), &AlignConfig::default()).unwrap();
    let exact = oracle::exact_align(&db, &climb_walk(), Mode::Suffix).unwrap();
    // hand enumeration: only worlds with climb@1 and walk@2 both true
    assert!((exact - 0.9 * 0.8).abs() < 1e-12);
    assert!((r.score - exact).abs() < 1e-9);
    let climb = db.fact_id(&FactKey::new("climb", Some(1), &["M", "up"])).unwrap();
    let walk = db.fact_id(&FactKey::new("walk", Some(2), &["M", "right"])).unwrap();
    for (f, expected) in [(climb, 0.8), (walk, 0.9)] {
        let fd = oracle::fd_grad(&db, &climb_walk(), Mode::Suffix, f, 1e-5).unwrap();
        assert!((fd - expected).abs() < 1e-6);
        assert!((r.grad[&f] - fd).abs() < 1e-6);
    }
}

#[test]
fn non_deterministic_trace_rejected() {
    let err = check_bool(&fixture_072(), &climb_walk(), Mode::Suffix).unwrap_err();
    assert!(matches!(err, CheckError::NonDeterministicDatabase { .. }));
}

#[test]
fn interval_examples() {
    let spec = climb_walk();
    let cfg = AlignConfig::default();
    let r = align_interval(&trace_db(&["c", "c", "w", "w"]), &spec, &cfg).unwrap();
    assert_eq!(r.score, 1.0);
    let r = align_interval(&trace_db(&["c", "w", "c"]), &spec, &cfg).unwrap();
    assert_eq!(r.score, 0.0);
    let atom = parse_spec("climb(M,up)", &mugen_schema()).unwrap();
    assert_eq!(align_interval(&trace_db(&["c", "c"]), &atom, &cfg).unwrap().score, 1.0);
    assert!(check_bool(&trace_db(&["c", "c", "w", "w"]), &spec, Mode::Interval).unwrap());
    assert!(!check_bool(&trace_db(&["c", "w", "c"]), &spec, Mode::Interval).unwrap());
}

#[test]
fn interval_mid_enumeration() {
    // mids 2 and 4 fail, 3 succeeds
    let db = trace_db(&["c", "c", "w", "w"]);
    let truth = vec![true; db.len()];
    let w = |s: &str| oracle::satisfies(&db, &parse_spec(s, &mugen_schema()).unwrap(), &truth, Mode::Interval).unwrap();
    assert!(w("climb(M,up) U walk(M,right)"));
    assert!(!w("climb(M,up)"));
    assert!(!w("walk(M,right)"));
}

#[test]
fn interval_rejects_next() {
    let spec = parse_spec("X climb(M,up)", &mugen_schema()).unwrap();
    let err = align_interval(&fixture_072(), &spec, &AlignConfig::default()).unwrap_err();
    assert_eq!(err, CheckError::UnsupportedOperatorInIntervalMode("next"));
}

#[test]
fn interval_witnesses_are_spans() {
    let spec = parse_spec("(climb(M,_))@a U (walk(M,right))@b", &mugen_schema()).unwrap();
    let r = align_interval(&trace_db(&["c", "c", "w", "w"]), &spec, &AlignConfig::default())
        .unwrap();
    assert_eq!(r.proofs.proofs()[0].witness("a"), Some(Witness::Span(1, 3)));
    assert_eq!(r.proofs.proofs()[0].witness("b"), Some(Witness::Span(3, 5)));
}

fn door_schema() -> Schema {
    Schema::new(vec![
        PredicateDecl::new("open", 1, PredicateKind::Evolving),
        PredicateDecl::new("closed", 1, PredicateKind::Evolving),
        PredicateDecl::new("is-rigid", 1, PredicateKind::Static),
        PredicateDecl::new("is-fluid", 1, PredicateKind::Static),
    ])
    .unwrap()
}

#[test]
fn violation_examples() {
    let schema = door_schema();
    let db = FactDatabase::from_clip_scores(
        schema.clone(),
        vec!["e".into()],
        vec![],
        1,
        vec![
            (FactKey::new("open", Some(1), &["e"]), 0.6),
            (FactKey::new("closed", Some(1), &["e"]), 0.5),
        ],
    )
    .unwrap();
    let c = parse_spec("forall x. G !(open(x) & closed(x))", &schema).unwrap();
    let v = violation_score(&db, &c, &AlignConfig::default()).unwrap().score;
    let truth = oracle::exact_align(&db, &c.negated(), Mode::Suffix).unwrap();
    assert!((truth - 0.6 * 0.5).abs() < 1e-12);
    assert!((v - truth).abs() < 1e-12);

    let taut = parse_spec("forall x. G !(open(x) & !open(x))", &schema).unwrap();
    assert_eq!(violation_score(&db, &taut, &AlignConfig::default()).unwrap().score, 0.0);

    let fluid = parse_spec("forall x. G !(is-rigid(x) & is-fluid(x))", &schema).unwrap();
    assert_eq!(violation_score(&db, &fluid, &AlignConfig::default()).unwrap().score, 0.0);
}

#[test]
fn suffix_witnesses_and_partitions() {
    let spec =
        parse_spec("F ((climb(M,up))@pre & F (walk(M,right))@post)", &mugen_schema()).unwrap();
    let db = trace_db(&["c", "c", "w", "w"]);
    let r = align(&db, &spec, &AlignConfig::exact()).unwrap();
    assert_eq!(r.score, 1.0);
    let pre: Vec<Witness> = r.witness_scores["pre"].keys().copied().collect();
    assert_eq!(pre, vec![Witness::At(1), Witness::At(2)]);
    let post: Vec<Witness> = r.witness_scores["post"].keys().copied().collect();
    assert_eq!(post, vec![Witness::At(3), Witness::At(4)]);
}

#[test]
fn chained_until_keeps_long_segments() {
    let spec = parse_spec(
        "(climb(M,up))@act_1 U (walk(M,right))@act_2",
        &mugen_schema(),
    )
    .unwrap();
    let db = trace_db(&["c", "c", "c", "w"]);
    let r = align(&db, &spec, &AlignConfig::default()).unwrap();
    assert_eq!(r.score, 1.0);
    assert_eq!(r.proofs.proofs()[0].witness("act_1"), Some(Witness::At(1)));
    assert_eq!(r.proofs.proofs()[0].witness("act_2"), Some(Witness::At(4)));
}

#[test]
fn recorded_subformulas() {
    let spec =
        parse_spec("F ((climb(M,up))@pre & F (walk(M,right))@post)", &mugen_schema()).unwrap();
    let cfg = AlignConfig { record_subformulas: true, ..AlignConfig::exact() };
    let r = align(&trace_db(&["c", "w"]), &spec, &cfg).unwrap();
    assert_eq!(r.subformulas["pre"].len(), 2);
    let probs = trace_db(&["c", "w"]).probs();
    let score = |ps: &ProofSet| provenance::wmc(ps, &probs).unwrap();
    assert_eq!(score(&r.subformulas["pre"][0]), 1.0);
    assert!(r.subformulas["pre"][1].is_empty());
    assert_eq!(score(&r.subformulas["post"][1]), 1.0);
}

#[test]
fn unknown_predicate() {
    let other = Schema::new(vec![PredicateDecl::new("jump", 2, PredicateKind::Evolving)]).unwrap();
    let spec = parse_spec("jump(M,up)", &other).unwrap();
    let err = align(&fixture_072(), &spec, &AlignConfig::default()).unwrap_err();
    assert_eq!(err, CheckError::Db(DbError::UnknownPredicate("jump".into())));
}

#[test]
fn deterministic_runs() {
    let db = fixture_072();
    let a = align(&db, &climb_walk(), &AlignConfig::default()).unwrap();
    let b = align(&db, &climb_walk(), &AlignConfig::default()).unwrap();
    assert_eq!(a.score.to_bits(), b.score.to_bits());
    assert_eq!(a.grad, b.grad);
    assert_eq!(a.proofs.dump(), b.proofs.dump());
}

#[test]
fn mode_parsing() {
    assert_eq!("interval".parse::<Mode>().unwrap(), Mode::Interval);
    assert_eq!(Mode::Suffix.to_string(), "suffix");
    assert!("bogus".parse::<Mode>().is_err());
}
