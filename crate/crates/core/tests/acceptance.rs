//! Acceptance run: one PASS/FAIL line per criterion, details on the
//! following indented lines. Exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stalign::checker::{align, check_bool, AlignConfig, Mode};
use stalign::fact_db::{FactDatabase, FactKey, PredicateDecl, PredicateKind, Schema};
use stalign::losses::temporal_weight;
use stalign::oracle::{exact_align, fd_grad};
use stalign::spec_lang::parse_spec;
use stalign::synthgen::{self, Episode, GenConfig, Regime};
use stalign::trainer::{self, batch_loss, PredictorParams, TrainConfig};

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn require(&mut self, ok: bool, msg: String) {
        if !ok {
            self.pass = false;
        }
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// 500 instances alternating suffix and interval mode.
fn instances() -> Vec<common::Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..500)
        .map(|i| common::random_instance(&mut rng, if i % 2 == 0 { Mode::Suffix } else { Mode::Interval }))
        .collect()
}

fn oracle_equivalence(insts: &[common::Instance]) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut fractional = 0;
    for inst in insts {
        let cfg = AlignConfig::exact().with_mode(inst.mode);
        let engine = align(&inst.db, &inst.spec, &cfg).unwrap().score;
        let truth = exact_align(&inst.db, &inst.spec, inst.mode).unwrap();
        worst = worst.max((engine - truth).abs());
        if truth > 1e-9 && truth < 1.0 - 1e-9 {
            fractional += 1;
        }
    }
    let elapsed = start.elapsed();
    o.require(worst < 1e-9, format!("max |engine - oracle| = {worst:.3e} over {} instances", insts.len()));
    o.require(elapsed < Duration::from_secs(60), format!("runtime {:.2}s (limit 60s)", elapsed.as_secs_f64()));
    o.note(format!("{fractional} instances have a score strictly between 0 and 1"));
    o
}

fn end_to_end_error(layout: &synthgen::Layout, eps: &[Episode], cfg: &TrainConfig, seed: u64, step: usize) -> f64 {
    let params = PredictorParams::random(layout, layout.feature_dim, seed, 0.3);
    let batch: Vec<&Episode> = eps.iter().collect();
    let (_, grad) = batch_loss(&params, &batch, cfg).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in (0..params.theta.len()).step_by(step) {
        let mut p = params.clone();
        p.theta[i] += h;
        let hi = batch_loss(&p, &batch, cfg).unwrap().0.total;
        p.theta[i] -= 2.0 * h;
        let lo = batch_loss(&p, &batch, cfg).unwrap().0.total;
        worst = worst.max(rel_err(grad[i], (hi - lo) / (2.0 * h)));
    }
    worst
}

fn gradient_suite(insts: &[common::Instance]) -> Outcome {
    let mut o = Outcome::new();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for inst in insts {
        let cfg = AlignConfig::exact().with_mode(inst.mode);
        let r = align(&inst.db, &inst.spec, &cfg).unwrap();
        for f in 0..inst.db.len() {
            let fd = fd_grad(&inst.db, &inst.spec, inst.mode, f, 1e-5).unwrap();
            worst = worst.max(rel_err(r.grad.get(&f).copied().unwrap_or(0.0), fd));
            checked += 1;
        }
    }
    o.require(worst < 1e-4, format!("fact gradients: max relative error {worst:.3e} over {checked} partials"));

    let mcfg = GenConfig::mugen(5, 3);
    let mugen_cfg = TrainConfig::for_regime(Regime::MugenLike);
    let e1 = end_to_end_error(&synthgen::layout(&mcfg), &synthgen::generate(&mcfg).unwrap(), &mugen_cfg, 1, 7);
    let bcfg = GenConfig::bn20(6, 2);
    let bn_cfg = TrainConfig::for_regime(Regime::Bn20Like);
    let e2 = end_to_end_error(&synthgen::layout(&bcfg), &synthgen::generate(&bcfg).unwrap(), &bn_cfg, 2, 31);
    o.require(e1 < 1e-3, format!("end-to-end MUGEN-like loss -> weights: max relative error {e1:.3e}"));
    o.require(e2 < 1e-3, format!("end-to-end 20BN-like loss -> weights (all four losses): max relative error {e2:.3e}"));
    o
}

fn climb_walk_db(trace: &[(&str, f64)]) -> FactDatabase {
    let schema = Schema::new(vec![
        PredicateDecl::new("climb", 2, PredicateKind::Evolving),
        PredicateDecl::new("walk", 2, PredicateKind::Evolving),
    ])
    .unwrap();
    let facts = trace.iter().enumerate().map(|(i, (a, p))| {
        let (pred, dir) = if *a == "c" { ("climb", "up") } else { ("walk", "right") };
        (FactKey::new(pred, Some(i as u32 + 1), &["M", dir]), *p)
    });
    FactDatabase::from_clip_scores(schema, vec!["M".into()], vec!["up".into(), "right".into()], trace.len() as u32, facts)
        .unwrap()
}

fn worked_examples() -> Outcome {
    let mut o = Outcome::new();
    let yes = climb_walk_db(&[("c", 1.0), ("c", 1.0), ("w", 1.0), ("w", 1.0)]);
    let no = climb_walk_db(&[("c", 1.0), ("c", 1.0), ("c", 1.0), ("c", 1.0)]);
    let spec = parse_spec("climb(M,_) U walk(M,right)", yes.schema()).unwrap();
    o.require(check_bool(&yes, &spec, Mode::Suffix).unwrap(), "[c,c,w,w] satisfies c U w".into());
    o.require(!check_bool(&no, &spec, Mode::Suffix).unwrap(), "[c,c,c,c] does not satisfy c U w".into());

    let prob = climb_walk_db(&[("c", 0.9), ("w", 0.8)]);
    let engine = align(&prob, &spec, &AlignConfig::default()).unwrap().score;
    let truth = exact_align(&prob, &spec, Mode::Suffix).unwrap();
    o.require(
        (engine - 0.72).abs() < 1e-9 && (truth - 0.72).abs() < 1e-9,
        format!("0.9/0.8 variant: engine {engine}, oracle {truth}"),
    );

    let mut wd_ok = true;
    for d_max in 1..=40u32 {
        let tau = 0.9 * d_max as f64;
        for d in 0..=d_max {
            let w = temporal_weight(d, d_max, tau).unwrap();
            if (d as f64 <= tau && w != 0.0) || (d == d_max && w != 1.0) {
                wd_ok = false;
            }
        }
    }
    o.require(wd_ok, "w_d = 0 for d <= 0.9 d_max and w_{d_max} = 1 exactly, d_max in 1..=40".into());
    o
}

fn top_k(insts: &[common::Instance]) -> Outcome {
    let mut o = Outcome::new();
    let mut violations = Vec::new();
    let mut oracle_worst: f64 = 0.0;
    for (i, inst) in insts.iter().take(100).enumerate() {
        let score = |k| align(&inst.db, &inst.spec, &AlignConfig::exact().with_mode(inst.mode).with_k(k)).unwrap().score;
        let s: Vec<f64> = [Some(1), Some(3), Some(5), None].into_iter().map(score).collect();
        if s.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            violations.push(format!("instance {i} ({}) {}: {s:?}", inst.mode, inst.spec));
        }
        oracle_worst = oracle_worst.max((s[3] - exact_align(&inst.db, &inst.spec, inst.mode).unwrap()).abs());
    }
    o.require(violations.is_empty(), format!("score non-decreasing in k over 100 instances ({} violations)", violations.len()));
    for v in violations.iter().take(5) {
        o.note(v.clone());
    }
    o.require(oracle_worst < 1e-9, format!("k = inf equals the oracle (max delta {oracle_worst:.3e})"));
    o
}

fn single_core<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn mugen_protocol() -> Outcome {
    let mut o = Outcome::new();
    let train = synthgen::generate(&GenConfig::mugen(100, 500)).unwrap();
    let test = synthgen::generate(&GenConfig::mugen(200, 100)).unwrap();
    let layout = synthgen::layout(&GenConfig::mugen(100, 1));
    let cfg = TrainConfig { epochs: 20, ..TrainConfig::for_regime(Regime::MugenLike) };
    let acfg = cfg.loss.align.clone();

    let init = PredictorParams::random(&layout, layout.feature_dim, cfg.seed, cfg.init_scale);
    let before = trainer::eval_retrieval(&init, &test, 3, 0, &acfg).unwrap();
    let start = Instant::now();
    let (params, _) = single_core(|| trainer::train(&layout, &train, &cfg)).unwrap();
    let elapsed = start.elapsed();
    let after = trainer::eval_retrieval(&params, &test, 3, 0, &acfg).unwrap();

    o.note(format!("500 train / 100 test episodes, sigma 0.5, {} epochs, {} mode, k = 5", cfg.epochs, acfg.mode));
    o.require(
        elapsed < Duration::from_secs(600),
        format!("training on one core took {:.1}s (limit 600s)", elapsed.as_secs_f64()),
    );
    o.require(
        after.spec_retrieval_acc >= 0.8 && after.video_retrieval_acc >= 0.8,
        format!(
            "trained spec-retrieval {:.3}, video-retrieval {:.3} over {} groups of 3",
            after.spec_retrieval_acc, after.video_retrieval_acc, after.groups
        ),
    );
    o.require(
        after.spec_retrieval_acc >= before.spec_retrieval_acc + 0.3
            && after.video_retrieval_acc >= before.video_retrieval_acc + 0.3,
        format!(
            "untrained spec-retrieval {:.3}, video-retrieval {:.3}",
            before.spec_retrieval_acc, before.video_retrieval_acc
        ),
    );
    o
}

struct Bn20Run {
    f1: f64,
    violation: f64,
    secs: f64,
}

fn bn20_run(train: &[Episode], test: &[Episode], layout: &synthgen::Layout, cfg: &TrainConfig) -> Bn20Run {
    let start = Instant::now();
    let (params, _) = trainer::train(layout, train, cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let f1 = trainer::eval_f1(&params, test, 0.5).unwrap().mean_f1;
    let constraints = synthgen::bn20_constraints();
    let violation = trainer::mean_violation(&params, test, &constraints, &AlignConfig::exact()).unwrap();
    Bn20Run { f1, violation, secs }
}

fn bn20_protocol_and_ablation() -> (Outcome, Outcome) {
    let train = synthgen::generate(&GenConfig::bn20(300, 300)).unwrap();
    let test = synthgen::generate(&GenConfig::bn20(400, 60)).unwrap();
    let layout = synthgen::layout(&GenConfig::bn20(300, 1));
    let full = TrainConfig::for_regime(Regime::Bn20Like);
    let mut no_sem = full.clone();
    no_sem.loss.weights.semantic = 0.0;
    let mut align_only = no_sem.clone();
    align_only.loss.weights.contrastive = 0.0;
    align_only.loss.weights.temporal = 0.0;
    let mut align_contrastive = no_sem.clone();
    align_contrastive.loss.weights.temporal = 0.0;

    let runs: BTreeMap<&str, Bn20Run> = [
        ("all four losses", &full),
        ("without semantic", &no_sem),
        ("alignment only", &align_only),
        ("alignment + contrastive", &align_contrastive),
    ]
    .into_iter()
    .map(|(name, cfg)| (name, bn20_run(&train, &test, &layout, cfg)))
    .collect();

    let mut p = Outcome::new();
    p.note(format!("300 train / 60 test episodes, sigma 0.1, {} epochs, k = 3", full.epochs));
    for (name, r) in &runs {
        p.note(format!("{name}: mean F1 {:.4}, mean violation {:.4} ({:.0}s)", r.f1, r.violation, r.secs));
    }
    let (f, n) = (&runs["all four losses"], &runs["without semantic"]);
    p.require(f.f1 >= 0.75, format!("mean clip-wise F1 {:.4} >= 0.75", f.f1));
    p.require(f.violation < 0.05, format!("mean violation with semantic loss {:.4} < 0.05", f.violation));
    p.require(
        n.violation >= f.violation + 0.01,
        format!("without semantic loss violation is measurably higher: {:.4}", n.violation),
    );

    let mut a = Outcome::new();
    let (ao, ac) = (&runs["alignment only"], &runs["alignment + contrastive"]);
    a.require(ac.f1 > ao.f1, format!("adding contrastive: mean F1 {:.4} -> {:.4}", ao.f1, ac.f1));
    a.require(
        f.violation < n.violation,
        format!("adding semantic: mean violation {:.4} -> {:.4}", n.violation, f.violation),
    );
    (p, a)
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else { continue };
        for e in entries {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Exit code, stdout and every file under the scratch directory.
type Record = (i32, Vec<u8>, BTreeMap<PathBuf, Vec<u8>>);

fn cli_determinism() -> Outcome {
    let mut o = Outcome::new();
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let s = |p: &Path| p.display().to_string();
    let (mugen, bn, run, out) = (root.join("mugen"), root.join("bn"), root.join("run"), root.join("out.json"));
    let db = fixture("climb_walk.json");
    let spec = fixture("climb_until_walk.ltl");
    let steps: Vec<(&str, Vec<String>)> = vec![
        ("check", vec!["check".into(), "--db".into(), db.clone(), "--spec".into(), spec.clone(), "--output".into(), s(&out)]),
        ("oracle", vec!["oracle".into(), "--db".into(), db.clone(), "--spec".into(), spec.clone()]),
        ("gradcheck", vec!["gradcheck".into(), "--db".into(), db, "--spec".into(), spec]),
        ("gen mugen", vec!["gen".into(), "--seed".into(), "3".into(), "--config".into(), fixture("gen_mugen.json"), "--output".into(), s(&mugen)]),
        ("gen 20bn", vec!["gen".into(), "--seed".into(), "3".into(), "--config".into(), fixture("gen_bn20.json"), "--output".into(), s(&bn)]),
        ("train", vec!["train".into(), "--seed".into(), "5".into(), "--epochs".into(), "3".into(), "--data".into(), s(&bn), "--output".into(), s(&run)]),
        (
            "eval f1",
            vec!["eval".into(), "--task".into(), "f1".into(), "--data".into(), s(&bn), "--checkpoint".into(), s(&run.join("checkpoint.json"))],
        ),
        ("eval retrieval", vec!["eval".into(), "--seed".into(), "9".into(), "--task".into(), "retrieval".into(), "--data".into(), s(&mugen)]),
        (
            "eval violation",
            vec!["eval".into(), "--task".into(), "violation".into(), "--data".into(), s(&bn), "--checkpoint".into(), s(&run.join("checkpoint.json"))],
        ),
    ];
    let exe = env!("CARGO_BIN_EXE_stalign");
    let mut records: Vec<Vec<Record>> = Vec::new();
    for _ in 0..2 {
        let mut this = Vec::new();
        for (_, args) in &steps {
            let r = Command::new(exe).args(args).output().unwrap();
            this.push((r.status.code().unwrap_or(-1), r.stdout, snapshot(root)));
        }
        records.push(this);
        for d in [&mugen, &bn, &run] {
            let _ = fs::remove_dir_all(d);
        }
        let _ = fs::remove_file(&out);
    }
    for (i, (name, _)) in steps.iter().enumerate() {
        let (a, b) = (&records[0][i], &records[1][i]);
        o.require(
            a.0 == 0 && a == b,
            format!("{name}: exit {} / {}, stdout and files {}", a.0, b.0, if a == b { "identical" } else { "differ" }),
        );
    }
    o
}

fn main() {
    let started = Instant::now();
    let insts = instances();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("oracle equivalence", oracle_equivalence(&insts)),
        ("gradient suite", gradient_suite(&insts)),
        ("worked examples", worked_examples()),
        ("top-k behavior", top_k(&insts)),
        ("MUGEN-like retrieval protocol", mugen_protocol()),
    ];
    let (bn, ablation) = bn20_protocol_and_ablation();
    results.push(("20BN-like F1 and constraint protocol", bn));
    results.push(("loss ablation directions", ablation));
    results.push(("CLI determinism", cli_determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}", if o.pass { "PASS" } else { "FAIL" });
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
