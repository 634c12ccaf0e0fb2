//! Acceptance criteria, one line of output each.
//!
//! Pass criterion numbers as arguments to run a subset. Criterion 9 needs the
//! UD English treebank: set `SEQTAG_UD_EN_DIR` to the directory holding
//! `en-ud-{train,test}.conllu` (and optionally `SEQTAG_EMBEDDINGS`).

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use seqtag::autodiff::{gradient_check, Coords, Graph, Objective, ParamId, ParamStore, Rng, Tensor};
use seqtag::corpus::{parse_conllu, read_conllu, write_conllu, Corpus, Format, Sentence, Split};
use seqtag::harness::{cli, evaluate, learning_curve, noise_curve, CurvePoint, SystemSpec};
use seqtag::recurrent::{run, CellKind, CellParams, Direction};
use seqtag::repr::ReprMode;
use seqtag::synthetic::{SyntheticConfig, SyntheticLanguage};
use seqtag::tagger::{self, freqbin_label, Hyperparams, LogBase, TaggerModel};
use seqtag::tnt::{self, viterbi, TntConfig, TrigramModel};
use seqtag::Error;

use common::*;

type Criterion = (u32, &'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

// ---------------------------------------------------------------- 1

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[derive(Clone, Copy)]
enum Prim {
    Add,
    Mul,
    Matvec,
    Affine,
    Concat,
    Tanh,
    Logistic,
    LookupRow,
    SoftmaxXent,
    GaussianNoise,
    Sum,
}

const PRIMS: [(Prim, &str); 11] = [
    (Prim::Add, "add"),
    (Prim::Mul, "mul"),
    (Prim::Matvec, "matvec"),
    (Prim::Affine, "affine"),
    (Prim::Concat, "concat"),
    (Prim::Tanh, "tanh"),
    (Prim::Logistic, "logistic"),
    (Prim::LookupRow, "lookup_row"),
    (Prim::SoftmaxXent, "softmax_xent"),
    (Prim::GaussianNoise, "gaussian_noise"),
    (Prim::Sum, "sum"),
];

struct PrimCheck {
    prim: Prim,
    a: ParamId,
    b: ParamId,
    c: ParamId,
    m: ParamId,
    w: ParamId,
    bias: ParamId,
    table: ParamId,
    readout: Tensor,
}

impl PrimCheck {
    fn new(prim: Prim, store: &mut ParamStore, rng: &mut Rng) -> Self {
        let vec = |store: &mut ParamStore, name: &str, n: usize, rng: &mut Rng| {
            store.add(name, Tensor::vector((0..n).map(|_| rng.uniform_range(-1.5, 1.5)).collect())).unwrap()
        };
        let a = vec(store, "a", 5, rng);
        let b = vec(store, "b", 5, rng);
        let c = vec(store, "c", 3, rng);
        let bias = vec(store, "bias", 4, rng);
        let m = store.add_glorot("m", 5, 5, rng).unwrap();
        let w = store.add_glorot("w", 4, 5, rng).unwrap();
        let table = store.add_glorot("table", 6, 5, rng).unwrap();
        let readout = Tensor::matrix(1, 8, (0..8).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap();
        PrimCheck { prim, a, b, c, m, w, bias, table, readout }
    }
}

impl Objective for PrimCheck {
    type Error = Error;

    fn loss<G: Graph>(&self, g: &mut G) -> Result<G::Var, Error> {
        let (a, b) = (g.param(self.a), g.param(self.b));
        let out = match self.prim {
            Prim::Add => g.add(&a, &b)?,
            Prim::Mul => g.mul(&a, &b)?,
            Prim::Matvec => {
                let m = g.param(self.m);
                g.matvec(&m, &a)?
            }
            Prim::Affine => {
                let (w, bias) = (g.param(self.w), g.param(self.bias));
                g.affine(&w, &a, &bias)?
            }
            Prim::Concat => {
                let c = g.param(self.c);
                g.concat(&[a, c])?
            }
            Prim::Tanh => g.tanh(&a)?,
            Prim::Logistic => g.logistic(&a)?,
            Prim::LookupRow => g.lookup_row(self.table, 2)?,
            Prim::SoftmaxXent => return Ok(g.softmax_xent(&a, 3)?),
            Prim::GaussianNoise => g.gaussian_noise(&a, 0.2, &mut Rng::new(11))?,
            Prim::Sum => g.sum(&[a, b])?,
        };
        let n = g.value(&out).len();
        let r = g.constant(Tensor::matrix(1, n, self.readout.data()[..n].to_vec()).unwrap());
        Ok(g.matvec(&r, &out)?)
    }
}

struct LstmCheck {
    cell: CellParams,
    inputs: Vec<ParamId>,
    out_w: ParamId,
    out_b: ParamId,
}

impl Objective for LstmCheck {
    type Error = Error;

    fn loss<G: Graph>(&self, g: &mut G) -> Result<G::Var, Error> {
        let xs: Vec<G::Var> = self.inputs.iter().map(|&id| g.param(id)).collect();
        let states = run(g, &self.cell, &xs, Direction::Forward)?;
        let (w, b) = (g.param(self.out_w), g.param(self.out_b));
        let mut terms = Vec::new();
        for (i, s) in states.iter().enumerate() {
            let logits = g.affine(&w, &s.h, &b)?;
            terms.push(g.softmax_xent(&logits, i % 3)?);
        }
        Ok(g.sum(&terms)?)
    }
}

struct TaggerCheck<'a> {
    model: &'a TaggerModel,
    sentence: Sentence,
    noise_seed: Option<u64>,
}

impl Objective for TaggerCheck<'_> {
    type Error = Error;

    fn loss<G: Graph>(&self, g: &mut G) -> Result<G::Var, Error> {
        let mut rng = self.noise_seed.map(Rng::new);
        self.model.sentence_loss(g, &self.sentence, rng.as_mut())
    }
}

fn criterion_gradients() -> Verdict {
    let mut worst = Vec::new();
    for (prim, name) in PRIMS {
        let mut store = ParamStore::new();
        let obj = PrimCheck::new(prim, &mut store, &mut Rng::new(3));
        let r = gradient_check(&obj, &mut store, H, Coords::All).unwrap();
        worst.push((name.to_string(), r.max_rel_error));
    }

    let mut store = ParamStore::new();
    let mut rng = Rng::new(4);
    let cell = CellParams::register(&mut store, "lstm", CellKind::Lstm, 4, 5, &mut rng).unwrap();
    let inputs = (0..6)
        .map(|i| store.add(format!("x{i}"), Tensor::vector((0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect())).unwrap())
        .collect();
    let out_w = store.add_glorot("out.w", 3, 5, &mut rng).unwrap();
    let out_b = store.add_zeros("out.b", &[3]).unwrap();
    let lstm = LstmCheck { cell, inputs, out_w, out_b };
    let r = gradient_check(&lstm, &mut store, H, Coords::All).unwrap();
    worst.push(("lstm-6".into(), r.max_rel_error));

    let train = read_conllu(&toy_ud_path(), Split::Train).unwrap();
    let hp = Hyperparams { word_dim: 4, subtoken_dim: 3, hidden_dim: 3, repr: ReprMode::WC, freqbin: true, ..Hyperparams::default() };
    let model = TaggerModel::init(&train, &hp, &mut Rng::new(6)).unwrap();
    let sentence = Sentence::new(
        ["The", "cat", "purred"].iter().map(|s| s.to_string()).collect(),
        ["DET", "NOUN", "VERB"].iter().map(|s| s.to_string()).collect(),
    );
    for (noise_seed, mode) in [(None, "eval"), (Some(5), "train")] {
        let obj = TaggerCheck { model: &model, sentence: sentence.clone(), noise_seed };
        let mut params = model.params().clone();
        let r = gradient_check(&obj, &mut params, H, Coords::All).unwrap();
        worst.push((format!("tagger w+c freqbin {mode} ({} coords)", r.checked), r.max_rel_error));
    }

    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let summary: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(max < TOL, format!("max rel error {max:.2e} < {TOL:e}; {}", summary.join(", ")))
}

// ---------------------------------------------------------------- 2

fn criterion_viterbi_oracle() -> Verdict {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for model_seed in 0..20u64 {
        for coarse in [false, true] {
            let mut rng = Rng::new(1000 + model_seed);
            let m = random_transitions(&mut rng, 4, coarse);
            for n in 1..=6 {
                for _ in 0..5 {
                    let e = random_emissions(&mut rng, n, 4, coarse);
                    let exact = viterbi(&m, &e, 0.0).unwrap();
                    cases += 1;
                    if exact != brute_force(&m, &e) {
                        mismatches.push(format!("model {model_seed} coarse={coarse} n={n}"));
                    }
                }
            }
        }
    }
    check(
        mismatches.is_empty(),
        format!("{cases} sentences on 20 random and 20 tie-heavy models, {} mismatches {}", mismatches.len(), mismatches.join(", ")),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_freqbin() -> Verdict {
    let labels = [1, 10, 100].map(|f| freqbin_label(f, LogBase::Natural));
    let mut ok = labels == [0, 2, 4];
    let mut detail = format!("labels(1, 10, 100) = {labels:?}");
    let lang = SyntheticLanguage::new(SyntheticConfig::default());
    let corpora = [
        read_conllu(&toy_ud_path(), Split::Train).unwrap(),
        lang.sample(300, 0.0, Split::Train, &mut Rng::new(1)),
        Corpus::from_pairs(Split::Train, &[vec![("a", "X")]]),
    ];
    let hp = Hyperparams { word_dim: 2, subtoken_dim: 2, hidden_dim: 2, repr: ReprMode::W, freqbin: true, ..Hyperparams::default() };
    for c in &corpora {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for f in c.sentences().iter().flat_map(|s| &s.forms) {
            *counts.entry(f).or_default() += 1;
        }
        let expected = 1 + counts.values().map(|&f| (f as f64).ln() as usize).max().unwrap();
        let got = TaggerModel::init(c, &hp, &mut Rng::new(1)).unwrap().n_bins();
        ok &= got == expected;
        detail += &format!("; n_bins {got} (expected {expected})");
    }
    check(ok, detail)
}

// ---------------------------------------------------------------- 4

fn accuracy(model: &dyn seqtag::harness::Tagger, c: &Corpus) -> f64 {
    evaluate(model, c).unwrap().accuracy
}

fn criterion_overfit() -> Verdict {
    let train = read_conllu(&toy_ud_path(), Split::Train).unwrap();
    let hp = Hyperparams { repr: ReprMode::WC, ..Hyperparams::default() };
    let (model, _) = tagger::train(&train, &hp, None).unwrap();
    let acc = accuracy(&model, &train);
    check(acc >= 0.99, format!("training accuracy {acc:.4} on {} sentences, {} epochs", train.len(), hp.epochs))
}

// ---------------------------------------------------------------- 5

fn suffix_language() -> (SyntheticLanguage, Corpus, Corpus) {
    let lang = SyntheticLanguage::new(SyntheticConfig::default());
    let train = lang.sample(500, 0.0, Split::Train, &mut Rng::new(1));
    let test = lang.sample(200, 0.3, Split::Test, &mut Rng::new(2));
    (lang, train, test)
}

fn criterion_subtoken() -> Verdict {
    let (_, train, test) = suffix_language();
    let oov = |repr| {
        let (m, _) = tagger::train(&train, &small_hp(repr), None).unwrap();
        evaluate(&m, &test).unwrap()
    };
    let (c, w) = (oov(ReprMode::C), oov(ReprMode::W));
    let (co, wo) = (c.oov_accuracy.unwrap(), w.oov_accuracy.unwrap());
    check(
        co >= 0.9 && co - wo >= 0.2,
        format!("OOV accuracy c {co:.4} vs w {wo:.4} over {} unseen tokens (overall c {:.4}, w {:.4})", c.oov_tokens, c.accuracy, w.accuracy),
    )
}

// ---------------------------------------------------------------- 6

fn systems() -> Vec<SystemSpec> {
    vec![SystemSpec::bilstm(small_hp(ReprMode::WC)), SystemSpec::tnt(TntConfig::default())]
}

fn by_system<'a>(points: &'a [CurvePoint], system: &str) -> Vec<&'a CurvePoint> {
    points.iter().filter(|p| p.system == system).collect()
}

fn criterion_noise() -> Verdict {
    let (_, train, test) = suffix_language();
    let points = noise_curve(&train, &test, &[0.0, 0.5], &systems(), 1).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in ["bilstm", "tnt"] {
        let p = by_system(&points, s);
        ok &= p[0].accuracy > p[1].accuracy;
        parts.push(format!("{s} {:.4} at 0% vs {:.4} at 50%", p[0].accuracy, p[1].accuracy));
    }
    check(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 7

fn criterion_learning_curve() -> Verdict {
    let lang = SyntheticLanguage::new(SyntheticConfig { exception_rate: 0.2, ..SyntheticConfig::default() });
    let train = lang.sample(2000, 0.0, Split::Train, &mut Rng::new(1));
    let dev = lang.sample(300, 0.1, Split::Dev, &mut Rng::new(2));
    let points = learning_curve(&train, &dev, &[100, 2000], &systems(), 1).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in ["bilstm", "tnt"] {
        let p = by_system(&points, s);
        ok &= p[1].accuracy > p[0].accuracy;
        parts.push(format!("{s} {:.4} at 100 vs {:.4} at 2000", p[0].accuracy, p[1].accuracy));
    }
    check(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 8

fn run_cli(args: &[&str]) -> i32 {
    cli::run(std::iter::once("seqtag").chain(args.iter().copied()))
}

fn criterion_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let lang = SyntheticLanguage::new(SyntheticConfig::default());
    let train = write_file(dir.path(), "train.conllu", &lang.sample(120, 0.0, Split::Train, &mut Rng::new(1)), Format::Conllu);
    let dev = write_file(dir.path(), "dev.conllu", &lang.sample(40, 0.2, Split::Dev, &mut Rng::new(2)), Format::Conllu);
    let (train, dev) = (train.to_str().unwrap(), dev.to_str().unwrap());
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let small = ["--epochs", "2", "--word-dim", "12", "--char-dim", "8", "--hidden", "10"];

    let mut files = Vec::new();
    for run in ["1", "2"] {
        let model = out(&format!("bilstm{run}.bin"));
        let hmm = out(&format!("tnt{run}.bin"));
        let curve = out(&format!("curve{run}.csv"));
        let noise = out(&format!("noise{run}.csv"));
        let codes = [
            run_cli(&[&["train", "--rep", "wc", "--freqbin"], &small[..], &[train, &model]].concat()),
            run_cli(&["train", "--model", "tnt", train, &hmm]),
            run_cli(&[&["curve", "--sizes", "30,120", "--out", &curve], &small[..], &[train, dev]].concat()),
            run_cli(&[&["noise", "--rates", "0,0.3", "--out", &noise], &small[..], &[train, dev]].concat()),
        ];
        if codes.iter().any(|&c| c != 0) {
            return Verdict::Fail(format!("command exit codes {codes:?}"));
        }
        files.push([model, hmm, curve, noise]);
    }
    let same: Vec<bool> = files[0]
        .iter()
        .zip(&files[1])
        .map(|(a, b)| std::fs::read(a).unwrap() == std::fs::read(b).unwrap())
        .collect();
    check(same.iter().all(|&s| s), format!("identical bilstm model, tnt model, curve csv, noise csv: {same:?}"))
}

// ---------------------------------------------------------------- 9

fn criterion_full_scale() -> Verdict {
    let Some(dir) = std::env::var_os("SEQTAG_UD_EN_DIR").map(PathBuf::from) else {
        return Verdict::Skip("set SEQTAG_UD_EN_DIR to run (hours of CPU)".into());
    };
    let train = read_conllu(&dir.join("en-ud-train.conllu"), Split::Train).unwrap();
    let test = read_conllu(&dir.join("en-ud-test.conllu"), Split::Test).unwrap();
    let embeddings = std::env::var_os("SEQTAG_EMBEDDINGS").map(PathBuf::from);
    let target = if embeddings.is_some() { 95.17 } else { 94.46 };
    let hp = Hyperparams { repr: ReprMode::WC, pretrained: embeddings, ..Hyperparams::default() };
    let (model, _) = tagger::train(&train, &hp, None).unwrap();
    let r = evaluate(&model, &test).unwrap();
    let acc = 100.0 * r.accuracy;
    check(
        (acc - target).abs() <= 0.7,
        format!("test accuracy {acc:.2} vs {target} +- 0.7 (OOV {:.2})", 100.0 * r.oov_accuracy.unwrap_or(0.0)),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_round_trips() -> Verdict {
    let c = read_conllu(&toy_ud_path(), Split::Train).unwrap();
    let mut buf = Vec::new();
    write_conllu(&c, &mut buf).unwrap();
    let back = parse_conllu(buf.as_slice(), "written").unwrap();
    let corpus_ok = back.len() == c.len()
        && back.iter().zip(c.sentences()).all(|(a, b)| a.forms == b.forms && a.tags == b.tags);

    let (bilstm, _) = tagger::train(&c, &Hyperparams { epochs: 2, ..small_hp(ReprMode::WC) }, None).unwrap();
    let hmm = tnt::train_hmm(&c, &TntConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    bilstm.save(&pa).unwrap();
    hmm.save(&pb).unwrap();
    let (bilstm2, hmm2) = (TaggerModel::load(&pa).unwrap(), TrigramModel::load(&pb).unwrap());
    let probe: Vec<Vec<String>> = c
        .sentences()
        .iter()
        .map(|s| s.forms.clone())
        .chain([vec!["Unseen".to_string(), "glorped".to_string()]])
        .collect();
    let mut model_ok = bilstm2.to_bytes().unwrap() == bilstm.to_bytes().unwrap() && hmm2.to_bytes().unwrap() == hmm.to_bytes().unwrap();
    for forms in &probe {
        model_ok &= bilstm.tag_scores(forms).unwrap() == bilstm2.tag_scores(forms).unwrap();
        model_ok &= hmm.tag(forms).unwrap() == hmm2.tag(forms).unwrap();
    }
    check(
        corpus_ok && model_ok,
        format!("conllu read-write-read {corpus_ok}; model save-load-predict {model_ok} ({} probe sentences)", probe.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "gradient soundness", criterion_gradients),
        (2, "viterbi oracle", criterion_viterbi_oracle),
        (3, "freqbin binning", criterion_freqbin),
        (4, "overfit", criterion_overfit),
        (5, "subtoken generalization", criterion_subtoken),
        (6, "label noise", criterion_noise),
        (7, "learning curve", criterion_learning_curve),
        (8, "determinism", criterion_determinism),
        (9, "full-scale reproduction", criterion_full_scale),
        (10, "round trips", criterion_round_trips),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:>2} {status} [{name}] {detail} ({secs:.1}s)");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
