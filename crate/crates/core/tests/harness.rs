use mediatopic::corpus::LabeledDoc;
use mediatopic::harness::{
    self, ContractPaths, ManifestStore, MockTrainer, SubprocessTrainer, SweepConfig, SyntheticSpec, Trainer,
    TrainerConfig, TrainerJob, TrainerOutput, MOCK_TRAINER_ID,
};
use mediatopic::schema::LabelSchema;
use mediatopic::{Error, Result};

fn data(seed: u64) -> (Vec<LabeledDoc>, Vec<LabeledDoc>) {
    let corpus = harness::generate_synthetic(
        &SyntheticSpec {
            n_docs: 600,
            seed,
            ..SyntheticSpec::default()
        },
        &LabelSchema::builtin(),
    )
    .unwrap();
    let gold = corpus.gold();
    let test: Vec<LabeledDoc> = gold.iter().skip(1).step_by(6).take(100).cloned().collect();
    let train: Vec<LabeledDoc> = gold.iter().filter(|d| !test.contains(d)).take(400).cloned().collect();
    (train, test)
}

fn job(train: Vec<LabeledDoc>, test: &[LabeledDoc]) -> TrainerJob {
    TrainerJob {
        train,
        dev: Vec::new(),
        test: test.iter().map(LabeledDoc::without_label).collect(),
        config: TrainerConfig {
            epochs: Some(3),
            ..TrainerConfig::default()
        },
        seed: 1,
    }
}

fn accuracy(test: &[LabeledDoc], out: &TrainerOutput) -> f64 {
    let hits = test
        .iter()
        .zip(&out.predictions)
        .filter(|(d, p)| d.id == p.id && d.label.as_deref() == Some(p.label.as_str()))
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn mock_trainer_accuracy_is_pinned() {
    let (train, test) = data(11);
    assert_eq!((train.len(), test.len()), (400, 100));
    let out = MockTrainer.train_and_predict(&job(train, &test)).unwrap();
    assert_eq!(out.metadata.trainer_id, MOCK_TRAINER_ID);
    assert_eq!(out.metadata.epochs_run, 3);
    // Regression pin: changing tokenization, weighting or the generator moves this.
    let acc = accuracy(&test, &out);
    assert_eq!(format!("{acc:.2}"), "0.93", "accuracy {acc}");
}

#[test]
fn subprocess_contract_matches_in_process_trainer() {
    let (train, test) = data(12);
    let job = job(train, &test);
    let direct = MockTrainer.train_and_predict(&job).unwrap();
    let external = SubprocessTrainer::new(env!("CARGO_BIN_EXE_mediatopic"), ["mock-train"]);
    let via_files = external.train_and_predict(&job).unwrap();
    assert_eq!(via_files.predictions, direct.predictions);
    assert_eq!(via_files.metadata.epochs_run, 3);
}

#[test]
fn contract_files_round_trip() {
    let (train, test) = data(13);
    let job = job(train, &test);
    let dir = tempfile::tempdir().unwrap();
    let paths = ContractPaths::in_dir(dir.path());
    paths.write_job(&job).unwrap();
    assert_eq!(paths.read_job().unwrap(), job);
    assert!(paths.read_job().unwrap().test.iter().all(|d| d.label.is_none()));
    std::fs::create_dir_all(&paths.out).unwrap();
    let out = harness::run_contract(&paths, &MockTrainer).unwrap();
    assert_eq!(paths.read_output().unwrap().predictions, out.predictions);
}

#[test]
fn failing_subprocess_reports_stderr() {
    let (train, test) = data(14);
    let broken = SubprocessTrainer::new(env!("CARGO_BIN_EXE_mediatopic"), ["mock-train", "--bogus"]);
    let err = broken.train_and_predict(&job(train, &test)).unwrap_err();
    assert!(matches!(&err, Error::Trainer(m) if m.contains("--bogus")), "{err}");
}

#[test]
fn fixed_subset_seed_gives_zero_spread() {
    let (train, test) = data(15);
    let config = SweepConfig {
        sizes: vec![150],
        iterations: 3,
        seed: 2,
        fixed_subset_seed: true,
        epochs_override: Some(1),
        ..SweepConfig::default()
    };
    let store = ManifestStore::in_memory();
    let report = harness::run_sweep(&train, &[], &test, &config, &LabelSchema::builtin(), &MockTrainer, &store, vec![])
        .unwrap();
    let scores = report.rows[0].scores.as_ref().unwrap();
    assert_eq!(scores.macro_f1.std, 0.0);
    assert_eq!(scores.macro_f1.k, 3);
    let digests: Vec<_> = store.manifests().iter().map(|m| m.subset.ids_digest.clone()).collect();
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
}

/// Fails every job of one training size.
struct FlakyTrainer(usize);

impl Trainer for FlakyTrainer {
    fn id(&self) -> String {
        "flaky".into()
    }

    fn train_and_predict(&self, job: &TrainerJob) -> Result<TrainerOutput> {
        if job.train.len() == self.0 {
            return Err(Error::Trainer("out of memory".into()));
        }
        MockTrainer.train_and_predict(job)
    }
}

#[test]
fn failed_runs_mark_sizes_incomplete() {
    let (train, test) = data(16);
    let dir = tempfile::tempdir().unwrap();
    let store = ManifestStore::open(dir.path().join("runs.jsonl")).unwrap();
    let config = SweepConfig {
        sizes: vec![100, 200],
        iterations: 2,
        epochs_override: Some(1),
        ..SweepConfig::default()
    };
    let report = harness::run_sweep(
        &train,
        &[],
        &test,
        &config,
        &LabelSchema::builtin(),
        &FlakyTrainer(200),
        &store,
        vec![],
    )
    .unwrap();
    let row = |size| report.rows.iter().find(|r| r.size == size).unwrap();
    assert!(!row(100).incomplete && row(100).scores.is_some());
    assert!(row(200).incomplete && row(200).scores.is_none());
    assert_eq!(row(200).failed, 2);
    assert!(report.render().contains("incomplete"));

    let reloaded = ManifestStore::open(dir.path().join("runs.jsonl")).unwrap().manifests();
    assert_eq!(reloaded.len(), 4);
    assert_eq!(harness::SweepReport::from_manifests(&reloaded, vec![]).unwrap(), report);
}

#[test]
fn unscheduled_sizes_need_an_override() {
    let (train, test) = data(17);
    let config = SweepConfig {
        sizes: vec![100],
        iterations: 1,
        ..SweepConfig::default()
    };
    let err = harness::run_sweep(
        &train,
        &[],
        &test,
        &config,
        &LabelSchema::builtin(),
        &MockTrainer,
        &ManifestStore::in_memory(),
        vec![],
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn symmetric_languages_give_matching_diagonal() {
    let schema = LabelSchema::builtin();
    let corpus = harness::generate_synthetic(
        &SyntheticSpec { n_docs: 3000, seed: 5, ..SyntheticSpec::default() },
        &schema,
    )
    .unwrap();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, doc) in corpus.gold().into_iter().enumerate() {
        if i % 4 == 0 { test.push(doc) } else { train.push(doc) }
    }
    let report = harness::run_crosslingual_matrix(
        &train,
        &[],
        &test,
        &harness::MatrixConfig {
            langs: ["sl", "hr", "el", "ca"].map(String::from).to_vec(),
            n: 400,
            iterations: 3,
            epochs_override: Some(1),
            ..harness::MatrixConfig::default()
        },
        &schema,
        &MockTrainer,
        &ManifestStore::in_memory(),
        Vec::new(),
    )
    .unwrap();
    // Every language is generated from the same distribution, so diagonal
    // accuracies differ only by test-set sampling noise. Bound the spread by
    // four standard errors of a difference of two binomial proportions.
    let langs = ["sl", "hr", "el", "ca"];
    let diag: Vec<f64> = langs
        .iter()
        .map(|l| report.cell(l, l).unwrap().micro_f1.as_ref().unwrap().mean)
        .collect();
    let m = langs
        .iter()
        .map(|l| test.iter().filter(|d| d.lang == *l).count())
        .min()
        .unwrap() as f64;
    let p = diag.iter().sum::<f64>() / diag.len() as f64;
    let tolerance = 4.0 * (2.0 * p * (1.0 - p) / m).sqrt();
    let spread = diag.iter().cloned().fold(f64::MIN, f64::max) - diag.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= tolerance, "diagonal {diag:?}, spread {spread} > {tolerance}");
    for l in langs {
        let off: Vec<f64> = langs
            .iter()
            .filter(|o| **o != l)
            .map(|o| report.cell(o, l).unwrap().micro_f1.as_ref().unwrap().mean)
            .collect();
        assert!(off.iter().all(|&x| x < p), "{l}: {off:?} vs diagonal mean {p}");
    }
}
