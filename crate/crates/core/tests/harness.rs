use std::collections::{BTreeSet, HashMap};

use sufficiency_core::classifier::{TinyEncoder, TinyEncoderParams, VariantKind};
use sufficiency_core::corpus::{build_masked_pairs, make_fold_plan, Argument, CharRange, Label};
use sufficiency_core::generator::{GenerationVariant, TinyDenoiser, TinyDenoiserParams};
use sufficiency_core::harness::{
    aggregate, audit_cells, run_generation, run_matrix, ExperimentMatrix, GeneratedIndex, HarnessError,
};
use sufficiency_core::metrics::{HashedEmbedder, Scorer};

const TOPICS: [&str; 6] = ["museums", "homework", "cities", "sports", "travel", "phones"];

fn argument(essay: usize, para: usize) -> Argument {
    let topic = TOPICS[(essay + para) % TOPICS.len()];
    let sufficient = para % 3 != 2;
    let premises: Vec<String> = (0..if sufficient { 3 } else { 1 })
        .map(|k| format!("Reason {k} about {topic} holds in case {essay}"))
        .collect();
    let conclusion = format!("{topic} matter for essay {essay}");
    let prefix = premises.iter().map(|p| format!("{p}. ")).collect::<String>() + "Therefore, ";
    let start = prefix.chars().count();
    Argument {
        argument_id: format!("essay{essay:03}_p{para}"),
        essay_id: format!("essay{essay:03}"),
        full_text: format!("{prefix}{conclusion}."),
        premises,
        conclusion_char_range: CharRange::new(start, start + conclusion.chars().count()),
        conclusion,
        other_conclusions: vec![],
        label: Some(if sufficient { Label::Sufficient } else { Label::Insufficient }),
    }
}

fn corpus() -> Vec<Argument> {
    (1..=10).flat_map(|e| (1..=3).map(move |p| argument(e, p))).collect()
}

fn essay_ids(args: &[Argument]) -> BTreeSet<String> {
    args.iter().map(|a| a.essay_id.clone()).collect()
}

fn matrix() -> ExperimentMatrix {
    ExperimentMatrix {
        variants: vec![VariantKind::Plain, VariantKind::ConclusionOnly],
        runs: 2,
        folds: 5,
        trials_per_fold: 1,
        ..ExperimentMatrix::desk(11)
    }
}

fn encoder(seed: u64) -> TinyEncoder {
    TinyEncoder::new(TinyEncoderParams { buckets: 512, ..Default::default() }, seed)
}

#[test]
fn interrupted_matrix_resumes_to_identical_records() {
    let args = corpus();
    let plans = make_fold_plan(&essay_ids(&args), 2, 5, 3).unwrap();
    let m = matrix();
    let gen = GeneratedIndex::default();
    let dir = tempfile::tempdir().unwrap();

    let whole = dir.path().join("whole.jsonl");
    let uninterrupted = run_matrix(&m, &args, &gen, &plans, &encoder, Some(&whole), 4).unwrap();
    assert_eq!(uninterrupted.len(), 20);

    // keep the header and the first five finished cells
    let partial = dir.path().join("partial.jsonl");
    let text = std::fs::read_to_string(&whole).unwrap();
    let kept: Vec<&str> = text.lines().take(6).collect();
    std::fs::write(&partial, kept.join("\n") + "\n").unwrap();
    let resumed = run_matrix(&m, &args, &gen, &plans, &encoder, Some(&partial), 2).unwrap();
    assert_eq!(resumed, uninterrupted);
    assert_eq!(aggregate(&resumed, &m).unwrap(), aggregate(&uninterrupted, &m).unwrap());

    let again = run_matrix(&m, &args, &gen, &plans, &encoder, None, 1).unwrap();
    assert_eq!(again, uninterrupted);
}

#[test]
fn audit_rejects_a_leaked_cell() {
    let args = corpus();
    let plans = make_fold_plan(&essay_ids(&args), 2, 5, 3).unwrap();
    let m = ExperimentMatrix { variants: vec![VariantKind::Plain], runs: 1, ..matrix() };
    let mut cells = run_matrix(&m, &args, &GeneratedIndex::default(), &plans, &encoder, None, 4).unwrap();
    audit_cells(&cells, &plans).unwrap();
    let leaked = cells[0].test_essays.iter().next().unwrap().clone();
    cells[0].fit_essays.insert(leaked.clone());
    match audit_cells(&cells, &plans) {
        Err(HarnessError::Leak { essays, .. }) => assert_eq!(essays, vec![leaked]),
        other => panic!("expected a leak, got {other:?}"),
    }
}

#[test]
fn generation_covers_every_pair_once_per_run_and_feeds_generated_variants() {
    let args = corpus();
    let pairs = build_masked_pairs(&args).unwrap();
    let plans = make_fold_plan(&essay_ids(&args), 2, 5, 3).unwrap();
    let embedder = HashedEmbedder::default();
    let scorer = Scorer { embedder: &embedder, baseline: 0.5 };
    let sources: Vec<&str> = pairs.iter().map(|p| p.source.as_str()).collect();
    let hyper = TinyDenoiserParams { pretrain_epochs: 1, ..Default::default() };
    let base = |_: &[&_], seed: u64| TinyDenoiser::pretrained(&sources, hyper, seed);
    let out = run_generation(&pairs, &plans, GenerationVariant::Unsupervised, 1, 5, &base, &scorer, 4).unwrap();

    let mut seen: HashMap<(usize, String), usize> = HashMap::new();
    for r in &out.records {
        *seen.entry((r.run, r.pair_id.clone())).or_default() += 1;
        let plan = plans.iter().find(|p| p.run_index == r.run && p.fold_index == r.fold).unwrap();
        let essay = &pairs.iter().find(|p| p.pair_id == r.pair_id).unwrap().essay_id;
        assert!(plan.test_essays.contains(essay), "{} generated outside its test fold", r.pair_id);
    }
    assert_eq!(seen.len(), 2 * pairs.len());
    assert!(seen.values().all(|&n| n == 1));
    assert!(out.folds.iter().all(|f| f.checkpoints.is_empty() && f.selected_epoch.is_none()));

    let gen = GeneratedIndex::new(out.records);
    let m = ExperimentMatrix { variants: vec![VariantKind::All], runs: 2, ..matrix() };
    let cells = run_matrix(&m, &args, &gen, &plans, &encoder, None, 4).unwrap();
    assert_eq!(cells.len(), 10);

    let missing = run_matrix(&m, &args, &GeneratedIndex::default(), &plans, &encoder, None, 4);
    assert!(matches!(missing, Err(HarnessError::MissingGenerated { .. })));
}
