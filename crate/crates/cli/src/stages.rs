use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sufficiency_core::classifier::{self, ClassifierModel, TinyEncoder, TinyEncoderParams, VariantInput, VariantKind};
use sufficiency_core::corpus::{
    attach_labels, build_masked_pairs, extract_arguments, load_corpus, make_fold_plan, Argument, CorpusStats,
    Discrepancy, FoldPlan, LabelColumns, LabelTable, MaskedArgumentPair, ReferenceCounts,
};
use sufficiency_core::generator::{self, generate_conclusions, GeneratedConclusion, TinyDenoiser, TinyDenoiserParams};
use sufficiency_core::harness::reference::CNN_BASELINE;
use sufficiency_core::harness::{
    aggregate, audit_cells, evaluate_generation, fit_cell, render_text, run_generation, run_matrix, significance_table,
    variant_inputs, CellRecord, ExperimentMatrix, FoldGeneration, GeneratedIndex, Report, Scale, CELL_SCHEMA,
    REPORT_SCHEMA,
};
use sufficiency_core::metrics::{
    analyze_annotations as agreement_rows, classification_report, empirical_baseline, render_agreement_table,
    AnnotationRecord, HashedEmbedder, Level, Question, Scorer,
};
use sufficiency_core::records;
use sufficiency_core::seeds::{derive_seed, label_hash};

use crate::config::PipelineConfig;
use crate::UsageError;

pub const ARGUMENT_SCHEMA: &str = "argument";
pub const PAIR_SCHEMA: &str = "masked-pair";
pub const PLAN_SCHEMA: &str = "fold-plan";
pub const SUMMARY_SCHEMA: &str = "corpus-summary";
pub const GENERATOR_FOLD_SCHEMA: &str = "generator-fold";
pub const GENERATION_EVAL_SCHEMA: &str = "generation-eval";
pub const GENERATED_SCHEMA: &str = "generated-conclusion";
pub const INPUT_SCHEMA: &str = "variant-input";
pub const PREDICTION_SCHEMA: &str = "prediction";
pub const ANNOTATION_SCHEMA: &str = "annotation";

const ARGUMENTS_FILE: &str = "arguments.jsonl";
const PAIRS_FILE: &str = "pairs.jsonl";
const PLANS_FILE: &str = "folds.jsonl";
const SUMMARY_FILE: &str = "summary.jsonl";
const GENERATOR_FOLDS_FILE: &str = "generator_folds.jsonl";
const EVAL_FILE: &str = "evaluation.jsonl";
const MODELS_DIR: &str = "models";
const MODEL_FILE: &str = "model.json";
const TEST_INPUTS_FILE: &str = "test_inputs.jsonl";
const CELLS_FILE: &str = "cells.jsonl";
const REPORT_FILE: &str = "report.jsonl";
const REPORT_TEXT_FILE: &str = "report.txt";

/// Number of random pairs behind the BERTScore rescaling baseline.
const BASELINE_PAIRS: usize = 1000;

pub struct Context {
    pub config: PipelineConfig,
    pub force: bool,
}

impl Context {
    fn work(&self, rel: &str) -> PathBuf {
        self.config.work_dir.join(rel)
    }

    fn seed(&self, domain: &str) -> u64 {
        derive_seed(self.config.seed, &[label_hash(domain)])
    }

    /// Creates `dir` and makes sure none of `outputs` exist in it: they are removed when
    /// forced, otherwise the stage refuses to run.
    fn claim_dir(&self, dir: &Path, outputs: &[&str]) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for name in outputs {
            let path = dir.join(name);
            if !path.exists() {
                continue;
            }
            if !self.force {
                return Err(UsageError(format!("{} already exists (pass --force to overwrite)", path.display())).into());
            }
            if path.is_dir() {
                fs::remove_dir_all(&path)?;
            } else {
                fs::remove_file(&path)?;
            }
        }
        Ok(())
    }

    fn claim_file(&self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            return Err(UsageError(format!("{} already exists (pass --force to overwrite)", path.display())).into());
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        Ok(())
    }
}

fn input(path: Option<PathBuf>, default: PathBuf, what: &str) -> Result<PathBuf> {
    let path = path.unwrap_or(default);
    if !path.exists() {
        return Err(UsageError(format!("{what} {} not found", path.display())).into());
    }
    Ok(path)
}

fn read<T: serde::de::DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    records::read(path, schema).with_context(|| format!("reading {}", path.display()))
}

fn write<T: Serialize>(path: &Path, schema: &str, items: &[T]) -> Result<()> {
    records::write(path, schema, items, true).with_context(|| format!("writing {}", path.display()))
}

fn fold_dir(run: usize, fold: usize) -> String {
    format!("run{run:02}-fold{fold}")
}

/// Plans of the first `runs` runs; every fold of each of those runs must be present.
fn select_plans(plans: Vec<FoldPlan>, runs: usize) -> Result<(Vec<FoldPlan>, usize)> {
    let folds = plans.iter().map(|p| p.fold_index + 1).max().unwrap_or(0);
    let available = plans.iter().map(|p| p.run_index + 1).max().unwrap_or(0);
    if runs > available {
        return Err(UsageError(format!(
            "{runs} runs requested but the fold plans cover {available}; rebuild the corpus with --runs {runs} \
             or pass --runs / --desk-scale consistently"
        ))
        .into());
    }
    let selected: Vec<FoldPlan> = plans.into_iter().filter(|p| p.run_index < runs).collect();
    for run in 0..runs {
        for fold in 0..folds {
            if !selected.iter().any(|p| p.run_index == run && p.fold_index == fold) {
                bail!("fold plans lack run {run}, fold {fold}");
            }
        }
    }
    Ok((selected, folds))
}

fn bertscore_baseline(pairs: &[MaskedArgumentPair], embedder: &HashedEmbedder, seed: u64) -> Result<f64> {
    let texts: Vec<String> = pairs.iter().map(|p| p.conclusion.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    Ok(empirical_baseline(&texts, embedder, BASELINE_PAIRS, seed)?)
}

fn encoder(seed: u64) -> TinyEncoder {
    TinyEncoder::new(TinyEncoderParams::default(), seed)
}

fn scale(config: &PipelineConfig) -> Scale {
    if config.desk_scale {
        Scale::Desk
    } else {
        Scale::Full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub stats: CorpusStats,
    /// Differences from the published counts of the full corpus.
    pub discrepancies: Vec<Discrepancy>,
    pub exact_label_matches: usize,
    pub fuzzy_label_matches: usize,
}

pub fn build_corpus(ctx: &Context, out: Option<PathBuf>) -> Result<()> {
    let c = &ctx.config;
    let essays = input(
        Some(c.essays.clone().ok_or_else(|| UsageError("build-corpus needs --essays DIR".into()))?),
        PathBuf::new(),
        "essay directory",
    )?;
    let labels = input(
        Some(c.labels.clone().ok_or_else(|| UsageError("build-corpus needs --labels FILE".into()))?),
        PathBuf::new(),
        "label file",
    )?;
    let out = out.unwrap_or_else(|| ctx.work("corpus"));
    ctx.claim_dir(&out, &[ARGUMENTS_FILE, PAIRS_FILE, PLANS_FILE, SUMMARY_FILE])?;

    let docs = load_corpus(&essays)?;
    let mut arguments = Vec::new();
    let mut skipped = 0;
    for doc in &docs {
        let e = extract_arguments(doc);
        skipped += e.skipped_claims;
        arguments.extend(e.arguments);
    }
    let table = LabelTable::from_tsv(
        File::open(&labels).with_context(|| format!("opening {}", labels.display()))?,
        &LabelColumns::default(),
    )?;
    let (arguments, matches) = attach_labels(arguments, &table)?;
    let pairs = build_masked_pairs(&arguments)?;
    let essay_ids: BTreeSet<String> = docs.iter().map(|d| d.essay_id.clone()).collect();
    let plans = make_fold_plan(&essay_ids, c.runs, c.folds, ctx.seed("folds"))?;
    let stats = CorpusStats::compute(&docs, &arguments, &pairs, skipped);
    let summary = CorpusSummary {
        discrepancies: stats.discrepancies(&ReferenceCounts::FULL_CORPUS),
        stats,
        exact_label_matches: matches.exact,
        fuzzy_label_matches: matches.fuzzy,
    };

    write(&out.join(ARGUMENTS_FILE), ARGUMENT_SCHEMA, &arguments)?;
    write(&out.join(PAIRS_FILE), PAIR_SCHEMA, &pairs)?;
    write(&out.join(PLANS_FILE), PLAN_SCHEMA, &plans)?;
    write(&out.join(SUMMARY_FILE), SUMMARY_SCHEMA, std::slice::from_ref(&summary))?;
    c.persist(&out)?;

    println!("{}", summary.stats);
    println!("label rows matched: {} exact, {} fuzzy", matches.exact, matches.fuzzy);
    println!("fold plans: {} runs × {} folds", c.runs, c.folds);
    if summary.discrepancies.is_empty() {
        println!("matches the published full-corpus counts");
    } else {
        println!("differs from the published full-corpus counts:");
        for d in &summary.discrepancies {
            println!("  {d}");
        }
    }
    println!("written to {}", out.display());
    Ok(())
}

pub fn train_generator(
    ctx: &Context,
    pairs: Option<PathBuf>,
    folds: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let c = &ctx.config;
    let pairs_path = input(pairs, ctx.work("corpus").join(PAIRS_FILE), "pair file")?;
    let plans_path = input(folds, ctx.work("corpus").join(PLANS_FILE), "fold plan file")?;
    let out = out.unwrap_or_else(|| ctx.work("generator"));
    ctx.claim_dir(&out, &[GENERATOR_FOLDS_FILE, PLANS_FILE, EVAL_FILE, MODELS_DIR])?;

    let pairs: Vec<MaskedArgumentPair> = read(&pairs_path, PAIR_SCHEMA)?;
    let (plans, _) = select_plans(read(&plans_path, PLAN_SCHEMA)?, c.runs)?;
    let embedder = HashedEmbedder::default();
    let scorer =
        Scorer { embedder: &embedder, baseline: bertscore_baseline(&pairs, &embedder, ctx.seed("bertscore"))? };

    // Denoising pretraining sees masked sources only, never a conclusion.
    let sources: Vec<&str> = pairs.iter().map(|p| p.source.as_str()).collect();
    let pretrained = TinyDenoiser::pretrained(&sources, TinyDenoiserParams::default(), ctx.seed("pretrain"))?;
    let base = |train: &[&MaskedArgumentPair], seed: u64| -> generator::Result<TinyDenoiser> {
        Ok(if train.is_empty() {
            pretrained.clone()
        } else {
            pretrained.with_extended_vocab(train.iter().map(|p| p.target.as_str()), seed)
        })
    };
    let run =
        run_generation(&pairs, &plans, c.generator_variant, c.trials, ctx.seed("generator"), &base, &scorer, c.jobs)?;

    for ((r, f), model) in &run.models {
        let dir = out.join(MODELS_DIR).join(fold_dir(*r, *f));
        fs::create_dir_all(&dir)?;
        model.save(&dir.join(MODEL_FILE))?;
    }
    let mut fold_records = run.folds.clone();
    fold_records.sort_by_key(|f| (f.run, f.fold));
    let eval = evaluate_generation(&run.records, &pairs, c.generator_variant, &scorer)?;
    write(&out.join(GENERATOR_FOLDS_FILE), GENERATOR_FOLD_SCHEMA, &fold_records)?;
    write(&out.join(PLANS_FILE), PLAN_SCHEMA, &plans)?;
    write(&out.join(EVAL_FILE), GENERATION_EVAL_SCHEMA, &[eval])?;
    c.persist(&out)?;

    println!("{} generator: {} folds", c.generator_variant, fold_records.len());
    for f in &fold_records {
        let losses: Vec<String> = f.checkpoints.iter().map(|k| format!("{:.4}", k.train_loss)).collect();
        println!(
            "  run {} fold {}: train {} val {} test {}, epoch losses [{}], selected epoch {}",
            f.run,
            f.fold,
            f.n_train,
            f.n_val,
            f.n_test,
            losses.join(", "),
            f.selected_epoch.map_or("-".to_string(), |e| e.to_string())
        );
    }
    println!(
        "test-fold scores: rescaled BERTScore {:.3}, ROUGE-1 {:.2}, ROUGE-2 {:.2}, ROUGE-L {:.2} over {} conclusions",
        eval.rescaled_bertscore, eval.rouge.rouge1_f, eval.rouge.rouge2_f, eval.rouge.rouge_l_f, eval.conclusions
    );
    println!("written to {}", out.display());
    Ok(())
}

pub fn generate(ctx: &Context, model: Option<PathBuf>, pairs: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let model_dir = input(model, ctx.work("generator"), "generator directory")?;
    let pairs_path = input(pairs, ctx.work("corpus").join(PAIRS_FILE), "pair file")?;
    let out = out.unwrap_or_else(|| ctx.work("generated.jsonl"));
    ctx.claim_file(&out)?;

    let folds: Vec<FoldGeneration> = read(&model_dir.join(GENERATOR_FOLDS_FILE), GENERATOR_FOLD_SCHEMA)?;
    let plans: Vec<FoldPlan> = read(&model_dir.join(PLANS_FILE), PLAN_SCHEMA)?;
    let pairs: Vec<MaskedArgumentPair> = read(&pairs_path, PAIR_SCHEMA)?;
    let mut generated: Vec<GeneratedConclusion> = Vec::new();
    for f in &folds {
        let plan = plans
            .iter()
            .find(|p| p.run_index == f.run && p.fold_index == f.fold)
            .with_context(|| format!("no fold plan for run {}, fold {}", f.run, f.fold))?;
        let path = model_dir.join(MODELS_DIR).join(fold_dir(f.run, f.fold)).join(MODEL_FILE);
        let model = TinyDenoiser::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let (_, _, test) = plan.partition(&pairs, |p| p.essay_id.as_str());
        generated.extend(generate_conclusions(&model, &test, &f.config, f.run, f.fold)?);
    }
    generated.sort_by(|a, b| (a.run, a.fold, &a.pair_id).cmp(&(b.run, b.fold, &b.pair_id)));

    let runs: BTreeSet<usize> = folds.iter().map(|f| f.run).collect();
    let mut count: HashMap<(usize, &str), usize> = HashMap::new();
    for g in &generated {
        *count.entry((g.run, g.pair_id.as_str())).or_default() += 1;
    }
    for &run in &runs {
        for p in &pairs {
            match count.get(&(run, p.pair_id.as_str())) {
                Some(1) => {}
                Some(n) => bail!("pair {} generated {n} times in run {run}", p.pair_id),
                None => bail!("pair {} is in no test fold of run {run}", p.pair_id),
            }
        }
    }
    write(&out, GENERATED_SCHEMA, &generated)?;
    let fallbacks = generated.iter().filter(|g| g.extraction_fallback).count();
    println!(
        "{} conclusions for {} pairs over {} runs ({} extraction fallbacks)",
        generated.len(),
        pairs.len(),
        runs.len(),
        fallbacks
    );
    println!("written to {}", out.display());
    Ok(())
}

fn generated_index(path: &Path, needed: bool, why: &str) -> Result<(GeneratedIndex, Vec<GeneratedConclusion>)> {
    if !path.exists() {
        if needed {
            return Err(UsageError(format!(
                "{why} needs generated conclusions but {} does not exist; run generate or pass --generated",
                path.display()
            ))
            .into());
        }
        return Ok((GeneratedIndex::default(), vec![]));
    }
    let records: Vec<GeneratedConclusion> = read(path, GENERATED_SCHEMA)?;
    Ok((GeneratedIndex::new(records.clone()), records))
}

fn matrix_from_config(c: &PipelineConfig, variants: Vec<VariantKind>, folds: usize) -> ExperimentMatrix {
    ExperimentMatrix {
        variants,
        runs: c.runs,
        folds,
        trials_per_fold: c.trials,
        seed: c.seed,
        generator_variant: c.generator_variant,
        scale: scale(c),
    }
}

pub fn train_classifier(
    ctx: &Context,
    variant: VariantKind,
    arguments: Option<PathBuf>,
    generated: Option<PathBuf>,
    folds: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let c = &ctx.config;
    let args_path = input(arguments, ctx.work("corpus").join(ARGUMENTS_FILE), "argument file")?;
    let plans_path = input(folds, ctx.work("corpus").join(PLANS_FILE), "fold plan file")?;
    let generated_path = generated.unwrap_or_else(|| ctx.work("generated.jsonl"));
    let out = out.unwrap_or_else(|| ctx.work("classifier").join(variant.to_string()));
    ctx.claim_dir(&out, &[CELLS_FILE, MODELS_DIR])?;

    let arguments: Vec<Argument> = read(&args_path, ARGUMENT_SCHEMA)?;
    let (plans, n_folds) = select_plans(read(&plans_path, PLAN_SCHEMA)?, c.runs)?;
    let (generated, _) = generated_index(&generated_path, variant.needs_generated(), &format!("variant {variant}"))?;
    let matrix = matrix_from_config(c, vec![variant], n_folds);
    let fitted: Vec<(CellRecord, ClassifierModel<TinyEncoder>)> = matrix
        .cells()
        .par_iter()
        .map(|&key| fit_cell(key, &matrix, &arguments, &generated, &plans, &encoder))
        .collect::<Result<_, _>>()?;
    let cells: Vec<CellRecord> = fitted.iter().map(|(r, _)| r.clone()).collect();
    audit_cells(&cells, &plans)?;

    for (record, model) in &fitted {
        let dir = out.join(MODELS_DIR).join(fold_dir(record.key.run, record.key.fold));
        fs::create_dir_all(&dir)?;
        let file = File::create(dir.join(MODEL_FILE))?;
        serde_json::to_writer(BufWriter::new(file), model)?;
        let plan = plans.iter().find(|p| p.run_index == record.key.run && p.fold_index == record.key.fold).unwrap();
        let (_, _, test) = plan.partition(&arguments, |a| a.essay_id.as_str());
        let inputs = variant_inputs(&test, variant, &generated, record.key.run)?;
        write(&dir.join(TEST_INPUTS_FILE), INPUT_SCHEMA, &inputs)?;
    }
    write(&out.join(CELLS_FILE), CELL_SCHEMA, &cells)?;
    c.persist(&out)?;

    println!("{} classifier: {} folds, {} trials each", variant.table_label(), cells.len(), c.trials);
    for r in &cells {
        println!(
            "  run {} fold {}: batch {} lr {:.2e}, epoch {}, val macro F1 {:.3}, test macro F1 {:.3}",
            r.key.run,
            r.key.fold,
            r.config.batch_size(),
            r.config.learning_rate(),
            r.selected_epoch,
            r.validation_macro_f1,
            r.test.macro_f1
        );
    }
    let mean = cells.iter().map(|r| r.test.macro_f1).sum::<f64>() / cells.len().max(1) as f64;
    println!("mean test macro F1 {mean:.3}");
    println!("written to {}", out.display());
    Ok(())
}

pub fn predict(ctx: &Context, model: &Path, inputs: &Path, out: Option<PathBuf>) -> Result<()> {
    let model_path = if model.is_dir() { model.join(MODEL_FILE) } else { model.to_path_buf() };
    let model_path = input(Some(model_path), PathBuf::new(), "classifier model")?;
    let inputs_path = input(Some(inputs.to_path_buf()), PathBuf::new(), "input file")?;
    let out = out.unwrap_or_else(|| ctx.work("predictions.jsonl"));
    ctx.claim_file(&out)?;

    let model: ClassifierModel<TinyEncoder> =
        serde_json::from_reader(BufReader::new(File::open(&model_path)?)).context("parsing classifier model")?;
    let inputs: Vec<VariantInput> = read(&inputs_path, INPUT_SCHEMA)?;
    let predictions = classifier::predict(&model, &inputs)?;
    write(&out, PREDICTION_SCHEMA, &predictions)?;

    let predicted: Vec<_> = predictions.iter().map(|p| p.predicted_label).collect();
    let gold: Vec<_> = inputs.iter().map(|i| i.label).collect();
    println!("{} predictions ({})", predictions.len(), model.kind.table_label());
    if !inputs.is_empty() {
        let report = classification_report(&predicted, &gold)?;
        println!("accuracy {:.3}, macro F1 {:.3}", report.accuracy, report.macro_f1);
    }
    println!("written to {}", out.display());
    Ok(())
}

pub fn evaluate(
    ctx: &Context,
    matrix: Option<PathBuf>,
    corpus: Option<PathBuf>,
    generated: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let c = &ctx.config;
    let corpus_dir = input(corpus, ctx.work("corpus"), "corpus directory")?;
    let generated_path = generated.unwrap_or_else(|| ctx.work("generated.jsonl"));
    let out = out.unwrap_or_else(|| ctx.work("evaluation"));
    // An unfinished cell file is resumed; a finished evaluation is only replaced when forced.
    if out.join(REPORT_FILE).exists() || ctx.force {
        ctx.claim_dir(&out, &[REPORT_FILE, REPORT_TEXT_FILE, CELLS_FILE])?;
    }
    fs::create_dir_all(&out)?;

    let arguments: Vec<Argument> = read(&corpus_dir.join(ARGUMENTS_FILE), ARGUMENT_SCHEMA)?;
    let pairs: Vec<MaskedArgumentPair> = read(&corpus_dir.join(PAIRS_FILE), PAIR_SCHEMA)?;
    let summary: Option<CorpusSummary> =
        read::<CorpusSummary>(&corpus_dir.join(SUMMARY_FILE), SUMMARY_SCHEMA)?.into_iter().next();
    let all_plans: Vec<FoldPlan> = read(&corpus_dir.join(PLANS_FILE), PLAN_SCHEMA)?;

    let mut matrix = match matrix {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let m: ExperimentMatrix =
                toml::from_str(&text).map_err(|e| UsageError(format!("matrix {}: {e}", path.display())))?;
            m
        }
        None => {
            let folds = all_plans.iter().map(|p| p.fold_index + 1).max().unwrap_or(0);
            matrix_from_config(c, c.variants.clone(), folds)
        }
    };
    if c.desk_scale {
        matrix.scale = Scale::Desk;
    }
    matrix.validate().map_err(|e| UsageError(e.to_string()))?;
    let (plans, n_folds) = select_plans(all_plans, matrix.runs)?;
    if n_folds != matrix.folds {
        return Err(UsageError(format!("matrix has {} folds, the fold plans {n_folds}", matrix.folds)).into());
    }

    let needed = matrix.variants.iter().any(|v| v.needs_generated());
    let (index, records) = generated_index(&generated_path, needed, "a generated-conclusion variant")?;
    let variants: BTreeSet<_> = records.iter().map(|g| g.variant).collect();
    match variants.len() {
        0 => {}
        1 => matrix.generator_variant = *variants.first().unwrap(),
        _ => bail!("{} mixes generator variants", generated_path.display()),
    }

    let cells = run_matrix(&matrix, &arguments, &index, &plans, &encoder, Some(&out.join(CELLS_FILE)), c.jobs)?;
    let aggregates = aggregate(&cells, &matrix)?;
    let significance = significance_table(&aggregates, CNN_BASELINE.macro_f1.mean);
    let mut generation = Vec::new();
    if !records.is_empty() {
        let embedder = HashedEmbedder::default();
        let scorer =
            Scorer { embedder: &embedder, baseline: bertscore_baseline(&pairs, &embedder, ctx.seed("bertscore"))? };
        generation.push(evaluate_generation(&records, &pairs, matrix.generator_variant, &scorer)?);
    }
    let report = Report {
        scale: matrix.scale,
        corpus: summary.as_ref().map(|s| s.stats.clone()),
        corpus_discrepancies: summary.map(|s| s.discrepancies).unwrap_or_default(),
        matrix: Some(matrix),
        generation,
        aggregates,
        significance,
    };
    let text = render_text(&report);
    write(&out.join(REPORT_FILE), REPORT_SCHEMA, &[report])?;
    fs::write(out.join(REPORT_TEXT_FILE), &text)?;
    c.persist(&out)?;
    print!("{text}");
    println!("written to {}", out.display());
    Ok(())
}

pub fn analyze_annotations(ctx: &Context, records_path: &Path, level: Level, out: Option<PathBuf>) -> Result<()> {
    let path = input(Some(records_path.to_path_buf()), PathBuf::new(), "annotation file")?;
    let records: Vec<AnnotationRecord> = read(&path, ANNOTATION_SCHEMA)?;
    let rows = agreement_rows(&records, level)?;
    let mut text = render_agreement_table(&rows);
    for q in Question::ALL {
        text.push_str(&format!("{q:?}: {}\n", q.text()));
    }
    match out {
        Some(out) => {
            ctx.claim_file(&out)?;
            fs::write(&out, &text)?;
            println!("written to {}", out.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn report(ctx: &Context, dir: Option<PathBuf>, as_records: bool, out: Option<PathBuf>) -> Result<()> {
    let dir = input(dir, ctx.work("evaluation"), "evaluation directory")?;
    let reports: Vec<Report> = read(&dir.join(REPORT_FILE), REPORT_SCHEMA)?;
    let [report] = reports.as_slice() else {
        bail!("{} holds {} reports, expected one", dir.join(REPORT_FILE).display(), reports.len());
    };
    let text =
        if as_records { records::to_string(REPORT_SCHEMA, std::slice::from_ref(report))? } else { render_text(report) };
    match out {
        Some(out) => {
            ctx.claim_file(&out)?;
            fs::write(&out, &text)?;
            println!("written to {}", out.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
