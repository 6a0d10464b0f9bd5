//! The pipeline commands. Every command works through files in the run's
//! output directory and updates the manifest, so a run can be resumed,
//! audited and reproduced step by step.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cldfa_core::corpus::{
    self, build_vocab, encode_text, generate_synthetic_bilingual, tokenize, EmbeddingUpdates,
    LabeledSet, ParallelCorpus, UnlabeledSet, Vocabulary,
};
use cldfa_core::distill::{
    fine_tune_target, soft_labels, temperature_ensemble, train_source, train_target_distill,
    Ensemble,
};
use cldfa_core::eval::{
    accuracy, accuracy_with, divergence_score, extract_split_features, project_features_2d,
    write_projection_svg, EvalReport, FeatureSplit,
};
use cldfa_core::kcnn::{init_model, load_checkpoint, save_checkpoint, KcnnModel, ModelConfig};

use crate::config::{DataSource, ExperimentConfig, SplitKind};
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingDependency(path.to_path_buf()))
    }
}

fn load_manifest(cfg: &ExperimentConfig) -> RunManifest {
    RunManifest::load_or_new(&cfg.out, cfg.seed, cfg.raw.clone())
}

/// Filename fragment for a temperature (5 -> "5", 0.5 -> "0p5").
fn t_tag(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}").replace('.', "p")
    }
}

/// Generates the synthetic corpus and writes every split plus the word-level
/// translation lexicon into the output directory.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<()> {
    let DataSource::Synthetic(spec) = &cfg.source else {
        return Err(CliError::Config(
            "synth requires a [synth] section in the config".into(),
        ));
    };
    ensure_out_dir(cfg)?;
    let started = Instant::now();
    let corpus = generate_synthetic_bilingual(spec, cfg.seed)?;

    let mut manifest = load_manifest(cfg);
    let mut write = |name: &str, action: &dyn Fn(&Path) -> cldfa_core::Result<()>| -> Result<()> {
        let path = cfg.out_path(name);
        action(&path)?;
        manifest.record_artifact(name, &path)
    };
    write("l_src.tsv", &|p| {
        corpus::write_labeled_tsv(&corpus.l_src, &corpus.src_vocab, p)
    })?;
    write("u_src.tsv", &|p| {
        corpus::write_unlabeled(&corpus.u_src, &corpus.src_vocab, p)
    })?;
    write("u_parl.tsv", &|p| {
        corpus::write_parallel_tsv(&corpus.u_parl, &corpus.src_vocab, &corpus.tgt_vocab, p)
    })?;
    write("t_tgt.tsv", &|p| {
        corpus::write_labeled_tsv(&corpus.t_tgt, &corpus.tgt_vocab, p)
    })?;
    write("labeled_tgt.tsv", &|p| {
        corpus::write_labeled_tsv(&corpus.labeled_tgt, &corpus.tgt_vocab, p)
    })?;
    write("lexicon.tsv", &|p| {
        corpus::synthetic::write_lexicon(&corpus.cipher, &corpus.tgt_vocab, &corpus.src_vocab, p)
    })?;

    manifest.record_timing("synth", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;
    println!(
        "synth: wrote {} labeled, {} parallel, {} test documents to {}",
        corpus.l_src.len(),
        corpus.u_parl.len(),
        corpus.t_tgt.len(),
        cfg.out.display()
    );
    Ok(())
}

/// Raw text rows of every split the pipeline may need.
struct RawSplits {
    l_src: Vec<(usize, String)>,
    parl: Vec<(String, String)>,
    t_tgt: Option<Vec<(usize, String)>>,
    u_tgt: Option<Vec<String>>,
    labeled_tgt: Option<Vec<(usize, String)>>,
    embeddings_src: Option<PathBuf>,
    embeddings_tgt: Option<PathBuf>,
}

fn load_raw(cfg: &ExperimentConfig) -> Result<RawSplits> {
    let (l_src_path, parl_path, t_tgt_path, u_tgt_path, labeled_tgt_path, emb_src, emb_tgt) =
        match &cfg.source {
            DataSource::Synthetic(_) => (
                cfg.out_path("l_src.tsv"),
                cfg.out_path("u_parl.tsv"),
                Some(cfg.out_path("t_tgt.tsv")),
                None,
                Some(cfg.out_path("labeled_tgt.tsv")),
                None,
                None,
            ),
            DataSource::Files(paths) => (
                paths.l_src.clone(),
                paths.u_parl.clone(),
                paths.t_tgt.clone(),
                paths.u_tgt.clone(),
                None,
                paths.embeddings_src.clone(),
                paths.embeddings_tgt.clone(),
            ),
        };
    require_file(&l_src_path)?;
    require_file(&parl_path)?;
    let read_opt_labeled = |p: &Option<PathBuf>| -> Result<Option<Vec<(usize, String)>>> {
        match p {
            Some(path) if path.is_file() => Ok(Some(corpus::read_labeled_tsv(path)?)),
            _ => Ok(None),
        }
    };
    Ok(RawSplits {
        l_src: corpus::read_labeled_tsv(&l_src_path)?,
        parl: corpus::read_parallel_tsv(&parl_path)?,
        t_tgt: read_opt_labeled(&t_tgt_path)?,
        u_tgt: match &u_tgt_path {
            Some(path) if path.is_file() => Some(corpus::read_lines(path)?),
            _ => None,
        },
        labeled_tgt: read_opt_labeled(&labeled_tgt_path)?,
        embeddings_src: emb_src,
        embeddings_tgt: emb_tgt,
    })
}

fn encode_labeled(
    rows: &[(usize, String)],
    vocab: &Vocabulary,
    max_len: usize,
    name: &str,
) -> Result<LabeledSet> {
    let mut docs = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, text) in rows {
        docs.push(encode_text(text, vocab, max_len)?);
        labels.push(*label);
    }
    Ok(LabeledSet::new(docs, labels, name, vocab)?)
}

fn num_classes_of(cfg: &ExperimentConfig, raw: &RawSplits) -> usize {
    match &cfg.source {
        DataSource::Synthetic(spec) => spec.num_classes,
        DataSource::Files(_) => raw
            .l_src
            .iter()
            .map(|(label, _)| label + 1)
            .max()
            .unwrap_or(2)
            .max(2),
    }
}

fn load_embedding_updates(
    path: &Option<PathBuf>,
    vocab: &Vocabulary,
) -> Result<Option<EmbeddingUpdates>> {
    match path {
        Some(p) => {
            require_file(p)?;
            let updates = corpus::load_embeddings_text(p, vocab)?;
            println!(
                "embeddings: matched {} of {} vocabulary tokens from {}",
                updates.matched,
                vocab.size() - 2,
                p.display()
            );
            Ok(Some(updates))
        }
        None => Ok(None),
    }
}

/// Step 1: builds the source vocabulary, trains the source classifier with
/// optional adversarial adaptation to the parallel corpus's source side, and
/// writes `theta_src.json`.
pub fn cmd_train_source(cfg: &ExperimentConfig) -> Result<()> {
    ensure_out_dir(cfg)?;
    let started = Instant::now();
    let raw = load_raw(cfg)?;

    let mut token_lists: Vec<Vec<String>> =
        raw.l_src.iter().map(|(_, text)| tokenize(text)).collect();
    token_lists.extend(raw.parl.iter().map(|(src, _)| tokenize(src)));
    let vocab = build_vocab(&token_lists, cfg.min_count, cfg.max_vocab)?;

    let model_cfg = ModelConfig {
        num_classes: num_classes_of(cfg, &raw),
        ..cfg.model.clone()
    };
    let l_src = encode_labeled(&raw.l_src, &vocab, model_cfg.max_len, "l_src")?;
    let adapt = if cfg.step1.adversarial.is_some() {
        let docs = raw
            .parl
            .iter()
            .map(|(src, _)| encode_text(src, &vocab, model_cfg.max_len))
            .collect::<cldfa_core::Result<Vec<_>>>()?;
        Some(UnlabeledSet::new(docs, "u_parl_src", &vocab))
    } else {
        None
    };

    let pretrained = load_embedding_updates(&raw.embeddings_src, &vocab)?;
    let model = init_model(&vocab, &model_cfg, cfg.seed, pretrained.as_ref())?;
    let outcome = train_source(model, &l_src, adapt.as_ref(), &cfg.step1)?;

    let mut manifest = load_manifest(cfg);
    let ckpt = cfg.out_path("theta_src.json");
    save_checkpoint(&outcome.model, None, &ckpt)?;
    manifest.record_artifact("theta_src", &ckpt)?;
    let trace_path = cfg.out_path("trace_step1.csv");
    outcome.trace.write_csv(&trace_path)?;
    manifest.record_artifact("trace_step1", &trace_path)?;
    manifest.record_timing("train_source", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;

    println!(
        "train-source: vocab {} tokens, final epoch loss {:.4}, saved {}",
        vocab.size(),
        outcome.trace.final_epoch_loss().unwrap_or(f64::NAN),
        ckpt.display()
    );
    Ok(())
}

/// Everything step 2 needs that is derived from files.
struct DistillInputs {
    src_model: KcnnModel,
    parallel: ParallelCorpus,
    tgt_vocab: Vocabulary,
    tgt_model_cfg: ModelConfig,
    adapt: Option<UnlabeledSet>,
    pretrained_tgt: Option<EmbeddingUpdates>,
}

fn prepare_distill(cfg: &ExperimentConfig) -> Result<DistillInputs> {
    let src_path = cfg.out_path("theta_src.json");
    require_file(&src_path)?;
    let (src_model, _) = load_checkpoint(&src_path)?;
    let raw = load_raw(cfg)?;

    // target vocabulary over every target-language text the run can see;
    // labels are never read here
    let mut token_lists: Vec<Vec<String>> =
        raw.parl.iter().map(|(_, tgt)| tokenize(tgt)).collect();
    if let Some(rows) = &raw.t_tgt {
        token_lists.extend(rows.iter().map(|(_, text)| tokenize(text)));
    }
    if let Some(lines) = &raw.u_tgt {
        token_lists.extend(lines.iter().map(|text| tokenize(text)));
    }
    if let Some(rows) = &raw.labeled_tgt {
        token_lists.extend(rows.iter().map(|(_, text)| tokenize(text)));
    }
    let tgt_vocab = build_vocab(&token_lists, cfg.min_count, cfg.max_vocab)?;

    let tgt_model_cfg = ModelConfig {
        num_classes: src_model.config.num_classes,
        ..cfg.model.clone()
    };

    let src_docs = raw
        .parl
        .iter()
        .map(|(src, _)| encode_text(src, &src_model.vocab, src_model.config.max_len))
        .collect::<cldfa_core::Result<Vec<_>>>()?;
    let tgt_docs = raw
        .parl
        .iter()
        .map(|(_, tgt)| encode_text(tgt, &tgt_vocab, tgt_model_cfg.max_len))
        .collect::<cldfa_core::Result<Vec<_>>>()?;
    let parallel = ParallelCorpus::new(src_docs, tgt_docs, &src_model.vocab, &tgt_vocab)?;

    // adaptation pool: unlabeled target test documents plus any extra
    // unlabeled target documents
    let adapt = if cfg.step2.adversarial.is_some() {
        let mut docs = Vec::new();
        if let Some(rows) = &raw.t_tgt {
            for (_, text) in rows {
                docs.push(encode_text(text, &tgt_vocab, tgt_model_cfg.max_len)?);
            }
        }
        if let Some(lines) = &raw.u_tgt {
            for text in lines {
                docs.push(encode_text(text, &tgt_vocab, tgt_model_cfg.max_len)?);
            }
        }
        Some(UnlabeledSet::new(docs, "t_tgt_u_tgt", &tgt_vocab))
    } else {
        None
    };

    let pretrained_tgt = load_embedding_updates(&raw.embeddings_tgt, &tgt_vocab)?;
    Ok(DistillInputs {
        src_model,
        parallel,
        tgt_vocab,
        tgt_model_cfg,
        adapt,
        pretrained_tgt,
    })
}

/// Step 2: soft labels from the source checkpoint, then distillation into a
/// target model (or one model per temperature when a set is configured).
pub fn cmd_distill(cfg: &ExperimentConfig) -> Result<()> {
    ensure_out_dir(cfg)?;
    let started = Instant::now();
    let inputs = prepare_distill(cfg)?;
    let mut manifest = load_manifest(cfg);

    match &cfg.temperatures {
        None => {
            let t = cfg.step2.temperature;
            let soft = soft_labels(&inputs.src_model, &inputs.parallel, t)?;
            let soft_path = cfg.out_path(&format!("soft_labels_T{}.csv", t_tag(t)));
            soft.write_csv(&soft_path)?;
            manifest.record_artifact(&format!("soft_labels_T{}", t_tag(t)), &soft_path)?;

            let init = init_model(
                &inputs.tgt_vocab,
                &inputs.tgt_model_cfg,
                cfg.seed,
                inputs.pretrained_tgt.as_ref(),
            )?;
            let outcome = train_target_distill(
                init,
                &inputs.parallel,
                &soft,
                inputs.adapt.as_ref(),
                &cfg.step2,
            )?;
            let ckpt = cfg.out_path("theta_tgt.json");
            save_checkpoint(&outcome.model, None, &ckpt)?;
            manifest.record_artifact("theta_tgt", &ckpt)?;
            let trace_path = cfg.out_path("trace_step2.csv");
            outcome.trace.write_csv(&trace_path)?;
            manifest.record_artifact("trace_step2", &trace_path)?;
            println!(
                "distill: T={t}, final epoch loss {:.4}, saved {}",
                outcome.trace.final_epoch_loss().unwrap_or(f64::NAN),
                ckpt.display()
            );
        }
        Some(ts) => {
            let out = temperature_ensemble(
                &inputs.src_model,
                &inputs.parallel,
                inputs.adapt.as_ref(),
                &inputs.tgt_vocab,
                &inputs.tgt_model_cfg,
                inputs.pretrained_tgt.as_ref(),
                &cfg.step2,
                ts,
            )?;
            for ((member, soft), (trace, &t)) in out
                .ensemble
                .members
                .iter()
                .zip(&out.soft_sets)
                .zip(out.traces.iter().zip(ts))
            {
                let tag = t_tag(t);
                let ckpt = cfg.out_path(&format!("theta_tgt_T{tag}.json"));
                save_checkpoint(member, None, &ckpt)?;
                manifest.record_artifact(&format!("theta_tgt_T{tag}"), &ckpt)?;
                let soft_path = cfg.out_path(&format!("soft_labels_T{tag}.csv"));
                soft.write_csv(&soft_path)?;
                manifest.record_artifact(&format!("soft_labels_T{tag}"), &soft_path)?;
                let trace_path = cfg.out_path(&format!("trace_step2_T{tag}.csv"));
                trace.write_csv(&trace_path)?;
                manifest.record_artifact(&format!("trace_step2_T{tag}"), &trace_path)?;
            }
            println!(
                "distill: trained {} ensemble members for T in {ts:?}",
                out.ensemble.members.len()
            );
        }
    }
    manifest.record_timing("distill", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;
    Ok(())
}

fn load_models(cfg: &ExperimentConfig, names: &[String]) -> Result<Vec<KcnnModel>> {
    let mut models = Vec::with_capacity(names.len());
    for name in names {
        let path = cfg.out_path(name);
        require_file(&path)?;
        let (model, _) = load_checkpoint(&path)?;
        models.push(model);
    }
    if models.is_empty() {
        return Err(CliError::Config("eval.checkpoint names no checkpoints".into()));
    }
    let fp = models[0].vocab.fingerprint();
    if models.iter().any(|m| m.vocab.fingerprint() != fp) {
        return Err(CliError::Config(
            "ensemble members use different vocabularies".into(),
        ));
    }
    Ok(models)
}

fn eval_models(
    cfg: &ExperimentConfig,
    checkpoint_names: &[String],
    data_name: &str,
    report_name: &str,
) -> Result<EvalReport> {
    let models = load_models(cfg, checkpoint_names)?;
    let data_path = cfg.out_path(data_name);
    require_file(&data_path)?;
    let rows = corpus::read_labeled_tsv(&data_path)?;
    let split_name = data_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eval".into());
    let set = encode_labeled(&rows, &models[0].vocab, models[0].config.max_len, &split_name)?;

    let report = if models.len() == 1 {
        accuracy(&models[0], &set)?
    } else {
        let ensemble = Ensemble {
            members: models.clone(),
            temperatures: Vec::new(),
        };
        let hash = models
            .iter()
            .map(|m| m.content_hash()[..12].to_string())
            .collect::<Vec<_>>()
            .join("+");
        accuracy_with(
            |doc| ensemble.predict(doc),
            &set,
            models[0].config.num_classes,
            &hash,
        )?
    };

    let mut manifest = load_manifest(cfg);
    let report_path = cfg.out_path(report_name);
    report.write_csv(&report_path)?;
    manifest.record_artifact(
        report_name.trim_end_matches(".csv"),
        &report_path,
    )?;
    manifest.save(&cfg.out)?;
    println!(
        "eval: accuracy {:.4} on {} ({} documents), report {}",
        report.accuracy,
        report.split,
        report.n,
        report_path.display()
    );
    Ok(report)
}

/// Accuracy of one or more checkpoints (ensemble when several) on a labeled
/// TSV split.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<()> {
    ensure_out_dir(cfg)?;
    eval_models(cfg, &cfg.eval.checkpoints, &cfg.eval.data, "report.csv")?;
    Ok(())
}

/// Continues training the distilled model on a capped budget of labeled
/// target documents and records the per-epoch accuracy curve.
pub fn cmd_finetune(cfg: &ExperimentConfig) -> Result<()> {
    ensure_out_dir(cfg)?;
    let started = Instant::now();
    let ckpt = cfg.out_path("theta_tgt.json");
    require_file(&ckpt)?;
    let (model, _) = load_checkpoint(&ckpt)?;

    let labels_path = cfg.out_path(&cfg.finetune.labels);
    require_file(&labels_path)?;
    let mut rows = corpus::read_labeled_tsv(&labels_path)?;
    if let Some(budget) = cfg.finetune.budget {
        rows.truncate(budget);
    }
    let set = encode_labeled(&rows, &model.vocab, model.config.max_len, "finetune")?;

    let raw = load_raw(cfg)?;
    let eval_on = match &raw.t_tgt {
        Some(rows) => Some(encode_labeled(
            rows,
            &model.vocab,
            model.config.max_len,
            "t_tgt",
        )?),
        None => None,
    };

    let outcome = fine_tune_target(model, &set, &cfg.finetune.train, eval_on.as_ref())?;

    let mut manifest = load_manifest(cfg);
    let out_ckpt = cfg.out_path("theta_tgt_ft.json");
    save_checkpoint(&outcome.model, None, &out_ckpt)?;
    manifest.record_artifact("theta_tgt_ft", &out_ckpt)?;
    let acc_path = cfg.out_path("finetune_accuracy.csv");
    let mut csv = String::from("epoch,accuracy\n");
    for (epoch, acc) in &outcome.accuracy_trace {
        csv.push_str(&format!("{epoch},{acc}\n"));
    }
    std::fs::write(&acc_path, csv).map_err(|e| CliError::io(&acc_path, e))?;
    manifest.record_artifact("finetune_accuracy", &acc_path)?;
    let trace_path = cfg.out_path("trace_finetune.csv");
    outcome.trace.write_csv(&trace_path)?;
    manifest.record_artifact("trace_finetune", &trace_path)?;
    manifest.record_timing("finetune", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;

    let last = outcome.accuracy_trace.last().map(|(_, a)| *a);
    println!(
        "finetune: {} labeled documents, final accuracy {:?}, saved {}",
        set.len(),
        last,
        out_ckpt.display()
    );
    Ok(())
}

fn load_split_docs(
    cfg: &ExperimentConfig,
    name: &str,
    kind: SplitKind,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<cldfa_core::corpus::IdSequence>> {
    let path = cfg.out_path(name);
    require_file(&path)?;
    let texts: Vec<String> = match kind {
        SplitKind::Labeled => corpus::read_labeled_tsv(&path)?
            .into_iter()
            .map(|(_, text)| text)
            .collect(),
        SplitKind::Lines => corpus::read_lines(&path)?,
        SplitKind::ParallelSrc => corpus::read_parallel_tsv(&path)?
            .into_iter()
            .map(|(src, _)| src)
            .collect(),
        SplitKind::ParallelTgt => corpus::read_parallel_tsv(&path)?
            .into_iter()
            .map(|(_, tgt)| tgt)
            .collect(),
    };
    texts
        .iter()
        .map(|t| encode_text(t, vocab, max_len).map_err(CliError::Core))
        .collect()
}

/// Feature dump, 2-D projection (CSV + SVG) and divergence score of two
/// splits through one checkpoint's feature extractor.
pub fn cmd_project(cfg: &ExperimentConfig) -> Result<()> {
    ensure_out_dir(cfg)?;
    let started = Instant::now();
    let ckpt = cfg.out_path(&cfg.project.checkpoint);
    require_file(&ckpt)?;
    let (model, _) = load_checkpoint(&ckpt)?;

    let docs_a = load_split_docs(
        cfg,
        &cfg.project.split_a,
        cfg.project.split_a_kind,
        &model.vocab,
        model.config.max_len,
    )?;
    let docs_b = load_split_docs(
        cfg,
        &cfg.project.split_b,
        cfg.project.split_b_kind,
        &model.vocab,
        model.config.max_len,
    )?;
    let name_a = cfg.project.split_a.trim_end_matches(".tsv").to_string();
    let name_b = format!("{}:{:?}", cfg.project.split_b.trim_end_matches(".tsv"), cfg.project.split_b_kind);

    let feats_a = extract_split_features(&model, &docs_a)?;
    let feats_b = extract_split_features(&model, &docs_b)?;

    let features_path = cfg.out_path("features.csv");
    let dim = feats_a.first().or(feats_b.first()).map_or(0, |f| f.len());
    let mut csv = String::from("doc_id,split");
    for d in 1..=dim {
        csv.push_str(&format!(",f_{d}"));
    }
    csv.push('\n');
    for (split, feats) in [(&name_a, &feats_a), (&name_b, &feats_b)] {
        for (i, f) in feats.iter().enumerate() {
            csv.push_str(&format!("{i},{split}"));
            for v in f {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
    }
    std::fs::write(&features_path, csv).map_err(|e| CliError::io(&features_path, e))?;

    let projection = project_features_2d(&[
        FeatureSplit {
            name: name_a.clone(),
            features: feats_a.clone(),
        },
        FeatureSplit {
            name: name_b.clone(),
            features: feats_b.clone(),
        },
    ])?;
    let proj_path = cfg.out_path("projection.csv");
    projection.write_csv(&proj_path)?;
    let svg_path = cfg.out_path("projection.svg");
    write_projection_svg(&projection, &svg_path)?;

    let score = divergence_score(&feats_a, &feats_b)?;
    let div_path = cfg.out_path("divergence.csv");
    std::fs::write(
        &div_path,
        format!("split_a,split_b,score\n{name_a},{name_b},{score}\n"),
    )
    .map_err(|e| CliError::io(&div_path, e))?;

    let mut manifest = load_manifest(cfg);
    manifest.record_artifact("features", &features_path)?;
    manifest.record_artifact("projection", &proj_path)?;
    manifest.record_artifact("projection_svg", &svg_path)?;
    manifest.record_artifact("divergence", &div_path)?;
    manifest.record_timing("project", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;

    println!(
        "project: divergence({name_a}, {name_b}) = {score:.6}, explained variance {:.3}/{:.3}",
        projection.explained[0], projection.explained[1]
    );
    Ok(())
}

/// The full two-step pipeline: synthesize (when configured), train the source
/// model with adaptation, distill (single temperature or ensemble), then
/// evaluate on the labeled test split when one exists.
pub fn cmd_run_cldfa(cfg: &ExperimentConfig) -> Result<Option<EvalReport>> {
    let started = Instant::now();
    if matches!(cfg.source, DataSource::Synthetic(_)) {
        cmd_synth(cfg)?;
    }
    cmd_train_source(cfg)?;
    cmd_distill(cfg)?;

    let t_tgt_available = match &cfg.source {
        DataSource::Synthetic(_) => cfg.out_path("t_tgt.tsv").is_file(),
        DataSource::Files(paths) => paths.t_tgt.as_ref().is_some_and(|p| p.is_file()),
    };
    let report = if t_tgt_available {
        let data_name = match &cfg.source {
            DataSource::Synthetic(_) => "t_tgt.tsv".to_string(),
            DataSource::Files(paths) => paths
                .t_tgt
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        };
        let report = match &cfg.temperatures {
            None => eval_models(cfg, &["theta_tgt.json".into()], &data_name, "report.csv")?,
            Some(ts) => {
                let names: Vec<String> = ts
                    .iter()
                    .map(|&t| format!("theta_tgt_T{}.json", t_tag(t)))
                    .collect();
                eval_models(cfg, &names, &data_name, "report_ensemble.csv")?
            }
        };
        Some(report)
    } else {
        None
    };

    let mut manifest = load_manifest(cfg);
    manifest.record_timing("run_cldfa", started.elapsed().as_millis());
    manifest.save(&cfg.out)?;
    Ok(report)
}
