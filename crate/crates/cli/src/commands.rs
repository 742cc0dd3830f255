use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qclass::baselines::{logreg_train, rf_train, svm_train, SparseVector, TfidfModel};
use qclass::corpus::{load_questions, N_CLASSES};
use qclass::drrnn::{
    ensemble_predict_batch, load_checkpoint, random_search, read_manifest, save_checkpoint, train_ensemble,
    write_manifest, LabeledData, SplitPlan,
};
use qclass::ensemble::{oof_probs, stack_train_c1, stack_train_c2, ProbMatrix};
use qclass::eval::evaluate;
use qclass::features::{featurize, fit_category_stats, load_embedding_table, load_wordvecs, SENTENCE_DIM};
use qclass::preprocess::{builtin_jargon, load_jargon, Normalizer};
use qclass::{Dataset, Error, Label};

use crate::config::RunConfig;
use crate::{labels, BaselineKind, CliError, Command, HpArgs, Rule, StackKind};

type Res<T = ()> = Result<T, CliError>;

pub fn dispatch(cmd: Command, mut cfg: RunConfig) -> Res {
    match cmd {
        Command::Preprocess { input, rule, all_rules, jargon } => {
            if all_rules {
                cfg.preprocess = qclass::preprocess::RuleConfig::all_enabled();
            }
            for r in rule {
                let p = &mut cfg.preprocess;
                match r {
                    Rule::Emoji => p.strip_emoji = true,
                    Rule::Urls => p.replace_urls = true,
                    Rule::Datetimes => p.replace_datetimes = true,
                    Rule::Ordinals => p.replace_ordinals = true,
                    Rule::Numbers => p.replace_numbers = true,
                    Rule::Shouty => p.lowercase_if_shouty = true,
                    Rule::Jargon if p.jargon_dict.is_empty() => p.jargon_dict = builtin_jargon(),
                    Rule::Jargon => {}
                }
            }
            if let Some(path) = jargon {
                cfg.preprocess.jargon_dict = load_jargon(&path)?;
            }
            preprocess(&input, &cfg)
        }
        Command::Featurize { questions, train, embeddings, wordvecs } => {
            set_path(&mut cfg.paths.train, train);
            set_path(&mut cfg.paths.embeddings, embeddings);
            set_path(&mut cfg.paths.wordvecs, wordvecs);
            featurize_cmd(&questions, &cfg)
        }
        Command::Train { train, features, split_seeds, folds, hp } => {
            set_path(&mut cfg.paths.train, train);
            set_path(&mut cfg.paths.features, features);
            set(&mut cfg.split_seeds, split_seeds);
            set(&mut cfg.folds, folds);
            apply_hp(&mut cfg, hp);
            train_cmd(&cfg)
        }
        Command::Predict { manifest, features, questions } => {
            set_path(&mut cfg.paths.features, features);
            predict(&manifest, questions.as_deref(), &cfg)
        }
        Command::Evaluate { gold, predictions, per_category } => evaluate_cmd(&gold, &predictions, per_category, &cfg),
        Command::Hpo { train, features, budget, folds, hp } => {
            set_path(&mut cfg.paths.train, train);
            set_path(&mut cfg.paths.features, features);
            set(&mut cfg.search_budget, budget);
            set(&mut cfg.folds, folds);
            apply_hp(&mut cfg, hp);
            hpo(&cfg)
        }
        Command::Baseline { kind, train, test, features, oof_folds } => {
            set_path(&mut cfg.paths.train, train);
            set_path(&mut cfg.paths.test, test);
            set_path(&mut cfg.paths.features, features);
            baseline(kind, oof_folds, &cfg)
        }
        Command::Stack { kind, train_probs, labels, predict_probs, bags } => {
            set(&mut cfg.c2.n_bags, bags);
            stack(kind, &train_probs, &labels, &predict_probs, &cfg)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_hp(cfg: &mut RunConfig, a: HpArgs) {
    let hp = &mut cfg.hp;
    set(&mut hp.input_dim, a.input_dim);
    set(&mut hp.block_dim, a.block_dim);
    set(&mut hp.n_blocks, a.n_blocks);
    set(&mut hp.input_dropout, a.input_dropout);
    set(&mut hp.block_dropout, a.block_dropout);
    set(&mut hp.base_lr, a.base_lr);
    set(&mut hp.warmup_epochs, a.warmup_epochs);
    set(&mut hp.l2_lambda, a.l2_lambda);
    set(&mut hp.max_epochs, a.max_epochs);
}

fn set_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn write_text(path: &Path, text: &str) -> Res {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn string_ids(ds: &Dataset) -> Vec<String> {
    ds.questions.iter().map(|q| q.id.clone()).collect()
}

/// Feature rows and gold labels of every question in `ds`.
fn labeled_features(ds: &Dataset, cfg: &RunConfig) -> Res<LabeledData> {
    let table = load_embedding_table(cfg.require(&cfg.paths.features, "features")?, cfg.hp.input_dim)?;
    let x = table.matrix_for(&string_ids(ds))?;
    Ok(LabeledData::new(x, ds.labels()?)?)
}

fn preprocess(input: &Path, cfg: &RunConfig) -> Res {
    let mut ds = load_questions(input)?;
    let out = cfg.prepare_output()?;
    let norm = Normalizer::new(&cfg.preprocess);
    for q in &mut ds.questions {
        q.subject = norm.normalize(&q.subject);
        q.body = norm.normalize(&q.body);
    }
    ds.save(&out.join("questions.jsonl"))?;
    Ok(())
}

fn featurize_cmd(questions: &Path, cfg: &RunConfig) -> Res {
    let ds = load_questions(questions)?;
    let train = match &cfg.paths.train {
        Some(p) => load_questions(p)?,
        None => ds.clone(),
    };
    let stats = fit_category_stats(&train)?;
    let emb = load_embedding_table(cfg.require(&cfg.paths.embeddings, "embeddings")?, SENTENCE_DIM)?;
    let wv = load_wordvecs(cfg.require(&cfg.paths.wordvecs, "wordvecs")?)?;
    let table = featurize(&ds, &emb, &wv, &stats)?;
    let out = cfg.prepare_output()?;
    table.save(&out.join("features.tsv"))?;
    Ok(())
}

fn train_cmd(cfg: &RunConfig) -> Res {
    cfg.hp.validate()?;
    let ds = load_questions(cfg.require(&cfg.paths.train, "train")?)?;
    let data = labeled_features(&ds, cfg)?;
    let plan = SplitPlan::from_labels(&data.y, &cfg.split_seeds, cfg.folds)?;
    let models = train_ensemble(&data, &plan, &cfg.hp, cfg.seed)?;
    let out = cfg.prepare_output()?;
    let dir = out.join("models");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths = Vec::with_capacity(models.len());
    let mut log = String::from("seed_index\tfold_index\tbest_val_acc\tbest_epoch\n");
    for m in &models {
        let (s, f) = m.split_id;
        let path = dir.join(format!("ckpt_s{s}_f{f}.qcls"));
        save_checkpoint(m, &path)?;
        paths.push(path);
        let _ = writeln!(log, "{s}\t{f}\t{}\t{}", m.best_val_acc, m.best_epoch);
    }
    write_manifest(&paths, &out.join("manifest.txt"))?;
    write_text(&out.join("split_accuracy.tsv"), &log)
}

fn predict(manifest: &Path, questions: Option<&Path>, cfg: &RunConfig) -> Res {
    let models = read_manifest(manifest)?.iter().map(|p| load_checkpoint(p)).collect::<qclass::Result<Vec<_>>>()?;
    let first = models.first().ok_or_else(|| CliError::Config(format!("{} lists no checkpoints", manifest.display())))?;
    let table = load_embedding_table(cfg.require(&cfg.paths.features, "features")?, first.net.hp.input_dim)?;
    let ids: Vec<String> = match questions {
        Some(p) => string_ids(&load_questions(p)?),
        None => table.ids().to_vec(),
    };
    let x = table.matrix_for(&ids)?;
    let out = cfg.prepare_output()?;
    let k = models.len() as f64;
    let preds = ensemble_predict_batch(&models, x.view())?;
    let rows = preds
        .iter()
        .map(|(_, s)| {
            let p = s.map(|v| v / k);
            let total: f64 = p.iter().sum();
            p.map(|v| v / total)
        })
        .collect();
    let labels: Vec<Label> = preds.iter().map(|(l, _)| *l).collect();
    ProbMatrix::new("drrnn", ids.clone(), rows)?.save(&out.join("probs.tsv"))?;
    labels::write(&out.join("labels.tsv"), &ids, &labels)?;
    Ok(())
}

fn evaluate_cmd(gold: &Path, predictions: &Path, per_category: bool, cfg: &RunConfig) -> Res {
    let ds = load_questions(gold)?;
    let predicted: BTreeMap<String, Label> = labels::read(predictions)?.into_iter().collect();
    let missing: Vec<String> = ds.iter().filter(|q| !predicted.contains_key(&q.id)).map(|q| q.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::Alignment(missing).into());
    }
    let gold_labels = ds.labels()?;
    let pred: Vec<Label> = ds.iter().map(|q| predicted[&q.id]).collect();
    let cats: Vec<String> = ds.iter().map(|q| q.category.clone()).collect();
    let report = evaluate(&gold_labels, &pred, per_category.then_some(cats.as_slice()))?;
    let out = cfg.prepare_output()?;
    let table = report.to_table();
    write_text(&out.join("metrics.json"), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    write_text(&out.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn hpo(cfg: &RunConfig) -> Res {
    let ds = load_questions(cfg.require(&cfg.paths.train, "train")?)?;
    let data = labeled_features(&ds, cfg)?;
    let result = random_search(&cfg.search, &cfg.hp, cfg.search_budget, &data, cfg.folds, cfg.seed)?;
    let out = cfg.prepare_output()?;
    let mut log = String::from("sample\tcv_accuracy\thyperparameters\n");
    for (i, (hp, score)) in result.log.iter().enumerate() {
        let _ = writeln!(log, "{i}\t{score}\t{}", serde_json::to_string(hp).expect("hp serializes"));
    }
    write_text(&out.join("search_log.tsv"), &log)?;
    let best = RunConfig { hp: result.best_hp, ..cfg.clone() };
    write_text(&out.join("best_config.json"), &(serde_json::to_string_pretty(&best).expect("config serializes") + "\n"))?;
    println!("best cv accuracy {:.4}", result.cv_accuracy);
    Ok(())
}

/// Trains on `train` rows and returns class probabilities for `test` rows.
fn fit_predict(
    kind: BaselineKind,
    cfg: &RunConfig,
    texts: &[String],
    dense: &[Vec<f64>],
    y: &[Label],
    train: &[usize],
    test: &[usize],
) -> qclass::Result<(Vec<[f64; N_CLASSES]>, Vec<qclass::container::Container>)> {
    let ty: Vec<Label> = train.iter().map(|&i| y[i]).collect();
    match kind {
        BaselineKind::TfidfSvm => {
            let corpus: Vec<&str> = train.iter().map(|&i| texts[i].as_str()).collect();
            let tfidf = TfidfModel::fit(&corpus, cfg.tfidf_n_min, cfg.tfidf_n_max)?;
            let rows: Vec<SparseVector> = corpus.iter().map(|t| tfidf.transform(t)).collect();
            let svm = svm_train(&rows, &ty, &qclass::baselines::SvmConfig { seed: cfg.seed, ..cfg.svm.clone() })?;
            let probs = test.iter().map(|&i| svm.predict_proba(&tfidf.transform(&texts[i]))).collect();
            Ok((probs, vec![tfidf.to_container(), svm.to_container()]))
        }
        BaselineKind::Logreg => {
            let rows: Vec<Vec<f64>> = train.iter().map(|&i| dense[i].clone()).collect();
            let m = logreg_train(&rows, &ty, &cfg.logreg)?;
            Ok((test.iter().map(|&i| m.predict_proba(&dense[i])).collect(), vec![m.to_container()]))
        }
        BaselineKind::Forest => {
            let rows: Vec<Vec<f64>> = train.iter().map(|&i| dense[i].clone()).collect();
            let m = rf_train(&rows, &ty, &qclass::baselines::ForestConfig { seed: cfg.seed, ..cfg.forest.clone() })?;
            Ok((test.iter().map(|&i| m.predict_proba(&dense[i])).collect(), vec![m.to_container()]))
        }
    }
}

fn baseline(kind: BaselineKind, oof_folds: Option<usize>, cfg: &RunConfig) -> Res {
    let train_ds = load_questions(cfg.require(&cfg.paths.train, "train")?)?;
    let test_ds = load_questions(cfg.require(&cfg.paths.test, "test")?)?;
    let n_train = train_ds.len();
    let all: Vec<&qclass::Question> = train_ds.iter().chain(test_ds.iter()).collect();
    let ids: Vec<String> = all.iter().map(|q| q.id.clone()).collect();
    let texts: Vec<String> = all.iter().map(|q| q.concat_text()).collect();
    let dense: Vec<Vec<f64>> = if kind == BaselineKind::TfidfSvm {
        Vec::new()
    } else {
        let table = load_embedding_table(cfg.require(&cfg.paths.features, "features")?, cfg.hp.input_dim)?;
        table.matrix_for(&ids)?.rows().into_iter().map(|r| r.to_vec()).collect()
    };
    let mut y = train_ds.labels()?;
    // test labels are never read; placeholders keep indices aligned
    y.extend(std::iter::repeat_n(Label::Factual, test_ds.len()));
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..all.len()).collect();
    let name = match kind {
        BaselineKind::TfidfSvm => "tfidf-svm",
        BaselineKind::Logreg => "logreg",
        BaselineKind::Forest => "forest",
    };
    let (probs, containers) = fit_predict(kind, cfg, &texts, &dense, &y, &train_idx, &test_idx)?;
    let out = cfg.prepare_output()?;
    for c in &containers {
        c.save(&out.join(format!("{}.qcls", c.kind)))?;
    }
    let test_ids = ids[n_train..].to_vec();
    let pred: Vec<Label> = probs.iter().map(Label::argmax).collect();
    ProbMatrix::new(name, test_ids.clone(), probs)?.save(&out.join("probs.tsv"))?;
    labels::write(&out.join("labels.tsv"), &test_ids, &pred)?;
    if let Some(k) = oof_folds {
        let m = oof_probs(name, &ids[..n_train], &y[..n_train], k, cfg.seed, |tr, te| {
            fit_predict(kind, cfg, &texts, &dense, &y, tr, te).map(|(p, _)| p)
        })?;
        m.save(&out.join("oof.tsv"))?;
    }
    Ok(())
}

fn stack(kind: StackKind, train_probs: &[PathBuf], gold: &Path, predict_probs: &[PathBuf], cfg: &RunConfig) -> Res {
    let load = |ps: &[PathBuf]| ps.iter().map(|p| ProbMatrix::load(p)).collect::<qclass::Result<Vec<_>>>();
    let bases = load(train_probs)?;
    let targets = if predict_probs.is_empty() { bases.clone() } else { load(predict_probs)? };
    let gold: BTreeMap<String, Label> =
        load_questions(gold)?.iter().filter_map(|q| q.label.map(|l| (q.id.clone(), l))).collect();
    let (stacker, name) = match kind {
        StackKind::C1 => {
            let svm = qclass::baselines::SvmConfig { seed: cfg.seed, ..cfg.svm.clone() };
            (stack_train_c1(&bases, &gold, &svm)?, "stack-c1")
        }
        StackKind::C2 => {
            let c2 = qclass::ensemble::C2Config { seed: cfg.seed, ..cfg.c2.clone() };
            (stack_train_c2(&bases, &gold, &c2)?, "stack-c2")
        }
    };
    let (ids, pred, scores) = stacker.predict(&targets)?;
    let out = cfg.prepare_output()?;
    ProbMatrix::new(name, ids.clone(), scores)?.save(&out.join("probs.tsv"))?;
    labels::write(&out.join("labels.tsv"), &ids, &pred)?;
    Ok(())
}
