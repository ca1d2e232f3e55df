use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use topicwise::corpus::{load_dataset, read_file, Session, Split};
use topicwise::eval::{
    baseline_context_unaware, fit_pipeline, format_table, run_cv, run_grid_cv, run_holdout, EvalConfig, LabeledSet,
    Protocol,
};
use topicwise::features::{
    context_unaware_names, context_unaware_vectors, featurize_sessions, FeatureContext, KeyTopicRules,
    WordCategoryDictionary,
};
use topicwise::model::{ModelKind, RegressorSpec, FOREST_SIZES};
use topicwise::select::{select, CfsConfig, SelectConfig};
use topicwise::synth::{generate_corpus, SynthSpec};
use topicwise::topic::{build_preliminary_dictionary, cluster_sentences, segment_with, TopicDictionary, TopicEntry};
use topicwise::{exec, topic};

use crate::error::CliError;
use crate::{usage, Cli, Command, Dictionaries, Input, ModelChoice, Selection};

pub const ECHO_FILE: &str = "run_config.json";

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildDict(a) => {
            echo(cli, &a.out, Value::Null)?;
            build_dict(&a.manifest, a.max_dist, a.min_count, &a.out)
        }
        Command::Segment(a) => {
            echo(cli, &a.out, Value::Null)?;
            let dict = match &a.topics {
                Some(p) => TopicDictionary::from_toml(&read_file(p)?)?,
                None => TopicDictionary::example(),
            };
            segment(&a.manifest, &dict, a.max_edits, &a.out)
        }
        Command::Featurize(a) => {
            echo(cli, &a.out, Value::Null)?;
            let ctx = load_context(&a.dictionaries)?;
            let sessions = load_sessions(&a.manifest, &a.splits)?;
            let (set, names) = if a.context_unaware {
                (LabeledSet::from_vectors(&sessions, &context_unaware_vectors(&sessions, &ctx.words))?, context_unaware_names())
            } else {
                (LabeledSet::from_vectors(&sessions, &featurize_sessions(&sessions, &ctx)?)?, ctx.layout.names())
            };
            write(&a.out, "features.csv", &set.to_csv(&names)?)?;
            write(&a.out, "layout.tsv", &layout_tsv(&names))
        }
        Command::Select(a) => {
            let cfg = SelectConfig { mode: a.selection.mode, cfs: cfs_config(&a.selection)?, max_k: a.max_k };
            echo(cli, &a.out, to_value(&cfg))?;
            let loaded = load_input(&a.input)?;
            let report = select(&loaded.set.x, &loaded.set.y, &cfg)?;
            let name = |j: &usize| loaded.names.get(*j).cloned().unwrap_or_default();
            let selected: Vec<Value> = report
                .selected()
                .iter()
                .zip(&report.f_values)
                .map(|(j, f)| json!({ "index": j, "name": name(j), "f_value": finite_or_text(*f) }))
                .collect();
            let body = json!({
                "report": report,
                "cfs_names": report.cfs_subset.iter().map(name).collect::<Vec<_>>(),
                "selected": selected,
            });
            write(&a.out, "selection.json", &pretty(&body))
        }
        Command::Train(a) => {
            let cfg = eval_config(&a.selection, &a.model, a.k, 10, a.seed, false)?;
            echo(cli, &a.out, to_value(&cfg))?;
            let loaded = load_input(&a.input)?;
            let fitted = fit_pipeline(&loaded.set, &cfg)?;
            warn(&fitted.warnings);
            let names: Vec<String> =
                fitted.model.features.iter().map(|&j| loaded.names.get(j).cloned().unwrap_or_default()).collect();
            let mut tsv = String::from("index\tname\n");
            for (j, n) in fitted.model.features.iter().zip(&names) {
                let _ = writeln!(tsv, "{j}\t{n}");
            }
            write(&a.out, "model.json", &pretty(&fitted.model))?;
            write(&a.out, "features.tsv", &tsv)
        }
        Command::Grid(a) => {
            let mut grid = parse_models(&a.models)?;
            for spec in &mut grid {
                apply_hypers(spec, &a.hypers)?;
                spec.validate()?;
            }
            let ks = parse_k_range(&a.k_range)?;
            let cfg = eval_config(&a.selection, &ModelChoice { model: "sgd_squared".into(), hypers: vec![] }, 1, a.folds, a.seed, false)?;
            echo(cli, &a.out, json!({ "eval": cfg, "grid": grid, "k_range": ks }))?;
            let loaded = load_input(&a.input)?;
            let res = run_grid_cv(&loaded.set, &grid, &ks, &cfg)?;
            warn(&res.report.warnings);
            write(&a.out, "grid.csv", &res.grid.to_csv())?;
            write(&a.out, "best.json", &pretty(&res))?;
            let table = format!(
                "best: {} with k = {} (grid RMSE {:.4})\n{}",
                res.grid.best_spec.label(),
                res.grid.best_k,
                res.grid.best_rmse,
                res.report.table()
            );
            print!("{table}");
            write(&a.out, "report.txt", &table)
        }
        Command::Cv(a) => {
            let cfg = eval_config(&a.selection, &a.model, a.k, a.folds, a.seed, a.clamp)?;
            echo(cli, &a.out, to_value(&cfg))?;
            let loaded = load_input(&a.input)?;
            let report = run_cv(&loaded.set, &cfg)?;
            warn(&report.warnings);
            write(&a.out, "report.json", &report.to_json())?;
            let mut rows = vec![("topic-wise", &report)];
            let mean;
            let unaware;
            if a.baselines {
                mean = run_cv(&loaded.set, &EvalConfig { spec: RegressorSpec::mean(), ..cfg.clone() })?;
                write(&a.out, "baseline_mean.json", &mean.to_json())?;
                rows.push(("mean baseline", &mean));
                match &loaded.sessions {
                    Some(sessions) => {
                        let ctx = load_context(&a.input.dictionaries)?;
                        unaware = baseline_context_unaware(sessions, &ctx.words, &cfg)?;
                        write(&a.out, "baseline_context_unaware.json", &unaware.to_json())?;
                        rows.push(("context-unaware", &unaware));
                    }
                    None => warn(&["the context-unaware baseline needs --manifest; skipped".to_string()]),
                }
            }
            let table = format_table(&rows);
            print!("{table}");
            write(&a.out, "report.txt", &table)
        }
        Command::Holdout(a) => {
            let cfg = eval_config(&a.selection, &a.model, a.k, 10, a.seed, a.clamp)?;
            echo(cli, &a.out, to_value(&cfg))?;
            let (train_set, holdout) = match (&a.manifest, &a.train, &a.holdout) {
                (Some(m), _, _) => {
                    let (fit, score) = match a.protocol {
                        Protocol::Dev => (vec![Split::Train], vec![Split::Dev]),
                        Protocol::Test => (vec![Split::Train, Split::Dev], vec![Split::Test]),
                        Protocol::Cv => return Err(usage("holdout protocol must be dev or test; use `cv` for cross validation")),
                    };
                    let ctx = load_context(&a.dictionaries)?;
                    (manifest_set(m, &fit, &ctx)?.0, manifest_set(m, &score, &ctx)?.0)
                }
                (None, Some(t), Some(h)) => (table_set(t)?.0, table_set(h)?.0),
                _ => return Err(usage("give --manifest or both --train and --holdout")),
            };
            let report = run_holdout(&train_set, &holdout, &cfg, a.protocol, a.allow_overlap)?;
            warn(&report.warnings);
            write(&a.out, "report.json", &report.to_json())?;
            let table = report.table();
            print!("{table}");
            write(&a.out, "report.txt", &table)
        }
        Command::Synth(a) => {
            let mut spec = match &a.spec {
                Some(p) => SynthSpec::from_toml(&read_file(p)?)?,
                None => SynthSpec::default(),
            };
            if let Some(n) = a.sessions {
                spec.session_count = n;
            }
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            if let Some(s) = a.scope {
                spec.scope = s;
            }
            echo(cli, &a.out, to_value(&spec))?;
            let truth = generate_corpus(&spec, &a.out)?;
            println!("wrote {} sessions with {} planted features to {}", spec.session_count, truth.indices.len(), a.out.display());
            Ok(())
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn finite_or_text(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(&path, body).map_err(|source| CliError::Io { path, source })
}

/// Writes every parameter, the resolved stage config and the tool version.
fn echo(cli: &Cli, out: &Path, resolved: Value) -> Result<(), CliError> {
    let body = json!({
        "tool": "topicwise",
        "version": env!("CARGO_PKG_VERSION"),
        "jobs": cli.jobs.unwrap_or_else(exec::current_jobs),
        "arguments": cli,
        "resolved": resolved,
    });
    write(out, ECHO_FILE, &pretty(&body))
}

fn load_context(d: &Dictionaries) -> Result<FeatureContext, CliError> {
    let topics = match &d.topics {
        Some(p) => TopicDictionary::from_toml(&read_file(p)?)?,
        None => TopicDictionary::example(),
    };
    let words = match &d.words {
        Some(p) => WordCategoryDictionary::parse(&read_file(p)?)?,
        None => WordCategoryDictionary::example(),
    };
    let rules = match &d.rules {
        Some(p) => KeyTopicRules::from_toml(&read_file(p)?)?,
        None => KeyTopicRules::example(),
    };
    Ok(FeatureContext::new(topics, words, rules)?)
}

fn load_sessions(manifest: &Path, splits: &[Split]) -> Result<Vec<Session>, CliError> {
    let ds = load_dataset(manifest)?;
    let sessions: Vec<Session> = ds.sessions.into_iter().filter(|s| splits.contains(&s.meta.split)).collect();
    if sessions.is_empty() {
        let names: Vec<&str> = splits.iter().map(|s| s.as_str()).collect();
        return Err(CliError::Input(format!("{} has no sessions in split(s) {}", manifest.display(), names.join(","))));
    }
    Ok(sessions)
}

fn manifest_set(manifest: &Path, splits: &[Split], ctx: &FeatureContext) -> Result<(LabeledSet, Vec<Session>), CliError> {
    let sessions = load_sessions(manifest, splits)?;
    let set = LabeledSet::from_vectors(&sessions, &featurize_sessions(&sessions, ctx)?)?;
    Ok((set, sessions))
}

fn table_set(path: &Path) -> Result<(LabeledSet, Vec<String>), CliError> {
    let raw = read_file(path)?;
    LabeledSet::from_csv(&raw).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

struct Loaded {
    set: LabeledSet,
    names: Vec<String>,
    /// Present when read from a manifest.
    sessions: Option<Vec<Session>>,
}

fn load_input(input: &Input) -> Result<Loaded, CliError> {
    match (&input.manifest, &input.features) {
        (Some(m), _) => {
            let ctx = load_context(&input.dictionaries)?;
            let (set, sessions) = manifest_set(m, &input.splits, &ctx)?;
            Ok(Loaded { set, names: ctx.layout.names(), sessions: Some(sessions) })
        }
        (None, Some(f)) => {
            let (set, names) = table_set(f)?;
            Ok(Loaded { set, names, sessions: None })
        }
        (None, None) => Err(usage("give --manifest or --features")),
    }
}

fn cfs_config(s: &Selection) -> Result<CfsConfig, CliError> {
    if s.patience == 0 || s.open_cap == 0 {
        return Err(usage("--patience and --open-cap must be positive"));
    }
    Ok(CfsConfig { patience: s.patience, open_cap: s.open_cap })
}

fn apply_hypers(spec: &mut RegressorSpec, hypers: &[String]) -> Result<(), CliError> {
    for h in hypers {
        let (k, v) = h.split_once('=').ok_or_else(|| usage(format!("--hyper expects KEY=VALUE, got `{h}`")))?;
        spec.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn eval_config(
    selection: &Selection,
    model: &ModelChoice,
    k: usize,
    folds: usize,
    seed: u64,
    clamp: bool,
) -> Result<EvalConfig, CliError> {
    let kind: ModelKind = model.model.parse().map_err(CliError::Usage)?;
    let mut spec = RegressorSpec::of(kind);
    apply_hypers(&mut spec, &model.hypers)?;
    spec.validate()?;
    if folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let defaults = SelectConfig::default();
    Ok(EvalConfig {
        spec,
        k,
        selection: SelectConfig { mode: selection.mode, cfs: cfs_config(selection)?, max_k: defaults.max_k },
        folds,
        seed,
        clamp,
    })
}

/// `sgd_squared,random_forest[50]`, with `forests` and `default` presets.
pub fn parse_models(list: &str) -> Result<Vec<RegressorSpec>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "default" => out.extend(RegressorSpec::default_grid()),
            "forests" => out.extend(FOREST_SIZES.iter().map(|&n| RegressorSpec::random_forest(n))),
            _ => {
                if let Some(n) = item.strip_prefix("random_forest[").and_then(|r| r.strip_suffix(']')) {
                    let n = n.parse().map_err(|_| usage(format!("bad forest size in `{item}`")))?;
                    out.push(RegressorSpec::random_forest(n));
                } else {
                    out.push(RegressorSpec::of(item.parse().map_err(CliError::Usage)?));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(usage("--models is empty"));
    }
    Ok(out)
}

/// `1-46`, `2,4,8` or a mix such as `1-3,10`.
pub fn parse_k_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("bad --k-range `{text}`"));
    let mut ks = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                ks.extend(a..=b);
            }
            None => ks.push(part.parse().map_err(|_| bad())?),
        }
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

fn layout_tsv(names: &[String]) -> String {
    let mut out = String::from("index\tname\n");
    for (i, n) in names.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{n}");
    }
    out
}

fn clean(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn segment(manifest: &Path, dict: &TopicDictionary, max_edits: usize, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(manifest)?;
    for s in &ds.sessions {
        let mut tsv = String::from("topic_index\tt_start\tt_end\ttext\n");
        for seg in segment_with(dict, &s.transcript, max_edits) {
            let _ = writeln!(tsv, "{}\t{}\t{}\t{}", seg.topic_index, seg.t_start, seg.t_end, clean(&seg.participant_text));
        }
        write(out, &format!("segments/{}.tsv", s.meta.session_id), &tsv)?;
    }
    println!("segmented {} sessions", ds.len());
    Ok(())
}

fn build_dict(manifest: &Path, max_dist: usize, min_count: usize, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(manifest)?;
    let counted = build_preliminary_dictionary(&ds)?;
    let mut tsv = String::from("count\tsentence\n");
    for (s, n) in &counted {
        let _ = writeln!(tsv, "{n}\t{s}");
    }
    write(out, "sentences.tsv", &tsv)?;

    let kept: Vec<&str> = counted.iter().filter(|(_, n)| *n >= min_count).map(|(s, _)| s.as_str()).collect();
    let count_of = |s: &str| counted.iter().find(|c| c.0 == s).map_or(0, |c| c.1);
    let clusters = cluster_sentences(&kept, max_dist);
    let mut tsv = String::from("cluster\tcount\tsentence\n");
    let mut entries = Vec::with_capacity(clusters.len());
    for (i, members) in clusters.iter().enumerate() {
        for m in members {
            let _ = writeln!(tsv, "{}\t{}\t{m}", i + 1, count_of(m));
        }
        // most frequent member names the topic; ties go to the first in order
        let name = members.iter().max_by_key(|m| (count_of(m), std::cmp::Reverse(*m))).cloned().unwrap_or_default();
        entries.push(TopicEntry { index: i + 1, name, is_key_topic: false, trigger_sentences: members.clone() });
    }
    write(out, "clusters.tsv", &tsv)?;
    if entries.is_empty() {
        return Err(CliError::Pipeline(format!("no interviewer sentence occurs at least {min_count} times")));
    }
    let draft = TopicDictionary::new(entries).map_err(|e: topic::TopicError| CliError::Pipeline(e.to_string()))?;
    write(out, "topics_draft.toml", &draft.to_toml())?;
    println!("{} distinct sentences in {} clusters", counted.len(), clusters.len());
    Ok(())
}
