//! `riskforge`: stage-by-stage commands and the full experiment run.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::info;

use riskforge::cohort::{apply_inclusion, finalize_cohort, write_instances};
use riskforge::eval::{auc, roc_curve, split_train_test, SplitSpec, EXPERIMENTS};
use riskforge::features::Standardizer;
use riskforge::icd::IcdCatalog;
use riskforge::model::{
    auc_weights, train_logistic, train_logistic_k, train_meta_fusion, train_mlp, train_tsnn,
    weighted_average_model, OptimizerKind,
};
use riskforge::pipeline::{derive_seed, load_resources, prepare, run_dir_name, training_matrix};
use riskforge::synth::{generate_synthetic, SynthSpec};
use riskforge::{
    load_repository, predict, run_pipeline, Error, ErrorKind, FeatureMatrix, KnowledgeScoreVector, ModelKind,
    PipelineConfig, TrainedModel,
};

#[derive(Parser)]
#[command(name = "riskforge", version, about = "ASCVD risk modelling for T2DM cohorts on relational EHR extracts")]
struct Cli {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and audit the six tables.
    Etl {
        #[command(flatten)]
        data: DataArgs,
        /// Write load_report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the inclusion criteria; writes cohort.csv and funnel.csv.
    Cohort {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one experiment's design matrix with labels, split and scaler.
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "EX-1")]
        experiment: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// PCE risk for every complete-case cohort member.
    ScorePce {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a feature CSV.
    Train(TrainArgs),
    /// Predict, then report AUC and ROC points against labels.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        knowledge: Option<PathBuf>,
        /// Only rows marked with this part in the split file.
        #[arg(long, requires = "part")]
        split: Option<PathBuf>,
        #[arg(long)]
        part: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline into a fresh run directory.
    RunAll {
        #[command(flatten)]
        data: DataArgs,
        /// Required unless the config file sets `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Exact output directory; defaults to <out-root>/<timestamp>-<config hash>.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out_root: PathBuf,
        #[arg(long, value_delimiter = ',')]
        experiments: Option<Vec<String>>,
        /// Model labels such as LR,NN-K,KENN.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write a synthetic six-table extract plus truth.csv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_patients: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        event_rate: Option<f64>,
        #[arg(long)]
        knowledge_signal: Option<f64>,
        #[arg(long)]
        data_signal: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        /// No missing factors and no excluded patients.
        #[arg(long)]
        clean: bool,
    },
    /// Probabilities for every row of a feature CSV.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        knowledge: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Directory with patient.csv, encounter.csv, labtest.csv, followup.csv,
    /// medication.csv and organization.csv.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    pce_coefficients: Option<PathBuf>,
    #[arg(long)]
    chapter_map: Option<PathBuf>,
    /// First day of the index period, YYYY-MM-DD.
    #[arg(long, value_parser = parse_date)]
    index_start: Option<NaiveDate>,
    /// Last day of the index period, YYYY-MM-DD.
    #[arg(long, value_parser = parse_date)]
    index_end: Option<NaiveDate>,
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("`{s}`: {e}"))
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    /// CSV with instance_id and label columns.
    #[arg(long)]
    labels: PathBuf,
    /// LR, LR-K, NN, NN-K, TSNN-T, TSNN-S, KENN, DF-WA or META.
    #[arg(long)]
    model: String,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Train on the rows marked `train` only.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    sgd: bool,
    #[arg(long)]
    pi: Option<f64>,
}

fn base_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn config_sets_seed(path: Option<&Path>) -> anyhow::Result<bool> {
    let Some(p) = path else { return Ok(false) };
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    Ok(v.get("seed").is_some_and(|s| !s.is_null()))
}

impl DataArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(d) = &self.data_dir {
            c.data_dir = Some(d.clone());
        }
        if let Some(p) = &self.dictionary {
            c.dictionary = Some(p.clone());
        }
        if let Some(p) = &self.pce_coefficients {
            c.pce_coefficients = Some(p.clone());
        }
        if let Some(p) = &self.chapter_map {
            c.chapter_map = Some(p.clone());
        }
        if let Some(d) = self.index_start {
            c.window.index_period_start = d;
        }
        if let Some(d) = self.index_end {
            c.window.index_period_end = d;
        }
    }
}

fn read_labels(path: &Path, ids: &[String]) -> anyhow::Result<Vec<u8>> {
    let m = FeatureMatrix::read_csv(path)?;
    let j = m
        .column_index("label")
        .ok_or_else(|| Error::Data(format!("{}: no `label` column", path.display())))?;
    let m = m.select_ids(ids)?;
    m.column(j)
        .into_iter()
        .map(|v| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            other => Err(Error::Data(format!("label {other} is not 0/1")).into()),
        })
        .collect()
}

fn read_knowledge(path: Option<&Path>, ids: &[String]) -> anyhow::Result<Option<KnowledgeScoreVector>> {
    path.map(|p| -> anyhow::Result<_> { Ok(KnowledgeScoreVector::new(FeatureMatrix::read_csv(p)?.select_ids(ids)?)?) })
        .transpose()
}

/// Row indices whose `part` column in the split file equals `part`.
fn split_rows(path: &Path, ids: &[String], part: &str) -> anyhow::Result<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut parts = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        parts.insert(rec.get(0).unwrap_or_default().to_string(), rec.get(1).unwrap_or_default().to_string());
    }
    let rows: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| parts.get(*id).map(String::as_str) == Some(part))
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        bail!(Error::Data(format!("split file has no `{part}` rows for these instances")));
    }
    Ok(rows)
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn etl(config: &PipelineConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let (_, _, chapters) = load_resources(config)?;
    let (repo, report) = load_repository(&config.table_paths()?)?;
    let audit = repo.audit_icd_validity(&IcdCatalog::structural(chapters));
    for (table, stats) in &report.tables {
        println!("{table:<13} read {:>8} loaded {:>8} skipped {:>6}", stats.rows_read, stats.rows_loaded, stats.rows_skipped);
    }
    println!("dangling references {}", report.dangling.total());
    println!(
        "icd codes: {} encounters, {} null, {} valid",
        audit.encounters, audit.null_codes, audit.valid_codes
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("load_report.json"), &serde_json::json!({ "load": report, "icd": audit }))?;
    }
    Ok(())
}

fn cohort(config: &PipelineConfig, out: &Path) -> anyhow::Result<()> {
    config.window.validate()?;
    let (dict, _, _) = load_resources(config)?;
    let (repo, _) = load_repository(&config.table_paths()?)?;
    let outcome = apply_inclusion(&repo, &dict, &config.window);
    let cohort = finalize_cohort(outcome.instances);
    std::fs::create_dir_all(out)?;
    write_instances(&cohort.instances, &out.join("cohort.csv"))?;
    outcome.funnel.write_csv(&out.join("funnel.csv"))?;
    for w in &cohort.warnings {
        log::warn!("{w}");
    }
    println!(
        "cohort: {} instances ({} positive, {} negative)",
        cohort.instances.len(),
        cohort.positives(),
        cohort.negatives()
    );
    Ok(())
}

fn features(config: &PipelineConfig, out: &Path, experiment: &str) -> anyhow::Result<()> {
    if !EXPERIMENTS.contains(&experiment) {
        bail!(Error::Config(format!("unknown experiment `{experiment}`; expected one of {EXPERIMENTS:?}")));
    }
    let prep = prepare(config)?;
    let labels = prep.labels();
    let split = split_train_test(
        &labels,
        &SplitSpec {
            seed: derive_seed(config.seed, "split"),
            ..config.split.clone()
        },
    )?;
    let (x, scores) = training_matrix(&prep, experiment, &split, config.top_k)?;
    std::fs::create_dir_all(out)?;
    x.write_csv(&out.join(format!("features_{experiment}.csv")))?;
    Standardizer::fit(&x.select_rows(&split.train))?.write_json(&out.join(format!("features_{experiment}.scaler.json")))?;
    prep.knowledge.matrix().write_csv(&out.join("pce_scores.csv"))?;

    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["instance_id", "label", "time", "event"])?;
    for i in &prep.instances {
        w.write_record([
            i.patient_id.clone(),
            i.label.to_string(),
            i.event_or_censor_days.to_string(),
            u8::from(!i.censored).to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("split.csv"))?;
    w.write_record(["instance_id", "part"])?;
    let mut parts = vec!["test"; prep.instances.len()];
    for &i in &split.train {
        parts[i] = "train";
    }
    for (inst, part) in prep.instances.iter().zip(parts) {
        w.write_record([inst.patient_id.as_str(), part])?;
    }
    w.flush()?;
    if !scores.is_empty() {
        write_json(&out.join(format!("selected_features_{experiment}.json")), &serde_json::to_value(&scores)?)?;
    }
    println!(
        "{experiment}: {} instances x {} features (train {}, test {})",
        x.n(),
        x.m(),
        split.train.len(),
        split.test.len()
    );
    Ok(())
}

fn score_pce(config: &PipelineConfig, out: &Path) -> anyhow::Result<()> {
    let prep = prepare(config)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    prep.knowledge.matrix().write_csv(out)?;
    let m = &prep.missingness;
    println!("pce: scored {} complete cases of {} cohort instances", m.complete, m.total);
    Ok(())
}

fn train(config: &PipelineConfig, a: &TrainArgs) -> anyhow::Result<()> {
    let kind = ModelKind::from_label(&a.model)
        .ok_or_else(|| Error::Config(format!("unknown model `{}`", a.model)))?;
    let x = FeatureMatrix::read_csv(&a.features)?;
    let ids = x.instance_ids().to_vec();
    let y = read_labels(&a.labels, &ids)?;
    let k = read_knowledge(a.knowledge.as_deref(), &ids)?;
    let rows = match &a.split {
        Some(p) => split_rows(p, &ids, "train")?,
        None => (0..ids.len()).collect(),
    };
    let x = x.select_rows(&rows);
    let y: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
    let k = k.map(|k| k.select_rows(&rows));

    let mut mlp = config.mlp.clone();
    mlp.seed = a.seed.unwrap_or(config.seed);
    mlp.epochs = a.epochs.unwrap_or(mlp.epochs);
    mlp.hidden_layers = a.hidden_layers.unwrap_or(mlp.hidden_layers);
    mlp.hidden_units = a.hidden_units.unwrap_or(mlp.hidden_units);
    mlp.dropout_rate = a.dropout.unwrap_or(mlp.dropout_rate);
    mlp.learning_rate = a.learning_rate.unwrap_or(mlp.learning_rate);
    mlp.batch_size = a.batch_size.unwrap_or(mlp.batch_size);
    if a.sgd {
        mlp.optimizer = OptimizerKind::Sgd;
    }
    let mut inj = config.injection.clone();
    inj.pi = a.pi.unwrap_or(inj.pi);

    let need_k = || k.as_ref().ok_or_else(|| Error::Config(format!("{kind} needs --knowledge")));
    let model = match kind {
        ModelKind::Lr => train_logistic(&x, &y, &config.logistic)?,
        ModelKind::LrK => train_logistic_k(&x, need_k()?, &y, &config.logistic)?,
        ModelKind::Nn => train_mlp(&x, &y, &mlp, None, None, kind)?,
        ModelKind::NnK | ModelKind::Kenn => train_mlp(&x, &y, &mlp, k.as_ref(), Some(&inj), kind)?,
        ModelKind::TsnnTeacher | ModelKind::TsnnStudent => {
            let (t, s) = train_tsnn(&x, &y, need_k()?, &mlp, &inj)?;
            if kind == ModelKind::TsnnTeacher {
                t
            } else {
                s
            }
        }
        ModelKind::DfWa => {
            let k = need_k()?;
            let lr = train_logistic(&x, &y, &config.logistic)?;
            let s0 = predict(&lr, &x, None)?;
            let pce = k.primary();
            let w = match &config.fusion_weights {
                Some(w) => w.clone(),
                None => auc_weights(&[&s0, &pce], &y)?,
            };
            info!("fusion weights {w:?}");
            weighted_average_model(vec!["s0".into(), k.matrix().feature_names()[0].clone()], w)?
        }
        ModelKind::MetaFusion => train_meta_fusion(&x, &y, &config.logistic)?,
    };
    model.save(&a.out)?;
    println!("{kind}: trained on {} rows, saved {}", x.n(), a.out.display());
    Ok(())
}

fn write_predictions(ids: &[String], p: &[f64], out: Option<&Path>) -> anyhow::Result<()> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["instance_id", "probability"])?;
    for (id, v) in ids.iter().zip(p) {
        w.write_record([id.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn score(model: &Path, input: &Path, knowledge: Option<&Path>, out: Option<&Path>) -> anyhow::Result<()> {
    let model = TrainedModel::load(model)?;
    let x = FeatureMatrix::read_csv(input)?;
    let ids = x.instance_ids().to_vec();
    let k = if model.uses_knowledge_input {
        read_knowledge(knowledge, &ids)?
    } else {
        None
    };
    let p = predict(&model, &x, k.as_ref())?;
    write_predictions(&ids, &p, out)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    model: &Path,
    features: &Path,
    labels: &Path,
    knowledge: Option<&Path>,
    split: Option<(&Path, &str)>,
    out: &Path,
) -> anyhow::Result<()> {
    let model = TrainedModel::load(model)?;
    let x = FeatureMatrix::read_csv(features)?;
    let ids = x.instance_ids().to_vec();
    let rows = match split {
        Some((p, part)) => split_rows(p, &ids, part)?,
        None => (0..ids.len()).collect(),
    };
    let y = read_labels(labels, &ids)?;
    let k = read_knowledge(knowledge, &ids)?.map(|k| k.select_rows(&rows));
    let x = x.select_rows(&rows);
    let y: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
    let p = predict(&model, &x, k.as_ref())?;
    let a = auc(&p, &y);

    std::fs::create_dir_all(out)?;
    write_predictions(x.instance_ids(), &p, Some(&out.join("predictions.csv")))?;
    let mut w = csv::Writer::from_path(out.join("roc.csv"))?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    for pt in roc_curve(&p, &y).unwrap_or_default() {
        let t = if pt.threshold.is_finite() { pt.threshold.to_string() } else { "inf".into() };
        w.write_record([t, pt.fpr.to_string(), pt.tpr.to_string()])?;
    }
    w.flush()?;
    write_json(
        &out.join("metrics.json"),
        &serde_json::json!({ "model": model.kind.label(), "n": y.len(), "auc": a }),
    )?;
    match a {
        Some(a) => println!("{}: AUC {} on {} rows", model.kind, riskforge::eval::format_sig(a), y.len()),
        None => println!("{}: AUC undefined (single class) on {} rows", model.kind, y.len()),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Etl { data, out } => {
            data.apply(&mut config);
            etl(&config, out.as_deref())
        }
        Command::Cohort { data, out } => {
            data.apply(&mut config);
            cohort(&config, &out)
        }
        Command::Features {
            data,
            out,
            experiment,
            seed,
            top_k,
        } => {
            data.apply(&mut config);
            config.seed = seed.unwrap_or(config.seed);
            config.top_k = top_k.unwrap_or(config.top_k);
            features(&config, &out, &experiment)
        }
        Command::ScorePce { data, out } => {
            data.apply(&mut config);
            score_pce(&config, &out)
        }
        Command::Train(a) => train(&config, &a),
        Command::Evaluate {
            model,
            features,
            labels,
            knowledge,
            split,
            part,
            out,
        } => {
            let split = split.as_deref().zip(part.as_deref());
            evaluate(&model, &features, &labels, knowledge.as_deref(), split, &out)
        }
        Command::RunAll {
            data,
            seed,
            run_dir,
            out_root,
            experiments,
            models,
            top_k,
            epochs,
        } => {
            data.apply(&mut config);
            config.seed = match seed {
                Some(s) => s,
                None if config_sets_seed(cli.config.as_deref())? => config.seed,
                None => return Err(Error::Config("run-all needs --seed or a `seed` in the config file".into()).into()),
            };
            if let Some(e) = experiments {
                config.experiments = e;
            }
            if let Some(m) = models {
                config.models = m
                    .iter()
                    .map(|l| ModelKind::from_label(l).ok_or_else(|| Error::Config(format!("unknown model `{l}`"))))
                    .collect::<Result<_, _>>()?;
            }
            config.top_k = top_k.unwrap_or(config.top_k);
            config.mlp.epochs = epochs.unwrap_or(config.mlp.epochs);
            let dir = run_dir.unwrap_or_else(|| out_root.join(run_dir_name(&config)));
            info!("run directory {}", dir.display());
            let outcome = run_pipeline(&config, &dir)?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            println!("run directory: {}", dir.display());
            info!("{} files recorded in the manifest", outcome.manifest.files.len());
            Ok(())
        }
        Command::Synth {
            out,
            n_patients,
            seed,
            event_rate,
            knowledge_signal,
            data_signal,
            noise,
            clean,
        } => {
            let mut spec = if clean {
                SynthSpec::clean(n_patients, seed)
            } else {
                SynthSpec {
                    n_patients,
                    seed,
                    ..SynthSpec::default()
                }
            };
            spec.event_rate = event_rate.unwrap_or(spec.event_rate);
            spec.knowledge_signal_strength = knowledge_signal.unwrap_or(spec.knowledge_signal_strength);
            spec.data_signal_strength = data_signal.unwrap_or(spec.data_signal_strength);
            spec.noise = noise.unwrap_or(spec.noise);
            let s = generate_synthetic(&spec, &out)?;
            for w in &s.warnings {
                log::warn!("{w}");
            }
            println!("synth: {} patients written to {}", s.truth.len(), out.display());
            Ok(())
        }
        Command::Score {
            model,
            input,
            knowledge,
            out,
        } => score(&model, &input, knowledge.as_deref(), out.as_deref()),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>().map(Error::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Numerical) => 4,
        _ => 3,
    }
}

fn from_csv(e: &csv::Error) -> Option<&std::io::Error> {
    match e.kind() {
        csv::ErrorKind::Io(io) => Some(io),
        _ => None,
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<std::io::Error>().or_else(|| match c.downcast_ref::<Error>() {
            Some(Error::Io(io)) => Some(io),
            Some(Error::Csv(e)) => from_csv(e),
            _ => c.downcast_ref::<csv::Error>().and_then(from_csv),
        });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        // the reader went away, e.g. `riskforge score ... | head`
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
