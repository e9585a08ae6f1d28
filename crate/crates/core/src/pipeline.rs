//! End-to-end experiment runner and its configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{apply_inclusion, finalize_cohort, CohortInstance, DiagnosisDictionary, FunnelReport, StudyWindow};
use crate::ehr::{load_repository, EhrRepository, LoadReport, TablePaths};
use crate::error::{Error, Result};
use crate::eval::{
    auc, clinical_panel, kaplan_meier, roc_curve, render_reports, split_train_test, AucRow, EvalReport, Split, SplitSpec,
    EXPERIMENTS,
};
use crate::features::{
    build_icd_features, chi2_select, complete_case_filter, extract_known_factors, known_factor_matrix,
    Chi2Score, IcdFeatureMode, KnownFactorProfile, MissingnessReport,
};
use crate::icd::ChapterMap;
use crate::matrix::FeatureMatrix;
use crate::model::{
    auc_weights, fuse_weighted_average, predict, train_logistic, train_logistic_k, train_mlp, train_tsnn,
    weighted_average_model, InjectionWeights, LogisticConfig, MlpConfig, ModelKind, TrainedModel,
};
use crate::pce::{score_cohort, KnowledgeScoreVector, PceCoefficientTable};

/// Everything a full run needs. Paths left unset fall back to the
/// built-in dictionary, coefficient file and chapter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding `patient.csv`, `encounter.csv`, ...
    pub data_dir: Option<PathBuf>,
    /// Per-table overrides keyed by table name.
    pub tables: BTreeMap<String, PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub pce_coefficients: Option<PathBuf>,
    pub chapter_map: Option<PathBuf>,
    pub window: StudyWindow,
    pub split: SplitSpec,
    pub mlp: MlpConfig,
    pub logistic: LogisticConfig,
    pub injection: InjectionWeights,
    pub experiments: Vec<String>,
    pub models: Vec<ModelKind>,
    pub top_k: usize,
    /// Fixed DF-WA weights for (data model, PCE); training-AUC weights when unset.
    pub fusion_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: None,
            tables: BTreeMap::new(),
            dictionary: None,
            pce_coefficients: None,
            chapter_map: None,
            window: StudyWindow::default(),
            split: SplitSpec::default(),
            mlp: MlpConfig::default(),
            logistic: LogisticConfig::default(),
            injection: InjectionWeights::default(),
            experiments: EXPERIMENTS.iter().map(|s| s.to_string()).collect(),
            models: ModelKind::GRID.to_vec(),
            top_k: 20,
            fusion_weights: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        if !path.exists() {
            return Err(Error::MissingFile { path: path.to_path_buf() });
        }
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn table_paths(&self) -> Result<TablePaths> {
        let mut map: BTreeMap<String, PathBuf> = match &self.data_dir {
            Some(dir) => TablePaths::in_dir(dir).iter().map(|(k, p)| (k.to_string(), p.to_path_buf())).collect(),
            None => BTreeMap::new(),
        };
        map.extend(self.tables.clone());
        TablePaths::from_map(&map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::Config("experiment set is empty".into()));
        }
        if let Some(bad) = self.experiments.iter().find(|e| !EXPERIMENTS.contains(&e.as_str())) {
            return Err(Error::Config(format!("unknown experiment `{bad}`; expected one of {EXPERIMENTS:?}")));
        }
        if self.models.is_empty() {
            return Err(Error::Config("model set is empty".into()));
        }
        if self.models.contains(&ModelKind::MetaFusion) {
            return Err(Error::Config("meta_fusion is not part of the experiment grid".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if let Some(w) = &self.fusion_weights {
            let total: f64 = w.iter().sum();
            if w.len() != 2 || w.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("fusion_weights {w:?} must be two non-negative weights summing to 1")));
            }
        }
        self.window.validate()?;
        self.split.validate()?;
        self.mlp.validate()?;
        self.injection.validate()?;
        let paths = self.table_paths()?;
        let extra = [&self.dictionary, &self.pce_coefficients, &self.chapter_map];
        for p in paths.iter().map(|(_, p)| p).chain(extra.into_iter().flatten().map(PathBuf::as_path)) {
            if !p.exists() {
                return Err(Error::MissingFile { path: p.to_path_buf() });
            }
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Per-job seed: the master seed xor the first eight bytes of sha256(name).
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    master ^ u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Directory name `<UTC timestamp>-<config hash prefix>`.
pub fn run_dir_name(config: &PipelineConfig) -> String {
    format!(
        "{}-{}",
        chrono::Utc::now().format("%Y%m%dT%H%M%SZ"),
        &config.hash()[..12]
    )
}

/// Shared inputs: the repository, resources and the complete-case cohort.
pub struct Prepared {
    pub repo: EhrRepository,
    pub load_report: LoadReport,
    pub dictionary: DiagnosisDictionary,
    pub pce_table: PceCoefficientTable,
    pub chapters: ChapterMap,
    pub window: StudyWindow,
    pub funnel: FunnelReport,
    pub cohort_warnings: Vec<String>,
    /// Complete-case instances, sorted by patient id.
    pub instances: Vec<CohortInstance>,
    pub profiles: Vec<KnownFactorProfile>,
    pub missingness: MissingnessReport,
    pub knowledge: KnowledgeScoreVector,
}

impl Prepared {
    pub fn labels(&self) -> Vec<u8> {
        self.instances.iter().map(|i| i.label).collect()
    }
}

pub fn load_resources(config: &PipelineConfig) -> Result<(DiagnosisDictionary, PceCoefficientTable, ChapterMap)> {
    let dict = match &config.dictionary {
        Some(p) => DiagnosisDictionary::load(p)?,
        None => DiagnosisDictionary::builtin(),
    };
    let table = match &config.pce_coefficients {
        Some(p) => PceCoefficientTable::load(p)?,
        None => PceCoefficientTable::builtin(),
    };
    let chapters = match &config.chapter_map {
        Some(p) => ChapterMap::load(p)?,
        None => ChapterMap::builtin(),
    };
    Ok((dict, table, chapters))
}

/// Load, build the cohort, extract factors, keep complete cases and score them.
pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    let (dictionary, pce_table, chapters) = load_resources(config).map_err(|e| e.in_stage("load"))?;
    let (repo, load_report) = load_repository(&config.table_paths()?).map_err(|e| e.in_stage("load"))?;
    prepare_from(repo, load_report, dictionary, pce_table, chapters, &config.window)
}

pub fn prepare_from(
    repo: EhrRepository,
    load_report: LoadReport,
    dictionary: DiagnosisDictionary,
    pce_table: PceCoefficientTable,
    chapters: ChapterMap,
    window: &StudyWindow,
) -> Result<Prepared> {
    let inclusion = apply_inclusion(&repo, &dictionary, window);
    let cohort = finalize_cohort(inclusion.instances);
    if cohort.instances.is_empty() {
        return Err(Error::Data("no patient satisfies the inclusion criteria".into()).in_stage("cohort"));
    }

    let profiles = cohort
        .instances
        .iter()
        .map(|inst| extract_known_factors(&repo, inst, &dictionary, window.observation_days))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("factors"))?;
    let (profiles, missingness) = complete_case_filter(profiles).map_err(|e| e.in_stage("factors"))?;
    let keep: std::collections::HashSet<&str> = profiles.iter().map(|p| p.patient_id.as_str()).collect();
    let instances: Vec<CohortInstance> = cohort
        .instances
        .iter()
        .filter(|i| keep.contains(i.patient_id.as_str()))
        .cloned()
        .collect();

    let knowledge = score_cohort(&profiles, &pce_table).map_err(|e| e.in_stage("pce"))?;
    Ok(Prepared {
        repo,
        load_report,
        dictionary,
        pce_table,
        chapters,
        window: window.clone(),
        funnel: inclusion.funnel,
        cohort_warnings: cohort.warnings,
        instances,
        profiles,
        missingness,
        knowledge,
    })
}

/// Raw design matrix of one experiment, before any column selection that
/// depends on labels.
pub fn experiment_matrix(prep: &Prepared, experiment: &str) -> Result<FeatureMatrix> {
    let known = known_factor_matrix(&prep.profiles)?;
    let obs = prep.window.observation_days;
    match experiment {
        "EX-1" => Ok(known),
        "EX-2" => known.hstack(&build_icd_features(
            &prep.repo,
            &prep.instances,
            IcdFeatureMode::Chapter22,
            obs,
            &prep.chapters,
        )?),
        "EX-3" | "EX-4" => known.hstack(&build_icd_features(
            &prep.repo,
            &prep.instances,
            IcdFeatureMode::ThreeDigit,
            obs,
            &prep.chapters,
        )?),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

/// Design matrix used for training: EX-4 keeps the known factors plus the
/// top-k codes ranked on the training rows only.
pub fn training_matrix(
    prep: &Prepared,
    experiment: &str,
    split: &Split,
    top_k: usize,
) -> Result<(FeatureMatrix, Vec<Chi2Score>)> {
    let full = experiment_matrix(prep, experiment)?;
    if experiment != "EX-4" {
        return Ok((full, Vec::new()));
    }
    let labels = prep.labels();
    let n_known = crate::features::KNOWN_FACTOR_NAMES.len();
    let codes: Vec<String> = full.feature_names()[n_known..].to_vec();
    let code_matrix = full.select_columns(&codes)?;
    let y_train: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
    let (_, scores) = chi2_select(&code_matrix.select_rows(&split.train), &y_train, top_k)?;
    let chosen: std::collections::HashSet<&str> = scores.iter().map(|s| s.feature.as_str()).collect();
    let keep: Vec<String> = full
        .feature_names()
        .iter()
        .enumerate()
        .filter(|(j, n)| *j < n_known || chosen.contains(n.as_str()))
        .map(|(_, n)| n.clone())
        .collect();
    Ok((full.select_columns(&keep)?, scores))
}

/// One trained model with its scores on both parts.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub experiment: String,
    pub model: TrainedModel,
    pub train_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
}

struct Job {
    experiment: String,
    name: &'static str,
    seed: u64,
}

fn job_names(models: &[ModelKind]) -> Vec<&'static str> {
    let has = |k| models.contains(&k);
    let mut out = Vec::new();
    if has(ModelKind::Lr) || has(ModelKind::DfWa) {
        out.push("lr");
    }
    if has(ModelKind::LrK) {
        out.push("lr_k");
    }
    if has(ModelKind::Nn) {
        out.push("nn");
    }
    if has(ModelKind::NnK) {
        out.push("nn_k");
    }
    if has(ModelKind::TsnnTeacher) || has(ModelKind::TsnnStudent) {
        out.push("tsnn");
    }
    if has(ModelKind::Kenn) {
        out.push("kenn");
    }
    out
}

struct Data<'a> {
    x_train: FeatureMatrix,
    x_test: FeatureMatrix,
    y_train: Vec<u8>,
    k_train: KnowledgeScoreVector,
    k_test: KnowledgeScoreVector,
    config: &'a PipelineConfig,
}

fn fitted(experiment: &str, model: TrainedModel, d: &Data<'_>) -> Result<Fitted> {
    let train_scores = predict(&model, &d.x_train, Some(&d.k_train))?;
    let test_scores = predict(&model, &d.x_test, Some(&d.k_test))?;
    Ok(Fitted {
        experiment: experiment.to_string(),
        model,
        train_scores,
        test_scores,
    })
}

fn run_job(job: &Job, d: &Data<'_>) -> Result<Vec<Fitted>> {
    let cfg = MlpConfig {
        seed: job.seed,
        ..d.config.mlp.clone()
    };
    let inj = &d.config.injection;
    let ex = job.experiment.as_str();
    let (x, y) = (&d.x_train, d.y_train.as_slice());
    let one = |m: Result<TrainedModel>| -> Result<Vec<Fitted>> { Ok(vec![fitted(ex, m?, d)?]) };
    match job.name {
        "lr" => one(train_logistic(x, y, &d.config.logistic)),
        "lr_k" => one(train_logistic_k(x, &d.k_train, y, &d.config.logistic)),
        "nn" => one(train_mlp(x, y, &cfg, None, None, ModelKind::Nn)),
        "nn_k" => one(train_mlp(x, y, &cfg, Some(&d.k_train), None, ModelKind::NnK)),
        "kenn" => one(train_mlp(x, y, &cfg, Some(&d.k_train), Some(inj), ModelKind::Kenn)),
        "tsnn" => {
            let (t, s) = train_tsnn(x, y, &d.k_train, &cfg, inj)?;
            Ok(vec![fitted(ex, t, d)?, fitted(ex, s, d)?])
        }
        other => unreachable!("unknown job {other}"),
    }
}

fn fuse(experiment: &str, lr: &Fitted, d: &Data<'_>) -> Result<Fitted> {
    let pce_train = d.k_train.primary();
    let pce_test = d.k_test.primary();
    let weights = match &d.config.fusion_weights {
        Some(w) => w.clone(),
        None => auc_weights(&[&lr.train_scores, &pce_train], &d.y_train)?,
    };
    let model = weighted_average_model(vec!["s0".into(), "pce".into()], weights.clone())?;
    Ok(Fitted {
        experiment: experiment.to_string(),
        model,
        train_scores: fuse_weighted_average(&[&lr.train_scores, &pce_train], &weights)?,
        test_scores: fuse_weighted_average(&[&lr.test_scores, &pce_test], &weights)?,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub split_seed: u64,
    pub job_seeds: BTreeMap<String, u64>,
    pub stages_completed: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub counts: BTreeMap<String, usize>,
    pub inputs: BTreeMap<String, String>,
    /// Output files relative to the run directory and their sha256.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub struct PipelineOutcome {
    pub report: EvalReport,
    pub manifest: Manifest,
    pub fitted: Vec<Fitted>,
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("RISKFORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("RISKFORGE_THREADS=`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(Error::Config("RISKFORGE_THREADS must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn record(manifest: &mut Manifest, dir: &Path, path: &Path) -> Result<()> {
    let rel = path.strip_prefix(dir).unwrap_or(path).to_string_lossy().replace('\\', "/");
    manifest.files.insert(rel, sha256_file(path)?);
    Ok(())
}

/// Run the whole pipeline, writing every artifact under `out_dir`. On
/// failure a partial manifest naming the failed stage is still written.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest {
        config_hash: config.hash(),
        seed: config.seed,
        ..Manifest::default()
    };
    let result = run_stages(config, out_dir, &mut manifest);
    if let Err(e) = &result {
        manifest.failed_stage = Some(match e {
            Error::Stage { stage, .. } => stage.to_string(),
            _ => "unknown".into(),
        });
        manifest.error = Some(e.to_string());
    }
    manifest.write(out_dir)?;
    let (report, fitted) = result?;
    Ok(PipelineOutcome {
        report,
        manifest,
        fitted,
    })
}

fn run_stages(config: &PipelineConfig, out: &Path, manifest: &mut Manifest) -> Result<(EvalReport, Vec<Fitted>)> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(config)?)?;
    record(manifest, out, &out.join("config.json"))?;
    manifest.stages_completed.push("config".into());

    let paths = config.table_paths()?;
    for (name, p) in paths.iter() {
        manifest.inputs.insert(name.to_string(), sha256_file(p)?);
    }
    for (name, p) in [
        ("dictionary", &config.dictionary),
        ("pce_coefficients", &config.pce_coefficients),
        ("chapter_map", &config.chapter_map),
    ] {
        if let Some(p) = p {
            manifest.inputs.insert(name.to_string(), sha256_file(p)?);
        }
    }

    let prep = prepare(config)?;
    manifest.stages_completed.extend(["load", "cohort", "factors", "pce"].map(String::from));
    manifest.counts.insert("patients".into(), prep.repo.patients().len());
    manifest.counts.insert("rows_skipped".into(), prep.load_report.total_skipped());
    manifest.counts.insert("cohort".into(), prep.missingness.total);
    manifest.counts.insert("complete_cases".into(), prep.instances.len());

    let p = out.join("funnel.csv");
    prep.funnel.write_csv(&p)?;
    record(manifest, out, &p)?;
    let p = out.join("cohort.csv");
    crate::cohort::write_instances(&prep.instances, &p)?;
    record(manifest, out, &p)?;
    let p = out.join("pce_scores.csv");
    prep.knowledge.matrix().write_csv(&p)?;
    record(manifest, out, &p)?;

    let labels = prep.labels();
    let split_seed = derive_seed(config.seed, "split");
    manifest.split_seed = split_seed;
    let split = split_train_test(
        &labels,
        &SplitSpec {
            seed: split_seed,
            ..config.split.clone()
        },
    )
    .map_err(|e| e.in_stage("split"))?;
    manifest.counts.insert("train".into(), split.train.len());
    manifest.counts.insert("test".into(), split.test.len());
    manifest.stages_completed.push("split".into());
    let y_train: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<u8> = split.test.iter().map(|&i| labels[i]).collect();
    let k_train = prep.knowledge.select_rows(&split.train);
    let k_test = prep.knowledge.select_rows(&split.test);

    let mut report = EvalReport {
        pce_train_auc: auc(&k_train.primary(), &y_train),
        pce_test_auc: auc(&k_test.primary(), &y_test),
        ..EvalReport::default()
    };
    report.notes.extend(prep.cohort_warnings.iter().cloned());
    report.notes.push(format!(
        "complete cases {} of {} cohort instances; train {} test {}",
        prep.instances.len(),
        prep.missingness.total,
        split.train.len(),
        split.test.len()
    ));

    let experiments: Vec<&str> = EXPERIMENTS
        .iter()
        .copied()
        .filter(|e| config.experiments.iter().any(|c| c == e))
        .collect();
    let mut designs = Vec::new();
    for ex in &experiments {
        let (x, scores) = training_matrix(&prep, ex, &split, config.top_k).map_err(|e| e.in_stage("features"))?;
        if !scores.is_empty() {
            let p = out.join(format!("selected_features_{ex}.csv"));
            let mut w = csv::Writer::from_path(&p)?;
            for s in &scores {
                w.serialize(s)?;
            }
            w.flush()?;
            record(manifest, out, &p)?;
        }
        designs.push((ex.to_string(), x));
    }
    manifest.stages_completed.push("features".into());

    let data: Vec<Data<'_>> = designs
        .iter()
        .map(|(_, x)| Data {
            x_train: x.select_rows(&split.train),
            x_test: x.select_rows(&split.test),
            y_train: y_train.clone(),
            k_train: k_train.clone(),
            k_test: k_test.clone(),
            config,
        })
        .collect();
    let mut jobs = Vec::new();
    for (e, (ex, _)) in designs.iter().enumerate() {
        for name in job_names(&config.models) {
            let key = format!("{ex}/{name}");
            let seed = derive_seed(config.seed, &key);
            manifest.job_seeds.insert(key, seed);
            jobs.push((
                e,
                Job {
                    experiment: ex.clone(),
                    name,
                    seed,
                },
            ));
        }
    }
    let pool = worker_pool().map_err(|e| e.in_stage("train"))?;
    let results: Vec<Result<Vec<Fitted>>> =
        pool.install(|| jobs.par_iter().map(|(e, job)| run_job(job, &data[*e])).collect());
    let mut fitted: Vec<Fitted> = Vec::new();
    for ((_, job), r) in jobs.iter().zip(results) {
        let models = r.map_err(|e| {
            log::error!("{} {} failed: {e}", job.experiment, job.name);
            e.in_stage("train")
        })?;
        fitted.extend(models);
    }
    for (e, (ex, _)) in designs.iter().enumerate() {
        if config.models.contains(&ModelKind::DfWa) {
            let lr = fitted
                .iter()
                .find(|f| &f.experiment == ex && f.model.kind == ModelKind::Lr)
                .expect("lr is trained whenever fusion is requested");
            let f = fuse(ex, lr, &data[e]).map_err(|e| e.in_stage("train"))?;
            fitted.push(f);
        }
    }
    fitted.retain(|f| config.models.contains(&f.model.kind));
    fitted.sort_by_key(|f| {
        (
            EXPERIMENTS.iter().position(|e| *e == f.experiment),
            ModelKind::GRID.iter().position(|k| *k == f.model.kind),
        )
    });
    manifest.stages_completed.push("train".into());

    let models_dir = out.join("models");
    std::fs::create_dir_all(&models_dir)?;
    for f in &fitted {
        let p = models_dir.join(format!("{}_{}.json", f.experiment, f.model.kind.label()));
        f.model.save(&p)?;
        record(manifest, out, &p)?;
        report.aucs.push(AucRow {
            experiment: f.experiment.clone(),
            model: f.model.kind,
            train_auc: auc(&f.train_scores, &y_train),
            test_auc: auc(&f.test_scores, &y_test),
        });
    }

    let p = out.join("roc_test.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["experiment", "model", "threshold", "fpr", "tpr"])?;
    for f in &fitted {
        for pt in roc_curve(&f.test_scores, &y_test).unwrap_or_default() {
            w.write_record([
                f.experiment.clone(),
                f.model.kind.label().to_string(),
                if pt.threshold.is_finite() { format!("{}", pt.threshold) } else { "inf".into() },
                format!("{}", pt.fpr),
                format!("{}", pt.tpr),
            ])?;
        }
    }
    w.flush()?;
    record(manifest, out, &p)?;

    let times: Vec<f64> = prep.instances.iter().map(|i| i.event_or_censor_days as f64).collect();
    let events: Vec<bool> = prep.instances.iter().map(|i| !i.censored).collect();
    report.km = kaplan_meier(&times, &events);
    for (ex, x) in &designs {
        if ex == "EX-3" {
            continue;
        }
        let panel = clinical_panel(ex, x, &labels, &times, &events).map_err(|e| e.in_stage("evaluate"))?;
        report.clinical.push(panel);
    }
    manifest.stages_completed.push("evaluate".into());

    for p in render_reports(&report, out).map_err(|e| e.in_stage("report"))? {
        record(manifest, out, &p)?;
    }
    manifest.stages_completed.push("report".into());
    Ok((report, fitted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_name() {
        assert_ne!(derive_seed(7, "EX-1/nn"), derive_seed(7, "EX-1/kenn"));
        assert_eq!(derive_seed(7, "EX-1/nn"), derive_seed(7, "EX-1/nn"));
        assert_eq!(derive_seed(0, "x") ^ derive_seed(5, "x"), 5);
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig {
            experiments: vec![],
            ..PipelineConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.experiments = vec!["EX-9".into()];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.experiments = vec!["EX-1".into()];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 3, "experiments": ["EX-1"]}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.top_k, 20);
        assert_eq!(c.models.len(), 8);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 3}"#).is_err());
    }
}
