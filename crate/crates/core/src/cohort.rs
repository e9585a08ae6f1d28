//! Cohort construction: outcome matching over free-text diagnoses, the T2DM
//! index event, inclusion/exclusion criteria and outcome grouping.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ehr::{EhrRepository, EncounterRow, EncounterType, Gender, DATE_FORMAT};
use crate::error::{Error, Result};

const BUILTIN_DICTIONARY: &str = include_str!("../data/dictionary.json");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Literal, case-sensitive containment.
    Substring,
    /// Containment after dropping whitespace/punctuation and case-folding.
    #[default]
    NormalizedSubstring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "PatternSpec", into = "PatternSpec")]
pub struct Pattern {
    pub pattern: String,
    pub mode: MatchMode,
    normalized: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PatternSpec {
    Plain(String),
    Full {
        pattern: String,
        #[serde(default)]
        mode: MatchMode,
    },
}

impl From<PatternSpec> for Pattern {
    fn from(spec: PatternSpec) -> Pattern {
        match spec {
            PatternSpec::Plain(p) => Pattern::new(p, MatchMode::NormalizedSubstring),
            PatternSpec::Full { pattern, mode } => Pattern::new(pattern, mode),
        }
    }
}

impl From<Pattern> for PatternSpec {
    fn from(p: Pattern) -> PatternSpec {
        PatternSpec::Full {
            pattern: p.pattern,
            mode: p.mode,
        }
    }
}

impl Pattern {
    pub fn new(pattern: impl Into<String>, mode: MatchMode) -> Pattern {
        let pattern = pattern.into();
        let normalized = normalize_text(&pattern);
        Pattern {
            pattern,
            mode,
            normalized,
        }
    }

    fn matches(&self, text: &str, normalized_text: &str) -> bool {
        match self.mode {
            MatchMode::Substring => !self.pattern.is_empty() && text.contains(&self.pattern),
            MatchMode::NormalizedSubstring => {
                !self.normalized.is_empty() && normalized_text.contains(&self.normalized)
            }
        }
    }
}

/// Keep alphanumerics (any script), lower-cased.
pub fn normalize_text(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// True iff any pattern matches. Missing or empty text never matches.
pub fn match_diagnosis(text: Option<&str>, patterns: &[Pattern]) -> bool {
    let Some(text) = text.filter(|t| !t.is_empty()) else {
        return false;
    };
    let normalized = normalize_text(text);
    patterns.iter().any(|p| p.matches(text, &normalized))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionPatterns {
    #[serde(default)]
    pub text: Vec<Pattern>,
    #[serde(default)]
    pub icd_prefixes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabItem {
    pub name: String,
    /// Multiplier converting the recorded value to mg/dL.
    pub to_mg_dl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabItems {
    pub tc: Vec<LabItem>,
    pub hdl_c: Vec<LabItem>,
}

impl Default for LabItems {
    fn default() -> Self {
        LabItems {
            tc: vec![LabItem {
                name: "tc".into(),
                to_mg_dl: 1.0,
            }],
            hdl_c: vec![LabItem {
                name: "hdl-c".into(),
                to_mg_dl: 1.0,
            }],
        }
    }
}

fn default_t2dm_icd_prefixes() -> Vec<String> {
    vec!["E11".into()]
}

/// Configurable outcome, index-event and exclusion vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisDictionary {
    pub ascvd_patterns: Vec<Pattern>,
    pub t2dm_patterns: Vec<Pattern>,
    #[serde(default = "default_t2dm_icd_prefixes")]
    pub t2dm_icd_prefixes: Vec<String>,
    pub t2dm_drug_classes: BTreeSet<String>,
    #[serde(default)]
    pub antihypertensive_classes: BTreeSet<String>,
    /// Declared drug classes; empty means "whatever the map and class lists use".
    #[serde(default)]
    pub drug_class_vocabulary: BTreeSet<String>,
    pub drug_class_map: BTreeMap<String, String>,
    #[serde(default)]
    pub exclusion_patterns: ExclusionPatterns,
    #[serde(default)]
    pub lab_items: LabItems,
}

impl DiagnosisDictionary {
    /// The shipped sample dictionary.
    pub fn builtin() -> DiagnosisDictionary {
        DiagnosisDictionary::from_json(BUILTIN_DICTIONARY).expect("builtin dictionary is valid")
    }

    pub fn load(path: &Path) -> Result<DiagnosisDictionary> {
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        DiagnosisDictionary::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<DiagnosisDictionary> {
        let mut dict: DiagnosisDictionary = serde_json::from_str(text)?;
        dict.drug_class_map = dict
            .drug_class_map
            .into_iter()
            .map(|(k, v)| (k.trim().to_lowercase(), v))
            .collect();
        dict.validate()?;
        Ok(dict)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ascvd_patterns.is_empty() {
            return Err(Error::Config("dictionary: ascvd_patterns is empty".into()));
        }
        if self.t2dm_patterns.is_empty() {
            return Err(Error::Config("dictionary: t2dm_patterns is empty".into()));
        }
        if !self.drug_class_vocabulary.is_empty() {
            let undeclared: Vec<&str> = self
                .drug_class_map
                .values()
                .chain(&self.t2dm_drug_classes)
                .chain(&self.antihypertensive_classes)
                .filter(|c| !self.drug_class_vocabulary.contains(*c))
                .map(String::as_str)
                .collect();
            if !undeclared.is_empty() {
                return Err(Error::Config(format!(
                    "dictionary: undeclared drug classes [{}]",
                    undeclared.join(",")
                )));
            }
        }
        for item in self.lab_items.tc.iter().chain(&self.lab_items.hdl_c) {
            if !(item.to_mg_dl > 0.0 && item.to_mg_dl.is_finite()) {
                return Err(Error::Config(format!("dictionary: bad unit factor for `{}`", item.name)));
            }
        }
        Ok(())
    }

    /// Class of a drug: exact (case-insensitive) name first, then the longest
    /// map key contained in the normalised name.
    pub fn drug_class(&self, drug_name: &str) -> Option<&str> {
        let key = drug_name.trim().to_lowercase();
        if let Some(c) = self.drug_class_map.get(&key) {
            return Some(c);
        }
        let normalized = normalize_text(&key);
        self.drug_class_map
            .iter()
            .filter(|(k, _)| {
                let nk = normalize_text(k);
                !nk.is_empty() && normalized.contains(&nk)
            })
            .max_by_key(|(k, _)| (k.chars().count(), std::cmp::Reverse(k.as_str())))
            .map(|(_, c)| c.as_str())
    }

    pub fn is_t2dm_drug(&self, drug_name: &str) -> bool {
        self.drug_class(drug_name)
            .is_some_and(|c| self.t2dm_drug_classes.contains(c))
    }

    pub fn is_antihypertensive(&self, drug_name: &str) -> bool {
        self.drug_class(drug_name)
            .is_some_and(|c| self.antihypertensive_classes.contains(c))
    }

    pub fn is_ascvd(&self, e: &EncounterRow) -> bool {
        match_diagnosis(e.diagnosis.as_deref(), &self.ascvd_patterns)
    }

    /// T2DM evidence on an encounter: diagnosis text or ICD prefix.
    pub fn is_t2dm(&self, e: &EncounterRow) -> bool {
        match_diagnosis(e.diagnosis.as_deref(), &self.t2dm_patterns)
            || icd_has_prefix(e.icd_code.as_deref(), &self.t2dm_icd_prefixes)
    }

    pub fn is_excluded_diabetes(&self, e: &EncounterRow) -> bool {
        match_diagnosis(e.diagnosis.as_deref(), &self.exclusion_patterns.text)
            || icd_has_prefix(e.icd_code.as_deref(), &self.exclusion_patterns.icd_prefixes)
    }
}

fn icd_has_prefix(code: Option<&str>, prefixes: &[String]) -> bool {
    let Some(code) = code else { return false };
    let code = code.trim().to_ascii_uppercase();
    prefixes
        .iter()
        .any(|p| !p.is_empty() && code.starts_with(&p.trim().to_ascii_uppercase()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub index_period_start: NaiveDate,
    pub index_period_end: NaiveDate,
    pub lookback_days: i64,
    pub observation_days: i64,
}

impl Default for StudyWindow {
    fn default() -> Self {
        StudyWindow {
            index_period_start: NaiveDate::from_ymd_opt(2012, 8, 1).unwrap(),
            index_period_end: NaiveDate::from_ymd_opt(2016, 3, 31).unwrap(),
            lookback_days: 360,
            observation_days: 365,
        }
    }
}

impl StudyWindow {
    pub fn validate(&self) -> Result<()> {
        if self.index_period_start >= self.index_period_end {
            return Err(Error::Config("study window: start must precede end".into()));
        }
        if self.lookback_days <= 0 || self.observation_days <= 0 {
            return Err(Error::Config(
                "study window: lookback_days and observation_days must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn in_index_period(&self, d: NaiveDate) -> bool {
        self.index_period_start <= d && d <= self.index_period_end
    }

    /// `0 <= index - d <= observation_days`, inclusive at both ends.
    pub fn in_observation(&self, index: NaiveDate, d: NaiveDate) -> bool {
        let gap = (index - d).num_days();
        (0..=self.observation_days).contains(&gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeGroup {
    AscvdBefore,
    AscvdAfter,
    AscvdNever,
}

impl OutcomeGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeGroup::AscvdBefore => "ascvd_before",
            OutcomeGroup::AscvdAfter => "ascvd_after",
            OutcomeGroup::AscvdNever => "ascvd_never",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortInstance {
    pub patient_id: String,
    pub index_date: NaiveDate,
    pub label: u8,
    pub event_or_censor_days: i64,
    pub censored: bool,
    pub group: OutcomeGroup,
}

pub const CRITERION_NO_INDEX: &str = "no index event in index period";
pub const CRITERION_NO_PRIOR_VISIT: &str = "no visit within lookback before index period";
pub const CRITERION_NO_T2DM_OUTPATIENT: &str = "no T2DM outpatient visit from index event";
pub const CRITERION_EXCLUDED_DIABETES: &str = "gestational or type 1 diabetes";
pub const CRITERION_UNDER_18: &str = "under 18";
pub const CRITERION_UNKNOWN_GENDER: &str = "unknown gender";

const CRITERIA: [&str; 6] = [
    CRITERION_NO_INDEX,
    CRITERION_NO_PRIOR_VISIT,
    CRITERION_NO_T2DM_OUTPATIENT,
    CRITERION_EXCLUDED_DIABETES,
    CRITERION_UNDER_18,
    CRITERION_UNKNOWN_GENDER,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStep {
    pub criterion: String,
    pub excluded_count: usize,
    pub remaining_count: usize,
}

/// Waterfall of exclusions, one row per criterion in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub steps: Vec<FunnelStep>,
}

impl FunnelReport {
    pub fn excluded_for(&self, criterion: &str) -> usize {
        self.steps
            .iter()
            .find(|s| s.criterion == criterion)
            .map_or(0, |s| s.excluded_count)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["criterion", "excluded_count", "remaining_count"])?;
        for s in &self.steps {
            w.write_record([
                s.criterion.clone(),
                s.excluded_count.to_string(),
                s.remaining_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionOutcome {
    /// Included patients of all three groups, sorted by patient id.
    pub instances: Vec<CohortInstance>,
    pub funnel: FunnelReport,
}

/// Earliest T2DM diagnosis or T2DM-class prescription inside the index period.
pub fn find_index_event(
    repo: &EhrRepository,
    patient_id: &str,
    dict: &DiagnosisDictionary,
    window: &StudyWindow,
) -> Option<NaiveDate> {
    let by_diagnosis = repo
        .encounters_of(patient_id)
        .filter(|e| window.in_index_period(e.commit_time) && dict.is_t2dm(e))
        .map(|e| e.commit_time)
        .min();
    let by_drug = repo
        .medications_of(patient_id)
        .filter(|m| window.in_index_period(m.commit_time) && dict.is_t2dm_drug(&m.drug_name))
        .map(|m| m.commit_time)
        .min();
    match (by_diagnosis, by_drug) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Age in years by the day-difference / 365 convention.
pub fn age_at(birthday: NaiveDate, on: NaiveDate) -> f64 {
    (on - birthday).num_days() as f64 / 365.0
}

fn evaluate_patient(
    repo: &EhrRepository,
    patient_id: &str,
    dict: &DiagnosisDictionary,
    window: &StudyWindow,
) -> std::result::Result<CohortInstance, &'static str> {
    let patient = repo.patient(patient_id).ok_or(CRITERION_NO_INDEX)?;
    let index_date = find_index_event(repo, patient_id, dict, window).ok_or(CRITERION_NO_INDEX)?;

    let lookback_start = window.index_period_start - chrono::Duration::days(window.lookback_days);
    let prior_visit = repo
        .encounters_of(patient_id)
        .any(|e| lookback_start <= e.commit_time && e.commit_time < window.index_period_start);
    if !prior_visit {
        return Err(CRITERION_NO_PRIOR_VISIT);
    }

    let t2dm_outpatient = repo.encounters_of(patient_id).any(|e| {
        e.commit_time >= index_date && e.encounter_type == EncounterType::Outpatient && dict.is_t2dm(e)
    });
    if !t2dm_outpatient {
        return Err(CRITERION_NO_T2DM_OUTPATIENT);
    }

    if repo.encounters_of(patient_id).any(|e| dict.is_excluded_diabetes(e)) {
        return Err(CRITERION_EXCLUDED_DIABETES);
    }
    if age_at(patient.birthday, index_date) < 18.0 {
        return Err(CRITERION_UNDER_18);
    }
    if patient.gender == Gender::Unknown {
        return Err(CRITERION_UNKNOWN_GENDER);
    }

    let first_ascvd = repo
        .encounters_of(patient_id)
        .find(|e| dict.is_ascvd(e))
        .map(|e| e.commit_time);
    let instance = match first_ascvd {
        Some(d) if d < index_date => CohortInstance {
            patient_id: patient_id.to_string(),
            index_date,
            label: 0,
            event_or_censor_days: 0,
            censored: true,
            group: OutcomeGroup::AscvdBefore,
        },
        Some(d) => CohortInstance {
            patient_id: patient_id.to_string(),
            index_date,
            label: 1,
            event_or_censor_days: (d - index_date).num_days(),
            censored: false,
            group: OutcomeGroup::AscvdAfter,
        },
        None => {
            let last = repo
                .encounters_of(patient_id)
                .map(|e| e.commit_time)
                .max()
                .unwrap_or(index_date);
            CohortInstance {
                patient_id: patient_id.to_string(),
                index_date,
                label: 0,
                event_or_censor_days: (last - index_date).num_days().max(0),
                censored: true,
                group: OutcomeGroup::AscvdNever,
            }
        }
    };
    Ok(instance)
}

/// Apply the inclusion/exclusion criteria to every patient and group the
/// survivors by when ASCVD was first recorded.
pub fn apply_inclusion(
    repo: &EhrRepository,
    dict: &DiagnosisDictionary,
    window: &StudyWindow,
) -> InclusionOutcome {
    let ids = repo.sorted_patient_ids();
    let outcomes: Vec<_> = ids
        .par_iter()
        .map(|id| evaluate_patient(repo, id, dict, window))
        .collect();

    let mut excluded: BTreeMap<&str, usize> = BTreeMap::new();
    let mut instances = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(inst) => instances.push(inst),
            Err(reason) => *excluded.entry(reason).or_default() += 1,
        }
    }

    let mut remaining = ids.len();
    let mut steps = vec![FunnelStep {
        criterion: "patients in repository".into(),
        excluded_count: 0,
        remaining_count: remaining,
    }];
    for criterion in CRITERIA {
        let n = excluded.get(criterion).copied().unwrap_or(0);
        remaining -= n;
        steps.push(FunnelStep {
            criterion: criterion.into(),
            excluded_count: n,
            remaining_count: remaining,
        });
    }
    InclusionOutcome {
        instances,
        funnel: FunnelReport { steps },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub instances: Vec<CohortInstance>,
    pub warnings: Vec<String>,
}

impl Cohort {
    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.label == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.instances.len() - self.positives()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_instances(&self.instances, path)
    }
}

/// Drop patients whose ASCVD preceded the index event; the rest carry labels.
pub fn finalize_cohort(instances: Vec<CohortInstance>) -> Cohort {
    let mut instances: Vec<CohortInstance> = instances
        .into_iter()
        .filter(|i| i.group != OutcomeGroup::AscvdBefore)
        .collect();
    instances.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let mut cohort = Cohort {
        instances,
        warnings: Vec::new(),
    };
    if cohort.positives() == 0 {
        cohort.warnings.push("cohort has no positive instances; AUC is undefined".into());
    }
    if cohort.negatives() == 0 {
        cohort.warnings.push("cohort has no negative instances; AUC is undefined".into());
    }
    for w in &cohort.warnings {
        log::warn!("{w}");
    }
    cohort
}

pub const COHORT_HEADER: &[&str] = &[
    "patient_id",
    "index_date",
    "group",
    "label",
    "event_or_censor_days",
    "censored",
];

pub fn write_instances(instances: &[CohortInstance], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COHORT_HEADER)?;
    for i in instances {
        w.write_record([
            i.patient_id.clone(),
            i.index_date.format(DATE_FORMAT).to_string(),
            i.group.as_str().to_string(),
            i.label.to_string(),
            i.event_or_censor_days.to_string(),
            u8::from(i.censored).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances(path: &Path) -> Result<Vec<CohortInstance>> {
    if !path.is_file() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != COHORT_HEADER {
        return Err(Error::Header {
            table: "cohort".into(),
            expected: COHORT_HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |f: &str| Error::Data(format!("cohort: bad {f} `{}`", rec.as_slice()));
        let group = match &rec[2] {
            "ascvd_before" => OutcomeGroup::AscvdBefore,
            "ascvd_after" => OutcomeGroup::AscvdAfter,
            "ascvd_never" => OutcomeGroup::AscvdNever,
            _ => return Err(bad("group")),
        };
        out.push(CohortInstance {
            patient_id: rec[0].to_string(),
            index_date: NaiveDate::parse_from_str(&rec[1], DATE_FORMAT).map_err(|_| bad("index_date"))?,
            group,
            label: rec[3].parse().map_err(|_| bad("label"))?,
            event_or_censor_days: rec[4].parse().map_err(|_| bad("event_or_censor_days"))?,
            censored: &rec[5] == "1",
        });
    }
    Ok(out)
}
