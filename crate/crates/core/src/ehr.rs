//! Relational EHR extract: six CSV tables joined by patient and encounter ids.
//!
//! Loading is lenient about row content and strict about structure. A missing
//! file or a header that does not match the declared schema aborts the load;
//! a row with an unparseable required field is skipped and tallied in the
//! [`LoadReport`]. Foreign keys that do not resolve are kept and counted.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icd::IcdCatalog;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub const PATIENT_HEADER: &[&str] = &["patient_id", "gender", "birthday"];
pub const ENCOUNTER_HEADER: &[&str] = &[
    "encounter_id",
    "patient_id",
    "organization_id",
    "commit_time",
    "encounter_type",
    "icd_code",
    "diagnosis",
    "cost",
];
pub const LABTEST_HEADER: &[&str] = &["encounter_id", "test_item_name", "test_value", "commit_time"];
pub const FOLLOWUP_HEADER: &[&str] = &["encounter_id", "systolic_bp", "daily_smoking", "commit_time"];
pub const MEDICATION_HEADER: &[&str] = &["encounter_id", "drug_name", "commit_time"];
pub const ORGANIZATION_HEADER: &[&str] = &["organization_id", "name"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// Unrecognised strings map to `Unknown`; they feed cohort exclusion rather
    /// than failing the load.
    pub fn parse(raw: &str) -> Gender {
        match raw.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "1" => Gender::Male,
            "female" | "f" | "2" => Gender::Female,
            _ => Gender::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncounterType {
    Outpatient,
    Inpatient,
    Followup,
    Other,
}

impl EncounterType {
    pub fn parse(raw: &str) -> EncounterType {
        let norm: String = raw
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match norm.as_str() {
            "outpatient" => EncounterType::Outpatient,
            "inpatient" => EncounterType::Inpatient,
            "followup" => EncounterType::Followup,
            _ => EncounterType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncounterType::Outpatient => "outpatient",
            EncounterType::Inpatient => "inpatient",
            EncounterType::Followup => "followup",
            EncounterType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub patient_id: String,
    pub gender: Gender,
    pub birthday: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterRow {
    pub encounter_id: String,
    pub patient_id: String,
    pub organization_id: String,
    pub commit_time: NaiveDate,
    pub encounter_type: EncounterType,
    /// Raw code as recorded; may be malformed.
    pub icd_code: Option<String>,
    pub diagnosis: Option<String>,
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabTestRow {
    pub encounter_id: String,
    pub test_item_name: String,
    pub test_value: f64,
    pub commit_time: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUpRow {
    pub encounter_id: String,
    pub systolic_bp: Option<f64>,
    pub daily_smoking: Option<bool>,
    pub commit_time: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicationRow {
    pub encounter_id: String,
    pub drug_name: String,
    pub commit_time: NaiveDate,
}

/// File locations of the six tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePaths {
    pub patient: PathBuf,
    pub encounter: PathBuf,
    pub labtest: PathBuf,
    pub followup: PathBuf,
    pub medication: PathBuf,
    pub organization: PathBuf,
}

impl TablePaths {
    /// Conventional file names (`patient.csv`, `encounter.csv`, ...) inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> TablePaths {
        let dir = dir.as_ref();
        TablePaths {
            patient: dir.join("patient.csv"),
            encounter: dir.join("encounter.csv"),
            labtest: dir.join("labtest.csv"),
            followup: dir.join("followup.csv"),
            medication: dir.join("medication.csv"),
            organization: dir.join("organization.csv"),
        }
    }

    /// Build from a table-name → path map; every one of the six names is required.
    pub fn from_map(map: &BTreeMap<String, PathBuf>) -> Result<TablePaths> {
        let get = |name: &str| {
            map.get(name)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no path given for table `{name}`")))
        };
        Ok(TablePaths {
            patient: get("patient")?,
            encounter: get("encounter")?,
            labtest: get("labtest")?,
            followup: get("followup")?,
            medication: get("medication")?,
            organization: get("organization")?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Path)> {
        [
            ("patient", self.patient.as_path()),
            ("encounter", self.encounter.as_path()),
            ("labtest", self.labtest.as_path()),
            ("followup", self.followup.as_path()),
            ("medication", self.medication.as_path()),
            ("organization", self.organization.as_path()),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableLoadStats {
    pub rows_read: usize,
    pub rows_loaded: usize,
    pub rows_skipped: usize,
    /// First few skip reasons, `line N: reason`.
    pub skip_samples: Vec<String>,
}

const MAX_SKIP_SAMPLES: usize = 20;

impl TableLoadStats {
    fn skip(&mut self, line: u64, reason: String) {
        self.rows_skipped += 1;
        if self.skip_samples.len() < MAX_SKIP_SAMPLES {
            self.skip_samples.push(format!("line {line}: {reason}"));
        }
    }
}

/// Foreign keys that point nowhere.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingAudit {
    pub encounter_patient: usize,
    pub encounter_organization: usize,
    pub labtest_encounter: usize,
    pub followup_encounter: usize,
    pub medication_encounter: usize,
}

impl DanglingAudit {
    pub fn total(&self) -> usize {
        self.encounter_patient
            + self.encounter_organization
            + self.labtest_encounter
            + self.followup_encounter
            + self.medication_encounter
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub tables: BTreeMap<String, TableLoadStats>,
    pub dangling: DanglingAudit,
}

impl LoadReport {
    pub fn total_skipped(&self) -> usize {
        self.tables.values().map(|t| t.rows_skipped).sum()
    }
}

/// Null and validity rates of the `icd_code` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcdAudit {
    pub encounters: usize,
    pub null_codes: usize,
    pub valid_codes: usize,
    /// `None` when the encounter table is empty.
    pub null_rate: Option<f64>,
    /// Share of non-null codes found in the catalog; `None` when no code is non-null.
    pub valid_rate: Option<f64>,
}

/// Immutable, indexed in-memory copy of the six tables.
#[derive(Debug, Clone, Default)]
pub struct EhrRepository {
    patients: Vec<PatientRow>,
    encounters: Vec<EncounterRow>,
    labtests: Vec<LabTestRow>,
    followups: Vec<FollowUpRow>,
    medications: Vec<MedicationRow>,
    organizations: BTreeMap<String, String>,

    patient_index: HashMap<String, usize>,
    encounter_index: HashMap<String, usize>,
    // Per patient: encounter positions sorted by (commit_time, encounter_id).
    patient_encounters: HashMap<String, Vec<usize>>,
    patient_labtests: HashMap<String, Vec<usize>>,
    patient_followups: HashMap<String, Vec<usize>>,
    patient_medications: HashMap<String, Vec<usize>>,
    dangling: DanglingAudit,
}

impl EhrRepository {
    /// Assemble a repository from already-parsed rows and build every index.
    ///
    /// Duplicate primary keys keep the first occurrence for indexing; the
    /// loader drops duplicates before they reach this point.
    pub fn from_rows(
        patients: Vec<PatientRow>,
        encounters: Vec<EncounterRow>,
        labtests: Vec<LabTestRow>,
        followups: Vec<FollowUpRow>,
        medications: Vec<MedicationRow>,
        organizations: BTreeMap<String, String>,
    ) -> EhrRepository {
        let mut repo = EhrRepository {
            patients,
            encounters,
            labtests,
            followups,
            medications,
            organizations,
            ..Default::default()
        };
        repo.build_indexes();
        repo
    }

    fn build_indexes(&mut self) {
        let mut dangling = DanglingAudit::default();

        for (i, p) in self.patients.iter().enumerate() {
            self.patient_index.entry(p.patient_id.clone()).or_insert(i);
        }
        for (i, e) in self.encounters.iter().enumerate() {
            self.encounter_index.entry(e.encounter_id.clone()).or_insert(i);
            if !self.patient_index.contains_key(&e.patient_id) {
                dangling.encounter_patient += 1;
            }
            if !e.organization_id.is_empty() && !self.organizations.contains_key(&e.organization_id) {
                dangling.encounter_organization += 1;
            }
            self.patient_encounters
                .entry(e.patient_id.clone())
                .or_default()
                .push(i);
        }
        let encounters = &self.encounters;
        for list in self.patient_encounters.values_mut() {
            list.sort_by(|&a, &b| {
                let (ea, eb) = (&encounters[a], &encounters[b]);
                (ea.commit_time, &ea.encounter_id, a).cmp(&(eb.commit_time, &eb.encounter_id, b))
            });
        }

        let owner = |encounter_id: &str| -> Option<String> {
            self.encounter_index
                .get(encounter_id)
                .map(|&i| self.encounters[i].patient_id.clone())
        };

        let mut labs: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, row) in self.labtests.iter().enumerate() {
            match owner(&row.encounter_id) {
                Some(pid) => labs.entry(pid).or_default().push(i),
                None => dangling.labtest_encounter += 1,
            }
        }
        let mut fups: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, row) in self.followups.iter().enumerate() {
            match owner(&row.encounter_id) {
                Some(pid) => fups.entry(pid).or_default().push(i),
                None => dangling.followup_encounter += 1,
            }
        }
        let mut meds: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, row) in self.medications.iter().enumerate() {
            match owner(&row.encounter_id) {
                Some(pid) => meds.entry(pid).or_default().push(i),
                None => dangling.medication_encounter += 1,
            }
        }
        self.patient_labtests = labs;
        self.patient_followups = fups;
        self.patient_medications = meds;
        self.dangling = dangling;
    }

    pub fn patients(&self) -> &[PatientRow] {
        &self.patients
    }
    pub fn encounters(&self) -> &[EncounterRow] {
        &self.encounters
    }
    pub fn labtests(&self) -> &[LabTestRow] {
        &self.labtests
    }
    pub fn followups(&self) -> &[FollowUpRow] {
        &self.followups
    }
    pub fn medications(&self) -> &[MedicationRow] {
        &self.medications
    }
    pub fn organizations(&self) -> &BTreeMap<String, String> {
        &self.organizations
    }
    pub fn dangling(&self) -> &DanglingAudit {
        &self.dangling
    }

    pub fn patient(&self, patient_id: &str) -> Option<&PatientRow> {
        self.patient_index.get(patient_id).map(|&i| &self.patients[i])
    }

    pub fn encounter(&self, encounter_id: &str) -> Option<&EncounterRow> {
        self.encounter_index
            .get(encounter_id)
            .map(|&i| &self.encounters[i])
    }

    /// Patient ids in ascending order.
    pub fn sorted_patient_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.patients.iter().map(|p| p.patient_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// A patient's encounters, ordered by commit time then encounter id.
    pub fn encounters_of<'a>(&'a self, patient_id: &str) -> impl Iterator<Item = &'a EncounterRow> + 'a {
        self.patient_encounters
            .get(patient_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.encounters[i])
    }

    /// Lab rows reachable from the patient's encounters, in file order.
    pub fn labtests_of<'a>(&'a self, patient_id: &str) -> impl Iterator<Item = &'a LabTestRow> + 'a {
        self.patient_labtests
            .get(patient_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.labtests[i])
    }

    pub fn followups_of<'a>(&'a self, patient_id: &str) -> impl Iterator<Item = &'a FollowUpRow> + 'a {
        self.patient_followups
            .get(patient_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.followups[i])
    }

    pub fn medications_of<'a>(&'a self, patient_id: &str) -> impl Iterator<Item = &'a MedicationRow> + 'a {
        self.patient_medications
            .get(patient_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.medications[i])
    }

    /// Null rate and catalog-validity rate of encounter ICD codes.
    pub fn audit_icd_validity(&self, catalog: &IcdCatalog) -> IcdAudit {
        let encounters = self.encounters.len();
        let mut null_codes = 0;
        let mut valid_codes = 0;
        for e in &self.encounters {
            match e.icd_code.as_deref() {
                None => null_codes += 1,
                Some(code) if catalog.contains(code) => valid_codes += 1,
                Some(_) => {}
            }
        }
        let non_null = encounters - null_codes;
        IcdAudit {
            encounters,
            null_codes,
            valid_codes,
            null_rate: (encounters > 0).then(|| null_codes as f64 / encounters as f64),
            valid_rate: (non_null > 0).then(|| valid_codes as f64 / non_null as f64),
        }
    }

    /// Write the six tables in canonical form.
    pub fn export(&self, paths: &TablePaths) -> Result<()> {
        let mut w = csv::Writer::from_path(&paths.patient)?;
        w.write_record(PATIENT_HEADER)?;
        for p in &self.patients {
            w.write_record([
                p.patient_id.as_str(),
                p.gender.as_str(),
                &p.birthday.format(DATE_FORMAT).to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.encounter)?;
        w.write_record(ENCOUNTER_HEADER)?;
        for e in &self.encounters {
            w.write_record([
                e.encounter_id.as_str(),
                &e.patient_id,
                &e.organization_id,
                &e.commit_time.format(DATE_FORMAT).to_string(),
                e.encounter_type.as_str(),
                e.icd_code.as_deref().unwrap_or(""),
                e.diagnosis.as_deref().unwrap_or(""),
                &e.cost.map(|c| c.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.labtest)?;
        w.write_record(LABTEST_HEADER)?;
        for l in &self.labtests {
            w.write_record([
                l.encounter_id.as_str(),
                &l.test_item_name,
                &l.test_value.to_string(),
                &l.commit_time.format(DATE_FORMAT).to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.followup)?;
        w.write_record(FOLLOWUP_HEADER)?;
        for f in &self.followups {
            w.write_record([
                f.encounter_id.as_str(),
                &f.systolic_bp.map(|v| v.to_string()).unwrap_or_default(),
                match f.daily_smoking {
                    Some(true) => "1",
                    Some(false) => "0",
                    None => "",
                },
                &f.commit_time.format(DATE_FORMAT).to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.medication)?;
        w.write_record(MEDICATION_HEADER)?;
        for m in &self.medications {
            w.write_record([
                m.encounter_id.as_str(),
                &m.drug_name,
                &m.commit_time.format(DATE_FORMAT).to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.organization)?;
        w.write_record(ORGANIZATION_HEADER)?;
        for (id, name) in &self.organizations {
            w.write_record([id.as_str(), name])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load, validate and index the six tables.
pub fn load_repository(paths: &TablePaths) -> Result<(EhrRepository, LoadReport)> {
    for (_, path) in paths.iter() {
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
    }
    let mut report = LoadReport::default();

    let mut seen = std::collections::HashSet::new();
    let patients = read_table(&paths.patient, "patient", PATIENT_HEADER, &mut report, |f| {
        let patient_id = required(f[0], "patient_id")?;
        if !seen.insert(patient_id.clone()) {
            return Err(format!("duplicate patient_id `{patient_id}`"));
        }
        Ok(PatientRow {
            patient_id,
            gender: Gender::parse(f[1]),
            birthday: parse_date(f[2], "birthday")?,
        })
    })?;

    let mut seen = std::collections::HashSet::new();
    let encounters = read_table(&paths.encounter, "encounter", ENCOUNTER_HEADER, &mut report, |f| {
        let encounter_id = required(f[0], "encounter_id")?;
        if !seen.insert(encounter_id.clone()) {
            return Err(format!("duplicate encounter_id `{encounter_id}`"));
        }
        let cost = optional_number(f[7], "cost")?;
        if cost.is_some_and(|c| c < 0.0) {
            return Err("negative cost".into());
        }
        Ok(EncounterRow {
            encounter_id,
            patient_id: required(f[1], "patient_id")?,
            organization_id: f[2].trim().to_string(),
            commit_time: parse_date(f[3], "commit_time")?,
            encounter_type: EncounterType::parse(f[4]),
            icd_code: optional_text(f[5]),
            diagnosis: optional_text(f[6]),
            cost,
        })
    })?;

    let labtests = read_table(&paths.labtest, "labtest", LABTEST_HEADER, &mut report, |f| {
        let test_value = optional_number(f[2], "test_value")?.ok_or("missing test_value")?;
        Ok(LabTestRow {
            encounter_id: required(f[0], "encounter_id")?,
            test_item_name: required(f[1], "test_item_name")?,
            test_value,
            commit_time: parse_date(f[3], "commit_time")?,
        })
    })?;

    let followups = read_table(&paths.followup, "followup", FOLLOWUP_HEADER, &mut report, |f| {
        let systolic_bp = optional_number(f[1], "systolic_bp")?;
        if let Some(sbp) = systolic_bp {
            if !(sbp > 0.0 && sbp < 400.0) {
                return Err(format!("systolic_bp {sbp} outside (0, 400)"));
            }
        }
        Ok(FollowUpRow {
            encounter_id: required(f[0], "encounter_id")?,
            systolic_bp,
            daily_smoking: parse_flag(f[2])?,
            commit_time: parse_date(f[3], "commit_time")?,
        })
    })?;

    let medications = read_table(&paths.medication, "medication", MEDICATION_HEADER, &mut report, |f| {
        Ok(MedicationRow {
            encounter_id: required(f[0], "encounter_id")?,
            drug_name: required(f[1], "drug_name")?,
            commit_time: parse_date(f[2], "commit_time")?,
        })
    })?;

    let mut seen = std::collections::HashSet::new();
    let organizations = read_table(
        &paths.organization,
        "organization",
        ORGANIZATION_HEADER,
        &mut report,
        |f| {
            let id = required(f[0], "organization_id")?;
            if !seen.insert(id.clone()) {
                return Err(format!("duplicate organization_id `{id}`"));
            }
            Ok((id, f[1].trim().to_string()))
        },
    )?
    .into_iter()
    .collect();

    let repo = EhrRepository::from_rows(patients, encounters, labtests, followups, medications, organizations);
    report.dangling = repo.dangling.clone();
    for (table, stats) in &report.tables {
        if stats.rows_skipped > 0 {
            log::warn!("{table}: {} row(s) skipped", stats.rows_skipped);
        }
    }
    Ok((repo, report))
}

fn read_table<T>(
    path: &Path,
    table: &str,
    header: &[&str],
    report: &mut LoadReport,
    mut parse: impl FnMut(&[&str]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|_| Error::MissingFile {
        path: path.to_path_buf(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let found: Vec<String> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h };
            h.trim().to_string()
        })
        .collect();
    if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| a != b) {
        return Err(Error::Header {
            table: table.to_string(),
            expected: header.join(","),
            found: found.join(","),
        });
    }

    let stats = report.tables.entry(table.to_string()).or_default();
    let mut rows = Vec::new();
    for record in reader.records() {
        stats.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                stats.skip(line, e.to_string());
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            stats.skip(line, format!("expected {} fields, found {}", header.len(), record.len()));
            continue;
        }
        let fields: Vec<&str> = record.iter().collect();
        match parse(&fields) {
            Ok(row) => {
                stats.rows_loaded += 1;
                rows.push(row);
            }
            Err(reason) => stats.skip(line, reason),
        }
    }
    Ok(rows)
}

fn required(raw: &str, field: &str) -> std::result::Result<String, String> {
    let v = raw.trim();
    if v.is_empty() {
        Err(format!("missing {field}"))
    } else {
        Ok(v.to_string())
    }
}

fn optional_text(raw: &str) -> Option<String> {
    let v = raw.trim();
    (!v.is_empty()).then(|| v.to_string())
}

fn optional_number(raw: &str, field: &str) -> std::result::Result<Option<f64>, String> {
    let v = raw.trim();
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(format!("unparseable {field} `{v}`")),
    }
}

fn parse_date(raw: &str, field: &str) -> std::result::Result<NaiveDate, String> {
    let v = raw.trim();
    if v.is_empty() {
        return Err(format!("missing {field}"));
    }
    // Time-of-day, when present, is ignored.
    let day = v.get(..10).unwrap_or(v);
    NaiveDate::parse_from_str(day, DATE_FORMAT).map_err(|_| format!("unparseable {field} `{v}`"))
}

fn parse_flag(raw: &str) -> std::result::Result<Option<bool>, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "1" | "true" | "yes" | "y" => Ok(Some(true)),
        "0" | "false" | "no" | "n" => Ok(Some(false)),
        other => Err(format!("unparseable daily_smoking `{other}`")),
    }
}
