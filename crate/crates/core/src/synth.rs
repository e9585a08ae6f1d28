//! Seeded generator of synthetic EHR repositories with a planted outcome
//! model, for tests and benchmarks where no real extract is available.
//!
//! Event probability is `sigmoid(a + ks * z_pce + ds * sum(effect_c * x_c) + noise)`
//! where `z_pce` is the standardised logit of the patient's guideline risk,
//! `x_c` marks planted ICD-10 categories and `a` is calibrated by bisection
//! to hit the requested event rate.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::StudyWindow;
use crate::ehr::*;
use crate::error::{Error, Result};
use crate::features::{KnownFactorProfile, Race};
use crate::model::sigmoid;
use crate::pce::{pce_risk, PceCoefficientTable};

/// Planted disease-history categories and their log-odds effects.
pub const PLANTED_CODES: [(&str, f64); 7] = [
    ("I10", 0.9),
    ("E78", 0.7),
    ("H81", 0.6),
    ("G47", 0.5),
    ("J06", -0.4),
    ("R09", 0.6),
    ("J45", -0.3),
];

const BACKGROUND_CODES: [&str; 40] = [
    "A09", "B34", "D64", "E03", "E55", "E66", "F32", "F41", "G43", "G56", "H10", "H25", "H52", "H90", "I83",
    "J02", "J20", "J30", "J32", "K21", "K29", "K59", "K76", "K80", "L20", "L30", "M17", "M25", "M54", "M81",
    "N18", "N39", "N40", "R05", "R10", "R51", "S93", "T78", "Z00", "Z76",
];

const ANTIHYPERTENSIVES: [&str; 5] = ["amlodipine", "losartan", "lisinopril", "hydrochlorothiazide", "metoprolol"];
const EVENTS: [(&str, &str); 3] = [
    ("I21.9", "acute myocardial infarction"),
    ("I63.9", "cerebral infarction"),
    ("I20.0", "unstable angina"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Missingness {
    pub tc: f64,
    pub hdl_c: f64,
    pub sbp: f64,
    pub smoker: f64,
}

impl Default for Missingness {
    fn default() -> Self {
        Missingness {
            tc: 0.1,
            hdl_c: 0.1,
            sbp: 0.05,
            smoker: 0.05,
        }
    }
}

impl Missingness {
    pub fn none() -> Missingness {
        Missingness {
            tc: 0.0,
            hdl_c: 0.0,
            sbp: 0.0,
            smoker: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_patients: usize,
    pub event_rate: f64,
    pub knowledge_signal_strength: f64,
    pub data_signal_strength: f64,
    /// Standard deviation of extra log-odds noise.
    pub noise: f64,
    pub missingness: Missingness,
    /// Fractions of patients built to fail a cohort criterion.
    pub ascvd_before_rate: f64,
    pub excluded_diabetes_rate: f64,
    pub under_18_rate: f64,
    pub unknown_gender_rate: f64,
    /// Fraction of background encounters with a null or malformed code.
    pub dirty_code_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_patients: 1000,
            event_rate: 0.37,
            knowledge_signal_strength: 1.0,
            data_signal_strength: 1.0,
            noise: 0.0,
            missingness: Missingness::default(),
            ascvd_before_rate: 0.03,
            excluded_diabetes_rate: 0.02,
            under_18_rate: 0.01,
            unknown_gender_rate: 0.01,
            dirty_code_rate: 0.03,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Only patients that pass every criterion, with every factor recorded.
    pub fn clean(n_patients: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_patients,
            seed,
            missingness: Missingness::none(),
            ascvd_before_rate: 0.0,
            excluded_diabetes_rate: 0.0,
            under_18_rate: 0.0,
            unknown_gender_rate: 0.0,
            ..SynthSpec::default()
        }
    }

    /// Hard errors for invalid specs, warnings for merely doubtful ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        let rates = [
            ("event_rate", self.event_rate),
            ("missingness.tc", self.missingness.tc),
            ("missingness.hdl_c", self.missingness.hdl_c),
            ("missingness.sbp", self.missingness.sbp),
            ("missingness.smoker", self.missingness.smoker),
            ("ascvd_before_rate", self.ascvd_before_rate),
            ("excluded_diabetes_rate", self.excluded_diabetes_rate),
            ("under_18_rate", self.under_18_rate),
            ("unknown_gender_rate", self.unknown_gender_rate),
            ("dirty_code_rate", self.dirty_code_rate),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0,1]")));
            }
        }
        if self.n_patients < 10 {
            return Err(Error::Config(format!("n_patients = {} is below 10", self.n_patients)));
        }
        if !(self.knowledge_signal_strength >= 0.0 && self.data_signal_strength >= 0.0 && self.noise >= 0.0) {
            return Err(Error::Config("signal strengths and noise must be non-negative".into()));
        }
        let mut warnings = Vec::new();
        let expected_events = self.event_rate * self.n_patients as f64;
        if expected_events < 5.0 || (1.0 - self.event_rate) * (self.n_patients as f64) < 5.0 {
            warnings.push(format!(
                "event_rate {} with {} patients leaves fewer than 5 expected instances in one class",
                self.event_rate, self.n_patients
            ));
        }
        Ok(warnings)
    }
}

/// Per-patient ground truth written next to the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub patient_id: String,
    pub pce_score: f64,
    pub knowledge_logit: f64,
    pub data_effect: f64,
    pub true_probability: f64,
    pub event: bool,
    /// Which cohort criterion the patient was built to fail, if any.
    pub built_to_fail: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticRepository {
    pub repository: EhrRepository,
    pub truth: Vec<TruthRow>,
    pub warnings: Vec<String>,
}

struct Draft {
    id: String,
    gender: Gender,
    birthday: NaiveDate,
    index: NaiveDate,
    prior_visit: NaiveDate,
    profile: KnownFactorProfile,
    codes: Vec<&'static str>,
    fail: &'static str,
    pce: f64,
    logit_k: f64,
    data_effect: f64,
    noise: f64,
}

fn date_between<R: Rng>(rng: &mut R, from: NaiveDate, to: NaiveDate) -> NaiveDate {
    let span = (to - from).num_days();
    from + Duration::days(rng.random_range(0..=span.max(0)))
}

fn clamped_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let v: f64 = Normal::new(mean, sd).expect("valid normal").sample(rng);
    (v.clamp(lo, hi) * 10.0).round() / 10.0
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Intercept making the mean event probability equal `rate`.
fn calibrate_intercept(linear: &[f64], rate: f64) -> f64 {
    if rate <= 0.0 {
        return -50.0;
    }
    if rate >= 1.0 {
        return 50.0;
    }
    let mean = |a: f64| linear.iter().map(|l| sigmoid(a + l)).sum::<f64>() / linear.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn draft_patients(spec: &SynthSpec, window: &StudyWindow, rng: &mut ChaCha8Rng) -> Result<Vec<Draft>> {
    let table = PceCoefficientTable::builtin();
    let width = (spec.n_patients.max(1) as f64).log10().floor() as usize + 1;
    let mut drafts = Vec::with_capacity(spec.n_patients);
    for i in 0..spec.n_patients {
        let u: f64 = rng.random();
        let cut = [
            spec.ascvd_before_rate,
            spec.excluded_diabetes_rate,
            spec.under_18_rate,
            spec.unknown_gender_rate,
        ];
        let mut acc = 0.0;
        let mut fail = "";
        for (c, name) in cut.iter().zip(["ascvd_before", "excluded_diabetes", "under_18", "unknown_gender"]) {
            acc += c;
            if fail.is_empty() && u < acc {
                fail = name;
            }
        }
        let male = rng.random::<bool>();
        let gender = match (fail, male) {
            ("unknown_gender", _) => Gender::Unknown,
            (_, true) => Gender::Male,
            (_, false) => Gender::Female,
        };
        let index = date_between(rng, window.index_period_start, window.index_period_end);
        let prior_visit = date_between(
            rng,
            window.index_period_start - Duration::days(window.lookback_days),
            window.index_period_start - Duration::days(1),
        );
        let age = if fail == "under_18" {
            rng.random_range(12.0..17.5)
        } else {
            clamped_normal(rng, 58.0, 10.0, 30.0, 85.0)
        };
        let birthday = index - Duration::days((age * 365.0).round() as i64);
        let profile = KnownFactorProfile {
            patient_id: format!("P{:0width$}", i + 1),
            male,
            age: age.max(1.0),
            tc: Some(clamped_normal(rng, 190.0, 35.0, 100.0, 350.0)),
            hdl_c: Some(clamped_normal(rng, 48.0, 12.0, 20.0, 110.0)),
            sbp: Some(clamped_normal(rng, 135.0, 18.0, 90.0, 220.0)),
            hbp_treated: rng.random_bool(0.4),
            smoker: Some(rng.random_bool(0.25)),
            race: Race::WhiteOrOther,
            diabetes: true,
        };
        let pce = pce_risk(&profile, &table)?;
        let codes: Vec<&'static str> = PLANTED_CODES
            .iter()
            .filter(|_| rng.random_bool(0.25))
            .map(|(c, _)| *c)
            .collect();
        let data_effect = PLANTED_CODES
            .iter()
            .filter(|(c, _)| codes.contains(c))
            .map(|(_, e)| e)
            .sum::<f64>();
        let noise = if spec.noise > 0.0 {
            Normal::new(0.0, spec.noise).expect("valid normal").sample(rng)
        } else {
            0.0
        };
        drafts.push(Draft {
            id: profile.patient_id.clone(),
            gender,
            birthday,
            index,
            prior_visit,
            profile,
            codes,
            fail,
            pce,
            logit_k: logit(pce),
            data_effect,
            noise,
        });
    }
    Ok(drafts)
}

/// Build a synthetic repository in memory.
pub fn synthesize(spec: &SynthSpec) -> Result<SyntheticRepository> {
    let mut warnings = spec.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let window = StudyWindow::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let drafts = draft_patients(spec, &window, &mut rng)?;

    let n = drafts.len() as f64;
    let mean_k = drafts.iter().map(|d| d.logit_k).sum::<f64>() / n;
    let sd_k = (drafts.iter().map(|d| (d.logit_k - mean_k).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(1e-12);
    let mean_d = drafts.iter().map(|d| d.data_effect).sum::<f64>() / n;
    let linear: Vec<f64> = drafts
        .iter()
        .map(|d| {
            spec.knowledge_signal_strength * (d.logit_k - mean_k) / sd_k
                + spec.data_signal_strength * (d.data_effect - mean_d)
                + d.noise
        })
        .collect();
    let intercept = calibrate_intercept(&linear, spec.event_rate);

    let organizations: BTreeMap<String, String> = (1..=5)
        .map(|k| (format!("ORG{k:02}"), format!("Community health center {k}")))
        .collect();
    let orgs: Vec<&String> = organizations.keys().collect();

    let mut patients = Vec::new();
    let mut encounters = Vec::new();
    let mut labtests = Vec::new();
    let mut followups = Vec::new();
    let mut medications = Vec::new();
    let mut truth = Vec::new();

    for (d, lin) in drafts.iter().zip(&linear) {
        let p_true = sigmoid(intercept + lin);
        let event = rng.random::<f64>() < p_true;
        patients.push(PatientRow {
            patient_id: d.id.clone(),
            gender: d.gender,
            birthday: d.birthday,
        });
        let org = (*orgs.choose(&mut rng).expect("organizations")).clone();
        let mut k = 0;
        let mut enc = |date: NaiveDate, kind: EncounterType, code: Option<String>, dx: Option<&str>, cost: f64| {
            k += 1;
            let id = format!("{}-E{k:03}", d.id);
            encounters.push(EncounterRow {
                encounter_id: id.clone(),
                patient_id: d.id.clone(),
                organization_id: org.clone(),
                commit_time: date,
                encounter_type: kind,
                icd_code: code,
                diagnosis: dx.map(str::to_string),
                cost: Some(cost),
            });
            id
        };
        let window_start = d.index - Duration::days(window.observation_days - 1);
        let day_before = d.index - Duration::days(1);

        let bg = *BACKGROUND_CODES.choose(&mut rng).expect("codes");
        enc(d.prior_visit, EncounterType::Outpatient, Some(format!("{bg}.9")), Some("outpatient consultation"), 80.0);

        for _ in 0..rng.random_range(1..=4) {
            let date = date_between(&mut rng, window_start, day_before);
            let u: f64 = rng.random();
            let code = if u < spec.dirty_code_rate / 2.0 {
                None
            } else if u < spec.dirty_code_rate {
                Some(["XX1", "E1", "11.2", "I10..1"].choose(&mut rng).expect("codes").to_string())
            } else {
                let c = BACKGROUND_CODES.choose(&mut rng).expect("codes");
                Some(if rng.random_bool(0.5) { c.to_string() } else { format!("{c}.{}", rng.random_range(0..10)) })
            };
            enc(date, EncounterType::Outpatient, code, Some("outpatient consultation"), 60.0);
        }
        for c in &d.codes {
            let date = date_between(&mut rng, window_start, day_before);
            enc(date, EncounterType::Outpatient, Some(format!("{c}.0")), Some("chronic condition review"), 70.0);
        }

        // risk factor readings
        let p = &d.profile;
        let has_tc = !rng.random_bool(spec.missingness.tc);
        let has_hdl = !rng.random_bool(spec.missingness.hdl_c);
        if has_tc || has_hdl {
            let date = date_between(&mut rng, window_start, d.index);
            let id = enc(date, EncounterType::Outpatient, Some("Z13.6".into()), Some("lipid panel"), 40.0);
            let mmol = rng.random_bool(0.1);
            let lab = |name_mg: &str, name_mmol: &str, v: f64| LabTestRow {
                encounter_id: id.clone(),
                test_item_name: if mmol { name_mmol } else { name_mg }.to_string(),
                test_value: if mmol { v / 38.67 } else { v },
                commit_time: date,
            };
            if has_tc {
                labtests.push(lab("tc", "tc_mmol", p.tc.unwrap_or_default()));
            }
            if has_hdl {
                labtests.push(lab("hdl-c", "hdl_mmol", p.hdl_c.unwrap_or_default()));
            }
        }
        let date = date_between(&mut rng, window_start, d.index);
        let id = enc(date, EncounterType::Followup, None, Some("chronic disease follow-up"), 30.0);
        let sbp = (!rng.random_bool(spec.missingness.sbp)).then(|| p.sbp.unwrap_or_default());
        let smoke = (!rng.random_bool(spec.missingness.smoker)).then(|| p.smoker.unwrap_or_default());
        followups.push(FollowUpRow {
            encounter_id: id.clone(),
            systolic_bp: sbp,
            daily_smoking: smoke,
            commit_time: date,
        });
        if p.hbp_treated {
            medications.push(MedicationRow {
                encounter_id: id,
                drug_name: ANTIHYPERTENSIVES.choose(&mut rng).expect("drugs").to_string(),
                commit_time: date,
            });
        }

        match d.fail {
            "ascvd_before" => {
                let date = date_between(&mut rng, window_start, day_before);
                enc(date, EncounterType::Inpatient, Some("I25.1".into()), Some("coronary artery disease"), 900.0);
            }
            "excluded_diabetes" => {
                let date = date_between(&mut rng, window_start, day_before);
                enc(date, EncounterType::Outpatient, Some("E10.9".into()), Some("type 1 diabetes mellitus"), 50.0);
            }
            _ => {}
        }

        // index event and diabetes care
        let id = enc(d.index, EncounterType::Outpatient, Some("E11.9".into()), Some("type 2 diabetes mellitus"), 120.0);
        medications.push(MedicationRow {
            encounter_id: id,
            drug_name: "metformin".into(),
            commit_time: d.index,
        });
        let followup_days: i64 = rng.random_range(30..=1200);
        let t2dm_visit = d.index + Duration::days(rng.random_range(14..=followup_days.min(180)));
        enc(t2dm_visit, EncounterType::Outpatient, Some("E11.9".into()), Some("type 2 diabetes mellitus"), 90.0);
        let end = d.index + Duration::days(followup_days.max((t2dm_visit - d.index).num_days()));
        if event {
            let (code, dx) = EVENTS.choose(&mut rng).expect("events");
            enc(end, EncounterType::Inpatient, Some(code.to_string()), Some(dx), 5000.0);
        } else {
            enc(end, EncounterType::Outpatient, Some("Z00.0".into()), Some("general examination"), 50.0);
        }

        truth.push(TruthRow {
            patient_id: d.id.clone(),
            pce_score: d.pce,
            knowledge_logit: d.logit_k,
            data_effect: d.data_effect,
            true_probability: p_true,
            event,
            built_to_fail: d.fail.to_string(),
        });
    }

    let events = truth.iter().filter(|t| t.event).count();
    if events == 0 || events == truth.len() {
        warnings.push(format!("generated {events} events among {} patients", truth.len()));
    }
    let repository = EhrRepository::from_rows(patients, encounters, labtests, followups, medications, organizations);
    Ok(SyntheticRepository {
        repository,
        truth,
        warnings,
    })
}

/// Generate and write the six tables plus `truth.csv` into `dir`.
pub fn generate_synthetic(spec: &SynthSpec, dir: &Path) -> Result<SyntheticRepository> {
    let synth = synthesize(spec)?;
    std::fs::create_dir_all(dir)?;
    synth.repository.export(&TablePaths::in_dir(dir))?;
    let mut w = csv::Writer::from_path(dir.join("truth.csv"))?;
    for t in &synth.truth {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(synth)
}
