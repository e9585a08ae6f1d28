use serde::{Deserialize, Serialize};

use crate::cohort::{age_at, CohortInstance, DiagnosisDictionary, LabItem, StudyWindow};
use crate::ehr::{EhrRepository, Gender};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Column names of the known-factor block, in matrix order.
pub const KNOWN_FACTOR_NAMES: [&str; 7] = ["gender", "age", "tc", "hdl_c", "sbp", "treated", "smoker"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    #[default]
    WhiteOrOther,
    AfricanAmerican,
}

/// Guideline risk factors of one cohort instance. Lab values are mg/dL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownFactorProfile {
    pub patient_id: String,
    pub male: bool,
    pub age: f64,
    pub tc: Option<f64>,
    pub hdl_c: Option<f64>,
    pub sbp: Option<f64>,
    pub hbp_treated: bool,
    pub smoker: Option<bool>,
    pub race: Race,
    pub diabetes: bool,
}

impl KnownFactorProfile {
    pub fn is_complete(&self) -> bool {
        self.tc.is_some() && self.hdl_c.is_some() && self.sbp.is_some() && self.smoker.is_some()
    }

    pub fn missing_factors(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.tc.is_none() {
            out.push("tc");
        }
        if self.hdl_c.is_none() {
            out.push("hdl_c");
        }
        if self.sbp.is_none() {
            out.push("sbp");
        }
        if self.smoker.is_none() {
            out.push("smoker");
        }
        out
    }
}

fn most_recent_lab<'a>(
    repo: &'a EhrRepository,
    patient_id: &str,
    items: &[LabItem],
    in_window: impl Fn(chrono::NaiveDate) -> bool,
) -> Option<f64> {
    repo.labtests_of(patient_id)
        .filter(|l| in_window(l.commit_time))
        .filter_map(|l| {
            let name = l.test_item_name.trim();
            items
                .iter()
                .find(|it| it.name.trim().eq_ignore_ascii_case(name) || it.name.trim() == name)
                .map(|it| (l.commit_time, l.test_value * it.to_mg_dl))
        })
        // max_by_key keeps the last of equal keys: later file rows win ties.
        .max_by_key(|(d, _)| *d)
        .map(|(_, v)| v)
}

/// Read the seven risk factors from the year before the index date.
pub fn extract_known_factors(
    repo: &EhrRepository,
    instance: &CohortInstance,
    dict: &DiagnosisDictionary,
    observation_days: i64,
) -> Result<KnownFactorProfile> {
    let patient = repo
        .patient(&instance.patient_id)
        .ok_or_else(|| Error::Data(format!("patient `{}` not in repository", instance.patient_id)))?;
    let male = match patient.gender {
        Gender::Male => true,
        Gender::Female => false,
        Gender::Unknown => {
            return Err(Error::Data(format!("patient `{}` has unknown gender", instance.patient_id)))
        }
    };
    let window = StudyWindow {
        observation_days,
        ..StudyWindow::default()
    };
    let index = instance.index_date;
    let in_window = |d| window.in_observation(index, d);

    let pid = instance.patient_id.as_str();
    let tc = most_recent_lab(repo, pid, &dict.lab_items.tc, in_window);
    let hdl_c = most_recent_lab(repo, pid, &dict.lab_items.hdl_c, in_window);

    let sbp = repo
        .followups_of(pid)
        .filter(|f| in_window(f.commit_time))
        .filter_map(|f| f.systolic_bp.map(|v| (f.commit_time, v)))
        .max_by_key(|(d, _)| *d)
        .map(|(_, v)| v);
    let smoker = repo
        .followups_of(pid)
        .filter(|f| in_window(f.commit_time))
        .filter_map(|f| f.daily_smoking.map(|v| (f.commit_time, v)))
        .max_by_key(|(d, _)| *d)
        .map(|(_, v)| v);
    let hbp_treated = repo
        .medications_of(pid)
        .any(|m| in_window(m.commit_time) && dict.is_antihypertensive(&m.drug_name));

    Ok(KnownFactorProfile {
        patient_id: instance.patient_id.clone(),
        male,
        age: age_at(patient.birthday, index),
        tc,
        hdl_c,
        sbp,
        hbp_treated,
        smoker,
        race: Race::WhiteOrOther,
        diabetes: true,
    })
}

/// Per-factor availability before complete-case filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub total: usize,
    pub gender: usize,
    pub age: usize,
    pub tc: usize,
    pub hdl_c: usize,
    pub sbp: usize,
    pub treated: usize,
    pub smoker: usize,
    pub complete: usize,
}

/// Keep only profiles with every factor present. No imputation.
pub fn complete_case_filter(
    profiles: Vec<KnownFactorProfile>,
) -> Result<(Vec<KnownFactorProfile>, MissingnessReport)> {
    let report = MissingnessReport {
        total: profiles.len(),
        gender: profiles.len(),
        age: profiles.len(),
        tc: profiles.iter().filter(|p| p.tc.is_some()).count(),
        hdl_c: profiles.iter().filter(|p| p.hdl_c.is_some()).count(),
        sbp: profiles.iter().filter(|p| p.sbp.is_some()).count(),
        treated: profiles.len(),
        smoker: profiles.iter().filter(|p| p.smoker.is_some()).count(),
        complete: profiles.iter().filter(|p| p.is_complete()).count(),
    };
    let kept: Vec<_> = profiles.into_iter().filter(KnownFactorProfile::is_complete).collect();
    if kept.is_empty() {
        return Err(Error::Data(format!(
            "no complete cases among {} profiles (tc {}, hdl_c {}, sbp {}, smoker {})",
            report.total, report.tc, report.hdl_c, report.sbp, report.smoker
        )));
    }
    Ok((kept, report))
}

/// Raw (unscaled) known-factor block: gender (1 = male), age, tc, hdl_c, sbp,
/// treated, smoker. Profiles must be complete.
pub fn known_factor_matrix(profiles: &[KnownFactorProfile]) -> Result<FeatureMatrix> {
    let mut values = Vec::with_capacity(profiles.len() * KNOWN_FACTOR_NAMES.len());
    for p in profiles {
        let (Some(tc), Some(hdl), Some(sbp), Some(smoker)) = (p.tc, p.hdl_c, p.sbp, p.smoker) else {
            return Err(Error::Data(format!(
                "profile `{}` is incomplete: missing {}",
                p.patient_id,
                p.missing_factors().join(",")
            )));
        };
        values.extend([
            f64::from(u8::from(p.male)),
            p.age,
            tc,
            hdl,
            sbp,
            f64::from(u8::from(p.hbp_treated)),
            f64::from(u8::from(smoker)),
        ]);
    }
    FeatureMatrix::new(
        profiles.iter().map(|p| p.patient_id.clone()).collect(),
        KNOWN_FACTOR_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::OutcomeGroup;
    use crate::ehr::*;
    use chrono::NaiveDate;
    use std::collections::BTreeMap;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn instance(pid: &str, index: &str) -> CohortInstance {
        CohortInstance {
            patient_id: pid.into(),
            index_date: d(index),
            label: 0,
            event_or_censor_days: 0,
            censored: true,
            group: OutcomeGroup::AscvdNever,
        }
    }

    fn enc(id: &str, date: &str) -> EncounterRow {
        EncounterRow {
            encounter_id: id.into(),
            patient_id: "p1".into(),
            organization_id: String::new(),
            commit_time: d(date),
            encounter_type: EncounterType::Followup,
            icd_code: None,
            diagnosis: None,
            cost: None,
        }
    }

    fn fixture() -> EhrRepository {
        let patients = vec![PatientRow {
            patient_id: "p1".into(),
            gender: Gender::Male,
            birthday: d("2000-01-01"),
        }];
        let encounters = vec![enc("e1", "2000-03-06"), enc("e2", "2000-12-22"), enc("e3", "2002-01-01")];
        let followups = vec![
            FollowUpRow {
                encounter_id: "e1".into(),
                systolic_bp: Some(140.0),
                daily_smoking: Some(true),
                commit_time: d("2000-03-07"),
            },
            FollowUpRow {
                encounter_id: "e2".into(),
                systolic_bp: Some(150.0),
                daily_smoking: None,
                commit_time: d("2000-12-22"),
            },
            // after the index date: ignored
            FollowUpRow {
                encounter_id: "e3".into(),
                systolic_bp: Some(99.0),
                daily_smoking: Some(false),
                commit_time: d("2002-01-01"),
            },
        ];
        let meds = vec![MedicationRow {
            encounter_id: "e2".into(),
            drug_name: "Amlodipine".into(),
            commit_time: d("2000-12-22"),
        }];
        EhrRepository::from_rows(patients, encounters, vec![], followups, meds, BTreeMap::new())
    }

    #[test]
    fn age_counts_leap_day() {
        let repo = fixture();
        let dict = DiagnosisDictionary::builtin();
        let p = extract_known_factors(&repo, &instance("p1", "2001-01-01"), &dict, 365).unwrap();
        assert_eq!(p.age, 366.0 / 365.0);
        assert!((p.age - 1.00274).abs() < 1e-5);
    }

    #[test]
    fn most_recent_reading_wins_and_labs_missing() {
        let repo = fixture();
        let dict = DiagnosisDictionary::builtin();
        let p = extract_known_factors(&repo, &instance("p1", "2001-01-01"), &dict, 365).unwrap();
        // readings 300 and 10 days before the index date
        assert_eq!(p.sbp, Some(150.0));
        // the most recent non-null smoking flag is the older one
        assert_eq!(p.smoker, Some(true));
        assert_eq!(p.tc, None);
        assert_eq!(p.hdl_c, None);
        assert!(p.hbp_treated);
        assert!(p.male);
        assert!(!p.is_complete());
    }

    #[test]
    fn complete_case_counts() {
        let base = KnownFactorProfile {
            patient_id: "x".into(),
            male: true,
            age: 50.0,
            tc: Some(200.0),
            hdl_c: Some(50.0),
            sbp: Some(120.0),
            hbp_treated: false,
            smoker: Some(false),
            race: Race::WhiteOrOther,
            diabetes: true,
        };
        let all: Vec<_> = (0..10).map(|_| base.clone()).collect();
        let (kept, _) = complete_case_filter(all.clone()).unwrap();
        assert_eq!(kept, all);

        let mut some_missing = all.clone();
        for p in some_missing.iter_mut().take(3) {
            p.sbp = None;
        }
        let (kept, report) = complete_case_filter(some_missing).unwrap();
        assert_eq!(kept.len(), 7);
        assert_eq!(report.sbp, 7);
        assert_eq!(report.tc, 10);

        let none: Vec<_> = all
            .into_iter()
            .map(|mut p| {
                p.tc = None;
                p
            })
            .collect();
        assert!(complete_case_filter(none).is_err());
    }
}
