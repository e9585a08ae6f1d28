use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cohort::CohortInstance;
use crate::ehr::EhrRepository;
use crate::error::Result;
use crate::icd::ChapterMap;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcdFeatureMode {
    /// One indicator per ICD-10 chapter, `c1..c22`.
    Chapter22,
    /// One indicator per 3-character category seen in-window across the instances.
    ThreeDigit,
}

fn in_window_categories(
    repo: &EhrRepository,
    instance: &CohortInstance,
    observation_days: i64,
    chapters: &ChapterMap,
) -> BTreeSet<String> {
    repo.encounters_of(&instance.patient_id)
        .filter(|e| (0..=observation_days).contains(&(instance.index_date - e.commit_time).num_days()))
        .filter_map(|e| e.icd_code.as_deref().and_then(|c| chapters.valid_category(c)))
        .collect()
}

/// Binary disease-history indicators from encounters in the observation
/// window before each index date. Malformed or null codes count nowhere.
pub fn build_icd_features(
    repo: &EhrRepository,
    instances: &[CohortInstance],
    mode: IcdFeatureMode,
    observation_days: i64,
    chapters: &ChapterMap,
) -> Result<FeatureMatrix> {
    let per_instance: Vec<BTreeSet<String>> = instances
        .iter()
        .map(|inst| in_window_categories(repo, inst, observation_days, chapters))
        .collect();
    let ids: Vec<String> = instances.iter().map(|i| i.patient_id.clone()).collect();

    match mode {
        IcdFeatureMode::Chapter22 => {
            let k = chapters.max_chapter() as usize;
            let names: Vec<String> = (1..=k).map(|c| format!("c{c}")).collect();
            let mut values = vec![0.0; ids.len() * k];
            for (i, cats) in per_instance.iter().enumerate() {
                for cat in cats {
                    if let Some(ch) = chapters.chapter_of(cat) {
                        values[i * k + ch as usize - 1] = 1.0;
                    }
                }
            }
            FeatureMatrix::new(ids, names, values)
        }
        IcdFeatureMode::ThreeDigit => {
            let columns: BTreeMap<&str, usize> = per_instance
                .iter()
                .flatten()
                .map(String::as_str)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(j, c)| (c, j))
                .collect();
            let k = columns.len();
            let mut values = vec![0.0; ids.len() * k];
            for (i, cats) in per_instance.iter().enumerate() {
                for cat in cats {
                    values[i * k + columns[cat.as_str()]] = 1.0;
                }
            }
            let names = columns.keys().map(|s| s.to_string()).collect();
            FeatureMatrix::new(ids, names, values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::OutcomeGroup;
    use crate::ehr::*;
    use chrono::NaiveDate;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn inst(pid: &str) -> CohortInstance {
        CohortInstance {
            patient_id: pid.into(),
            index_date: d("2014-01-01"),
            label: 0,
            event_or_censor_days: 0,
            censored: true,
            group: OutcomeGroup::AscvdNever,
        }
    }

    fn enc(id: &str, pid: &str, date: &str, code: Option<&str>) -> EncounterRow {
        EncounterRow {
            encounter_id: id.into(),
            patient_id: pid.into(),
            organization_id: String::new(),
            commit_time: d(date),
            encounter_type: EncounterType::Outpatient,
            icd_code: code.map(str::to_string),
            diagnosis: None,
            cost: None,
        }
    }

    fn repo(encounters: Vec<EncounterRow>) -> EhrRepository {
        let mut pids: Vec<String> = encounters.iter().map(|e| e.patient_id.clone()).collect();
        pids.sort();
        pids.dedup();
        let patients = pids
            .into_iter()
            .map(|patient_id| PatientRow {
                patient_id,
                gender: Gender::Female,
                birthday: d("1950-01-01"),
            })
            .collect();
        EhrRepository::from_rows(patients, encounters, vec![], vec![], vec![], Default::default())
    }

    #[test]
    fn single_code_prefix() {
        let r = repo(vec![enc("e1", "p1", "2013-12-01", Some("E11.901"))]);
        let m = build_icd_features(&r, &[inst("p1")], IcdFeatureMode::ThreeDigit, 365, &ChapterMap::builtin())
            .unwrap();
        assert_eq!(m.feature_names(), &["E11".to_string()]);
        assert_eq!(m.row(0), &[1.0]);
        let c = build_icd_features(&r, &[inst("p1")], IcdFeatureMode::Chapter22, 365, &ChapterMap::builtin())
            .unwrap();
        assert_eq!(c.m(), 22);
        assert_eq!(c.get(0, c.column_index("c4").unwrap()), 1.0);
        assert_eq!(c.row(0).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn window_and_invalid_codes() {
        let r = repo(vec![
            // index date itself is inside the window
            enc("e1", "p1", "2014-01-01", Some("I10")),
            // 366 days before: outside
            enc("e2", "p1", "2012-12-31", Some("J45")),
            // after index: outside
            enc("e3", "p1", "2014-01-02", Some("K29")),
            enc("e4", "p1", "2013-06-01", Some("bad")),
            enc("e5", "p1", "2013-06-01", None),
            enc("e6", "p1", "2013-06-01", Some("D49.1")),
        ]);
        let m = build_icd_features(&r, &[inst("p1")], IcdFeatureMode::ThreeDigit, 365, &ChapterMap::builtin())
            .unwrap();
        assert_eq!(m.feature_names(), &["I10".to_string()]);
    }
}
