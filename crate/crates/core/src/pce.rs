//! Pooled cohort equations, evaluated from a coefficient file.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{KnownFactorProfile, Race};
use crate::matrix::FeatureMatrix;

const BUILTIN_TABLE: &str = include_str!("../data/pce_coefficients.json");

/// Name of the knowledge score column.
pub const PCE_COLUMN: &str = "pce";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    LnAge,
    LnAgeSq,
    LnTc,
    LnAgeXLnTc,
    LnHdl,
    LnAgeXLnHdl,
    LnTreatedSbp,
    LnAgeXLnTreatedSbp,
    LnUntreatedSbp,
    LnAgeXLnUntreatedSbp,
    Smoker,
    LnAgeXSmoker,
    Diabetes,
}

/// Inputs of the equations after validation.
#[derive(Debug, Clone, Copy)]
pub struct PceInputs {
    pub age: f64,
    pub tc: f64,
    pub hdl_c: f64,
    pub sbp: f64,
    pub treated: bool,
    pub smoker: bool,
    pub diabetes: bool,
}

impl Term {
    pub fn value(self, x: &PceInputs) -> f64 {
        let la = x.age.ln();
        let lsbp = x.sbp.ln();
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            Term::LnAge => la,
            Term::LnAgeSq => la * la,
            Term::LnTc => x.tc.ln(),
            Term::LnAgeXLnTc => la * x.tc.ln(),
            Term::LnHdl => x.hdl_c.ln(),
            Term::LnAgeXLnHdl => la * x.hdl_c.ln(),
            Term::LnTreatedSbp => flag(x.treated) * lsbp,
            Term::LnAgeXLnTreatedSbp => flag(x.treated) * la * lsbp,
            Term::LnUntreatedSbp => flag(!x.treated) * lsbp,
            Term::LnAgeXLnUntreatedSbp => flag(!x.treated) * la * lsbp,
            Term::Smoker => flag(x.smoker),
            Term::LnAgeXSmoker => flag(x.smoker) * la,
            Term::Diabetes => flag(x.diabetes),
        }
    }

    pub fn uses_sbp(self) -> bool {
        matches!(
            self,
            Term::LnTreatedSbp | Term::LnAgeXLnTreatedSbp | Term::LnUntreatedSbp | Term::LnAgeXLnUntreatedSbp
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceTerm {
    pub descriptor: Term,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceStratum {
    pub terms: Vec<PceTerm>,
    pub mean_lp: f64,
    pub s0: f64,
}

impl PceStratum {
    pub fn linear_predictor(&self, x: &PceInputs) -> f64 {
        self.terms.iter().map(|t| t.beta * t.descriptor.value(x)).sum()
    }

    pub fn risk(&self, x: &PceInputs) -> f64 {
        let lp = self.linear_predictor(x);
        1.0 - self.s0.powf((lp - self.mean_lp).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    MaleWhite,
    FemaleWhite,
    MaleBlack,
    FemaleBlack,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::MaleWhite,
        Stratum::FemaleWhite,
        Stratum::MaleBlack,
        Stratum::FemaleBlack,
    ];

    pub fn of(male: bool, race: Race) -> Stratum {
        match (male, race) {
            (true, Race::WhiteOrOther) => Stratum::MaleWhite,
            (false, Race::WhiteOrOther) => Stratum::FemaleWhite,
            (true, Race::AfricanAmerican) => Stratum::MaleBlack,
            (false, Race::AfricanAmerican) => Stratum::FemaleBlack,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Stratum::MaleWhite => "male_white",
            Stratum::FemaleWhite => "female_white",
            Stratum::MaleBlack => "male_black",
            Stratum::FemaleBlack => "female_black",
        }
    }
}

/// Coefficients for the four gender by race strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceCoefficientTable {
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub units: BTreeMap<String, String>,
    pub strata: BTreeMap<Stratum, PceStratum>,
}

impl PceCoefficientTable {
    pub fn builtin() -> PceCoefficientTable {
        PceCoefficientTable::from_json(BUILTIN_TABLE).expect("builtin coefficient table is valid")
    }

    /// Raw bytes of the shipped coefficient file.
    pub fn builtin_source() -> &'static str {
        BUILTIN_TABLE
    }

    pub fn load(path: &Path) -> Result<PceCoefficientTable> {
        if !path.exists() {
            return Err(Error::MissingFile { path: path.to_path_buf() });
        }
        PceCoefficientTable::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<PceCoefficientTable> {
        let table: PceCoefficientTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for s in Stratum::ALL {
            let st = self
                .strata
                .get(&s)
                .ok_or_else(|| Error::Config(format!("coefficient table lacks stratum `{}`", s.key())))?;
            if !(st.s0 > 0.0 && st.s0 < 1.0) {
                return Err(Error::Config(format!("{}: s0 = {} outside (0,1)", s.key(), st.s0)));
            }
            if !st.mean_lp.is_finite() || st.terms.iter().any(|t| !t.beta.is_finite()) {
                return Err(Error::Config(format!("{}: non-finite coefficient", s.key())));
            }
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = st.terms.iter().find(|t| !seen.insert(t.descriptor)) {
                return Err(Error::Config(format!("{}: duplicate term {:?}", s.key(), dup.descriptor)));
            }
        }
        for (k, v) in &self.units {
            if (k == "tc" || k == "hdl_c") && !v.eq_ignore_ascii_case("mg/dL") {
                return Err(Error::Config(format!("unsupported unit `{v}` for {k}; expected mg/dL")));
            }
        }
        Ok(())
    }

    pub fn stratum(&self, s: Stratum) -> &PceStratum {
        &self.strata[&s]
    }
}

fn inputs(profile: &KnownFactorProfile) -> Result<PceInputs> {
    let missing = profile.missing_factors();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "profile `{}` is incomplete: missing {}",
            profile.patient_id,
            missing.join(",")
        )));
    }
    let x = PceInputs {
        age: profile.age,
        tc: profile.tc.unwrap_or_default(),
        hdl_c: profile.hdl_c.unwrap_or_default(),
        sbp: profile.sbp.unwrap_or_default(),
        treated: profile.hbp_treated,
        smoker: profile.smoker.unwrap_or_default(),
        diabetes: profile.diabetes,
    };
    for (name, v) in [("age", x.age), ("tc", x.tc), ("hdl_c", x.hdl_c), ("sbp", x.sbp)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!(
                "profile `{}`: {name} = {v} must be positive and finite",
                profile.patient_id
            )));
        }
    }
    Ok(x)
}

/// Ten-year risk of one complete profile.
pub fn pce_risk(profile: &KnownFactorProfile, table: &PceCoefficientTable) -> Result<f64> {
    let x = inputs(profile)?;
    let risk = table.stratum(Stratum::of(profile.male, profile.race)).risk(&x);
    if !risk.is_finite() {
        return Err(Error::Numerical(format!("profile `{}`: non-finite risk", profile.patient_id)));
    }
    Ok(risk)
}

/// Knowledge scores z_i, one column per knowledge source, each in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeScoreVector(FeatureMatrix);

impl KnowledgeScoreVector {
    pub fn new(m: FeatureMatrix) -> Result<KnowledgeScoreVector> {
        if m.m() == 0 {
            return Err(Error::Data("knowledge score vector needs at least one column".into()));
        }
        if let Some(v) = m.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("knowledge score {v} outside [0,1]")));
        }
        Ok(KnowledgeScoreVector(m))
    }

    pub fn from_scores(instance_ids: Vec<String>, scores: Vec<f64>) -> Result<KnowledgeScoreVector> {
        KnowledgeScoreVector::new(FeatureMatrix::new(instance_ids, vec![PCE_COLUMN.to_string()], scores)?)
    }

    pub fn len(&self) -> usize {
        self.0.n()
    }

    pub fn is_empty(&self) -> bool {
        self.0.n() == 0
    }

    /// First knowledge column (the PCE score).
    pub fn primary(&self) -> Vec<f64> {
        self.0.column(0)
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.0
    }

    pub fn select_rows(&self, rows: &[usize]) -> KnowledgeScoreVector {
        KnowledgeScoreVector(self.0.select_rows(rows))
    }
}

/// Score every profile, keeping instance order.
pub fn score_cohort(profiles: &[KnownFactorProfile], table: &PceCoefficientTable) -> Result<KnowledgeScoreVector> {
    let scores = profiles
        .par_iter()
        .map(|p| {
            pce_risk(p, table).map_err(|e| match e {
                Error::Domain(m) | Error::Data(m) if !m.contains(&p.patient_id) => {
                    Error::Data(format!("instance `{}`: {m}", p.patient_id))
                }
                e => e,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    KnowledgeScoreVector::from_scores(profiles.iter().map(|p| p.patient_id.clone()).collect(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(male: bool, age: f64, tc: f64, hdl: f64, sbp: f64, treated: bool, smoker: bool) -> KnownFactorProfile {
        KnownFactorProfile {
            patient_id: "p".into(),
            male,
            age,
            tc: Some(tc),
            hdl_c: Some(hdl),
            sbp: Some(sbp),
            hbp_treated: treated,
            smoker: Some(smoker),
            race: Race::WhiteOrOther,
            diabetes: true,
        }
    }

    #[test]
    fn zero_betas_give_baseline() {
        let mut t = PceCoefficientTable::builtin();
        for st in t.strata.values_mut() {
            for term in &mut st.terms {
                term.beta = 0.0;
            }
            st.mean_lp = 0.0;
        }
        let r = pce_risk(&profile(true, 50.0, 200.0, 50.0, 120.0, false, false), &t).unwrap();
        assert!((r - (1.0 - 0.9144)).abs() < 1e-15);
    }

    #[test]
    fn non_positive_inputs_are_domain_errors() {
        let t = PceCoefficientTable::builtin();
        let e = pce_risk(&profile(true, 50.0, 0.0, 50.0, 120.0, false, false), &t).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
        let mut p = profile(true, 50.0, 200.0, 50.0, 120.0, false, false);
        p.sbp = None;
        assert!(matches!(pce_risk(&p, &t).unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn treated_flag_switches_sbp_term() {
        let t = PceCoefficientTable::builtin();
        let a = pce_risk(&profile(false, 60.0, 200.0, 50.0, 140.0, false, false), &t).unwrap();
        let b = pce_risk(&profile(false, 60.0, 200.0, 50.0, 140.0, true, false), &t).unwrap();
        assert!(b > a);
    }

    #[test]
    fn score_cohort_keeps_order() {
        let t = PceCoefficientTable::builtin();
        assert!(score_cohort(&[], &t).unwrap().is_empty());
        let p = profile(true, 55.0, 213.0, 50.0, 120.0, false, false);
        let s = score_cohort(&[p.clone(), p], &t).unwrap().primary();
        assert_eq!(s[0], s[1]);
    }

    #[test]
    fn rejects_bad_s0() {
        let mut t = PceCoefficientTable::builtin();
        t.strata.get_mut(&Stratum::MaleBlack).unwrap().s0 = 1.0;
        assert!(t.validate().is_err());
    }
}
