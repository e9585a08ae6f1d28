use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Follow-up time, event flag and optional covariates per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    pub times: Vec<f64>,
    /// `true` when the event was observed, `false` when censored.
    pub events: Vec<bool>,
    pub covariates: Option<FeatureMatrix>,
}

impl SurvivalData {
    pub fn new(times: Vec<f64>, events: Vec<bool>, covariates: Option<FeatureMatrix>) -> Result<SurvivalData> {
        if times.len() != events.len() {
            return Err(Error::Data("survival data: times and events differ in length".into()));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::Data(format!("survival time {t} must be finite and non-negative")));
        }
        if let Some(c) = &covariates {
            if c.n() != times.len() {
                return Err(Error::Data("survival data: covariate rows differ from times".into()));
            }
        }
        Ok(SurvivalData {
            times,
            events,
            covariates,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: f64,
    pub survival: f64,
    /// Subjects still under observation just before `time`.
    pub at_risk: usize,
    pub events: usize,
    pub censored: usize,
}

/// Product-limit estimate. The curve starts at `(0, 1, n)` and has one
/// point per distinct observed time; subjects censored at an event time are
/// counted in that time's risk set.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Vec<KmPoint> {
    assert_eq!(times.len(), events.len(), "kaplan_meier: length mismatch");
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = vec![KmPoint {
        time: 0.0,
        survival: 1.0,
        at_risk: times.len(),
        events: 0,
        censored: 0,
    }];
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut d = 0;
        let mut c = 0;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            s *= (at_risk - d) as f64 / at_risk as f64;
        }
        out.push(KmPoint {
            time: t,
            survival: s,
            at_risk,
            events: d,
            censored: c,
        });
        at_risk -= d + c;
    }
    out
}
