use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cox::{fit_cox, CoxFitResult};
use super::km::{KmPoint, SurvivalData};
use super::pearson::pearson_univariate;
use crate::error::Result;
use crate::matrix::FeatureMatrix;
use crate::model::ModelKind;

pub const EXPERIMENTS: [&str; 4] = ["EX-1", "EX-2", "EX-3", "EX-4"];

pub const TABLE2_HEADER: [&str; 9] = [
    "model",
    "EX-1_train",
    "EX-1_test",
    "EX-2_train",
    "EX-2_test",
    "EX-3_train",
    "EX-3_test",
    "EX-4_train",
    "EX-4_test",
];

pub const TABLE3_HEADER: [&str; 9] = [
    "variable",
    "sig",
    "sig_display",
    "pearson",
    "cox_sig",
    "cox_sig_display",
    "exp_beta",
    "ci_lower",
    "ci_upper",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub experiment: String,
    pub model: ModelKind,
    pub train_auc: Option<f64>,
    pub test_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub variable: String,
    /// Pearson test p-value.
    pub sig: Option<f64>,
    pub pearson: Option<f64>,
    /// Wald p-value of the Cox coefficient.
    pub cox_sig: Option<f64>,
    pub exp_beta: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalPanel {
    pub experiment: String,
    pub rows: Vec<Table3Row>,
    pub cox: Option<CoxFitResult>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aucs: Vec<AucRow>,
    pub pce_train_auc: Option<f64>,
    pub pce_test_auc: Option<f64>,
    pub clinical: Vec<ClinicalPanel>,
    pub km: Vec<KmPoint>,
    pub notes: Vec<String>,
}

/// Six significant digits, trailing zeros trimmed to no fewer than three
/// decimals; exponent form below 1e-4.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x != 0.0 && x.abs() < 1e-4 {
        let s = format!("{x:.5e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{exp}");
    }
    let magnitude = if x == 0.0 { 0 } else { x.abs().log10().floor() as i32 };
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if decimals > 3 {
        let keep = s.len() - (decimals - 3);
        while s.len() > keep && s.ends_with('0') {
            s.pop();
        }
    }
    if s == "-0.000" {
        s = "0.000".into();
    }
    s
}

fn cell(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_default()
}

fn display3(v: Option<f64>) -> String {
    v.map(|p| format!("{p:.3}")).unwrap_or_default()
}

/// Table 2 as text cells, header first. Models appear in grid order and
/// only when they have at least one result.
pub fn table2_rows(report: &EvalReport) -> Vec<Vec<String>> {
    let mut out = vec![TABLE2_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for kind in ModelKind::GRID {
        let mut row = vec![kind.label().to_string()];
        let mut any = false;
        for ex in EXPERIMENTS {
            match report.aucs.iter().find(|r| r.model == kind && r.experiment == ex) {
                Some(r) => {
                    any = true;
                    row.push(cell(r.train_auc));
                    row.push(cell(r.test_auc));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        if any {
            out.push(row);
        }
    }
    out
}

/// Table 3 as text cells, header first.
pub fn table3_rows(panel: Option<&ClinicalPanel>) -> Vec<Vec<String>> {
    let mut out = vec![TABLE3_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in panel.map(|p| p.rows.as_slice()).unwrap_or_default() {
        out.push(vec![
            r.variable.clone(),
            cell(r.sig),
            display3(r.sig),
            cell(r.pearson),
            cell(r.cox_sig),
            display3(r.cox_sig),
            cell(r.exp_beta),
            cell(r.ci_lower),
            cell(r.ci_upper),
        ]);
    }
    out
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn km_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format_sig(t)
    }
}

/// Univariate screening plus a multivariable Cox fit of the raw covariates.
/// Constant columns are dropped; a failed Cox fit leaves its columns empty
/// and records a warning.
pub fn clinical_panel(
    experiment: &str,
    features: &FeatureMatrix,
    labels: &[u8],
    times: &[f64],
    events: &[bool],
) -> Result<ClinicalPanel> {
    let mut warnings = Vec::new();
    let keep: Vec<String> = (0..features.m())
        .filter(|&j| {
            let c = features.column(j);
            let constant = c.iter().all(|&v| v == c[0]);
            if constant {
                warnings.push(format!("{experiment}: dropped constant covariate `{}`", features.feature_names()[j]));
            }
            !constant
        })
        .map(|j| features.feature_names()[j].clone())
        .collect();
    let x = features.select_columns(&keep)?;
    let pearson = pearson_univariate(&x, labels)?;
    let cox = match SurvivalData::new(times.to_vec(), events.to_vec(), Some(x.clone())).and_then(|d| fit_cox(&d)) {
        Ok(fit) => {
            if fit.monotone_likelihood {
                warnings.push(format!("{experiment}: cox likelihood looks monotone (|beta| > 20)"));
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("{experiment}: cox regression failed: {e}"));
            None
        }
    };
    let rows = pearson
        .into_iter()
        .enumerate()
        .map(|(j, pr)| {
            let c = cox.as_ref().map(|f| &f.coefficients[j]);
            Table3Row {
                variable: pr.feature,
                sig: pr.p_value,
                pearson: pr.r,
                cox_sig: c.map(|c| c.p_value),
                exp_beta: c.map(|c| c.exp_beta),
                ci_lower: c.map(|c| c.ci_lower),
                ci_upper: c.map(|c| c.ci_upper),
            }
        })
        .collect();
    Ok(ClinicalPanel {
        experiment: experiment.to_string(),
        rows,
        cox,
        warnings,
    })
}

fn summary(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "AUC (train / test)");
    for ex in EXPERIMENTS {
        let rows: Vec<&AucRow> = report.aucs.iter().filter(|r| r.experiment == ex).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(s, "  {ex}");
        for r in rows {
            let _ = writeln!(s, "    {:<7} {:>9} {:>9}", r.model.label(), cell(r.train_auc), cell(r.test_auc));
        }
    }
    if report.pce_train_auc.is_some() || report.pce_test_auc.is_some() {
        let _ = writeln!(
            s,
            "PCE baseline: train {} test {}",
            cell(report.pce_train_auc),
            cell(report.pce_test_auc)
        );
    }
    if let Some(last) = report.km.last() {
        let events: usize = report.km.iter().map(|p| p.events).sum();
        let n = report.km[0].at_risk;
        let _ = writeln!(
            s,
            "Survival: {n} instances, {events} events, {} censored, S({}) = {}",
            n - events,
            km_time(last.time),
            format_sig(last.survival)
        );
    }
    for p in &report.clinical {
        for w in &p.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
    }
    for n in &report.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

/// Write table2.csv, table3.csv (plus one table3_<EX>.csv per panel),
/// km_curve.csv, summary.txt and the full-precision report.json.
pub fn render_reports(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let p = dir.join("table2.csv");
    write_rows(&p, &table2_rows(report))?;
    written.push(p);

    let main_panel = report
        .clinical
        .iter()
        .find(|c| c.experiment == "EX-4")
        .or(report.clinical.last());
    let p = dir.join("table3.csv");
    write_rows(&p, &table3_rows(main_panel))?;
    written.push(p);
    for panel in &report.clinical {
        let p = dir.join(format!("table3_{}.csv", panel.experiment));
        write_rows(&p, &table3_rows(Some(panel)))?;
        written.push(p);
    }

    let mut km = vec![vec!["time".to_string(), "survival".into(), "at_risk".into()]];
    km.extend(
        report
            .km
            .iter()
            .map(|k| vec![km_time(k.time), format_sig(k.survival), k.at_risk.to_string()]),
    );
    let p = dir.join("km_curve.csv");
    write_rows(&p, &km)?;
    written.push(p);

    let p = dir.join("summary.txt");
    std::fs::write(&p, summary(report))?;
    written.push(p);

    let p = dir.join("report.json");
    std::fs::write(&p, serde_json::to_string_pretty(report)?)?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_sig(0.719), "0.719");
        assert_eq!(format_sig(0.69), "0.690");
        assert_eq!(format_sig(1.035), "1.035");
        assert_eq!(format_sig(0.71912345), "0.719123");
        assert_eq!(format_sig(0.0), "0.000");
        assert_eq!(format_sig(1234.5678), "1234.57");
        assert_eq!(format_sig(2.5e-7), "2.5e-7");
        assert_eq!(format_sig(-0.0000001), "-1e-7");
        assert_eq!(format_sig(12.0), "12.000");
    }

    #[test]
    fn empty_grid_is_header_only() {
        let rows = table2_rows(&EvalReport::default());
        assert_eq!(rows.len(), 1);
        assert_eq!(table3_rows(None).len(), 1);
    }
}
