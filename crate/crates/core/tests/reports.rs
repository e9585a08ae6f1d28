mod common;

use riskforge::eval::{
    render_reports, table2_rows, table3_rows, AucRow, ClinicalPanel, EvalReport, Table3Row, TABLE2_HEADER,
    TABLE3_HEADER,
};
use riskforge::model::ModelKind;

fn lr_report() -> EvalReport {
    let cells: Vec<f64> = common::TABLE2_LR_ROW.split('\t').skip(1).map(|v| v.parse().unwrap()).collect();
    EvalReport {
        aucs: ["EX-1", "EX-2", "EX-3", "EX-4"]
            .iter()
            .enumerate()
            .map(|(i, ex)| AucRow {
                experiment: ex.to_string(),
                model: ModelKind::Lr,
                train_auc: Some(cells[2 * i]),
                test_auc: Some(cells[2 * i + 1]),
            })
            .collect(),
        ..EvalReport::default()
    }
}

fn panel() -> ClinicalPanel {
    let rows = common::TABLE3_ROWS
        .iter()
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| Some(common::printed(s).parse::<f64>().unwrap());
            Table3Row {
                variable: f[0].to_string(),
                // a printed .000 stands for p < 0.0005
                sig: if f[1] == ".000" { Some(3e-9) } else { num(f[1]) },
                pearson: num(f[2]),
                cox_sig: if f[3] == ".000" { Some(2e-12) } else { num(f[3]) },
                exp_beta: num(f[4]),
                ci_lower: num(f[5]),
                ci_upper: num(f[6]),
            }
        })
        .collect();
    ClinicalPanel {
        experiment: "EX-2".into(),
        rows,
        cox: None,
        warnings: vec![],
    }
}

#[test]
fn table2_layout_and_lr_row() {
    let rows = table2_rows(&lr_report());
    assert_eq!(rows[0], TABLE2_HEADER.to_vec());
    assert_eq!(rows.len(), 2);
    let want: Vec<String> = common::TABLE2_LR_ROW.split('\t').map(String::from).collect();
    assert_eq!(rows[1], want);
}

#[test]
fn table3_layout_and_printed_rows() {
    let rows = table3_rows(Some(&panel()));
    assert_eq!(rows[0], TABLE3_HEADER.to_vec());
    for (line, row) in common::TABLE3_ROWS.iter().zip(&rows[1..]) {
        let f: Vec<String> = line.split('\t').map(common::printed).collect();
        // variable, sig (display), pearson, cox sig (display), exp(b), lower, upper
        let shown = [&row[0], &row[2], &row[3], &row[5], &row[6], &row[7], &row[8]];
        assert_eq!(shown.map(String::as_str).to_vec(), f.iter().map(String::as_str).collect::<Vec<_>>());
    }
    // the raw p-value columns keep full precision
    assert_eq!(rows[1][1], "3e-9");
}

#[test]
fn rendered_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = lr_report();
    report.clinical.push(panel());
    let written = render_reports(&report, dir.path()).unwrap();
    assert!(written.iter().all(|p| p.exists()));
    let t2 = std::fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    assert_eq!(
        t2,
        format!("{}\n{}\n", TABLE2_HEADER.join(","), common::TABLE2_LR_ROW.replace('\t', ","))
    );
    let t3 = std::fs::read_to_string(dir.path().join("table3.csv")).unwrap();
    assert!(t3.starts_with(&TABLE3_HEADER.join(",")));
    assert!(t3.contains("\nage,3e-9,0.000,0.313,2e-12,0.000,1.035,1.030,1.039\n"));
    assert!(t3.contains("\nsmoker,0.211,0.211,-0.019,0.881,0.881,0.976,0.708,1.345\n"));
}
