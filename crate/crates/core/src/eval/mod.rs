//! Splitting, discrimination, survival analysis and report rendering.

mod auc;
mod cox;
mod km;
mod pearson;
mod report;
mod split;

pub use auc::{auc, roc_curve, RocPoint};
pub use cox::{cox_partial_loglik, fit_cox, CoxCoefficient, CoxFitResult};
pub use km::{kaplan_meier, KmPoint, SurvivalData};
pub use pearson::{pearson, pearson_p_value, pearson_univariate, PearsonResult};
pub use report::{
    clinical_panel, format_sig, render_reports, table2_rows, table3_rows, AucRow, ClinicalPanel, EvalReport,
    Table3Row, EXPERIMENTS, TABLE2_HEADER, TABLE3_HEADER,
};
pub use split::{split_train_test, Split, SplitSpec};
