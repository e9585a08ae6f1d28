//! Feature construction: the seven guideline risk factors, ICD-10 disease
//! history indicators, chi-squared filtering and z-scoring.

mod history;
mod known;
mod scale;
mod select;

pub use history::{build_icd_features, IcdFeatureMode};
pub use known::{
    complete_case_filter, extract_known_factors, known_factor_matrix, KnownFactorProfile, MissingnessReport, Race,
    KNOWN_FACTOR_NAMES,
};
pub use scale::{standardize, ColumnStats, Standardizer};
pub use select::{chi2_scores, chi2_select, chi2_statistic, Chi2Score};
