//! Knowledge-enhanced chronic disease risk modelling on relational EHR
//! extracts: cohort construction, feature engineering, guideline risk
//! scores, knowledge-injected learners and their evaluation.

pub mod cohort;
pub mod ehr;
pub mod error;
pub mod eval;
pub mod features;
pub mod icd;
pub mod matrix;
pub mod model;
pub mod pce;
pub mod pipeline;
pub mod synth;

pub use cohort::{Cohort, CohortInstance, DiagnosisDictionary, StudyWindow};
pub use ehr::{load_repository, EhrRepository, TablePaths};
pub use error::{Error, ErrorKind, Result};
pub use features::KnownFactorProfile;
pub use icd::{ChapterMap, IcdCatalog};
pub use matrix::FeatureMatrix;
pub use model::{predict, InjectionWeights, MlpConfig, ModelKind, TrainedModel};
pub use pce::{pce_risk, score_cohort, KnowledgeScoreVector, PceCoefficientTable};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use synth::{generate_synthetic, synthesize, SynthSpec};
