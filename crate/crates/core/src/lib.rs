pub mod data;
pub mod error;
pub mod genlearn;
pub mod nn;
pub mod regress;
pub mod seed;
pub mod simgen;
pub mod structural;
pub mod testkit;

pub use data::{Dataset, HalfData};
pub use error::{Error, Result};
pub use genlearn::{ConditionalGenerator, GanConfig, PseudoSampleBlock};
pub use regress::{ConditionalMeanModel, RegressConfig};
pub use simgen::{GroundTruthDag, SemKind};
pub use structural::{DagEstimate, StructuralConfig};
pub use testkit::{
    ConditionalMean, ConditionalSampler, Engine, LearnedPipeline, Learners, Method, PathReport, SweepReport,
    TestConfig, TestReport,
};
