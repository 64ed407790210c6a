//! Refinement of decompiled C into source that re-executes like the
//! original binary.
//!
//! A binary is decompiled by a [`backend`], then checked against three
//! ordered constraints by [`validate`]: it parses, it compiles and links,
//! and it reproduces the original's outputs on a test suite. Whatever
//! level fails first is handed to a repair [`agent`] together with the
//! diagnostics, and the [`orchestrator`] repeats this for a bounded number
//! of repairs. [`report`] turns per-binary records into rate tables.

pub mod agent;
pub mod backend;
pub mod cache;
pub mod config;
pub mod counters;
pub mod error;
pub mod model;
pub mod orchestrator;
pub mod report;
pub mod sandbox;
pub mod validate;

pub use agent::{AgentConfig, RepairAgent};
pub use backend::{decompile, detect_empty_body, normalize, BackendDescriptor, BackendKind, BackendRegistry};
pub use cache::{Cache, Stage};
pub use config::GlobalConfig;
pub use counters::{CounterSnapshot, Counters};
pub use error::{Error, Result};
pub use model::{
    binary_id, output_equal, BinaryId, BinaryTarget, ConstraintLevel, Diagnostics, FailedTest, OptLevel, Origin,
    ProcessExit, SourceUnit, TestCase, TestSuite, UnitKind,
};
pub use orchestrator::{
    run_corpus, CorpusOptions, IterationRecord, Pipeline, RefinementConfig, RefinementOutcome, Status,
};
pub use report::{compute_rates, convergence_curve, CorpusRecord, FailureClass, GroupKey, RateTable};
pub use sandbox::{ExecLimits, ExecutionRecord, Sandbox, Verdict};
pub use validate::{HarnessSpec, Toolchain, ValidationReport, Validator};
