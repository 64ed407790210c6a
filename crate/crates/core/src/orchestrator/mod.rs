//! The bounded refinement loop and corpus-scale execution.

mod corpus;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agent::client::RequestContext;
use crate::agent::{prompt, AgentConfig, RepairAgent};
use crate::backend::{self, BackendDescriptor, Normalizer};
use crate::cache::{Cache, Stage};
use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::model::{text_digest, BinaryTarget, ConstraintLevel, Diagnostics, SourceUnit, TestSuite, UnitKind};
use crate::sandbox::ExecLimits;
use crate::validate::{HarnessSpec, Toolchain, Validator};

pub use corpus::{run_corpus, CorpusLayout, CorpusOptions};

pub const DEFAULT_MAX_ITERATIONS: u32 = 5;
pub const MAX_ITERATIONS_CAP: u32 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    /// Repair budget N.
    pub max_iterations: u32,
    pub backend: BackendDescriptor,
    pub toolchain: Toolchain,
    pub limits: ExecLimits,
    pub agent: AgentConfig,
    pub workers: usize,
    /// Compare exit codes at L3 in addition to stdout.
    pub compare_exit: bool,
    /// Decompile and validate only.
    pub dry_run: bool,
    pub prelude: Vec<String>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            backend: BackendDescriptor::passthrough(),
            toolchain: Toolchain::default(),
            limits: ExecLimits::default(),
            agent: AgentConfig::default(),
            workers: 1,
            compare_exit: true,
            dry_run: false,
            prelude: backend::DEFAULT_PRELUDE.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ITERATIONS_CAP).contains(&self.max_iterations) {
            return Err(Error::Config(format!(
                "max_iterations must be between 1 and {MAX_ITERATIONS_CAP}, got {}",
                self.max_iterations
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.backend.validate()?;
        self.toolchain.validate()?;
        self.limits.validate()?;
        self.agent.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub level_reported: ConstraintLevel,
    pub repair_applied: bool,
    /// Digest of the source this iteration hands to the next one.
    pub source_after: String,
    /// The repair reproduced a source seen earlier in this refinement.
    #[serde(default)]
    pub repeated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair_error: Option<String>,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    DecompileFailed,
    ToolMissing,
    EndpointUnavailable,
    Auth,
    OracleFailed,
    InvalidInput,
    Internal,
}

impl ErrorKind {
    fn of(err: &Error) -> Self {
        match err {
            Error::ToolMissing { .. } => ErrorKind::ToolMissing,
            Error::ToolTimeout { .. } | Error::ToolFailure { .. } | Error::EmptyOutput { .. } => ErrorKind::DecompileFailed,
            Error::EndpointUnavailable { .. } => ErrorKind::EndpointUnavailable,
            Error::Auth(_) => ErrorKind::Auth,
            Error::AllInputsFailed => ErrorKind::OracleFailed,
            Error::InvalidTarget { .. }
            | Error::InvalidSuite(_)
            | Error::InvalidSource(_)
            | Error::CorpusMalformed(_)
            | Error::Config(_)
            | Error::UnknownBackend(_)
            | Error::InvalidBackend { .. } => ErrorKind::InvalidInput,
            _ => ErrorKind::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Success { source: SourceUnit, repairs: u32 },
    Failure { last_level: ConstraintLevel },
    Error { kind: ErrorKind, message: String },
    /// Validation of the initial decompilation only.
    DryRun { level: ConstraintLevel },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementOutcome {
    pub status: Status,
    pub trace: Vec<IterationRecord>,
    /// Level of the initial decompilation.
    pub baseline_level: Option<ConstraintLevel>,
    /// The last source that was validated, with its diagnostics.
    pub last_source: Option<SourceUnit>,
    pub last_diagnostics: Option<Diagnostics>,
}

impl RefinementOutcome {
    fn error(err: &Error, trace: Vec<IterationRecord>) -> Self {
        RefinementOutcome {
            status: Status::Error {
                kind: ErrorKind::of(err),
                message: err.to_string(),
            },
            trace,
            baseline_level: None,
            last_source: None,
            last_diagnostics: None,
        }
    }

    /// Highest level reached by the last validated source.
    pub fn final_level(&self) -> Option<ConstraintLevel> {
        match &self.status {
            Status::Success { .. } => Some(ConstraintLevel::Pass),
            Status::Failure { last_level } => Some(*last_level),
            Status::DryRun { level } => Some(*level),
            Status::Error { .. } => self.trace.last().map(|r| r.level_reported),
        }
    }

    pub fn repairs_applied(&self) -> u32 {
        self.trace.iter().filter(|r| r.repair_applied).count() as u32
    }

    pub fn is_success(&self) -> bool {
        matches!(self.status, Status::Success { .. })
    }
}

/// Runs refinements with a fixed configuration, agent and cache.
#[derive(Debug)]
pub struct Pipeline {
    config: RefinementConfig,
    validator: Validator,
    normalizer: Normalizer,
    agent: Option<RepairAgent>,
    cache: Option<Cache>,
    counters: Arc<Counters>,
    /// Identifies the agent's behavior for cache keys (model name, or the
    /// transcript digest for scripted runs).
    agent_identity: String,
}

impl Pipeline {
    /// `agent` may be `None` only for dry runs.
    pub fn new(config: RefinementConfig, agent: Option<RepairAgent>) -> Result<Self> {
        config.validate()?;
        if agent.is_none() && !config.dry_run {
            return Err(Error::Config("a repair agent is required unless dry_run is set".into()));
        }
        let counters = Arc::new(Counters::default());
        let validator = Validator::new(config.toolchain.clone(), config.limits).with_exit_codes(config.compare_exit);
        let normalizer = Normalizer::new(config.prelude.clone());
        let agent_identity = agent.as_ref().map(|a| a.config().model_name.clone()).unwrap_or_default();
        Ok(Pipeline {
            agent: agent.map(|a| a.with_counters(counters.clone())),
            config,
            validator,
            normalizer,
            cache: None,
            counters,
            agent_identity,
        })
    }

    pub fn with_cache(mut self, cache: Cache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_agent_identity(mut self, identity: impl Into<String>) -> Self {
        self.agent_identity = identity.into();
        self
    }

    pub fn config(&self) -> &RefinementConfig {
        &self.config
    }

    pub fn validator(&self) -> &Validator {
        &self.validator
    }

    pub fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    pub fn counters(&self) -> &Arc<Counters> {
        &self.counters
    }

    /// Digest of every setting that can change a refinement's result.
    pub fn config_digest(&self) -> String {
        let c = &self.config;
        let material = json!({
            "backend": { "name": c.backend.name, "command": c.backend.command, "kind": c.backend.kind },
            "toolchain": c.toolchain,
            "limits": c.limits,
            "max_iterations": c.max_iterations,
            "compare_exit": c.compare_exit,
            "dry_run": c.dry_run,
            "prelude": c.prelude,
            "model": c.agent.model_name,
            "temperature": c.agent.temperature,
            "max_output_tokens": c.agent.max_output_tokens,
            "agent_identity": self.agent_identity,
            "templates": prompt::template_digest(),
        });
        text_digest(&material.to_string())
    }

    fn backend_cache_key(&self) -> String {
        let b = &self.config.backend;
        format!("{}-{}", b.name, &text_digest(&format!("{}\0{}", b.kind, b.command))[..12])
    }

    /// Decompiles `target` (through the cache) and normalizes the result.
    pub fn decompile(&self, target: &BinaryTarget, unit_kind: UnitKind) -> Result<SourceUnit> {
        let stage = Stage::Decompiled {
            backend: self.backend_cache_key(),
        };
        let cached = self.cache.as_ref().and_then(|c| c.lookup_text(&target.id, &stage));
        let origin = crate::model::Origin::Decompiler(self.config.backend.name.clone());
        let raw = match cached {
            Some(text) => SourceUnit::new(text, origin, unit_kind)?,
            None => {
                self.counters.record_decompile();
                let unit = backend::decompile(&self.config.backend, target, self.validator.sandbox())?;
                if let Some(cache) = &self.cache {
                    cache.store(&target.id, &stage, unit.code().as_bytes())?;
                }
                SourceUnit::new(unit.code(), origin, unit_kind)?
            }
        };
        Ok(self.normalizer.normalize(&raw))
    }

    /// Full refinement of one binary.
    pub fn refine(&self, target: &BinaryTarget, suite: &TestSuite, harness: Option<&HarnessSpec>) -> RefinementOutcome {
        if suite.is_empty() {
            return RefinementOutcome::error(&Error::InvalidSuite("test suite is empty".into()), Vec::new());
        }
        let kind = if harness.is_some() {
            UnitKind::FunctionWithHarness
        } else {
            UnitKind::Standalone
        };
        let initial = match self.decompile(target, kind) {
            Ok(unit) => unit,
            Err(e) => {
                tracing::warn!(binary = %target.name(), error = %e, "decompilation failed");
                return RefinementOutcome::error(&e, Vec::new());
            }
        };
        let ctx = RequestContext {
            binary: target.name(),
            binary_id: target.id.to_string(),
            iteration: 0,
            level: None,
        };
        self.refine_source(initial, suite, harness, &ctx)
    }

    /// The loop itself, starting from an already normalized source.
    pub fn refine_source(
        &self,
        initial: SourceUnit,
        suite: &TestSuite,
        harness: Option<&HarnessSpec>,
        ctx: &RequestContext,
    ) -> RefinementOutcome {
        let n = self.config.max_iterations;
        let mut current = initial;
        let mut seen = vec![current.digest()];
        let mut trace: Vec<IterationRecord> = Vec::new();
        let mut baseline = None;
        let mut last_diag = None;
        let mut last_source = None;

        for k in 1..=n {
            self.counters.record_validate();
            let report = match self.validator.validate(&current, suite, harness) {
                Ok(report) => report,
                Err(e) => {
                    tracing::error!(binary = %ctx.binary, iteration = k, error = %e, "validation could not run");
                    let mut out = RefinementOutcome::error(&e, trace);
                    out.baseline_level = baseline;
                    out.last_source = last_source;
                    out.last_diagnostics = last_diag;
                    return out;
                }
            };
            baseline.get_or_insert(report.level);
            tracing::info!(binary = %ctx.binary, iteration = k, level = %report.level, "validated");

            if report.is_pass() {
                trace.push(IterationRecord {
                    index: k,
                    level_reported: ConstraintLevel::Pass,
                    repair_applied: false,
                    source_after: current.digest(),
                    repeated: false,
                    repair_error: None,
                    tokens_in: 0,
                    tokens_out: 0,
                });
                return RefinementOutcome {
                    status: Status::Success {
                        source: current.clone(),
                        repairs: k - 1,
                    },
                    trace,
                    baseline_level: baseline,
                    last_source: Some(current),
                    last_diagnostics: None,
                };
            }

            let diag = report
                .diagnostics
                .expect("a failing validation always carries diagnostics");
            last_source = Some(current.clone());
            last_diag = Some(diag.clone());

            let Some(agent) = self.agent.as_ref().filter(|_| !self.config.dry_run) else {
                trace.push(IterationRecord {
                    index: k,
                    level_reported: report.level,
                    repair_applied: false,
                    source_after: current.digest(),
                    repeated: false,
                    repair_error: None,
                    tokens_in: 0,
                    tokens_out: 0,
                });
                return RefinementOutcome {
                    status: Status::DryRun { level: report.level },
                    trace,
                    baseline_level: baseline,
                    last_source,
                    last_diagnostics: last_diag,
                };
            };

            let request = RequestContext {
                iteration: k,
                ..ctx.clone()
            };
            let mut record = IterationRecord {
                index: k,
                level_reported: report.level,
                repair_applied: false,
                source_after: String::new(),
                repeated: false,
                repair_error: None,
                tokens_in: 0,
                tokens_out: 0,
            };
            match agent.repair(&current, &diag, &request) {
                Ok(attempt) => {
                    record.repair_applied = true;
                    record.tokens_in = attempt.tokens_in;
                    record.tokens_out = attempt.tokens_out;
                    current = attempt.repaired;
                }
                Err(Error::EmptyRepair) => {
                    tracing::warn!(binary = %ctx.binary, iteration = k, "reply held no code; iteration wasted");
                    record.repair_error = Some(Error::EmptyRepair.to_string());
                }
                Err(e) => {
                    record.source_after = current.digest();
                    record.repair_error = Some(e.to_string());
                    trace.push(record);
                    let mut out = RefinementOutcome::error(&e, trace);
                    out.baseline_level = baseline;
                    out.last_source = last_source;
                    out.last_diagnostics = last_diag;
                    return out;
                }
            }
            let digest = current.digest();
            record.repeated = record.repair_applied && seen.contains(&digest);
            seen.push(digest.clone());
            record.source_after = digest;
            trace.push(record);
        }

        let last_level = trace.last().map(|r| r.level_reported).unwrap_or(ConstraintLevel::L1);
        RefinementOutcome {
            status: Status::Failure { last_level },
            trace,
            baseline_level: baseline,
            last_source,
            last_diagnostics: last_diag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::client::{ScriptedClient, Step, Transcript};
    use crate::model::{binary_id, Origin, TestCase};

    const GOOD: &str = "#include <stdio.h>\nint main(void) {\n  puts(\"hi\");\n  return 0;\n}\n";
    const WRONG: &str = "#include <stdio.h>\nint main(void) {\n  puts(\"ho\");\n  return 0;\n}\n";
    const SYNTAX: &str = "#include <stdio.h>\nint main(void) {\n  puts(\"hi\")\n  return 0;\n}\n";

    fn suite() -> TestSuite {
        TestSuite {
            source_binary: binary_id(b"x"),
            cases: vec![TestCase {
                args: vec![],
                stdin: vec![],
                expected_stdout: b"hi\n".to_vec(),
                expected_exit: 0,
            }],
        }
    }

    fn pipeline(steps: Vec<Step>, n: u32) -> Pipeline {
        let agent = RepairAgent::new(Arc::new(ScriptedClient::new(Transcript {
            default: steps,
            ..Transcript::default()
        })), AgentConfig::default());
        let cfg = RefinementConfig {
            max_iterations: n,
            ..RefinementConfig::default()
        };
        Pipeline::new(cfg, Some(agent)).unwrap()
    }

    fn unit(code: &str) -> SourceUnit {
        SourceUnit::new(code, Origin::Decompiler("file".into()), UnitKind::Standalone).unwrap()
    }

    fn levels(out: &RefinementOutcome) -> Vec<ConstraintLevel> {
        out.trace.iter().map(|r| r.level_reported).collect()
    }

    #[test]
    fn passing_source_needs_no_repair() {
        let p = pipeline(vec![], 5);
        let out = p.refine_source(unit(GOOD), &suite(), None, &RequestContext::default());
        assert!(matches!(out.status, Status::Success { repairs: 0, .. }));
        assert_eq!(out.trace.len(), 1);
        assert_eq!(p.counters().snapshot().model_calls, 0);
    }

    #[test]
    fn syntax_then_logic_then_pass() {
        let p = pipeline(vec![Step::Reply(WRONG.into()), Step::Reply(GOOD.into())], 5);
        let out = p.refine_source(unit(SYNTAX), &suite(), None, &RequestContext::default());
        use ConstraintLevel::*;
        assert_eq!(levels(&out), [L1, L3, Pass]);
        assert!(matches!(out.status, Status::Success { repairs: 2, .. }));
        assert_eq!(out.baseline_level, Some(L1));
        assert_eq!(p.counters().snapshot().model_calls, 2);
    }

    #[test]
    fn unchanged_repairs_exhaust_budget() {
        let p = pipeline(vec![Step::Echo; 10], 5);
        let out = p.refine_source(unit(WRONG), &suite(), None, &RequestContext::default());
        assert_eq!(out.status, Status::Failure { last_level: ConstraintLevel::L3 });
        assert_eq!(out.trace.len(), 5);
        assert!(out.trace.iter().all(|r| r.repeated && r.repair_applied));
        assert_eq!(out.trace.iter().map(|r| r.index).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
    }

    #[test]
    fn empty_reply_burns_an_iteration() {
        let p = pipeline(vec![Step::Reply("No idea.".into()), Step::Reply(GOOD.into())], 3);
        let out = p.refine_source(unit(WRONG), &suite(), None, &RequestContext::default());
        assert!(!out.trace[0].repair_applied);
        assert!(out.trace[0].repair_error.is_some());
        assert!(matches!(out.status, Status::Success { repairs: 2, .. }));
        assert_eq!(out.repairs_applied(), 1);
    }

    #[test]
    fn endpoint_failure_is_error_not_failure() {
        let p = pipeline(vec![Step::Fail(crate::agent::client::FailKind::Auth)], 5);
        let out = p.refine_source(unit(WRONG), &suite(), None, &RequestContext::default());
        assert!(matches!(out.status, Status::Error { kind: ErrorKind::Auth, .. }));
        assert_eq!(out.baseline_level, Some(ConstraintLevel::L3));
    }

    #[test]
    fn dry_run_stops_after_first_validation() {
        let cfg = RefinementConfig {
            dry_run: true,
            ..RefinementConfig::default()
        };
        let p = Pipeline::new(cfg, None).unwrap();
        let out = p.refine_source(unit(SYNTAX), &suite(), None, &RequestContext::default());
        assert_eq!(out.status, Status::DryRun { level: ConstraintLevel::L1 });
        assert_eq!(p.counters().snapshot().model_calls, 0);
    }

    #[test]
    fn config_bounds() {
        for n in [0, 8] {
            let cfg = RefinementConfig {
                max_iterations: n,
                ..RefinementConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
        assert!(Pipeline::new(RefinementConfig::default(), None).is_err());
    }

    #[test]
    fn digest_tracks_result_affecting_settings_only() {
        let a = pipeline(vec![], 5);
        let b = pipeline(vec![], 6);
        assert_ne!(a.config_digest(), b.config_digest());
        let cfg = RefinementConfig { workers: 4, ..Default::default() };
        let c = Pipeline::new(cfg, Some(RepairAgent::new(Arc::new(ScriptedClient::with_steps(vec![])), AgentConfig::default()))).unwrap();
        assert_eq!(a.config_digest(), c.config_digest());
        assert_ne!(a.config_digest(), c.with_agent_identity("other").config_digest());
    }
}
