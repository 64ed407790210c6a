use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use a4d_core::agent::{AgentLog, HttpClient, ScriptedClient, Transcript};
use a4d_core::orchestrator::{run_corpus, CorpusOptions, Status};
use a4d_core::report::{self, failure_breakdown, Format, RecordStatus, Report};
use a4d_core::validate::{boundary_inputs, OracleInput};
use a4d_core::{
    compute_rates, convergence_curve, BinaryTarget, Cache, CorpusRecord, Error, GroupKey, HarnessSpec, Origin,
    Pipeline, RepairAgent, SourceUnit, TestSuite, UnitKind,
};

use crate::args::{AgentKind, GroupArg, InputSource};
use crate::exit::{code_for_kind, CliError, DOMAIN_FAILURE, OK};
use crate::settings::Settings;

type CmdResult = Result<u8, CliError>;

fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::infra(format!("creating {}: {e}", parent.display())))?;
            }
            fs::write(p, text).map_err(|e| CliError::infra(format!("writing {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::infra(format!("writing stdout: {e}")))
        }
    }
}

fn agent(settings: &Settings) -> Result<(RepairAgent, String), CliError> {
    let cfg = settings.config.agent.clone();
    let (client, identity): (Arc<dyn a4d_core::agent::client::ModelClient>, String) = match settings.agent {
        AgentKind::Mock => {
            let transcript = match &settings.transcript {
                Some(path) => {
                    if !path.is_file() {
                        return Err(CliError::usage(format!("transcript {} not found", path.display())));
                    }
                    Transcript::load(path)?
                }
                None => Transcript::default(),
            };
            let identity = format!("mock:{}", transcript.digest());
            (Arc::new(ScriptedClient::new(transcript)), identity)
        }
        AgentKind::Http => {
            // a missing endpoint or key is a configuration problem here, not
            // a failing endpoint
            let client = HttpClient::from_env(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
            (Arc::new(client), cfg.model_name.clone())
        }
    };
    let log = AgentLog::new(settings.config.paths.log_dir.clone());
    Ok((RepairAgent::new(client, cfg).with_log(Arc::new(log)), identity))
}

/// A pipeline for `settings`; without `needs_agent` it runs as a dry run.
fn pipeline(settings: &Settings, needs_agent: bool) -> Result<Pipeline, CliError> {
    let mut cfg = settings.config.refinement_config()?;
    if !needs_agent {
        cfg.dry_run = true;
    }
    let mut pipeline = if cfg.dry_run {
        Pipeline::new(cfg, None)?
    } else {
        let (agent, identity) = agent(settings)?;
        Pipeline::new(cfg, Some(agent))?.with_agent_identity(identity)
    };
    if let Some(dir) = &settings.cache_dir {
        pipeline = pipeline.with_cache(Cache::new(dir.clone()));
    }
    Ok(pipeline)
}

fn open_target(binary: &Path, sidecar: Option<&PathBuf>) -> Result<BinaryTarget, CliError> {
    if !binary.is_file() {
        return Err(CliError::usage(format!("binary {} not found", binary.display())));
    }
    let target = BinaryTarget::open(binary)?;
    Ok(match sidecar {
        Some(s) => target.with_sidecar(s),
        None => target,
    })
}

fn load_inputs(path: Option<&Path>) -> Result<Vec<OracleInput>, CliError> {
    match path {
        Some(p) => {
            read_input(p, "inputs file")?;
            Ok(OracleInput::load_list(p)?)
        }
        None => Ok(boundary_inputs()),
    }
}

fn load_suite(path: &Path) -> Result<TestSuite, CliError> {
    read_input(path, "test suite")?;
    Ok(TestSuite::load(path)?)
}

fn load_harness(path: Option<&PathBuf>) -> Result<Option<HarnessSpec>, CliError> {
    path.map(|p| read_input(p, "harness").map(HarnessSpec::from_source)).transpose()
}

pub fn decompile(settings: &Settings, binary: &Path, sidecar: Option<&PathBuf>, raw: bool, out: Option<&Path>) -> CmdResult {
    let pipeline = pipeline(settings, false)?;
    let target = open_target(binary, sidecar)?;
    let unit = if raw {
        a4d_core::decompile(&pipeline.config().backend, &target, pipeline.validator().sandbox())?
    } else {
        pipeline.decompile(&target, UnitKind::Standalone)?
    };
    write_output(out, unit.code())?;
    Ok(OK)
}

pub fn oracle(settings: &Settings, binary: &Path, inputs: &InputSource, out: Option<&Path>) -> CmdResult {
    let pipeline = pipeline(settings, false)?;
    let target = open_target(binary, None)?;
    let inputs = load_inputs(inputs.inputs.as_deref())?;
    let suite = pipeline.validator().generate_oracle(&target, &inputs)?;
    tracing::info!(cases = suite.len(), offered = inputs.len(), "oracle recorded");
    write_output(out, &suite.to_json())?;
    Ok(OK)
}

pub fn validate(settings: &Settings, source: &Path, tests: &Path, harness: Option<&PathBuf>) -> CmdResult {
    let pipeline = pipeline(settings, false)?;
    let code = read_input(source, "source")?;
    let harness = load_harness(harness)?;
    let kind = if harness.is_some() {
        UnitKind::FunctionWithHarness
    } else {
        UnitKind::Standalone
    };
    let unit = SourceUnit::new(code, Origin::Decompiler("file".into()), kind)?;
    let suite = load_suite(tests)?;
    let report = pipeline.validator().validate(&unit, &suite, harness.as_ref())?;
    if report.is_pass() {
        println!("PASS");
        return Ok(OK);
    }
    println!("FAIL {} ({})", report.level, report.level.describe());
    if let Some(diag) = &report.diagnostics {
        println!("{}", a4d_core::agent::feedback::format_feedback(diag).trim_end());
    }
    Ok(DOMAIN_FAILURE)
}

pub struct RefineArgs<'a> {
    pub binary: &'a Path,
    pub tests: Option<&'a Path>,
    pub inputs: Option<&'a Path>,
    pub harness: Option<&'a PathBuf>,
    pub sidecar: Option<&'a PathBuf>,
    pub out: Option<&'a Path>,
    pub outcome: Option<&'a Path>,
}

pub fn refine(settings: &Settings, args: RefineArgs<'_>) -> CmdResult {
    let pipeline = pipeline(settings, true)?;
    let target = open_target(args.binary, args.sidecar)?;
    let harness = load_harness(args.harness)?;
    let suite = match args.tests {
        Some(path) => load_suite(path)?,
        None => pipeline
            .validator()
            .generate_oracle(&target, &load_inputs(args.inputs)?)?,
    };
    let outcome = pipeline.refine(&target, &suite, harness.as_ref());
    for r in &outcome.trace {
        let note = match (&r.repair_error, r.repair_applied) {
            (Some(e), _) => format!("repair failed: {e}"),
            (None, true) if r.repeated => "repaired (repeats an earlier source)".into(),
            (None, true) => "repaired".into(),
            (None, false) => String::new(),
        };
        eprintln!("iteration {}: {} {note}", r.index, r.level_reported);
    }
    if let Some(path) = args.outcome {
        let json = serde_json::to_string_pretty(&outcome).map_err(|e| CliError::infra(e.to_string()))?;
        write_output(Some(path), &json)?;
    }
    match &outcome.status {
        Status::Success { source, repairs } => {
            eprintln!("SUCCESS after {repairs} repair(s)");
            write_output(args.out, source.code())?;
            Ok(OK)
        }
        Status::Failure { last_level } => {
            println!("FAILURE: last level {last_level} ({})", last_level.describe());
            if let (Some(out), Some(src)) = (args.out, &outcome.last_source) {
                write_output(Some(out), src.code())?;
            }
            Ok(DOMAIN_FAILURE)
        }
        Status::DryRun { level } => {
            println!("DRY-RUN: initial decompilation at {level}");
            Ok(OK)
        }
        Status::Error { kind, message } => Err(CliError {
            code: code_for_kind(*kind),
            message: message.clone(),
        }),
    }
}

pub fn bench(settings: &Settings, corpus: &Path, results: Option<&Path>) -> CmdResult {
    if !corpus.is_dir() {
        return Err(CliError::usage(format!("corpus {} is not a directory", corpus.display())));
    }
    let pipeline = pipeline(settings, !settings.config.refinement.dry_run)?;
    let results = match results {
        Some(p) => p.to_path_buf(),
        None => settings.config.paths.results_dir.join(format!(
            "{}-{}.jsonl",
            pipeline.config().backend.name,
            &pipeline.config_digest()[..12]
        )),
    };
    if results.exists() {
        fs::remove_file(&results).map_err(|e| CliError::infra(format!("replacing {}: {e}", results.display())))?;
    }
    let opts = CorpusOptions {
        workers: pipeline.config().workers,
        results_path: Some(results.clone()),
    };
    let records = run_corpus(corpus, &pipeline, &opts)?;
    let table = compute_rates(&records, &[GroupKey::Backend, GroupKey::OptLevel]);
    print!("{}", report::render(Report::Rates(&table), Format::Markdown));
    let counters = pipeline.counters().snapshot();
    eprintln!(
        "{} binaries; results in {}; calls: decompile {}, validate {}, model {}",
        records.len(),
        results.display(),
        counters.decompile_calls,
        counters.validate_calls,
        counters.model_calls
    );
    if !records.is_empty() && records.iter().all(|r| r.status == RecordStatus::Error) {
        return Err(CliError::infra("every binary ended in an infrastructure error"));
    }
    Ok(OK)
}

fn collect_results(paths: &[PathBuf]) -> Result<Vec<CorpusRecord>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::usage("no results files found"));
    }
    let mut records = Vec::new();
    for f in files {
        let text = read_input(&f, "results file")?;
        let parsed = report::parse_records(&text).map_err(|e| Error::Json {
            context: format!("parsing {}", f.display()),
            source: e,
        })?;
        records.extend(parsed);
    }
    Ok(records)
}

pub fn report(results: &[PathBuf], out_dir: &Path, group_by: &[GroupArg], max_k: u32) -> CmdResult {
    let records = collect_results(results)?;
    let groups: Vec<GroupKey> = group_by.iter().map(|&g| g.into()).collect();
    let table = compute_rates(&records, &groups);
    let curve = convergence_curve(&records, max_k);
    let failures = failure_breakdown(&records);

    let markdown = format!(
        "# Re-executability\n\n{}\n## Convergence\n\n{}\n## Failure classes\n\n{}",
        report::render(Report::Rates(&table), Format::Markdown),
        report::render(Report::Convergence(&curve), Format::Markdown),
        report::render(Report::Failures(&failures), Format::Markdown),
    );
    fs::create_dir_all(out_dir).map_err(|e| CliError::infra(format!("creating {}: {e}", out_dir.display())))?;
    write_output(Some(&out_dir.join("report.md")), &markdown)?;
    write_output(Some(&out_dir.join("report.csv")), &report::render(Report::Rates(&table), Format::Csv))?;
    write_output(Some(&out_dir.join("convergence.csv")), &report::render(Report::Convergence(&curve), Format::Csv))?;
    write_output(Some(&out_dir.join("failures.csv")), &report::render(Report::Failures(&failures), Format::Csv))?;
    print!("{markdown}");
    Ok(OK)
}

