use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "a4d", version, about = "Refine decompiled C until it recompiles and re-executes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Decompiler backend name.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Repair budget per binary (1-7).
    #[arg(long, global = true, value_name = "N")]
    pub max_iters: Option<u32>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Treat compiler warnings as errors at the compile step.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Wall-clock limit per test execution.
    #[arg(long, global = true, value_name = "SECS")]
    pub timeout_s: Option<u64>,
    /// Memory limit per test execution.
    #[arg(long, global = true, value_name = "MB")]
    pub mem_mb: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Disable the result cache.
    #[arg(long, global = true, conflicts_with = "cache_dir")]
    pub no_cache: bool,
    /// Decompile and validate only; no model calls.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[arg(long, global = true, value_enum)]
    pub agent: Option<AgentKind>,
    /// Scripted replies for `--agent mock`.
    #[arg(long, global = true, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only errors on stderr; the effective configuration is not printed.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Http,
    Mock,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompile a binary and print the normalized source.
    Decompile {
        binary: PathBuf,
        /// Stored decompiler output (file backend); defaults to <binary>.c.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Skip normalization.
        #[arg(long)]
        raw: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Record a binary's behavior as a test suite.
    Oracle {
        binary: PathBuf,
        #[command(flatten)]
        inputs: InputSource,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a C source against a test suite.
    Validate {
        source: PathBuf,
        #[arg(long, value_name = "SUITE")]
        tests: PathBuf,
        /// Driver providing main() for a function-level source.
        #[arg(long)]
        harness: Option<PathBuf>,
    },
    /// Run the refinement loop on one binary.
    Refine {
        binary: PathBuf,
        /// Existing test suite; otherwise one is generated.
        #[arg(long, value_name = "SUITE", conflicts_with = "inputs")]
        tests: Option<PathBuf>,
        /// Inputs for oracle generation (boundary inputs if absent).
        #[arg(long, value_name = "FILE")]
        inputs: Option<PathBuf>,
        #[arg(long)]
        harness: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Where to write the refined source.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Where to write the outcome as JSON.
        #[arg(long)]
        outcome: Option<PathBuf>,
    },
    /// Refine every binary of a corpus directory.
    Bench {
        corpus: PathBuf,
        /// JSON-lines results file (default: <results_dir>/<backend>-<digest>.jsonl).
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Aggregate results files into tables.
    Report {
        /// Results files, or directories holding *.jsonl files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Comma-separated grouping: backend, opt_level, category.
        #[arg(long, default_value = "backend,opt_level", value_delimiter = ',')]
        group_by: Vec<GroupArg>,
        /// Last point of the convergence series.
        #[arg(long, default_value_t = 5)]
        max_k: u32,
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct InputSource {
    /// JSON list of {"args": [...], "stdin" | "stdin_text": ...}.
    #[arg(long, value_name = "FILE")]
    pub inputs: Option<PathBuf>,
    /// Use the built-in boundary inputs.
    #[arg(long)]
    pub generate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum GroupArg {
    Backend,
    OptLevel,
    Category,
}

impl From<GroupArg> for a4d_core::GroupKey {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Backend => a4d_core::GroupKey::Backend,
            GroupArg::OptLevel => a4d_core::GroupKey::OptLevel,
            GroupArg::Category => a4d_core::GroupKey::Category,
        }
    }
}
