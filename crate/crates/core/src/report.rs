//! Aggregation of per-binary records into level rates, convergence series
//! and failure breakdowns, plus their Markdown/CSV/JSON renderings.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::backend::detect_empty_body;
use crate::model::{BinaryId, ConstraintLevel, Diagnostics, OptLevel, SourceUnit, UnitKind};
use crate::orchestrator::{RefinementOutcome, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Success,
    Failure,
    Error,
    DryRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    Inlined,
    LogicError,
    SignatureMismatch,
    ResidualSyntax,
    ResidualCompile,
    InfraError,
}

impl FailureClass {
    pub const ALL: [FailureClass; 6] = [
        FailureClass::Inlined,
        FailureClass::LogicError,
        FailureClass::SignatureMismatch,
        FailureClass::ResidualSyntax,
        FailureClass::ResidualCompile,
        FailureClass::InfraError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FailureClass::Inlined => "inlined",
            FailureClass::LogicError => "logic_error",
            FailureClass::SignatureMismatch => "signature_mismatch",
            FailureClass::ResidualSyntax => "residual_syntax",
            FailureClass::ResidualCompile => "residual_compile",
            FailureClass::InfraError => "infra_error",
        }
    }
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub binary: BinaryId,
    pub name: String,
    pub backend: String,
    pub opt_level: OptLevel,
    #[serde(default)]
    pub category: Option<String>,
    pub status: RecordStatus,
    /// Level of the initial decompilation (`None` if it never validated).
    pub best_level_baseline: Option<ConstraintLevel>,
    pub best_level_final: Option<ConstraintLevel>,
    /// Repairs applied.
    pub iterations_used: u32,
    #[serde(default)]
    pub repairs_per_level: BTreeMap<ConstraintLevel, u32>,
    #[serde(default)]
    pub failure_class: Option<FailureClass>,
    /// Repairs applied before the source first passed; 0 when the initial
    /// decompilation already passed.
    #[serde(default)]
    pub first_pass_iteration: Option<u32>,
    #[serde(default)]
    pub levels: Vec<ConstraintLevel>,
    #[serde(default)]
    pub repeated_sources: u32,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
}

/// What the record builder needs to know besides the outcome.
#[derive(Debug, Clone, Default)]
pub struct RecordContext {
    pub binary: Option<BinaryId>,
    pub name: String,
    pub backend: String,
    pub opt_level: OptLevel,
    pub category: Option<String>,
    /// Function under test, when known.
    pub target_symbol: Option<String>,
}

impl CorpusRecord {
    pub fn from_outcome(ctx: &RecordContext, id: BinaryId, outcome: &RefinementOutcome) -> Self {
        let status = match outcome.status {
            Status::Success { .. } => RecordStatus::Success,
            Status::Failure { .. } => RecordStatus::Failure,
            Status::Error { .. } => RecordStatus::Error,
            Status::DryRun { .. } => RecordStatus::DryRun,
        };
        let mut repairs_per_level = BTreeMap::new();
        for r in outcome.trace.iter().filter(|r| r.repair_applied) {
            *repairs_per_level.entry(r.level_reported).or_insert(0) += 1;
        }
        let first_pass_iteration = match &outcome.status {
            Status::Success { repairs, .. } => Some(*repairs),
            _ => None,
        };
        let best_level_final = outcome.final_level();
        let mut record = CorpusRecord {
            binary: id,
            name: ctx.name.clone(),
            backend: ctx.backend.clone(),
            opt_level: ctx.opt_level,
            category: ctx.category.clone(),
            status,
            best_level_baseline: outcome.baseline_level,
            best_level_final,
            iterations_used: outcome.repairs_applied(),
            repairs_per_level,
            failure_class: None,
            first_pass_iteration,
            levels: outcome.trace.iter().map(|r| r.level_reported).collect(),
            repeated_sources: outcome.trace.iter().filter(|r| r.repeated).count() as u32,
            error: match &outcome.status {
                Status::Error { message, .. } => Some(message.clone()),
                _ => None,
            },
            tokens_in: outcome.trace.iter().map(|r| r.tokens_in).sum(),
            tokens_out: outcome.trace.iter().map(|r| r.tokens_out).sum(),
        };
        record.failure_class = classify_failure(
            &record,
            outcome.last_source.as_ref(),
            outcome.last_diagnostics.as_ref(),
            ctx.target_symbol.as_deref(),
        );
        record
    }

    /// A record for a binary that could not even be set up.
    pub fn infra_error(ctx: &RecordContext, id: BinaryId, message: impl Into<String>) -> Self {
        CorpusRecord {
            binary: id,
            name: ctx.name.clone(),
            backend: ctx.backend.clone(),
            opt_level: ctx.opt_level,
            category: ctx.category.clone(),
            status: RecordStatus::Error,
            best_level_baseline: None,
            best_level_final: None,
            iterations_used: 0,
            repairs_per_level: BTreeMap::new(),
            failure_class: Some(FailureClass::InfraError),
            first_pass_iteration: None,
            levels: Vec::new(),
            repeated_sources: 0,
            error: Some(message.into()),
            tokens_in: 0,
            tokens_out: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.best_level_final == Some(ConstraintLevel::Pass)
    }
}

/// Root cause of a record that did not pass; `None` for passing records.
///
/// Empty-body detection applies only when the function under test is known
/// (an explicit symbol or a harnessed unit).
pub fn classify_failure(
    record: &CorpusRecord,
    final_source: Option<&SourceUnit>,
    final_diag: Option<&Diagnostics>,
    target_symbol: Option<&str>,
) -> Option<FailureClass> {
    if record.passed() {
        return None;
    }
    if record.status == RecordStatus::Error {
        return Some(FailureClass::InfraError);
    }
    if let Some(source) = final_source {
        let harnessed = source.unit_kind == UnitKind::FunctionWithHarness;
        if (target_symbol.is_some() || harnessed) && detect_empty_body(source, target_symbol) {
            return Some(FailureClass::Inlined);
        }
    }
    if final_diag.is_some_and(|d| d.level == ConstraintLevel::L2 && d.signature_mismatch) {
        return Some(FailureClass::SignatureMismatch);
    }
    Some(match record.best_level_final {
        Some(ConstraintLevel::L1) => FailureClass::ResidualSyntax,
        Some(ConstraintLevel::L2) => FailureClass::ResidualCompile,
        Some(ConstraintLevel::L3) => FailureClass::LogicError,
        _ => FailureClass::InfraError,
    })
}

/// A percentage in tenths of a point, e.g. `Tenths(223)` is 22.3%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tenths(pub i64);

impl Tenths {
    /// `100 · count / total`, rounded half-up to one decimal.
    pub fn ratio(count: u64, total: u64) -> Tenths {
        if total == 0 {
            return Tenths(0);
        }
        let (c, n) = (count as u128, total as u128);
        Tenths(((2000 * c + n) / (2 * n)) as i64)
    }

    /// Mean of several values, rounded half-up (away from zero on ties).
    pub fn mean(values: &[Tenths]) -> Tenths {
        if values.is_empty() {
            return Tenths(0);
        }
        let sum: i64 = values.iter().map(|t| t.0).sum();
        let m = values.len() as i64;
        let rounded = (2 * sum.abs() + m) / (2 * m);
        Tenths(if sum < 0 { -rounded } else { rounded })
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{}", self.0.abs() / 10, self.0.abs() % 10)
    }
}

impl Serialize for Tenths {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Tenths {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Ok(Tenths((v * 10.0).round() as i64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Backend,
    OptLevel,
    Category,
}

impl GroupKey {
    fn value(self, r: &CorpusRecord) -> String {
        match self {
            GroupKey::Backend => r.backend.clone(),
            GroupKey::OptLevel => r.opt_level.to_string(),
            GroupKey::Category => r.category.clone().unwrap_or_else(|| "-".into()),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GroupKey::Backend => "backend",
            GroupKey::OptLevel => "opt_level",
            GroupKey::Category => "category",
        }
    }
}

/// L1/L2/L3 pass rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelRates {
    pub l1: Tenths,
    pub l2: Tenths,
    pub l3: Tenths,
}

impl LevelRates {
    fn of(levels: impl Iterator<Item = Option<ConstraintLevel>>, n: u64) -> Self {
        let mut counts = [0u64; 3];
        for level in levels.flatten() {
            for (slot, check) in counts.iter_mut().zip(ConstraintLevel::CHECKS) {
                if level.has_passed(check) {
                    *slot += 1;
                }
            }
        }
        LevelRates {
            l1: Tenths::ratio(counts[0], n),
            l2: Tenths::ratio(counts[1], n),
            l3: Tenths::ratio(counts[2], n),
        }
    }

    fn minus(self, other: LevelRates) -> LevelRates {
        LevelRates {
            l1: Tenths(self.l1.0 - other.l1.0),
            l2: Tenths(self.l2.0 - other.l2.0),
            l3: Tenths(self.l3.0 - other.l3.0),
        }
    }

    fn mean(rows: &[LevelRates]) -> LevelRates {
        let pick = |f: fn(&LevelRates) -> Tenths| Tenths::mean(&rows.iter().map(f).collect::<Vec<_>>());
        LevelRates {
            l1: pick(|r| r.l1),
            l2: pick(|r| r.l2),
            l3: pick(|r| r.l3),
        }
    }

    pub fn as_array(&self) -> [Tenths; 3] {
        [self.l1, self.l2, self.l3]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateRow {
    pub group: Vec<String>,
    pub records: u64,
    pub baseline: LevelRates,
    #[serde(rename = "final")]
    pub final_: LevelRates,
    /// Final minus baseline, in points.
    pub delta: LevelRates,
}

impl RateRow {
    fn of(group: Vec<String>, records: &[&CorpusRecord]) -> Self {
        let n = records.len() as u64;
        let baseline = LevelRates::of(records.iter().map(|r| r.best_level_baseline), n);
        let final_ = LevelRates::of(records.iter().map(|r| r.best_level_final), n);
        RateRow {
            group,
            records: n,
            baseline,
            final_,
            delta: final_.minus(baseline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateTable {
    pub group_by: Vec<GroupKey>,
    pub rows: Vec<RateRow>,
    /// Unweighted mean of the rows.
    pub average: Option<RateRow>,
    /// All records pooled together.
    pub pooled: Option<RateRow>,
}

pub fn compute_rates(records: &[CorpusRecord], group_by: &[GroupKey]) -> RateTable {
    let mut groups: BTreeMap<Vec<String>, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|k| k.value(r)).collect();
        groups.entry(key).or_default().push(r);
    }
    let rows: Vec<RateRow> = groups.into_iter().map(|(key, rs)| RateRow::of(key, &rs)).collect();
    let (average, pooled) = if rows.is_empty() {
        tracing::warn!("no records to aggregate");
        (None, None)
    } else {
        let baseline = LevelRates::mean(&rows.iter().map(|r| r.baseline).collect::<Vec<_>>());
        let final_ = LevelRates::mean(&rows.iter().map(|r| r.final_).collect::<Vec<_>>());
        let average = RateRow {
            group: vec!["average".into()],
            records: rows.iter().map(|r| r.records).sum(),
            baseline,
            final_,
            delta: final_.minus(baseline),
        };
        let all: Vec<&CorpusRecord> = records.iter().collect();
        (Some(average), Some(RateRow::of(vec!["pooled".into()], &all)))
    };
    RateTable {
        group_by: group_by.to_vec(),
        rows,
        average,
        pooled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// Repairs allowed.
    pub k: u32,
    pub rate: Tenths,
}

/// Share of records that passed within `k` repairs, for `k = 0..=max_k`.
pub fn convergence_curve(records: &[CorpusRecord], max_k: u32) -> Vec<ConvergencePoint> {
    let n = records.len() as u64;
    (0..=max_k)
        .map(|k| {
            let count = records
                .iter()
                .filter(|r| r.passed() && r.first_pass_iteration.is_some_and(|f| f <= k))
                .count() as u64;
            ConvergencePoint {
                k,
                rate: Tenths::ratio(count, n),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureBreakdown {
    pub total: u64,
    pub successes: u64,
    pub classes: BTreeMap<FailureClass, u64>,
    /// Mean repairs among passing records.
    pub mean_repairs_to_pass: Tenths,
}

pub fn failure_breakdown(records: &[CorpusRecord]) -> FailureBreakdown {
    let mut out = FailureBreakdown {
        total: records.len() as u64,
        ..FailureBreakdown::default()
    };
    let mut repairs = 0u64;
    for r in records {
        if r.passed() {
            out.successes += 1;
            repairs += r.first_pass_iteration.unwrap_or(0) as u64;
        } else {
            let class = r.failure_class.unwrap_or(FailureClass::InfraError);
            *out.classes.entry(class).or_insert(0) += 1;
        }
    }
    if out.successes > 0 {
        // repairs / successes, in tenths, half-up
        out.mean_repairs_to_pass = Tenths(((20 * repairs + out.successes) / (2 * out.successes)) as i64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Rates(&'a RateTable),
    Convergence(&'a [ConvergencePoint]),
    Failures(&'a FailureBreakdown),
}

pub fn render(report: Report<'_>, format: Format) -> String {
    match (report, format) {
        (Report::Rates(t), Format::Json) => to_json(t),
        (Report::Convergence(c), Format::Json) => to_json(&c),
        (Report::Failures(f), Format::Json) => to_json(f),
        (Report::Rates(t), Format::Markdown) => rates_markdown(t),
        (Report::Rates(t), Format::Csv) => rates_csv(t),
        (Report::Convergence(c), Format::Markdown) => {
            let mut out = String::from("| k | re-exec % |\n|---:|---:|\n");
            for p in c {
                let _ = writeln!(out, "| {} | {} |", p.k, p.rate);
            }
            out
        }
        (Report::Convergence(c), Format::Csv) => {
            let mut out = String::from("k,reexec_rate\n");
            for p in c {
                let _ = writeln!(out, "{},{}", p.k, p.rate);
            }
            out
        }
        (Report::Failures(f), Format::Markdown) => {
            let failed = f.total - f.successes;
            let mut out = String::from("| class | count | share of failures % |\n|---|---:|---:|\n");
            for class in FailureClass::ALL {
                let count = f.classes.get(&class).copied().unwrap_or(0);
                let _ = writeln!(out, "| {} | {count} | {} |", class.label(), Tenths::ratio(count, failed));
            }
            let _ = writeln!(
                out,
                "\n{} of {} records passed; mean repairs to pass: {}",
                f.successes, f.total, f.mean_repairs_to_pass
            );
            out
        }
        (Report::Failures(f), Format::Csv) => {
            let mut out = String::from("class,count\n");
            for class in FailureClass::ALL {
                let _ = writeln!(out, "{},{}", class.label(), f.classes.get(&class).copied().unwrap_or(0));
            }
            let _ = writeln!(out, "success,{}", f.successes);
            out
        }
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn group_header(t: &RateTable) -> String {
    if t.group_by.is_empty() {
        "group".into()
    } else {
        t.group_by.iter().map(|k| k.label()).collect::<Vec<_>>().join("/")
    }
}

fn rates_markdown(t: &RateTable) -> String {
    let mut out = format!(
        "| {} | n | Baseline L1 | Baseline L2 | Baseline L3 | Final L1 | Final L2 | Final L3 | ΔL1 | ΔL2 | ΔL3 |\n",
        group_header(t)
    );
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    let mut line = |row: &RateRow, label: String| {
        let cells: Vec<String> = row
            .baseline
            .as_array()
            .iter()
            .chain(row.final_.as_array().iter())
            .map(Tenths::to_string)
            .chain(row.delta.as_array().iter().map(|d| format!("{}{d}", if d.0 > 0 { "+" } else { "" })))
            .collect();
        let _ = writeln!(out, "| {label} | {} | {} |", row.records, cells.join(" | "));
    };
    for row in &t.rows {
        line(row, row.group.join("/"));
    }
    if let Some(avg) = &t.average {
        line(avg, "**Average**".into());
    }
    if let Some(pooled) = &t.pooled {
        line(pooled, "Pooled (record-weighted)".into());
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn rates_csv(t: &RateTable) -> String {
    let mut out = format!(
        "{},n,baseline_l1,baseline_l2,baseline_l3,final_l1,final_l2,final_l3,delta_l1,delta_l2,delta_l3\n",
        group_header(t)
    );
    let rows = t.rows.iter().chain(t.average.iter());
    for row in rows {
        let values: Vec<String> = row
            .baseline
            .as_array()
            .iter()
            .chain(row.final_.as_array().iter())
            .chain(row.delta.as_array().iter())
            .map(Tenths::to_string)
            .collect();
        let _ = writeln!(out, "{},{},{}", csv_field(&row.group.join("/")), row.records, values.join(","));
    }
    out
}

/// Reads results files (JSON lines); blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<CorpusRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
