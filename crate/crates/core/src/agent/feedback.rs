//! Turns validator diagnostics into the error-feedback section of a prompt.

use similar::TextDiff;

use crate::model::{ConstraintLevel, Diagnostics, FailedTest};

/// Tool output is cut to this many characters (marker included).
pub const MAX_TOOL_CHARS: usize = 500;
/// At most this many failing cases are rendered.
pub const MAX_RENDERED_CASES: usize = 2;
/// Unified diffs are cut to this many lines.
pub const MAX_DIFF_LINES: usize = 10;
/// Appended when tool output was cut.
pub const TRUNCATION_MARKER: &str = "\n[... truncated]";

/// Expected/actual outputs are previewed up to this many lines each; the
/// diff carries the detail.
const OUTPUT_PREVIEW_LINES: usize = 20;
const OUTPUT_PREVIEW_CHARS: usize = 2000;

/// Header line of each rendered failing case.
pub const CASE_HEADER: &str = "Failing test ";
/// Prefix of each rendered diff line.
pub const DIFF_PREFIX: &str = "  | ";
/// Prefix of each rendered output line.
pub const OUTPUT_PREFIX: &str = "  > ";

pub const CHECKLIST: &str = include_str!("../../templates/checklist.txt");

pub fn format_feedback(diag: &Diagnostics) -> String {
    match diag.level {
        ConstraintLevel::L1 | ConstraintLevel::L2 => truncate_tool_output(&diag.raw_text),
        ConstraintLevel::L3 => format_test_failures(&diag.failed_tests),
        ConstraintLevel::Pass => String::new(),
    }
}

/// Keeps at most [`MAX_TOOL_CHARS`] characters, marker included.
pub fn truncate_tool_output(text: &str) -> String {
    if text.chars().count() <= MAX_TOOL_CHARS {
        return text.to_owned();
    }
    let keep = MAX_TOOL_CHARS - TRUNCATION_MARKER.chars().count();
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_MARKER);
    out
}

fn format_test_failures(failed: &[FailedTest]) -> String {
    let shown = failed.len().min(MAX_RENDERED_CASES);
    let mut out = format!(
        "{} test case(s) produced output different from the original binary; showing {}.\n",
        failed.len(),
        shown
    );
    for (idx, test) in failed.iter().take(shown).enumerate() {
        out.push('\n');
        out.push_str(&render_case(idx + 1, test));
    }
    out.push('\n');
    out.push_str(CHECKLIST.trim_end());
    out.push('\n');
    out
}

fn render_case(number: usize, test: &FailedTest) -> String {
    let case = &test.case;
    let args = serde_json::to_string(&case.args).unwrap_or_else(|_| "[]".into());
    let stdin = if case.stdin.is_empty() {
        "(empty)".to_owned()
    } else {
        format!("\"{}\"", case.stdin.escape_ascii())
    };
    let expected = render_bytes(&case.expected_stdout);
    let actual = render_bytes(&test.actual_stdout);

    let mut out = format!("{CASE_HEADER}{number}\nInput:\n  args: {args}\n  stdin: {stdin}\n");
    out.push_str(&format!("Expected output (exit {}):\n", case.expected_exit));
    out.push_str(&preview(&expected));
    out.push_str(&format!("Actual output ({}):\n", test.actual_exit));
    out.push_str(&preview(&actual));
    out.push_str(&format!("Diff (first {MAX_DIFF_LINES} lines):\n"));
    let diff = unified_diff(&expected, &actual);
    if diff.is_empty() {
        out.push_str(&format!("{DIFF_PREFIX}(stdout matches; exit status differs)\n"));
    }
    for line in diff {
        out.push_str(DIFF_PREFIX);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Unified diff of two renderings, cut to [`MAX_DIFF_LINES`].
pub fn unified_diff(expected: &str, actual: &str) -> Vec<String> {
    let diff = TextDiff::from_lines(expected, actual);
    let text = diff
        .unified_diff()
        .context_radius(2)
        .header("expected", "actual")
        .to_string();
    text.lines().take(MAX_DIFF_LINES).map(str::to_owned).collect()
}

fn preview(text: &str) -> String {
    if text.is_empty() {
        return format!("{OUTPUT_PREFIX}(empty)\n");
    }
    let mut out = String::new();
    let mut chars = 0;
    let total = text.lines().count();
    for (i, line) in text.lines().enumerate() {
        if i == OUTPUT_PREVIEW_LINES || chars > OUTPUT_PREVIEW_CHARS {
            out.push_str(&format!("{OUTPUT_PREFIX}... ({} more lines)\n", total - i));
            break;
        }
        chars += line.len();
        out.push_str(OUTPUT_PREFIX);
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Text rendering of program output: UTF-8 as-is, anything else with
/// non-printable bytes escaped as `\xNN` (newlines and tabs kept).
pub fn render_bytes(bytes: &[u8]) -> String {
    if let Ok(text) = std::str::from_utf8(bytes) {
        if !text.chars().any(|c| c.is_control() && c != '\n' && c != '\t' && c != '\r') {
            return text.to_owned();
        }
    }
    let mut out = String::with_capacity(bytes.len() * 2);
    for &b in bytes {
        match b {
            b'\n' | b'\t' => out.push(b as char),
            0x20..=0x7e if b != b'\\' => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}
