use regex::Regex;
use std::sync::LazyLock;

use crate::model::SourceUnit;

/// Headers prepended when missing.
pub const DEFAULT_PRELUDE: &[&str] = &["stdio.h", "stdlib.h", "string.h", "stdint.h"];

static BANNER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(//|/\*).*\b((generated|decompiled|produced|exported)\s+(by|with|using|from)\b|this file was generated|retargetable decompiler|ghidra|angr\b|retdec\b)",
    )
    .unwrap()
});

static TOOL_LOG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(\[(INFO|WARN|WARNING|ERROR|DEBUG)\]|(INFO|WARN|WARNING|DEBUG)\s{1,}[A-Z(])").unwrap());

/// Banner stripping plus header prelude.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalizer {
    pub prelude: Vec<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            prelude: DEFAULT_PRELUDE.iter().map(|h| h.to_string()).collect(),
        }
    }
}

impl Normalizer {
    pub fn new(prelude: Vec<String>) -> Self {
        Normalizer { prelude }
    }

    /// Idempotent. Only the leading preamble is touched: tool log lines,
    /// and any run of `//` comment lines containing a banner, are removed.
    pub fn normalize(&self, source: &SourceUnit) -> SourceUnit {
        let code = source.code();
        let lines: Vec<&str> = code.split_inclusive('\n').collect();
        let mut keep = vec![true; lines.len()];

        // the preamble ends at the first line that is neither blank, a
        // comment, nor a tool log line
        let preamble_end = lines
            .iter()
            .position(|l| {
                let t = l.trim();
                !(t.is_empty() || t.starts_with("//") || is_block_comment_line(t) || TOOL_LOG.is_match(l))
            })
            .unwrap_or(lines.len());

        let mut i = 0;
        while i < preamble_end {
            let t = lines[i].trim();
            if TOOL_LOG.is_match(lines[i]) {
                keep[i] = false;
                i += 1;
            } else if t.starts_with("//") {
                let start = i;
                while i < preamble_end && lines[i].trim().starts_with("//") {
                    i += 1;
                }
                if lines[start..i].iter().any(|l| BANNER.is_match(l)) {
                    keep[start..i].iter_mut().for_each(|k| *k = false);
                }
            } else {
                if is_block_comment_line(t) && BANNER.is_match(t) {
                    keep[i] = false;
                }
                i += 1;
            }
        }

        let body: String = lines
            .iter()
            .zip(&keep)
            .filter_map(|(l, k)| k.then_some(*l))
            .collect();

        let missing: String = self
            .prelude
            .iter()
            .filter(|h| !includes(&body, h))
            .map(|h| format!("#include <{h}>\n"))
            .collect();

        let normalized = format!("{missing}{body}");
        source.with_code(normalized).unwrap_or_else(|_| source.clone())
    }
}

pub fn normalize(source: &SourceUnit) -> SourceUnit {
    Normalizer::default().normalize(source)
}

fn is_block_comment_line(t: &str) -> bool {
    t.starts_with("/*") && t.ends_with("*/")
}

fn includes(code: &str, header: &str) -> bool {
    code.lines().any(|l| {
        let t = l.trim_start();
        let Some(rest) = t.strip_prefix('#') else {
            return false;
        };
        let Some(rest) = rest.trim_start().strip_prefix("include") else {
            return false;
        };
        let rest = rest.trim();
        rest.len() >= 2 && rest.get(1..rest.len() - 1) == Some(header)
    })
}
