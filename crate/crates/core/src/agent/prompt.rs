use serde::{Deserialize, Serialize};

use super::feedback::format_feedback;
use crate::model::{text_digest, ConstraintLevel, Diagnostics, SourceUnit};

const SYSTEM_TEMPLATE: &str = include_str!("../../templates/system.txt");
const ROLE_L1: &str = include_str!("../../templates/role_l1.txt");
const ROLE_L2: &str = include_str!("../../templates/role_l2.txt");
const ROLE_L3: &str = include_str!("../../templates/role_l3.txt");

/// The four prompt parts, in order. Built only from the current source and
/// its current diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub constraint_status: String,
    pub error_feedback: String,
    pub current_code: String,
}

impl PromptBundle {
    /// Everything except the system instruction, as one user message.
    pub fn user_message(&self) -> String {
        format!(
            "## Constraint status\n{}\n\n## Error feedback\n{}\n\n## Current code\n{}",
            self.constraint_status.trim_end(),
            self.error_feedback.trim_end(),
            self.current_code
        )
    }

    /// Full rendering, used for golden files and logs.
    pub fn render(&self) -> String {
        format!("## System instruction\n{}\n\n{}", self.system_instruction.trim_end(), self.user_message())
    }

    pub fn parts(&self) -> [&str; 4] {
        [
            &self.system_instruction,
            &self.constraint_status,
            &self.error_feedback,
            &self.current_code,
        ]
    }
}

/// System instruction for the agent specialized to `level`.
pub fn system_instruction(level: ConstraintLevel) -> String {
    let role = match level {
        ConstraintLevel::L1 => ROLE_L1,
        ConstraintLevel::L2 => ROLE_L2,
        ConstraintLevel::L3 | ConstraintLevel::Pass => ROLE_L3,
    };
    SYSTEM_TEMPLATE.replace("{role}", role.trim_end()).trim_end().to_owned()
}

/// Digest over every prompt template; changes when any wording changes.
pub fn template_digest() -> String {
    text_digest(&[SYSTEM_TEMPLATE, ROLE_L1, ROLE_L2, ROLE_L3, super::feedback::CHECKLIST].concat())
}

pub fn constraint_status(failed: ConstraintLevel, passed: &[ConstraintLevel]) -> String {
    ConstraintLevel::CHECKS
        .iter()
        .map(|&level| {
            let state = if passed.contains(&level) {
                "passed"
            } else if level == failed {
                "FAILED"
            } else {
                "not reached"
            };
            format!("- {level} ({}): {state}", level.describe())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_prompt(source: &SourceUnit, diag: &Diagnostics, passed_levels: &[ConstraintLevel]) -> PromptBundle {
    PromptBundle {
        system_instruction: system_instruction(diag.level),
        constraint_status: constraint_status(diag.level, passed_levels),
        error_feedback: format_feedback(diag),
        current_code: source.code().to_owned(),
    }
}
