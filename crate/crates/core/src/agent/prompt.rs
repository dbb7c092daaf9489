use serde_json::Value;

use crate::registry::ToolRegistry;

const SYSTEM_PROMPT_V1: &str = include_str!("../../prompts/system_v1.txt");

/// Fixed token estimate: one token per four characters.
pub const CHARS_PER_TOKEN: usize = 4;

/// The system turn. Tool documentation travels separately as declarations,
/// so the prompt is the same for every registry.
pub fn build_system_prompt(_registry: &ToolRegistry) -> String {
    SYSTEM_PROMPT_V1.trim_end().to_string()
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(CHARS_PER_TOKEN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextReport {
    pub estimated_tokens: usize,
    pub budget_tokens: usize,
}

impl ContextReport {
    pub fn fits(&self) -> bool {
        self.estimated_tokens < self.budget_tokens
    }
}

/// Estimated size of the system prompt plus serialized declarations.
pub fn context_report(prompt: &str, declarations: &[Value], budget_tokens: usize) -> ContextReport {
    let decl_tokens: usize = declarations.iter().map(|d| estimate_tokens(&d.to_string())).sum();
    ContextReport {
        estimated_tokens: estimate_tokens(prompt) + decl_tokens,
        budget_tokens,
    }
}
