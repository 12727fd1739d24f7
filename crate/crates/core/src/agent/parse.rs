//! Extraction and validation of the structured daily reply.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, ActionSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub thoughts: String,
    pub action: Action,
    pub reflection: String,
    pub journal: String,
    pub raw: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResponseError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("action {action} is not available today (options: {feasible})")]
    InfeasibleAction { action: Action, feasible: ActionSet },
}

#[derive(Deserialize)]
struct Fields {
    thoughts: Option<String>,
    action: Option<String>,
    reflection: Option<String>,
    journal: Option<String>,
}

/// Byte range of the first balanced top-level `{...}` in `raw`, skipping braces
/// inside JSON strings.
fn first_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in raw[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&raw[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn required(value: Option<String>, name: &str) -> Result<String, ResponseError> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        Some(_) => Err(ResponseError::Parse(format!("field `{name}` is empty"))),
        None => Err(ResponseError::Parse(format!("missing field `{name}`"))),
    }
}

pub fn parse_response(raw: &str, feasible: ActionSet) -> Result<AgentResponse, ResponseError> {
    let object = first_object(raw).ok_or_else(|| ResponseError::Parse("no JSON object found".into()))?;
    let fields: Fields = serde_json::from_str(object).map_err(|e| ResponseError::Parse(format!("malformed JSON: {e}")))?;
    let thoughts = required(fields.thoughts, "thoughts")?;
    let action_text = required(fields.action, "action")?;
    let reflection = required(fields.reflection, "reflection")?;
    let journal = required(fields.journal, "journal")?;
    let action: Action = action_text
        .parse()
        .map_err(|_| ResponseError::Parse(format!("unknown action {action_text:?}")))?;
    if !feasible.contains(action) {
        return Err(ResponseError::InfeasibleAction { action, feasible });
    }
    Ok(AgentResponse { thoughts, action, reflection, journal, raw: raw.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_trading() -> ActionSet {
        [Action::Charge, Action::Discharge, Action::Hold].into_iter().collect()
    }

    #[test]
    fn happy_path_with_surrounding_prose() {
        let raw = r#"Sure! {"thoughts":"high price {today}","action":"Discharge","reflection":"good","journal":"sold"} bye"#;
        let r = parse_response(raw, all_trading()).unwrap();
        assert_eq!(r.action, Action::Discharge);
        assert_eq!(r.thoughts, "high price {today}");
        assert_eq!(r.raw, raw);
    }

    #[test]
    fn nothing_and_hold_both_map_to_hold() {
        for token in ["nothing", "HOLD"] {
            let raw = format!(r#"{{"thoughts":"t","action":"{token}","reflection":"r","journal":"j"}}"#);
            assert_eq!(parse_response(&raw, all_trading()).unwrap().action, Action::Hold);
        }
    }

    #[test]
    fn prose_only_is_a_parse_error() {
        assert!(matches!(parse_response("I will charge today.", all_trading()), Err(ResponseError::Parse(_))));
    }

    #[test]
    fn missing_or_empty_fields_are_parse_errors() {
        let missing = r#"{"thoughts":"t","action":"charge","journal":"j"}"#;
        assert!(matches!(parse_response(missing, all_trading()), Err(ResponseError::Parse(m)) if m.contains("reflection")));
        let empty = r#"{"thoughts":" ","action":"charge","reflection":"r","journal":"j"}"#;
        assert!(matches!(parse_response(empty, all_trading()), Err(ResponseError::Parse(_))));
        let truncated = r#"{"thoughts":"t","action":"charge""#;
        assert!(matches!(parse_response(truncated, all_trading()), Err(ResponseError::Parse(_))));
        let unknown = r#"{"thoughts":"t","action":"sell","reflection":"r","journal":"j"}"#;
        assert!(matches!(parse_response(unknown, all_trading()), Err(ResponseError::Parse(_))));
    }

    #[test]
    fn infeasible_action_is_reported() {
        let full: ActionSet = [Action::Discharge, Action::Hold].into_iter().collect();
        let raw = r#"{"thoughts":"t","action":"charge","reflection":"r","journal":"j"}"#;
        assert_eq!(
            parse_response(raw, full),
            Err(ResponseError::InfeasibleAction { action: Action::Charge, feasible: full })
        );
    }
}
