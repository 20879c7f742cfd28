use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no JSON object found in model output")]
    NoObject { raw: String },
    #[error("invalid JSON in model output: {detail}")]
    Invalid { raw: String, detail: String },
}

impl ExtractError {
    pub fn raw(&self) -> &str {
        match self {
            ExtractError::NoObject { raw } | ExtractError::Invalid { raw, .. } => raw,
        }
    }
}

/// Pulls the first top-level JSON object out of model output, skipping
/// surrounding prose and markdown code fences.
pub fn extract_json(raw: &str) -> Result<Value, ExtractError> {
    let region = fenced_body(raw).filter(|body| body.contains('{')).unwrap_or(raw);
    let start = region.find('{').ok_or_else(|| ExtractError::NoObject { raw: raw.to_string() })?;
    let candidate = &region[start..];
    let end = balanced_end(candidate).ok_or_else(|| ExtractError::Invalid {
        raw: raw.to_string(),
        detail: "unbalanced braces".into(),
    })?;
    serde_json::from_str(&candidate[..end])
        .map_err(|e| ExtractError::Invalid { raw: raw.to_string(), detail: e.to_string() })
}

/// Contents of the first ``` fence, without its language tag.
fn fenced_body(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let close = body.find("```").unwrap_or(body.len());
    Some(&body[..close])
}

/// Byte offset just past the brace closing the object that starts at 0.
fn balanced_end(text: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
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
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn strips_code_fence() {
        assert_eq!(extract_json("```json\n{\"a\":1}\n```").unwrap(), json!({"a": 1}));
    }

    #[test]
    fn strips_prose() {
        assert_eq!(
            extract_json("Here is the result: {\"a\": {\"b\": 2}} Hope this helps").unwrap(),
            json!({"a": {"b": 2}})
        );
    }

    #[test]
    fn invalid_object() {
        let err = extract_json("{\"a\": }").unwrap_err();
        assert!(matches!(err, ExtractError::Invalid { .. }));
        assert_eq!(err.raw(), "{\"a\": }");
    }

    #[test]
    fn missing_and_unbalanced() {
        assert!(matches!(extract_json("no json here"), Err(ExtractError::NoObject { .. })));
        assert!(matches!(extract_json("{\"a\": {\"b\": 1}"), Err(ExtractError::Invalid { .. })));
    }

    #[test]
    fn braces_inside_strings() {
        assert_eq!(extract_json("x {\"a\": \"}{\\\"\"} y").unwrap(), json!({"a": "}{\""}));
    }

    #[test]
    fn first_object_wins() {
        assert_eq!(extract_json("{\"a\":1} and {\"b\":2}").unwrap(), json!({"a": 1}));
    }

    #[test]
    fn prose_fence_without_json_falls_back() {
        assert_eq!(extract_json("```\nnothing\n``` then {\"a\":1}").unwrap(), json!({"a": 1}));
    }
}
