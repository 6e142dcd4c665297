use crate::error::{Error, Result};
use regex::Regex;
use serde_json::{Map, Value};
use std::sync::OnceLock;

const BLOCK_LABELS: &[&str] = &["patch", "patched_function", "new_declarations", "replaced_declarations"];
const LIST_LABELS: &[&str] = &["rbac_elements", "elements", "checks"];
const BOOL_LABELS: &[&str] = &["vulnerable", "is_new"];
const TEXT_LABELS: &[&str] = &["role", "permission", "reason", "verdict", "category", "mechanism"];

/// Recovers a JSON object from model output. Tries, in order: the whole
/// text as JSON, fenced code blocks, balanced `{...}` blocks (each with
/// light repairs), and finally `label: value` lines.
pub fn parse_structured(text: &str) -> Result<Value> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Unparseable("empty response".into()));
    }
    if let Some(v) = object(t) {
        return Ok(v);
    }
    for inner in fenced_blocks(t) {
        if let Some(v) = repaired_object(&inner) {
            return Ok(v);
        }
    }
    for block in brace_blocks(t) {
        if let Some(v) = repaired_object(block) {
            return Ok(v);
        }
    }
    if let Some(v) = labeled_lines(t) {
        return Ok(v);
    }
    Err(Error::Unparseable(preview(t)))
}

fn preview(t: &str) -> String {
    let mut s: String = t.chars().take(80).collect();
    if s.len() < t.len() {
        s.push_str("...");
    }
    s
}

fn object(s: &str) -> Option<Value> {
    match serde_json::from_str::<Value>(s.trim()) {
        Ok(v @ Value::Object(_)) => Some(v),
        _ => None,
    }
}

fn repaired_object(s: &str) -> Option<Value> {
    let mut cur = s.trim().to_string();
    if let Some(v) = object(&cur) {
        return Some(v);
    }
    let steps: [fn(&str) -> String; 5] = [
        escape_controls_in_strings,
        drop_trailing_commas,
        quote_bare_keys,
        python_literals,
        single_to_double_quotes,
    ];
    for step in steps {
        cur = step(&cur);
        if let Some(v) = object(&cur) {
            return Some(v);
        }
    }
    None
}

fn fenced_blocks(t: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_+-]*[ \t]*\n?(.*?)```").unwrap());
    re.captures_iter(t).map(|c| c[1].to_string()).collect()
}

/// Every balanced `{...}` slice, outermost first, honouring double-quoted
/// strings.
fn brace_blocks(t: &str) -> Vec<&str> {
    let bytes = t.as_bytes();
    let mut out = Vec::new();
    for start in 0..bytes.len() {
        if bytes[start] != b'{' {
            continue;
        }
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        out.push(&t[start..=i]);
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn escape_controls_in_strings(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut escaped = false;
    for c in s.chars() {
        if in_str {
            if escaped {
                escaped = false;
                out.push(c);
                continue;
            }
            match c {
                '\\' => {
                    escaped = true;
                    out.push(c);
                }
                '"' => {
                    in_str = false;
                    out.push(c);
                }
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                _ => out.push(c),
            }
        } else {
            if c == '"' {
                in_str = true;
            }
            out.push(c);
        }
    }
    out
}

fn drop_trailing_commas(s: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r",(\s*[}\]])").unwrap());
    re.replace_all(s, "$1").into_owned()
}

fn quote_bare_keys(s: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r#"([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)\s*:"#).unwrap());
    re.replace_all(s, "$1\"$2\":").into_owned()
}

fn python_literals(s: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"([:\[,]\s*)(True|False|None)\b").unwrap());
    re.replace_all(s, |c: &regex::Captures| {
        let lit = match &c[2] {
            "True" => "true",
            "False" => "false",
            _ => "null",
        };
        format!("{}{lit}", &c[1])
    })
    .into_owned()
}

fn single_to_double_quotes(s: &str) -> String {
    if s.contains('"') {
        return s.to_string();
    }
    s.replace('\'', "\"")
}

fn label_line(line: &str) -> Option<(String, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^\s*(?:[-*]\s+)?(?:\*\*|__)?([A-Za-z][A-Za-z _-]*?)(?:\*\*|__)?\s*[:=]\s*(?:\*\*|__)?\s*(.*)$")
            .unwrap()
    });
    let c = re.captures(line)?;
    let key = c[1].trim().to_ascii_lowercase().replace([' ', '-'], "_");
    let known = BLOCK_LABELS.contains(&key.as_str())
        || LIST_LABELS.contains(&key.as_str())
        || BOOL_LABELS.contains(&key.as_str())
        || TEXT_LABELS.contains(&key.as_str());
    known.then(|| (key, c[2].to_string()))
}

fn clean_scalar(s: &str) -> String {
    s.trim()
        .trim_end_matches(',')
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*')
        .trim()
        .to_string()
}

fn strip_fences(block: &str) -> String {
    let lines: Vec<&str> = block
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    let text = lines.join("\n");
    text.trim_matches('\n').to_string()
}

fn labeled_lines(t: &str) -> Option<Value> {
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for line in t.lines() {
        if let Some((key, rest)) = label_line(line) {
            fields.push((key, vec![rest]));
        } else if let Some((_, lines)) = fields.last_mut() {
            lines.push(line.to_string());
        }
    }
    let mut map = Map::new();
    for (key, lines) in fields {
        let value = if BLOCK_LABELS.contains(&key.as_str()) {
            let text = strip_fences(&lines.join("\n"));
            if text.trim().is_empty() {
                continue;
            }
            Value::String(text)
        } else {
            let first = lines
                .iter()
                .map(|l| clean_scalar(l))
                .find(|l| !l.is_empty());
            let Some(first) = first else { continue };
            if BOOL_LABELS.contains(&key.as_str()) {
                match first.to_ascii_lowercase().as_str() {
                    "true" | "yes" => Value::Bool(true),
                    "false" | "no" => Value::Bool(false),
                    _ => Value::String(first),
                }
            } else if LIST_LABELS.contains(&key.as_str()) {
                let items: Vec<Value> = first
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(clean_scalar)
                    .filter(|s| !s.is_empty())
                    .map(Value::String)
                    .collect();
                Value::Array(items)
            } else {
                Value::String(first)
            }
        };
        map.entry(key).or_insert(value);
    }
    (!map.is_empty()).then_some(Value::Object(map))
}
