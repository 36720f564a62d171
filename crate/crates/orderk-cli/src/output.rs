//! Stdout renderings: human tables, CSV, and the flat key/value form used
//! for nested reports.

use clap::ValueEnum;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Aligned table for terminals.
    Human,
    /// The same bytes as `report.json`.
    Json,
    /// Comma-separated rows.
    Csv,
}

/// 17 significant digits: enough to reconstruct any double exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with a trailing newline, the byte-exact form every report
/// file uses.
pub fn json_bytes<T: serde::Serialize>(doc: &T) -> anyhow::Result<Vec<u8>> {
    let mut body = serde_json::to_vec_pretty(doc)?;
    body.push(b'\n');
    Ok(body)
}

/// CSV cell for free-form text; the writers here never quote, so the
/// delimiter itself must not appear inside a cell.
pub fn csv_text(s: &str) -> String {
    s.replace(',', ";")
}

/// Renders one serde_json number, keeping integers integral and doubles at
/// full precision.
fn fmt_number(n: &serde_json::Number) -> String {
    if let Some(v) = n.as_u64() {
        v.to_string()
    } else if let Some(v) = n.as_i64() {
        v.to_string()
    } else {
        fmt_f(n.as_f64().unwrap_or(f64::NAN))
    }
}

fn flatten_into(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, child) in map {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten_into(&path, child, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (idx, child) in items.iter().enumerate() {
                flatten_into(&format!("{prefix}.{idx}"), child, out);
            }
        }
        serde_json::Value::Null => out.push((prefix.to_string(), String::new())),
        serde_json::Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        serde_json::Value::Number(n) => out.push((prefix.to_string(), fmt_number(n))),
        serde_json::Value::String(s) => out.push((prefix.to_string(), csv_text(s))),
    }
}

/// Leaf paths of a JSON document as `key,value` CSV rows, depth first in
/// field order.
pub fn key_value_csv(value: &serde_json::Value) -> String {
    let mut rows = Vec::new();
    flatten_into("", value, &mut rows);
    let mut out = String::from("key,value\n");
    for (key, val) in rows {
        out.push_str(&key);
        out.push(',');
        out.push_str(&val);
        out.push('\n');
    }
    out
}

/// Left-aligned table with a header row, for human output.
pub fn human_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (k, cell) in row.iter().enumerate() {
            widths[k] = widths[k].max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |out: &mut String, cells: &[String]| {
        for (k, cell) in cells.iter().enumerate() {
            if k > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            for _ in cell.len()..widths[k] {
                out.push(' ');
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    render(&mut out, &header_cells);
    for row in rows {
        render(&mut out, row);
    }
    out
}
