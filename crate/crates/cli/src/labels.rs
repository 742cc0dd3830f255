//! Label files: one `id<TAB>LABEL` line per question.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use qclass::{Error, Label, Result};

pub fn to_text(ids: &[String], labels: &[Label]) -> String {
    let mut s = String::new();
    for (id, l) in ids.iter().zip(labels) {
        s.push_str(id);
        s.push('\t');
        s.push_str(l.name());
        s.push('\n');
    }
    s
}

pub fn write(path: &Path, ids: &[String], labels: &[Label]) -> Result<()> {
    fs::write(path, to_text(ids, labels)).map_err(|e| Error::io(path, e))
}

pub fn parse(text: &str) -> Result<Vec<(String, Label)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `id<TAB>LABEL`".into() })?;
        let label = Label::from_name(label.trim())
            .ok_or_else(|| Error::UnknownLabel { line: i + 1, label: label.trim().to_string() })?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        out.push((id.to_string(), label));
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<(String, Label)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}
