//! Question records and the line-delimited question file.
//!
//! One JSON object per line with the fields `id`, `subject`, `body`,
//! `category` and an optional `label` (`FACTUAL`, `OPINION`, `SOCIALIZING`).
//! Blank lines are skipped. Record order is significant and preserved.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Factual = 0,
    Opinion = 1,
    Socializing = 2,
}

impl Label {
    pub const ALL: [Label; N_CLASSES] = [Label::Factual, Label::Opinion, Label::Socializing];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Factual => "FACTUAL",
            Label::Opinion => "OPINION",
            Label::Socializing => "SOCIALIZING",
        }
    }

    /// Exact uppercase name only.
    pub fn from_name(s: &str) -> Option<Label> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }

    /// Index of the largest score; ties go to the lowest class index.
    pub fn argmax(scores: &[f64; N_CLASSES]) -> Label {
        let mut best = 0;
        for i in 1..N_CLASSES {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: String,
    pub subject: String,
    pub body: String,
    pub category: String,
    pub label: Option<Label>,
}

impl Question {
    /// Subject and body joined by one space; an empty side is dropped.
    pub fn concat_text(&self) -> String {
        concat_text(&self.subject, &self.body)
    }
}

pub fn concat_text(subject: &str, body: &str) -> String {
    match (subject.is_empty(), body.is_empty()) {
        (true, _) => body.to_string(),
        (_, true) => subject.to_string(),
        _ => format!("{subject} {body}"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub name: String,
    pub questions: Vec<Question>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    subject: String,
    #[serde(default)]
    body: String,
    category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, questions: Vec<Question>) -> Result<Self> {
        let mut seen = HashSet::new();
        for q in &questions {
            if !seen.insert(q.id.as_str()) {
                return Err(Error::DuplicateId(q.id.clone()));
            }
        }
        Ok(Self { name: name.into(), questions })
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Question> {
        self.questions.iter()
    }

    /// Gold labels in dataset order; fails on the first unlabeled question.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.questions
            .iter()
            .map(|q| q.label.ok_or_else(|| Error::invalid(format!("question `{}` has no label", q.id))))
            .collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.questions.iter().map(|q| q.id.as_str()).collect()
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut questions = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            if rec.id.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty id".into() });
            }
            if rec.subject.is_empty() && rec.body.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "subject and body are both empty".into() });
            }
            let label = match rec.label {
                None => None,
                Some(s) => Some(
                    Label::from_name(&s).ok_or(Error::UnknownLabel { line: line_no, label: s })?,
                ),
            };
            if !seen.insert(rec.id.clone()) {
                return Err(Error::DuplicateId(rec.id));
            }
            questions.push(Question {
                id: rec.id,
                subject: rec.subject,
                body: rec.body,
                category: rec.category,
                label,
            });
        }
        Ok(Self { name: name.to_string(), questions })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for q in &self.questions {
            let rec = Record {
                id: q.id.clone(),
                subject: q.subject.clone(),
                body: q.body.clone(),
                category: q.category.clone(),
                label: q.label.map(|l| l.name().to_string()),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_questions(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::parse(&name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labeled_and_unlabeled_records() {
        let text = r#"{"id":"q1","subject":"Visa","body":"How long?","category":"Visas and permits","label":"FACTUAL"}
{"id":"q2","subject":"Hi","body":"","category":"Socialising"}
"#;
        let ds = Dataset::parse("t", text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.questions[0].label, Some(Label::Factual));
        assert_eq!(ds.questions[0].category, "Visas and permits");
        assert_eq!(ds.questions[1].label, None);
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = "{\"id\":\"q1\",\"subject\":\"a\",\"body\":\"b\",\"category\":\"c\"}\n\
                    {\"id\":\"q1\",\"subject\":\"x\",\"body\":\"y\",\"category\":\"c\"}\n";
        match Dataset::parse("t", text) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "q1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_reports_line() {
        let text = "{\"id\":\"q1\",\"subject\":\"a\",\"body\":\"b\",\"category\":\"c\"}\n\
                    {\"id\":\"q2\",\"subject\":\"a\",\"body\":\"b\",\"category\":\"c\",\"label\":\"factual\"}\n";
        match Dataset::parse("t", text) {
            Err(Error::UnknownLabel { line, label }) => {
                assert_eq!(line, 2);
                assert_eq!(label, "factual");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line() {
        let text = "{\"id\":\"q1\",\"subject\":\"a\",\"body\":\"b\",\"category\":\"c\"}\nnot json\n";
        assert!(matches!(Dataset::parse("t", text), Err(Error::Parse { line: 2, .. })));
        let both_empty = "{\"id\":\"q1\",\"subject\":\"\",\"body\":\"\",\"category\":\"c\"}\n";
        assert!(matches!(Dataset::parse("t", both_empty), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn concat_rules() {
        assert_eq!(concat_text("Visa", "How long?"), "Visa How long?");
        assert_eq!(concat_text("", "hello"), "hello");
        assert_eq!(concat_text("hi", ""), "hi");
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(Label::argmax(&[0.2, 0.4, 0.4]), Label::Opinion);
        assert_eq!(Label::argmax(&[1.0, 1.0, 1.0]), Label::Factual);
    }

    #[test]
    fn jsonl_round_trip() {
        let text = "{\"id\":\"q1\",\"subject\":\"a \\\"b\\\"\",\"body\":\"c\",\"category\":\"d\",\"label\":\"OPINION\"}\n";
        let ds = Dataset::parse("t", text).unwrap();
        let again = Dataset::parse("t", &ds.to_jsonl()).unwrap();
        assert_eq!(ds.questions, again.questions);
    }
}
