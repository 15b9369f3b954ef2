use std::path::Path;

use super::ClipWindow;
use crate::error::{Error, Result};

/// One transcript line, optionally stamped with `[start_s,end_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptLine {
    pub span: Option<(f64, f64)>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
}

fn parse_stamp(line: &str) -> Option<((f64, f64), &str)> {
    let rest = line.strip_prefix('[')?;
    let close = rest.find(']')?;
    let (a, b) = rest[..close].split_once(',')?;
    let s: f64 = a.trim().parse().ok()?;
    let e: f64 = b.trim().parse().ok()?;
    Some(((s, e), rest[close + 1..].trim()))
}

impl Transcript {
    /// Parses UTF-8 text, one utterance per line. Blank lines are skipped;
    /// a line that opens with `[` but has no valid stamp is kept as text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            match parse_stamp(line) {
                Some(((s, e), rest)) => {
                    if !(s.is_finite() && e.is_finite() && s <= e) {
                        return Err(Error::Format(format!("transcript line {}: bad stamp [{s},{e}]", i + 1)));
                    }
                    lines.push(TranscriptLine {
                        span: Some((s, e)),
                        text: rest.to_string(),
                    });
                }
                None => lines.push(TranscriptLine {
                    span: None,
                    text: line.to_string(),
                }),
            }
        }
        Ok(Self { lines })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Text of the lines overlapping `w`; unstamped lines belong to every window.
    pub fn text_for(&self, w: &ClipWindow) -> String {
        self.lines
            .iter()
            .filter(|l| match l.span {
                Some((s, e)) => w.overlaps(s, e) || (s == e && s >= w.start_s && s < w.end_s),
                None => true,
            })
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}
