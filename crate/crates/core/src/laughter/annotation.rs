use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::span::TimeSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Laughter,
    Music,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn new(start_s: f64, end_s: f64, kind: EventKind) -> Self {
        Self { start_s, end_s, kind }
    }

    pub fn span(&self) -> TimeSpan {
        TimeSpan {
            start_s: self.start_s,
            end_s: self.end_s,
        }
    }
}

/// Labeled time spans for one media file. Also the ingest format for
/// manually annotated laughter time codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaughterAnnotation {
    pub media_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub events: Vec<Event>,
}

impl LaughterAnnotation {
    pub fn new(media_id: impl Into<String>, mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
        Self {
            media_id: media_id.into(),
            duration_s: None,
            events,
        }
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = Some(duration_s);
        self
    }

    pub fn laughter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Laughter)
    }

    pub fn laughter_spans(&self) -> Vec<TimeSpan> {
        self.laughter().map(Event::span).collect()
    }

    /// Checks ordering and the no-overlap rule for laughter events.
    pub fn validate(&self) -> Result<()> {
        for e in &self.events {
            TimeSpan::new(e.start_s, e.end_s)?;
        }
        if self.events.windows(2).any(|w| w[0].start_s > w[1].start_s) {
            return Err(Error::Format(format!("{}: events not sorted", self.media_id)));
        }
        let laughs: Vec<_> = self.laughter().collect();
        if laughs.windows(2).any(|w| w[1].start_s < w[0].end_s) {
            return Err(Error::Format(format!(
                "{}: overlapping laughter events",
                self.media_id
            )));
        }
        Ok(())
    }
}

/// Reads a file holding either one annotation object or a list of them.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<LaughterAnnotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(LaughterAnnotation),
        Many(Vec<LaughterAnnotation>),
    }
    let anns = match serde_json::from_str::<OneOrMany>(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
    {
        OneOrMany::One(a) => vec![a],
        OneOrMany::Many(v) => v,
    };
    let anns: Vec<_> = anns
        .into_iter()
        .map(|a| LaughterAnnotation::new(a.media_id.clone(), a.events).with_duration_opt(a.duration_s))
        .collect();
    for a in &anns {
        a.validate()?;
    }
    Ok(anns)
}

impl LaughterAnnotation {
    fn with_duration_opt(mut self, d: Option<f64>) -> Self {
        self.duration_s = d;
        self
    }
}

pub fn write_annotation(path: impl AsRef<Path>, ann: &LaughterAnnotation) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(ann)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
