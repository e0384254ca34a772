use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tal, EdfError, Recording};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelScope {
    All,
    Channel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Embedded,
    External,
}

/// One annotated interval, seconds from recording start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub onset: f64,
    pub duration: f64,
    pub label: String,
    pub channel_scope: ChannelScope,
    pub source: LabelSource,
}

impl AnnotationEvent {
    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

/// Merged events plus any rows that were rejected or clipped.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    pub events: Vec<AnnotationEvent>,
    pub diagnostics: Vec<String>,
}

/// Collects embedded EDF+ annotations and, if given, rows from an external
/// CSV file (`channel,start_time,stop_time,label,confidence` or
/// `start,stop,label`). The result is sorted by onset and deduplicated on
/// `(onset, duration, label)`.
pub fn extract_annotations(rec: &Recording, external: Option<&Path>) -> Result<AnnotationSet, EdfError> {
    let mut set = AnnotationSet::default();
    for ch in rec.channels.iter().filter(|c| c.header.is_annotation()) {
        let digital = ch.digital_samples();
        let per_record = ch.header.samples_per_record;
        for r in 0..rec.n_records {
            let bytes: Vec<u8> = digital[r * per_record..(r + 1) * per_record]
                .iter()
                .flat_map(|&d| (d as i16).to_le_bytes())
                .collect();
            for entry in tal::decode_record(&bytes, r)? {
                for text in entry.texts {
                    set.events.push(AnnotationEvent {
                        onset: entry.onset,
                        duration: entry.duration.unwrap_or(0.0),
                        label: text,
                        channel_scope: ChannelScope::All,
                        source: LabelSource::Embedded,
                    });
                }
            }
        }
    }
    if let Some(path) = external {
        read_csv(path, &mut set)?;
    }
    clip_to_recording(&mut set, rec.duration());
    merge(&mut set.events);
    Ok(set)
}

#[derive(Clone, Copy)]
enum CsvLayout {
    /// TUSZ `csv_bi`: channel,start_time,stop_time,label,confidence
    Tusz { channel: usize, start: usize, stop: usize, label: usize },
    /// start,stop,label
    Generic { start: usize, stop: usize, label: usize },
}

fn detect_layout(header: &csv::StringRecord) -> Option<CsvLayout> {
    let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |n: &str| names.iter().position(|h| h == n);
    if let (Some(channel), Some(start), Some(stop), Some(label)) =
        (find("channel"), find("start_time"), find("stop_time"), find("label"))
    {
        return Some(CsvLayout::Tusz { channel, start, stop, label });
    }
    if let (Some(start), Some(stop), Some(label)) = (find("start"), find("stop"), find("label")) {
        return Some(CsvLayout::Generic { start, stop, label });
    }
    None
}

fn read_csv(path: &Path, set: &mut AnnotationSet) -> Result<(), EdfError> {
    let file_err = |reason: String| EdfError::AnnotationFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| file_err(e.to_string()))?;
    let header = reader.headers().map_err(|e| file_err(e.to_string()))?.clone();
    let layout = detect_layout(&header).ok_or_else(|| {
        file_err(format!(
            "unrecognised header {:?}; expected channel,start_time,stop_time,label,confidence or start,stop,label",
            header.iter().collect::<Vec<_>>()
        ))
    })?;
    for (i, row) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header line.
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                set.diagnostics.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let (scope, start, stop, label) = match layout {
            CsvLayout::Tusz { channel, start, stop, label } => {
                let ch = row.get(channel).unwrap_or("");
                let scope = if ch.eq_ignore_ascii_case("TERM") || ch.is_empty() {
                    ChannelScope::All
                } else {
                    ChannelScope::Channel(ch.to_string())
                };
                (scope, row.get(start), row.get(stop), row.get(label))
            }
            CsvLayout::Generic { start, stop, label } => {
                (ChannelScope::All, row.get(start), row.get(stop), row.get(label))
            }
        };
        let parsed = start
            .and_then(|s| s.parse::<f64>().ok())
            .zip(stop.and_then(|s| s.parse::<f64>().ok()))
            .filter(|(a, b)| a.is_finite() && b.is_finite());
        let Some((start, stop)) = parsed else {
            set.diagnostics.push(format!("row {line}: unparseable start/stop"));
            continue;
        };
        if stop < start {
            set.diagnostics
                .push(format!("row {line}: stop {stop} < start {start}, row rejected"));
            continue;
        }
        if start < 0.0 {
            set.diagnostics.push(format!("row {line}: negative start {start}, row rejected"));
            continue;
        }
        set.events.push(AnnotationEvent {
            onset: start,
            duration: stop - start,
            label: label.unwrap_or("").to_string(),
            channel_scope: scope,
            source: LabelSource::External,
        });
    }
    Ok(())
}

fn clip_to_recording(set: &mut AnnotationSet, duration: f64) {
    let mut kept = Vec::with_capacity(set.events.len());
    for mut e in set.events.drain(..) {
        if e.onset < 0.0 || e.onset >= duration {
            set.diagnostics.push(format!(
                "event {:?} at {} s lies outside the {duration} s recording, dropped",
                e.label, e.onset
            ));
            continue;
        }
        if e.end() > duration {
            set.diagnostics.push(format!(
                "event {:?} at {} s clipped to the recording end",
                e.label, e.onset
            ));
            e.duration = duration - e.onset;
        }
        kept.push(e);
    }
    set.events = kept;
}

fn merge(events: &mut Vec<AnnotationEvent>) {
    events.sort_by(|a, b| {
        a.onset
            .total_cmp(&b.onset)
            .then(a.duration.total_cmp(&b.duration))
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut out: Vec<AnnotationEvent> = Vec::with_capacity(events.len());
    for e in events.drain(..) {
        match out.last_mut() {
            Some(last) if last.onset == e.onset && last.duration == e.duration && last.label == e.label => {
                if last.channel_scope != e.channel_scope {
                    last.channel_scope = ChannelScope::All;
                }
            }
            _ => out.push(e),
        }
    }
    *events = out;
}
