//! Time-stamped Annotation Lists (TAL), the EDF+ annotation encoding.
//!
//! Each TAL is `+onset[\x15duration]\x14text\x14[text\x14...]\x00`. A data
//! record of an annotation signal holds one or more TALs followed by zero
//! padding; the first TAL of every record is a time-keeping entry with no text.

use super::EdfError;

const ONSET_END: u8 = 0x15;
const FIELD_END: u8 = 0x14;

#[derive(Debug, Clone, PartialEq)]
pub struct TalEntry {
    pub onset: f64,
    pub duration: Option<f64>,
    pub texts: Vec<String>,
}

fn parse_signed(s: &str, record: usize, what: &str) -> Result<f64, EdfError> {
    let err = || EdfError::Tal {
        record,
        reason: format!("invalid {what} {s:?}"),
    };
    let first = s.chars().next().ok_or_else(err)?;
    if first != '+' && first != '-' {
        return Err(err());
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(err)
}

/// Decodes the TALs in one annotation data record.
pub fn decode_record(bytes: &[u8], record: usize) -> Result<Vec<TalEntry>, EdfError> {
    let mut entries = Vec::new();
    for tal in bytes.split(|&b| b == 0).filter(|t| !t.is_empty()) {
        if tal.last() != Some(&FIELD_END) {
            return Err(EdfError::Tal {
                record,
                reason: "TAL not terminated by 0x14".into(),
            });
        }
        let mut parts = tal[..tal.len() - 1].split(|&b| b == FIELD_END);
        let head = parts.next().unwrap_or_default();
        let head = std::str::from_utf8(head).map_err(|_| EdfError::Tal {
            record,
            reason: "onset is not ASCII".into(),
        })?;
        let (onset, duration) = match head.split_once(ONSET_END as char) {
            Some((o, d)) => {
                let d: f64 = d.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(|| {
                    EdfError::Tal {
                        record,
                        reason: format!("invalid duration {d:?}"),
                    }
                })?;
                (parse_signed(o, record, "onset")?, Some(d))
            }
            None => (parse_signed(head, record, "onset")?, None),
        };
        let texts = parts
            .filter(|p| !p.is_empty())
            .map(|p| String::from_utf8_lossy(p).into_owned())
            .collect();
        entries.push(TalEntry { onset, duration, texts });
    }
    Ok(entries)
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("{v}")
    } else {
        format!("+{v}")
    }
}

/// Encodes TALs into one record of `len` bytes (zero padded).
///
/// Returns `None` when the entries do not fit.
pub fn encode_record(entries: &[TalEntry], len: usize) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(len);
    for e in entries {
        out.extend_from_slice(signed(e.onset).as_bytes());
        if let Some(d) = e.duration {
            out.push(ONSET_END);
            out.extend_from_slice(format!("{d}").as_bytes());
        }
        out.push(FIELD_END);
        if e.texts.is_empty() {
            out.push(FIELD_END);
        }
        for t in &e.texts {
            out.extend_from_slice(t.as_bytes());
            out.push(FIELD_END);
        }
        out.push(0);
    }
    if out.len() > len {
        return None;
    }
    out.resize(len, 0);
    Some(out)
}
