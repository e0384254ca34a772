use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use super::{Channel, EdfError, Recording, SignalHeader};

const FIXED_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;

/// Reads and decodes an EDF or EDF+ file.
pub fn parse_edf(path: impl AsRef<Path>) -> Result<Recording, EdfError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| EdfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edf_bytes(&bytes)
}

struct Fields<'a> {
    bytes: &'a [u8],
}

impl<'a> Fields<'a> {
    fn text(&self, offset: usize, len: usize) -> Result<String, EdfError> {
        let raw = self.bytes.get(offset..offset + len).ok_or_else(|| EdfError::Header {
            offset,
            reason: format!("file ends before {len}-byte field"),
        })?;
        if let Some(pos) = raw.iter().position(|b| !(0x20..=0x7e).contains(b)) {
            return Err(EdfError::Header {
                offset: offset + pos,
                reason: "non-printable ASCII in header field".into(),
            });
        }
        Ok(String::from_utf8_lossy(raw).trim_end().to_string())
    }

    fn number<T: std::str::FromStr>(&self, offset: usize, len: usize, what: &str) -> Result<T, EdfError> {
        let s = self.text(offset, len)?;
        s.trim().parse::<T>().map_err(|_| EdfError::Header {
            offset,
            reason: format!("{what} is not a number: {s:?}"),
        })
    }
}

fn parse_start(date: &str, time: &str) -> Result<NaiveDateTime, EdfError> {
    let bad = |offset: usize, what: &str, s: &str| EdfError::Header {
        offset,
        reason: format!("invalid start {what} {s:?}"),
    };
    let parts = |s: &str| -> Option<(u32, u32, u32)> {
        let mut it = s.split('.').map(|p| p.parse::<u32>().ok());
        let out = (it.next()??, it.next()??, it.next()??);
        it.next().is_none().then_some(out)
    };
    let (dd, mm, yy) = parts(date).ok_or_else(|| bad(168, "date", date))?;
    // EDF clipping date convention: 85..99 → 19xx, otherwise 20xx.
    let year = if yy >= 85 { 1900 + yy } else { 2000 + yy } as i32;
    let d = NaiveDate::from_ymd_opt(year, mm, dd).ok_or_else(|| bad(168, "date", date))?;
    let (h, m, s) = parts(time).ok_or_else(|| bad(176, "time", time))?;
    let t = NaiveTime::from_hms_opt(h, m, s).ok_or_else(|| bad(176, "time", time))?;
    Ok(NaiveDateTime::new(d, t))
}

/// Decodes an in-memory EDF file.
pub fn parse_edf_bytes(bytes: &[u8]) -> Result<Recording, EdfError> {
    let f = Fields { bytes };
    if bytes.len() < FIXED_HEADER {
        return Err(EdfError::Header {
            offset: bytes.len(),
            reason: "file shorter than the 256-byte fixed header".into(),
        });
    }
    if &bytes[0..8] != b"0       " {
        return Err(EdfError::Header {
            offset: 0,
            reason: "version field is not \"0\" (not an EDF file)".into(),
        });
    }
    let patient_id = f.text(8, 80)?;
    let recording_id = f.text(88, 80)?;
    let start_time = parse_start(&f.text(168, 8)?, &f.text(176, 8)?)?;
    let header_bytes: usize = f.number(184, 8, "header byte count")?;
    let reserved = f.text(192, 44)?;
    let n_records_field: i64 = f.number(236, 8, "number of data records")?;
    let record_duration: f64 = f.number(244, 8, "data record duration")?;
    let ns: usize = f.number(252, 4, "number of signals")?;

    if ns == 0 {
        return Err(EdfError::Header { offset: 252, reason: "no signals".into() });
    }
    if header_bytes != FIXED_HEADER + ns * SIGNAL_HEADER {
        return Err(EdfError::Header {
            offset: 184,
            reason: format!(
                "header byte count {header_bytes} does not match {} for {ns} signals",
                FIXED_HEADER + ns * SIGNAL_HEADER
            ),
        });
    }
    if !(record_duration > 0.0) {
        return Err(EdfError::Header {
            offset: 244,
            reason: format!("data record duration must be positive, got {record_duration}"),
        });
    }
    if bytes.len() < header_bytes {
        return Err(EdfError::Header {
            offset: bytes.len(),
            reason: format!("file ends inside the {header_bytes}-byte header"),
        });
    }

    let base = FIXED_HEADER;
    let mut headers = Vec::with_capacity(ns);
    for i in 0..ns {
        let off = |field_start: usize, width: usize| base + ns * field_start + i * width;
        let h = SignalHeader {
            label: f.text(off(0, 16), 16)?,
            transducer: f.text(off(16, 80), 80)?,
            physical_dim: f.text(off(96, 8), 8)?,
            physical_min: f.number(off(104, 8), 8, "physical minimum")?,
            physical_max: f.number(off(112, 8), 8, "physical maximum")?,
            digital_min: f.number(off(120, 8), 8, "digital minimum")?,
            digital_max: f.number(off(128, 8), 8, "digital maximum")?,
            prefiltering: f.text(off(136, 80), 80)?,
            samples_per_record: f.number(off(216, 8), 8, "samples per record")?,
            reserved: f.text(off(224, 32), 32)?,
        };
        if h.digital_min >= h.digital_max {
            return Err(EdfError::Header {
                offset: off(120, 8),
                reason: format!("signal {i}: digital minimum {} ≥ maximum {}", h.digital_min, h.digital_max),
            });
        }
        if h.digital_min < i16::MIN as i32 || h.digital_max > i16::MAX as i32 {
            return Err(EdfError::Header {
                offset: off(120, 8),
                reason: format!("signal {i}: digital range exceeds 16 bits"),
            });
        }
        if h.physical_min == h.physical_max {
            return Err(EdfError::Header {
                offset: off(104, 8),
                reason: format!("signal {i}: physical minimum equals maximum"),
            });
        }
        if h.samples_per_record == 0 {
            return Err(EdfError::Header {
                offset: off(216, 8),
                reason: format!("signal {i}: zero samples per record"),
            });
        }
        headers.push(h);
    }

    let record_size: usize = headers.iter().map(|h| h.samples_per_record * 2).sum();
    let data = &bytes[header_bytes..];
    let available = data.len() / record_size;
    let expected = if n_records_field < 0 { available } else { n_records_field as usize };
    let complete = available.min(expected);

    let mut channels: Vec<Channel> = headers
        .into_iter()
        .map(|header| Channel {
            sample_rate: header.samples_per_record as f64 / record_duration,
            samples: Vec::with_capacity(header.samples_per_record * complete),
            header,
        })
        .collect();

    for r in 0..complete {
        let mut pos = r * record_size;
        for ch in channels.iter_mut() {
            let n = ch.header.samples_per_record;
            let chunk = &data[pos..pos + 2 * n];
            ch.samples.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| ch.header.to_physical(i16::from_le_bytes([b[0], b[1]]) as i32)),
            );
            pos += 2 * n;
        }
    }

    let rec = Recording {
        patient_id,
        recording_id,
        start_time,
        record_duration,
        n_records: complete,
        reserved,
        channels,
    };
    if complete < expected {
        return Err(EdfError::Truncated {
            complete_records: complete,
            expected_records: expected,
            recovered: Box::new(rec),
        });
    }
    Ok(rec)
}
