//! Minimal EDF encoder used by the synthetic data generator and by tests.
//!
//! Text fields are left-aligned and space padded; numbers use the shortest
//! decimal representation that fits the field.

use super::tal::{encode_record, TalEntry};
use super::{Channel, Recording, SignalHeader, ANNOTATION_LABEL};

fn put(out: &mut Vec<u8>, s: &str, width: usize) {
    let b = s.as_bytes();
    let n = b.len().min(width);
    out.extend_from_slice(&b[..n]);
    out.extend(std::iter::repeat_n(b' ', width - n));
}

/// Shortest decimal representation of `v` that fits in `width` characters.
pub fn format_number(v: f64, width: usize) -> String {
    let s = format!("{v}");
    if s.len() <= width {
        return s;
    }
    for prec in (0..width).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= width {
            return s;
        }
    }
    s[..width].to_string()
}

/// Encodes a recording as an EDF/EDF+ byte stream.
pub fn write_edf(rec: &Recording) -> Vec<u8> {
    let ns = rec.channels.len();
    let mut out = Vec::with_capacity(256 * (ns + 1));
    put(&mut out, "0", 8);
    put(&mut out, &rec.patient_id, 80);
    put(&mut out, &rec.recording_id, 80);
    let t = rec.start_time;
    use chrono::{Datelike, Timelike};
    put(
        &mut out,
        &format!("{:02}.{:02}.{:02}", t.day(), t.month(), t.year().rem_euclid(100)),
        8,
    );
    put(&mut out, &format!("{:02}.{:02}.{:02}", t.hour(), t.minute(), t.second()), 8);
    put(&mut out, &(256 * (ns + 1)).to_string(), 8);
    put(&mut out, &rec.reserved, 44);
    put(&mut out, &rec.n_records.to_string(), 8);
    put(&mut out, &format_number(rec.record_duration, 8), 8);
    put(&mut out, &ns.to_string(), 4);

    let hs: Vec<_> = rec.channels.iter().map(|c| &c.header).collect();
    for h in &hs {
        put(&mut out, &h.label, 16);
    }
    for h in &hs {
        put(&mut out, &h.transducer, 80);
    }
    for h in &hs {
        put(&mut out, &h.physical_dim, 8);
    }
    for h in &hs {
        put(&mut out, &format_number(h.physical_min, 8), 8);
    }
    for h in &hs {
        put(&mut out, &format_number(h.physical_max, 8), 8);
    }
    for h in &hs {
        put(&mut out, &h.digital_min.to_string(), 8);
    }
    for h in &hs {
        put(&mut out, &h.digital_max.to_string(), 8);
    }
    for h in &hs {
        put(&mut out, &h.prefiltering, 80);
    }
    for h in &hs {
        put(&mut out, &h.samples_per_record.to_string(), 8);
    }
    for h in &hs {
        put(&mut out, &h.reserved, 32);
    }

    let digital: Vec<Vec<i32>> = rec.channels.iter().map(|c| c.digital_samples()).collect();
    for r in 0..rec.n_records {
        for (c, d) in rec.channels.iter().zip(&digital) {
            let n = c.header.samples_per_record;
            for &v in &d[r * n..(r + 1) * n] {
                out.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
    }
    out
}

/// A signal channel whose physical range is the sample range widened by 5%,
/// so EDF quantisation stays well below the signal's resolution.
pub fn signal_channel(label: &str, fs: f64, record_duration: f64, samples: Vec<f64>) -> Channel {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (-1.0, 1.0)
    };
    let header = SignalHeader {
        label: label.into(),
        transducer: "AgAgCl electrode".into(),
        physical_dim: "uV".into(),
        physical_min: format_number(lo, 8).parse().unwrap_or(lo),
        physical_max: format_number(hi, 8).parse().unwrap_or(hi),
        digital_min: -32768,
        digital_max: 32767,
        prefiltering: String::new(),
        samples_per_record: (fs * record_duration).round() as usize,
        reserved: String::new(),
    };
    let samples = samples.iter().map(|&v| header.to_physical(header.to_digital(v))).collect();
    Channel {
        header,
        sample_rate: fs,
        samples,
    }
}

/// An `EDF Annotations` channel holding one TAL block per data record.
/// Each record starts with its timekeeping entry. Returns `None` when a
/// record's entries do not fit in `bytes_per_record`.
pub fn annotation_channel(
    record_duration: f64,
    events: &[Vec<TalEntry>],
    bytes_per_record: usize,
) -> Option<Channel> {
    let bytes_per_record = bytes_per_record + bytes_per_record % 2;
    let mut samples = Vec::with_capacity(events.len() * bytes_per_record / 2);
    for (r, entries) in events.iter().enumerate() {
        let mut all = vec![TalEntry {
            onset: r as f64 * record_duration,
            duration: None,
            texts: Vec::new(),
        }];
        all.extend(entries.iter().cloned());
        let bytes = encode_record(&all, bytes_per_record)?;
        samples.extend(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]]) as f64));
    }
    Some(Channel {
        header: SignalHeader {
            label: ANNOTATION_LABEL.into(),
            transducer: String::new(),
            physical_dim: String::new(),
            physical_min: -32768.0,
            physical_max: 32767.0,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: bytes_per_record / 2,
            reserved: String::new(),
        },
        sample_rate: bytes_per_record as f64 / 2.0 / record_duration,
        samples,
    })
}
