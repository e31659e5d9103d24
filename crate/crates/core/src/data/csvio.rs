//! Plain-text recording and marker files.
//!
//! A recording is one CSV with the 14 channel names as header and one row per
//! sample (microvolts). Its markers live next to it in `<stem>.markers.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::layout::CHANNEL_NAMES;
use super::types::{FocusLevel, Matrix, RawRecording, TrialMarker};
use super::N_CHANNELS;
use crate::error::{Error, Result};

const MARKER_HEADER: [&str; 7] = [
    "onset",
    "parameter",
    "focus_level",
    "session",
    "participant",
    "response",
    "latency_ms",
];

pub fn markers_path_for(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("recording");
    path.with_file_name(format!("{stem}.markers.csv"))
}

pub fn write_recording(rec: &RawRecording, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", CHANNEL_NAMES.join(",")).map_err(io)?;
    for t in 0..rec.data.cols() {
        let mut line = String::new();
        for ch in 0..rec.data.rows() {
            if ch > 0 {
                line.push(',');
            }
            line.push_str(&rec.data.get(ch, t).to_string());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    write_markers(&rec.markers, &markers_path_for(path))
}

pub fn write_markers(markers: &[TrialMarker], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_markers(markers, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Markers CSV as a string.
pub fn markers_to_csv(markers: &[TrialMarker]) -> Result<String> {
    let mut buf = Vec::new();
    encode_markers(markers, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
}

fn encode_markers<W: Write>(markers: &[TrialMarker], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MARKER_HEADER)?;
    for m in markers {
        w.write_record([
            m.onset.to_string(),
            m.parameter.to_string(),
            m.focus_level.get().to_string(),
            m.session.to_string(),
            m.participant.clone(),
            m.response.map(|r| r.to_string()).unwrap_or_default(),
            m.latency_ms.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<markers>", e))?;
    Ok(())
}

pub fn read_markers(path: &Path) -> Result<Vec<TrialMarker>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_markers(file).map_err(|e| match e {
        Error::MalformedHeader(m) => Error::MalformedHeader(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn markers_from_csv(text: &str) -> Result<Vec<TrialMarker>> {
    decode_markers(text.as_bytes())
}

fn decode_markers<R: std::io::Read>(input: R) -> Result<Vec<TrialMarker>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != MARKER_HEADER {
        return Err(Error::MalformedHeader(format!("expected {}", MARKER_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let opt = |s: &str| if s.is_empty() { None } else { Some(s.to_string()) };
        let onset = rec[0].parse::<usize>().map_err(|_| Error::invalid("onset", &rec[0]))?;
        let level = rec[2].parse::<u8>().map_err(|_| Error::invalid("focus_level", &rec[2]))?;
        let marker = TrialMarker {
            onset,
            parameter: rec[1].parse()?,
            focus_level: FocusLevel::new(level)?,
            session: rec[3].parse()?,
            participant: rec[4].to_string(),
            response: opt(&rec[5]).map(|s| s.parse()).transpose()?,
            latency_ms: opt(&rec[6])
                .map(|s| s.parse::<u32>().map_err(|_| Error::invalid("latency_ms", s)))
                .transpose()?,
        };
        marker.validate()?;
        out.push(marker);
    }
    Ok(out)
}

/// Reads `path` and its sibling markers file.
pub fn read_recording(path: &Path) -> Result<RawRecording> {
    read_recording_with_markers(path, &markers_path_for(path))
}

pub fn read_recording_with_markers(path: &Path, markers: &Path) -> Result<RawRecording> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() != N_CHANNELS {
        return Err(Error::ChannelCount {
            expected: N_CHANNELS,
            found: header.len(),
        });
    }
    if header.iter().zip(CHANNEL_NAMES).any(|(h, n)| h != n) {
        return Err(Error::MalformedHeader(format!(
            "{}: columns must be {}",
            path.display(),
            CHANNEL_NAMES.join(",")
        )));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); N_CHANNELS];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != N_CHANNELS {
            return Err(Error::ChannelCount {
                expected: N_CHANNELS,
                found: rec.len(),
            });
        }
        for (ch, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::invalid("sample", format!("row {}: {field}", line + 2)))?;
            columns[ch].push(v);
        }
    }
    let len = columns[0].len();
    let data = Matrix::from_vec(N_CHANNELS, len, columns.concat())?;
    RawRecording::new(data, read_markers(markers)?)
}
