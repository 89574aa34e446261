//! Report files: RFC-4180 CSV with 17-significant-digit scientific floats,
//! JSON via serde, and the run manifest with FNV-1a digests of every output.
//!
//! CSV bodies are byte-reproducible for a fixed configuration; the manifest
//! is the only file carrying wall-clock data.

use crate::Result;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Format a float with 17 significant digits in scientific notation, enough
/// to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// RFC-4180 CSV writer: comma separator, CRLF record ends, header row.
pub struct CsvWriter {
    buf: Vec<u8>,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> CsvWriter {
        let mut w = CsvWriter { buf: Vec::new() };
        w.raw_row(header);
        w
    }

    fn raw_row(&mut self, fields: &[&str]) {
        let line = fields.join(",");
        self.buf.extend_from_slice(line.as_bytes());
        self.buf.extend_from_slice(b"\r\n");
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        let strings: Vec<String> = fields
            .iter()
            .map(|f| match f {
                CsvField::Int(v) => v.to_string(),
                CsvField::Float(v) => fmt_f64(*v),
                CsvField::Str(s) => s.clone(),
            })
            .collect();
        let refs: Vec<&str> = strings.iter().map(|s| s.as_str()).collect();
        self.raw_row(&refs);
    }

    pub fn bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.buf)?;
        Ok(())
    }
}

pub enum CsvField {
    Int(i64),
    Float(f64),
    Str(String),
}

/// FNV-1a 64-bit digest; recorded in the manifest for change detection.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Wall time per phase plus output digests; written on success and failure.
#[derive(serde::Serialize)]
pub struct RunManifest {
    pub config: serde_json::Value,
    pub version: String,
    pub status: String,
    pub error: Option<String>,
    pub phases: Vec<PhaseTiming>,
    pub outputs: Vec<OutputRecord>,
}

#[derive(serde::Serialize)]
pub struct PhaseTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(serde::Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub bytes: u64,
    pub fnv1a64: String,
}

impl RunManifest {
    pub fn new(config: serde_json::Value) -> RunManifest {
        RunManifest {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: "running".into(),
            error: None,
            phases: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let data = std::fs::read(path)?;
        self.outputs.push(OutputRecord {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(&data)),
        });
        Ok(())
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, self).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

/// Scoped phase timer feeding the manifest.
pub struct PhaseClock {
    start: Instant,
}

impl PhaseClock {
    pub fn start() -> PhaseClock {
        PhaseClock { start: Instant::now() }
    }

    pub fn finish(self, manifest: &mut RunManifest, name: &str) {
        manifest.phases.push(PhaseTiming {
            name: name.to_string(),
            seconds: self.start.elapsed().as_secs_f64(),
        });
    }
}

/// Write a JSON value with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Binary columnar export of complex sample batches: little-endian f64
/// re/im interleaved, row-major (sample index outer, coordinate inner).
pub fn write_samples_binary(path: &Path, rows: &[Vec<crate::C64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        for c in row {
            f.write_all(&c.re.to_le_bytes())?;
            f.write_all(&c.im.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// CSV export of complex sample batches for small runs: columns
/// `re_0, im_0, re_1, im_1, ...`.
pub fn write_samples_csv(path: &Path, rows: &[Vec<crate::C64>]) -> Result<()> {
    let dim = rows.first().map(|r| r.len()).unwrap_or(0);
    let header: Vec<String> =
        (0..dim).flat_map(|j| [format!("re_{j}"), format!("im_{j}")]).collect();
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(&refs);
    for row in rows {
        let fields: Vec<CsvField> = row
            .iter()
            .flat_map(|c| [CsvField::Float(c.re), CsvField::Float(c.im)])
            .collect();
        w.row(&fields);
    }
    w.write_to(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 1e-300, -2.5e17] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn csv_crlf_and_fields() {
        let mut w = CsvWriter::new(&["n", "value"]);
        w.row(&[CsvField::Int(4), CsvField::Float(0.5)]);
        let text = String::from_utf8(w.bytes().to_vec()).unwrap();
        assert!(text.starts_with("n,value\r\n"));
        assert!(text.contains("4,5.0000000000000000e-1\r\n"));
    }

    #[test]
    fn fnv_known_vector() {
        // FNV-1a("a") = 0xaf63dc4c8601ec8c
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    }
}
