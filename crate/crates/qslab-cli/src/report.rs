//! Result assembly: tolerance-tagged numbers, the JSON envelope, CSV rows and
//! the binary unitary dump.

use anyhow::{Context, Result};
use qslab::CMatrix;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// A reported number together with the tolerance it was (or should be)
/// checked against, so downstream consumers need no side channel.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TolValue {
    pub value: f64,
    pub tol: f64,
}

pub fn tv(value: f64, tol: f64) -> TolValue {
    TolValue { value, tol }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    /// Module-qualified error code, e.g. `set-transform::infeasible-efficiency`.
    pub code: String,
    pub message: String,
}

/// The deterministic result document. Wall-clock never goes here; it is
/// printed and written to a `.timing.txt` sidecar so reruns with the same
/// config and seed produce byte-identical JSON.
#[derive(Debug, Serialize)]
pub struct Envelope {
    pub command: String,
    pub library_version: &'static str,
    pub seed: u64,
    /// "ok" or "infeasible".
    pub status: &'static str,
    /// Echo of the parsed config (keys sorted).
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<serde_json::Value>,
}

/// Serializes the envelope; `path = None` prints to stdout instead.
pub fn write_json(envelope: &Envelope, path: Option<&Path>) -> Result<()> {
    let mut body = serde_json::to_string_pretty(envelope)?;
    body.push('\n');
    match path {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{body}"),
    }
    Ok(())
}

/// Writes CSV with the given header; floats use the shortest round-trip form.
pub fn write_csv(header: &[&str], rows: &[Vec<String>], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Magic prefix of the binary unitary dump.
pub const UNITARY_MAGIC: &[u8; 8] = b"QSLU1\0\0\0";

/// Dump format: 8-byte magic, rows and cols as little-endian u32, then
/// row-major complex entries as little-endian f64 pairs (re, im).
pub fn write_unitary(path: &Path, u: &CMatrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    f.write_all(UNITARY_MAGIC)?;
    f.write_all(&u32::try_from(u.nrows())?.to_le_bytes())?;
    f.write_all(&u32::try_from(u.ncols())?.to_le_bytes())?;
    for r in 0..u.nrows() {
        for c in 0..u.ncols() {
            let z = u[(r, c)];
            f.write_all(&z.re.to_le_bytes())?;
            f.write_all(&z.im.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Reports wall-clock on stdout and, when results went to a file, in a
/// sidecar next to it (never inside the deterministic JSON/CSV). When results
/// themselves stream to stdout the timing moves to stderr to keep stdout
/// machine-readable.
pub fn report_timing(result_path: Option<&Path>, millis: f64) -> Result<()> {
    if result_path.is_none() {
        eprintln!("wall_clock_ms {millis:.3}");
    } else {
        println!("wall_clock_ms {millis:.3}");
    }
    if let Some(p) = result_path {
        let sidecar = p.with_extension(match p.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{ext}.timing.txt"),
            None => "timing.txt".to_string(),
        });
        std::fs::write(&sidecar, format!("wall_clock_ms {millis:.3}\n"))
            .with_context(|| format!("writing {}", sidecar.display()))?;
    }
    Ok(())
}

/// Formats a float for CSV in shortest round-trip form.
pub fn fnum(x: f64) -> String {
    format!("{x}")
}
