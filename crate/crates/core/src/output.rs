//! CSV and JSON writers for fields, spectra, tracks, and run metadata.
//!
//! Every float is serialized with 17 significant digits so that identical
//! runs produce bit-identical files.  CSV headers carry the grid extent, the
//! mode count, and a short hash of the system parameters.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::AbcdSystem;
use crate::spectral::PeriodicGrid;

/// 17-significant-digit scientific form, the round-trip-exact format.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// FNV-1a over the canonical parameter rendering; 16 hex digits.
pub fn param_hash(sys: &AbcdSystem) -> String {
    let text = format!(
        "a={};b={};c={};d={};gamma={};epsilon={};mu={};mu2={}",
        fmt_f64(sys.a),
        fmt_f64(sys.b),
        fmt_f64(sys.c),
        fmt_f64(sys.d),
        fmt_f64(sys.gamma),
        fmt_f64(sys.epsilon),
        fmt_f64(sys.mu),
        fmt_f64(sys.mu2),
    );
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

fn header(w: &mut impl Write, grid: &PeriodicGrid, sys: &AbcdSystem) -> Result<()> {
    writeln!(
        w,
        "# L={} N={} params={}",
        fmt_f64(grid.half_length()),
        grid.len(),
        param_hash(sys)
    )?;
    Ok(())
}

/// Write named nodal columns against the grid: `x,name1,name2,...`.
pub fn write_nodal_csv(
    path: &Path,
    grid: &PeriodicGrid,
    sys: &AbcdSystem,
    columns: &[(&str, &[f64])],
) -> Result<()> {
    for (name, col) in columns {
        if col.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: col.len(),
            });
        }
        debug_assert!(!name.contains(','));
    }
    let mut w = BufWriter::new(File::create(path)?);
    header(&mut w, grid, sys)?;
    write!(w, "x")?;
    for (name, _) in columns {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for j in 0..grid.len() {
        write!(w, "{}", fmt_f64(grid.node(j)))?;
        for (_, col) in columns {
            write!(w, ",{}", fmt_f64(col[j]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Write a spectrum as `k,re,im` rows in transform index order, with the
/// signed wavenumber in the first column.
pub fn write_spectrum_csv(
    path: &Path,
    grid: &PeriodicGrid,
    sys: &AbcdSystem,
    spectrum: &[Complex64],
) -> Result<()> {
    if spectrum.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: spectrum.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    header(&mut w, grid, sys)?;
    writeln!(w, "k,re,im")?;
    for (k, c) in spectrum.iter().enumerate() {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(grid.wavenumber(k)),
            fmt_f64(c.re),
            fmt_f64(c.im)
        )?;
    }
    Ok(())
}

/// A wave pair read back from a profile CSV.
#[derive(Debug, Clone)]
pub struct WaveFile {
    pub half_length: f64,
    pub n_modes: usize,
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
}

/// Read an `x,zeta,u` CSV produced by [`write_nodal_csv`].
pub fn read_wave_csv(path: &Path) -> Result<WaveFile> {
    let malformed = |reason: &str| Error::Malformed {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let reader = BufReader::new(File::open(path)?);
    let mut half_length = None;
    let mut n_modes = None;
    let mut zeta = Vec::new();
    let mut u = Vec::new();
    let mut saw_columns = false;
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("L=") {
                    half_length = v.parse::<f64>().ok();
                } else if let Some(v) = tok.strip_prefix("N=") {
                    n_modes = v.parse::<usize>().ok();
                }
            }
            continue;
        }
        if !saw_columns {
            // column header row
            if !line.starts_with('x') {
                return Err(malformed("expected an x,zeta,u column header"));
            }
            saw_columns = true;
            continue;
        }
        let mut parts = line.split(',');
        let _x = parts.next().ok_or_else(|| malformed("missing x column"))?;
        let z: f64 = parts
            .next()
            .ok_or_else(|| malformed("missing zeta column"))?
            .parse()
            .map_err(|_| malformed("unparsable zeta value"))?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| malformed("missing u column"))?
            .parse()
            .map_err(|_| malformed("unparsable u value"))?;
        zeta.push(z);
        u.push(v);
    }
    let half_length = half_length.ok_or_else(|| malformed("header lacks L="))?;
    let n_modes = n_modes.ok_or_else(|| malformed("header lacks N="))?;
    if zeta.len() != n_modes {
        return Err(malformed("row count does not match N"));
    }
    Ok(WaveFile {
        half_length,
        n_modes,
        zeta,
        u,
    })
}

/// Serialize to JSON with 17-significant-digit floats and 2-space indentation.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let indent = serde_json::ser::PrettyFormatter::with_indent(b"  ");
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Indented17(indent));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvariantViolation(format!("JSON serialization failed: {e}")))?;
    let mut s = String::from_utf8(out)
        .map_err(|e| Error::InvariantViolation(format!("non-UTF8 JSON: {e}")))?;
    s.push('\n');
    Ok(s)
}

struct Indented17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Indented17<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object_key(writer, first)
    }

    fn end_object_key<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object_key(writer)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.0.end_object_value(writer)
    }
}

/// Write a value as pretty-printed JSON with 17-digit floats.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = to_json_string(value)?;
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AbcdSystem;

    #[test]
    fn hash_is_stable_and_parameter_sensitive() {
        let a = AbcdSystem::reduced(0.0, 0.8).unwrap();
        let b = AbcdSystem::reduced(0.0, 0.8).unwrap();
        let c = AbcdSystem::reduced(0.0, 0.81).unwrap();
        assert_eq!(param_hash(&a), param_hash(&b));
        assert_ne!(param_hash(&a), param_hash(&c));
        assert_eq!(param_hash(&a).len(), 16);
    }

    #[test]
    fn wave_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wave.csv");
        let grid = PeriodicGrid::new(4.0, 8).unwrap();
        let sys = AbcdSystem::reduced(0.0, 0.8).unwrap();
        let zeta: Vec<f64> = (0..8).map(|j| (j as f64 * 0.37).sin()).collect();
        let u: Vec<f64> = (0..8).map(|j| (j as f64 * 0.21).cos()).collect();
        write_nodal_csv(&path, &grid, &sys, &[("zeta", &zeta), ("u", &u)]).unwrap();
        let file = read_wave_csv(&path).unwrap();
        assert_eq!(file.half_length, 4.0);
        assert_eq!(file.n_modes, 8);
        assert_eq!(file.zeta, zeta);
        assert_eq!(file.u, u);
    }

    #[test]
    fn read_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,zeta,u\n0.0,1.0,2.0\n").unwrap();
        assert!(matches!(read_wave_csv(&path), Err(Error::Malformed { .. })));
    }

    #[test]
    fn json_floats_carry_seventeen_digits() {
        #[derive(Serialize)]
        struct Payload {
            value: f64,
        }
        let s = to_json_string(&Payload { value: 0.1 }).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "got {s}");
    }

    #[test]
    fn json_output_is_deterministic() {
        #[derive(Serialize)]
        struct Payload {
            a: f64,
            b: Vec<f64>,
        }
        let p = Payload { a: 1.0 / 3.0, b: vec![0.425, 1e-17] };
        assert_eq!(to_json_string(&p).unwrap(), to_json_string(&p).unwrap());
    }
}
