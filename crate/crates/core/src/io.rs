//! File formats: CSV matrices, PGM images, complex JSON, atomic writes.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmSubtype};
use image::DynamicImage;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{Complex2, ComplexKind, GrayImage};
use crate::error::{Error, Result};

/// Version stamped into every JSON document we write.
pub const FORMAT_VERSION: u32 = 1;

/// Round-trip safe rendering with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A JSON number carrying 17 significant digits verbatim; non-finite values become null.
pub fn json_f64(v: f64) -> serde_json::Value {
    if !v.is_finite() {
        return serde_json::Value::Null;
    }
    serde_json::from_str::<serde_json::Number>(&fmt_f64(v)).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

fn widen_floats(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(f) = n.as_f64() {
                *v = json_f64(f);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(widen_floats),
        Value::Object(map) => map.values_mut().for_each(widen_floats),
        _ => {}
    }
}

/// Pretty JSON with every float printed at 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    widen_floats(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}

/// Reads a numeric CSV into rows. With `header` the first line is skipped.
pub fn read_csv_rows<R: Read>(input: R, header: bool) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("csv record {}: {e}", i + 1)))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("csv record {}: '{f}' is not a number", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv_matrix<R: Read>(input: R, header: bool) -> Result<DMatrix<f64>> {
    let rows = read_csv_rows(input, header)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!("csv row {} has a different column count", i + 1)));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn write_csv_matrix<W: Write>(out: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|c| fmt_f64(m[(r, c)])))
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// One value per line.
pub fn write_csv_column<W: Write>(mut out: W, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_csv_column<R: Read>(input: R, header: bool) -> Result<Vec<f64>> {
    let m = read_csv_matrix(input, header)?;
    if m.ncols() > 1 {
        return Err(Error::Parse(format!("expected a single column, found {}", m.ncols())));
    }
    Ok(m.iter().copied().collect())
}

/// Reads a grayscale PGM, ASCII (P2) or binary (P5), keeping raw sample values.
pub fn read_pgm<R: BufRead>(input: R) -> Result<GrayImage> {
    let decoder = PnmDecoder::new(input).map_err(|e| Error::Parse(format!("pgm: {e}")))?;
    if !matches!(decoder.subtype(), PnmSubtype::Graymap(_)) {
        return Err(Error::Parse("only P2/P5 graymaps are supported".into()));
    }
    let max_val = decoder.header().maximal_sample();
    let img = DynamicImage::from_decoder(decoder).map_err(|e| Error::Parse(format!("pgm: {e}")))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    // the decoder stretches samples to the full 8 or 16 bit range; undo that
    let (full, samples): (u64, Vec<u32>) = match img {
        DynamicImage::ImageLuma8(buf) => (255, buf.into_raw().into_iter().map(u32::from).collect()),
        DynamicImage::ImageLuma16(buf) => (65535, buf.into_raw().into_iter().map(u32::from).collect()),
        _ => return Err(Error::Parse("unexpected pixel layout in graymap".into())),
    };
    let m = max_val as u64;
    let data = samples.into_iter().map(|v| ((v as u64 * m + full / 2) / full) as u32).collect();
    GrayImage::new(width, height, max_val, data)
}

/// On-disk form of a 2-complex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexFile {
    pub format_version: u32,
    pub kind: ComplexKind,
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub cells2: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<Vec<f64>>,
}

impl ComplexFile {
    pub fn new(complex: &Complex2, w2: Option<Vec<f64>>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: complex.kind(),
            vertices: complex.n0(),
            edges: complex.edges().to_vec(),
            cells2: complex.cells().to_vec(),
            w2,
        }
    }

    pub fn to_complex(&self) -> Result<Complex2> {
        if self.format_version > FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported format_version {}", self.format_version)));
        }
        if let Some(w2) = &self.w2 {
            if w2.len() != self.cells2.len() {
                return Err(Error::Parse(format!("w2 has {} entries for {} cells", w2.len(), self.cells2.len())));
            }
        }
        Complex2::new(self.kind, self.vertices, self.edges.clone(), self.cells2.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Renders with a writer callback and stores atomically.
pub fn atomic_write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    atomic_write(path, &buf)
}
