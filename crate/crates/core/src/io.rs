//! File formats: segment CSV, 8-bit PGM rasters, field CSVs and 16-bit PGM
//! heatmaps.
//!
//! Every writer takes an optional comment that is emitted as a leading
//! `# ...` line (a PGM header comment for images).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::env::{GrayImage, Segment, SegmentSet};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::{DirectionField, ScalarField};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

/// Parses `x1a,x2a,x1b,x2b` rows. A non-numeric first row is taken as a
/// header; blank lines and `#` comments are skipped.
pub fn parse_segments(text: &str) -> Result<SegmentSet> {
    let mut segs = Vec::new();
    let mut first = true;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let nums = match nums {
            Ok(n) => n,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => return Err(parse_err(no + 1, e)),
        };
        first = false;
        if nums.len() != 4 {
            return Err(parse_err(no + 1, format!("expected 4 values, found {}", nums.len())));
        }
        let seg = Segment::new(Vec2::new(nums[0], nums[1]), Vec2::new(nums[2], nums[3]))
            .map_err(|e| parse_err(no + 1, e))?;
        segs.push(seg);
    }
    Ok(SegmentSet::new(segs))
}

pub fn read_segments(path: &Path) -> Result<SegmentSet> {
    parse_segments(&fs::read_to_string(path)?)
}

/// Binary 8-bit PGM (`P5`, maxval ≤ 255).
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::Parse(format!("expected binary PGM magic P5, found {}", tokens[0])));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM {what}: {s}")));
    let (width, height, maxval) = (num(&tokens[1], "width")?, num(&tokens[2], "height")?, num(&tokens[3], "maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("only 8-bit PGM is supported, maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::Parse(format!("PGM raster holds {} bytes, expected {n}", bytes.len().saturating_sub(pos))));
    }
    GrayImage::new(width, height, bytes[pos..pos + n].to_vec())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&fs::read(path)?)
}

fn pgm_header(out: &mut Vec<u8>, w: usize, h: usize, maxval: u32, comment: Option<&str>) {
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{w} {h}\n{maxval}\n").as_bytes());
}

pub fn encode_pgm(image: &GrayImage, comment: Option<&str>) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.pixels().len() + 64);
    pgm_header(&mut out, image.width(), image.height(), 255, comment);
    out.extend_from_slice(image.pixels());
    out
}

/// 16-bit heatmap of a scalar field, with values mapped linearly from the
/// finite min/max onto `[0, 65535]` (`+∞` saturates). Returns the image and
/// the `min`/`max` sidecar text. The top image row is the grid's top row.
pub fn encode_heatmap(field: &ScalarField, comment: Option<&str>) -> (Vec<u8>, String) {
    let (n1, n2) = (field.grid.n1(), field.grid.n2());
    let (lo, hi) = field.min_max();
    let span = hi - lo;
    let mut out = Vec::with_capacity(2 * n1 * n2 + 64);
    pgm_header(&mut out, n1, n2, 65535, comment);
    for k in (0..n2).rev() {
        for j in 0..n1 {
            let v = field.at(j, k);
            let level = if v.is_nan() {
                0
            } else if v == f64::INFINITY {
                65535
            } else if span > 0.0 {
                (((v - lo) / span).clamp(0.0, 1.0) * 65535.0).round() as u16
            } else {
                0
            };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    let mut sidecar = String::new();
    if let Some(c) = comment {
        sidecar.push_str(&format!("# {c}\n"));
    }
    sidecar.push_str(&format!("min {lo}\nmax {hi}\n"));
    (out, sidecar)
}

fn write_comment<W: Write + ?Sized>(w: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// `x1,x2,<name>` rows, `j` fastest. `+∞` is written as `inf`.
pub fn write_scalar_csv<W: Write + ?Sized>(w: &mut W, field: &ScalarField, name: &str, comment: Option<&str>) -> Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "x1,x2,{name}")?;
    for (idx, v) in field.values.iter().enumerate() {
        let p = field.grid.node_at(idx);
        writeln!(w, "{},{},{}", p.x, p.y, v)?;
    }
    Ok(())
}

/// `x1,x2,g1,g2` rows, `j` fastest.
pub fn write_direction_csv<W: Write + ?Sized>(w: &mut W, field: &DirectionField, comment: Option<&str>) -> Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "x1,x2,g1,g2")?;
    for (idx, g) in field.values.iter().enumerate() {
        let p = field.grid.node_at(idx);
        writeln!(w, "{},{},{},{}", p.x, p.y, g.x, g.y)?;
    }
    Ok(())
}

/// Reads the value column of a scalar CSV written by [`write_scalar_csv`].
pub fn parse_scalar_values(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(no, l)| {
            let v = l.rsplit(',').next().unwrap_or("");
            v.trim().parse::<f64>().map_err(|e| parse_err(no + 1, e))
        })
        .collect()
}
