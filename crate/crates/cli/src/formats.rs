//! Scene, prediction and ground-truth file formats.
//!
//! Scenes come in two flavors, told apart by the first four bytes:
//!
//! * ASCII: a line holding `N`, then `N` lines of `x y z r g b`.
//! * Binary: `SPG1`, a little-endian `u32` count, then `N × 6` little-endian
//!   `f32` values.
//!
//! Prediction files hold three lines (`box ...`, `score v`, `mask` followed by
//! run-length pairs). Ground-truth files hold one sample per line:
//! `id category cx cy cz sx sy sz N v c v c ...`, with `#` comments.
//!
//! Reals are written in shortest round-trip form, so write→parse is exact.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;

use spg_core::geometry::PointCloud;
use spg_core::metrics::Category;

pub const BINARY_MAGIC: &[u8; 4] = b"SPG1";

/// Where in the input a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at {location}{}", detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
pub struct FormatError {
    pub kind: &'static str,
    pub location: Location,
    pub detail: Option<String>,
}

impl FormatError {
    fn at(kind: &'static str, location: Location) -> Self {
        Self {
            kind,
            location,
            detail: None,
        }
    }

    fn with(kind: &'static str, location: Location, detail: impl Into<String>) -> Self {
        Self {
            kind,
            location,
            detail: Some(detail.into()),
        }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Lines numbered from 1, with trailing `\r` removed.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
}

fn parse_real(token: &str, line: usize, kind: &'static str) -> FormatResult<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FormatError::with(kind, Location::Line(line), format!("'{token}'"))),
    }
}

fn cloud_from_records(
    records: Vec<[f64; 6]>,
    location_of: impl Fn(usize) -> Location,
) -> FormatResult<PointCloud> {
    let mut pos = Vec::with_capacity(records.len());
    let mut col = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r[3..].iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(FormatError::with("invalid color", location_of(i), "channels must lie in [0, 1]"));
        }
        pos.push([r[0], r[1], r[2]]);
        col.push([r[3], r[4], r[5]]);
    }
    PointCloud::new(pos, col).map_err(|e| FormatError::with("invalid scene", location_of(0), e.to_string()))
}

/// Parses either scene flavor, sniffing the magic bytes.
pub fn parse_scene(bytes: &[u8]) -> FormatResult<PointCloud> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_scene_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            FormatError::with("invalid encoding", Location::Byte(e.valid_up_to()), "scene text is not UTF-8")
        })?;
        parse_scene_ascii(text)
    }
}

pub fn parse_scene_ascii(text: &str) -> FormatResult<PointCloud> {
    let mut lines = numbered_lines(text);
    let (_, header) = lines.next().ok_or(FormatError::at("truncated scene", Location::Line(1)))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| FormatError::with("invalid header", Location::Line(1), format!("'{}'", header.trim())))?;
    let mut records = Vec::with_capacity(n);
    let mut last = 1;
    for (line, text) in lines {
        last = line;
        if text.trim().is_empty() {
            continue;
        }
        if records.len() == n {
            return Err(FormatError::with("trailing data", Location::Line(line), format!("scene declares {n} records")));
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(FormatError::with(
                "malformed record",
                Location::Line(line),
                format!("expected 6 values, found {}", fields.len()),
            ));
        }
        let mut r = [0.0; 6];
        for (slot, f) in r.iter_mut().zip(&fields) {
            *slot = parse_real(f, line, "invalid coordinate")?;
        }
        records.push((line, r));
    }
    if records.len() < n {
        return Err(FormatError::with(
            "truncated scene",
            Location::Line(last + 1),
            format!("declared {n} records, found {}", records.len()),
        ));
    }
    let lines: Vec<usize> = records.iter().map(|r| r.0).collect();
    cloud_from_records(records.into_iter().map(|r| r.1).collect(), |i| {
        Location::Line(lines.get(i).copied().unwrap_or(1))
    })
}

pub fn parse_scene_binary(bytes: &[u8]) -> FormatResult<PointCloud> {
    if !bytes.starts_with(BINARY_MAGIC) {
        return Err(FormatError::at("bad magic", Location::Byte(0)));
    }
    let header = bytes
        .get(4..8)
        .ok_or(FormatError::with("truncated scene", Location::Byte(bytes.len()), "missing count"))?;
    let n = u32::from_le_bytes(header.try_into().expect("4-byte slice")) as usize;
    let payload = &bytes[8..];
    let want = n.checked_mul(24).ok_or(FormatError::at("invalid header", Location::Byte(4)))?;
    if payload.len() < want {
        return Err(FormatError::with(
            "truncated scene",
            Location::Byte(bytes.len()),
            format!("declared {n} records needing {want} payload bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > want {
        return Err(FormatError::with("trailing data", Location::Byte(8 + want), format!("scene declares {n} records")));
    }
    let mut records = Vec::with_capacity(n);
    for (i, chunk) in payload.chunks_exact(24).enumerate() {
        let mut r = [0.0; 6];
        for (j, slot) in r.iter_mut().enumerate() {
            let v = f32::from_le_bytes(chunk[4 * j..4 * j + 4].try_into().expect("4-byte slice"));
            if !v.is_finite() {
                return Err(FormatError::at("invalid coordinate", Location::Byte(8 + 24 * i + 4 * j)));
            }
            *slot = f64::from(v);
        }
        records.push(r);
    }
    cloud_from_records(records, |i| Location::Byte(8 + 24 * i))
}

pub fn write_scene_ascii(cloud: &PointCloud) -> String {
    let mut out = format!("{}\n", cloud.len());
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        let _ = writeln!(out, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
    }
    out
}

/// Binary scene; values are narrowed to `f32`, so only `f32`-representable
/// clouds round-trip exactly.
pub fn write_scene_binary(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 24 * cloud.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        for v in p.iter().chain(c) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Run-length encoding as `(value, count)` pairs with positive counts.
pub fn rle_encode(mask: &[bool]) -> Vec<(bool, usize)> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &m in mask {
        match runs.last_mut() {
            Some((v, c)) if *v == m => *c += 1,
            _ => runs.push((m, 1)),
        }
    }
    runs
}

/// Decodes `v c v c ...` tokens.
fn rle_decode(tokens: &[&str], line: usize) -> FormatResult<Vec<bool>> {
    if !tokens.len().is_multiple_of(2) {
        return Err(FormatError::with("malformed mask", Location::Line(line), "odd number of run tokens"));
    }
    let mut mask = Vec::new();
    for pair in tokens.chunks(2) {
        let value = match pair[0] {
            "0" => false,
            "1" => true,
            other => {
                return Err(FormatError::with("malformed mask", Location::Line(line), format!("run value '{other}'")))
            }
        };
        let count: usize = match pair[1].parse() {
            Ok(c) if c > 0 => c,
            _ => {
                return Err(FormatError::with(
                    "malformed mask",
                    Location::Line(line),
                    format!("run length '{}'", pair[1]),
                ))
            }
        };
        mask.resize(mask.len() + count, value);
    }
    Ok(mask)
}

fn rle_tokens(mask: &[bool]) -> String {
    let mut out = String::new();
    for (v, c) in rle_encode(mask) {
        let _ = write!(out, " {} {}", u8::from(v), c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `cx cy cz sx sy sz`.
    pub bbox: [f64; 6],
    pub score: f64,
    pub mask: Vec<bool>,
}

pub fn write_prediction(pred: &Prediction) -> String {
    let b = pred.bbox;
    format!(
        "box {} {} {} {} {} {}\nscore {}\nmask{}\n",
        b[0],
        b[1],
        b[2],
        b[3],
        b[4],
        b[5],
        pred.score,
        rle_tokens(&pred.mask)
    )
}

fn keyword_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    keyword: &str,
    expected_line: usize,
) -> FormatResult<(usize, Vec<&'a str>)> {
    let (line, text) = lines
        .next()
        .ok_or(FormatError::with("truncated prediction", Location::Line(expected_line), format!("missing '{keyword}' line")))?;
    let mut fields = text.split_whitespace();
    if fields.next() != Some(keyword) {
        return Err(FormatError::with("malformed prediction", Location::Line(line), format!("expected '{keyword}'")));
    }
    Ok((line, fields.collect()))
}

pub fn parse_prediction(text: &str) -> FormatResult<Prediction> {
    let mut lines = numbered_lines(text);
    let (line, fields) = keyword_line(&mut lines, "box", 1)?;
    if fields.len() != 6 {
        return Err(FormatError::with(
            "malformed prediction",
            Location::Line(line),
            format!("box needs 6 values, found {}", fields.len()),
        ));
    }
    let mut bbox = [0.0; 6];
    for (slot, f) in bbox.iter_mut().zip(&fields) {
        *slot = parse_real(f, line, "invalid coordinate")?;
    }
    let (line, fields) = keyword_line(&mut lines, "score", 2)?;
    if fields.len() != 1 {
        return Err(FormatError::with("malformed prediction", Location::Line(line), "score needs 1 value"));
    }
    let score = parse_real(fields[0], line, "invalid score")?;
    let (line, fields) = keyword_line(&mut lines, "mask", 3)?;
    let mask = rle_decode(&fields, line)?;
    if let Some((line, _)) = lines.find(|(_, t)| !t.trim().is_empty()) {
        return Err(FormatError::at("trailing data", Location::Line(line)));
    }
    Ok(Prediction { bbox, score, mask })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub id: String,
    pub category: Category,
    pub bbox: [f64; 6],
    pub mask: Vec<bool>,
}

pub fn write_ground_truth(records: &[GroundTruthRecord]) -> String {
    let mut out = String::from("# id category cx cy cz sx sy sz N mask-runs\n");
    for r in records {
        let b = r.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}{}",
            r.id,
            r.category,
            b[0],
            b[1],
            b[2],
            b[3],
            b[4],
            b[5],
            r.mask.len(),
            rle_tokens(&r.mask)
        );
    }
    out
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !id.starts_with('.')
}

pub fn parse_ground_truth(text: &str) -> FormatResult<Vec<GroundTruthRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in numbered_lines(text) {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 9 {
            return Err(FormatError::with(
                "malformed record",
                Location::Line(line),
                format!("expected at least 9 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0];
        if !valid_id(id) {
            return Err(FormatError::with("invalid id", Location::Line(line), format!("'{id}'")));
        }
        if !seen.insert(id) {
            return Err(FormatError::with("duplicate id", Location::Line(line), format!("'{id}'")));
        }
        let category: Category = fields[1]
            .parse()
            .map_err(|_| FormatError::with("invalid category", Location::Line(line), format!("'{}'", fields[1])))?;
        let mut bbox = [0.0; 6];
        for (slot, f) in bbox.iter_mut().zip(&fields[2..8]) {
            *slot = parse_real(f, line, "invalid coordinate")?;
        }
        let n: usize = fields[8]
            .parse()
            .map_err(|_| FormatError::with("invalid count", Location::Line(line), format!("'{}'", fields[8])))?;
        let mask = rle_decode(&fields[9..], line)?;
        if mask.len() != n {
            return Err(FormatError::with(
                "mask length mismatch",
                Location::Line(line),
                format!("runs sum to {}, expected {n}", mask.len()),
            ));
        }
        records.push(GroundTruthRecord {
            id: id.to_string(),
            category,
            bbox,
            mask,
        });
    }
    Ok(records)
}

/// One label per line.
pub fn write_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 4);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}
