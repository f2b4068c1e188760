//! Text formats for coefficients, ball fields and sphere patterns.
//!
//! Every format has one header line of space-separated `key=value` tokens
//! followed by comma-separated numeric rows. Blank lines and `#` comments are
//! skipped. Floats are written in shortest round-trip form so write-then-read
//! is bit exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{BallGridSpec, ComplexField, PatternSamples, SphereGrid};
use crate::harmonics::HarmonicCoeffs;
use crate::specfun::HarmonicIndex;

pub const COEFFICIENT_CONVENTION: &str = "orthonormal-cs";

/// Numbered non-empty, non-comment lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header_tokens(line: usize, header: &str) -> Result<HashMap<String, String>> {
    header
        .split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(line, format!("malformed header token {tok:?}")))
        })
        .collect()
}

fn header_value<T: FromStr>(line: usize, tokens: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = tokens
        .get(key)
        .ok_or_else(|| Error::parse(line, format!("header lacks {key}")))?;
    raw.parse()
        .map_err(|_| Error::parse(line, format!("invalid header value {key}={raw}")))
}

fn row<T: FromStr>(line: usize, text: &str, fields: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != fields {
        return Err(Error::parse(
            line,
            format!("expected {fields} comma-separated fields, got {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::parse(line, format!("cannot parse number {p:?}")))
        })
        .collect()
}

fn first_line<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<(usize, &'a str)> {
    lines.next().ok_or_else(|| Error::parse(1, "empty file"))
}

pub fn write_coefficients(coeffs: &HarmonicCoeffs) -> String {
    let mut out = format!("L={} convention={COEFFICIENT_CONVENTION}\n", coeffs.degree());
    for (idx, c) in coeffs.iter() {
        let _ = writeln!(out, "{},{},{:e},{:e}", idx.l(), idx.m(), c.re, c.im);
    }
    out
}

/// Rows not present in the file are zero.
pub fn read_coefficients(text: &str) -> Result<HarmonicCoeffs> {
    let mut lines = content_lines(text);
    let (hline, header) = first_line(&mut lines)?;
    let tokens = header_tokens(hline, header)?;
    let degree: usize = header_value(hline, &tokens, "L")?;
    let convention: String = header_value(hline, &tokens, "convention")?;
    if convention != COEFFICIENT_CONVENTION {
        return Err(Error::parse(
            hline,
            format!("unsupported convention {convention:?}, expected {COEFFICIENT_CONVENTION}"),
        ));
    }
    let mut coeffs = HarmonicCoeffs::zeros(degree);
    let mut seen = vec![false; coeffs.values().len()];
    for (line, text) in lines {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::parse(line, format!("expected l,m,re,im, got {text:?}")));
        }
        let l: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid degree {:?}", parts[0])))?;
        let m: i64 = parts[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid order {:?}", parts[1])))?;
        let re: f64 = parts[2]
            .parse()
            .map_err(|_| Error::parse(line, format!("cannot parse number {:?}", parts[2])))?;
        let im: f64 = parts[3]
            .parse()
            .map_err(|_| Error::parse(line, format!("cannot parse number {:?}", parts[3])))?;
        let idx = HarmonicIndex::new(l, m).map_err(|e| Error::parse(line, e.to_string()))?;
        if l > degree {
            return Err(Error::parse(line, format!("degree {l} exceeds header L={degree}")));
        }
        if std::mem::replace(&mut seen[idx.flat()], true) {
            return Err(Error::parse(line, format!("duplicate row for l={l}, m={m}")));
        }
        coeffs.set(idx, Complex64::new(re, im))?;
    }
    Ok(coeffs)
}

pub fn write_field(field: &ComplexField, grid_nodes: &[crate::geom::Vec3]) -> Result<String> {
    if grid_nodes.len() != field.values.len() {
        return Err(Error::LengthMismatch {
            expected: grid_nodes.len(),
            actual: field.values.len(),
        });
    }
    let s = field.spec;
    let mut out = format!(
        "radial_count={} angular_order={} b={:e}\n",
        s.radial_count, s.angular_order, s.radius
    );
    for (x, v) in grid_nodes.iter().zip(&field.values) {
        let _ = writeln!(out, "{:e},{:e},{:e},{:e},{:e}", x.x, x.y, x.z, v.re, v.im);
    }
    Ok(out)
}

/// Reads a field; rows must list the nodes of the header's grid in order.
pub fn read_field(text: &str) -> Result<ComplexField> {
    let mut lines = content_lines(text);
    let (hline, header) = first_line(&mut lines)?;
    let tokens = header_tokens(hline, header)?;
    let spec = BallGridSpec::new(
        header_value(hline, &tokens, "radial_count")?,
        header_value(hline, &tokens, "angular_order")?,
        header_value(hline, &tokens, "b")?,
    );
    let grid = spec
        .build()
        .map_err(|e| Error::parse(hline, format!("invalid grid parameters: {e}")))?;
    let mut values = Vec::with_capacity(grid.len());
    let mut last = hline;
    for (line, text) in lines {
        last = line;
        let r: Vec<f64> = row(line, text, 5)?;
        let j = values.len();
        let Some(node) = grid.nodes().get(j) else {
            return Err(Error::parse(line, format!("more rows than the {} grid nodes", grid.len())));
        };
        let x = crate::geom::Vec3::new(r[0], r[1], r[2]);
        if x.distance(*node) > 1e-9 * spec.radius.max(1.0) {
            return Err(Error::parse(
                line,
                format!("row {} does not match grid node {j}", j + 1),
            ));
        }
        values.push(Complex64::new(r[3], r[4]));
    }
    if values.len() != grid.len() {
        return Err(Error::parse(
            last,
            format!("expected {} rows, got {}", grid.len(), values.len()),
        ));
    }
    Ok(ComplexField { spec, values })
}

pub fn write_pattern(samples: &PatternSamples, grid: &SphereGrid) -> Result<String> {
    grid.check(samples)?;
    let mut out = format!("sphere_order={}\n", samples.order);
    for (&(t, p), v) in grid.angles().iter().zip(&samples.values) {
        let _ = writeln!(out, "{t:e},{p:e},{:e},{:e}", v.re, v.im);
    }
    Ok(out)
}

pub fn read_pattern(text: &str) -> Result<PatternSamples> {
    let mut lines = content_lines(text);
    let (hline, header) = first_line(&mut lines)?;
    let tokens = header_tokens(hline, header)?;
    let order: usize = header_value(hline, &tokens, "sphere_order")?;
    let grid = SphereGrid::new(order).map_err(|e| Error::parse(hline, e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    let mut last = hline;
    for (line, text) in lines {
        last = line;
        let r: Vec<f64> = row(line, text, 4)?;
        let j = values.len();
        let Some(&(t, p)) = grid.angles().get(j) else {
            return Err(Error::parse(line, format!("more rows than the {} grid nodes", grid.len())));
        };
        if (r[0] - t).abs() > 1e-9 || (r[1] - p).abs() > 1e-9 {
            return Err(Error::parse(
                line,
                format!("row {} does not match grid node {j}", j + 1),
            ));
        }
        values.push(Complex64::new(r[2], r[3]));
    }
    if values.len() != grid.len() {
        return Err(Error::parse(
            last,
            format!("expected {} rows, got {}", grid.len(), values.len()),
        ));
    }
    Ok(PatternSamples { order, values })
}

/// A target pattern as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternInput {
    Coefficients(HarmonicCoeffs),
    Samples(PatternSamples),
}

/// Detects the format from the header: `L=` means coefficients, `sphere_order=` samples.
pub fn read_pattern_input(text: &str) -> Result<PatternInput> {
    let (hline, header) = first_line(&mut content_lines(text))?;
    let tokens = header_tokens(hline, header)?;
    if tokens.contains_key("L") {
        read_coefficients(text).map(PatternInput::Coefficients)
    } else if tokens.contains_key("sphere_order") {
        read_pattern(text).map(PatternInput::Samples)
    } else {
        Err(Error::parse(
            hline,
            "header must carry either L= (coefficients) or sphere_order= (samples)",
        ))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}
