//! Field dumps and phase rasters.
//!
//! A dump is a 64-byte ASCII header
//! `SHOM1 d=<d> phys=<C|E> dims=<N1>x<N2>[x<N3>]`, space padded and ending in
//! `\n`, followed by little-endian `f64` values in C order with the
//! component index fastest.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{Grid, Physics, TensorField};

pub const DUMP_MAGIC: &str = "SHOM1";
pub const DUMP_HEADER_LEN: usize = 64;

fn header(field: &TensorField) -> Result<[u8; DUMP_HEADER_LEN]> {
    let grid = field.grid();
    let dims: Vec<String> = grid.dims().iter().map(|n| n.to_string()).collect();
    let text = format!(
        "{DUMP_MAGIC} d={} phys={} dims={}",
        grid.ndim(),
        field.physics().code(),
        dims.join("x")
    );
    if text.len() > DUMP_HEADER_LEN - 1 {
        return Err(Error::Format("grid description does not fit the dump header".into()));
    }
    let mut out = [b' '; DUMP_HEADER_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[DUMP_HEADER_LEN - 1] = b'\n';
    Ok(out)
}

pub fn write_dump<W: Write>(mut w: W, field: &TensorField) -> Result<()> {
    w.write_all(&header(field)?)?;
    let mut bytes = Vec::with_capacity(field.as_slice().len() * 8);
    for v in field.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

struct DumpHeader {
    physics: Physics,
    dims: Vec<usize>,
}

fn parse_header(bytes: &[u8]) -> Result<DumpHeader> {
    if bytes.len() != DUMP_HEADER_LEN || bytes[DUMP_HEADER_LEN - 1] != b'\n' {
        return Err(Error::Format("dump header must be 64 bytes ending in a newline".into()));
    }
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("dump header is not ASCII".into()))?;
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some(DUMP_MAGIC) {
        return Err(Error::Format(format!("missing {DUMP_MAGIC} magic")));
    }
    let mut d = None;
    let mut physics = None;
    let mut dims = None;
    for tok in tokens {
        let (key, value) =
            tok.split_once('=').ok_or_else(|| Error::Format(format!("bad header token '{tok}'")))?;
        match key {
            "d" => d = value.parse::<usize>().ok(),
            "phys" => physics = value.chars().next().and_then(Physics::from_code).filter(|_| value.len() == 1),
            "dims" => {
                dims = value.split('x').map(|n| n.parse::<usize>().ok()).collect::<Option<Vec<_>>>();
            }
            _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
        }
    }
    let d = d.ok_or_else(|| Error::Format("header lacks a valid d=".into()))?;
    let physics = physics.ok_or_else(|| Error::Format("header lacks phys=C or phys=E".into()))?;
    let dims = dims.ok_or_else(|| Error::Format("header lacks valid dims=".into()))?;
    if dims.len() != d {
        return Err(Error::Format(format!("d={d} but {} grid sizes given", dims.len())));
    }
    Ok(DumpHeader { physics, dims })
}

/// Reads a dump onto a grid of unit edge lengths.
pub fn read_dump<R: Read>(mut r: R) -> Result<TensorField> {
    let mut head = [0u8; DUMP_HEADER_LEN];
    r.read_exact(&mut head).map_err(|_| Error::Format("file too short for a dump header".into()))?;
    let h = parse_header(&head)?;
    let grid = Grid::new(&h.dims)?;
    let count = grid.cells() * h.physics.components(grid.ndim());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!("expected {} data bytes, found {}", count * 8, bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    TensorField::from_vec(grid, h.physics, data)
}

/// A raster of phase ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseRaster {
    /// Grid sizes; for images, `[rows, columns]`.
    pub dims: Vec<usize>,
    /// Phase id per cell in C order.
    pub ids: Vec<u32>,
}

/// Parses an ASCII PGM (`P2`) image. Row `r`, column `c` becomes cell
/// `(r, c)`; the gray level is the phase id.
pub fn parse_pgm(text: &str) -> Result<PhaseRaster> {
    let mut tokens = text.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Format("not an ASCII PGM (P2) image".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Format(format!("PGM ends before the {what}")))?
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("PGM {what} is not a nonnegative integer")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maximum gray level")?;
    let mut ids = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let v = number("pixel data")?;
        if v > maxval {
            return Err(Error::Format(format!("pixel value {v} exceeds the maximum {maxval}")));
        }
        ids.push(u32::try_from(v).map_err(|_| Error::Format("pixel value too large".into()))?);
    }
    if tokens.next().is_some() {
        return Err(Error::Format("trailing data after PGM pixels".into()));
    }
    Ok(PhaseRaster { dims: vec![height, width], ids })
}

/// Phase ids from component 0 of a dump; values must be nonnegative
/// integers.
pub fn raster_from_dump(field: &TensorField) -> Result<PhaseRaster> {
    let ids = (0..field.cells())
        .map(|c| {
            let v = field.cell(c)[0];
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::Format(format!("cell {c} holds {v}, not a phase id")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseRaster { dims: field.grid().dims().to_vec(), ids })
}

/// Reads a phase raster, detecting PGM or dump format from the first bytes.
pub fn read_phase_raster(bytes: &[u8]) -> Result<PhaseRaster> {
    if bytes.starts_with(DUMP_MAGIC.as_bytes()) {
        raster_from_dump(&read_dump(bytes)?)
    } else if bytes.starts_with(b"P2") {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("PGM file is not ASCII".into()))?;
        parse_pgm(text)
    } else {
        Err(Error::Format("phase raster must be an ASCII PGM (P2) or a field dump".into()))
    }
}
