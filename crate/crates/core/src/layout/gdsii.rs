//! Minimal GDSII stream writer and reader for flat boundary-only libraries.

use thiserror::Error;

use super::chip::{ChipDesign, RenderedChip};
use super::geometry::{Point, Polygon};

/// Etch layer and datatype used for every boundary.
pub const ETCH_LAYER: i16 = 1;
pub const ETCH_DATATYPE: i16 = 0;
/// Database unit in user units (µm) and in meters: 1 nm grid.
pub const DB_IN_USER: f64 = 1e-3;
pub const DB_IN_METERS: f64 = 1e-9;
/// Most points one XY record can hold, closing point included.
pub const MAX_XY_POINTS: usize = 8191;

const HEADER: u16 = 0x0002;
const BGNLIB: u16 = 0x0102;
const LIBNAME: u16 = 0x0206;
const UNITS: u16 = 0x0305;
const ENDLIB: u16 = 0x0400;
const BGNSTR: u16 = 0x0502;
const STRNAME: u16 = 0x0606;
const ENDSTR: u16 = 0x0700;
const BOUNDARY: u16 = 0x0800;
const LAYER: u16 = 0x0D02;
const DATATYPE: u16 = 0x0E02;
const XY: u16 = 0x1003;
const ENDEL: u16 = 0x1100;

/// Fixed modification/access stamp so output is byte-reproducible.
const TIMESTAMP: [i16; 12] = [2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0];

#[derive(Debug, Error, PartialEq)]
pub enum GdsError {
    #[error("stream truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed record at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported record 0x{record:04x} at byte {offset}")]
    Unsupported { offset: usize, record: u16 },
    #[error("value does not fit the stream format: {0}")]
    Overflow(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub layer: i16,
    pub datatype: i16,
    /// Closed vertex list in database units (first point repeated last).
    pub xy: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub name: String,
    pub boundaries: Vec<Boundary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    pub name: String,
    pub db_in_user: f64,
    pub db_in_meters: f64,
    pub structures: Vec<Structure>,
}

/// Encodes `v` as an excess-64 base-16 eight-byte real.
pub fn encode_real8(v: f64) -> [u8; 8] {
    if v == 0.0 || !v.is_finite() {
        return [0; 8];
    }
    let sign = if v < 0.0 { 0x80u8 } else { 0 };
    let mut m = v.abs();
    let mut exp: i32 = 64;
    while m >= 1.0 {
        m /= 16.0;
        exp += 1;
    }
    while m < 1.0 / 16.0 {
        m *= 16.0;
        exp -= 1;
    }
    let mut mant = (m * (1u64 << 56) as f64).round() as u64;
    if mant >= 1u64 << 56 {
        mant >>= 4;
        exp += 1;
    }
    let mut out = [0u8; 8];
    out[0] = sign | (exp.clamp(0, 127) as u8);
    out[1..].copy_from_slice(&mant.to_be_bytes()[1..]);
    out
}

pub fn decode_real8(b: [u8; 8]) -> f64 {
    let sign = if b[0] & 0x80 != 0 { -1.0 } else { 1.0 };
    let exp = (b[0] & 0x7f) as i32 - 64;
    let mut mb = [0u8; 8];
    mb[1..].copy_from_slice(&b[1..]);
    let mant = u64::from_be_bytes(mb) as f64 / (1u64 << 56) as f64;
    sign * mant * 16f64.powi(exp)
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn record(&mut self, rec: u16, data: &[u8]) -> Result<(), GdsError> {
        let len = data.len() + 4;
        if len > u16::MAX as usize {
            return Err(GdsError::Overflow(format!("record of {len} bytes")));
        }
        self.buf.extend_from_slice(&(len as u16).to_be_bytes());
        self.buf.extend_from_slice(&rec.to_be_bytes());
        self.buf.extend_from_slice(data);
        Ok(())
    }

    fn int2(&mut self, rec: u16, vals: &[i16]) -> Result<(), GdsError> {
        let data: Vec<u8> = vals.iter().flat_map(|v| v.to_be_bytes()).collect();
        self.record(rec, &data)
    }

    fn ascii(&mut self, rec: u16, s: &str) -> Result<(), GdsError> {
        let mut data = s.as_bytes().to_vec();
        if data.len() % 2 == 1 {
            data.push(0);
        }
        self.record(rec, &data)
    }
}

/// Serializes a library to GDSII stream bytes.
pub fn write_library(lib: &Library) -> Result<Vec<u8>, GdsError> {
    let mut w = Writer { buf: Vec::new() };
    w.int2(HEADER, &[600])?;
    w.int2(BGNLIB, &TIMESTAMP)?;
    w.ascii(LIBNAME, &lib.name)?;
    let mut units = Vec::with_capacity(16);
    units.extend_from_slice(&encode_real8(lib.db_in_user));
    units.extend_from_slice(&encode_real8(lib.db_in_meters));
    w.record(UNITS, &units)?;
    for s in &lib.structures {
        w.int2(BGNSTR, &TIMESTAMP)?;
        w.ascii(STRNAME, &s.name)?;
        for b in &s.boundaries {
            if b.xy.len() > MAX_XY_POINTS {
                return Err(GdsError::Overflow(format!(
                    "boundary with {} points exceeds {MAX_XY_POINTS}",
                    b.xy.len()
                )));
            }
            w.record(BOUNDARY, &[])?;
            w.int2(LAYER, &[b.layer])?;
            w.int2(DATATYPE, &[b.datatype])?;
            let data: Vec<u8> =
                b.xy.iter()
                    .flat_map(|&(x, y)| [x.to_be_bytes(), y.to_be_bytes()])
                    .flatten()
                    .collect();
            w.record(XY, &data)?;
            w.record(ENDEL, &[])?;
        }
        w.record(ENDSTR, &[])?;
    }
    w.record(ENDLIB, &[])?;
    Ok(w.buf)
}

struct Record<'a> {
    offset: usize,
    kind: u16,
    data: &'a [u8],
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<Record<'a>, GdsError> {
        let offset = self.pos;
        let head = self
            .bytes
            .get(offset..offset + 4)
            .ok_or(GdsError::Truncated(offset))?;
        let len = u16::from_be_bytes([head[0], head[1]]) as usize;
        let kind = u16::from_be_bytes([head[2], head[3]]);
        if len < 4 || len % 2 == 1 {
            return Err(GdsError::Malformed {
                offset,
                reason: format!("record length {len}"),
            });
        }
        let data = self
            .bytes
            .get(offset + 4..offset + len)
            .ok_or(GdsError::Truncated(offset))?;
        self.pos += len;
        Ok(Record { offset, kind, data })
    }

    fn expect(&mut self, kind: u16) -> Result<Record<'a>, GdsError> {
        let r = self.next()?;
        if r.kind != kind {
            return Err(GdsError::Malformed {
                offset: r.offset,
                reason: format!("expected record 0x{kind:04x}, found 0x{:04x}", r.kind),
            });
        }
        Ok(r)
    }
}

fn int2_one(r: &Record) -> Result<i16, GdsError> {
    match r.data {
        [a, b] => Ok(i16::from_be_bytes([*a, *b])),
        _ => Err(GdsError::Malformed {
            offset: r.offset,
            reason: "expected one 2-byte integer".into(),
        }),
    }
}

fn ascii(r: &Record) -> Result<String, GdsError> {
    let trimmed = r.data.split(|&b| b == 0).next().unwrap_or(&[]);
    String::from_utf8(trimmed.to_vec()).map_err(|_| GdsError::Malformed {
        offset: r.offset,
        reason: "name is not valid text".into(),
    })
}

/// Parses a flat boundary-only GDSII stream.
pub fn read_library(bytes: &[u8]) -> Result<Library, GdsError> {
    let mut rd = Reader { bytes, pos: 0 };
    rd.expect(HEADER)?;
    rd.expect(BGNLIB)?;
    let name = ascii(&rd.expect(LIBNAME)?)?;
    let u = rd.expect(UNITS)?;
    if u.data.len() != 16 {
        return Err(GdsError::Malformed {
            offset: u.offset,
            reason: "UNITS needs two reals".into(),
        });
    }
    let mut a = [0u8; 8];
    let mut b = [0u8; 8];
    a.copy_from_slice(&u.data[..8]);
    b.copy_from_slice(&u.data[8..]);
    let mut lib = Library {
        name,
        db_in_user: decode_real8(a),
        db_in_meters: decode_real8(b),
        structures: Vec::new(),
    };
    loop {
        let r = rd.next()?;
        match r.kind {
            ENDLIB => return Ok(lib),
            BGNSTR => {
                let name = ascii(&rd.expect(STRNAME)?)?;
                let mut s = Structure {
                    name,
                    boundaries: Vec::new(),
                };
                loop {
                    let e = rd.next()?;
                    match e.kind {
                        ENDSTR => break,
                        BOUNDARY => s.boundaries.push(read_boundary(&mut rd)?),
                        k => {
                            return Err(GdsError::Unsupported {
                                offset: e.offset,
                                record: k,
                            })
                        }
                    }
                }
                lib.structures.push(s);
            }
            k => {
                return Err(GdsError::Unsupported {
                    offset: r.offset,
                    record: k,
                })
            }
        }
    }
}

fn read_boundary(rd: &mut Reader) -> Result<Boundary, GdsError> {
    let layer = int2_one(&rd.expect(LAYER)?)?;
    let datatype = int2_one(&rd.expect(DATATYPE)?)?;
    let r = rd.expect(XY)?;
    if r.data.len() % 8 != 0 || r.data.len() < 32 {
        return Err(GdsError::Malformed {
            offset: r.offset,
            reason: "XY needs at least four point pairs".into(),
        });
    }
    let xy: Vec<(i32, i32)> = r
        .data
        .chunks_exact(8)
        .map(|c| {
            (
                i32::from_be_bytes([c[0], c[1], c[2], c[3]]),
                i32::from_be_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect();
    if xy.first() != xy.last() {
        return Err(GdsError::Malformed {
            offset: r.offset,
            reason: "boundary is not closed".into(),
        });
    }
    rd.expect(ENDEL)?;
    Ok(Boundary {
        layer,
        datatype,
        xy,
    })
}

fn to_db(v: f64) -> Result<i32, GdsError> {
    let d = (v / DB_IN_USER).round();
    if !(d >= i32::MIN as f64 && d <= i32::MAX as f64) {
        return Err(GdsError::Overflow(format!("coordinate {v} µm")));
    }
    Ok(d as i32)
}

/// Converts rendered etch polygons to a single-structure library.
pub fn chip_library(design: &ChipDesign, rendered: &RenderedChip) -> Result<Library, GdsError> {
    let mut boundaries = Vec::with_capacity(rendered.polygons.len());
    for p in &rendered.polygons {
        let mut xy = Vec::with_capacity(p.points.len() + 1);
        for q in &p.points {
            let v = (to_db(q.x)?, to_db(q.y)?);
            // snapping can merge neighbours on very fine arcs
            if xy.last() != Some(&v) {
                xy.push(v);
            }
        }
        while xy.len() > 1 && xy.first() == xy.last() {
            xy.pop();
        }
        if xy.len() < 3 {
            continue;
        }
        xy.push(xy[0]);
        boundaries.push(Boundary {
            layer: ETCH_LAYER,
            datatype: ETCH_DATATYPE,
            xy,
        });
    }
    let name: String = design.name.to_uppercase().chars().take(32).collect();
    Ok(Library {
        name: format!("{name}.DB"),
        db_in_user: DB_IN_USER,
        db_in_meters: DB_IN_METERS,
        structures: vec![Structure { name, boundaries }],
    })
}

/// Boundaries of every structure as polygons in user units (closing point dropped).
pub fn library_polygons(lib: &Library) -> Vec<Polygon> {
    let scale = lib.db_in_user;
    lib.structures
        .iter()
        .flat_map(|s| &s.boundaries)
        .map(|b| {
            let n = b.xy.len().saturating_sub(1);
            Polygon::new(
                b.xy[..n]
                    .iter()
                    .map(|&(x, y)| Point::new(x as f64 * scale, y as f64 * scale))
                    .collect(),
            )
        })
        .collect()
}
