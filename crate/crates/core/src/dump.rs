//! Binary field dumps with a JSON sidecar.
//!
//! Layout (little endian): magic `SGFD`, version u32, dim u32, shape as dim
//! u64, spacing f64, origin as dim f64, component count u32, eigenvalues f64,
//! normalized u8, dirichlet u8, domain tag u8 with its parameters, then every
//! component as row-major f64 with the last axis fastest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SegregatedField;
use crate::grid::{Domain, Grid};

const MAGIC: &[u8; 4] = b"SGFD";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub n_components: usize,
    pub eigenvalues: Vec<f64>,
    pub normalized: bool,
    pub dirichlet: bool,
    pub domain: Domain,
    pub byte_order: String,
    pub data_offset: usize,
}

/// Path of the JSON sidecar belonging to a binary dump.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn header_of(u: &SegregatedField, data_offset: usize) -> DumpHeader {
    let g = u.grid();
    DumpHeader {
        format: "SGFD".into(),
        version: VERSION,
        dim: g.dim(),
        shape: g.shape().to_vec(),
        spacing: g.spacing(),
        origin: g.origin()[..g.dim()].to_vec(),
        n_components: u.n_components(),
        eigenvalues: u.eigenvalues().to_vec(),
        normalized: u.is_normalized(),
        dirichlet: u.is_dirichlet(),
        domain: g.domain().clone(),
        byte_order: "little".into(),
        data_offset,
    }
}

pub fn encode(u: &SegregatedField) -> Vec<u8> {
    let g = u.grid();
    let mut b = Vec::with_capacity(64 + 8 * u.n_components() * g.len());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &n in g.shape() {
        b.extend_from_slice(&(n as u64).to_le_bytes());
    }
    b.extend_from_slice(&g.spacing().to_le_bytes());
    for &o in &g.origin()[..g.dim()] {
        b.extend_from_slice(&o.to_le_bytes());
    }
    b.extend_from_slice(&(u.n_components() as u32).to_le_bytes());
    for &l in u.eigenvalues() {
        b.extend_from_slice(&l.to_le_bytes());
    }
    b.push(u.is_normalized() as u8);
    b.push(u.is_dirichlet() as u8);
    let put = |b: &mut Vec<u8>, v: &[f64]| {
        for x in v {
            b.extend_from_slice(&x.to_le_bytes());
        }
    };
    match g.domain() {
        Domain::Rectangle { lo, hi } => {
            b.push(0);
            put(&mut b, lo);
            put(&mut b, hi);
        }
        Domain::Ball { center, radius } => {
            b.push(1);
            put(&mut b, center);
            put(&mut b, &[*radius]);
        }
        Domain::Annulus {
            center,
            inner,
            outer,
        } => {
            b.push(2);
            put(&mut b, center);
            put(&mut b, &[*inner, *outer]);
        }
    }
    for c in u.components() {
        put(&mut b, c);
    }
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).ok_or("length overflow")?;
        let s = self.bytes.get(self.pos..end).ok_or("truncated file")?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<SegregatedField, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = r.u32()? as usize;
    if !(2..=3).contains(&dim) {
        return Err(format!("bad dimension {dim}"));
    }
    let shape: Vec<usize> = (0..dim)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<std::result::Result<_, _>>()?;
    let spacing = r.f64()?;
    let origin = r.f64s(dim)?;
    let n = r.u32()? as usize;
    if n == 0 || n > 1 << 16 {
        return Err(format!("bad component count {n}"));
    }
    let eigenvalues = r.f64s(n)?;
    let normalized = r.u8()? != 0;
    let dirichlet = r.u8()? != 0;
    let domain = match r.u8()? {
        0 => Domain::Rectangle {
            lo: r.f64s(dim)?,
            hi: r.f64s(dim)?,
        },
        1 => {
            let center = r.f64s(dim)?;
            Domain::Ball {
                center,
                radius: r.f64()?,
            }
        }
        2 => {
            let center = r.f64s(dim)?;
            Domain::Annulus {
                center,
                inner: r.f64()?,
                outer: r.f64()?,
            }
        }
        t => return Err(format!("unknown domain tag {t}")),
    };
    let grid = Grid::from_domain(domain, spacing).map_err(|e| e.to_string())?;
    if grid.shape() != shape.as_slice() {
        return Err(format!(
            "shape {shape:?} does not match domain grid {:?}",
            grid.shape()
        ));
    }
    if grid.origin()[..dim]
        .iter()
        .zip(&origin)
        .any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err("origin does not match domain grid".into());
    }
    let nodes = grid.len();
    let comps = (0..n)
        .map(|_| r.f64s(nodes))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let field =
        SegregatedField::new(grid, comps, eigenvalues, dirichlet).map_err(|e| e.to_string())?;
    if field.is_normalized() != normalized {
        return Err("normalization flag disagrees with the data".into());
    }
    Ok(field)
}

/// Writes `path` and its JSON sidecar.
pub fn write_dump(u: &SegregatedField, path: &Path) -> Result<()> {
    let bytes = encode(u);
    let data_offset = bytes.len() - 8 * u.n_components() * u.grid().len();
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&header_of(u, data_offset))?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<SegregatedField> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::BadDump {
        path: path.to_path_buf(),
        reason,
    })
}

/// Reads only the JSON sidecar.
pub fn read_header(path: &Path) -> Result<DumpHeader> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_oracle, OracleSpec};

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::from_domain(Domain::ball(&[0.1, -0.2], 0.7), 1.0 / 20.0).unwrap();
        let f = make_oracle(&g, &OracleSpec::new(3, [0.1, -0.2, 0.0]).rotated(0.3)).unwrap();
        let bytes = encode(&f);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back), bytes);
        assert_eq!(back.grid(), f.grid());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
