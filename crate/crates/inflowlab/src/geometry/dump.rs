//! Binary grid dumps: one UTF-8 JSON header line, then little-endian `f64`
//! samples, component-major with x1 fastest.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::domain::ChannelDomain;
use super::grid::{GridVectorField, ScalarGrid};

pub const GRID_SCHEMA: &str = "inflowlab.grid/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub schema: String,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Ny")]
    pub ny: usize,
    #[serde(rename = "Nz")]
    pub nz: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    #[serde(rename = "Lz")]
    pub lz: f64,
    pub t: f64,
    pub components: usize,
    /// Free-form label such as `"Y"` or `"region"`.
    #[serde(default)]
    pub kind: String,
}

impl DumpHeader {
    pub fn domain(&self) -> Result<ChannelDomain> {
        ChannelDomain::new(self.lx, self.ly, self.lz, self.nx, self.ny, self.nz)
    }
}

/// Raw dump contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub header: DumpHeader,
    pub comps: Vec<Vec<f64>>,
}

impl Dump {
    pub fn from_field(f: &GridVectorField, kind: &str) -> Self {
        Dump {
            header: header(&f.domain, f.t, 3, kind),
            comps: f.comps.to_vec(),
        }
    }

    pub fn from_scalar(f: &ScalarGrid, t: f64, kind: &str) -> Self {
        Dump {
            header: header(&f.domain, t, 1, kind),
            comps: vec![f.values.clone()],
        }
    }

    pub fn into_field(self) -> Result<GridVectorField> {
        if self.header.components != 3 {
            return Err(Error::Format(format!(
                "expected a 3-component dump, found {}",
                self.header.components
            )));
        }
        let d = self.header.domain()?;
        let mut it = self.comps.into_iter();
        let comps = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        GridVectorField::new(d, self.header.t, comps)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let line = serde_json::to_string(&self.header)?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(8 * self.comps.iter().map(Vec::len).sum::<usize>());
        for c in &self.comps {
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: DumpHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Format(format!("bad dump header: {e}")))?;
        if header.schema != GRID_SCHEMA {
            return Err(Error::Format(format!("unsupported dump schema {:?}", header.schema)));
        }
        let d = header.domain().map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let want = 8 * d.len() * header.components;
        if bytes.len() != want {
            return Err(Error::Format(format!(
                "dump body has {} bytes, expected {want}",
                bytes.len()
            )));
        }
        let mut comps = Vec::with_capacity(header.components);
        for c in bytes.chunks_exact(8 * d.len()) {
            let v: Vec<f64> = c
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("dump contains non-finite samples".into()));
            }
            comps.push(v);
        }
        Ok(Dump { header, comps })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn header(d: &ChannelDomain, t: f64, components: usize, kind: &str) -> DumpHeader {
    DumpHeader {
        schema: GRID_SCHEMA.to_string(),
        nx: d.nx,
        ny: d.ny,
        nz: d.nz,
        lx: d.lx,
        ly: d.ly,
        lz: d.lz,
        t,
        components,
        kind: kind.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;
    use crate::Vec3;

    #[test]
    fn roundtrip() {
        let d = ChannelDomain::new(2.0, 1.0, 1.0, 8, 4, 4).unwrap();
        let f = GridVectorField::from_fn(d, 0.25, Exec::Sequential, |x| Vec3::new(x.x, x.y * 2.0, -x.z));
        let mut buf = Vec::new();
        Dump::from_field(&f, "Y").write_to(&mut buf).unwrap();
        let back = Dump::read_from(&buf[..]).unwrap();
        assert_eq!(back.header.kind, "Y");
        assert_eq!(back.into_field().unwrap(), f);
    }

    #[test]
    fn rejects_truncation_and_unknown_schema() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = GridVectorField::zeros(d, 0.0);
        let mut buf = Vec::new();
        Dump::from_field(&f, "Y").write_to(&mut buf).unwrap();
        assert!(matches!(Dump::read_from(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let text = String::from_utf8_lossy(&buf).replace("grid/1", "grid/9");
        assert!(matches!(Dump::read_from(text.as_bytes()), Err(Error::Format(_))));
        assert!(Dump::read_from(&b"garbage"[..]).is_err());
    }
}
