//! Named-section binary container for checkpoints.
//!
//! Layout (little-endian): magic `RSLSNAP\0`, `u32` version, `u32` section
//! count, then per section in name order: `u32` name length, name bytes,
//! `u8` kind (0 = f64, 1 = u64, 2 = UTF-8 text), `u32` rank, `u64` dims,
//! `u64` element or byte count, payload.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{Adam, Mat, Mlp};
use crate::rng::{Rng, RngState};

pub const MAGIC: &[u8; 8] = b"RSLSNAP\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SectionData {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub shape: Vec<u64>,
    pub data: SectionData,
}

fn missing(name: &str) -> Error {
    Error::Snapshot(format!("missing or mistyped section {name}"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub sections: BTreeMap<String, Section>,
}

impl Snapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn put_f64(&mut self, name: impl Into<String>, shape: Vec<u64>, data: Vec<f64>) {
        self.sections.insert(name.into(), Section { shape, data: SectionData::F64(data) });
    }

    pub fn put_u64(&mut self, name: impl Into<String>, data: Vec<u64>) {
        let shape = vec![data.len() as u64];
        self.sections.insert(name.into(), Section { shape, data: SectionData::U64(data) });
    }

    pub fn put_u64_matrix(&mut self, name: impl Into<String>, cols: usize, data: Vec<u64>) {
        let rows = data.len().checked_div(cols).unwrap_or(0);
        self.sections
            .insert(name.into(), Section { shape: vec![rows as u64, cols as u64], data: SectionData::U64(data) });
    }

    pub fn put_text(&mut self, name: impl Into<String>, text: impl Into<String>) {
        let text = text.into();
        self.sections.insert(name.into(), Section { shape: vec![text.len() as u64], data: SectionData::Text(text) });
    }

    pub fn f64s(&self, name: &str) -> Result<(&[u64], &[f64])> {
        match self.sections.get(name) {
            Some(Section { shape, data: SectionData::F64(v) }) => Ok((shape, v)),
            _ => Err(missing(name)),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.sections.get(name) {
            Some(Section { data: SectionData::U64(v), .. }) => Ok(v),
            _ => Err(missing(name)),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.sections.get(name) {
            Some(Section { data: SectionData::Text(t), .. }) => Ok(t),
            _ => Err(missing(name)),
        }
    }

    pub fn u64_at(&self, name: &str, i: usize) -> Result<u64> {
        self.u64s(name)?.get(i).copied().ok_or_else(|| missing(name))
    }

    pub fn put_mat(&mut self, name: impl Into<String>, m: &Mat) {
        self.put_f64(name, vec![m.nrows() as u64, m.ncols() as u64], m.iter().copied().collect());
    }

    pub fn mat(&self, name: &str) -> Result<Mat> {
        let (shape, data) = self.f64s(name)?;
        if shape.len() != 2 {
            return Err(Error::Snapshot(format!("section {name} is not a matrix")));
        }
        Mat::from_shape_vec((shape[0] as usize, shape[1] as usize), data.to_vec())
            .map_err(|e| Error::Snapshot(format!("section {name}: {e}")))
    }

    pub fn put_rng(&mut self, name: impl Into<String>, rng: &Rng) {
        self.put_u64(name, RngState::capture(rng).to_words());
    }

    pub fn rng(&self, name: &str) -> Result<Rng> {
        RngState::from_words(self.u64s(name)?)
            .map(|s| s.restore())
            .ok_or_else(|| Error::Snapshot(format!("section {name} is not a generator state")))
    }

    pub fn put_mlp(&mut self, prefix: &str, net: &Mlp) {
        for (k, p) in net.params().into_iter().enumerate() {
            self.put_mat(format!("{prefix}.{k}"), p);
        }
    }

    /// Overwrites `net`'s parameters; shapes must match.
    pub fn load_mlp(&self, prefix: &str, net: &mut Mlp) -> Result<()> {
        for (k, p) in net.params_mut().into_iter().enumerate() {
            let m = self.mat(&format!("{prefix}.{k}"))?;
            if m.dim() != p.dim() {
                return Err(Error::Snapshot(format!("{prefix}.{k}: shape {:?} != {:?}", m.dim(), p.dim())));
            }
            *p = m;
        }
        Ok(())
    }

    pub fn put_adam(&mut self, prefix: &str, opt: &Adam) {
        self.put_u64(format!("{prefix}.steps"), vec![opt.step_count]);
        for (k, (m, v)) in opt.first_moment.iter().zip(&opt.second_moment).enumerate() {
            self.put_mat(format!("{prefix}.m.{k}"), m);
            self.put_mat(format!("{prefix}.v.{k}"), v);
        }
    }

    pub fn load_adam(&self, prefix: &str, opt: &mut Adam) -> Result<()> {
        opt.step_count = self.u64_at(&format!("{prefix}.steps"), 0)?;
        for k in 0..opt.first_moment.len() {
            let m = self.mat(&format!("{prefix}.m.{k}"))?;
            let v = self.mat(&format!("{prefix}.v.{k}"))?;
            if m.dim() != opt.first_moment[k].dim() || v.dim() != opt.second_moment[k].dim() {
                return Err(Error::Snapshot(format!("{prefix}: moment shape mismatch")));
            }
            opt.first_moment[k] = m;
            opt.second_moment[k] = v;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, sec) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let kind: u8 = match sec.data {
                SectionData::F64(_) => 0,
                SectionData::U64(_) => 1,
                SectionData::Text(_) => 2,
            };
            out.push(kind);
            out.extend_from_slice(&(sec.shape.len() as u32).to_le_bytes());
            for d in &sec.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            match &sec.data {
                SectionData::F64(v) => {
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                SectionData::U64(v) => {
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                SectionData::Text(t) => {
                    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                    out.extend_from_slice(t.as_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Snapshot("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()?;
        let mut snap = Snapshot::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Snapshot("section name is not UTF-8".into()))?;
            let kind = r.take(1)?[0];
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let n = r.u64()? as usize;
            let data = match kind {
                0 => SectionData::F64((0..n).map(|_| r.u64().map(f64::from_bits)).collect::<Result<_>>()?),
                1 => SectionData::U64((0..n).map(|_| r.u64()).collect::<Result<_>>()?),
                2 => SectionData::Text(
                    String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Snapshot("text is not UTF-8".into()))?,
                ),
                k => return Err(Error::Snapshot(format!("unknown section kind {k}"))),
            };
            if snap.sections.insert(name.clone(), Section { shape, data }).is_some() {
                return Err(Error::Snapshot(format!("duplicate section {name}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Snapshot("trailing bytes after the last section".into()));
        }
        Ok(snap)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Snapshot("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}
