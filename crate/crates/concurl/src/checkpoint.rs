//! Binary container for model and ensemble state: magic "CCRL", a format
//! version, a JSON metadata document, then named f64 tensor blobs. Writes
//! are canonical (sorted JSON keys, caller-fixed blob order), so
//! save -> load -> save reproduces the original file byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CCRL";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

/// A metadata document plus ordered named tensors.
#[derive(Clone, Debug)]
pub struct Container {
    pub meta: serde_json::Value,
    pub blobs: Vec<(String, Tensor)>,
}

impl Container {
    pub fn new(meta: serde_json::Value, blobs: Vec<(String, Tensor)>) -> Self {
        Container { meta, blobs }
    }

    pub fn blob(&self, name: &str) -> Option<&Tensor> {
        self.blobs.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        // serde_json sorts map keys, so the byte stream is canonical.
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Data(format!("metadata serialization: {e}")))?;
        out.write_all(&(meta.len() as u32).to_le_bytes())?;
        out.write_all(&meta)?;
        out.write_all(&(self.blobs.len() as u32).to_le_bytes())?;
        for (name, tensor) in &self.blobs {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u16::MAX as usize {
                return Err(Error::Data(format!("blob name too long: {name}")));
            }
            out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
            out.write_all(name_bytes)?;
            out.write_all(&[DTYPE_F64])?;
            let shape = tensor.shape();
            out.write_all(&[shape.len() as u8])?;
            for &d in shape {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in tensor.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let corrupt = |what: &str| Error::Data(format!("{}: corrupt container ({what})", path.display()));
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8]> {
            if bytes.len() < *pos + n {
                return Err(corrupt(what));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4, "magic")? != MAGIC {
            return Err(Error::Data(format!("{}: not a CCRL file", path.display())));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported version {version}, expected {VERSION}",
                path.display()
            )));
        }
        let meta_len =
            u32::from_le_bytes(take(&mut pos, 4, "meta length")?.try_into().unwrap()) as usize;
        let meta: serde_json::Value = serde_json::from_slice(take(&mut pos, meta_len, "metadata")?)
            .map_err(|_| corrupt("metadata JSON"))?;
        let nblobs =
            u32::from_le_bytes(take(&mut pos, 4, "blob count")?.try_into().unwrap()) as usize;
        let mut blobs = Vec::with_capacity(nblobs);
        for _ in 0..nblobs {
            let name_len =
                u16::from_le_bytes(take(&mut pos, 2, "name length")?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(take(&mut pos, name_len, "name")?)
                .map_err(|_| corrupt("blob name"))?
                .to_string();
            let dtype = take(&mut pos, 1, "dtype")?[0];
            if dtype != DTYPE_F64 {
                return Err(corrupt("unsupported dtype"));
            }
            let rank = take(&mut pos, 1, "rank")?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(
                    u32::from_le_bytes(take(&mut pos, 4, "dimension")?.try_into().unwrap())
                        as usize,
                );
            }
            let count: usize = shape.iter().product();
            let payload = take(&mut pos, count * 8, "payload")?;
            let data: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blobs.push((name, Tensor::new(shape, data)?));
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Container { meta, blobs })
    }
}
