//! Parameter checkpoint file.
//!
//! Little-endian: magic `KQMP`, `u32` version, `u32` T, `u32` d, `u32` h, then
//! `f64` values of every block in [`ModelParams::blocks`] order (row-major),
//! then two length-prefixed UTF-8 strings: the encoder checkpoint reference
//! and the config fingerprint.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::{Dims, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"KQMP";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<S> {
    pub params: ModelParams<S>,
    pub encoder_ref: String,
    pub fingerprint: String,
}

impl<S: Scalar> Checkpoint<S> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let dims = self.params.dims();
        out.write_all(MAGIC)?;
        for x in [VERSION, dims.num_steps as u32, dims.features as u32, dims.hidden as u32] {
            out.write_all(&x.to_le_bytes())?;
        }
        for block in self.params.blocks() {
            for v in block {
                out.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        for s in [&self.encoder_ref, &self.fingerprint] {
            out.write_all(&(s.len() as u32).to_le_bytes())?;
            out.write_all(s.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}{}", if &magic == b"KQTE" { " (this is an encoder checkpoint)" } else { "" })));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let dims = Dims {
            num_steps: read_u32(&mut r)? as usize,
            features: read_u32(&mut r)? as usize,
            hidden: read_u32(&mut r)? as usize,
        };
        dims.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut params = ModelParams::zeros(dims);
        for block in params.blocks_mut() {
            for v in block.iter_mut() {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *v = S::lit(f64::from_le_bytes(b));
            }
        }
        let encoder_ref = read_string(&mut r)?;
        let fingerprint = read_string(&mut r)?;
        Ok(Self { params, encoder_ref, fingerprint })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(e.to_string()))
}
