//! Trainable bag-of-tokens encoder: `tanh(mean of token rows)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use super::text::tokenize;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const UNK: &str = "<unk>";
const MAGIC: &[u8; 4] = b"KQTE";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder<S> {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    /// Row 0 is the UNK row.
    table: Matrix<S>,
}

impl<S: Scalar> ToyEncoder<S> {
    /// Builds the vocabulary from the tokens of `texts`; rows ~ U(-1, 1).
    pub fn from_texts<'a, R: Rng + ?Sized>(texts: impl IntoIterator<Item = &'a str>, dim: usize, rng: &mut R) -> Self {
        let mut tokens = vec![UNK.to_owned()];
        let mut index = HashMap::from([(UNK.to_owned(), 0)]);
        for text in texts {
            for tok in tokenize(text) {
                if !index.contains_key(&tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok);
                }
            }
        }
        let table = Matrix::from_fn(tokens.len(), dim, |_, _| S::lit(rng.gen_range(-1.0..1.0)));
        Self { tokens, index, table }
    }

    /// Builds an encoder from explicit rows; the first entry must be [`UNK`].
    pub fn from_rows(tokens: Vec<String>, table: Matrix<S>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Encoder(format!("first vocabulary entry must be {UNK}")));
        }
        if tokens.len() != table.rows() {
            return Err(Error::Shape(format!("{} tokens for {} rows", tokens.len(), table.rows())));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tokens, index, table })
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn table(&self) -> &Matrix<S> {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut Matrix<S> {
        &mut self.table
    }

    pub fn token_row(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Row ids of the tokens of `text`; an empty token list encodes as UNK.
    pub fn token_ids(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text).iter().map(|t| self.index.get(t).copied().unwrap_or(0)).collect();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    }

    pub fn encode(&self, text: &str) -> Vec<S> {
        self.encode_ids(&self.token_ids(text))
    }

    pub fn encode_ids(&self, ids: &[usize]) -> Vec<S> {
        let mut acc = vec![S::zero(); self.dim()];
        for &id in ids {
            for (a, &w) in acc.iter_mut().zip(self.table.row(id)) {
                *a += w;
            }
        }
        let n = S::lit(ids.len() as f64);
        acc.into_iter().map(|a| (a / n).tanh()).collect()
    }

    /// Accumulates `dL/dtable` given `dL/dh` for the encoding `h` of `ids`.
    pub fn backward_ids(&self, ids: &[usize], output: &[S], grad_output: &[S], grad_table: &mut Matrix<S>) {
        let n = S::lit(ids.len() as f64);
        let pre: Vec<S> = output
            .iter()
            .zip(grad_output)
            .map(|(&h, &g)| g * (S::one() - h * h) / n)
            .collect();
        for &id in ids {
            for (gt, &p) in grad_table.row_mut(id).iter_mut().zip(&pre) {
                *gt += p;
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.dim() as u32).to_le_bytes())?;
        out.write_all(&(self.tokens.len() as u32).to_le_bytes())?;
        for (i, tok) in self.tokens.iter().enumerate() {
            out.write_all(&(tok.len() as u32).to_le_bytes())?;
            out.write_all(tok.as_bytes())?;
            for v in self.table.row(i) {
                out.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a toy encoder checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported toy encoder version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for _ in 0..count {
            tokens.push(read_string(&mut r)?);
            for _ in 0..dim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(S::lit(f64::from_le_bytes(b)));
            }
        }
        Self::from_rows(tokens, Matrix::from_vec(count, dim, data)?)
    }
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_string(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("invalid utf-8 key: {e}")))
}
