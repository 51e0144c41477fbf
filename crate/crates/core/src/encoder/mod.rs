//! Question and relation text encoders behind one interface.
//!
//! Three backends: a trainable bag-of-tokens [`ToyEncoder`], a precomputed
//! [`FileEncoder`] table and a [`RemoteEncoder`] HTTP client. Results are
//! cached by exact `(kind, text)`; mutating the toy backend clears the cache.

mod file;
mod remote;
mod text;
mod toy;

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use file::FileEncoder;
pub use remote::{RemoteEncoder, ATTEMPTS as REMOTE_ATTEMPTS};
pub use text::{relation_text, tokenize};
pub use toy::{ToyEncoder, UNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Question,
    Relation,
}

#[derive(Clone, Debug)]
pub enum Backend<S> {
    Toy(ToyEncoder<S>),
    File(FileEncoder),
    Remote(RemoteEncoder),
}

/// One cached embedding, as persisted between runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub kind: TextKind,
    pub text: String,
    pub vector: Vec<f64>,
}

#[derive(Debug)]
pub struct Encoder<S> {
    backend: Backend<S>,
    frozen: bool,
    cache: RwLock<HashMap<(TextKind, String), Vec<S>>>,
}

impl<S: Scalar> Clone for Encoder<S> {
    fn clone(&self) -> Self {
        Self { backend: self.backend.clone(), frozen: self.frozen, cache: RwLock::new(HashMap::new()) }
    }
}

impl<S: Scalar> Encoder<S> {
    /// File and remote backends are always frozen.
    pub fn new(backend: Backend<S>) -> Self {
        let frozen = !matches!(backend, Backend::Toy(_));
        Self { backend, frozen, cache: RwLock::new(HashMap::new()) }
    }

    pub fn dim(&self) -> usize {
        match &self.backend {
            Backend::Toy(t) => t.dim(),
            Backend::File(f) => f.dim(),
            Backend::Remote(r) => r.dim(),
        }
    }

    pub fn backend(&self) -> &Backend<S> {
        &self.backend
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_trainable(&self) -> bool {
        !self.frozen && matches!(self.backend, Backend::Toy(_))
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn toy(&self) -> Option<&ToyEncoder<S>> {
        match &self.backend {
            Backend::Toy(t) => Some(t),
            _ => None,
        }
    }

    /// Mutable toy parameters; clears the cache.
    pub fn toy_mut(&mut self) -> Result<&mut ToyEncoder<S>> {
        if self.frozen {
            return Err(Error::NotTrainable);
        }
        self.cache.get_mut().expect("cache lock poisoned").clear();
        match &mut self.backend {
            Backend::Toy(t) => Ok(t),
            _ => Err(Error::NotTrainable),
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    /// Cache contents ordered by `(kind, text)`.
    pub fn cache_entries(&self) -> Vec<CacheEntry> {
        let cache = self.cache.read().expect("cache lock poisoned");
        let mut out: Vec<CacheEntry> = cache
            .iter()
            .map(|((kind, text), v)| CacheEntry {
                kind: *kind,
                text: text.clone(),
                vector: v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect(),
            })
            .collect();
        out.sort_by(|a, b| (a.kind, &a.text).cmp(&(b.kind, &b.text)));
        out
    }

    /// Seeds the cache of a frozen encoder; a trainable one would go stale.
    pub fn preload_cache(&self, entries: impl IntoIterator<Item = CacheEntry>) -> Result<usize> {
        if !self.frozen {
            return Err(Error::Encoder("only a frozen encoder can reuse cached vectors".into()));
        }
        let mut cache = self.cache.write().expect("cache lock poisoned");
        let mut n = 0;
        for e in entries {
            if e.vector.len() != self.dim() {
                return Err(Error::Shape(format!("cached vector has length {}, expected {}", e.vector.len(), self.dim())));
            }
            cache.insert((e.kind, e.text), e.vector.into_iter().map(S::lit).collect());
            n += 1;
        }
        Ok(n)
    }

    pub fn encode(&self, text: &str, kind: TextKind) -> Result<Vec<S>> {
        let key = (kind, text.to_owned());
        if let Some(v) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = self.encode_uncached(text, kind)?;
        self.cache.write().expect("cache lock poisoned").insert(key, v.clone());
        Ok(v)
    }

    /// Order-preserving batch encode. The first failure is reported with its index.
    pub fn encode_batch(&self, texts: &[String], kind: TextKind) -> Result<Vec<Vec<S>>> {
        if let Backend::Remote(remote) = &self.backend {
            let misses: Vec<usize> = {
                let cache = self.cache.read().expect("cache lock poisoned");
                (0..texts.len()).filter(|&i| !cache.contains_key(&(kind, texts[i].clone()))).collect()
            };
            if !misses.is_empty() {
                let payload: Vec<String> = misses.iter().map(|&i| remote_text(&texts[i], kind)).collect();
                let vectors = remote
                    .encode_batch(&payload)
                    .map_err(|e| Error::Batch { index: misses[0], source: Box::new(e) })?;
                let mut cache = self.cache.write().expect("cache lock poisoned");
                for (&i, v) in misses.iter().zip(vectors) {
                    cache.insert((kind, texts[i].clone()), v.into_iter().map(S::lit).collect());
                }
            }
        }
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| self.encode(t, kind).map_err(|e| Error::Batch { index, source: Box::new(e) }))
            .collect()
    }

    fn encode_uncached(&self, text: &str, kind: TextKind) -> Result<Vec<S>> {
        match &self.backend {
            Backend::Toy(toy) => Ok(match kind {
                TextKind::Question => toy.encode(text),
                TextKind::Relation => toy.encode(&relation_text(text)),
            }),
            Backend::File(file) => Ok(file.get(text)?.iter().map(|&x| S::lit(x as f64)).collect()),
            Backend::Remote(remote) => {
                let mut v = remote.encode_batch(&[remote_text(text, kind)])?;
                Ok(v.pop().unwrap_or_default().into_iter().map(S::lit).collect())
            }
        }
    }
}

fn remote_text(text: &str, kind: TextKind) -> String {
    match kind {
        TextKind::Question => text.to_owned(),
        TextKind::Relation => relation_text(text),
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toy() -> Encoder<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        Encoder::new(Backend::Toy(ToyEncoder::from_texts(["who is the spouse of ada", "people person spouse"], 8, &mut rng)))
    }

    #[test]
    fn cache_round_trip_is_transparent() {
        let mut enc = toy();
        enc.freeze();
        let fresh = enc.encode("who is the spouse of ada", TextKind::Question).unwrap();
        let entries = enc.cache_entries();
        let mut other = toy();
        assert!(other.preload_cache(entries.clone()).is_err());
        other.freeze();
        assert_eq!(other.preload_cache(entries).unwrap(), 1);
        assert_eq!(other.encode("who is the spouse of ada", TextKind::Question).unwrap(), fresh);
    }

    #[test]
    fn batch_of_nothing() {
        assert!(toy().encode_batch(&[], TextKind::Question).unwrap().is_empty());
    }

    #[test]
    fn repeated_text_is_cached_once() {
        let enc = toy();
        let t = "who is the spouse of ada".to_string();
        let out = enc.encode_batch(&[t.clone(), t], TextKind::Question).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(enc.cache_len(), 1);
    }

    #[test]
    fn relations_are_textualised_before_encoding() {
        let enc = toy();
        let direct = enc.toy().unwrap().encode("people person spouse");
        assert_eq!(enc.encode("people.person.spouse", TextKind::Relation).unwrap(), direct);
    }

    #[test]
    fn freezing_blocks_mutation() {
        let mut enc = toy();
        assert!(enc.is_trainable());
        enc.encode("x", TextKind::Question).unwrap();
        enc.toy_mut().unwrap();
        assert_eq!(enc.cache_len(), 0);
        enc.freeze();
        assert!(matches!(enc.toy_mut(), Err(Error::NotTrainable)));
    }

    #[test]
    fn file_backend_reports_missing_key_with_index() {
        let mut f = FileEncoder::new(2);
        f.insert("a", vec![1.0, 2.0]).unwrap();
        let enc: Encoder<f64> = Encoder::new(Backend::File(f));
        assert!(enc.is_frozen());
        assert_eq!(enc.encode("a", TextKind::Relation).unwrap(), vec![1.0, 2.0]);
        match enc.encode_batch(&["a".into(), "b".into()], TextKind::Question) {
            Err(Error::Batch { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::MissingEmbedding(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
