use std::io::{Read, Write};
use std::path::Path;

use dpo_core::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tape::ParamRef;
use crate::{Error, Result};

/// One named parameter matrix in the flat layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
}

/// Flat parameter and gradient arrays with a name manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T = f64> {
    pub values: Vec<T>,
    pub grads: Vec<T>,
    manifest: Vec<ManifestEntry>,
}

impl<T: Scalar> Default for ParameterStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self { values: Vec::new(), grads: Vec::new(), manifest: Vec::new() }
    }

    /// Appends a zero-initialized `rows x cols` matrix.
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamRef {
        let offset = self.values.len();
        self.values.resize(offset + rows * cols, T::zero());
        self.grads.resize(offset + rows * cols, T::zero());
        self.manifest.push(ManifestEntry { name: name.into(), shape: [rows, cols], offset });
        ParamRef { offset, rows, cols }
    }

    /// Appends a matrix with entries uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot<R: Rng + ?Sized>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> ParamRef {
        let p = self.add(name, rows, cols);
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        for v in &mut self.values[p.offset..p.offset + p.len()] {
            *v = T::lit(rng.random_range(-limit..=limit));
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn get(&self, name: &str) -> Option<&ManifestEntry> {
        self.manifest.iter().find(|e| e.name == name)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn slice(&self, p: ParamRef) -> &[T] {
        &self.values[p.offset..p.offset + p.len()]
    }

    /// True when the manifest tiles `0..len` without gaps or overlap.
    pub fn layout_is_contiguous(&self) -> bool {
        let mut end = 0;
        for e in &self.manifest {
            if e.offset != end {
                return false;
            }
            end += e.shape[0] * e.shape[1];
        }
        end == self.values.len() && self.grads.len() == self.values.len()
    }
}

const MAGIC: &[u8; 8] = b"DPOCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    step: u64,
    config: serde_json::Value,
    manifest: Vec<ManifestEntry>,
}

/// Parameters plus the metadata needed to rebuild the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T = f64> {
    pub step: u64,
    pub config: serde_json::Value,
    pub store: ParameterStore<T>,
}

impl<T: Scalar> Checkpoint<T> {
    /// Layout: magic, little-endian u64 header length, JSON header, then every
    /// value as a little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header { step: self.step, config: self.config.clone(), manifest: self.store.manifest.clone() };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in &self.store.values {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut store = ParameterStore::new();
        for e in &header.manifest {
            let p = store.add(e.name.clone(), e.shape[0], e.shape[1]);
            if p.offset != e.offset {
                return Err(Error::Checkpoint(format!("manifest offset mismatch at {}", e.name)));
            }
        }
        let mut buf = [0u8; 8];
        for v in &mut store.values {
            r.read_exact(&mut buf)?;
            *v = T::lit(f64::from_le_bytes(buf));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self { step: header.step, config: header.config, store })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn manifest_tiles_the_array() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParameterStore::<f64>::new();
        let w = s.add_glorot("w", 3, 4, &mut rng);
        let b = s.add("b", 1, 4);
        assert_eq!(w.offset, 0);
        assert_eq!(b.offset, 12);
        assert_eq!(s.len(), 16);
        assert!(s.layout_is_contiguous());
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(s.slice(w).iter().all(|v| v.abs() <= limit));
        assert!(s.slice(b).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::<f64>::new();
        store.add_glorot("a", 5, 7, &mut rng);
        store.add_glorot("b", 1, 3, &mut rng);
        store.values[0] = f64::MIN_POSITIVE;
        let ck = Checkpoint { step: 42, config: serde_json::json!({"heads": 4}), store };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::<f64>::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.step, 42);
        assert_eq!(back.config, ck.config);
        assert_eq!(back.store.manifest(), ck.store.manifest());
        let bits = |s: &ParameterStore<f64>| s.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.store), bits(&ck.store));
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut store = ParameterStore::<f64>::new();
        store.add("w", 2, 2);
        let ck = Checkpoint { step: 0, config: serde_json::Value::Null, store };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        bytes.pop();
        assert!(Checkpoint::<f64>::read_from(bytes.as_slice()).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::<f64>::read_from(bytes.as_slice()).is_err());
    }
}
