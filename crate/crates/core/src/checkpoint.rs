//! Binary checkpoint format shared by every trained component.
//!
//! Layout (little-endian):
//!
//! ```text
//! "GGAN" | format_version u32 | component str | conditioning mode
//! | u32 n_params  { name str | u32 rank | u64 dims.. | f64 values.. }
//! | u32 n_optim   { name str | u64 t | f64 beta1 beta2 eps lr | u64 len | f64 m.. | f64 v.. }
//! | u32 rng_len | rng bytes | u64 epoch | u32 n_map { u64 class index }
//! ```
//!
//! Strings are `u32 length + UTF-8`. The conditioning mode is one byte
//! (0 none, 1 all_dims, 2 single_dim) followed, for single_dim, by the
//! dimension position byte.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dataio::{Dimension, LabelMode};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"GGAN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Generator,
    Discriminator,
    Codec,
    Classifier,
}

impl Component {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Generator => "generator",
            Self::Discriminator => "discriminator",
            Self::Codec => "codec",
            Self::Classifier => "classifier",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "generator" => Ok(Self::Generator),
            "discriminator" => Ok(Self::Discriminator),
            "codec" => Ok(Self::Codec),
            "classifier" => Ok(Self::Classifier),
            other => Err(Error::Checkpoint(format!("unknown component tag {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub component: Component,
    pub mode: Option<LabelMode>,
    pub params: ParamStore,
    pub optimizer: Vec<(String, AdamState)>,
    pub rng_state: Vec<u8>,
    pub epoch: u64,
    /// Classifier output slot -> class index.
    pub class_map: Vec<usize>,
}

impl ModelCheckpoint {
    pub fn new(component: Component, mode: Option<LabelMode>, params: ParamStore) -> Self {
        Self {
            component,
            mode,
            params,
            optimizer: Vec::new(),
            rng_state: Vec::new(),
            epoch: 0,
            class_map: Vec::new(),
        }
    }

    /// Attaches one optimizer state per parameter, named after it.
    pub fn with_optimizer(mut self, states: &[AdamState]) -> Self {
        self.optimizer = self
            .params
            .iter()
            .map(|(n, _)| n.to_string())
            .zip(states.iter().cloned())
            .collect();
        self
    }

    pub fn optimizer_states(&self) -> Vec<AdamState> {
        self.optimizer.iter().map(|(_, s)| s.clone()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        w.str(self.component.tag());
        match self.mode {
            None => w.u8(0),
            Some(LabelMode::AllDims) => w.u8(1),
            Some(LabelMode::SingleDim(d)) => {
                w.u8(2);
                w.u8(d.position() as u8);
            }
        }
        w.u32(self.params.len() as u32);
        for (name, t) in self.params.iter() {
            w.str(name);
            w.u32(t.rank() as u32);
            for &d in t.shape() {
                w.u64(d as u64);
            }
            w.f64s(t.data());
        }
        w.u32(self.optimizer.len() as u32);
        for (name, s) in &self.optimizer {
            w.str(name);
            w.u64(s.t);
            for v in [s.beta1, s.beta2, s.epsilon, s.lr] {
                w.f64(v);
            }
            w.u64(s.m.len() as u64);
            w.f64s(&s.m);
            w.f64s(&s.v);
        }
        w.u32(self.rng_state.len() as u32);
        w.bytes(&self.rng_state);
        w.u64(self.epoch);
        w.u32(self.class_map.len() as u32);
        for &c in &self.class_map {
            w.u64(c as u64);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("missing GGAN magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format_version {version}")));
        }
        let component = Component::from_tag(&r.str()?)?;
        let mode = match r.u8()? {
            0 => None,
            1 => Some(LabelMode::AllDims),
            2 => {
                let d = r.u8()? as usize;
                let dim = *Dimension::ALL
                    .get(d)
                    .ok_or_else(|| Error::Checkpoint(format!("bad dimension byte {d}")))?;
                Some(LabelMode::SingleDim(dim))
            }
            other => return Err(Error::Checkpoint(format!("bad conditioning mode byte {other}"))),
        };
        let n = r.u32()? as usize;
        let mut params = ParamStore::new();
        for _ in 0..n {
            let name = r.str()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
            let data = r.f64s(len)?;
            let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
            if params.index_of(&name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate parameter {name:?}")));
            }
            params.insert(&name, t);
        }
        let n = r.u32()? as usize;
        let mut optimizer = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.str()?;
            let t = r.u64()?;
            let (beta1, beta2, epsilon, lr) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let len = r.u64()? as usize;
            let m = r.f64s(len)?;
            let v = r.f64s(len)?;
            optimizer.push((
                name,
                AdamState {
                    m,
                    v,
                    t,
                    beta1,
                    beta2,
                    epsilon,
                    lr,
                },
            ));
        }
        let rng_len = r.u32()? as usize;
        let rng_state = r.take(rng_len)?.to_vec();
        let epoch = r.u64()?;
        let n = r.u32()? as usize;
        let class_map = (0..n).map(|_| r.u64().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
        if !r.0.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.0.len())));
        }
        Ok(Self {
            component,
            mode,
            params,
            optimizer,
            rng_state,
            epoch,
            class_map,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and checks the component tag.
    pub fn load_expecting(path: &Path, component: Component) -> Result<Self> {
        let ck = Self::load(path)?;
        if ck.component != component {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} checkpoint, expected {}",
                path.display(),
                ck.component.tag(),
                component.tag()
            )));
        }
        Ok(ck)
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes the full position of a ChaCha8 stream.
pub fn rng_to_bytes(rng: &ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(56);
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    out
}

pub fn rng_from_bytes(bytes: &[u8]) -> Result<ChaCha8Rng> {
    use rand::SeedableRng;
    if bytes.len() != 56 {
        return Err(Error::Checkpoint(format!("rng state has {} bytes, expected 56", bytes.len())));
    }
    let seed: [u8; 32] = bytes[..32].try_into().unwrap();
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(u64::from_le_bytes(bytes[32..40].try_into().unwrap()));
    rng.set_word_pos(u128::from_le_bytes(bytes[40..56].try_into().unwrap()));
    Ok(rng)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.0.reserve(vs.len() * 8);
        for v in vs {
            self.f64(*v);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::AdamConfig;
    use rand::{Rng, SeedableRng};

    fn sample() -> ModelCheckpoint {
        let mut params = ParamStore::new();
        params.insert("a", Tensor::new(vec![2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, -2.5, 0.1]).unwrap());
        params.insert("b", Tensor::from_vec(vec![7.0]));
        let mut states = params.new_adam_states(AdamConfig::default());
        states[0].m[1] = 0.25;
        states[1].t = 9;
        let mut ck = ModelCheckpoint::new(Component::Classifier, Some(LabelMode::SingleDim(Dimension::A)), params)
            .with_optimizer(&states);
        ck.epoch = 12;
        ck.class_map = vec![0, 17, 242];
        ck.rng_state = rng_to_bytes(&ChaCha8Rng::seed_from_u64(4));
        ck
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"GGAN");
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.params.tensor(0).data()[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelCheckpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(ModelCheckpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn rng_state_resumes_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..37 {
            rng.gen::<u32>();
        }
        let mut restored = rng_from_bytes(&rng_to_bytes(&rng)).unwrap();
        let a: Vec<u64> = (0..10).map(|_| rng.gen()).collect();
        let b: Vec<u64> = (0..10).map(|_| restored.gen()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn component_tag_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ggan");
        sample().save(&p).unwrap();
        assert!(ModelCheckpoint::load_expecting(&p, Component::Classifier).is_ok());
        assert!(ModelCheckpoint::load_expecting(&p, Component::Codec).is_err());
    }
}
