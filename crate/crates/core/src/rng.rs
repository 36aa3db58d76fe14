//! Seeded, splittable random streams.
//!
//! Each stream is a ChaCha8 keystream selected by `(seed, stream_id)`. The
//! cipher is counter based, so a stream can be restored at any saved word
//! position, and distinct stream ids never overlap.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Well-known stream ids. Gibbs chains use ids `0..batch_size`.
pub mod streams {
    pub const INIT: u64 = 1 << 40;
    pub const SHUFFLE: u64 = 2 << 40;
    pub const EVAL: u64 = 3 << 40;
    pub const BINARIZE: u64 = 4 << 40;
    pub const AIS: u64 = 5 << 40;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    draws: u64,
    inner: ChaCha8Rng,
}

/// Serializable position of an [`RngStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPosition {
    pub seed: u64,
    pub stream_id: u64,
    /// Number of counted uniform draws so far.
    pub draws: u64,
    /// Keystream word position; stored as a string since it is a `u128`.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            draws: 0,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draws consumed through [`Self::uniform`] / [`Self::bernoulli`].
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn position(&self) -> RngPosition {
        RngPosition {
            seed: self.seed,
            stream_id: self.stream_id,
            draws: self.draws,
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn restore(pos: RngPosition) -> Self {
        let mut s = Self::new(pos.seed, pos.stream_id);
        s.inner.set_word_pos(pos.word_pos);
        s.draws = pos.draws;
        s
    }

    /// A uniform in `[0, 1)`; one counted draw.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.random::<f64>()
    }

    /// 1 with probability `p`; one counted draw.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> u8 {
        (self.uniform() < p) as u8
    }

    /// A standard normal variate (not counted as a Gibbs draw).
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..len` (not counted).
    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    /// Raw generator access for shuffles and other uncounted use.
    pub fn raw(&mut self) -> &mut impl RngCore {
        &mut self.inner
    }
}
