//! Seeded random streams and the distribution specs used by every
//! stochastic knob (deployment latency, block jitter, API latency, pricing).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Hashes a base seed together with labelled parts into a new 64-bit seed.
///
/// Stable across platforms and releases: SHA-256 over little-endian bytes,
/// each part length-prefixed.
pub fn derive_seed(base: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// An independent random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        let stream_id = stream_id.into();
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(stream_id.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        RngStream {
            seed,
            stream_id,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn sample(&mut self, dist: &Dist) -> f64 {
        dist.sample(&mut self.rng)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid distribution spec `{spec}`: {reason}")]
pub struct DistParseError {
    pub spec: String,
    pub reason: String,
}

/// A distribution over real values, written as `kind:params`.
///
/// Accepted forms: `36` or `const:36`, `uniform:LO,HI`, `normal:MEAN,SD`,
/// `exp:MEAN`, `geometric:MEAN` (failures before first success, so the
/// support is `{0, 1, 2, ...}`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dist {
    Const(f64),
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Exp { mean: f64 },
    Geometric { mean: f64 },
}

impl Dist {
    pub const ZERO: Dist = Dist::Const(0.0);

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Const(v) => v,
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dist::Normal { mean, sd } => {
                if sd == 0.0 {
                    mean
                } else {
                    Normal::new(mean, sd).expect("validated sd").sample(rng)
                }
            }
            Dist::Exp { mean } => {
                if mean == 0.0 {
                    0.0
                } else {
                    Exp::new(1.0 / mean).expect("validated mean").sample(rng)
                }
            }
            Dist::Geometric { mean } => {
                if mean == 0.0 {
                    0.0
                } else {
                    let p = 1.0 / (1.0 + mean);
                    Geometric::new(p).expect("validated p").sample(rng) as f64
                }
            }
        }
    }

    /// Draws until the value is strictly positive, which truncates the
    /// distribution at zero. Gives up after 1000 tries and returns the
    /// positive part of the mean (or a nanosecond).
    pub fn sample_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        for _ in 0..1000 {
            let v = self.sample(rng);
            if v > 0.0 {
                return v;
            }
        }
        self.mean().max(1e-9)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Const(v) => v,
            Dist::Uniform { lo, hi } => 0.5 * (lo + hi),
            Dist::Normal { mean, .. } => mean,
            Dist::Exp { mean } => mean,
            Dist::Geometric { mean } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Dist::Const(_) => 0.0,
            Dist::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Dist::Normal { sd, .. } => sd * sd,
            Dist::Exp { mean } => mean * mean,
            Dist::Geometric { mean } => mean * (1.0 + mean),
        }
    }

    /// Smallest and largest value the distribution can produce.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Dist::Const(v) => (v, v),
            Dist::Uniform { lo, hi } => (lo, hi),
            Dist::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Dist::Exp { .. } | Dist::Geometric { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.variance() == 0.0
    }

    fn validate(self) -> Result<Self, String> {
        let finite = |v: f64| v.is_finite();
        match self {
            Dist::Const(v) if !finite(v) => Err("value must be finite".into()),
            Dist::Uniform { lo, hi } if !(finite(lo) && finite(hi) && lo <= hi) => {
                Err("uniform needs finite LO <= HI".into())
            }
            Dist::Normal { mean, sd } if !(finite(mean) && finite(sd) && sd >= 0.0) => {
                Err("normal needs finite MEAN and SD >= 0".into())
            }
            Dist::Exp { mean } | Dist::Geometric { mean } if !(finite(mean) && mean >= 0.0) => {
                Err("mean must be finite and >= 0".into())
            }
            d => Ok(d),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Const(v) => write!(f, "const:{v}"),
            Dist::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Dist::Normal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            Dist::Exp { mean } => write!(f, "exp:{mean}"),
            Dist::Geometric { mean } => write!(f, "geometric:{mean}"),
        }
    }
}

impl FromStr for Dist {
    type Err = DistParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| DistParseError {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = s.trim();
        let (kind, args) = match trimmed.split_once(':') {
            Some((k, a)) => (k.trim().to_ascii_lowercase(), a),
            None => ("const".to_string(), trimmed),
        };
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err("parameters must be numbers"))?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(err(&format!("`{kind}` takes {n} parameter(s)")))
            }
        };
        let dist = match kind.as_str() {
            "const" | "constant" => {
                arity(1)?;
                Dist::Const(nums[0])
            }
            "uniform" => {
                arity(2)?;
                Dist::Uniform { lo: nums[0], hi: nums[1] }
            }
            "normal" => {
                arity(2)?;
                Dist::Normal { mean: nums[0], sd: nums[1] }
            }
            "exp" => {
                arity(1)?;
                Dist::Exp { mean: nums[0] }
            }
            "geometric" | "geom" => {
                arity(1)?;
                Dist::Geometric { mean: nums[0] }
            }
            other => return Err(err(&format!("unknown kind `{other}`"))),
        };
        dist.validate().map_err(|r| err(&r))
    }
}

impl TryFrom<String> for Dist {
    type Error = DistParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Dist> for String {
    fn from(d: Dist) -> String {
        d.to_string()
    }
}
