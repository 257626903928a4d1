//! Hash bucketing of client elements.
//!
//! Each element lands in `H(seed, element) mod B`. The client builds one
//! polynomial of degree exactly `max_load` per bucket, so the server only
//! evaluates each rule against a single low-degree polynomial.

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::MatchError;

/// Multiplier on `ln ln s` in the default max load.
pub const LOAD_FACTOR: f64 = 5.0;
/// Additive slack in the default max load.
pub const LOAD_OFFSET: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketParams {
    pub buckets: u32,
    pub max_load: u32,
    pub seed: [u8; 16],
}

impl BucketParams {
    /// `B = ceil(s / ln s)`, `M = ceil(5 ln ln s + 8)`, both capped at `s`.
    pub fn auto(s: usize, seed: [u8; 16]) -> Self {
        let sf = s.max(1) as f64;
        let buckets = if s <= 1 {
            1
        } else {
            ((sf / sf.ln()).ceil() as usize).clamp(1, s)
        };
        let lnln = if sf > std::f64::consts::E {
            sf.ln().ln()
        } else {
            0.0
        };
        let max_load = ((LOAD_FACTOR * lnln + LOAD_OFFSET).ceil() as usize).clamp(1, s.max(1));
        BucketParams {
            buckets: buckets as u32,
            max_load: max_load as u32,
            seed,
        }
    }

    pub fn auto_with_rng<R: RngCore + CryptoRng + ?Sized>(s: usize, rng: &mut R) -> Self {
        let mut seed = [0u8; 16];
        rng.fill_bytes(&mut seed);
        Self::auto(s, seed)
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if self.buckets == 0 || self.max_load == 0 {
            return Err(MatchError::InvalidBucketParams);
        }
        Ok(())
    }

    /// Ciphertexts in a bucketed query: `B * (M + 1)`.
    pub fn query_ciphertexts(&self) -> u64 {
        self.buckets as u64 * (self.max_load as u64 + 1)
    }

    pub fn bucket_of(&self, element: &BigUint) -> usize {
        let mut h = Sha256::new();
        h.update(b"credmatch/bucket/v1");
        h.update(self.seed);
        let bytes = element.to_bytes_be();
        h.update((bytes.len() as u32).to_be_bytes());
        h.update(&bytes);
        let digest: [u8; 32] = h.finalize().into();
        let word = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
        (word % self.buckets as u64) as usize
    }
}

/// Distributes elements over the buckets, failing if any bucket exceeds
/// `max_load`.
pub fn bucketize(
    elements: &[BigUint],
    params: &BucketParams,
) -> Result<Vec<Vec<BigUint>>, MatchError> {
    params.validate()?;
    let mut buckets = vec![Vec::new(); params.buckets as usize];
    for e in elements {
        buckets[params.bucket_of(e)].push(e.clone());
    }
    if let Some((bucket, load)) = buckets
        .iter()
        .enumerate()
        .map(|(i, b)| (i, b.len()))
        .find(|(_, l)| *l > params.max_load as usize)
    {
        return Err(MatchError::BucketOverflow {
            bucket,
            load,
            max_load: params.max_load as usize,
        });
    }
    Ok(buckets)
}
