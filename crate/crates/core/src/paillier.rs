//! Paillier additively homomorphic encryption.
//!
//! The generator is fixed to `g = n + 1`, so `g^m mod n^2 = 1 + m*n` and
//! only the `r^n` randomizer needs a modular exponentiation.
//!
//! Exponentiations are tallied in an [`OpCounter`] shared by every clone of
//! a [`PublicKey`]; [`PublicKey::with_fresh_counter`] starts a new tally for
//! a new session.
//!
//! Modular exponentiation comes from `num-bigint` and is not constant time.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest modulus size accepted by [`keygen`]. Only useful for tests.
pub const MIN_KEY_BITS: u64 = 64;
/// Modulus size used when nothing else is configured.
pub const DEFAULT_KEY_BITS: u64 = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("key size of {0} bits is below the minimum of {MIN_KEY_BITS}")]
    KeySizeTooSmall(u64),
    #[error("plaintext is not an element of Z_n")]
    PlaintextOutOfRange,
    #[error("scalar is not an element of Z_n")]
    ScalarOutOfRange,
    #[error("ciphertext is not a unit modulo n^2")]
    InvalidCiphertext,
    #[error("invalid prime pair: {0}")]
    InvalidPrimes(&'static str),
    #[error("malformed key: {0}")]
    MalformedKey(String),
}

/// Tally of the modular exponentiations performed under one key.
#[derive(Debug, Default)]
pub struct OpCounter {
    scalar_muls: AtomicU64,
    encryptions: AtomicU64,
    rerandomizations: AtomicU64,
}

/// Point-in-time copy of an [`OpCounter`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub scalar_muls: u64,
    pub encryptions: u64,
    pub rerandomizations: u64,
}

impl OpCounts {
    /// Total exponentiations (one per scalar_mul, encrypt and rerandomize).
    pub fn exponentiations(&self) -> u64 {
        self.scalar_muls + self.encryptions + self.rerandomizations
    }

    /// Counts accumulated since `earlier` was taken.
    pub fn since(&self, earlier: &OpCounts) -> OpCounts {
        OpCounts {
            scalar_muls: self.scalar_muls - earlier.scalar_muls,
            encryptions: self.encryptions - earlier.encryptions,
            rerandomizations: self.rerandomizations - earlier.rerandomizations,
        }
    }
}

impl OpCounter {
    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            scalar_muls: self.scalar_muls.load(Ordering::Relaxed),
            encryptions: self.encryptions.load(Ordering::Relaxed),
            rerandomizations: self.rerandomizations.load(Ordering::Relaxed),
        }
    }

    pub fn scalar_muls(&self) -> u64 {
        self.scalar_muls.load(Ordering::Relaxed)
    }

    pub fn exponentiations(&self) -> u64 {
        self.snapshot().exponentiations()
    }
}

/// Public key: the modulus `n` with `n^2` cached.
#[derive(Clone)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    counter: Arc<OpCounter>,
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Eq for PublicKey {}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("n", &format_args!("{:x}", self.n))
            .finish()
    }
}

/// A ciphertext, an element of `Z*_{n^2}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext(BigUint);

impl Ciphertext {
    /// Wraps `value` after checking `0 < value < n^2` and `gcd(value, n) = 1`.
    pub fn new(pk: &PublicKey, value: BigUint) -> Result<Self, PaillierError> {
        if value.is_zero() || value >= pk.n_squared || !value.gcd(&pk.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(Ciphertext(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl PublicKey {
    /// Builds a public key from a bare modulus received from a peer.
    ///
    /// Only cheap sanity checks are possible here: `n` must be odd and at
    /// least [`MIN_KEY_BITS`] long.
    pub fn from_modulus(n: BigUint) -> Result<Self, PaillierError> {
        if n.bits() < MIN_KEY_BITS {
            return Err(PaillierError::MalformedKey(format!(
                "modulus has {} bits, need at least {MIN_KEY_BITS}",
                n.bits()
            )));
        }
        if n.is_even() {
            return Err(PaillierError::MalformedKey("modulus is even".into()));
        }
        Ok(Self::from_modulus_unchecked(n))
    }

    fn from_modulus_unchecked(n: BigUint) -> Self {
        let n_squared = &n * &n;
        PublicKey {
            n,
            n_squared,
            counter: Arc::new(OpCounter::default()),
        }
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// The generator, always `n + 1`.
    pub fn g(&self) -> BigUint {
        &self.n + 1u32
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn counter(&self) -> &OpCounter {
        &self.counter
    }

    /// Same key, new zeroed counter.
    pub fn with_fresh_counter(&self) -> Self {
        PublicKey {
            n: self.n.clone(),
            n_squared: self.n_squared.clone(),
            counter: Arc::new(OpCounter::default()),
        }
    }

    /// Uniform `r` in `[1, n)` with `gcd(r, n) = 1`.
    pub fn random_unit<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, PaillierError> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        let r = self.random_unit(rng);
        Ok(self.encrypt_with_unit(m, &r))
    }

    /// `(1 + m*n) * r^n mod n^2`. Caller guarantees `m < n` and `r` a unit.
    pub(crate) fn encrypt_with_unit(&self, m: &BigUint, r: &BigUint) -> Ciphertext {
        self.counter.encryptions.fetch_add(1, Ordering::Relaxed);
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext(gm * rn % &self.n_squared)
    }

    /// Encrypts with a caller-chosen randomizer `r`.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn encrypt_with_nonce(
        &self,
        m: &BigUint,
        r: &BigUint,
    ) -> Result<Ciphertext, PaillierError> {
        if m >= &self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        if r.is_zero() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(self.encrypt_with_unit(m, r))
    }

    /// `Enc(m1 + m2 mod n)`.
    pub fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
        Ciphertext(c1.value() * c2.value() % &self.n_squared)
    }

    /// `Enc(k * m mod n)` from `Enc(m)`.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, PaillierError> {
        if k >= &self.n {
            return Err(PaillierError::ScalarOutOfRange);
        }
        self.counter.scalar_muls.fetch_add(1, Ordering::Relaxed);
        Ok(Ciphertext(c.value().modpow(k, &self.n_squared)))
    }

    /// Fresh-looking ciphertext for the same plaintext.
    pub fn rerandomize<R: RngCore + CryptoRng + ?Sized>(
        &self,
        c: &Ciphertext,
        rng: &mut R,
    ) -> Ciphertext {
        let r = self.random_unit(rng);
        self.rerandomize_with_unit(c, &r)
    }

    pub(crate) fn rerandomize_with_unit(&self, c: &Ciphertext, r: &BigUint) -> Ciphertext {
        self.counter
            .rerandomizations
            .fetch_add(1, Ordering::Relaxed);
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext(c.value() * rn % &self.n_squared)
    }

    #[cfg(any(test, feature = "test-hooks"))]
    pub fn rerandomize_with_nonce(&self, c: &Ciphertext, r: &BigUint) -> Ciphertext {
        self.rerandomize_with_unit(c, r)
    }

    pub fn to_json(&self) -> String {
        let file = KeyFile {
            n: to_hex(&self.n),
            p: None,
            q: None,
            lambda: None,
            mu: None,
        };
        serde_json::to_string_pretty(&file).expect("key file serializes")
    }

    /// Reads the `n` field of a public or full key document.
    pub fn from_json(text: &str) -> Result<Self, PaillierError> {
        let file: KeyFile =
            serde_json::from_str(text).map_err(|e| PaillierError::MalformedKey(e.to_string()))?;
        PublicKey::from_modulus(from_hex("n", &file.n)?)
    }
}

/// Decryption trapdoor.
#[derive(Clone)]
pub struct PrivateKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
    public: PublicKey,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey").finish_non_exhaustive()
    }
}

impl PrivateKey {
    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    /// `L(c^lambda mod n^2) * mu mod n` where `L(u) = (u - 1) / n`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, PaillierError> {
        let pk = &self.public;
        let v = c.value();
        if v.is_zero() || v >= &pk.n_squared || !v.gcd(&pk.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        let u = v.modpow(&self.lambda, &pk.n_squared);
        Ok(l_function(&u, &pk.n) * &self.mu % &pk.n)
    }
}

fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

/// A matched public/private key pair.
#[derive(Clone, Debug)]
pub struct Keypair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl Keypair {
    /// Derives the key pair from two distinct primes.
    ///
    /// Primality itself is not rechecked; the structural conditions are.
    pub(crate) fn from_primes_inner(p: BigUint, q: BigUint) -> Result<Self, PaillierError> {
        if p == q {
            return Err(PaillierError::InvalidPrimes("p and q must differ"));
        }
        if p < BigUint::from(3u32) || q < BigUint::from(3u32) {
            return Err(PaillierError::InvalidPrimes("primes must be odd"));
        }
        let n = &p * &q;
        let p1 = &p - 1u32;
        let q1 = &q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            return Err(PaillierError::InvalidPrimes("gcd(pq, (p-1)(q-1)) != 1"));
        }
        let lambda = p1.lcm(&q1);
        let public = PublicKey::from_modulus_unchecked(n);
        let u = public.g().modpow(&lambda, &public.n_squared);
        let l = l_function(&u, &public.n);
        let mu = mod_inverse(&l, &public.n).ok_or(PaillierError::InvalidPrimes(
            "L(g^lambda) is not invertible mod n",
        ))?;
        Ok(Keypair {
            private: PrivateKey {
                p,
                q,
                lambda,
                mu,
                public: public.clone(),
            },
            public,
        })
    }

    /// Builds a key pair from fixed primes, for deterministic vectors.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self, PaillierError> {
        Self::from_primes_inner(p, q)
    }

    pub fn to_json(&self) -> String {
        let sk = &self.private;
        let file = KeyFile {
            n: to_hex(&self.public.n),
            p: Some(to_hex(&sk.p)),
            q: Some(to_hex(&sk.q)),
            lambda: Some(to_hex(&sk.lambda)),
            mu: Some(to_hex(&sk.mu)),
        };
        serde_json::to_string_pretty(&file).expect("key file serializes")
    }

    /// Parses a full key document and checks it is self-consistent.
    pub fn from_json(text: &str) -> Result<Self, PaillierError> {
        let file: KeyFile =
            serde_json::from_str(text).map_err(|e| PaillierError::MalformedKey(e.to_string()))?;
        let field = |name: &str, v: &Option<String>| -> Result<BigUint, PaillierError> {
            match v {
                Some(s) => from_hex(name, s),
                None => Err(PaillierError::MalformedKey(format!(
                    "missing private field `{name}`"
                ))),
            }
        };
        let n = from_hex("n", &file.n)?;
        let p = field("p", &file.p)?;
        let q = field("q", &file.q)?;
        let lambda = field("lambda", &file.lambda)?;
        let mu = field("mu", &file.mu)?;
        if &p * &q != n {
            return Err(PaillierError::MalformedKey("n != p*q".into()));
        }
        let kp = Keypair::from_primes_inner(p, q)?;
        if kp.private.lambda != lambda || kp.private.mu != mu {
            return Err(PaillierError::MalformedKey(
                "lambda/mu do not match p and q".into(),
            ));
        }
        Ok(kp)
    }
}

/// Generates a key pair whose modulus has exactly `key_size_bits` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    key_size_bits: u64,
    rng: &mut R,
) -> Result<Keypair, PaillierError> {
    if key_size_bits < MIN_KEY_BITS {
        return Err(PaillierError::KeySizeTooSmall(key_size_bits));
    }
    let p_bits = key_size_bits / 2;
    let q_bits = key_size_bits - p_bits;
    loop {
        let p = random_prime(p_bits, rng);
        let q = random_prime(q_bits, rng);
        match Keypair::from_primes_inner(p, q) {
            Ok(kp) => {
                debug_assert_eq!(kp.public.bits(), key_size_bits);
                return Ok(kp);
            }
            Err(PaillierError::InvalidPrimes(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Random prime with its two top bits set, so a product of two such primes
/// of `a` and `b` bits has exactly `a + b` bits.
fn random_prime<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        // Baillie-PSW plus log2(bits)+5 Miller-Rabin rounds.
        if glass_pumpkin::prime::strong_check_with(&candidate, rng) {
            return candidate;
        }
    }
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let e = BigInt::from(a.clone()).extended_gcd(&BigInt::from(m.clone()));
    if !e.gcd.is_one() {
        return None;
    }
    let m = BigInt::from(m.clone());
    e.x.mod_floor(&m).to_biguint()
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    n: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<String>,
}

fn to_hex(v: &BigUint) -> String {
    hex::encode(v.to_bytes_be())
}

fn from_hex(field: &str, s: &str) -> Result<BigUint, PaillierError> {
    let bytes =
        hex::decode(s).map_err(|e| PaillierError::MalformedKey(format!("field `{field}`: {e}")))?;
    Ok(BigUint::from_bytes_be(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn toy() -> Keypair {
        Keypair::from_primes(big(5), big(7)).unwrap()
    }

    // Independent check of the toy-key numbers using u64 arithmetic only.
    fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
        let mut acc = 1u64;
        b %= m;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % m;
            }
            b = b * b % m;
            e >>= 1;
        }
        acc
    }

    #[test]
    fn toy_key_parameters() {
        let kp = toy();
        assert_eq!(kp.public.n(), &big(35));
        assert_eq!(kp.public.n_squared(), &big(1225));
        assert_eq!(kp.public.g(), big(36));
        assert_eq!(kp.private.lambda(), &big(12));
        assert_eq!(kp.private.mu(), &big(3));

        let u = pow_mod(36, 12, 1225);
        assert_eq!(((u - 1) / 35 * 3) % 35, 1);
    }

    #[test]
    fn toy_encrypt_vector() {
        let kp = toy();
        let oracle = pow_mod(36, 7, 1225) * pow_mod(3, 35, 1225) % 1225;
        assert_eq!(oracle, 1097);
        let c = kp.public.encrypt_with_nonce(&big(7), &big(3)).unwrap();
        assert_eq!(c.value(), &big(1097));
        assert_eq!(kp.private.decrypt(&c).unwrap(), big(7));
    }

    #[test]
    fn decrypt_frozen_ciphertext() {
        let kp = toy();
        let c = Ciphertext::new(&kp.public, big(1097)).unwrap();
        assert_eq!(kp.private.decrypt(&c).unwrap(), big(7));
    }

    #[test]
    fn rejects_bad_inputs() {
        let kp = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(
            kp.public.encrypt(&big(35), &mut rng),
            Err(PaillierError::PlaintextOutOfRange)
        );
        let c = kp.public.encrypt(&big(1), &mut rng).unwrap();
        assert_eq!(
            kp.public.scalar_mul(&c, &big(35)),
            Err(PaillierError::ScalarOutOfRange)
        );
        // 5 divides n.
        assert!(Ciphertext::new(&kp.public, big(5)).is_err());
        assert!(Ciphertext::new(&kp.public, big(0)).is_err());
        assert!(Ciphertext::new(&kp.public, big(1225)).is_err());
        let forged = Ciphertext(big(10));
        assert_eq!(
            kp.private.decrypt(&forged),
            Err(PaillierError::InvalidCiphertext)
        );
    }

    #[test]
    fn keygen_rejects_small_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert_eq!(
            keygen(32, &mut rng).unwrap_err(),
            PaillierError::KeySizeTooSmall(32)
        );
    }

    #[test]
    fn keygen_exact_bit_length() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for bits in [64u64, 65, 128, 255] {
            let kp = keygen(bits, &mut rng).unwrap();
            assert_eq!(kp.public.bits(), bits);
            let sk = &kp.private;
            assert_ne!(sk.p(), sk.q());
            assert_eq!(sk.p() * sk.q(), *kp.public.n());
        }
    }

    #[test]
    fn homomorphic_laws_small() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = keygen(128, &mut rng).unwrap();
        let pk = &kp.public;
        let n = pk.n().clone();
        let enc = |m: u64, rng: &mut ChaCha20Rng| pk.encrypt(&big(m), rng).unwrap();

        let sum = pk.add(&enc(3, &mut rng), &enc(4, &mut rng));
        assert_eq!(kp.private.decrypt(&sum).unwrap(), big(7));

        let wrap = pk.add(
            &pk.encrypt(&(&n - 1u32), &mut rng).unwrap(),
            &enc(1, &mut rng),
        );
        assert_eq!(kp.private.decrypt(&wrap).unwrap(), big(0));

        let c = enc(5, &mut rng);
        let zero = enc(0, &mut rng);
        assert_eq!(kp.private.decrypt(&pk.add(&c, &zero)).unwrap(), big(5));
        let tripled = pk.scalar_mul(&c, &big(3)).unwrap();
        assert_eq!(kp.private.decrypt(&tripled).unwrap(), big(15));
        assert_eq!(
            kp.private
                .decrypt(&pk.scalar_mul(&c, &big(0)).unwrap())
                .unwrap(),
            big(0)
        );
        assert_eq!(
            kp.private
                .decrypt(&pk.scalar_mul(&c, &big(1)).unwrap())
                .unwrap(),
            big(5)
        );
        for m in [big(0), big(1), &n - 1u32] {
            let c = pk.encrypt(&m, &mut rng).unwrap();
            assert_eq!(kp.private.decrypt(&c).unwrap(), m);
        }
    }

    #[test]
    fn rerandomize_behaviour() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let kp = keygen(128, &mut rng).unwrap();
        let pk = &kp.public;
        let c = pk.encrypt(&big(9), &mut rng).unwrap();
        let a = pk.rerandomize(&c, &mut rng);
        let b = pk.rerandomize(&c, &mut rng);
        assert_eq!(kp.private.decrypt(&a).unwrap(), big(9));
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(pk.rerandomize_with_nonce(&c, &big(1)), c);
    }

    #[test]
    fn counter_tracks_exponentiations() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let kp = keygen(96, &mut rng).unwrap();
        let pk = kp.public.with_fresh_counter();
        assert_eq!(pk.counter().snapshot(), OpCounts::default());
        let c = pk.encrypt(&big(2), &mut rng).unwrap();
        assert_eq!(pk.counter().exponentiations(), 1);
        let d = pk.scalar_mul(&c, &big(4)).unwrap();
        assert_eq!(pk.counter().scalar_muls(), 1);
        assert_eq!(pk.counter().exponentiations(), 2);
        let _ = pk.add(&c, &d);
        assert_eq!(pk.counter().exponentiations(), 2);
        // clones share the tally, fresh counters do not
        let clone = pk.clone();
        clone.scalar_mul(&c, &big(2)).unwrap();
        assert_eq!(pk.counter().scalar_muls(), 2);
        assert_eq!(kp.public.counter().scalar_muls(), 0);
    }

    #[test]
    fn key_json_roundtrip_and_validation() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let kp = keygen(128, &mut rng).unwrap();
        let full = kp.to_json();
        let back = Keypair::from_json(&full).unwrap();
        assert_eq!(back.public, kp.public);
        assert_eq!(back.private.mu(), kp.private.mu());

        let public = kp.public.to_json();
        assert!(!public.contains("\"p\""));
        assert!(!public.contains("lambda"));
        assert_eq!(PublicKey::from_json(&public).unwrap(), kp.public);
        // A full key file also serves as a public key.
        assert_eq!(PublicKey::from_json(&full).unwrap(), kp.public);
        assert!(Keypair::from_json(&public).is_err());

        let v: serde_json::Value = serde_json::from_str(&full).unwrap();
        let n_hex = v["n"].as_str().unwrap();
        assert_eq!(n_hex, n_hex.to_lowercase());

        let mut tampered = v.clone();
        tampered["mu"] = serde_json::Value::String("01".into());
        assert!(Keypair::from_json(&tampered.to_string()).is_err());
    }

    #[test]
    fn from_primes_rejects_equal_primes() {
        assert!(Keypair::from_primes(big(7), big(7)).is_err());
        // 3 * 7: gcd(21, 2*6) = 3
        assert!(Keypair::from_primes(big(3), big(7)).is_err());
    }
}
