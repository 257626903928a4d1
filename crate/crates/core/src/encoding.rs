//! Credential domains, option codes and the packed `b || c` payload word.
//!
//! An option (a set of credentials) is encoded as the bitmask
//! `sum 2^i` over the canonical positions `i` of its members. The payload
//! word places `b` in the low `width_b` bits, `c` directly above it, and
//! requires at least `guard_bits` zero bits above both so that masked
//! garbage is recognisable.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::paillier::PublicKey;

/// Largest number of credentials a single domain may hold.
pub const MAX_DOMAIN_SIZE: usize = 255;
/// Smallest accepted guard band.
pub const MIN_GUARD_BITS: u32 = 40;
/// Widest supported truncated hash.
pub const MAX_HASH_WIDTH: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("credential domain is empty")]
    EmptyDomain,
    #[error("credential domain has {0} entries, at most {MAX_DOMAIN_SIZE} allowed")]
    DomainTooLarge(usize),
    #[error("duplicate credential `{0}` in domain")]
    DuplicateCredential(String),
    #[error("credential names must be non-empty")]
    EmptyCredentialName,
    #[error("unknown credential(s): {}", .0.join(", "))]
    UnknownCredentials(Vec<String>),
    #[error("an option must name at least one credential")]
    EmptyOption,
    #[error("option code {code:#x} does not fit a {width}-bit domain")]
    CodeOutOfRange { code: BigUint, width: u32 },
    #[error("field value does not fit in {width} bits")]
    FieldOverflow { width: u32 },
    #[error("hash width must be between 1 and {MAX_HASH_WIDTH} bits, got {0}")]
    InvalidHashWidth(u32),
    #[error("guard band of {0} bits is below the minimum of {MIN_GUARD_BITS}")]
    GuardTooSmall(u32),
    #[error(
        "payload layout needs {needed} bits but the modulus has {available}; short by {deficit} bits"
    )]
    Overflow {
        needed: u64,
        available: u64,
        deficit: u64,
    },
    #[error("domain file: {0}")]
    DomainFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Client,
    Server,
}

/// Ordered list of credential names. The order fixes each credential's bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialDomain {
    side: Side,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl CredentialDomain {
    pub fn new<I, S>(side: Side, names: I) -> Result<Self, EncodingError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(EncodingError::EmptyDomain);
        }
        if names.len() > MAX_DOMAIN_SIZE {
            return Err(EncodingError::DomainTooLarge(names.len()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(EncodingError::EmptyCredentialName);
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(EncodingError::DuplicateCredential(name.clone()));
            }
        }
        Ok(CredentialDomain { side, names, index })
    }

    /// Parses a JSON array of names.
    pub fn from_json(side: Side, text: &str) -> Result<Self, EncodingError> {
        let names: Vec<String> =
            serde_json::from_str(text).map_err(|e| EncodingError::DomainFile(e.to_string()))?;
        Self::new(side, names)
    }

    pub fn load(side: Side, path: impl AsRef<Path>) -> Result<Self, EncodingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EncodingError::DomainFile(format!("{}: {e}", path.display())))?;
        Self::from_json(side, &text)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Bits consumed by a bitmask code over this domain.
    pub fn width(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// SHA-256 over the side tag and the length-prefixed names, in order.
    /// Two parties holding the same ordered list get the same digest.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"credmatch/domain/v1");
        h.update([match self.side {
            Side::Client => 0u8,
            Side::Server => 1u8,
        }]);
        h.update((self.names.len() as u32).to_be_bytes());
        for name in &self.names {
            h.update((name.len() as u32).to_be_bytes());
            h.update(name.as_bytes());
        }
        h.finalize().into()
    }

    /// Encodes a subset as `sum 2^index(name)`.
    pub fn encode_option<I, S>(&self, subset: I) -> Result<OptionCode, EncodingError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut code = BigUint::zero();
        let mut unknown = Vec::new();
        let mut any = false;
        for name in subset {
            let name = name.as_ref();
            any = true;
            match self.index.get(name) {
                Some(&i) => code.set_bit(i as u64, true),
                None => unknown.push(name.to_owned()),
            }
        }
        if !unknown.is_empty() {
            return Err(EncodingError::UnknownCredentials(unknown));
        }
        if !any {
            return Err(EncodingError::EmptyOption);
        }
        Ok(OptionCode(code))
    }

    /// Names whose bits are set in `code`, in canonical order.
    pub fn decode_option(&self, code: &OptionCode) -> Result<Vec<String>, EncodingError> {
        if code.0.bits() > self.width() as u64 {
            return Err(EncodingError::CodeOutOfRange {
                code: code.0.clone(),
                width: self.width(),
            });
        }
        Ok(self
            .names
            .iter()
            .enumerate()
            .filter(|(i, _)| code.0.bit(*i as u64))
            .map(|(_, n)| n.clone())
            .collect())
    }

    /// Checks that a code is a non-empty subset of this domain.
    pub fn check_code(&self, code: &OptionCode) -> Result<(), EncodingError> {
        if code.0.is_zero() {
            return Err(EncodingError::EmptyOption);
        }
        if code.0.bits() > self.width() as u64 {
            return Err(EncodingError::CodeOutOfRange {
                code: code.0.clone(),
                width: self.width(),
            });
        }
        Ok(())
    }
}

/// Bitmask encoding of one option.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OptionCode(BigUint);

impl OptionCode {
    pub fn new(value: BigUint) -> Self {
        OptionCode(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

impl From<u64> for OptionCode {
    fn from(v: u64) -> Self {
        OptionCode(BigUint::from(v))
    }
}

impl fmt::Display for OptionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// How a client option is turned into the `b` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElementEncoding {
    /// The bitmask code itself.
    #[default]
    Bitmask,
    /// SHA-256 of the code truncated to `width` bits.
    Hashed { width: u32 },
}

impl ElementEncoding {
    pub fn hashed(width: u32) -> Result<Self, EncodingError> {
        if width == 0 || width > MAX_HASH_WIDTH {
            return Err(EncodingError::InvalidHashWidth(width));
        }
        Ok(ElementEncoding::Hashed { width })
    }

    /// Width of the element for a client domain of the given size.
    pub fn width(&self, client_domain: &CredentialDomain) -> u32 {
        match *self {
            ElementEncoding::Bitmask => client_domain.width(),
            ElementEncoding::Hashed { width } => width,
        }
    }

    pub fn element(&self, code: &OptionCode) -> BigUint {
        match *self {
            ElementEncoding::Bitmask => code.0.clone(),
            ElementEncoding::Hashed { width } => hash_truncated(code, width),
        }
    }

    /// Wire form: 0 means bitmask.
    pub fn hash_width(&self) -> u16 {
        match *self {
            ElementEncoding::Bitmask => 0,
            ElementEncoding::Hashed { width } => width as u16,
        }
    }
}

/// Truncated SHA-256 of an option code.
pub fn hash_map_element(code: &OptionCode, hash_width: u32) -> Result<BigUint, EncodingError> {
    if hash_width == 0 || hash_width > MAX_HASH_WIDTH {
        return Err(EncodingError::InvalidHashWidth(hash_width));
    }
    Ok(hash_truncated(code, hash_width))
}

fn hash_truncated(code: &OptionCode, width: u32) -> BigUint {
    let mut h = Sha256::new();
    h.update(b"credmatch/option/v1");
    let bytes = code.0.to_bytes_be();
    h.update((bytes.len() as u32).to_be_bytes());
    h.update(&bytes);
    let digest: [u8; 32] = h.finalize().into();
    BigUint::from_bytes_be(&digest) >> (MAX_HASH_WIDTH - width)
}

/// Bit layout of the plaintext `c * 2^width_b + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadLayout {
    width_b: u32,
    width_c: u32,
    guard_bits: u32,
}

impl PayloadLayout {
    pub fn new(width_b: u32, width_c: u32, guard_bits: u32) -> Result<Self, EncodingError> {
        if guard_bits < MIN_GUARD_BITS {
            return Err(EncodingError::GuardTooSmall(guard_bits));
        }
        Ok(PayloadLayout {
            width_b,
            width_c,
            guard_bits,
        })
    }

    pub fn width_b(&self) -> u32 {
        self.width_b
    }

    pub fn width_c(&self) -> u32 {
        self.width_c
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    pub fn payload_bits(&self) -> u32 {
        self.width_b + self.width_c
    }

    /// Bits the modulus must strictly exceed.
    pub fn required_bits(&self) -> u64 {
        self.width_b as u64 + self.width_c as u64 + self.guard_bits as u64
    }

    pub fn fits(&self, pk: &PublicKey) -> Result<(), EncodingError> {
        let needed = self.required_bits();
        let available = pk.bits();
        if needed < available {
            Ok(())
        } else {
            Err(EncodingError::Overflow {
                needed,
                available,
                deficit: needed - available + 1,
            })
        }
    }

    pub fn pack(&self, b: &BigUint, c: &BigUint) -> Result<BigUint, EncodingError> {
        if b.bits() > self.width_b as u64 {
            return Err(EncodingError::FieldOverflow {
                width: self.width_b,
            });
        }
        if c.bits() > self.width_c as u64 {
            return Err(EncodingError::FieldOverflow {
                width: self.width_c,
            });
        }
        Ok((c << self.width_b) | b)
    }

    /// Splits a decrypted value, or `None` if anything is set above the
    /// payload (the guard band is not clear).
    pub fn unpack(&self, m: &BigUint) -> Option<(BigUint, BigUint)> {
        if m.bits() > self.payload_bits() as u64 {
            return None;
        }
        let mask = (BigUint::one() << self.width_b) - 1u32;
        Some((m & mask, m >> self.width_b))
    }

    pub fn pack_payload(&self, b: &OptionCode, c: &OptionCode) -> Result<BigUint, EncodingError> {
        self.pack(&b.0, &c.0)
    }

    pub fn unpack_payload(&self, m: &BigUint) -> Option<(OptionCode, OptionCode)> {
        self.unpack(m).map(|(b, c)| (OptionCode(b), OptionCode(c)))
    }
}

/// Shape choices that affect the layout beyond the two domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutParams {
    pub guard_bits: u32,
    pub encoding: ElementEncoding,
    /// `false` for the plain variant: no `c` field at all.
    pub payload: bool,
    /// Widen `b` by one bit so a padding root can sit above every real element.
    pub reserve_padding: bool,
}

impl LayoutParams {
    pub fn with_guard(guard_bits: u32) -> Self {
        LayoutParams {
            guard_bits,
            encoding: ElementEncoding::Bitmask,
            payload: true,
            reserve_padding: false,
        }
    }
}

/// Bitmask payload layout for the two domains, checked against `pk`.
pub fn validate_layout(
    pk: &PublicKey,
    client_domain: &CredentialDomain,
    server_domain: &CredentialDomain,
    guard_bits: u32,
) -> Result<PayloadLayout, EncodingError> {
    validate_layout_with(
        pk,
        client_domain,
        server_domain,
        &LayoutParams::with_guard(guard_bits),
    )
}

pub fn validate_layout_with(
    pk: &PublicKey,
    client_domain: &CredentialDomain,
    server_domain: &CredentialDomain,
    params: &LayoutParams,
) -> Result<PayloadLayout, EncodingError> {
    let mut width_b = params.encoding.width(client_domain);
    if params.reserve_padding {
        width_b += 1;
    }
    let width_c = if params.payload {
        server_domain.width()
    } else {
        0
    };
    let layout = PayloadLayout::new(width_b, width_c, params.guard_bits)?;
    layout.fits(pk)?;
    Ok(layout)
}

/// Helper for callers holding name lists: encodes each and reports every
/// unknown name at once.
pub fn encode_all<S: AsRef<str>>(
    domain: &CredentialDomain,
    options: &[Vec<S>],
) -> Result<Vec<OptionCode>, EncodingError> {
    let mut unknown = BTreeSet::new();
    let mut codes = Vec::with_capacity(options.len());
    for opt in options {
        match domain.encode_option(opt.iter().map(AsRef::as_ref)) {
            Ok(c) => codes.push(c),
            Err(EncodingError::UnknownCredentials(names)) => unknown.extend(names),
            Err(e) => return Err(e),
        }
    }
    if !unknown.is_empty() {
        return Err(EncodingError::UnknownCredentials(
            unknown.into_iter().collect(),
        ));
    }
    let mut seen = HashSet::new();
    codes.retain(|c| seen.insert(c.clone()));
    Ok(codes)
}
