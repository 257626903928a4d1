//! Privacy-preserving credential matching.
//!
//! A client and a server agree on which credentials to exchange without
//! the server learning the client's options and without the client
//! learning server rules it cannot satisfy. The client's acceptable
//! options become the roots of a polynomial whose coefficients it sends
//! Paillier-encrypted; the server evaluates it at each of its rules and
//! returns masked `(accepted option || disclosure)` words that only
//! decrypt to something meaningful at a root.
//!
//! Module map:
//! - [`paillier`]: the additively homomorphic cryptosystem.
//! - [`encoding`]: credential domains, option bitmasks, payload packing.
//! - [`polyeval`]: root polynomials and encrypted Horner evaluation.
//! - [`matching`]: the protocol steps, the reference oracle, bucketing.
//! - [`wire`]: framing and the client/server session state machines.

pub mod encoding;
pub mod matching;
pub mod paillier;
pub mod polyeval;
pub mod wire;

pub use encoding::{
    CredentialDomain, ElementEncoding, EncodingError, OptionCode, PayloadLayout, Side,
};
pub use matching::{
    client_finalize, client_round1, oracle_intersection, oracle_match, server_respond, Agreement,
    BucketParams, ClientPreferences, EncryptedQuery, MatchError, MatchResult, MatchSetup,
    NamedAgreement, PolicyRule, ProtocolParams, ServerPolicy, ServerResponse,
};
pub use paillier::{keygen, Ciphertext, Keypair, OpCounts, PaillierError, PrivateKey, PublicKey};
