//! The matching protocol.
//!
//! 1. The client encrypts the coefficients of `p(x) = prod (x - a_i)`
//!    ([`client_round1`]).
//! 2. For every rule `(b_j, c_j)` the server returns
//!    `Enc(r_j * p(b_j) + (b_j || c_j))` with a fresh nonzero mask `r_j`,
//!    rerandomized and in shuffled order ([`server_respond`]).
//! 3. The client decrypts and keeps the values whose guard band is clear and
//!    whose `b` is one of its own options ([`client_finalize`]).
//!
//! At a root the mask term vanishes, so every true match is recovered;
//! anything else decrypts to a value that is uniform-looking in `Z_n`.

mod bucket;

pub use bucket::{bucketize, BucketParams, LOAD_FACTOR, LOAD_OFFSET};

use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encoding::{
    validate_layout_with, CredentialDomain, ElementEncoding, EncodingError, LayoutParams,
    OptionCode, PayloadLayout, MIN_GUARD_BITS,
};
use crate::paillier::{Ciphertext, PaillierError, PrivateKey, PublicKey};
use crate::polyeval::{
    build_root_poly, eval_encrypted_horner, EncryptedPolynomial, PolyError, RootPolynomial,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("client preferences are empty")]
    EmptyPreferences,
    #[error("duplicate client option {0}")]
    DuplicateOption(OptionCode),
    #[error("server policy is empty")]
    EmptyPolicy,
    #[error("duplicate policy rule ({0}, {1})")]
    DuplicateRule(OptionCode, OptionCode),
    #[error("two client options map to the same element; use a wider hash")]
    ElementCollision,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("query has {got} ciphertexts arranged unexpectedly, expected {expected}")]
    QueryShape { expected: String, got: String },
    #[error("response has {got} ciphertexts, expected {expected}")]
    ResponseCount { expected: usize, got: usize },
    #[error(
        "bucket {bucket} holds {load} options but max load is {max_load}; raise the bucket count or max load"
    )]
    BucketOverflow {
        bucket: usize,
        load: usize,
        max_load: usize,
    },
    #[error("bucket count and max load must be positive")]
    InvalidBucketParams,
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
}

/// The client's acceptable options `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientPreferences {
    options: Vec<OptionCode>,
}

impl ClientPreferences {
    pub fn new(options: Vec<OptionCode>) -> Result<Self, MatchError> {
        if options.is_empty() {
            return Err(MatchError::EmptyPreferences);
        }
        let mut seen = HashSet::with_capacity(options.len());
        for o in &options {
            if !seen.insert(o) {
                return Err(MatchError::DuplicateOption(o.clone()));
            }
        }
        Ok(ClientPreferences { options })
    }

    /// Encodes name lists against the client domain. Every option must be
    /// a non-empty subset of the domain.
    pub fn from_names<S: AsRef<str>>(
        domain: &CredentialDomain,
        options: &[Vec<S>],
    ) -> Result<Self, MatchError> {
        let codes = options
            .iter()
            .map(|o| domain.encode_option(o.iter().map(AsRef::as_ref)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(codes)
    }

    pub fn options(&self) -> &[OptionCode] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// One access-policy rule: if the client shows `accept`, the server shows
/// `disclose`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyRule {
    pub accept: OptionCode,
    pub disclose: OptionCode,
}

/// The server's acceptable combinations `Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerPolicy {
    rules: Vec<PolicyRule>,
}

impl ServerPolicy {
    /// Rules must be pairwise distinct; shared `accept` or `disclose`
    /// values are fine.
    pub fn new(rules: Vec<PolicyRule>) -> Result<Self, MatchError> {
        let mut seen = HashSet::with_capacity(rules.len());
        for r in &rules {
            if !seen.insert(r) {
                return Err(MatchError::DuplicateRule(
                    r.accept.clone(),
                    r.disclose.clone(),
                ));
            }
        }
        Ok(ServerPolicy { rules })
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (OptionCode, OptionCode)>,
    ) -> Result<Self, MatchError> {
        Self::new(
            pairs
                .into_iter()
                .map(|(accept, disclose)| PolicyRule { accept, disclose })
                .collect(),
        )
    }

    pub fn from_names<S: AsRef<str>>(
        client_domain: &CredentialDomain,
        server_domain: &CredentialDomain,
        rules: &[(Vec<S>, Vec<S>)],
    ) -> Result<Self, MatchError> {
        let rules = rules
            .iter()
            .map(|(a, d)| {
                Ok(PolicyRule {
                    accept: client_domain.encode_option(a.iter().map(AsRef::as_ref))?,
                    disclose: server_domain.encode_option(d.iter().map(AsRef::as_ref))?,
                })
            })
            .collect::<Result<Vec<_>, EncodingError>>()?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[PolicyRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Parameters both parties must agree on before any ciphertext is sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    pub guard_bits: u32,
    pub encoding: ElementEncoding,
    /// `false` runs the plain variant, which only reveals `X ∩ {b_j}`.
    pub payload: bool,
    pub bucketing: Option<BucketParams>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            guard_bits: MIN_GUARD_BITS,
            encoding: ElementEncoding::Bitmask,
            payload: true,
            bucketing: None,
        }
    }
}

impl ProtocolParams {
    pub fn layout_params(&self) -> LayoutParams {
        LayoutParams {
            guard_bits: self.guard_bits,
            encoding: self.encoding,
            payload: self.payload,
            reserve_padding: self.bucketing.is_some(),
        }
    }
}

/// Protocol parameters together with the layout they induce under a key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSetup {
    params: ProtocolParams,
    layout: PayloadLayout,
    /// Width available to real elements (excludes the padding bit).
    element_width: u32,
}

impl MatchSetup {
    pub fn new(
        pk: &PublicKey,
        client_domain: &CredentialDomain,
        server_domain: &CredentialDomain,
        params: ProtocolParams,
    ) -> Result<Self, MatchError> {
        if let Some(b) = &params.bucketing {
            b.validate()?;
        }
        let layout =
            validate_layout_with(pk, client_domain, server_domain, &params.layout_params())?;
        Ok(MatchSetup {
            params,
            layout,
            element_width: params.encoding.width(client_domain),
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn layout(&self) -> &PayloadLayout {
        &self.layout
    }

    /// The reserved padding root `2^width_b - 1`, present only when bucketing.
    /// Its top bit lies above every real element.
    pub fn padding_root(&self) -> Option<BigUint> {
        self.params
            .bucketing
            .map(|_| (BigUint::one() << self.layout.width_b()) - 1u32)
    }

    /// Number of polynomials and the degree of each for a client with `s`
    /// options.
    pub fn query_shape(&self, s: usize) -> QueryShape {
        match &self.params.bucketing {
            Some(b) => QueryShape {
                polynomials: b.buckets as usize,
                degree: b.max_load as usize,
            },
            None => QueryShape {
                polynomials: 1,
                degree: s,
            },
        }
    }

    fn element(&self, code: &OptionCode) -> Result<BigUint, MatchError> {
        let e = self.params.encoding.element(code);
        if e.bits() > self.element_width as u64 {
            return Err(MatchError::LayoutMismatch(format!(
                "option {code} does not fit {} bits",
                self.element_width
            )));
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryShape {
    pub polynomials: usize,
    pub degree: usize,
}

impl QueryShape {
    pub fn ciphertexts(&self) -> usize {
        self.polynomials * (self.degree + 1)
    }
}

/// The client's first message: one encrypted polynomial, or one per bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedQuery {
    polynomials: Vec<EncryptedPolynomial>,
}

impl EncryptedQuery {
    pub fn polynomials(&self) -> &[EncryptedPolynomial] {
        &self.polynomials
    }

    pub fn ciphertext_count(&self) -> usize {
        self.polynomials.iter().map(|p| p.degree() + 1).sum()
    }

    /// Coefficients in wire order: polynomial by polynomial, lowest degree first.
    pub fn flatten(&self) -> Vec<Ciphertext> {
        self.polynomials
            .iter()
            .flat_map(|p| p.coefficients().iter().cloned())
            .collect()
    }

    pub fn from_flat(ciphertexts: Vec<Ciphertext>, shape: QueryShape) -> Result<Self, MatchError> {
        if shape.polynomials == 0 || shape.degree == 0 || ciphertexts.len() != shape.ciphertexts() {
            return Err(MatchError::QueryShape {
                expected: format!("{} x {}", shape.polynomials, shape.degree + 1),
                got: ciphertexts.len().to_string(),
            });
        }
        let polynomials = ciphertexts
            .chunks(shape.degree + 1)
            .map(|c| EncryptedPolynomial::from_ciphertexts(c.to_vec()))
            .collect::<Result<_, _>>()?;
        Ok(EncryptedQuery { polynomials })
    }

    fn check_shape(&self, setup: &MatchSetup) -> Result<(), MatchError> {
        let got = || {
            self.polynomials
                .iter()
                .map(|p| (p.degree() + 1).to_string())
                .collect::<Vec<_>>()
                .join("+")
        };
        match &setup.params.bucketing {
            Some(b) => {
                let ok = self.polynomials.len() == b.buckets as usize
                    && self
                        .polynomials
                        .iter()
                        .all(|p| p.degree() == b.max_load as usize);
                if !ok {
                    return Err(MatchError::QueryShape {
                        expected: format!("{} x {}", b.buckets, b.max_load + 1),
                        got: got(),
                    });
                }
            }
            None => {
                if self.polynomials.len() != 1 || self.polynomials[0].degree() == 0 {
                    return Err(MatchError::QueryShape {
                        expected: "1 polynomial of degree >= 1".into(),
                        got: got(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// State the client keeps between round 1 and finalize.
#[derive(Debug)]
pub struct ClientSession {
    setup: MatchSetup,
    by_element: HashMap<BigUint, OptionCode>,
}

impl ClientSession {
    pub fn s(&self) -> usize {
        self.by_element.len()
    }

    pub fn setup(&self) -> &MatchSetup {
        &self.setup
    }
}

/// Builds and encrypts the client's root polynomial(s).
pub fn client_round1<R: RngCore + CryptoRng + ?Sized>(
    prefs: &ClientPreferences,
    pk: &PublicKey,
    setup: &MatchSetup,
    rng: &mut R,
) -> Result<(EncryptedQuery, ClientSession), MatchError> {
    if prefs.is_empty() {
        return Err(MatchError::EmptyPreferences);
    }
    setup.layout.fits(pk)?;
    let mut by_element = HashMap::with_capacity(prefs.len());
    let mut elements = Vec::with_capacity(prefs.len());
    for code in prefs.options() {
        let e = setup.element(code)?;
        if by_element.insert(e.clone(), code.clone()).is_some() {
            return Err(MatchError::ElementCollision);
        }
        elements.push(e);
    }

    let polys: Vec<RootPolynomial> = match (&setup.params.bucketing, setup.padding_root()) {
        (Some(b), Some(pad)) => bucketize(&elements, b)?
            .iter()
            .map(|roots| RootPolynomial::with_padding(roots, &pad, b.max_load as usize, pk.n()))
            .collect::<Result<_, _>>()?,
        _ => vec![build_root_poly(&elements, pk.n())?],
    };
    let polynomials = polys
        .iter()
        .map(|p| EncryptedPolynomial::encrypt(p, pk, rng))
        .collect::<Result<_, _>>()?;

    Ok((
        EncryptedQuery { polynomials },
        ClientSession {
            setup: setup.clone(),
            by_element,
        },
    ))
}

/// The server's masked, shuffled answers, one per policy rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerResponse {
    ciphertexts: Vec<Ciphertext>,
}

impl ServerResponse {
    pub fn new(ciphertexts: Vec<Ciphertext>) -> Self {
        ServerResponse { ciphertexts }
    }

    pub fn ciphertexts(&self) -> &[Ciphertext] {
        &self.ciphertexts
    }

    pub fn into_ciphertexts(self) -> Vec<Ciphertext> {
        self.ciphertexts
    }

    pub fn len(&self) -> usize {
        self.ciphertexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ciphertexts.is_empty()
    }
}

struct RuleJob {
    poly: usize,
    point: BigUint,
    plaintext: BigUint,
    mask: BigUint,
    enc_nonce: BigUint,
    rerand_nonce: BigUint,
}

/// Computes `Enc(r_j * p(b_j) + (b_j || c_j))` for each rule, or
/// `Enc(r_j * p(b_j) + b_j)` in the plain variant.
pub fn server_respond<R: RngCore + CryptoRng + ?Sized>(
    policy: &ServerPolicy,
    query: &EncryptedQuery,
    pk: &PublicKey,
    setup: &MatchSetup,
    rng: &mut R,
) -> Result<ServerResponse, MatchError> {
    if policy.is_empty() {
        return Err(MatchError::EmptyPolicy);
    }
    setup.layout.fits(pk)?;
    query.check_shape(setup)?;

    let one = BigUint::one();
    let mut jobs = Vec::with_capacity(policy.len());
    for rule in policy.rules() {
        let point = setup.element(&rule.accept)?;
        let payload = if setup.params.payload {
            rule.disclose.value().clone()
        } else {
            BigUint::default()
        };
        let plaintext = setup.layout.pack(&point, &payload).map_err(|e| {
            MatchError::LayoutMismatch(format!("rule ({}, {}): {e}", rule.accept, rule.disclose))
        })?;
        let poly = match &setup.params.bucketing {
            Some(b) => b.bucket_of(&point),
            None => 0,
        };
        jobs.push(RuleJob {
            poly,
            point,
            plaintext,
            // r_j = 0 would unmask the rule, so sample from [1, n).
            mask: rng.gen_biguint_range(&one, pk.n()),
            enc_nonce: pk.random_unit(rng),
            rerand_nonce: pk.random_unit(rng),
        });
    }

    let mut out = jobs
        .par_iter()
        .map(|job| {
            let at_point = eval_encrypted_horner(pk, &query.polynomials[job.poly], &job.point)?;
            let masked = pk.scalar_mul(&at_point, &job.mask)?;
            let summed = pk.add(
                &masked,
                &pk.encrypt_with_unit(&job.plaintext, &job.enc_nonce),
            );
            Ok(pk.rerandomize_with_unit(&summed, &job.rerand_nonce))
        })
        .collect::<Result<Vec<_>, MatchError>>()?;
    out.shuffle(rng);
    Ok(ServerResponse { ciphertexts: out })
}

/// One agreed combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Agreement {
    pub client_option: OptionCode,
    /// `None` in the plain variant.
    pub server_disclosure: Option<OptionCode>,
}

/// Agreement with both sides spelled out as credential names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NamedAgreement {
    pub client_option: Vec<String>,
    pub server_disclosure: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    agreements: BTreeSet<Agreement>,
}

impl MatchResult {
    pub fn agreements(&self) -> &BTreeSet<Agreement> {
        &self.agreements
    }

    pub fn len(&self) -> usize {
        self.agreements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agreements.is_empty()
    }

    /// The matched client options, i.e. `X ∩ {b_j}`.
    pub fn client_options(&self) -> BTreeSet<OptionCode> {
        self.agreements
            .iter()
            .map(|a| a.client_option.clone())
            .collect()
    }

    pub fn named(
        &self,
        client_domain: &CredentialDomain,
        server_domain: &CredentialDomain,
    ) -> Result<Vec<NamedAgreement>, EncodingError> {
        self.agreements
            .iter()
            .map(|a| {
                Ok(NamedAgreement {
                    client_option: client_domain.decode_option(&a.client_option)?,
                    server_disclosure: match &a.server_disclosure {
                        Some(c) => server_domain.decode_option(c)?,
                        None => Vec::new(),
                    },
                })
            })
            .collect()
    }
}

impl FromIterator<Agreement> for MatchResult {
    fn from_iter<I: IntoIterator<Item = Agreement>>(iter: I) -> Self {
        MatchResult {
            agreements: iter.into_iter().collect(),
        }
    }
}

/// Decrypts the response and keeps only well-formed answers for the
/// client's own options.
pub fn client_finalize(
    session: ClientSession,
    response: &ServerResponse,
    sk: &PrivateKey,
    expected_rules: usize,
) -> Result<MatchResult, MatchError> {
    if response.len() != expected_rules {
        return Err(MatchError::ResponseCount {
            expected: expected_rules,
            got: response.len(),
        });
    }
    let layout = session.setup.layout;
    let payload = session.setup.params.payload;
    let mut agreements = BTreeSet::new();
    for c in response.ciphertexts() {
        let m = sk.decrypt(c)?;
        let Some((b, c)) = layout.unpack(&m) else {
            continue;
        };
        if let Some(option) = session.by_element.get(&b) {
            agreements.insert(Agreement {
                client_option: option.clone(),
                server_disclosure: payload.then(|| OptionCode::new(c)),
            });
        }
    }
    Ok(MatchResult { agreements })
}

/// Reference semantics without cryptography: `{(a, c_j) : a ∈ X, b_j = a}`.
pub fn oracle_match(prefs: &ClientPreferences, policy: &ServerPolicy) -> MatchResult {
    let mut out = BTreeSet::new();
    for a in prefs.options() {
        for rule in policy.rules() {
            if &rule.accept == a {
                out.insert(Agreement {
                    client_option: a.clone(),
                    server_disclosure: Some(rule.disclose.clone()),
                });
            }
        }
    }
    MatchResult { agreements: out }
}

/// Reference semantics of the plain variant: `X ∩ {b_j}`.
pub fn oracle_intersection(prefs: &ClientPreferences, policy: &ServerPolicy) -> MatchResult {
    let accepted: HashSet<&OptionCode> = policy.rules().iter().map(|r| &r.accept).collect();
    prefs
        .options()
        .iter()
        .filter(|a| accepted.contains(a))
        .map(|a| Agreement {
            client_option: a.clone(),
            server_disclosure: None,
        })
        .collect()
}

/// Runs the three steps in memory. Handy for tests and benchmarks.
pub fn run_in_memory<R: RngCore + CryptoRng + ?Sized>(
    prefs: &ClientPreferences,
    policy: &ServerPolicy,
    keypair: &crate::paillier::Keypair,
    setup: &MatchSetup,
    rng: &mut R,
) -> Result<MatchResult, MatchError> {
    let (query, session) = client_round1(prefs, &keypair.public, setup, rng)?;
    let response = server_respond(policy, &query, &keypair.public, setup, rng)?;
    client_finalize(session, &response, &keypair.private, policy.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Side;
    use crate::paillier::{keygen, Keypair};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn domains(nc: usize, ns: usize) -> (CredentialDomain, CredentialDomain) {
        (
            CredentialDomain::new(Side::Client, (0..nc).map(|i| format!("c{i}"))).unwrap(),
            CredentialDomain::new(Side::Server, (0..ns).map(|i| format!("s{i}"))).unwrap(),
        )
    }

    fn prefs(codes: &[u64]) -> ClientPreferences {
        ClientPreferences::new(codes.iter().map(|&c| c.into()).collect()).unwrap()
    }

    fn policy(pairs: &[(u64, u64)]) -> ServerPolicy {
        ServerPolicy::from_pairs(pairs.iter().map(|&(b, c)| (b.into(), c.into()))).unwrap()
    }

    fn fixture(bits: u64, seed: u64) -> (Keypair, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (keygen(bits, &mut rng).unwrap(), rng)
    }

    fn setup(kp: &Keypair, params: ProtocolParams) -> MatchSetup {
        let (cd, sd) = domains(8, 8);
        MatchSetup::new(&kp.public, &cd, &sd, params).unwrap()
    }

    fn agreement(b: u64, c: u64) -> Agreement {
        Agreement {
            client_option: b.into(),
            server_disclosure: Some(c.into()),
        }
    }

    #[test]
    fn type_invariants() {
        assert_eq!(
            ClientPreferences::new(vec![]).unwrap_err(),
            MatchError::EmptyPreferences
        );
        assert!(matches!(
            ClientPreferences::new(vec![1.into(), 1.into()]),
            Err(MatchError::DuplicateOption(_))
        ));
        assert!(matches!(
            ServerPolicy::from_pairs([(1.into(), 2.into()), (1.into(), 2.into())]),
            Err(MatchError::DuplicateRule(..))
        ));
        assert!(ServerPolicy::from_pairs([(1.into(), 2.into()), (1.into(), 3.into())]).is_ok());
    }

    #[test]
    fn round1_ciphertext_counts() {
        let (kp, mut rng) = fixture(512, 20);
        let st = setup(&kp, ProtocolParams::default());
        let (q, _) = client_round1(&prefs(&[10]), &kp.public, &st, &mut rng).unwrap();
        assert_eq!(q.ciphertext_count(), 2);
        let sixteen: Vec<u64> = (1..=16).collect();
        let (q, s) = client_round1(&prefs(&sixteen), &kp.public, &st, &mut rng).unwrap();
        assert_eq!(q.ciphertext_count(), 17);
        assert_eq!(s.s(), 16);
        assert_eq!(st.query_shape(16).ciphertexts(), 17);
    }

    #[test]
    fn round1_rejects_overflowing_layout() {
        let (kp, mut rng) = fixture(64, 21);
        let (cd, sd) = domains(8, 8);
        let st = MatchSetup::new(&kp.public, &cd, &sd, ProtocolParams::default()).unwrap();
        let (cd16, sd16) = domains(16, 16);
        assert!(matches!(
            MatchSetup::new(&kp.public, &cd16, &sd16, ProtocolParams::default()),
            Err(MatchError::Encoding(EncodingError::Overflow { .. }))
        ));
        // A code wider than the client domain is rejected up front.
        assert!(matches!(
            client_round1(&prefs(&[1 << 9]), &kp.public, &st, &mut rng),
            Err(MatchError::LayoutMismatch(_))
        ));
    }

    #[test]
    fn forced_and_disjoint_matches() {
        let (kp, mut rng) = fixture(256, 22);
        let st = setup(&kp, ProtocolParams::default());
        let r = run_in_memory(&prefs(&[5]), &policy(&[(5, 9)]), &kp, &st, &mut rng).unwrap();
        assert_eq!(r, [agreement(5, 9)].into_iter().collect());

        let (cd, sd) = domains(8, 8);
        let named = r.named(&cd, &sd).unwrap();
        assert_eq!(named[0].client_option, vec!["c0", "c2"]);
        assert_eq!(named[0].server_disclosure, vec!["s0", "s3"]);

        let r = run_in_memory(&prefs(&[1, 2]), &policy(&[(3, 4)]), &kp, &st, &mut rng).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn server_response_decrypts_to_payload_exactly_at_roots() {
        let (kp, mut rng) = fixture(256, 23);
        let st = setup(&kp, ProtocolParams::default());
        let x = prefs(&[10, 12]);
        let y = policy(&[(10, 3), (11, 3), (12, 7)]);
        let (q, session) = client_round1(&x, &kp.public, &st, &mut rng).unwrap();
        let resp = server_respond(&y, &q, &kp.public, &st, &mut rng).unwrap();
        assert_eq!(resp.len(), 3);
        let plain: BTreeSet<BigUint> = resp
            .ciphertexts()
            .iter()
            .map(|c| kp.private.decrypt(c).unwrap())
            .collect();
        assert!(plain.contains(&BigUint::from(3u32 * 256 + 10)));
        assert!(plain.contains(&BigUint::from(7u32 * 256 + 12)));
        assert!(!plain.contains(&BigUint::from(3u32 * 256 + 11)));
        let r = client_finalize(session, &resp, &kp.private, 3).unwrap();
        assert_eq!(r, oracle_match(&x, &y));
    }

    #[test]
    fn server_rejects_empty_policy_and_bad_shape() {
        let (kp, mut rng) = fixture(256, 24);
        let st = setup(&kp, ProtocolParams::default());
        let (q, _) = client_round1(&prefs(&[1]), &kp.public, &st, &mut rng).unwrap();
        let empty = ServerPolicy::new(vec![]).unwrap();
        assert_eq!(
            server_respond(&empty, &q, &kp.public, &st, &mut rng),
            Err(MatchError::EmptyPolicy)
        );
        let bucketed = setup(
            &kp,
            ProtocolParams {
                bucketing: Some(BucketParams::auto(4, [0; 16])),
                ..Default::default()
            },
        );
        assert!(matches!(
            server_respond(&policy(&[(1, 1)]), &q, &kp.public, &bucketed, &mut rng),
            Err(MatchError::QueryShape { .. })
        ));
        // Disclosure wider than the server domain.
        assert!(matches!(
            server_respond(&policy(&[(1, 1 << 8)]), &q, &kp.public, &st, &mut rng),
            Err(MatchError::LayoutMismatch(_))
        ));
    }

    #[test]
    fn finalize_checks_count() {
        let (kp, mut rng) = fixture(256, 25);
        let st = setup(&kp, ProtocolParams::default());
        let (q, session) = client_round1(&prefs(&[1]), &kp.public, &st, &mut rng).unwrap();
        let resp = server_respond(&policy(&[(1, 1)]), &q, &kp.public, &st, &mut rng).unwrap();
        assert_eq!(
            client_finalize(session, &resp, &kp.private, 2),
            Err(MatchError::ResponseCount {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn oracle_examples() {
        let x = prefs(&[10, 12]);
        let y = policy(&[(10, 3), (11, 3), (12, 7)]);
        assert_eq!(
            oracle_match(&x, &y),
            [agreement(10, 3), agreement(12, 7)].into_iter().collect()
        );
        let shared = policy(&[(10, 3), (10, 5)]);
        assert_eq!(oracle_match(&prefs(&[10]), &shared).len(), 2);
        assert!(oracle_match(&prefs(&[1]), &shared).is_empty());
        assert_eq!(
            oracle_intersection(&x, &y).client_options(),
            [10u64.into(), 12u64.into()].into_iter().collect()
        );
    }

    #[test]
    fn multiple_rules_with_same_accept_all_delivered() {
        let (kp, mut rng) = fixture(256, 26);
        let st = setup(&kp, ProtocolParams::default());
        let y = policy(&[(10, 3), (10, 5), (12, 1)]);
        let r = run_in_memory(&prefs(&[10]), &y, &kp, &st, &mut rng).unwrap();
        assert_eq!(
            r,
            [agreement(10, 3), agreement(10, 5)].into_iter().collect()
        );
    }

    #[test]
    fn plain_variant_returns_intersection() {
        let (kp, mut rng) = fixture(256, 27);
        let st = setup(
            &kp,
            ProtocolParams {
                payload: false,
                ..Default::default()
            },
        );
        assert_eq!(st.layout().width_c(), 0);
        let x = prefs(&[1, 2, 3, 4]);
        let y = policy(&[(2, 9), (4, 9), (4, 10), (200, 1)]);
        let r = run_in_memory(&x, &y, &kp, &st, &mut rng).unwrap();
        assert_eq!(r, oracle_intersection(&x, &y));
    }

    #[test]
    fn hashed_encoding_matches_oracle() {
        let (kp, mut rng) = fixture(256, 28);
        let params = ProtocolParams {
            encoding: ElementEncoding::hashed(64).unwrap(),
            ..Default::default()
        };
        let st = setup(&kp, params);
        assert_eq!(st.layout().width_b(), 64);
        let x = prefs(&[3, 17, 200]);
        let y = policy(&[(17, 4), (18, 4), (200, 255)]);
        let r = run_in_memory(&x, &y, &kp, &st, &mut rng).unwrap();
        assert_eq!(r, oracle_match(&x, &y));
    }

    #[test]
    fn hash_collisions_are_reported() {
        let (kp, mut rng) = fixture(256, 29);
        let params = ProtocolParams {
            encoding: ElementEncoding::hashed(2).unwrap(),
            ..Default::default()
        };
        let st = setup(&kp, params);
        let x = prefs(&[1, 2, 3, 4, 5]);
        assert_eq!(
            client_round1(&x, &kp.public, &st, &mut rng).unwrap_err(),
            MatchError::ElementCollision
        );
    }

    #[test]
    fn bucketed_single_option_equals_naive() {
        let (kp, mut rng) = fixture(256, 30);
        let bucket = BucketParams::auto(1, [7; 16]);
        assert_eq!((bucket.buckets, bucket.max_load), (1, 1));
        let st_b = setup(
            &kp,
            ProtocolParams {
                bucketing: Some(bucket),
                ..Default::default()
            },
        );
        let st_n = setup(&kp, ProtocolParams::default());
        let x = prefs(&[42]);
        let y = policy(&[(42, 1), (43, 2)]);
        let (qb, _) = client_round1(&x, &kp.public, &st_b, &mut rng).unwrap();
        let (qn, _) = client_round1(&x, &kp.public, &st_n, &mut rng).unwrap();
        assert_eq!(qb.ciphertext_count(), qn.ciphertext_count());
        assert_eq!(
            run_in_memory(&x, &y, &kp, &st_b, &mut rng).unwrap(),
            run_in_memory(&x, &y, &kp, &st_n, &mut rng).unwrap()
        );
    }

    #[test]
    fn bucketed_matches_oracle_and_pads_to_full_degree() {
        let (kp, mut rng) = fixture(256, 31);
        let codes: Vec<u64> = (1..=40).collect();
        let x = prefs(&codes);
        let bucket = BucketParams::auto(x.len(), [3; 16]);
        let st = setup(
            &kp,
            ProtocolParams {
                bucketing: Some(bucket),
                ..Default::default()
            },
        );
        assert_eq!(st.padding_root(), Some(BigUint::from(511u32)));
        let (q, _) = client_round1(&x, &kp.public, &st, &mut rng).unwrap();
        assert_eq!(q.polynomials().len(), bucket.buckets as usize);
        assert!(q
            .polynomials()
            .iter()
            .all(|p| p.degree() == bucket.max_load as usize));
        let y = policy(&[(5, 1), (39, 2), (41, 3), (255, 4), (7, 200)]);
        let r = run_in_memory(&x, &y, &kp, &st, &mut rng).unwrap();
        assert_eq!(r, oracle_match(&x, &y));
    }

    #[test]
    fn bucket_overflow_aborts_round1() {
        let (kp, mut rng) = fixture(256, 32);
        let st = setup(
            &kp,
            ProtocolParams {
                bucketing: Some(BucketParams {
                    buckets: 1,
                    max_load: 2,
                    seed: [0; 16],
                }),
                ..Default::default()
            },
        );
        assert!(matches!(
            client_round1(&prefs(&[1, 2, 3]), &kp.public, &st, &mut rng),
            Err(MatchError::BucketOverflow { load: 3, .. })
        ));
    }

    #[test]
    fn naive_scalar_mul_count_is_st_plus_t() {
        let (kp, mut rng) = fixture(256, 33);
        let pk = kp.public.with_fresh_counter();
        let st = setup(&kp, ProtocolParams::default());
        let x = prefs(&[1, 2, 3, 4, 5]);
        let y = policy(&[(1, 1), (9, 1), (10, 2)]);
        let (q, _) = client_round1(&x, &pk, &st, &mut rng).unwrap();
        let before = pk.counter().snapshot();
        server_respond(&y, &q, &pk, &st, &mut rng).unwrap();
        let d = pk.counter().snapshot().since(&before);
        assert_eq!(d.scalar_muls, 5 * 3 + 3);
        assert_eq!(d.encryptions, 3);
        assert_eq!(d.rerandomizations, 3);
    }

    #[test]
    fn transcript_shape_depends_only_on_s() {
        let (kp, mut rng) = fixture(256, 34);
        let st = setup(&kp, ProtocolParams::default());
        let (a, _) = client_round1(&prefs(&[1, 2, 3]), &kp.public, &st, &mut rng).unwrap();
        let (b, _) = client_round1(&prefs(&[200, 17, 99]), &kp.public, &st, &mut rng).unwrap();
        assert_eq!(a.ciphertext_count(), b.ciphertext_count());
        assert_ne!(a, b);
    }
}
