//! Deterministic fixtures shared by the benchmarks.

use credmatch_core::{
    keygen, ClientPreferences, CredentialDomain, Keypair, OptionCode, ServerPolicy, Side,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Fixture {
    pub keypair: Keypair,
    pub client_domain: CredentialDomain,
    pub server_domain: CredentialDomain,
    pub prefs: ClientPreferences,
    pub policy: ServerPolicy,
    pub rng: ChaCha20Rng,
}

/// `s` client options and `t` rules over domains wide enough to hold them.
/// About half the rules accept one of the client's options.
pub fn fixture(key_bits: u64, s: usize, t: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keypair = keygen(key_bits, &mut rng).expect("key generation");
    let client_bits = (usize::BITS - (s.max(t) * 2).leading_zeros()).max(4) as usize;
    let client_domain =
        CredentialDomain::new(Side::Client, (0..client_bits).map(|i| format!("c{i}"))).unwrap();
    let server_domain =
        CredentialDomain::new(Side::Server, (0..8).map(|i| format!("s{i}"))).unwrap();

    let max = (1u64 << client_bits) - 1;
    let mut codes = std::collections::BTreeSet::new();
    while codes.len() < s {
        codes.insert(rng.gen_range(1..=max));
    }
    let codes: Vec<u64> = codes.into_iter().collect();
    let mut rules = std::collections::BTreeSet::new();
    while rules.len() < t {
        let accept = if rng.gen_bool(0.5) {
            codes[rng.gen_range(0..codes.len())]
        } else {
            rng.gen_range(1..=max)
        };
        rules.insert((accept, rng.gen_range(1..256u64)));
    }
    Fixture {
        keypair,
        client_domain,
        server_domain,
        prefs: ClientPreferences::new(codes.into_iter().map(OptionCode::from).collect()).unwrap(),
        policy: ServerPolicy::from_pairs(rules.into_iter().map(|(b, c)| (b.into(), c.into())))
            .unwrap(),
        rng,
    }
}
