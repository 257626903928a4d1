use credmatch_bench::fixture;
use credmatch_core::{
    client_round1, server_respond, BucketParams, EncryptedQuery, MatchError, MatchSetup,
    ProtocolParams,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::RandBigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn bench_paillier(c: &mut Criterion) {
    let mut group = c.benchmark_group("paillier");
    for bits in [1024u64, 2048] {
        let mut fx = fixture(bits, 1, 1, bits);
        let pk = fx.keypair.public.clone();
        let m = fx.rng.gen_biguint_below(pk.n());
        let k = fx.rng.gen_biguint_below(pk.n());
        let ct = pk.encrypt(&m, &mut fx.rng).unwrap();
        group.bench_with_input(BenchmarkId::new("encrypt", bits), &m, |b, m| {
            b.iter(|| pk.encrypt(m, &mut fx.rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("scalar_mul", bits), &k, |b, k| {
            b.iter(|| pk.scalar_mul(&ct, k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("decrypt", bits), &ct, |b, ct| {
            b.iter(|| fx.keypair.private.decrypt(ct).unwrap())
        });
    }
    group.finish();
}

/// Builds a query, reseeding the bucket hash until nothing overflows.
fn query_for(
    fx: &mut credmatch_bench::Fixture,
    bucketed: bool,
) -> Result<(MatchSetup, EncryptedQuery), MatchError> {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    loop {
        let params = ProtocolParams {
            bucketing: bucketed.then(|| BucketParams::auto_with_rng(fx.prefs.len(), &mut rng)),
            ..ProtocolParams::default()
        };
        let setup = MatchSetup::new(
            &fx.keypair.public,
            &fx.client_domain,
            &fx.server_domain,
            params,
        )?;
        match client_round1(&fx.prefs, &fx.keypair.public, &setup, &mut fx.rng) {
            Ok((query, _)) => return Ok((setup, query)),
            Err(MatchError::BucketOverflow { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

fn bench_server_respond(c: &mut Criterion) {
    let mut group = c.benchmark_group("server_respond");
    group.sample_size(10);
    for st in [16usize, 64, 256] {
        let mut fx = fixture(1024, st, st, st as u64);
        for (label, bucketed) in [("naive", false), ("bucketed", true)] {
            let (setup, query) = query_for(&mut fx, bucketed).unwrap();
            let pk = fx.keypair.public.clone();
            group.bench_function(BenchmarkId::new(label, st), |b| {
                b.iter(|| server_respond(&fx.policy, &query, &pk, &setup, &mut fx.rng).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_paillier, bench_server_respond);
criterion_main!(benches);
