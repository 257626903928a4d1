use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use credmatch_core::wire::{
    decode_reason, run_client_session, run_server_session, AbortReason, ClientSessionConfig,
    Direction, Frame, MsgType, ServerSessionConfig, SessionError, WireError, HEADER_LEN,
    MAX_BODY_LEN,
};
use credmatch_core::{
    keygen, oracle_match, BucketParams, ClientPreferences, CredentialDomain, ProtocolParams,
    ServerPolicy, Side,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn msg_type() -> impl Strategy<Value = MsgType> {
    prop_oneof![
        Just(MsgType::Hello),
        Just(MsgType::HelloAck),
        Just(MsgType::Coeffs),
        Just(MsgType::Response),
        Just(MsgType::Close),
        Just(MsgType::Abort),
    ]
}

proptest! {
    #[test]
    fn frame_roundtrip(t in msg_type(), body in prop::collection::vec(any::<u8>(), 0..512)) {
        let f = Frame::new(t, body).unwrap();
        let bytes = f.encode();
        prop_assert_eq!(bytes.len(), HEADER_LEN + f.body.len());
        prop_assert_eq!(Frame::decode(&bytes).unwrap(), (f.clone(), bytes.len()));
        let mut cursor = std::io::Cursor::new(bytes);
        prop_assert_eq!(credmatch_core::wire::read_frame(&mut cursor).unwrap(), f);
    }

    #[test]
    fn truncated_frames_are_reported(
        t in msg_type(),
        body in prop::collection::vec(any::<u8>(), 1..256),
        cut in any::<prop::sample::Index>(),
    ) {
        let bytes = Frame::new(t, body).unwrap().encode();
        let keep = cut.index(bytes.len());
        prop_assert_eq!(Frame::decode(&bytes[..keep]), Err(WireError::Truncated));
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        if let Ok((f, used)) = Frame::decode(&bytes) {
            prop_assert!(used <= bytes.len());
            prop_assert!(f.body.len() <= MAX_BODY_LEN);
        }
        let _ = credmatch_core::wire::decode_hello(&Frame::new(MsgType::Hello, bytes.clone()).unwrap());
        let _ = decode_reason(&Frame::new(MsgType::Abort, bytes).unwrap());
    }
}

fn domains() -> (CredentialDomain, CredentialDomain) {
    (
        CredentialDomain::new(Side::Client, ["passport", "id_card", "utility_bill"]).unwrap(),
        CredentialDomain::new(Side::Server, ["merchant_cert", "privacy_policy_sig"]).unwrap(),
    )
}

#[test]
fn tcp_session_end_to_end() {
    let (cd, sd) = domains();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let kp = keygen(512, &mut rng).unwrap();
    let prefs =
        ClientPreferences::from_names(&cd, &[vec!["passport"], vec!["id_card", "utility_bill"]])
            .unwrap();
    let policy = ServerPolicy::from_names(
        &cd,
        &sd,
        &[(
            vec!["id_card", "utility_bill"],
            vec!["merchant_cert", "privacy_policy_sig"],
        )],
    )
    .unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server_policy = policy.clone();
    let mut scfg = ServerSessionConfig::new(cd.clone(), sd.clone());
    scfg.pinned_key = Some(kp.public.clone());
    let server = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        run_server_session(
            &mut stream,
            &server_policy,
            &scfg,
            &mut ChaCha20Rng::seed_from_u64(2),
        )
    });

    let mut stream = TcpStream::connect(addr).unwrap();
    let ccfg = ClientSessionConfig {
        client_domain: cd.clone(),
        server_domain: sd.clone(),
        params: ProtocolParams {
            bucketing: Some(BucketParams::auto(2, [7; 16])),
            ..ProtocolParams::default()
        },
        timeout: Duration::from_secs(10),
    };
    let outcome = run_client_session(&mut stream, &prefs, &kp, &ccfg, &mut rng).unwrap();
    let served = server.join().unwrap().unwrap();

    assert_eq!(outcome.result, oracle_match(&prefs, &policy));
    assert_eq!(outcome.rules, 1);
    assert!(served.bucketed);
    assert_eq!(served.s, 2);
    assert_eq!(
        outcome.transcript.sent(Direction::ClientToServer).count(),
        2
    );
    assert_eq!(
        served.transcript.types(),
        [
            MsgType::Hello,
            MsgType::HelloAck,
            MsgType::Coeffs,
            MsgType::Response,
            MsgType::Close
        ]
    );
    let named = outcome.result.named(&cd, &sd).unwrap();
    assert_eq!(
        named[0].server_disclosure,
        ["merchant_cert", "privacy_policy_sig"]
    );
}

#[test]
fn client_reports_server_abort_reason() {
    let (cd, sd) = domains();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let kp = keygen(256, &mut rng).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut scfg = ServerSessionConfig::new(cd.clone(), sd.clone());
    scfg.max_options = 1;
    let server = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let policy = ServerPolicy::from_pairs([(1u64.into(), 1u64.into())]).unwrap();
        run_server_session(
            &mut stream,
            &policy,
            &scfg,
            &mut ChaCha20Rng::seed_from_u64(4),
        )
    });
    let prefs = ClientPreferences::new(vec![1u64.into(), 2u64.into()]).unwrap();
    let ccfg = ClientSessionConfig {
        client_domain: cd,
        server_domain: sd,
        params: ProtocolParams::default(),
        timeout: Duration::from_secs(10),
    };
    let err = run_client_session(
        &mut TcpStream::connect(addr).unwrap(),
        &prefs,
        &kp,
        &ccfg,
        &mut rng,
    )
    .unwrap_err();
    assert_eq!(
        err,
        SessionError::PeerAborted(AbortReason::ParameterRejected)
    );
    assert!(matches!(
        server.join().unwrap(),
        Err(SessionError::ParameterRejected(_))
    ));
}
