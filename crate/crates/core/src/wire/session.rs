use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::frame::{read_frame, write_frame, Frame, MsgType};
use super::message::{
    decode_coeffs, decode_hello, decode_hello_ack, decode_reason, decode_response, encode_abort,
    encode_close, encode_coeffs, encode_hello, encode_hello_ack, encode_response, Hello,
};
use super::{AbortReason, WireError};
use crate::encoding::{CredentialDomain, ElementEncoding};
use crate::matching::{
    client_finalize, client_round1, server_respond, ClientPreferences, EncryptedQuery, MatchError,
    MatchResult, MatchSetup, ProtocolParams, ServerPolicy, ServerResponse,
};
use crate::paillier::{Keypair, OpCounts, PublicKey};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Default cap on the client's `s` a server will serve.
pub const DEFAULT_MAX_OPTIONS: usize = 4096;

/// A byte stream whose reads and writes can time out.
pub trait Transport: Read + Write {
    fn set_timeouts(&self, timeout: Option<Duration>) -> io::Result<()>;

    /// Half-closes the sending side. Streams without half-close may no-op.
    fn shutdown_write(&self) -> io::Result<()> {
        Ok(())
    }
}

impl Transport for TcpStream {
    fn set_timeouts(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.set_read_timeout(timeout)?;
        self.set_write_timeout(timeout)
    }

    fn shutdown_write(&self) -> io::Result<()> {
        self.shutdown(std::net::Shutdown::Write)
    }
}

#[cfg(unix)]
impl Transport for std::os::unix::net::UnixStream {
    fn set_timeouts(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.set_read_timeout(timeout)?;
        self.set_write_timeout(timeout)
    }

    fn shutdown_write(&self) -> io::Result<()> {
        self.shutdown(std::net::Shutdown::Write)
    }
}

/// Upper bounds on draining a peer after ABORT.
const DRAIN_LIMIT: usize = 1 << 20;
const DRAIN_TIMEOUT: Duration = Duration::from_secs(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("peer ended the session: {0}")]
    PeerAborted(AbortReason),
    #[error("domain digest mismatch: both sides must load identical domain files")]
    DigestMismatch,
    #[error("client key is not the one this server accepts")]
    KeyRejected,
    #[error("parameters rejected: {0}")]
    ParameterRejected(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Match(#[from] MatchError),
}

impl SessionError {
    /// Reason to report to the peer, or `None` if the peer already ended
    /// the session.
    pub fn abort_reason(&self) -> Option<AbortReason> {
        Some(match self {
            SessionError::PeerAborted(_) => return None,
            SessionError::DigestMismatch => AbortReason::DigestMismatch,
            SessionError::KeyRejected => AbortReason::KeyRejected,
            SessionError::ParameterRejected(_) => AbortReason::ParameterRejected,
            SessionError::Wire(w) => match w {
                WireError::Timeout => AbortReason::Timeout,
                WireError::VersionMismatch(_) => AbortReason::VersionMismatch,
                WireError::UnexpectedMessage { .. } => AbortReason::UnexpectedMessage,
                WireError::CountMismatch { .. } => AbortReason::CountMismatch,
                WireError::Io(_) => AbortReason::Internal,
                WireError::Truncated
                | WireError::UnknownMessageType(_)
                | WireError::Oversize(_)
                | WireError::Malformed(_)
                | WireError::InvalidCiphertext => AbortReason::MalformedFrame,
            },
            SessionError::Match(MatchError::ResponseCount { .. }) => AbortReason::CountMismatch,
            SessionError::Match(_) => AbortReason::Internal,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Every frame exchanged in one session, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionTranscript {
    entries: Vec<(Direction, Frame)>,
}

impl SessionTranscript {
    pub fn entries(&self) -> &[(Direction, Frame)] {
        &self.entries
    }

    pub fn sent(&self, direction: Direction) -> impl Iterator<Item = &Frame> {
        self.entries
            .iter()
            .filter(move |(d, _)| *d == direction)
            .map(|(_, f)| f)
    }

    pub fn types(&self) -> Vec<MsgType> {
        self.entries.iter().map(|(_, f)| f.msg_type).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ClientSessionConfig {
    pub client_domain: CredentialDomain,
    pub server_domain: CredentialDomain,
    pub params: ProtocolParams,
    pub timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct ClientOutcome {
    pub result: MatchResult,
    pub rules: usize,
    pub transcript: SessionTranscript,
}

#[derive(Debug, Clone)]
pub struct ServerSessionConfig {
    pub client_domain: CredentialDomain,
    pub server_domain: CredentialDomain,
    pub guard_bits: u32,
    pub encoding: ElementEncoding,
    pub payload: bool,
    pub allow_bucketing: bool,
    /// Only this client key is served, when set.
    pub pinned_key: Option<PublicKey>,
    pub max_options: usize,
    pub timeout: Duration,
}

impl ServerSessionConfig {
    pub fn new(client_domain: CredentialDomain, server_domain: CredentialDomain) -> Self {
        let defaults = ProtocolParams::default();
        ServerSessionConfig {
            client_domain,
            server_domain,
            guard_bits: defaults.guard_bits,
            encoding: defaults.encoding,
            payload: defaults.payload,
            allow_bucketing: true,
            pinned_key: None,
            max_options: DEFAULT_MAX_OPTIONS,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// What the server saw. Deliberately nothing about which rules matched.
#[derive(Debug, Clone)]
pub struct ServerOutcome {
    pub s: usize,
    pub rules: usize,
    pub bucketed: bool,
    pub counts: OpCounts,
    pub transcript: SessionTranscript,
}

struct Conn<'a, S: Transport> {
    stream: &'a mut S,
    outgoing: Direction,
    transcript: SessionTranscript,
}

impl<S: Transport> Conn<'_, S> {
    fn send(&mut self, frame: Frame) -> Result<(), SessionError> {
        write_frame(self.stream, &frame)?;
        self.transcript.entries.push((self.outgoing, frame));
        Ok(())
    }

    fn incoming(&self) -> Direction {
        match self.outgoing {
            Direction::ClientToServer => Direction::ServerToClient,
            Direction::ServerToClient => Direction::ClientToServer,
        }
    }

    /// Next frame of type `want`. An ABORT from the peer, or any other
    /// type, ends the session.
    fn expect(&mut self, want: MsgType) -> Result<Frame, SessionError> {
        let frame = read_frame(self.stream)?;
        self.transcript
            .entries
            .push((self.incoming(), frame.clone()));
        if frame.msg_type == MsgType::Abort {
            return Err(SessionError::PeerAborted(decode_reason(&frame)?));
        }
        if frame.msg_type != want {
            return Err(WireError::UnexpectedMessage {
                expected: want,
                got: frame.msg_type,
            }
            .into());
        }
        Ok(frame)
    }

    fn abort_with(&mut self, err: &SessionError) {
        let Some(reason) = err.abort_reason() else {
            return;
        };
        // Best effort: the peer may already be gone.
        if self.send(encode_abort(reason)).is_err() {
            return;
        }
        // Closing with unread input makes the kernel reset the connection,
        // which can discard the ABORT before the peer reads it. Half-close
        // and drain a bounded amount instead.
        if self.stream.shutdown_write().is_err() {
            return;
        }
        let _ = self.stream.set_timeouts(Some(DRAIN_TIMEOUT));
        let mut buf = [0u8; 8192];
        let mut drained = 0;
        while drained < DRAIN_LIMIT {
            match self.stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(k) => drained += k,
            }
        }
    }
}

/// Runs the client side of one session and returns the agreements.
pub fn run_client_session<S, R>(
    stream: &mut S,
    prefs: &ClientPreferences,
    keypair: &Keypair,
    config: &ClientSessionConfig,
    rng: &mut R,
) -> Result<ClientOutcome, SessionError>
where
    S: Transport,
    R: RngCore + CryptoRng + ?Sized,
{
    stream
        .set_timeouts(Some(config.timeout))
        .map_err(|e| WireError::Io(e.to_string()))?;
    let mut conn = Conn {
        stream,
        outgoing: Direction::ClientToServer,
        transcript: SessionTranscript::default(),
    };
    match client_steps(&mut conn, prefs, keypair, config, rng) {
        Ok((result, rules)) => Ok(ClientOutcome {
            result,
            rules,
            transcript: conn.transcript,
        }),
        Err(e) => {
            conn.abort_with(&e);
            Err(e)
        }
    }
}

fn client_steps<S, R>(
    conn: &mut Conn<'_, S>,
    prefs: &ClientPreferences,
    keypair: &Keypair,
    config: &ClientSessionConfig,
    rng: &mut R,
) -> Result<(MatchResult, usize), SessionError>
where
    S: Transport,
    R: RngCore + CryptoRng + ?Sized,
{
    let pk = &keypair.public;
    let setup = MatchSetup::new(
        pk,
        &config.client_domain,
        &config.server_domain,
        config.params,
    )?;
    let (query, session) = client_round1(prefs, pk, &setup, rng)?;
    let s = u32::try_from(prefs.len())
        .map_err(|_| SessionError::ParameterRejected("too many options".into()))?;

    conn.send(encode_hello(&Hello {
        public_key: pk.clone(),
        client_digest: config.client_domain.digest(),
        server_digest: config.server_domain.digest(),
        s,
        params: config.params,
    })?)?;
    let t = decode_hello_ack(&conn.expect(MsgType::HelloAck)?)? as usize;

    conn.send(encode_coeffs(pk, &query.flatten())?)?;
    let response = decode_response(&conn.expect(MsgType::Response)?, pk, t)?;

    let close = conn.expect(MsgType::Close)?;
    match decode_reason(&close)? {
        AbortReason::Ok => {}
        other => return Err(SessionError::PeerAborted(other)),
    }
    let result = client_finalize(session, &ServerResponse::new(response), &keypair.private, t)?;
    Ok((result, t))
}

/// Serves one session over `stream`.
pub fn run_server_session<S, R>(
    stream: &mut S,
    policy: &ServerPolicy,
    config: &ServerSessionConfig,
    rng: &mut R,
) -> Result<ServerOutcome, SessionError>
where
    S: Transport,
    R: RngCore + CryptoRng + ?Sized,
{
    stream
        .set_timeouts(Some(config.timeout))
        .map_err(|e| WireError::Io(e.to_string()))?;
    let mut conn = Conn {
        stream,
        outgoing: Direction::ServerToClient,
        transcript: SessionTranscript::default(),
    };
    match server_steps(&mut conn, policy, config, rng) {
        Ok((s, bucketed, counts)) => Ok(ServerOutcome {
            s,
            rules: policy.len(),
            bucketed,
            counts,
            transcript: conn.transcript,
        }),
        Err(e) => {
            conn.abort_with(&e);
            Err(e)
        }
    }
}

fn server_steps<S, R>(
    conn: &mut Conn<'_, S>,
    policy: &ServerPolicy,
    config: &ServerSessionConfig,
    rng: &mut R,
) -> Result<(usize, bool, OpCounts), SessionError>
where
    S: Transport,
    R: RngCore + CryptoRng + ?Sized,
{
    let hello = decode_hello(&conn.expect(MsgType::Hello)?)?;
    let (pk, setup, s) = check_hello(&hello, policy, config)?;
    let t = u32::try_from(policy.len())
        .map_err(|_| SessionError::ParameterRejected("policy too large".into()))?;
    conn.send(encode_hello_ack(t)?)?;

    let shape = setup.query_shape(s);
    let coeffs = decode_coeffs(&conn.expect(MsgType::Coeffs)?, &pk, shape.ciphertexts())?;
    let query = EncryptedQuery::from_flat(coeffs, shape)?;
    let response = server_respond(policy, &query, &pk, &setup, rng)?;
    conn.send(encode_response(&pk, response.ciphertexts())?)?;
    conn.send(encode_close(AbortReason::Ok))?;
    Ok((
        s,
        setup.params().bucketing.is_some(),
        pk.counter().snapshot(),
    ))
}

fn check_hello(
    hello: &Hello,
    policy: &ServerPolicy,
    config: &ServerSessionConfig,
) -> Result<(PublicKey, MatchSetup, usize), SessionError> {
    if let Some(pinned) = &config.pinned_key {
        if pinned != &hello.public_key {
            return Err(SessionError::KeyRejected);
        }
    }
    if hello.client_digest != config.client_domain.digest()
        || hello.server_digest != config.server_domain.digest()
    {
        return Err(SessionError::DigestMismatch);
    }
    let p = &hello.params;
    let reject = |msg: String| Err(SessionError::ParameterRejected(msg));
    if p.guard_bits != config.guard_bits {
        return reject(format!(
            "guard_bits {} (server uses {})",
            p.guard_bits, config.guard_bits
        ));
    }
    if p.encoding != config.encoding {
        return reject(format!(
            "hash width {} (server uses {})",
            p.encoding.hash_width(),
            config.encoding.hash_width()
        ));
    }
    if p.payload != config.payload {
        return reject("payload mode differs".into());
    }
    let s = hello.s as usize;
    if s == 0 || s > config.max_options {
        return reject(format!("s = {s} outside 1..={}", config.max_options));
    }
    if let Some(b) = &p.bucketing {
        if !config.allow_bucketing {
            return reject("bucketing is disabled on this server".into());
        }
        if b.buckets == 0
            || b.max_load == 0
            || b.query_ciphertexts() > 2 * config.max_options as u64 + 2
        {
            return reject(format!(
                "bucket parameters {} x {} out of range",
                b.buckets, b.max_load
            ));
        }
    }
    if policy.is_empty() {
        return Err(MatchError::EmptyPolicy.into());
    }
    // Each session gets its own exponentiation tally.
    let pk = hello.public_key.with_fresh_counter();
    let setup = MatchSetup::new(&pk, &config.client_domain, &config.server_domain, *p)
        .map_err(|e| SessionError::ParameterRejected(e.to_string()))?;
    Ok((pk, setup, s))
}
