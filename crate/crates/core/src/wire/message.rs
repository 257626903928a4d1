//! Message bodies. Integers are big-endian; big integers are a 4-byte length
//! followed by their big-endian bytes. Ciphertexts are always written at the
//! byte width of `n^2` so body lengths depend only on counts and key size.

use num_bigint::BigUint;

use super::frame::{Frame, MsgType};
use super::{AbortReason, WireError};
use crate::encoding::ElementEncoding;
use crate::matching::{BucketParams, ProtocolParams};
use crate::paillier::{Ciphertext, PublicKey};

/// Largest big integer accepted inside a HELLO (a 32768-bit modulus).
const MAX_MODULUS_BYTES: usize = 4096;

const FLAG_PAYLOAD: u8 = 0b01;
const FLAG_BUCKETED: u8 = 0b10;

/// Client's opening message: key, domain digests, `s` and the parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub public_key: PublicKey,
    pub client_digest: [u8; 32],
    pub server_digest: [u8; 32],
    pub s: u32,
    pub params: ProtocolParams,
}

pub fn encode_hello(hello: &Hello) -> Result<Frame, WireError> {
    let mut w = BodyWriter::default();
    w.biguint(hello.public_key.n());
    w.bytes(&hello.client_digest);
    w.bytes(&hello.server_digest);
    w.u32(hello.s);
    let p = &hello.params;
    w.u16(u16::try_from(p.guard_bits).map_err(|_| WireError::Malformed("guard_bits".into()))?);
    w.u16(p.encoding.hash_width());
    let mut flags = 0;
    if p.payload {
        flags |= FLAG_PAYLOAD;
    }
    if p.bucketing.is_some() {
        flags |= FLAG_BUCKETED;
    }
    w.u8(flags);
    let b = p.bucketing.unwrap_or(BucketParams {
        buckets: 0,
        max_load: 0,
        seed: [0; 16],
    });
    w.u32(b.buckets);
    w.u32(b.max_load);
    w.bytes(&b.seed);
    Frame::new(MsgType::Hello, w.0)
}

pub fn decode_hello(frame: &Frame) -> Result<Hello, WireError> {
    expect_type(frame, MsgType::Hello)?;
    let mut r = BodyReader::new(&frame.body);
    let n = r.biguint(MAX_MODULUS_BYTES)?;
    let public_key = PublicKey::from_modulus(n).map_err(|e| WireError::Malformed(e.to_string()))?;
    let client_digest = r.array::<32>()?;
    let server_digest = r.array::<32>()?;
    let s = r.u32()?;
    let guard_bits = r.u16()? as u32;
    let hash_width = r.u16()? as u32;
    let flags = r.u8()?;
    if flags & !(FLAG_PAYLOAD | FLAG_BUCKETED) != 0 {
        return Err(WireError::Malformed(format!("unknown flags {flags:#04x}")));
    }
    let buckets = r.u32()?;
    let max_load = r.u32()?;
    let seed = r.array::<16>()?;
    r.finish()?;
    let encoding = if hash_width == 0 {
        ElementEncoding::Bitmask
    } else {
        ElementEncoding::hashed(hash_width).map_err(|e| WireError::Malformed(e.to_string()))?
    };
    Ok(Hello {
        public_key,
        client_digest,
        server_digest,
        s,
        params: ProtocolParams {
            guard_bits,
            encoding,
            payload: flags & FLAG_PAYLOAD != 0,
            bucketing: (flags & FLAG_BUCKETED != 0).then_some(BucketParams {
                buckets,
                max_load,
                seed,
            }),
        },
    })
}

/// Server's reply to HELLO, announcing the number of rules `t`.
pub fn encode_hello_ack(t: u32) -> Result<Frame, WireError> {
    Frame::new(MsgType::HelloAck, t.to_be_bytes().to_vec())
}

pub fn decode_hello_ack(frame: &Frame) -> Result<u32, WireError> {
    expect_type(frame, MsgType::HelloAck)?;
    let mut r = BodyReader::new(&frame.body);
    let t = r.u32()?;
    r.finish()?;
    Ok(t)
}

pub fn encode_coeffs(pk: &PublicKey, ciphertexts: &[Ciphertext]) -> Result<Frame, WireError> {
    Frame::new(MsgType::Coeffs, encode_ciphertexts(pk, ciphertexts)?)
}

pub fn decode_coeffs(
    frame: &Frame,
    pk: &PublicKey,
    expected: usize,
) -> Result<Vec<Ciphertext>, WireError> {
    expect_type(frame, MsgType::Coeffs)?;
    decode_ciphertexts(&frame.body, pk, expected)
}

pub fn encode_response(pk: &PublicKey, ciphertexts: &[Ciphertext]) -> Result<Frame, WireError> {
    Frame::new(MsgType::Response, encode_ciphertexts(pk, ciphertexts)?)
}

pub fn decode_response(
    frame: &Frame,
    pk: &PublicKey,
    expected: usize,
) -> Result<Vec<Ciphertext>, WireError> {
    expect_type(frame, MsgType::Response)?;
    decode_ciphertexts(&frame.body, pk, expected)
}

pub fn encode_close(reason: AbortReason) -> Frame {
    Frame::new(MsgType::Close, vec![reason.to_byte()]).expect("one byte body")
}

pub fn encode_abort(reason: AbortReason) -> Frame {
    Frame::new(MsgType::Abort, vec![reason.to_byte()]).expect("one byte body")
}

/// Reason byte of a CLOSE or ABORT frame.
pub fn decode_reason(frame: &Frame) -> Result<AbortReason, WireError> {
    if frame.msg_type != MsgType::Close && frame.msg_type != MsgType::Abort {
        return Err(WireError::UnexpectedMessage {
            expected: MsgType::Close,
            got: frame.msg_type,
        });
    }
    let mut r = BodyReader::new(&frame.body);
    let reason = AbortReason::from_byte(r.u8()?);
    r.finish()?;
    Ok(reason)
}

/// Fixed ciphertext width for a key: the byte length of `n^2`.
pub fn ciphertext_width(pk: &PublicKey) -> usize {
    (pk.n_squared().bits() as usize).div_ceil(8)
}

fn encode_ciphertexts(pk: &PublicKey, ciphertexts: &[Ciphertext]) -> Result<Vec<u8>, WireError> {
    let width = ciphertext_width(pk);
    let count = u32::try_from(ciphertexts.len()).map_err(|_| WireError::Oversize(usize::MAX))?;
    let mut w = BodyWriter(Vec::with_capacity(4 + ciphertexts.len() * (4 + width)));
    w.u32(count);
    for c in ciphertexts {
        let bytes = c.value().to_bytes_be();
        if bytes.len() > width {
            return Err(WireError::InvalidCiphertext);
        }
        w.u32(width as u32);
        w.0.resize(w.0.len() + width - bytes.len(), 0);
        w.bytes(&bytes);
    }
    Ok(w.0)
}

fn decode_ciphertexts(
    body: &[u8],
    pk: &PublicKey,
    expected: usize,
) -> Result<Vec<Ciphertext>, WireError> {
    let mut r = BodyReader::new(body);
    let count = r.u32()? as usize;
    if count != expected {
        return Err(WireError::CountMismatch {
            expected,
            got: count,
        });
    }
    let width = ciphertext_width(pk);
    let mut out = Vec::with_capacity(count.min(body.len() / 4));
    for _ in 0..count {
        let v = r.biguint(width)?;
        out.push(Ciphertext::new(pk, v).map_err(|_| WireError::InvalidCiphertext)?);
    }
    r.finish()?;
    Ok(out)
}

fn expect_type(frame: &Frame, want: MsgType) -> Result<(), WireError> {
    if frame.msg_type != want {
        return Err(WireError::UnexpectedMessage {
            expected: want,
            got: frame.msg_type,
        });
    }
    Ok(())
}

#[derive(Default)]
struct BodyWriter(Vec<u8>);

impl BodyWriter {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn biguint(&mut self, v: &BigUint) {
        let bytes = v.to_bytes_be();
        self.u32(bytes.len() as u32);
        self.bytes(&bytes);
    }
}

struct BodyReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BodyReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        BodyReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(WireError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("slice of length N"))
    }

    fn biguint(&mut self, max_len: usize) -> Result<BigUint, WireError> {
        let len = self.u32()? as usize;
        if len > max_len {
            return Err(WireError::Malformed(format!(
                "integer of {len} bytes exceeds {max_len}"
            )));
        }
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Malformed(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
