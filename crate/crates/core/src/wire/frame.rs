use std::io::{self, Read, Write};

use super::WireError;

pub const PROTOCOL_VERSION: u8 = 0x01;
/// Hard cap on a frame body.
pub const MAX_BODY_LEN: usize = 1 << 24;
/// version (1) + msg_type (1) + length (4).
pub const HEADER_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 0x01,
    HelloAck = 0x02,
    Coeffs = 0x03,
    Response = 0x04,
    Close = 0x05,
    Abort = 0xFF,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => MsgType::Hello,
            0x02 => MsgType::HelloAck,
            0x03 => MsgType::Coeffs,
            0x04 => MsgType::Response,
            0x05 => MsgType::Close,
            0xFF => MsgType::Abort,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub msg_type: MsgType,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, body: Vec<u8>) -> Result<Self, WireError> {
        if body.len() > MAX_BODY_LEN {
            return Err(WireError::Oversize(body.len()));
        }
        Ok(Frame {
            version: PROTOCOL_VERSION,
            msg_type,
            body,
        })
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.body.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.version);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    /// Parses one frame from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated);
        }
        let header: [u8; HEADER_LEN] = bytes[..HEADER_LEN].try_into().expect("header length");
        let (msg_type, len) = parse_header(&header)?;
        let end = HEADER_LEN + len;
        if bytes.len() < end {
            return Err(WireError::Truncated);
        }
        Ok((
            Frame {
                version: PROTOCOL_VERSION,
                msg_type,
                body: bytes[HEADER_LEN..end].to_vec(),
            },
            end,
        ))
    }
}

fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(MsgType, usize), WireError> {
    if header[0] != PROTOCOL_VERSION {
        return Err(WireError::VersionMismatch(header[0]));
    }
    let msg_type = MsgType::from_byte(header[1]).ok_or(WireError::UnknownMessageType(header[1]))?;
    let len = u32::from_be_bytes(header[2..6].try_into().expect("4 bytes")) as usize;
    if len > MAX_BODY_LEN {
        return Err(WireError::Oversize(len));
    }
    Ok((msg_type, len))
}

pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> Result<Frame, WireError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(map_io)?;
    let (msg_type, len) = parse_header(&header)?;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(map_io)?;
    Ok(Frame {
        version: PROTOCOL_VERSION,
        msg_type,
        body,
    })
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, frame: &Frame) -> Result<(), WireError> {
    w.write_all(&frame.encode()).map_err(map_io)?;
    w.flush().map_err(map_io)
}

pub(crate) fn map_io(e: io::Error) -> WireError {
    match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated,
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => WireError::Timeout,
        _ => WireError::Io(e.to_string()),
    }
}
