//! Wire framing shared by every transport.
//!
//! Layout (little-endian): `u32 len | u64 round | u64 op_id | u16 sender |
//! u16 receiver | payload`, where `len` counts everything after itself.

use alloc::vec::Vec;
use core::fmt;

pub const HEADER_LEN: usize = 8 + 8 + 2 + 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub round: u64,
    pub op_id: u64,
    /// Zero-based party indices.
    pub sender: u16,
    pub receiver: u16,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameError {
    Truncated { need: usize, have: usize },
    TooLarge(usize),
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::Truncated { need, have } => {
                write!(f, "truncated frame: need {need} bytes, have {have}")
            }
            FrameError::TooLarge(n) => write!(f, "frame of {n} bytes exceeds u32 length prefix"),
        }
    }
}

impl Frame {
    /// Bytes this frame occupies on the wire, prefix included.
    pub fn wire_len(&self) -> usize {
        4 + HEADER_LEN + self.payload.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), FrameError> {
        let body = HEADER_LEN + self.payload.len();
        let len = u32::try_from(body).map_err(|_| FrameError::TooLarge(body))?;
        out.reserve(4 + body);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.op_id.to_le_bytes());
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.receiver.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        let mut v = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut v)?;
        Ok(v)
    }

    /// Decodes one frame from the front of `buf`, returning it and the
    /// number of bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
        if buf.len() < 4 {
            return Err(FrameError::Truncated {
                need: 4,
                have: buf.len(),
            });
        }
        let len = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
        let total = 4 + len;
        if len < HEADER_LEN || buf.len() < total {
            return Err(FrameError::Truncated {
                need: total.max(4 + HEADER_LEN),
                have: buf.len(),
            });
        }
        let b = &buf[4..total];
        let frame = Frame {
            round: u64::from_le_bytes(b[0..8].try_into().unwrap()),
            op_id: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            sender: u16::from_le_bytes(b[16..18].try_into().unwrap()),
            receiver: u16::from_le_bytes(b[18..20].try_into().unwrap()),
            payload: b[HEADER_LEN..].to_vec(),
        };
        Ok((frame, total))
    }
}
