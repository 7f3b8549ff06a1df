//! CAN frame type and the two-byte-id wire codec used by CAN endpoints.
//!
//! A read from a CAN endpoint yields `[id lo][id hi][payload...]`, so a frame
//! with `n` payload bytes occupies `n + 2` bytes of the caller's buffer.

use std::fmt;

use super::TransportError;

/// Largest standard (11-bit) identifier.
pub const CAN_MAX_STD_ID: u16 = 0x7FF;
/// Maximum classic CAN payload length.
pub const CAN_MAX_DLEN: usize = 8;
/// Bytes of id prefix in the encoded form.
pub const CAN_ID_BYTES: usize = 2;
/// Longest encoded frame.
pub const CAN_MAX_ENCODED: usize = CAN_MAX_DLEN + CAN_ID_BYTES;

/// A standard CAN data frame.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanFrame {
    id: u16,
    len: u8,
    data: [u8; CAN_MAX_DLEN],
}

impl CanFrame {
    /// Builds a frame. Identifiers above 0x7FF (extended ids) are rejected.
    pub fn new(id: u32, data: &[u8]) -> Result<Self, TransportError> {
        if id > u32::from(CAN_MAX_STD_ID) {
            return Err(TransportError::InvalidCanId(id));
        }
        if data.len() > CAN_MAX_DLEN {
            return Err(TransportError::CanLength(data.len()));
        }
        let mut payload = [0u8; CAN_MAX_DLEN];
        payload[..data.len()].copy_from_slice(data);
        Ok(CanFrame {
            id: id as u16,
            len: data.len() as u8,
            data: payload,
        })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn data(&self) -> &[u8] {
        &self.data[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl fmt::Debug for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanFrame")
            .field("id", &format_args!("{:#05x}", self.id))
            .field("data", &self.data())
            .finish()
    }
}

/// Encodes a frame the way a CAN endpoint hands it to a reader: a
/// little-endian u16 id followed by the payload.
///
/// Fails when the caller's buffer cannot hold `len + 2` bytes.
pub fn can_encode_read(frame: &CanFrame, max_len: usize) -> Result<Vec<u8>, TransportError> {
    let needed = frame.len() + CAN_ID_BYTES;
    if needed > max_len {
        return Err(TransportError::Capacity {
            needed,
            available: max_len,
        });
    }
    let mut out = Vec::with_capacity(needed);
    out.extend_from_slice(&frame.id.to_le_bytes());
    out.extend_from_slice(frame.data());
    Ok(out)
}

/// Inverse of [`can_encode_read`]; used for writes to CAN endpoints.
pub fn can_decode_write(bytes: &[u8]) -> Result<CanFrame, TransportError> {
    if bytes.len() < CAN_ID_BYTES || bytes.len() > CAN_MAX_ENCODED {
        return Err(TransportError::CanLength(bytes.len()));
    }
    let id = u16::from_le_bytes([bytes[0], bytes[1]]);
    CanFrame::new(u32::from(id), &bytes[CAN_ID_BYTES..])
}
