//! Recorder log format.
//!
//! ```text
//! header: "BARTLOG1"
//! frame:  u32 frame_len | u64 timestamp_us | u16 channel_len | channel | u8 type | payload
//! ```
//!
//! All integers little-endian; `frame_len` counts the bytes after itself.

use std::io::{self, Read, Write};

use super::{BusError, BusMessage};

pub const LOG_MAGIC: &[u8; 8] = b"BARTLOG1";

/// Fixed bytes in a frame body besides channel and payload.
const FIXED_BODY: usize = 8 + 2 + 1;

/// Serializes one message as a complete frame, length prefix included.
pub fn encode_frame(msg: &BusMessage) -> Vec<u8> {
    let channel = msg.channel().as_bytes();
    let body_len = FIXED_BODY + channel.len() + msg.payload.len();
    let mut out = Vec::with_capacity(4 + body_len);
    out.extend_from_slice(&(body_len as u32).to_le_bytes());
    out.extend_from_slice(&msg.timestamp_us.to_le_bytes());
    out.extend_from_slice(&(channel.len() as u16).to_le_bytes());
    out.extend_from_slice(channel);
    out.push(msg.payload_type);
    out.extend_from_slice(&msg.payload);
    out
}

fn parse_body(body: &[u8]) -> Result<BusMessage, String> {
    if body.len() < FIXED_BODY {
        return Err(format!("frame body of {} bytes is too short", body.len()));
    }
    let timestamp_us = u64::from_le_bytes(body[0..8].try_into().expect("8 bytes"));
    let channel_len = usize::from(u16::from_le_bytes([body[8], body[9]]));
    if FIXED_BODY + channel_len > body.len() {
        return Err(format!(
            "channel length {channel_len} overruns frame of {} bytes",
            body.len()
        ));
    }
    let channel = std::str::from_utf8(&body[10..10 + channel_len])
        .map_err(|e| format!("channel is not UTF-8: {e}"))?;
    let payload_type = body[10 + channel_len];
    let payload = body[FIXED_BODY + channel_len..].to_vec();
    BusMessage::new(channel, timestamp_us, payload_type, payload).map_err(|e| e.to_string())
}

/// Parses one complete frame (length prefix included). Trailing bytes are an
/// error.
pub fn decode_frame(bytes: &[u8]) -> Result<BusMessage, BusError> {
    let corrupt = |reason: String| BusError::Corrupt {
        frame_index: 0,
        offset: 0,
        reason,
    };
    if bytes.len() < 4 {
        return Err(corrupt("missing frame length".into()));
    }
    let len = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    if bytes.len() - 4 != len {
        return Err(corrupt(format!(
            "frame_len {len} but {} body bytes present",
            bytes.len() - 4
        )));
    }
    parse_body(&bytes[4..]).map_err(corrupt)
}

pub struct LogWriter<W: Write> {
    inner: W,
    frames: u64,
}

impl<W: Write> LogWriter<W> {
    /// Writes the header immediately.
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(LOG_MAGIC)?;
        Ok(LogWriter { inner, frames: 0 })
    }

    pub fn write(&mut self, msg: &BusMessage) -> io::Result<()> {
        self.inner.write_all(&encode_frame(msg))?;
        self.frames += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Streaming log parser. Errors carry the failing frame's index and the
/// byte offset at which that frame starts.
pub struct LogReader<R: Read> {
    inner: R,
    offset: u64,
    frame_index: u64,
    failed: bool,
}

impl<R: Read> LogReader<R> {
    pub fn new(mut inner: R) -> Result<Self, BusError> {
        let mut magic = [0u8; 8];
        let got = read_full(&mut inner, &mut magic)?;
        if got < magic.len() || &magic != LOG_MAGIC {
            return Err(BusError::Corrupt {
                frame_index: 0,
                offset: 0,
                reason: "missing or wrong log header".into(),
            });
        }
        Ok(LogReader {
            inner,
            offset: LOG_MAGIC.len() as u64,
            frame_index: 0,
            failed: false,
        })
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn next_message(&mut self) -> Result<Option<BusMessage>, BusError> {
        if self.failed {
            return Ok(None);
        }
        let corrupt = |this: &mut Self, reason: String| {
            this.failed = true;
            BusError::Corrupt {
                frame_index: this.frame_index,
                offset: this.offset,
                reason,
            }
        };
        let mut len_buf = [0u8; 4];
        let got = read_full(&mut self.inner, &mut len_buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 4 {
            return Err(corrupt(self, format!("truncated frame length ({got} of 4 bytes)")));
        }
        let len = u32::from_le_bytes(len_buf) as usize;
        if len < FIXED_BODY {
            return Err(corrupt(self, format!("frame_len {len} below minimum {FIXED_BODY}")));
        }
        let mut body = Vec::new();
        let got = (&mut self.inner).take(len as u64).read_to_end(&mut body)?;
        if got < len {
            return Err(corrupt(self, format!("truncated frame ({got} of {len} bytes)")));
        }
        let msg = parse_body(&body).map_err(|r| corrupt(self, r))?;
        self.offset += 4 + len as u64;
        self.frame_index += 1;
        Ok(Some(msg))
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = Result<BusMessage, BusError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_message().transpose()
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
