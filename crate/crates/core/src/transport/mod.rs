//! Uniform byte endpoints ("chardevices").
//!
//! An endpoint is opened from a spec string such as `"can, can0"` or
//! `"udp,127.0.0.1:9000"`. The text before the first comma names the
//! protocol plugin; the rest is handed to the plugin untouched.

mod can;
mod cansim;
mod logging;
mod loopback;
mod registry;
mod udp;

use std::io;
use std::time::Duration;

use thiserror::Error;

pub use can::{
    can_decode_write, can_encode_read, CanFrame, CAN_ID_BYTES, CAN_MAX_DLEN, CAN_MAX_ENCODED,
    CAN_MAX_STD_ID,
};
pub use cansim::CanSimDevice;
pub use logging::{open_playback, wrap_logging, ChunkReader, ChunkWriter};
pub(crate) use logging::open_playback_file;
pub use loopback::LoopbackDevice;
pub use registry::{open, register, DeviceFactory, Registry};
pub use udp::UdpDevice;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("invalid endpoint spec: {0}")]
    Parse(String),
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("invalid options for '{protocol}': {reason}")]
    Options { protocol: String, reason: String },
    #[error("endpoint is closed")]
    Closed,
    #[error("buffer too small: need {needed} bytes, have {available}")]
    Capacity { needed: usize, available: usize },
    #[error("invalid CAN frame length {0}")]
    CanLength(usize),
    #[error("invalid CAN id {0:#x} (only 11-bit ids are supported)")]
    InvalidCanId(u32),
    #[error("malformed chunk stream at byte offset {offset}: {reason}")]
    Decode { offset: u64, reason: String },
    #[error("operation not supported by this endpoint: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Protocol name plus the plugin-interpreted options string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EndpointSpec {
    pub protocol: String,
    pub options: String,
}

impl EndpointSpec {
    pub fn new(protocol: &str, options: &str) -> Result<Self, TransportError> {
        let protocol = protocol.trim().to_ascii_lowercase();
        if protocol.is_empty() {
            return Err(TransportError::Parse("empty protocol".into()));
        }
        if protocol.contains(|c: char| c == ',' || c.is_whitespace()) {
            return Err(TransportError::Parse(format!(
                "protocol '{protocol}' contains a comma or whitespace"
            )));
        }
        Ok(EndpointSpec {
            protocol,
            options: options.trim().to_string(),
        })
    }
}

impl std::str::FromStr for EndpointSpec {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_endpoint_spec(s)
    }
}

impl std::fmt::Display for EndpointSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.options.is_empty() {
            f.write_str(&self.protocol)
        } else {
            write!(f, "{},{}", self.protocol, self.options)
        }
    }
}

/// Splits `text` on its first comma into protocol and options.
pub fn parse_endpoint_spec(text: &str) -> Result<EndpointSpec, TransportError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(TransportError::Parse("empty endpoint spec".into()));
    }
    match text.split_once(',') {
        Some((protocol, options)) => EndpointSpec::new(protocol, options),
        None => EndpointSpec::new(text, ""),
    }
}

/// The interface a protocol plugin implements.
///
/// `read` returns at most `max_len` bytes. With `wait == None` it must
/// return immediately, possibly with an empty vector. With `Some(d)` it may
/// block up to `d` waiting for data.
pub trait Device: Send {
    fn read(&mut self, max_len: usize, wait: Option<Duration>) -> Result<Vec<u8>, TransportError>;

    fn write(&mut self, data: &[u8]) -> Result<usize, TransportError>;

    fn close(&mut self) -> Result<(), TransportError> {
        Ok(())
    }
}

/// Granularity of a blocking read. Blocking reads loop on this so a closed
/// peer or an interrupted terminal never hangs forever inside a plugin.
const BLOCKING_SLICE: Duration = Duration::from_millis(50);

/// An open (or closed) endpoint owning one plugin device.
pub struct Endpoint {
    device: Box<dyn Device>,
    blocking: bool,
    open: bool,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("blocking", &self.blocking)
            .field("open", &self.open)
            .finish()
    }
}

impl Endpoint {
    pub fn from_device(device: Box<dyn Device>, blocking: bool) -> Self {
        Endpoint {
            device,
            blocking,
            open: true,
        }
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn is_blocking(&self) -> bool {
        self.blocking
    }

    pub fn set_blocking(&mut self, blocking: bool) {
        self.blocking = blocking;
    }

    /// Reads up to `max_len` bytes. Non-blocking endpoints return an empty
    /// vector when nothing is pending; blocking endpoints wait for data.
    pub fn read(&mut self, max_len: usize) -> Result<Vec<u8>, TransportError> {
        if !self.open {
            return Err(TransportError::Closed);
        }
        if !self.blocking {
            return self.device.read(max_len, None);
        }
        loop {
            let data = self.device.read(max_len, Some(BLOCKING_SLICE))?;
            if !data.is_empty() || max_len == 0 {
                return Ok(data);
            }
        }
    }

    /// Reads, waiting at most `timeout` regardless of the blocking flag.
    pub fn read_timeout(
        &mut self,
        max_len: usize,
        timeout: Duration,
    ) -> Result<Vec<u8>, TransportError> {
        if !self.open {
            return Err(TransportError::Closed);
        }
        self.device.read(max_len, Some(timeout))
    }

    pub fn write(&mut self, data: &[u8]) -> Result<usize, TransportError> {
        if !self.open {
            return Err(TransportError::Closed);
        }
        self.device.write(data)
    }

    /// Closes the endpoint. Closing twice is a no-op.
    pub fn close(&mut self) -> Result<(), TransportError> {
        if !self.open {
            return Ok(());
        }
        self.open = false;
        self.device.close()
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        if let Err(e) = self.close() {
            log::warn!("error closing endpoint: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_examples() {
        let s = parse_endpoint_spec("can, can0").unwrap();
        assert_eq!(s, EndpointSpec::new("can", "can0").unwrap());
        let s = parse_endpoint_spec("can").unwrap();
        assert_eq!((s.protocol.as_str(), s.options.as_str()), ("can", ""));
        let s = parse_endpoint_spec("udp,127.0.0.1:9000").unwrap();
        assert_eq!(
            (s.protocol.as_str(), s.options.as_str()),
            ("udp", "127.0.0.1:9000")
        );
    }

    #[test]
    fn parse_lowercases_and_keeps_later_commas() {
        let s = parse_endpoint_spec("  UDP , 127.0.0.1:9000, 0.0.0.0:0 ").unwrap();
        assert_eq!(s.protocol, "udp");
        assert_eq!(s.options, "127.0.0.1:9000, 0.0.0.0:0");
    }

    #[test]
    fn parse_errors() {
        assert!(parse_endpoint_spec("").is_err());
        assert!(parse_endpoint_spec("   ").is_err());
        assert!(parse_endpoint_spec(",can0").is_err());
        assert!(parse_endpoint_spec("c an,x").is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in ["can,can0", "loopback", "udp,127.0.0.1:1"] {
            assert_eq!(parse_endpoint_spec(text).unwrap().to_string(), text);
        }
    }

    proptest! {
        #[test]
        fn protocol_never_has_comma_or_whitespace(text in "\\PC{0,24}") {
            if let Ok(spec) = parse_endpoint_spec(&text) {
                prop_assert!(!spec.protocol.is_empty());
                prop_assert!(!spec.protocol.contains(','));
                prop_assert!(!spec.protocol.chars().any(char::is_whitespace));
                prop_assert_eq!(spec.options.trim(), spec.options.as_str());
            }
        }
    }
}
