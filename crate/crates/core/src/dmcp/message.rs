//! `[u8 kind][u16 name_len][name][u32 n][n × (u16 klen, key, u16 vlen, value)]`,
//! little-endian.

use std::collections::BTreeMap;

use super::DmcpError;

pub const DMCP_UP: &str = "dmcp.up";
pub const DMCP_DOWN: &str = "dmcp.down";
pub const PAYLOAD_DMCP: u8 = 10;
/// ACK entry carrying the module's heartbeat period in milliseconds.
pub const HEARTBEAT_KEY: &str = "heartbeat_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Discover = 1,
    Offer = 2,
    Ack = 3,
    Heartbeat = 4,
    Bye = 5,
}

impl TryFrom<u8> for MessageKind {
    type Error = DmcpError;

    fn try_from(v: u8) -> Result<Self, DmcpError> {
        Ok(match v {
            1 => MessageKind::Discover,
            2 => MessageKind::Offer,
            3 => MessageKind::Ack,
            4 => MessageKind::Heartbeat,
            5 => MessageKind::Bye,
            k => return Err(DmcpError::Malformed(format!("unknown kind {k}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmcpMessage {
    pub kind: MessageKind,
    pub module: String,
    pub entries: BTreeMap<String, String>,
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), DmcpError> {
    let n = u16::try_from(s.len()).map_err(|_| DmcpError::Invalid(format!("string of {} bytes", s.len())))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn bytes(&mut self, n: usize) -> Result<&[u8], DmcpError> {
        let s = self
            .b
            .get(self.pos..self.pos + n)
            .ok_or_else(|| DmcpError::Malformed(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn string(&mut self) -> Result<String, DmcpError> {
        let n = u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()) as usize;
        String::from_utf8(self.bytes(n)?.to_vec())
            .map_err(|_| DmcpError::Malformed("string is not UTF-8".into()))
    }
}

impl DmcpMessage {
    pub fn new(kind: MessageKind, module: &str) -> Self {
        DmcpMessage {
            kind,
            module: module.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn ack(module: &str, heartbeat_ms: u64) -> Self {
        let mut m = Self::new(MessageKind::Ack, module);
        m.entries.insert(HEARTBEAT_KEY.into(), heartbeat_ms.to_string());
        m
    }

    pub fn heartbeat_ms(&self) -> Option<u64> {
        self.entries.get(HEARTBEAT_KEY)?.parse().ok()
    }

    pub fn encode(&self) -> Result<Vec<u8>, DmcpError> {
        let mut out = vec![self.kind as u8];
        put_str(&mut out, &self.module)?;
        let n = u32::try_from(self.entries.len()).map_err(|_| DmcpError::Invalid("too many entries".into()))?;
        out.extend_from_slice(&n.to_le_bytes());
        for (k, v) in &self.entries {
            put_str(&mut out, k)?;
            put_str(&mut out, v)?;
        }
        Ok(out)
    }

    pub fn decode(b: &[u8]) -> Result<Self, DmcpError> {
        let mut r = Reader { b, pos: 0 };
        let kind = MessageKind::try_from(r.bytes(1)?[0])?;
        let module = r.string()?;
        let n = u32::from_le_bytes(r.bytes(4)?.try_into().unwrap());
        let mut entries = BTreeMap::new();
        for _ in 0..n {
            let k = r.string()?;
            let v = r.string()?;
            entries.insert(k, v);
        }
        if r.pos != b.len() {
            return Err(DmcpError::Malformed(format!("{} trailing bytes", b.len() - r.pos)));
        }
        Ok(DmcpMessage {
            kind,
            module,
            entries,
        })
    }
}
