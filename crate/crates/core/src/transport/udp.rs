use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use super::{Device, TransportError};

/// Point-to-point UDP datagrams.
///
/// Options: `REMOTE[,BIND]`. `REMOTE` may be left empty for a receive-only
/// endpoint; `BIND` defaults to an ephemeral port on all interfaces. Each
/// write is one datagram; each read returns at most one datagram.
pub struct UdpDevice {
    socket: UdpSocket,
    remote: Option<SocketAddr>,
}

fn resolve(addr: &str) -> Result<SocketAddr, TransportError> {
    addr.to_socket_addrs()
        .map_err(|e| bad_options(&format!("cannot resolve '{addr}': {e}")))?
        .next()
        .ok_or_else(|| bad_options(&format!("no address for '{addr}'")))
}

fn bad_options(reason: &str) -> TransportError {
    TransportError::Options {
        protocol: "udp".into(),
        reason: reason.into(),
    }
}

impl UdpDevice {
    pub fn open(options: &str) -> Result<Self, TransportError> {
        let mut parts = options.splitn(2, ',').map(str::trim);
        let remote = match parts.next() {
            None | Some("") => None,
            Some(addr) => Some(resolve(addr)?),
        };
        let bind = match parts.next() {
            None | Some("") => "0.0.0.0:0".to_string(),
            Some(addr) => addr.to_string(),
        };
        if remote.is_none() && bind == "0.0.0.0:0" {
            return Err(bad_options("need a remote address or a bind address"));
        }
        let socket = UdpSocket::bind(resolve(&bind)?)?;
        Ok(UdpDevice { socket, remote })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        Ok(self.socket.local_addr()?)
    }
}

impl Device for UdpDevice {
    fn read(&mut self, max_len: usize, wait: Option<Duration>) -> Result<Vec<u8>, TransportError> {
        let mut buf = vec![0u8; max_len];
        match wait {
            None => self.socket.set_nonblocking(true)?,
            Some(d) => {
                self.socket.set_nonblocking(false)?;
                self.socket
                    .set_read_timeout(Some(d.max(Duration::from_micros(1))))?;
            }
        }
        match self.socket.recv_from(&mut buf) {
            Ok((n, _from)) => {
                buf.truncate(n);
                Ok(buf)
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                Ok(Vec::new())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn write(&mut self, data: &[u8]) -> Result<usize, TransportError> {
        let remote = self
            .remote
            .ok_or(TransportError::Unsupported("write on a receive-only udp endpoint"))?;
        Ok(self.socket.send_to(data, remote)?)
    }
}
