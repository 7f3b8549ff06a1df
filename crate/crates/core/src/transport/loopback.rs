use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex, OnceLock, Weak};
use std::time::{Duration, Instant};

use super::{Device, TransportError};

/// A FIFO of datagrams with a condition variable for blocking readers.
#[derive(Default)]
pub(crate) struct Mailbox {
    queue: Mutex<VecDeque<Vec<u8>>>,
    ready: Condvar,
}

impl Mailbox {
    pub(crate) fn push(&self, data: Vec<u8>) {
        self.queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push_back(data);
        self.ready.notify_all();
    }

    /// Pops the front datagram if `accept` returns `Ok(true)` for it.
    /// Waits up to `wait` for a datagram to arrive.
    pub(crate) fn pop_with<F>(
        &self,
        wait: Option<Duration>,
        mut accept: F,
    ) -> Result<Option<Vec<u8>>, TransportError>
    where
        F: FnMut(&[u8]) -> Result<(), TransportError>,
    {
        let mut queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(wait) = wait {
            let deadline = Instant::now() + wait;
            while queue.is_empty() {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                queue = self
                    .ready
                    .wait_timeout(queue, deadline - now)
                    .unwrap_or_else(|e| e.into_inner())
                    .0;
            }
        }
        match queue.front() {
            None => Ok(None),
            Some(front) => {
                accept(front)?;
                Ok(queue.pop_front())
            }
        }
    }

    fn pop_prefix(&self, max_len: usize, wait: Option<Duration>) -> Vec<u8> {
        let mut queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(wait) = wait {
            let deadline = Instant::now() + wait;
            while queue.is_empty() {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                queue = self
                    .ready
                    .wait_timeout(queue, deadline - now)
                    .unwrap_or_else(|e| e.into_inner())
                    .0;
            }
        }
        let Some(mut front) = queue.pop_front() else {
            return Vec::new();
        };
        if front.len() > max_len {
            let rest = front.split_off(max_len);
            queue.push_front(rest);
        }
        front
    }
}

fn named_mailboxes() -> &'static Mutex<HashMap<String, Weak<Mailbox>>> {
    static NAMED: OnceLock<Mutex<HashMap<String, Weak<Mailbox>>>> = OnceLock::new();
    NAMED.get_or_init(Default::default)
}

/// In-process loopback.
///
/// With empty options the endpoint echoes its own writes. With a name, every
/// endpoint opened under that name shares one queue, so a pair of endpoints
/// forms a pipe.
pub struct LoopbackDevice {
    mailbox: Arc<Mailbox>,
}

impl LoopbackDevice {
    pub fn open(options: &str) -> Self {
        let name = options.trim();
        if name.is_empty() {
            return LoopbackDevice {
                mailbox: Arc::new(Mailbox::default()),
            };
        }
        let mut map = named_mailboxes().lock().unwrap_or_else(|e| e.into_inner());
        map.retain(|_, weak| weak.strong_count() > 0);
        let mailbox = match map.get(name).and_then(Weak::upgrade) {
            Some(mb) => mb,
            None => {
                let mb = Arc::new(Mailbox::default());
                map.insert(name.to_string(), Arc::downgrade(&mb));
                mb
            }
        };
        LoopbackDevice { mailbox }
    }
}

impl Device for LoopbackDevice {
    fn read(&mut self, max_len: usize, wait: Option<Duration>) -> Result<Vec<u8>, TransportError> {
        if max_len == 0 {
            return Ok(Vec::new());
        }
        Ok(self.mailbox.pop_prefix(max_len, wait))
    }

    fn write(&mut self, data: &[u8]) -> Result<usize, TransportError> {
        if !data.is_empty() {
            self.mailbox.push(data.to_vec());
        }
        Ok(data.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::Endpoint;

    #[test]
    fn nonblocking_read_on_empty_returns_nothing_quickly() {
        let mut ep = Endpoint::from_device(Box::new(LoopbackDevice::open("")), false);
        let start = Instant::now();
        assert!(ep.read(16).unwrap().is_empty());
        assert!(start.elapsed() < Duration::from_millis(50));
    }

    #[test]
    fn short_reads_keep_the_remainder() {
        let mut ep = Endpoint::from_device(Box::new(LoopbackDevice::open("")), false);
        ep.write(&[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(ep.read(2).unwrap(), vec![1, 2]);
        assert_eq!(ep.read(16).unwrap(), vec![3, 4, 5]);
    }

    #[test]
    fn write_after_close_fails() {
        let mut ep = Endpoint::from_device(Box::new(LoopbackDevice::open("")), false);
        ep.close().unwrap();
        ep.close().unwrap();
        assert!(matches!(ep.write(&[1]), Err(TransportError::Closed)));
        assert!(matches!(ep.read(1), Err(TransportError::Closed)));
    }

    #[test]
    fn blocking_read_waits_for_writer() {
        let mut rx = Endpoint::from_device(Box::new(LoopbackDevice::open("lb-block")), true);
        let mut tx = Endpoint::from_device(Box::new(LoopbackDevice::open("lb-block")), false);
        let writer = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(80));
            tx.write(b"late").unwrap();
        });
        assert_eq!(rx.read(16).unwrap(), b"late".to_vec());
        writer.join().unwrap();
    }
}
