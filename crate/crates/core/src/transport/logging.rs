//! Read logging and playback.
//!
//! The chunk stream is a sequence of `[u32 LE length][bytes]` records, one
//! per successful read of the logged endpoint.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::time::Duration;

use super::{Device, Endpoint, TransportError};

/// Writes length-prefixed chunks.
pub struct ChunkWriter<W: Write> {
    inner: W,
}

impl<W: Write> ChunkWriter<W> {
    pub fn new(inner: W) -> Self {
        ChunkWriter { inner }
    }

    pub fn write_chunk(&mut self, chunk: &[u8]) -> io::Result<()> {
        let len = u32::try_from(chunk.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "chunk exceeds u32 length"))?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(chunk)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Reads length-prefixed chunks, tracking the byte offset for diagnostics.
pub struct ChunkReader<R: Read> {
    inner: R,
    offset: u64,
    done: bool,
}

impl<R: Read> ChunkReader<R> {
    pub fn new(inner: R) -> Self {
        ChunkReader {
            inner,
            offset: 0,
            done: false,
        }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Next chunk, `Ok(None)` at a clean end of stream.
    pub fn next_chunk(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        if self.done {
            return Ok(None);
        }
        let start = self.offset;
        let mut len_buf = [0u8; 4];
        let got = read_full(&mut self.inner, &mut len_buf)?;
        if got == 0 {
            self.done = true;
            return Ok(None);
        }
        if got < 4 {
            self.done = true;
            return Err(TransportError::Decode {
                offset: start,
                reason: format!("truncated length prefix ({got} of 4 bytes)"),
            });
        }
        let len = u32::from_le_bytes(len_buf) as usize;
        let mut chunk = vec![0u8; len];
        let got = read_full(&mut self.inner, &mut chunk)?;
        if got < len {
            self.done = true;
            return Err(TransportError::Decode {
                offset: start,
                reason: format!("truncated chunk ({got} of {len} bytes)"),
            });
        }
        self.offset += 4 + len as u64;
        Ok(Some(chunk))
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

struct LoggingDevice<W: Write + Send> {
    inner: Endpoint,
    sink: ChunkWriter<W>,
}

impl<W: Write + Send> Device for LoggingDevice<W> {
    fn read(&mut self, max_len: usize, wait: Option<Duration>) -> Result<Vec<u8>, TransportError> {
        let data = match wait {
            None => {
                self.inner.set_blocking(false);
                self.inner.read(max_len)?
            }
            Some(d) => self.inner.read_timeout(max_len, d)?,
        };
        if !data.is_empty() {
            self.sink.write_chunk(&data)?;
        }
        Ok(data)
    }

    fn write(&mut self, data: &[u8]) -> Result<usize, TransportError> {
        self.inner.write(data)
    }

    fn close(&mut self) -> Result<(), TransportError> {
        self.sink.flush()?;
        self.inner.close()
    }
}

/// Wraps `ep` so every non-empty read is also appended to `sink` as one
/// chunk. Writes pass through unlogged.
pub fn wrap_logging<W>(ep: Endpoint, sink: W) -> Endpoint
where
    W: Write + Send + 'static,
{
    let blocking = ep.is_blocking();
    Endpoint::from_device(
        Box::new(LoggingDevice {
            inner: ep,
            sink: ChunkWriter::new(sink),
        }),
        blocking,
    )
}

struct PlaybackDevice<R: Read + Send> {
    reader: ChunkReader<R>,
    pending: Vec<u8>,
}

impl<R: Read + Send> Device for PlaybackDevice<R> {
    fn read(&mut self, max_len: usize, _wait: Option<Duration>) -> Result<Vec<u8>, TransportError> {
        if max_len == 0 {
            return Ok(Vec::new());
        }
        if self.pending.is_empty() {
            // zero-length chunks carry nothing; skip them
            loop {
                match self.reader.next_chunk()? {
                    None => return Ok(Vec::new()),
                    Some(c) if c.is_empty() => continue,
                    Some(c) => {
                        self.pending = c;
                        break;
                    }
                }
            }
        }
        if self.pending.len() <= max_len {
            Ok(std::mem::take(&mut self.pending))
        } else {
            let rest = self.pending.split_off(max_len);
            Ok(std::mem::replace(&mut self.pending, rest))
        }
    }

    fn write(&mut self, _data: &[u8]) -> Result<usize, TransportError> {
        Err(TransportError::Unsupported("write to a playback endpoint"))
    }
}

/// Endpoint replaying a chunk stream: one chunk per read, then empty reads
/// forever. Playback never waits, whatever the blocking flag says.
pub fn open_playback<R>(source: R) -> Endpoint
where
    R: Read + Send + 'static,
{
    Endpoint::from_device(
        Box::new(PlaybackDevice {
            reader: ChunkReader::new(source),
            pending: Vec::new(),
        }),
        false,
    )
}

pub(crate) fn open_playback_file(path: &str) -> Result<Box<dyn Device>, TransportError> {
    let file = File::open(path)?;
    Ok(Box::new(PlaybackDevice {
        reader: ChunkReader::new(BufReader::new(file)),
        pending: Vec::new(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::LoopbackDevice;
    use std::sync::{Arc, Mutex};

    /// A `Write` that can be inspected after the endpoint owning it is gone.
    #[derive(Clone, Default)]
    struct SharedSink(Arc<Mutex<Vec<u8>>>);

    impl Write for SharedSink {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn log_then_play_back() {
        let sink = SharedSink::default();
        let lb = Endpoint::from_device(Box::new(LoopbackDevice::open("")), false);
        let mut logged = wrap_logging(lb, sink.clone());
        let mut seen = Vec::new();
        for msg in [&b"A"[..], b"BB", b"CCC"] {
            logged.write(msg).unwrap();
            seen.push(logged.read(64).unwrap());
        }
        // empty reads are not logged
        assert!(logged.read(64).unwrap().is_empty());
        logged.close().unwrap();

        let bytes = sink.0.lock().unwrap().clone();
        let mut play = open_playback(io::Cursor::new(bytes));
        let replayed: Vec<_> = (0..3).map(|_| play.read(64).unwrap()).collect();
        assert_eq!(replayed, seen);
        assert!(play.read(64).unwrap().is_empty());
        assert!(play.read(64).unwrap().is_empty());
    }

    #[test]
    fn empty_source_is_immediately_exhausted() {
        let mut play = open_playback(io::empty());
        assert!(play.read(64).unwrap().is_empty());
    }

    #[test]
    fn truncated_chunk_reports_offset() {
        let mut bytes = Vec::new();
        let mut w = ChunkWriter::new(&mut bytes);
        w.write_chunk(b"ok").unwrap();
        bytes.extend_from_slice(&10u32.to_le_bytes());
        bytes.extend_from_slice(b"short");
        let mut play = open_playback(io::Cursor::new(bytes));
        assert_eq!(play.read(64).unwrap(), b"ok".to_vec());
        match play.read(64) {
            Err(TransportError::Decode { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_length_prefix() {
        let mut play = open_playback(io::Cursor::new(vec![1u8, 0]));
        assert!(matches!(
            play.read(8),
            Err(TransportError::Decode { offset: 0, .. })
        ));
    }

    #[test]
    fn playback_is_read_only() {
        let mut play = open_playback(io::empty());
        assert!(play.write(b"x").is_err());
    }
}
