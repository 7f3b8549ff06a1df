use std::io::{Read, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{Bus, BusError, LogReader, LogWriter};

const RECORDER_POLL: Duration = Duration::from_millis(5);

/// A running recorder. Dropping it without [`RecorderHandle::stop`] leaves
/// the thread to finish on its own once the bus is quiet.
pub struct RecorderHandle<W: Write + Send + 'static> {
    stop: Arc<AtomicBool>,
    failure: Arc<Mutex<Option<String>>>,
    thread: Option<JoinHandle<Result<LogWriter<W>, BusError>>>,
}

/// Attaches a monitor to `bus` and writes every message it sees to `sink`
/// in the log format. The header is written before this returns, so a
/// recorder stopped immediately still leaves a valid, empty log.
pub fn record<W>(bus: &Bus, sink: W) -> Result<RecorderHandle<W>, BusError>
where
    W: Write + Send + 'static,
{
    let mut writer = LogWriter::new(sink)?;
    let monitor = bus.attach_monitor();
    let stop = Arc::new(AtomicBool::new(false));
    let failure = Arc::new(Mutex::new(None));
    let thread = {
        let stop = Arc::clone(&stop);
        let failure = Arc::clone(&failure);
        std::thread::spawn(move || {
            loop {
                let stopping = stop.load(Ordering::Acquire);
                let batch = if stopping {
                    monitor.drain()?
                } else {
                    monitor.poll(RECORDER_POLL)?.into_iter().collect()
                };
                for msg in &batch {
                    if let Err(e) = writer.write(msg) {
                        let reason = format!("sink write failed: {e}");
                        log::error!("recorder stopping: {reason}");
                        *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(reason.clone());
                        monitor.cancel();
                        return Err(BusError::Recorder(reason));
                    }
                }
                if stopping {
                    break;
                }
            }
            writer.flush()?;
            Ok(writer)
        })
    };
    Ok(RecorderHandle {
        stop,
        failure,
        thread: Some(thread),
    })
}

impl<W: Write + Send + 'static> RecorderHandle<W> {
    /// The failure that stopped the recorder, if any.
    pub fn error(&self) -> Option<String> {
        self.failure
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .clone()
    }

    /// Writes everything published so far, then returns the sink and the
    /// number of frames written.
    pub fn stop(mut self) -> Result<(W, u64), BusError> {
        self.stop.store(true, Ordering::Release);
        let thread = self.thread.take().expect("recorder joined once");
        let writer = thread
            .join()
            .map_err(|_| BusError::Recorder("recorder thread panicked".into()))??;
        let frames = writer.frames_written();
        Ok((writer.into_inner(), frames))
    }
}

impl<W: Write + Send + 'static> Drop for RecorderHandle<W> {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    AsFastAsPossible,
    /// Sleep so inter-message gaps match the recorded timestamps.
    Timed,
}

/// Republishes every logged message on `bus`, keeping original timestamps.
/// On corruption, frames before the bad one have already been published.
pub fn replay<R: Read>(source: R, bus: &Bus, mode: ReplayMode) -> Result<u64, BusError> {
    let mut reader = LogReader::new(source)?;
    let mut count = 0u64;
    let mut origin: Option<(u64, Instant)> = None;
    while let Some(msg) = reader.next_message()? {
        if mode == ReplayMode::Timed {
            let (t0, wall0) = *origin.get_or_insert((msg.timestamp_us, Instant::now()));
            let due = wall0 + Duration::from_micros(msg.timestamp_us.saturating_sub(t0));
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        bus.publish(&msg);
        count += 1;
    }
    Ok(count)
}
