//! The `sensorkit` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or data error,
//! 3 calibration found no consensus. Results go to `out`, diagnostics to
//! `err`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::bus::{self, Bus, BusError, BusMessage, LogReader};
use crate::calib::{self, CalibError, RansacParams};
use crate::sim::{self, SimConfig};
use crate::transport::{self, can_decode_write, parse_endpoint_spec, Endpoint, TransportError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NO_CONSENSUS: i32 = 3;

const READ_SLICE: Duration = Duration::from_millis(50);
const MAX_READ: usize = 65_536;

#[derive(Parser, Debug)]
#[command(name = "sensorkit", version, about = "Sensor bus, simulation and calibration tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct StopFlags {
    /// Exit after this many lines/messages.
    #[arg(long)]
    count: Option<u64>,
    /// Exit after this long without traffic.
    #[arg(long, value_name = "MS")]
    idle_exit_ms: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print whatever arrives on an endpoint.
    Cdterm {
        /// Endpoint spec, e.g. "can, can0" or "udp,,0.0.0.0:9000".
        spec: String,
        /// Decode CAN frames.
        #[arg(long)]
        can: bool,
        #[command(flatten)]
        stop: StopFlags,
    },
    /// Run the scene simulation and record every message.
    Simulate {
        /// Scene file; the built-in reference scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Simulated seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Range noise sigma (m) for the scanners.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Pixel noise sigma for camera observations.
        #[arg(long, default_value_t = 0.0)]
        pixel_noise: f64,
    },
    /// Replay a log onto the local bus.
    Play {
        log: PathBuf,
        /// Keep the recorded inter-message timing.
        #[arg(long)]
        realtime: bool,
        /// Print one line per message, as `monitor` does.
        #[arg(long)]
        print: bool,
        /// Only print this channel.
        #[arg(long)]
        channel: Option<String>,
        /// Also send each message to this endpoint.
        #[arg(long, value_name = "SPEC")]
        to: Option<String>,
    },
    /// Print bus traffic arriving on an endpoint.
    Monitor {
        #[arg(long, value_name = "SPEC")]
        from: String,
        #[arg(long)]
        channel: Option<String>,
        #[command(flatten)]
        stop: StopFlags,
    },
    /// Record bus traffic arriving on an endpoint into a log.
    Record {
        #[arg(long, value_name = "SPEC")]
        from: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        stop: StopFlags,
    },
    /// Estimate rangefinder-to-camera extrinsics.
    Calibrate {
        #[arg(long, value_name = "CSV")]
        correspondences: PathBuf,
        /// fx,fy,cx,cy[,k1,k2]
        #[arg(long)]
        intrinsics: String,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 2.0)]
        threshold_px: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        min_inliers: usize,
    },
}

/// Failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: m.to_string(),
        }
    }

    fn runtime(m: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: m.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e)
    }
}

impl From<BusError> for Failure {
    fn from(e: BusError) -> Self {
        Failure::runtime(e)
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Cdterm { spec, can, stop } => cdterm(&spec, can, stop, out),
        Command::Simulate {
            scene,
            duration,
            seed,
            out: path,
            noise,
            pixel_noise,
        } => simulate(scene, duration, seed, &path, noise, pixel_noise, out),
        Command::Play {
            log,
            realtime,
            print,
            channel,
            to,
        } => play(&log, realtime, print, channel.as_deref(), to.as_deref(), out),
        Command::Monitor {
            from,
            channel,
            stop,
        } => monitor(&from, channel.as_deref(), stop, out),
        Command::Record { from, out: path, stop } => record(&from, &path, stop, out),
        Command::Calibrate {
            correspondences,
            intrinsics,
            iters,
            threshold_px,
            seed,
            min_inliers,
        } => calibrate(
            &correspondences,
            &intrinsics,
            RansacParams {
                iterations: iters,
                threshold_px,
                seed,
                min_inliers,
                adaptive: false,
            },
            out,
        ),
    };
    let _ = out.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "sensorkit: {}", f.message);
            f.code
        }
    }
}

fn open_endpoint(spec: &str) -> Result<Endpoint, Failure> {
    let spec = parse_endpoint_spec(spec).map_err(Failure::usage)?;
    transport::open(&spec, true).map_err(|e| match e {
        TransportError::Parse(_) | TransportError::UnknownProtocol(_) | TransportError::Options { .. } => {
            Failure::usage(e)
        }
        e => Failure::runtime(e),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Calls `step` until it reports `stop`, the count is reached or the
/// endpoint stays idle too long. `step` returns how many items it emitted.
fn pump_loop<F>(stop: StopFlags, mut step: F) -> Outcome
where
    F: FnMut() -> Result<u64, Failure>,
{
    let mut done = 0u64;
    let mut last = Instant::now();
    loop {
        if stop.count.is_some_and(|c| done >= c) {
            return Ok(());
        }
        let n = step()?;
        if n > 0 {
            done += n;
            last = Instant::now();
        } else if stop
            .idle_exit_ms
            .is_some_and(|ms| last.elapsed() >= Duration::from_millis(ms))
        {
            return Ok(());
        }
    }
}

fn cdterm(spec: &str, can: bool, stop: StopFlags, out: &mut dyn Write) -> Outcome {
    let mut ep = open_endpoint(spec)?;
    pump_loop(stop, || {
        let data = ep.read_timeout(MAX_READ, READ_SLICE).map_err(Failure::runtime)?;
        if data.is_empty() {
            return Ok(0);
        }
        if can {
            match can_decode_write(&data) {
                Ok(f) => writeln!(out, "id = {:x} ({} bytes): {}", f.id(), f.len(), hex(f.data()))?,
                Err(e) => writeln!(out, "malformed frame ({e}): {}", hex(&data))?,
            }
        } else {
            writeln!(out, "{}", hex(&data))?;
        }
        out.flush()?;
        Ok(1)
    })
}

fn simulate(
    scene: Option<PathBuf>,
    duration_s: f64,
    seed: u64,
    path: &PathBuf,
    noise: f64,
    pixel_noise: f64,
    out: &mut dyn Write,
) -> Outcome {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Failure::usage("--duration must be a non-negative number"));
    }
    if !(noise >= 0.0 && pixel_noise >= 0.0) {
        return Err(Failure::usage("noise sigmas must be >= 0"));
    }
    let text = match &scene {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))?,
        None => sim::REFERENCE_SCENE.to_string(),
    };
    let scene = sim::parse_scene(&text).map_err(Failure::runtime)?;
    let cfg = SimConfig {
        duration_us: (duration_s * 1e6).round() as u64,
        seed,
        range_noise_sigma_m: noise,
        pixel_noise_sigma_px: pixel_noise,
        ..Default::default()
    };
    let file = File::create(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    let bus = Bus::new();
    let rec = bus::record(&bus, BufWriter::new(file))?;
    let sim_result = sim::run_simulation(&scene, &cfg, &bus);
    let (mut w, n) = rec.stop()?;
    w.flush()?;
    sim_result.map_err(Failure::runtime)?;
    writeln!(out, "{n} messages written to {}", path.display())?;
    Ok(())
}

fn monitor_line(m: &BusMessage) -> String {
    format!("{} {} {} {}", m.timestamp_us, m.channel(), m.payload_type, m.payload.len())
}

fn play(
    log: &PathBuf,
    realtime: bool,
    print: bool,
    channel: Option<&str>,
    to: Option<&str>,
    out: &mut dyn Write,
) -> Outcome {
    let mut sink = to.map(open_endpoint).transpose()?;
    let file = File::open(log).map_err(|e| Failure::runtime(format!("{}: {e}", log.display())))?;
    let mut reader = LogReader::new(BufReader::new(file))?;
    let bus = Bus::new();
    let mut origin: Option<(u64, Instant)> = None;
    while let Some(msg) = reader.next_message()? {
        if realtime {
            let (t0, wall0) = *origin.get_or_insert((msg.timestamp_us, Instant::now()));
            let due = wall0 + Duration::from_micros(msg.timestamp_us.saturating_sub(t0));
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        bus.publish(&msg);
        if let Some(ep) = sink.as_mut() {
            ep.write(&bus::encode_frame(&msg)).map_err(Failure::runtime)?;
        }
        if print && channel.is_none_or(|c| c == msg.channel()) {
            writeln!(out, "{}", monitor_line(&msg))?;
        }
    }
    Ok(())
}

/// Feeds bus frames arriving on `spec` into a local bus and hands each
/// message to `each`.
fn receive_loop<F>(spec: &str, stop: StopFlags, mut each: F) -> Outcome
where
    F: FnMut(&BusMessage) -> Result<u64, Failure>,
{
    let mut ep = open_endpoint(spec)?;
    pump_loop(stop, || {
        let data = ep.read_timeout(MAX_READ, READ_SLICE).map_err(Failure::runtime)?;
        if data.is_empty() {
            return Ok(0);
        }
        match bus::decode_frame(&data) {
            Ok(m) => each(&m),
            Err(e) => {
                log::warn!("dropping undecodable datagram: {e}");
                Ok(0)
            }
        }
    })
}

fn monitor(from: &str, channel: Option<&str>, stop: StopFlags, out: &mut dyn Write) -> Outcome {
    let bus = Bus::new();
    receive_loop(from, stop, |m| {
        bus.publish(m);
        if channel.is_some_and(|c| c != m.channel()) {
            return Ok(0);
        }
        writeln!(out, "{}", monitor_line(m))?;
        out.flush()?;
        Ok(1)
    })
}

fn record(from: &str, path: &PathBuf, stop: StopFlags, out: &mut dyn Write) -> Outcome {
    let file = File::create(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    let bus = Bus::new();
    let rec = bus::record(&bus, BufWriter::new(file))?;
    let result = receive_loop(from, stop, |m| {
        bus.publish(m);
        Ok(1)
    });
    let (mut w, n) = rec.stop()?;
    w.flush()?;
    result?;
    writeln!(out, "{n} messages written to {}", path.display())?;
    Ok(())
}

fn calibrate(csv: &PathBuf, intrinsics: &str, params: RansacParams, out: &mut dyn Write) -> Outcome {
    let k = calib::parse_intrinsics(intrinsics).map_err(Failure::usage)?;
    let text = std::fs::read_to_string(csv)
        .map_err(|e| Failure::runtime(format!("{}: {e}", csv.display())))?;
    let corrs = calib::parse_correspondences(&text)
        .map_err(|e| Failure::runtime(format!("{}: {e}", csv.display())))?;
    match calib::ransac_extrinsics(&corrs, &k, &params) {
        Ok(r) => {
            write!(out, "{}", calib::format_report(&r, corrs.len()))?;
            Ok(())
        }
        Err(e @ CalibError::NoConsensus { .. }) => Err(Failure {
            code: EXIT_NO_CONSENSUS,
            message: e.to_string(),
        }),
        Err(e @ CalibError::InvalidParams(_)) => Err(Failure::usage(e)),
        Err(e) => Err(Failure::runtime(e)),
    }
}
