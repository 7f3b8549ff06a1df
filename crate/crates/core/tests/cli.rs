use std::net::UdpSocket;
use std::time::Duration;

use sensorkit::bus::{encode_frame, BusMessage, LogReader};
use sensorkit::cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["sensorkit"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn simulate(dir: &std::path::Path, name: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let (code, out, err) = run(&["simulate", "--duration", "0.3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("messages written"), "{out}");
    path
}

#[test]
fn simulate_then_play() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path(), "s.log");
    let (code, out, _) = run(&["play", log.to_str().unwrap(), "--print"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(!lines.is_empty());
    let f = std::fs::File::open(&log).unwrap();
    let mut r = LogReader::new(f).unwrap();
    for line in &lines {
        let m = r.next_message().unwrap().unwrap();
        assert_eq!(
            *line,
            format!("{} {} {} {}", m.timestamp_us, m.channel(), m.payload_type, m.payload.len())
        );
    }
    assert!(r.next_message().unwrap().is_none());

    let (_, only_front, _) = run(&["play", log.to_str().unwrap(), "--print", "--channel", "scan.front"]);
    assert!(!only_front.is_empty());
    assert!(only_front.lines().all(|l| l.split(' ').nth(1) == Some("scan.front")));
}

#[test]
fn corrupt_log_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path(), "s.log");
    let mut bytes = std::fs::read(&log).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&log, bytes).unwrap();
    let (code, _, err) = run(&["play", log.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("offset"), "{err}");

    let (code, _, err) = run(&["play", dir.path().join("missing.log").to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn bad_scene_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.scene");
    std::fs::write(&scene, "# ok\nbox a 1 2 3 1 1 1 0\nbox b nope\n").unwrap();
    let out = dir.path().join("o.log");
    let (code, _, err) = run(&[
        "simulate",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn calibrate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");

    std::fs::write(&csv, "1,2,3,4\n").unwrap();
    let (code, _, err) = run(&["calibrate", "--correspondences", csv.to_str().unwrap(), "--intrinsics", "800,800,640,360"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"), "{err}");

    std::fs::write(&csv, "1,2,3,4,5\n6,7,8,9,10\n").unwrap();
    let (code, _, _) = run(&["calibrate", "--correspondences", csv.to_str().unwrap(), "--intrinsics", "800,800,640,360"]);
    assert_eq!(code, 2);

    // pixels unrelated to the points
    let mut text = String::new();
    for i in 0..20 {
        let f = i as f64;
        text.push_str(&format!("{},{},{},{},{}\n", (f * 397.0) % 1280.0, (f * 211.0) % 720.0, f.sin(), f.cos(), 5.0 + f));
    }
    std::fs::write(&csv, text).unwrap();
    let (code, _, err) = run(&["calibrate", "--correspondences", csv.to_str().unwrap(), "--intrinsics", "800,800,640,360", "--min-inliers", "15"]);
    assert_eq!(code, 3, "{err}");

    let (code, _, _) = run(&["calibrate", "--correspondences", csv.to_str().unwrap(), "--intrinsics", "800,800"]);
    assert_eq!(code, 1);
}

#[test]
fn monitor_and_record_over_udp() {
    let probe = UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = probe.local_addr().unwrap();
    drop(probe);
    let spec = format!("udp,,{addr}");
    let sender = std::thread::spawn(move || {
        let s = UdpSocket::bind("127.0.0.1:0").unwrap();
        std::thread::sleep(Duration::from_millis(200));
        for i in 0..3u64 {
            let m = BusMessage::new("demo", 1000 * i, 7, vec![i as u8; 4]).unwrap();
            s.send_to(&encode_frame(&m), addr).unwrap();
        }
    });
    let (code, out, err) = run(&["monitor", "--from", &spec, "--count", "3", "--idle-exit-ms", "3000"]);
    sender.join().unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "0 demo 7 4\n1000 demo 7 4\n2000 demo 7 4\n");

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("r.log");
    let sender = std::thread::spawn(move || {
        let s = UdpSocket::bind("127.0.0.1:0").unwrap();
        std::thread::sleep(Duration::from_millis(200));
        let m = BusMessage::new("demo", 5, 1, vec![9]).unwrap();
        s.send_to(&encode_frame(&m), addr).unwrap();
    });
    let (code, out, err) = run(&["record", "--from", &spec, "--out", log.to_str().unwrap(), "--count", "1", "--idle-exit-ms", "3000"]);
    sender.join().unwrap();
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("1 messages"), "{out}");
    let mut r = LogReader::new(std::fs::File::open(&log).unwrap()).unwrap();
    assert_eq!(r.next_message().unwrap().unwrap().payload, vec![9]);
}

#[test]
fn cdterm_decodes_can() {
    let spec = "cansim,cli-cdterm";
    let writer = std::thread::spawn(move || {
        let ep_spec = sensorkit::transport::parse_endpoint_spec(spec).unwrap();
        let mut ep = sensorkit::transport::open(&ep_spec, false).unwrap();
        std::thread::sleep(Duration::from_millis(200));
        ep.write(&[0x10, 0x03, 0xde, 0xad, 0xbe, 0xef]).unwrap();
    });
    let (code, out, err) = run(&["cdterm", spec, "--can", "--count", "1", "--idle-exit-ms", "3000"]);
    writer.join().unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "id = 310 (4 bytes): de ad be ef\n");
}

#[test]
fn binary_prints_help() {
    let exe = env!("CARGO_BIN_EXE_sensorkit");
    let o = std::process::Command::new(exe).arg("--help").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("calibrate"));
    let o = std::process::Command::new(exe).arg("nope").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
