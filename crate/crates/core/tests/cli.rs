use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_thermotwin");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Server {
    child: Child,
    addr: String,
}

impl Server {
    fn spawn() -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--tcp-port", "0", "--ws-port", "0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        // "tcp 127.0.0.1:PORT ws ws://127.0.0.1:PORT/ws"
        let addr = line
            .split_whitespace()
            .nth(1)
            .expect("listen line")
            .to_string();
        Server { child, addr }
    }

    fn cli(&self, args: &[&str]) -> Output {
        let mut full = vec!["--addr", self.addr.as_str()];
        full.extend_from_slice(args);
        run(&full)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn commands_against_a_live_service() {
    let server = Server::spawn();
    let connected = server.cli(&["connect"]);
    assert_eq!(code(&connected), 0, "{connected:?}");
    assert!(stdout(&connected).contains("ThermoTwin-SIM"));

    assert_eq!(code(&server.cli(&["on"])), 0);
    assert_eq!(code(&server.cli(&["set-heat", "-2.5"])), 0);
    let status = server.cli(&["status"]);
    assert_eq!(code(&status), 0);
    let text = stdout(&status);
    assert!(text.contains("mode=heat_flow"), "{text}");
    assert!(text.contains("enabled=true"), "{text}");

    assert_eq!(code(&server.cli(&["set-level", "very-cold"])), 0);
    assert_eq!(
        code(&server.cli(&["set-pid", "--kp", "2", "--ki", "0.5", "--i-limit", "0.3"])),
        0
    );
    assert_eq!(code(&server.cli(&["set-mode", "temperature"])), 0);
    assert_eq!(code(&server.cli(&["set-temp", "34"])), 0);
    assert_eq!(code(&server.cli(&["off"])), 0);
}

#[test]
fn out_of_range_setpoint_exits_with_range_code() {
    let server = Server::spawn();
    let out = server.cli(&["set-temp", "50"]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1500") && err.contains("4200"), "{err}");
}

#[test]
fn unreachable_device_exits_with_connection_code() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    assert_eq!(code(&run(&["--addr", &addr, "status"])), 2);
}

#[test]
fn record_writes_trace_file() {
    let server = Server::spawn();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("live.jsonl");
    let rec = server.cli(&[
        "record",
        "--duration",
        "1",
        "--format",
        "jsonl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&rec), 0, "{rec:?}");
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    assert!((9..=11).contains(&rows), "{rows} rows");
}

#[test]
fn offline_pipeline_scenario_metrics_plot_replay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("heat.csv");
    let t = trace.to_str().unwrap();
    assert_eq!(
        code(&run(&["scenario", "--scenario", "charac-heat", "--out", t])),
        0
    );

    let metrics = run(&["metrics", t]);
    assert_eq!(code(&metrics), 0);
    // header plus twelve steps
    assert_eq!(stdout(&metrics).lines().count(), 13);

    let plots = dir.path().join("plots");
    assert_eq!(
        code(&run(&["plot", t, "--out", plots.to_str().unwrap()])),
        0
    );
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 6);

    let copy = dir.path().join("copy.csv");
    assert_eq!(
        code(&run(&["replay", t, "--out", copy.to_str().unwrap()])),
        0
    );
    assert_eq!(
        std::fs::read(&trace).unwrap(),
        std::fs::read(&copy).unwrap()
    );
}

#[test]
fn scenario_script_file() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.toml");
    std::fs::write(
        &script,
        "name = \"short\"\n[[hold]]\nduration_s = 0.5\nmode = \"heat_flow\"\nsetpoint = 1.0\n",
    )
    .unwrap();
    let out = run(&["scenario", "--script", script.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 51);
}

#[test]
fn malformed_trace_exits_with_trace_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time_s,t_abs_c\n0.1,30\n").unwrap();
    assert_eq!(code(&run(&["metrics", bad.to_str().unwrap()])), 4);
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&run(&["plot", missing.to_str().unwrap()])), 4);
}

#[test]
fn exported_vectors_match_shipped_file() {
    let out = run(&["export-vectors"]);
    assert_eq!(code(&out), 0);
    let shipped = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/frame_vectors.json"),
    )
    .unwrap();
    assert_eq!(stdout(&out), shipped);
}
