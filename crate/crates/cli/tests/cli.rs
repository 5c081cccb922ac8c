use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn freezer() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freezer"));
    cmd.env("RUST_LOG", "info");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    freezer().args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn simulate(scenario: &Path, seed: &str, out: &Path) -> Output {
    run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn simulate_demo_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let demo = scenario("demo.scenario");
    let out_a = simulate(&demo, "42", &a);
    assert!(out_a.status.success(), "{}", text(&out_a.stderr));
    let out_b = simulate(&demo, "42", &b);
    assert_eq!(out_a.stdout, out_b.stdout);
    for file in ["events.log", "sms.trace", "report.json"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert!(!x.is_empty(), "{file} is empty");
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    // rerunning into the same directory starts a fresh log
    simulate(&demo, "42", &a);
    assert_eq!(
        std::fs::read(a.join("events.log")).unwrap(),
        std::fs::read(b.join("events.log")).unwrap()
    );
    let report: serde_json::Value = serde_json::from_slice(&out_a.stdout).unwrap();
    assert_eq!(report["checksServed"], 2);
}

#[test]
fn simulate_e2e_reports_one_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&scenario("e2e.scenario"), "7", dir.path());
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["checksServed"], 1);
    assert_eq!(report["finalSnapshot"]["mainKg"], 30.0);
    assert_eq!(report["finalSnapshot"]["cMain"], 60);
    assert_eq!(report["finalSnapshot"]["cElev"], 10);
    let saved: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
    let log = std::fs::read_to_string(dir.path().join("events.log")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["id"], 1);
    assert_eq!(first["kind"], "check_requested");
}

#[test]
fn malformed_scenario_line_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scenario");
    std::fs::write(&path, "t=0 add main 1\nt=5 frobnicate\n").unwrap();
    let out = simulate(&path, "1", &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 2"), "{}", text(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["errors", "--table", "4"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--seed", "x"]).status.code(), Some(2));
    let missing = run(&["calibrate", "--pairs", "/nonexistent/pairs.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = simulate(&scenario("e2e.scenario"), "1", &blocker.join("out"));
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
}

fn calibrate(csv: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    std::fs::write(&path, csv).unwrap();
    run(&["calibrate", "--pairs", path.to_str().unwrap()])
}

#[test]
fn calibrate_examples() {
    let out = calibrate("raw,kg\n190468,0\n230568,1\n390968,5\n");
    assert!(out.status.success());
    assert_eq!(text(&out.stdout), "factor 40100\noffset 190468\n");

    let out = calibrate("raw,kg\n-922696,0\n-1017446,10\n");
    assert_eq!(text(&out.stdout), "factor -9475\noffset -922696\n");

    let out = calibrate("raw,kg\n100,5\n200,5\n");
    assert_eq!(out.status.code(), Some(2));

    let out = calibrate("raw,kg\n100,5\nabc,6\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 3"), "{}", text(&out.stderr));
}

#[test]
fn errors_tables() {
    let out = run(&["errors", "--table", "1"]);
    assert!(out.status.success());
    let s = text(&out.stdout);
    assert!(s.contains("0.602"), "{s}");
    assert!(s.contains("recomputed 99.779%, quoted 99.5%"), "{s}");

    let s = text(&run(&["errors", "--table", "2"]).stdout);
    assert!(s.contains("recomputed 99.187%"), "{s}");

    let s = text(&run(&["errors", "--table", "3"]).stdout);
    assert!(s.contains("|a-m| / |a|"), "{s}");
    assert!(s.contains("recomputed 94.60"), "{s}");
}

fn http(port: u16, method: &str, path: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    let status = resp[9..12].parse().unwrap();
    let body = resp.split("\r\n\r\n").nth(1).unwrap_or("").to_string();
    (status, body)
}

#[test]
fn serve_answers_a_check() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.log");
    let mut child = freezer()
        .args([
            "serve",
            "--port",
            "0",
            "--scenario",
            scenario("e2e.scenario").to_str().unwrap(),
            "--seed",
            "3",
            "--realtime-factor",
            "200",
            "--log",
            log.to_str().unwrap(),
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let port: u16 = loop {
        let line = lines.next().expect("server exited").unwrap();
        if let Some(addr) = line.split("http://").nth(1) {
            break addr.rsplit(':').next().unwrap().trim().parse().unwrap();
        }
    };

    let (status, body) = http(port, "POST", "/api/check");
    assert_eq!(status, 200, "{body}");
    let id: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(id["requestId"].as_u64().unwrap() >= 1);

    let deadline = Instant::now() + Duration::from_secs(20);
    let latest = loop {
        let (status, body) = http(port, "GET", "/api/inventory/latest");
        if status == 200 {
            break serde_json::from_str::<serde_json::Value>(&body).unwrap();
        }
        assert_eq!(status, 404);
        assert!(Instant::now() < deadline, "no inventory arrived");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert_eq!(latest["cMain"], 60);
    let (status, _) = http(port, "GET", "/api/events?afterId=0&limit=5");
    assert_eq!(status, 200);
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(std::fs::read_to_string(&log).unwrap().contains("\"kind\":\"stat\""));
}
