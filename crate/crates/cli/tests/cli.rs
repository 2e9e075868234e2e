use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn patchsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/springmass.net")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn with_dt(dt: f64) -> String {
    fs::read_to_string(fixture())
        .unwrap()
        .replace("dt=0.001", &format!("dt={dt}"))
}

/// Magnitude of the RK4 amplification factor for step `h` on the
/// spring-mass eigenvalue -1.5 + i·√55/2.
fn rk4_gain(h: f64) -> f64 {
    let (re, im) = (-1.5 * h, 55f64.sqrt() / 2.0 * h);
    // Sum of z^k/k! for k = 0..=4, in real arithmetic.
    let (mut tr, mut ti) = (1.0, 0.0);
    let (mut sr, mut si) = (1.0, 0.0);
    for k in 1..=4 {
        let (nr, ni) = (tr * re - ti * im, tr * im + ti * re);
        tr = nr / k as f64;
        ti = ni / k as f64;
        sr += tr;
        si += ti;
    }
    (sr * sr + si * si).sqrt()
}

#[test]
fn run_springmass_settles() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    let out = patchsim(&[
        "run",
        fixture().to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "X", "XDOT"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10_001);
    let last = rows.last().unwrap();
    let t: f64 = last[0].parse().unwrap();
    let x: f64 = last[1].parse().unwrap();
    assert_eq!(t, 10.0);
    assert!((x - (-80.0 / 16.0)).abs() < 0.01, "{x}");

    let svg = fs::read_to_string(svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn run_to_stdout() {
    let out = patchsim(&["run", fixture().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("t,X,XDOT\n0,2,-0.64\n"));
    assert_eq!(text.lines().count(), 10_002);
}

#[test]
fn algebraic_loop_exits_1() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "loop.net",
        "block const C val=1 out=A\nblock adder S in=A,B out=C2\nblock inv N in=C2 out=B\nprobe C2\nsim dt=0.1 t=1 method=rk4\n",
    );
    let out = patchsim(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("algebraic loop"), "{err}");
    assert!(err.contains('S') && err.contains('N'), "{err}");
    assert!(err.contains("line "), "{err}");
}

#[test]
fn parse_error_cites_line() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.net", "block const C val=1 out=A\nblock frob F out=B\nsim dt=0.1 t=1 method=rk4\n");
    let out = patchsim(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn missing_file_exits_1() {
    let out = patchsim(&["run", "/nonexistent/x.net"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn large_step_diverges() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "big.net", &with_dt(1.0));
    let out = patchsim(&["run", p.to_str().unwrap(), "-o", "/dev/null"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
}

#[test]
fn stability_sweep() {
    // Steps well inside the RK4 stability region stay bounded; steps well
    // outside it blow up before t = 10.
    for dt in [0.01, 0.1, 0.3, 0.5] {
        assert!(rk4_gain(dt) < 1.0);
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "s.net", &with_dt(dt));
        let out = patchsim(&["run", p.to_str().unwrap(), "-o", "/dev/null"]);
        assert_eq!(code(&out), 0, "dt={dt}: {}", stderr(&out));
        assert!(stderr(&out).is_empty(), "dt={dt}: {}", stderr(&out));
    }
    for dt in [1.0, 1.25, 2.0] {
        assert!(rk4_gain(dt) > 5.0);
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "s.net", &with_dt(dt));
        let out = patchsim(&["run", p.to_str().unwrap(), "-o", "/dev/null"]);
        assert_eq!(code(&out), 2, "dt={dt}");
    }
}

#[test]
fn overload_warns_on_stderr() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "ramp.net",
        "block const C val=50 out=A\nblock int I in=A out=X\nprobe X\nsim dt=0.1 t=3 method=euler limit=100\n",
    );
    let out = patchsim(&["run", p.to_str().unwrap(), "-o", "/dev/null"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("overloaded"), "{}", stderr(&out));
}

#[test]
fn classify_thermometer() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "t.csv", "Q,P\n10,1.0\n20,2.0\n30,3.0\n40,4.0\n");
    let out = patchsim(&["classify", p.to_str().unwrap(), "--resolution", "0.1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("analog_increasing\n"), "{text}");
    assert!(text.contains("consistent with analog"));
}

#[test]
fn classify_inverted() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "t.csv", "Q,P\n10,90\n20,80\n30,70\n");
    let out = patchsim(&["classify", p.to_str().unwrap(), "-r", "0.1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("analog_decreasing\n"));
}

#[test]
fn classify_low_bit() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "b.csv", "Q,P\n1,5\n2,0\n3,5\n4,0\n");
    let out = patchsim(&["classify", p.to_str().unwrap(), "--resolution", "1"]);
    assert_eq!(code(&out), 3);
    let text = stdout(&out);
    assert!(text.starts_with("not_analog\n"), "{text}");
    assert!(text.contains("witness (0, 1)"), "{text}");
}

#[test]
fn classify_malformed() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [
        ("empty.csv", ""),
        ("header.csv", "Q,P\n"),
        ("wrong.csv", "A,B\n1,2\n2,3\n"),
        ("text.csv", "Q,P\n1,x\n2,3\n"),
        ("short.csv", "Q,P\n1\n2,3\n"),
    ] {
        let p = write(&dir, name, body);
        let out = patchsim(&["classify", p.to_str().unwrap(), "--resolution", "1"]);
        assert_eq!(code(&out), 1, "{name}: {}", stderr(&out));
    }
}

#[test]
fn fmt_is_stable() {
    let out = patchsim(&["fmt", fixture().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let once = stdout(&out);
    assert!(once.contains("block int I2 ic=2 in=XDOT out=X"), "{once}");

    let dir = TempDir::new().unwrap();
    let p = write(&dir, "f.net", &once);
    let twice = stdout(&patchsim(&["fmt", p.to_str().unwrap()]));
    assert_eq!(once, twice);
}

fn demo(name: &str) -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let out = patchsim(&["demo", name, "-d", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for ext in [".csv", ".svg", "-report.txt"] {
        assert!(dir.path().join(format!("{name}{ext}")).exists(), "{name}{ext}");
    }
    let report = fs::read_to_string(dir.path().join(format!("{name}-report.txt"))).unwrap();
    assert_eq!(report, stdout(&out));
    (dir, report)
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
        .unwrap_or_else(|| panic!("{key} missing from:\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn demo_sine_integral() {
    let (_dir, report) = demo("sine-integral");
    assert!(report.contains("integral = 2.000"), "{report}");
}

#[test]
fn demo_gibbs() {
    let (_dir, report) = demo("gibbs");
    let peak = report_value(&report, "overshoot");
    assert!((1.17..=1.19).contains(&peak), "{peak}");
}

#[test]
fn demo_adc_roundtrip() {
    let (_dir, report) = demo("adc-roundtrip");
    assert!(report.contains("7 → 0111 → 7"), "{report}");
    assert_eq!(report.lines().count(), 16);
}

#[test]
fn demo_springmass() {
    let (_dir, report) = demo("springmass");
    assert!((report_value(&report, "x(10)") + 5.0).abs() < 0.01);
}

#[test]
fn demo_drift() {
    let (_dir, report) = demo("drift");
    assert!((report_value(&report, "drift approx") - 50.0).abs() <= 1.0);
    assert!(report_value(&report, "drift exact").abs() <= 1e-9);
}

#[test]
fn demo_unknown_is_usage_error() {
    let out = patchsim(&["demo", "nope"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn svg_is_deterministic() {
    let (a, _) = demo("springmass");
    let (b, _) = demo("springmass");
    let read = |d: &TempDir| fs::read(d.path().join("springmass.svg")).unwrap();
    assert_eq!(read(&a), read(&b));
}
