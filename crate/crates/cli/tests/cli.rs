use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use sidemark::bench::{SWEEP_CSV_HEADER, SWEEP_CSV_VERSION};
use sidemark::media::{synthetic_image, write_pgm};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidemark"))
        .args(args)
        .output()
        .expect("spawn sidemark")
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = run(args);
    assert!(
        out.status.success(),
        "sidemark {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    parse_report(&String::from_utf8(out.stdout).unwrap())
}

fn parse_report(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn num(r: &HashMap<String, String>, key: &str) -> f64 {
    r[key].parse().unwrap()
}

fn embed_synthetic(dir: &TempDir, name: &str, m: usize, extra: &[&str]) -> HashMap<String, String> {
    let out = p(dir, name);
    let m = m.to_string();
    let mut args = vec!["embed", "--synthetic", &m, "--out", &out];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn embedding_is_deterministic() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "a.bin", 1 << 14, &["--seed", "5"]);
    embed_synthetic(&dir, "b.bin", 1 << 14, &["--seed", "5"]);
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.bin"), read("b.bin"));
    assert_eq!(read("a.bin.sidecar"), read("b.bin.sidecar"));
    embed_synthetic(&dir, "c.bin", 1 << 14, &["--seed", "6"]);
    assert_ne!(read("a.bin"), read("c.bin"));
}

#[test]
fn synthetic_round_trip_with_given_message() {
    let dir = TempDir::new().unwrap();
    let msg = "0123456789abcdef";
    let rep = embed_synthetic(&dir, "m.bin", 1 << 16, &["--message-hex", msg]);
    assert_eq!(rep["message"], msg);
    let got = ok(&["extract", "--input", &p(&dir, "m.bin")]);
    assert_eq!(got["message"], msg);
    assert_eq!(num(&got, "ber"), 0.0);
}

#[test]
fn default_embedding_meets_distortion_on_512_square_host() {
    let dir = TempDir::new().unwrap();
    let rep = embed_synthetic(&dir, "m.bin", 512 * 512, &[]);
    let d = num(&rep, "d_xy");
    assert!((d / 7.0 - 1.0).abs() <= 0.01, "D_xy = {d}");
    let sidecar = std::fs::read_to_string(p(&dir, "m.bin.sidecar")).unwrap();
    let fields = parse_report(&sidecar);
    assert_eq!(fields["n"], "132");
    assert_eq!(fields["k"], "64");
    assert!(fields.contains_key("padding"));
    assert_eq!(num(&rep, "n"), 132.0);
}

#[test]
fn scaled_signal_decodes_identically() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "m.bin", 1 << 16, &["--cancel", "none"]);
    let bytes = std::fs::read(dir.path().join("m.bin")).unwrap();
    let scaled: Vec<u8> = bytes
        .chunks_exact(8)
        .flat_map(|c| (2.0 * f64::from_le_bytes(c.try_into().unwrap())).to_le_bytes())
        .collect();
    std::fs::write(dir.path().join("s.bin"), scaled).unwrap();
    let plain = ok(&["extract", "--input", &p(&dir, "m.bin")]);
    let twice = ok(&["extract", "--input", &p(&dir, "s.bin"), "--sidecar", &p(&dir, "m.bin.sidecar")]);
    assert_eq!(num(&twice, "ber"), 0.0);
    assert_eq!(plain["message"], twice["message"]);
}

#[test]
fn decoder_cancellation_raises_correlator_snr_without_attack() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "m.bin", 1 << 16, &["--cancel", "none"]);
    let none = ok(&["extract", "--input", &p(&dir, "m.bin"), "--cancel", "none"]);
    let dec = ok(&["extract", "--input", &p(&dir, "m.bin"), "--cancel", "decoder"]);
    assert_eq!(num(&dec, "ber"), 0.0);
    assert!(
        num(&dec, "snr_db") > num(&none, "snr_db"),
        "decoder {} dB vs none {} dB",
        dec["snr_db"],
        none["snr_db"]
    );
}

#[test]
fn sidecar_mismatch_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "m.bin", 1 << 14, &[]);
    let sidecar = std::fs::read_to_string(p(&dir, "m.bin.sidecar")).unwrap();
    for (from, to) in [("k = 64", "k = 32"), ("n = 132", "n = 130"), ("m = 16384", "m = 8192")] {
        std::fs::write(dir.path().join("bad.sidecar"), sidecar.replace(from, to)).unwrap();
        let out = run(&["extract", "--input", &p(&dir, "m.bin"), "--sidecar", &p(&dir, "bad.sidecar")]);
        assert_eq!(out.status.code(), Some(2), "{from} -> {to}");
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let m = p(&dir, "m.bin");
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["embed", "--synthetic", "4096", "--out", &m, "--rate", "1/3"]), Some(2));
    assert_eq!(code(&["embed", "--synthetic", "4096", "--out", &m, "--dxyp", "500"]), Some(3));
    assert_eq!(code(&["extract", "--input", &p(&dir, "missing.bin")]), Some(4));
    assert_eq!(code(&["embed", "--synthetic", "4096", "--out", &m, "--cancel", "sideways"]), Some(2));
    assert_eq!(code(&["embed", "--synthetic", "4096", "--out", &m, "--message-hex", "abc"]), Some(2));
}

#[test]
fn attack_chain_on_synthetic_host() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "m.bin", 1 << 16, &[]);
    let a = ok(&["attack", "--input", &p(&dir, "m.bin"), "--attack", "awgn", "--level", "2", "--seed", "3", "--out", &p(&dir, "a.bin")]);
    assert!(num(&a, "d_xyp") > 7.0);
    assert_eq!(num(&ok(&["extract", "--input", &p(&dir, "a.bin")]), "ber"), 0.0);
    let o = ok(&["attack", "--input", &p(&dir, "m.bin"), "--attack", "optimal", "--level", "20", "--out", &p(&dir, "o.bin")]);
    assert!((num(&o, "d_xyp") / 20.0 - 1.0).abs() < 0.02, "{}", o["d_xyp"]);
    let sc = std::fs::read_to_string(p(&dir, "o.bin.sidecar")).unwrap();
    assert!(sc.contains("attack = optimal"));
    assert_eq!(num(&ok(&["extract", "--input", &p(&dir, "o.bin")]), "ber"), 0.0);
    // JPEG needs pixels.
    let out = run(&["attack", "--input", &p(&dir, "m.bin"), "--attack", "jpeg", "--quality", "50", "--out", &p(&dir, "j.bin")]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_image(dir: &TempDir) -> String {
    let path = p(dir, "host.pgm");
    write_pgm(&synthetic_image(256, 256, 8).unwrap(), Path::new(&path)).unwrap();
    path
}

#[test]
fn image_round_trip_and_jpeg() {
    let dir = TempDir::new().unwrap();
    let host = write_image(&dir);
    let rep = ok(&["embed", "--input", &host, "--out", &p(&dir, "m.pgm")]);
    assert!((num(&rep, "d_xy") / 7.0 - 1.0).abs() < 0.05, "{}", rep["d_xy"]);
    assert_eq!(num(&ok(&["extract", "--input", &p(&dir, "m.pgm")]), "ber"), 0.0);
    ok(&["attack", "--input", &p(&dir, "m.pgm"), "--attack", "jpeg", "--quality", "90", "--out", &p(&dir, "j.pgm")]);
    assert_eq!(num(&ok(&["extract", "--input", &p(&dir, "j.pgm")]), "ber"), 0.0);
    let blind = ok(&["extract", "--input", &p(&dir, "m.pgm"), "--blind"]);
    assert_eq!(blind["cancel"], "blind");
    assert_eq!(num(&blind, "ber"), 0.0);
}

#[test]
fn blind_embedding_omits_solved_parameters() {
    let dir = TempDir::new().unwrap();
    embed_synthetic(&dir, "m.bin", 1 << 16, &["--blind"]);
    let fields = parse_report(&std::fs::read_to_string(p(&dir, "m.bin.sidecar")).unwrap());
    assert_eq!(fields["genie"], "false");
    assert!(!fields.contains_key("lambda"));
    let got = ok(&["extract", "--input", &p(&dir, "m.bin")]);
    assert_eq!(got["cancel"], "blind");
    assert_eq!(num(&got, "ber"), 0.0);
}

#[test]
fn solve_reports_the_budgets() {
    let r = ok(&["solve", "--synthetic", "65536"]);
    assert!((num(&r, "d_xy") - 7.0).abs() < 0.035);
    assert!((num(&r, "d_xyp") - 20.0).abs() < 0.1);
    assert!((num(&r, "wpsnr_db") - 39.68).abs() < 0.02);
    assert_eq!(num(&r, "n"), 132.0);
    assert!(num(&r, "ebn0_orth_db") >= num(&r, "ebn0_isi_db"));
}

fn csv_lines(text: &str) -> Vec<&str> {
    text.lines().collect()
}

#[test]
fn single_mode_sweep_rows_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "s.csv");
    let args = [
        "sweep", "--synthetic", "16384", "--levels", "0.5,2,8", "--cancel", "none", "--seeds", "2", "--out", &out,
    ];
    ok(&args);
    let first = std::fs::read_to_string(&out).unwrap();
    let lines = csv_lines(&first);
    assert_eq!(lines[0], SWEEP_CSV_VERSION);
    assert_eq!(lines[1], SWEEP_CSV_HEADER.join(","));
    assert_eq!(lines.len(), 2 + 3);
    assert!(lines[2..].iter().all(|l| l.starts_with("none,dense,awgn,")));
    ok(&args);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn all_mode_sweep_orders_rows_and_shows_cancellation_gain() {
    let out = run(&["sweep", "--synthetic", "65536", "--levels", "0.25,64", "--seeds", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 4);
    let modes: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(modes, ["none", "decoder", "embedder", "both", "none", "decoder", "embedder", "both"]);
    let ebn0 = |i: usize| rows[i][6].parse::<f64>().unwrap();
    // Low noise: cancellation well above no cancellation; high noise: close.
    assert!(ebn0(2) > ebn0(0) + 3.0, "{} vs {}", ebn0(2), ebn0(0));
    assert!((ebn0(6) - ebn0(4)).abs() < ebn0(2) - ebn0(0));
}

#[test]
fn sweep_needs_two_points_and_pixels_for_jpeg() {
    assert_eq!(run(&["sweep", "--synthetic", "4096", "--levels", "1"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--synthetic", "4096", "--attack", "jpeg", "--levels", "50,90"]).status.code(), Some(2));
}

#[test]
fn image_jpeg_sweep() {
    let dir = TempDir::new().unwrap();
    let host = write_image(&dir);
    let out = run(&["sweep", "--input", &host, "--attack", "jpeg", "--levels", "90,30", "--cancel", "embedder", "--seeds", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines = csv_lines(&text);
    assert_eq!(lines.len(), 4);
    let dxyp = |l: &str| l.split(',').nth(5).unwrap().parse::<f64>().unwrap();
    assert!(dxyp(lines[3]) > dxyp(lines[2]), "lower quality must distort more");
}
