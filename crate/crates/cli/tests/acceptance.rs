//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Tests take a shared lock so that the runtime limits are measured without
//! competing test threads.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use lmsqkd_core::adversary::{collective_qber, leakage_report, SiftedMode};
use lmsqkd_core::keyrate::{find_threshold, minimize_rate, rate_given_lambda};
use lmsqkd_core::protocol::run_session;
use lmsqkd_core::protocol::fake_photon_detection_frequency;
use lmsqkd_core::quantum_sim::binary_entropy;
use lmsqkd_core::rng::{stream, Party};
use lmsqkd_core::{AttackStrategy, CollectiveParams, SessionConfig};
use num_complex::Complex64;
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} {name}: {detail} ({:.2}s)", elapsed.as_secs_f64());
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn lmsqkd(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_lmsqkd"))
        .args(args)
        .env_remove("LMSQKD_SEED")
        .output()
        .expect("binary runs");
    assert!(
        out.status.code().is_some_and(|c| c == 0 || c == 2),
        "lmsqkd {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn criterion_1_sifting_table() {
    let _g = serial();
    let start = Instant::now();
    let config = SessionConfig {
        n_rounds: 100_000,
        master_seed: 1,
        ..Default::default()
    };
    let t = run_session(&config, &AttackStrategy::Honest).unwrap();
    let mut sifted_mismatch = 0usize;
    let (mut other, mut other_agree) = (0usize, 0usize);
    for r in &t.rounds {
        if r.sifted() {
            sifted_mismatch += usize::from(r.alice_bit != r.bob_bit);
        } else {
            other += 1;
            other_agree += usize::from(r.alice_bit == r.bob_bit);
        }
    }
    let agree = other_agree as f64 / other as f64;
    let elapsed = start.elapsed();
    let pass = sifted_mismatch == 0 && (agree - 0.5).abs() <= 0.005 && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "sifting table",
        pass,
        &format!("sifted mismatches {sifted_mismatch}, unsifted agreement {agree:.4} over {other} rounds"),
        elapsed,
    );
}

#[test]
fn criterion_2_key_length_and_efficiency() {
    let _g = serial();
    let start = Instant::now();
    let seeds = 100u64;
    let n = 4000u64;
    let mut total = 0usize;
    for seed in 0..seeds {
        let config = SessionConfig {
            n_rounds: n,
            master_seed: seed,
            ..Default::default()
        };
        let t = run_session(&config, &AttackStrategy::Honest).unwrap();
        assert!(t.accepted);
        total += t.final_key.len();
    }
    let mean = total as f64 / seeds as f64;
    // A key bit needs a matched round outside the check set: probability 1/4.
    let sigma = (n as f64 * 0.25 * 0.75).sqrt() / (seeds as f64).sqrt();
    let expected = n as f64 / 4.0;

    let out = lmsqkd(&["efficiency", "--pa", "0.5", "--pb", "0.5", "--check-fraction", "0.5"]);
    let line = String::from_utf8(out.stdout).unwrap();
    let elapsed = start.elapsed();
    let pass = (mean - expected).abs() < 3.0 * sigma
        && line.trim_end() == "qe=1/8 (0.125)"
        && elapsed < Duration::from_secs(30);
    verdict(
        2,
        "key length and efficiency",
        pass,
        &format!("mean key {mean:.2} vs {expected} (3σ = {:.2}), efficiency `{}`", 3.0 * sigma, line.trim_end()),
        elapsed,
    );
}

#[test]
fn criterion_3_threshold() {
    let _g = serial();
    let start = Instant::now();
    let q = find_threshold(5e-4).unwrap();
    let elapsed = start.elapsed();
    let pass = (0.1095..=0.1105).contains(&q) && elapsed < Duration::from_secs(5);
    verdict(3, "key-rate threshold", pass, &format!("threshold {q:.6}"), elapsed);
}

#[test]
fn criterion_4_curve_oracle() {
    let _g = serial();
    let start = Instant::now();

    // The closed form is checked against an exhaustive λ4 grid first.
    let mut grid_err: f64 = 0.0;
    for k in 0..=40 {
        let q = k as f64 * 0.005;
        let closed = 1.0 - 2.0 * binary_entropy(q).unwrap();
        let steps = (q / 1e-5).round() as usize;
        let best = (0..=steps)
            .map(|s| rate_given_lambda(q, (s as f64 * 1e-5).min(q)).unwrap())
            .fold(f64::INFINITY, f64::min);
        grid_err = grid_err.max((best - closed).abs());
    }

    let mut opt_err: f64 = 0.0;
    for k in 0..=40 {
        let q = k as f64 * 0.005;
        let closed = 1.0 - 2.0 * binary_entropy(q).unwrap();
        let p = minimize_rate(q, 201, 1e-7).unwrap();
        opt_err = opt_err.max((p.rate - closed).abs());
    }
    let elapsed = start.elapsed();
    let pass = grid_err < 1e-6 && opt_err < 1e-6 && elapsed < Duration::from_secs(60);
    verdict(
        4,
        "key-rate curve oracle",
        pass,
        &format!("max |grid - closed| {grid_err:.2e}, max |minimize - closed| {opt_err:.2e}"),
        elapsed,
    );
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_unit<R: Rng>(rng: &mut R) -> [Complex64; 4] {
    let mut v = [Complex64::default(); 4];
    for z in &mut v {
        *z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / norm)
}

fn random_phase<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// a1 = a2 = 0 and a0|e0> = a3|e3>.
fn zero_qber_params<R: Rng>(rng: &mut R) -> ([Complex64; 4], [[Complex64; 4]; 4]) {
    let a0 = random_phase(rng) * FRAC_1_SQRT_2;
    let a3 = random_phase(rng) * FRAC_1_SQRT_2;
    let e0 = random_unit(rng);
    let e3 = e0.map(|z| z * a0 / a3);
    let a = [a0, c(0.0, 0.0), c(0.0, 0.0), a3];
    (a, [e0, random_unit(rng), random_unit(rng), e3])
}

/// Explicit 16x16 Kronecker product applied to the joint state.
fn brute_force_qber(params: &CollectiveParams, hadamard: bool) -> f64 {
    let g = if hadamard {
        [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]]
    } else {
        [[1.0, 0.0], [0.0, 1.0]]
    };
    let mut op = [[0.0f64; 16]; 16];
    for (row, op_row) in op.iter_mut().enumerate() {
        for (col, x) in op_row.iter_mut().enumerate() {
            if row % 4 == col % 4 {
                *x = g[row / 8][col / 8] * g[(row / 4) % 2][(col / 4) % 2];
            }
        }
    }
    let mut psi = [Complex64::default(); 16];
    for i in 0..4 {
        for k in 0..4 {
            psi[i * 4 + k] = params.a()[i] * params.e()[i][k];
        }
    }
    let mut out = [Complex64::default(); 16];
    for row in 0..16 {
        for col in 0..16 {
            out[row] += psi[col] * op[row][col];
        }
    }
    let total: f64 = out.iter().map(|z| z.norm_sqr()).sum();
    let bad: f64 = (0..16).filter(|i| i / 8 != (i / 4) % 2).map(|i| out[i].norm_sqr()).sum();
    bad / total
}

#[test]
fn criterion_5_collective_dichotomy() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = stream(5, 0, Party::Trial);
    let samples = 1000;

    let mut worst_zero: f64 = 0.0;
    for _ in 0..samples {
        let (a, e) = zero_qber_params(&mut rng);
        let p = CollectiveParams::new(a, e).unwrap();
        let r = leakage_report(&p, 0, &mut rng).unwrap();
        worst_zero = worst_zero.max(r.holevo_bits);
    }

    let mut leaky = 0usize;
    let mut min_qber_when_leaky = f64::INFINITY;
    for _ in 0..samples {
        let (mut a, mut e) = zero_qber_params(&mut rng);
        let scale = rng.random_range(1e-2..0.3);
        for z in &mut a {
            *z += c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
        }
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        a = a.map(|z| z / norm);
        for v in &mut e {
            for z in v.iter_mut() {
                *z += c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            *v = v.map(|z| z / norm);
        }
        let p = CollectiveParams::new(a, e).unwrap();
        let r = leakage_report(&p, 0, &mut rng).unwrap();
        if r.holevo_bits > 1e-6 {
            leaky += 1;
            min_qber_when_leaky = min_qber_when_leaky.min(r.qber_ii.max(r.qber_hh));
        }
    }

    let mut brute_err: f64 = 0.0;
    for _ in 0..samples {
        let a = random_unit(&mut rng);
        let e = [random_unit(&mut rng), random_unit(&mut rng), random_unit(&mut rng), random_unit(&mut rng)];
        let p = CollectiveParams::new(a, e).unwrap();
        for (mode, h) in [(SiftedMode::Identity, false), (SiftedMode::Hadamard, true)] {
            brute_err = brute_err.max((collective_qber(&p, mode) - brute_force_qber(&p, h)).abs());
        }
    }

    let elapsed = start.elapsed();
    let pass = worst_zero < 1e-9
        && leaky > 0
        && min_qber_when_leaky > 1e-6
        && brute_err < 1e-12
        && elapsed < Duration::from_secs(60);
    verdict(
        5,
        "collective-attack dichotomy",
        pass,
        &format!(
            "max holevo on zero-QBER set {worst_zero:.2e}; {leaky} leaky perturbations, min max-QBER {min_qber_when_leaky:.2e}; analytic vs brute force {brute_err:.2e}"
        ),
        elapsed,
    );
}

#[test]
fn criterion_6_fake_photon_detection() {
    let _g = serial();
    let start = Instant::now();
    let config = SessionConfig {
        master_seed: 6,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for strategy in [AttackStrategy::FakePhotonZ, AttackStrategy::FakePhotonX] {
        for m in [1u32, 2, 5, 10] {
            let f = fake_photon_detection_frequency(&strategy, m, 10_000, &config).unwrap();
            let predicted = 1.0 - 0.25f64.powi(m as i32);
            worst = worst.max((f - predicted).abs());
            rows.push(format!("{} m={m} {f:.4}/{predicted:.4}", strategy.name()));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 0.01 && elapsed < Duration::from_secs(60);
    verdict(
        6,
        "fake-photon detection",
        pass,
        &format!("empirical/predicted {}; max deviation {worst:.4}", rows.join(", ")),
        elapsed,
    );
}

fn same_bytes(dir: &Path, label: &str, args: &[&str], file: Option<&str>) -> bool {
    let mut outputs = Vec::new();
    for threads in ["1", "8", "1", "8"] {
        let mut full: Vec<String> = vec!["--threads".into(), threads.into()];
        full.extend(args.iter().map(|s| s.to_string()));
        let target = file.map(|f| dir.join(format!("{label}-{threads}-{}-{f}", outputs.len())));
        if let Some(path) = &target {
            full.push("--out".into());
            full.push(path.display().to_string());
        }
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let out = lmsqkd(&refs);
        let bytes = match &target {
            Some(path) => std::fs::read(path).unwrap(),
            None => out.stdout,
        };
        outputs.push(bytes);
    }
    outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty()
}

#[test]
fn criterion_7_determinism() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>, Option<&str>)> = vec![
        ("honest", vec!["simulate", "--seed", "11", "--rounds", "3000", "--verbose"], Some("t.json")),
        ("noise", vec!["simulate", "--seed", "12", "--rounds", "3000", "--strategy", "noise", "--flip", "0.03"], Some("t.json")),
        ("fake", vec!["simulate", "--seed", "13", "--rounds", "2000", "--strategy", "fake-x", "--verbose"], Some("t.json")),
        ("curve", vec!["keyrate-curve", "--min", "0", "--max", "0.2", "--step", "0.01"], Some("c.csv")),
        ("attack", vec!["attack", "--seed", "14", "--fake-photon", "z", "--trials", "2000"], None),
        ("threshold", vec!["threshold"], None),
    ];
    let params = dir.path().join("params.json");
    std::fs::write(&params, CollectiveParams::full_information().to_json()).unwrap();
    let params = params.display().to_string();
    let collective_sim = vec![
        "simulate", "--seed", "15", "--rounds", "2000", "--strategy", "collective", "--params", &params, "--verbose",
    ];
    let collective_attack = vec!["attack", "--seed", "16", "--collective", "--params", &params, "--samples", "5000"];

    let mut failed = Vec::new();
    for (label, args, file) in &cases {
        if !same_bytes(dir.path(), label, args, *file) {
            failed.push(*label);
        }
    }
    if !same_bytes(dir.path(), "collective", &collective_sim, Some("t.json")) {
        failed.push("collective");
    }
    if !same_bytes(dir.path(), "leakage", &collective_attack, None) {
        failed.push("leakage");
    }
    let elapsed = start.elapsed();
    let detail = if failed.is_empty() {
        format!("{} commands byte-identical across --threads 1/8", cases.len() + 2)
    } else {
        format!("outputs differ for {failed:?}")
    };
    verdict(7, "determinism", failed.is_empty(), &detail, elapsed);
}
