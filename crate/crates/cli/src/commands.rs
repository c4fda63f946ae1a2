use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use lmsqkd_core::adversary::{
    fake_photon_detection_prob, fake_photon_detection_prob_per_check, leakage_report,
};
use lmsqkd_core::keyrate::{export_curve, find_threshold, write_curve_csv};
use lmsqkd_core::protocol::{
    fake_photon_detection_frequency, run_session, theoretical_qubit_efficiency, AbortReason,
};
use lmsqkd_core::rng::{stream, Party, SESSION_STREAM};
use lmsqkd_core::{AttackStrategy, CollectiveParams, SessionConfig, TranscriptDocument};
use num_rational::Ratio;

use crate::{
    AttackArgs, Cli, Command, CurveArgs, EfficiencyArgs, FakeBasis, SimulateArgs, StrategyArg,
    ThresholdArgs,
};

const EXIT_ABORT: u8 = 2;

#[derive(Debug)]
pub struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<lmsqkd_core::Error> for CliError {
    fn from(e: lmsqkd_core::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError(msg.into())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let mut stdout = io::stdout().lock();
    match &cli.command {
        Command::Simulate(args) => simulate(cli.seed, args, &mut stdout),
        Command::KeyrateCurve(args) => keyrate_curve(args, &mut stdout),
        Command::Threshold(args) => threshold(args, &mut stdout),
        Command::Attack(args) => attack(cli.seed, args, &mut stdout),
        Command::Efficiency(args) => efficiency(args, &mut stdout),
    }
}

fn load_params(path: Option<&Path>) -> Result<CollectiveParams, CliError> {
    let path = path.ok_or_else(|| usage("--params FILE is required for the collective strategy"))?;
    CollectiveParams::from_json(&read_file(path)?)
        .map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn strategy_from(args: &SimulateArgs) -> Result<AttackStrategy, CliError> {
    if args.flip.is_some() && args.strategy != StrategyArg::Noise {
        return Err(usage("--flip only applies to --strategy noise"));
    }
    Ok(match args.strategy {
        StrategyArg::Honest => AttackStrategy::Honest,
        StrategyArg::FakeZ => AttackStrategy::FakePhotonZ,
        StrategyArg::FakeX => AttackStrategy::FakePhotonX,
        StrategyArg::Noise => {
            let flip_prob = args
                .flip
                .ok_or_else(|| usage("--strategy noise requires --flip"))?;
            AttackStrategy::Noise { flip_prob }
        }
        StrategyArg::Collective => AttackStrategy::Collective {
            params: load_params(args.params.as_deref())?,
        },
    })
}

fn simulate(seed: u64, args: &SimulateArgs, out: &mut impl Write) -> Result<ExitCode, CliError> {
    if args.rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let config = SessionConfig {
        n_rounds: args.rounds,
        p_a: args.pa,
        p_b: args.pb,
        check_fraction: args.check_fraction,
        qber_threshold: args.threshold,
        pa_security_margin: args.margin,
        master_seed: seed,
        min_check_bits: args.min_check_bits,
    };
    config.validate()?;
    let strategy = strategy_from(args)?;
    strategy.validate()?;
    let t = run_session(&config, &strategy)?;

    if let Some(path) = &args.out {
        let mut json = t.to_json(args.verbose);
        json.push('\n');
        write_file(path, json.as_bytes())?;
    }

    writeln!(out, "strategy={}", strategy.name())?;
    writeln!(out, "rounds={}", config.n_rounds)?;
    writeln!(out, "sifted={}", t.sifted_indices.len())?;
    writeln!(out, "check_bits={}", t.check_indices.len())?;
    match t.estimated_qber {
        Some(q) => writeln!(out, "qber={q:.6}")?,
        None => writeln!(out, "qber=none")?,
    }
    writeln!(out, "accepted={}", t.accepted)?;
    writeln!(out, "raw_key_bits={}", t.raw_key.len())?;
    writeln!(out, "final_key_bits={}", t.final_key.len())?;
    let q_t = 2 * config.n_rounds;
    writeln!(
        out,
        "efficiency={}/{} ({})",
        t.final_key.len(),
        q_t,
        t.final_key.len() as f64 / q_t as f64
    )?;
    if let Some(path) = &args.out {
        writeln!(out, "transcript={}", path.display())?;
    }

    match &t.abort {
        None => Ok(ExitCode::SUCCESS),
        Some(AbortReason::QberAboveThreshold { qber, threshold }) => {
            writeln!(out, "aborted: QBER {qber:.4} > threshold {threshold:.4}")?;
            Ok(ExitCode::from(EXIT_ABORT))
        }
        Some(AbortReason::InsufficientSample { available, required }) => {
            writeln!(out, "aborted: {available} check bits < required {required}")?;
            Ok(ExitCode::from(EXIT_ABORT))
        }
    }
}

fn keyrate_curve(args: &CurveArgs, out: &mut impl Write) -> Result<ExitCode, CliError> {
    let points = export_curve(args.min, args.max, args.step)?;
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_curve_csv(&points, &mut buf)?;
            write_file(path, &buf)?;
            writeln!(out, "rows={}", points.len())?;
            writeln!(out, "out={}", path.display())?;
        }
        None => write_curve_csv(&points, out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn threshold(args: &ThresholdArgs, out: &mut impl Write) -> Result<ExitCode, CliError> {
    let q = find_threshold(args.tol)?;
    writeln!(out, "threshold={q:.4}")?;
    Ok(ExitCode::SUCCESS)
}

fn attack(seed: u64, args: &AttackArgs, out: &mut impl Write) -> Result<ExitCode, CliError> {
    if let Some(basis) = args.fake_photon {
        let strategy = match basis {
            FakeBasis::Z => AttackStrategy::FakePhotonZ,
            FakeBasis::X => AttackStrategy::FakePhotonX,
        };
        if args.trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        let config = SessionConfig {
            p_a: args.pa,
            p_b: args.pb,
            master_seed: seed,
            ..Default::default()
        };
        config.validate()?;
        writeln!(out, "attack={} trials={}", strategy.name(), args.trials)?;
        writeln!(out, "m,predicted,per_check,empirical")?;
        for &m in &args.m {
            let empirical = fake_photon_detection_frequency(&strategy, m, args.trials, &config)?;
            writeln!(
                out,
                "{m},{:.6},{:.6},{:.4}",
                fake_photon_detection_prob(m),
                fake_photon_detection_prob_per_check(m),
                empirical
            )?;
        }
        return Ok(ExitCode::SUCCESS);
    }

    let params = load_params(args.params.as_deref())?;
    let mut rng = stream(seed, SESSION_STREAM, Party::ThirdParty);
    let report = leakage_report(&params, args.samples, &mut rng)?;
    writeln!(out, "attack=collective")?;
    writeln!(out, "qber_ii={:.6}", report.qber_ii)?;
    writeln!(out, "qber_hh={:.6}", report.qber_hh)?;
    writeln!(out, "holevo_bits={:.6}", report.holevo_bits)?;
    writeln!(out, "holevo_ii={:.6}", report.holevo_ii)?;
    writeln!(out, "holevo_hh={:.6}", report.holevo_hh)?;
    writeln!(out, "guess_accuracy={:.4}", report.empirical_guess_accuracy)?;
    Ok(ExitCode::SUCCESS)
}

fn fraction(r: Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn efficiency(args: &EfficiencyArgs, out: &mut impl Write) -> Result<ExitCode, CliError> {
    if let Some(path) = &args.from_transcript {
        let doc = TranscriptDocument::from_json(&read_file(path)?)
            .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
        let q_t = 2 * doc.config.n_rounds;
        let b_s = doc.final_key_len as u64;
        writeln!(out, "qe_realized={b_s}/{q_t} ({})", b_s as f64 / q_t as f64)?;
        return Ok(ExitCode::SUCCESS);
    }
    let qe = theoretical_qubit_efficiency(args.pa, args.pb, args.check_fraction)?;
    let exact = Ratio::<i64>::approximate_float(qe)
        .ok_or_else(|| CliError(format!("cannot represent efficiency {qe}")))?;
    writeln!(out, "qe={} ({qe})", fraction(exact))?;
    Ok(ExitCode::SUCCESS)
}
