//! `vlr`: file-based driver for the masked regression outsourcing protocol.
//!
//! Exit codes: 0 success or verified, 1 verification failed, 2 usage or
//! shape error, 3 singular input or no result.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use vlr_core::bench::{bench_elementary_ops, client_ratio, ladder, run_bench, summarize, write_csv, BenchConfig, DEFAULT_SCALE};
use vlr_core::cost::Phase;
use vlr_core::ledger::{AccountId, Ledger, LedgerError, Settlement};
use vlr_core::masking::{keygen, probgen, recover, DEFAULT_OPS};
use vlr_core::matrix::{random_matrix, random_vector};
use vlr_core::regression::local_solve;
use vlr_core::verifier::{verify, DEFAULT_ROUNDS, DEFAULT_TOLERANCE};
use vlr_core::worker::{compute_with_behavior, CloudBehavior};
use vlr_core::{CostMeter, Error, Matrix, SecretKey, Vector};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NO_RESULT: u8 = 3;

#[derive(Parser)]
#[command(name = "vlr", version, about = "Masked, verifiable outsourcing of linear-regression training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a secret key and write it as JSON.
    Keygen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_OPS)]
        k: usize,
        #[arg(long, env = "EFP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask a design matrix into X₁ and X₂.
    Mask {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out1: PathBuf,
        #[arg(long)]
        out2: PathBuf,
    },
    /// Play the worker: compute R′ from X₁ and X₂.
    Compute {
        #[arg(long)]
        in1: PathBuf,
        #[arg(long)]
        in2: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// honest | random:SEED | perturb:ROW,COL,DELTA | truncate:ROWS | silent
        #[arg(long, default_value = "honest")]
        adversary: Adversary,
    },
    /// Check a worker result against the public masked pair.
    Verify {
        #[arg(long)]
        in1: PathBuf,
        #[arg(long)]
        in2: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ROUNDS)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, env = "EFP_SEED", default_value_t = 0)]
        seed: u64,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Unmask a worker result and compute the regression weights.
    Recover {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole protocol through the escrow ledger on synthetic data.
    Demo {
        #[arg(long, default_value_t = 40)]
        m: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_OPS)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        fee: u64,
        #[arg(long, default_value_t = 100)]
        balance: u64,
        #[arg(long, default_value = "honest")]
        adversary: Adversary,
        #[arg(long, default_value_t = DEFAULT_ROUNDS)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, env = "EFP_SEED", default_value_t = 0)]
        seed: u64,
        /// Write the final ledger snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Time every protocol phase over a size ladder and emit CSV.
    Bench {
        /// Comma-separated MxN list, e.g. 500x400,1000x800. Overrides --scale.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<Size>,
        /// Divides the full 2000x1500..5500x5000 ladder; 1 runs it at full size.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: usize,
        #[arg(long, default_value_t = DEFAULT_OPS)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_ROUNDS)]
        rounds: usize,
        #[arg(long, env = "EFP_SEED", default_value_t = 0)]
        seed: u64,
        /// CSV path; written to stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also time each elementary-op kind and write those rows here.
        #[arg(long)]
        ops_csv: Option<PathBuf>,
        /// Run sizes on separate threads.
        #[arg(long)]
        parallel: bool,
        /// Cycle through all sizes once per repetition (sequential).
        #[arg(long)]
        interleave: bool,
    },
}

#[derive(Debug, Clone, Copy)]
enum Adversary {
    Behave(CloudBehavior),
    Silent,
}

impl FromStr for Adversary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("{s}: {e}"));
        let behavior = match kind {
            "honest" => CloudBehavior::Honest,
            "silent" => return Ok(Adversary::Silent),
            "random" => CloudBehavior::RandomResult { seed: num(arg)? },
            "truncate" => CloudBehavior::Truncated { keep_rows: num(arg)? as usize },
            "perturb" => {
                let parts: Vec<&str> = arg.split(',').collect();
                let [r, c, d] = parts[..] else {
                    return Err(format!("{s}: expected perturb:ROW,COL,DELTA"));
                };
                let delta = d.trim().parse::<f64>().map_err(|e| format!("{s}: {e}"))?;
                CloudBehavior::PerturbOne { row: num(r)? as usize, col: num(c)? as usize, delta }
            }
            _ => return Err(format!("unknown adversary {s:?}")),
        };
        Ok(Adversary::Behave(behavior))
    }
}

impl Display for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Adversary::Silent => f.write_str("silent"),
            Adversary::Behave(CloudBehavior::Honest) => f.write_str("honest"),
            Adversary::Behave(CloudBehavior::RandomResult { seed }) => write!(f, "random:{seed}"),
            Adversary::Behave(CloudBehavior::PerturbOne { row, col, delta }) => write!(f, "perturb:{row},{col},{delta}"),
            Adversary::Behave(CloudBehavior::Truncated { keep_rows }) => write!(f, "truncate:{keep_rows}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Size(usize, usize);

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (m, n) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected MxN, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{s}: {e}"));
        Ok(Size(parse(m)?, parse(n)?))
    }
}

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Display) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Singular { .. }) { EXIT_NO_RESULT } else { EXIT_USAGE };
        Failure { code, msg: e.to_string() }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure::usage(e)
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<Matrix, Failure> {
    read(path)?.parse().map_err(|e: Error| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_vector(path: &Path) -> Result<Vector, Failure> {
    read(path)?.parse().map_err(|e: Error| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_key(path: &Path) -> Result<SecretKey, Failure> {
    SecretKey::from_json(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keygen { n, k, seed, out } => cmd_keygen(n, k, seed, &out),
        Command::Mask { matrix, key, out1, out2 } => cmd_mask(&matrix, &key, &out1, &out2),
        Command::Compute { in1, in2, out, adversary } => cmd_compute(&in1, &in2, &out, adversary),
        Command::Verify { in1, in2, result, rounds, tol, seed, report } => {
            cmd_verify(&in1, &in2, &result, rounds, tol, seed, report.as_deref())
        }
        Command::Recover { key, result, y, out } => cmd_recover(&key, &result, &y, &out),
        Command::Demo { m, n, k, fee, balance, adversary, rounds, tol, seed, snapshot } => {
            let demo = Demo { m, n, k, fee, balance, adversary, rounds, tol, seed };
            cmd_demo(&demo, snapshot.as_deref())
        }
        Command::Bench { sizes, scale, k, reps, rounds, seed, csv, ops_csv, parallel, interleave } => {
            let sizes = if sizes.is_empty() { ladder(scale) } else { sizes.iter().map(|s| (s.0, s.1)).collect() };
            let cfg = BenchConfig { sizes, k, reps, seed, rounds, phases: Phase::ALL.to_vec(), parallel, interleave };
            cmd_bench(&cfg, csv.as_deref(), ops_csv.as_deref())
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_keygen(n: usize, k: usize, seed: u64, out: &Path) -> CmdResult {
    if k >= n {
        eprintln!("warning: k={k} ops per side on only n={n} columns");
    }
    let sk: SecretKey = keygen(n, k, seed)?;
    write(out, &sk.to_json())?;
    Ok(0)
}

fn cmd_mask(matrix: &Path, key: &Path, out1: &Path, out2: &Path) -> CmdResult {
    let x = read_matrix(matrix)?;
    let sk = read_key(key)?;
    let mp = probgen(&x, &sk, &mut CostMeter::new())?;
    write(out1, &mp.x1().to_text())?;
    write(out2, &mp.x2().to_text())?;
    Ok(0)
}

fn cmd_compute(in1: &Path, in2: &Path, out: &Path, adversary: Adversary) -> CmdResult {
    let mp = vlr_core::MaskedProblem::new(read_matrix(in1)?, read_matrix(in2)?)?;
    let Adversary::Behave(behavior) = adversary else {
        eprintln!("worker returned no result");
        return Ok(EXIT_NO_RESULT);
    };
    let r_prime = compute_with_behavior(&mp, behavior, &mut CostMeter::new())?;
    write(out, &r_prime.to_text())?;
    Ok(0)
}

fn cmd_verify(in1: &Path, in2: &Path, result: &Path, rounds: usize, tol: f64, seed: u64, report: Option<&Path>) -> CmdResult {
    let (x1, x2, r_prime) = (read_matrix(in1)?, read_matrix(in2)?, read_matrix(result)?);
    let rep = verify(&x1, &x2, &r_prime, rounds, tol, seed, &mut CostMeter::new())?;
    match report {
        Some(path) => write(path, &rep.to_json())?,
        None => println!("{}", rep.to_json()),
    }
    Ok(if rep.passed { 0 } else { EXIT_FAILED })
}

fn cmd_recover(key: &Path, result: &Path, y: &Path, out: &Path) -> CmdResult {
    let sk = read_key(key)?;
    let (_, omega) = recover(&sk, &read_matrix(result)?, &read_vector(y)?, &mut CostMeter::new())?;
    write(out, &omega.to_text())?;
    Ok(0)
}

struct Demo {
    m: usize,
    n: usize,
    k: usize,
    fee: u64,
    balance: u64,
    adversary: Adversary,
    rounds: usize,
    tol: f64,
    seed: u64,
}

fn cmd_demo(d: &Demo, snapshot: Option<&Path>) -> CmdResult {
    let mut out = Vec::new();
    run_demo(d, &mut out)?;
    let ledger = out.pop().expect("run_demo leaves the ledger last");
    if let Some(path) = snapshot {
        write(path, &ledger)?;
    }
    for line in out {
        println!("{line}");
    }
    Ok(0)
}

/// Fills `out` with transcript lines followed by the final snapshot JSON.
fn run_demo(d: &Demo, out: &mut Vec<String>) -> Result<(), Failure> {
    let Demo { m, n, k, fee, balance, adversary, rounds, tol, seed } = *d;
    out.push(format!("demo m={m} n={n} k={k} fee={fee} adversary={adversary} seed={seed}"));

    let x: Matrix = random_matrix(seed, m, n, -1.0, 1.0)?;
    let y: Vector = random_vector(seed.wrapping_add(1), m, -1.0, 1.0)?;
    let sk: SecretKey = keygen(n, k, seed.wrapping_add(2))?;
    let mut client_meter = CostMeter::new();
    let mp = probgen(&x, &sk, &mut client_meter)?;
    out.push(format!(
        "client: masked X ({m}x{n}) with {k} ops per side; X1 {}x{}, X2 {}x{} (sm={}, as={})",
        mp.x1().rows(),
        mp.x1().cols(),
        mp.x2().rows(),
        mp.x2().cols(),
        client_meter.sm(),
        client_meter.assignments()
    ));

    let (client, cloud) = (AccountId::from("client"), AccountId::from("cloud"));
    let mut ledger = Ledger::new();
    ledger.open_account(client.clone(), balance)?;
    ledger.open_account(cloud.clone(), balance)?;
    out.push(format!("ledger: opened {client}={balance} {cloud}={balance}"));
    let task = ledger.submit_task(&client, fee, mp.clone())?;
    out.push(format!("ledger: task {task} submitted, fee={fee}, escrow={}", ledger.escrow()));
    ledger.claim_task(&cloud, task)?;
    let deposit = ledger.task(task).expect("task exists").deposit;
    out.push(format!("ledger: task {task} claimed by {cloud}, deposit={deposit}, escrow={}", ledger.escrow()));

    let produced = match adversary {
        Adversary::Silent => None,
        Adversary::Behave(b) => match compute_with_behavior(&mp, b, &mut CostMeter::new()) {
            Ok(r) => Some(r),
            Err(e @ Error::Singular { .. }) => {
                out.push(format!("cloud: {e}"));
                None
            }
            Err(e) => return Err(e.into()),
        },
    };
    let settlement = match produced {
        None => {
            out.push("cloud: no result".to_string());
            ledger.report_no_result(task)?;
            ledger.task(task).and_then(|t| t.settlement.clone()).expect("settled")
        }
        Some(r_prime) => {
            out.push(format!("cloud: submitted {}x{} result", r_prime.rows(), r_prime.cols()));
            ledger.submit_result(task, &cloud, r_prime, rounds, tol, seed.wrapping_add(3))?
        }
    };
    match &settlement {
        Settlement::Verified { report } => out.push(format!(
            "verify: passed={} rounds={} max_residual={:.3e}",
            report.passed, report.rounds_run, report.max_residual
        )),
        Settlement::Malformed { reason } => out.push(format!("verify: malformed result ({reason})")),
        Settlement::NoResult => out.push("verify: nothing to verify".to_string()),
    }
    let t = ledger.task(task).expect("task exists");
    let payee = if settlement.flag() == 1 { &cloud } else { &client };
    out.push(format!(
        "ledger: flag={} status={} paid {} to {payee}",
        settlement.flag(),
        t.status.code(),
        t.service_fee + t.deposit
    ));
    let net = |id: &AccountId| ledger.balance(id).unwrap_or(0) as i64 - balance as i64;
    out.push(format!(
        "ledger: final {client}={} ({:+}) {cloud}={} ({:+}) escrow={}",
        ledger.balance(&client).unwrap_or(0),
        net(&client),
        ledger.balance(&cloud).unwrap_or(0),
        net(&cloud),
        ledger.escrow()
    ));

    if settlement.flag() == 1 {
        let r_prime = t.result.as_ref().expect("paid task keeps its result");
        let (_, omega) = recover(&sk, r_prime, &y, &mut CostMeter::new())?;
        let local = local_solve(&x, &y, &mut CostMeter::new())?;
        let diff = vlr_core::matrix::max_abs_diff_vec(&omega, &local)?;
        let rel = diff / local.norm_inf().max(f64::MIN_POSITIVE);
        out.push(format!("client: recovered omega, relative difference from local solve {rel:.1e}"));
    }
    out.push(ledger.snapshot().to_json());
    Ok(())
}

fn emit<S: serde::Serialize>(rows: &[S], path: Option<&Path>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(Failure::usage)?;
    match path {
        Some(p) => fs::write(p, buf).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(&buf).map_err(Failure::usage),
    }
}

fn cmd_bench(cfg: &BenchConfig, csv: Option<&Path>, ops_csv: Option<&Path>) -> CmdResult {
    if cfg.sizes.is_empty() || cfg.reps == 0 {
        return Err(Failure::usage("bench needs at least one size and one repetition"));
    }
    let rows = run_bench(cfg)?;
    emit(&rows, csv)?;

    let summary = summarize(&rows);
    eprintln!("{:>6} {:>6} {:<10} {:>12} {:>12} {:>12}", "m", "n", "phase", "mean_ms", "stddev_ms", "median_ms");
    for s in &summary {
        eprintln!(
            "{:>6} {:>6} {:<10} {:>12.3} {:>12.3} {:>12.3}",
            s.m,
            s.n,
            s.phase.name(),
            s.mean_ms,
            s.stddev_ms,
            s.median_ms
        );
    }
    for &(m, n) in &cfg.sizes {
        if let Some(r) = client_ratio(&summary, m, n) {
            eprintln!("{m}x{n}: client (ProbGen+Recover) / LocalSolve median time = {r:.4}");
        }
    }

    if let Some(path) = ops_csv {
        let mut op_rows = Vec::new();
        for (i, &(m, n)) in cfg.sizes.iter().enumerate() {
            op_rows.extend(bench_elementary_ops(m, n, cfg.reps, cfg.seed.wrapping_add(i as u64))?);
        }
        emit(&op_rows, Some(path))?;
    }
    Ok(0)
}
