//! Phase timing and operation counting across a ladder of problem sizes.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::cost::Phase;
use crate::error::{Error, Result};
use crate::masking::{apply_column_op, keygen, probgen, recover, OpKind};
use crate::matrix::{random_matrix, random_vector, Matrix};
use crate::meter::CostMeter;
use crate::regression::local_solve;
use crate::rng::derive_seed;
use crate::verifier::{verify, DEFAULT_TOLERANCE};
use crate::worker::compute;

/// Fixed CSV header for phase rows.
pub const CSV_HEADER: &str = "m,n,k,phase,rep,wall_ms,sm,as";
pub const OPS_CSV_HEADER: &str = "m,n,op,rep,wall_ms,sm,as";

/// Published size ladder: `m` from 2000 to 5500 in steps of 500, `n = m − 500`.
pub const FULL_LADDER: [(usize, usize); 8] =
    [(2000, 1500), (2500, 2000), (3000, 2500), (3500, 3000), (4000, 3500), (4500, 4000), (5000, 4500), (5500, 5000)];

/// Default linear down-scaling of [`FULL_LADDER`] for desk runs.
pub const DEFAULT_SCALE: usize = 4;

pub fn ladder(scale: usize) -> Vec<(usize, usize)> {
    let scale = scale.max(1);
    FULL_LADDER.iter().map(|&(m, n)| (m / scale, n / scale)).collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<(usize, usize)>,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    pub rounds: usize,
    pub phases: Vec<Phase>,
    /// Run repetitions on separate threads, each with its own meters.
    pub parallel: bool,
    /// Cycle through all sizes once per repetition instead of finishing one
    /// size before the next, so slow drift in machine load is shared across
    /// sizes. Always sequential; `parallel` is ignored.
    pub interleave: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: ladder(DEFAULT_SCALE),
            k: crate::masking::DEFAULT_OPS,
            reps: 20,
            seed: 0,
            rounds: 1,
            phases: Phase::ALL.to_vec(),
            parallel: false,
            interleave: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub phase: Phase,
    pub rep: usize,
    pub wall_ms: f64,
    pub sm: u64,
    #[serde(rename = "as")]
    pub assignments: u64,
}

fn timed<R>(phases: &[Phase], phase: Phase, rows: &mut Vec<(Phase, f64, CostMeter)>, f: impl FnOnce(&mut CostMeter) -> Result<R>) -> Result<R> {
    let mut meter = CostMeter::new();
    let start = Instant::now();
    let out = f(&mut meter)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    if phases.contains(&phase) {
        rows.push((phase, ms, meter));
    }
    Ok(out)
}

fn one_rep(cfg: &BenchConfig, size_idx: usize, m: usize, n: usize, rep: usize) -> Result<Vec<BenchRow>> {
    let base = derive_seed(cfg.seed, (size_idx as u64) << 32 | rep as u64);
    let x = random_matrix::<f64>(derive_seed(base, 0), m, n, -1.0, 1.0)?;
    let y = random_vector::<f64>(derive_seed(base, 1), m, -1.0, 1.0)?;
    let sk = keygen::<f64>(n, cfg.k, derive_seed(base, 2))?;
    let mut out = Vec::with_capacity(Phase::ALL.len());
    let ph = &cfg.phases;

    let mp = timed(ph, Phase::ProbGen, &mut out, |mt| probgen(&x, &sk, mt))?;
    let r_prime = timed(ph, Phase::Compute, &mut out, |mt| compute(&mp, mt))?;
    let report = timed(ph, Phase::Verify, &mut out, |mt| {
        verify(mp.x1(), mp.x2(), &r_prime, cfg.rounds, DEFAULT_TOLERANCE, derive_seed(base, 3), mt)
    })?;
    if !report.passed {
        return Err(Error::param(format!("honest result failed verification at {m}x{n}, rep {rep}")));
    }
    timed(ph, Phase::Recover, &mut out, |mt| recover(&sk, &r_prime, &y, mt))?;
    if ph.contains(&Phase::LocalSolve) {
        timed(ph, Phase::LocalSolve, &mut out, |mt| local_solve(&x, &y, mt))?;
    }

    Ok(out
        .into_iter()
        .map(|(phase, wall_ms, meter)| BenchRow {
            m,
            n,
            k: cfg.k,
            phase,
            rep,
            wall_ms,
            sm: meter.sm(),
            assignments: meter.assignments(),
        })
        .collect())
}

/// One row per (size, phase, repetition), in ladder order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps == 0 {
        return Err(Error::param("bench needs at least one repetition"));
    }
    for &(m, n) in &cfg.sizes {
        if m < n || n < 2 {
            return Err(Error::param(format!("bench size {m}x{n} needs m >= n >= 2")));
        }
    }
    let mut rows = Vec::new();
    if cfg.interleave {
        let mut per_size: Vec<Vec<BenchRow>> = vec![Vec::new(); cfg.sizes.len()];
        for rep in 0..cfg.reps {
            for (idx, &(m, n)) in cfg.sizes.iter().enumerate() {
                per_size[idx].extend(one_rep(cfg, idx, m, n, rep)?);
            }
        }
        rows.extend(per_size.into_iter().flatten());
        return Ok(rows);
    }
    for (idx, &(m, n)) in cfg.sizes.iter().enumerate() {
        let per_rep: Vec<Result<Vec<BenchRow>>> = if cfg.parallel {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..cfg.reps).map(|rep| s.spawn(move || one_rep(cfg, idx, m, n, rep))).collect();
                handles.into_iter().map(|h| h.join().expect("bench thread panicked")).collect()
            })
        } else {
            (0..cfg.reps).map(|rep| one_rep(cfg, idx, m, n, rep)).collect()
        };
        for r in per_rep {
            rows.extend(r?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write, S: Serialize>(rows: &[S], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aggregate over repetitions of one (size, phase).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub phase: Phase,
    pub reps: usize,
    pub mean_ms: f64,
    /// Sample standard deviation (n − 1 denominator); zero for a single rep.
    pub stddev_ms: f64,
    pub median_ms: f64,
    pub sm: u64,
    #[serde(rename = "as")]
    pub assignments: u64,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

pub fn summarize(rows: &[BenchRow]) -> Vec<PhaseSummary> {
    let mut keys: Vec<(usize, usize, usize, Phase)> = Vec::new();
    for r in rows {
        let key = (r.m, r.n, r.k, r.phase);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(m, n, k, phase)| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| (r.m, r.n, r.k, r.phase) == (m, n, k, phase)).collect();
            let times: Vec<f64> = group.iter().map(|r| r.wall_ms).collect();
            let count = times.len() as f64;
            let mean = times.iter().sum::<f64>() / count;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            PhaseSummary {
                m,
                n,
                k,
                phase,
                reps: times.len(),
                mean_ms: mean,
                stddev_ms: var.sqrt(),
                median_ms: median(&times),
                sm: group[0].sm,
                assignments: group[0].assignments,
            }
        })
        .collect()
}

/// Median client time (ProbGen + Recover) over median LocalSolve time for one size.
pub fn client_ratio(summaries: &[PhaseSummary], m: usize, n: usize) -> Option<f64> {
    let med = |p: Phase| summaries.iter().find(|s| s.m == m && s.n == n && s.phase == p).map(|s| s.median_ms);
    Some((med(Phase::ProbGen)? + med(Phase::Recover)?) / med(Phase::LocalSolve)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpTimingRow {
    pub m: usize,
    pub n: usize,
    pub op: &'static str,
    pub rep: usize,
    pub wall_ms: f64,
    pub sm: u64,
    #[serde(rename = "as")]
    pub assignments: u64,
}

/// Times a single elementary operation of each kind applied as a column
/// operation to an `m × n` matrix.
pub fn bench_elementary_ops(m: usize, n: usize, reps: usize, seed: u64) -> Result<Vec<OpTimingRow>> {
    let key = keygen::<f64>(n, crate::masking::MIN_OPS, seed)?;
    let mut rows = Vec::new();
    for rep in 0..reps {
        let x: Matrix<f64> = random_matrix(derive_seed(seed, rep as u64), m, n, -1.0, 1.0)?;
        for kind in OpKind::ALL {
            let op = key.p_ops().iter().find(|o| o.kind() == kind).expect("key has every kind");
            let input = x.clone();
            let mut meter = CostMeter::new();
            let start = Instant::now();
            let out = apply_column_op(input, op, &mut meter)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(out);
            rows.push(OpTimingRow { m, n, op: kind.name(), rep, wall_ms, sm: meter.sm(), assignments: meter.assignments() });
        }
    }
    Ok(rows)
}
