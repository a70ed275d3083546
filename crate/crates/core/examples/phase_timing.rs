//! Prints median phase timings for one size: `phase_timing M N REPS`.

use vlr_core::bench::{client_ratio, run_bench, summarize, BenchConfig};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (m, n, reps) = match args.as_slice() {
        [m, n, reps] => (*m, *n, *reps),
        _ => (500, 400, 3),
    };
    let cfg = BenchConfig { sizes: vec![(m, n)], reps, ..BenchConfig::default() };
    let summaries = summarize(&run_bench(&cfg).expect("bench runs"));
    for s in &summaries {
        println!("{:<10} median {:>10.3} ms  sm {:>14}  as {:>10}", s.phase.name(), s.median_ms, s.sm, s.assignments);
    }
    println!("client/local ratio {:.4}", client_ratio(&summaries, m, n).unwrap());
}
