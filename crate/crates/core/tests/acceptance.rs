//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! and the process exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use sapenum_core::analysis::{conjectured_mu, conjectured_xc2, estimate_xc2, fit_amplitudes, RealSeries};
use sapenum_core::engine::completion::{shadow_sweep, CompletionOracle};
use sapenum_core::engine::{enumerate, EnumerateOptions, Enumeration, SweepConfig};
use sapenum_core::modular::{crt_reconstruct, Moduli};
use sapenum_core::oracle::brute_force_series;
use sapenum_core::pruning::{prune_bound, BoundaryShape};
use sapenum_core::signature::unpack;
use sapenum_core::ExactSeries;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn record(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {id} {name}: {detail}");
        if !pass {
            self.failures.push(format!("{id} {name}"));
        }
    }
}

fn run(opts: EnumerateOptions) -> Enumeration {
    enumerate(&opts).expect("enumeration failed")
}

fn with(max_width: usize, f: impl FnOnce(&mut EnumerateOptions)) -> EnumerateOptions {
    let mut o = EnumerateOptions::new(max_width);
    f(&mut o);
    o
}

fn peak_entries(e: &Enumeration) -> usize {
    e.widths.iter().map(|w| w.peak_entries).max().unwrap_or(0)
}

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn oracle_agreement(r: &mut Report) {
    let t = Instant::now();
    let engine = run(EnumerateOptions::new(6)).exact;
    let oracle = brute_force_series(22).unwrap();
    let elapsed = t.elapsed();
    let mismatch = engine.first_mismatch(&oracle);
    let complete = (4..=22).step_by(2).all(|n| engine.get(n).is_some());
    r.record(
        "1",
        "oracle agreement to n = 22",
        mismatch.is_none() && complete && elapsed < Duration::from_secs(60),
        format!("first mismatch {mismatch:?}, {:.2} s", elapsed.as_secs_f64()),
    );
}

fn extension_consistency(r: &mut Report) {
    let series: Vec<ExactSeries> = (3..=8).map(|w| run(EnumerateOptions::new(w)).exact).collect();
    let mut bad = Vec::new();
    for (i, w) in (3..=7).enumerate() {
        let n = (4 * w - 2) as u32;
        if series[i + 1].truncated(n) != series[i] {
            bad.push(w);
        }
    }
    r.record(
        "2",
        "consistency under extension, wmax 3..7",
        bad.is_empty(),
        format!("inconsistent wmax {bad:?}"),
    );
}

fn pruning_soundness(r: &mut Report) {
    let mut unequal = Vec::new();
    for w in 2..=6 {
        let pruned = run(EnumerateOptions::new(w));
        let unpruned = run(with(w, |o| o.pruning = false));
        if pruned.exact != unpruned.exact || pruned.residues != unpruned.residues {
            unequal.push(w);
        }
    }
    let max_width = 6;
    let mut checked = 0usize;
    let mut violations = 0usize;
    for width in 2..=5 {
        let config = SweepConfig::new(width, max_width, Moduli::standard_prefix(1)).unwrap();
        let mut oracle = CompletionOracle::new(&config);
        shadow_sweep(&config, |site, key, _| {
            let sig = unpack(key, width + 1).unwrap();
            let bound =
                prune_bound(&sig, BoundaryShape::AfterRow(site.row), site.column as u32, width).unwrap();
            if let Some(cost) = oracle.minimal_completion(key, site) {
                checked += 1;
                if bound.total > cost {
                    violations += 1;
                }
            }
        });
    }
    r.record(
        "3",
        "pruning soundness",
        unequal.is_empty() && violations == 0 && checked > 0,
        format!("no-prune differs at wmax {unequal:?}; {violations} bound violations in {checked} signatures (W <= 5)"),
    );
}

fn determinism(r: &mut Report) {
    let render = |e: &Enumeration| {
        let mut s = e.exact.to_text(&[]);
        for res in &e.residues {
            s.push_str(&res.to_text(&[]));
        }
        s
    };
    let one = render(&run(EnumerateOptions::new(7)));
    let four = render(&run(with(7, |o| o.threads = 4)));
    r.record(
        "4",
        "determinism, 1 vs 4 threads at wmax 7",
        one == four,
        format!("{} bytes, identical = {}", one.len(), one == four),
    );
}

fn crt_vector(r: &mut Report) {
    let value: BigUint = "17076613429289025223970687974244417384681143572320"
        .parse()
        .unwrap();
    let moduli = Moduli::standard();
    let residues: Vec<_> = moduli
        .as_slice()
        .iter()
        .map(|&m| (m.reduce_big(&value), m))
        .collect();
    let back = crt_reconstruct(&residues).unwrap();
    r.record(
        "5",
        "CRT reconstruction of p_130",
        back == value,
        format!("reconstructed {back}"),
    );
}

fn kink_equivalence(r: &mut Report) {
    let mut bad = Vec::new();
    let mut peaks = Vec::new();
    for w in 2..=6 {
        let base = run(EnumerateOptions::new(w));
        let kink = run(with(w, |o| o.kink_simplification = true));
        let (pb, pk) = (peak_entries(&base), peak_entries(&kink));
        if base.exact != kink.exact || pk > pb {
            bad.push(w);
        }
        peaks.push(format!("{w}:{pb}->{pk}"));
    }
    r.record(
        "6",
        "kink simplification equivalence",
        bad.is_empty(),
        format!("failing wmax {bad:?}; peak entries {}", peaks.join(" ")),
    );
}

fn performance(r: &mut Report) -> ExactSeries {
    let t = Instant::now();
    let e = run(EnumerateOptions::new(17));
    let elapsed = t.elapsed();
    let rss = peak_rss_kib();
    let within_memory = rss.is_none_or(|k| k < 1024 * 1024);
    r.record(
        "7",
        "wmax 17 single-threaded under 10 min and 1 GB",
        elapsed < Duration::from_secs(600) && within_memory && e.exact.max_n() == Some(66),
        format!(
            "{:.1} s, peak RSS {} KiB, peak entries {}",
            elapsed.as_secs_f64(),
            rss.map_or("unknown".to_string(), |k| k.to_string()),
            peak_entries(&e)
        ),
    );
    e.exact
}

fn analysis(r: &mut Report, series: &ExactSeries) {
    let real = RealSeries::from_exact(series);
    let (xc2, diag) = estimate_xc2(&real).unwrap();
    let xc_ok = (xc2 - conjectured_xc2()).abs() < 1e-5;
    let mu = conjectured_mu();
    let mut amplitudes = Vec::new();
    for k in 4..=8 {
        let fit = fit_amplitudes(&real, mu, k, 66).unwrap();
        amplitudes.push(fit.amplitude());
    }
    let b_ok = amplitudes.iter().all(|b| (b - 0.56230129).abs() < 1e-4);
    let shown: Vec<String> = amplitudes.iter().map(|b| format!("{b:.8}")).collect();
    r.record(
        "8",
        "analysis of the n <= 66 series",
        xc_ok && b_ok,
        format!(
            "xc2 = {xc2:.13} (spread {:.1e}); B for k = 4..8: {}",
            diag.spread,
            shown.join(", ")
        ),
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters expect a listing, not a run
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut r = Report { failures: Vec::new() };
    oracle_agreement(&mut r);
    extension_consistency(&mut r);
    pruning_soundness(&mut r);
    determinism(&mut r);
    crt_vector(&mut r);
    kink_equivalence(&mut r);
    let series = performance(&mut r);
    analysis(&mut r, &series);
    println!(
        "[NOT REPRODUCIBLE] 9 full-scale tables: the n = 130 enumeration, timing ratios, \
         differential approximants and cluster load balance are out of desk scale"
    );
    if r.failures.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {:?}", r.failures);
        ExitCode::FAILURE
    }
}
