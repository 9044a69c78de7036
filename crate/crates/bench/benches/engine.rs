use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sapenum_core::analysis::{estimate_xc2, RealSeries};
use sapenum_core::engine::{sweep_width, SweepConfig, SweepOptions};
use sapenum_core::modular::{Moduli, TruncatedPoly};
use sapenum_core::oracle::brute_force_series;
use sapenum_core::pruning::{prune_bound, BoundaryShape};
use sapenum_core::signature::{pack, unpack, Signature};
use sapenum_core::{enumerate, EnumerateOptions};

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep_width");
    g.sample_size(10);
    for &(w, wmax) in &[(6, 8), (8, 10)] {
        let config = SweepConfig::new(w, wmax, Moduli::standard_prefix(2)).unwrap();
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("W{w}_Wmax{wmax}")),
            &config,
            |b, cfg| b.iter(|| sweep_width(cfg, &SweepOptions::default()).unwrap()),
        );
    }
    g.finish();
}

fn full_enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate");
    g.sample_size(10);
    for wmax in [8, 10] {
        let prune = EnumerateOptions::new(wmax);
        g.bench_function(format!("wmax{wmax}"), |b| b.iter(|| enumerate(&prune).unwrap()));
        let kink = EnumerateOptions {
            kink_simplification: true,
            ..EnumerateOptions::new(wmax)
        };
        g.bench_function(format!("wmax{wmax}_kink"), |b| {
            b.iter(|| enumerate(&kink).unwrap())
        });
    }
    g.finish();
}

fn signatures(c: &mut Criterion) {
    let sig: Signature = "1011210200022".parse().unwrap();
    let key = pack(&sig);
    c.bench_function("pack_unpack", |b| b.iter(|| unpack(black_box(key), 13).unwrap()));
    c.bench_function("prune_bound", |b| {
        b.iter(|| prune_bound(black_box(&sig), BoundaryShape::AfterRow(5), 7, 12).unwrap())
    });
}

fn polynomials(c: &mut Criterion) {
    let moduli = Moduli::standard_prefix(2);
    let lanes = moduli.len();
    let src = TruncatedPoly::from_dense(10, lanes, (0..40 * lanes as u64).collect());
    c.bench_function("add_shifted_40_terms", |b| {
        b.iter(|| {
            let mut acc = TruncatedPoly::zero(lanes);
            for k in 0..8 {
                acc.add_shifted_unchecked(black_box(&src), k, 66, moduli.as_slice());
            }
            acc
        })
    });
}

fn oracle_and_analysis(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("n18", |b| b.iter(|| brute_force_series(18).unwrap()));
    g.finish();
    let series = RealSeries::from_exact(&enumerate(&EnumerateOptions::new(9)).unwrap().exact);
    c.bench_function("estimate_xc2_n34", |b| {
        b.iter(|| estimate_xc2(black_box(&series)).unwrap())
    });
}

criterion_group!(
    benches,
    sweep,
    full_enumeration,
    signatures,
    polynomials,
    oracle_and_analysis
);
criterion_main!(benches);
