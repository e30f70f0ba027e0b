//! End-to-end harness behaviour, including the directional timing checks.

use lil_core::bench::{measure_build, measure_lookups, run_multithreaded, BenchConfig, CacheMode};
use lil_core::datasets::{gen_lookups, generate, DatasetSpec, LookupMode};
use lil_core::radix_spline::RsIndex;
use lil_core::IndexSpec;

#[test]
fn cold_lookups_are_slower_than_warm() {
    std::env::remove_var("LIL_EVICT_MB");
    let d = generate(&DatasetSpec::lognormal(1_000_000, 11)).unwrap();
    let queries = gen_lookups(&d, 2_000, 12, LookupMode::ExistingKeys).queries;
    let index = "rs:32:18".parse::<IndexSpec>().unwrap().build(&d).unwrap();
    let warm = BenchConfig {
        repetitions: 3,
        ..BenchConfig::default()
    };
    let cold = BenchConfig {
        cache_mode: CacheMode::Cold { eviction_mb: 16 },
        ..warm
    };
    let w = measure_lookups(&index, &d, &queries, &warm).unwrap();
    let c = measure_lookups(&index, &d, &queries, &cold).unwrap();
    assert_eq!(w.checksum, c.checksum);
    assert!(
        c.avg_lookup_ns > w.avg_lookup_ns,
        "cold {} ns vs warm {} ns",
        c.avg_lookup_ns,
        w.avg_lookup_ns
    );
}

#[test]
fn single_thread_throughput_matches_latency() {
    let d = generate(&DatasetSpec::uniform(1_000_000, 13)).unwrap();
    let queries = gen_lookups(&d, 200_000, 14, LookupMode::ExistingKeys).queries;
    let index = "pgm:64".parse::<IndexSpec>().unwrap().build(&d).unwrap();
    let stats = measure_lookups(&index, &d, &queries, &BenchConfig::default()).unwrap();
    let implied = 1e9 / stats.avg_lookup_ns;
    let ratio = stats.throughput / implied;
    assert!(
        (0.8..=1.2).contains(&ratio),
        "throughput {} vs {implied}",
        stats.throughput
    );
}

#[test]
fn more_threads_give_more_throughput() {
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    if cores < 4 {
        eprintln!("skipping: {cores} cores available, 4 needed");
        return;
    }
    let d = generate(&DatasetSpec::lognormal(1_000_000, 15)).unwrap();
    let queries = gen_lookups(&d, 2_000_000, 16, LookupMode::ExistingKeys).queries;
    let index = "rmi:linear:linear:4096"
        .parse::<IndexSpec>()
        .unwrap()
        .build(&d)
        .unwrap();
    let best = |threads| {
        let cfg = BenchConfig {
            threads,
            ..BenchConfig::default()
        };
        (0..3)
            .map(|_| {
                run_multithreaded(&index, &d, &queries, &cfg)
                    .unwrap()
                    .throughput()
            })
            .fold(0.0, f64::max)
    };
    let (one, four) = (best(1), best(4));
    assert!(four >= one, "4 threads {four:.0}/s vs 1 thread {one:.0}/s");
}

#[test]
fn radix_spline_build_time_is_linear() {
    let small = generate(&DatasetSpec::lognormal(2_000_000, 17)).unwrap();
    let large = generate(&DatasetSpec::lognormal(4_000_000, 17)).unwrap();
    let time = |d| measure_build(7, || RsIndex::build(d, 32, 18)).unwrap().1 as f64;
    // warm the allocator and caches before timing
    time(&small);
    let ratio = time(&large) / time(&small);
    assert!(
        (1.5..=3.0).contains(&ratio),
        "2n/n build time ratio {ratio:.2}"
    );
}

#[test]
fn binary_baseline_builds_instantly() {
    let d = generate(&DatasetSpec::uniform(1_000_000, 18)).unwrap();
    let (_, ns) = measure_build(5, || IndexSpec::Binary.build(&d)).unwrap();
    assert!(ns < 100_000, "{ns} ns");
}
