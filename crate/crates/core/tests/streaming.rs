//! Timing checks. Kept in one test so nothing else competes for the CPU.

use sareg::gaussian_kernel;
use sareg::sim::streaming_benchmark;

#[test]
fn cost_model() {
    let k = gaussian_kernel();
    let small = streaming_benchmark(1000, 101, &k).unwrap();
    let large = streaming_benchmark(2000, 101, &k).unwrap();
    let rec = large.recursive_seconds / small.recursive_seconds;
    let refit = large.refit_seconds / small.refit_seconds;
    assert!((1.4..=2.6).contains(&rec), "recursive time ratio {rec:.2}");
    assert!((2.8..=5.2).contains(&refit), "refit time ratio {refit:.2}");
    assert!(large.recursive_seconds < large.refit_seconds);

    let single = streaming_benchmark(2000, 1, &k).unwrap();
    assert!(single.recursive_seconds < large.recursive_seconds / 10.0);
    assert!(single.refit_seconds < large.refit_seconds / 10.0);
}
