//! Criterion benchmarks for the hot paths of `sonocl`; run with `cargo bench -p sonocl-bench`.
