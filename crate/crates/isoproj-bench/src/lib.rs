//! Benchmarks live in `benches/`; see `cargo bench -p isoproj-bench`.
