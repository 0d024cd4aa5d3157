//! Criterion benchmarks for the assembly, solve and analysis stages live in `benches/`.
