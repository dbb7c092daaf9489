//! Criterion benchmarks for the grounding tools and metric scoring.
