//! Enumeration guards. `SA_LAB_GUARD` scales every guard limit, so oversized
//! runs are an explicit opt-in rather than a surprise.

/// Multiplier taken from the `SA_LAB_GUARD` environment variable (default 1).
pub fn guard_factor() -> u64 {
    std::env::var("SA_LAB_GUARD")
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .filter(|&f| f >= 1)
        .unwrap_or(1)
}

/// Applies the guard factor to a base limit, saturating.
pub fn limit(base: u64) -> u64 {
    base.saturating_mul(guard_factor())
}

/// Number of variables up to which truth-table style verification runs.
pub const TRUTH_TABLE_VARS: u64 = 24;
/// Number of variables up to which the refutation/pseudo-measure LPs build.
pub const LP_VARS: u64 = 8;
/// Pattern-graph label count for exhaustive graph enumeration.
pub const ENUM_LABELS: u64 = 6;
/// Tuple enumeration budget for naive character sums.
pub const NAIVE_TUPLES: u64 = 10_000_000;
/// Tuple enumeration budget for neighborhood scans.
pub const NEIGHBORHOOD_TUPLES: u64 = 10_000_000;
