//! Small internal helpers shared across modules.

/// Canonical short string for an `f64` used in file names and report keys:
/// integral values render without a decimal point (`"-12"`, `"0"`), anything
/// else falls back to the shortest round-trip form (`"2.5"`).
pub(crate) fn float_key(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{}", v)
    }
}
