//! Shared formatting for tabular and JSON outputs.

/// Round-trippable float: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}
