//! Plain CSV conventions shared by every report: comma separated, `.` decimal,
//! scientific notation with 16 significant digits.

/// Number formatting used in every CSV cell.
pub fn fmt(x: f64) -> String {
    format!("{x:.15e}")
}
