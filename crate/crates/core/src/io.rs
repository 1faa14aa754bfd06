//! Shared text-format helpers.

/// Fixed 17-significant-digit scientific formatting used in every data file.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins already-formatted fields with commas.
pub(crate) fn csv_row<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f.as_ref());
    }
    out
}
