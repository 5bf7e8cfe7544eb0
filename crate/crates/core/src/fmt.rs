//! Lossless text formatting of floating-point values and matrices.

use nalgebra::DMatrix;

/// Formats `x` with 17 significant digits so that parsing the text
/// recovers the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Row-major CSV of a matrix, one line per row.
pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn matrix_csv_layout() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let text = matrix_to_csv(&a);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        let parsed: Vec<f64> = rows[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![3.0, 4.0]);
    }
}
