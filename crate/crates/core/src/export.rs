//! CSV rendering of labeled matrices.

use crate::linalg::Matrix;

/// Square or rectangular matrix as CSV: a header of column labels after an
/// empty corner cell, then one labeled row per matrix row.
pub fn matrix_csv(rows: &[String], cols: &[String], m: &Matrix) -> String {
    assert_eq!((rows.len(), cols.len()), (m.nrows(), m.ncols()), "labels match the matrix shape");
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("").chain(cols.iter().map(String::as_str)).collect();
    w.write_record(&header).expect("csv write");
    for (i, label) in rows.iter().enumerate() {
        let mut record = vec![label.clone()];
        record.extend((0..m.ncols()).map(|j| format_value(m[(i, j)])));
        w.write_record(&record).expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

/// Shortest round-trip decimal; integral values print without a fraction.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{}", v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_labels_and_values() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.25, -0.0, 1.0]);
        let labels = vec!["a".to_string(), "b,c".to_string()];
        assert_eq!(matrix_csv(&labels, &labels, &m), ",a,\"b,c\"\na,1,0.25\n\"b,c\",0,1\n");
    }
}
