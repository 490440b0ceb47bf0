use std::ops::Range;

use crate::error::{Error, Result};
use crate::relevance::RelevanceMatrix;

/// `(rows+1) × (cols+1)` cumulative sums: `at(i, j)` is the sum of the
/// top-left `i × j` block of the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSumTable {
    rows: usize,
    cols: usize,
    table: Vec<f64>,
}

impl PrefixSumTable {
    pub fn new(t: &RelevanceMatrix) -> Self {
        Self::from_grid(t.rows(), t.cols(), t.data())
    }

    /// Builds the table from any row-major grid of finite values.
    pub fn from_grid(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols, "grid is not {rows}x{cols}");
        let stride = cols + 1;
        let mut table = vec![0.0; (rows + 1) * stride];
        for i in 0..rows {
            let mut row_acc = 0.0;
            for j in 0..cols {
                row_acc += values[i * cols + j];
                table[(i + 1) * stride + j + 1] = table[i * stride + j + 1] + row_acc;
            }
        }
        PrefixSumTable { rows, cols, table }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.table[i * (self.cols + 1) + j]
    }

    /// Sum over `rows × cols` (half-open ranges).
    pub fn window_sum(&self, rows: Range<usize>, cols: Range<usize>) -> Result<f64> {
        if rows.start > rows.end || rows.end > self.rows {
            return Err(Error::index(rows.end, format!("row range {rows:?} outside 0..{}", self.rows)));
        }
        if cols.start > cols.end || cols.end > self.cols {
            return Err(Error::index(cols.end, format!("column range {cols:?} outside 0..{}", self.cols)));
        }
        Ok(self.rect(rows.start, rows.end, cols.start, cols.end))
    }

    pub(crate) fn rect(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> f64 {
        self.at(i2, j2) - self.at(i1, j2) - self.at(i2, j1) + self.at(i1, j1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> RelevanceMatrix {
        RelevanceMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn integer_grid() {
        let p = PrefixSumTable::from_grid(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.at(2, 2), 10.0);
        assert_eq!(p.window_sum(0..2, 0..2).unwrap(), 10.0);
        assert_eq!(p.window_sum(1..1, 0..2).unwrap(), 0.0);
        assert_eq!(p.window_sum(1..2, 0..2).unwrap(), 7.0);
    }

    #[test]
    fn hand_sums() {
        let p = PrefixSumTable::new(&m(&[vec![1.0, 0.5], vec![-0.25, 1.0]]));
        assert_eq!(p.at(2, 2), 2.25);
        assert_eq!(p.window_sum(0..2, 0..2).unwrap(), 2.25);
        assert_eq!(p.window_sum(1..1, 0..2).unwrap(), 0.0);
        assert_eq!(p.window_sum(1..2, 0..2).unwrap(), 0.75);
    }

    #[test]
    fn degenerate_tables() {
        let p = PrefixSumTable::new(&RelevanceMatrix::from_vec(3, 0, vec![]).unwrap());
        assert!((0..=3).all(|i| p.at(i, 0) == 0.0));
        let p = PrefixSumTable::new(&m(&[vec![-1.0]]));
        assert_eq!(p.at(1, 1), -1.0);
        assert_eq!(p.at(0, 1), 0.0);
        assert_eq!(p.at(1, 0), 0.0);
    }

    #[test]
    fn out_of_range() {
        let p = PrefixSumTable::new(&m(&[vec![0.1, 0.2]]));
        assert!(matches!(p.window_sum(0..2, 0..1), Err(Error::Index { .. })));
        assert!(matches!(p.window_sum(0..1, 0..3), Err(Error::Index { .. })));
        #[allow(clippy::reversed_empty_ranges)]
        let bad = p.window_sum(1..0, 0..1);
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_sum(
            (rows, cols, data) in (1usize..10, 0usize..8).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), prop::collection::vec(-1.0f64..1.0, r * c))
            }),
            a in 0usize..10, b in 0usize..10, c in 0usize..8, d in 0usize..8,
        ) {
            let t = RelevanceMatrix::from_vec(rows, cols, data).unwrap();
            let p = PrefixSumTable::new(&t);
            let (i1, i2) = (a.min(b).min(rows), a.max(b).min(rows));
            let (j1, j2) = (c.min(d).min(cols), c.max(d).min(cols));
            let mut naive = 0.0;
            let mut mass = 0.0;
            for i in i1..i2 {
                for j in j1..j2 {
                    naive += t.get(i, j);
                    mass += t.get(i, j).abs();
                }
            }
            let fast = p.window_sum(i1..i2, j1..j2).unwrap();
            prop_assert!((fast - naive).abs() <= 1e-9 * mass.max(1.0));
        }
    }
}
