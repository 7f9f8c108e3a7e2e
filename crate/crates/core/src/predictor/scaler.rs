use crate::error::{Error, Result};

/// Columns with an interquartile range below this are passed through unchanged.
pub const PASS_THROUGH_IQR: f64 = 1e-12;

/// Per-column median/IQR scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustScaler {
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
}

/// Quantile `q` of ascending `sorted` with linear interpolation between order
/// statistics (position `q · (n − 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl RobustScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::input(format!(
                "scaler needs at least 2 samples, got {}",
                rows.len()
            )));
        }
        let width = rows[0].as_ref().len();
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::input("rows have different lengths"));
        }
        let mut median = Vec::with_capacity(width);
        let mut iqr = Vec::with_capacity(width);
        let mut column = vec![0.0; rows.len()];
        for j in 0..width {
            for (c, r) in column.iter_mut().zip(rows) {
                *c = r.as_ref()[j];
            }
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("column {j} has non-finite values")));
            }
            column.sort_by(f64::total_cmp);
            median.push(quantile_sorted(&column, 0.5));
            iqr.push(quantile_sorted(&column, 0.75) - quantile_sorted(&column, 0.25));
        }
        Ok(RobustScaler { median, iqr })
    }

    pub fn width(&self) -> usize {
        self.median.len()
    }

    pub fn is_pass_through(&self, j: usize) -> bool {
        self.iqr[j] < PASS_THROUGH_IQR
    }

    /// `(x − median) / IQR` per column; pass-through columns are copied.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.is_pass_through(j) {
                    v
                } else {
                    (v - self.median[j]) / self.iqr[j]
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.5), 2.5);
        assert_eq!(quantile_sorted(&x, 0.25), 1.75);
        assert_eq!(quantile_sorted(&x, 0.75), 3.25);
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
    }

    #[test]
    fn constant_column_passes_through() {
        let rows = vec![vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 5.0]];
        let s = RobustScaler::fit(&rows).unwrap();
        assert!(s.is_pass_through(0));
        assert!(!s.is_pass_through(1));
        assert_eq!(s.apply(&[7.0, 2.0])[0], 7.0);
    }

    #[test]
    fn too_few_rows() {
        assert!(RobustScaler::fit(&[vec![1.0]]).is_err());
        assert!(RobustScaler::fit::<Vec<f64>>(&[]).is_err());
    }
}
