use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major covariate matrix; row `t` holds the covariates of day `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if cols == 0 {
            return Err(Error::Dimension("design needs at least one column".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged design rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept(n: usize) -> Self {
        Self {
            rows: n,
            cols: 1,
            data: vec![1.0; n],
        }
    }

    /// Rows `(1, t)` for `t = start .. start + n`.
    pub fn intercept_time(start: usize, n: usize) -> Self {
        let mut data = Vec::with_capacity(2 * n);
        for t in start..start + n {
            data.push(1.0);
            data.push(t as f64);
        }
        Self { rows: n, cols: 2, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    #[inline]
    pub fn row_dot(&self, t: usize, coef: &[f64]) -> f64 {
        self.row(t).iter().zip(coef).map(|(a, b)| a * b).sum()
    }

    /// `X * coef` as a vector.
    pub fn mul_vec(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|t| self.row_dot(t, coef)).collect()
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Which covariates a model uses; materialized into a [`Design`] for a given window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Intercept,
    #[default]
    InterceptTime,
}

impl DesignKind {
    pub fn build(self, start: usize, n: usize) -> Design {
        match self {
            DesignKind::Intercept => Design::intercept(n),
            DesignKind::InterceptTime => Design::intercept_time(start, n),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            DesignKind::Intercept => 1,
            DesignKind::InterceptTime => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Intercept => "intercept",
            DesignKind::InterceptTime => "intercept-time",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "intercept" => Ok(DesignKind::Intercept),
            "intercept-time" => Ok(DesignKind::InterceptTime),
            other => Err(Error::Config(format!("unknown design `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_time_rows() {
        let d = Design::intercept_time(3, 2);
        assert_eq!(d.row(0), &[1.0, 3.0]);
        assert_eq!(d.row(1), &[1.0, 4.0]);
        assert_eq!(d.mul_vec(&[2.0, 0.5]), vec![3.5, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Design::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
