//! Welch's t-test, Pearson's chi-square test and small summary helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use thiserror::Error;

pub const Z90: f64 = 1.645;
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample of size {0} is too small")]
    TooSmall(usize),
    #[error("both samples are constant with different values")]
    Degenerate,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("contingency table needs at least 2 rows and 2 columns with data, got {rows}x{cols}")]
    TableShape { rows: usize, cols: usize },
    #[error("contingency table rows have different lengths")]
    Ragged,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// mean(a) - mean(b)
    pub diff: f64,
    pub se: f64,
}

/// Two-sided Welch test with Satterthwaite degrees of freedom.
///
/// Two constant samples with equal means give `t = 0, p = 1`; with different
/// means the test is undefined.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall(s.len()));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Ok(WelchResult {
                t: 0.0,
                df: na + nb - 2.0,
                p: 1.0,
                diff,
                se: 0.0,
            });
        }
        return Err(StatsError::Degenerate);
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult {
        t,
        df,
        p,
        diff,
        se: se2.sqrt(),
    })
}

/// Two-sided quantile of Student's t, e.g. `t_quantile(0.95, df)`.
pub fn t_critical(level: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df is positive")
        .inverse_cdf(0.5 + level / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    /// Total count in the (collapsed) table.
    pub n: u64,
    /// Row and column indices dropped because their totals were zero.
    pub dropped_rows: Vec<usize>,
    pub dropped_cols: Vec<usize>,
}

/// Pearson chi-square test of homogeneity. Rows or columns with a zero total
/// would produce zero expected counts; they are dropped and reported.
pub fn chi_square_test(table: &[Vec<u64>]) -> Result<ChiSquareResult, StatsError> {
    let width = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != width) {
        return Err(StatsError::Ragged);
    }
    let row_sum = |r: usize| table[r].iter().sum::<u64>();
    let col_sum = |c: usize| table.iter().map(|r| r[c]).sum::<u64>();
    let (rows, dropped_rows): (Vec<usize>, Vec<usize>) = (0..table.len()).partition(|&r| row_sum(r) > 0);
    let (cols, dropped_cols): (Vec<usize>, Vec<usize>) = (0..width).partition(|&c| col_sum(c) > 0);
    if rows.len() < 2 || cols.len() < 2 {
        return Err(StatsError::TableShape {
            rows: rows.len(),
            cols: cols.len(),
        });
    }
    let n: u64 = rows.iter().map(|&r| row_sum(r)).sum();
    let mut chi2 = 0.0;
    for &r in &rows {
        for &c in &cols {
            let expected = row_sum(r) as f64 * col_sum(c) as f64 / n as f64;
            chi2 += (table[r][c] as f64 - expected).powi(2) / expected;
        }
    }
    let df = (rows.len() - 1) * (cols.len() - 1);
    let p = ChiSquared::new(df as f64).expect("df is positive").sf(chi2);
    Ok(ChiSquareResult {
        chi2,
        df,
        p,
        n,
        dropped_rows,
        dropped_cols,
    })
}

/// Significance marks: `+` p<.1, `*` p<.05, `**` p<.01, `***` p<.001.
pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => "+",
        _ => "",
    }
}
