use serde::{Deserialize, Serialize};

/// Sample moments of one column of the Z matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub x: f64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// √(variance / R).
    pub standard_error: f64,
    /// m₃ / m₂^{3/2} with central moments m_k.
    pub skewness: f64,
    /// m₄ / m₂² - 3.
    pub excess_kurtosis: f64,
}

impl PointSummary {
    pub fn from_column(x: f64, values: &[f64]) -> Self {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let variance = if r > 1.0 { m2 / (r - 1.0) } else { 0.0 };
        let (m2, m3, m4) = (m2 / r, m3 / r, m4 / r);
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            x,
            mean,
            variance,
            standard_error: (variance / r).sqrt(),
            skewness,
            excess_kurtosis,
        }
    }
}

/// Column `j` of a row-major R × J matrix.
pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|row| row[j]).collect()
}

/// Pearson correlation; zero when either column is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// J × J correlation matrix of the columns.
pub fn correlation_matrix(rows: &[Vec<f64>], j: usize) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..j).map(|k| column(rows, k)).collect();
    (0..j)
        .map(|a| {
            (0..j)
                .map(|b| if a == b { 1.0 } else { correlation(&cols[a], &cols[b]) })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_known_column() {
        let s = PointSummary::from_column(0.0, &[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(s.skewness.abs() < 1e-15);
        // m₂ = 1.25, m₄ = 2.5625.
        assert!((s.excess_kurtosis - (2.5625 / 1.5625 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn correlation_extremes() {
        let a = [1.0, 2.0, 3.0];
        assert!((correlation(&a, &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((correlation(&a, &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(correlation(&a, &[1.0, 1.0, 1.0]), 0.0);
    }
}
