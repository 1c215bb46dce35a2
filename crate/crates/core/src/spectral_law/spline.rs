/// Natural cubic spline on a uniform grid x_k = start + k·step.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    start: f64,
    step: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Needs at least two values.
    pub fn uniform(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs two or more nodes");
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for M_{k-1} + 4 M_k + M_{k+1} = 6 Δ²y_k / h².
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|k| 6.0 * (values[k - 1] - 2.0 * values[k] + values[k + 1]) / (step * step))
                .collect();
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - second[i + 2]) / diag[i];
            }
        }
        Self {
            start,
            step,
            values,
            second,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamps x to the grid range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = ((x - self.start) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let t = s - k as f64;
        let u = 1.0 - t;
        let h2 = self.step * self.step / 6.0;
        u * self.values[k]
            + t * self.values[k + 1]
            + h2 * ((u * u * u - u) * self.second[k] + (t * t * t - t) * self.second[k + 1])
    }
}
