/// Adam applied row by row. Moments are kept for every row, but a row is
/// only advanced when it receives a gradient; its bias correction uses its
/// own step count.
#[derive(Debug, Clone)]
pub struct SparseAdam {
    dim: usize,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: Vec<i32>,
}

impl SparseAdam {
    pub fn new(
        rows: usize,
        dim: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Self {
        SparseAdam {
            dim,
            learning_rate,
            beta1,
            beta2,
            eps,
            first: vec![0.0; rows * dim],
            second: vec![0.0; rows * dim],
            steps: vec![0; rows],
        }
    }

    /// Descends along `grad` for row `row` of the row-major `params`.
    pub fn update_row(&mut self, params: &mut [f64], row: usize, grad: &[f64]) {
        debug_assert_eq!(grad.len(), self.dim);
        self.steps[row] += 1;
        let t = self.steps[row];
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let base = row * self.dim;
        for (k, &g) in grad.iter().enumerate() {
            let i = base + k;
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn steps(&self, row: usize) -> i32 {
        self.steps[row]
    }
}
