use crate::scalar::Scalar;

/// Adam with decoupled weight decay over a fixed list of parameter blocks.
#[derive(Clone, Debug)]
pub struct AdamW<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self { lr, beta1, beta2, eps, weight_decay, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: Vec<&mut [S]>, grads: Vec<&[S]>) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient block counts differ");
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![S::zero(); g.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let c1 = S::one() - b1.powi(self.step);
        let c2 = S::one() - b2.powi(self.step);
        let lr = S::lit(self.lr);
        let eps = S::lit(self.eps);
        let decay = S::lit(self.weight_decay);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (S::one() - b1) * g[i];
                v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                p[i] -= lr * (update + decay * p[i]);
            }
        }
    }
}
