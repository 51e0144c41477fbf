use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Projection layers of one propagation step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepParams<S> {
    /// Question projection, `h x d`.
    pub wq: Matrix<S>,
    /// Relation projection, `h x d`.
    pub wr: Matrix<S>,
    /// Entity update over `[previous; aggregated]`, `2d x d`.
    pub we: Matrix<S>,
}

/// Everything the matching and propagation layers learn.
///
/// `steps[i]` drives propagation step `t = i + 2`; step 1 is initialisation
/// and owns only `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub steps: Vec<StepParams<S>>,
    /// Relation-to-entity initialisation, `h x d`.
    pub u: Matrix<S>,
    /// Scoring vector, length `d`.
    pub v: Vec<S>,
    hidden: usize,
    features: usize,
}

/// Model dimensions: `num_steps` (T), feature size `d`, encoder size `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub num_steps: usize,
    pub features: usize,
    pub hidden: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.num_steps == 0 || self.features == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

impl<S: Scalar> ModelParams<S> {
    pub fn zeros(dims: Dims) -> Self {
        let (h, d) = (dims.hidden, dims.features);
        let steps = (1..dims.num_steps)
            .map(|_| StepParams { wq: Matrix::zeros(h, d), wr: Matrix::zeros(h, d), we: Matrix::zeros(2 * d, d) })
            .collect();
        Self { steps, u: Matrix::zeros(h, d), v: vec![S::zero(); d], hidden: h, features: d }
    }

    /// Glorot-uniform initialisation of every block.
    pub fn random<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let (h, d) = (dims.hidden, dims.features);
        let steps = (1..dims.num_steps)
            .map(|_| StepParams {
                wq: Matrix::glorot(h, d, rng),
                wr: Matrix::glorot(h, d, rng),
                we: Matrix::glorot(2 * d, d, rng),
            })
            .collect();
        let u = Matrix::glorot(h, d, rng);
        let v = Matrix::<S>::glorot(d, 1, rng).as_slice().to_vec();
        Ok(Self { steps, u, v, hidden: h, features: d })
    }

    pub fn dims(&self) -> Dims {
        Dims { num_steps: self.num_steps(), features: self.features, hidden: self.hidden }
    }

    /// T, counting the initialisation step.
    pub fn num_steps(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, t: usize) -> Result<&StepParams<S>> {
        if t < 2 || t > self.num_steps() {
            return Err(Error::InvalidArgument(format!("step {t} outside 2..={}", self.num_steps())));
        }
        Ok(&self.steps[t - 2])
    }

    /// Parameter blocks in checkpoint order: `W_Q` for steps 2..T, then
    /// `W_R`, then `W_E`, then `U`, then `v`.
    pub fn blocks(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::with_capacity(3 * self.steps.len() + 2);
        out.extend(self.steps.iter().map(|s| s.wq.as_slice()));
        out.extend(self.steps.iter().map(|s| s.wr.as_slice()));
        out.extend(self.steps.iter().map(|s| s.we.as_slice()));
        out.push(self.u.as_slice());
        out.push(&self.v);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [S]> {
        let mut wq = Vec::new();
        let mut wr = Vec::new();
        let mut we = Vec::new();
        for s in &mut self.steps {
            wq.push(s.wq.as_mut_slice());
            wr.push(s.wr.as_mut_slice());
            we.push(s.we.as_mut_slice());
        }
        let mut out: Vec<&mut [S]> = Vec::with_capacity(3 * wq.len() + 2);
        out.extend(wq);
        out.extend(wr);
        out.extend(we);
        out.push(self.u.as_mut_slice());
        out.push(&mut self.v);
        out
    }

    /// Human-readable names matching [`Self::blocks`].
    pub fn block_names(&self) -> Vec<String> {
        let t = self.num_steps();
        let mut out = Vec::new();
        for prefix in ["W_Q", "W_R", "W_E"] {
            out.extend((2..=t).map(|s| format!("{prefix}^{s}")));
        }
        out.push("U".into());
        out.push("v".into());
        out
    }

    pub fn num_values(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x = S::zero());
        }
    }

    /// `self += scale * other`; shapes must agree.
    pub fn add_scaled(&mut self, other: &Self, scale: S) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims(), other.dims())));
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            steps: self
                .steps
                .iter()
                .map(|s| StepParams { wq: s.wq.cast(), wr: s.wr.cast(), we: s.we.cast() })
                .collect(),
            u: self.u.cast(),
            v: self.v.iter().map(|x| T::lit(x.as_f64())).collect(),
            hidden: self.hidden,
            features: self.features,
        }
    }
}
