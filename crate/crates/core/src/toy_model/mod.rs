//! A small fully connected network from realified SLA sample covariances to
//! realified `m × m` matrices, with hand-written reverse-mode gradients.
//!
//! Layout: input `2·n·n` reals, two `tanh` hidden layers, linear output of
//! `2·m·m` reals reshaped as channel 0 = real part, channel 1 = imaginary
//! part, each channel row-major.

mod checkpoint;
mod dataset;
mod training;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{
    export_dataset_csv, generate_dataset, read_dataset, write_dataset, DatasetHeader, DatasetPair,
    DATASET_MAGIC, DATASET_VERSION, TRAINING_MIN_SEPARATION, TRAINING_RANGE, TRAINING_SNR_DB,
};
pub use training::{
    batch_loss_gradient, mean_loss, one_cycle_lr, train, train_step, EpochStats, Optimizer,
    StepOutcome, TrainConfig, TrainReport,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DoaError, Result};
use crate::linalg::{frob_norm, CMatrix};

/// Flattens a complex matrix into `[Re rows…, Im rows…]`.
pub fn realify(m: &CMatrix) -> Vec<f64> {
    let (p, q) = m.shape();
    let mut out = vec![0.0; 2 * p * q];
    for i in 0..p {
        for j in 0..q {
            out[i * q + j] = m[(i, j)].re;
            out[p * q + i * q + j] = m[(i, j)].im;
        }
    }
    out
}

/// Inverse of [`realify`] for a `p × q` matrix.
pub fn complexify(data: &[f64], p: usize, q: usize) -> Result<CMatrix> {
    if data.len() != 2 * p * q {
        return Err(DoaError::dims(
            format!("2x{p}x{q} = {}", 2 * p * q),
            data.len(),
        ));
    }
    Ok(CMatrix::from_fn(p, q, |i, j| {
        Complex64::new(data[i * q + j], data[p * q + i * q + j])
    }))
}

/// One affine layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Three dense layers with `tanh` after the first two.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    n: usize,
    m: usize,
    layers: Vec<Dense>,
    /// Divide each input covariance by its Frobenius norm before the first layer.
    normalize_input: bool,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: DVector<f64>,
    hidden: Vec<DVector<f64>>,
    output: DVector<f64>,
}

impl ForwardCache {
    /// The network output as the complex `m × m` matrix `E`.
    pub fn output_matrix(&self, m: usize) -> CMatrix {
        complexify(self.output.as_slice(), m, m).expect("output length fixed by construction")
    }
}

impl ToyModel {
    /// All-zero weights; the output is identically zero.
    pub fn zeros(n: usize, m: usize, hidden: [usize; 2]) -> Result<Self> {
        if n == 0 || m < 2 || hidden.contains(&0) {
            return Err(DoaError::domain(format!(
                "invalid model shape n = {n}, m = {m}, hidden = {hidden:?}"
            )));
        }
        let widths = [2 * n * n, hidden[0], hidden[1], 2 * m * m];
        Ok(Self {
            n,
            m,
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
            normalize_input: true,
        })
    }

    /// Gaussian weights with variance `1/fan_in`, zero biases.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        hidden: [usize; 2],
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Self::zeros(n, m, hidden)?;
        for layer in &mut model.layers {
            let std = 1.0 / (layer.inputs() as f64).sqrt();
            for w in layer.weights.iter_mut() {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(model)
    }

    /// Zero weights with the output bias set to `realify(e)`, so the model
    /// emits `e` for every input. Used to feed a known matrix through the
    /// downstream pipeline.
    pub fn constant(n: usize, e: &CMatrix, hidden: [usize; 2]) -> Result<Self> {
        let m = e.nrows();
        if e.ncols() != m {
            return Err(DoaError::dims(
                "square output",
                format!("{}x{}", e.nrows(), e.ncols()),
            ));
        }
        let mut model = Self::zeros(n, m, hidden)?;
        model.layers[2].bias = DVector::from_vec(realify(e));
        Ok(model)
    }

    pub(crate) fn from_parts(
        n: usize,
        m: usize,
        layers: Vec<Dense>,
        normalize_input: bool,
    ) -> Result<Self> {
        let ok = layers.len() == 3
            && layers[0].inputs() == 2 * n * n
            && layers[2].outputs() == 2 * m * m
            && layers.windows(2).all(|w| w[0].outputs() == w[1].inputs())
            && layers.iter().all(|l| l.bias.len() == l.outputs());
        if !ok {
            return Err(DoaError::Format(
                "layer shapes do not chain from 2n² to 2m²".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            layers,
            normalize_input,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.layers[0].outputs(), self.layers[1].outputs()]
    }

    pub fn normalize_input(&self) -> bool {
        self.normalize_input
    }

    pub fn set_normalize_input(&mut self, on: bool) {
        self.normalize_input = on;
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn input_vector(&self, rs: &CMatrix) -> Result<DVector<f64>> {
        if rs.shape() != (self.n, self.n) {
            return Err(DoaError::dims(
                format!("{0}x{0} input", self.n),
                format!("{}x{}", rs.nrows(), rs.ncols()),
            ));
        }
        let mut x = realify(rs);
        if self.normalize_input {
            let norm = frob_norm(rs);
            if norm > 0.0 {
                x.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(DVector::from_vec(x))
    }

    /// Forward pass on an `n × n` sample covariance, keeping activations.
    pub fn forward(&self, rs: &CMatrix) -> Result<ForwardCache> {
        let input = self.input_vector(rs)?;
        let mut hidden = Vec::with_capacity(2);
        let mut x = input.clone();
        for layer in &self.layers[..2] {
            x = (&layer.weights * &x + &layer.bias).map(f64::tanh);
            hidden.push(x.clone());
        }
        let last = &self.layers[2];
        let output = &last.weights * &x + &last.bias;
        Ok(ForwardCache {
            input,
            hidden,
            output,
        })
    }

    /// The network output `E` for an `n × n` sample covariance.
    pub fn predict(&self, rs: &CMatrix) -> Result<CMatrix> {
        Ok(self.forward(rs)?.output_matrix(self.m))
    }

    /// Parameter gradient given `G = ∂L/∂Re E + j ∂L/∂Im E` at the output.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &CMatrix) -> Gradients {
        let mut delta = DVector::from_vec(realify(grad_output));
        let mut grads: Vec<Dense> = Vec::with_capacity(3);
        for l in (0..3).rev() {
            let layer_input = if l == 0 {
                &cache.input
            } else {
                &cache.hidden[l - 1]
            };
            grads.push(Dense {
                weights: &delta * layer_input.transpose(),
                bias: delta.clone(),
            });
            if l > 0 {
                let back = self.layers[l].weights.tr_mul(&delta);
                // tanh' = 1 − tanh²
                delta = back.zip_map(&cache.hidden[l - 1], |g, h| g * (1.0 - h * h));
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }
}

/// Parameter gradients with the same shapes as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &ToyModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, c: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.zip_apply(&b.weights, |x, y| *x += c * y);
            a.bias.axpy(c, &b.bias, 1.0);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights *= c;
            l.bias *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.norm_squared() + l.bias.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_matrices::random_complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn realify_examples() {
        let id = CMatrix::identity(2, 2);
        assert_eq!(realify(&id), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let j_id = id.map(|z| z * Complex64::i());
        assert_eq!(realify(&j_id), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn realify_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for (p, q) in [(1, 1), (3, 5), (7, 7)] {
            let m = random_complex(&mut rng, p, q);
            assert_eq!(complexify(&realify(&m), p, q).unwrap(), m);
        }
        assert!(complexify(&[0.0; 5], 1, 2).is_err());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let model = ToyModel::zeros(4, 7, [8, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let e = model.predict(&random_complex(&mut rng, 4, 4)).unwrap();
        assert_eq!(e.shape(), (7, 7));
        assert!(e.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn input_shape_checked() {
        let model = ToyModel::zeros(4, 7, [8, 8]).unwrap();
        assert!(model.predict(&CMatrix::identity(5, 5)).is_err());
    }

    #[test]
    fn constant_model_emits_its_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let e = random_complex(&mut rng, 7, 7);
        let model = ToyModel::constant(4, &e, [3, 3]).unwrap();
        assert_eq!(model.predict(&random_complex(&mut rng, 4, 4)).unwrap(), e);
    }

    /// Directional derivative of `Re⟨G, f(W)⟩` against the reverse-mode
    /// parameter gradient, for a random direction over every parameter.
    #[test]
    fn jacobian_vector_products_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let model = ToyModel::random(4, 7, [6, 5], &mut rng).unwrap();
        let x = random_complex(&mut rng, 4, 4);
        let g = random_complex(&mut rng, 7, 7);
        let grads = model.backward(&model.forward(&x).unwrap(), &g);

        let mut direction = Gradients::zeros_like(&model);
        for l in &mut direction.layers {
            l.weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let analytic: f64 = grads
            .layers
            .iter()
            .zip(&direction.layers)
            .map(|(a, b)| a.weights.dot(&b.weights) + a.bias.dot(&b.bias))
            .sum();

        let objective = |step: f64| {
            let mut moved = model.clone();
            for (l, d) in moved.layers.iter_mut().zip(&direction.layers) {
                l.weights.zip_apply(&d.weights, |x, y| *x += step * y);
                l.bias.axpy(step, &d.bias, 1.0);
            }
            crate::linalg::frob_inner_re(&g, &moved.predict(&x).unwrap())
        };
        let h = 1e-5;
        let fd = (objective(h) - objective(-h)) / (2.0 * h);
        assert!(
            (fd - analytic).abs() <= 1e-5 * fd.abs().max(1.0),
            "{fd} vs {analytic}"
        );
    }
}
