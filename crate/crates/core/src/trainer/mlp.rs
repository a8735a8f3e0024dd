use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer `y = x·W + b`, with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-limit..limit));
        Self { weight, bias: Array1::zeros(outputs) }
    }
}

/// Per-layer `(∂W, ∂b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl MlpGrads {
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    /// Whether the last layer is followed by the activation.
    pub activate_last: bool,
}

/// Layer inputs from a cached forward pass (`inputs[l]` feeds layer `l`) plus the output.
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

impl Mlp {
    /// `widths[0]` is the input dimension.
    pub fn new(widths: &[usize], activation: Activation, activate_last: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths.windows(2).map(|w| Dense::init(w[0], w[1], &mut rng)).collect();
        Self { layers, activation, activate_last }
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.activate_last
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(x).output
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> MlpCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = h.dot(&layer.weight) + &layer.bias;
            if self.activated(l) {
                let act = self.activation;
                next.mapv_inplace(|v| act.apply(v));
            }
            inputs.push(h);
            h = next;
        }
        MlpCache { inputs, output: h }
    }

    /// Parameter gradients and `∂L/∂x` given `∂L/∂output`.
    pub fn backward(&self, cache: &MlpCache, grad_output: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for l in (0..self.layers.len()).rev() {
            if self.activated(l) {
                let out = if l + 1 < self.layers.len() { &cache.inputs[l + 1] } else { &cache.output };
                let act = self.activation;
                Zip::from(&mut g).and(out).for_each(|gv, &y| *gv *= act.derivative_from_output(y));
            }
            let input = &cache.inputs[l];
            let dw = input.t().dot(&g);
            let db = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[l].weight.t());
            grads.push((dw, db));
        }
        grads.reverse();
        (MlpGrads { layers: grads }, g)
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weight (row-major) then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect()
    }
}

/// Encoder followed by the projector; the probe reads the encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub encoder: Mlp,
    pub projector: Mlp,
}

impl Branch {
    pub fn represent(&self, x: &Array2<f64>) -> Array2<f64> {
        self.encoder.forward(x)
    }

    pub fn embed(&self, x: &Array2<f64>) -> Array2<f64> {
        self.projector.forward(&self.encoder.forward(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn forward_by_hand() {
        let mut mlp = Mlp::new(&[2, 2, 1], Activation::Relu, false, 0);
        mlp.layers[0].weight = array![[1.0, -1.0], [2.0, 0.5]];
        mlp.layers[0].bias = array![0.0, 0.25];
        mlp.layers[1].weight = array![[3.0], [4.0]];
        mlp.layers[1].bias = array![-1.0];
        // hidden = relu([1 + 4, -1 + 1 + 0.25]) = [5, 0.25]; out = 15 + 1 - 1
        assert_eq!(mlp.forward(&array![[1.0, 2.0]]), array![[15.0]]);
    }

    #[test]
    fn flat_params_roundtrip() {
        let mlp = Mlp::new(&[3, 4, 2], Activation::Tanh, true, 5);
        let mut other = Mlp::new(&[3, 4, 2], Activation::Tanh, true, 6);
        assert_ne!(mlp, other);
        other.set_params_flat(&mlp.params_flat());
        assert_eq!(mlp, other);
        assert_eq!(mlp.param_count(), 3 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let mut mlp = Mlp::new(&[3, 5, 2], act, true, 11);
            let x = array![[0.3, -0.7, 1.1], [0.9, 0.2, -0.4], [-0.5, 0.8, 0.05]];
            let weights = array![[1.0, -2.0], [0.5, 0.25], [-1.5, 3.0]];
            let loss = |m: &Mlp| (&m.forward(&x) * &weights).sum();
            let cache = mlp.forward_cached(&x);
            let (grads, _) = mlp.backward(&cache, &weights);
            let analytic = grads.flat();
            let base = mlp.params_flat();
            for i in 0..base.len() {
                let mut p = base.clone();
                p[i] += 1e-6;
                mlp.set_params_flat(&p);
                let up = loss(&mlp);
                p[i] -= 2e-6;
                mlp.set_params_flat(&p);
                let down = loss(&mlp);
                let numeric = (up - down) / 2e-6;
                assert!((numeric - analytic[i]).abs() < 1e-6 * (1.0 + numeric.abs()), "{act:?} param {i}: {numeric} vs {}", analytic[i]);
            }
            mlp.set_params_flat(&base);
        }
    }
}
