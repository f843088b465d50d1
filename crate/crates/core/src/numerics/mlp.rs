use super::matrix::Matrix;
use super::prng::Prng;
use crate::error::{AslError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer, `y = act(x W + b)` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(AslError::shape("Layer::new", weight.cols(), bias.len()));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Per-instance feed-forward network. Every row of the input is processed
/// independently, like a temporal convolution with kernel size 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Gradients shaped like the layers of an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward`] for use in [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl MlpCache {
    pub fn rows(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(AslError::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(AslError::shape("Mlp::from_layers", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        Ok(Mlp { layers })
    }

    /// One ReLU hidden layer and a linear output layer. Weights are
    /// Xavier-uniform, biases zero.
    pub fn new(input: usize, hidden: usize, output: usize, prng: &mut Prng) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(AslError::Config(format!(
                "network dimensions must be positive, got {input}-{hidden}-{output}"
            )));
        }
        let h = Layer::new(xavier_init(prng, input, hidden), vec![0.0; hidden], Activation::Relu)?;
        let o = Layer::new(
            xavier_init(prng, hidden, output),
            vec![0.0; output],
            Activation::Identity,
        )?;
        Mlp::from_layers(vec![h, o])
    }

    /// Same topology with every parameter set to zero.
    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter tensors in a fixed order: weight then bias, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// All parameters concatenated in [`Mlp::tensors`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(AslError::shape("Mlp::set_flat", self.num_params(), values.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        if input.cols() != self.in_dim() {
            return Err(AslError::shape("mlp_forward", self.in_dim(), input.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let mut z = x.matmul(&layer.weight)?;
            z.add_row_vector(&layer.bias)?;
            let act = layer.activation;
            let y = z.map(|v| act.apply(v));
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        Ok((x, MlpCache { inputs, pre }))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Gradients of a scalar loss given its gradient w.r.t. the network
    /// output. Returns parameter gradients and the input gradient.
    pub fn backward(&self, cache: &MlpCache, output_grad: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if cache.pre.len() != self.layers.len() {
            return Err(AslError::shape(
                "mlp_backward cache layers",
                self.layers.len(),
                cache.pre.len(),
            ));
        }
        for (layer, (x, z)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.pre)) {
            if x.cols() != layer.in_dim() || z.cols() != layer.out_dim() || x.rows() != z.rows() {
                return Err(AslError::shape(
                    "mlp_backward cache",
                    format!("{}->{}", layer.in_dim(), layer.out_dim()),
                    format!("{}x{} -> {}x{}", x.rows(), x.cols(), z.rows(), z.cols()),
                ));
            }
        }
        let last = &cache.pre[cache.pre.len() - 1];
        if output_grad.shape() != last.shape() {
            return Err(AslError::shape(
                "mlp_backward output_grad",
                format!("{:?}", last.shape()),
                format!("{:?}", output_grad.shape()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[i];
            let act = layer.activation;
            let mut dz = upstream;
            for (g, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *g *= act.derivative(zv);
            }
            let dw = cache.inputs[i].t_matmul(&dz)?;
            let db = dz.column_sums();
            upstream = dz.matmul_t(&layer.weight)?;
            grads.push(LayerGrads { weight: dw, bias: db });
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, upstream))
    }
}

impl MlpGrads {
    pub fn zeros_for(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// `self += other`, element by element in a fixed order.
    pub fn accumulate(&mut self, other: &MlpGrads) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Xavier/Glorot uniform initialisation: entries uniform in
/// `±sqrt(6 / (fan_in + fan_out))` with `fan_in = rows`, `fan_out = cols`.
pub fn xavier_init(prng: &mut Prng, rows: usize, cols: usize) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| prng.uniform_in(-bound, bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}
