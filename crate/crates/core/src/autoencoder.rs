//! Fully connected autoencoder over a flat parameter vector.
//!
//! Parameter layout, layer by layer from the input: the weight matrix of layer
//! `l` is stored row-major with shape `d_l x d_{l+1}` (input unit major),
//! followed by its `d_{l+1}` biases. Encoder layers come first, so the
//! encoder parameters are a prefix of the vector and the decoder parameters
//! the remaining suffix.

use std::fmt;
use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Tanh => T::one() - a * a,
            Activation::Identity => T::one(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Layer widths `[d_0, ..., d_K]` with `d_0 = d_K`, the bottleneck at the
/// narrowest interior layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    layer_sizes: Vec<usize>,
    latent_index: usize,
    hidden: Activation,
    output: Activation,
}

impl Topology {
    /// Sigmoid on every layer.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        Self::with_activations(layer_sizes, Activation::Sigmoid, Activation::Sigmoid)
    }

    pub fn with_activations(
        layer_sizes: Vec<usize>,
        hidden: Activation,
        output: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "topology needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "zero-width layer in {layer_sizes:?}"
            )));
        }
        if layer_sizes[0] != *layer_sizes.last().unwrap() {
            return Err(Error::Config(format!(
                "input width {} differs from output width {}",
                layer_sizes[0],
                layer_sizes.last().unwrap()
            )));
        }
        let k = layer_sizes.len() - 1;
        let latent_index = if k == 1 {
            1
        } else {
            // narrowest interior layer; first one on ties
            (1..k).min_by_key(|&l| (layer_sizes[l], l)).unwrap()
        };
        Ok(Self {
            layer_sizes,
            latent_index,
            hidden,
            output,
        })
    }

    /// Parse `3-10-5-2-5-10-3` (also accepts commas).
    pub fn parse(spec: &str) -> Result<Vec<usize>> {
        spec.split(['-', ','])
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer width {s:?} in {spec:?}")))
            })
            .collect()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn latent_index(&self) -> usize {
        self.latent_index
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_sizes[self.latent_index]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    /// `Σ_l (d_l d_{l+1} + d_{l+1})`.
    pub fn total_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Number of leading parameters belonging to the encoder.
    pub fn encoder_params(&self) -> usize {
        self.layer_sizes[..=self.latent_index]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Offset of the weights of `layer` inside the parameter vector.
    fn offset(&self, layer: usize) -> usize {
        self.layer_sizes[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layer_view<'a, T>(
        &self,
        params: &'a [T],
        layer: usize,
    ) -> (ArrayView2<'a, T>, ArrayView1<'a, T>) {
        let (din, dout) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let off = self.offset(layer);
        let w = ArrayView2::from_shape((din, dout), &params[off..off + din * dout]).unwrap();
        let b = ArrayView1::from(&params[off + din * dout..off + din * dout + dout]);
        (w, b)
    }

    fn check(&self, params_len: usize, batch_cols: usize, expected_cols: usize) -> Result<()> {
        if params_len != self.total_params() {
            return Err(Error::Dimension(format!(
                "parameter vector has length {params_len}, topology needs {}",
                self.total_params()
            )));
        }
        if batch_cols != expected_cols {
            return Err(Error::Dimension(format!(
                "batch has {batch_cols} columns, layer expects {expected_cols}"
            )));
        }
        Ok(())
    }

    fn run_layers<T: Scalar>(
        &self,
        params: &[T],
        input: ArrayView2<'_, T>,
        layers: std::ops::Range<usize>,
    ) -> Vec<Array2<T>> {
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(input.to_owned());
        for l in layers {
            let (w, b) = self.layer_view(params, l);
            let act = self.activation(l);
            let mut z = acts.last().unwrap().dot(&w);
            z += &b;
            z.mapv_inplace(|v| act.apply(v));
            acts.push(z);
        }
        acts
    }

    /// Full forward pass, keeping every layer's activations.
    pub fn forward<T: Scalar>(
        &self,
        params: &[T],
        batch: ArrayView2<'_, T>,
    ) -> Result<ForwardResult<T>> {
        self.check(params.len(), batch.ncols(), self.input_dim())?;
        Ok(ForwardResult {
            activations: self.run_layers(params, batch, 0..self.n_layers()),
            latent_index: self.latent_index,
        })
    }

    /// Encoder half only: input to bottleneck activations.
    pub fn encode<T: Scalar>(&self, params: &[T], batch: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check(params.len(), batch.ncols(), self.input_dim())?;
        Ok(self
            .run_layers(params, batch, 0..self.latent_index)
            .pop()
            .unwrap())
    }

    /// Decoder half only: bottleneck activations to reconstruction.
    pub fn decode<T: Scalar>(&self, params: &[T], latent: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check(params.len(), latent.ncols(), self.latent_dim())?;
        Ok(self
            .run_layers(params, latent, self.latent_index..self.n_layers())
            .pop()
            .unwrap())
    }

    /// Sum of squared reconstruction errors over every instance and feature.
    pub fn loss<T: Scalar>(&self, params: &[T], batch: ArrayView2<'_, T>) -> Result<T> {
        let fwd = self.forward(params, batch)?;
        Ok(squared_error(fwd.reconstruction(), batch))
    }

    /// Per-entry mean squared error: `loss / (N * D)`.
    pub fn mse<T: Scalar>(&self, params: &[T], batch: ArrayView2<'_, T>) -> Result<T> {
        let loss = self.loss(params, batch)?;
        Ok(mean_of_sum(loss, batch))
    }

    /// Exact gradient of [`Topology::loss`] by backpropagation.
    pub fn gradient<T: Scalar>(&self, params: &[T], batch: ArrayView2<'_, T>) -> Result<Vec<T>> {
        Ok(self.loss_and_gradient(params, batch)?.1)
    }

    /// Loss and its gradient from a single forward pass.
    pub fn loss_and_gradient<T: Scalar>(
        &self,
        params: &[T],
        batch: ArrayView2<'_, T>,
    ) -> Result<(T, Vec<T>)> {
        let fwd = self.forward(params, batch)?;
        let acts = &fwd.activations;
        let k = self.n_layers();
        let two = T::one() + T::one();

        let out = &acts[k];
        let loss = squared_error(out.view(), batch);
        let out_act = self.activation(k - 1);
        let mut delta = Array2::from_shape_fn(out.raw_dim(), |(i, j)| {
            let a = out[[i, j]];
            two * (a - batch[[i, j]]) * out_act.derivative_from_output(a)
        });

        let mut grad = vec![T::zero(); params.len()];
        for l in (0..k).rev() {
            let (din, dout) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offset(l);
            let gw = acts[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            for (dst, &src) in grad[off..off + din * dout].iter_mut().zip(gw.iter()) {
                *dst = src;
            }
            for (dst, &src) in grad[off + din * dout..off + din * dout + dout]
                .iter_mut()
                .zip(gb.iter())
            {
                *dst = src;
            }
            if l > 0 {
                let (w, _) = self.layer_view(params, l);
                let act = self.activation(l - 1);
                let mut prev = delta.dot(&w.t());
                prev.zip_mut_with(&acts[l], |d, &a| *d *= act.derivative_from_output(a));
                delta = prev;
            }
        }
        Ok((loss, grad))
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.layer_sizes.iter().enumerate() {
            if i > 0 {
                f.write_char('-')?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

pub(crate) fn squared_error<T: Scalar>(recon: ArrayView2<'_, T>, target: ArrayView2<'_, T>) -> T {
    recon
        .iter()
        .zip(target.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

fn mean_of_sum<T: Scalar>(sum: T, batch: ArrayView2<'_, T>) -> T {
    let count = batch.len();
    if count == 0 {
        T::zero()
    } else {
        sum / T::of_usize(count)
    }
}

/// Activations of every layer for one batch.
#[derive(Debug, Clone)]
pub struct ForwardResult<T> {
    /// `activations[0]` is the input, `activations[K]` the reconstruction.
    pub activations: Vec<Array2<T>>,
    latent_index: usize,
}

impl<T> ForwardResult<T> {
    pub fn latent(&self) -> ArrayView2<'_, T> {
        self.activations[self.latent_index].view()
    }

    pub fn reconstruction(&self) -> ArrayView2<'_, T> {
        self.activations.last().unwrap().view()
    }
}

/// Flattened weights and biases of one autoencoder.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector<T>(pub Vec<T>);

impl<T: Scalar> ParamVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    /// I.i.d. `N(0, sd²)` entries.
    pub fn random<R: Rng + ?Sized>(len: usize, sd: T, rng: &mut R) -> Self {
        Self((0..len).map(|_| sd * T::standard_normal(rng)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> From<Vec<T>> for ParamVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T> Deref for ParamVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for ParamVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// First line of every parameter file.
pub const PARAMS_MAGIC: &str = "# ptbae-params v1";

/// Header naming the format version, scalar type and topology.
pub fn params_header<T: Scalar>(topology: &Topology) -> String {
    format!(
        "{PARAMS_MAGIC} scalar={} topology={topology} hidden={} output={}",
        T::NAME,
        topology.hidden_activation(),
        topology.output_activation()
    )
}

/// Parse a header written by [`params_header`] back into a topology.
pub fn parse_params_header(line: &str) -> Result<Topology> {
    let rest = line
        .strip_prefix(PARAMS_MAGIC)
        .ok_or_else(|| Error::Config(format!("not a parameter file header: {line:?}")))?;
    let mut sizes = None;
    let mut hidden = Activation::Sigmoid;
    let mut output = Activation::Sigmoid;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("topology", v)) => sizes = Some(Topology::parse(v)?),
            Some(("hidden", v)) => hidden = v.parse()?,
            Some(("output", v)) => output = v.parse()?,
            _ => {}
        }
    }
    let sizes = sizes.ok_or_else(|| Error::Config("parameter header lacks topology".into()))?;
    Topology::with_activations(sizes, hidden, output)
}

/// Single parameter vector as text: header line, then one comma-separated row.
pub fn write_params<T: Scalar>(path: &Path, topology: &Topology, params: &[T]) -> Result<()> {
    if params.len() != topology.total_params() {
        return Err(Error::Dimension(format!(
            "{} parameters for topology {topology} ({} expected)",
            params.len(),
            topology.total_params()
        )));
    }
    let mut out = params_header::<T>(topology);
    out.push('\n');
    push_row(&mut out, params);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_params<T: Scalar>(path: &Path) -> Result<(Topology, ParamVector<T>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let topology = parse_params_header(header).map_err(|e| Error::format(path, e.to_string()))?;
    let row = lines
        .next()
        .ok_or_else(|| Error::format(path, "missing parameter row"))?;
    let values: Vec<T> = crate::kv::parse_list(row)
        .map_err(|bad| Error::format(path, format!("bad parameter value {bad:?}")))?;
    if values.len() != topology.total_params() {
        return Err(Error::format(
            path,
            format!(
                "{} values, topology {topology} needs {}",
                values.len(),
                topology.total_params()
            ),
        ));
    }
    Ok((topology, ParamVector(values)))
}

pub(crate) fn push_row<T: fmt::Display>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn parameter_counts() {
        let swiss = Topology::new(vec![3, 10, 5, 2, 5, 10, 3]).unwrap();
        assert_eq!(swiss.total_params(), 215);
        assert_eq!(swiss.latent_index(), 3);
        assert_eq!(swiss.latent_dim(), 2);
        assert_eq!(Topology::new(vec![1, 1]).unwrap().total_params(), 2);
        let coil = Topology::new(vec![85, 70, 60, 50, 60, 70, 85]).unwrap();
        assert_eq!(coil.total_params(), 26695);
        let madelon = Topology::new(vec![500, 450, 400, 300, 400, 450, 500]).unwrap();
        assert_eq!(madelon.total_params(), 1_052_500);
    }

    #[test]
    fn invalid_topologies() {
        assert!(Topology::new(vec![3]).is_err());
        assert!(Topology::new(vec![3, 2, 4]).is_err());
        assert!(Topology::new(vec![3, 0, 3]).is_err());
        assert_eq!(
            Topology::parse("3-10-2-10-3").unwrap(),
            vec![3, 10, 2, 10, 3]
        );
        assert!(Topology::parse("3-x-3").is_err());
    }

    #[test]
    fn zero_params_give_half_everywhere() {
        let topo = Topology::new(vec![3, 4, 2, 4, 3]).unwrap();
        let params = vec![0.0; topo.total_params()];
        let batch = array![[0.3, 0.9, 0.1], [1.0, 0.0, 0.5]];
        let fwd = topo.forward(&params, batch.view()).unwrap();
        for a in &fwd.activations[1..] {
            assert!(a.iter().all(|&v| v == 0.5));
        }
        assert_eq!(fwd.latent().dim(), (2, 2));
        assert_eq!(fwd.reconstruction().dim(), (2, 3));
    }

    #[test]
    fn two_one_two_network_by_hand() {
        // layer 0: w (2x1) = [0.5, -1.0], b = [0.2]; layer 1: w (1x2) = [1.5, -0.7], b = [0.1, 0.3]
        let topo = Topology::new(vec![2, 1, 2]).unwrap();
        let params = [0.5, -1.0, 0.2, 1.5, -0.7, 0.1, 0.3];
        let x = [0.8, 0.3];
        let h = sig(0.5 * x[0] - 1.0 * x[1] + 0.2);
        let expected = [sig(1.5 * h + 0.1), sig(-0.7 * h + 0.3)];
        let fwd = topo.forward(&params, array![[x[0], x[1]]].view()).unwrap();
        assert_abs_diff_eq!(fwd.latent()[[0, 0]], h, epsilon = 1e-15);
        assert_abs_diff_eq!(fwd.reconstruction()[[0, 0]], expected[0], epsilon = 1e-15);
        assert_abs_diff_eq!(fwd.reconstruction()[[0, 1]], expected[1], epsilon = 1e-15);
        let loss = (x[0] - expected[0]).powi(2) + (x[1] - expected[1]).powi(2);
        assert_abs_diff_eq!(
            topo.loss(&params, array![[x[0], x[1]]].view()).unwrap(),
            loss,
            epsilon = 1e-15
        );
    }

    #[test]
    fn loss_examples() {
        let x = array![[1.0, 0.0]];
        let recon = array![[0.5, 0.5]];
        assert_eq!(squared_error(recon.view(), x.view()), 0.5);
        assert_eq!(squared_error(x.view(), x.view()), 0.0);
    }

    #[test]
    fn loss_matches_double_loop_and_mse_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let topo = Topology::new(vec![4, 3, 2, 3, 4]).unwrap();
        let params = ParamVector::<f64>::random(topo.total_params(), 0.7, &mut rng);
        let batch = Array2::from_shape_fn((6, 4), |_| rng.random::<f64>());
        let fwd = topo.forward(&params, batch.view()).unwrap();
        let recon = fwd.reconstruction();
        let mut brute = 0.0;
        for i in 0..6 {
            for j in 0..4 {
                brute += (batch[[i, j]] - recon[[i, j]]).powi(2);
            }
        }
        let loss = topo.loss(&params, batch.view()).unwrap();
        assert_abs_diff_eq!(loss, brute, epsilon = 1e-12);
        assert!((topo.mse(&params, batch.view()).unwrap() - loss / 24.0).abs() <= 1e-15);
    }

    #[test]
    fn forward_equals_decode_of_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topo = Topology::new(vec![5, 4, 2, 4, 5]).unwrap();
        let params = ParamVector::<f64>::random(topo.total_params(), 1.0, &mut rng);
        let batch = Array2::from_shape_fn((7, 5), |_| rng.random::<f64>());
        let fwd = topo.forward(&params, batch.view()).unwrap();
        let latent = topo.encode(&params, batch.view()).unwrap();
        assert_eq!(latent.view(), fwd.latent());
        let recon = topo.decode(&params, latent.view()).unwrap();
        assert_eq!(recon.view(), fwd.reconstruction());
        assert_eq!(topo.encoder_params(), 5 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn duplicated_rows_double_the_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let topo = Topology::new(vec![3, 2, 3]).unwrap();
        let params = ParamVector::<f64>::random(topo.total_params(), 0.5, &mut rng);
        let batch = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>());
        let doubled = ndarray::concatenate(Axis(0), &[batch.view(), batch.view()]).unwrap();
        let g1 = topo.gradient(&params, batch.view()).unwrap();
        let g2 = topo.gradient(&params, doubled.view()).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn perfect_reconstruction_is_stationary() {
        // Identity output layer, zero weights: reconstruction = bias, data = bias.
        let topo =
            Topology::with_activations(vec![2, 1, 2], Activation::Sigmoid, Activation::Identity)
                .unwrap();
        let mut params = vec![0.0; topo.total_params()];
        params[5] = 0.25;
        params[6] = 0.75;
        let batch = array![[0.25, 0.75], [0.25, 0.75]];
        assert_eq!(topo.loss(&params, batch.view()).unwrap(), 0.0);
        assert!(topo
            .gradient(&params, batch.view())
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let topo = Topology::new(vec![3, 2, 3]).unwrap();
        let params = vec![0.0; topo.total_params()];
        assert!(topo
            .forward(&params, Array2::<f64>::zeros((2, 4)).view())
            .is_err());
        assert!(topo
            .forward(&params[1..], Array2::<f64>::zeros((2, 3)).view())
            .is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let topo = Topology::new(vec![2, 1, 2]).unwrap();
        let params = vec![0.0f32; topo.total_params()];
        let batch = array![[1.0f32, 0.0]];
        assert_eq!(topo.loss(&params, batch.view()).unwrap(), 0.5f32);
    }

    #[test]
    fn params_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.csv");
        let topo = Topology::with_activations(vec![3, 2, 3], Activation::Tanh, Activation::Sigmoid)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ParamVector::<f64>::random(topo.total_params(), 0.1, &mut rng);
        write_params(&path, &topo, &params).unwrap();
        let (t2, p2) = read_params::<f64>(&path).unwrap();
        assert_eq!(t2, topo);
        assert_eq!(p2, params);
        assert!(write_params(&path, &topo, &params[1..]).is_err());
    }
}
