//! SIREN-style coordinate MLP with a hand-derived backward pass.
//!
//! Layer rule, for a batch `X` of coordinates:
//!
//! ```text
//! h_0 = sin(omega_first  * (X   W_0^T + b_0))
//! h_l = sin(omega_hidden * (h_{l-1} W_l^T + b_l))     0 < l < hidden_layers
//! y   =                     h_{L-1} W_L^T + b_L        (linear output)
//! ```
//!
//! Parameters flatten layer-major, weights before bias, weights row-major.

use crate::error::{Error, Result};
use crate::math::{matmul, matmul_tn, Matrix, Rng};

/// Architecture of a sine-activated coordinate network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirenConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_width: usize,
    /// Number of sine layers; the network has `hidden_layers + 1` affine maps.
    pub hidden_layers: usize,
    pub omega_first: f64,
    pub omega_hidden: f64,
}

impl SirenConfig {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::InvalidArgument(format!(
                "network dimensions must be >= 1 (in {}, out {}, width {}, layers {})",
                self.in_dim, self.out_dim, self.hidden_width, self.hidden_layers
            )));
        }
        if !(self.omega_first > 0.0 && self.omega_hidden > 0.0)
            || !self.omega_first.is_finite()
            || !self.omega_hidden.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "frequency scales must be positive (first {}, hidden {})",
                self.omega_first, self.omega_hidden
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of every weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        shapes.push((self.hidden_width, self.in_dim));
        for _ in 1..self.hidden_layers {
            shapes.push((self.hidden_width, self.hidden_width));
        }
        shapes.push((self.out_dim, self.hidden_width));
        shapes
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    /// Frequency scale applied before the sine of layer `l`, `None` for the linear output.
    pub fn omega(&self, layer: usize) -> Option<f64> {
        match layer {
            0 => Some(self.omega_first),
            l if l < self.hidden_layers => Some(self.omega_hidden),
            _ => None,
        }
    }

    /// Flags each flattened parameter: `true` for bias entries.
    pub fn bias_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.param_count());
        for (r, c) in self.layer_shapes() {
            mask.extend(std::iter::repeat_n(false, r * c));
            mask.extend(std::iter::repeat_n(true, r));
        }
        mask
    }
}

impl Default for SirenConfig {
    fn default() -> Self {
        Self {
            in_dim: 2,
            out_dim: 1,
            hidden_width: 256,
            hidden_layers: 3,
            omega_first: 30.0,
            omega_hidden: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Network parameters. Gradients use the same type so their layout mirrors θ.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub config: SirenConfig,
    pub layers: Vec<Layer>,
}

/// Per-layer pre-activations and outputs retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Affine outputs `h W^T + b`, before the frequency scale and sine.
    pub pre: Vec<Matrix>,
    /// Layer outputs; the last entry is the network output.
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache is never empty")
    }
}

impl MlpParams {
    /// All-zero parameters for `config`.
    pub fn zeros(config: SirenConfig) -> Self {
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(r, c)| Layer {
                weight: Matrix::zeros(r, c),
                bias: vec![0.0; r],
            })
            .collect();
        Self { config, layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Layer-major, weights (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn unflatten(config: SirenConfig, v: &[f64]) -> Result<Self> {
        let d = config.param_count();
        if v.len() != d {
            return Err(Error::shape(
                "unflatten",
                format!("{d} parameters"),
                format!("{} values", v.len()),
            ));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(config.hidden_layers + 1);
        for (r, c) in config.layer_shapes() {
            let weight = Matrix::from_vec(r, c, v[offset..offset + r * c].to_vec())?;
            offset += r * c;
            let bias = v[offset..offset + r].to_vec();
            offset += r;
            layers.push(Layer { weight, bias });
        }
        Ok(Self { config, layers })
    }

    fn check_layout(&self) -> Result<()> {
        let shapes = self.config.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::shape(
                "MlpParams",
                format!("{} layers", shapes.len()),
                format!("{} layers", self.layers.len()),
            ));
        }
        for (layer, (r, c)) in self.layers.iter().zip(shapes) {
            if layer.weight.shape() != (r, c) || layer.bias.len() != r {
                return Err(Error::shape(
                    "MlpParams",
                    format!("{r}x{c} + {r}"),
                    format!("{} + {}", layer.weight.shape_str(), layer.bias.len()),
                ));
            }
        }
        Ok(())
    }
}

/// SIREN initialization: first layer `U(-1/in, 1/in)`, later layers
/// `U(-sqrt(6/fan_in)/omega_hidden, +sqrt(6/fan_in)/omega_hidden)`, zero biases.
///
/// Weights are drawn layer by layer in row-major order from one stream.
pub fn init_siren(config: SirenConfig, seed: u64) -> Result<MlpParams> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let mut params = MlpParams::zeros(config);
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let fan_in = layer.weight.cols() as f64;
        let bound = if l == 0 {
            1.0 / fan_in
        } else {
            (6.0 / fan_in).sqrt() / config.omega_hidden
        };
        for w in layer.weight.as_mut_slice() {
            *w = rng.uniform_range(-bound, bound);
        }
    }
    Ok(params)
}

/// Adds `bias` to every row.
fn add_bias(z: &mut Matrix, bias: &[f64]) {
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Batched forward pass; `coords` is `batch x in_dim`.
pub fn forward(params: &MlpParams, coords: &Matrix) -> Result<(Matrix, ForwardCache)> {
    params.check_layout()?;
    if coords.cols() != params.config.in_dim {
        return Err(Error::shape(
            "forward",
            format!("in_dim {}", params.config.in_dim),
            format!("coords {}", coords.shape_str()),
        ));
    }
    let depth = params.layers.len();
    let mut pre = Vec::with_capacity(depth);
    let mut post: Vec<Matrix> = Vec::with_capacity(depth);
    for (l, layer) in params.layers.iter().enumerate() {
        let input = if l == 0 { coords } else { &post[l - 1] };
        let mut z = matmul(input, &layer.weight.transpose())?;
        add_bias(&mut z, &layer.bias);
        let out = match params.config.omega(l) {
            Some(omega) => {
                let mut a = z.clone();
                for v in a.as_mut_slice() {
                    *v = (omega * *v).sin();
                }
                a
            }
            None => z.clone(),
        };
        pre.push(z);
        post.push(out);
    }
    let output = post.last().cloned().expect("at least one layer");
    Ok((output, ForwardCache { pre, post }))
}

/// Forward pass without retaining intermediates.
pub fn predict(params: &MlpParams, coords: &Matrix) -> Result<Matrix> {
    params.check_layout()?;
    if coords.cols() != params.config.in_dim {
        return Err(Error::shape(
            "predict",
            format!("in_dim {}", params.config.in_dim),
            format!("coords {}", coords.shape_str()),
        ));
    }
    let mut h = coords.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = matmul(&h, &layer.weight.transpose())?;
        add_bias(&mut z, &layer.bias);
        if let Some(omega) = params.config.omega(l) {
            for v in z.as_mut_slice() {
                *v = (omega * *v).sin();
            }
        }
        h = z;
    }
    Ok(h)
}

/// Mean over rows of the squared L2 residual norm.
pub fn mse_value(outputs: &Matrix, targets: &Matrix) -> Result<f64> {
    if outputs.shape() != targets.shape() {
        return Err(Error::shape("mse", outputs.shape_str(), targets.shape_str()));
    }
    if outputs.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let sum = outputs
        .as_slice()
        .iter()
        .zip(targets.as_slice())
        .fold(0.0, |acc, (y, t)| acc + (y - t) * (y - t));
    Ok(sum / outputs.rows() as f64)
}

/// Exact gradient of `(1/N) sum_i ||f(x_i) - y_i||^2` with respect to every parameter.
///
/// Returns the gradient in parameter layout together with the loss value.
pub fn backward_mse(
    params: &MlpParams,
    cache: &ForwardCache,
    coords: &Matrix,
    targets: &Matrix,
) -> Result<(MlpParams, f64)> {
    params.check_layout()?;
    let depth = params.layers.len();
    if cache.depth() != depth || cache.post.len() != depth {
        return Err(Error::shape(
            "backward_mse",
            format!("{depth} layers"),
            format!("cache depth {}", cache.depth()),
        ));
    }
    let output = cache.output();
    if output.rows() != coords.rows() || coords.cols() != params.config.in_dim {
        return Err(Error::shape(
            "backward_mse",
            format!("cache batch {}", output.rows()),
            format!("coords {}", coords.shape_str()),
        ));
    }
    for (l, layer) in params.layers.iter().enumerate() {
        if cache.pre[l].shape() != (coords.rows(), layer.weight.rows()) {
            return Err(Error::shape(
                "backward_mse",
                format!("layer {l} pre-activation {}x{}", coords.rows(), layer.weight.rows()),
                cache.pre[l].shape_str(),
            ));
        }
    }
    let loss = mse_value(output, targets)?;

    let scale = 2.0 / coords.rows() as f64;
    let mut delta = Matrix::zeros(output.rows(), output.cols());
    for ((d, y), t) in delta
        .as_mut_slice()
        .iter_mut()
        .zip(output.as_slice())
        .zip(targets.as_slice())
    {
        *d = scale * (y - t);
    }

    let mut grad = MlpParams::zeros(params.config);
    for l in (0..depth).rev() {
        let input = if l == 0 { coords } else { &cache.post[l - 1] };
        let g = &mut grad.layers[l];
        g.weight = matmul_tn(&delta, input)?;
        for r in 0..delta.rows() {
            for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                *b += d;
            }
        }
        if l == 0 {
            break;
        }
        let mut upstream = matmul(&delta, &params.layers[l].weight)?;
        let omega = params
            .config
            .omega(l - 1)
            .expect("every layer below the output is a sine layer");
        for (u, z) in upstream.as_mut_slice().iter_mut().zip(cache.pre[l - 1].as_slice()) {
            *u *= omega * (omega * z).cos();
        }
        delta = upstream;
    }
    Ok((grad, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::finite_difference_gradient;
    use crate::math::Rng;
    use proptest::prelude::*;

    fn small_config(width: usize, layers: usize) -> SirenConfig {
        SirenConfig {
            in_dim: 2,
            out_dim: 1,
            hidden_width: width,
            hidden_layers: layers,
            omega_first: 30.0,
            omega_hidden: 30.0,
        }
    }

    fn random_batch(rng: &mut Rng, n: usize, cols: usize) -> Matrix {
        Matrix::from_vec(n, cols, (0..n * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn init_shapes() {
        let p = init_siren(small_config(64, 3), 0).unwrap();
        let shapes: Vec<_> = p.layers.iter().map(|l| l.weight.shape()).collect();
        assert_eq!(shapes, vec![(64, 2), (64, 64), (64, 64), (1, 64)]);
        let biases: Vec<_> = p.layers.iter().map(|l| l.bias.len()).collect();
        assert_eq!(biases, vec![64, 64, 64, 1]);
        assert!(p.layers[0].weight.as_slice().iter().all(|w| w.abs() <= 0.5));
        let bound = (6.0_f64 / 64.0).sqrt() / 30.0;
        assert!(p.layers[1..]
            .iter()
            .all(|l| l.weight.as_slice().iter().all(|w| w.abs() <= bound)));
        assert!(p.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn init_deterministic() {
        let c = small_config(16, 2);
        assert_eq!(init_siren(c, 5).unwrap(), init_siren(c, 5).unwrap());
        assert_ne!(init_siren(c, 5).unwrap(), init_siren(c, 6).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = small_config(0, 1);
        assert!(init_siren(c, 0).is_err());
        c.hidden_width = 4;
        c.omega_first = 0.0;
        assert!(init_siren(c, 0).is_err());
    }

    #[test]
    fn param_count_arithmetic() {
        let c = small_config(4, 1);
        assert_eq!(c.param_count(), 17);
        assert_eq!(init_siren(c, 0).unwrap().flatten().len(), 17);
    }

    #[test]
    fn flatten_order() {
        let c = small_config(2, 1);
        let v: Vec<f64> = (0..c.param_count()).map(|i| i as f64).collect();
        let p = MlpParams::unflatten(c, &v).unwrap();
        assert_eq!(p.layers[0].weight.as_slice(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(p.layers[0].bias, vec![4.0, 5.0]);
        assert_eq!(p.layers[1].weight.as_slice(), &[6.0, 7.0]);
        assert_eq!(p.layers[1].bias, vec![8.0]);
        assert!(MlpParams::unflatten(c, &v[1..]).is_err());
        let mask = c.bias_mask();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 3);
        assert!(mask[4] && mask[5] && mask[8] && !mask[6]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(small_config(8, 2));
        let x = random_batch(&mut Rng::new(1), 5, 2);
        let (y, cache) = forward(&p, &x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(cache.depth(), 3);
    }

    #[test]
    fn single_unit_sine() {
        let c = SirenConfig {
            in_dim: 1,
            out_dim: 1,
            hidden_width: 1,
            hidden_layers: 1,
            omega_first: 1.0,
            omega_hidden: 1.0,
        };
        let p = MlpParams::unflatten(c, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        let x = Matrix::from_vec(1, 1, vec![std::f64::consts::FRAC_PI_2]).unwrap();
        let (y, _) = forward(&p, &x).unwrap();
        assert!((y.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_single_rows() {
        let p = init_siren(small_config(8, 2), 3).unwrap();
        let x = random_batch(&mut Rng::new(2), 3, 2);
        let (y, _) = forward(&p, &x).unwrap();
        for r in 0..3 {
            let xi = Matrix::from_vec(1, 2, x.row(r).to_vec()).unwrap();
            let (yi, _) = forward(&p, &xi).unwrap();
            assert_eq!(yi.row(0), y.row(r));
        }
        assert_eq!(predict(&p, &x).unwrap(), y);
    }

    #[test]
    fn forward_shape_mismatch() {
        let p = init_siren(small_config(4, 1), 0).unwrap();
        assert!(forward(&p, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let p = init_siren(small_config(8, 2), 4).unwrap();
        let x = random_batch(&mut Rng::new(5), 6, 2);
        let (y, cache) = forward(&p, &x).unwrap();
        let (g, loss) = backward_mse(&p, &cache, &x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_residual_quadruples_loss() {
        let p = init_siren(small_config(8, 2), 4).unwrap();
        let x = random_batch(&mut Rng::new(5), 6, 2);
        let (y, cache) = forward(&p, &x).unwrap();
        let offset = random_batch(&mut Rng::new(6), 6, 1);
        let shift = |k: f64| {
            let v = y
                .as_slice()
                .iter()
                .zip(offset.as_slice())
                .map(|(a, o)| a - k * o)
                .collect();
            Matrix::from_vec(6, 1, v).unwrap()
        };
        let (_, l1) = backward_mse(&p, &cache, &x, &shift(0.25)).unwrap();
        let (_, l2) = backward_mse(&p, &cache, &x, &shift(0.5)).unwrap();
        assert!((l2 - 4.0 * l1).abs() <= 1e-15 * l2);
    }

    #[test]
    fn stale_cache_rejected() {
        let p = init_siren(small_config(8, 2), 0).unwrap();
        let other = init_siren(small_config(4, 2), 0).unwrap();
        let x = random_batch(&mut Rng::new(1), 4, 2);
        let (y, cache) = forward(&other, &x).unwrap();
        assert!(backward_mse(&p, &cache, &x, &y).is_err());
    }

    /// Checks the analytic gradient against central differences, returning the
    /// worst per-coordinate relative error (with an absolute floor for tiny entries).
    pub(crate) fn gradient_check_error(seed: u64) -> f64 {
        let mut rng = Rng::new(seed);
        let config = SirenConfig {
            in_dim: 1 + rng.index(3),
            out_dim: 1 + rng.index(3),
            hidden_width: 1 + rng.index(8),
            hidden_layers: 1 + rng.index(3),
            omega_first: rng.uniform_range(1.0, 30.0),
            omega_hidden: rng.uniform_range(1.0, 30.0),
        };
        let n = 1 + rng.index(16);
        let p = init_siren(config, rng.next_u64()).unwrap();
        let x = random_batch(&mut rng, n, config.in_dim);
        let t = random_batch(&mut rng, n, config.out_dim);
        let (_, cache) = forward(&p, &x).unwrap();
        let (g, _) = backward_mse(&p, &cache, &x, &t).unwrap();
        let fd = finite_difference_gradient(
            |theta| {
                let q = MlpParams::unflatten(config, theta).unwrap();
                mse_value(&predict(&q, &x).unwrap(), &t).unwrap()
            },
            &p.flatten(),
            // At h = 1e-5 the oracle's own O(h² ω³) truncation error reaches
            // 1e-5 relative for ω = 30; 1e-6 keeps truncation and roundoff small.
            1e-6,
        )
        .unwrap();
        g.flatten()
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs() / b.abs().max(a.abs()).max(1e-3))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..50 {
            let err = gradient_check_error(seed);
            assert!(err < 1e-6, "seed {seed}: relative error {err}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn flatten_roundtrip(seed in any::<u64>(), width in 1usize..6, layers in 1usize..4) {
            let p = init_siren(small_config(width, layers), seed).unwrap();
            let q = MlpParams::unflatten(p.config, &p.flatten()).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn hidden_activations_bounded(seed in any::<u64>()) {
            let p = init_siren(small_config(6, 3), seed).unwrap();
            let x = random_batch(&mut Rng::new(seed ^ 1), 8, 2);
            let (_, cache) = forward(&p, &x).unwrap();
            for a in &cache.post[..3] {
                prop_assert!(a.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn permutation_invariant(seed in any::<u64>()) {
            let p = init_siren(small_config(6, 2), seed).unwrap();
            let x = random_batch(&mut Rng::new(seed ^ 2), 7, 2);
            let perm = [3usize, 0, 6, 1, 5, 2, 4];
            let y = predict(&p, &x).unwrap();
            let yp = predict(&p, &x.select_rows(&perm)).unwrap();
            prop_assert_eq!(yp, y.select_rows(&perm));
        }
    }
}
