//! Fully connected ReLU networks and the combinators used to assemble
//! indicator approximations: composition, sum, and pointwise maximum.
//!
//! A network is a chain of affine layers. Every layer but the last applies
//! ReLU; the last one is the identity. Depth counts all layers, size counts
//! hidden units only.

use crate::error::{input, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Dense affine map `x -> act(W x + b)` with row-major weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerWire", into = "LayerWire")]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct LayerWire {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    activation: Activation,
}

impl TryFrom<LayerWire> for AffineLayer {
    type Error = Error;
    fn try_from(w: LayerWire) -> Result<Self> {
        AffineLayer::new(w.weights, w.biases, w.activation)
    }
}

impl From<AffineLayer> for LayerWire {
    fn from(l: AffineLayer) -> Self {
        LayerWire {
            weights: l.weights.chunks(l.cols).map(|r| r.to_vec()).collect(),
            biases: l.biases,
            activation: l.activation,
        }
    }
}

impl AffineLayer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        let rows = weights.len();
        if rows == 0 {
            return input("layer must have at least one row");
        }
        let cols = weights[0].len();
        if weights.iter().any(|r| r.len() != cols) {
            return input("ragged weight matrix");
        }
        Self::from_flat(rows, cols, weights.concat(), biases, activation)
    }

    pub fn from_flat(
        rows: usize,
        cols: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return input("layer dimensions must be positive");
        }
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: weights.len() });
        }
        if biases.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: biases.len() });
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return input("layer parameters must be finite");
        }
        Ok(AffineLayer { rows, cols, weights, biases, activation })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.rows {
            let mut acc = self.biases[i];
            for (w, v) in self.row(i).iter().zip(x) {
                acc += w * v;
            }
            if self.activation == Activation::Relu && acc < 0.0 {
                acc = 0.0;
            }
            out.push(acc);
        }
    }

    /// `self ∘ other` for affine parts: weights `W_self W_other`,
    /// bias `W_self b_other + b_self`, keeping `self`'s activation.
    fn fuse_after(&self, other: &AffineLayer) -> AffineLayer {
        debug_assert_eq!(self.cols, other.rows);
        let (r, c) = (self.rows, other.cols);
        let mut w = vec![0.0; r * c];
        let mut b = self.biases.clone();
        for i in 0..r {
            for k in 0..self.cols {
                let a = self.weight(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for j in 0..c {
                    w[i * c + j] += a * orow[j];
                }
                b[i] += a * other.biases[k];
            }
        }
        AffineLayer { rows: r, cols: c, weights: w, biases: b, activation: self.activation }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    /// Number of affine layers, hidden plus output.
    pub depth: usize,
    /// Widest hidden layer; 0 for a purely affine network.
    pub width: usize,
    /// Total number of hidden units.
    pub size: usize,
}

/// Result of a combinator that may have to pad shallower operands.
#[derive(Clone, Debug)]
pub struct Combined {
    pub network: ReluNetwork,
    /// Hidden units spent on identity pass-through padding.
    pub padding_units: usize,
}

/// How to pass an output through extra ReLU layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    /// `y = relu(y) - relu(-y)`: two units per scalar per layer.
    Signed,
    /// `y = relu(y)`: one unit per scalar per layer. Only valid when the
    /// caller knows every output is non-negative on the whole input space.
    NonNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkWire", into = "NetworkWire")]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<AffineLayer>,
}

#[derive(Serialize, Deserialize)]
struct NetworkWire {
    input_dim: usize,
    layers: Vec<AffineLayer>,
}

impl TryFrom<NetworkWire> for ReluNetwork {
    type Error = Error;
    fn try_from(w: NetworkWire) -> Result<Self> {
        ReluNetwork::new(w.input_dim, w.layers)
    }
}

impl From<ReluNetwork> for NetworkWire {
    fn from(n: ReluNetwork) -> Self {
        NetworkWire { input_dim: n.input_dim, layers: n.layers }
    }
}

/// Reusable buffers for allocation-free evaluation in hot loops.
#[derive(Default, Clone, Debug)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ReluNetwork {
    pub fn new(input_dim: usize, layers: Vec<AffineLayer>) -> Result<Self> {
        if input_dim == 0 {
            return input("input_dim must be positive");
        }
        if layers.is_empty() {
            return input("network needs at least one layer");
        }
        let mut prev = input_dim;
        for (k, l) in layers.iter().enumerate() {
            if l.cols != prev {
                return Err(Error::DimensionMismatch { expected: prev, got: l.cols });
            }
            let want = if k + 1 == layers.len() { Activation::Identity } else { Activation::Relu };
            if l.activation != want {
                return input(format!("layer {k} must use {want:?} activation"));
            }
            prev = l.rows;
        }
        Ok(ReluNetwork { input_dim, layers })
    }

    /// Depth-1 network computing `W x + b`.
    pub fn affine(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let l = AffineLayer::new(weights, biases, Activation::Identity)?;
        let d = l.cols;
        ReluNetwork::new(d, vec![l])
    }

    /// Depth-1 identity map on `R^n`.
    pub fn identity(n: usize) -> Result<Self> {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        let l = AffineLayer::from_flat(n, n, w, vec![0.0; n], Activation::Identity)?;
        ReluNetwork::new(n, vec![l])
    }

    /// Scalar network that is identically zero, with one unit per hidden layer.
    pub fn zero(input_dim: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return input("depth must be at least 1");
        }
        let mut layers = Vec::with_capacity(depth);
        let mut cols = input_dim;
        for _ in 0..depth - 1 {
            layers.push(AffineLayer::from_flat(1, cols, vec![0.0; cols], vec![0.0], Activation::Relu)?);
            cols = 1;
        }
        layers.push(AffineLayer::from_flat(1, cols, vec![0.0; cols], vec![0.0], Activation::Identity)?);
        ReluNetwork::new(input_dim, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn size(&self) -> usize {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.rows).sum()
    }

    pub fn metrics(&self) -> NetworkMetrics {
        let hidden = &self.layers[..self.layers.len() - 1];
        NetworkMetrics {
            depth: self.layers.len(),
            width: hidden.iter().map(|l| l.rows).max().unwrap_or(0),
            size: hidden.iter().map(|l| l.rows).sum(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = Scratch::default();
        Ok(self.eval_with(x, &mut s)?.to_vec())
    }

    /// Evaluate a scalar-output network.
    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return input("eval_scalar needs a scalar-output network");
        }
        let mut s = Scratch::default();
        Ok(self.eval_with(x, &mut s)?[0])
    }

    pub fn eval_with<'a>(&self, x: &[f64], s: &'a mut Scratch) -> Result<&'a [f64]> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        s.a.clear();
        s.a.extend_from_slice(x);
        for l in &self.layers {
            l.apply_into(&s.a, &mut s.b);
            std::mem::swap(&mut s.a, &mut s.b);
        }
        Ok(&s.a)
    }

    /// `outer ∘ inner`, fusing the output layer of `inner` into the first
    /// layer of `outer`. Depth is `depth(inner) + depth(outer) - 1` and size
    /// is the sum of sizes.
    pub fn compose(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<ReluNetwork> {
        if inner.output_dim() != outer.input_dim {
            return Err(Error::Composition(format!(
                "inner output dim {} != outer input dim {}",
                inner.output_dim(),
                outer.input_dim
            )));
        }
        let mut layers: Vec<AffineLayer> = inner.layers[..inner.layers.len() - 1].to_vec();
        layers.push(outer.layers[0].fuse_after(inner.layers.last().unwrap()));
        layers.extend_from_slice(&outer.layers[1..]);
        ReluNetwork::new(inner.input_dim, layers)
    }

    /// Post-compose with the affine map `y -> scale * y + shift` on a scalar output.
    pub fn affine_output(&self, scale: f64, shift: f64) -> Result<ReluNetwork> {
        let a = ReluNetwork::affine(vec![vec![scale]], vec![shift])?;
        ReluNetwork::compose(&a, self)
    }

    /// Pass the output through extra layers until the depth equals `target`.
    /// Returns the padded network and the number of hidden units added.
    pub fn pad_to_depth(&self, target: usize, mode: PadMode) -> Result<(ReluNetwork, usize)> {
        let d = self.depth();
        if target < d {
            return input(format!("cannot pad depth {d} down to {target}"));
        }
        if target == d {
            return Ok((self.clone(), 0));
        }
        let m = self.output_dim();
        let extra = target - d;
        let last = self.layers.last().unwrap();
        let mut layers = self.layers[..d - 1].to_vec();
        match mode {
            PadMode::Signed => {
                let mut w = last.weights.clone();
                w.extend(last.weights.iter().map(|v| -v));
                let mut b = last.biases.clone();
                b.extend(last.biases.iter().map(|v| -v));
                layers.push(AffineLayer::from_flat(2 * m, last.cols, w, b, Activation::Relu)?);
                for _ in 1..extra {
                    let mut w = vec![0.0; 4 * m * m];
                    for i in 0..m {
                        w[i * 2 * m + i] = 1.0;
                        w[i * 2 * m + m + i] = -1.0;
                        w[(m + i) * 2 * m + i] = -1.0;
                        w[(m + i) * 2 * m + m + i] = 1.0;
                    }
                    layers.push(AffineLayer::from_flat(2 * m, 2 * m, w, vec![0.0; 2 * m], Activation::Relu)?);
                }
                let mut w = vec![0.0; 2 * m * m];
                for i in 0..m {
                    w[i * 2 * m + i] = 1.0;
                    w[i * 2 * m + m + i] = -1.0;
                }
                layers.push(AffineLayer::from_flat(m, 2 * m, w, vec![0.0; m], Activation::Identity)?);
                Ok((ReluNetwork::new(self.input_dim, layers)?, 2 * m * extra))
            }
            PadMode::NonNegative => {
                let mut relu_last = last.clone();
                relu_last.activation = Activation::Relu;
                layers.push(relu_last);
                let eye = |act| {
                    let mut w = vec![0.0; m * m];
                    for i in 0..m {
                        w[i * m + i] = 1.0;
                    }
                    AffineLayer::from_flat(m, m, w, vec![0.0; m], act)
                };
                for _ in 1..extra {
                    layers.push(eye(Activation::Relu)?);
                }
                layers.push(eye(Activation::Identity)?);
                Ok((ReluNetwork::new(self.input_dim, layers)?, m * extra))
            }
        }
    }

    /// Pointwise sum `f + g`. Operands of unequal depth are padded with the
    /// signed identity gadget; the padding cost is reported separately.
    pub fn add(f: &ReluNetwork, g: &ReluNetwork) -> Result<Combined> {
        Self::sum_all(&[f.clone(), g.clone()])
    }

    /// Pointwise sum of any number of networks sharing input and output dims.
    pub fn sum_all(nets: &[ReluNetwork]) -> Result<Combined> {
        let (padded, padding_units) = pad_all(nets)?;
        let network = stack(&padded, StackOut::Sum)?;
        Ok(Combined { network, padding_units })
    }

    /// Run networks side by side on the same input and concatenate outputs.
    pub fn parallel(nets: &[ReluNetwork]) -> Result<Combined> {
        let (padded, padding_units) = pad_all(nets)?;
        let network = stack(&padded, StackOut::Concat)?;
        Ok(Combined { network, padding_units })
    }

    /// Pointwise maximum of `m >= 2` scalar networks, reduced by a balanced
    /// binary tree of `max(a, b) = (a + b + |a - b|) / 2` gadgets.
    pub fn maximum(nets: &[ReluNetwork]) -> Result<Combined> {
        if nets.len() < 2 {
            return input("maximum needs at least two networks");
        }
        if nets.iter().any(|n| n.output_dim() != 1) {
            return input("maximum needs scalar-output networks");
        }
        let Combined { network, padding_units } = Self::parallel(nets)?;
        let mut layers = network.layers;
        let mut count = nets.len();
        while count > 1 {
            let pairs = count / 2;
            let odd = count % 2;
            let units = 4 * pairs + 2 * odd;
            let next = pairs + odd;
            // c: units x count, recombines the current outputs
            let mut c = vec![0.0; units * count];
            let mut g = vec![0.0; next * units];
            for p in 0..pairs {
                let (a, b) = (2 * p, 2 * p + 1);
                let u = 4 * p;
                c[u * count + a] = 1.0;
                c[u * count + b] = 1.0;
                c[(u + 1) * count + a] = -1.0;
                c[(u + 1) * count + b] = -1.0;
                c[(u + 2) * count + a] = 1.0;
                c[(u + 2) * count + b] = -1.0;
                c[(u + 3) * count + a] = -1.0;
                c[(u + 3) * count + b] = 1.0;
                g[p * units + u] = 0.5;
                g[p * units + u + 1] = -0.5;
                g[p * units + u + 2] = 0.5;
                g[p * units + u + 3] = 0.5;
            }
            if odd == 1 {
                let u = 4 * pairs;
                c[u * count + count - 1] = 1.0;
                c[(u + 1) * count + count - 1] = -1.0;
                g[pairs * units + u] = 1.0;
                g[pairs * units + u + 1] = -1.0;
            }
            let comb = AffineLayer::from_flat(units, count, c, vec![0.0; units], Activation::Relu)?;
            let last = layers.pop().unwrap();
            layers.push(comb.fuse_after(&last));
            layers.push(AffineLayer::from_flat(next, units, g, vec![0.0; next], Activation::Identity)?);
            count = next;
        }
        Ok(Combined { network: ReluNetwork::new(network.input_dim, layers)?, padding_units })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn pad_all(nets: &[ReluNetwork]) -> Result<(Vec<ReluNetwork>, usize)> {
    if nets.is_empty() {
        return input("need at least one network");
    }
    let depth = nets.iter().map(|n| n.depth()).max().unwrap();
    let mut total = 0;
    let mut out = Vec::with_capacity(nets.len());
    for n in nets {
        let (p, cost) = n.pad_to_depth(depth, PadMode::Signed)?;
        total += cost;
        out.push(p);
    }
    Ok((out, total))
}

#[derive(Clone, Copy, PartialEq)]
enum StackOut {
    Sum,
    Concat,
}

/// Block-diagonal stacking of equal-depth networks with a shared input.
fn stack(nets: &[ReluNetwork], out: StackOut) -> Result<ReluNetwork> {
    let d_in = nets[0].input_dim;
    let depth = nets[0].depth();
    if nets.iter().any(|n| n.input_dim != d_in) {
        return Err(Error::Composition("networks disagree on input dimension".into()));
    }
    if nets.iter().any(|n| n.depth() != depth) {
        return Err(Error::Composition("networks must have equal depth".into()));
    }
    if out == StackOut::Sum && nets.iter().any(|n| n.output_dim() != nets[0].output_dim()) {
        return Err(Error::Composition("networks disagree on output dimension".into()));
    }
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let parts: Vec<&AffineLayer> = nets.iter().map(|n| &n.layers[k]).collect();
        let last = k + 1 == depth;
        let act = parts[0].activation;
        let layer = if last && out == StackOut::Sum {
            // outputs add: concatenate horizontally (or add when depth 1)
            let rows = parts[0].rows;
            if k == 0 {
                let cols = d_in;
                let mut w = vec![0.0; rows * cols];
                let mut b = vec![0.0; rows];
                for p in &parts {
                    for (acc, v) in w.iter_mut().zip(&p.weights) {
                        *acc += v;
                    }
                    for (acc, v) in b.iter_mut().zip(&p.biases) {
                        *acc += v;
                    }
                }
                AffineLayer::from_flat(rows, cols, w, b, act)?
            } else {
                let cols: usize = parts.iter().map(|p| p.cols).sum();
                let mut w = vec![0.0; rows * cols];
                let mut b = vec![0.0; rows];
                let mut off = 0;
                for p in &parts {
                    for i in 0..rows {
                        w[i * cols + off..i * cols + off + p.cols].copy_from_slice(p.row(i));
                        b[i] += p.biases[i];
                    }
                    off += p.cols;
                }
                AffineLayer::from_flat(rows, cols, w, b, act)?
            }
        } else {
            let rows: usize = parts.iter().map(|p| p.rows).sum();
            let shared_input = k == 0;
            let cols: usize = if shared_input { d_in } else { parts.iter().map(|p| p.cols).sum() };
            let mut w = vec![0.0; rows * cols];
            let mut b = Vec::with_capacity(rows);
            let (mut r0, mut c0) = (0, 0);
            for p in &parts {
                for i in 0..p.rows {
                    let dst = (r0 + i) * cols + if shared_input { 0 } else { c0 };
                    w[dst..dst + p.cols].copy_from_slice(p.row(i));
                }
                b.extend_from_slice(&p.biases);
                r0 += p.rows;
                c0 += p.cols;
            }
            AffineLayer::from_flat(rows, cols, w, b, act)?
        };
        layers.push(layer);
    }
    ReluNetwork::new(d_in, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent interpreter over the wire format: nested vectors and
    /// explicit max(0, .) in plain loops.
    fn interpret(net: &ReluNetwork, x: &[f64]) -> Vec<f64> {
        let v: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        let mut cur: Vec<f64> = x.to_vec();
        for layer in v["layers"].as_array().unwrap() {
            let relu = layer["activation"] == "relu";
            let mut next = Vec::new();
            for (row, b) in layer["weights"].as_array().unwrap().iter().zip(layer["biases"].as_array().unwrap()) {
                let mut s = b.as_f64().unwrap();
                for (w, xi) in row.as_array().unwrap().iter().zip(&cur) {
                    s += w.as_f64().unwrap() * xi;
                }
                next.push(if relu { s.max(0.0) } else { s });
            }
            cur = next;
        }
        cur
    }

    pub(crate) fn random_net(rng: &mut ChaCha8Rng, input_dim: usize, widths: &[usize], out: usize) -> ReluNetwork {
        let mut layers = Vec::new();
        let mut cols = input_dim;
        for (k, &w) in widths.iter().chain(std::iter::once(&out)).enumerate() {
            let act = if k == widths.len() { Activation::Identity } else { Activation::Relu };
            let weights = (0..w * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let biases = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
            layers.push(AffineLayer::from_flat(w, cols, weights, biases, act).unwrap());
            cols = w;
        }
        ReluNetwork::new(input_dim, layers).unwrap()
    }

    fn abs_net() -> ReluNetwork {
        ReluNetwork::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], Activation::Relu).unwrap(),
                AffineLayer::new(vec![vec![1.0, 1.0]], vec![0.0], Activation::Identity).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_returns_input() {
        let id = ReluNetwork::identity(3).unwrap();
        assert_eq!(id.eval(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
        assert_eq!(id.metrics(), NetworkMetrics { depth: 1, width: 0, size: 0 });
    }

    #[test]
    fn abs_network() {
        let n = abs_net();
        assert_eq!(n.eval_scalar(&[-3.0]).unwrap(), 3.0);
        assert_eq!(n.eval_scalar(&[2.5]).unwrap(), 2.5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(abs_net().eval(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constructor_rejects_bad_activation_order() {
        let l = AffineLayer::new(vec![vec![1.0]], vec![0.0], Activation::Relu).unwrap();
        assert!(ReluNetwork::new(1, vec![l]).is_err());
    }

    #[test]
    fn random_three_layer_matches_interpreter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let net = random_net(&mut rng, 3, &[6, 4], 2);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = net.eval(&x).unwrap();
            let b = interpret(&net, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_layer_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = random_net(&mut rng, 2, &[5], 1);
        assert_eq!(n.metrics(), NetworkMetrics { depth: 2, width: 5, size: 5 });
    }

    #[test]
    fn max_of_two_size_three_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_net(&mut rng, 2, &[3], 1);
        let b = random_net(&mut rng, 2, &[3], 1);
        let m = ReluNetwork::maximum(&[a.clone(), b.clone()]).unwrap();
        assert!(m.network.size() <= 3 + 3 + 4 * 3);
        assert_eq!(m.network.size(), 3 + 3 + 4);
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let want = a.eval_scalar(&x).unwrap().max(b.eval_scalar(&x).unwrap());
            assert!((m.network.eval_scalar(&x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn maximum_rejects_single_network() {
        assert!(ReluNetwork::maximum(&[abs_net()]).is_err());
    }

    #[test]
    fn compose_dimension_check() {
        let a = ReluNetwork::identity(2).unwrap();
        assert!(matches!(ReluNetwork::compose(&abs_net(), &a), Err(Error::Composition(_))));
    }

    #[test]
    fn padding_costs() {
        let n = abs_net();
        let (p, cost) = n.pad_to_depth(4, PadMode::Signed).unwrap();
        assert_eq!((p.depth(), cost, p.size()), (4, 4, 6));
        let (q, cost) = n.pad_to_depth(4, PadMode::NonNegative).unwrap();
        assert_eq!((q.depth(), cost), (4, 2));
        for x in [-2.0, -0.5, 0.0, 1.25] {
            assert_eq!(p.eval_scalar(&[x]).unwrap(), n.eval_scalar(&[x]).unwrap());
            assert_eq!(q.eval_scalar(&[x]).unwrap(), n.eval_scalar(&[x]).unwrap());
        }
    }

    #[test]
    fn zero_network() {
        let z = ReluNetwork::zero(3, 4).unwrap();
        assert_eq!(z.depth(), 4);
        assert_eq!(z.eval_scalar(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn json_wire_format() {
        let s = abs_net().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["input_dim"], 1);
        assert_eq!(v["layers"][0]["activation"], "relu");
        assert_eq!(v["layers"][1]["activation"], "identity");
        assert_eq!(v["layers"][0]["weights"][1][0], -1.0);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_stable(seed in 0u64..10_000, w1 in 1usize..6, w2 in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(&mut rng, 3, &[w1, w2], 2);
            let back = ReluNetwork::from_json(&net.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &net);
        }

        #[test]
        fn compose_accounting(seed in 0u64..10_000, k1 in 0usize..3, k2 in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let wi: Vec<usize> = (0..k1).map(|_| rng.random_range(1..5)).collect();
            let wo: Vec<usize> = (0..k2).map(|_| rng.random_range(1..5)).collect();
            let inner = random_net(&mut rng, 2, &wi, 3);
            let outer = random_net(&mut rng, 3, &wo, 1);
            let c = ReluNetwork::compose(&outer, &inner).unwrap();
            prop_assert_eq!(c.depth(), k1 + k2 + 1);
            prop_assert_eq!(c.size(), inner.size() + outer.size());
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let want = interpret(&outer, &interpret(&inner, &x));
            prop_assert!((c.eval(&x).unwrap()[0] - want[0]).abs() <= 1e-9);
        }

        #[test]
        fn add_accounting(seed in 0u64..10_000, df in 1usize..4, dg in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let wf: Vec<usize> = (0..df - 1).map(|_| rng.random_range(1..5)).collect();
            let wg: Vec<usize> = (0..dg - 1).map(|_| rng.random_range(1..5)).collect();
            let f = random_net(&mut rng, 2, &wf, 1);
            let g = random_net(&mut rng, 2, &wg, 1);
            let s = ReluNetwork::add(&f, &g).unwrap();
            let pad = 2 * (df.max(dg) - df.min(dg));
            prop_assert_eq!(s.padding_units, pad);
            prop_assert_eq!(s.network.size(), f.size() + g.size() + pad);
            prop_assert_eq!(s.network.depth(), df.max(dg));
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let want = interpret(&f, &x)[0] + interpret(&g, &x)[0];
            prop_assert!((s.network.eval_scalar(&x).unwrap() - want).abs() <= 1e-9);
        }

        #[test]
        fn max_accounting(seed in 0u64..10_000, m in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nets: Vec<ReluNetwork> = (0..m).map(|_| {
                let w = rng.random_range(1..5);
                random_net(&mut rng, 2, &[w], 1)
            }).collect();
            let total: usize = nets.iter().map(|n| n.size()).sum();
            let r = ReluNetwork::maximum(&nets).unwrap();
            prop_assert_eq!(r.padding_units, 0);
            prop_assert!(r.network.size() <= total + 4 * (2 * m - 1));
            let levels = (m as f64).log2().ceil() as usize;
            prop_assert!(r.network.depth() <= 2 + levels + 1);
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let want = nets.iter().map(|n| interpret(n, &x)[0]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((r.network.eval_scalar(&x).unwrap() - want).abs() <= 1e-9);
        }
    }
}
