//! Fully connected networks with tanh hidden layers.
//!
//! Spatial derivatives (up to diagonal second order) come from forward jets;
//! parameter gradients come from running the same jet arithmetic on the
//! reverse [`Tape`](crate::tape::Tape). A pointwise path mirrors the batched
//! one for field evaluation and cross-checking.

use crate::activation::Activation;
use crate::error::{invalid, Error, Result};
use crate::jet::Jet2;
use crate::scalar::Scalar;
use crate::tape::{Grads, NodeId, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

/// Architecture of one network: `widths = [input, hidden..., output]`,
/// tanh hidden activation, configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec<T> {
    pub widths: Vec<usize>,
    pub output: Activation<T>,
}

impl<T: Scalar> MlpSpec<T> {
    pub fn new(widths: Vec<usize>, output: Activation<T>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("network needs at least input and output widths"));
        }
        if !(1..=3).contains(&widths[0]) {
            return Err(invalid("input dimension must be 1, 2 or 3"));
        }
        if *widths.last().unwrap() == 0 || widths.iter().any(|&w| w == 0) {
            return Err(invalid("layer widths must be positive"));
        }
        if let Activation::ScaledSigmoid(c) = output {
            if c <= T::zero() {
                return Err(invalid("scaled sigmoid bound must be positive"));
            }
        }
        Ok(Self { widths, output })
    }

    /// `n_l` hidden layers of width `n_r`.
    pub fn uniform(input: usize, n_l: usize, n_r: usize, out: usize, output: Activation<T>) -> Result<Self> {
        let mut widths = Vec::with_capacity(n_l + 2);
        widths.push(input);
        widths.extend(std::iter::repeat(n_r).take(n_l));
        widths.push(out);
        Self::new(widths, output)
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|p| (p[0] + 1) * p[1])
            .sum()
    }

    /// Flat ranges of layer `l`'s weight block (row-major `in x out`) and bias.
    pub fn layer_ranges(&self, l: usize) -> (Range<usize>, Range<usize>) {
        let mut offset = 0;
        for k in 0..l {
            offset += (self.widths[k] + 1) * self.widths[k + 1];
        }
        let w_len = self.widths[l] * self.widths[l + 1];
        let b_len = self.widths[l + 1];
        (offset..offset + w_len, offset + w_len..offset + w_len + b_len)
    }

    fn activation_of_layer(&self, l: usize) -> Activation<T> {
        if l + 1 == self.num_layers() {
            self.output
        } else {
            Activation::Tanh
        }
    }
}

/// Flat parameter storage; layout follows [`MlpSpec::layer_ranges`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    pub data: Vec<T>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn zeros(spec: &MlpSpec<T>) -> Self {
        Self {
            data: vec![T::zero(); spec.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Glorot-uniform weights (bound `sqrt(6/(fan_in+fan_out))`), zero biases,
/// reproducible from the seed.
pub fn init_params<T: Scalar>(spec: &MlpSpec<T>, seed: u64) -> ParamVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![T::zero(); spec.param_count()];
    for l in 0..spec.num_layers() {
        let (wr, _br) = spec.layer_ranges(l);
        let bound = (6.0 / (spec.widths[l] + spec.widths[l + 1]) as f64).sqrt();
        for slot in &mut data[wr] {
            *slot = T::of(rng.random_range(-bound..bound));
        }
        // biases stay zero
    }
    ParamVector { data }
}

/// Standard dense forward pass at one input point.
pub fn forward<T: Scalar>(params: &ParamVector<T>, spec: &MlpSpec<T>, input: &[T]) -> Result<Vec<T>> {
    if input.len() != spec.input_dim() {
        return Err(invalid(format!(
            "input length {} does not match network input dim {}",
            input.len(),
            spec.input_dim()
        )));
    }
    let mut a: Vec<T> = input.to_vec();
    for l in 0..spec.num_layers() {
        a = layer_pointwise(params, spec, l, &a, |z, act| act.deriv(z, 0));
    }
    Ok(a)
}

/// Forward pass carrying jets for the active input coordinates.
///
/// `active` lists input indices (at most two); `order` is 1 or 2 and controls
/// whether diagonal second partials are propagated.
pub fn forward_jet<T: Scalar>(
    params: &ParamVector<T>,
    spec: &MlpSpec<T>,
    input: &[T],
    active: &[usize],
    order: u8,
) -> Result<Vec<Jet2<T>>> {
    if input.len() != spec.input_dim() {
        return Err(invalid("input length does not match network input dim"));
    }
    if active.len() > crate::jet::MAX_ACTIVE || active.iter().any(|&a| a >= input.len()) {
        return Err(invalid("invalid active coordinate set"));
    }
    if !(1..=2).contains(&order) {
        return Err(invalid("jet order must be 1 or 2"));
    }
    let mut a: Vec<Jet2<T>> = input.iter().map(|&x| Jet2::constant(x)).collect();
    for (slot, &coord) in active.iter().enumerate() {
        a[coord] = Jet2::variable(input[coord], slot);
    }
    for l in 0..spec.num_layers() {
        let act = spec.activation_of_layer(l);
        let (wr, br) = spec.layer_ranges(l);
        let w = &params.data[wr];
        let b = &params.data[br];
        let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
        let mut next = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut z = Jet2::constant(b[j]);
            for i in 0..n_in {
                z = z.add(a[i].scale(w[i * n_out + j]));
            }
            next.push(z.activate(act));
        }
        a = next;
    }
    Ok(a)
}

fn layer_pointwise<T: Scalar>(
    params: &ParamVector<T>,
    spec: &MlpSpec<T>,
    l: usize,
    a: &[T],
    apply: impl Fn(T, Activation<T>) -> T,
) -> Vec<T> {
    let act = spec.activation_of_layer(l);
    let (wr, br) = spec.layer_ranges(l);
    let w = &params.data[wr];
    let b = &params.data[br];
    let (n_in, n_out) = (spec.widths[l], spec.widths[l + 1]);
    (0..n_out)
        .map(|j| {
            let mut z = b[j];
            for i in 0..n_in {
                z += w[i * n_out + j] * a[i];
            }
            apply(z, act)
        })
        .collect()
}

/// Network parameters registered on a tape.
pub struct TapeNet {
    pub w: Vec<NodeId>,
    pub b: Vec<NodeId>,
}

/// Register weights and biases as differentiable tape leaves.
pub fn push_net<T: Scalar>(tape: &mut Tape<T>, spec: &MlpSpec<T>, params: &ParamVector<T>) -> TapeNet {
    let mut w = Vec::with_capacity(spec.num_layers());
    let mut b = Vec::with_capacity(spec.num_layers());
    for l in 0..spec.num_layers() {
        let (wr, br) = spec.layer_ranges(l);
        let wm = Array2::from_shape_vec(
            (spec.widths[l], spec.widths[l + 1]),
            params.data[wr].to_vec(),
        )
        .expect("weight shape");
        let bm = Array2::from_shape_vec((1, spec.widths[l + 1]), params.data[br].to_vec())
            .expect("bias shape");
        w.push(tape.param(wm));
        b.push(tape.param(bm));
    }
    TapeNet { w, b }
}

/// Output of a batched jet forward: node ids for value and derivative columns
/// (aligned with the `active` list).
pub struct JetHeads {
    pub val: NodeId,
    pub d1: Vec<NodeId>,
    pub d2: Vec<NodeId>,
}

/// Batched forward pass over a tape, rows = points.
///
/// `x` is a constant `(n x input_dim)` node. Parameter gradients flow through
/// all returned heads, including second derivatives.
pub fn forward_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    spec: &MlpSpec<T>,
    net: &TapeNet,
    x: NodeId,
    active: &[usize],
    order: u8,
) -> JetHeads {
    let n = tape.value(x).nrows();
    debug_assert!(active.len() <= crate::jet::MAX_ACTIVE);
    debug_assert!(order <= 2);
    let mut a_val = x;
    let mut a_d1: Vec<NodeId> = Vec::new();
    let mut a_d2: Vec<Option<NodeId>> = Vec::new();
    for l in 0..spec.num_layers() {
        let act = spec.activation_of_layer(l);
        let (wl, bl) = (net.w[l], net.b[l]);
        let zz = tape.matmul(a_val, wl);
        let z = tape.add_row(zz, bl);
        let mut z_d1 = Vec::with_capacity(active.len());
        let mut z_d2: Vec<Option<NodeId>> = Vec::with_capacity(active.len());
        for (slot, &coord) in active.iter().enumerate() {
            if l == 0 {
                if order >= 1 {
                    z_d1.push(tape.row_broadcast(wl, coord, n));
                    z_d2.push(None);
                }
            } else {
                if order >= 1 {
                    z_d1.push(tape.matmul(a_d1[slot], wl));
                }
                if order >= 2 {
                    z_d2.push(a_d2[slot].map(|d| tape.matmul(d, wl)));
                } else {
                    z_d2.push(None);
                }
            }
        }
        a_val = tape.act(z, act, 0);
        if order >= 1 && !active.is_empty() {
            let s1 = tape.act(z, act, 1);
            let s2 = if order >= 2 { Some(tape.act(z, act, 2)) } else { None };
            let mut next_d1 = Vec::with_capacity(active.len());
            let mut next_d2 = Vec::with_capacity(active.len());
            for slot in 0..active.len() {
                next_d1.push(tape.mul(s1, z_d1[slot]));
                if let Some(s2) = s2 {
                    let zd_sq = tape.mul(z_d1[slot], z_d1[slot]);
                    let curv = tape.mul(s2, zd_sq);
                    let d2 = match z_d2[slot] {
                        Some(zdd) => {
                            let lin = tape.mul(s1, zdd);
                            tape.add(lin, curv)
                        }
                        None => curv,
                    };
                    next_d2.push(Some(d2));
                }
            }
            a_d1 = next_d1;
            a_d2 = next_d2;
        }
    }
    JetHeads {
        val: a_val,
        d1: a_d1,
        d2: a_d2.into_iter().map(|d| d.expect("order-2 head")).collect(),
    }
}

/// Flatten parameter adjoints back into the `ParamVector` layout. Layers the
/// loss never touched contribute zeros.
pub fn gather_grads<T: Scalar>(
    grads: &Grads<T>,
    spec: &MlpSpec<T>,
    net: &TapeNet,
) -> Vec<T> {
    let mut out = vec![T::zero(); spec.param_count()];
    for l in 0..spec.num_layers() {
        let (wr, br) = spec.layer_ranges(l);
        if let Some(gw) = grads.get_opt(net.w[l]) {
            for (slot, &g) in out[wr].iter_mut().zip(gw.iter()) {
                *slot = g;
            }
        }
        if let Some(gb) = grads.get_opt(net.b[l]) {
            for (slot, &g) in out[br].iter_mut().zip(gb.iter()) {
                *slot = g;
            }
        }
    }
    out
}

const CHECKPOINT_MAGIC: &str = "rte-net-v1";

/// Write a text checkpoint (header + one parameter per line) that
/// round-trips exactly.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    spec: &MlpSpec<T>,
    params: &ParamVector<T>,
    seed: u64,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CHECKPOINT_MAGIC}")?;
    write!(f, "widths")?;
    for w in &spec.widths {
        write!(f, " {w}")?;
    }
    writeln!(f)?;
    match spec.output {
        Activation::Identity => writeln!(f, "output identity")?,
        Activation::Softplus => writeln!(f, "output softplus")?,
        Activation::ScaledSigmoid(c) => writeln!(f, "output scaled_sigmoid {c}")?,
        Activation::Tanh => writeln!(f, "output tanh")?,
    }
    writeln!(f, "seed {seed}")?;
    writeln!(f, "count {}", params.data.len())?;
    for v in &params.data {
        writeln!(f, "{v}")?;
    }
    Ok(())
}

/// Read a checkpoint produced by [`save_checkpoint`].
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(MlpSpec<T>, ParamVector<T>, u64)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("checkpoint truncated before {what}")))?
            .map_err(Error::Io)
    };
    if next("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Parse("not a network checkpoint".into()));
    }
    let widths_line = next("widths")?;
    let mut parts = widths_line.split_whitespace();
    if parts.next() != Some("widths") {
        return Err(Error::Parse("missing widths header".into()));
    }
    let widths: Vec<usize> = parts
        .map(|p| p.parse().map_err(|_| Error::Parse("bad width".into())))
        .collect::<Result<_>>()?;
    let output_line = next("output")?;
    let mut parts = output_line.split_whitespace();
    if parts.next() != Some("output") {
        return Err(Error::Parse("missing output header".into()));
    }
    let output = match parts.next() {
        Some("identity") => Activation::Identity,
        Some("softplus") => Activation::Softplus,
        Some("tanh") => Activation::Tanh,
        Some("scaled_sigmoid") => {
            let c: T = parts
                .next()
                .ok_or_else(|| Error::Parse("missing sigmoid bound".into()))?
                .parse()
                .map_err(|_| Error::Parse("bad sigmoid bound".into()))?;
            Activation::ScaledSigmoid(c)
        }
        _ => return Err(Error::Parse("unknown output activation".into())),
    };
    let seed_line = next("seed")?;
    let seed: u64 = seed_line
        .strip_prefix("seed ")
        .ok_or_else(|| Error::Parse("missing seed header".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad seed".into()))?;
    let count_line = next("count")?;
    let count: usize = count_line
        .strip_prefix("count ")
        .ok_or_else(|| Error::Parse("missing count header".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad count".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next("parameter")?;
        data.push(
            line.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse("bad parameter value".into()))?,
        );
    }
    let spec = MlpSpec::new(widths, output)?;
    if data.len() != spec.param_count() {
        return Err(Error::Parse("parameter count mismatch".into()));
    }
    Ok((spec, ParamVector { data }, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use std::sync::Arc;

    fn small_spec() -> MlpSpec<f64> {
        MlpSpec::uniform(2, 3, 16, 1, Activation::Identity).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let spec = small_spec();
        let a = init_params(&spec, 42);
        let b = init_params(&spec, 42);
        assert_eq!(a, b);
        let c = init_params(&spec, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_params_forward_is_output_activation_at_zero() {
        for (act, expect) in [
            (Activation::Softplus, 2.0f64.ln()),
            (Activation::ScaledSigmoid(5.0), 2.5),
            (Activation::Identity, 0.0),
        ] {
            let spec = MlpSpec::uniform(2, 4, 50, 1, act).unwrap();
            let params = ParamVector::zeros(&spec);
            for input in [[0.0, 0.0], [1.3, -0.4], [10.0, 3.0]] {
                let out = forward(&params, &spec, &input).unwrap();
                assert!((out[0] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_affine_layer() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Identity).unwrap();
        let params = ParamVector::<f64> {
            data: vec![2.5, -0.75], // w, b
        };
        let out = forward(&params, &spec, &[3.0]).unwrap();
        assert!((out[0] - (2.5 * 3.0 - 0.75)).abs() < 1e-15);
    }

    #[test]
    fn glorot_mean_is_centered() {
        // 1e4 draws of U(-a, a): |sample mean| < 3 sigma / sqrt(N) = 3a/(sqrt(3) * 100).
        let spec = MlpSpec::<f64>::new(vec![2, 50, 1], Activation::Identity).unwrap();
        let (wr, _) = spec.layer_ranges(0);
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..100u64 {
            let p = init_params(&spec, seed);
            for &w in &p.data[wr.clone()] {
                sum += w;
                count += 1;
            }
        }
        assert!(count == 10_000);
        let bound = (6.0 / 52.0f64).sqrt();
        let sigma = bound / 3.0f64.sqrt();
        let mean = sum / count as f64;
        assert!(
            mean.abs() < 3.0 * sigma / 100.0,
            "mean {mean}, tolerance {}",
            3.0 * sigma / 100.0
        );
        // And all draws respect the bound.
        let p = init_params(&spec, 7);
        assert!(p.data[wr].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = small_spec();
        let params = init_params(&spec, 1);
        assert!(forward(&params, &spec, &[1.0]).is_err());
    }

    #[test]
    fn network_tanh_jet_at_zero() {
        // One hidden unit computing tanh(x) exactly: w0 = 1, b0 = 0, w1 = 1.
        let spec = MlpSpec::new(vec![1, 1, 1], Activation::Identity).unwrap();
        let params = ParamVector::<f64> {
            data: vec![1.0, 0.0, 1.0, 0.0],
        };
        let jets = forward_jet(&params, &spec, &[0.0], &[0], 2).unwrap();
        assert!(jets[0].val.abs() < 1e-15);
        assert!((jets[0].d1[0] - 1.0).abs() < 1e-15);
        assert!(jets[0].d2[0].abs() < 1e-15);
    }

    #[test]
    fn random_net_jets_match_finite_differences() {
        // First partials within 1e-6 relative, diagonal seconds within 1e-4,
        // over 100 random (spec, params, input) triples.
        let mut failures = 0;
        for seed in 0..100u64 {
            let dims = 1 + (seed % 3) as usize;
            let spec = MlpSpec::uniform(dims, 4, 50, 1, Activation::Softplus).unwrap();
            let params = init_params(&spec, seed * 13 + 1);
            let input: Vec<f64> = (0..dims).map(|i| 0.1 + 0.3 * (seed as f64 + i as f64).sin()).collect();
            let active: Vec<usize> = (0..dims.min(2)).collect();
            let jets = forward_jet(&params, &spec, &input, &active, 2).unwrap();
            // Central differences: h = 1e-5 for first derivatives; a larger
            // step for second differences keeps f64 roundoff (eps/h^2) below
            // the tolerance.
            let h1 = 1e-5;
            let h2 = 1e-4;
            for (slot, &coord) in active.iter().enumerate() {
                let at = |delta: f64| {
                    let mut ip = input.clone();
                    ip[coord] += delta;
                    forward(&params, &spec, &ip).unwrap()[0]
                };
                let fd1 = (at(h1) - at(-h1)) / (2.0 * h1);
                let fd2 = (at(h2) - 2.0 * at(0.0) + at(-h2)) / (h2 * h2);
                let j = jets[0];
                if (j.d1[slot] - fd1).abs() > 1e-6 * fd1.abs().max(1e-3) {
                    failures += 1;
                }
                if (j.d2[slot] - fd2).abs() > 1e-4 * fd2.abs().max(1e-2) {
                    failures += 1;
                }
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn tape_forward_matches_pointwise() {
        use crate::tape::Tape;
        use ndarray::Array2;
        let spec = MlpSpec::uniform(2, 3, 20, 1, Activation::Softplus).unwrap();
        let params = init_params(&spec, 9);
        let points: Vec<[f64; 2]> = (0..40)
            .map(|i| [0.05 * i as f64, (0.1 * i as f64).sin()])
            .collect();
        let mut x = Array2::zeros((points.len(), 2));
        for (r, p) in points.iter().enumerate() {
            x[(r, 0)] = p[0];
            x[(r, 1)] = p[1];
        }
        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let net = push_net(&mut tape, &spec, &params);
        let heads = forward_on_tape(&mut tape, &spec, &net, xid, &[0, 1], 2);
        for (r, p) in points.iter().enumerate() {
            let jets = forward_jet(&params, &spec, p, &[0, 1], 2).unwrap();
            let j = jets[0];
            assert!((tape.value(heads.val)[(r, 0)] - j.val).abs() < 1e-13);
            for slot in 0..2 {
                assert!((tape.value(heads.d1[slot])[(r, 0)] - j.d1[slot]).abs() < 1e-12);
                assert!((tape.value(heads.d2[slot])[(r, 0)] - j.d2[slot]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn gradient_at_zero_weights_is_only_last_bias() {
        // loss = sum of softplus-output^2 at zero parameters: the analytic
        // gradient is 2 * softplus(0) * sigmoid(0) on the last bias, zero
        // elsewhere.
        use crate::tape::Tape;
        use ndarray::Array2;
        let spec = MlpSpec::uniform(1, 2, 8, 1, Activation::Softplus).unwrap();
        let params = ParamVector::zeros(&spec);
        let mut tape = Tape::new();
        let x = tape.constant(Array2::from_shape_vec((1, 1), vec![0.7]).unwrap());
        let net = push_net(&mut tape, &spec, &params);
        let heads = forward_on_tape(&mut tape, &spec, &net, x, &[], 0);
        let loss = tape.sum_sq_weighted(heads.val, Arc::new(vec![1.0]));
        let grads = tape.backward(loss).unwrap();
        let flat = gather_grads(&grads, &spec, &net);
        let expected_last_bias = 2.0 * 2.0f64.ln() * 0.5;
        let (last_w, last_b) = spec.layer_ranges(spec.num_layers() - 1);
        for (i, g) in flat.iter().enumerate() {
            if i == last_b.start {
                assert!((g - expected_last_bias).abs() < 1e-14);
            } else {
                assert!(g.abs() < 1e-14, "unexpected gradient at {i}: {g}");
            }
        }
        assert!(last_w.end == last_b.start);
    }

    #[test]
    fn parameter_gradients_match_directional_finite_differences() {
        // Loss uses values, first, and second input derivatives so that every
        // jet path is exercised; 20 random directions within 1e-5 relative.
        use crate::tape::Tape;
        use ndarray::Array2;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        let spec = MlpSpec::uniform(1, 3, 12, 1, Activation::Softplus).unwrap();
        let base = init_params(&spec, 3);
        let xs: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
        let eval = |theta: &[f64], want_grad: bool| -> (f64, Vec<f64>) {
            let params = ParamVector {
                data: theta.to_vec(),
            };
            let mut tape = Tape::new();
            let x = tape.constant(Array2::from_shape_vec((xs.len(), 1), xs.clone()).unwrap());
            let net = push_net(&mut tape, &spec, &params);
            let heads = forward_on_tape(&mut tape, &spec, &net, x, &[0], 2);
            // residual = f'' + f' * f - 0.3 f
            let f1f = tape.mul(heads.d1[0], heads.val);
            let a = tape.add(heads.d2[0], f1f);
            let r = tape.add_scaled(a, -0.3, heads.val);
            let w = Arc::new(vec![1.0 / xs.len() as f64; xs.len()]);
            let loss = tape.sum_sq_weighted(r, w);
            let value = tape.scalar(loss);
            if want_grad {
                let grads = tape.backward(loss).unwrap();
                (value, gather_grads(&grads, &spec, &net))
            } else {
                (value, Vec::new())
            }
        };

        let (_, grad) = eval(&base.data, true);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = 1e-5;
        for _ in 0..20 {
            let dir: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let plus: Vec<f64> = base.data.iter().zip(&dir).map(|(p, d)| p + h * d).collect();
            let minus: Vec<f64> = base.data.iter().zip(&dir).map(|(p, d)| p - h * d).collect();
            let fd = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * h);
            let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            assert!(
                (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-8),
                "directional derivative mismatch: fd={fd}, analytic={analytic}"
            );
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        use crate::tape::Tape;
        use ndarray::Array2;
        let spec = small_spec();
        let params = init_params(&spec, 4);
        let mut tape = Tape::new();
        let _net = push_net(&mut tape, &spec, &params);
        let c = tape.constant(Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap());
        let loss = tape.sum_sq_weighted(c, Arc::new(vec![1.0; 3]));
        let grads = tape.backward(loss).unwrap();
        let flat = gather_grads(&grads, &spec, &_net);
        assert!(flat.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let dir = std::env::temp_dir().join("rte_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        let spec = MlpSpec::uniform(2, 4, 50, 1, Activation::ScaledSigmoid(4.207354924039483))
            .unwrap();
        let params = init_params(&spec, 271828);
        save_checkpoint(&path, &spec, &params, 271828).unwrap();
        let (spec2, params2, seed2) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(seed2, 271828);
        assert_eq!(params.data, params2.data);
        std::fs::remove_file(&path).ok();
    }
}
