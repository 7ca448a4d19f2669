use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths of the default encoder-decoder.
pub const DEFAULT_DIMS: [usize; 7] = [420, 300, 200, 64, 200, 300, 420];
pub const PRELU_INIT_SLOPE: f64 = 0.25;

/// Which objective a network is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Reconstruct the temporal neighbor.
    Dcn,
    /// Triplet margin on the encoder output only.
    TripletOnly,
    /// Reconstruct the input itself, plus the triplet margin.
    TeAutoencoder,
    /// Reconstruct the neighbor, plus the triplet margin.
    TeDcn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Dcn,
        Variant::TripletOnly,
        Variant::TeAutoencoder,
        Variant::TeDcn,
    ];

    pub fn tag(self) -> u32 {
        match self {
            Variant::Dcn => 0,
            Variant::TripletOnly => 1,
            Variant::TeAutoencoder => 2,
            Variant::TeDcn => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dcn => "dcn",
            Variant::TripletOnly => "triplet",
            Variant::TeAutoencoder => "te-autoencoder",
            Variant::TeDcn => "te-dcn",
        }
    }

    pub fn uses_decoder(self) -> bool {
        self != Variant::TripletOnly
    }

    pub fn uses_triplet(self) -> bool {
        self != Variant::Dcn
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "dcn" => Ok(Variant::Dcn),
            "triplet" | "triplet-only" => Ok(Variant::TripletOnly),
            "te-autoencoder" | "te-ae" => Ok(Variant::TeAutoencoder),
            "te-dcn" => Ok(Variant::TeDcn),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with an optional PReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    /// PReLU negative-side slope; `None` for a linear layer.
    pub slope: Option<f64>,
}

impl Dense {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
            slope: self.slope.map(|_| 0.0),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Flat views of a layer stack: weight, bias and (if present) slope per layer.
pub fn tensors(layers: &[Dense]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(layers.len() * 3);
    for l in layers {
        out.push(l.weight.as_slice().expect("standard layout"));
        out.push(l.bias.as_slice().expect("standard layout"));
        if let Some(s) = &l.slope {
            out.push(std::slice::from_ref(s));
        }
    }
    out
}

pub fn tensors_mut(layers: &mut [Dense]) -> Vec<&mut [f64]> {
    let mut out = Vec::with_capacity(layers.len() * 3);
    for l in layers {
        out.push(l.weight.as_slice_mut().expect("standard layout"));
        out.push(l.bias.as_slice_mut().expect("standard layout"));
        if let Some(s) = &mut l.slope {
            out.push(std::slice::from_mut(s));
        }
    }
    out
}

/// Gradient of a scalar loss with respect to every network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params.layers.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
            if let (Some(x), Some(y)) = (&mut a.slope, b.slope) {
                *x += y;
            }
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        tensors(&self.layers)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Encoder-decoder weights. Layers before the narrowest interior width form
/// the encoder; its output is the behavior embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub variant: Variant,
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each evaluated layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each evaluated layer.
    pre: Vec<Array2<f64>>,
    pub embedding: Array2<f64>,
    /// Decoder output, when the decoder was run.
    pub output: Option<Array2<f64>>,
}

fn prelu(z: f64, slope: Option<f64>) -> f64 {
    match slope {
        Some(a) if z <= 0.0 => a * z,
        _ => z,
    }
}

impl NetworkParams {
    /// He-uniform weights, zero biases, PReLU slopes at 0.25. Every hidden
    /// layer gets a PReLU except the embedding layer; the output is linear.
    pub fn init(dims: &[usize], variant: Variant, seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let bottleneck = bottleneck_index(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weight =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..bound));
                let output_dim_index = l + 1;
                let activated = output_dim_index != bottleneck && output_dim_index != dims.len() - 1;
                Dense {
                    weight,
                    bias: Array1::zeros(fan_out),
                    slope: activated.then_some(PRELU_INIT_SLOPE),
                }
            })
            .collect();
        Ok(Self { variant, layers })
    }

    /// All-zero parameters with the standard activation layout.
    pub fn zeros(dims: &[usize], variant: Variant) -> Result<Self> {
        let mut p = Self::init(dims, variant, 0)?;
        for l in &mut p.layers {
            l.weight.fill(0.0);
        }
        Ok(p)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].in_dim()];
        d.extend(self.layers.iter().map(Dense::out_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Number of layers in the encoder.
    pub fn encoder_len(&self) -> usize {
        bottleneck_index(&self.dims())
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers[self.encoder_len() - 1].out_dim()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        tensors(&self.layers)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        tensors_mut(&mut self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn run_layers(&self, range: std::ops::Range<usize>, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for l in &self.layers[range] {
            let mut z = a.dot(&l.weight.t());
            z += &l.bias;
            if l.slope.is_some() {
                z.mapv_inplace(|v| prelu(v, l.slope));
            }
            a = z;
        }
        a
    }

    fn check_rows(&self, x: ArrayView2<'_, f64>, expected: usize) -> Result<()> {
        if x.ncols() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Embeddings of a batch of (already normalized) frames, one per row.
    pub fn encode_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_rows(x, self.input_dim())?;
        Ok(self.run_layers(0..self.encoder_len(), x))
    }

    pub fn encode(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let e = self.encode_batch(x.insert_axis(Axis(0)))?;
        Ok(e.row(0).to_owned())
    }

    pub fn decode_batch(&self, e: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_rows(e, self.embedding_dim())?;
        Ok(self.run_layers(self.encoder_len()..self.layers.len(), e))
    }

    pub fn decode(&self, e: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let x = self.decode_batch(e.insert_axis(Axis(0)))?;
        Ok(x.row(0).to_owned())
    }

    /// Forward pass keeping intermediates; the decoder runs only when asked.
    pub fn forward(&self, x: ArrayView2<'_, f64>, with_decoder: bool) -> Result<ForwardCache> {
        self.check_rows(x, self.input_dim())?;
        let end = if with_decoder {
            self.layers.len()
        } else {
            self.encoder_len()
        };
        let mut inputs = Vec::with_capacity(end);
        let mut pre = Vec::with_capacity(end);
        let mut a = x.to_owned();
        let mut embedding = None;
        for (i, l) in self.layers[..end].iter().enumerate() {
            let mut z = a.dot(&l.weight.t());
            z += &l.bias;
            let out = if l.slope.is_some() {
                z.mapv(|v| prelu(v, l.slope))
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut a, out));
            pre.push(z);
            if i + 1 == self.encoder_len() {
                embedding = Some(a.clone());
            }
        }
        Ok(ForwardCache {
            inputs,
            pre,
            embedding: embedding.expect("encoder has at least one layer"),
            output: with_decoder.then_some(a),
        })
    }

    /// Accumulates into `grads` the gradient given `d_output` (loss gradient at
    /// the decoder output) and `d_embedding` (extra gradient injected at the
    /// embedding). Either may be absent; `d_output` requires a decoder pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: Option<&Array2<f64>>,
        d_embedding: Option<&Array2<f64>>,
        grads: &mut Gradients,
    ) {
        let enc = self.encoder_len();
        let evaluated = cache.inputs.len();
        let (start, mut da) = match d_output {
            Some(d) => {
                assert_eq!(evaluated, self.layers.len(), "decoder was not run");
                (evaluated, d.clone())
            }
            None => (enc, Array2::zeros(cache.embedding.raw_dim())),
        };
        for l in (0..start).rev() {
            if l + 1 == enc {
                if let Some(de) = d_embedding {
                    da += de;
                }
            }
            let layer = &self.layers[l];
            let z = &cache.pre[l];
            let g = &mut grads.layers[l];
            let dz = match layer.slope {
                Some(a) => {
                    let mut ds = 0.0;
                    let mut dz = da.clone();
                    ndarray::Zip::from(&mut dz).and(z).for_each(|d, &zv| {
                        if zv <= 0.0 {
                            ds += *d * zv;
                            *d *= a;
                        }
                    });
                    if let Some(s) = &mut g.slope {
                        *s += ds;
                    }
                    dz
                }
                None => da,
            };
            g.weight += &dz.t().dot(&cache.inputs[l]);
            g.bias += &dz.sum_axis(Axis(0));
            if l > 0 {
                da = dz.dot(&layer.weight);
            } else {
                break;
            }
        }
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 || dims.contains(&0) {
        return Err(Error::Config(format!(
            "network needs >= 3 positive layer widths, got {dims:?}"
        )));
    }
    if dims[0] != dims[dims.len() - 1] {
        return Err(Error::Config(format!(
            "output width {} must equal input width {}",
            dims[dims.len() - 1],
            dims[0]
        )));
    }
    Ok(())
}

/// Index into `dims` of the embedding layer: the narrowest interior width
/// (first one on ties).
pub fn bottleneck_index(dims: &[usize]) -> usize {
    (1..dims.len() - 1)
        .min_by_key(|&i| (dims[i], i))
        .expect("at least one interior layer")
}
