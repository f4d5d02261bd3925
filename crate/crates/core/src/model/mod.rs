//! The network: a stack of convolution units over coedge neighbourhoods
//! followed by an output unit that scores faces.
//!
//! Each hidden unit gathers face, edge and coedge states along the kernel
//! walks into one row per coedge, runs the row through an MLP, then splits
//! the output into the next coedge state and two blocks that are
//! max-pooled onto parent faces and parent edges. The output unit only
//! produces the face block, with one column per class.

mod io;

pub use io::{load_model, read_model, save_model, write_model, ModelIoError, FORMAT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{COEDGE_FEATURES, EDGE_FEATURES, FACE_FEATURES};
use crate::features::Standardizer;
use crate::nn::{
    cross_entropy, segment_max_pool, segment_max_pool_backward, LossError, Mlp, MlpCache, MlpGrads,
    PoolError, ShapeError, Tensor2,
};
use crate::scalar::Scalar;
use crate::topology::{SolidTopology, TopologyError};
use crate::walks::{CompiledKernel, KernelError, KernelSpec};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{entity} features have {actual} columns, the model expects {expected}")]
    InputWidth { entity: &'static str, expected: usize, actual: usize },
    #[error("{entity} features have {actual} rows, the topology has {expected} entities")]
    InputRows { entity: &'static str, expected: usize, actual: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("gradient has {actual} blocks, the model has {expected}")]
    GradientLayout { expected: usize, actual: usize },
}

fn default_depth() -> usize {
    2
}

fn default_true() -> bool {
    true
}

fn default_face_features() -> usize {
    FACE_FEATURES
}

fn default_edge_features() -> usize {
    EDGE_FEATURES
}

fn default_coedge_features() -> usize {
    COEDGE_FEATURES
}

/// Shape of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub kernel: KernelSpec,
    /// Width `s` of the face, edge and coedge hidden states.
    pub hidden_width: usize,
    /// Number `T` of hidden convolution units before the output unit.
    pub hidden_units: usize,
    pub num_classes: usize,
    /// Layers per MLP.
    #[serde(default = "default_depth")]
    pub mlp_depth: usize,
    /// Whether the last layer of the output unit has a bias.
    #[serde(default)]
    pub final_bias: bool,
    /// Pool coedge outputs onto faces and edges in hidden units. When off,
    /// the face and edge states handed to later units are zero, so no
    /// information passes through shared faces or edges.
    #[serde(default = "default_true")]
    pub pooling: bool,
    #[serde(default = "default_face_features")]
    pub face_features: usize,
    #[serde(default = "default_edge_features")]
    pub edge_features: usize,
    #[serde(default = "default_coedge_features")]
    pub coedge_features: usize,
}

impl ArchitectureConfig {
    /// Two units in total (one hidden, one output) with two-layer MLPs and
    /// no bias on the final layer.
    pub fn new(kernel: KernelSpec, hidden_width: usize, num_classes: usize) -> Self {
        ArchitectureConfig {
            kernel,
            hidden_width,
            hidden_units: 1,
            num_classes,
            mlp_depth: 2,
            final_bias: false,
            pooling: true,
            face_features: FACE_FEATURES,
            edge_features: EDGE_FEATURES,
            coedge_features: COEDGE_FEATURES,
        }
    }

    pub fn with_hidden_units(mut self, units: usize) -> Self {
        self.hidden_units = units;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.kernel.check()?;
        if self.hidden_width < 1 {
            return Err(ModelError::Config("hidden width must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(ModelError::Config("at least two classes are required".into()));
        }
        if self.mlp_depth < 1 {
            return Err(ModelError::Config("MLP depth must be at least 1".into()));
        }
        if self.face_features == 0 || self.edge_features == 0 || self.coedge_features == 0 {
            return Err(ModelError::Config("input feature widths must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths of unit `t`; unit `hidden_units` is the output unit.
    pub fn unit_widths(&self, t: usize) -> Vec<usize> {
        let s = self.hidden_width;
        let input = if t == 0 {
            self.kernel.input_width(self.face_features, self.edge_features, self.coedge_features)
        } else {
            self.kernel.total_walks() * s
        };
        let output = if t == self.hidden_units { self.num_classes } else { 3 * s };
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(3 * s, self.mlp_depth - 1));
        widths.push(output);
        widths
    }

    /// Whether the last layer of unit `t` has a bias.
    pub fn unit_final_bias(&self, t: usize) -> bool {
        t < self.hidden_units || self.final_bias
    }
}

/// Exact number of weights and biases for `config`.
pub fn parameter_count(config: &ArchitectureConfig) -> usize {
    (0..=config.hidden_units)
        .map(|t| {
            let widths = config.unit_widths(t);
            let layers = widths.len() - 1;
            (0..layers)
                .map(|k| {
                    let bias = k + 1 < layers || config.unit_final_bias(t);
                    widths[k] * widths[k + 1] + if bias { widths[k + 1] } else { 0 }
                })
                .sum::<usize>()
        })
        .sum()
}

/// Borrowed network input for one solid or a batch of solids.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a, T> {
    pub topology: &'a SolidTopology,
    pub faces: &'a Tensor2<T>,
    pub edges: &'a Tensor2<T>,
    pub coedges: &'a Tensor2<T>,
}

/// Face, edge and coedge states after one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates<T> {
    pub faces: Tensor2<T>,
    pub edges: Tensor2<T>,
    pub coedges: Tensor2<T>,
}

#[derive(Debug, Clone)]
struct UnitCache<T> {
    mlp: MlpCache<T>,
    /// Widths of the face, edge and coedge states fed to this unit.
    input_widths: (usize, usize, usize),
    face_argmax: Vec<usize>,
    edge_argmax: Vec<usize>,
}

/// Everything the reverse pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    kernel: CompiledKernel,
    num_faces: usize,
    num_edges: usize,
    units: Vec<UnitCache<T>>,
}

/// Gradients laid out like [`BRepNetModel::param_blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub units: Vec<MlpGrads<T>>,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn blocks(&self) -> Vec<&[T]> {
        self.units.iter().flat_map(|u| u.blocks()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BRepNetModel<T> {
    pub config: ArchitectureConfig,
    pub units: Vec<Mlp<T>>,
    pub standardizer: Option<Standardizer>,
    /// Seed used for the weight initialization.
    pub init_seed: u64,
}

impl<T: Scalar> BRepNetModel<T> {
    /// Glorot-uniform weights, zero biases, seeded.
    pub fn new(config: ArchitectureConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..=config.hidden_units)
            .map(|t| Mlp::glorot(&config.unit_widths(t), config.unit_final_bias(t), &mut rng))
            .collect();
        Ok(BRepNetModel { config, units, standardizer: None, init_seed: seed })
    }

    /// All parameters set to zero, with the layout of `config`.
    pub fn zeros(config: ArchitectureConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let units = (0..=config.hidden_units)
            .map(|t| {
                Mlp::new_with(&config.unit_widths(t), config.unit_final_bias(t), |i, o, b| {
                    crate::nn::Linear::zeros(i, o, b)
                })
            })
            .collect();
        Ok(BRepNetModel { config, units, standardizer: None, init_seed: 0 })
    }

    pub fn with_standardizer(mut self, standardizer: Standardizer) -> Self {
        self.standardizer = Some(standardizer);
        self
    }

    pub fn num_params(&self) -> usize {
        self.units.iter().map(Mlp::num_params).sum()
    }

    pub fn param_blocks(&self) -> Vec<&[T]> {
        self.units.iter().flat_map(|u| u.param_blocks()).collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [T]> {
        self.units.iter_mut().flat_map(|u| u.param_blocks_mut()).collect()
    }

    /// Human-readable name of every parameter block, in block order.
    pub fn param_block_names(&self) -> Vec<String> {
        let last = self.units.len() - 1;
        let mut names = Vec::new();
        for (t, unit) in self.units.iter().enumerate() {
            let unit_name = if t == last { "output".to_string() } else { format!("unit{t}") };
            for (k, layer) in unit.layers.iter().enumerate() {
                names.push(format!("{unit_name}.layer{k}.weight"));
                if layer.bias.is_some() {
                    names.push(format!("{unit_name}.layer{k}.bias"));
                }
            }
        }
        names
    }

    fn check_input(&self, input: &ModelInput<'_, T>) -> Result<(), ModelError> {
        let c = &self.config;
        let topo = input.topology;
        let checks = [
            ("face", input.faces, c.face_features, topo.num_faces()),
            ("edge", input.edges, c.edge_features, topo.num_edges()),
            ("coedge", input.coedges, c.coedge_features, topo.num_coedges()),
        ];
        for (entity, x, width, rows) in checks {
            if x.cols() != width {
                return Err(ModelError::InputWidth { entity, expected: width, actual: x.cols() });
            }
            if x.rows() != rows {
                return Err(ModelError::InputRows { entity, expected: rows, actual: x.rows() });
            }
        }
        Ok(())
    }

    /// Forward pass returning per-face class scores and the cache needed by
    /// [`BRepNetModel::backward`].
    pub fn forward(&self, input: ModelInput<'_, T>) -> Result<(Tensor2<T>, ForwardCache<T>), ModelError> {
        let (logits, cache, _) = self.run(input, false)?;
        Ok((logits, cache))
    }

    /// Per-face class scores.
    pub fn classify(&self, input: ModelInput<'_, T>) -> Result<Tensor2<T>, ModelError> {
        Ok(self.forward(input)?.0)
    }

    /// States after each hidden unit, starting with the inputs.
    pub fn hidden_states(&self, input: ModelInput<'_, T>) -> Result<Vec<HiddenStates<T>>, ModelError> {
        Ok(self.run(input, true)?.2)
    }

    fn run(
        &self,
        input: ModelInput<'_, T>,
        keep_states: bool,
    ) -> Result<(Tensor2<T>, ForwardCache<T>, Vec<HiddenStates<T>>), ModelError> {
        self.check_input(&input)?;
        let topo = input.topology;
        let kernel = CompiledKernel::compile(&self.config.kernel, topo)?;
        let s = self.config.hidden_width;
        let (nf, ne) = (topo.num_faces(), topo.num_edges());

        let mut hf = input.faces.clone();
        let mut he = input.edges.clone();
        let mut hc = input.coedges.clone();
        let mut states = Vec::new();
        let mut caches = Vec::with_capacity(self.units.len());
        let last = self.units.len() - 1;
        for (t, unit) in self.units.iter().enumerate() {
            if keep_states {
                states.push(HiddenStates { faces: hf.clone(), edges: he.clone(), coedges: hc.clone() });
            }
            let input_widths = (hf.cols(), he.cols(), hc.cols());
            let psi = build_psi(&kernel, &hf, &he, &hc);
            let (z, mlp_cache) = unit.forward(&psi)?;
            if t == last {
                let pooled = segment_max_pool(&z, topo.face(), nf)?;
                caches.push(UnitCache {
                    mlp: mlp_cache,
                    input_widths,
                    face_argmax: pooled.argmax,
                    edge_argmax: Vec::new(),
                });
                let cache = ForwardCache {
                    kernel,
                    num_faces: nf,
                    num_edges: ne,
                    units: caches,
                };
                return Ok((pooled.values, cache, states));
            }
            hc = z.column_block(0..s);
            let (face_argmax, edge_argmax) = if self.config.pooling {
                let pf = segment_max_pool(&z.column_block(s..2 * s), topo.face(), nf)?;
                let pe = segment_max_pool(&z.column_block(2 * s..3 * s), topo.edge(), ne)?;
                hf = pf.values;
                he = pe.values;
                (pf.argmax, pe.argmax)
            } else {
                hf = Tensor2::zeros(nf, s);
                he = Tensor2::zeros(ne, s);
                (Vec::new(), Vec::new())
            };
            caches.push(UnitCache { mlp: mlp_cache, input_widths, face_argmax, edge_argmax });
        }
        unreachable!("the unit list always ends with the output unit")
    }

    /// Reverse pass from the gradient of the loss with respect to the
    /// logits.
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &Tensor2<T>) -> Result<ModelGrads<T>, ModelError> {
        if d_logits.shape() != (cache.num_faces, self.config.num_classes) {
            return Err(ShapeError::new(
                "backward",
                (cache.num_faces, self.config.num_classes),
                d_logits.shape(),
            )
            .into());
        }
        let n = cache.kernel.num_coedges;
        let s = self.config.hidden_width;
        let last = self.units.len() - 1;
        let mut grads: Vec<MlpGrads<T>> = Vec::with_capacity(self.units.len());

        let out_cache = &cache.units[last];
        let dz = segment_max_pool_backward(&out_cache.face_argmax, d_logits, n);
        let (g, d_psi) = self.units[last].backward(&out_cache.mlp, &dz, last > 0)?;
        grads.push(g);
        let mut d_states = d_psi.map(|d| psi_backward(&cache.kernel, &d, out_cache.input_widths, cache.num_faces, cache.num_edges));

        for t in (0..last).rev() {
            let unit_cache = &cache.units[t];
            let (dhf, dhe, dhc) = d_states.take().expect("set by the unit above");
            let mut dz = Tensor2::zeros(n, 3 * s);
            dz.set_column_block(0, &dhc);
            if self.config.pooling {
                dz.set_column_block(s, &segment_max_pool_backward(&unit_cache.face_argmax, &dhf, n));
                dz.set_column_block(2 * s, &segment_max_pool_backward(&unit_cache.edge_argmax, &dhe, n));
            }
            let (g, d_psi) = self.units[t].backward(&unit_cache.mlp, &dz, t > 0)?;
            grads.push(g);
            d_states = d_psi.map(|d| psi_backward(&cache.kernel, &d, unit_cache.input_widths, cache.num_faces, cache.num_edges));
        }
        grads.reverse();
        Ok(ModelGrads { units: grads })
    }

    /// Mean cross-entropy over the faces of `input` and its gradient.
    pub fn loss_and_grads(
        &self,
        input: ModelInput<'_, T>,
        labels: &[usize],
    ) -> Result<(T, ModelGrads<T>), ModelError> {
        let (logits, cache) = self.forward(input)?;
        let (loss, d_logits) = cross_entropy(&logits, labels)?;
        let grads = self.backward(&cache, &d_logits)?;
        Ok((loss, grads))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, input: ModelInput<'_, T>, labels: &[usize]) -> Result<T, ModelError> {
        let logits = self.classify(input)?;
        Ok(cross_entropy(&logits, labels)?.0)
    }

    /// Same architecture and weights converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> BRepNetModel<U> {
        BRepNetModel {
            config: self.config.clone(),
            units: self
                .units
                .iter()
                .map(|m| Mlp {
                    layers: m
                        .layers
                        .iter()
                        .map(|l| crate::nn::Linear {
                            weight: l.weight.cast(),
                            bias: l.bias.as_ref().map(|b| b.iter().map(|v| U::of_f64(v.to_f64_lossy())).collect()),
                        })
                        .collect(),
                })
                .collect(),
            standardizer: self.standardizer.clone(),
            init_seed: self.init_seed,
        }
    }
}

/// Row `i` holds the states of every kernel walk target from coedge `i`,
/// faces first, then edges, then coedges, each in list order.
pub(crate) fn build_psi<T: Scalar>(
    kernel: &CompiledKernel,
    hf: &Tensor2<T>,
    he: &Tensor2<T>,
    hc: &Tensor2<T>,
) -> Tensor2<T> {
    let (wf, we, wc) = (hf.cols(), he.cols(), hc.cols());
    let width = kernel.faces.len() * wf + kernel.edges.len() * we + kernel.coedges.len() * wc;
    let mut psi = Tensor2::zeros(kernel.num_coedges, width);
    for i in 0..kernel.num_coedges {
        let row = psi.row_mut(i);
        let mut off = 0;
        for (walks, h, w) in [(&kernel.faces, hf, wf), (&kernel.edges, he, we), (&kernel.coedges, hc, wc)] {
            for walk in walks {
                row[off..off + w].copy_from_slice(h.row(walk.dest[i]));
                off += w;
            }
        }
    }
    psi
}

/// Adjoint of [`build_psi`]: scatter-adds each column block back onto the
/// rows it was gathered from.
fn psi_backward<T: Scalar>(
    kernel: &CompiledKernel,
    d_psi: &Tensor2<T>,
    (wf, we, wc): (usize, usize, usize),
    num_faces: usize,
    num_edges: usize,
) -> (Tensor2<T>, Tensor2<T>, Tensor2<T>) {
    let mut dhf = Tensor2::zeros(num_faces, wf);
    let mut dhe = Tensor2::zeros(num_edges, we);
    let mut dhc = Tensor2::zeros(kernel.num_coedges, wc);
    for i in 0..kernel.num_coedges {
        let row = d_psi.row(i);
        let mut off = 0;
        for (walks, dh, w) in [
            (&kernel.faces, &mut dhf, wf),
            (&kernel.edges, &mut dhe, we),
            (&kernel.coedges, &mut dhc, wc),
        ] {
            for walk in walks {
                for (d, &g) in dh.row_mut(walk.dest[i]).iter_mut().zip(&row[off..off + w]) {
                    *d += g;
                }
                off += w;
            }
        }
    }
    (dhf, dhe, dhc)
}

#[cfg(test)]
mod tests;
