//! Fully connected stack mapping a dependency embedding to class logits.
//! Hidden layers keep the input width `|SG|`; the last maps to `|C|`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gin::glorot;
use crate::numerics::{dropout_mask, Activation, ParameterStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Initialisation of the square `|SG| x |SG|` hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenInit {
    Glorot,
    /// `I + noise·Glorot`: hidden unit `j` starts out carrying subgraph `j`,
    /// so the columns of `W^m` line up with the dependency features.
    NearIdentity {
        noise: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcConfig {
    /// Number of linear layers `m`, at least 1.
    pub layers: usize,
    pub activation: Activation,
    /// Dropout rate on hidden activations during training.
    pub dropout: f64,
    pub hidden_init: HiddenInit,
}

impl Default for FcConfig {
    fn default() -> Self {
        FcConfig {
            layers: 2,
            activation: Activation::Relu,
            dropout: 0.5,
            hidden_init: HiddenInit::NearIdentity { noise: 0.1 },
        }
    }
}

impl FcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::invalid("the FC stack needs at least one layer"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout
            )));
        }
        if let HiddenInit::NearIdentity { noise } = self.hidden_init {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Error::invalid(format!(
                    "identity init noise {noise} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn param_name(layer: usize, part: &str) -> String {
    format!("fc.{layer}.{part}")
}

/// Shape of the FC stack for a fixed subgraph and class count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcStack {
    pub config: FcConfig,
    pub num_subgraphs: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FcLayerVars {
    pub weight: Var,
    pub bias: Var,
}

impl FcStack {
    pub fn new(config: FcConfig, num_subgraphs: usize, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if num_subgraphs == 0 || num_classes == 0 {
            return Err(Error::invalid(format!(
                "FC stack needs positive sizes, got {num_subgraphs} subgraphs and {num_classes} classes"
            )));
        }
        Ok(FcStack {
            config,
            num_subgraphs,
            num_classes,
        })
    }

    /// `(out, in)` of each layer.
    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = self.num_subgraphs;
        (0..self.config.layers).map(move |l| {
            if l + 1 == self.config.layers {
                (self.num_classes, s)
            } else {
                (s, s)
            }
        })
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParameterStore, rng: &mut R) {
        for (l, (out, inp)) in self.layer_dims().enumerate() {
            let hidden = l + 1 < self.config.layers;
            let w = match self.config.hidden_init {
                HiddenInit::NearIdentity { noise } if hidden => {
                    let mut w = glorot(out, inp, noise, rng);
                    for i in 0..out {
                        w.set(i, i, w.get(i, i) + 1.0);
                    }
                    w
                }
                _ => glorot(out, inp, 1.0, rng),
            };
            store.insert(param_name(l, "weight"), w);
            store.insert(param_name(l, "bias"), Tensor::zeros(1, out));
        }
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParameterStore) -> Result<Vec<FcLayerVars>> {
        self.layer_dims()
            .enumerate()
            .map(|(l, (out, inp))| {
                let mut leaf = |part: &str, shape: (usize, usize)| -> Result<Var> {
                    let name = param_name(l, part);
                    let t = store.expect(&name)?;
                    if t.shape() != shape {
                        return Err(Error::shape(
                            "fc",
                            format!("{name} is {:?}, expected {shape:?}", t.shape()),
                        ));
                    }
                    Ok(tape.leaf(t.clone()))
                };
                Ok(FcLayerVars {
                    weight: leaf("weight", (out, inp))?,
                    bias: leaf("bias", (1, out))?,
                })
            })
            .collect()
    }

    /// Logits for each row of `input` (`n x |SG|`).
    pub fn forward_on<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        layers: &[FcLayerVars],
        input: Var,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let cols = tape.value(input).cols();
        if cols != self.num_subgraphs {
            return Err(Error::shape(
                "fc",
                format!("input has {cols} columns, expected {}", self.num_subgraphs),
            ));
        }
        let mut x = input;
        for (l, p) in layers.iter().enumerate() {
            x = tape.matmul_t(x, p.weight)?;
            x = tape.add_row(x, p.bias)?;
            if l + 1 < layers.len() {
                x = tape.activate(x, self.config.activation)?;
                if mode == Mode::Train && self.config.dropout > 0.0 {
                    let (r, c) = tape.value(x).shape();
                    let mask = dropout_mask(r, c, self.config.dropout, true, rng)?;
                    x = tape.mask(x, mask)?;
                }
            }
        }
        Ok(x)
    }

    /// Evaluation-mode logits for a batch of dependency embeddings.
    pub fn logits(&self, store: &ParameterStore, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let layers = self.bind(&mut tape, store)?;
        let x = tape.leaf(input.clone());
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        let out = self.forward_on(&mut tape, &layers, x, Mode::Eval, &mut unused)?;
        Ok(tape.value(out).clone())
    }

    /// Weight matrix `W^m` of the last layer, `|C| x |SG|`.
    pub fn last_weight<'a>(&self, store: &'a ParameterStore) -> Result<&'a Tensor> {
        store.expect(&param_name(self.config.layers - 1, "weight"))
    }
}
