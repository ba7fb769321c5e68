//! Dense `f64` matrices, a reverse-mode tape over the primitives the model
//! needs, Adam, dropout masks and the parameter checkpoint format.

mod adam;
mod tape;
mod tensor;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, ParameterStore};
pub use tape::{kernel_matrix, Activation, Gradients, PairwiseKernel, Tape, Var};
pub use tensor::Tensor;

use crate::error::{Error, Result};

pub const PARAMS_SCHEMA_VERSION: u32 = 1;

/// Inverted-dropout mask: entries are `0` with probability `rate`, otherwise
/// `1/(1-rate)`. Outside training the mask is all ones.
pub fn dropout_mask<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(Tensor::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let values = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, values)
}

/// On-disk parameter file. `serde_json` writes shortest round-trip decimals,
/// so every `f64` survives a save/load cycle bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    pub schema_version: u32,
    pub parameters: BTreeMap<String, Tensor>,
}

impl ParameterFile {
    pub fn from_store(store: &ParameterStore) -> Self {
        ParameterFile {
            schema_version: PARAMS_SCHEMA_VERSION,
            parameters: store
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    pub fn into_store(self) -> Result<ParameterStore> {
        if self.schema_version != PARAMS_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported parameter schema version {}",
                self.schema_version
            )));
        }
        for (name, t) in &self.parameters {
            if t.rows() * t.cols() != t.len() || !t.is_finite() {
                return Err(Error::invalid(format!("corrupt parameter {name:?}")));
            }
        }
        Ok(ParameterStore::from_params(self.parameters))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

impl From<ParameterStore> for ParameterFile {
    fn from(store: ParameterStore) -> Self {
        ParameterFile {
            schema_version: PARAMS_SCHEMA_VERSION,
            parameters: store.into_params(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dropout_rate_zero_and_eval_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = dropout_mask(3, 4, 0.0, true, &mut rng).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
        let m = dropout_mask(3, 4, 0.9, false, &mut rng).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
        assert!(dropout_mask(1, 1, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = dropout_mask(1, 100_000, 0.5, true, &mut rng).unwrap();
        let survivors = m.values().iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((survivors - 0.5).abs() < 0.01, "{survivors}");
        assert!(m.values().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn parameter_file_round_trip_is_bit_exact() {
        let mut store = ParameterStore::new();
        let awkward = vec![
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            f64::MAX,
            5e-324,
            std::f64::consts::PI,
        ];
        store.insert("w", Tensor::from_vec(2, 3, awkward).unwrap());
        let text = serde_json::to_string(&ParameterFile::from_store(&store)).unwrap();
        let back: ParameterFile = serde_json::from_str(&text).unwrap();
        let restored = back.into_store().unwrap();
        let (a, b) = (store.get("w").unwrap(), restored.get("w").unwrap());
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
