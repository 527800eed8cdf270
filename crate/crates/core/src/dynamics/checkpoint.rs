use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicState, ThermostatParams};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

const VERSION: u32 = 1;

/// Everything needed to resume a trajectory bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub spec_hash: String,
    pub params: ThermostatParams,
    pub state: DynamicState,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn new(spec: &ProblemSpec, params: &ThermostatParams, state: &DynamicState, rng: &ChaCha8Rng) -> Self {
        Self {
            version: VERSION,
            spec_hash: spec.content_hash(),
            params: params.clone(),
            state: state.clone(),
            rng: rng.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a checkpoint and checks it belongs to `spec`.
    pub fn from_json(s: &str, spec: &ProblemSpec) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {VERSION})",
                c.version
            )));
        }
        if c.spec_hash != spec.content_hash() {
            return Err(Error::Checkpoint("problem hash differs from checkpoint".into()));
        }
        if c.state.n_sites() != spec.n_elements() {
            return Err(Error::MeshMismatch {
                expected: spec.n_elements(),
                actual: c.state.n_sites(),
            });
        }
        c.params.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path, spec: &ProblemSpec) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, spec)
    }
}
