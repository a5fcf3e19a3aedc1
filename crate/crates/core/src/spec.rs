//! The full description of one experiment.

use serde::{Deserialize, Serialize};

use crate::charges::{sample_charges, ChargeLaw, ChargeVector};
use crate::error::{PolyqError, Result};
use crate::lattice::check_dim;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSpec {
    pub d: usize,
    pub n: usize,
    pub beta: f64,
    /// Pulling force λ ∈ R^d; empty means zero.
    #[serde(default)]
    pub pull: Vec<f64>,
    pub law: ChargeLaw,
    pub seed: u64,
}

impl GibbsSpec {
    pub fn new(d: usize, n: usize, beta: f64, law: ChargeLaw, seed: u64) -> Result<Self> {
        let s = GibbsSpec {
            d,
            n,
            beta,
            pull: Vec::new(),
            law,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_pull(mut self, pull: Vec<f64>) -> Result<Self> {
        self.pull = pull;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        GibbsSpec {
            beta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if self.n == 0 {
            return Err(PolyqError::OutOfRange("N must be at least 1".into()));
        }
        if !self.beta.is_finite() {
            return Err(PolyqError::OutOfRange("beta must be finite".into()));
        }
        if !self.pull.is_empty() && self.pull.len() != self.d {
            return Err(PolyqError::LengthMismatch {
                what: "pull vector",
                got: self.pull.len(),
                expected: self.d,
            });
        }
        if self.pull.iter().any(|x| !x.is_finite()) {
            return Err(PolyqError::OutOfRange("pull must be finite".into()));
        }
        Ok(())
    }

    /// λ as a length-d vector (zeros when unset).
    pub fn pull_vec(&self) -> Vec<f64> {
        if self.pull.is_empty() {
            vec![0.0; self.d]
        } else {
            self.pull.clone()
        }
    }

    pub fn is_pulled(&self) -> bool {
        self.pull.iter().any(|&x| x != 0.0)
    }

    /// The charge realisation determined by the seed.
    pub fn charges(&self) -> Result<ChargeVector> {
        sample_charges(&self.law, self.n, self.seed)
    }
}
