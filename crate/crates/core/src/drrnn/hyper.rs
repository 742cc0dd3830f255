use serde::{Deserialize, Serialize};

use crate::corpus::N_CLASSES;
use crate::features::FEATURE_DIM;
use crate::neural::LrSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub input_dim: usize,
    pub block_dim: usize,
    pub n_blocks: usize,
    pub input_dropout: f64,
    pub block_dropout: f64,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub n_classes: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            input_dim: FEATURE_DIM,
            block_dim: 81,
            n_blocks: 12,
            input_dropout: 0.73,
            block_dropout: 0.17,
            base_lr: 6e-3,
            warmup_epochs: 500,
            l2_lambda: 0.14,
            max_epochs: 700,
            n_classes: N_CLASSES,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let dims = [("input_dim", self.input_dim), ("block_dim", self.block_dim), ("n_blocks", self.n_blocks)];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.n_classes != N_CLASSES {
            return Err(Error::invalid(format!("n_classes must be {N_CLASSES}")));
        }
        for (name, p) in [("input_dropout", self.input_dropout), ("block_dropout", self.block_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} {p} outside [0, 1)")));
            }
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid("base_lr must be positive"));
        }
        if self.warmup_epochs == 0 {
            return Err(Error::invalid("warmup_epochs must be at least 1"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("l2_lambda must be non-negative"));
        }
        Ok(())
    }

    /// Closed-form count of learnable scalars.
    pub fn param_count(&self) -> usize {
        let (i, d, c) = (self.input_dim, self.block_dim, self.n_classes);
        i * d + d + self.n_blocks * (d * d + d + 2 * d) + d * c + c
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule { base_lr: self.base_lr, warmup_epochs: self.warmup_epochs }
    }
}
