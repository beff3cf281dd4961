//! Behavior characterization: semantic descriptors, explicit code and
//! writing features, weighted hybrid fusion, and descriptor-independence
//! estimation.

pub mod code;
pub mod coverage;
pub mod mi;
pub mod semantic;
pub mod writing;

use crate::error::{Error, Result};
use crate::math::all_finite;
use serde::{Deserialize, Serialize};

/// Hybrid behavior descriptor.
///
/// `fused` is always `concat(sqrt(alpha) * semantic, sqrt(1-alpha) * explicit)`
/// and is the vector the archive bins on. The parts are kept so reports can
/// renormalize or split them later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDescriptor {
    pub semantic: Vec<f64>,
    pub explicit: Vec<f64>,
    pub alpha: f64,
    pub fused: Vec<f64>,
}

impl BehaviorDescriptor {
    pub fn dim(&self) -> usize {
        self.fused.len()
    }
}

/// Weighted concatenation of normalized semantic and explicit components.
/// The sqrt weighting makes the induced squared distance split as
/// `alpha * d_sem^2 + (1-alpha) * d_exp^2`.
pub fn fuse(semantic: Vec<f64>, explicit: Vec<f64>, alpha: f64) -> Result<BehaviorDescriptor> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::config(format!("alpha must be in [0,1], got {alpha}")));
    }
    if !all_finite(&semantic) || !all_finite(&explicit) {
        return Err(Error::config("descriptor components must be finite"));
    }
    let ws = alpha.sqrt();
    let we = (1.0 - alpha).sqrt();
    let mut fused = Vec::with_capacity(semantic.len() + explicit.len());
    fused.extend(semantic.iter().map(|x| ws * x));
    fused.extend(explicit.iter().map(|x| we * x));
    Ok(BehaviorDescriptor {
        semantic,
        explicit,
        alpha,
        fused,
    })
}
