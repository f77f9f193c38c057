//! Effective logical noise: squeezing-dependent dephasing, depolarizing
//! noise, and heralded erasure.
//!
//! Dephasing and depolarizing are applied as exact mixed-state maps; only
//! erasure is sampled, because it decides the control flow of an attempt.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::qmath::{self, DensityMatrix};

/// Experimental knobs and the phenomenological constants of the noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Squeezing in dB.
    pub s_db: f64,
    /// Baseline erasure probability per location.
    pub p_base: f64,
    /// Dephasing-proxy prefactor.
    pub alpha_s: f64,
    /// Dephasing-proxy decay rate, 1/dB.
    pub beta: f64,
    /// Loss–squeezing coupling.
    pub alpha_ls: f64,
    pub p_dep_data: f64,
    pub p_dep_ancilla: f64,
    pub p_dep_out: f64,
}

impl Default for NoiseParams {
    /// Shipped calibrated constants: `lidmas calibrate` from
    /// [`NoiseParams::starting_point`] on the default grid and seed (see
    /// `configs/calibrated.json`).
    fn default() -> Self {
        Self {
            s_db: 12.0,
            p_base: 0.02,
            alpha_s: 1.660058461368273,
            beta: 0.5,
            alpha_ls: 1.0,
            p_dep_data: 0.02,
            p_dep_ancilla: 0.02,
            p_dep_out: 0.28,
        }
    }
}

impl NoiseParams {
    /// Uncalibrated starting point for `lidmas calibrate`.
    pub fn starting_point() -> Self {
        Self {
            s_db: 12.0,
            p_base: 0.02,
            alpha_s: 0.35,
            beta: 0.25,
            alpha_ls: 1.0,
            p_dep_data: 0.02,
            p_dep_ancilla: 0.02,
            p_dep_out: 0.05,
        }
    }

    /// Every noise source switched off.
    pub fn noiseless() -> Self {
        Self {
            s_db: 16.0,
            p_base: 0.0,
            // alpha_s * e^{-beta s} underflows to exactly 0 for every s >= 0.4 dB
            alpha_s: f64::MIN_POSITIVE,
            beta: 100.0,
            alpha_ls: 0.0,
            p_dep_data: 0.0,
            p_dep_ancilla: 0.0,
            p_dep_out: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let nonneg = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(DomainError::new(name, v, format!("{name} >= 0")))
            }
        };
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(DomainError::new(name, v, format!("{name} > 0")))
            }
        };
        let prob = |name, v: f64, max: f64| {
            if (0.0..=max).contains(&v) {
                Ok(())
            } else {
                Err(DomainError::new(name, v, format!("0 <= {name} <= {max}")))
            }
        };
        nonneg("s_db", self.s_db)?;
        prob("p_base", self.p_base, 1.0)?;
        positive("alpha_s", self.alpha_s)?;
        positive("beta", self.beta)?;
        nonneg("alpha_ls", self.alpha_ls)?;
        prob("p_dep_data", self.p_dep_data, 0.75)?;
        prob("p_dep_ancilla", self.p_dep_ancilla, 0.75)?;
        prob("p_dep_out", self.p_dep_out, 0.75)?;
        Ok(())
    }

    pub fn p_z(&self) -> Result<f64, DomainError> {
        p_z_of_squeezing(self.s_db, self.alpha_s, self.beta)
    }

    pub fn p_erasure(&self) -> Result<f64, DomainError> {
        Ok(erasure_prob(self.p_base, self.alpha_ls, self.p_z()?))
    }
}

/// Squeezing-to-dephasing proxy, `min(0.5, alpha_s · e^{-beta · s})`.
pub fn p_z_of_squeezing(s_db: f64, alpha_s: f64, beta: f64) -> Result<f64, DomainError> {
    if !(s_db >= 0.0) {
        return Err(DomainError::new("s_db", s_db, "s_db >= 0"));
    }
    Ok((alpha_s * (-beta * s_db).exp()).min(0.5))
}

/// Loss probability inflated by residual dephasing, clamped at 1.
pub fn erasure_prob(p_base: f64, alpha_ls: f64, p_z: f64) -> f64 {
    (p_base * (1.0 + alpha_ls * p_z)).min(1.0)
}

/// Validated channel parameters for one noise location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationNoise {
    p_e: f64,
    p_z: f64,
    p_dep: f64,
}

impl LocationNoise {
    pub fn new(p_e: f64, p_z: f64, p_dep: f64) -> Result<Self, DomainError> {
        if !(0.0..=1.0).contains(&p_e) {
            return Err(DomainError::new("p_e", p_e, "0 <= p_e <= 1"));
        }
        if !(0.0..=0.5).contains(&p_z) {
            return Err(DomainError::new("p_z", p_z, "0 <= p_z <= 0.5"));
        }
        if !(0.0..=0.75).contains(&p_dep) {
            return Err(DomainError::new("p_dep", p_dep, "0 <= p_dep <= 0.75"));
        }
        Ok(Self { p_e, p_z, p_dep })
    }

    pub fn p_e(&self) -> f64 {
        self.p_e
    }

    pub fn p_z(&self) -> f64 {
        self.p_z
    }

    pub fn p_dep(&self) -> f64 {
        self.p_dep
    }

    /// Same location with erasure disabled.
    pub fn without_erasure(&self) -> Self {
        Self { p_e: 0.0, ..*self }
    }

    /// The deterministic part of the composite map: depolarizing after dephasing.
    pub fn apply_channels(&self, rho: &DensityMatrix) -> DensityMatrix {
        qmath::depolarize(&qmath::dephase(rho, self.p_z), self.p_dep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelDraw {
    Erased,
    Passed(DensityMatrix),
}

impl ChannelDraw {
    pub fn passed(self) -> Option<DensityMatrix> {
        match self {
            ChannelDraw::Erased => None,
            ChannelDraw::Passed(rho) => Some(rho),
        }
    }
}

/// One pass through the composite map. Consumes exactly one uniform draw.
pub fn sample_composite<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    noise: &LocationNoise,
    rng: &mut R,
) -> ChannelDraw {
    let u: f64 = rng.random();
    if u < noise.p_e {
        ChannelDraw::Erased
    } else {
        ChannelDraw::Passed(noise.apply_channels(rho))
    }
}
