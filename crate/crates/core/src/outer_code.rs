//! Surface-code scaling-law abstraction for the outer code.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterCodeParams {
    /// Code distance, odd.
    pub distance: u32,
    /// Prefactor `A`.
    pub prefactor: f64,
    pub p_th: f64,
    /// Weight of residual dephasing in the physical rate.
    pub w_z: f64,
    /// Weight of residual depolarizing in the physical rate.
    pub w_p: f64,
}

impl Default for OuterCodeParams {
    fn default() -> Self {
        Self {
            distance: 3,
            prefactor: 0.1,
            p_th: 0.11,
            w_z: 1.0,
            w_p: 0.2,
        }
    }
}

impl OuterCodeParams {
    pub fn with_distance(self, distance: u32) -> Self {
        Self { distance, ..self }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.distance.is_multiple_of(2) {
            return Err(DomainError::new(
                "distance",
                self.distance as f64,
                "distance is an odd positive integer",
            ));
        }
        if !(self.prefactor > 0.0 && self.prefactor.is_finite()) {
            return Err(DomainError::new("prefactor", self.prefactor, "prefactor > 0"));
        }
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            return Err(DomainError::new("p_th", self.p_th, "0 < p_th < 1"));
        }
        for (name, w) in [("w_z", self.w_z), ("w_p", self.w_p)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(DomainError::new(name, w, format!("{name} >= 0")));
            }
        }
        Ok(())
    }
}

/// `w_Z p_Z + w_P p_dep`, clamped to `[0, 1]`.
pub fn effective_phys_rate(p_z: f64, p_dep: f64, params: &OuterCodeParams) -> f64 {
    (params.w_z * p_z + params.w_p * p_dep).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogicalErrorRate {
    pub p_l: f64,
    /// The scaling law is only meaningful below threshold; the value is still
    /// reported above it.
    pub above_threshold: bool,
}

/// `min(1, A (p_phys / p_th)^{(d+1)/2})`.
pub fn logical_error_rate(p_phys: f64, params: &OuterCodeParams) -> LogicalErrorRate {
    let exponent = (params.distance as i32 + 1) / 2;
    let p_l = (params.prefactor * (p_phys / params.p_th).powi(exponent)).min(1.0);
    LogicalErrorRate {
        p_l,
        above_threshold: p_phys >= params.p_th,
    }
}

/// Logical failures leave a maximally mixed state of fidelity 1/2.
pub fn protect_fidelity(f_inj: f64, p_l: f64) -> f64 {
    (1.0 - p_l) * f_inj + p_l * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(prefactor: f64, p_th: f64, distance: u32) -> OuterCodeParams {
        OuterCodeParams {
            distance,
            prefactor,
            p_th,
            w_z: 1.0,
            w_p: 1.0,
        }
    }

    #[test]
    fn phys_rate_examples() {
        let zero = OuterCodeParams {
            w_z: 0.0,
            w_p: 0.0,
            ..OuterCodeParams::default()
        };
        assert_eq!(effective_phys_rate(0.3, 0.2, &zero), 0.0);
        let unit = code(0.1, 0.11, 3);
        assert!((effective_phys_rate(0.05, 0.02, &unit) - 0.07).abs() < 1e-15);
        assert_eq!(effective_phys_rate(0.0, 0.0, &OuterCodeParams::default()), 0.0);
        assert_eq!(effective_phys_rate(0.9, 0.9, &unit), 1.0);
    }

    #[test]
    fn logical_rate_examples() {
        for d in [1, 3, 5, 7] {
            let at = logical_error_rate(0.11, &code(0.3, 0.11, d));
            assert_eq!(at.p_l, 0.3);
            assert!(at.above_threshold);
            assert_eq!(logical_error_rate(0.11, &code(2.0, 0.11, d)).p_l, 1.0);
            assert_eq!(logical_error_rate(0.0, &code(0.1, 0.11, d)).p_l, 0.0);
        }
        let r = logical_error_rate(0.05, &code(0.1, 0.1, 3));
        assert!((r.p_l - 0.025).abs() < 1e-15);
        assert!(!r.above_threshold);
        // d = 1 is the unprotected baseline A · p/p_th
        let r = logical_error_rate(0.05, &code(0.1, 0.1, 1));
        assert!((r.p_l - 0.05).abs() < 1e-15);
    }

    #[test]
    fn protect_examples() {
        assert_eq!(protect_fidelity(0.93, 0.0), 0.93);
        assert_eq!(protect_fidelity(0.2, 1.0), 0.5);
        assert!((protect_fidelity(0.9, 0.1) - 0.86).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(OuterCodeParams::default().validate().is_ok());
        assert!(code(0.1, 0.11, 4).validate().is_err());
        assert!(code(0.0, 0.11, 3).validate().is_err());
        assert!(code(0.1, 1.0, 3).validate().is_err());
    }

    #[test]
    fn monotone_over_grid() {
        let ps: Vec<f64> = (0..=50).map(|i| i as f64 * 0.004).collect();
        for &a in &[0.05, 0.1, 1.0] {
            for d in [1u32, 3, 5, 7, 9] {
                let c = code(a, 0.11, d);
                for w in ps.windows(2) {
                    assert!(logical_error_rate(w[1], &c).p_l >= logical_error_rate(w[0], &c).p_l);
                }
                for &p in ps.iter().filter(|&&p| p > 0.0 && p < 0.11) {
                    let here = logical_error_rate(p, &c).p_l;
                    let next = logical_error_rate(p, &code(a, 0.11, d + 2)).p_l;
                    assert!(next < here, "d={d} p={p}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn protected_fidelity_is_bracketed(f in 0.0f64..=1.0, p_l in 0.0f64..=1.0) {
            let out = protect_fidelity(f, p_l);
            prop_assert!(out >= f.min(0.5) - 1e-15 && out <= f.max(0.5) + 1e-15);
        }

        #[test]
        fn larger_distance_never_hurts_below_threshold(
            f in 0.5f64..=1.0, p in 0.0f64..0.11, d in 0u32..5
        ) {
            let d = 2 * d + 1;
            let c = OuterCodeParams::default();
            let lo = protect_fidelity(f, logical_error_rate(p, &c.with_distance(d)).p_l);
            let hi = protect_fidelity(f, logical_error_rate(p, &c.with_distance(d + 2)).p_l);
            prop_assert!(hi >= lo);
        }
    }
}
