//! T-gate injection gadget and the repeat-until-success loop around it.
//!
//! One attempt: noisy data qubit, noisy `|A⟩` ancilla, CNOT (data control,
//! ancilla target), `X` measurement of the ancilla, then the branch map
//! `ρ → S†TρT†S` on the designated `m = +1` branch. The `S†` is tracked as a
//! Clifford frame and undone before fidelity evaluation. Any erasure or the
//! other branch fails the attempt, and the next attempt starts from a fresh
//! copy of the input state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::noise::{sample_composite, ChannelDraw, LocationNoise, NoiseParams};
use crate::qmath::{self, gates, DensityMatrix, Op2, PureState};
use crate::stream::Substreams;

/// How the measurement branch of an attempt is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchPolicy {
    /// Physical Born-rule probability of `m = +1`.
    Born,
    /// Fixed failure probability per non-erased attempt.
    Designated { p_branch_fail: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasureLocations {
    /// One erasure draw for the data qubit and one for the ancilla.
    PerQubit,
    /// A single erasure draw per attempt.
    PerAttempt,
}

/// Where the post-injection depolarizing acts relative to the branch map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputNoiseOrder {
    AfterFeedforward,
    BeforeFeedforward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RusConfig {
    pub r_max: u32,
    pub branch_policy: BranchPolicy,
    pub input_state: PureState,
    pub erasure_locations: ErasureLocations,
    pub output_noise: OutputNoiseOrder,
}

impl Default for RusConfig {
    fn default() -> Self {
        Self {
            r_max: 10,
            // calibrated together with the noise defaults; 0.10 before calibration
            branch_policy: BranchPolicy::Designated {
                p_branch_fail: 0.115,
            },
            input_state: PureState::plus(),
            erasure_locations: ErasureLocations::PerQubit,
            output_noise: OutputNoiseOrder::AfterFeedforward,
        }
    }
}

impl RusConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.r_max < 1 {
            return Err(DomainError::new("r_max", self.r_max as f64, "r_max >= 1"));
        }
        if let BranchPolicy::Designated { p_branch_fail } = self.branch_policy {
            if !(0.0..=1.0).contains(&p_branch_fail) {
                return Err(DomainError::new(
                    "p_branch_fail",
                    p_branch_fail,
                    "0 <= p_branch_fail <= 1",
                ));
            }
        }
        Ok(())
    }

    pub fn target(&self) -> PureState {
        self.input_state.apply(&gates::t())
    }
}

/// Clifford correction accumulated by the feedforward, still to be undone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliffordFrame {
    Identity,
    S,
    Sdg,
}

impl CliffordFrame {
    pub fn unitary(&self) -> Op2 {
        match self {
            CliffordFrame::Identity => gates::identity(),
            CliffordFrame::S => gates::s(),
            CliffordFrame::Sdg => gates::sdg(),
        }
    }

    pub fn undo(&self, rho: &DensityMatrix) -> DensityMatrix {
        rho.conjugate(&self.unitary().adjoint())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttemptOutcome {
    Erased,
    WrongBranch,
    Success {
        rho_out: DensityMatrix,
        frame: CliffordFrame,
    },
}

/// Channel parameters of one grid point, resolved from [`NoiseParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionNoise {
    pub data: LocationNoise,
    pub ancilla: LocationNoise,
    pub p_dep_out: f64,
}

impl InjectionNoise {
    pub fn from_params(params: &NoiseParams) -> Result<Self, DomainError> {
        params.validate()?;
        let p_z = params.p_z()?;
        let p_e = params.p_erasure()?;
        Ok(Self {
            data: LocationNoise::new(p_e, p_z, params.p_dep_data)?,
            ancilla: LocationNoise::new(p_e, p_z, params.p_dep_ancilla)?,
            p_dep_out: params.p_dep_out,
        })
    }

    pub fn noiseless() -> Self {
        let clean = LocationNoise::new(0.0, 0.0, 0.0).unwrap();
        Self {
            data: clean,
            ancilla: clean,
            p_dep_out: 0.0,
        }
    }
}

/// `T|+⟩⟨+|T†` through the ancilla's composite channel.
pub fn prepare_magic_ancilla<R: Rng + ?Sized>(noise: &InjectionNoise, rng: &mut R) -> ChannelDraw {
    sample_composite(&PureState::magic().projector(), &noise.ancilla, rng)
}

pub fn injection_attempt<R: Rng + ?Sized>(
    rho_data: &DensityMatrix,
    noise: &InjectionNoise,
    cfg: &RusConfig,
    rng: &mut R,
) -> AttemptOutcome {
    let (data, ancilla) = match cfg.erasure_locations {
        ErasureLocations::PerQubit => {
            let Some(data) = sample_composite(rho_data, &noise.data, rng).passed() else {
                return AttemptOutcome::Erased;
            };
            let Some(ancilla) = prepare_magic_ancilla(noise, rng).passed() else {
                return AttemptOutcome::Erased;
            };
            (data, ancilla)
        }
        ErasureLocations::PerAttempt => {
            let u: f64 = rng.random();
            if u < noise.data.p_e() {
                return AttemptOutcome::Erased;
            }
            let data = noise.data.apply_channels(rho_data);
            let ancilla = noise.ancilla.apply_channels(&PureState::magic().projector());
            (data, ancilla)
        }
    };

    let joint = data.tensor(&ancilla).conjugate(&gates::cnot());
    let m = qmath::measure_ancilla_x(&joint);

    let u: f64 = rng.random();
    let success = match cfg.branch_policy {
        BranchPolicy::Born => u < m.p_plus,
        BranchPolicy::Designated { p_branch_fail } => u >= p_branch_fail,
    };
    let Some(rho_plus) = m.plus.filter(|_| success) else {
        return AttemptOutcome::WrongBranch;
    };

    // m = +1: ρ → S†TρT†S, frame S†
    let branch_map = gates::sdg() * gates::t();
    let rho_out = match cfg.output_noise {
        OutputNoiseOrder::AfterFeedforward => {
            qmath::depolarize(&rho_plus.conjugate(&branch_map), noise.p_dep_out)
        }
        OutputNoiseOrder::BeforeFeedforward => {
            qmath::depolarize(&rho_plus, noise.p_dep_out).conjugate(&branch_map)
        }
    };
    AttemptOutcome::Success {
        rho_out,
        frame: CliffordFrame::Sdg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RusRecord {
    pub succeeded: bool,
    pub rounds_used: u32,
    pub fidelity: Option<f64>,
}

pub fn rus_inject<R: Rng + ?Sized>(
    cfg: &RusConfig,
    noise: &InjectionNoise,
    rng: &mut R,
) -> RusRecord {
    let input = cfg.input_state.projector();
    let target = cfg.target();
    for round in 1..=cfg.r_max {
        if let AttemptOutcome::Success { rho_out, frame } = injection_attempt(&input, noise, cfg, rng) {
            let f = qmath::fidelity_pure(&frame.undo(&rho_out), &target);
            return RusRecord {
                succeeded: true,
                rounds_used: round,
                fidelity: Some(f),
            };
        }
    }
    RusRecord {
        succeeded: false,
        rounds_used: cfg.r_max,
        fidelity: None,
    }
}

/// Sufficient statistics of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointAggregate {
    pub n_trials: u64,
    pub successes: u64,
    pub round_sum: u64,
    pub round_sq_sum: u64,
    pub fidelity_sum: f64,
    pub fidelity_sq_sum: f64,
}

impl PointAggregate {
    pub fn push(&mut self, rec: &RusRecord) {
        self.n_trials += 1;
        if let (true, Some(f)) = (rec.succeeded, rec.fidelity) {
            let r = rec.rounds_used as u64;
            self.successes += 1;
            self.round_sum += r;
            self.round_sq_sum += r * r;
            self.fidelity_sum += f;
            self.fidelity_sq_sum += f * f;
        }
    }

    pub fn p_succ(&self) -> f64 {
        self.successes as f64 / self.n_trials as f64
    }

    /// Binomial standard error.
    pub fn p_succ_se(&self) -> f64 {
        let p = self.p_succ();
        (p * (1.0 - p) / self.n_trials as f64).sqrt()
    }

    pub fn avg_rounds(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.round_sum as f64 / self.successes as f64)
    }

    pub fn avg_rounds_se(&self) -> Option<f64> {
        let k = self.successes as f64;
        let mean = self.avg_rounds()?;
        Some(sample_se(self.round_sq_sum as f64, mean, k))
    }

    pub fn f_inj(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.fidelity_sum / self.successes as f64)
    }

    pub fn f_inj_se(&self) -> Option<f64> {
        let mean = self.f_inj()?;
        Some(sample_se(self.fidelity_sq_sum, mean, self.successes as f64))
    }
}

/// Standard error of the mean from a sum of squares; 0 below two samples.
fn sample_se(sq_sum: f64, mean: f64, k: f64) -> f64 {
    if k < 2.0 {
        return 0.0;
    }
    let var = ((sq_sum - k * mean * mean) / (k - 1.0)).max(0.0);
    (var / k).sqrt()
}

/// Runs `n_trials` independent RUS trials, trial `i` on substream `i`.
///
/// Trials run in parallel; records are summed in trial order, so the result
/// is bit-identical for any worker count.
pub fn estimate_point(
    cfg: &RusConfig,
    noise: &InjectionNoise,
    n_trials: u64,
    streams: &Substreams,
) -> PointAggregate {
    let records: Vec<RusRecord> = (0..n_trials)
        .into_par_iter()
        .map(|i| rus_inject(cfg, noise, &mut streams.trial(i)))
        .collect();
    let mut agg = PointAggregate::default();
    for rec in &records {
        agg.push(rec);
    }
    agg
}
