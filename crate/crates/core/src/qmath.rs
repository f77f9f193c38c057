//! Small dense complex linear algebra for one- and two-qubit states.
//!
//! Everything here works on fixed 2×2 and 4×4 matrices. Two-qubit operators
//! are ordered `data ⊗ ancilla`, so basis index `2 * data + ancilla`.
//!
//! Validated wrappers ([`DensityMatrix`], [`TwoQubitState`], [`PureState`])
//! can only be built through checked constructors; channel and gate
//! applications return wrappers whose invariants follow from the map being
//! CPTP, so the hot simulation path does not re-validate.

use nalgebra::{Complex, Matrix2, Matrix4, Vector2};
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

use crate::error::DomainError;

pub type C64 = Complex<f64>;
pub type Op2 = Matrix2<C64>;
pub type Op4 = Matrix4<C64>;

/// Absolute tolerance for every matrix invariant.
pub const STATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),
    #[error("not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("state vector is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("operator is not unitary (max |UU† - I| = {0:e})")]
    NotUnitary(f64),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{iπ/4}` written out so that `T` is exact to the last bit.
pub const OMEGA: C64 = C64 {
    re: FRAC_1_SQRT_2,
    im: FRAC_1_SQRT_2,
};

/// Constant gates.
pub mod gates {
    use super::*;

    pub fn identity() -> Op2 {
        Op2::identity()
    }

    pub fn x() -> Op2 {
        Op2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
    }

    pub fn y() -> Op2 {
        Op2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
    }

    pub fn z() -> Op2 {
        Op2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
    }

    pub fn h() -> Op2 {
        let r = FRAC_1_SQRT_2;
        Op2::new(c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0))
    }

    pub fn s() -> Op2 {
        Op2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0))
    }

    pub fn sdg() -> Op2 {
        Op2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0))
    }

    pub fn t() -> Op2 {
        Op2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), OMEGA)
    }

    pub fn tdg() -> Op2 {
        Op2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), OMEGA.conj())
    }

    /// CNOT with the first (data) qubit as control and the second (ancilla)
    /// as target.
    pub fn cnot() -> Op4 {
        let mut m = Op4::zeros();
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0, 0.0);
        m[(2, 3)] = c(1.0, 0.0);
        m[(3, 2)] = c(1.0, 0.0);
        m
    }
}

fn max_unitarity_defect2(u: &Op2) -> f64 {
    (u * u.adjoint() - Op2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn max_unitarity_defect4(u: &Op4) -> f64 {
    (u * u.adjoint() - Op4::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_unitary2(u: &Op2) -> bool {
    max_unitarity_defect2(u) <= STATE_TOL
}

pub fn is_unitary4(u: &Op4) -> bool {
    max_unitarity_defect4(u) <= STATE_TOL
}

/// Normalized single-qubit state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState(Vector2<C64>);

impl PureState {
    pub fn new(a0: C64, a1: C64) -> Result<Self, StateError> {
        let norm2 = a0.norm_sqr() + a1.norm_sqr();
        if (norm2 - 1.0).abs() > STATE_TOL {
            return Err(StateError::NotNormalized(norm2));
        }
        Ok(Self(Vector2::new(a0, a1)))
    }

    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn from_bloch_angles(theta: f64, phi: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self(Vector2::new(c(co, 0.0), C64::from_polar(s, phi)))
    }

    pub fn zero() -> Self {
        Self(Vector2::new(c(1.0, 0.0), c(0.0, 0.0)))
    }

    pub fn one() -> Self {
        Self(Vector2::new(c(0.0, 0.0), c(1.0, 0.0)))
    }

    pub fn plus() -> Self {
        Self(Vector2::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)))
    }

    pub fn minus() -> Self {
        Self(Vector2::new(c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)))
    }

    /// The magic state `|A⟩ = T|+⟩`.
    pub fn magic() -> Self {
        Self::plus().apply(&gates::t())
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.0[0], self.0[1]]
    }

    /// Applies a unitary. The caller is trusted to pass one of the gates above.
    pub fn apply(&self, u: &Op2) -> Self {
        Self(u * self.0)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(self.0 * self.0.adjoint())
    }
}

/// A validated 2×2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Op2);

impl DensityMatrix {
    pub fn new(m: Op2) -> Result<Self, StateError> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > STATE_TOL {
            return Err(StateError::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(StateError::InvalidTrace(tr.re));
        }
        let min = hermitian2_eigenvalues(&m).0;
        if min < -STATE_TOL {
            return Err(StateError::NotPsd(min));
        }
        Ok(Self(m))
    }

    /// Builds `(I + xX + yY + zZ) / 2`. Fails when the vector leaves the ball.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self, StateError> {
        let [x, y, z] = r;
        let m = Op2::new(
            c((1.0 + z) / 2.0, 0.0),
            c(x / 2.0, -y / 2.0),
            c(x / 2.0, y / 2.0),
            c((1.0 - z) / 2.0, 0.0),
        );
        Self::new(m)
    }

    pub fn maximally_mixed() -> Self {
        Self(Op2::identity() * c(0.5, 0.0))
    }

    pub fn matrix(&self) -> &Op2 {
        &self.0
    }

    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.0;
        [
            2.0 * m[(1, 0)].re,
            2.0 * m[(1, 0)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ]
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        hermitian2_eigenvalues(&self.0)
    }

    /// Conjugation by a unitary without the unitarity check.
    pub(crate) fn conjugate(&self, u: &Op2) -> Self {
        Self(u * self.0 * u.adjoint())
    }

    /// `self ⊗ other`, ordered with `self` as the first (data) factor.
    pub fn tensor(&self, other: &DensityMatrix) -> TwoQubitState {
        let mut m = Op4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        m[(2 * i + a, 2 * j + b)] = self.0[(i, j)] * other.0[(a, b)];
                    }
                }
            }
        }
        TwoQubitState(m)
    }

    /// Maximum absolute entrywise difference.
    pub fn distance_max(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Closed-form eigenvalues `(min, max)` of a 2×2 Hermitian matrix.
fn hermitian2_eigenvalues(m: &Op2) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)].norm();
    let mean = (a + d) / 2.0;
    let radius = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// A validated 4×4 two-qubit density matrix, ordered `data ⊗ ancilla`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState(Op4);

impl TwoQubitState {
    /// PSD is checked with nalgebra's Hermitian eigen-solver.
    pub fn new(m: Op4) -> Result<Self, StateError> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > STATE_TOL {
            return Err(StateError::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(StateError::InvalidTrace(tr.re));
        }
        let min = min_eigenvalue4(&m);
        if min < -STATE_TOL {
            return Err(StateError::NotPsd(min));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Op4 {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue4(&self.0)
    }

    pub(crate) fn conjugate(&self, u: &Op4) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

fn min_eigenvalue4(m: &Op4) -> f64 {
    // Symmetrize so the solver sees an exactly Hermitian input.
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// States that can be evolved by a unitary of matching dimension.
///
/// Dimension mismatches are rejected at compile time through the associated
/// operator type.
pub trait QuantumState: Sized {
    type Operator;

    fn check_unitary(u: &Self::Operator) -> Result<(), StateError>;
    fn conjugate_by(&self, u: &Self::Operator) -> Self;
}

impl QuantumState for DensityMatrix {
    type Operator = Op2;

    fn check_unitary(u: &Op2) -> Result<(), StateError> {
        let defect = max_unitarity_defect2(u);
        if defect > STATE_TOL {
            return Err(StateError::NotUnitary(defect));
        }
        Ok(())
    }

    fn conjugate_by(&self, u: &Op2) -> Self {
        self.conjugate(u)
    }
}

impl QuantumState for TwoQubitState {
    type Operator = Op4;

    fn check_unitary(u: &Op4) -> Result<(), StateError> {
        let defect = max_unitarity_defect4(u);
        if defect > STATE_TOL {
            return Err(StateError::NotUnitary(defect));
        }
        Ok(())
    }

    fn conjugate_by(&self, u: &Op4) -> Self {
        self.conjugate(u)
    }
}

/// `U ρ U†`, rejecting non-unitary `U`.
pub fn apply_unitary<S: QuantumState>(state: &S, u: &S::Operator) -> Result<S, StateError> {
    S::check_unitary(u)?;
    Ok(state.conjugate_by(u))
}

/// Squared overlap `⟨φ|ρ|φ⟩`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &PureState) -> f64 {
    let v = target.0;
    let value = (v.adjoint() * rho.0 * v)[(0, 0)];
    debug_assert!(value.im.abs() <= STATE_TOL, "fidelity has imaginary part {}", value.im);
    value.re.clamp(0.0, 1.0)
}

fn check_prob(name: &'static str, value: f64, max: f64) -> Result<(), DomainError> {
    if !(0.0..=max).contains(&value) {
        return Err(DomainError::new(name, value, format!("0 <= {name} <= {max}")));
    }
    Ok(())
}

/// `(1 - p) ρ + p ZρZ`, for `0 <= p <= 1/2`.
pub fn dephasing_channel(rho: &DensityMatrix, p_z: f64) -> Result<DensityMatrix, DomainError> {
    check_prob("p_z", p_z, 0.5)?;
    Ok(dephase(rho, p_z))
}

pub(crate) fn dephase(rho: &DensityMatrix, p_z: f64) -> DensityMatrix {
    let z = gates::z();
    let m = rho.0 * c(1.0 - p_z, 0.0) + z * rho.0 * z * c(p_z, 0.0);
    DensityMatrix(m)
}

/// `(1 - p) ρ + (p/3)(XρX + YρY + ZρZ)`, for `0 <= p <= 3/4`.
pub fn depolarizing_channel(rho: &DensityMatrix, p_dep: f64) -> Result<DensityMatrix, DomainError> {
    check_prob("p_dep", p_dep, 0.75)?;
    Ok(depolarize(rho, p_dep))
}

pub(crate) fn depolarize(rho: &DensityMatrix, p_dep: f64) -> DensityMatrix {
    let (x, y, z) = (gates::x(), gates::y(), gates::z());
    let r = &rho.0;
    let paulis = x * r * x + y * r * y + z * r * z;
    DensityMatrix(r * c(1.0 - p_dep, 0.0) + paulis * c(p_dep / 3.0, 0.0))
}

/// Outcome of an `X`-basis measurement of the ancilla.
///
/// Branch states are `None` when the branch probability is at most
/// [`STATE_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XMeasurement {
    pub p_plus: f64,
    pub plus: Option<DensityMatrix>,
    pub p_minus: f64,
    pub minus: Option<DensityMatrix>,
}

/// Projects the ancilla onto `|±⟩`, traces it out, and renormalizes.
pub fn measure_ancilla_x(joint: &TwoQubitState) -> XMeasurement {
    let m = &joint.0;
    let branch = |sign: f64| -> (f64, Option<DensityMatrix>) {
        // ρ_data[i][j] = ⟨i,±|ρ|j,±⟩ with |±⟩ = (|0⟩ ± |1⟩)/√2
        let mut red = Op2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        let w = if a == 0 { 1.0 } else { sign } * if b == 0 { 1.0 } else { sign };
                        acc += m[(2 * i + a, 2 * j + b)] * (0.5 * w);
                    }
                }
                red[(i, j)] = acc;
            }
        }
        let p = red.trace().re.clamp(0.0, 1.0);
        if p <= STATE_TOL {
            return (p, None);
        }
        let mut rho = red * c(1.0 / p, 0.0);
        // re-Hermitize against rounding
        rho = (rho + rho.adjoint()) * c(0.5, 0.0);
        (p, Some(DensityMatrix(rho)))
    };
    let (p_plus, plus) = branch(1.0);
    let (p_minus, minus) = branch(-1.0);
    XMeasurement {
        p_plus,
        plus,
        p_minus,
        minus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: &DensityMatrix, b: &DensityMatrix, tol: f64) {
        let d = a.distance_max(b);
        assert!(d <= tol, "matrices differ by {d:e}\n{a:?}\n{b:?}");
    }

    fn valid(rho: &DensityMatrix) {
        DensityMatrix::new(*rho.matrix()).expect("output must be a valid density matrix");
    }

    fn bloch_ball() -> impl Strategy<Value = [f64; 3]> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y, z, r)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-9);
            let scale = r.cbrt() / n;
            [x * scale, y * scale, z * scale]
        })
    }

    #[test]
    fn gates_are_unitary() {
        for g in [
            gates::x(),
            gates::y(),
            gates::z(),
            gates::h(),
            gates::s(),
            gates::sdg(),
            gates::t(),
            gates::tdg(),
        ] {
            assert!(is_unitary2(&g));
        }
        assert!(is_unitary4(&gates::cnot()));
        assert!((gates::t()[(1, 1)] - C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-15);
        let t2 = gates::t() * gates::t();
        assert!((t2 - gates::s()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn fidelity_examples() {
        let plus = PureState::plus();
        assert!((fidelity_pure(&plus.projector(), &plus) - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fidelity_pure(&mixed, &PureState::magic()) - 0.5).abs() < 1e-15);
        assert!((fidelity_pure(&PureState::zero().projector(), &plus) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_states_rejected() {
        let not_herm = Op2::new(c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0));
        assert!(matches!(DensityMatrix::new(not_herm), Err(StateError::NotHermitian(_))));
        let bad_trace = Op2::new(c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.6, 0.0));
        assert!(matches!(DensityMatrix::new(bad_trace), Err(StateError::InvalidTrace(_))));
        assert!(matches!(DensityMatrix::from_bloch([1.0, 1.0, 0.0]), Err(StateError::NotPsd(_))));
        assert!(PureState::new(c(1.0, 0.0), c(1.0, 0.0)).is_err());
        let mut neg = Op4::zeros();
        neg[(0, 0)] = c(1.5, 0.0);
        neg[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(TwoQubitState::new(neg), Err(StateError::NotPsd(_))));
    }

    #[test]
    fn dephasing_examples() {
        let plus = PureState::plus().projector();
        assert_close(&dephasing_channel(&plus, 0.0).unwrap(), &plus, 0.0);
        assert_close(
            &dephasing_channel(&plus, 0.5).unwrap(),
            &DensityMatrix::maximally_mixed(),
            1e-15,
        );
        let out = dephasing_channel(&plus, 0.1).unwrap();
        let ratio = out.matrix()[(0, 1)] / plus.matrix()[(0, 1)];
        assert!((ratio.re - 0.8).abs() < 1e-12 && ratio.im.abs() < 1e-12);
        assert_eq!(out.matrix()[(0, 0)], plus.matrix()[(0, 0)]);
        assert!(dephasing_channel(&plus, 0.51).is_err());
        assert!(dephasing_channel(&plus, -0.01).is_err());
    }

    #[test]
    fn depolarizing_examples() {
        let zero = PureState::zero().projector();
        assert_close(&depolarizing_channel(&zero, 0.0).unwrap(), &zero, 0.0);
        assert_close(
            &depolarizing_channel(&PureState::magic().projector(), 0.75).unwrap(),
            &DensityMatrix::maximally_mixed(),
            1e-15,
        );
        let out = depolarizing_channel(&zero, 0.3).unwrap();
        let expected = DensityMatrix::from_bloch([0.0, 0.0, 0.6]).unwrap();
        assert_close(&out, &expected, 1e-15);
        assert!((out.matrix()[(0, 0)].re - 0.8).abs() < 1e-15);
        assert!(depolarizing_channel(&zero, 0.76).is_err());
    }

    #[test]
    fn unitary_examples() {
        let zero = PureState::zero().projector();
        let one = apply_unitary(&zero, &gates::x()).unwrap();
        assert_close(&one, &PureState::one().projector(), 0.0);

        let a = apply_unitary(&PureState::plus().projector(), &gates::t()).unwrap();
        assert_close(&a, &PureState::magic().projector(), 1e-15);
        // ⟨0|A⟩⟨A|1⟩ = e^{-iπ/4}/2
        let off = a.matrix()[(0, 1)];
        assert!((off - OMEGA.conj() * 0.5).norm() < 1e-15);

        let zz = zero.tensor(&zero);
        let out = apply_unitary(&zz, &gates::cnot()).unwrap();
        assert_eq!(out, zz);

        let not_unitary = Op2::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(apply_unitary(&zero, &not_unitary), Err(StateError::NotUnitary(_))));
    }

    #[test]
    fn measurement_of_prepared_ancilla() {
        let data = DensityMatrix::from_bloch([0.3, -0.2, 0.5]).unwrap();
        let m = measure_ancilla_x(&data.tensor(&PureState::plus().projector()));
        assert!((m.p_plus - 1.0).abs() < 1e-15);
        assert_close(&m.plus.unwrap(), &data, 1e-15);
        assert!(m.p_minus.abs() < 1e-15 && m.minus.is_none());

        let m = measure_ancilla_x(&data.tensor(&PureState::minus().projector()));
        assert!(m.p_plus.abs() < 1e-15 && m.plus.is_none());
        assert_close(&m.minus.unwrap(), &data, 1e-15);
    }

    /// Reference: state vector of the gadget, projected by hand.
    fn gadget_oracle(psi: [C64; 2]) -> (f64, [C64; 2], f64, [C64; 2]) {
        let w = OMEGA;
        let r = FRAC_1_SQRT_2;
        let anc = [c(r, 0.0), w * r];
        // |ψ⟩|A⟩ then CNOT (data control): |1,a⟩ -> |1,1-a⟩
        let mut v = [C64::new(0.0, 0.0); 4];
        for d in 0..2 {
            for a in 0..2 {
                let target = if d == 1 { 1 - a } else { a };
                v[2 * d + target] += psi[d] * anc[a];
            }
        }
        let project = |s: f64| {
            let out = [(v[0] + v[1] * s) * r, (v[2] + v[3] * s) * r];
            let p = out[0].norm_sqr() + out[1].norm_sqr();
            (p, out)
        };
        let (pp, vp) = project(1.0);
        let (pm, vm) = project(-1.0);
        (pp, vp, pm, vm)
    }

    #[test]
    fn gadget_measurement_matches_state_vector_oracle() {
        let plus = PureState::plus();
        let joint = apply_unitary(
            &plus.projector().tensor(&PureState::magic().projector()),
            &gates::cnot(),
        )
        .unwrap();
        let m = measure_ancilla_x(&joint);
        let (pp, _, pm, _) = gadget_oracle(plus.amplitudes());
        // (2 + √2)/4 for this wiring
        assert!((pp - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-15);
        assert!((m.p_plus - pp).abs() < 1e-12);
        assert!((m.p_minus - pm).abs() < 1e-12);
        assert!((m.p_plus + m.p_minus - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn channels_are_cptp(r in bloch_ball(), p_z in 0.0f64..=0.5, p_dep in 0.0f64..=0.75) {
            let rho = DensityMatrix::from_bloch(r).unwrap();
            let a = dephasing_channel(&rho, p_z).unwrap();
            let b = depolarizing_channel(&rho, p_dep).unwrap();
            let composite = depolarizing_channel(&a, p_dep).unwrap();
            valid(&a);
            valid(&b);
            valid(&composite);
        }

        #[test]
        fn bloch_contraction(r in bloch_ball(), p_z in 0.0f64..=0.5, p_dep in 0.0f64..=0.75) {
            let rho = DensityMatrix::from_bloch(r).unwrap();
            let deph = dephasing_channel(&rho, p_z).unwrap().bloch();
            let f = 1.0 - 2.0 * p_z;
            prop_assert!((deph[0] - f * r[0]).abs() <= 1e-12);
            prop_assert!((deph[1] - f * r[1]).abs() <= 1e-12);
            prop_assert!((deph[2] - r[2]).abs() <= 1e-12);
            let dep = depolarizing_channel(&rho, p_dep).unwrap().bloch();
            let g = 1.0 - 4.0 * p_dep / 3.0;
            for k in 0..3 {
                prop_assert!((dep[k] - g * r[k]).abs() <= 1e-12);
            }
        }

        #[test]
        fn pauli_channels_commute(r in bloch_ball(), p_z in 0.0f64..=0.5, p_dep in 0.0f64..=0.75) {
            let rho = DensityMatrix::from_bloch(r).unwrap();
            let ab = depolarize(&dephase(&rho, p_z), p_dep);
            let ba = dephase(&depolarize(&rho, p_dep), p_z);
            prop_assert!(ab.distance_max(&ba) <= 1e-12);
        }

        #[test]
        fn measurement_branches_are_valid(
            rd in bloch_ball(), ra in bloch_ball(), use_cnot in any::<bool>()
        ) {
            let data = DensityMatrix::from_bloch(rd).unwrap();
            let anc = DensityMatrix::from_bloch(ra).unwrap();
            let mut joint = data.tensor(&anc);
            if use_cnot {
                joint = apply_unitary(&joint, &gates::cnot()).unwrap();
            }
            TwoQubitState::new(*joint.matrix()).unwrap();
            let m = measure_ancilla_x(&joint);
            prop_assert!((m.p_plus + m.p_minus - 1.0).abs() <= 1e-12);
            for (p, s) in [(m.p_plus, m.plus), (m.p_minus, m.minus)] {
                if p > STATE_TOL {
                    valid(&s.unwrap());
                }
            }
        }
    }
}
