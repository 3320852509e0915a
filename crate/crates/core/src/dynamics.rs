//! Mean-value equations of motion, the motion invariant and the energy.
//!
//! The semiclassical system evolves `(<x^2>, <p^2>, <L>, A, P_A)` and the
//! classical analogue evolves `(x^2, p^2, L = 2xp, A, P_A)`. Both obey the
//! same functional form, so they share one implementation parameterized by
//! a marker type.

use std::fmt;
use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::model::HybridParams;

/// Marker for quantum expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantum {}

/// Marker for c-number classical variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classical {}

/// Phase point `(xx, pp, L, A, P_A)`.
pub struct PhaseState<K> {
    pub xx: f64,
    pub pp: f64,
    pub l: f64,
    pub a: f64,
    pub pa: f64,
    kind: PhantomData<K>,
}

pub type SemiState = PhaseState<Quantum>;
pub type ClassState = PhaseState<Classical>;

// Manual impls: derives would put bounds on the marker type.
impl<K> Clone for PhaseState<K> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<K> Copy for PhaseState<K> {}

impl<K> PartialEq for PhaseState<K> {
    fn eq(&self, o: &Self) -> bool {
        self.to_array() == o.to_array()
    }
}

impl<K> fmt::Debug for PhaseState<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseState")
            .field("xx", &self.xx)
            .field("pp", &self.pp)
            .field("l", &self.l)
            .field("a", &self.a)
            .field("pa", &self.pa)
            .finish()
    }
}

impl<K> PhaseState<K> {
    pub const fn new(xx: f64, pp: f64, l: f64, a: f64, pa: f64) -> Self {
        Self { xx, pp, l, a, pa, kind: PhantomData }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Same numbers, reinterpreted under another marker.
    pub fn cast<J>(&self) -> PhaseState<J> {
        PhaseState::new(self.xx, self.pp, self.l, self.a, self.pa)
    }
}

/// Conversion between a state type and the flat vector the integrator uses.
pub trait Phase: Copy {
    fn to_array(&self) -> [f64; 5];
    fn from_array(y: [f64; 5]) -> Self;

    /// Classical coordinate `A`, the section variable.
    fn coordinate(&self) -> f64 {
        self.to_array()[3]
    }
}

impl<K> Phase for PhaseState<K> {
    fn to_array(&self) -> [f64; 5] {
        [self.xx, self.pp, self.l, self.a, self.pa]
    }

    fn from_array(y: [f64; 5]) -> Self {
        Self::new(y[0], y[1], y[2], y[3], y[4])
    }
}

/// A vector field together with the diagnostics recorded along its trajectories.
pub trait Flow: Sync {
    type State: Phase + Send + Sync;

    fn rate(&self, s: &Self::State) -> Result<Self::State>;

    /// Conserved quantity of the representation (`I` for moments, `I_lambda` for multipliers).
    fn invariant(&self, s: &Self::State) -> f64;

    /// Total energy `<H>`.
    fn energy(&self, s: &Self::State) -> f64;

    /// Lower scale used when converting invariant drift to a relative number.
    fn invariant_floor(&self) -> f64 {
        0.0
    }
}

fn moment_rhs<K>(p: &HybridParams, s: &PhaseState<K>) -> Result<PhaseState<K>> {
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("state {s:?}")));
    }
    let w = p.stiffness(s.a);
    let dxx = p.alpha2 * s.l + 2.0 * p.alpha3 * s.xx;
    let dpp = -w * s.l - 2.0 * p.alpha3 * s.pp;
    let dl = 2.0 * (p.alpha2 * s.pp - w * s.xx);
    let da = p.beta2 * s.pa;
    let dpa = -0.5 * (p.beta1 * p.f.eval_deriv(s.a) + p.gamma * p.v.eval_deriv(s.a) * s.xx)
        - p.eta * s.pa;
    let out = PhaseState::new(dxx, dpp, dl, da, dpa);
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("rate at {s:?}")));
    }
    Ok(out)
}

/// Time derivative of the semiclassical moments and classical variables.
///
/// The classical force is `-dH/dA - eta P_A`, i.e. `-(b1 F' + g V' <x^2>)/2 - eta P_A`.
pub fn semiclassical_rhs(p: &HybridParams, s: &SemiState) -> Result<SemiState> {
    moment_rhs(p, s)
}

/// Time derivative of the fully classical analogue. Same code path as
/// [`semiclassical_rhs`].
pub fn classical_rhs(p: &HybridParams, s: &ClassState) -> Result<ClassState> {
    moment_rhs(p, s)
}

/// `I = xx pp - L^2 / 4`.
pub fn invariant_i<K>(s: &PhaseState<K>) -> f64 {
    s.xx * s.pp - 0.25 * s.l * s.l
}

/// `E = (a1 xx + a2 pp + a3 L + b1 F(A) + b2 P_A^2 + g V(A) xx) / 2`.
pub fn energy<K>(p: &HybridParams, s: &PhaseState<K>) -> f64 {
    0.5 * (p.alpha1 * s.xx
        + p.alpha2 * s.pp
        + p.alpha3 * s.l
        + p.beta1 * p.f.eval(s.a)
        + p.beta2 * s.pa * s.pa
        + p.gamma * p.v.eval(s.a) * s.xx)
}

/// Gradient of [`energy`] with respect to `(xx, pp, L, A, P_A)`.
pub fn energy_gradient<K>(p: &HybridParams, s: &PhaseState<K>) -> [f64; 5] {
    [
        0.5 * p.stiffness(s.a),
        0.5 * p.alpha2,
        0.5 * p.alpha3,
        0.5 * (p.beta1 * p.f.eval_deriv(s.a) + p.gamma * p.v.eval_deriv(s.a) * s.xx),
        p.beta2 * s.pa,
    ]
}

/// `E_r = |E| / sqrt(I)`.
pub fn relative_energy(p: &HybridParams, s: &SemiState) -> Result<f64> {
    let i = invariant_i(s);
    if !(i > 0.0) {
        return Err(Error::Domain(format!("relative energy needs I > 0, got {i}")));
    }
    Ok(energy(p, s).abs() / i.sqrt())
}

/// Semiclassical mean-value flow.
#[derive(Debug, Clone)]
pub struct SemiclassicalFlow<'a> {
    pub params: &'a HybridParams,
}

impl Flow for SemiclassicalFlow<'_> {
    type State = SemiState;

    fn rate(&self, s: &SemiState) -> Result<SemiState> {
        semiclassical_rhs(self.params, s)
    }

    fn invariant(&self, s: &SemiState) -> f64 {
        invariant_i(s)
    }

    fn energy(&self, s: &SemiState) -> f64 {
        energy(self.params, s)
    }

    fn invariant_floor(&self) -> f64 {
        0.25 * self.params.hbar * self.params.hbar
    }
}

/// Classical analogue flow.
#[derive(Debug, Clone)]
pub struct ClassicalFlow<'a> {
    pub params: &'a HybridParams,
}

impl Flow for ClassicalFlow<'_> {
    type State = ClassState;

    fn rate(&self, s: &ClassState) -> Result<ClassState> {
        classical_rhs(self.params, s)
    }

    fn invariant(&self, s: &ClassState) -> f64 {
        invariant_i(s)
    }

    fn energy(&self, s: &ClassState) -> f64 {
        energy(self.params, s)
    }
}
