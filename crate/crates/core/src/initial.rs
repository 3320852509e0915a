//! Admissible initial states at prescribed energy and invariant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{energy, ClassState, SemiState};
use crate::error::{Error, Result};
use crate::maxent::{multipliers_from_means, MultiplierState};
use crate::model::{HybridParams, PotentialSpec, DEFAULT_HBAR};

/// Relative tolerance for clamping a slightly negative radicand to zero.
pub const RADICAND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Requested initial condition. `xx0 = None` selects the midpoint of
/// [`xx0_interval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ICRequest {
    pub e: f64,
    pub i: f64,
    pub l0: f64,
    pub xx0: Option<f64>,
    pub a0: f64,
    pub pa_sign: Sign,
    pub hbar: f64,
}

impl ICRequest {
    pub fn new(e: f64, i: f64) -> Self {
        Self { e, i, l0: 0.0, xx0: None, a0: 0.0, pa_sign: Sign::Plus, hbar: DEFAULT_HBAR }
    }

    pub fn with_xx0(mut self, xx0: f64) -> Self {
        self.xx0 = Some(xx0);
        self
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    /// Same request with `I = 0`.
    pub fn classical(mut self) -> Self {
        self.i = 0.0;
        self
    }

    fn resolve_xx0(&self, p: &HybridParams) -> Result<f64> {
        match self.xx0 {
            Some(x) => Ok(x),
            None => {
                let (lo, hi) = xx0_interval_at(p, self.e, self.i, self.l0, self.a0)?;
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Clamp a radicand within `RADICAND_TOL * scale` of zero, or fail.
fn clamp_radicand(r: f64, scale: f64, what: &str) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::NonFinite(format!("{what} radicand {r}")));
    }
    if r >= 0.0 {
        Ok(r)
    } else if r >= -RADICAND_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::Infeasible(format!("{what}: radicand {r:e} is negative")))
    }
}

/// Interval of `xx0` compatible with energy `E`, invariant `I` and `L0` at `A0 = 0`.
pub fn xx0_interval(p: &HybridParams, e: f64, i: f64, l0: f64) -> Result<(f64, f64)> {
    xx0_interval_at(p, e, i, l0, 0.0)
}

/// [`xx0_interval`] at a general `A0`. The stiffness becomes `a1 + g V(A0)`
/// and the `F(A0)` and `a3 L0` terms are removed from the energy first.
pub fn xx0_interval_at(p: &HybridParams, e: f64, i: f64, l0: f64, a0: f64) -> Result<(f64, f64)> {
    let k = p.stiffness(a0);
    if !(k > 0.0 && p.alpha2 > 0.0) {
        return Err(Error::Parameter(format!(
            "interval needs a1 + g V(A0) > 0 and a2 > 0, got {k} and {}",
            p.alpha2
        )));
    }
    if !(i >= 0.0) {
        return Err(Error::Parameter(format!("I must be >= 0, got {i}")));
    }
    let e_eff = e - 0.5 * (p.beta1 * p.f.eval(a0) + p.alpha3 * l0);
    let il = i + 0.25 * l0 * l0;
    let c = e_eff / k;
    let r = clamp_radicand(c * c - p.alpha2 / k * il, c * c, "xx0 interval")?;
    if c <= 0.0 {
        return Err(Error::Infeasible(format!("energy {e} leaves no room for the oscillator")));
    }
    let s = r.sqrt();
    Ok((c - s, c + s))
}

/// `pp0 = (I + L0^2 / 4) / xx0`.
pub fn pp0_from_invariant(xx0: f64, i: f64, l0: f64) -> Result<f64> {
    if !(xx0 > 0.0) {
        return Err(Error::Domain(format!("xx0 must be > 0, got {xx0}")));
    }
    Ok((i + 0.25 * l0 * l0) / xx0)
}

/// Signed `P_A` closing the energy budget.
pub fn pa0_from_energy(
    p: &HybridParams,
    xx0: f64,
    pp0: f64,
    l0: f64,
    a0: f64,
    e: f64,
    sign: Sign,
) -> Result<f64> {
    if p.beta2 == 0.0 {
        return Err(Error::Parameter("beta2 = 0: P_A does not enter the energy".into()));
    }
    let rest = p.alpha1 * xx0
        + p.alpha2 * pp0
        + p.alpha3 * l0
        + p.beta1 * p.f.eval(a0)
        + p.gamma * p.v.eval(a0) * xx0;
    let r = clamp_radicand((2.0 * e - rest) / p.beta2, (2.0 * e).abs() / p.beta2.abs(), "P_A")?;
    Ok(sign.value() * r.sqrt())
}

fn assemble(req: &ICRequest, p: &HybridParams, i: f64) -> Result<(f64, f64, f64)> {
    let xx0 = req.resolve_xx0(p)?;
    let pp0 = pp0_from_invariant(xx0, i, req.l0)?;
    let pa0 = pa0_from_energy(p, xx0, pp0, req.l0, req.a0, req.e, req.pa_sign)?;
    Ok((xx0, pp0, pa0))
}

/// Semiclassical state with invariant `req.i` and energy `req.e`.
/// Accepts `I >= hbar^2 / 4`.
pub fn build_semiclassical_ic(req: &ICRequest, p: &HybridParams) -> Result<SemiState> {
    let floor = 0.25 * req.hbar * req.hbar;
    if !(req.i >= floor) {
        return Err(Error::Infeasible(format!("I = {:e} is below hbar^2/4 = {floor:e}", req.i)));
    }
    let (xx0, pp0, pa0) = assemble(req, p, req.i)?;
    Ok(SemiState::new(xx0, pp0, req.l0, req.a0, pa0))
}

/// Classical state (`I = 0`) with energy `req.e`.
pub fn build_classical_ic(req: &ICRequest, p: &HybridParams) -> Result<ClassState> {
    if req.i != 0.0 {
        return Err(Error::Parameter(format!("classical IC needs I = 0, got {}", req.i)));
    }
    let (xx0, pp0, pa0) = assemble(req, p, 0.0)?;
    Ok(ClassState::new(xx0, pp0, req.l0, req.a0, pa0))
}

/// Multipliers matching the moments of `s`.
pub fn build_multiplier_ic(s: &SemiState, hbar: f64) -> Result<MultiplierState> {
    let (l1, l2, l3) = multipliers_from_means(s.xx, s.pp, s.l, hbar)?;
    Ok(MultiplierState { l1, l2, l3, a: s.a, pa: s.pa })
}

/// Relative energy mismatch of a built state, for checks.
pub fn energy_residual(p: &HybridParams, s: &SemiState, e: f64) -> f64 {
    (energy(p, s) - e).abs() / e.abs().max(f64::MIN_POSITIVE)
}

/// Analytic Jacobian of the mean-value field at `u = (xx, pp, L, A, P_A)`.
pub fn jacobian(p: &HybridParams, u: [f64; 5]) -> [[f64; 5]; 5] {
    let [xx, _, l, a, _] = u;
    let w = p.stiffness(a);
    let v1 = p.gamma * p.v.eval_deriv(a);
    let v2 = p.gamma * p.v.eval_second_deriv(a);
    let f2 = p.beta1 * p.f.eval_second_deriv(a);
    [
        [2.0 * p.alpha3, 0.0, p.alpha2, 0.0, 0.0],
        [0.0, -2.0 * p.alpha3, -w, -v1 * l, 0.0],
        [-2.0 * w, 2.0 * p.alpha2, 0.0, -2.0 * v1 * xx, 0.0],
        [0.0, 0.0, 0.0, 0.0, p.beta2],
        [-0.5 * v1, 0.0, 0.0, -0.5 * (f2 + v2 * xx), -p.eta],
    ]
}

fn max_abs_entry(j: &[[f64; 5]; 5]) -> f64 {
    j.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Radical inverse of `k` in base `b`.
fn radical_inverse(mut k: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % b) as f64 * f;
        k /= b;
        f *= inv;
    }
    r
}

/// Upper estimate of `max |df_i/du_k|` over a box of `(xx, pp, L, A, P_A)`.
///
/// Evaluates the Jacobian at `samples` points of a Halton sequence shifted
/// by a seeded random offset, at every box vertex, and at the exact extrema
/// in `A` of each entry. Every entry is a polynomial in `A` times at most one
/// affine factor in `xx` or `L`, so the extremal part alone is the supremum
/// and the result is monotone under box inclusion.
pub fn lipschitz_bound_estimate(
    p: &HybridParams,
    bounds: &[(f64, f64); 5],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("box side {k} = [{lo}, {hi}] is empty or non-finite")));
        }
    }
    let mut best = exact_entry_bound(p, bounds);

    let mut vertex = [0.0; 5];
    for mask in 0..32u32 {
        for (k, v) in vertex.iter_mut().enumerate() {
            *v = if mask >> k & 1 == 0 { bounds[k].0 } else { bounds[k].1 };
        }
        best = best.max(max_abs_entry(&jacobian(p, vertex)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 5] = std::array::from_fn(|_| rng.gen::<f64>());
    const BASES: [u64; 5] = [2, 3, 5, 7, 11];
    for n in 1..=samples as u64 {
        let u: [f64; 5] = std::array::from_fn(|k| {
            let t = (radical_inverse(n, BASES[k]) + shift[k]).fract();
            bounds[k].0 + t * (bounds[k].1 - bounds[k].0)
        });
        best = best.max(max_abs_entry(&jacobian(p, u)));
    }
    Ok(best)
}

fn exact_entry_bound(p: &HybridParams, b: &[(f64, f64); 5]) -> f64 {
    let (alo, ahi) = b[3];
    let mag = |r: (f64, f64)| r.0.abs().max(r.1.abs());
    let stiff = p.v.combine(p.gamma, &constant(p.alpha1), 1.0);
    let dv = p.v.derivative().combine(p.gamma, &PotentialSpec::zero(), 0.0);
    let max_dv = dv.max_abs_on(alo, ahi);
    let curvature = |xx: f64| {
        p.f.derivative()
            .derivative()
            .combine(p.beta1, &p.v.derivative().derivative(), p.gamma * xx)
            .max_abs_on(alo, ahi)
    };
    [
        2.0 * p.alpha3.abs(),
        p.alpha2.abs(),
        2.0 * p.alpha2.abs(),
        p.beta2.abs(),
        p.eta.abs(),
        2.0 * stiff.max_abs_on(alo, ahi),
        max_dv * mag(b[2]),
        2.0 * max_dv * mag(b[0]),
        0.5 * max_dv,
        0.5 * curvature(b[0].0).max(curvature(b[0].1)),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn constant(c: f64) -> PotentialSpec {
    PotentialSpec::new(vec![c]).expect("finite constant")
}
