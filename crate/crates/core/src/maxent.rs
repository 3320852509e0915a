//! Maximum-entropy statistical operator for the quadratic algebra
//! `{x^2, p^2, L}`: Lagrange multipliers, their dynamics, the thermal-like
//! spectrum and entropy.
//!
//! Every closed form is written in terms of `x = hbar * I_lambda`, which can
//! be as small as `1e-30` for macroscopic `I` at `hbar = 1e-40`. The literal
//! exponentials cancel catastrophically there, so `expm1`/`artanh`/series
//! forms are used throughout.

use std::io::{self, Write};

use crate::dynamics::{energy, Flow, Phase, SemiState};
use crate::error::{Error, Result};
use crate::model::HybridParams;
use crate::output::{neumaier_sum, sci};

/// Below this argument the series branches are used.
const SERIES_CUTOFF: f64 = 1e-4;

/// Valid range of `hbar * I_lambda` for [`lambda0`].
pub const LAMBDA0_RANGE: (f64, f64) = (1e-300, 700.0);

/// Tail mass below which [`spectrum`] stops extending.
pub const TAIL_TOLERANCE: f64 = 1e-15;

/// Hard cap on the number of eigenvalues materialized.
pub const MAX_LEVELS: usize = 1 << 20;

pub const DEFAULT_LEVELS: usize = 64;

/// Lagrange multipliers of `x^2`, `p^2`, `L` and the classical pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierState {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub a: f64,
    pub pa: f64,
}

impl MultiplierState {
    /// Checked constructor.
    pub fn new(l1: f64, l2: f64, l3: f64, a: f64, pa: f64) -> Result<Self> {
        let m = Self { l1, l2, l3, a, pa };
        m.check()?;
        Ok(m)
    }

    /// Multipliers reproducing the moments of `s`.
    pub fn from_means(s: &SemiState, hbar: f64) -> Result<Self> {
        let (l1, l2, l3) = multipliers_from_means(s.xx, s.pp, s.l, hbar)?;
        Ok(Self { l1, l2, l3, a: s.a, pa: s.pa })
    }

    /// Moment state carrying the same classical pair.
    pub fn to_means(&self, hbar: f64) -> Result<SemiState> {
        let (xx, pp, l) = means_from_multipliers(self, hbar)?;
        Ok(SemiState::new(xx, pp, l, self.a, self.pa))
    }

    pub fn check(&self) -> Result<()> {
        if !(self.l1 > 0.0) {
            return Err(Error::Domain(format!("lambda1 > 0 violated ({})", self.l1)));
        }
        if !(self.l2 > 0.0) {
            return Err(Error::Domain(format!("lambda2 > 0 violated ({})", self.l2)));
        }
        let det = self.l1 * self.l2 - self.l3 * self.l3;
        if !(det > 0.0) || !self.l3.is_finite() {
            return Err(Error::Domain(format!(
                "lambda1 lambda2 - lambda3^2 > 0 violated ({det})"
            )));
        }
        Ok(())
    }
}

impl Phase for MultiplierState {
    fn to_array(&self) -> [f64; 5] {
        [self.l1, self.l2, self.l3, self.a, self.pa]
    }

    fn from_array(y: [f64; 5]) -> Self {
        Self { l1: y[0], l2: y[1], l3: y[2], a: y[3], pa: y[4] }
    }
}

/// `I_lambda = sqrt(l1 l2 - l3^2)`.
pub fn i_lambda(m: &MultiplierState) -> Result<f64> {
    m.check()?;
    Ok((m.l1 * m.l2 - m.l3 * m.l3).sqrt())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `-ln(2 sinh x)` for any finite `x > 0`.
fn neg_log_2sinh(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let x2 = x * x;
        -(2.0 * x).ln() - x2 / 6.0 + x2 * x2 / 180.0
    } else {
        -x - (-(-2.0 * x).exp_m1()).ln()
    }
}

/// Normalization multiplier `lambda0 = -ln(2 sinh(hbar I_lambda))`.
pub fn lambda0(i_lambda: f64, hbar: f64) -> Result<f64> {
    check_positive("I_lambda", i_lambda)?;
    check_positive("hbar", hbar)?;
    let x = hbar * i_lambda;
    let (lo, hi) = LAMBDA0_RANGE;
    if !(lo..=hi).contains(&x) {
        return Err(Error::Range(format!("hbar I_lambda = {x:e} outside [{lo:e}, {hi}]")));
    }
    Ok(neg_log_2sinh(x))
}

/// `T(I_lambda) = (hbar / 2) coth(hbar I_lambda)`, which equals `sqrt(I)`.
pub fn t_of(i_lambda: f64, hbar: f64) -> Result<f64> {
    check_positive("I_lambda", i_lambda)?;
    check_positive("hbar", hbar)?;
    let x = hbar * i_lambda;
    let t = if x < SERIES_CUTOFF {
        0.5 / i_lambda + hbar * hbar * i_lambda / 6.0
    } else {
        0.5 * hbar / x.tanh()
    };
    if !t.is_finite() {
        return Err(Error::Range(format!("T overflows for I_lambda = {i_lambda:e}")));
    }
    Ok(t)
}

/// `artanh(y) / y`.
fn artanh_ratio(y: f64) -> f64 {
    if y < SERIES_CUTOFF {
        let y2 = y * y;
        1.0 + y2 / 3.0 + y2 * y2 / 5.0
    } else {
        y.atanh() / y
    }
}

fn uncertainty_arg(i: f64, hbar: f64) -> Result<(f64, f64)> {
    check_positive("hbar", hbar)?;
    if !i.is_finite() {
        return Err(Error::Domain(format!("I must be finite, got {i}")));
    }
    let floor = 0.25 * hbar * hbar;
    if !(i > floor) {
        return Err(Error::Domain(format!("I = {i:e} must exceed hbar^2/4 = {floor:e}")));
    }
    let root = i.sqrt();
    let y = hbar / (2.0 * root);
    if !(y < 1.0) {
        return Err(Error::Domain(format!("I = {i:e} too close to hbar^2/4")));
    }
    Ok((root, y))
}

/// `I_lambda = artanh(hbar / (2 sqrt I)) / hbar`, the inverse of [`t_of`]`^2`.
pub fn i_lambda_from_i(i: f64, hbar: f64) -> Result<f64> {
    let (root, y) = uncertainty_arg(i, hbar)?;
    Ok(artanh_ratio(y) / (2.0 * root))
}

/// `1 / I_lambda` evaluated as `2 sqrt(I) / (artanh(y)/y)`; never exceeds
/// `2 sqrt(I)` in floating point.
pub fn pseudo_temperature_from_i(i: f64, hbar: f64) -> Result<f64> {
    let (root, y) = uncertainty_arg(i, hbar)?;
    Ok(2.0 * root / artanh_ratio(y))
}

/// `(xx, pp, L) = (T / I_lambda) (l2, l1, -2 l3)`.
pub fn means_from_multipliers(m: &MultiplierState, hbar: f64) -> Result<(f64, f64, f64)> {
    let il = i_lambda(m)?;
    let r = t_of(il, hbar)? / il;
    Ok((r * m.l2, r * m.l1, -2.0 * r * m.l3))
}

/// Inverse of [`means_from_multipliers`]; returns `(l1, l2, l3)`.
pub fn multipliers_from_means(xx: f64, pp: f64, l: f64, hbar: f64) -> Result<(f64, f64, f64)> {
    if !(xx > 0.0 && pp > 0.0) || !l.is_finite() {
        return Err(Error::Domain(format!("need xx > 0, pp > 0, finite L; got ({xx}, {pp}, {l})")));
    }
    let i = xx * pp - 0.25 * l * l;
    let (_, y) = uncertainty_arg(i, hbar)?;
    // I_lambda / sqrt(I)
    let k = artanh_ratio(y) / (2.0 * i);
    if !k.is_finite() {
        return Err(Error::Range(format!("multipliers overflow for I = {i:e}")));
    }
    Ok((k * pp, k * xx, -0.5 * k * l))
}

/// Equations of motion for the multipliers and the classical pair.
///
/// `I_lambda` is a constant of motion, so `T / I_lambda` is evaluated once per
/// call from the current state.
pub fn multiplier_rhs(p: &HybridParams, m: &MultiplierState) -> Result<MultiplierState> {
    let il = i_lambda(m)?;
    let r = t_of(il, p.hbar)? / il;
    let w = p.stiffness(m.a);
    let xx = r * m.l2;
    let out = MultiplierState {
        l1: 2.0 * w * m.l3 - 2.0 * p.alpha3 * m.l1,
        l2: 2.0 * (p.alpha3 * m.l2 - p.alpha2 * m.l3),
        l3: w * m.l2 - p.alpha2 * m.l1,
        a: p.beta2 * m.pa,
        pa: -0.5 * (p.beta1 * p.f.eval_deriv(m.a) + p.gamma * p.v.eval_deriv(m.a) * xx)
            - p.eta * m.pa,
    };
    if !out.to_array().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("multiplier rate at {m:?}")));
    }
    Ok(out)
}

/// Multiplier-space flow. The recorded invariant is `I_lambda`.
#[derive(Debug, Clone, Copy)]
pub struct MultiplierFlow<'a> {
    pub params: &'a HybridParams,
}

impl Flow for MultiplierFlow<'_> {
    type State = MultiplierState;

    fn rate(&self, m: &MultiplierState) -> Result<MultiplierState> {
        multiplier_rhs(self.params, m)
    }

    fn invariant(&self, m: &MultiplierState) -> f64 {
        i_lambda(m).unwrap_or(f64::NAN)
    }

    fn energy(&self, m: &MultiplierState) -> f64 {
        m.to_means(self.params.hbar).map_or(f64::NAN, |s| energy(self.params, &s))
    }
}

/// Eigenvalues and derived scalars of the MaxEnt operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumInfo {
    pub i_lambda: f64,
    pub hbar_i_lambda: f64,
    pub lambda0: f64,
    /// Boltzmann ratio `exp(-2 hbar I_lambda)`.
    pub q: f64,
    /// `p_n = (1 - q) q^n` for `n = 0..=n_max`.
    pub eigenvalues: Vec<f64>,
    /// Analytic mass of the omitted levels, `q^(n_max + 1)`.
    pub tail_mass: f64,
    pub entropy_closed: f64,
    pub entropy_spectral: f64,
    pub purity: f64,
    pub pseudo_temperature: f64,
}

impl SpectrumInfo {
    pub fn n_max(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    /// Compensated sum of the materialized eigenvalues.
    pub fn total(&self) -> f64 {
        neumaier_sum(self.eigenvalues.iter().copied())
    }
}

/// `(q, 1 - q)` for `q = exp(-2x)`.
fn boltzmann(x: f64) -> (f64, f64) {
    ((-2.0 * x).exp(), -(-2.0 * x).exp_m1())
}

/// Levels needed for the tail mass to drop below [`TAIL_TOLERANCE`].
fn levels_for_tail(x: f64) -> usize {
    let need = (-TAIL_TOLERANCE.ln()) / (2.0 * x);
    if need >= MAX_LEVELS as f64 {
        MAX_LEVELS
    } else {
        need.ceil() as usize
    }
}

/// Spectrum `p_n = (1 - q) q^n` of the MaxEnt operator.
///
/// With `auto_extend`, `n_max` grows until the tail mass is below `1e-15`,
/// subject to [`MAX_LEVELS`]; the remaining tail is reported in `tail_mass`.
pub fn spectrum(m: &MultiplierState, hbar: f64, n_max: usize, auto_extend: bool) -> Result<SpectrumInfo> {
    check_positive("hbar", hbar)?;
    let il = i_lambda(m)?;
    let x = hbar * il;
    let (q, one_minus_q) = boltzmann(x);
    let mut levels = n_max.saturating_add(1).min(MAX_LEVELS);
    if auto_extend {
        levels = levels.max(levels_for_tail(x));
    }
    let mut eigenvalues = Vec::with_capacity(levels);
    let mut p = one_minus_q;
    for _ in 0..levels {
        eigenvalues.push(p);
        p *= q;
    }
    let tail_mass = (levels as f64 * -2.0 * x).exp();
    let t = t_of(il, hbar)?;
    Ok(SpectrumInfo {
        i_lambda: il,
        hbar_i_lambda: x,
        lambda0: neg_log_2sinh(x),
        q,
        eigenvalues,
        tail_mass,
        entropy_closed: neg_log_2sinh(x) + 2.0 * il * t,
        entropy_spectral: geometric_entropy(x),
        purity: x.tanh(),
        pseudo_temperature: 1.0 / il,
    })
}

/// `-ln(1 - q) - q ln(q) / (1 - q)` with `q = exp(-2x)`.
fn geometric_entropy(x: f64) -> f64 {
    let (q, one_minus_q) = boltzmann(x);
    -one_minus_q.ln() + 2.0 * x * q / one_minus_q
}

/// `S = lambda0 + 2 I_lambda T(I_lambda)`.
pub fn entropy_closed(m: &MultiplierState, hbar: f64) -> Result<f64> {
    check_positive("hbar", hbar)?;
    let il = i_lambda(m)?;
    Ok(neg_log_2sinh(hbar * il) + 2.0 * il * t_of(il, hbar)?)
}

/// Von Neumann entropy of the geometric spectrum, `-sum p_n ln p_n`.
pub fn entropy_spectral(info: &SpectrumInfo) -> f64 {
    geometric_entropy(info.hbar_i_lambda)
}

/// Entropy as a function of the invariant alone.
pub fn entropy_of_i(i: f64, hbar: f64) -> Result<f64> {
    let il = i_lambda_from_i(i, hbar)?;
    Ok(neg_log_2sinh(hbar * il) + 2.0 * il * t_of(il, hbar)?)
}

/// Symplectic map `x = m11 X + m12 P`, `p = m21 X + m22 P` diagonalizing
/// the MaxEnt exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformCoeffs {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl TransformCoeffs {
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }
}

pub fn transform_coeffs(m: &MultiplierState) -> Result<TransformCoeffs> {
    m.check()?;
    let g = (m.l1 * m.l2).sqrt();
    let lv = g + m.l3;
    let lt = g - m.l3;
    if !(lv > 0.0 && lt > 0.0) {
        return Err(Error::Domain(format!("lambda_V = {lv}, lambda_T = {lt} must be positive")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = (m.l2 / m.l1).powf(0.25);
    let s = (lt / lv).powf(0.25);
    Ok(TransformCoeffs { m11: h * r * s, m12: h * r / s, m21: -h * s / r, m22: h / (r * s) })
}

/// Max relative residual of `d lambda0 / d lambda_i = -<O_i>` by central
/// differences with relative step `h`.
pub fn katz_gradient_check(m: &MultiplierState, hbar: f64, h: f64) -> Result<f64> {
    katz_gradient_check_with(m, hbar, h, |il| lambda0(il, hbar))
}

/// [`katz_gradient_check`] against an arbitrary `lambda0(I_lambda)`.
pub fn katz_gradient_check_with<L>(m: &MultiplierState, hbar: f64, h: f64, lambda0_of: L) -> Result<f64>
where
    L: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Parameter(format!("step must lie in (0, 1), got {h}")));
    }
    let (xx, pp, l) = means_from_multipliers(m, hbar)?;
    let cross = (m.l1 * m.l2).sqrt();
    let l0_at = |d: [f64; 3]| -> Result<f64> {
        let probe = MultiplierState { l1: m.l1 + d[0], l2: m.l2 + d[1], l3: m.l3 + d[2], ..*m };
        lambda0_of(i_lambda(&probe)?)
    };
    let steps = [h * m.l1, h * m.l2, h * cross];
    let expected = [-xx, -pp, -l];
    let scales = [xx, pp, (xx * pp).sqrt()];
    let mut worst = 0.0_f64;
    for k in 0..3 {
        let mut d = [0.0; 3];
        d[k] = steps[k];
        let up = l0_at(d)?;
        d[k] = -steps[k];
        let down = l0_at(d)?;
        let fd = (up - down) / (2.0 * steps[k]);
        worst = worst.max((fd - expected[k]).abs() / scales[k]);
    }
    Ok(worst)
}

/// One row of the entropy / classical-limit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRow {
    pub i: f64,
    pub i_lambda: f64,
    pub hbar_i_lambda: f64,
    pub lambda0: f64,
    pub q: f64,
    pub p0: f64,
    pub purity: f64,
    pub entropy: f64,
    /// `1 / I_lambda`.
    pub pseudo_temperature: f64,
    /// `(l1, l2, l3)` of the isotropic representative `xx = pp = sqrt(I)`, `L = 0`.
    pub multipliers: [f64; 3],
}

/// Spectrum summary as a function of `I` alone.
pub fn entropy_row(i: f64, hbar: f64) -> Result<EntropyRow> {
    let il = i_lambda_from_i(i, hbar)?;
    let x = hbar * il;
    let (q, p0) = boltzmann(x);
    Ok(EntropyRow {
        i,
        i_lambda: il,
        hbar_i_lambda: x,
        lambda0: lambda0(il, hbar)?,
        q,
        p0,
        purity: x.tanh(),
        entropy: neg_log_2sinh(x) + 2.0 * il * t_of(il, hbar)?,
        pseudo_temperature: pseudo_temperature_from_i(i, hbar)?,
        multipliers: [il, il, 0.0],
    })
}

/// Table of [`entropy_row`] along a strictly decreasing sequence of `I`
/// approaching `hbar^2 / 4`.
pub fn limit_diagnostics(i_sequence: &[f64], hbar: f64) -> Result<Vec<EntropyRow>> {
    if i_sequence.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("I sequence must be strictly decreasing".into()));
    }
    i_sequence.iter().map(|&i| entropy_row(i, hbar)).collect()
}

pub const ENTROPY_HEADER: &str = "I,I_lambda,hbar_I_lambda,lambda0,q,p0,purity,S,pseudo_temperature";

pub fn write_entropy_csv<W: Write>(w: &mut W, rows: &[EntropyRow]) -> io::Result<()> {
    writeln!(w, "{ENTROPY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            sci(r.i),
            sci(r.i_lambda),
            sci(r.hbar_i_lambda),
            sci(r.lambda0),
            sci(r.q),
            sci(r.p0),
            sci(r.purity),
            sci(r.entropy),
            sci(r.pseudo_temperature)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::invariant_i;
    use crate::model::{default_h1, default_h2};
    use proptest::prelude::*;

    const LN3_2: f64 = 0.549_306_144_334_054_8;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn ms(l1: f64, l2: f64, l3: f64) -> MultiplierState {
        MultiplierState::new(l1, l2, l3, 0.0, 0.0).unwrap()
    }

    #[test]
    fn i_lambda_examples() {
        assert!(rel(i_lambda(&ms(0.274653, 1.098612, 0.0)).unwrap(), 0.549306) < 1e-6);
        assert_eq!(i_lambda(&ms(1.0, 1.0, 0.0)).unwrap(), 1.0);
        let g: f64 = (2.0f64 * 3.0).sqrt();
        let near = MultiplierState { l1: 2.0, l2: 3.0, l3: g * (1.0 - 1e-12), a: 0.0, pa: 0.0 };
        assert!(i_lambda(&near).unwrap() < 1e-5);
        let bad = MultiplierState { l1: 1.0, l2: 1.0, l3: 1.0, a: 0.0, pa: 0.0 };
        let err = i_lambda(&bad).unwrap_err();
        assert!(matches!(&err, Error::Domain(s) if s.contains("lambda3^2")));
        assert!(MultiplierState::new(-1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lambda0_examples() {
        // sinh(ln3 / 2) = 1/sqrt(3)
        let want = -(2.0 / 3f64.sqrt()).ln();
        assert!(rel(lambda0(LN3_2, 1.0).unwrap(), want) < 1e-14);
        assert!((want + 0.143841).abs() < 1e-6);
        // Large argument: lambda0 ~ -x.
        let x = 300.0;
        assert!(rel(lambda0(x, 1.0).unwrap(), -x) < 1e-15);
        // Tiny argument matches -ln(2x) - x^2/6.
        let i: f64 = 3.6e-23;
        let il = 1.0 / (2.0 * i.sqrt());
        let l0 = lambda0(il, 1e-40).unwrap();
        assert!(rel(l0, -(2.0 * 1e-40 * il).ln()) < 1e-15);
        assert!((l0 - (i.sqrt() / 1e-40).ln()).abs() < 1e-12);
        assert!((l0 - 66.3).abs() < 0.05);
        assert!(matches!(lambda0(800.0, 1.0), Err(Error::Range(_))));
        assert!(matches!(lambda0(1e-320, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn lambda0_branches_agree_at_cutoff() {
        let x = SERIES_CUTOFF;
        let below = -(2.0 * x).ln() - x * x / 6.0;
        let above = neg_log_2sinh(x);
        assert!(rel(below, above) < 1e-14);
    }

    #[test]
    fn t_of_examples() {
        assert!(rel(t_of(LN3_2, 1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(t_of(50.0, 1.0).unwrap(), 0.5) < 1e-15);
        let t = t_of(8.3e10, 1e-40).unwrap();
        assert!(rel(t, 1.0 / (2.0 * 8.3e10)) < 1e-15);
        assert!(rel(t, 6.02e-12) < 1e-3);
        // Series and direct branches meet.
        let x: f64 = SERIES_CUTOFF;
        let direct = 0.5 / x.tanh();
        let series = 0.5 / x + x / 6.0;
        assert!(rel(direct, series) < 1e-14);
    }

    #[test]
    fn i_lambda_from_i_examples() {
        assert!(rel(i_lambda_from_i(1.0, 1.0).unwrap(), LN3_2) < 1e-15);
        let il = i_lambda_from_i(3.6e-23, 1e-40).unwrap();
        assert!(rel(il, 1.0 / (2.0 * 3.6e-23f64.sqrt())) < 1e-15);
        assert!(rel(il, 8.333e10) < 1e-4);
        let mut prev = 0.0;
        for eps in [1e-2, 1e-4, 1e-8, 1e-12] {
            let v = i_lambda_from_i(0.25 * (1.0 + eps), 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(matches!(i_lambda_from_i(0.25, 1.0), Err(Error::Domain(_))));
        assert!(i_lambda_from_i(0.1, 1.0).is_err());
        // Literal log formula oracle in a well-conditioned regime.
        for i in [0.3f64, 1.0, 7.5, 1e3] {
            let h = 1.0;
            let lit = ((i.sqrt() + h / 2.0) / (i.sqrt() - h / 2.0)).ln() / (2.0 * h);
            assert!(rel(i_lambda_from_i(i, h).unwrap(), lit) < 1e-12);
        }
    }

    #[test]
    fn means_and_multipliers_examples() {
        let (xx, pp, l) = means_from_multipliers(&ms(0.274653, 1.098612, 0.0), 1.0).unwrap();
        assert!(rel(xx, 2.0) < 1e-5 && rel(pp, 0.5) < 1e-5 && l == 0.0);
        let (l1, l2, l3) = multipliers_from_means(2.0, 0.5, 0.0, 1.0).unwrap();
        assert!(rel(l1, 0.274653) < 1e-5 && rel(l2, 1.098612) < 1e-5 && l3 == 0.0);
        let (a, b, _) = means_from_multipliers(&ms(2.0, 3.0, 0.5), 1.0).unwrap();
        let (c, d, _) = means_from_multipliers(&ms(3.0, 2.0, 0.5), 1.0).unwrap();
        assert!(rel(a, d) < 1e-15 && rel(b, c) < 1e-15);
        // Same I with rescaled means keeps I_lambda.
        let base = multipliers_from_means(2.0, 0.5, 0.0, 1.0).unwrap();
        let scaled = multipliers_from_means(4.0, 0.25, 0.0, 1.0).unwrap();
        let il = |t: (f64, f64, f64)| (t.0 * t.1 - t.2 * t.2).sqrt();
        assert!(rel(il(base), il(scaled)) < 1e-15);
        assert!(rel(scaled.1 / base.1, 2.0) < 1e-15);
        assert!(multipliers_from_means(0.5, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn reconstructed_invariant_matches_t_squared() {
        for (l1, l2, l3, h) in [(0.3, 1.2, 0.1, 1.0), (5e10, 2e11, -3e10, 1e-40), (2.0, 2.0, 1.9, 1e-10)] {
            let m = ms(l1, l2, l3);
            let (xx, pp, l) = means_from_multipliers(&m, h).unwrap();
            let t = t_of(i_lambda(&m).unwrap(), h).unwrap();
            assert!(rel(xx * pp - 0.25 * l * l, t * t) < 1e-12);
        }
    }

    fn rhs_oracle(p: &HybridParams, m: [f64; 5]) -> [f64; 5] {
        // Literal substitution with the hyperbolic functions written out.
        let [l1, l2, l3, a, pa] = m;
        let il = (l1 * l2 - l3 * l3).sqrt();
        let x = p.hbar * il;
        let t = if x < 1e-6 { 1.0 / (2.0 * il) } else { p.hbar / 2.0 * x.cosh() / x.sinh() };
        // F and V are either 0 or A^2 in the presets used here.
        let fp = if p.f.degree() == 2 { 2.0 * a } else { 0.0 };
        let w = p.alpha1 + p.gamma * a * a;
        [
            2.0 * w * l3 - 2.0 * p.alpha3 * l1,
            2.0 * (p.alpha3 * l2 - p.alpha2 * l3),
            w * l2 - p.alpha2 * l1,
            p.beta2 * pa,
            -0.5 * (p.beta1 * fp + p.gamma * 2.0 * a * t / il * l2)
                - p.eta * pa,
        ]
    }

    #[test]
    fn multiplier_rhs_examples() {
        let mut p = HybridParams::zero();
        p.alpha1 = 2.0;
        p.alpha2 = 3.0;
        p.hbar = 1.0;
        let m = MultiplierState { l1: 1.5, l2: 0.7, l3: 0.0, a: 0.0, pa: 0.0 };
        let d = multiplier_rhs(&p, &m).unwrap();
        assert_eq!((d.l1, d.l2), (0.0, 0.0));
        assert_eq!(d.l3, 2.0 * 0.7 - 3.0 * 1.5);

        let p = default_h1();
        let (l1, l2, l3) = multipliers_from_means(0.6, 0.289350, 0.0, 1e-40).unwrap();
        let m = MultiplierState { l1, l2, l3, a: 0.0, pa: 0.557360 };
        let d = multiplier_rhs(&p, &m).unwrap();
        let o = rhs_oracle(&p, m.to_array());
        for (a, b) in d.to_array().iter().zip(o) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{a} vs {b}");
        }
        // dI_lambda/dt = (l2 dl1 + l1 dl2 - 2 l3 dl3) / (2 I_lambda)
        let il = i_lambda(&m).unwrap();
        let di = (m.l2 * d.l1 + m.l1 * d.l2 - 2.0 * m.l3 * d.l3) / (2.0 * il);
        assert!(di.abs() < 1e-15 * il);

        let p2 = default_h2(0.0);
        let m = MultiplierState { l1: 1.1, l2: 0.8, l3: 0.3, a: 0.4, pa: -0.2 };
        let d = multiplier_rhs(&p2, &m).unwrap();
        let o = rhs_oracle(&p2, m.to_array());
        for (a, b) in d.to_array().iter().zip(o) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn uncoupled_force_ignores_multipliers() {
        let mut p = default_h2(0.0);
        p.gamma = 0.0;
        let a = multiplier_rhs(&p, &MultiplierState { l1: 1.0, l2: 1.0, l3: 0.2, a: 0.3, pa: 0.1 }).unwrap();
        let b = multiplier_rhs(&p, &MultiplierState { l1: 4.0, l2: 9.0, l3: -1.0, a: 0.3, pa: 0.1 }).unwrap();
        assert_eq!((a.a, a.pa), (b.a, b.pa));
    }

    #[test]
    fn spectrum_examples() {
        let il = LN3_2;
        let m = ms(il, il, 0.0);
        let s = spectrum(&m, 1.0, DEFAULT_LEVELS, true).unwrap();
        assert!(rel(s.q, 1.0 / 3.0) < 1e-15);
        assert!(rel(s.eigenvalues[0], 2.0 / 3.0) < 1e-15);
        assert!(rel(s.eigenvalues[3], 2.0 / 81.0) < 1e-14);
        assert!((s.total() - 1.0).abs() < 1e-15);
        assert!(s.tail_mass < TAIL_TOLERANCE);
        assert!(s.eigenvalues.windows(2).all(|w| w[1] < w[0]));
        assert!(rel(s.purity, 0.5) < 1e-15);
        assert!(rel(s.entropy_closed, 0.954771) < 1e-6);
        assert!(rel(s.entropy_closed, s.entropy_spectral) < 1e-14);
        assert!(rel(s.pseudo_temperature, 1.0 / il) < 1e-15);

        // Literal p_n = exp(-lambda0) exp(-x (2n + 1)).
        for (n, &p) in s.eigenvalues.iter().take(10).enumerate() {
            let lit = (-s.lambda0).exp() * (-il * (2 * n + 1) as f64).exp();
            assert!(rel(p, lit) < 1e-13);
        }

        let pure = spectrum(&ms(40.0, 40.0, 0.0), 1.0, 4, false).unwrap();
        assert!(pure.eigenvalues[0] >= 1.0 - 1e-16);
        assert!(pure.eigenvalues[1] < 1e-30);
        assert_eq!(pure.n_max(), 4);

        let mixed = spectrum(&ms(1e-6, 1e-6, 0.0), 1.0, 8, false).unwrap();
        assert!(mixed.purity < 1e-5);
    }

    #[test]
    fn macroscopic_spectrum_is_capped_with_exact_tail() {
        let m = MultiplierState::from_means(&SemiState::new(0.6, 0.289350, 0.0, 0.0, 0.0), 1e-40).unwrap();
        let s = spectrum(&m, 1e-40, DEFAULT_LEVELS, true).unwrap();
        assert_eq!(s.eigenvalues.len(), MAX_LEVELS);
        let total = s.total() + s.tail_mass;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rel(s.entropy_closed, s.entropy_spectral) < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let m = ms(LN3_2, LN3_2, 0.0);
        let s = entropy_closed(&m, 1.0).unwrap();
        assert!(rel(s, -0.1438410362258904 + 3f64.ln()) < 1e-12);
        let info = spectrum(&m, 1.0, 8, false).unwrap();
        assert!(rel(entropy_spectral(&info), s) < 1e-12);
        // Literal -sum p ln p over a long spectrum.
        let long = spectrum(&m, 1.0, 200, false).unwrap();
        let lit = neumaier_sum(long.eigenvalues.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()));
        assert!(rel(lit, s) < 1e-13);

        let big = entropy_of_i(0.25 * (1.0 + 1e-12), 1.0).unwrap();
        assert!((0.0..1e-10).contains(&big));
        let s = entropy_of_i(3.6e-23, 1e-40).unwrap();
        assert!((s - 67.3).abs() < 0.05);

        let ident = ms(1.0, 1.0, 0.0);
        let info = spectrum(&ident, 1.0, 8, false).unwrap();
        assert!(rel(info.q, (-2.0f64).exp()) < 1e-15);
        assert!(rel(entropy_spectral(&info), entropy_closed(&ident, 1.0).unwrap()) < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let c = transform_coeffs(&ms(1.0, 1.0, 0.0)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for v in [c.m11, c.m12, -c.m21, c.m22] {
            assert!(rel(v, h) < 1e-15);
        }
        assert!((c.det() - 1.0).abs() < 1e-15);
        let c = transform_coeffs(&ms(4.0, 1.0, 0.0)).unwrap();
        assert!(rel(c.m11, 0.5) < 1e-15);
        assert!((c.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transform_diagonalizes_exponent() {
        // Quadratic form l1 x^2 + l2 p^2 + l3 (xp + px) in (X, P) has no cross term.
        let m = ms(2.0, 0.7, 0.5);
        let c = transform_coeffs(&m).unwrap();
        let cross = 2.0 * m.l1 * c.m11 * c.m12 + 2.0 * m.l2 * c.m21 * c.m22
            + 2.0 * m.l3 * (c.m11 * c.m22 + c.m12 * c.m21);
        assert!(cross.abs() < 1e-14);
    }

    #[test]
    fn katz_examples() {
        assert!(katz_gradient_check(&ms(1.0, 1.0, 0.0), 1.0, 1e-6).unwrap() <= 1e-6);
        assert!(katz_gradient_check(&ms(2.0, 0.5, 0.3), 1.0, 1e-6).unwrap() <= 1e-6);
        let m = MultiplierState::from_means(&SemiState::new(0.6, 0.289350, 0.05, 0.0, 0.0), 1e-40).unwrap();
        assert!(katz_gradient_check(&m, 1e-40, 1e-6).unwrap() <= 1e-6);
        // A wrong normalization is detected.
        let bad = katz_gradient_check_with(&ms(1.0, 1.0, 0.0), 1.0, 1e-6, |il| Ok(-(2.0 * (2.0 * il).sinh()).ln()));
        assert!(bad.unwrap() > 1e-2);
    }

    #[test]
    fn limit_diagnostics_examples() {
        let seq: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|e| 0.25 * (1.0 + e)).collect();
        let rows = limit_diagnostics(&seq, 1.0).unwrap();
        let last = rows.last().unwrap();
        assert!(last.p0 >= 1.0 - 1e-6);
        assert!(last.purity >= 1.0 - 2e-6);
        assert!(last.entropy <= 2e-5);
        for w in rows.windows(2) {
            assert!(w[1].i_lambda > w[0].i_lambda);
            assert!(w[1].lambda0.abs() > w[0].lambda0.abs());
            assert!(w[1].pseudo_temperature < w[0].pseudo_temperature);
        }
        assert!(limit_diagnostics(&[1.0, 2.0], 1.0).is_err());
        // Fixed I, hbar -> 0: increasingly mixed.
        let p: Vec<f64> = [1.0, 1e-3, 1e-6].iter().map(|&h| entropy_row(1.0, h).unwrap().purity).collect();
        assert!(p[0] > p[1] && p[1] > p[2]);
        // Entropy grows with I.
        let s: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&i| entropy_row(i, 1.0).unwrap().entropy).collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn entropy_table_layout() {
        let rows = limit_diagnostics(&[4.0, 1.0], 1.0).unwrap();
        let mut buf = Vec::new();
        write_entropy_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], ENTROPY_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').count(), 9);
    }

    #[test]
    fn multiplier_flow_tracks_moment_flow() {
        use crate::dynamics::SemiclassicalFlow;
        use crate::integrator::IntegratorConfig;
        use crate::trajectory::integrate;
        let p = default_h2(0.0).with_hbar(1.0);
        let s0 = SemiState::new(0.8, 0.9, 0.1, 0.2, 0.3);
        let m0 = MultiplierState::from_means(&s0, 1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let a = integrate(&SemiclassicalFlow { params: &p }, &s0, (0.0, 10.0), &cfg).unwrap();
        let b = integrate(&MultiplierFlow { params: &p }, &m0, (0.0, 10.0), &cfg).unwrap();
        let sa = a.states.last().unwrap();
        let sb = b.states.last().unwrap().to_means(1.0).unwrap();
        for (x, y) in sa.to_array().iter().zip(sb.to_array()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!(b.invariant_drift(0.0) < 1e-10);
        assert!((invariant_i(&sb) - invariant_i(&s0)).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn round_trip_means(
            xx in 1e-3f64..1e3,
            pp in 1e-3f64..1e3,
            frac in -0.99f64..0.99,
            hsel in 0usize..3,
        ) {
            let hbar = [1.0, 1e-10, 1e-40][hsel];
            let l = 2.0 * frac * (xx * pp).sqrt();
            prop_assume!(xx * pp - l * l / 4.0 > hbar * hbar / 4.0 * 1.0001);
            let (l1, l2, l3) = multipliers_from_means(xx, pp, l, hbar).unwrap();
            let m = MultiplierState::new(l1, l2, l3, 0.0, 0.0).unwrap();
            let (a, b, c) = means_from_multipliers(&m, hbar).unwrap();
            let scale = (xx * pp).sqrt();
            prop_assert!(rel(a, xx) < 1e-12);
            prop_assert!(rel(b, pp) < 1e-12);
            prop_assert!((c - l).abs() < 1e-12 * scale);
        }

        #[test]
        fn t_squared_inverts_i(log_ratio in (0.2500001f64).log10()..60.0, hsel in 0usize..3) {
            let hbar = [1.0, 1e-10, 1e-40][hsel];
            let i = 10f64.powf(log_ratio) * hbar * hbar;
            prop_assume!(i > 0.2500001 * hbar * hbar);
            let t = t_of(i_lambda_from_i(i, hbar).unwrap(), hbar).unwrap();
            prop_assert!(rel(t * t, i) < 1e-12);
        }

        #[test]
        fn transform_is_symplectic(l1 in 1e-3f64..1e3, l2 in 1e-3f64..1e3, frac in -0.999f64..0.999) {
            let m = MultiplierState::new(l1, l2, frac * (l1 * l2).sqrt(), 0.0, 0.0).unwrap();
            let c = transform_coeffs(&m).unwrap();
            prop_assert!((c.det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn purity_decreases_with_i(log_i in -0.6f64..6.0, step in 1e-3f64..1.0) {
            let a = entropy_row(10f64.powf(log_i), 1.0).unwrap();
            let b = entropy_row(10f64.powf(log_i + step), 1.0).unwrap();
            prop_assert!(b.purity < a.purity);
        }
    }
}
