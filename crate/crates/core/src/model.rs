//! Hybrid Hamiltonian coefficients and polynomial classical potentials.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = 1/2 ( a1 x^2 + a2 p^2 + a3 L + b1 F(A) + b2 P_A^2 + g V(A) x^2 )
//! ```
//!
//! with `x`, `p` quantum operators, `L = xp + px`, and `A`, `P_A` classical.
//! `F` and `V` are polynomials so that their first and second derivatives
//! are exact.

use crate::error::{Error, Result};

/// Largest supported polynomial degree for `F` and `V`.
pub const MAX_DEGREE: usize = 8;

/// Planck constant used when a configuration does not set one.
pub const DEFAULT_HBAR: f64 = 1.0e-40;

/// Polynomial `P(A) = sum_k c_k A^k`, constant term first.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    coeffs: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::Parameter(format!(
                "potential degree {} exceeds maximum {MAX_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("non-finite potential coefficient {c}")));
        }
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    /// `P(A) = A^2`.
    pub fn square() -> Self {
        Self { coeffs: vec![0.0, 0.0, 1.0] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree ignoring trailing zero coefficients; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, a: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * a + c)
    }

    /// Exact first derivative evaluated by Horner on `k c_k`.
    pub fn eval_deriv(&self, a: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * a + k as f64 * c)
    }

    pub fn eval_second_deriv(&self, a: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * a + (k * (k - 1)) as f64 * c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Self { coeffs }
    }

    /// `self * s + other * t`, coefficient-wise.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                s * self.coeffs.get(k).copied().unwrap_or(0.0)
                    + t * other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Self { coeffs }
    }

    /// Real roots inside `[lo, hi]`, ascending.
    ///
    /// Roots of the derivative split the interval into monotone pieces,
    /// each of which holds at most one root and is bisected to full precision.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let deg = self.degree();
        if deg == 0 {
            return Vec::new();
        }
        if deg == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if (lo..=hi).contains(&r) { vec![r] } else { Vec::new() };
        }
        let mut knots = vec![lo];
        knots.extend(self.derivative().roots_in(lo, hi));
        knots.push(hi);

        let mut roots: Vec<f64> = Vec::new();
        for w in knots.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let (mut fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fb == 0.0 {
                roots.push(b);
                continue;
            }
            if fa.signum() == fb.signum() {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = self.eval(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        roots.dedup();
        roots
    }

    /// `max |P(A)|` over `A in [lo, hi]`, attained at an endpoint or a critical point.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        self.derivative()
            .roots_in(lo, hi)
            .into_iter()
            .chain([lo, hi])
            .map(|a| self.eval(a).abs())
            .fold(0.0, f64::max)
    }
}

/// Free function form of [`PotentialSpec::eval`].
pub fn eval_potential(spec: &PotentialSpec, a: f64) -> f64 {
    spec.eval(a)
}

/// Free function form of [`PotentialSpec::eval_deriv`].
pub fn eval_potential_deriv(spec: &PotentialSpec, a: f64) -> f64 {
    spec.eval_deriv(a)
}

/// Coefficients of the hybrid Hamiltonian plus dissipation rate and Planck constant.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    /// Dissipation rate acting on `P_A`.
    pub eta: f64,
    pub f: PotentialSpec,
    pub v: PotentialSpec,
    pub hbar: f64,
}

impl HybridParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("hbar", self.hbar),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.eta < 0.0 {
            return Err(Error::Parameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if self.hbar <= 0.0 {
            return Err(Error::Parameter(format!("hbar must be > 0, got {}", self.hbar)));
        }
        Ok(())
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Every coefficient zero; `H = 0`.
    pub fn zero() -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            gamma: 0.0,
            eta: 0.0,
            f: PotentialSpec::zero(),
            v: PotentialSpec::zero(),
            hbar: DEFAULT_HBAR,
        }
    }

    /// Effective quantum frequency coefficient `a1 + g V(A)`.
    #[inline]
    pub fn stiffness(&self, a: f64) -> f64 {
        self.alpha1 + self.gamma * self.v.eval(a)
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Quantum oscillator with field-dependent frequency `w^2 = wq^2 + e^2 A^2`
/// coupled to a free classical particle:
/// `H1 = 1/2 (p^2/m_q + P_A^2/m_cl + m_q w^2 x^2)`.
pub fn preset_h1(m_q: f64, m_cl: f64, omega_q: f64, e: f64) -> Result<HybridParams> {
    require_positive("m_q", m_q)?;
    require_positive("m_cl", m_cl)?;
    require_positive("omega_q", omega_q)?;
    if !e.is_finite() {
        return Err(Error::Parameter(format!("e must be finite, got {e}")));
    }
    Ok(HybridParams {
        alpha1: m_q * omega_q * omega_q,
        alpha2: 1.0 / m_q,
        alpha3: 0.0,
        beta1: 0.0,
        beta2: 1.0 / m_cl,
        gamma: m_q * e * e,
        eta: 0.0,
        f: PotentialSpec::zero(),
        v: PotentialSpec::square(),
        hbar: DEFAULT_HBAR,
    })
}

/// Quantum and classical oscillators with `e A^2 x^2` coupling and damping `eta`:
/// `H2 = 1/2 (wq (x^2 + p^2) + wcl (A^2 + P_A^2) + e A^2 x^2)`.
pub fn preset_h2(omega_q: f64, omega_cl: f64, e_q_cl: f64, eta: f64) -> Result<HybridParams> {
    require_positive("omega_q", omega_q)?;
    require_positive("omega_cl", omega_cl)?;
    if !e_q_cl.is_finite() {
        return Err(Error::Parameter(format!("e_q_cl must be finite, got {e_q_cl}")));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!("eta must be >= 0, got {eta}")));
    }
    Ok(HybridParams {
        alpha1: omega_q,
        alpha2: omega_q,
        alpha3: 0.0,
        beta1: omega_cl,
        beta2: omega_cl,
        gamma: e_q_cl,
        eta,
        f: PotentialSpec::square(),
        v: PotentialSpec::square(),
        hbar: DEFAULT_HBAR,
    })
}

/// `preset_h1(1, 1, 1, 1)`.
pub fn default_h1() -> HybridParams {
    preset_h1(1.0, 1.0, 1.0, 1.0).expect("unit constants are valid")
}

/// `preset_h2(1, 1, 1, eta)`.
pub fn default_h2(eta: f64) -> HybridParams {
    preset_h2(1.0, 1.0, 1.0, eta).expect("unit constants are valid")
}
