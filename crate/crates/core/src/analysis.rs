//! Poincaré sections, classical-limit sweeps and derived diagnostics.

use std::collections::HashSet;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::dynamics::{
    invariant_i, relative_energy, ClassicalFlow, Flow, Phase, SemiState, SemiclassicalFlow,
};
use crate::error::{Error, Result};
use crate::initial::{build_classical_ic, build_semiclassical_ic, ICRequest};
use crate::integrator::{DenseSegment, IntegratorConfig};
use crate::maxent::{entropy_row, EntropyRow, MultiplierFlow, MultiplierState};
use crate::model::HybridParams;
use crate::output::sci;
use crate::trajectory::{integrate, integrate_observed, segment_quadrature, stepper, Trajectory};

/// Which sign changes of `A - c` count as crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `dA/dt > 0`.
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionConfig {
    pub crossing_value: f64,
    pub direction: Direction,
    pub transient_skip: f64,
    pub max_points: usize,
    /// Tolerance on `|A - crossing_value|` at a refined crossing.
    pub refine_tol: f64,
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self {
            crossing_value: 0.0,
            direction: Direction::Up,
            transient_skip: 0.0,
            max_points: 1_000_000,
            refine_tol: 1e-12,
        }
    }
}

impl SectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_points == 0 {
            return Err(Error::Config("max_points must be >= 1".into()));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::Config(format!("refine_tol must be > 0, got {}", self.refine_tol)));
        }
        if !(self.transient_skip >= 0.0) || !self.crossing_value.is_finite() {
            return Err(Error::Config("transient_skip must be >= 0 and crossing_value finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub t: f64,
    pub xx: f64,
    pub pp: f64,
    pub l: f64,
    /// `A - crossing_value` at the refined time.
    pub residual: f64,
}

/// Section points plus the error that cut the run short, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionResult {
    pub points: Vec<SectionPoint>,
    pub failure: Option<Error>,
}

impl SectionResult {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Sub-intervals per step scanned for sign changes.
const SCAN: usize = 4;

/// Bracketed Illinois iteration for a root of `g` on `[a, b]`.
fn refine_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let (mut ga, mut gb) = (g(a), g(b));
    let mut side = 0;
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    for _ in 0..200 {
        if best.1.abs() <= tol || b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        let gt = g(t);
        if gt.abs() < best.1.abs() {
            best = (t, gt);
        }
        if gt.signum() == ga.signum() {
            a = t;
            ga = gt;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            gb = gt;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    best
}

fn crossings_in(seg: &DenseSegment<5>, c: f64, dir: Direction, tol: f64, out: &mut Vec<(f64, [f64; 5])>) {
    let g = |t: f64| seg.eval(t)[3] - c;
    let (t0, h) = (seg.t_start(), seg.step());
    let mut ta = t0;
    let mut ga = seg.start()[3] - c;
    for k in 1..=SCAN {
        let tb = if k == SCAN { seg.t_end() } else { t0 + h * k as f64 / SCAN as f64 };
        let gb = if k == SCAN { seg.end()[3] - c } else { g(tb) };
        let up = ga < 0.0 && gb >= 0.0;
        let down = ga > 0.0 && gb <= 0.0;
        let wanted = match dir {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Both => up || down,
        };
        if wanted {
            let (t, _) = if gb == 0.0 { (tb, 0.0) } else { refine_root(g, ta, tb, tol) };
            out.push((t, seg.eval(t)));
        }
        ta = tb;
        ga = gb;
    }
}

/// Crossings of `A = crossing_value` along the trajectory of `flow` from `s0`
/// up to time `t_end`, refined on the dense output.
pub fn poincare_section<F: Flow>(
    flow: &F,
    s0: &F::State,
    scfg: &SectionConfig,
    icfg: &IntegratorConfig,
    t_end: f64,
) -> Result<SectionResult> {
    scfg.validate()?;
    icfg.validate()?;
    if !(t_end > scfg.transient_skip) {
        return Err(Error::Config(format!(
            "T = {t_end} must exceed transient_skip = {}",
            scfg.transient_skip
        )));
    }
    let mut points = Vec::new();
    let mut found = Vec::new();
    let mut failure = None;
    let solver = stepper(flow, s0, 0.0, t_end, *icfg)?;
    'outer: for seg in solver {
        let seg = match seg {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        found.clear();
        crossings_in(&seg, scfg.crossing_value, scfg.direction, scfg.refine_tol, &mut found);
        for &(t, y) in &found {
            if t < scfg.transient_skip {
                continue;
            }
            points.push(SectionPoint { t, xx: y[0], pp: y[1], l: y[2], residual: y[3] - scfg.crossing_value });
            if points.len() >= scfg.max_points {
                break 'outer;
            }
        }
    }
    Ok(SectionResult { points, failure })
}

/// Number of distinct cells of an `n x n` grid over `x_range x y_range`
/// hit by the `(xx, pp)` projection of `points`. Points outside are ignored.
pub fn occupancy_cells(points: &[SectionPoint], x_range: (f64, f64), y_range: (f64, f64), n: usize) -> usize {
    let cell = |v: f64, (lo, hi): (f64, f64)| -> Option<usize> {
        if !(v >= lo && v <= hi) || hi <= lo {
            return None;
        }
        Some((((v - lo) / (hi - lo)) * n as f64).floor().min((n - 1) as f64) as usize)
    };
    points
        .iter()
        .filter_map(|p| Some((cell(p.xx, x_range)?, cell(p.pp, y_range)?)))
        .collect::<HashSet<_>>()
        .len()
}

/// `sup_t |u_semi(t) - u_clas(t)|` over samples with `t <= t_max`.
pub fn classical_distance<A: Phase, B: Phase>(
    semi: &Trajectory<A>,
    clas: &Trajectory<B>,
    t_max: f64,
) -> Result<f64> {
    let n = semi.times.iter().take_while(|&&t| t <= t_max).count();
    let m = clas.times.iter().take_while(|&&t| t <= t_max).count();
    if n != m || semi.times[..n] != clas.times[..m] {
        return Err(Error::GridMismatch(format!("sample grids differ ({n} vs {m} samples up to {t_max})")));
    }
    Ok((0..n)
        .map(|k| {
            let (a, b) = (semi.states[k].to_array(), clas.states[k].to_array());
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub i_values: Vec<f64>,
    pub e: f64,
    pub hbar: f64,
    /// Integration time for section counts.
    pub horizon: f64,
    /// Time window for the classical distance.
    pub metric_horizon: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.i_values.is_empty() {
            return Err(Error::Config("sweep needs at least one I value".into()));
        }
        if !(self.horizon > 0.0 && self.metric_horizon > 0.0) {
            return Err(Error::Config("sweep horizons must be > 0".into()));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::Config(format!("hbar must be > 0, got {}", self.hbar)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub i: f64,
    pub e_r: f64,
    pub distance: f64,
    pub section_points: usize,
    /// Reason the entry was skipped.
    pub flag: Option<String>,
}

fn sweep_entry(p: &HybridParams, cfg: &SweepConfig, xx0: Option<f64>, i: f64, icfg: &IntegratorConfig) -> Result<SweepRow> {
    let mut req = ICRequest::new(cfg.e, i).with_hbar(cfg.hbar);
    req.xx0 = xx0;
    let s0 = build_semiclassical_ic(&req, p)?;
    let c0 = build_classical_ic(&req.classical(), p)?;
    let semi = SemiclassicalFlow { params: p };
    let span = (0.0, cfg.metric_horizon);
    let a = integrate(&semi, &s0, span, icfg)?;
    let b = integrate(&ClassicalFlow { params: p }, &c0, span, icfg)?;
    let distance = classical_distance(&a, &b, cfg.metric_horizon)?;
    let section = poincare_section(&semi, &s0, &SectionConfig::default(), icfg, cfg.horizon)?;
    if let Some(e) = section.failure {
        return Err(e);
    }
    Ok(SweepRow {
        i,
        e_r: relative_energy(p, &s0)?,
        distance,
        section_points: section.points.len(),
        flag: None,
    })
}

/// Matched semiclassical/classical runs for each `I`, in input order.
/// Infeasible or failing entries are kept as flagged rows.
pub fn limit_sweep(
    p: &HybridParams,
    cfg: &SweepConfig,
    xx0: Option<f64>,
    icfg: &IntegratorConfig,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    icfg.validate()?;
    let p = p.clone().with_hbar(cfg.hbar);
    Ok(cfg
        .i_values
        .par_iter()
        .map(|&i| {
            sweep_entry(&p, cfg, xx0, i, icfg).unwrap_or_else(|e| SweepRow {
                i,
                e_r: f64::NAN,
                distance: f64::NAN,
                section_points: 0,
                flag: Some(e.to_string()),
            })
        })
        .collect())
}

/// Whether the distances of the unflagged rows strictly decrease.
pub fn distances_strictly_decrease(rows: &[SweepRow]) -> bool {
    let d: Vec<f64> = rows.iter().filter(|r| r.flag.is_none()).map(|r| r.distance).collect();
    d.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCurve {
    pub rows: Vec<EntropyRow>,
    /// `S` strictly increasing in `I`.
    pub monotone: bool,
    /// Divided differences `dS/dI` nonincreasing.
    pub concave: bool,
    /// `1 / I_lambda` strictly increasing in `I`.
    pub temperature_increasing: bool,
    /// `1 / I_lambda <= 2 sqrt(I)` at every row.
    pub temperature_bounded: bool,
}

/// Entropy and pseudo-temperature along a strictly increasing grid of `I`.
pub fn entropy_curve(i_grid: &[f64], hbar: f64) -> Result<EntropyCurve> {
    if i_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("I grid must be strictly increasing".into()));
    }
    let rows = i_grid.iter().map(|&i| entropy_row(i, hbar)).collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = rows.windows(2).map(|w| (w[1].entropy - w[0].entropy) / (w[1].i - w[0].i)).collect();
    Ok(EntropyCurve {
        monotone: rows.windows(2).all(|w| w[1].entropy > w[0].entropy),
        concave: slopes.windows(2).all(|s| s[1] <= s[0]),
        temperature_increasing: rows.windows(2).all(|w| w[1].pseudo_temperature > w[0].pseudo_temperature),
        temperature_bounded: rows.iter().all(|r| r.pseudo_temperature <= 2.0 * r.i.sqrt()),
        rows,
    })
}

/// `n` points log-uniformly spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::Parameter(format!("log grid needs 0 < lo < hi and n >= 2, got [{lo}, {hi}], {n}")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|k| match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `eta b2 * integral of P_A^2` over the run.
    pub dissipated: f64,
}

impl EnergySeries {
    /// Largest increase between consecutive samples (0 if nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.energy.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `|E(0) - E(T) - dissipated| / dissipated`.
    pub fn balance_error(&self) -> f64 {
        let (Some(first), Some(last)) = (self.energy.first(), self.energy.last()) else { return 0.0 };
        let lost = first - last;
        let d = self.dissipated.abs();
        if d == 0.0 {
            lost.abs()
        } else {
            (lost - self.dissipated).abs() / d
        }
    }
}

/// Energy samples of a semiclassical run together with the dissipated work.
pub fn energy_vs_time(p: &HybridParams, s0: &SemiState, t_end: f64, icfg: &IntegratorConfig) -> Result<EnergySeries> {
    let flow = SemiclassicalFlow { params: p };
    let mut integral = 0.0;
    let traj = integrate_observed(&flow, s0, (0.0, t_end), icfg, |seg| {
        integral += segment_quadrature(seg, |y| y[4] * y[4]);
    })?;
    Ok(EnergySeries { times: traj.times, energy: traj.energy, dissipated: p.eta * p.beta2 * integral })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossReport {
    /// Per component `max_t |means - reconstructed| / max_t |means|`.
    pub per_component: [f64; 5],
    pub max_deviation: f64,
}

/// Integrates the moment and multiplier systems from the same state and
/// compares the moments reconstructed from the multipliers.
pub fn cross_consistency(
    p: &HybridParams,
    s0: &SemiState,
    hbar: f64,
    t_end: f64,
    icfg: &IntegratorConfig,
) -> Result<CrossReport> {
    let p = p.clone().with_hbar(hbar);
    let m0 = MultiplierState::from_means(s0, hbar)?;
    let span = (0.0, t_end);
    let a = integrate(&SemiclassicalFlow { params: &p }, s0, span, icfg)?;
    let b = integrate(&MultiplierFlow { params: &p }, &m0, span, icfg)?;
    if a.times != b.times {
        return Err(Error::GridMismatch("moment and multiplier sample grids differ".into()));
    }
    let mut dev = [0.0f64; 5];
    let mut scale = [0.0f64; 5];
    for (sa, mb) in a.states.iter().zip(&b.states) {
        let x = sa.to_array();
        let y = mb.to_means(hbar)?.to_array();
        for k in 0..5 {
            dev[k] = dev[k].max((x[k] - y[k]).abs());
            scale[k] = scale[k].max(x[k].abs());
        }
    }
    let per_component: [f64; 5] = std::array::from_fn(|k| if scale[k] > 0.0 { dev[k] / scale[k] } else { dev[k] });
    Ok(CrossReport { per_component, max_deviation: per_component.iter().copied().fold(0.0, f64::max) })
}

/// Smallest `xx pp - L^2/4` over the section points.
pub fn min_section_invariant(points: &[SectionPoint]) -> f64 {
    points
        .iter()
        .map(|q| invariant_i(&SemiState::new(q.xx, q.pp, q.l, 0.0, 0.0)))
        .fold(f64::INFINITY, f64::min)
}

pub const SECTION_HEADER: &str = "t,xx,pp,L";
pub const SWEEP_HEADER: &str = "I,E_r,distance,section_points";

pub fn write_section_csv<W: Write>(w: &mut W, points: &[SectionPoint]) -> io::Result<()> {
    writeln!(w, "{SECTION_HEADER}")?;
    for q in points {
        writeln!(w, "{},{},{},{}", sci(q.t), sci(q.xx), sci(q.pp), sci(q.l))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", sci(r.i), sci(r.e_r), sci(r.distance), r.section_points)?;
    }
    Ok(())
}
