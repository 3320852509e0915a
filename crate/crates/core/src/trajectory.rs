//! Sampled solutions and the driver that produces them.

use std::io::{self, Write};

use crate::dynamics::{energy_gradient, Flow, Phase, PhaseState};
use crate::error::{Error, Result};
use crate::integrator::{DenseSegment, Dop853, IntegratorConfig, StepStats};
use crate::model::HybridParams;
use crate::output::sci;

/// Drift multiple of `rel_tol` beyond which the invariant is flagged.
pub const INVARIANT_WARNING_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantWarning {
    /// First sample time at which the drift exceeded the threshold.
    pub t: f64,
    pub relative_drift: f64,
}

/// Dense-output samples of one integration with per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Time derivative of the dense interpolant at each sample.
    pub rates: Vec<S>,
    pub invariant: Vec<f64>,
    pub energy: Vec<f64>,
    pub warning: Option<InvariantWarning>,
    pub stats: StepStats,
}

impl<S: Phase> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().copied().zip(self.states.last())
    }

    /// `max_t |I(t) - I(0)| / max(|I(0)|, floor)`.
    pub fn invariant_drift(&self, floor: f64) -> f64 {
        let Some(&i0) = self.invariant.first() else { return 0.0 };
        let scale = i0.abs().max(floor);
        self.invariant.iter().map(|i| (i - i0).abs()).fold(0.0, f64::max) / scale
    }

    /// `max_t |E(t) - E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let Some(&e0) = self.energy.first() else { return 0.0 };
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / scale
    }
}

/// Uniform sample grid `t0, t0 + dt, ...` that always ends exactly at `t1`.
pub fn sample_times(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (t0 + k as f64 * dt).min(t1)).collect();
    let last = *times.last().expect("grid has at least t0");
    if t1 - last > 1e-9 * dt {
        times.push(t1);
    }
    times.dedup();
    times
}

/// Adaptive stepper over a [`Flow`], yielding dense segments in the flat layout.
pub fn stepper<'f, F: Flow>(
    flow: &'f F,
    s0: &F::State,
    t0: f64,
    t1: f64,
    cfg: IntegratorConfig,
) -> Result<Dop853<impl FnMut(&[f64; 5]) -> Result<[f64; 5]> + 'f, 5>> {
    let rhs = move |y: &[f64; 5]| flow.rate(&F::State::from_array(*y)).map(|d| d.to_array());
    Dop853::new(rhs, t0, s0.to_array(), t1, cfg)
}

/// Integrate `flow` from `s0` over `span`, sampling every `cfg.sample_dt`.
///
/// Fails with [`Error::Integration`] (carrying the last valid time) on step
/// size underflow. Invariant drift beyond `1e3 * rel_tol` is recorded in
/// [`Trajectory::warning`] rather than treated as failure.
pub fn integrate<F: Flow>(
    flow: &F,
    s0: &F::State,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory<F::State>> {
    integrate_observed(flow, s0, span, cfg, |_| {})
}

/// [`integrate`], additionally handing every accepted dense segment to `observe`.
pub fn integrate_observed<F: Flow, O: FnMut(&DenseSegment<5>)>(
    flow: &F,
    s0: &F::State,
    span: (f64, f64),
    cfg: &IntegratorConfig,
    mut observe: O,
) -> Result<Trajectory<F::State>> {
    let (t0, t1) = span;
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(Error::Parameter(format!("t1 ({t1}) must exceed t0 ({t0})")));
    }
    let grid = sample_times(t0, t1, cfg.sample_dt);
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        rates: Vec::with_capacity(grid.len()),
        invariant: Vec::with_capacity(grid.len()),
        energy: Vec::with_capacity(grid.len()),
        warning: None,
        stats: StepStats::default(),
    };
    let i0 = flow.invariant(s0);
    let scale = i0.abs().max(flow.invariant_floor());
    let threshold = INVARIANT_WARNING_FACTOR * cfg.rel_tol;

    let record = |traj: &mut Trajectory<F::State>, seg: &DenseSegment<5>, t: f64| {
        let (y, dy) = seg.eval_with_rate(t);
        let s = F::State::from_array(y);
        let inv = flow.invariant(&s);
        if traj.warning.is_none() && scale > 0.0 {
            let drift = (inv - i0).abs() / scale;
            if drift > threshold {
                traj.warning = Some(InvariantWarning { t, relative_drift: drift });
            }
        }
        traj.times.push(t);
        traj.states.push(s);
        traj.rates.push(F::State::from_array(dy));
        traj.invariant.push(inv);
        traj.energy.push(flow.energy(&s));
    };

    let mut solver = stepper(flow, s0, t0, t1, *cfg)?;
    let mut next = 0;
    for seg in solver.by_ref() {
        let seg = seg?;
        observe(&seg);
        let end = seg.t_end();
        while next < grid.len() && (grid[next] <= end || seg.t_end() >= t1) {
            record(&mut traj, &seg, grid[next]);
            next += 1;
        }
    }
    traj.stats = solver.stats();
    Ok(traj)
}

/// `max_k |dE/dt + eta b2 P_A^2|` over the samples, with `dE/dt` obtained by
/// applying the analytic energy gradient to the dense-output derivative.
pub fn dissipation_identity_check<K>(p: &HybridParams, traj: &Trajectory<PhaseState<K>>) -> f64 {
    traj.states
        .iter()
        .zip(traj.rates.iter())
        .map(|(s, r)| {
            let g = energy_gradient(p, s);
            let de: f64 = g.iter().zip(r.to_array()).map(|(a, b)| a * b).sum();
            (de + p.eta * p.beta2 * s.pa * s.pa).abs()
        })
        .fold(0.0, f64::max)
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss-Legendre integral of `g(y(t))` over one dense segment.
/// Exact for polynomials of degree up to 15 in `t`.
pub fn segment_quadrature<G: Fn(&[f64; 5]) -> f64>(seg: &DenseSegment<5>, g: G) -> f64 {
    let half = 0.5 * seg.step();
    let mid = seg.t_start() + half;
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
        acc += w * (g(&seg.eval(mid - half * x)) + g(&seg.eval(mid + half * x)));
    }
    acc * half
}

pub const TRAJECTORY_HEADER: &str = "t,xx,pp,L,A,PA,I,E";

/// Write `t,xx,pp,L,A,PA,I,E` rows.
pub fn write_trajectory_csv<W: Write, S: Phase>(w: &mut W, traj: &Trajectory<S>) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for k in 0..traj.len() {
        let y = traj.states[k].to_array();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            sci(traj.times[k]),
            sci(y[0]),
            sci(y[1]),
            sci(y[2]),
            sci(y[3]),
            sci(y[4]),
            sci(traj.invariant[k]),
            sci(traj.energy[k])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ClassState, ClassicalFlow, SemiState, SemiclassicalFlow};
    use crate::model::{default_h2, preset_h1};

    #[test]
    fn grid_is_strictly_increasing_and_closed() {
        let g = sample_times(0.0, 1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let g = sample_times(0.0, 1.0, 0.25);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn decoupled_oscillator_moments() {
        // e = 0: the quantum oscillator is free; xx + pp is conserved and xx
        // follows cos^2 t xx0 + sin^2 t pp0 when L0 = 0.
        let p = preset_h1(1.0, 1.0, 1.0, 0.0).unwrap();
        let flow = SemiclassicalFlow { params: &p };
        let s0 = SemiState::new(1.0, 0.5, 0.0, 0.0, 0.0);
        let cfg = IntegratorConfig::default().with_sample_dt(0.05);
        let traj = integrate(&flow, &s0, (0.0, 20.0), &cfg).unwrap();
        assert_eq!(traj.times.len(), traj.states.len());
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s.xx + s.pp - 1.5).abs() < 1e-11);
            let exact = t.cos().powi(2) + 0.5 * t.sin().powi(2);
            assert!((s.xx - exact).abs() < 1e-11, "t={t}");
        }
        assert!(traj.warning.is_none());
    }

    #[test]
    fn conservative_run_keeps_energy_and_dissipative_identity_holds() {
        let p = default_h2(0.0);
        let flow = SemiclassicalFlow { params: &p };
        let s0 = SemiState::new(0.6, 0.3, 0.1, 0.2, 0.5);
        let traj = integrate(&flow, &s0, (0.0, 50.0), &IntegratorConfig::default()).unwrap();
        assert!(traj.energy_drift() < 1e-11);
        assert!(traj.invariant_drift(0.0) < 1e-11);
        assert!(dissipation_identity_check(&p, &traj) < 1e-8);

        let p = default_h2(0.05);
        let flow = ClassicalFlow { params: &p };
        let c0 = ClassState::new(0.6, 0.3, 0.1, 0.2, 0.5);
        let traj = integrate(&flow, &c0, (0.0, 50.0), &IntegratorConfig::default()).unwrap();
        assert!(dissipation_identity_check(&p, &traj) < 1e-8);
        assert!(traj.energy.last().unwrap() < traj.energy.first().unwrap());
    }

    #[test]
    fn quadrature_integrates_dense_output() {
        // y' = (1, 0, ...) from 0: integral of t^2 over [0, 3] is 9.
        let flow = ConstantDrift;
        let s0 = SemiState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let mut total = 0.0;
        integrate_observed(&flow, &s0, (0.0, 3.0), &IntegratorConfig::default(), |seg| {
            total += segment_quadrature(seg, |y| y[0] * y[0]);
        })
        .unwrap();
        assert!((total - 9.0).abs() < 1e-13);
    }

    struct ConstantDrift;

    impl Flow for ConstantDrift {
        type State = SemiState;

        fn rate(&self, _: &SemiState) -> Result<SemiState> {
            Ok(SemiState::new(1.0, 0.0, 0.0, 0.0, 0.0))
        }

        fn invariant(&self, _: &SemiState) -> f64 {
            0.0
        }

        fn energy(&self, s: &SemiState) -> f64 {
            s.xx
        }
    }

    #[test]
    fn csv_layout() {
        let p = default_h2(0.0);
        let flow = SemiclassicalFlow { params: &p };
        let s0 = SemiState::new(0.6, 0.3, 0.0, 0.0, 0.5);
        let cfg = IntegratorConfig::default().with_sample_dt(0.5);
        let traj = integrate(&flow, &s0, (0.0, 1.0), &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0000000000000000e0,5.9999999999999998e-1,"), "{}", lines[1]);
        assert!(!text.contains('\r'));
    }
}
