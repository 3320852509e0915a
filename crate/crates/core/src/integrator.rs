//! Explicit Runge-Kutta 8(5,3) pair of Dormand and Prince with 7th-order
//! dense output (Hairer's DOP853 scheme).
//!
//! The stepper is an iterator over accepted steps. Each item is a
//! [`DenseSegment`] that can be evaluated anywhere inside the step, which is
//! what trajectory sampling and section crossing refinement are built on.

use crate::error::{Error, Result};

/// Tolerances and sampling for an integration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Interval between dense-output samples recorded in a trajectory.
    pub sample_dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 1.0,
            sample_dt: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(Error::Parameter(format!("max_step must be > 0, got {}", self.max_step)));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample_dt must be > 0, got {}",
                self.sample_dt
            )));
        }
        Ok(())
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }
}

/// Continuous extension of one accepted step on `[t0, t0 + h]`.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    t0: f64,
    h: f64,
    cont: [[f64; N]; 8],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// State at the start of the step (exact, not interpolated).
    pub fn start(&self) -> [f64; N] {
        self.cont[0]
    }

    /// State at the end of the step (exact up to rounding).
    pub fn end(&self) -> [f64; N] {
        let mut y = self.cont[0];
        for (yi, di) in y.iter_mut().zip(self.cont[1].iter()) {
            *yi += di;
        }
        y
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        self.eval_with_rate(t).0
    }

    /// Interpolated state and its time derivative at `t`.
    pub fn eval_with_rate(&self, t: f64) -> ([f64; N], [f64; N]) {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut y = [0.0; N];
        let mut dy = [0.0; N];
        // Nested form r0 + s(r1 + s1(r2 + s(r3 + s1(r4 + s(r5 + s1(r6 + s r7))))))
        // evaluated inside out, carrying d/ds alongside the value.
        for i in 0..N {
            let mut v = c[7][i];
            let mut dv = 0.0;
            for k in (1..7).rev() {
                let (w, dw) = if k % 2 == 0 { (s, 1.0) } else { (s1, -1.0) };
                dv = dw * v + w * dv;
                v = c[k][i] + w * v;
            }
            dv = v + s * dv;
            v = c[0][i] + s * v;
            y[i] = v;
            dy[i] = dv / self.h;
        }
        (y, dy)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const MAX_STEPS: usize = 200_000_000;

/// Adaptive DOP853 stepper for the autonomous system `dy/dt = f(y)`.
pub struct Dop853<F, const N: usize> {
    f: F,
    t: f64,
    y: [f64; N],
    dy: [f64; N],
    h: f64,
    t_end: f64,
    cfg: IntegratorConfig,
    reject: bool,
    done: bool,
    failed: bool,
    stats: StepStats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn lincomb<const N: usize>(terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        for (c, k) in terms {
            out[i] += c * k[i];
        }
    }
    out
}

impl<F, const N: usize> Dop853<F, N>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], t_end: f64, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if !(t_end > t0) {
            return Err(Error::Parameter(format!("t_end ({t_end}) must exceed t0 ({t0})")));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial state".into()));
        }
        let dy = f(&y0)?;
        let mut s = Self {
            f,
            t: t0,
            y: y0,
            dy,
            h: 0.0,
            t_end,
            cfg,
            reject: false,
            done: false,
            failed: false,
            stats: StepStats { evaluations: 1, ..Default::default() },
        };
        s.h = s.initial_step()?;
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> [f64; N] {
        self.y
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn eval(&mut self, y: &[f64; N]) -> Result<[f64; N]> {
        self.stats.evaluations += 1;
        (self.f)(y)
    }

    fn initial_step(&mut self) -> Result<f64> {
        let hmax = self.cfg.max_step.min(self.t_end - self.t);
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(self.y[i], self.y[i]);
            dnf += (self.dy[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        h = h.min(hmax);
        let y1 = axpy(&self.y, h, &[(1.0, &self.dy)]);
        let f1 = self.eval(&y1)?;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.scale(self.y[i], self.y[i]);
            der2 += ((f1[i] - self.dy[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            1e-6_f64.max(h * 1e-3)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h).min(h1).min(hmax))
    }

    fn fail(&mut self, reason: impl Into<String>) -> Error {
        self.failed = true;
        Error::Integration { t: self.t, reason: reason.into() }
    }

    /// Attempt one step of size `h`; returns stages needed for dense output.
    fn attempt(&mut self, h: f64) -> Result<Attempt<N>> {
        use tableau::*;
        let y = self.y;
        let k1 = self.dy;
        let k2 = self.eval(&axpy(&y, h, &[(A21, &k1)]))?;
        let k3 = self.eval(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = self.eval(&axpy(&y, h, &[(A41, &k1), (A43, &k3)]))?;
        let k5 = self.eval(&axpy(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]))?;
        let k6 = self.eval(&axpy(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]))?;
        let k7 = self.eval(&axpy(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]))?;
        let k8 = self.eval(&axpy(
            &y,
            h,
            &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
        ))?;
        let k9 = self.eval(&axpy(
            &y,
            h,
            &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)],
        ))?;
        let k10 = self.eval(&axpy(
            &y,
            h,
            &[
                (A101, &k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ))?;
        let k11 = self.eval(&axpy(
            &y,
            h,
            &[
                (A111, &k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ))?;
        let k12 = self.eval(&axpy(
            &y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ))?;
        let incr = lincomb(&[
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let y1 = axpy(&y, h, &[(1.0, &incr)]);

        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(y[i], y1[i]);
            let e3 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            err2 += (e3 / sk).powi(2);
            let e5 = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err += (e5 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (N as f64 * deno)).sqrt();
        Ok(Attempt { y1, err, k: [k1, k6, k7, k8, k9, k10, k11, k12] })
    }

    fn dense(&mut self, h: f64, a: &Attempt<N>, f_new: &[f64; N]) -> Result<[[f64; N]; 8]> {
        use tableau::*;
        let y = self.y;
        let [k1, k6, k7, k8, k9, k10, k11, k12] = &a.k;
        let k14 = self.eval(&axpy(
            &y,
            h,
            &[
                (A141, k1),
                (A147, k7),
                (A148, k8),
                (A149, k9),
                (A1410, k10),
                (A1411, k11),
                (A1412, k12),
                (A1413, f_new),
            ],
        ))?;
        let k15 = self.eval(&axpy(
            &y,
            h,
            &[
                (A151, k1),
                (A156, k6),
                (A157, k7),
                (A158, k8),
                (A1511, k11),
                (A1512, k12),
                (A1513, f_new),
                (A1514, &k14),
            ],
        ))?;
        let k16 = self.eval(&axpy(
            &y,
            h,
            &[
                (A161, k1),
                (A166, k6),
                (A167, k7),
                (A168, k8),
                (A169, k9),
                (A1613, f_new),
                (A1614, &k14),
                (A1615, &k15),
            ],
        ))?;

        let mut cont = [[0.0; N]; 8];
        for i in 0..N {
            let ydiff = a.y1[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * f_new[i] - bspl;
        }
        for (row, d) in D.iter().enumerate() {
            let stages: [&[f64; N]; 12] =
                [k1, k6, k7, k8, k9, k10, k11, k12, f_new, &k14, &k15, &k16];
            for i in 0..N {
                let mut acc = 0.0;
                for (c, k) in d.iter().zip(stages.iter()) {
                    acc += c * k[i];
                }
                cont[4 + row][i] = h * acc;
            }
        }
        Ok(cont)
    }

    fn advance(&mut self) -> Result<DenseSegment<N>> {
        use tableau::{SAFE, FAC_MAX, FAC_MIN};
        let expo = 1.0 / 8.0;
        let mut h = self.h;
        loop {
            if self.stats.accepted + self.stats.rejected >= MAX_STEPS {
                return Err(self.fail("step budget exhausted"));
            }
            let remaining = self.t_end - self.t;
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h.abs() <= 16.0 * f64::EPSILON * self.t.abs().max(1e-300) {
                return Err(self.fail("step size underflow"));
            }
            let attempt = match self.attempt(h) {
                Ok(a) => a,
                Err(Error::NonFinite(_)) => {
                    self.stats.rejected += 1;
                    self.reject = true;
                    h *= 0.1;
                    continue;
                }
                Err(e) => return Err(self.fail(e.to_string())),
            };
            let err = attempt.err;
            if !err.is_finite() || attempt.y1.iter().any(|v| !v.is_finite()) {
                self.stats.rejected += 1;
                self.reject = true;
                h *= 0.1;
                continue;
            }
            let fac11 = err.powf(expo);
            let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            if err <= 1.0 {
                let f_new = match self.eval(&attempt.y1) {
                    Ok(f) => f,
                    Err(e) => return Err(self.fail(e.to_string())),
                };
                let cont = match self.dense(h, &attempt, &f_new) {
                    Ok(c) => c,
                    Err(e) => return Err(self.fail(e.to_string())),
                };
                let seg = DenseSegment { t0: self.t, h, cont };
                self.stats.accepted += 1;
                self.t = if last { self.t_end } else { self.t + h };
                self.y = attempt.y1;
                self.dy = f_new;
                let mut h_new = (h / fac).min(self.cfg.max_step);
                if self.reject {
                    h_new = h_new.min(h);
                }
                self.reject = false;
                self.h = h_new;
                if last {
                    self.done = true;
                }
                return Ok(seg);
            }
            self.stats.rejected += 1;
            self.reject = true;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }
}

struct Attempt<const N: usize> {
    y1: [f64; N],
    err: f64,
    /// Stages 1, 6, 7, 8, 9, 10, 11, 12.
    k: [[f64; N]; 8],
}

impl<F, const N: usize> Iterator for Dop853<F, N>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    type Item = Result<DenseSegment<N>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.failed {
            return None;
        }
        Some(self.advance())
    }
}

#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod tableau {
    pub const SAFE: f64 = 0.9;
    pub const FAC_MIN: f64 = 0.333;
    pub const FAC_MAX: f64 = 6.0;

    pub const A21: f64 = 5.26001519587677318785587544488e-2;
    pub const A31: f64 = 1.97250569845378994544595329183e-2;
    pub const A32: f64 = 5.91751709536136983633785987549e-2;
    pub const A41: f64 = 2.95875854768068491816892993775e-2;
    pub const A43: f64 = 8.87627564304205475450678981324e-2;
    pub const A51: f64 = 2.41365134159266685502369798665e-1;
    pub const A53: f64 = -8.84549479328286085344864962717e-1;
    pub const A54: f64 = 9.24834003261792003115737966543e-1;
    pub const A61: f64 = 3.7037037037037037037037037037e-2;
    pub const A64: f64 = 1.70828608729473871279604482173e-1;
    pub const A65: f64 = 1.25467687566822425016691814123e-1;
    pub const A71: f64 = 3.7109375e-2;
    pub const A74: f64 = 1.70252211019544039314978060272e-1;
    pub const A75: f64 = 6.02165389804559606850219397283e-2;
    pub const A76: f64 = -1.7578125e-2;
    pub const A81: f64 = 3.70920001185047927108779319836e-2;
    pub const A84: f64 = 1.70383925712239993810214054705e-1;
    pub const A85: f64 = 1.07262030446373284651809199168e-1;
    pub const A86: f64 = -1.53194377486244017527936158236e-2;
    pub const A87: f64 = 8.27378916381402288758473766002e-3;
    pub const A91: f64 = 6.24110958716075717114429577812e-1;
    pub const A94: f64 = -3.36089262944694129406857109825e0;
    pub const A95: f64 = -8.68219346841726006818189891453e-1;
    pub const A96: f64 = 2.75920996994467083049415600797e1;
    pub const A97: f64 = 2.01540675504778934086186788979e1;
    pub const A98: f64 = -4.34898841810699588477366255144e1;
    pub const A101: f64 = 4.77662536438264365890433908527e-1;
    pub const A104: f64 = -2.48811461997166764192642586468e0;
    pub const A105: f64 = -5.90290826836842996371446475743e-1;
    pub const A106: f64 = 2.12300514481811942347288949897e1;
    pub const A107: f64 = 1.52792336328824235832596922938e1;
    pub const A108: f64 = -3.32882109689848629194453265587e1;
    pub const A109: f64 = -2.03312017085086261358222928593e-2;
    pub const A111: f64 = -9.3714243008598732571704021658e-1;
    pub const A114: f64 = 5.18637242884406370830023853209e0;
    pub const A115: f64 = 1.09143734899672957818500254654e0;
    pub const A116: f64 = -8.14978701074692612513997267357e0;
    pub const A117: f64 = -1.85200656599969598641566180701e1;
    pub const A118: f64 = 2.27394870993505042818970056734e1;
    pub const A119: f64 = 2.49360555267965238987089396762e0;
    pub const A1110: f64 = -3.0467644718982195003823669022e0;
    pub const A121: f64 = 2.27331014751653820792359768449e0;
    pub const A124: f64 = -1.05344954667372501984066689879e1;
    pub const A125: f64 = -2.00087205822486249909675718444e0;
    pub const A126: f64 = -1.79589318631187989172765950534e1;
    pub const A127: f64 = 2.79488845294199600508499808837e1;
    pub const A128: f64 = -2.85899827713502369474065508674e0;
    pub const A129: f64 = -8.87285693353062954433549289258e0;
    pub const A1210: f64 = 1.23605671757943030647266201528e1;
    pub const A1211: f64 = 6.43392746015763530355970484046e-1;

    pub const B1: f64 = 5.42937341165687622380535766363e-2;
    pub const B6: f64 = 4.45031289275240888144113950566e0;
    pub const B7: f64 = 1.89151789931450038304281599044e0;
    pub const B8: f64 = -5.8012039600105847814672114227e0;
    pub const B9: f64 = 3.1116436695781989440891606237e-1;
    pub const B10: f64 = -1.52160949662516078556178806805e-1;
    pub const B11: f64 = 2.01365400804030348374776537501e-1;
    pub const B12: f64 = 4.47106157277725905176885569043e-2;

    pub const BHH1: f64 = 0.244094488188976377952755905512e0;
    pub const BHH2: f64 = 0.733846688281611857341361741547e0;
    pub const BHH3: f64 = 0.220588235294117647058823529412e-1;

    pub const ER1: f64 = 0.1312004499419488073250102996e-1;
    pub const ER6: f64 = -0.1225156446376204440720569753e1;
    pub const ER7: f64 = -0.4957589496572501915214079952e0;
    pub const ER8: f64 = 0.1664377182454986536961530415e1;
    pub const ER9: f64 = -0.3503288487499736816886487290e0;
    pub const ER10: f64 = 0.3341791187130174790297318841e0;
    pub const ER11: f64 = 0.8192320648511571246570742613e-1;
    pub const ER12: f64 = -0.2235530786388629525884427845e-1;

    pub const A141: f64 = 5.61675022830479523392909219681e-2;
    pub const A147: f64 = 2.53500210216624811088794765333e-1;
    pub const A148: f64 = -2.46239037470802489917441475441e-1;
    pub const A149: f64 = -1.24191423263816360469010140626e-1;
    pub const A1410: f64 = 1.5329179827876569731206322685e-1;
    pub const A1411: f64 = 8.20105229563468988491666602057e-3;
    pub const A1412: f64 = 7.56789766054569976138603589584e-3;
    pub const A1413: f64 = -8.298e-3;
    pub const A151: f64 = 3.18346481635021405060768473261e-2;
    pub const A156: f64 = 2.83009096723667755288322961402e-2;
    pub const A157: f64 = 5.35419883074385676223797384372e-2;
    pub const A158: f64 = -5.49237485713909884646569340306e-2;
    pub const A1511: f64 = -1.08347328697249322858509316994e-4;
    pub const A1512: f64 = 3.82571090835658412954920192323e-4;
    pub const A1513: f64 = -3.40465008687404560802977114492e-4;
    pub const A1514: f64 = 1.41312443674632500278074618366e-1;
    pub const A161: f64 = -4.28896301583791923408573538692e-1;
    pub const A166: f64 = -4.69762141536116384314449447206e0;
    pub const A167: f64 = 7.68342119606259904184240953878e0;
    pub const A168: f64 = 4.06898981839711007970213554331e0;
    pub const A169: f64 = 3.56727187455281109270669543021e-1;
    pub const A1613: f64 = -1.39902416515901462129418009734e-3;
    pub const A1614: f64 = 2.9475147891527723389556272149e0;
    pub const A1615: f64 = -9.15095847217987001081870187138e0;

    /// Dense-output rows 4..7. Columns pair with stages
    /// 1, 6, 7, 8, 9, 10, 11, 12, 13 (= f at the new point), 14, 15, 16.
    pub const D: [[f64; 12]; 4] = [
        [
            -0.84289382761090128651353491142e1,
            0.56671495351937776962531783590e0,
            -0.30689499459498916912797304727e1,
            0.23846676565120698287728149680e1,
            0.21170345824450282767155149946e1,
            -0.87139158377797299206789907490e0,
            0.22404374302607882758541771650e1,
            0.63157877876946881815570249290e0,
            -0.88990336451333310820698117400e-1,
            0.18148505520854727256656404962e2,
            -0.91946323924783554000451984436e1,
            -0.44360363875948939664310572000e1,
        ],
        [
            0.10427508642579134603413151009e2,
            0.24228349177525818288430175319e3,
            0.16520045171727028198505394887e3,
            -0.37454675472269020279518312152e3,
            -0.22113666853125306036270938578e2,
            0.77334326684722638389603898808e1,
            -0.30674084731089398182061213626e2,
            -0.93321305264302278729567221706e1,
            0.15697238121770843886131091075e2,
            -0.31139403219565177677282850411e2,
            -0.93529243588444783865713862664e1,
            0.35816841486394083752465898540e2,
        ],
        [
            0.19985053242002433820987653617e2,
            -0.38703730874935176555105901742e3,
            -0.18917813819516756882830838328e3,
            0.52780815920542364900561016686e3,
            -0.11573902539959630126141871134e2,
            0.68812326946963000169666922661e1,
            -0.10006050966910838403183860980e1,
            0.77771377980534432092869265740e0,
            -0.27782057523535084065932004339e1,
            -0.60196695231264120758267380846e2,
            0.84320405506677161018159903784e2,
            0.11992291136182789328035130030e2,
        ],
        [
            -0.25693933462703749003312586129e2,
            -0.15418974869023643374053993627e3,
            -0.23152937917604549567536039109e3,
            0.35763911791061412378285349910e3,
            0.93405324183624310003907691704e2,
            -0.37458323136451633156875139351e2,
            0.10409964950896230045147246184e3,
            0.29840293426660503123344363579e2,
            -0.43533456590011143754432175058e2,
            0.96324553959188282948394950600e2,
            -0.39177261675615439165231486172e2,
            -0.14972683625798562581422125276e3,
        ],
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let cfg = IntegratorConfig::default();
        let mut last = None;
        for seg in Dop853::new(oscillator, 0.0, [1.0, 0.0], 50.0, cfg).unwrap() {
            last = Some(seg.unwrap());
        }
        let seg = last.unwrap();
        assert_eq!(seg.t_end(), 50.0);
        let y = seg.end();
        assert!((y[0] - 50f64.cos()).abs() < 1e-10, "{}", y[0] - 50f64.cos());
        assert!((y[1] + 50f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_and_rate_match_exact_solution() {
        let cfg = IntegratorConfig::default();
        let mut worst: f64 = 0.0;
        let mut worst_rate: f64 = 0.0;
        for seg in Dop853::new(oscillator, 0.0, [1.0, 0.0], 10.0, cfg).unwrap() {
            let seg = seg.unwrap();
            for j in 0..=10 {
                let t = seg.t_start() + seg.step() * j as f64 / 10.0;
                let (y, dy) = seg.eval_with_rate(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
                worst_rate = worst_rate.max((dy[0] + t.sin()).abs()).max((dy[1] + t.cos()).abs());
            }
            let (y0, _) = seg.eval_with_rate(seg.t_start());
            assert_eq!(y0, seg.start());
        }
        assert!(worst < 1e-11, "dense error {worst}");
        assert!(worst_rate < 1e-9, "dense rate error {worst_rate}");
    }

    #[test]
    fn exponential_growth_order_check() {
        // y' = y: tolerance should control global error at roughly rtol scale.
        let cfg = IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
        let end = Dop853::new(|y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], 5.0, cfg)
            .unwrap()
            .map(|s| s.unwrap().end())
            .last()
            .unwrap();
        assert!(((end[0] - 5f64.exp()) / 5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reports_failure() {
        // y' = y^2 from y=1 blows up at t=1.
        let cfg = IntegratorConfig::default();
        let mut solver = Dop853::new(|y: &[f64; 1]| Ok([y[0] * y[0]]), 0.0, [1.0], 2.0, cfg).unwrap();
        let err = solver.find_map(|s| s.err()).expect("must fail");
        match err {
            Error::Integration { t, .. } => assert!(t < 1.0 + 1e-9 && t > 0.99, "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = IntegratorConfig { rel_tol: 0.0, ..Default::default() };
        assert!(Dop853::new(oscillator, 0.0, [1.0, 0.0], 1.0, bad).is_err());
        assert!(Dop853::new(oscillator, 1.0, [1.0, 0.0], 1.0, IntegratorConfig::default()).is_err());
    }
}
