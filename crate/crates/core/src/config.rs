//! Plain-text run configuration: `[section]` headers, `key = value` lines
//! and `#` comments.
//!
//! Sections are `model`, `ic`, `integrator` and `task`. Unknown sections and
//! keys are rejected. [`RunConfig::to_text`] writes the resolved form, which
//! parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::{Direction, SectionConfig};
use crate::error::{Error, Result};
use crate::initial::{ICRequest, Sign};
use crate::integrator::IntegratorConfig;
use crate::model::{preset_h1, preset_h2, HybridParams, PotentialSpec, DEFAULT_HBAR};

const SECTIONS: [&str; 4] = ["model", "ic", "integrator", "task"];

type Section = BTreeMap<String, String>;

/// Parsed but unresolved `section -> key -> value` map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    sections: BTreeMap<String, Section>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = n + 1;
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: malformed section header")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!("line {lineno}: unknown section [{name}]")));
                }
                if raw.sections.contains_key(name) {
                    return Err(Error::Config(format!("line {lineno}: section [{name}] repeated")));
                }
                raw.sections.insert(name.to_string(), Section::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            let Some(sec) = &current else {
                return Err(Error::Config(format!("line {lineno}: key `{key}` outside any section")));
            };
            let map = raw.sections.get_mut(sec).expect("section inserted on header");
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {lineno}: key `{key}` repeated in [{sec}]")));
            }
        }
        Ok(raw)
    }
}

/// Consumes keys of one section and reports whatever is left over.
struct Reader {
    name: &'static str,
    map: Section,
}

impl Reader {
    fn new(raw: &mut RawConfig, name: &'static str) -> Self {
        Self { name, map: raw.sections.remove(name).unwrap_or_default() }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| parse_f64(self.name, key, &v)).transpose()
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key).map(|v| parse_list(self.name, key, &v)).transpose()
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("[{}] {key}: expected a non-negative integer, got `{v}`", self.name)))
            })
            .transpose()
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|v| match v.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!("[{}] {key}: expected true or false, got `{v}`", self.name))),
            })
            .transpose()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::Config(format!("unknown key `{k}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!("[{section}] {key}: expected a finite number, got `{v}`"))),
    }
}

fn parse_list(section: &str, key: &str, v: &str) -> Result<Vec<f64>> {
    let out = v
        .split(',')
        .map(|t| parse_f64(section, key, t.trim()))
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Means,
    Multipliers,
    Classical,
}

impl Mode {
    fn parse(v: &str) -> Result<Self> {
        match v {
            "means" => Ok(Mode::Means),
            "multipliers" => Ok(Mode::Multipliers),
            "classical" => Ok(Mode::Classical),
            _ => Err(Error::Config(format!("[task] mode: expected means, multipliers or classical, got `{v}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Means => "means",
            Mode::Multipliers => "multipliers",
            Mode::Classical => "classical",
        }
    }
}

fn parse_direction(v: &str) -> Result<Direction> {
    match v {
        "up" => Ok(Direction::Up),
        "down" => Ok(Direction::Down),
        "both" => Ok(Direction::Both),
        _ => Err(Error::Config(format!("[task] direction: expected up, down or both, got `{v}`"))),
    }
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Up => "up",
        Direction::Down => "down",
        Direction::Both => "both",
    }
}

/// Initial condition section. `xx0` empty means `auto`.
#[derive(Debug, Clone, PartialEq)]
pub struct IcSpec {
    pub e: Option<f64>,
    pub i: Option<f64>,
    pub l0: f64,
    pub xx0: Vec<f64>,
    pub a0: f64,
    pub pa_sign: Sign,
}

/// Log-uniform grid `n` points over `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub mode: Mode,
    pub section: SectionConfig,
    pub i_list: Option<Vec<f64>>,
    pub grid: Option<GridSpec>,
    pub metric_horizon: Option<f64>,
    pub assert_monotone: bool,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Hamiltonian coefficients; `params.hbar` holds the resolved Planck constant.
    pub params: HybridParams,
    /// Whether `hbar` was given explicitly in `[model]` or `[ic]`.
    pub hbar_explicit: bool,
    pub ic: IcSpec,
    pub integrator: IntegratorConfig,
    pub t_end: Option<f64>,
    pub task: TaskSpec,
}

fn read_model(r: &mut Reader) -> Result<HybridParams> {
    let preset = r.take("preset");
    let p = match preset.as_deref() {
        Some("h1") => preset_h1(
            r.f64_or("m_q", 1.0)?,
            r.f64_or("m_cl", 1.0)?,
            r.f64_or("omega_q", 1.0)?,
            r.f64_or("e", 1.0)?,
        ),
        Some("h2") => preset_h2(
            r.f64_or("omega_q", 1.0)?,
            r.f64_or("omega_cl", 1.0)?,
            r.f64_or("e_q_cl", 1.0)?,
            r.f64_or("eta", 0.0)?,
        ),
        Some(other) => return Err(Error::Config(format!("[model] preset: expected h1 or h2, got `{other}`"))),
        None => {
            let poly = |r: &mut Reader, key: &str| -> Result<PotentialSpec> {
                match r.list(key)? {
                    Some(c) => PotentialSpec::new(c).map_err(|e| Error::Config(format!("[model] {key}: {e}"))),
                    None => Ok(PotentialSpec::zero()),
                }
            };
            Ok(HybridParams {
                alpha1: r.f64_or("alpha1", 0.0)?,
                alpha2: r.f64_or("alpha2", 0.0)?,
                alpha3: r.f64_or("alpha3", 0.0)?,
                beta1: r.f64_or("beta1", 0.0)?,
                beta2: r.f64_or("beta2", 0.0)?,
                gamma: r.f64_or("gamma", 0.0)?,
                eta: r.f64_or("eta", 0.0)?,
                f: poly(r, "F")?,
                v: poly(r, "V")?,
                hbar: DEFAULT_HBAR,
            })
        }
    };
    p.map_err(|e| Error::Config(format!("[model] {e}")))
}

fn read_ic(r: &mut Reader) -> Result<IcSpec> {
    let xx0 = match r.take("xx0").as_deref() {
        None | Some("auto") => Vec::new(),
        Some(v) => parse_list("ic", "xx0", v)?,
    };
    let pa_sign = match r.take("PA_sign").as_deref() {
        None | Some("+") | Some("+1") | Some("1") | Some("plus") => Sign::Plus,
        Some("-") | Some("-1") | Some("minus") => Sign::Minus,
        Some(v) => return Err(Error::Config(format!("[ic] PA_sign: expected + or -, got `{v}`"))),
    };
    Ok(IcSpec {
        e: r.f64("E")?,
        i: r.f64("I")?,
        l0: r.f64_or("L0", 0.0)?,
        xx0,
        a0: r.f64_or("A0", 0.0)?,
        pa_sign,
    })
}

fn read_integrator(r: &mut Reader) -> Result<(IntegratorConfig, Option<f64>)> {
    let d = IntegratorConfig::default();
    let cfg = IntegratorConfig {
        rel_tol: r.f64_or("rel_tol", d.rel_tol)?,
        abs_tol: r.f64_or("abs_tol", d.abs_tol)?,
        max_step: r.f64_or("max_step", d.max_step)?,
        sample_dt: r.f64_or("sample_dt", d.sample_dt)?,
    };
    cfg.validate().map_err(|e| Error::Config(format!("[integrator] {e}")))?;
    let t = r.f64("T")?;
    if let Some(t) = t {
        if !(t > 0.0) {
            return Err(Error::Config(format!("[integrator] T must be > 0, got {t}")));
        }
    }
    Ok((cfg, t))
}

fn read_task(r: &mut Reader) -> Result<TaskSpec> {
    let d = SectionConfig::default();
    let mode = r.take("mode").map(|v| Mode::parse(&v)).transpose()?.unwrap_or(Mode::Means);
    let direction = r.take("direction").map(|v| parse_direction(&v)).transpose()?.unwrap_or(d.direction);
    let section = SectionConfig {
        crossing_value: r.f64_or("crossing_value", d.crossing_value)?,
        direction,
        transient_skip: r.f64_or("transient_skip", d.transient_skip)?,
        max_points: r.usize("max_points")?.unwrap_or(d.max_points),
        refine_tol: r.f64_or("refine_tol", d.refine_tol)?,
    };
    section.validate().map_err(|e| Error::Config(format!("[task] {e}")))?;
    let i_list = r.list("I_list")?;
    let (min, max, n) = (r.f64("I_min")?, r.f64("I_max")?, r.usize("n")?);
    let grid = match (min, max, n) {
        (None, None, None) => None,
        (Some(min), Some(max), Some(n)) => Some(GridSpec { min, max, n }),
        _ => return Err(Error::Config("[task] a grid needs all of I_min, I_max and n".into())),
    };
    if i_list.is_some() && grid.is_some() {
        return Err(Error::Config("[task] give either I_list or I_min/I_max/n, not both".into()));
    }
    Ok(TaskSpec {
        mode,
        section,
        i_list,
        grid,
        metric_horizon: r.f64("metric_horizon")?,
        assert_monotone: r.bool("assert_monotone")?.unwrap_or(false),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let mut model = Reader::new(&mut raw, "model");
        let mut ic = Reader::new(&mut raw, "ic");
        let mut integ = Reader::new(&mut raw, "integrator");
        let mut task = Reader::new(&mut raw, "task");

        let model_hbar = model.f64("hbar")?;
        let ic_hbar = ic.f64("hbar")?;
        let mut params = read_model(&mut model)?;
        let hbar = match (model_hbar, ic_hbar) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("hbar given as {a} in [model] and {b} in [ic]")));
            }
            (a, b) => a.or(b),
        };
        if let Some(h) = hbar {
            if !(h > 0.0) {
                return Err(Error::Config(format!("hbar must be > 0, got {h}")));
            }
        }
        params.hbar = hbar.unwrap_or(DEFAULT_HBAR);
        let ic_spec = read_ic(&mut ic)?;
        let (integrator, t_end) = read_integrator(&mut integ)?;
        let task_spec = read_task(&mut task)?;
        for r in [model, ic, integ, task] {
            r.finish()?;
        }
        let cfg = RunConfig {
            params,
            hbar_explicit: hbar.is_some(),
            ic: ic_spec,
            integrator,
            t_end,
            task: task_spec,
        };
        if cfg.task.mode == Mode::Multipliers && !cfg.hbar_explicit {
            return Err(Error::Config("missing key `hbar` (required in [model] or [ic] for mode = multipliers)".into()));
        }
        if cfg.task.mode == Mode::Classical && cfg.ic.i.is_some_and(|i| i != 0.0) {
            return Err(Error::Config("[ic] I must be 0 for mode = classical".into()));
        }
        Ok(cfg)
    }

    pub fn hbar(&self) -> f64 {
        self.params.hbar
    }

    pub fn energy(&self) -> Result<f64> {
        self.ic.e.ok_or_else(|| Error::Config("missing key `E` in [ic]".into()))
    }

    /// `I` from `[ic]`; 0 in classical mode.
    pub fn invariant(&self) -> Result<f64> {
        match (self.task.mode, self.ic.i) {
            (Mode::Classical, i) => Ok(i.unwrap_or(0.0)),
            (_, Some(i)) => Ok(i),
            (_, None) => Err(Error::Config("missing key `I` in [ic]".into())),
        }
    }

    pub fn horizon(&self) -> Result<f64> {
        self.t_end.ok_or_else(|| Error::Config("missing key `T` in [integrator]".into()))
    }

    /// One request per `xx0` value, or a single midpoint request for `auto`.
    pub fn ic_requests(&self) -> Result<Vec<ICRequest>> {
        let base = ICRequest {
            e: self.energy()?,
            i: self.invariant()?,
            l0: self.ic.l0,
            xx0: None,
            a0: self.ic.a0,
            pa_sign: self.ic.pa_sign,
            hbar: self.hbar(),
        };
        if self.ic.xx0.is_empty() {
            return Ok(vec![base]);
        }
        Ok(self.ic.xx0.iter().map(|&x| base.with_xx0(x)).collect())
    }

    /// Single `xx0` for runs that take one orbit per `I` (`None` = auto).
    pub fn single_xx0(&self) -> Result<Option<f64>> {
        match self.ic.xx0.as_slice() {
            [] => Ok(None),
            [x] => Ok(Some(*x)),
            _ => Err(Error::Config("[ic] xx0 must be a single value or auto for this command".into())),
        }
    }

    /// Values from `I_list` or the log grid.
    pub fn i_values(&self) -> Result<Vec<f64>> {
        match (&self.task.i_list, self.task.grid) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(g)) => {
                crate::analysis::log_grid(g.min, g.max, g.n).map_err(|e| Error::Config(format!("[task] {e}")))
            }
            (None, None) => Err(Error::Config("missing key `I_list` (or I_min/I_max/n) in [task]".into())),
        }
    }

    /// Canonical text form. Parsing it yields an equal [`RunConfig`].
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        for (k, v) in [
            ("alpha1", p.alpha1),
            ("alpha2", p.alpha2),
            ("alpha3", p.alpha3),
            ("beta1", p.beta1),
            ("beta2", p.beta2),
            ("gamma", p.gamma),
            ("eta", p.eta),
        ] {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(s, "F = {}", fmt_list(p.f.coefficients()));
        let _ = writeln!(s, "V = {}", fmt_list(p.v.coefficients()));
        if self.hbar_explicit {
            let _ = writeln!(s, "hbar = {}", fmt_f64(p.hbar));
        }

        let ic = &self.ic;
        let _ = writeln!(s, "\n[ic]");
        if let Some(e) = ic.e {
            let _ = writeln!(s, "E = {}", fmt_f64(e));
        }
        if let Some(i) = ic.i {
            let _ = writeln!(s, "I = {}", fmt_f64(i));
        }
        let _ = writeln!(s, "L0 = {}", fmt_f64(ic.l0));
        let xx0 = if ic.xx0.is_empty() { "auto".to_string() } else { fmt_list(&ic.xx0) };
        let _ = writeln!(s, "xx0 = {xx0}");
        let _ = writeln!(s, "A0 = {}", fmt_f64(ic.a0));
        let _ = writeln!(s, "PA_sign = {}", if ic.pa_sign == Sign::Plus { "+" } else { "-" });

        let g = &self.integrator;
        let _ = writeln!(s, "\n[integrator]");
        let _ = writeln!(s, "rel_tol = {}", fmt_f64(g.rel_tol));
        let _ = writeln!(s, "abs_tol = {}", fmt_f64(g.abs_tol));
        let _ = writeln!(s, "max_step = {}", fmt_f64(g.max_step));
        let _ = writeln!(s, "sample_dt = {}", fmt_f64(g.sample_dt));
        if let Some(t) = self.t_end {
            let _ = writeln!(s, "T = {}", fmt_f64(t));
        }

        let t = &self.task;
        let _ = writeln!(s, "\n[task]");
        let _ = writeln!(s, "mode = {}", t.mode.as_str());
        let _ = writeln!(s, "direction = {}", direction_str(t.section.direction));
        let _ = writeln!(s, "crossing_value = {}", fmt_f64(t.section.crossing_value));
        let _ = writeln!(s, "transient_skip = {}", fmt_f64(t.section.transient_skip));
        let _ = writeln!(s, "max_points = {}", t.section.max_points);
        let _ = writeln!(s, "refine_tol = {}", fmt_f64(t.section.refine_tol));
        if let Some(v) = &t.i_list {
            let _ = writeln!(s, "I_list = {}", fmt_list(v));
        }
        if let Some(g) = t.grid {
            let _ = writeln!(s, "I_min = {}", fmt_f64(g.min));
            let _ = writeln!(s, "I_max = {}", fmt_f64(g.max));
            let _ = writeln!(s, "n = {}", g.n);
        }
        if let Some(m) = t.metric_horizon {
            let _ = writeln!(s, "metric_horizon = {}", fmt_f64(m));
        }
        let _ = writeln!(s, "assert_monotone = {}", t.assert_monotone);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_h1;
    use proptest::prelude::*;

    const FIG1: &str = "
# H1 at the mesoscopic point
[model]
preset = h1
[ic]
E = 0.6
I = 0.17361   # invariant
xx0 = auto
[integrator]
T = 100
";

    #[test]
    fn preset_config_resolves() {
        let c = RunConfig::parse(FIG1).unwrap();
        assert_eq!(c.params, default_h1());
        assert!(!c.hbar_explicit);
        assert_eq!(c.energy().unwrap(), 0.6);
        assert_eq!(c.invariant().unwrap(), 0.17361);
        assert_eq!(c.horizon().unwrap(), 100.0);
        assert_eq!(c.task.mode, Mode::Means);
        let reqs = c.ic_requests().unwrap();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].xx0, None);
    }

    #[test]
    fn unknown_key_and_section_rejected() {
        let e = RunConfig::parse("[model]\npreset = h1\nomega_cl = 2\n").unwrap_err();
        assert!(e.to_string().contains("omega_cl"), "{e}");
        let e = RunConfig::parse("[output]\nx = 1\n").unwrap_err();
        assert!(e.to_string().contains("output"), "{e}");
        let e = RunConfig::parse("E = 1\n").unwrap_err();
        assert!(e.to_string().contains("outside"), "{e}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = RunConfig::parse("[ic]\nE = 1\nE = 2\n").unwrap_err();
        assert!(e.to_string().contains("repeated"), "{e}");
    }

    #[test]
    fn multipliers_need_hbar() {
        let e = RunConfig::parse("[model]\npreset = h1\n[task]\nmode = multipliers\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("hbar"), "{e}");
        let c = RunConfig::parse("[model]\npreset = h1\n[ic]\nhbar = 1e-40\n[task]\nmode = multipliers\n").unwrap();
        assert_eq!(c.hbar(), 1e-40);
    }

    #[test]
    fn conflicting_hbar_rejected() {
        assert!(RunConfig::parse("[model]\nhbar = 1\n[ic]\nhbar = 2\n").is_err());
    }

    #[test]
    fn generic_coefficients_and_lists() {
        let c = RunConfig::parse(
            "[model]\nalpha1 = 2\nalpha2 = 0.5\nbeta2 = 1\ngamma = 0.3\nV = 0, 0, 1\nF = 1, 0, -0.5\n\
             [ic]\nxx0 = 0.4, 0.6\n[task]\nI_list = 1, 0.1\n",
        )
        .unwrap();
        assert_eq!(c.params.alpha1, 2.0);
        assert_eq!(c.params.v.coefficients(), &[0.0, 0.0, 1.0]);
        assert_eq!(c.params.f.coefficients(), &[1.0, 0.0, -0.5]);
        assert_eq!(c.ic.xx0, vec![0.4, 0.6]);
        assert_eq!(c.i_values().unwrap(), vec![1.0, 0.1]);
        assert!(c.single_xx0().is_err());
    }

    #[test]
    fn missing_keys_named() {
        let c = RunConfig::parse("[model]\npreset = h1\n").unwrap();
        assert!(c.energy().unwrap_err().to_string().contains("`E`"));
        assert!(c.invariant().unwrap_err().to_string().contains("`I`"));
        assert!(c.horizon().unwrap_err().to_string().contains("`T`"));
        assert!(c.i_values().unwrap_err().to_string().contains("I_list"));
    }

    #[test]
    fn classical_mode_forces_zero_invariant() {
        let c = RunConfig::parse("[ic]\nE = 0.6\n[task]\nmode = classical\n").unwrap();
        assert_eq!(c.invariant().unwrap(), 0.0);
        assert!(RunConfig::parse("[ic]\nI = 0.1\n[task]\nmode = classical\n").is_err());
    }

    #[test]
    fn partial_grid_rejected() {
        assert!(RunConfig::parse("[task]\nI_min = 1e-3\nn = 4\n").is_err());
        let c = RunConfig::parse("[task]\nI_min = 1e-2\nI_max = 1\nn = 3\n").unwrap();
        let g = c.i_values().unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_values_rejected() {
        for text in [
            "[ic]\nE = abc\n",
            "[ic]\nE = inf\n",
            "[task]\ndirection = sideways\n",
            "[task]\nmax_points = -3\n",
            "[integrator]\nrel_tol = 2\n",
            "[integrator]\nT = 0\n",
            "[model]\npreset = h3\n",
            "[model]\npreset = h1\nm_q = -1\n",
            "[ic]\nPA_sign = ?\n",
            "[model\n",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn text_round_trip_fixed() {
        for text in [
            FIG1,
            "[model]\npreset = h2\neta = 0.05\nhbar = 1\n[ic]\nE = 0.6\nI = 0.17361\nPA_sign = -\n\
             [task]\nmode = multipliers\ndirection = both\nassert_monotone = true\nI_min = 1e-30\nI_max = 1\nn = 50\n",
        ] {
            let c = RunConfig::parse(text).unwrap();
            let again = RunConfig::parse(&c.to_text()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_text(), c.to_text());
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(
            a1 in 1e-3f64..1e3, g in -10.0f64..10.0, eta in 0.0f64..1.0,
            e in 1e-3f64..10.0, i in 0.0f64..1.0, xx in proptest::collection::vec(1e-3f64..1.0, 0..4),
            tol in 1e-14f64..1e-6, skip in 0.0f64..100.0,
        ) {
            let mut c = RunConfig::parse(FIG1).unwrap();
            c.params.alpha1 = a1;
            c.params.gamma = g;
            c.params.eta = eta;
            c.ic.e = Some(e);
            c.ic.i = Some(i);
            c.ic.xx0 = xx;
            c.integrator.rel_tol = tol;
            c.task.section.transient_skip = skip;
            let again = RunConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(again, c);
        }
    }
}
