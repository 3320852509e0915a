use hybrid_limit::analysis::{poincare_section, write_section_csv};
use hybrid_limit::config::RunConfig;
use hybrid_limit::dynamics::SemiclassicalFlow;
use hybrid_limit::initial::build_semiclassical_ic;
use hybrid_limit::trajectory::{integrate, write_trajectory_csv};

const TEXT: &str = "
[model]
preset = h1
[ic]
E = 0.6
I = 0.17361
[integrator]
T = 50
sample_dt = 0.5
";

#[test]
fn config_to_trajectory_csv() {
    let cfg = RunConfig::parse(TEXT).unwrap();
    let req = cfg.ic_requests().unwrap()[0];
    let s0 = build_semiclassical_ic(&req, &cfg.params).unwrap();
    let flow = SemiclassicalFlow { params: &cfg.params };
    let traj = integrate(&flow, &s0, (0.0, cfg.horizon().unwrap()), &cfg.integrator).unwrap();
    assert_eq!(traj.len(), 101);
    assert!(traj.warning.is_none());

    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 102);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 50.0);
    assert!((last[6] - 0.17361).abs() <= 1e-9 * 0.17361);
    assert!((last[7] - 0.6).abs() <= 1e-9 * 0.6);
}

#[test]
fn same_config_same_section_bytes() {
    let run = || {
        let cfg = RunConfig::parse(TEXT).unwrap();
        let s0 = build_semiclassical_ic(&cfg.ic_requests().unwrap()[0], &cfg.params).unwrap();
        let flow = SemiclassicalFlow { params: &cfg.params };
        let r = poincare_section(&flow, &s0, &cfg.task.section, &cfg.integrator, 200.0).unwrap();
        let mut buf = Vec::new();
        write_section_csv(&mut buf, &r.points).unwrap();
        buf
    };
    let a = run();
    assert!(a.len() > 100);
    assert_eq!(a, run());
}
