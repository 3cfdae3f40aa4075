use csflock::bounds::FlockingThresholds;
use csflock::{
    analyze, run, BoundsOptions, CheckKind, DelaySpec, DiagnosticsReport, DistributedKernel,
    Influence, InitialData, IntegratorSettings, KernelWeight, SchedulePattern, SystemConfig,
    TimeFunction, WeightSchedule,
};
use proptest::prelude::*;

fn pair(delay: DelaySpec, schedule: WeightSchedule, t_end: f64) -> SystemConfig {
    SystemConfig {
        agents: 2,
        dimension: 1,
        influence: Influence::Constant { k: 1.0 },
        delay,
        schedule,
        initial: InitialData::constant(&[vec![0.0], vec![0.0]], &[vec![0.5], vec![-0.5]]),
        coupling: Default::default(),
        integrator: IntegratorSettings::new(t_end),
    }
}

fn all_checks() -> BoundsOptions {
    BoundsOptions {
        enabled: CheckKind::ALL.to_vec(),
        ..BoundsOptions::default()
    }
}

#[test]
fn delayed_pair_passes_every_check() {
    let delay = DelaySpec::Pointwise {
        tau: TimeFunction::Constant { value: 1.0 },
        tau_bar: 1.0,
    };
    let cfg = pair(delay, WeightSchedule::always_on(), 40.0);
    let h = run(&cfg).unwrap();
    let report = analyze(&cfg, &h, &all_checks()).unwrap();
    for v in &report.checks {
        assert!(v.pass, "{v:?}");
        assert!(v.note.is_none(), "{v:?}");
    }
    assert!(report.flocking.velocity_aligned);
    let c = &report.constants;
    assert_eq!((c.c0v, c.m0x, c.d0), (0.5, 0.0, 1.0));
    assert!(c.mu.unwrap() > 0.0);
}

#[test]
fn distributed_pair_with_intermittent_weight_passes() {
    let delay = DelaySpec::Distributed(DistributedKernel {
        tau_bar: 0.5,
        tau1: TimeFunction::Constant { value: 0.1 },
        tau2: TimeFunction::Constant { value: 0.5 },
        beta: KernelWeight::Exponential { rate: 1.0 },
        nodes: 8,
    });
    let schedule = WeightSchedule::new(
        SchedulePattern::SquareWave {
            period: 1.0,
            duty: 0.5,
            phase: 0.0,
        },
        None,
    )
    .with_pe(1.0, 0.5);
    let cfg = pair(delay, schedule, 30.0);
    cfg.validate().unwrap();
    let h = run(&cfg).unwrap();
    let report = analyze(&cfg, &h, &BoundsOptions::default()).unwrap();
    assert_eq!(report.model, "distributed");
    assert!(report.pass, "{}", report.to_json());
}

#[test]
fn report_json_round_trips() {
    let cfg = pair(
        DelaySpec::Pointwise {
            tau: TimeFunction::Constant { value: 0.5 },
            tau_bar: 0.5,
        },
        WeightSchedule::always_on(),
        10.0,
    );
    let h = run(&cfg).unwrap();
    let report = analyze(&cfg, &h, &BoundsOptions::default()).unwrap();
    let back: DiagnosticsReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back.checks, report.checks);
    assert_eq!(back.constants, report.constants);
    assert_eq!(back.to_json(), report.to_json());
}

#[test]
fn position_threshold_is_enforced() {
    let cfg = pair(
        DelaySpec::Pointwise {
            tau: TimeFunction::Constant { value: 0.0 },
            tau_bar: 0.0,
        },
        WeightSchedule::always_on(),
        10.0,
    );
    let h = run(&cfg).unwrap();
    let tight = BoundsOptions {
        enabled: vec![CheckKind::Flocking],
        flocking: FlockingThresholds {
            position: Some(0.1),
            align_relative: 1e-6,
        },
        ..BoundsOptions::default()
    };
    let report = analyze(&cfg, &h, &tight).unwrap();
    // the pair separates to 0.5 before it aligns
    assert!(!report.flocking.position_bounded);
    assert!(!report.pass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Random small flocks under a verified square wave satisfy every estimate.
    #[test]
    fn random_flocks_satisfy_the_estimates(
        seed in 0u64..1000,
        agents in 2usize..6,
        tau in 0.0f64..0.5,
        duty in 0.3f64..1.0,
        gamma in 0.0f64..0.5,
    ) {
        let schedule = WeightSchedule::new(SchedulePattern::SquareWave { period: 1.0, duty, phase: 0.0 }, None)
            .with_pe(1.0, duty);
        let cfg = SystemConfig {
            agents,
            dimension: 2,
            influence: Influence::PowerLaw { k: 1.0, gamma },
            delay: DelaySpec::Pointwise { tau: TimeFunction::Constant { value: tau }, tau_bar: 0.5 },
            schedule,
            initial: InitialData::random_ball(agents, 2, seed, 1.0, 1.0, false, true),
            coupling: Default::default(),
            integrator: IntegratorSettings::new(12.0),
        };
        cfg.validate().unwrap();
        let h = run(&cfg).unwrap();
        let report = analyze(&cfg, &h, &BoundsOptions::default()).unwrap();
        for v in &report.checks {
            prop_assert!(v.pass, "{:?}", v);
        }
    }
}
