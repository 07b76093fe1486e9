use bsa_core::friction::{ClutchSchedule, FrictionParams};
use bsa_core::hybrid::{BsaMode, BsaState, Stage, SwitchingSignal};
use bsa_core::sim::{simulate_bsa, simulate_friction, EventKind, InputSchedule, IntegratorConfig, Trajectory};
use bsa_core::verify::energy_balance_error;
use bsa_core::PendulumParams;

const SWITCH: f64 = 0.14;
const HORIZON: f64 = 0.2;

fn inputs() -> InputSchedule {
    InputSchedule::new(
        vec![0.0, 0.1, 0.15],
        vec![vec![2.0, 2.0], vec![2.0, -1.0], vec![0.0, 2.0]],
    )
    .unwrap()
}

fn ideal() -> Trajectory {
    let sigma = SwitchingSignal::new(vec![
        Stage {
            mode: BsaMode::SeaDec,
            duration: SWITCH,
        },
        Stage {
            mode: BsaMode::DecSea,
            duration: HORIZON - SWITCH,
        },
    ])
    .unwrap();
    simulate_bsa(
        &PendulumParams::default(),
        &BsaState::equilibrium(BsaMode::SeaDec),
        &inputs(),
        &sigma,
        &IntegratorConfig::default(),
    )
    .unwrap()
}

fn friction(m_max: f64, ramp: f64) -> Trajectory {
    let schedule =
        ClutchSchedule::from_mode_sequence(&[BsaMode::SeaDec, BsaMode::DecSea], &[SWITCH], m_max, ramp, ramp).unwrap();
    simulate_friction(
        &PendulumParams::default(),
        &[0.0; 10],
        &inputs(),
        &schedule,
        &FrictionParams::default(),
        HORIZON,
        &IntegratorConfig::default(),
    )
    .unwrap()
}

#[test]
fn stiff_fast_clutches_approach_the_ideal_model() {
    let reference = ideal().final_v_tcp().unwrap();
    let mut previous = f64::INFINITY;
    for m in [30.0, 300.0, 3000.0] {
        let ramp = 1e-4 * (30.0 / m) * (30.0 / m);
        let v = friction(m, ramp).final_v_tcp().unwrap();
        let gap = (v - reference).abs() / reference;
        assert!(gap <= previous + 1e-9, "M = {m}: gap {gap} after {previous}");
        previous = gap;
    }
    assert!(previous < 1e-3, "remaining gap {previous}");
}

#[test]
fn slow_clutches_lose_energy_and_log_transitions() {
    let tr = friction(30.0, 0.02);
    assert!(energy_balance_error(&tr) < 1e-4);
    assert!(tr
        .samples
        .windows(2)
        .all(|w| w[1].dissipated >= w[0].dissipated - 1e-12));
    assert!(tr.last().unwrap().dissipated > 0.0);
    let kinds: Vec<EventKind> = tr.events.iter().map(|e| e.kind).collect();
    assert!(kinds.contains(&EventKind::Slip) || kinds.contains(&EventKind::Stick));
    assert!(tr.final_v_tcp().unwrap() < ideal().final_v_tcp().unwrap());
}

#[test]
fn friction_trajectory_is_deterministic() {
    let a = friction(30.0, 0.02);
    let b = friction(30.0, 0.02);
    assert_eq!(a, b);
}
