use bsa_core::dynamics::{big_inertia, mass_matrix};
use bsa_core::experiments::exchange_cycles;
use bsa_core::hybrid::{flow, impact_map, jump, BsaMode, BsaState, Stage, SwitchingSignal};
use bsa_core::ocp::{collocation_points, CollocationKind};
use bsa_core::sim::{bsa_power, simulate_bsa, InputSchedule, IntegratorConfig};
use bsa_core::PendulumParams;
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = BsaMode> {
    prop::sample::select(BsaMode::ALL.to_vec())
}

fn spd() -> impl Strategy<Value = [[f64; 4]; 4]> {
    prop::array::uniform16(-1.0f64..1.0).prop_map(|l| {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| l[4 * i + k] * l[4 * j + k]).sum::<f64>();
            }
            m[i][i] += 0.3;
        }
        m
    })
}

fn kinetic(pi: &[[f64; 4]; 4], v: &[f64; 4]) -> f64 {
    (0..4)
        .map(|i| (0..4).map(|j| v[i] * pi[i][j] * v[j]).sum::<f64>())
        .sum::<f64>()
        * 0.5
}

/// Velocities on the constraint manifold of `mode`.
fn consistent(mode: BsaMode, qd: [f64; 2]) -> [f64; 4] {
    let (c1, c2) = mode.clutches();
    [if c1 { qd[0] } else { 0.0 }, if c2 { qd[1] } else { 0.0 }, qd[0], qd[1]]
}

proptest! {
    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q1 in -7.0f64..7.0, q2 in -7.0f64..7.0) {
        let m = mass_matrix(&[q1, q2], &PendulumParams::default());
        prop_assert_eq!(m[0][1], m[1][0]);
        prop_assert!(m[0][0] > 0.0);
        prop_assert!(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0);
    }

    #[test]
    fn impact_map_projects_without_energy_gain(pi in spd(), v in prop::array::uniform4(-10.0f64..10.0), m in mode()) {
        let c = m.constraint();
        let (plus, _) = impact_map(&pi, &c, &v).unwrap();
        let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for r in c.apply(&plus) {
            prop_assert!(r.abs() <= 1e-10 * scale);
        }
        prop_assert!(kinetic(&pi, &plus) <= kinetic(&pi, &v) * (1.0 + 1e-12) + 1e-12);
        let (again, impulse) = impact_map(&pi, &c, &plus).unwrap();
        for i in 0..4 {
            prop_assert!((again[i] - plus[i]).abs() <= 1e-12 * scale);
        }
        prop_assert!(impulse.iter().all(|l| l.abs() <= 1e-10 * scale));
    }

    #[test]
    fn jump_keeps_positions(
        xi in prop::array::uniform4(-2.0f64..2.0),
        xidot in prop::array::uniform4(-5.0f64..5.0),
        theta in prop::array::uniform2(-2.0f64..2.0),
        from in mode(),
        to in mode(),
    ) {
        let p = PendulumParams::default();
        let x = BsaState { theta, xi, xidot, mode: from, t: 0.3 };
        let (y, _) = jump(&p, &x, to).unwrap();
        prop_assert_eq!(y.theta, theta);
        prop_assert_eq!(y.xi, xi);
        prop_assert_eq!(y.t, 0.3);
        prop_assert_eq!(y.mode, to);
        prop_assert!(y.constraint_residual() <= 1e-10 * (1.0 + xidot.iter().fold(0.0f64, |a, b| a.max(b.abs()))));
        let pi = big_inertia(&[xi[2], xi[3]], &p);
        prop_assert!(kinetic(&pi, &y.xidot) <= kinetic(&pi, &xidot) + 1e-9);
    }

    #[test]
    fn flow_stays_on_the_constraint_manifold(
        xi in prop::array::uniform4(-2.0f64..2.0),
        qd in prop::array::uniform2(-5.0f64..5.0),
        theta in prop::array::uniform2(-2.0f64..2.0),
        u in prop::array::uniform2(-2.0f64..2.0),
        m in mode(),
    ) {
        let p = PendulumParams::default();
        let x = BsaState { theta, xi, xidot: consistent(m, qd), mode: m, t: 0.0 };
        let f = flow(&p, &x, &u, 1e-12).unwrap();
        prop_assert_eq!(&f[..2], &u[..]);
        let acc = [f[6], f[7], f[8], f[9]];
        for r in m.constraint().apply(&acc) {
            prop_assert!(r.abs() <= 1e-8 * (1.0 + acc.iter().fold(0.0f64, |a, b| a.max(b.abs()))));
        }
    }

    #[test]
    fn input_power_is_output_plus_spring_rate(
        x in prop::array::uniform10(-3.0f64..3.0),
        u in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let p = PendulumParams::default();
        let s = bsa_power(&p, 0.0, &x, &u);
        let k = p.stiffness();
        for j in 0..2 {
            prop_assert!((s.p_in[j] - (s.p_out[j] + s.es_dot[j])).abs() <= 1e-9);
            let direct = k[j] * (x[j] - x[2 + j]) * u[j];
            prop_assert!((s.p_in[j] - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn zero_order_hold_returns_the_active_segment(
        gaps in prop::collection::vec(0.01f64..0.5, 1..8),
        frac in 0.0f64..1.0,
    ) {
        let mut times = vec![0.0];
        for g in &gaps {
            let last = *times.last().unwrap();
            times.push(last + g);
        }
        let values: Vec<Vec<f64>> = (0..times.len()).map(|i| vec![i as f64, -(i as f64)]).collect();
        let s = InputSchedule::new(times.clone(), values).unwrap();
        let t = frac * *times.last().unwrap();
        let seg = times.iter().rposition(|&b| b <= t).unwrap();
        prop_assert_eq!(s.value_at(t)[0], seg as f64);
        for (i, &b) in times.iter().enumerate() {
            prop_assert_eq!(s.value_at(b)[0], i as f64);
            prop_assert_eq!(s.value_left(b)[0], i.saturating_sub(1) as f64);
        }
    }

    #[test]
    fn collocation_points_are_ordered_inside_the_interval(d in 1usize..7, radau in any::<bool>()) {
        let kind = if radau { CollocationKind::Radau } else { CollocationKind::Legendre };
        let pts = collocation_points(d, kind).unwrap();
        prop_assert_eq!(pts.len(), d);
        prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(pts[0] > 0.0 && pts[d - 1] <= 1.0 + 1e-15);
        prop_assert_eq!(pts[d - 1] == 1.0, radau);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ideal_model_balances_energy(
        u0 in prop::array::uniform2(-2.0f64..2.0),
        u1 in prop::array::uniform2(-2.0f64..2.0),
        t_switch in 0.02f64..0.13,
        first in mode(),
        second in mode(),
    ) {
        let p = PendulumParams::default();
        let inputs = InputSchedule::new(vec![0.0, 0.07], vec![u0.to_vec(), u1.to_vec()]).unwrap();
        let sigma = SwitchingSignal::new(vec![
            Stage { mode: first, duration: t_switch },
            Stage { mode: second, duration: 0.15 - t_switch },
        ])
        .unwrap();
        let cfg = IntegratorConfig::default();
        let tr = simulate_bsa(&p, &BsaState::equilibrium(first), &inputs, &sigma, &cfg).unwrap();
        let (a, b) = (&tr.samples[0], tr.samples.last().unwrap());
        let injected = b.work[0] + b.work[1];
        let stored = b.energy.total() - a.energy.total() + b.dissipated;
        prop_assert!((injected - stored).abs() <= 1e-6, "injected {} stored {}", injected, stored);
        prop_assert!(b.dissipated >= -1e-12);
        prop_assert!(tr.samples.windows(2).all(|w| w[1].t >= w[0].t));
    }

    #[test]
    fn cycle_count_falls_with_prominence(
        u in prop::array::uniform2(-2.0f64..2.0),
        lo in 0.05f64..0.5,
        extra in 0.0f64..0.4,
    ) {
        let p = PendulumParams::default();
        let inputs = InputSchedule::new(vec![0.0, 0.1], vec![u.to_vec(), vec![-u[0], -u[1]]]).unwrap();
        let sigma = SwitchingSignal::new(vec![Stage { mode: BsaMode::SeaSea, duration: 0.6 }]).unwrap();
        let cfg = IntegratorConfig::default().with_dt(1e-3);
        let tr = simulate_bsa(&p, &BsaState::equilibrium(BsaMode::SeaSea), &inputs, &sigma, &cfg).unwrap();
        prop_assert!(exchange_cycles(&tr, lo) >= exchange_cycles(&tr, lo + extra));
    }
}
