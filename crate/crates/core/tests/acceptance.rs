//! Acceptance criteria, checked against oracles written out in this file.
//! Runs without the libtest harness so that each criterion's `PASS`/`FAIL`
//! line is always printed; exits nonzero if any criterion fails.

use std::time::Instant;

use bsa_core::experiments::{
    max_input_power_after, run_sim3, sim2_horizons, solve_sim1, solve_sim2, Settings, Sim3Config, SIM1_HORIZON,
    SIM2_SPEED,
};
use bsa_core::hybrid::{impact_map, BsaMode};
use bsa_core::nlp::{InteriorPoint, SolverOptions};
use bsa_core::ocp::{CollocationKind, OcpModel, OcpSolution};
use bsa_core::sim::{resimulate, ModelKind, Trajectory};
use bsa_core::verify::{ad_vs_fd, cross_model_error, linear_test_system, transcribed_endpoint};
use bsa_core::PendulumParams;
use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Ledger(Vec<(String, bool)>);

impl Ledger {
    fn record(&mut self, id: usize, ok: bool, detail: String) {
        let line = format!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.0.push((line, ok));
    }
}

fn tip_speed(q: [f64; 2], qd: [f64; 2], p: &PendulumParams) -> f64 {
    let a = q[0] + q[1];
    let vx = p.l1 * q[0].cos() * qd[0] + p.l2 * a.cos() * (qd[0] + qd[1]);
    let vy = p.l1 * q[0].sin() * qd[0] + p.l2 * a.sin() * (qd[0] + qd[1]);
    vx.hypot(vy)
}

fn link_state(model: ModelKind, x: &[f64]) -> ([f64; 2], [f64; 2]) {
    match model {
        ModelKind::Vsa => ([x[4], x[5]], [x[6], x[7]]),
        _ => ([x[4], x[5]], [x[8], x[9]]),
    }
}

fn final_speed(tr: &Trajectory, p: &PendulumParams) -> f64 {
    let (q, qd) = link_state(tr.model, &tr.samples.last().unwrap().x);
    tip_speed(q, qd, p)
}

fn solution_speed(sol: &OcpSolution) -> f64 {
    let x = sol.final_state();
    let kind = if sol.model == OcpModel::Vsa {
        ModelKind::Vsa
    } else {
        ModelKind::Bsa
    };
    let (q, qd) = link_state(kind, x);
    tip_speed(q, qd, &sol.params)
}

/// Gravity from the centre-of-mass heights plus spring potentials.
fn potential(model: ModelKind, x: &[f64], p: &PendulumParams) -> f64 {
    let (q, _) = link_state(model, x);
    let h1 = p.lc1 * (1.0 - q[0].cos());
    let h2 = p.l1 * (1.0 - q[0].cos()) + p.lc2 * (1.0 - (q[0] + q[1]).cos());
    let gravity = p.g * (p.m1 * h1 + p.m2 * h2);
    let springs: f64 = match model {
        ModelKind::Vsa => (0..2).map(|j| 0.5 * x[2 + j] * (x[j] - x[4 + j]).powi(2)).sum(),
        _ => (0..2).map(|j| 0.5 * [p.k1, p.k2][j] * (x[j] - x[2 + j]).powi(2)).sum(),
    };
    gravity + springs
}

/// Motor input power per joint: `k d θ̇` plus `½ k̇ d²` for adjustable springs.
fn input_power(model: ModelKind, x: &[f64], u: &[f64], p: &PendulumParams) -> [f64; 2] {
    let mut out = [0.0; 2];
    for j in 0..2 {
        out[j] = match model {
            ModelKind::Vsa => {
                let d = x[j] - x[4 + j];
                x[2 + j] * d * u[j] + 0.5 * u[2 + j] * d * d
            }
            _ => [p.k1, p.k2][j] * (x[j] - x[2 + j]) * u[j],
        };
    }
    out
}

/// Net motor work by the trapezoidal rule, holding the input of each
/// sample constant up to the next one.
fn net_work(tr: &Trajectory, p: &PendulumParams) -> f64 {
    tr.samples
        .windows(2)
        .map(|w| {
            let a = input_power(tr.model, &w[0].x, &w[0].u, p);
            let b = input_power(tr.model, &w[1].x, &w[0].u, p);
            0.5 * (w[1].t - w[0].t) * (a[0] + a[1] + b[0] + b[1])
        })
        .sum()
}

fn peak_fraction(tr: &Trajectory, p: &PendulumParams) -> f64 {
    let ep: Vec<f64> = tr.samples.iter().map(|s| potential(tr.model, &s.x, p)).collect();
    let i = (0..ep.len()).fold(0, |b, i| if ep[i] > ep[b] { i } else { b });
    tr.samples[i].t / tr.samples.last().unwrap().t
}

/// Interior maxima whose topographic prominence reaches `frac` of the
/// overall potential range.
fn prominent_peaks(tr: &Trajectory, p: &PendulumParams, frac: f64) -> usize {
    let ep: Vec<f64> = tr.samples.iter().map(|s| potential(tr.model, &s.x, p)).collect();
    let lo = ep.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ep.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let thr = frac * (hi - lo);
    let mut count = 0;
    for i in 1..ep.len() - 1 {
        if !(ep[i] > ep[i - 1] && ep[i] >= ep[i + 1]) {
            continue;
        }
        let mut left = ep[i];
        for j in (0..i).rev() {
            if ep[j] > ep[i] {
                break;
            }
            left = left.min(ep[j]);
        }
        let mut right = ep[i];
        for &v in &ep[i + 1..] {
            if v > ep[i] {
                break;
            }
            right = right.min(v);
        }
        if ep[i] - left.max(right) >= thr {
            count += 1;
        }
    }
    count
}

fn constraint_rows(mode: BsaMode) -> Vec<[f64; 4]> {
    let (c1, c2) = mode.clutches();
    [(0, c1), (1, c2)]
        .iter()
        .map(|&(j, sea)| {
            let mut r = [0.0; 4];
            r[j] = 1.0;
            if sea {
                r[2 + j] = -1.0;
            }
            r
        })
        .collect()
}

fn criterion_6(ledger: &mut Ledger) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut res, mut gain, mut idem, mut oracle) = (0.0f64, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for k in 0..10_000 {
        let l = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let pi = l * l.transpose() + Matrix4::identity() * 0.5;
        let v = Vector4::from_fn(|_, _| rng.gen_range(-5.0..5.0));
        let mode = BsaMode::ALL[k % 4];
        let pi_arr: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| pi[(i, j)]));
        let c = mode.constraint();
        let (plus, _) = impact_map(&pi_arr, &c, &[v[0], v[1], v[2], v[3]]).unwrap();
        let (again, _) = impact_map(&pi_arr, &c, &plus).unwrap();
        let scale = v.norm().max(1.0);
        let p = Vector4::from_column_slice(&plus);
        let rows = constraint_rows(mode);
        let cm = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
        let pinv = nalgebra::DMatrix::from_fn(4, 4, |i, j| pi[(i, j)])
            .try_inverse()
            .unwrap();
        let schur = &cm * &pinv * cm.transpose();
        let vd = nalgebra::DVector::from_column_slice(v.as_slice());
        let expected = &vd - &pinv * cm.transpose() * schur.try_inverse().unwrap() * (&cm * &vd);
        res = res.max((&cm * nalgebra::DVector::from_column_slice(p.as_slice())).amax() / scale);
        gain = gain.max((0.5 * p.dot(&(pi * p)) - 0.5 * v.dot(&(pi * v))) / scale.powi(2));
        idem = idem.max((0..4).map(|i| (again[i] - plus[i]).abs()).fold(0.0, f64::max) / scale);
        oracle = oracle.max((0..4).map(|i| (expected[i] - plus[i]).abs()).fold(0.0, f64::max) / scale);
    }
    let ok = res <= 1e-10 && gain <= 1e-12 && idem <= 1e-12 && oracle <= 1e-10;
    ledger.record(
        6,
        ok,
        format!(
            "10^4 impacts: |C v+| {res:.1e} (≤ 1e-10), KE gain {gain:.1e} (≤ 0), idempotence {idem:.1e} (≤ 1e-12), \
             explicit projection {oracle:.1e}, {:.2} s",
            started.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_8_mesh() -> bool {
    // x'' + 0.4 x' + 4 x = 0, x(0) = 1, x'(0) = 0
    let wd = (4.0f64 - 0.04).sqrt();
    let t = 2.0f64;
    let decay = (-0.2 * t).exp();
    let exact = [
        decay * ((wd * t).cos() + 0.2 / wd * (wd * t).sin()),
        -decay * 4.0 / wd * (wd * t).sin(),
    ];
    let sys = linear_test_system();
    let errors: Vec<f64> = [2usize, 4, 8, 16]
        .iter()
        .map(|&n| {
            let e = transcribed_endpoint(&sys, &[1.0, 0.0], t, n, 3, CollocationKind::Legendre).unwrap();
            (e[0] - exact[0]).abs().max((e[1] - exact[1]).abs())
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&o| o >= 5.0);
    let fd = ad_vs_fd(&PendulumParams::default()).unwrap();
    let ok_fd = fd.measured <= 1e-5;
    println!(
        "  endpoint errors [{}], orders {orders:.2?}; AD vs FD {:.1e} (≤ 1e-5)",
        errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
        fd.measured
    );
    ok && ok_fd
}

fn main() {
    let mut ledger = Ledger(Vec::new());
    let settings = Settings::default();
    let solver = InteriorPoint::new(SolverOptions::default());
    let p = settings.params;
    let cfg = settings.integrator;
    let mut resim = Vec::new();

    // 1
    let started = Instant::now();
    let bsa = solve_sim1(OcpModel::Bsa, SIM1_HORIZON, &settings, &solver).unwrap();
    let bsa_time = started.elapsed().as_secs_f64();
    let bsa_tr = resimulate(&bsa, &cfg).unwrap();
    let v_bsa = solution_speed(&bsa);
    let t_p = bsa.durations[0];
    resim.push(("sim1 BSA".to_string(), v_bsa, final_speed(&bsa_tr, &p)));
    ledger.record(
        1,
        bsa.status.is_success() && v_bsa >= 2.7 && (0.12..=0.19).contains(&t_p) && bsa_time <= 300.0,
        format!(
            "{:?}, v_tcp {v_bsa:.4} m/s (≥ 2.7), T_p {t_p:.4} s (in [0.12, 0.19]), {bsa_time:.1} s",
            bsa.status
        ),
    );

    // 2
    let vsa = solve_sim1(OcpModel::Vsa, SIM1_HORIZON, &settings, &solver).unwrap();
    let vsa_tr = resimulate(&vsa, &cfg).unwrap();
    let v_vsa = solution_speed(&vsa);
    resim.push(("sim1 VSA".to_string(), v_vsa, final_speed(&vsa_tr, &p)));
    let rel = (v_vsa - v_bsa).abs() / v_bsa;
    ledger.record(
        2,
        vsa.status.is_success() && rel <= 0.15,
        format!(
            "{:?}, v_tcp {v_vsa:.4} m/s vs BSA {v_bsa:.4} m/s, deviation {:.1}% (≤ 15%)",
            vsa.status,
            100.0 * rel
        ),
    );

    // 3
    let w_bsa = net_work(&bsa_tr, &p);
    let w_vsa = net_work(&vsa_tr, &p);
    let lib_bsa = bsa_tr.work_summary().unwrap().net;
    let t_switch = bsa.switch_times()[0];
    let p1_after = bsa_tr
        .samples
        .iter()
        .filter(|s| s.t > t_switch)
        .map(|s| input_power(ModelKind::Bsa, &s.x, &s.u, &p)[0].abs())
        .fold(0.0, f64::max)
        .max(max_input_power_after(&bsa_tr, 0, t_switch));
    ledger.record(
        3,
        (8.0..=12.5).contains(&w_bsa)
            && (8.0..=12.5).contains(&w_vsa)
            && (w_bsa - lib_bsa).abs() <= 1e-3 * w_bsa.abs()
            && p1_after <= 1e-9,
        format!(
            "net work BSA {w_bsa:.3} J (library {lib_bsa:.3} J), VSA {w_vsa:.3} J (in [8, 12.5]); \
             max |P_in,1| after DEC switch at {t_switch:.4} s: {p1_after:.1e} W"
        ),
    );

    // 4
    let mut fractions = Vec::new();
    let mut sweep_ok = true;
    let mut prev: Option<OcpSolution> = None;
    for t_f in sim2_horizons() {
        let sol = solve_sim2(OcpModel::Bsa, t_f, SIM2_SPEED, &settings, &solver, prev.as_ref()).unwrap();
        let tr = resimulate(&sol, &cfg).unwrap();
        let f = peak_fraction(&tr, &p);
        sweep_ok &= sol.status.is_success() && f >= 0.75;
        resim.push((
            format!("sim2 BSA t_f {t_f:.1}"),
            solution_speed(&sol),
            final_speed(&tr, &p),
        ));
        fractions.push(format!("{t_f:.1}:{f:.3}"));
        if sol.status.is_success() {
            prev = Some(sol);
        }
    }
    let vsa2 = solve_sim2(OcpModel::Vsa, 1.0, SIM2_SPEED, &settings, &solver, None).unwrap();
    let vsa2_tr = resimulate(&vsa2, &cfg).unwrap();
    resim.push((
        "sim2 VSA t_f 1.0".to_string(),
        solution_speed(&vsa2),
        final_speed(&vsa2_tr, &p),
    ));
    let cycles = prominent_peaks(&vsa2_tr, &p, 0.25);
    ledger.record(
        4,
        sweep_ok && vsa2.status.is_success() && cycles >= 2,
        format!(
            "BSA E_pot peak fraction per t_f [{}] (≥ 0.75); VSA t_f = 1.0 {:?} with {cycles} exchange cycles (≥ 2)",
            fractions.join(" "),
            vsa2.status
        ),
    );

    // 5
    let sim3 = Sim3Config::default();
    let o = run_sim3(&bsa, &sim3, None, &cfg).unwrap();
    let v_ideal = final_speed(&o.ideal, &p);
    let v_fric = final_speed(&o.friction, &p);
    let spring2 = |tr: &Trajectory| {
        tr.samples
            .iter()
            .map(|s| 0.5 * p.k2 * (s.x[1] - s.x[3]).powi(2))
            .fold(0.0, f64::max)
    };
    let (e_ideal, e_fric) = (spring2(&o.ideal), spring2(&o.friction));
    ledger.record(
        5,
        v_fric >= 0.85 * v_ideal && e_fric < e_ideal,
        format!(
            "friction v_tcp {v_fric:.4} m/s = {:.1}% of ideal {v_ideal:.4} m/s (≥ 85%), E_p2 peak {e_fric:.3} J < ideal {e_ideal:.3} J; \
             commands at {:.4?} s",
            100.0 * v_fric / v_ideal,
            o.command_times
        ),
    );

    // 6
    criterion_6(&mut ledger);

    // 7
    let started = Instant::now();
    let err = cross_model_error(&p, 1e-9, 100, 0.5, 99, &cfg).unwrap();
    ledger.record(
        7,
        err <= 1e-4,
        format!(
            "100 starts, 0.5 s, Js = 1e-9: max state error {err:.2e} (≤ 1e-4), {:.1} s",
            started.elapsed().as_secs_f64()
        ),
    );

    // 8
    let mesh_ok = criterion_8_mesh();
    let worst = resim
        .iter()
        .map(|(_, pred, sim)| (pred - sim).abs() / pred.abs())
        .fold(0.0, f64::max);
    for (name, pred, sim) in &resim {
        println!("  resim {name}: collocation {pred:.5} m/s, simulated {sim:.5} m/s");
    }
    ledger.record(
        8,
        mesh_ok && worst <= 0.02,
        format!(
            "endpoint order ≥ 5, AD/FD ≤ 1e-5, worst re-simulation deviation {:.2e} (≤ 2%)",
            worst
        ),
    );

    let failed = ledger.0.iter().filter(|(_, ok)| !ok).count();
    println!("acceptance: {} of {} criteria passed", ledger.0.len() - failed, ledger.0.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
