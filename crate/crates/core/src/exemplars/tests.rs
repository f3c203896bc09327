use super::fev::*;
use super::yaw::*;
use super::*;
use crate::hyperspace::{DesignPoint, UseCasePoint, Value};

// ---- yaw ----

/// Independent route to the controlled steering angle: the controller
/// equation is linear in M, so the unsaturated fixed point has a closed form;
/// outside the authority limit the moment sits on the limit.
fn closed_form_steering(c: &YawConstants, ay: f64, ax: f64, r: f64, k: f64, m_max: f64) -> f64 {
    let l = c.wheelbase;
    let cr =
        c.c_rear * (1.0 - c.traction_loss * ax / c.g) * (1.0 - c.load_transfer * (ay / c.g).powi(2) * (1.0 + ax / c.g));
    let delta0 = l / r + c.mass * ay * c.lr / (l * c.c_front) - c.mass * ay * c.lf / (l * cr);
    let slope = 1.0 / (l * c.c_front) + 1.0 / (l * cr);
    let v = (ay * r).sqrt();
    let k_nom = c.mass * (c.lr / c.c_front - c.lf / c.c_rear) / l;
    let w = v / (l + k_nom * v * v);
    let m = (k * (w * delta0 - v / r) / (1.0 + k * w * slope)).clamp(-m_max, m_max);
    delta0 - slope * m
}

#[test]
fn steering_matches_closed_form_steady_state() {
    let c = YawConstants::default();
    let cases = [
        (1.0, 1.0, 100.0, 5.0e4, 2000.0),
        (4.0, 1.0, 100.0, 5.0e4, 800.0),
        (6.5, 3.0, 60.0, 3.0e5, 2000.0),
        (8.0, 0.5, 150.0, 2.0e4, 2000.0),
        (3.0, 2.0, 40.0, 0.0, 2000.0),
    ];
    for (ay, ax, r, k, m_max) in cases {
        let got = c.controlled_steering(ay, ax, r, k, m_max);
        let want = closed_form_steering(&c, ay, ax, r, k, m_max);
        assert!((got - want).abs() < 1e-12, "ay={ay}: {got} vs {want}");
    }
}

#[test]
fn no_control_means_no_gain() {
    let c = YawConstants::default();
    for (r, ax) in [(40.0, 0.5), (100.0, 1.0), (200.0, 3.0)] {
        assert_eq!(c.gain_stab(0.0, 2000.0, r, ax), 0.0);
        for k in [1.0e3, 5.0e4, 3.0e5] {
            assert_eq!(c.gain_stab(k, 0.0, r, ax), 0.0);
        }
    }
}

/// Baseline r = 100 m, a_x = 1 m/s^2, K = 5e4; frozen after the steering
/// curve agreed with the closed form above.
const BASELINE_GAIN_4WD: f64 = 0.40388017966975465;
const BASELINE_GAIN_2WD: f64 = 0.20354605491428357;
/// Adversarial K = 3e5 at r = 100 m, a_x = 3 m/s^2.
const ADVERSARIAL_GAIN_4WD: f64 = -0.2834242431544064;
const ADVERSARIAL_GAIN_2WD: f64 = 0.23080305166114257;

fn yaw_gain(k: f64, drive: &str, r: f64, ax: f64) -> f64 {
    let d = DesignPoint(vec![Value::Real(k), drive.into()]);
    let u = UseCasePoint(vec![Value::Real(r), Value::Real(ax)]);
    YawSimulator::default().evaluate(0, &d, &u).unwrap().0[0]
}

#[test]
fn tuned_four_wheel_drive_beats_two_wheel_drive() {
    let g4 = yaw_gain(5.0e4, "4WD", 100.0, 1.0);
    let g2 = yaw_gain(5.0e4, "2WD", 100.0, 1.0);
    assert!(g4 > g2 && g2 > 0.0);
    assert!((g4 - BASELINE_GAIN_4WD).abs() < 1e-9);
    assert!((g2 - BASELINE_GAIN_2WD).abs() < 1e-9);
}

#[test]
fn aggressive_gain_hurts_four_wheel_drive_more() {
    let g4 = yaw_gain(3.0e5, "4WD", 100.0, 3.0);
    let g2 = yaw_gain(3.0e5, "2WD", 100.0, 3.0);
    assert!(g4 < 0.0 && g2.abs() < g4.abs());
    assert!((g4 - ADVERSARIAL_GAIN_4WD).abs() < 1e-9);
    assert!((g2 - ADVERSARIAL_GAIN_2WD).abs() < 1e-9);
}

#[test]
fn gain_bounded_below_and_fast() {
    let space = yaw_space();
    let plan = crate::dove::plan_lhs(&space, 40, 9).unwrap();
    let sim = YawSimulator::default();
    for run in &plan.runs {
        let start = std::time::Instant::now();
        let g = sim.evaluate(run.run_id, &run.design, &run.use_case).unwrap().0[0];
        assert!(start.elapsed().as_millis() < 50);
        assert!(g.is_finite() && g >= -1.0);
    }
    let bad = UseCasePoint(vec![Value::Real(100.0), Value::Real(0.0)]);
    let d = DesignPoint(vec![Value::Real(1.0), "4WD".into()]);
    assert!(sim.evaluate(0, &d, &bad).is_err());
}

// ---- fev ----

/// Independent forward-Euler integration at 1 ms of both targets.
fn euler_oracle(c: &FevConstants, d: &Drivetrain, cycle: &[CyclePoint]) -> (f64, f64) {
    let h = 0.001;
    let m =
        c.base_mass + c.motor_mass_offset + d.t_max * d.base_speed / 1000.0 / c.motor_power_density + c.gearbox_mass;
    let ratio = |v: f64| match d.topology {
        Topology::A1 => d.g1,
        Topology::A2 { g2, shift_speed } => {
            if v < shift_speed {
                d.g1
            } else {
                g2
            }
        }
    };
    let resist = |v: f64| c.rolling_resistance * m * c.g + 0.5 * c.air_density * c.cd_a * v * v;
    let (mut t, mut v) = (0.0, 0.0);
    while v < 50.0 / 3.6 {
        let w = v / c.wheel_radius * ratio(v);
        let torque = if w <= d.base_speed { d.t_max } else { d.t_max * d.base_speed / w };
        v += h * (torque * ratio(v) / c.wheel_radius - resist(v)) / m;
        t += h;
    }
    let (mut e, mut dist) = (0.0, 0.0);
    for win in cycle.windows(2) {
        let a = (win[1].velocity - win[0].velocity) / (win[1].time - win[0].time);
        let n = ((win[1].time - win[0].time) / h).round() as usize;
        for i in 0..n {
            let v = win[0].velocity + a * (i as f64 + 0.5) * h;
            let w = v / c.wheel_radius * ratio(v);
            e += h * (((m * a + resist(v)) * v).max(0.0) / c.efficiency + c.speed_loss * w * w);
            dist += h * v;
        }
    }
    (t, e / 3.6e6 / (dist / 1.0e5))
}

/// `Drivetrain::BASELINE` on the bundled cycle, frozen after agreement with
/// the Euler oracle.
const BASELINE_T_A50: f64 = 2.377923161604044;
const BASELINE_E_C: f64 = 13.037811405334756;

#[test]
fn baseline_agrees_with_fine_euler_integration() {
    let c = FevConstants::default();
    let (t, e) = c.simulate(&Drivetrain::BASELINE, urban_cycle()).unwrap();
    let (to, eo) = euler_oracle(&c, &Drivetrain::BASELINE, urban_cycle());
    assert!((t - to).abs() <= 0.005 * to);
    assert!((e - eo).abs() <= 0.005 * eo);
    assert!((t - BASELINE_T_A50).abs() < 1e-9 * t);
    assert!((e - BASELINE_E_C).abs() < 1e-9 * e);

    let a2 =
        Drivetrain { t_max: 200.0, base_speed: 300.0, g1: 11.0, topology: Topology::A2 { g2: 4.0, shift_speed: 8.0 } };
    let (t, e) = c.simulate(&a2, urban_cycle()).unwrap();
    let (to, eo) = euler_oracle(&c, &a2, urban_cycle());
    assert!((t - to).abs() <= 0.005 * to && (e - eo).abs() <= 0.005 * eo);
}

#[test]
fn more_torque_accelerates_faster() {
    let c = FevConstants::default();
    for t_max in [100.0, 150.0, 175.0] {
        let d = Drivetrain { t_max, ..Drivetrain::BASELINE };
        let d2 = Drivetrain { t_max: 2.0 * t_max, ..d };
        assert!(c.accel_time(&d2).unwrap() < c.accel_time(&d).unwrap());
    }
}

#[test]
fn two_shift_with_equal_ratios_is_fixed_gear() {
    let c = FevConstants::default();
    for shift_speed in [0.0, 6.0, 12.5, 30.0] {
        let a2 = Drivetrain { topology: Topology::A2 { g2: 9.0, shift_speed }, ..Drivetrain::BASELINE };
        let (t1, e1) = c.simulate(&Drivetrain::BASELINE, urban_cycle()).unwrap();
        let (t2, e2) = c.simulate(&a2, urban_cycle()).unwrap();
        assert!((t1 - t2).abs() <= 1e-9 && (e1 - e2).abs() <= 1e-9);
    }
}

#[test]
fn weak_motor_cannot_reach_target_speed() {
    let c = FevConstants::default();
    let d = Drivetrain { t_max: 3.0, ..Drivetrain::BASELINE };
    assert_eq!(c.accel_time(&d).unwrap_err().0, "unreachable-target-speed");
}

#[test]
fn energy_positive_and_grows_with_mass() {
    let c = FevConstants::default();
    let heavy = FevConstants { base_mass: c.base_mass + 200.0, ..c.clone() };
    let e = c.cycle_energy(&Drivetrain::BASELINE, urban_cycle());
    let eh = heavy.cycle_energy(&Drivetrain::BASELINE, urban_cycle());
    assert!(e > 0.0 && eh >= e);
}

#[test]
fn cycle_parsing() {
    let cyc = urban_cycle();
    assert!(cyc.len() > 100 && cyc.last().unwrap().time >= 180.0);
    assert!(cyc.iter().all(|p| p.velocity >= 0.0));
    assert!(parse_cycle("time_s,velocity_mps\n0,0\n1,-1\n").is_err());
    assert!(parse_cycle("time_s,velocity_mps\n0,0\n0,1\n").is_err());
    assert!(parse_cycle("t,v\n0,0\n1,1\n").is_err());
    assert!(parse_cycle("time_s,velocity_mps\n0,0\n").is_err());
}

#[test]
fn fev_runs_are_fast_and_valid() {
    let space = fev_space();
    assert!(space.check().is_ok());
    let plan = crate::dove::plan_lhs(&space, 30, 2).unwrap();
    let sim = FevSimulator::default();
    for run in &plan.runs {
        let start = std::time::Instant::now();
        let t = sim.evaluate(run.run_id, &run.design, &run.use_case).unwrap();
        assert!(start.elapsed().as_millis() < 50);
        assert!(t.0[0] > 0.0 && t.0[1] > 0.0);
    }
}
