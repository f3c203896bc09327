//! Longitudinal model of a small full electric vehicle.
//!
//! Two drivetrain topologies share one motor model: A1 has a fixed gear g1,
//! A2 uses g1 below the shift speed and g2 at or above it. Motor torque is
//! constant up to base speed and power-limited above. The motor's mass grows
//! with its peak power, so a stronger motor accelerates faster but costs
//! energy on the cycle. Speed-dependent motor losses make low cruise ratios
//! cheaper, which is what the second gear buys.
//!
//! Targets: t_a50, the time from standstill to 50 km/h at full torque, and
//! E_c, the electrical energy per 100 km on the bundled urban cycle.

use std::sync::OnceLock;

use crate::hyperspace::{
    DesignPoint, HyperSpace, Orientation, TargetIndicator, TargetVector, UseCasePoint, Value, Variable,
};
use crate::runner::{SimFailure, Simulator};

/// Synthetic urban cycle, `time_s,velocity_mps`, 1 s resolution.
pub const URBAN_CYCLE_CSV: &str = include_str!("../../data/urban_cycle.csv");

pub const TARGET_SPEED: f64 = 50.0 / 3.6;
pub const STEP: f64 = 0.01;
/// Give up on the acceleration run after this long [s].
pub const MAX_ACCEL_TIME: f64 = 120.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FevConstants {
    pub g: f64,
    /// Vehicle mass without motor [kg].
    pub base_mass: f64,
    /// Motor mass = motor_mass_offset + peak power [kW] / motor_power_density.
    pub motor_mass_offset: f64,
    pub motor_power_density: f64,
    pub gearbox_mass: f64,
    pub cd_a: f64,
    pub air_density: f64,
    pub rolling_resistance: f64,
    pub wheel_radius: f64,
    /// Battery-to-wheel efficiency.
    pub efficiency: f64,
    /// Motor speed loss coefficient [W/(rad/s)^2].
    pub speed_loss: f64,
}

impl Default for FevConstants {
    fn default() -> Self {
        Self {
            g: 9.81,
            base_mass: 1150.0,
            motor_mass_offset: 20.0,
            motor_power_density: 1.6,
            gearbox_mass: 25.0,
            cd_a: 0.66,
            air_density: 1.2,
            rolling_resistance: 0.01,
            wheel_radius: 0.3,
            efficiency: 0.85,
            speed_loss: 2.3e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    /// Fixed gear.
    A1,
    /// Two gears with a speed-triggered shift.
    A2 { g2: f64, shift_speed: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drivetrain {
    /// Maximum motor torque [N*m].
    pub t_max: f64,
    /// Motor base speed [rad/s].
    pub base_speed: f64,
    pub g1: f64,
    pub topology: Topology,
}

impl Drivetrain {
    /// Documented baseline used for the frozen reference values.
    pub const BASELINE: Drivetrain = Drivetrain { t_max: 250.0, base_speed: 400.0, g1: 9.0, topology: Topology::A1 };

    pub fn ratio(&self, v: f64) -> f64 {
        match self.topology {
            Topology::A1 => self.g1,
            Topology::A2 { g2, shift_speed } => {
                if v < shift_speed {
                    self.g1
                } else {
                    g2
                }
            }
        }
    }

    pub fn peak_power(&self) -> f64 {
        self.t_max * self.base_speed
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.t_max > 0.0 && self.base_speed > 0.0 && self.g1 > 0.0) {
            return Err("t_max, base_speed and g1 must be positive".into());
        }
        if let Topology::A2 { g2, shift_speed } = self.topology {
            if !(g2 > 0.0 && g2 <= self.g1 && shift_speed >= 0.0) {
                return Err("A2 requires 0 < g2 <= g1 and a non-negative shift speed".into());
            }
        }
        Ok(())
    }
}

/// One sample of a driving cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CyclePoint {
    pub time: f64,
    pub velocity: f64,
}

/// Parses `time_s,velocity_mps` rows. Times must increase strictly and
/// velocities must be non-negative.
pub fn parse_cycle(text: &str) -> Result<Vec<CyclePoint>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "velocity_mps"] {
        return Err("cycle header must be `time_s,velocity_mps`".into());
    }
    let mut out: Vec<CyclePoint> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |j: usize| -> Result<f64, String> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("cycle row {}: bad number", i + 1))
        };
        let p = CyclePoint { time: num(0)?, velocity: num(1)? };
        if p.velocity < 0.0 {
            return Err(format!("cycle row {}: negative velocity", i + 1));
        }
        if out.last().is_some_and(|q| p.time <= q.time) {
            return Err(format!("cycle row {}: time must increase", i + 1));
        }
        out.push(p);
    }
    if out.len() < 2 {
        return Err("cycle needs at least two rows".into());
    }
    Ok(out)
}

pub fn urban_cycle() -> &'static [CyclePoint] {
    static CYCLE: OnceLock<Vec<CyclePoint>> = OnceLock::new();
    CYCLE.get_or_init(|| parse_cycle(URBAN_CYCLE_CSV).expect("bundled cycle is valid"))
}

fn rk4(f: impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

impl FevConstants {
    pub fn mass(&self, d: &Drivetrain) -> f64 {
        self.base_mass + self.motor_mass_offset + d.peak_power() / 1000.0 / self.motor_power_density + self.gearbox_mass
    }

    pub fn resistance(&self, mass: f64, v: f64) -> f64 {
        self.rolling_resistance * mass * self.g + 0.5 * self.air_density * self.cd_a * v * v
    }

    pub fn motor_speed(&self, d: &Drivetrain, v: f64) -> f64 {
        v / self.wheel_radius * d.ratio(v)
    }

    pub fn motor_torque(&self, d: &Drivetrain, omega: f64) -> f64 {
        if omega <= d.base_speed {
            d.t_max
        } else {
            d.t_max * d.base_speed / omega
        }
    }

    /// Wheel force at full torque.
    pub fn full_load_force(&self, d: &Drivetrain, v: f64) -> f64 {
        self.motor_torque(d, self.motor_speed(d, v)) * d.ratio(v) / self.wheel_radius
    }

    /// Time from standstill to 50 km/h at full torque.
    pub fn accel_time(&self, d: &Drivetrain) -> Result<f64, SimFailure> {
        let m = self.mass(d);
        let accel = |_t: f64, v: f64| (self.full_load_force(d, v) - self.resistance(m, v)) / m;
        let (mut t, mut v) = (0.0, 0.0);
        while t < MAX_ACCEL_TIME {
            if accel(t, v) <= 0.0 {
                return Err(SimFailure::new("unreachable-target-speed"));
            }
            let next = rk4(accel, t, v, STEP);
            if next >= TARGET_SPEED {
                return Ok(t + STEP * (TARGET_SPEED - v) / (next - v));
            }
            t += STEP;
            v = next;
        }
        Err(SimFailure::new("unreachable-target-speed"))
    }

    /// Electrical power drawn at speed `v` and acceleration `a`. Braking
    /// recovers nothing; the motor's speed loss is paid whenever it turns.
    pub fn electrical_power(&self, d: &Drivetrain, mass: f64, v: f64, a: f64) -> f64 {
        let wheel = (mass * a + self.resistance(mass, v)) * v;
        let omega = self.motor_speed(d, v);
        wheel.max(0.0) / self.efficiency + self.speed_loss * omega * omega
    }

    /// Energy per 100 km [kWh/100km] over `cycle`, linear between samples.
    pub fn cycle_energy(&self, d: &Drivetrain, cycle: &[CyclePoint]) -> f64 {
        let m = self.mass(d);
        let (mut energy, mut distance) = (0.0, 0.0);
        for w in cycle.windows(2) {
            let (p, q) = (w[0], w[1]);
            let span = q.time - p.time;
            let a = (q.velocity - p.velocity) / span;
            let speed = |t: f64| p.velocity + a * (t - p.time);
            let steps = (span / STEP).round().max(1.0) as usize;
            let h = span / steps as f64;
            for i in 0..steps {
                let t = p.time + i as f64 * h;
                energy = rk4(|s, _| self.electrical_power(d, m, speed(s), a), t, energy, h);
            }
            distance += 0.5 * (p.velocity + q.velocity) * span;
        }
        if distance <= 0.0 {
            return 0.0;
        }
        energy / 3.6e6 / (distance / 1.0e5)
    }

    /// `(t_a50 [s], E_c [kWh/100km])`.
    pub fn simulate(&self, d: &Drivetrain, cycle: &[CyclePoint]) -> Result<(f64, f64), SimFailure> {
        d.check().map_err(SimFailure::new)?;
        Ok((self.accel_time(d)?, self.cycle_energy(d, cycle)))
    }
}

pub const T_MAX_RANGE: (f64, f64) = (150.0, 350.0);
pub const BASE_SPEED_RANGE: (f64, f64) = (250.0, 600.0);
pub const G1_RANGE: (f64, f64) = (6.0, 12.0);
pub const G2_RANGE: (f64, f64) = (3.0, 5.5);
pub const SHIFT_SPEED_RANGE: (f64, f64) = (6.0, 16.0);

/// Design: `T_max`, `base_speed`, `g1`, `topology` and, under A2 only, `g2`
/// and `shift_speed`. No use-case variables; every run drives the bundled
/// cycle. Targets `t_a50` and `E_c`, both minimized.
pub fn fev_space() -> HyperSpace {
    HyperSpace::new(
        vec![
            Variable::continuous("T_max", T_MAX_RANGE.0, T_MAX_RANGE.1).with_unit("N*m"),
            Variable::continuous("base_speed", BASE_SPEED_RANGE.0, BASE_SPEED_RANGE.1).with_unit("rad/s"),
            Variable::continuous("g1", G1_RANGE.0, G1_RANGE.1),
            Variable::categorical("topology", &["A1", "A2"]),
            Variable::continuous("g2", G2_RANGE.0, G2_RANGE.1).active_when("topology", "A2"),
            Variable::continuous("shift_speed", SHIFT_SPEED_RANGE.0, SHIFT_SPEED_RANGE.1)
                .with_unit("m/s")
                .active_when("topology", "A2"),
        ],
        vec![],
        vec![
            TargetIndicator::new("t_a50", Orientation::Minimize).with_unit("s"),
            TargetIndicator::new("E_c", Orientation::Minimize).with_unit("kWh/100km"),
        ],
    )
}

/// Reads a [`fev_space`] design point.
pub fn drivetrain_of(d: &DesignPoint) -> Option<Drivetrain> {
    let real = |i: usize| d.0.get(i).and_then(Value::as_real);
    let topology = match d.0.get(3)?.as_label()? {
        "A1" => Topology::A1,
        "A2" => Topology::A2 { g2: real(4)?, shift_speed: real(5)? },
        _ => return None,
    };
    Some(Drivetrain { t_max: real(0)?, base_speed: real(1)?, g1: real(2)?, topology })
}

#[derive(Clone, Debug, Default)]
pub struct FevSimulator {
    pub constants: FevConstants,
}

impl Simulator for FevSimulator {
    fn evaluate(&self, _run_id: usize, d: &DesignPoint, _u: &UseCasePoint) -> Result<TargetVector, SimFailure> {
        let drive = drivetrain_of(d).ok_or_else(|| SimFailure::new("invalid-input"))?;
        let (t, e) = self.constants.simulate(&drive, urban_cycle())?;
        Ok(TargetVector(vec![t, e]))
    }
}
