//! Lateral stability of active yaw control on a constant-radius circle.
//!
//! Quasi-static single-track model. The rear axle's cornering stiffness
//! degrades with lateral load transfer and with the traction demand of the
//! longitudinal acceleration, so the steady steering angle bends away from
//! its low-acceleration line as a_y grows. The vehicle counts as stable
//! while the steering angle stays inside a fixed band around that line.
//!
//! The yaw controller tracks a yaw-rate reference from the unloaded vehicle's
//! understeer gradient. The reference ignores a_x, so a high gain pushes the
//! car onto a line that the degraded rear axle cannot follow; with enough
//! yaw-moment authority this makes the result worse than no control.

use crate::hyperspace::{DesignPoint, HyperSpace, Orientation, TargetIndicator, TargetVector, UseCasePoint, Variable};
use crate::runner::{SimFailure, Simulator};

#[derive(Clone, Debug, PartialEq)]
pub struct YawConstants {
    pub g: f64,
    /// Vehicle mass [kg].
    pub mass: f64,
    /// Wheelbase and axle distances from the centre of gravity [m].
    pub wheelbase: f64,
    pub lf: f64,
    pub lr: f64,
    /// Cornering stiffness per axle [N/rad].
    pub c_front: f64,
    pub c_rear: f64,
    /// Rear stiffness loss per unit a_x/g (traction demand).
    pub traction_loss: f64,
    /// Rear stiffness loss per unit (a_y/g)^2 (load transfer).
    pub load_transfer: f64,
    /// Friction coefficient; caps sqrt(a_x^2 + a_y^2) at mu*g.
    pub mu: f64,
    /// Half-width of the stability band around the linear steering line [rad].
    pub band: f64,
    /// Sweep step for a_y before bisection [m/s^2].
    pub sweep_step: f64,
    /// Yaw-moment authority per drive topology [N*m].
    pub m_max_2wd: f64,
    pub m_max_4wd: f64,
}

impl Default for YawConstants {
    fn default() -> Self {
        Self {
            g: 9.81,
            mass: 1500.0,
            wheelbase: 2.7,
            lf: 1.2,
            lr: 1.5,
            c_front: 80_000.0,
            c_rear: 100_000.0,
            traction_loss: 1.0,
            load_transfer: 0.6,
            mu: 1.0,
            band: 0.5_f64.to_radians(),
            sweep_step: 0.02,
            m_max_2wd: 800.0,
            m_max_4wd: 2000.0,
        }
    }
}

pub const GAIN_RANGE: (f64, f64) = (0.0, 3.0e5);
pub const RADIUS_RANGE: (f64, f64) = (40.0, 200.0);
pub const AX_RANGE: (f64, f64) = (0.5, 3.0);
pub const DRIVES: [&str; 2] = ["2WD", "4WD"];

/// Design: controller gain `K` and drive topology. Use case: circle radius
/// `r` and longitudinal acceleration `a_x`. Target: `gain_stab` (maximize).
pub fn yaw_space() -> HyperSpace {
    HyperSpace::new(
        vec![
            Variable::continuous("K", GAIN_RANGE.0, GAIN_RANGE.1).with_unit("N*m*s/rad"),
            Variable::categorical("drive", &DRIVES),
        ],
        vec![
            Variable::continuous("r", RADIUS_RANGE.0, RADIUS_RANGE.1).with_unit("m"),
            Variable::continuous("a_x", AX_RANGE.0, AX_RANGE.1).with_unit("m/s^2"),
        ],
        vec![TargetIndicator::new("gain_stab", Orientation::Maximize)],
    )
}

impl YawConstants {
    pub fn m_max(&self, drive: &str) -> Option<f64> {
        match drive {
            "2WD" => Some(self.m_max_2wd),
            "4WD" => Some(self.m_max_4wd),
            _ => None,
        }
    }

    pub fn rear_stiffness(&self, ay: f64, ax: f64) -> f64 {
        let g = self.g;
        self.c_rear
            * (1.0 - self.traction_loss * ax / g)
            * (1.0 - self.load_transfer * (ay / g).powi(2) * (1.0 + ax / g))
    }

    /// Understeer gradient [rad/(m/s^2)] for a given rear stiffness.
    pub fn understeer_gradient(&self, c_rear: f64) -> f64 {
        self.mass * (self.lr / self.c_front - self.lf / c_rear) / self.wheelbase
    }

    /// Steady steering angle with an external yaw moment `m_z`.
    pub fn steering_angle(&self, ay: f64, ax: f64, r: f64, m_z: f64) -> f64 {
        let l = self.wheelbase;
        let f_front = (self.mass * ay * self.lr - m_z) / l;
        let f_rear = (self.mass * ay * self.lf + m_z) / l;
        l / r + f_front / self.c_front - f_rear / self.rear_stiffness(ay, ax)
    }

    /// The yaw moment the controller settles on, by bisection on the
    /// fixed-point residual `M - clamp(K * e(M))`.
    pub fn yaw_moment(&self, ay: f64, ax: f64, r: f64, k: f64, m_max: f64) -> f64 {
        if k == 0.0 || m_max == 0.0 {
            return 0.0;
        }
        let v = (ay * r).sqrt();
        let k_nom = self.understeer_gradient(self.c_rear);
        let residual = |m: f64| {
            let delta = self.steering_angle(ay, ax, r, m);
            let e = v * delta / (self.wheelbase + k_nom * v * v) - v / r;
            m - (k * e).clamp(-m_max, m_max)
        };
        let (mut lo, mut hi) = (-m_max, m_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Steering angle with the controller active.
    pub fn controlled_steering(&self, ay: f64, ax: f64, r: f64, k: f64, m_max: f64) -> f64 {
        self.steering_angle(ay, ax, r, self.yaw_moment(ay, ax, r, k, m_max))
    }

    /// Tangent of the steering curve at a_y = 0.
    pub fn linear_steering(&self, ay: f64, ax: f64, r: f64) -> f64 {
        self.wheelbase / r + self.understeer_gradient(self.rear_stiffness(0.0, ax)) * ay
    }

    /// First a_y where the steering curve leaves the band, or the grip cap.
    pub fn ay_max(&self, k: f64, m_max: f64, r: f64, ax: f64) -> f64 {
        let cap = ((self.mu * self.g).powi(2) - ax * ax).max(0.0).sqrt();
        let outside = |ay: f64| {
            (self.controlled_steering(ay, ax, r, k, m_max) - self.linear_steering(ay, ax, r)).abs() > self.band
        };
        let mut a = 0.0;
        while a < cap {
            let b = (a + self.sweep_step).min(cap);
            if outside(b) {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if outside(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return hi;
            }
            a = b;
        }
        cap
    }

    /// a_y,max with control over a_y,max without, minus one.
    pub fn gain_stab(&self, k: f64, m_max: f64, r: f64, ax: f64) -> f64 {
        self.ay_max(k, m_max, r, ax) / self.ay_max(0.0, m_max, r, ax) - 1.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct YawSimulator {
    pub constants: YawConstants,
}

impl Simulator for YawSimulator {
    fn evaluate(&self, _run_id: usize, d: &DesignPoint, u: &UseCasePoint) -> Result<TargetVector, SimFailure> {
        let bad = || SimFailure::new("invalid-input");
        let k = d.0.first().and_then(|v| v.as_real()).ok_or_else(bad)?;
        let drive = d.0.get(1).and_then(|v| v.as_label()).ok_or_else(bad)?;
        let m_max = self.constants.m_max(drive).ok_or_else(bad)?;
        let r = u.0.first().and_then(|v| v.as_real()).ok_or_else(bad)?;
        let ax = u.0.get(1).and_then(|v| v.as_real()).ok_or_else(bad)?;
        if !(r > 0.0 && ax > 0.0 && k >= 0.0) {
            return Err(bad());
        }
        Ok(TargetVector(vec![self.constants.gain_stab(k, m_max, r, ax)]))
    }
}
