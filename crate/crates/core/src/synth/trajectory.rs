use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

/// Closed horizontal circuit with a vertical wave and attitude wobble,
/// starting and ending at rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    pub z_amplitude: f64,
    pub z_cycles: f64,
    /// Rest time at each end, s.
    pub still_time: f64,
    /// Wobble amplitudes (rad) on top of the heading-following yaw.
    pub yaw_amplitude: f64,
    pub roll_amplitude: f64,
    pub pitch_amplitude: f64,
    /// Wobble cycles per lap; scales all wobble rates.
    pub attitude_cycles: f64,
}

impl Default for LoopSpec {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 100.0 / (2.0 * PI),
            height: 1.5,
            z_amplitude: 0.3,
            z_cycles: 3.0,
            still_time: 1.0,
            yaw_amplitude: 0.3,
            roll_amplitude: 0.05,
            pitch_amplitude: 0.05,
            attitude_cycles: 8.0,
        }
    }
}

/// Fixed position with constant body rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinSpec {
    pub position: [f64; 3],
    /// Body rate, deg/s.
    pub rate_deg: [f64; 3],
}

impl Default for SpinSpec {
    fn default() -> Self {
        Self { position: [0.0, 0.0, 1.5], rate_deg: [0.0, 0.0, 0.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Loop(LoopSpec),
    Spin(SpinSpec),
}

// Unknown keys are rejected by the flattened variant structs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    /// s
    pub duration: f64,
    #[serde(flatten)]
    pub kind: TrajectoryKind,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self { duration: 60.0, kind: TrajectoryKind::Loop(LoopSpec::default()) }
    }
}

/// True IMU-frame kinematics at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruePose {
    pub rot: Rotation3<f64>,
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

/// `10u³ − 15u⁴ + 6u⁵` and its first derivative.
fn smoothstep(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let u2 = u * u;
    (u2 * u * (10.0 - 15.0 * u + 6.0 * u2), 30.0 * u2 * (1.0 - u) * (1.0 - u))
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err("trajectory duration must be positive".into());
        }
        if let TrajectoryKind::Loop(l) = &self.kind {
            if !(l.radius > 0.0) {
                return Err("loop radius must be positive".into());
            }
            if !(l.still_time >= 0.0 && 2.0 * l.still_time < self.duration) {
                return Err("loop still_time must leave time to move".into());
            }
        }
        Ok(())
    }

    /// Lap phase in [0, 2π] and its rate.
    fn phase(&self, l: &LoopSpec, t: f64) -> (f64, f64) {
        let moving = self.duration - 2.0 * l.still_time;
        let (s, ds) = smoothstep((t - l.still_time) / moving);
        let inside = t > l.still_time && t < self.duration - l.still_time;
        (2.0 * PI * s, if inside { 2.0 * PI * ds / moving } else { 0.0 })
    }

    pub fn pose(&self, t: f64) -> TruePose {
        match &self.kind {
            TrajectoryKind::Loop(l) => {
                let (phi, dphi) = self.phase(l, t);
                let (s, c) = phi.sin_cos();
                let pos = Vector3::new(
                    l.center[0] + l.radius * c,
                    l.center[1] + l.radius * s,
                    l.height + l.z_amplitude * (l.z_cycles * phi).sin(),
                );
                let vel = Vector3::new(
                    -l.radius * s,
                    l.radius * c,
                    l.z_amplitude * l.z_cycles * (l.z_cycles * phi).cos(),
                ) * dphi;
                let w = l.attitude_cycles * phi;
                let yaw = phi + FRAC_PI_2 + l.yaw_amplitude * w.sin();
                let roll = l.roll_amplitude * w.sin();
                let pitch = l.pitch_amplitude * (1.0 - w.cos());
                TruePose { rot: Rotation3::from_euler_angles(roll, pitch, yaw), pos, vel }
            }
            TrajectoryKind::Spin(sp) => {
                let rate = Vector3::from(sp.rate_deg).map(f64::to_radians);
                TruePose { rot: Rotation3::new(rate * t), pos: Vector3::from(sp.position), vel: Vector3::zeros() }
            }
        }
    }

    /// Path length by fine sampling, m.
    pub fn length(&self) -> f64 {
        let n = 100_000;
        let mut prev = self.pose(0.0).pos;
        let mut total = 0.0;
        for i in 1..=n {
            let p = self.pose(self.duration * i as f64 / n as f64).pos;
            total += (p - prev).norm();
            prev = p;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_closes_at_rest() {
        let spec = TrajectorySpec::default();
        let a = spec.pose(0.0);
        let b = spec.pose(spec.duration);
        assert!((a.pos - b.pos).norm() < 1e-9);
        assert_eq!(a.vel.norm(), 0.0);
        assert!(b.vel.norm() < 1e-12);
        let len = spec.length();
        assert!((len - 100.0).abs() < 1.0, "length {len}");
    }

    #[test]
    fn velocity_is_position_derivative() {
        let spec = TrajectorySpec::default();
        let h = 1e-5;
        for t in [0.5, 3.0, 17.2, 30.0, 45.5, 58.7] {
            let fd = (spec.pose(t + h).pos - spec.pose(t - h).pos) / (2.0 * h);
            assert!((fd - spec.pose(t).vel).norm() < 1e-6, "t={t}");
        }
    }
}
