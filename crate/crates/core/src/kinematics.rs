//! Closed-form timing for rotations and straight drives under constant
//! acceleration and deceleration.
//!
//! A robot never turns while moving, so every motion between two stops is an
//! optional in-place rotation followed by an accelerate / cruise / decelerate
//! sweep along a straight line. Infinite rates are accepted and model the
//! instantaneous limit (constant-speed travel, free rotation).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("negative rotation angle {0}")]
    NegativeAngle(f64),
    #[error("negative drive distance {0}")]
    NegativeDistance(f64),
    #[error("time {t} outside drive window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },
    #[error("position {s} outside drive distance [0, {total}]")]
    PositionOutOfRange { s: f64, total: f64 },
    #[error("hop without segments")]
    EmptyHop,
    #[error("invalid profile: {0}")]
    InvalidProfile(&'static str),
}

/// Per-robot motion limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicProfile {
    /// m/s²
    pub accel: f64,
    /// m/s²
    pub decel: f64,
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    /// m
    pub radius: f64,
}

impl KinematicProfile {
    pub fn new(
        accel: f64,
        decel: f64,
        v_max: f64,
        omega_max: f64,
        radius: f64,
    ) -> Result<Self, KinematicsError> {
        let p = Self { accel, decel, v_max, omega_max, radius };
        p.validate()?;
        Ok(p)
    }

    /// Robot parameters used throughout the throughput experiments:
    /// 0.5 m/s² both ways, 1.5 m/s top speed, 2.5 s per full turn, 0.70 m diameter.
    pub fn warehouse_default() -> Self {
        Self { accel: 0.5, decel: 0.5, v_max: 1.5, omega_max: TAU / 2.5, radius: 0.35 }
    }

    /// a = b = v_max = 1 with a full rotation taking `full_turn` seconds.
    pub fn unit(full_turn: f64) -> Self {
        Self { accel: 1.0, decel: 1.0, v_max: 1.0, omega_max: TAU / full_turn, radius: 0.35 }
    }

    /// Travel at `speed` with instantaneous speed changes and free rotation.
    pub fn constant_speed(speed: f64) -> Self {
        Self {
            accel: f64::INFINITY,
            decel: f64::INFINITY,
            v_max: speed,
            omega_max: f64::INFINITY,
            radius: 0.35,
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let ok = |v: f64| v > 0.0 && !v.is_nan();
        if !ok(self.accel) {
            return Err(KinematicsError::InvalidProfile("accel must be positive"));
        }
        if !ok(self.decel) {
            return Err(KinematicsError::InvalidProfile("decel must be positive"));
        }
        if !ok(self.v_max) || self.v_max.is_infinite() {
            return Err(KinematicsError::InvalidProfile("v_max must be positive and finite"));
        }
        if !ok(self.omega_max) {
            return Err(KinematicsError::InvalidProfile("omega_max must be positive"));
        }
        if !ok(self.radius) || self.radius.is_infinite() {
            return Err(KinematicsError::InvalidProfile("radius must be positive and finite"));
        }
        Ok(())
    }

    pub fn rotation_time(&self, angle: f64) -> f64 {
        rotation_time(angle, self.omega_max).unwrap_or(f64::INFINITY)
    }

    pub fn drive_time(&self, distance: f64) -> f64 {
        drive_time(distance, self).unwrap_or(f64::INFINITY)
    }
}

/// Seconds needed to turn by `angle` radians at `omega_max`.
pub fn rotation_time(angle: f64, omega_max: f64) -> Result<f64, KinematicsError> {
    if angle < 0.0 || angle.is_nan() {
        return Err(KinematicsError::NegativeAngle(angle));
    }
    if angle == 0.0 {
        return Ok(0.0);
    }
    Ok(angle / omega_max)
}

/// Shortest turning angle between two headings, in `[0, π]`.
pub fn turn_angle(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// Normalizes a heading into `[0, 2π)`.
pub fn normalize_heading(h: f64) -> f64 {
    let n = h.rem_euclid(TAU);
    if n >= TAU {
        0.0
    } else {
        n
    }
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Shortest distance over which the robot reaches top speed and can still
/// brake to a halt.
pub fn min_full_accel_distance(profile: &KinematicProfile) -> f64 {
    let v2 = profile.v_max * profile.v_max;
    0.5 * v2 * (inv(profile.accel) + inv(profile.decel))
}

/// Time to drive `distance` meters from standstill to standstill.
pub fn drive_time(distance: f64, profile: &KinematicProfile) -> Result<f64, KinematicsError> {
    Ok(DriveProfile::new(distance, profile)?.total_time())
}

/// One accelerate / cruise / decelerate sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveProfile {
    distance: f64,
    peak_speed: f64,
    accel: f64,
    decel: f64,
    accel_time: f64,
    accel_dist: f64,
    cruise_time: f64,
    cruise_dist: f64,
    decel_time: f64,
    decel_dist: f64,
}

impl DriveProfile {
    pub fn new(distance: f64, profile: &KinematicProfile) -> Result<Self, KinematicsError> {
        if distance < 0.0 || distance.is_nan() {
            return Err(KinematicsError::NegativeDistance(distance));
        }
        let (ia, ib) = (inv(profile.accel), inv(profile.decel));
        let peak = if distance >= min_full_accel_distance(profile) {
            profile.v_max
        } else {
            // v² (1/a + 1/b) / 2 = d
            (2.0 * distance / (ia + ib)).sqrt()
        };
        let accel_time = peak * ia;
        let decel_time = peak * ib;
        let accel_dist = 0.5 * peak * peak * ia;
        let decel_dist = 0.5 * peak * peak * ib;
        let cruise_dist = (distance - accel_dist - decel_dist).max(0.0);
        let cruise_time = if peak > 0.0 { cruise_dist / peak } else { 0.0 };
        Ok(Self {
            distance,
            peak_speed: peak,
            accel: profile.accel,
            decel: profile.decel,
            accel_time,
            accel_dist,
            cruise_time,
            cruise_dist,
            decel_time,
            decel_dist,
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn peak_speed(&self) -> f64 {
        self.peak_speed
    }

    pub fn total_time(&self) -> f64 {
        self.accel_time + self.cruise_time + self.decel_time
    }

    /// `(duration, distance)` of the accelerate, cruise and decelerate phases.
    pub fn phases(&self) -> [(f64, f64); 3] {
        [
            (self.accel_time, self.accel_dist),
            (self.cruise_time, self.cruise_dist),
            (self.decel_time, self.decel_dist),
        ]
    }

    pub fn has_cruise(&self) -> bool {
        self.cruise_dist > 0.0
    }

    /// Arc length covered `t` seconds after departure.
    pub fn position_at(&self, t: f64) -> Result<f64, KinematicsError> {
        let total = self.total_time();
        if !(0.0..=total + 1e-12).contains(&t) {
            return Err(KinematicsError::TimeOutOfRange { t, total });
        }
        Ok(self.position_at_clamped(t))
    }

    pub(crate) fn position_at_clamped(&self, t: f64) -> f64 {
        let total = self.total_time();
        if t <= 0.0 {
            return 0.0;
        }
        if t >= total {
            return self.distance;
        }
        if t < self.accel_time {
            return 0.5 * self.accel * t * t;
        }
        let t_cruise_end = self.accel_time + self.cruise_time;
        if t <= t_cruise_end {
            return self.accel_dist + self.peak_speed * (t - self.accel_time);
        }
        let rem = total - t;
        (self.distance - 0.5 * self.decel * rem * rem).clamp(0.0, self.distance)
    }

    /// Seconds after departure at which arc length `s` is reached.
    pub fn time_at_position(&self, s: f64) -> Result<f64, KinematicsError> {
        if !(0.0..=self.distance + 1e-12).contains(&s) {
            return Err(KinematicsError::PositionOutOfRange { s, total: self.distance });
        }
        Ok(self.time_at_position_clamped(s))
    }

    pub(crate) fn time_at_position_clamped(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let total = self.total_time();
        if s >= self.distance {
            return total;
        }
        if s < self.accel_dist {
            return (2.0 * s / self.accel).sqrt();
        }
        if s <= self.accel_dist + self.cruise_dist {
            return self.accel_time + (s - self.accel_dist) / self.peak_speed;
        }
        let rem = self.distance - s;
        (total - (2.0 * rem / self.decel).sqrt()).clamp(0.0, total)
    }
}

/// Rotation followed by a single continuous drive over collinear segments.
pub fn hop_time(
    segments: &[f64],
    initial_rotation: f64,
    profile: &KinematicProfile,
) -> Result<f64, KinematicsError> {
    if segments.is_empty() {
        return Err(KinematicsError::EmptyHop);
    }
    let total: f64 = segments.iter().sum();
    Ok(rotation_time(initial_rotation, profile.omega_max)? + drive_time(total, profile)?)
}
