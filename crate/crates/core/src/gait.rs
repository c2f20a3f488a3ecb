//! Gait phase oscillator, contact schedule and compliant contact tracking.
//!
//! Phases live in `[0, 1)`. A foot is in stance while its phase is below
//! `stance_fraction` and in swing otherwise, so each cycle has two contact
//! transitions: touchdown at `phi = 0` and liftoff at `phi = stance_fraction`.
//!
//! Compliant tracking forgives a contact mismatch when the foot is close to
//! one of those transitions. The forgiven band has half-width `delta / 4`
//! around each transition, so the total forgiven fraction of the cycle is
//! exactly `delta` as long as the bands do not overlap. Outside the band a
//! mismatch costs its distance past the band edge. Per-foot costs are summed
//! and squashed by `exp(-error / sigma)`.
//!
//! The tracking-error functional is a reconstruction: only the forgiven
//! fraction (`delta`) and the kernel are fixed by the reference design.

use std::f64::consts::TAU;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{cyclic_distance, DescriptorError, MotionDescriptor, FOOT_NAMES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaitError {
    #[error("gait period must be > 0, got {0}")]
    NonPositivePeriod(f64),
    #[error("smoothing factor sigma must be > 0, got {0}")]
    NonPositiveSigma(f64),
    #[error("time step must be > 0 and not exceed the duration (dt = {dt}, duration = {duration})")]
    BadSampling { dt: f64, duration: f64 },
    #[error("mismatch mask has {got} rows, rollout has {expected} samples")]
    MaskLength { got: usize, expected: usize },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

/// Compliance threshold, kernel width and duty cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceConfig {
    /// Fraction of the cycle in which contact mismatches are not penalized.
    pub delta: f64,
    /// Exponential kernel smoothing factor.
    pub sigma: f64,
    /// Fraction of the cycle spent in stance.
    pub stance_fraction: f64,
}

impl Default for ComplianceConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            sigma: 0.25,
            stance_fraction: 0.5,
        }
    }
}

impl ComplianceConfig {
    /// Strict tracking (`delta = 0`) with the default kernel and duty cycle.
    pub fn strict() -> Self {
        Self {
            delta: 0.0,
            ..Self::default()
        }
    }
}

/// Snapshot of the four-foot schedule at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitState {
    pub t: f64,
    pub phases: [f64; 4],
    pub desired_contacts: [bool; 4],
    pub actual_contacts: [bool; 4],
    pub phi_error: f64,
    pub reward: f64,
}

/// `frac(t / period + offset)`, always in `[0, 1)`.
pub fn phase(t: f64, period: f64, offset: f64) -> Result<f64, GaitError> {
    if !(period > 0.0) {
        return Err(GaitError::NonPositivePeriod(period));
    }
    Ok(wrap_unit(t / period + offset))
}

fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Map a `[0, 1)` phase onto the centered `[-0.5, 0.5)` convention.
pub fn centered_phase(phi: f64) -> f64 {
    phi - 0.5
}

/// `(sin 2πφ, cos 2πφ)` per foot, concatenated in FL, FR, RL, RR order.
pub fn encode(phases: &[f64; 4]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (i, &p) in phases.iter().enumerate() {
        let (s, c) = (TAU * p).sin_cos();
        out[2 * i] = s;
        out[2 * i + 1] = c;
    }
    out
}

/// Stance while `phi < stance_fraction`.
pub fn desired_contact(phi: f64, stance_fraction: f64) -> bool {
    phi < stance_fraction
}

/// Cyclic distance from `phi` to the nearer contact transition.
pub fn boundary_distance(phi: f64, stance_fraction: f64) -> f64 {
    cyclic_distance(phi, 0.0).min(cyclic_distance(phi, stance_fraction))
}

/// Cost of a single foot given its phase and measured contact.
pub fn foot_error(phi: f64, actual: bool, cfg: &ComplianceConfig) -> f64 {
    if actual == desired_contact(phi, cfg.stance_fraction) {
        return 0.0;
    }
    (boundary_distance(phi, cfg.stance_fraction) - cfg.delta / 4.0).max(0.0)
}

/// Summed per-foot contact tracking error.
pub fn tracking_error(phases: &[f64; 4], actual: &[bool; 4], cfg: &ComplianceConfig) -> f64 {
    phases
        .iter()
        .zip(actual)
        .map(|(&p, &a)| foot_error(p, a, cfg))
        .sum()
}

/// `exp(-phi_error / sigma)`.
pub fn contact_reward(phi_error: f64, sigma: f64) -> Result<f64, GaitError> {
    if !(sigma > 0.0) {
        return Err(GaitError::NonPositiveSigma(sigma));
    }
    Ok((-phi_error / sigma).exp())
}

/// Evaluate the schedule for `d` at a single instant.
pub fn state_at(
    d: &MotionDescriptor,
    t: f64,
    actual: Option<[bool; 4]>,
    cfg: &ComplianceConfig,
) -> Result<GaitState, GaitError> {
    let mut phases = [0.0; 4];
    for (p, &o) in phases.iter_mut().zip(&d.offsets) {
        *p = phase(t, d.period_s, o)?;
    }
    let desired_contacts = phases.map(|p| desired_contact(p, cfg.stance_fraction));
    let actual_contacts = actual.unwrap_or(desired_contacts);
    let phi_error = tracking_error(&phases, &actual_contacts, cfg);
    let reward = contact_reward(phi_error, cfg.sigma)?;
    Ok(GaitState {
        t,
        phases,
        desired_contacts,
        actual_contacts,
        phi_error,
        reward,
    })
}

/// Sample the schedule at `t = 0, dt, 2dt, ...` up to `duration`.
///
/// Actual contacts equal desired ones unless `mismatch` is given, in which
/// case every `true` entry flips the corresponding foot at that sample.
pub fn rollout_schedule(
    d: &MotionDescriptor,
    duration: f64,
    dt: f64,
    cfg: &ComplianceConfig,
    mismatch: Option<&[[bool; 4]]>,
) -> Result<Vec<GaitState>, GaitError> {
    d.validate()
        .map_err(|v| GaitError::Descriptor(DescriptorError::Invalid(v)))?;
    if !(dt > 0.0) || !(duration >= dt) {
        return Err(GaitError::BadSampling { dt, duration });
    }
    let n = (duration / dt + 1e-9).floor() as usize + 1;
    if let Some(mask) = mismatch {
        if mask.len() != n {
            return Err(GaitError::MaskLength {
                got: mask.len(),
                expected: n,
            });
        }
    }
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let actual = mismatch.map(|mask| {
                let mut a = [false; 4];
                for foot in 0..4 {
                    let p = phase(t, d.period_s, d.offsets[foot]).unwrap_or(0.0);
                    a[foot] = desired_contact(p, cfg.stance_fraction) ^ mask[i][foot];
                }
                a
            });
            state_at(d, t, actual, cfg)
        })
        .collect()
}

/// Write a rollout as CSV:
/// `t, phase_FL..RR, des_FL..RR, act_FL..RR, phi_error, reward`.
pub fn write_rollout_csv<W: Write>(states: &[GaitState], mut w: W) -> io::Result<()> {
    let mut header = vec!["t".to_string()];
    for prefix in ["phase", "des", "act"] {
        header.extend(FOOT_NAMES.iter().map(|f| format!("{prefix}_{f}")));
    }
    header.push("phi_error".into());
    header.push("reward".into());
    writeln!(w, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![s.t.to_string()];
        row.extend(s.phases.iter().map(|p| p.to_string()));
        row.extend(s.desired_contacts.iter().map(|&b| (b as u8).to_string()));
        row.extend(s.actual_contacts.iter().map(|&b| (b as u8).to_string()));
        row.push(s.phi_error.to_string());
        row.push(s.reward.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
