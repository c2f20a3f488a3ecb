//! Motion descriptors, the canonical gait table and gait classification.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Foot order used everywhere: front-left, front-right, rear-left, rear-right.
pub const FOOT_NAMES: [&str; 4] = ["FL", "FR", "RL", "RR"];

/// Default matching tolerance for [`classify_gait`], in cycle fractions.
pub const DEFAULT_GAIT_TOL: f64 = 0.05;

/// The executable skill unit handed to the locomotion controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionDescriptor {
    /// Per-foot phase offsets as cycle fractions, FL/FR/RL/RR.
    pub offsets: [f64; 4],
    /// Gait cycle period in seconds.
    pub period_s: f64,
    /// Velocity limit in m/s.
    pub vel_limit: f64,
}

/// Descriptor reduced to a two-legged embodiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipedDescriptor {
    /// Left and right leg offsets.
    pub offsets: [f64; 2],
    pub period_s: f64,
    pub vel_limit: f64,
}

/// Engine-level sanity bounds on period and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorBounds {
    pub max_period_s: f64,
    pub max_vel_limit: f64,
}

impl Default for DescriptorBounds {
    fn default() -> Self {
        Self {
            max_period_s: 2.0,
            max_vel_limit: 5.0,
        }
    }
}

/// One broken descriptor invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OffsetOutOfRange { foot: usize, value: f64 },
    PeriodNotPositive { value: f64 },
    PeriodTooLong { value: f64, max: f64 },
    VelocityNotPositive { value: f64 },
    VelocityTooHigh { value: f64, max: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OffsetOutOfRange { foot, value } => write!(
                f,
                "offset {} = {value} is outside [0, 1)",
                FOOT_NAMES.get(*foot).copied().unwrap_or("?")
            ),
            Violation::PeriodNotPositive { value } => write!(f, "period_s = {value} is not > 0"),
            Violation::PeriodTooLong { value, max } => {
                write!(f, "period_s = {value} exceeds {max}")
            }
            Violation::VelocityNotPositive { value } => {
                write!(f, "vel_limit = {value} is not > 0")
            }
            Violation::VelocityTooHigh { value, max } => {
                write!(f, "vel_limit = {value} exceeds {max}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error("invalid descriptor: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("gait class `others` has no canonical offsets")]
    NoCanonicalOffsets,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl MotionDescriptor {
    pub fn new(offsets: [f64; 4], period_s: f64, vel_limit: f64) -> Self {
        Self {
            offsets,
            period_s,
            vel_limit,
        }
    }

    /// Validate against the default bounds.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate(self, &DescriptorBounds::default())
    }

    pub fn gait_class(&self) -> GaitClass {
        classify_gait(&self.offsets, DEFAULT_GAIT_TOL)
    }
}

/// Collect every violated invariant. An empty list means the descriptor is valid.
pub fn validate(d: &MotionDescriptor, bounds: &DescriptorBounds) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (foot, &value) in d.offsets.iter().enumerate() {
        // NaN fails both comparisons.
        if !(0.0..1.0).contains(&value) {
            out.push(Violation::OffsetOutOfRange { foot, value });
        }
    }
    if !(d.period_s > 0.0) {
        out.push(Violation::PeriodNotPositive { value: d.period_s });
    } else if d.period_s > bounds.max_period_s {
        out.push(Violation::PeriodTooLong {
            value: d.period_s,
            max: bounds.max_period_s,
        });
    }
    if !(d.vel_limit > 0.0) {
        out.push(Violation::VelocityNotPositive { value: d.vel_limit });
    } else if d.vel_limit > bounds.max_vel_limit {
        out.push(Violation::VelocityTooHigh {
            value: d.vel_limit,
            max: bounds.max_vel_limit,
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Gait categories: the five canonical gaits plus a catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitClass {
    Pronk,
    Trot,
    Pace,
    Bound,
    RotaryGallop,
    Others,
}

impl GaitClass {
    /// All six classes; the canonical five come first in table order.
    pub const ALL: [GaitClass; 6] = [
        GaitClass::Pronk,
        GaitClass::Trot,
        GaitClass::Pace,
        GaitClass::Bound,
        GaitClass::RotaryGallop,
        GaitClass::Others,
    ];

    pub const CANONICAL: [GaitClass; 5] = [
        GaitClass::Pronk,
        GaitClass::Trot,
        GaitClass::Pace,
        GaitClass::Bound,
        GaitClass::RotaryGallop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GaitClass::Pronk => "pronk",
            GaitClass::Trot => "trot",
            GaitClass::Pace => "pace",
            GaitClass::Bound => "bound",
            GaitClass::RotaryGallop => "rotary_gallop",
            GaitClass::Others => "others",
        }
    }
}

impl fmt::Display for GaitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Offsets table row for a canonical gait (FL, FR, RL, RR).
pub fn canonical_offsets(g: GaitClass) -> Result<[f64; 4], DescriptorError> {
    Ok(match g {
        GaitClass::Pronk => [0.0, 0.0, 0.0, 0.0],
        GaitClass::Trot => [0.0, 0.5, 0.5, 0.0],
        GaitClass::Pace => [0.0, 0.5, 0.0, 0.5],
        GaitClass::Bound => [0.0, 0.0, 0.5, 0.5],
        GaitClass::RotaryGallop => [0.0, 0.2, 0.7, 0.5],
        GaitClass::Others => return Err(DescriptorError::NoCanonicalOffsets),
    })
}

/// Wrapped distance between two phases, in `[0, 0.5]`.
pub fn cyclic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Shift all offsets so that FL sits at zero.
pub fn normalize_phase(offsets: &[f64; 4]) -> [f64; 4] {
    let base = offsets[0];
    offsets.map(|o| {
        let x = (o - base).rem_euclid(1.0);
        if x >= 1.0 {
            0.0
        } else {
            x
        }
    })
}

/// Largest per-foot cyclic distance between two offset vectors.
pub fn max_foot_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| cyclic_distance(*x, *y))
        .fold(0.0, f64::max)
}

/// Classify offsets against the canonical table after global-phase
/// normalization. The nearest row within `tol` wins, ties by table order;
/// otherwise [`GaitClass::Others`].
pub fn classify_gait(offsets: &[f64; 4], tol: f64) -> GaitClass {
    let norm = normalize_phase(offsets);
    let mut best: Option<(GaitClass, f64)> = None;
    for g in GaitClass::CANONICAL {
        let row = canonical_offsets(g).expect("canonical row");
        let d = max_foot_distance(&norm, &row);
        if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((g, d));
        }
    }
    best.map_or(GaitClass::Others, |(g, _)| g)
}

/// Keep the first two (front) offsets for a biped.
pub fn remap_to_biped(d: &MotionDescriptor) -> Result<BipedDescriptor, DescriptorError> {
    d.validate().map_err(DescriptorError::Invalid)?;
    Ok(BipedDescriptor {
        offsets: [d.offsets[0], d.offsets[1]],
        period_s: d.period_s,
        vel_limit: d.vel_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent classification oracle: enumerate every row, compare
    /// against the raw distance formula without helper reuse.
    fn oracle_min_distance(x: [f64; 4]) -> f64 {
        let rows = [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.5, 0.0, 0.5],
            [0.0, 0.0, 0.5, 0.5],
            [0.0, 0.2, 0.7, 0.5],
        ];
        let mut norm = [0.0; 4];
        for i in 0..4 {
            let mut v = x[i] - x[0];
            while v < 0.0 {
                v += 1.0;
            }
            norm[i] = v;
        }
        rows.iter()
            .map(|r| {
                (0..4)
                    .map(|i| {
                        let d = (norm[i] - r[i]).abs();
                        d.min(1.0 - d)
                    })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn trot_at_nominal_operating_point_is_valid() {
        let d = MotionDescriptor::new([0.0, 0.5, 0.5, 0.0], 0.4, 1.2);
        assert!(d.validate().is_ok());
    }

    #[test]
    fn offset_of_one_is_rejected() {
        let d = MotionDescriptor::new([0.0, 0.0, 0.0, 1.0], 0.4, 1.2);
        let v = d.validate().unwrap_err();
        assert_eq!(v, vec![Violation::OffsetOutOfRange { foot: 3, value: 1.0 }]);
    }

    #[test]
    fn negative_period_is_rejected() {
        let d = MotionDescriptor::new([0.0; 4], -0.1, 1.0);
        assert_eq!(
            d.validate().unwrap_err(),
            vec![Violation::PeriodNotPositive { value: -0.1 }]
        );
    }

    #[test]
    fn all_violations_are_reported() {
        let d = MotionDescriptor::new([f64::NAN, -0.2, 0.0, 0.0], 3.0, 9.0);
        assert_eq!(d.validate().unwrap_err().len(), 4);
    }

    #[test]
    fn canonical_rows() {
        assert_eq!(canonical_offsets(GaitClass::Pronk).unwrap(), [0.0; 4]);
        assert_eq!(canonical_offsets(GaitClass::Pace).unwrap(), [0.0, 0.5, 0.0, 0.5]);
        assert_eq!(
            canonical_offsets(GaitClass::RotaryGallop).unwrap(),
            [0.0, 0.2, 0.7, 0.5]
        );
        assert_eq!(
            canonical_offsets(GaitClass::Others),
            Err(DescriptorError::NoCanonicalOffsets)
        );
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_gait(&[0.0, 0.5, 0.5, 0.0], 0.05), GaitClass::Trot);
        assert_eq!(classify_gait(&[0.3, 0.8, 0.8, 0.3], 0.05), GaitClass::Trot);
        // Oracle: nearest normalized row is bound at 0.2.
        let x = [0.1, 0.9, 0.4, 0.6];
        assert!((oracle_min_distance(x) - 0.2).abs() < 1e-12);
        assert_eq!(classify_gait(&x, 0.05), GaitClass::Others);
    }

    #[test]
    fn biped_remap_examples() {
        let trot = MotionDescriptor::new([0.0, 0.5, 0.5, 0.0], 0.4, 1.2);
        assert_eq!(remap_to_biped(&trot).unwrap().offsets, [0.0, 0.5]);
        let pronk = MotionDescriptor::new([0.0; 4], 0.3, 0.8);
        assert_eq!(remap_to_biped(&pronk).unwrap().offsets, [0.0, 0.0]);
        let gallop = MotionDescriptor::new([0.0, 0.2, 0.7, 0.5], 0.5, 2.0);
        let b = remap_to_biped(&gallop).unwrap();
        assert_eq!(b.offsets, [0.0, 0.2]);
        assert_eq!((b.period_s, b.vel_limit), (0.5, 2.0));
        let bad = MotionDescriptor::new([0.0, 1.5, 0.0, 0.0], 0.4, 1.0);
        assert!(matches!(remap_to_biped(&bad), Err(DescriptorError::Invalid(_))));
    }

    #[test]
    fn json_field_names_are_fixed() {
        let d = MotionDescriptor::new([0.0, 0.5, 0.5, 0.0], 0.4, 1.2);
        let v = serde_json::to_value(d).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"offsets": [0.0, 0.5, 0.5, 0.0], "period_s": 0.4, "vel_limit": 1.2})
        );
    }

    fn canonical() -> impl Strategy<Value = GaitClass> {
        prop::sample::select(GaitClass::CANONICAL.to_vec())
    }

    proptest! {
        #[test]
        fn global_shift_invariance(g in canonical(), c in 0.0f64..1.0) {
            let row = canonical_offsets(g).unwrap();
            let shifted = row.map(|o| (o + c).rem_euclid(1.0) % 1.0);
            prop_assert_eq!(classify_gait(&shifted, 0.05), g);
        }

        #[test]
        fn small_perturbation_is_stable(
            g in canonical(),
            eps in prop::array::uniform4(-0.049f64..0.049),
        ) {
            let row = canonical_offsets(g).unwrap();
            // FL stays put so every per-foot shift survives normalization unchanged.
            let mut x = row;
            for i in 1..4 {
                x[i] = (row[i] + eps[i]).rem_euclid(1.0);
            }
            prop_assert_eq!(classify_gait(&x, 0.05), g);
        }

        #[test]
        fn far_from_every_row_is_others(x in prop::array::uniform4(0.0f64..1.0)) {
            prop_assume!(oracle_min_distance(x) > 0.25);
            prop_assert_eq!(classify_gait(&x, 0.05), GaitClass::Others);
        }

        #[test]
        fn classification_agrees_with_oracle(x in prop::array::uniform4(0.0f64..1.0)) {
            let oracle_others = oracle_min_distance(x) > 0.05 + 1e-12;
            let got = classify_gait(&x, 0.05);
            if oracle_others {
                prop_assert_eq!(got, GaitClass::Others);
            }
        }

        #[test]
        fn biped_keeps_period_and_velocity(
            x in prop::array::uniform4(0.0f64..1.0),
            t in 0.05f64..2.0,
            v in 0.05f64..5.0,
        ) {
            let b = remap_to_biped(&MotionDescriptor::new(x, t, v)).unwrap();
            prop_assert_eq!(b.period_s, t);
            prop_assert_eq!(b.vel_limit, v);
        }
    }
}
