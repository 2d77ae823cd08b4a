use crate::driver::{gap_between, Neighbor};
use crate::scenario::{HighwayLayout, VehicleClass, VehicleRecord};

/// Gap reported for an empty slot (m).
pub const ABSENT_GAP: f64 = 150.0;

const SLOTS: [&str; 6] = [
    "left_leader",
    "left_follower",
    "leader",
    "follower",
    "right_leader",
    "right_follower",
];

const EGO: [&str; 9] = [
    "v",
    "lateral_offset",
    "psi",
    "on_ramp",
    "merge_progress",
    "to_zone_end",
    "left_available",
    "right_available",
    "changing_lane",
];

const PER_SLOT: [&str; 5] = ["present", "gap", "dv", "accel", "is_cav"];

pub const FEATURE_COUNT: usize = EGO.len() + SLOTS.len() * PER_SLOT.len();

pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = EGO.iter().map(|s| s.to_string()).collect();
    for slot in SLOTS {
        for f in PER_SLOT {
            names.push(format!("{slot}_{f}"));
        }
    }
    names
}

/// Flattens the subject and its six neighbor slots into a fixed-length
/// vector. Slots are ordered left, current, right; leader before follower.
pub fn features(
    subject: &VehicleRecord,
    slots: &[Option<Neighbor>; 6],
    layout: &HighwayLayout,
) -> Vec<f64> {
    let s = &subject.state;
    let lane = layout.lane_of_y(s.y).unwrap_or(0);
    let on_ramp = layout.is_ramp(lane);
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let (progress, to_end) = if on_ramp {
        (
            ((s.x - layout.merge_zone_start) / layout.merge_zone_length).clamp(0.0, 1.0),
            (layout.merge_zone_end() - s.x).max(0.0),
        )
    } else {
        (0.0, 0.0)
    };
    let mut out = Vec::with_capacity(FEATURE_COUNT);
    out.extend([
        s.v,
        s.y - layout.lane_center(lane),
        s.psi,
        flag(on_ramp),
        progress,
        to_end,
        flag(layout.left_of(lane, s.x).is_some()),
        flag(layout.right_of(lane).is_some()),
        flag(subject.lane_change.is_some()),
    ]);
    for (i, slot) in slots.iter().enumerate() {
        match slot {
            Some(n) => {
                let gap = if i % 2 == 0 {
                    gap_between(s, &n.state)
                } else {
                    gap_between(&n.state, s)
                };
                out.extend([
                    1.0,
                    gap.min(ABSENT_GAP),
                    n.state.v - s.v,
                    n.state.a,
                    flag(n.class == VehicleClass::Cav),
                ]);
            }
            None => out.extend([0.0, ABSENT_GAP, 0.0, 0.0, 0.0]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::VehicleState;

    #[test]
    fn names_match_vector_length() {
        let l = HighwayLayout::default();
        let ego = VehicleRecord::hdv(1, VehicleState::at(200.0, 9.0, 25.0), 30.0);
        let lead = VehicleRecord::hdv(2, VehicleState::at(230.0, 9.0, 20.0), 30.0);
        let mut slots = [None; 6];
        slots[2] = Some(Neighbor::of(&lead));
        let f = features(&ego, &slots, &l);
        assert_eq!(f.len(), FEATURE_COUNT);
        assert_eq!(feature_names().len(), FEATURE_COUNT);
        assert_eq!(f[3], 1.0);
        assert!((f[4] - 20.0 / 180.0).abs() < 1e-12);
        // leader slot: gap 25, dv -5
        assert_eq!(&f[19..22], &[1.0, 25.0, -5.0]);
    }
}
