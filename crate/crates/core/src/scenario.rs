//! Road geometry, vehicle records, goal sets and box collision tests.
//!
//! Lanes are straight and parallel. Lane `0` is the leftmost main lane and
//! lane indices grow to the right (towards larger `y`). The on-ramp is an
//! extra lane to the right of the last main lane which terminates at the end
//! of the merge zone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::LaneChange;

/// Speed limit shared by every vehicle.
pub const V_MAX: f64 = 35.0;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 2.0;

pub type Lane = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighwayLayout {
    pub section_length: f64,
    pub lane_width: f64,
    pub main_lane_count: usize,
    pub merge_zone_start: f64,
    pub merge_zone_length: f64,
}

impl Default for HighwayLayout {
    fn default() -> Self {
        Self {
            section_length: 460.0,
            lane_width: 4.5,
            main_lane_count: 2,
            merge_zone_start: 180.0,
            merge_zone_length: 180.0,
        }
    }
}

impl HighwayLayout {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("layout: {m}")));
        if self.main_lane_count == 0 {
            return bad("main_lane_count must be at least 1");
        }
        if !(self.lane_width > 0.0) || !(self.section_length > 0.0) {
            return bad("lane_width and section_length must be positive");
        }
        if self.merge_zone_start < 0.0 || !(self.merge_zone_length > 0.0) {
            return bad("merge zone must start at x >= 0 and have positive length");
        }
        if self.merge_zone_end() > self.section_length {
            return bad("merge zone extends past the section end");
        }
        Ok(())
    }

    pub fn ramp_lane(&self) -> Lane {
        self.main_lane_count
    }

    pub fn lane_count(&self) -> usize {
        self.main_lane_count + 1
    }

    pub fn is_ramp(&self, lane: Lane) -> bool {
        lane == self.ramp_lane()
    }

    pub fn merge_zone_end(&self) -> f64 {
        self.merge_zone_start + self.merge_zone_length
    }

    pub fn in_merge_zone(&self, x: f64) -> bool {
        x >= self.merge_zone_start && x <= self.merge_zone_end()
    }

    pub fn lane_center(&self, lane: Lane) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lane whose centerline is nearest to `y`; exact midpoints resolve to the
    /// lower index.
    pub fn lane_of_y(&self, y: f64) -> Result<Lane> {
        let half = 0.5 * self.lane_width;
        let max_y = self.lane_center(self.ramp_lane()) + half;
        if !(y >= -half && y <= max_y) {
            return Err(Error::OffRoad { y });
        }
        let scaled = y / self.lane_width;
        let lower = scaled.floor();
        let lane = if scaled - lower > 0.5 {
            lower + 1.0
        } else {
            lower
        };
        Ok((lane.max(0.0) as usize).min(self.ramp_lane()))
    }

    /// True when a vehicle centered at `(x, y)` is on drivable road.
    pub fn on_road(&self, x: f64, y: f64) -> bool {
        match self.lane_of_y(y) {
            Ok(lane) if self.is_ramp(lane) => x <= self.merge_zone_end(),
            Ok(_) => true,
            Err(_) => false,
        }
    }

    /// Lane reachable by a left change from `lane` at longitudinal position `x`.
    pub fn left_of(&self, lane: Lane, x: f64) -> Option<Lane> {
        if self.is_ramp(lane) {
            self.in_merge_zone(x).then(|| lane - 1)
        } else {
            lane.checked_sub(1)
        }
    }

    /// Lane reachable by a right change. Main lanes never change onto the ramp.
    pub fn right_of(&self, lane: Lane) -> Option<Lane> {
        (lane + 1 < self.main_lane_count).then_some(lane + 1)
    }

    /// Lanes whose traffic matters to a vehicle in `lane`, regardless of
    /// whether a lane change is currently permitted.
    pub fn neighbor_lanes(&self, lane: Lane) -> (Option<Lane>, Option<Lane>) {
        let left = lane.checked_sub(1);
        let right = (lane + 1 < self.lane_count()).then_some(lane + 1);
        (left, right)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub psi: f64,
    pub beta: f64,
    pub a: f64,
}

impl VehicleState {
    pub fn at(x: f64, y: f64, v: f64) -> Self {
        Self {
            x,
            y,
            v,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    #[serde(rename = "CAV")]
    Cav,
    #[serde(rename = "HDV")]
    Hdv,
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleClass::Cav => "CAV",
            VehicleClass::Hdv => "HDV",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub length: f64,
    pub width: f64,
    pub state: VehicleState,
    pub crashed: bool,
    pub spawn_time: u32,
    /// IDM desired speed; `None` for CAVs.
    pub idm_target_speed: Option<f64>,
    /// Lane change in progress (HDVs only; CAV maneuvers live in their
    /// committed primitive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_change: Option<LaneChange>,
}

impl VehicleRecord {
    pub fn new(id: VehicleId, class: VehicleClass, state: VehicleState) -> Self {
        Self {
            id,
            class,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
            state,
            crashed: false,
            spawn_time: 0,
            idm_target_speed: None,
            lane_change: None,
        }
    }

    pub fn hdv(id: u32, state: VehicleState, target_speed: f64) -> Self {
        Self {
            idm_target_speed: Some(target_speed),
            ..Self::new(VehicleId(id), VehicleClass::Hdv, state)
        }
    }

    pub fn cav(id: u32, state: VehicleState) -> Self {
        Self::new(VehicleId(id), VehicleClass::Cav, state)
    }

    pub fn is_cav(&self) -> bool {
        self.class == VehicleClass::Cav
    }

    pub fn lane(&self, layout: &HighwayLayout) -> Result<Lane> {
        layout.lane_of_y(self.state.y)
    }
}

pub fn lane_of(state: &VehicleState, layout: &HighwayLayout) -> Result<Lane> {
    layout.lane_of_y(state.y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub angle: f64,
}

impl OrientedBox {
    pub fn of_state(state: &VehicleState, length: f64, width: f64) -> Self {
        Self {
            cx: state.x,
            cy: state.y,
            half_length: 0.5 * length,
            half_width: 0.5 * width,
            angle: state.psi,
        }
    }

    /// Unit axes along the length and width directions.
    pub fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.angle.sin_cos();
        [(c, s), (-s, c)]
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (wx, wy)] = self.axes();
        let (l, w) = (self.half_length, self.half_width);
        let p = |sl: f64, sw: f64| {
            (
                self.cx + sl * l * ux + sw * w * wx,
                self.cy + sl * l * uy + sw * w * wy,
            )
        };
        [p(1.0, 1.0), p(-1.0, 1.0), p(-1.0, -1.0), p(1.0, -1.0)]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }

    fn radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Half-extent of the box projected onto a unit axis.
    fn projected_radius(&self, axis: (f64, f64)) -> f64 {
        let [(ux, uy), (wx, wy)] = self.axes();
        self.half_length * (ux * axis.0 + uy * axis.1).abs()
            + self.half_width * (wx * axis.0 + wy * axis.1).abs()
    }
}

pub fn bounding_box(rec: &VehicleRecord) -> OrientedBox {
    OrientedBox::of_state(&rec.state, rec.length, rec.width)
}

/// Separating-axis test over the four face normals. Touching boxes overlap.
pub fn boxes_overlap(b1: &OrientedBox, b2: &OrientedBox) -> bool {
    const EPS: f64 = 1e-9;
    let (dx, dy) = (b2.cx - b1.cx, b2.cy - b1.cy);
    let reach = b1.radius() + b2.radius();
    if dx * dx + dy * dy > reach * reach + EPS {
        return false;
    }
    let [a0, a1] = b1.axes();
    let [a2, a3] = b2.axes();
    [a0, a1, a2, a3].iter().all(|&axis| {
        let dist = (dx * axis.0 + dy * axis.1).abs();
        dist <= b1.projected_radius(axis) + b2.projected_radius(axis) + EPS
    })
}

/// Overlap test for two vehicle footprints given their states.
pub fn states_overlap(s1: &VehicleState, s2: &VehicleState) -> bool {
    // cheap reject before building boxes; the footprint circumradius is ~2.7 m
    if (s1.x - s2.x).abs() > VEHICLE_LENGTH + 0.5 || (s1.y - s2.y).abs() > VEHICLE_LENGTH + 0.5 {
        return false;
    }
    boxes_overlap(
        &OrientedBox::of_state(s1, VEHICLE_LENGTH, VEHICLE_WIDTH),
        &OrientedBox::of_state(s2, VEHICLE_LENGTH, VEHICLE_WIDTH),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Primary,
    Fallback,
}

/// A stretch of lane `lane` with `x_min <= x <= x_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalRegion {
    pub lane: Lane,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalSet {
    pub phase: Phase,
    pub regions: Vec<GoalRegion>,
}

impl GoalSet {
    pub fn contains(&self, lane: Lane, x: f64) -> bool {
        const EPS: f64 = 1e-6;
        self.regions
            .iter()
            .any(|r| r.lane == lane && x >= r.x_min - EPS && x <= r.x_max)
    }

    /// Nearest member position of each region, as (lane, x).
    pub fn positions(&self) -> Vec<(Lane, f64)> {
        self.regions.iter().map(|r| (r.lane, r.x_min)).collect()
    }
}

/// Goal positions for a CAV.
///
/// Main-road vehicles aim for `d` (Primary) or `d_prime` (Fallback) ahead on
/// their current or an adjacent main lane; any progress at or beyond that
/// offset counts. Ramp vehicles aim for the adjacent main lane before the
/// merge zone ends; while the zone start is at least the goal offset away,
/// that much progress along the ramp also counts.
pub fn goal_set(
    rec: &VehicleRecord,
    layout: &HighwayLayout,
    phase: Phase,
    d: f64,
    d_prime: f64,
) -> Result<GoalSet> {
    let lane = rec.lane(layout)?;
    let x = rec.state.x;
    let regions = if layout.is_ramp(lane) {
        let end = layout.merge_zone_end();
        if x >= end {
            return Err(Error::EmptyGoal(rec.id));
        }
        let offset = match phase {
            Phase::Primary => d,
            Phase::Fallback => d_prime,
        };
        let mut regions = vec![GoalRegion {
            lane: lane - 1,
            x_min: x.max(layout.merge_zone_start),
            x_max: end,
        }];
        if x + offset <= layout.merge_zone_start {
            regions.push(GoalRegion {
                lane,
                x_min: x + offset,
                x_max: end,
            });
        }
        regions
    } else {
        let offset = match phase {
            Phase::Primary => d,
            Phase::Fallback => d_prime,
        };
        let x_min = (x + offset).min(layout.section_length);
        let mut lanes = vec![lane];
        lanes.extend(layout.left_of(lane, x));
        lanes.extend(layout.right_of(lane));
        lanes.sort_unstable();
        lanes
            .into_iter()
            .map(|lane| GoalRegion {
                lane,
                x_min,
                x_max: f64::INFINITY,
            })
            .collect()
    };
    Ok(GoalSet { phase, regions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> HighwayLayout {
        HighwayLayout::default()
    }

    #[test]
    fn lane_of_nearest_centerline() {
        let l = layout();
        assert_eq!(l.lane_of_y(0.0).unwrap(), 0);
        assert_eq!(l.lane_of_y(4.5).unwrap(), 1);
        assert_eq!(l.lane_of_y(2.3).unwrap(), 1);
        assert_eq!(l.lane_of_y(2.2).unwrap(), 0);
        assert_eq!(l.lane_of_y(9.0).unwrap(), l.ramp_lane());
        assert!(matches!(l.lane_of_y(-3.0), Err(Error::OffRoad { .. })));
        assert!(l.lane_of_y(12.0).is_err());
    }

    #[test]
    fn default_layout_is_valid() {
        let l = layout();
        l.validate().unwrap();
        assert_eq!(l.merge_zone_end(), 360.0);
        let bad = HighwayLayout {
            merge_zone_start: 300.0,
            ..layout()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ramp_is_only_drivable_before_zone_end() {
        let l = layout();
        assert!(l.on_road(100.0, 9.0));
        assert!(l.on_road(360.0, 9.0));
        assert!(!l.on_road(361.0, 9.0));
        assert!(l.on_road(500.0, 4.5));
        assert_eq!(l.left_of(2, 100.0), None);
        assert_eq!(l.left_of(2, 200.0), Some(1));
        assert_eq!(l.right_of(1), None);
        assert_eq!(l.right_of(0), Some(1));
    }

    #[test]
    fn bounding_box_axis_aligned() {
        let rec = VehicleRecord::cav(1, VehicleState::at(10.0, 0.0, 30.0));
        let b = bounding_box(&rec);
        let xs: Vec<f64> = b.corners().iter().map(|c| c.0).collect();
        let ys: Vec<f64> = b.corners().iter().map(|c| c.1).collect();
        let span = |v: &[f64]| {
            (
                v.iter().cloned().fold(f64::INFINITY, f64::min),
                v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        assert_eq!(span(&xs), (7.5, 12.5));
        assert_eq!(span(&ys), (-1.0, 1.0));
    }

    #[test]
    fn bounding_box_quarter_turn_swaps_extents() {
        let mut rec = VehicleRecord::cav(1, VehicleState::at(10.0, 0.0, 30.0));
        rec.state.psi = std::f64::consts::FRAC_PI_2;
        for (x, y) in bounding_box(&rec).corners() {
            assert!(((x - 10.0).abs() - 1.0).abs() < 1e-12);
            assert!((y.abs() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bounding_box_small_rotation_matches_rotation_matrix() {
        let mut rec = VehicleRecord::cav(1, VehicleState::at(10.0, 3.0, 30.0));
        rec.state.psi = 0.1;
        let (s, c) = 0.1f64.sin_cos();
        let expected = [(2.5, 1.0), (-2.5, 1.0), (-2.5, -1.0), (2.5, -1.0)]
            .map(|(lx, ly)| (10.0 + c * lx - s * ly, 3.0 + s * lx + c * ly));
        for (got, want) in bounding_box(&rec).corners().iter().zip(expected) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_examples() {
        let a = OrientedBox::of_state(&VehicleState::at(0.0, 0.0, 0.0), 5.0, 2.0);
        assert!(boxes_overlap(&a, &a));
        let far = OrientedBox::of_state(&VehicleState::at(10.0, 0.0, 0.0), 5.0, 2.0);
        assert!(!boxes_overlap(&a, &far));
        let near = OrientedBox::of_state(&VehicleState::at(4.9, 0.0, 0.0), 5.0, 2.0);
        assert!(boxes_overlap(&a, &near));
        let touching = OrientedBox::of_state(&VehicleState::at(5.0, 0.0, 0.0), 5.0, 2.0);
        assert!(boxes_overlap(&a, &touching));
        let next_lane = OrientedBox::of_state(&VehicleState::at(0.0, 4.5, 0.0), 5.0, 2.0);
        assert!(!boxes_overlap(&a, &next_lane));
    }

    #[test]
    fn goal_set_main_road_primary_and_fallback() {
        let l = layout();
        let rec = VehicleRecord::cav(1, VehicleState::at(100.0, 0.0, 30.0));
        let g = goal_set(&rec, &l, Phase::Primary, 70.0, 30.0).unwrap();
        assert_eq!(g.positions(), vec![(0, 170.0), (1, 170.0)]);
        assert!(g.contains(0, 200.0) && g.contains(1, 170.0) && !g.contains(0, 169.0));
        let f = goal_set(&rec, &l, Phase::Fallback, 70.0, 30.0).unwrap();
        assert_eq!(f.positions(), vec![(0, 130.0), (1, 130.0)]);
    }

    #[test]
    fn goal_set_clips_to_section_end() {
        let l = layout();
        let rec = VehicleRecord::cav(1, VehicleState::at(420.0, 4.5, 30.0));
        let g = goal_set(&rec, &l, Phase::Primary, 70.0, 30.0).unwrap();
        assert!(g.regions.iter().all(|r| r.x_min == 460.0));
    }

    #[test]
    fn goal_set_ramp() {
        let l = HighwayLayout {
            merge_zone_start: 100.0,
            ..layout()
        };
        assert_eq!(l.merge_zone_end(), 280.0);
        let rec = VehicleRecord::cav(1, VehicleState::at(250.0, 9.0, 30.0));
        let g = goal_set(&rec, &l, Phase::Primary, 70.0, 30.0).unwrap();
        assert_eq!(g.regions.len(), 1);
        let r = g.regions[0];
        assert_eq!((r.lane, r.x_min, r.x_max), (1, 250.0, 280.0));
        let late = VehicleRecord::cav(2, VehicleState::at(281.0, 9.0, 30.0));
        assert!(matches!(
            goal_set(&late, &l, Phase::Primary, 70.0, 30.0),
            Err(Error::EmptyGoal(_))
        ));
    }

    #[test]
    fn goal_set_upstream_ramp_accepts_progress() {
        let l = layout();
        let rec = VehicleRecord::cav(1, VehicleState::at(20.0, 9.0, 30.0));
        let g = goal_set(&rec, &l, Phase::Primary, 70.0, 30.0).unwrap();
        assert!(g.contains(1, 200.0));
        assert!(g.contains(2, 90.0));
        assert!(!g.contains(2, 80.0));
        let near = VehicleRecord::cav(2, VehicleState::at(150.0, 9.0, 30.0));
        let g = goal_set(&near, &l, Phase::Primary, 70.0, 30.0).unwrap();
        assert_eq!(g.regions.len(), 1);
    }
}
