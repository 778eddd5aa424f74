//! View-area geometry and navigation metrics.
//!
//! A drone at altitude `z` with field of view `fov` sees a square ground
//! footprint of side `2·z·tan(fov/2)`, rotated by its heading. Episode
//! success compares the final footprint against the target region with an
//! exact oriented-rectangle IoU (convex polygon clipping). On top of that
//! sit the usual navigation metrics: success rate, success weighted by
//! inverse path length, and goal progress in meters.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IoU above which (strictly) a final view area counts as a success.
pub const SUCCESS_IOU: f64 = 0.4;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Position in world meters: x east, y north, z altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::Domain(format!("non-finite position ({x}, {y}, {z})")));
        }
        if z <= 0.0 {
            return Err(Error::Domain(format!("altitude must be positive, got {z}")));
        }
        Ok(Self { x, y, z })
    }

    /// Planar (x, y) distance; altitude is ignored.
    pub fn planar_distance(&self, other: &Position) -> f64 {
        planar_distance((self.x, self.y), (other.x, other.y))
    }
}

pub fn planar_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Heading angle in radians, canonicalized to `[0, 2π)`.
///
/// Zero points east; `π/2` points north (`atan2(dy, dx)` convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heading(f64);

impl Heading {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if t >= TAU {
            t = 0.0;
        }
        Heading(t)
    }

    pub fn radians(&self) -> f64 {
        self.0
    }
}

/// Drone pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Position,
    pub heading: Heading,
}

impl DroneState {
    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Result<Self> {
        Ok(Self { position: Position::new(x, y, z)?, heading: Heading::new(theta) })
    }
}

/// A displacement command. `stop` ends the episode without moving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub stop: bool,
}

impl Action {
    pub fn stop() -> Self {
        Action { dx: 0.0, dy: 0.0, dz: 0.0, stop: true }
    }

    pub fn planar_magnitude(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Ground footprint visible to the drone: four corners in world meters,
/// counter-clockwise, forming a convex quadrilateral of positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewArea {
    corners: [[f64; 2]; 4],
}

impl ViewArea {
    pub fn new(corners: [[f64; 2]; 4]) -> Result<Self> {
        let area = polygon_area(&corners);
        if !area.is_finite() || area <= 0.0 {
            return Err(Error::Domain(format!(
                "view area corners must be CCW with positive area, got signed area {area}"
            )));
        }
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let c = corners[(i + 2) % 4];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross <= 0.0 {
                return Err(Error::Domain("view area must be convex and CCW".into()));
            }
        }
        Ok(Self { corners })
    }

    /// Footprint of `state` with the given field of view: a square of side
    /// `2·z·tan(fov/2)` centered on (x, y) and rotated by the heading.
    pub fn from_state(state: &DroneState, fov: f64) -> Result<Self> {
        if state.position.z <= 0.0 {
            return Err(Error::Domain("altitude must be positive".into()));
        }
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::Domain(format!("fov must be in (0, pi), got {fov}")));
        }
        let h = state.position.z * (fov / 2.0).tan();
        let (sin, cos) = state.heading.radians().sin_cos();
        let local = [[h, h], [-h, h], [-h, -h], [h, -h]];
        let mut corners = [[0.0; 2]; 4];
        for (out, p) in corners.iter_mut().zip(local.iter()) {
            out[0] = state.position.x + p[0] * cos - p[1] * sin;
            out[1] = state.position.y + p[0] * sin + p[1] * cos;
        }
        Ok(Self { corners })
    }

    pub fn corners(&self) -> &[[f64; 2]; 4] {
        &self.corners
    }

    pub fn center(&self) -> (f64, f64) {
        let (mut cx, mut cy) = (0.0, 0.0);
        for c in &self.corners {
            cx += c[0];
            cy += c[1];
        }
        (cx / 4.0, cy / 4.0)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.corners)
    }

    /// Side length, assuming the area is a square (as produced here).
    pub fn side(&self) -> f64 {
        planar_distance(
            (self.corners[0][0], self.corners[0][1]),
            (self.corners[1][0], self.corners[1][1]),
        )
    }
}

/// Signed area of a polygon (positive for CCW order), via the shoelace sum.
pub fn polygon_area(points: &[[f64; 2]]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..points.len() {
        let a = points[i];
        let b = points[(i + 1) % points.len()];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

/// Intersection of two convex CCW polygons (Sutherland–Hodgman clipping).
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let inside =
            |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        let intersect = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
            let d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let d2 = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]);
            let t = d1 / (d1 - d2);
            [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
        };
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            if inside(cur) {
                if !inside(prev) {
                    output.push(intersect(prev, cur));
                }
                output.push(cur);
            } else if inside(prev) {
                output.push(intersect(prev, cur));
            }
        }
    }
    output
}

/// Exact IoU of two view areas via convex polygon clipping.
pub fn rect_iou(a: &ViewArea, b: &ViewArea) -> Result<f64> {
    let area_a = a.area();
    let area_b = b.area();
    if area_a <= 0.0 || area_b <= 0.0 {
        return Err(Error::Domain("degenerate view area in IoU".into()));
    }
    let inter_poly = clip_convex(a.corners(), b.corners());
    let inter = polygon_area(&inter_poly).max(0.0);
    let union = area_a + area_b - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Success iff IoU(final, target) is strictly greater than [`SUCCESS_IOU`].
pub fn is_success(final_area: &ViewArea, target: &ViewArea) -> Result<bool> {
    Ok(rect_iou(final_area, target)? > SUCCESS_IOU)
}

/// Symmetric matrix of planar L2 distances between positions (z ignored).
pub fn pairwise_distance_matrix(positions: &[Position]) -> Result<Array2<f64>> {
    if positions.is_empty() {
        return Err(Error::Domain("distance matrix of an empty position list".into()));
    }
    let n = positions.len();
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i].planar_distance(&positions[j]);
            e[[i, j]] = d;
            e[[j, i]] = d;
        }
    }
    Ok(e)
}

/// Planar distance matrix over raw (x, y) pairs; used for memory locations.
pub fn location_distance_matrix(locations: &[(f64, f64)]) -> Array2<f64> {
    let n = locations.len();
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = planar_distance(locations[i], locations[j]);
            e[[i, j]] = d;
            e[[j, i]] = d;
        }
    }
    e
}

/// A rollout: view areas with the drone states that produced them.
/// The last area of a ground-truth trajectory is the target region.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    areas: Vec<ViewArea>,
    states: Vec<DroneState>,
}

impl Trajectory {
    pub fn new(areas: Vec<ViewArea>, states: Vec<DroneState>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::Domain("trajectory must contain at least one view area".into()));
        }
        if areas.len() != states.len() {
            return Err(Error::Domain(format!(
                "trajectory has {} areas but {} states",
                areas.len(),
                states.len()
            )));
        }
        Ok(Self { areas, states })
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn areas(&self) -> &[ViewArea] {
        &self.areas
    }

    pub fn states(&self) -> &[DroneState] {
        &self.states
    }

    pub fn first_area(&self) -> &ViewArea {
        &self.areas[0]
    }

    pub fn final_area(&self) -> &ViewArea {
        self.areas.last().unwrap()
    }

    /// Target region of a ground-truth trajectory (its final view area).
    pub fn target(&self) -> &ViewArea {
        self.final_area()
    }
}

/// Sum of planar distances between consecutive view-area centers.
pub fn path_length(traj: &Trajectory) -> f64 {
    traj.areas
        .windows(2)
        .map(|w| planar_distance(w[0].center(), w[1].center()))
        .sum()
}

/// Aggregate navigation metrics. `sr` and `spl` are ratios in [0, 1];
/// `gp` is meters and may be negative when the agent moves away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sr: f64,
    pub spl: f64,
    pub gp: f64,
    pub n_episodes: usize,
}

/// SR, SPL, and GP over (predicted, ground-truth) trajectory pairs.
///
/// SPL weights each success by `d / max(p, d)` where `d` is the straight-line
/// start-to-target distance and `p` the predicted path length; an episode
/// that starts on the target (`p = d = 0`) and succeeds counts 1. GP is the
/// reduction of center-to-center distance to the target.
pub fn compute_metrics(episodes: &[(Trajectory, Trajectory)]) -> Result<MetricReport> {
    if episodes.is_empty() {
        return Err(Error::Domain("compute_metrics over an empty episode list".into()));
    }
    let mut sr_sum = 0.0;
    let mut spl_sum = 0.0;
    let mut gp_sum = 0.0;
    for (predicted, truth) in episodes {
        let target = truth.target();
        let success = is_success(predicted.final_area(), target)?;
        let start = truth.first_area().center();
        let goal = target.center();
        let d = planar_distance(start, goal);
        let p = path_length(predicted);
        if success {
            sr_sum += 1.0;
            spl_sum += if p == 0.0 && d == 0.0 { 1.0 } else { d / p.max(d) };
        }
        gp_sum += d - planar_distance(predicted.final_area().center(), goal);
    }
    let n = episodes.len() as f64;
    Ok(MetricReport {
        sr: sr_sum / n,
        spl: spl_sum / n,
        gp: gp_sum / n,
        n_episodes: episodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn unit_square_at(x: f64, y: f64) -> ViewArea {
        ViewArea::new([
            [x + 0.5, y + 0.5],
            [x - 0.5, y + 0.5],
            [x - 0.5, y - 0.5],
            [x + 0.5, y - 0.5],
        ])
        .unwrap()
    }

    fn square(center: (f64, f64), side: f64, theta: f64) -> ViewArea {
        let state = DroneState::new(center.0, center.1, side / 2.0, theta).unwrap();
        ViewArea::from_state(&state, std::f64::consts::FRAC_PI_2).unwrap()
    }

    #[test]
    fn footprint_side_matches_altitude_and_fov() {
        let state = DroneState::new(0.0, 0.0, 50.0, 0.0).unwrap();
        let area = ViewArea::from_state(&state, std::f64::consts::FRAC_PI_2).unwrap();
        // tan(pi/4) = 1, so the side is 2*z = 100, axis-aligned at the origin
        assert_abs_diff_eq!(area.side(), 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(area.corners()[0][0], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(area.corners()[0][1], 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(area.corners()[2][0], -50.0, epsilon = 1e-9);
        assert_eq!(area.center(), (0.0, 0.0));
    }

    #[test]
    fn footprint_translates_with_state() {
        let a = ViewArea::from_state(
            &DroneState::new(0.0, 0.0, 50.0, 0.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        let b = ViewArea::from_state(
            &DroneState::new(10.0, 20.0, 50.0, 0.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        for (ca, cb) in a.corners().iter().zip(b.corners()) {
            assert_abs_diff_eq!(ca[0] + 10.0, cb[0], epsilon = 1e-9);
            assert_abs_diff_eq!(ca[1] + 20.0, cb[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn quarter_turn_rotates_corner_order_by_one() {
        let fov = std::f64::consts::FRAC_PI_2;
        let a = ViewArea::from_state(&DroneState::new(0.0, 0.0, 50.0, 0.0).unwrap(), fov).unwrap();
        let b = ViewArea::from_state(
            &DroneState::new(0.0, 0.0, 50.0, std::f64::consts::FRAC_PI_2).unwrap(),
            fov,
        )
        .unwrap();
        for i in 0..4 {
            let expect = a.corners()[(i + 1) % 4];
            assert_abs_diff_eq!(b.corners()[i][0], expect[0], epsilon = 1e-9);
            assert_abs_diff_eq!(b.corners()[i][1], expect[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn nonpositive_altitude_is_rejected() {
        assert!(Position::new(0.0, 0.0, 0.0).is_err());
        assert!(Position::new(0.0, 0.0, -3.0).is_err());
    }

    #[test]
    fn iou_identity_shift_and_disjoint() {
        let a = unit_square_at(0.0, 0.0);
        assert_abs_diff_eq!(rect_iou(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        // shifted by half a side: intersection 0.5, union 1.5
        let b = unit_square_at(0.5, 0.0);
        assert_abs_diff_eq!(rect_iou(&a, &b).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        let c = unit_square_at(10.0, 0.0);
        assert_abs_diff_eq!(rect_iou(&a, &c).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn success_threshold_is_strict() {
        let a = unit_square_at(0.0, 0.0);
        assert!(is_success(&a, &a).unwrap());
        // shift chosen so IoU = (1-s)/(1+s) = 0.4 exactly at s = 3/7
        let s = 3.0 / 7.0;
        let b = unit_square_at(s, 0.0);
        let iou = rect_iou(&a, &b).unwrap();
        assert_abs_diff_eq!(iou, 0.4, epsilon = 1e-12);
        assert!(!is_success(&a, &b).unwrap());
        let c = unit_square_at(10.0, 0.0);
        assert!(!is_success(&a, &c).unwrap());
    }

    #[test]
    fn iou_rigid_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = square((rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0), 3.0, rng.gen::<f64>() * TAU);
            let b = square((rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0), 2.0, rng.gen::<f64>() * TAU);
            let base = rect_iou(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&base));
            assert_abs_diff_eq!(base, rect_iou(&b, &a).unwrap(), epsilon = 1e-12);

            let phi: f64 = rng.gen::<f64>() * TAU;
            let (tx, ty) = (rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0);
            let rigid = |v: &ViewArea| {
                let mut corners = [[0.0; 2]; 4];
                for (out, c) in corners.iter_mut().zip(v.corners()) {
                    out[0] = c[0] * phi.cos() - c[1] * phi.sin() + tx;
                    out[1] = c[0] * phi.sin() + c[1] * phi.cos() + ty;
                }
                ViewArea::new(corners).unwrap()
            };
            let moved = rect_iou(&rigid(&a), &rigid(&b)).unwrap();
            assert_abs_diff_eq!(base, moved, epsilon = 1e-9);
        }
    }

    /// Monte-Carlo rasterization oracle used by the geometry acceptance
    /// criterion; lives here so unit and acceptance tests share it.
    pub fn monte_carlo_iou(a: &ViewArea, b: &ViewArea, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> =
            a.corners().iter().chain(b.corners().iter()).copied().collect();
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) =
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            lo_x = lo_x.min(p[0]);
            lo_y = lo_y.min(p[1]);
            hi_x = hi_x.max(p[0]);
            hi_y = hi_y.max(p[1]);
        }
        let inside = |poly: &[[f64; 2]; 4], p: [f64; 2]| {
            poly.iter().enumerate().all(|(i, v)| {
                let w = poly[(i + 1) % 4];
                (w[0] - v[0]) * (p[1] - v[1]) - (w[1] - v[1]) * (p[0] - v[0]) >= 0.0
            })
        };
        let (mut inter, mut union) = (0u64, 0u64);
        for _ in 0..samples {
            let p = [
                lo_x + rng.gen::<f64>() * (hi_x - lo_x),
                lo_y + rng.gen::<f64>() * (hi_y - lo_y),
            ];
            let ia = inside(a.corners(), p);
            let ib = inside(b.corners(), p);
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn iou_tracks_monte_carlo_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..10 {
            let a = square((rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0), 3.0, rng.gen::<f64>() * TAU);
            let b = square((rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0), 2.5, rng.gen::<f64>() * TAU);
            let exact = rect_iou(&a, &b).unwrap();
            let sampled = monte_carlo_iou(&a, &b, 200_000, 100 + i);
            assert!((exact - sampled).abs() < 5e-3, "exact {exact} vs mc {sampled}");
        }
    }

    #[test]
    fn distance_matrix_examples() {
        let single = pairwise_distance_matrix(&[Position::new(0.0, 0.0, 10.0).unwrap()]).unwrap();
        assert_eq!(single, Array2::<f64>::zeros((1, 1)));

        let e = pairwise_distance_matrix(&[
            Position::new(0.0, 0.0, 10.0).unwrap(),
            Position::new(3.0, 4.0, 50.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(e[[0, 1]], 5.0);
        assert_eq!(e[[1, 0]], 5.0);
        assert_eq!(e[[0, 0]], 0.0);

        let collinear = pairwise_distance_matrix(&[
            Position::new(0.0, 0.0, 1.0).unwrap(),
            Position::new(1.0, 0.0, 1.0).unwrap(),
            Position::new(2.0, 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            collinear[[0, 2]],
            collinear[[0, 1]] + collinear[[1, 2]],
            epsilon = 1e-12
        );
        assert!(pairwise_distance_matrix(&[]).is_err());
    }

    fn line_trajectory(centers: &[(f64, f64)]) -> Trajectory {
        let mut areas = Vec::new();
        let mut states = Vec::new();
        for &(x, y) in centers {
            let st = DroneState::new(x, y, 1.0, 0.0).unwrap();
            areas.push(ViewArea::from_state(&st, std::f64::consts::FRAC_PI_2).unwrap());
            states.push(st);
        }
        Trajectory::new(areas, states).unwrap()
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(&line_trajectory(&[(0.0, 0.0)])), 0.0);
        assert_abs_diff_eq!(path_length(&line_trajectory(&[(0.0, 0.0), (3.0, 4.0)])), 5.0);
        assert_abs_diff_eq!(
            path_length(&line_trajectory(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])),
            2.0
        );
    }

    #[test]
    fn metrics_examples() {
        // straight-line success: SR = SPL = 1
        let gt = line_trajectory(&[(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)]);
        let report = compute_metrics(&[(gt.clone(), gt.clone())]).unwrap();
        assert_eq!(report.sr, 1.0);
        assert_eq!(report.spl, 1.0);
        assert_abs_diff_eq!(report.gp, 100.0, epsilon = 1e-9);

        // failure zeroes SR and SPL regardless of path
        let wander = line_trajectory(&[(0.0, 0.0), (0.0, 80.0), (0.0, 160.0)]);
        let report = compute_metrics(&[(wander, gt.clone())]).unwrap();
        assert_eq!(report.sr, 0.0);
        assert_eq!(report.spl, 0.0);

        // detour halves SPL: path 200 vs shortest 100
        let detour = line_trajectory(&[(0.0, 0.0), (0.0, 50.0), (100.0, 50.0), (100.0, 0.0)]);
        let report = compute_metrics(&[(detour, gt)]).unwrap();
        assert_eq!(report.sr, 1.0);
        assert_abs_diff_eq!(report.spl, 0.5, epsilon = 1e-9);

        assert!(compute_metrics(&[]).is_err());
    }

    #[test]
    fn metrics_permutation_invariant() {
        let gt1 = line_trajectory(&[(0.0, 0.0), (100.0, 0.0)]);
        let gt2 = line_trajectory(&[(0.0, 0.0), (0.0, 60.0)]);
        let bad = line_trajectory(&[(0.0, 0.0), (-200.0, 0.0)]);
        let fwd = compute_metrics(&[(gt1.clone(), gt1.clone()), (bad.clone(), gt2.clone())]).unwrap();
        let rev = compute_metrics(&[(bad, gt2), (gt1.clone(), gt1)]).unwrap();
        assert_eq!(fwd, rev);
    }

    proptest::proptest! {
        #[test]
        fn distance_matrix_triangle_inequality(
            pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0, 1.0f64..80.0), 3..8)
        ) {
            let positions: Vec<Position> =
                pts.iter().map(|&(x, y, z)| Position::new(x, y, z).unwrap()).collect();
            let e = pairwise_distance_matrix(&positions).unwrap();
            let n = positions.len();
            for i in 0..n {
                proptest::prop_assert_eq!(e[[i, i]], 0.0);
                for j in 0..n {
                    proptest::prop_assert_eq!(e[[i, j]], e[[j, i]]);
                    for k in 0..n {
                        proptest::prop_assert!(e[[i, k]] <= e[[i, j]] + e[[j, k]] + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn spl_never_exceeds_sr(
            episodes in proptest::collection::vec(
                ((0.0f64..200.0, 0.0f64..200.0), (0.0f64..200.0, 0.0f64..200.0)), 1..6)
        ) {
            let pairs: Vec<(Trajectory, Trajectory)> = episodes
                .iter()
                .map(|&(end, goal)| {
                    let predicted = line_trajectory(&[(0.0, 0.0), end]);
                    let truth = line_trajectory(&[(0.0, 0.0), goal]);
                    (predicted, truth)
                })
                .collect();
            let report = compute_metrics(&pairs).unwrap();
            proptest::prop_assert!(report.spl <= report.sr + 1e-12);
            proptest::prop_assert!((0.0..=1.0).contains(&report.sr));
            proptest::prop_assert!((0.0..=1.0).contains(&report.spl));
        }
    }
}
