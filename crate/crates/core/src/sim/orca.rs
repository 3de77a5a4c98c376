//! Reciprocal collision avoidance: half-plane constraints in velocity space
//! from truncated velocity-obstacle cones, and the incremental 2-D linear
//! program that selects the admissible velocity closest to the preferred
//! one, falling back to the least-violating velocity when the constraints
//! are infeasible.

use crate::math::Vec2;

const EPSILON: f64 = 1e-10;

/// Half-plane constraint on velocity space: a velocity `v` is permitted when
/// it lies on or to the left of the directed boundary line, i.e.
/// `direction x (v - point) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    pub direction: Vec2,
}

impl HalfPlane {
    pub fn permits(&self, v: Vec2) -> bool {
        self.direction.cross(v - self.point) >= 0.0
    }

    /// Signed violation depth of `v`: 0 when permitted, the perpendicular
    /// distance into the forbidden side otherwise.
    pub fn violation(&self, v: Vec2) -> f64 {
        self.direction.cross(self.point - v).max(0.0)
    }
}

/// Constraint set for one agent; obstacle constraints come first and stay
/// hard during the infeasibility fallback.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub lines: Vec<HalfPlane>,
    pub obstacle_count: usize,
}

/// View of one agent as seen by the constraint builder.
#[derive(Debug, Clone, Copy)]
pub struct AgentBody {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Half-plane induced by a neighbor: the constraint line derives from the
/// velocity-obstacle cone truncated at `time_horizon`, displaced by half of
/// the smallest relative-velocity change `u` that escapes the cone (each
/// agent takes half the responsibility). Overlapping pairs get a constraint
/// that resolves the penetration within `dt`.
///
/// When the relative velocity sits exactly on the cone axis the escape side
/// is ambiguous; the tie deflects counterclockwise so mirror-image agents
/// make complementary choices.
pub fn neighbor_halfplane(agent: &AgentBody, other: &AgentBody, time_horizon: f64, dt: f64) -> HalfPlane {
    let relative_position = other.position - agent.position;
    let relative_velocity = agent.velocity - other.velocity;
    let dist_sq = relative_position.length_squared();
    let combined_radius = agent.radius + other.radius;
    let combined_radius_sq = combined_radius * combined_radius;

    let (direction, u);
    if dist_sq > combined_radius_sq {
        // No current collision. w points from the cutoff-circle center to
        // the relative velocity.
        let inv_horizon = 1.0 / time_horizon;
        let w = relative_velocity - relative_position * inv_horizon;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(relative_position);
        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
            // Project on the cutoff circle.
            let w_len = w_len_sq.sqrt();
            let mut unit_w = w / w_len;
            // Exactly on the cone axis the projection is a pure mutual
            // slowdown and symmetric pairs crawl forever; deflect the escape
            // direction counterclockwise to break the deadlock. Mirrored
            // agents make complementary choices, preserving symmetry.
            if relative_position.cross(w).abs() <= 1e-6 * dist_sq.sqrt() * w_len {
                unit_w = (unit_w + unit_w.perp() * 0.1).normalized();
            }
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_horizon - w_len);
        } else {
            // Project on the nearer leg; ties go counterclockwise.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            let dir = if relative_position.cross(w) >= 0.0 {
                Vec2::new(
                    relative_position.x * leg - relative_position.y * combined_radius,
                    relative_position.x * combined_radius + relative_position.y * leg,
                ) / dist_sq
            } else {
                -Vec2::new(
                    relative_position.x * leg + relative_position.y * combined_radius,
                    -relative_position.x * combined_radius + relative_position.y * leg,
                ) / dist_sq
            };
            direction = dir;
            u = dir * relative_velocity.dot(dir) - relative_velocity;
        }
    } else {
        // Already overlapping: push the relative velocity out of the disk
        // that resolves penetration within one time step.
        let inv_dt = 1.0 / dt;
        let w = relative_velocity - relative_position * inv_dt;
        let w_len = w.length();
        let unit_w = if w_len > EPSILON {
            w / w_len
        } else if relative_position.length_squared() > EPSILON {
            -relative_position.normalized()
        } else {
            Vec2::new(1.0, 0.0)
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined_radius * inv_dt - w_len);
    }

    HalfPlane {
        point: agent.velocity + u * 0.5,
        direction,
    }
}

/// Half-plane induced by one static obstacle edge. The edge, inflated by the
/// agent radius, is approximated by the disk of radius `radius` around the
/// point of the segment closest to the agent; the velocity obstacle of that
/// disk is truncated at `time_horizon`. The agent takes full responsibility
/// (obstacles do not yield), so the constraint is displaced by the whole
/// escape vector `u`.
pub fn obstacle_halfplane(
    agent: &AgentBody,
    seg_a: Vec2,
    seg_b: Vec2,
    time_horizon: f64,
    dt: f64,
) -> HalfPlane {
    let closest = closest_point_on_segment(seg_a, seg_b, agent.position);
    let relative_position = closest - agent.position;
    let dist_sq = relative_position.length_squared();
    let radius = agent.radius;
    let radius_sq = radius * radius;
    let relative_velocity = agent.velocity;

    let (direction, u);
    if dist_sq > radius_sq {
        let inv_horizon = 1.0 / time_horizon;
        let w = relative_velocity - relative_position * inv_horizon;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(relative_position);
        if dot1 < 0.0 && dot1 * dot1 > radius_sq * w_len_sq {
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (radius * inv_horizon - w_len);
        } else {
            let leg = (dist_sq - radius_sq).sqrt();
            let dir = if relative_position.cross(w) >= 0.0 {
                Vec2::new(
                    relative_position.x * leg - relative_position.y * radius,
                    relative_position.x * radius + relative_position.y * leg,
                ) / dist_sq
            } else {
                -Vec2::new(
                    relative_position.x * leg + relative_position.y * radius,
                    -relative_position.x * radius + relative_position.y * leg,
                ) / dist_sq
            };
            direction = dir;
            u = dir * relative_velocity.dot(dir) - relative_velocity;
        }
    } else {
        // Agent overlaps the inflated edge: push straight out within dt.
        let inv_dt = 1.0 / dt;
        let w = relative_velocity - relative_position * inv_dt;
        let w_len = w.length();
        let unit_w = if w_len > EPSILON {
            w / w_len
        } else if dist_sq > EPSILON {
            -relative_position.normalized()
        } else {
            // Center exactly on the segment: use its left normal.
            (seg_b - seg_a).normalized().perp()
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (radius * inv_dt - w_len);
    }

    HalfPlane {
        point: agent.velocity + u,
        direction,
    }
}

pub fn closest_point_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.length_squared();
    if len_sq <= 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Velocity of minimum distance to `pref` among velocities satisfying all
/// half-planes and the speed cap. Infeasible sets fall back to the velocity
/// minimizing the maximum violation depth over the non-obstacle constraints,
/// keeping obstacle constraints hard.
pub fn solve_velocity(constraints: &ConstraintSet, pref: Vec2, max_speed: f64) -> Vec2 {
    let mut result = Vec2::ZERO;
    let fail = linear_program2(&constraints.lines, max_speed, pref, false, &mut result);
    if fail < constraints.lines.len() {
        linear_program3(
            &constraints.lines,
            constraints.obstacle_count,
            fail,
            max_speed,
            &mut result,
        );
    }
    result
}

/// Optimize along the boundary of `lines[line_no]` subject to the previous
/// lines and the speed disc. Returns false when that boundary has no
/// feasible interval.
fn linear_program1(
    lines: &[HalfPlane],
    line_no: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = &lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        // The speed disc misses this line entirely.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for prev in lines.iter().take(line_no) {
        let denominator = line.direction.cross(prev.direction);
        let numerator = prev.direction.cross(line.point - prev.point);
        if denominator.abs() <= EPSILON {
            // Parallel boundaries: reject if this line lies strictly on the
            // forbidden side of the previous one.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        // Maximize along opt_velocity (a unit direction).
        if opt_velocity.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(opt_velocity - line.point).clamp(t_left, t_right)
    };
    *result = line.point + line.direction * t;
    true
}

/// Incremental 2-D LP over the half-planes within the speed disc. Returns
/// `lines.len()` on success or the index of the first line that made the
/// program infeasible.
fn linear_program2(
    lines: &[HalfPlane],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> usize {
    *result = if direction_opt {
        opt_velocity * radius
    } else if opt_velocity.length_squared() > radius * radius {
        opt_velocity.normalized() * radius
    } else {
        opt_velocity
    };

    for i in 0..lines.len() {
        if lines[i].direction.cross(lines[i].point - *result) > 0.0 {
            let temp = *result;
            if !linear_program1(lines, i, radius, opt_velocity, direction_opt, result) {
                *result = temp;
                return i;
            }
        }
    }
    lines.len()
}

/// Infeasibility fallback: progressively minimize the maximum violation
/// depth over the agent constraints from `begin_line` on, holding the first
/// `obstacle_count` lines hard.
fn linear_program3(
    lines: &[HalfPlane],
    obstacle_count: usize,
    begin_line: usize,
    radius: f64,
    result: &mut Vec2,
) {
    let mut distance = 0.0;
    for i in begin_line..lines.len() {
        if lines[i].direction.cross(lines[i].point - *result) <= distance {
            continue;
        }
        // Project the already-processed agent lines onto line i's violation
        // geometry: each projected boundary is the locus of equal violation.
        let mut proj: Vec<HalfPlane> = lines[..obstacle_count].to_vec();
        for j in obstacle_count..i {
            let determinant = lines[i].direction.cross(lines[j].direction);
            let point = if determinant.abs() <= EPSILON {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    // Same direction: line j is redundant here.
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.cross(lines[i].point - lines[j].point) / determinant)
            };
            let direction = (lines[j].direction - lines[i].direction).normalized();
            proj.push(HalfPlane { point, direction });
        }

        let temp = *result;
        let opt_direction = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if linear_program2(&proj, radius, opt_direction, true, result) < proj.len() {
            // Numerically infeasible; keep the previous best.
            *result = temp;
        }
        distance = lines[i].direction.cross(lines[i].point - *result);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn body(pos: (f64, f64), vel: (f64, f64), radius: f64) -> AgentBody {
        AgentBody {
            position: Vec2::new(pos.0, pos.1),
            velocity: Vec2::new(vel.0, vel.1),
            radius,
        }
    }

    #[test]
    fn no_constraints_returns_pref() {
        let set = ConstraintSet::default();
        let v = solve_velocity(&set, Vec2::new(1.2, -0.4), 2.0);
        assert_eq!(v, Vec2::new(1.2, -0.4));
    }

    #[test]
    fn pref_clamped_to_max_speed() {
        let set = ConstraintSet::default();
        let v = solve_velocity(&set, Vec2::new(5.0, 0.0), 2.0);
        assert_relative_eq!(v.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.0);
    }

    #[test]
    fn projection_onto_single_constraint() {
        // v·(1,0) >= 1 as a half-plane; pref at the origin projects to (1, 0).
        let set = ConstraintSet {
            lines: vec![HalfPlane {
                point: Vec2::new(1.0, 0.0),
                direction: Vec2::new(0.0, -1.0),
            }],
            obstacle_count: 0,
        };
        let v = solve_velocity(&set, Vec2::ZERO, 2.0);
        assert_relative_eq!(v.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_opposing_pair_balances_violation() {
        // v_x >= 1 and v_x <= -1: the fallback must land on v_x = 0 where
        // both violations equal 1.
        let set = ConstraintSet {
            lines: vec![
                HalfPlane {
                    point: Vec2::new(1.0, 0.0),
                    direction: Vec2::new(0.0, -1.0),
                },
                HalfPlane {
                    point: Vec2::new(-1.0, 0.0),
                    direction: Vec2::new(0.0, 1.0),
                },
            ],
            obstacle_count: 0,
        };
        let v = solve_velocity(&set, Vec2::ZERO, 2.0);
        assert_relative_eq!(v.x, 0.0, epsilon = 1e-9);
        let worst = set.lines.iter().map(|l| l.violation(v)).fold(0.0, f64::max);
        assert_relative_eq!(worst, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn distant_static_pair_permits_zero_velocity() {
        // Two static agents 10 m apart with radii 0.3 and a 2 s horizon:
        // the zero relative velocity lies outside the truncated cone, so
        // staying put must be permitted.
        let a = body((0.0, 0.0), (0.0, 0.0), 0.3);
        let b = body((10.0, 0.0), (0.0, 0.0), 0.3);
        let hp = neighbor_halfplane(&a, &b, 2.0, 0.1);
        assert!(hp.permits(Vec2::ZERO), "zero velocity forbidden: {hp:?}");
    }

    #[test]
    fn overlapping_pair_pushes_apart() {
        // Overlapping agents: every velocity that deepens the penetration
        // must be forbidden; the allowed side must reduce it within dt.
        let a = body((0.0, 0.0), (0.0, 0.0), 0.3);
        let b = body((0.4, 0.0), (0.0, 0.0), 0.3);
        let dt = 0.1;
        let hp = neighbor_halfplane(&a, &b, 2.0, dt);

        // Brute-force velocity samples: compare the half-plane's verdict
        // with the penetration depth after one step (b symmetric).
        for i in -20..=20 {
            for j in -20..=20 {
                let v = Vec2::new(i as f64 * 0.1, j as f64 * 0.1);
                let hp_b = neighbor_halfplane(&b, &a, 2.0, dt);
                // Mirror velocity for b per reciprocity.
                let vb = -v;
                let pa = a.position + v * dt;
                let pb = b.position + vb * dt;
                let each_permit = hp.permits(v) && hp_b.permits(vb);
                if each_permit {
                    let dist = pa.distance(pb);
                    assert!(
                        dist >= 0.4 - 1e-9,
                        "permitted velocity {v:?} deepened penetration: {dist}"
                    );
                }
            }
        }
    }

    #[test]
    fn head_on_symmetry_mirrors() {
        // A at origin moving east, B ahead moving west. The pair's half
        // planes must be central mirrors of each other (rotation by π).
        let a = body((0.0, 0.0), (1.4, 0.0), 0.3);
        let b = body((5.0, 0.0), (-1.4, 0.0), 0.3);
        let ha = neighbor_halfplane(&a, &b, 2.0, 0.1);
        let hb = neighbor_halfplane(&b, &a, 2.0, 0.1);
        assert_relative_eq!(ha.point.x, -hb.point.x, epsilon = 1e-12);
        assert_relative_eq!(ha.point.y, -hb.point.y, epsilon = 1e-12);
        assert_relative_eq!(ha.direction.x, -hb.direction.x, epsilon = 1e-12);
        assert_relative_eq!(ha.direction.y, -hb.direction.y, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_constraint_blocks_approach() {
        // Wall segment ahead; moving straight at it within the horizon must
        // be forbidden, moving away permitted.
        let a = body((0.0, 0.0), (1.0, 0.0), 0.3);
        let hp = obstacle_halfplane(&a, Vec2::new(1.0, -5.0), Vec2::new(1.0, 5.0), 2.0, 0.1);
        assert!(!hp.permits(Vec2::new(1.0, 0.0)));
        assert!(hp.permits(Vec2::new(-1.0, 0.0)));
    }

    #[test]
    fn solve_respects_speed_cap() {
        let set = ConstraintSet {
            lines: vec![HalfPlane {
                point: Vec2::new(1.8, 0.0),
                direction: Vec2::new(0.0, -1.0),
            }],
            obstacle_count: 0,
        };
        for pref in [Vec2::ZERO, Vec2::new(3.0, 3.0), Vec2::new(-1.0, 0.5)] {
            let v = solve_velocity(&set, pref, 2.0);
            assert!(v.length() <= 2.0 + 1e-9);
        }
    }
}
