//! Analytic and ODE reference solutions.

use crate::error::{invalid, Error, Result};
use crate::linalg::solve_dense;
use crate::mesh::Point;

/// Radius `sqrt(r0^2 - 2t)` of a circle shrinking by curvature, `None` after extinction.
pub fn circle_radius_exact(r0: f64, t: f64) -> Option<f64> {
    let s = r0 * r0 - 2.0 * t;
    let extinction = 0.5 * r0 * r0;
    if t > extinction * (1.0 + 1e-12) {
        return None;
    }
    Some(s.max(0.0).sqrt())
}

/// Extinction time `r0^2 / 2` of a shrinking circle.
pub fn extinction_time(r0: f64) -> f64 {
    0.5 * r0 * r0
}

/// Time-averaged absolute difference `(1/L) sum |fitted_l - exact_l|`.
///
/// Returns NaN for empty input.
pub fn radius_error(fitted: &[f64], exact: &[f64]) -> f64 {
    let n = fitted.len().min(exact.len());
    if n == 0 {
        return f64::NAN;
    }
    fitted.iter().zip(exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64
}

/// Radii of two same-phase circles under area-preserving curvature flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCircleSolution {
    pub times: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Time at which the smaller circle vanished, if it did.
    pub extinction: Option<f64>,
}

impl TwoCircleSolution {
    /// Radii at time `t` by linear interpolation of the integration points.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.r1[0], self.r2[0]);
        }
        if t >= self.times[n - 1] {
            return (self.r1[n - 1], self.r2[n - 1]);
        }
        let j = self.times.partition_point(|&s| s <= t).max(1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let s = (t - t0) / (t1 - t0);
        (
            self.r1[j - 1] + s * (self.r1[j] - self.r1[j - 1]),
            self.r2[j - 1] + s * (self.r2[j] - self.r2[j - 1]),
        )
    }
}

fn two_circle_rhs(r: [f64; 2]) -> [f64; 2] {
    let mean = 2.0 / (r[0] + r[1]);
    [-1.0 / r[0] + mean, -1.0 / r[1] + mean]
}

/// Integrates `r_i' = -1/r_i + 2/(r_1 + r_2)` with classic RK4 up to time `t_end`.
///
/// The step is reduced to `r_2^2 / 10` near the extinction of the smaller
/// circle; once it vanishes the larger radius is held fixed.
pub fn two_circle_ode(ra: f64, rb: f64, t_end: f64, dt: f64) -> Result<TwoCircleSolution> {
    if !(ra > 0.0 && rb > 0.0) || ra < rb {
        return Err(invalid("radii must satisfy ra >= rb > 0"));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid("time step and horizon must be positive"));
    }
    let mut t = 0.0;
    let mut r = [ra, rb];
    let mut out = TwoCircleSolution {
        times: vec![0.0],
        r1: vec![ra],
        r2: vec![rb],
        extinction: None,
    };
    let cutoff = 1e-7;
    while t < t_end {
        let mut step = dt.min(t_end - t);
        if out.extinction.is_none() {
            step = step.min(r[1] * r[1] / 10.0);
            let k1 = two_circle_rhs(r);
            let y2 = [r[0] + 0.5 * step * k1[0], r[1] + 0.5 * step * k1[1]];
            let k2 = two_circle_rhs(y2);
            let y3 = [r[0] + 0.5 * step * k2[0], r[1] + 0.5 * step * k2[1]];
            let k3 = two_circle_rhs(y3);
            let y4 = [r[0] + step * k3[0], r[1] + step * k3[1]];
            let k4 = two_circle_rhs(y4);
            for c in 0..2 {
                r[c] += step / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            t += step;
            if r[1] < cutoff || !r[1].is_finite() {
                // close the remaining gap with the conserved total area
                let total = ra * ra + rb * rb;
                r = [total.sqrt(), 0.0];
                out.extinction = Some(t);
            }
        } else {
            t += step;
        }
        out.times.push(t);
        out.r1.push(r[0]);
        out.r2.push(r[1]);
    }
    Ok(out)
}

/// Wall-attached double bubble at equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBubble {
    pub r1: f64,
    pub r2: f64,
    /// Signed radius of the common arc, `1/r12 = 1/r1 - 1/r2`; infinite when flat.
    pub r12: f64,
    /// Junction at horizontal position 0 above the wall `y = 0`.
    pub junction: Point,
    pub center1: Point,
    pub center2: Point,
    /// Center of the common arc (`None` when flat).
    pub center12: Option<Point>,
    /// Wall points where the arcs end: outer end of bubble 1, common arc, outer end of bubble 2.
    pub wall_points: [f64; 3],
}

/// Arc leaving `j` with unit tangent `t` and ending perpendicular to the wall `y = 0`.
struct WallArc {
    center: Option<Point>,
    radius: f64,
    end: Point,
    /// `(1/2) integral (x dy - y dx)` from `j` to `end`.
    green: f64,
}

fn rotate(v: Point, deg: f64) -> Point {
    let (s, c) = deg.to_radians().sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn wall_arc(j: Point, t: Point) -> WallArc {
    if t[0].abs() < 1e-13 {
        let end = [j[0], 0.0];
        return WallArc {
            center: None,
            radius: f64::INFINITY,
            end,
            green: 0.5 * cross(j, end),
        };
    }
    // the center lies on the wall and (j - c) is perpendicular to t
    let cx = j[0] + j[1] * t[1] / t[0];
    let c = [cx, 0.0];
    let radius = j[1] / t[0].abs();
    let rel = [j[0] - cx, j[1]];
    let theta = rel[1].atan2(rel[0]);
    // counterclockwise travel direction at j
    let ccw = cross(rel, t) > 0.0;
    let (end, dtheta) = if ccw {
        ([cx - radius, 0.0], std::f64::consts::PI - theta)
    } else {
        ([cx + radius, 0.0], -theta)
    };
    let chord = [end[0] - j[0], end[1] - j[1]];
    WallArc {
        center: Some(c),
        radius,
        end,
        green: 0.5 * cross(c, chord) + 0.5 * radius * radius * dtheta,
    }
}

/// Bubble areas for junction height 1 and common-arc direction `phi` (degrees).
fn bubble_shape(phi: f64) -> ([f64; 2], [WallArc; 3]) {
    let j = [0.0, 1.0];
    let t12 = [phi.to_radians().cos(), phi.to_radians().sin()];
    let t1 = rotate(t12, -120.0);
    let t2 = rotate(t12, 120.0);
    let a1 = wall_arc(j, t1);
    let a2 = wall_arc(j, t2);
    let a12 = wall_arc(j, t12);
    // bubble 1 (left): wall, common arc up to j, outer arc back to the wall
    let area1 = -a12.green + a1.green;
    // bubble 2 (right): wall, outer arc up to j, common arc back down
    let area2 = -a2.green + a12.green;
    ([area1, area2], [a1, a12, a2])
}

/// Equilibrium of two bubbles of areas `a1` (left) and `a2` (right) on the wall `y = 0`.
///
/// Arcs meet the wall at right angles, so all centers lie on the wall, and
/// the three arcs meet at 120 degrees. The direction of the common arc at the
/// junction is found by bisection on the area ratio; the junction height then
/// fixes the scale.
pub fn double_bubble_equilibrium(a1: f64, a2: f64) -> Result<DoubleBubble> {
    if !(a1 > 0.0 && a2 > 0.0) || !a1.is_finite() || !a2.is_finite() {
        return Err(invalid("bubble areas must be positive"));
    }
    let target = (a1 / a2).ln();
    let ratio = |phi: f64| {
        let (a, _) = bubble_shape(phi);
        (a[0] / a[1]).ln()
    };
    // phi = -90 is the flat common wall; tilting it toward bubble 2 enlarges bubble 1
    let (mut lo, mut hi) = (-90.0 - 59.999, -90.0 + 59.999);
    let (flo, fhi) = (ratio(lo) - target, ratio(hi) - target);
    if flo.signum() == fhi.signum() {
        return Err(Error::NumericalFailure("area ratio outside the attainable range".into()));
    }
    let increasing = fhi > flo;
    let mut phi = if a1 == a2 { -90.0 } else { 0.5 * (lo + hi) };
    if a1 != a2 {
        for _ in 0..200 {
            phi = 0.5 * (lo + hi);
            let f = ratio(phi) - target;
            if f == 0.0 {
                break;
            }
            if (f > 0.0) == increasing {
                hi = phi;
            } else {
                lo = phi;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
    }
    let (areas, arcs) = bubble_shape(phi);
    let s = (a1 / areas[0]).sqrt();
    let scale = |p: Point| [p[0] * s, p[1] * s];
    let r1 = arcs[0].radius * s;
    let r2 = arcs[2].radius * s;
    let curvature = 1.0 / r1 - 1.0 / r2;
    let r12 = if arcs[1].center.is_none() || curvature == 0.0 {
        f64::INFINITY
    } else {
        1.0 / curvature
    };
    let geometric = arcs[1].radius * s;
    if r12.is_finite() && ((r12.abs() - geometric) / geometric).abs() > 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "common arc radius {geometric} disagrees with the radii condition {r12}"
        )));
    }
    Ok(DoubleBubble {
        r1,
        r2,
        r12,
        junction: [0.0, s],
        center1: scale(arcs[0].center.unwrap_or([0.0, 0.0])),
        center2: scale(arcs[2].center.unwrap_or([0.0, 0.0])),
        center12: arcs[1].center.map(scale),
        wall_points: [arcs[0].end[0] * s, arcs[1].end[0] * s, arcs[2].end[0] * s],
    })
}

/// Boundary polygons of the two bubbles, with `n` points per arc.
pub fn double_bubble_polygons(db: &DoubleBubble, n: usize) -> [Vec<Point>; 2] {
    // every arc endpoint has polar angle in [0, pi] about its center, so
    // interpolating the angle keeps the arc above the wall
    let arc = |center: Option<Point>, from: Point, to: Point| -> Vec<Point> {
        (0..=n)
            .map(|s| {
                let f = s as f64 / n as f64;
                match center {
                    None => [from[0] + f * (to[0] - from[0]), from[1] + f * (to[1] - from[1])],
                    Some(c) => {
                        let a0 = (from[1] - c[1]).atan2(from[0] - c[0]);
                        let a1 = (to[1] - c[1]).atan2(to[0] - c[0]);
                        let r = (from[0] - c[0]).hypot(from[1] - c[1]);
                        let a = a0 + f * (a1 - a0);
                        [c[0] + r * a.cos(), c[1] + r * a.sin()]
                    }
                }
            })
            .collect()
    };
    let j = db.junction;
    let w = db.wall_points;
    let mut left = arc(db.center12, [w[1], 0.0], j);
    left.extend(arc(Some(db.center1), j, [w[0], 0.0]).into_iter().skip(1));
    let mut right = arc(Some(db.center2), [w[2], 0.0], j);
    right.extend(arc(db.center12, j, [w[1], 0.0]).into_iter().skip(1));
    [left, right]
}

/// Interface statistics of a multiphase configuration (0-based phases).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiphaseStats {
    pub k: usize,
    /// `lengths[i][j] = L_ij`, symmetric.
    pub lengths: Vec<Vec<f64>>,
    /// `curvatures[i][j]` for `i < j`: tension-weighted average curvature of
    /// the interface with normal pointing from phase `i` into phase `j`.
    pub curvatures: Vec<Vec<f64>>,
    /// `tensions[i][j]`, symmetric.
    pub tensions: Vec<Vec<f64>>,
}

impl MultiphaseStats {
    /// Unit tensions, zero lengths and curvatures.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lengths: vec![vec![0.0; k]; k],
            curvatures: vec![vec![0.0; k]; k],
            tensions: vec![vec![1.0; k]; k],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, length: f64, curvature: f64) {
        let (a, b) = (i.min(j), i.max(j));
        self.lengths[a][b] = length;
        self.lengths[b][a] = length;
        self.curvatures[a][b] = if i < j { curvature } else { -curvature };
    }

    /// `L_i = sum_j L_ij`.
    pub fn boundary_length(&self, i: usize) -> f64 {
        (0..self.k).filter(|&j| j != i).map(|j| self.lengths[i][j]).sum()
    }

    /// `sum_{j>i} L_ij k_ij - sum_{j<i} L_ij k_ji`: total curvature of the
    /// boundary of phase `i` measured with its outer normal.
    pub fn boundary_curvature(&self, i: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..self.k {
            if j > i {
                s += self.lengths[i][j] * self.curvatures[i][j];
            } else if j < i {
                s -= self.lengths[i][j] * self.curvatures[j][i];
            }
        }
        s
    }

    /// Tension-weighted average curvature of the boundary of phase `i`.
    pub fn average_curvature(&self, i: usize) -> f64 {
        let l = self.boundary_length(i);
        if l == 0.0 {
            0.0
        } else {
            self.boundary_curvature(i) / l
        }
    }
}

/// Solves `L_i l_i - sum_{j != i, j < k-1} L_ij l_j = sum_{j>i} L_ij k_ij - sum_{j<i} L_ij k_ij`
/// for the multipliers of phases `0..k-1` (the last phase's constraint is redundant).
pub fn lagrange_multipliers(stats: &MultiphaseStats) -> Result<Vec<f64>> {
    let k = stats.k;
    if k < 2 || stats.lengths.len() != k {
        return Err(invalid("statistics do not match the phase count"));
    }
    let n = k - 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        a[i][i] = stats.boundary_length(i);
        for j in 0..n {
            if j != i {
                a[i][j] = -stats.lengths[i][j];
            }
        }
        rhs[i] = stats.boundary_curvature(i);
    }
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let singular = || Error::DegenerateConfiguration("multiplier system is singular".into());
    if scale == 0.0 {
        return Err(singular());
    }
    let lambda = solve_dense(a.clone(), rhs.clone()).ok_or_else(singular)?;
    // reject numerically singular systems by their residual
    let res: f64 = (0..n)
        .map(|i| (a[i].iter().zip(&lambda).map(|(x, y)| x * y).sum::<f64>() - rhs[i]).abs())
        .fold(0.0, f64::max);
    let size = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(scale);
    if !lambda.iter().all(|v| v.is_finite()) || res > 1e-8 * size {
        return Err(singular());
    }
    Ok(lambda)
}

/// Normal velocity `-t_ij k + l_i - (1 - delta_{j,k-1}) l_j` of interface `i < j`
/// at a point of curvature `kappa`, from the multipliers.
pub fn velocity_from_multipliers(stats: &MultiphaseStats, lambda: &[f64], kappa: f64, pair: (usize, usize)) -> f64 {
    let (i, j) = (pair.0.min(pair.1), pair.0.max(pair.1));
    let lj = if j == stats.k - 1 { 0.0 } else { lambda[j] };
    -stats.tensions[i][j] * kappa + lambda[i] - lj
}

/// Closed-form three-phase normal velocity of interface `pair` at curvature `kappa`.
pub fn three_phase_velocities(stats: &MultiphaseStats, kappa: f64, pair: (usize, usize)) -> Result<f64> {
    if stats.k != 3 {
        return Err(invalid("closed forms need exactly three phases"));
    }
    let l12 = stats.lengths[0][1];
    let l13 = stats.lengths[0][2];
    let l23 = stats.lengths[1][2];
    let alpha = l13 * l23 + l23 * l12 + l13 * l12;
    if alpha == 0.0 {
        return Err(Error::DegenerateConfiguration("alpha vanishes".into()));
    }
    let ka = |i: usize| stats.average_curvature(i);
    let c1 = 1.0 - l13 * l12 / alpha;
    let c2 = 1.0 - l23 * l12 / alpha;
    let c3 = 1.0 - l13 * l23 / alpha;
    let v = match (pair.0.min(pair.1), pair.0.max(pair.1)) {
        (0, 2) => -stats.tensions[0][2] * kappa + c1 * ka(0) - c3 * ka(2),
        (1, 2) => -stats.tensions[1][2] * kappa + c2 * ka(1) - c3 * ka(2),
        (0, 1) => -stats.tensions[0][1] * kappa + c1 * ka(0) - c2 * ka(1),
        _ => return Err(invalid("pair out of range")),
    };
    Ok(v)
}
