//! Minimum-area enclosing rectangle via monotone-chain convex hull and
//! rotating calipers. One side of the optimal rectangle is collinear with
//! a hull edge, so the caliper sweep over hull edges is exhaustive.

use serde::{Deserialize, Serialize};

/// Minimum enclosing rectangle. Corners are in rotation order; degenerate
/// inputs (single point, collinear points) yield a zero-width rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectParams {
    pub corners: [(f64, f64); 4],
    pub long_side: f64,
    pub short_side: f64,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull in counter-clockwise order (monotone chain); collinear
/// boundary points are dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * n);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn dot(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

/// Minimum-AREA enclosing rectangle of a point set.
pub fn fit_min_rect(points: &[(f64, f64)]) -> RectParams {
    assert!(!points.is_empty(), "fit_min_rect needs at least one point");
    let hull = convex_hull(points);
    if hull.len() == 1 {
        let p = hull[0];
        return RectParams {
            corners: [p, p, p, p],
            long_side: 0.0,
            short_side: 0.0,
        };
    }
    if hull.len() == 2 {
        let (p0, p1) = (hull[0], hull[1]);
        let len = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
        return RectParams {
            corners: [p0, p1, p1, p0],
            long_side: len,
            short_side: 0.0,
        };
    }

    let h = hull.len();
    // caliper support indices: max along edge dir, max along normal,
    // min along edge dir; each advances monotonically around the hull
    let mut jmax = 0usize;
    let mut k = 0usize;
    let mut jmin = 0usize;
    let mut best: Option<(f64, usize, usize, usize, usize)> = None;
    for i in 0..h {
        let p = hull[i];
        let q = hull[(i + 1) % h];
        let elen = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        let u = ((q.0 - p.0) / elen, (q.1 - p.1) / elen);
        let v = (-u.1, u.0);
        if i == 0 {
            // initialize supports with a full scan
            for t in 1..h {
                if dot(u, hull[t]) > dot(u, hull[jmax]) {
                    jmax = t;
                }
                if dot(v, hull[t]) > dot(v, hull[k]) {
                    k = t;
                }
                if dot(u, hull[t]) < dot(u, hull[jmin]) {
                    jmin = t;
                }
            }
        } else {
            while dot(u, hull[(jmax + 1) % h]) > dot(u, hull[jmax]) {
                jmax = (jmax + 1) % h;
            }
            while dot(v, hull[(k + 1) % h]) > dot(v, hull[k]) {
                k = (k + 1) % h;
            }
            while dot(u, hull[(jmin + 1) % h]) < dot(u, hull[jmin]) {
                jmin = (jmin + 1) % h;
            }
        }
        let du = dot(u, hull[jmax]) - dot(u, hull[jmin]);
        let dv = dot(v, hull[k]) - dot(v, p);
        let area = du * dv;
        if best.is_none_or(|(a, ..)| area < a) {
            best = Some((area, i, jmax, k, jmin));
        }
    }

    let (_, i, jmax, k, jmin) = best.unwrap();
    let p = hull[i];
    let q = hull[(i + 1) % h];
    let elen = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
    let u = ((q.0 - p.0) / elen, (q.1 - p.1) / elen);
    let v = (-u.1, u.0);
    let (u_min, u_max) = (dot(u, hull[jmin]), dot(u, hull[jmax]));
    let (v_min, v_max) = (dot(v, p), dot(v, hull[k]));
    let corner = |us: f64, vs: f64| (us * u.0 + vs * v.0, us * u.1 + vs * v.1);
    let corners = [
        corner(u_min, v_min),
        corner(u_max, v_min),
        corner(u_max, v_max),
        corner(u_min, v_max),
    ];
    let du = u_max - u_min;
    let dv = v_max - v_min;
    RectParams {
        corners,
        long_side: du.max(dv),
        short_side: du.min(dv),
    }
}
