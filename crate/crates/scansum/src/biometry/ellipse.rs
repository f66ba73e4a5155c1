//! Direct constrained least-squares ellipse fitting.
//!
//! Solves min ||D a||^2 subject to 4AC - B^2 = 1 using the numerically
//! stable partitioned formulation: the design matrix is split into
//! quadratic and linear halves, the problem reduces to a 3x3 eigenproblem
//! whose eigenvalues come from the characteristic cubic, and the
//! eigenvector satisfying the ellipse constraint yields the conic. Points
//! are pre-normalized (centroid shift, mean-distance scaling) for
//! conditioning; no external eigensolver is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric ellipse parameters in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    pub cx: f64,
    pub cy: f64,
    /// Semi-major axis, `semi_major >= semi_minor > 0`.
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Major-axis orientation in radians, within [0, pi).
    pub theta: f64,
}

type Mat3 = [[f64; 3]; 3];
type Vec3 = [f64; 3];

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn mat3_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for k in 0..3 {
            out[i] += a[i][k] * v[k];
        }
    }
    out
}

fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn mat3_inv(a: &Mat3) -> Option<Mat3> {
    let det = mat3_det(a);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    out[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * inv_det;
    out[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv_det;
    out[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv_det;
    out[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * inv_det;
    out[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv_det;
    out[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv_det;
    out[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * inv_det;
    out[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * inv_det;
    out[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv_det;
    Some(out)
}

/// Real roots of x^3 + p x^2 + q x + r.
fn cubic_real_roots(p: f64, q: f64, r: f64) -> Vec<f64> {
    // depressed cubic t^3 + at + b with x = t - p/3
    let a = q - p * p / 3.0;
    let b = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
    let shift = -p / 3.0;
    let disc = b * b / 4.0 + a * a * a / 27.0;
    let mut roots = Vec::new();
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-b / 2.0 + sq).cbrt();
        let v = (-b / 2.0 - sq).cbrt();
        roots.push(u + v + shift);
    } else if a.abs() < 1e-300 {
        // triple root
        roots.push((-b).cbrt() + shift);
    } else {
        // three real roots, trigonometric form
        let m = 2.0 * (-a / 3.0).sqrt();
        let arg = (3.0 * b / (a * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift);
        }
    }
    roots
}

/// Eigenvector of `m` for eigenvalue `lambda` via null-space cross
/// products, picking the most stable combination.
fn eigenvector(m: &Mat3, lambda: f64) -> Vec3 {
    let r = [
        [m[0][0] - lambda, m[0][1], m[0][2]],
        [m[1][0], m[1][1] - lambda, m[1][2]],
        [m[2][0], m[2][1], m[2][2] - lambda],
    ];
    let cross = |a: &Vec3, b: &Vec3| -> Vec3 {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let candidates = [
        cross(&r[0], &r[1]),
        cross(&r[0], &r[2]),
        cross(&r[1], &r[2]),
    ];
    let norm_sq = |v: &Vec3| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if norm_sq(c) > norm_sq(&best) {
            best = *c;
        }
    }
    let n = norm_sq(&best).sqrt();
    if n > 0.0 {
        [best[0] / n, best[1] / n, best[2] / n]
    } else {
        best
    }
}

fn collinear(points: &[(f64, f64)]) -> bool {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // smallest eigenvalue of the 2x2 covariance, relative to the largest
    let tr = sxx + syy;
    if tr == 0.0 {
        return true;
    }
    let disc = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let lmin = (tr - disc) / 2.0;
    let lmax = (tr + disc) / 2.0;
    lmin <= 1e-10 * lmax
}

/// Fit an ellipse to at least 6 non-collinear points.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseParams> {
    if points.len() < 6 {
        return Err(Error::DegenerateInput(format!(
            "ellipse fit needs at least 6 points, got {}",
            points.len()
        )));
    }
    if collinear(points) {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }

    // normalize: centroid shift, scale mean distance to sqrt(2)
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - mx).powi(2) + (p.1 - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let scale = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };

    // scatter blocks: d1 = [x^2, xy, y^2], d2 = [x, y, 1]
    let mut s1 = [[0.0f64; 3]; 3];
    let mut s2 = [[0.0f64; 3]; 3];
    let mut s3 = [[0.0f64; 3]; 3];
    for &(px, py) in points {
        let x = (px - mx) * scale;
        let y = (py - my) * scale;
        let d1 = [x * x, x * y, y * y];
        let d2 = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                s1[i][j] += d1[i] * d1[j];
                s2[i][j] += d1[i] * d2[j];
                s3[i][j] += d2[i] * d2[j];
            }
        }
    }

    let s3_inv = mat3_inv(&s3)
        .ok_or_else(|| Error::DegenerateInput("singular linear scatter block".into()))?;
    // t = -S3^-1 S2^T
    let mut s2t = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s2t[i][j] = s2[j][i];
        }
    }
    let mut t_mat = mat3_mul(&s3_inv, &s2t);
    for row in t_mat.iter_mut() {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
    let m0 = {
        let s2t_ = mat3_mul(&s2, &t_mat);
        let mut out = s1;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += s2t_[i][j];
            }
        }
        out
    };
    // premultiply by C1^-1 for constraint matrix C1 = [[0,0,2],[0,-1,0],[2,0,0]]
    let m = [
        [m0[2][0] / 2.0, m0[2][1] / 2.0, m0[2][2] / 2.0],
        [-m0[1][0], -m0[1][1], -m0[1][2]],
        [m0[0][0] / 2.0, m0[0][1] / 2.0, m0[0][2] / 2.0],
    ];

    // characteristic cubic: lambda^3 + p lambda^2 + q lambda + r
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2]
        - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = mat3_det(&m);
    let eigenvalues = cubic_real_roots(-tr, minors, -det);

    // the admissible solution satisfies 4AC - B^2 > 0
    let mut best: Option<(f64, Vec3)> = None;
    for lambda in eigenvalues {
        let v = eigenvector(&m, lambda);
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 && best.is_none_or(|(c, _)| cond > c) {
            best = Some((cond, v));
        }
    }
    let (_, a1) = best.ok_or(Error::NoEllipseSolution)?;
    let a2 = mat3_vec(&t_mat, &a1);

    // denormalize the conic back to pixel coordinates
    let (a_, b_, c_, d_, e_, f_) = (a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]);
    let s2_ = scale * scale;
    let a = a_ * s2_;
    let b = b_ * s2_;
    let c = c_ * s2_;
    let d = -2.0 * a_ * s2_ * mx - b_ * s2_ * my + d_ * scale;
    let e = -b_ * s2_ * mx - 2.0 * c_ * s2_ * my + e_ * scale;
    let f = a_ * s2_ * mx * mx + b_ * s2_ * mx * my + c_ * s2_ * my * my
        - d_ * scale * mx
        - e_ * scale * my
        + f_;

    conic_to_ellipse([a, b, c, d, e, f]).ok_or(Error::NoEllipseSolution)
}

/// Convert conic coefficients [A, B, C, D, E, F] of
/// Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0 to geometric form.
fn conic_to_ellipse(mut k: [f64; 6]) -> Option<EllipseParams> {
    // orient so the quadratic form is positive definite
    if k[0] + k[2] < 0.0 {
        for v in k.iter_mut() {
            *v = -*v;
        }
    }
    let [a, b, c, d, e, f] = k;
    let det_q = 4.0 * a * c - b * b;
    if det_q <= 0.0 {
        return None;
    }
    let cx = (b * e - 2.0 * c * d) / det_q;
    let cy = (b * d - 2.0 * a * e) / det_q;
    // conic value at the center; the centered equation is
    // A u^2 + B uv + C v^2 = -f0
    let f0 = a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f;
    if f0 >= 0.0 {
        return None;
    }
    // eigen-decomposition of [[A, B/2], [B/2, C]]
    let tr = a + c;
    let disc = ((a - c) * (a - c) + b * b).sqrt();
    let l1 = (tr - disc) / 2.0; // smaller -> major axis
    let l2 = (tr + disc) / 2.0;
    if l1 <= 0.0 {
        return None;
    }
    let semi_major = (-f0 / l1).sqrt();
    let semi_minor = (-f0 / l2).sqrt();
    let theta = if disc < 1e-12 * tr.abs() {
        0.0 // circle: orientation is arbitrary
    } else {
        // eigenvector for l1; choose the better-conditioned expression
        let (vx, vy) = if (l1 - c).abs() > (l1 - a).abs() {
            (l1 - c, b / 2.0)
        } else {
            (b / 2.0, l1 - a)
        };
        let mut t = vy.atan2(vx);
        if t < 0.0 {
            t += std::f64::consts::PI;
        }
        if t >= std::f64::consts::PI {
            t -= std::f64::consts::PI;
        }
        t
    };
    Some(EllipseParams {
        cx,
        cy,
        semi_major,
        semi_minor,
        theta,
    })
}

/// Ramanujan's second perimeter approximation,
/// pi (a+b) (1 + 3h / (10 + sqrt(4 - 3h))) with h = ((a-b)/(a+b))^2.
pub fn ellipse_perimeter(e: &EllipseParams) -> f64 {
    let (a, b) = (e.semi_major, e.semi_minor);
    let h = ((a - b) / (a + b)).powi(2);
    std::f64::consts::PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
}

/// Points of the parametric ellipse, useful for tests and synthesis.
pub fn sample_ellipse(e: &EllipseParams, n: usize) -> Vec<(f64, f64)> {
    let (ct, st) = (e.theta.cos(), e.theta.sin());
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (x, y) = (e.semi_major * t.cos(), e.semi_minor * t.sin());
            (e.cx + x * ct - y * st, e.cy + x * st + y * ct)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_recovered() {
        let truth = EllipseParams {
            cx: 0.0,
            cy: 0.0,
            semi_major: 10.0,
            semi_minor: 10.0,
            theta: 0.0,
        };
        let pts = sample_ellipse(&truth, 8);
        let fit = fit_ellipse(&pts).unwrap();
        assert_relative_eq!(fit.cx, 0.0, epsilon = 1e-6);
        assert_relative_eq!(fit.cy, 0.0, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_major, 10.0, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_minor, 10.0, epsilon = 1e-6);
    }

    #[test]
    fn exact_parametric_points_recovered() {
        let truth = EllipseParams {
            cx: 100.0,
            cy: 80.0,
            semi_major: 50.0,
            semi_minor: 30.0,
            theta: 0.3,
        };
        let pts = sample_ellipse(&truth, 60);
        let fit = fit_ellipse(&pts).unwrap();
        assert_relative_eq!(fit.cx, truth.cx, max_relative = 1e-4);
        assert_relative_eq!(fit.cy, truth.cy, max_relative = 1e-4);
        assert_relative_eq!(fit.semi_major, truth.semi_major, max_relative = 1e-4);
        assert_relative_eq!(fit.semi_minor, truth.semi_minor, max_relative = 1e-4);
        assert_relative_eq!(fit.theta, truth.theta, max_relative = 1e-4);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![(0.0, 0.0), (1.0, 2.0), (3.0, 1.0), (4.0, 4.0), (5.0, 0.0)];
        assert!(matches!(
            fit_ellipse(&pts),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!(matches!(
            fit_ellipse(&pts),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn identical_points_rejected() {
        let pts = vec![(3.0, 4.0); 10];
        assert!(matches!(
            fit_ellipse(&pts),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn perimeter_circle_exact() {
        let e = EllipseParams {
            cx: 0.0,
            cy: 0.0,
            semi_major: 7.0,
            semi_minor: 7.0,
            theta: 0.0,
        };
        assert_relative_eq!(
            ellipse_perimeter(&e),
            2.0 * std::f64::consts::PI * 7.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn perimeter_degenerate_limit() {
        // a=1, b -> 0 approaches 4a
        let e = EllipseParams {
            cx: 0.0,
            cy: 0.0,
            semi_major: 1.0,
            semi_minor: 1e-6,
            theta: 0.0,
        };
        let p = ellipse_perimeter(&e);
        assert!((p - 4.0).abs() / 4.0 < 0.005, "perimeter {p}");
    }

    #[test]
    fn fit_invariant_under_rigid_motion() {
        let truth = EllipseParams {
            cx: 0.0,
            cy: 0.0,
            semi_major: 40.0,
            semi_minor: 22.0,
            theta: 0.7,
        };
        let pts = sample_ellipse(&truth, 50);
        let base = fit_ellipse(&pts).unwrap();
        let (rot, dx, dy) = (0.4f64, 31.0, -12.5);
        let moved: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(x, y)| {
                (
                    x * rot.cos() - y * rot.sin() + dx,
                    x * rot.sin() + y * rot.cos() + dy,
                )
            })
            .collect();
        let fit = fit_ellipse(&moved).unwrap();
        assert_relative_eq!(fit.semi_major, base.semi_major, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_minor, base.semi_minor, epsilon = 1e-6);
        let expected_theta = (base.theta + rot).rem_euclid(std::f64::consts::PI);
        let dtheta = (fit.theta - expected_theta).abs();
        let dtheta = dtheta.min((dtheta - std::f64::consts::PI).abs());
        assert!(dtheta < 1e-6, "theta {} vs {}", fit.theta, expected_theta);
    }

    #[test]
    fn orientation_recovered_across_the_half_turn() {
        for &theta in &[0.01, 0.5, 1.0, 1.5, 1.5707, 1.5709, 2.0, 2.5, 3.0, 3.13] {
            let truth = EllipseParams {
                cx: 40.0,
                cy: -10.0,
                semi_major: 35.0,
                semi_minor: 18.0,
                theta,
            };
            let fit = fit_ellipse(&sample_ellipse(&truth, 48)).unwrap();
            assert!(
                fit.theta >= 0.0 && fit.theta < std::f64::consts::PI,
                "theta {} out of range",
                fit.theta
            );
            let mut d = (fit.theta - theta).abs();
            d = d.min((d - std::f64::consts::PI).abs());
            assert!(d < 1e-6, "theta {theta}: fitted {}", fit.theta);
            assert_relative_eq!(fit.semi_major, 35.0, epsilon = 1e-6);
            assert_relative_eq!(fit.semi_minor, 18.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn fit_order_independent() {
        let truth = EllipseParams {
            cx: 5.0,
            cy: -3.0,
            semi_major: 20.0,
            semi_minor: 9.0,
            theta: 1.2,
        };
        let pts = sample_ellipse(&truth, 40);
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.swap(0, 17);
        shuffled.swap(3, 29);
        let a = fit_ellipse(&pts).unwrap();
        let b = fit_ellipse(&shuffled).unwrap();
        assert_relative_eq!(a.semi_major, b.semi_major, epsilon = 1e-9);
        assert_relative_eq!(a.semi_minor, b.semi_minor, epsilon = 1e-9);
        assert_relative_eq!(a.cx, b.cx, epsilon = 1e-9);
    }
}
