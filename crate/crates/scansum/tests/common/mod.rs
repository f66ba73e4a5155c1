//! Independent oracles for the acceptance suite. Everything here is a
//! deliberately plain re-statement of the definitions — brute-force loops
//! and textbook quadrature — kept separate from the implementation paths
//! it checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Literal transcription of the greedy diverse-selection loop: take the
/// best unmasked frame while it clears the floor, mask everything more
/// similar than `tau`, repeat. Returns (index, score) pairs in index
/// order.
pub fn reference_diverse_loop(
    scores: &[f64],
    sim: &[Vec<f64>],
    tau: f64,
    tau_prime: f64,
) -> Vec<(usize, f64)> {
    let t = scores.len();
    let mut masked = vec![false; t];
    let mut picked: Vec<(usize, f64)> = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..t {
            if masked[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if scores[i] > scores[b] => Some(i),
                keep => keep,
            };
        }
        let Some(b) = best else { break };
        if scores[b] < tau_prime {
            break;
        }
        picked.push((b, scores[b]));
        for j in 0..t {
            if !masked[j] && sim[b][j] > tau {
                masked[j] = true;
            }
        }
        masked[b] = true;
    }
    picked.sort_by_key(|(i, _)| *i);
    picked
}

/// Exhaustive double-loop restatement of the four detection metrics.
pub struct MetricsOracle {
    pub cosine_simi_pct: f64,
    pub absolute_time_err_s: f64,
    pub correct_time_err_s: f64,
    pub all_matched: bool,
    pub keyframe_num_err: usize,
}

pub fn reference_detection_metrics(
    pred: &[usize],
    gt: &[usize],
    sim: &[Vec<f64>],
    fps: f64,
    sim_threshold: f64,
) -> MetricsOracle {
    let mut sim_sum = 0.0;
    let mut time_sum = 0.0;
    let mut correct_sum = 0.0;
    let mut correct_n = 0usize;
    for &g in gt {
        let mut best_sim = f64::NEG_INFINITY;
        let mut best_dt = f64::INFINITY;
        for &p in pred {
            if sim[g][p] > best_sim {
                best_sim = sim[g][p];
            }
            let dt = g.abs_diff(p) as f64 / fps;
            if dt < best_dt {
                best_dt = dt;
            }
        }
        sim_sum += best_sim;
        time_sum += best_dt;
        if best_sim < sim_threshold {
            correct_sum += best_dt;
            correct_n += 1;
        }
    }
    let n = gt.len() as f64;
    MetricsOracle {
        cosine_simi_pct: sim_sum / n * 100.0,
        absolute_time_err_s: time_sum / n,
        correct_time_err_s: if correct_n == 0 {
            0.0
        } else {
            correct_sum / correct_n as f64
        },
        all_matched: correct_n == 0,
        keyframe_num_err: pred.len().abs_diff(gt.len()),
    }
}

/// Exact ellipse perimeter 4a integral(0..pi/2) sqrt(1 - e^2 sin^2 t) dt
/// by adaptive Simpson quadrature.
pub fn exact_ellipse_perimeter(a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    let e2 = 1.0 - (b / a) * (b / a);
    let f = |t: f64| (1.0 - e2 * t.sin() * t.sin()).sqrt();
    4.0 * a * adaptive_simpson(&f, 0.0, std::f64::consts::FRAC_PI_2, 1e-13, 40)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    let m = (a + b) / 2.0;
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

/// Minimum-area rectangle by scanning every hull-edge orientation with a
/// full projection pass (the O(h^2) restatement).
pub fn brute_min_rect_area(points: &[(f64, f64)]) -> f64 {
    let hull = scansum::biometry::convex_hull(points);
    if hull.len() <= 2 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..hull.len() {
        let p = hull[i];
        let q = hull[(i + 1) % hull.len()];
        let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        let u = ((q.0 - p.0) / len, (q.1 - p.1) / len);
        let v = (-u.1, u.0);
        let mut umin = f64::INFINITY;
        let mut umax = f64::NEG_INFINITY;
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for &h in &hull {
            let du = u.0 * h.0 + u.1 * h.1;
            let dv = v.0 * h.0 + v.1 * h.1;
            umin = umin.min(du);
            umax = umax.max(du);
            vmin = vmin.min(dv);
            vmax = vmax.max(dv);
        }
        best = best.min((umax - umin) * (vmax - vmin));
    }
    best
}

/// Memoized recursive LCS length.
pub fn lcs_memo(a: &[String], b: &[String]) -> usize {
    fn go(
        a: &[String],
        b: &[String],
        i: usize,
        j: usize,
        memo: &mut std::collections::HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == 0 || j == 0 {
            return 0;
        }
        if let Some(v) = memo.get(&(i, j)) {
            return *v;
        }
        let v = if a[i - 1] == b[j - 1] {
            go(a, b, i - 1, j - 1, memo) + 1
        } else {
            go(a, b, i - 1, j, memo).max(go(a, b, i, j - 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, a.len(), b.len(), &mut std::collections::HashMap::new())
}

/// Dynamic-programming LCS, restated here so the ROUGE fuzz does not
/// depend on library internals.
pub fn lcs_dp(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

/// Random symmetric similarity matrix with unit diagonal, as nested rows.
#[allow(clippy::needless_range_loop)] // symmetric (i, j) fill
pub fn random_similarity(rng: &mut ChaCha12Rng, t: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0f64; t]; t];
    for i in 0..t {
        m[i][i] = 1.0;
        for j in (i + 1)..t {
            let v: f64 = rng.gen_range(0.0..1.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Random strictly-increasing nonempty subset of 0..t.
pub fn random_index_set(rng: &mut ChaCha12Rng, t: usize, max_len: usize) -> Vec<usize> {
    let len = rng.gen_range(1..=max_len.min(t));
    let mut set = std::collections::BTreeSet::new();
    while set.len() < len {
        set.insert(rng.gen_range(0..t));
    }
    set.into_iter().collect()
}

pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 1e-300 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit_vector(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Frame at a chosen cosine from a centroid, along a fresh orthogonal
/// direction.
fn at_cosine(rng: &mut ChaCha12Rng, centroid: &[f64], target: f64) -> Vec<f64> {
    let ortho = loop {
        let w = unit_vector(rng, centroid.len());
        let proj = dot(&w, centroid);
        let v: Vec<f64> = w.iter().zip(centroid).map(|(wi, ci)| wi - proj * ci).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            break v.iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let angle = target.clamp(0.0, 1.0).acos();
    centroid
        .iter()
        .zip(&ortho)
        .map(|(c, o)| angle.cos() * c + angle.sin() * o)
        .collect()
}

/// Fixed exam for the threshold-monotonicity sweep: six cluster keyframes,
/// members whose centroid cosines span the tau grid, transit frames whose
/// scores span the tau' grid, and dissimilar noise. Returns the embedding
/// matrix plus the keyframe prototypes.
pub fn monotonicity_exam(
    seed: u64,
    dim: usize,
) -> (scansum::EmbeddingMatrix, Vec<Vec<f32>>) {
    let mut rng = seeded(seed);
    let clusters = 6;
    let centroids: Vec<Vec<f64>> = {
        let mut out: Vec<Vec<f64>> = Vec::new();
        while out.len() < clusters {
            let c = unit_vector(&mut rng, dim);
            if out.iter().all(|m| dot(m, &c) < 0.25) {
                out.push(c);
            }
        }
        out
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for c in &centroids {
        rows.push(c.clone());
        for k in 0..12 {
            let target = 0.905 + 0.09 * (k as f64 / 11.0); // 0.905..0.995
            rows.push(at_cosine(&mut rng, c, target));
        }
    }
    for k in 0..60 {
        let centroid = &centroids[k % clusters];
        let target = 0.45 + 0.45 * (k as f64 / 59.0); // 0.45..0.90
        rows.push(at_cosine(&mut rng, centroid, target));
    }
    for _ in 0..62 {
        let v = loop {
            let v = unit_vector(&mut rng, dim);
            if centroids.iter().all(|m| dot(m, &v) < 0.25) {
                break v;
            }
        };
        rows.push(v);
    }
    let t = rows.len();
    let values: Vec<f32> = rows.iter().flatten().map(|v| *v as f32).collect();
    let embeddings = scansum::EmbeddingMatrix::new("detector".into(), t, dim, values).unwrap();
    let prototypes: Vec<Vec<f32>> = centroids
        .iter()
        .map(|c| c.iter().map(|v| *v as f32).collect())
        .collect();
    (embeddings, prototypes)
}
