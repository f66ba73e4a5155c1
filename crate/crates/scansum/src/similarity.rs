//! Cosine kernels and the frame-frame similarity matrix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

const TOL: f64 = 1e-6;

/// Symmetric T x T matrix of clamped cosine similarities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Build from raw row-major values, checking symmetry, unit diagonal
    /// and the [0, 1] range (all within 1e-6).
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::LengthMismatch {
                what: "similarity values",
                expected: size * size,
                actual: values.len(),
            });
        }
        for i in 0..size {
            let d = values[i * size + i];
            if (d - 1.0).abs() > TOL {
                return Err(Error::InvalidValue(format!(
                    "similarity diagonal at {i} is {d}, expected 1"
                )));
            }
            for j in 0..size {
                let v = values[i * size + j];
                if !v.is_finite() || !(-TOL..=1.0 + TOL).contains(&v) {
                    return Err(Error::InvalidValue(format!(
                        "similarity[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
                if (v - values[j * size + i]).abs() > TOL {
                    return Err(Error::InvalidValue(format!(
                        "similarity matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restrict the matrix to the given (strictly increasing) frame subset.
    pub fn slice(&self, keep: &[usize]) -> Result<Self> {
        for &i in keep {
            if i >= self.size {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.size,
                });
            }
        }
        let n = keep.len();
        let mut values = vec![0.0; n * n];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        Ok(Self { size: n, values })
    }
}

/// Clamped cosine similarity of two feature vectors.
///
/// Inputs are 32-bit features; the dot product and norms accumulate in f64.
/// Negative cosines map to 0 so the result stays in the [0, 1] range the
/// selection thresholds are defined on.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for k in 0..u.len() {
        let a = u[k] as f64;
        let b = v[k] as f64;
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNormInput);
    }
    let c = dot / (nu.sqrt() * nv.sqrt());
    Ok(c.clamp(0.0, 1.0))
}

/// Full frame-frame similarity matrix for one embedding channel.
pub fn similarity_matrix(e: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    let t = e.rows;
    let mut values = vec![0.0f64; t * t];
    for i in 0..t {
        for j in i..t {
            let c = cosine(e.row(i), e.row(j)).map_err(|err| match err {
                // report which row is degenerate
                Error::ZeroNormInput => {
                    let row = if e.row(i).iter().all(|x| *x == 0.0) { i } else { j };
                    Error::ZeroNormRow {
                        channel: e.channel.clone(),
                        row,
                    }
                }
                other => other,
            })?;
            values[i * t + j] = c;
            values[j * t + i] = c;
        }
    }
    Ok(SimilarityMatrix { size: t, values })
}

/// Sidecar metadata for a cached similarity matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub frames: usize,
    pub channel: String,
    pub source_sha256: String,
}

fn sidecar_path(bin_path: &Path) -> PathBuf {
    let mut s = bin_path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Cache a similarity matrix as raw little-endian f64 (row-major) plus a
/// JSON sidecar recording T and the source channel hash.
pub fn save_cache(bin_path: &Path, s: &SimilarityMatrix, meta: &CacheMeta) -> Result<()> {
    if meta.frames != s.size {
        return Err(Error::LengthMismatch {
            what: "cache meta frames",
            expected: s.size,
            actual: meta.frames,
        });
    }
    let mut bytes = Vec::with_capacity(s.values.len() * 8);
    for v in &s.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(bin_path, bytes).map_err(|source| Error::Io {
        path: bin_path.to_path_buf(),
        source,
    })?;
    crate::canonical::write_canonical_json(&sidecar_path(bin_path), meta)
}

/// Load a cached similarity matrix, re-validating its invariants.
pub fn load_cache(bin_path: &Path) -> Result<(SimilarityMatrix, CacheMeta)> {
    let sc = sidecar_path(bin_path);
    let text = std::fs::read_to_string(&sc).map_err(|source| Error::Io {
        path: sc.clone(),
        source,
    })?;
    let meta: CacheMeta =
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
    let bytes = std::fs::read(bin_path).map_err(|source| Error::Io {
        path: bin_path.to_path_buf(),
        source,
    })?;
    let expected = (meta.frames * meta.frames * 8) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: bin_path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let s = SimilarityMatrix::from_values(meta.frames, values)?;
    Ok((s, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: usize, dim: usize, values: Vec<f32>) -> EmbeddingMatrix {
        EmbeddingMatrix::new("test".into(), rows, dim, values).unwrap()
    }

    #[test]
    fn cosine_identity_orthogonal_clamp() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // negative cosine clamps to zero
        assert_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_zero_norm() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormInput)
        ));
    }

    #[test]
    fn single_frame_matrix() {
        let e = matrix(1, 2, vec![3.0, 4.0]);
        let s = similarity_matrix(&e).unwrap();
        assert_eq!(s.size(), 1);
        assert!((s.get(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthonormal_rows_give_identity() {
        let e = matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let s = similarity_matrix(&e).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((s.get(i, j) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_double_loop_oracle_exhaustively() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for t in [1usize, 2, 7, 20, 50] {
            let d = 7;
            let values: Vec<f32> = (0..t * d).map(|_| (next() * 2.0 - 1.0) as f32).collect();
            let e = matrix(t, d, values);
            let s = similarity_matrix(&e).unwrap();
            for i in 0..t {
                for j in 0..t {
                    let expect = cosine(e.row(i), e.row(j)).unwrap();
                    assert!(
                        (s.get(i, j) - expect).abs() <= 1e-6,
                        "mismatch at ({i}, {j}), T={t}"
                    );
                    // upper triangle is computed directly, so it is bit-equal
                    if j >= i {
                        assert_eq!(s.get(i, j), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::TempDir::new().unwrap();
        let e = matrix(4, 3, (1..=12).map(|i| i as f32).collect());
        let s = similarity_matrix(&e).unwrap();
        let meta = CacheMeta {
            frames: 4,
            channel: "test".into(),
            source_sha256: sha256_hex(b"bytes"),
        };
        let path = dir.path().join("sim.f64");
        save_cache(&path, &s, &meta).unwrap();
        let (s2, meta2) = load_cache(&path).unwrap();
        assert_eq!(s, s2);
        assert_eq!(meta, meta2);
    }

    proptest! {
        #[test]
        fn scale_invariance(
            rows in proptest::collection::vec(
                proptest::collection::vec(-10.0f32..10.0, 4), 2..8),
            scale in 0.01f32..100.0,
        ) {
            // skip degenerate all-zero rows
            prop_assume!(rows.iter().all(|r| r.iter().any(|v| *v != 0.0)));
            let t = rows.len();
            let flat: Vec<f32> = rows.iter().flatten().copied().collect();
            let e1 = matrix(t, 4, flat.clone());
            let mut scaled = flat;
            for v in scaled[0..4].iter_mut() {
                *v *= scale;
            }
            prop_assume!(scaled[0..4].iter().any(|v| *v != 0.0 && v.is_finite()));
            prop_assume!(scaled[0..4].iter().all(|v| v.is_finite()));
            let e2 = matrix(t, 4, scaled);
            let s1 = similarity_matrix(&e1).unwrap();
            let s2 = similarity_matrix(&e2).unwrap();
            for i in 0..t {
                for j in 0..t {
                    prop_assert!((s1.get(i, j) - s2.get(i, j)).abs() <= 1e-6);
                }
            }
        }
    }
}
