//! Truncated SVD of a document-term matrix, with projection into and out of
//! the spanned eigenspace.
//!
//! The main route is a randomized range finder with block power iteration.
//! A dense one-sided Jacobi SVD is also provided for small matrices.

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::textprep::DocTermMatrix;

/// Extra sketch columns beyond the target rank.
pub const OVERSAMPLING: usize = 10;
/// Power iterations applied to the sketch.
pub const POWER_ITERATIONS: usize = 7;
/// Matrices with both dimensions below this use the dense route under [`SvdMethod::Auto`].
pub const DENSE_LIMIT: usize = 500;

const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SvdMethod {
    Randomized,
    Dense,
    /// Dense below [`DENSE_LIMIT`] in both dimensions, randomized otherwise.
    #[default]
    Auto,
}

/// Rank-`p` right singular basis of a documents × terms matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `n_terms × p`, orthonormal columns.
    pub right_vectors: Array2<f64>,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n_terms(&self) -> usize {
        self.right_vectors.nrows()
    }
}

/// Thin SVD `A = U diag(s) Vᵀ` with `r = min(m, n)` triplets, sorted by
/// nonincreasing singular value.
#[derive(Debug, Clone)]
pub struct DenseSvd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(a: ArrayView2<f64>) -> DenseSvd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(a.t());
        return DenseSvd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.dim();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| (a + x * x, b + y * y, g + x * y));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut u = Array2::zeros((m, n));
    let mut v = Array2::zeros((n, n));
    let mut s = Array1::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        if norms[src] > 0.0 {
            for i in 0..m {
                u[[i, dst]] = cols[src][i] / norms[src];
            }
        }
        for i in 0..n {
            v[[i, dst]] = vcols[src][i];
        }
    }
    DenseSvd { u, s, v }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Orthonormal basis (thin `Q`) of the columns of an `m × k` matrix, `m ≥ k`,
/// via Householder reflections. Rank-deficient inputs still yield orthonormal
/// columns.
pub fn orthonormalize(a: ArrayView2<f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    assert!(m >= k, "orthonormalize needs at least as many rows as columns");
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j).to_vec()).collect();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
    for j in 0..k {
        let norm = cols[j][j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let mut v = cols[j][j..].to_vec();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        for col in cols.iter_mut().skip(j) {
            apply_reflector(&v, &mut col[j..]);
        }
        reflectors.push(Some(v));
    }
    let mut q = Array2::zeros((m, k));
    for j in 0..k {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        for (r, v) in reflectors.iter().enumerate().rev() {
            if let Some(v) = v {
                apply_reflector(v, &mut e[r..]);
            }
        }
        for i in 0..m {
            q[[i, j]] = e[i];
        }
    }
    q
}

fn apply_reflector(v: &[f64], x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= 2.0 * dot * vi;
    }
}

/// Flips each column so its largest-magnitude entry is nonnegative.
fn normalize_signs(v: &mut Array2<f64>) {
    for mut col in v.columns_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

fn check_rank(d: &DocTermMatrix, p: usize) -> Result<()> {
    let max = d.n_docs().min(d.n_terms());
    if p == 0 || p > max {
        return Err(Error::RankTooLarge { rank: p, max });
    }
    Ok(())
}

fn truncate(v: ArrayView2<f64>, s: &[f64], p: usize) -> TruncatedSvd {
    let mut right_vectors = v.slice(ndarray::s![.., ..p]).to_owned();
    normalize_signs(&mut right_vectors);
    TruncatedSvd {
        right_vectors,
        singular_values: s[..p].to_vec(),
    }
}

/// Top-`p` right singular vectors by randomized block power iteration
/// ([`OVERSAMPLING`] extra columns, [`POWER_ITERATIONS`] passes, Gaussian
/// sketch seeded by `seed`).
pub fn truncated_svd(d: &DocTermMatrix, p: usize, seed: u64) -> Result<TruncatedSvd> {
    check_rank(d, p)?;
    let width = (p + OVERSAMPLING).min(d.n_docs().min(d.n_terms()));
    let mut rng = rng_from_seed(seed);
    let omega = Array2::from_shape_simple_fn((d.n_terms(), width), || StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(d.mul_dense(omega.view())?.view());
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormalize(d.transpose_mul_dense(q.view())?.view());
        q = orthonormalize(d.mul_dense(z.view())?.view());
    }
    // Bᵀ = Dᵀ Q; the left singular vectors of Bᵀ are the right singular vectors of D.
    let bt = d.transpose_mul_dense(q.view())?;
    let small = jacobi_svd(bt.view());
    Ok(truncate(small.u.view(), small.s.as_slice().expect("contiguous"), p))
}

/// Top-`p` right singular vectors from a full dense Jacobi SVD.
pub fn truncated_svd_dense(d: &DocTermMatrix, p: usize) -> Result<TruncatedSvd> {
    check_rank(d, p)?;
    let full = jacobi_svd(d.to_dense().view());
    Ok(truncate(full.v.view(), full.s.as_slice().expect("contiguous"), p))
}

pub fn truncated_svd_with(d: &DocTermMatrix, p: usize, seed: u64, method: SvdMethod) -> Result<TruncatedSvd> {
    let dense = match method {
        SvdMethod::Dense => true,
        SvdMethod::Randomized => false,
        SvdMethod::Auto => d.n_docs() < DENSE_LIMIT && d.n_terms() < DENSE_LIMIT,
    };
    if dense {
        truncated_svd_dense(d, p)
    } else {
        truncated_svd(d, p, seed)
    }
}

/// Document coordinates in the eigenspace, `D · V_p` (`n_docs × p`).
pub fn project(d: &DocTermMatrix, svd: &TruncatedSvd) -> Result<Array2<f64>> {
    if d.n_terms() != svd.n_terms() {
        return Err(Error::DimensionMismatch {
            context: "projection term count",
            expected: svd.n_terms(),
            found: d.n_terms(),
        });
    }
    d.mul_dense(svd.right_vectors.view())
}

/// Maps eigenspace points back to term space, `C · V_pᵀ` (`c × n_terms`).
pub fn back_project(points: ArrayView2<f64>, svd: &TruncatedSvd) -> Result<Array2<f64>> {
    if points.ncols() != svd.rank() {
        return Err(Error::DimensionMismatch {
            context: "back-projection rank",
            expected: svd.rank(),
            found: points.ncols(),
        });
    }
    Ok(points.dot(&svd.right_vectors.t()))
}
