//! Reference implementations used as test oracles. Each one takes a
//! different route from the library code it checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = normal_matrix(rng, n, n).qr();
    let (q, r) = qr.unpack();
    let signs = DMatrix::from_diagonal(&r.diagonal().map(|d| if d < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

/// Columns orthonormal, shape `rows × cols`, `cols <= rows`.
pub fn random_semi_unitary(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    random_orthogonal(rng, rows).columns(0, cols).into_owned()
}

fn soft(v: &[f64], t: f64) -> Vec<f64> {
    v.iter()
        .map(|x| x.signum() * (x.abs() - t).max(0.0))
        .collect()
}

/// ℓ1-ball projection through its dual: bisection on the multiplier `τ` of
/// the constraint until the soft-thresholded point has ℓ1 norm `radius`.
pub fn l1_projection_dual(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = soft(v, mid).iter().map(|x| x.abs()).sum();
        if mass > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    soft(v, 0.5 * (lo + hi))
}

/// ℓ1-ball projection as a QP solved by projected gradient on the split
/// `x = p − n`, `p, n ≥ 0`, `Σ(p + n) ≤ r`; the feasible set is a capped
/// simplex whose projection is found by bisection.
pub fn l1_projection_qp(v: &[f64], radius: f64, iters: usize) -> Vec<f64> {
    let n = v.len();
    let target: Vec<f64> = v
        .iter()
        .map(|x| x.max(0.0))
        .chain(v.iter().map(|x| (-x).max(0.0)))
        .collect();
    let project = |z: &[f64]| -> Vec<f64> {
        let clipped: Vec<f64> = z.iter().map(|x| x.max(0.0)).collect();
        if clipped.iter().sum::<f64>() <= radius {
            return clipped;
        }
        let (mut lo, mut hi) = (0.0, z.iter().cloned().fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = z.iter().map(|x| (x - mid).max(0.0)).sum();
            if s > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        z.iter().map(|x| (x - t).max(0.0)).collect()
    };
    // Objective ½‖p − n − v‖²; gradient with respect to (p, n) is (d, −d).
    let mut z = project(&target);
    for _ in 0..iters {
        let d: Vec<f64> = (0..n).map(|i| z[i] - z[n + i] - v[i]).collect();
        let step: Vec<f64> = (0..2 * n)
            .map(|k| {
                if k < n {
                    z[k] - 0.5 * d[k]
                } else {
                    z[k] + 0.5 * d[k - n]
                }
            })
            .collect();
        let next = project(&step);
        let moved = next
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        z = next;
        if moved <= 1e-17 {
            break;
        }
    }
    (0..n).map(|i| z[i] - z[n + i]).collect()
}

/// Proximal map of `eta‖·‖∞` computed as clipping at the level `t` with
/// `Σ(|v_i| − t)₊ = eta`.
pub fn prox_inf_clip(v: &[f64], eta: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= eta {
        return vec![0.0; v.len()];
    }
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let excess: f64 = v.iter().map(|x| (x.abs() - mid).max(0.0)).sum();
        if excess > eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| x.clamp(-t, t)).collect()
}

/// Dense normal-equation solve for the weighted Toeplitz fit.
pub fn toeplitz_fit_dense(targets: &[(DMatrix<f64>, f64)]) -> DVector<f64> {
    let (rows, cols) = targets[0].0.shape();
    let len = rows + cols - 1;
    let mut w = DMatrix::<f64>::zeros(rows * cols, len);
    for j in 0..cols {
        for i in 0..rows {
            w[(i + j * rows, j + rows - 1 - i)] = 1.0;
        }
    }
    let total: f64 = targets.iter().map(|t| t.1).sum();
    let mut rhs = DVector::<f64>::zeros(len);
    for (m, weight) in targets {
        let v = DVector::from_column_slice(m.as_slice());
        rhs += w.tr_mul(&v) * *weight;
    }
    let normal = w.tr_mul(&w) * total;
    normal
        .lu()
        .solve(&rhs)
        .expect("normal matrix is diagonal and positive")
}

/// Pseudo-inverse least squares through the SVD.
pub fn lstsq_svd(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-12)
        .expect("svd solve")
}

/// Cyclic coordinate descent for `½‖aθ − b‖² + λ‖θ‖₁`.
pub fn lasso_coordinate_descent(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = a.ncols();
    let col_sq: Vec<f64> = (0..p).map(|j| a.column(j).norm_squared()).collect();
    let mut theta = DVector::<f64>::zeros(p);
    let mut residual = b.clone();
    for _ in 0..100_000 {
        let mut change = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = theta[j];
            let rho = a.column(j).dot(&residual) + col_sq[j] * old;
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / col_sq[j];
            if new != old {
                residual -= a.column(j) * (new - old);
                theta[j] = new;
                change = change.max((new - old).abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    theta
}

/// Best `s`-column least-squares fit by enumerating every support.
pub fn best_support(a: &DMatrix<f64>, b: &DVector<f64>, s: usize) -> (Vec<usize>, f64) {
    let p = a.ncols();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let sub = DMatrix::from_fn(a.nrows(), s, |i, j| a[(i, idx[j])]);
        let coef = lstsq_svd(&sub, b);
        let rss = (b - &sub * coef).norm_squared();
        if rss < best.1 {
            best = (idx.clone(), rss);
        }
        // next combination in lexicographic order
        let mut k = s;
        while k > 0 && idx[k - 1] == p - s + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return best;
        }
        idx[k - 1] += 1;
        for m in k..s {
            idx[m] = idx[m - 1] + 1;
        }
    }
}

/// Mutual coherence from explicit pairwise normalized inner products.
pub fn coherence_pairs(a: &DMatrix<f64>) -> f64 {
    let mut mu = 0.0f64;
    for i in 0..a.ncols() {
        for j in 0..i {
            let c = a.column(i).dot(&a.column(j)) / (a.column(i).norm() * a.column(j).norm());
            mu = mu.max(c.abs());
        }
    }
    mu
}

pub fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}
