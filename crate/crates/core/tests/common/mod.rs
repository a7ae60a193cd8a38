//! Test-only oracles, written independently of the library's solver paths.
#![allow(dead_code, clippy::needless_range_loop)]

use funcreg_core::sim::{curve_rng, gen_brownian, Role};
use funcreg_core::{CurveSet, Grid, PenaltyVariant};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` Brownian covariates on a `t`-point grid.
pub fn brownian_set(seed: u64, n: usize, t: usize) -> CurveSet {
    let grid = Grid::uniform(t).unwrap();
    let curves: Vec<_> = (0..n)
        .map(|i| gen_brownian(&mut curve_rng(seed, 9_999, Role::Train, i as u64), &grid))
        .collect();
    CurveSet::from_curves(&curves).unwrap()
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, t: usize) -> CurveSet {
    let grid = Grid::uniform(t).unwrap();
    let data = (0..n * t).map(|_| normal(rng)).collect();
    CurveSet::from_rows(grid, data).unwrap()
}

/// Squared L2 distance by an explicit trapezoid sum.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let h = 1.0 / (a.len() - 1) as f64;
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    let inner: f64 = sq[1..sq.len() - 1].iter().sum();
    h * (inner + 0.5 * (sq[0] + sq[sq.len() - 1]))
}

pub type Mat = Vec<Vec<f64>>;

pub fn gram_a(xs: &CurveSet, sigma: f64) -> Mat {
    let n = xs.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (-dist2(xs.row(i), xs.row(j)) / (2.0 * sigma * sigma)).exp())
                .collect()
        })
        .collect()
}

pub fn gram_k(t: usize, sigma_prime: f64) -> Mat {
    let pts: Vec<f64> = (0..t).map(|l| l as f64 / (t - 1) as f64).collect();
    pts.iter()
        .map(|s| {
            pts.iter()
                .map(|u| (-(s - u).powi(2) / (2.0 * sigma_prime * sigma_prime)).exp())
                .collect()
        })
        .collect()
}

/// Raw-data objective written as explicit sums over stations, grid points and
/// coefficient indices. `b[i][l]` is the coefficient of `k(t_l, .)` in `alpha_i`.
pub fn objective_sums(
    a: &Mat,
    k: &Mat,
    y: &Mat,
    b: &Mat,
    lambda: f64,
    variant: PenaltyVariant,
) -> f64 {
    let n = a.len();
    let t = k.len();
    let alpha = |j: usize, l: usize| (0..t).map(|m| b[j][m] * k[m][l]).sum::<f64>();
    let alpha_tab: Mat = (0..n)
        .map(|j| (0..t).map(|l| alpha(j, l)).collect())
        .collect();
    let mut loss = 0.0;
    for i in 0..n {
        for l in 0..t {
            let fit: f64 = (0..n).map(|j| a[i][j] * alpha_tab[j][l]).sum();
            loss += (y[i][l] - fit).powi(2);
        }
    }
    let inner = |i: usize, j: usize| {
        let mut s = 0.0;
        for l in 0..t {
            for m in 0..t {
                s += b[i][l] * b[j][m] * k[l][m];
            }
        }
        s
    };
    let mut pen = 0.0;
    for i in 0..n {
        match variant {
            PenaltyVariant::Standard => {
                for j in 0..n {
                    pen += a[i][j] * inner(i, j);
                }
            }
            PenaltyVariant::Modified => pen += a[i][i] * inner(i, i),
        }
    }
    loss + lambda * pen
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut m: Mat, mut rhs: Vec<f64>) -> Vec<f64> {
    let d = rhs.len();
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, p);
        rhs.swap(c, p);
        for r in (c + 1)..d {
            let f = m[r][c] / m[c][c];
            for cc in c..d {
                m[r][cc] -= f * m[c][cc];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = ((r + 1)..d).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    x
}

/// Minimises a quadratic objective using only function values: finite
/// difference Hessian (exact up to rounding for quadratics) and repeated
/// Newton steps with central-difference gradients.
pub fn minimize_quadratic(f: impl Fn(&[f64]) -> f64, dim: usize, step: f64) -> Vec<f64> {
    let at = |x: &[f64], moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in moves {
            y[i] += d;
        }
        f(&y)
    };
    let zero = vec![0.0; dim];
    let h = step;
    let f0 = f(&zero);
    let fi: Vec<f64> = (0..dim).map(|i| at(&zero, &[(i, h)])).collect();
    let mut hess = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let fij = at(&zero, &[(i, h), (j, h)]);
            let v = (fij - fi[i] - fi[j] + f0) / (h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let mut x = zero;
    for _ in 0..8 {
        let g: Vec<f64> = (0..dim)
            .map(|i| (at(&x, &[(i, h)]) - at(&x, &[(i, -h)])) / (2.0 * h))
            .collect();
        let dx = gauss_solve(hess.clone(), g);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi -= d;
        }
    }
    x
}

pub fn rows_of(cs: &CurveSet) -> Mat {
    cs.rows().map(|r| r.to_vec()).collect()
}

/// Brute-force minimiser of the raw-data objective, as an `n x T` table.
pub fn brute_force_coefficients(
    a: &Mat,
    k: &Mat,
    y: &Mat,
    lambda: f64,
    variant: PenaltyVariant,
) -> Mat {
    let n = a.len();
    let t = k.len();
    let unflatten = |v: &[f64]| -> Mat { (0..n).map(|i| v[i * t..(i + 1) * t].to_vec()).collect() };
    let x = minimize_quadratic(
        |v| objective_sums(a, k, y, &unflatten(v), lambda, variant),
        n * t,
        1.0,
    );
    unflatten(&x)
}
