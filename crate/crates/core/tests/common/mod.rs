#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tomo_unfold_core::linalg::{CMatrix, CVector};
use tomo_unfold_core::model::{
    build_steering_matrix, linspace, AcquisitionGeometry, MotionBasis, ParameterGrid, SteeringMatrix,
};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff_v(a: &CVector, b: &CVector) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Plain nested-vector matrix used by the hand-written oracles.
pub type Dense = Vec<Vec<Complex64>>;

pub fn to_dense(m: &CMatrix) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_dense(d: &Dense) -> CMatrix {
    CMatrix::from_fn(d.len(), d[0].len(), |i, j| d[i][j])
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = c(0.0, 0.0);
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn dense_adjoint(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| (0..a.len()).map(|i| a[i][j].conj()).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for k in 0..2 * n {
                    let sub = f * m[col][k];
                    m[row][k] -= sub;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `Aᴴ (A Aᴴ)⁻¹` for a wide matrix of full row rank.
pub fn dense_right_pinv(a: &Dense) -> Dense {
    let ah = dense_adjoint(a);
    dense_mul(&ah, &dense_inverse(&dense_mul(a, &ah)))
}

pub fn benchmark_geometry() -> AcquisitionGeometry {
    AcquisitionGeometry::regular(25, -135.0, 135.0, 0.031, 697_000.0).unwrap()
}

/// Elevation-only dictionary over `points` cells spanning `span` Rayleigh cells.
pub fn elevation_dictionary(points: usize, span: f64) -> (SteeringMatrix, f64) {
    let geo = benchmark_geometry();
    let rho = geo.rayleigh_resolution().unwrap();
    let grid = ParameterGrid::elevation_only(linspace(-0.5 * span * rho, 0.5 * span * rho, points)).unwrap();
    (build_steering_matrix(&geo, &MotionBasis::none(), &grid, true).unwrap(), rho)
}

/// One plain layer computed with nested loops and a hand-rolled
/// pseudoinverse; `r` must be wide with full row rank.
pub fn dense_layer(
    r: &Dense,
    w: &Dense,
    g: &[Complex64],
    gamma: &[Complex64],
    gamma_prev: &[Complex64],
    c1: f64,
    c2: f64,
    c3: f64,
    support: bool,
) -> Vec<Complex64> {
    let (n, l) = (r.len(), r[0].len());
    let pinv = dense_right_pinv(r);
    let resid: Vec<Complex64> = (0..n)
        .map(|i| g[i] - (0..l).map(|j| r[i][j] * gamma[j]).sum::<Complex64>())
        .collect();
    let pinv_apply = |v: &[Complex64]| -> f64 {
        (0..l).map(|j| (0..n).map(|i| pinv[j][i] * v[i]).sum::<Complex64>().norm()).sum()
    };
    let pr = pinv_apply(&resid);
    let theta = c1 * pr;
    let peak = gamma.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let l0 = if peak == 0.0 { 0 } else { gamma.iter().filter(|z| z.norm() > 1e-6 * peak).count() };
    let beta = c2 * l0 as f64;
    let p = if support {
        let v = c3 * (pinv_apply(g) / pr).ln().min(l as f64);
        if v > 0.0 {
            ((v + 0.5).floor() as usize).min(l)
        } else {
            0
        }
    } else {
        0
    };
    let pre: Vec<Complex64> = (0..l)
        .map(|j| {
            let corr: Complex64 = (0..n).map(|i| w[i][j].conj() * resid[i]).sum();
            gamma[j] + corr + (gamma[j] - gamma_prev[j]) * beta
        })
        .collect();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| pre[b].norm().total_cmp(&pre[a].norm()).then(a.cmp(&b)));
    let mut out = vec![c(0.0, 0.0); l];
    for (rank, &j) in order.iter().enumerate() {
        let x = pre[j];
        out[j] = if rank < p {
            x
        } else if x.norm() <= theta {
            c(0.0, 0.0)
        } else {
            x * ((x.norm() - theta) / x.norm())
        };
    }
    out
}

/// Worst absolute difference between a one-block ABT layer and the plain
/// layer without support selection, over `count` random `n × l` instances.
pub fn single_block_reduction_error(count: usize, n: usize, l: usize, seed: u64) -> f64 {
    use tomo_unfold_core::linalg::{normalize_columns, pseudoinverse};
    use tomo_unfold_core::solver::{
        hyperlista_abt_layer, hyperlista_layer, BlockLevel, BlockNorm, Hyperparameters, ResidualMode, ScheduleMode,
        SolverState,
    };
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut r = random_matrix(&mut rng, n, l);
        normalize_columns(&mut r).unwrap();
        let w = random_matrix(&mut rng, n, l) * c(0.2, 0.0);
        let g = random_vector(&mut rng, n);
        let mut gamma = random_vector(&mut rng, l);
        for j in 0..l {
            if rng.random_bool(0.4) {
                gamma[j] = c(0.0, 0.0);
            }
        }
        let gamma_prev = random_vector(&mut rng, l);
        let hp = Hyperparameters::new(rng.random_range(0.01..0.5), rng.random_range(0.0..0.05), 0.5)
            .with_support_selection(false);
        let mut state = SolverState::from_iterate(gamma, gamma_prev, &g, &r).unwrap();
        state.blocksize = l;
        let base = hyperlista_layer(&state, &g, &r, &w, &pseudoinverse(&r).unwrap(), &hp).unwrap();
        let level = BlockLevel::build(&r, l, BlockNorm::Spectral).unwrap();
        let abt = hyperlista_abt_layer(&state, &g, &r, &w, &level, ScheduleMode::Sweep, ResidualMode::Full, &hp, None)
            .unwrap();
        worst = worst.max(max_abs_diff_v(&base.gamma, &abt.gamma));
        worst = worst.max(max_abs_diff_v(&base.gamma_prev, &abt.gamma_prev));
    }
    worst
}
