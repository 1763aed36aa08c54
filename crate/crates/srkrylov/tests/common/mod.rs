#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srkrylov::linalg::dense::random_vec;
use srkrylov::linalg::{CsrMatrix, LinearOperator, Mat};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rvec(n: usize, seed: u64) -> Vec<f64> {
    random_vec(n, &mut rng(seed))
}

/// Diagonally dominant nonsymmetric sparse test matrix.
pub fn random_sparse(n: usize, seed: u64) -> CsrMatrix<f64> {
    let off = rvec(3 * n, seed);
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, 4.0 + i as f64 / n as f64));
        trip.push((i, (i + 1) % n, off[i]));
        trip.push((i, (i + 5) % n, 0.5 * off[n + i]));
        trip.push(((i + 3) % n, i, 0.5 * off[2 * n + i]));
    }
    CsrMatrix::from_triplets(n, n, &trip).unwrap()
}

pub fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.spmv(x).unwrap();
    b.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

pub fn apply_cols<O: LinearOperator<f64> + ?Sized>(a: &O, m: &Mat<f64>) -> Mat<f64> {
    Mat::from_cols(m.nrows(), &(0..m.ncols()).map(|j| a.apply_silent(m.col(j))).collect::<Vec<_>>())
}

pub fn shifted(a: &CsrMatrix<f64>, sigma: f64) -> CsrMatrix<f64> {
    let trip: Vec<(usize, usize, f64)> = (0..a.nrows())
        .flat_map(|r| a.row(r).map(move |(c, v)| (r, c, if r == c { v - sigma } else { v })).collect::<Vec<_>>())
        .collect();
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &trip).unwrap()
}

/// Poisson matrix with a seeded random diagonal shift in `[0, 1)`: SPD with simple spectrum.
pub fn poisson_jittered(m: usize, seed: u64) -> CsrMatrix<f64> {
    let a = srkrylov::problems::gen_poisson2d::<f64>(m);
    let d = rvec(m * m, seed);
    let trip: Vec<(usize, usize, f64)> = (0..a.nrows())
        .flat_map(|r| {
            let dr = d[r].abs().fract();
            a.row(r).map(move |(c, v)| (r, c, if r == c { v + dr } else { v })).collect::<Vec<_>>()
        })
        .collect();
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &trip).unwrap()
}

/// `‖V·K − V̂·Π‖_F / ‖V‖_F` with `V̂` built explicitly from `op`.
pub fn reconstruction_error<O: LinearOperator<f64> + ?Sized>(
    rep: &srkrylov::shortrep::ShortRepresentation<f64>,
    full: &Mat<f64>,
    op: &O,
) -> f64 {
    let vk = full.leading_cols(rep.n).matmul(&rep.k.to_dense());
    let vhat = rep.block_krylov_matrix(op).unwrap();
    let mut vp = Mat::zeros(full.nrows(), rep.n);
    for c in 0..rep.n {
        vp.set_col(c, vhat.col(rep.pi.image(c)));
    }
    vk.sub_mat(&vp).norm_fro() / full.leading_cols(rep.n).norm_fro()
}

/// 2D Poisson plus a skew convection term `c·(E − Eᵀ)` along the grid rows.
pub fn convection(m: usize, c: f64) -> CsrMatrix<f64> {
    let a = srkrylov::problems::gen_poisson2d::<f64>(m);
    let mut trip: Vec<(usize, usize, f64)> = (0..a.nrows()).flat_map(|r| a.row(r).map(move |(col, v)| (r, col, v)).collect::<Vec<_>>()).collect();
    for i in 0..m {
        for j in 0..m - 1 {
            let (p, q) = (i * m + j, i * m + j + 1);
            trip.push((p, q, c));
            trip.push((q, p, -c));
        }
    }
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &trip).unwrap()
}
