use crate::linalg::CsrMatrix;
use crate::scalar::Scalar;

/// 5-point Laplacian on an `m×m` interior grid, lexicographic ordering.
pub fn gen_poisson2d<T: Scalar>(m: usize) -> CsrMatrix<T> {
    let n = m * m;
    let mut trip = Vec::with_capacity(5 * n);
    let four = T::lit(4.0);
    let minus = -T::one();
    for iy in 0..m {
        for ix in 0..m {
            let r = iy * m + ix;
            if iy > 0 {
                trip.push((r, r - m, minus));
            }
            if ix > 0 {
                trip.push((r, r - 1, minus));
            }
            trip.push((r, r, four));
            if ix + 1 < m {
                trip.push((r, r + 1, minus));
            }
            if iy + 1 < m {
                trip.push((r, r + m, minus));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip).expect("stencil stays on the grid")
}

/// Constant-band tridiagonal `tridiag(sub, diag, sup)` of order `n`.
pub fn gen_tridiag<T: Scalar>(sub: T, diag: T, sup: T, n: usize) -> CsrMatrix<T> {
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 && sub != T::zero() {
            trip.push((i, i - 1, sub));
        }
        if diag != T::zero() {
            trip.push((i, i, diag));
        }
        if i + 1 < n && sup != T::zero() {
            trip.push((i, i + 1, sup));
        }
    }
    CsrMatrix::from_triplets(n, n, &trip).expect("band stays in range")
}

/// Convection–diffusion–reaction coefficients `−Δu + β·∇u + c·u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdrParams {
    pub peclet: [f64; 3],
    pub reaction: f64,
}

impl Default for CdrParams {
    fn default() -> Self {
        CdrParams { peclet: [1.0, 1.0, 1.0], reaction: -1.0 }
    }
}

/// Central differences on the unit cube with `1/h − 1` interior points per axis.
///
/// Panics when `1/h` is not an integer of at least 2.
pub fn gen_cdr3d<T: Scalar>(h: f64, params: CdrParams) -> CsrMatrix<T> {
    let inv = 1.0 / h;
    let steps = inv.round();
    assert!((inv - steps).abs() < 1e-9 && steps >= 2.0, "1/h must be an integer >= 2, got {inv}");
    let m = steps as usize - 1;
    let n = m * m * m;
    let h2 = 1.0 / (h * h);
    let diag = T::lit(6.0 * h2 + params.reaction);
    // (lower neighbor, upper neighbor) per axis
    let off: Vec<(T, T)> = params
        .peclet
        .iter()
        .map(|&b| (T::lit(-h2 - b / (2.0 * h)), T::lit(-h2 + b / (2.0 * h))))
        .collect();
    let stride = [1, m, m * m];
    let mut trip = Vec::with_capacity(7 * n);
    for iz in 0..m {
        for iy in 0..m {
            for ix in 0..m {
                let r = ix + m * (iy + m * iz);
                let pos = [ix, iy, iz];
                trip.push((r, r, diag));
                for d in 0..3 {
                    if pos[d] > 0 && off[d].0 != T::zero() {
                        trip.push((r, r - stride[d], off[d].0));
                    }
                    if pos[d] + 1 < m && off[d].1 != T::zero() {
                        trip.push((r, r + stride[d], off[d].1));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip).expect("stencil stays on the grid")
}
