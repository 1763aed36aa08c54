mod common;

use common::*;
use srkrylov::linalg::{dot, norm2, CsrOperator, LinearOperator};
use srkrylov::problems::gen_poisson2d;
use srkrylov::shortrep::*;
use srkrylov::solvers::*;

fn lanczos(m: usize, n: usize, seed: u64) -> (srkrylov::linalg::CsrMatrix<f64>, LanczosData<f64>) {
    let a = poisson_jittered(m, seed + 100);
    let b = rvec(m * m, seed);
    let (d, _) = sym_lanczos_solve(&CsrOperator::new(&a), &b, n, LanczosMode::Cg, Approach::V, 1e-30, n).unwrap();
    (a, d)
}

#[test]
fn reconstruction_for_moderate_strides() {
    let (a, d) = lanczos(7, 42, 1);
    let op = CsrOperator::new(&a);
    for j in [1, 2, 3, 6, 7] {
        let rep = ShortRepresentation::from_lanczos(&d, Basis::V, j).unwrap();
        let e = reconstruction_error(&rep, &d.v, &op);
        assert!(e <= 1e-9, "J={j} {e:e}");
    }
}

#[test]
fn reconstruction_for_bilanczos_bases() {
    let n = 48;
    let a = random_sparse(60, 2);
    let op = CsrOperator::new(&a);
    let mut o = BiLanczosOptions::new(Approach::U, n, 1e-30);
    o.max_steps = n;
    let (d, _) = bicg_bilanczos(&op, &rvec(60, 3), &o).unwrap();
    for j in [1, 2, 3, 4, 6] {
        for (basis, full) in [(Basis::V, &d.v), (Basis::W, &d.w)] {
            let rep = ShortRepresentation::from_bilanczos(&d, basis, j).unwrap();
            let e = reconstruction_error(&rep, full, &op);
            assert!(e <= 1e-9, "J={j} {basis:?} {e:e}");
        }
    }
    // the preimage basis carries the recursion drift; keep it short
    let d12 = d.truncated(12);
    for j in [1, 2, 3, 4, 6] {
        let rep = ShortRepresentation::from_bilanczos(&d12, Basis::U, j).unwrap();
        let e = reconstruction_error(&rep, d12.u.as_ref().unwrap(), &op);
        assert!(e <= 1e-9, "J={j} U {e:e}");
    }
}

#[test]
fn horner_products_match_explicit_basis() {
    let (a, d) = lanczos(6, 24, 4);
    let op = CsrOperator::new(&a);
    let v = d.v_n();
    let mut rng = rng(5);
    for j in [2, 3, 4, 6] {
        let rep = ShortRepresentation::from_lanczos(&d, Basis::V, j).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = srkrylov::linalg::dense::random_vec(24, &mut rng);
            let z: Vec<f64> = srkrylov::linalg::dense::random_vec(36, &mut rng);
            let vy = rep.apply_v(&op, &y).unwrap();
            let vhz = rep.apply_vh(&op, &z).unwrap();
            let ey = srkrylov::linalg::dense::sub(&vy, &v.mul_vec(&y));
            let ez = srkrylov::linalg::dense::sub(&vhz, &v.adj_mul_vec(&z));
            assert!(norm2(&ey) <= 1e-10 * v.norm_fro() * norm2(&y));
            assert!(norm2(&ez) <= 1e-10 * v.norm_fro() * norm2(&z));
            let lhs = dot(&vhz, &y);
            let rhs = dot(&z, &vy);
            assert!((lhs - rhs).abs() <= 1e-10 * norm2(&vhz) * norm2(&y));
        }
    }
}

#[test]
fn horner_counts_products() {
    let (a, d) = lanczos(6, 24, 4);
    let op = CsrOperator::new(&a);
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 4).unwrap();
    op.counter().reset();
    rep.apply_v(&op, &vec![1.0; 24]).unwrap();
    assert_eq!(op.mv_count(), 3);
    rep.apply_vh(&op, &vec![1.0; 36]).unwrap();
    assert_eq!(op.mv_count(), 6);
}

#[test]
fn head_columns_come_back_unchanged() {
    let (a, d) = lanczos(6, 24, 6);
    let op = CsrOperator::new(&a);
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 3).unwrap();
    for i in 0..8 {
        let mut y = vec![0.0; 24];
        y[3 * i] = 1.0;
        let col = rep.apply_v(&op, &y).unwrap();
        let diff = srkrylov::linalg::dense::sub(&col, rep.vtilde.col(i));
        assert!(norm2(&diff) <= 1e-12);
    }
    let rep1 = ShortRepresentation::from_lanczos(&d, Basis::V, 1).unwrap();
    let y = rvec(24, 7);
    assert_eq!(rep1.apply_v(&op, &y).unwrap(), d.v_n().mul_vec(&y));
}

#[test]
fn adjoint_products_vanish_on_complement() {
    let (a, d) = lanczos(6, 24, 8);
    let op = CsrOperator::new(&a);
    let v = d.v_n();
    let mut z = rvec(36, 9);
    for _ in 0..2 {
        let c = v.adj_mul_vec(&z);
        let vc = v.mul_vec(&c);
        z.iter_mut().zip(&vc).for_each(|(a, b)| *a -= b);
    }
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 4).unwrap();
    let out = rep.apply_vh(&op, &z).unwrap();
    assert!(norm2(&out) <= 1e-9 * norm2(&z));
}

#[test]
fn permutation_duality() {
    for (n, j1) in [(12, 3), (12, 2), (24, 4), (42, 6), (10, 5)] {
        let band = srkrylov::linalg::TriBand { diag: vec![1.0; n], sub: vec![1.0; n], sup: vec![1.0; n] };
        let (_, p1) = build_short_rep(&band, j1).unwrap();
        let (_, p2) = build_short_rep(&band, n / j1).unwrap();
        assert_eq!(p1, p2.inverse(), "n={n} J={j1}");
    }
}

#[test]
fn srcg_exact_and_accounting() {
    // full basis: exact solve
    let (a, d) = lanczos(4, 16, 10);
    let op = CsrOperator::new(&a);
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 4).unwrap();
    let b = rvec(16, 11);
    let r = srcg_solve(&rep, &op, &b, 1e-8).unwrap();
    assert!(r.relative_resnorm() <= 1e-8, "{}", r.relative_resnorm());
    assert_eq!(r.mv_total, 8);
    assert_eq!(r.rd_total, 16);
    assert_eq!(2 * r.rd_total, rep.k_blocks() * r.mv_total);
    assert_eq!(r.mv_physical, 6);
}

#[test]
fn srcg_poisson_orthogonality() {
    let (a, d) = lanczos(30, 60, 12);
    let op = CsrOperator::new(&a);
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 6).unwrap();
    let b = rvec(900, 13);
    let rep_out = srcg_solve(&rep, &op, &b, 1e-8).unwrap();
    let r = residual(&a, &rep_out.x, &b);
    let vr = d.v_n().adj_mul_vec(&r);
    assert!(norm2(&vr) / norm2(&b) <= 1e-6);
    assert!(rep_out.defect.unwrap() <= 1e-6);
}

#[test]
fn srmr_recovers_minres_iterate() {
    let a = shifted(&gen_poisson2d::<f64>(6), 2.5);
    let op = CsrOperator::new(&a);
    let b = rvec(36, 14);
    let n = 12;
    let (d, mr) = sym_lanczos_solve(&op, &b, n, LanczosMode::Minres, Approach::V, 1e-30, n).unwrap();
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 3).unwrap();
    let out = srmr_solve(&rep, &op, &b, Approach::V, 1e-8).unwrap();
    let diff = srkrylov::linalg::dense::rel_diff(&out.x, &mr.x);
    assert!(diff <= 1e-8, "{diff:e}");
    // indefinite source: srcg may break down on T, srmr always answers
    assert!(out.x.iter().all(|v| v.is_finite()));
    assert!(out.defect.unwrap() <= 1e-8);
}

#[test]
fn srmr_u_approach_matches_minres() {
    let a = gen_poisson2d::<f64>(6);
    let op = CsrOperator::new(&a);
    let b = rvec(36, 15);
    let (d, mr) = sym_lanczos_solve(&op, &b, 12, LanczosMode::Minres, Approach::U, 1e-30, 12).unwrap();
    let rep = ShortRepresentation::from_lanczos(&d, Basis::U, 4).unwrap();
    let out = srmr_solve(&rep, &op, &b, Approach::U, 1e-8).unwrap();
    assert!(srkrylov::linalg::dense::rel_diff(&out.x, &mr.x) <= 1e-8);
    assert_eq!(out.mv_physical, 7);
}

#[test]
fn srmr_on_identity() {
    let a = srkrylov::linalg::CsrMatrix::<f64>::identity(5);
    let op = CsrOperator::new(&a);
    let b = rvec(5, 16);
    let (d, _) = sym_lanczos_solve(&op, &b, 1, LanczosMode::Minres, Approach::V, 1e-12, 1).unwrap();
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 1).unwrap();
    let out = srmr_solve(&rep, &op, &b, Approach::V, 1e-10).unwrap();
    assert!(srkrylov::linalg::dense::rel_diff(&out.x, &b) <= 1e-12);
}

#[test]
fn srcg_reports_singular_tridiagonal() {
    // T = [0] for a matrix with bᴴAb = 0
    let a = srkrylov::linalg::CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
    let op = CsrOperator::new(&a);
    let b = vec![1.0, 1.0];
    let (d, _) = sym_lanczos_solve(&op, &b, 1, LanczosMode::Minres, Approach::V, 1e-30, 1).unwrap();
    let rep = ShortRepresentation::from_lanczos(&d, Basis::V, 1).unwrap();
    let err = srcg_solve(&rep, &op, &b, 1e-8).unwrap_err();
    assert!(err.to_string().contains("srmr"));
    assert!(srmr_solve(&rep, &op, &b, Approach::V, 1e-8).is_ok());
}

#[test]
fn srbicg_equals_srcg_on_spd() {
    let a = gen_poisson2d::<f64>(8);
    let op = CsrOperator::new(&a);
    let b = rvec(64, 17);
    let mut o = BiLanczosOptions::new(Approach::V, 20, 1e-30);
    o.max_steps = 20;
    let (bd, _) = bicg_bilanczos(&op, &b, &o).unwrap();
    let (ld, _) = sym_lanczos_solve(&op, &b, 20, LanczosMode::Cg, Approach::V, 1e-30, 20).unwrap();
    let rv = ShortRepresentation::from_bilanczos(&bd, Basis::V, 4).unwrap();
    let rw = ShortRepresentation::from_bilanczos(&bd, Basis::W, 4).unwrap();
    let rl = ShortRepresentation::from_lanczos(&ld, Basis::V, 4).unwrap();
    let b2 = rvec(64, 18);
    let x1 = srbicg_solve(&rv, &rw, &op, &b2, Approach::V, 1e-8).unwrap().x;
    let x2 = srcg_solve(&rl, &op, &b2, 1e-8).unwrap().x;
    assert!(srkrylov::linalg::dense::rel_diff(&x1, &x2) <= 1e-8);
}

#[test]
fn srbicg_full_basis_solves_nonsymmetric() {
    let n = 15;
    let a = random_sparse(n, 19);
    let op = CsrOperator::new(&a);
    let mut o = BiLanczosOptions::new(Approach::U, n, 1e-30);
    o.max_steps = n;
    let (d, _) = bicg_bilanczos(&op, &rvec(n, 20), &o).unwrap();
    let b = rvec(n, 21);
    let main = ShortRepresentation::from_bilanczos(&d, Basis::V, 5).unwrap();
    let w = ShortRepresentation::from_bilanczos(&d, Basis::W, 5).unwrap();
    let out = srbicg_solve(&main, &w, &op, &b, Approach::V, 1e-6).unwrap();
    assert!(out.relative_resnorm() <= 1e-6, "{:e}", out.relative_resnorm());
    assert_eq!(out.mv_physical, 8);
    // U-approach on a partial basis: residual orthogonal to W
    let d15 = d.truncated(10);
    let main = ShortRepresentation::from_bilanczos(&d15, Basis::U, 5).unwrap();
    let w = ShortRepresentation::from_bilanczos(&d15, Basis::W, 5).unwrap();
    let out = srbicg_solve(&main, &w, &op, &b, Approach::U, 1e-6).unwrap();
    assert!(out.defect.unwrap() <= 1e-7, "{:e}", out.defect.unwrap());
}

#[test]
fn dual_solves() {
    let n = 12;
    let a = random_sparse(n, 22);
    let op = CsrOperator::new(&a);
    let mut o = BiLanczosOptions::new(Approach::U, n, 1e-30);
    o.max_steps = n;
    let (d, _) = bicg_bilanczos(&op, &rvec(n, 23), &o).unwrap();
    let b = rvec(n, 24);
    let w = ShortRepresentation::from_bilanczos(&d, Basis::W, 3).unwrap();
    let v = ShortRepresentation::from_bilanczos(&d, Basis::V, 3).unwrap();
    let d12 = d.truncated(8);
    let w12 = ShortRepresentation::from_bilanczos(&d12, Basis::W, 3).unwrap();
    let u12 = ShortRepresentation::from_bilanczos(&d12, Basis::U, 3).unwrap();
    let out = srbicg_dual_solve(&w12, &u12, &op, &b, Approach::U, 1e-8).unwrap();
    let ahx = a.spmv_adjoint(&out.x).unwrap();
    let r: Vec<f64> = b.iter().zip(&ahx).map(|(b, a)| b - a).collect();
    let ur = d12.u_n().unwrap().adj_mul_vec(&r);
    assert!(norm2(&ur) <= 1e-8 * norm2(&b), "{:e}", norm2(&ur));
    let out_v = srbicg_dual_solve(&w, &v, &op, &b, Approach::V, 1e-8).unwrap();
    let ahx = a.spmv_adjoint(&out_v.x).unwrap();
    let r: Vec<f64> = b.iter().zip(&ahx).map(|(b, a)| b - a).collect();
    assert!(norm2(&d.v_n().adj_mul_vec(&r)) <= 1e-8 * norm2(&b), "{:e}", norm2(&d.v_n().adj_mul_vec(&r)));
}

#[test]
fn dual_coincides_with_primal_for_symmetric() {
    let a = gen_poisson2d::<f64>(6);
    let op = CsrOperator::new(&a);
    let b = rvec(36, 25);
    let mut o = BiLanczosOptions::new(Approach::V, 12, 1e-30);
    o.max_steps = 12;
    let (d, _) = bicg_bilanczos(&op, &b, &o).unwrap();
    let v = ShortRepresentation::from_bilanczos(&d, Basis::V, 3).unwrap();
    let w = ShortRepresentation::from_bilanczos(&d, Basis::W, 3).unwrap();
    let b2 = rvec(36, 26);
    let p = srbicg_solve(&v, &w, &op, &b2, Approach::V, 1e-8).unwrap();
    let q = srbicg_dual_solve(&w, &v, &op, &b2, Approach::V, 1e-8).unwrap();
    assert!(srkrylov::linalg::dense::rel_diff(&p.x, &q.x) <= 1e-8);
    // swapping the roles twice returns the primal formula
    let pp = srbicg_dual_solve(&v, &w, &op, &b2, Approach::V, 1e-8).unwrap();
    assert!(srkrylov::linalg::dense::rel_diff(&pp.x, &p.x) <= 1e-8);
}
