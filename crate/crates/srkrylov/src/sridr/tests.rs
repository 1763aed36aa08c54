use super::*;
use crate::linalg::dense::random_vec;
use crate::linalg::{CsrMatrix, CsrOperator};
use crate::problems::gen_tridiag;
use crate::solvers::{idr_s_solve, IdrOptions};
use rand::SeedableRng;

fn lab() -> CsrMatrix<f64> {
    gen_tridiag(3.0, 2.0, -1.0, 100)
}

fn capture(a: &CsrMatrix<f64>, b: &[f64], s: usize, at: Capture) -> SonneveldRecycleData<f64> {
    let op = CsrOperator::new(a);
    let mut o = IdrOptions::new(s, 1e-8);
    o.capture = at;
    o.seed = 3;
    let (rep, data) = idr_s_solve(&op, b, &o).unwrap();
    assert!(rep.converged);
    data.unwrap()
}

fn small() -> CsrMatrix<f64> {
    let n = 40;
    let trip: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| (i, i, 2.0 + i as f64 / 10.0))
        .chain((0..n - 1).map(|i| (i, i + 1, 0.5)))
        .chain((0..n - 1).map(|i| (i + 1, i, -0.3)))
        .collect();
    CsrMatrix::from_triplets(n, n, &trip).unwrap()
}

#[test]
fn full_depth_terminates_quickly() {
    let a = lab();
    let data = capture(&a, &vec![1.0; 100], 20, Capture::Max);
    assert_eq!(data.jstar, 4);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let b2: Vec<f64> = random_vec(100, &mut rng);
    for b in [vec![1.0; 100], b2] {
        let op = CsrOperator::new(&a);
        let (rep, _) = sridr_solve(&op, &b, &data, None, &SridrOptions::new(1e-8)).unwrap();
        assert!(rep.converged);
        assert!(rep.cycles <= 6, "cycles {}", rep.cycles);
    }
}

#[test]
fn shallow_capture_costs_more() {
    let a = lab();
    let b = vec![1.0; 100];
    let deep = capture(&a, &b, 20, Capture::Max);
    let shallow = capture(&a, &b, 20, Capture::At(3));
    let run = |d: &SonneveldRecycleData<f64>| {
        let op = CsrOperator::new(&a);
        sridr_solve(&op, &b, d, None, &SridrOptions::new(1e-8)).unwrap().0.mv_to_tol(1e-8).unwrap()
    };
    let shift = run(&shallow) as i64 - run(&deep) as i64;
    assert!((16..=26).contains(&shift), "shift {shift}");
}

#[test]
fn recycled_cycles_cost_one_product() {
    let a = lab();
    let data = capture(&a, &vec![1.0; 100], 20, Capture::Max);
    let op = CsrOperator::new(&a);
    let (rep, _) = sridr_solve(&op, &vec![1.0; 100], &data, Some(3), &SridrOptions::new(1e-14)).unwrap();
    assert_eq!(rep.mv_total, 3);
    assert_eq!(rep.rd_total, 60);
    assert_eq!(rep.cycles, 3);
}

#[test]
fn residuals_stay_in_sonneveld_spaces() {
    let a = small();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let b: Vec<f64> = random_vec(40, &mut rng);
    let data = capture(&a, &b, 4, Capture::At(3));
    let b2: Vec<f64> = random_vec(40, &mut rng);
    let op = CsrOperator::new(&a);
    for j in 1..=3 {
        let (rep, _) = sridr_solve(&op, &b2, &data, Some(j), &SridrOptions::new(1e-14)).unwrap();
        let ax = a.spmv(&rep.x).unwrap();
        let r: Vec<f64> = b2.iter().zip(&ax).map(|(x, y)| x - y).collect();
        let d = sonneveld_defect(&r, &data.p, &data.omegas[..j], &op).unwrap();
        assert!(d <= 1e-6, "level {j} defect {d:e}");
    }
    for j in 0..data.s() {
        assert!(sonneveld_membership_check(data.v_aux.col(j), &data, &op).unwrap() <= 1e-8);
    }
}

#[test]
fn planar_instance_branches() {
    let (a, data, b) = planar_counterexample();
    let op = CsrOperator::new(&a);
    assert!(data.preimage_defect(&op) < 1e-15);
    let (rep, _) = sridr_solve(&op, &b, &data, Some(1), &SridrOptions::new(1e-14)).unwrap();
    assert!(rep.final_resnorm() <= 1e-12);
    let perturbed = SonneveldRecycleData { omegas: vec![-1.5], ..data.clone() };
    let (rep, _) = sridr_solve(&op, &b, &perturbed, Some(1), &SridrOptions::new(1e-14)).unwrap();
    assert!(rep.final_resnorm() >= 1e-3);
}

#[test]
fn zero_vector_membership_is_zero() {
    let (a, data, _) = planar_counterexample();
    let op = CsrOperator::new(&a);
    assert_eq!(sonneveld_membership_check(&[0.0, 0.0], &data, &op).unwrap(), 0.0);
}

#[test]
fn payload_preimages_hold() {
    let a = lab();
    let data = capture(&a, &vec![1.0; 100], 20, Capture::Max);
    assert!(data.preimage_defect(&CsrOperator::new(&a)) < 1e-8);
    assert!(data.omegas.iter().all(|w| *w != 0.0));
}

#[test]
fn reorder_rejects_non_permutation() {
    let data = capture(&lab(), &vec![1.0; 100], 20, Capture::At(2));
    assert!(data.reordered(&[0, 0]).is_err());
    let r = data.reordered(&[1, 0]).unwrap();
    assert_eq!(r.omegas[0], data.omegas[1]);
}

#[test]
fn throw_columns_truncates_and_checks_rank() {
    let a = small();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let b: Vec<f64> = random_vec(40, &mut rng);
    let data = capture(&a, &b, 4, Capture::At(2));
    let mut sel = Mat::zeros(4, 2);
    sel[(0, 0)] = 1.0;
    sel[(1, 1)] = 1.0;
    let t = throw_columns(&data, &sel, &sel).unwrap();
    assert_eq!(t.s(), 2);
    assert_eq!(t.v_aux.col(1), data.v_aux.col(1));
    assert!(throw_columns(&data, &Mat::zeros(4, 2), &sel).is_err());
    let same = throw_columns(&data, &Mat::identity(4), &Mat::identity(4)).unwrap();
    assert_eq!(same, data);
    // shrinking P keeps the old vectors inside the new spaces
    let op = CsrOperator::new(&a);
    let nu = Mat::random(4, 3, &mut rng);
    let eta = Mat::random(4, 3, &mut rng);
    let t = throw_columns(&data, &nu, &eta).unwrap();
    for j in 0..3 {
        assert!(sonneveld_membership_check(t.v_aux.col(j), &t, &op).unwrap() < 1e-8);
    }
    let (rep, _) = sridr_solve(&op, &b, &t, None, &SridrOptions::new(1e-8)).unwrap();
    assert!(rep.converged);
}
