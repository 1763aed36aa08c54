mod common;

use std::io::Cursor;

use common::*;
use proptest::prelude::*;
use srkrylov::blocking::{blocked_recycle_solve, split_blocks, uniform_block_sizes};
use srkrylov::linalg::{CsrOperator, Mat};
use srkrylov::payload::*;
use srkrylov::shortrep::{Basis, ShortRepresentation};
use srkrylov::solvers::{bicg_bilanczos, idr_s_solve, Approach, BiLanczosOptions, Capture, IdrOptions};
use srkrylov::sridr::SonneveldRecycleData;
use srkrylov::{Error, C64};

fn roundtrip<T: srkrylov::Scalar>(p: &Payload<T>) -> Payload<T> {
    let mut buf = Vec::new();
    p.write(&mut buf).unwrap();
    Payload::read(&mut Cursor::new(buf)).unwrap()
}

fn srid_from_idr() -> SonneveldRecycleData<f64> {
    let a = random_sparse(40, 1);
    let mut o = IdrOptions::new(3, 1e-10);
    o.capture = Capture::At(2);
    idr_s_solve(&CsrOperator::new(&a), &rvec(40, 2), &o).unwrap().1.unwrap()
}

#[test]
fn srid_roundtrip_is_exact() {
    let d = srid_from_idr();
    let mut buf = Vec::new();
    write_srid(&mut buf, &d).unwrap();
    assert_eq!(&buf[..5], b"SRID1");
    assert_eq!(read_srid::<f64, _>(&mut Cursor::new(&buf)).unwrap(), d);
    assert_eq!(roundtrip(&Payload::Sonneveld(d.clone())), Payload::Sonneveld(d));
}

#[test]
fn complex_srid_roundtrip() {
    let mut r = rng(3);
    let d = SonneveldRecycleData::<C64> {
        p: Mat::random(10, 2, &mut r),
        v_aux: Mat::random(10, 2, &mut r),
        u_aux: Mat::random(10, 2, &mut r),
        omegas: vec![C64::new(0.5, -0.25), C64::new(1.0, 2.0)],
        jstar: 2,
        seed: 99,
    };
    assert_eq!(roundtrip(&Payload::Sonneveld(d.clone())), Payload::Sonneveld(d));
}

#[test]
fn srep_roundtrip_with_and_without_next_column() {
    let a = random_sparse(30, 4);
    let mut o = BiLanczosOptions::new(Approach::V, 12, 1e-30);
    o.max_steps = 12;
    let (d, _) = bicg_bilanczos(&CsrOperator::new(&a), &rvec(30, 5), &o).unwrap();
    for basis in [Basis::V, Basis::W] {
        let mut rep = ShortRepresentation::from_bilanczos(&d, basis, 5).unwrap();
        assert_eq!(roundtrip(&Payload::Short(rep.clone())), Payload::Short(rep.clone()));
        rep.last_col = None;
        assert_eq!(roundtrip(&Payload::Short(rep.clone())), Payload::Short(rep));
    }
}

#[test]
fn sblk_roundtrip_solves_identically() {
    let a = random_sparse(40, 6);
    let op = CsrOperator::new(&a);
    let mut o = BiLanczosOptions::new(Approach::U, 12, 1e-30);
    o.max_steps = 12;
    let (d, _) = bicg_bilanczos(&op, &rvec(40, 7), &o).unwrap();
    let blocked = split_blocks(&op, &d, &uniform_block_sizes(12, 3), &[2]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.sblk");
    Payload::Blocked(blocked.clone()).save(&path).unwrap();
    assert_eq!(peek_kind(&path).unwrap().0, *b"SBLK1");
    let Payload::Blocked(back) = Payload::load(&path).unwrap() else { panic!("wrong container") };
    assert_eq!(back, blocked);
    let b = rvec(40, 8);
    let x1 = blocked_recycle_solve(&op, &b, &blocked, 1e-8).unwrap().x;
    let x2 = blocked_recycle_solve(&op, &b, &back, 1e-8).unwrap().x;
    assert_eq!(x1, x2);
}

#[test]
fn wrong_kind_and_magic_are_rejected() {
    let d = srid_from_idr();
    let mut buf = Vec::new();
    write_srid(&mut buf, &d).unwrap();
    assert!(matches!(read_srid::<C64, _>(&mut Cursor::new(&buf)), Err(Error::Payload(_))));
    assert!(matches!(read_srep::<f64, _>(&mut Cursor::new(&buf)), Err(Error::Payload(_))));
    let mut junk = buf.clone();
    junk[0] = b'X';
    assert!(Payload::<f64>::read(&mut Cursor::new(junk)).is_err());
}

#[test]
fn truncated_and_corrupt_input_errors() {
    let d = srid_from_idr();
    let mut buf = Vec::new();
    write_srid(&mut buf, &d).unwrap();
    for cut in [3, 6, 20, buf.len() - 1] {
        assert!(read_srid::<f64, _>(&mut Cursor::new(&buf[..cut])).is_err(), "cut {cut}");
    }
    let mut huge = buf.clone();
    huge[6..14].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(read_srid::<f64, _>(&mut Cursor::new(huge)).is_err());
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = Payload::<f64>::read(&mut Cursor::new(bytes));
    }

    #[test]
    fn srid_roundtrip_any_shape(n in 1usize..20, s in 1usize..4, j in 0usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = SonneveldRecycleData::<f64> {
            p: Mat::random(n, s, &mut r),
            v_aux: Mat::random(n, s, &mut r),
            u_aux: Mat::random(n, s, &mut r),
            omegas: rvec(j, seed ^ 1),
            jstar: j,
            seed,
        };
        prop_assert_eq!(roundtrip(&Payload::Sonneveld(d.clone())), Payload::Sonneveld(d));
    }
}
