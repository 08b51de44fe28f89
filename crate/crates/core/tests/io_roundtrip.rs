use nalgebra::{Quaternion, Vector3};
use panoscaffold::io::{
    export_splat_ply, import_splat_ply, load_scaffold, read_pfm, read_scaffold, save_scaffold, write_pfm,
    write_scaffold, RowOrder, HEADER_BYTES, RECORD_BYTES,
};
use panoscaffold::scaffold::SourceLayout;
use panoscaffold::{Error, FaceId, FormatError, Gaussian, GaussianScaffold, Raster};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f32r(v: f64) -> f64 {
    v as f32 as f64
}

/// Random scaffold whose every field is exactly representable as f32.
fn f32_scaffold(n: usize, seed: u64, layout: bool) -> GaussianScaffold {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussians = (0..n)
        .map(|_| {
            let q = Quaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            );
            let q = q.normalize();
            Gaussian {
                center: Vector3::from_fn(|_, _| f32r(rng.gen_range(-50.0..50.0))),
                rotation: Quaternion::new(f32r(q.w), f32r(q.i), f32r(q.j), f32r(q.k)),
                scale: Vector3::from_fn(|_, _| f32r(rng.gen_range(1e-4..2.0))),
                opacity: f32r(rng.gen_range(0.01..1.0)),
                color: Vector3::from_fn(|_, _| f32r(rng.gen())),
            }
        })
        .collect();
    let layout = layout.then(|| SourceLayout {
        face_size: 40,
        fov_deg: 95.0,
        faces: FaceId::ALL.to_vec(),
    });
    GaussianScaffold::new(gaussians, layout)
}

fn encode(s: &GaussianScaffold) -> Vec<u8> {
    let mut buf = Vec::new();
    let n = write_scaffold(s, &mut buf).unwrap();
    assert_eq!(n, buf.len() as u64);
    buf
}

#[test]
fn ten_thousand_gaussians_round_trip_exactly() {
    for layout in [false, true] {
        let s = f32_scaffold(10_000, 1, layout);
        let bytes = encode(&s);
        assert_eq!(read_scaffold(bytes.as_slice()).unwrap(), s);
    }
}

#[test]
fn file_sizes() {
    let empty = encode(&GaussianScaffold::new(vec![], None));
    assert_eq!(empty.len() as u64, HEADER_BYTES);
    assert!(read_scaffold(empty.as_slice()).unwrap().is_empty());
    let one = encode(&f32_scaffold(1, 0, false));
    assert_eq!(one.len() as u64, HEADER_BYTES + RECORD_BYTES);
}

#[test]
fn general_f64_scaffold_is_stable_after_one_pass() {
    let mut s = f32_scaffold(500, 2, true);
    for g in &mut s.gaussians {
        g.center.x += 1e-9;
    }
    let once = encode(&s);
    let twice = encode(&read_scaffold(once.as_slice()).unwrap());
    assert_eq!(once, twice);
}

#[test]
fn save_and_load_through_the_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.o2sc");
    let s = f32_scaffold(300, 3, true);
    let n = save_scaffold(&path, &s).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), n);
    assert_eq!(load_scaffold(&path).unwrap(), s);
}

#[test]
fn corrupt_streams_give_distinct_errors() {
    let bytes = encode(&f32_scaffold(4, 4, false));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        read_scaffold(bad.as_slice()),
        Err(Error::Format(FormatError::BadMagic { .. }))
    ));
    let cut = &bytes[..bytes.len() - 10];
    match read_scaffold(cut) {
        Err(Error::Format(FormatError::Truncated { expected, actual })) => {
            assert_eq!((expected, actual), (bytes.len() as u64, cut.len() as u64));
        }
        other => panic!("{other:?}"),
    }
    // opacity field of the third record set to 1.5
    let mut bad = bytes.clone();
    let off = (HEADER_BYTES + 2 * RECORD_BYTES + 10 * 4) as usize;
    bad[off..off + 4].copy_from_slice(&1.5f32.to_le_bytes());
    assert!(matches!(
        read_scaffold(bad.as_slice()),
        Err(Error::Format(FormatError::InvalidGaussian { index: 2, .. }))
    ));
}

fn rel(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm() / a.norm()
}

#[test]
fn ply_round_trip_relative_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gaussians: Vec<Gaussian> = (0..2000)
        .map(|_| Gaussian {
            center: Vector3::new(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            ),
            rotation: Quaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            )
            .normalize(),
            scale: Vector3::new(
                rng.gen_range(1e-3..3.0),
                rng.gen_range(1e-3..3.0),
                rng.gen_range(1e-3..3.0),
            ),
            opacity: rng.gen_range(0.01..0.99),
            color: Vector3::new(
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
            ),
        })
        .collect();
    let s = GaussianScaffold::new(gaussians, None);
    let mut buf = Vec::new();
    let out = export_splat_ply(&s, &mut buf).unwrap();
    assert_eq!(out.bytes, buf.len() as u64);
    assert_eq!(out.clamped_opacities, 0);
    let back = import_splat_ply(buf.as_slice()).unwrap();
    assert_eq!(back.len(), s.len());
    let mut worst = 0.0f64;
    for (a, b) in s.gaussians.iter().zip(&back.gaussians) {
        worst = worst
            .max(rel(&a.center, &b.center))
            .max(rel(&a.scale, &b.scale))
            .max(rel(&a.color, &b.color))
            .max((a.opacity - b.opacity).abs() / a.opacity)
            .max((a.rotation.coords - b.rotation.coords).norm());
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn ply_clamps_extreme_opacities() {
    let mut s = f32_scaffold(3, 6, false);
    s.gaussians[0].opacity = 1.0;
    s.gaussians[2].opacity = 0.0;
    let mut buf = Vec::new();
    assert_eq!(export_splat_ply(&s, &mut buf).unwrap().clamped_opacities, 2);
    let back = import_splat_ply(buf.as_slice()).unwrap();
    assert!(back.gaussians.iter().all(|g| g.opacity > 0.0 && g.opacity < 1.0));
}

#[test]
fn outputs_are_byte_deterministic() {
    let s = f32_scaffold(1000, 7, true);
    assert_eq!(encode(&s), encode(&s));
    let (mut a, mut b) = (Vec::new(), Vec::new());
    export_splat_ply(&s, &mut a).unwrap();
    export_splat_ply(&s, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pfm_files_round_trip_f32_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (c, order) in [(1, RowOrder::TopDown), (3, RowOrder::BottomUp)] {
        let r = Raster::from_fn(17, 9, c, |_, _, p| {
            p.iter_mut().for_each(|v| *v = f32r(rng.gen_range(-1e3..1e3)))
        })
        .unwrap();
        let path = dir.path().join(format!("r{c}.pfm"));
        write_pfm(&path, &r, order).unwrap();
        assert_eq!(read_pfm(&path, order).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn native_round_trip_is_identity(seed in any::<u64>(), n in 0usize..64, layout in any::<bool>()) {
        let s = f32_scaffold(n, seed, layout);
        prop_assert_eq!(read_scaffold(encode(&s).as_slice()).unwrap(), s);
    }

    #[test]
    fn any_truncation_is_reported(seed in any::<u64>(), cut in 1usize..200) {
        let bytes = encode(&f32_scaffold(3, seed, true));
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(read_scaffold(&bytes[..keep]).is_err());
    }
}
