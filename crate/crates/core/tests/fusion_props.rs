use nalgebra::Vector3;
use panoscaffold::fusion::{
    bidirectional_fuse, bidirectional_fuse_detailed, combine, cube_edges, default_latent_size, max_abs_diff,
    overlap_agreement, FusionKernel,
};
use panoscaffold::raster::sample_bilinear_clamped;
use panoscaffold::{CubemapFaceSet, FaceId, Raster};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise_faces(size: usize, ch: usize, seed: u64) -> CubemapFaceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let faces = (0..6)
        .map(|_| {
            Raster::from_fn(size, size, ch, |_, _, p| {
                p.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0))
            })
            .unwrap()
        })
        .collect();
    CubemapFaceSet::new(faces, 95.0).unwrap()
}

/// Faces sampled from a random low-frequency field over directions.
fn band_limited_faces(size: usize, seed: u64) -> CubemapFaceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(Vector3<f64>, f64, f64)> = (0..6)
        .map(|_| {
            let w = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            (w, rng.gen_range(0.0..6.3), rng.gen_range(0.05..0.2))
        })
        .collect();
    let mut set = CubemapFaceSet::filled(size, 1, 95.0, 0.0).unwrap();
    let rig = *set.rig();
    for face in FaceId::ALL {
        *set.face_mut(face) = Raster::from_fn(size, size, 1, |x, y, p| {
            let q = rig.pixel_direction(face, x as f64 + 0.5, y as f64 + 0.5);
            p[0] = terms.iter().map(|(w, ph, a)| a * (w.dot(&q) + ph).sin()).sum();
        })
        .unwrap();
    }
    set
}

#[test]
fn zero_kernel_is_bitwise_identity_on_noise() {
    let f = noise_faces(24, 3, 1);
    let out = bidirectional_fuse(&f, &FusionKernel::zero(), default_latent_size(24)).unwrap();
    for (a, b) in out.faces().iter().zip(f.faces()) {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn linearity_on_noise() {
    let k = FusionKernel::default();
    let size = default_latent_size(16);
    let (x, y) = (noise_faces(16, 2, 2), noise_faces(16, 2, 3));
    let (a, b) = (0.7, -1.9);
    let lhs = bidirectional_fuse(&combine(&x, a, &y, b).unwrap(), &k, size).unwrap();
    let rhs = combine(
        &bidirectional_fuse(&x, &k, size).unwrap(),
        a,
        &bidirectional_fuse(&y, &k, size).unwrap(),
        b,
    )
    .unwrap();
    assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
}

#[test]
fn residual_agrees_across_faces_on_band_limited_input() {
    let f = band_limited_faces(64, 7);
    let out = bidirectional_fuse_detailed(&f, &FusionKernel::default(), default_latent_size(64)).unwrap();
    let agree = overlap_agreement(&out.residual, 48);
    assert!(agree.samples > 1000);
    assert!(agree.max_abs_diff < 1e-3, "{agree:?}");

    // edge pixels of each face against the neighbour's bilinear sample
    let rig = *out.residual.rig();
    let n = 64;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut v = [0.0];
    for (a, b) in cube_edges().into_iter().flat_map(|(a, b)| [(a, b), (b, a)]) {
        for i in 0..n {
            for (x, y) in [(0, i), (n - 1, i), (i, 0), (i, n - 1)] {
                let q = rig.pixel_direction(a, x as f64 + 0.5, y as f64 + 0.5);
                let Some(p) = rig.project(b, &q) else { continue };
                if !(p.x >= 0.5 && p.x <= n as f64 - 0.5 && p.y >= 0.5 && p.y <= n as f64 - 0.5) {
                    continue;
                }
                sample_bilinear_clamped(out.residual.face(b), p.x, p.y, &mut v);
                worst = worst.max((v[0] - out.residual.face(a).get(x, y, 0)).abs());
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn fused_minus_residual_is_input() {
    let f = noise_faces(16, 1, 4);
    let out = bidirectional_fuse_detailed(&f, &FusionKernel::box_filter(3).unwrap(), (96, 48)).unwrap();
    let back = combine(&out.fused, 1.0, &out.residual, -1.0).unwrap();
    assert!(max_abs_diff(&back, &f) < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fusion_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let k = FusionKernel::gaussian(3, 0.8).unwrap();
        let (x, y) = (noise_faces(8, 1, seed), noise_faces(8, 1, seed.wrapping_add(1)));
        let size = default_latent_size(8);
        let lhs = bidirectional_fuse(&combine(&x, a, &y, b).unwrap(), &k, size).unwrap();
        let rhs = combine(&bidirectional_fuse(&x, &k, size).unwrap(), a, &bidirectional_fuse(&y, &k, size).unwrap(), b).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn identity_kernel_doubles_any_constant(v in -5.0..5.0f64) {
        let f = CubemapFaceSet::filled(8, 2, 95.0, v).unwrap();
        let out = bidirectional_fuse(&f, &FusionKernel::identity(), (32, 16)).unwrap();
        prop_assert!(out.faces().iter().all(|r| r.data().iter().all(|&x| x == 2.0 * v)));
    }
}
