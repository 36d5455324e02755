mod common;

use liekernels::error::Error;
use liekernels::gp::{Dataset, Noise};
use liekernels::kernels::{build_kernel, SpectralDensity, SpectralKernel};
use liekernels::repr::GroupId;
use liekernels::rng::{derive_seed, seeded};
use liekernels::sampling::{
    build_feature_basis, find_fundamental_set, kl_basis, pathwise_posterior_sample, prior_sample, PriorSampleRecord,
    RandomFunction,
};
use liekernels::spaces::{haar_sample_space, SpaceId, SpacePoint};
use nalgebra::DMatrix;

fn heat(space: &SpaceId, budget: usize) -> SpectralKernel {
    build_kernel(space, &SpectralDensity::heat(0.6, 1.4).unwrap(), budget).unwrap()
}

#[test]
fn constant_features_have_variance_sigma2() {
    let s2 = SpaceId::sphere(2);
    let k = heat(&s2, 1);
    let basis = build_feature_basis(&k, 1, 1).unwrap();
    let xs = haar_sample_space(&s2, &mut seeded(2), 3);
    let vals: Vec<f64> = (0..4000)
        .map(|i| {
            let f = prior_sample(&basis, i).evaluate(&xs).unwrap();
            assert!((f[0] - f[1]).abs() < 1e-12 && (f[0] - f[2]).abs() < 1e-12);
            f[0]
        })
        .collect();
    let (m, se) = common::mean_se(vals.iter().map(|v| v * v));
    assert!((m - 1.4).abs() < 5.0 * se);
}

// Phase average of Φ(x,u)Φ(u,y) reproduces the level function; with the
// real pairing, a folded complex level reproduces both λ and its conjugate.
#[test]
fn phase_averages_reproduce_levels() {
    let n = 100_000;
    for (space, level) in [(SpaceId::sphere(2), 2usize), (SpaceId::Group(GroupId::su(3).unwrap()), 1)] {
        let k = heat(&space, 6);
        let lvl = &k.levels()[level];
        let xs = haar_sample_space(&space, &mut seeded(3), 2);
        let us = haar_sample_space(&space, &mut seeded(4), n);
        let m2 = match lvl.representation() {
            Some(r) if !r.self_conjugate => 2.0,
            _ => 1.0,
        };
        let scale = lvl.diagonal;
        for (x, y) in [(&xs[0], &xs[0]), (&xs[0], &xs[1])] {
            let target = m2 * k.level_values(x, y).unwrap()[level];
            let est = us
                .iter()
                .map(|u| m2 * m2 * k.level_values(x, u).unwrap()[level] * k.level_values(u, y).unwrap()[level])
                .sum::<f64>()
                / n as f64;
            assert!((est - target).abs() < 1e-2 * scale.max(target.abs()) * m2, "{space}: {est} vs {target}");
        }
    }
}

#[test]
fn su3_conjugate_levels_are_folded() {
    let k = heat(&SpaceId::Group(GroupId::su(3).unwrap()), 10);
    let basis = build_feature_basis(&k, 4, 5).unwrap();
    let mut seen = Vec::new();
    for l in basis.levels() {
        let r = k.levels()[l.level].representation().unwrap();
        assert!(!seen.contains(&r.conjugate_signature) || r.self_conjugate);
        seen.push(r.signature.clone());
        let expect = if r.self_conjugate { 1.0 } else { 2.0 };
        assert_eq!(l.pairing, expect);
    }
}

#[test]
fn weight_redraws_match_feature_covariance() {
    let s2 = SpaceId::sphere(2);
    let k = heat(&s2, 8);
    let basis = build_feature_basis(&k, 64, 6).unwrap();
    let xs = haar_sample_space(&s2, &mut seeded(7), 10);
    let phi = basis.features(&xs).unwrap();
    let exact = &phi * phi.transpose();
    let draws = 4000;
    let mut mat = DMatrix::zeros(xs.len(), draws);
    for d in 0..draws {
        mat.set_column(d, &prior_sample(&basis, derive_seed(8, d as u64)).evaluate(&xs).unwrap());
    }
    assert!(common::covariance_z_score(&mat, &exact) < 5.0);
    for i in 0..xs.len() {
        let mean = mat.row(i).sum() / draws as f64;
        assert!(mean.abs() < 4.0 * (exact[(i, i)] / draws as f64).sqrt());
    }
}

#[test]
fn group_variance_at_identity() {
    let so3 = SpaceId::Group(GroupId::so(3).unwrap());
    let k = heat(&so3, 3);
    let e = vec![SpacePoint::element(liekernels::groups::GroupElement::identity(GroupId::so(3).unwrap()))];
    let vals: Vec<f64> = (0..4000u64)
        .map(|d| {
            let b = build_feature_basis(&k, 1, derive_seed(9, d)).unwrap();
            prior_sample(&b, derive_seed(10, d)).evaluate(&e).unwrap()[0].powi(2)
        })
        .collect();
    let (m, se) = common::mean_se(vals.into_iter());
    assert!((m - 1.4).abs() < 5.0 * se, "{m} ± {se}");
}

#[test]
fn fundamental_sets() {
    let s2 = SpaceId::sphere(2);
    let k = heat(&s2, 4);
    let l1 = |x: &SpacePoint, y: &SpacePoint| Ok(k.level_values(x, y)?[1]);
    let fs = find_fundamental_set(l1, 1, &s2, 11).unwrap();
    assert_eq!(fs.points, haar_sample_space(&s2, &mut seeded(11), 1));
    let fs = find_fundamental_set(l1, 3, &s2, 12).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let t: f64 =
                fs.points[i].as_vector().unwrap().iter().zip(fs.points[j].as_vector().unwrap()).map(|(a, b)| a * b).sum();
            assert!((fs.gram[(i, j)] - 3.0 * t).abs() < 1e-12);
        }
    }
    assert!(fs.min_eigenvalue > 0.0);
    match find_fundamental_set(l1, 4, &s2, 13) {
        Err(Error::DegenerateLevel(msg)) => assert!(msg.contains('4')),
        other => panic!("expected a degenerate level, got {other:?}"),
    }
}

#[test]
fn kl_bases_are_orthonormal_and_reproducing() {
    let s2 = SpaceId::sphere(2);
    let k = heat(&s2, 5);
    for level in 0..5usize {
        let f = |x: &SpacePoint, y: &SpacePoint| Ok(k.level_values(x, y)?[level]);
        let n = 2 * level + 1;
        let fs = find_fundamental_set(f, n, &s2, 14 + level as u64).unwrap();
        let kl = kl_basis(&fs).unwrap();
        let g = &kl.coefficients * &fs.gram * kl.coefficients.transpose();
        assert!((g - DMatrix::identity(n, n)).amax() < 1e-8);
        let pts = haar_sample_space(&s2, &mut seeded(20), 10);
        for p in pts.chunks(2) {
            let a = kl.evaluate(f, &p[0]).unwrap();
            let b = kl.evaluate(f, &p[1]).unwrap();
            assert!((a.dot(&b) - f(&p[0], &p[1]).unwrap()).abs() < 1e-6);
        }
    }
    // single function: K(·, x)/√K(x, x)
    let whole = |x: &SpacePoint, y: &SpacePoint| k.value(x, y);
    let fs = find_fundamental_set(whole, 1, &s2, 30).unwrap();
    let kl = kl_basis(&fs).unwrap();
    let p = haar_sample_space(&s2, &mut seeded(31), 1);
    let e = kl.evaluate(whole, &p[0]).unwrap()[0];
    assert!((e - k.value(&p[0], &fs.points[0]).unwrap() / 1.4f64.sqrt()).abs() < 1e-14);
}

#[test]
fn posterior_samples_interpolate_without_noise() {
    for s in ["S2", "SO(3)", "RP2"] {
        let space: SpaceId = s.parse().unwrap();
        let k = heat(&space, 12);
        let xs = haar_sample_space(&space, &mut seeded(40), 5);
        let y = vec![0.3, -1.0, 0.5, 2.0, 0.0];
        let d = Dataset::new(xs.clone(), y.clone(), Noise::Scalar(0.0)).unwrap();
        let prior = prior_sample(&build_feature_basis(&k, 32, 41).unwrap(), 42);
        let post = pathwise_posterior_sample(&prior, &k, &d, 43).unwrap();
        let f = post.evaluate(&xs).unwrap();
        for (a, b) in f.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8, "{s}: {a} vs {b}");
        }
        assert_eq!(post.jitter(), 0.0);
    }
}

#[test]
fn records_round_trip_and_are_deterministic() {
    let s2 = SpaceId::sphere(2);
    let k = heat(&s2, 6);
    let a = prior_sample(&build_feature_basis(&k, 8, 50).unwrap(), 51).record();
    let b = prior_sample(&build_feature_basis(&k, 8, 50).unwrap(), 51).record();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    let back: PriorSampleRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(a, back);
    let c = prior_sample(&build_feature_basis(&k, 8, 52).unwrap(), 51).record();
    assert_ne!(a.basis.phases, c.basis.phases);
}
