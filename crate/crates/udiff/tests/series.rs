//! Fourier–Taylor series arithmetic against pointwise evaluation and explicit sums.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udiff::series::{norm_upper, FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile, NORM_CONSTANT};

fn random_series(lay: &Arc<Layout>, rng: &mut ChaCha8Rng, kmax: i64, degrees: &[[u32; 2]]) -> FTSeries {
    let mut f = FTSeries::zero(lay.clone());
    for m in degrees {
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                f.add_cos(&[a, b], m, rng.gen_range(-0.5..0.5)).unwrap();
                f.add_sin(&[a, b], m, rng.gen_range(-0.5..0.5)).unwrap();
            }
        }
    }
    f
}

fn points(rng: &mut ChaCha8Rng, count: usize) -> Vec<([f64; 2], [f64; 2])> {
    (0..count).map(|_| ([rng.gen(), rng.gen()], [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])).collect()
}

#[test]
fn product_is_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lay = Layout::new(2, 0, 8, 2, 0).unwrap();
    let f = random_series(&lay, &mut rng, 4, &[[0, 0], [1, 0]]);
    let g = random_series(&lay, &mut rng, 4, &[[0, 0], [0, 1]]);
    let fg = f.mul(&g).unwrap();
    for (th, ia) in points(&mut rng, 20) {
        let want = f.value(&th, &ia) * g.value(&th, &ia);
        assert!((fg.value(&th, &ia) - want).abs() < 1e-12);
    }
}

#[test]
fn angle_derivative_matches_the_mode_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lay = Layout::new(2, 0, 6, 1, 0).unwrap();
    let f = random_series(&lay, &mut rng, 6, &[[0, 0]]);
    let d = f.d_theta(1);
    for (th, _) in points(&mut rng, 10) {
        let mut want = Complex64::new(0.0, 0.0);
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                let c = f.get(&[a, b], &[0, 0], &[]);
                let ph = 2.0 * PI * (a as f64 * th[0] + b as f64 * th[1]);
                want += c * Complex64::new(0.0, 2.0 * PI * b as f64) * Complex64::from_polar(1.0, ph);
            }
        }
        assert!((d.value(&th, &[0.0, 0.0]) - want.re).abs() < 1e-11);
    }
}

#[test]
fn bracket_with_an_action_is_an_angle_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lay = Layout::new(2, 0, 6, 2, 0).unwrap();
    let f = random_series(&lay, &mut rng, 3, &[[0, 0], [1, 0]]);
    let i2 = FTSeries::action_monomial(lay.clone(), &[0, 1], 1.0).unwrap();
    // {f, I₂} = ∂_{θ₂} f
    let b = f.bracket(&i2).unwrap();
    assert!(b.sub_series(&f.d_theta(1)).unwrap().max_abs() < 1e-12);
    // antisymmetry
    let g = random_series(&lay, &mut rng, 3, &[[0, 0], [0, 1]]);
    let s = f.bracket(&g).unwrap().add_series(&g.bracket(&f).unwrap()).unwrap();
    assert!(s.max_abs() < 1e-12);
}

#[test]
fn angle_functions_are_recovered_exactly() {
    let lay = Layout::new(2, 0, 5, 0, 0).unwrap();
    let f = FTSeries::from_angle_fn(lay.clone(), |t| 0.3 + (2.0 * PI * (2.0 * t[0] - t[1])).cos() - 0.25 * (2.0 * PI * 5.0 * t[1]).sin());
    assert!((f.get(&[0, 0], &[0, 0], &[]).re - 0.3).abs() < 1e-14);
    assert!((f.get(&[2, -1], &[0, 0], &[]) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    assert!((f.get(&[0, 5], &[0, 0], &[]) - Complex64::new(0.0, 0.125)).norm() < 1e-14);
    assert!(f.reality_defect() < 1e-15);
}

#[test]
fn text_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lay = Layout::new(2, 0, 4, 2, 0).unwrap();
    let f = random_series(&lay, &mut rng, 4, &[[0, 0], [1, 1], [0, 2]]);
    let g = FTSeries::from_text(&f.to_text()).unwrap();
    assert_eq!(f.coeffs(), g.coeffs());
}

#[test]
fn norm_certificate_is_the_explicit_weighted_sum() {
    let sp = ScaleProfile::from_family(Family::Gevrey { alpha: 2.0 }).unwrap();
    let lay = Layout::new(2, 0, 8, 1, 0).unwrap();
    let mut f = FTSeries::constant(lay.clone(), 0.5);
    f.add_cos(&[3, -2], &[0, 0], 0.2).unwrap();
    f.add_sin(&[0, 1], &[1, 0], 0.1).unwrap();
    let s = 0.05;
    let w = |k1: f64, deg: f64| sp.omega(4.0 * s * (2.0 * PI * k1 + deg)).unwrap().value.exp();
    let want = NORM_CONSTANT * (0.5 + 2.0 * 0.1 * w(5.0, 0.0) + 2.0 * 0.05 * w(1.0, 1.0));
    let got = norm_upper(&f, &sp, s).unwrap().bound;
    assert!((got - want).abs() <= 1e-13 * want, "{got} vs {want}");
}

