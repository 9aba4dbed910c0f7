//! Small-denominator profiles checked against Pell and Fibonacci identities, brute
//! force and direct lattice arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udiff::diophantine::*;

#[test]
fn sqrt2_convergents_are_pell_fractions() {
    let cf = ContFrac::sqrt2();
    let conv = cf.convergents(1e6);
    // p_{j+1} = 2p_j + p_{j−1}, p² − 2q² = ±1
    for c in &conv {
        assert_eq!((c.p * c.p - 2 * c.q * c.q).abs(), 1, "{}/{}", c.p, c.q);
        // |q√2 − p| = |p² − 2q²|/(q√2 + p) without cancellation
        let err = 1.0 / (c.q as f64 * 2f64.sqrt() + c.p as f64);
        assert!((c.err - err).abs() <= 1e-9 * err, "{}/{}: {} vs {err}", c.p, c.q, c.err);
    }
    assert!(conv.iter().any(|c| (c.p, c.q) == (577, 408)));
}

#[test]
fn continued_fraction_psi_matches_brute_force_for_sqrt2() {
    let fp = FrequencyProfile::from_cf(ContFrac::sqrt2(), false).unwrap();
    let brute = psi_table(fp.omega(), 150, DEFAULT_LATTICE_BUDGET).unwrap();
    for (i, b) in brute.iter().enumerate() {
        let e = fp.psi((i + 1) as f64).unwrap();
        assert!((b.value - e.value).abs() <= 1e-9 * e.value, "Q={}", i + 1);
        // the achieving mode realises the value
        let kw = dot(&b.k, fp.omega()).abs();
        assert!((1.0 / kw - b.value).abs() <= 1e-9 * b.value);
        assert!(lattice_norm(&b.k) as usize <= i + 1);
    }
}

#[test]
fn brute_force_psi_in_three_dimensions() {
    let omega = [1.0, 2f64.sqrt(), 3f64.sqrt()];
    let table = psi_table(&omega, 12, DEFAULT_LATTICE_BUDGET).unwrap();
    // direct enumeration over the ℓ1 ball
    for q in 1..=12i64 {
        let mut best = 0.0f64;
        for a in -q..=q {
            for b in -q..=q {
                for c in -q..=q {
                    if (a, b, c) == (0, 0, 0) || a.abs() + b.abs() + c.abs() > q {
                        continue;
                    }
                    best = best.max(1.0 / (a as f64 + b as f64 * omega[1] + c as f64 * omega[2]).abs());
                }
            }
        }
        assert!((table[q as usize - 1].value - best).abs() <= 1e-12 * best);
    }
}

#[test]
fn delta_star_staircase_is_the_generalized_inverse() {
    let fp = FrequencyProfile::golden();
    for x in [10.0, 37.5, 100.0, 1e3, 1e4, 1e5] {
        let q = fp.delta_star_staircase(x).unwrap();
        assert_eq!(q, q.round());
        assert!(fp.delta(q).unwrap() <= x);
        assert!(fp.delta(q + 1.0).unwrap() > x);
    }
}

#[test]
fn dirichlet_approximations_meet_their_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let omega = [1.0, rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)];
        for q in [3.0, 10.0, 40.0] {
            let d = dirichlet_approx(&omega, q).unwrap();
            assert!(d.bounds_hold());
            let v = &d.vector;
            // T v is an integer vector and |ω − v|₁ <= (n − 1)/(TQ)
            for (x, t) in v.v.iter().zip(&v.tv) {
                assert!((x * v.period - *t as f64).abs() < 1e-9);
            }
            let err: f64 = omega.iter().zip(&v.v).map(|(a, b)| (a - b).abs()).sum();
            assert!((err - d.error).abs() < 1e-12);
            assert!(err <= 2.0 / (v.period * q) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn zbasis_vectors_span_the_lattice() {
    for q in [5.0, 20.0, 100.0] {
        let b = zbasis_approx(&FrequencyProfile::golden(), q).unwrap();
        let m: Vec<&Vec<i64>> = b.vectors.iter().map(|v| &v.tv).collect();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert_eq!(det.abs(), 1);
        assert_eq!(det, b.determinant);
    }
}

#[test]
fn periodic_vectors_are_primitive() {
    let v = PeriodicVector::new(vec![4, 6], 2.0).unwrap();
    assert_eq!(v.tv, vec![2, 3]);
    assert!((v.period - 1.0).abs() < 1e-15);
    assert_eq!(v.resonance(&[3, -2]), 0);
    assert!(PeriodicVector::new(vec![0, 0], 1.0).is_err());
    assert_eq!(gcd_vec(&[12, -18, 30]), 6);
}
