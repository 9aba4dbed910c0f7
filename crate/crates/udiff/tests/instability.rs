//! Instability constructions: linear drifting orbits, the coupled drift machine and
//! Bessi-type perturbations, checked against closed forms computed independently.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udiff::diophantine::FrequencyProfile;
use udiff::instability::*;
use udiff::series::{norm_upper, FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile};
use udiff::Error;

fn gevrey(alpha: f64) -> ScaleProfile {
    ScaleProfile::from_family(Family::from_name("gevrey", Some(alpha), None).unwrap()).unwrap()
}

fn phi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn golden_diffusion_example_matches_hand_computed_data() {
    let sp = gevrey(2.0);
    let ex = build_linear_diffusion(&FrequencyProfile::golden(), 3, 3, 0.01, &sp).unwrap();
    assert_eq!((ex.p, ex.q), (5, 3));
    assert_eq!(ex.k, vec![5, -3, 0]);
    assert_eq!(ex.kv_integer, 0);
    let eps = (3.0 * phi() - 5.0).abs() / 3.0;
    assert!((ex.eps - eps).abs() < 1e-15);
    assert!((ex.eps - 4.86327e-2).abs() < 1e-6);
    let om = sp.omega(8.0 * PI * 8.0 * 0.01).unwrap().value;
    assert!((ex.mu - (-om).exp() / (2.0 * PI * 8.0)).abs() < 1e-15);
    // k·v vanishes for the rational approximation
    let kv: f64 = ex.k.iter().zip(&ex.v).map(|(k, v)| *k as f64 * v).sum();
    assert!(kv.abs() < 1e-14);
}

#[test]
fn diffusion_needs_a_zero_frequency_and_an_integer_phase() {
    let sp = gevrey(2.0);
    let fp = FrequencyProfile::golden();
    assert!(matches!(build_linear_diffusion(&fp, 2, 3, 0.01, &sp), Err(Error::Parameter(_))));
    let ex = build_linear_diffusion(&fp, 3, 3, 0.01, &sp).unwrap();
    assert!(matches!(run_linear_diffusion(&ex, &[0.1, 0.0, 0.0], &[0.0; 3], 1.0, 4, 1e-8), Err(Error::Parameter(_))));
}

#[test]
fn diffusion_orbit_follows_the_closed_form() {
    let sp = gevrey(2.0);
    let ex = build_linear_diffusion(&FrequencyProfile::golden(), 3, 4, 0.01, &sp).unwrap();
    let run = run_linear_diffusion(&ex, &[0.0; 3], &[0.2, -0.1, 0.3], 100.0, 10, 1e-8).unwrap();
    assert!(run.max_deviation <= 1e-8);
    assert!(run.drift_formula_error <= 1e-12);
    assert!(run.sandwich);
    // the third action never moves
    assert!(run.integrated.iter().all(|i| i[2] == 0.3));
}

#[test]
fn psi_q_drifts_by_one_over_q() {
    for q in [1u64, 2, 3, 7, 10, 50, 100] {
        for k in [1u64, q / 2 + 1, q, 3 * q] {
            let (t, i) = psi_q_orbit(q, k);
            assert!(t.abs() < 1e-12, "q={q} k={k} θ={t}");
            assert!((i - k as f64 / q as f64).abs() < 1e-12, "q={q} k={k} I={i}");
            // one step of the unscaled map agrees
            let (t1, i1) = psi_q(q, t, i);
            assert!(t1.abs() < 1e-12 && (i1 - (k + 1) as f64 / q as f64).abs() < 1e-12);
        }
    }
}

/// `ξ_p(θ) = sin(pπθ)cos((p−1)πθ)/(p sin πθ)`.
fn dirichlet(p: u64, th: f64) -> f64 {
    let pf = p as f64;
    if (th - th.round()).abs() < 1e-300 {
        return 1.0;
    }
    (pf * PI * th).sin() * ((pf - 1.0) * PI * th).cos() / (pf * (PI * th).sin())
}

#[test]
fn eta_agrees_with_the_dirichlet_kernel_and_vanishes_on_the_orbit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in primes(11) {
        assert!(p <= 31);
        for _ in 0..20 {
            let th: f64 = rng.gen_range(-0.5..0.5);
            assert!((eta(p, th) - dirichlet(p, th).powi(2)).abs() < 1e-13);
        }
        let chk = eta_check(p, &gevrey(2.0), 0.01).unwrap();
        assert!((chk.at_zero - 1.0).abs() < 1e-12 && chk.deriv_at_zero.abs() < 1e-12);
        assert!(chk.residual < 1e-12, "p={p}: {}", chk.residual);
        assert!(chk.cert <= chk.bound);
        let s = eta_series(p).unwrap();
        let th = 0.123;
        assert!((s.value(&[th], &[]) - eta(p, th)).abs() < 1e-13);
    }
}

#[test]
fn primes_and_block_sizes() {
    assert_eq!(primes(11), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]);
    let sp = gevrey(2.0);
    let opts = MsOptions::default();
    let m = build_ms(2, 2, 0.01, &sp, &opts).unwrap();
    assert_eq!((m.a_prime, m.a), (1, 5));
    let m = build_ms(3, 2, 0.01, &sp, &opts).unwrap();
    assert_eq!((m.a_prime, m.a), (5, 25));
    assert_eq!(m.q, m.a * m.b);
    assert!(m.b % 2 == 0 && m.b >= m.b_formula);
    assert!(m.certificate_holds());
    assert!(m.sync.holds(1e-12), "{:?}", m.sync);
    assert!(m.period_residual < 1e-12);
    let m = build_ms(4, 3, 0.01, &sp, &opts).unwrap();
    assert_eq!((m.a_prime, m.a), (35, 245));
    assert!(matches!(build_ms(1, 2, 0.01, &sp, &opts), Err(Error::Parameter(_))));
}

#[test]
fn pendulum_orbits_leave_the_window() {
    for b in 3..=30u64 {
        let o = udiff::flows::pendulum_periodic_point(b).unwrap();
        let m = exclusion_margin(&o, 64).unwrap();
        assert!(m > 0.0, "B={b}");
        // agrees with the direct evaluation while that is resolvable
        if b <= 4 {
            let direct = o.theta_at(0.5).unwrap() - udiff::flows::vartheta();
            assert!((m - direct).abs() <= 1e-3 * direct, "B={b}: {m:e} vs {direct:e}");
        }
    }
}

#[test]
fn exact_rotation_machine_drifts_from_zero_to_one() {
    for q in [1u64, 2, 5, 10, 37, 100] {
        let m = CoupledMap::rotation(q).unwrap();
        let r = m.run(q).unwrap();
        assert!((r.i1.last().unwrap() - 1.0).abs() <= 1e-9, "q={q}");
        assert!(r.drift_error <= 1e-9);
        assert_eq!(r.block_return, 0.0);
    }
}

#[test]
fn ms_machine_drifts_in_both_modes() {
    let sp = gevrey(2.0);
    let msc = build_ms(3, 2, 0.01, &sp, &MsOptions::default()).unwrap();
    let m = CoupledMap::from_ms(&msc, msc.a, CouplingMode::Exact, 0.0).unwrap();
    assert_eq!(m.dim(), 3);
    let r = m.run(msc.a).unwrap();
    assert!(r.drift_error <= 1e-9);
    assert!(matches!(CoupledMap::from_ms(&msc, msc.a + 1, CouplingMode::Exact, 0.0), Err(Error::Parameter(_))));

    let m = CoupledMap::from_ms(&msc, msc.a, CouplingMode::Pendulum, 1e-10).unwrap();
    let r = m.run(msc.a).unwrap();
    assert!(r.drift_error <= 1e-6, "{}", r.drift_error);
}

#[test]
fn bessi_without_second_mode_is_a_single_cosine() {
    let sp = gevrey(2.0);
    let ex = build_bessi(&BessiSource::ConstructedLiouville { terms: 4 }, &sp, 0.05, 0.025, 0.5, 0.0).unwrap();
    for j in 0..ex.terms.len() {
        let t = &ex.terms[j];
        assert_eq!(ex.cos_terms(j).len(), 2);
        let nu = t.ln_nu.exp();
        let th = [0.3, 0.11];
        let kth = t.k[0] as f64 * th[0] + t.k[1] as f64 * th[1];
        assert!((ex.potential(j, &th) - 0.5 * nu * (1.0 - (2.0 * PI * kth).cos())).abs() < 1e-15);
        let kmax = t.p.abs().max(t.q) as usize;
        if kmax <= 64 {
            // the sparse certificate agrees with the series norm bound
            let lay = Layout::new(2, 0, kmax, 0, 0).unwrap();
            let mut f = FTSeries::constant(lay.clone(), 0.5 * nu);
            f.add_cos(&t.k, &[0, 0], -0.5 * nu).unwrap();
            let cert = norm_upper(&f, &sp, 0.025).unwrap().bound;
            assert!((cert - t.cert).abs() <= 1e-12 * cert, "{cert} vs {}", t.cert);
        }
    }
}

#[test]
fn constructed_liouville_frequency_meets_its_divisor_targets() {
    let sp = gevrey(2.0);
    let ex = build_bessi(&BessiSource::ConstructedLiouville { terms: 6 }, &sp, 0.05, 0.025, 1.0, 0.5).unwrap();
    // rebuild the convergents from the partial quotients
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, 0i64, 1i64);
    let mut conv = Vec::new();
    for a in &ex.quotients {
        (p0, q0, p1, q1) = (p1, q1, *a as i64 * p1 + p0, *a as i64 * q1 + q0);
        conv.push((p1, q1));
    }
    assert_eq!(ex.quotients[0], 2);
    for (t, w) in ex.terms.iter().zip(conv.windows(2)) {
        assert_eq!((t.p, t.q), w[0]);
        let need = sp.omega(4.0 * 0.05 * 2.0 * PI * (t.p + t.q) as f64).unwrap().value;
        assert!((w[1].1 as f64).ln() >= need - 1e-9);
        assert!(t.condition);
    }
    assert!(ex.certificates_hold);
    assert!(ex.growth_increasing);
    assert!(ex.c_min > 0.0);
}

#[test]
fn golden_mean_has_no_ultra_small_divisors() {
    let sp = gevrey(2.0);
    let r = build_bessi(&BessiSource::Frequency(FrequencyProfile::golden()), &sp, 0.05, 0.025, 1.0, 0.5);
    assert!(matches!(r, Err(Error::NonConvergence(_))));
}
