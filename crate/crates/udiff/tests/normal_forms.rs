//! Normal forms: single steps, Neishtadt schedules, multi-frequency and local
//! variants, chains, the KAM iteration and the stability predictors.

use std::sync::Arc;

use udiff::diophantine::{br_test, zbasis_approx, BrParams, FrequencyProfile, PeriodicVector};
use udiff::flows::{integrate, IntegratorKind, SeriesHamiltonian};
use udiff::normal_forms::*;
use udiff::series::{norm_upper, FTSeries, Layout};
use udiff::weights::{Family, ScaleProfile};
use udiff::Error;

fn gevrey(alpha: f64) -> ScaleProfile {
    ScaleProfile::from_family(Family::from_name("gevrey", Some(alpha), None).unwrap()).unwrap()
}

fn mono(lay: &Arc<Layout>, m: &[u32], c: f64) -> FTSeries {
    FTSeries::action_monomial(lay.clone(), m, c).unwrap()
}

fn cos_sum(lay: &Arc<Layout>, modes: &[&[i64]], amp: f64) -> FTSeries {
    let mut f = FTSeries::zero(lay.clone());
    for k in modes {
        f.add_cos(k, &vec![0; lay.n()], amp).unwrap();
    }
    f
}

/// `I₁ + (η/2) I₂²` and the toy perturbation used for the periodic normal form.
fn toy(eta: f64, eps: f64) -> (FTSeries, FTSeries) {
    let lay = Layout::new(2, 0, 16, 2, 0).unwrap();
    let integ = mono(&lay, &[1, 0], 1.0).add_series(&mono(&lay, &[0, 2], 0.5 * eta)).unwrap();
    let f = cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1], &[1, -1], &[2, 1]], eps);
    let h = integ.add_series(&f).unwrap();
    (integ, h)
}

fn v10() -> PeriodicVector {
    PeriodicVector::new(vec![1, 0], 1.0).unwrap()
}

#[test]
fn averaging_step_with_zero_perturbation_is_identity() {
    let sp = gevrey(2.0);
    let lay = Layout::new(2, 0, 8, 2, 0).unwrap();
    let integ = mono(&lay, &[1, 0], 1.0);
    let r = averaging_step(&integ, &integ, &v10(), &sp, 0.5, 0.1, 0.0).unwrap();
    assert!(r.generators.is_empty());
    assert_eq!(r.cert_after, 0.0);
    assert!(r.transformed.sub_series(&integ).unwrap().is_zero());
}

#[test]
fn averaging_step_remainder_is_quadratic_in_the_perturbation() {
    // F = ε(1 + I₂) sin 2π(θ₁ + θ₂) is removed exactly at first order; what is left is O(ε²)
    let sp = gevrey(2.0);
    let lay = Layout::new(2, 0, 12, 2, 0).unwrap();
    let integ = mono(&lay, &[1, 0], 1.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut consts = Vec::new();
    for i in 0..4 {
        let eps = 1e-3 / 2f64.powi(i);
        let mut f = FTSeries::zero(lay.clone());
        f.add_sin(&[1, 1], &[0, 0], eps).unwrap();
        f.add_sin(&[1, 1], &[0, 1], eps).unwrap();
        let h = integ.add_series(&f).unwrap();
        let r = averaging_step(&integ, &h, &v10(), &sp, 0.5, 0.05, 0.0).unwrap();
        assert!(r.resonant.is_zero() || r.resonant.max_abs() < 1e-30 || r.resonant.average_zero().sub_series(&r.resonant).unwrap().max_abs() < 1e-18);
        xs.push(eps.ln());
        ys.push(r.log[0].remainder_cert.ln());
        consts.push(r.log[0].remainder_cert / r.log[0].predicted);
    }
    let slope = udiff::weights::least_squares(&xs, &ys).0;
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
    // measured constant against the lemma's bound stays bounded along the sweep
    let (lo, hi) = consts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    assert!(hi / lo < 2.0, "constants {consts:?}");
}

#[test]
fn neishtadt_schedule_invariants() {
    let sp = gevrey(2.0);
    for (s, eta) in [(0.5, 1e-4), (1.0, 1e-6), (0.3, 1e-3)] {
        let sch = NFSchedule::neishtadt(&sp, s, 2.0, 1.0, eta, 1.0, 1.0).unwrap();
        let (lo, hi) = sch.bracket.unwrap();
        assert!(lo <= sch.m as f64 && sch.m as f64 <= hi);
        assert!(sch.final_width() >= sch.width_floor());
        assert!((sch.sigma[0] - 2f64.ln() / 24.0).abs() < 1e-15);
        for (j, b) in sch.budgets.iter().enumerate() {
            assert!((b - (-(j as f64 + 1.0)).exp()).abs() < 1e-15);
        }
    }
    assert!(matches!(NFSchedule::neishtadt(&sp, 0.5, 2.0, 1.0, 10.0, 1.0, 1.0), Err(Error::Parameter(_))));
}

#[test]
fn single_step_schedule_equals_averaging_step() {
    let sp = gevrey(2.0);
    let (integ, h) = toy(1e-3, 1e-4);
    let sch = NFSchedule::with_steps(1, 2.0, 0.5, 1.0).unwrap();
    let a = periodic_normal_form(&integ, &h, &v10(), &sch, &sp, 1e-3, None).unwrap();
    let b = averaging_step(&integ, &h, &v10(), &sp, 0.5, 2f64.ln() / 24.0, 1e-3).unwrap();
    assert!(a.transformed.sub_series(&b.transformed).unwrap().max_abs() == 0.0);
    assert_eq!(a.final_width, b.final_width);
}

#[test]
fn periodic_normal_form_toy_meets_budgets() {
    let sp = gevrey(2.0);
    let (eta, s) = (1e-4, 0.5);
    let (integ, h) = toy(eta, 1e-4);
    let v = v10();
    let p = h.sub_series(&integ).unwrap();
    let nu = norm_upper(&p.sub_series(&p.average_periodic(&v).unwrap()).unwrap(), &sp, s).unwrap().bound;
    let sch = NFSchedule::neishtadt(&sp, s, 2.0, 1.0, eta, nu, 1.0).unwrap();
    assert!(sch.m >= 2);
    let r = periodic_normal_form(&integ, &h, &v, &sch, &sp, eta, None).unwrap();
    assert!(r.cert_after <= 2.0 * nu * (-(sch.m as f64)).exp());
    assert_eq!(r.violations(), 0);
    assert!(r.commutation_defect() <= 1e-10);
    assert!(r.cert_after <= r.predicted_bound.unwrap());
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..10).map(|i| (vec![0.1 * i as f64, 0.37 + 0.05 * i as f64], vec![0.05, -0.1 + 0.02 * i as f64])).collect();
    let orig = |th: &[f64], ia: &[f64]| h.value(th, ia);
    assert!(r.grid_identity_defect(&orig, &pts).unwrap() <= 1e-8);
}

#[test]
fn halving_eps_never_increases_the_final_remainder() {
    let sp = gevrey(2.0);
    let (eta, s) = (1e-4, 0.5);
    let mut prev = f64::INFINITY;
    for i in 0..4 {
        let (integ, h) = toy(eta, 1e-4 / 2f64.powi(i));
        let sch = NFSchedule::neishtadt(&sp, s, 2.0, 1.0, eta, 1.0, 1.0).unwrap();
        let r = periodic_normal_form(&integ, &h, &v10(), &sch, &sp, eta, None).unwrap();
        assert!(r.cert_after <= prev);
        prev = r.cert_after;
    }
}

#[test]
fn first_integral_is_preserved() {
    // n = 3, F independent of θ₃, so {I₃, F} = 0; v = (1,0,0) leaves the θ₂ modes resonant
    let sp = gevrey(2.0);
    let lay = Layout::new(3, 0, 6, 2, 0).unwrap();
    let eta = 1e-4;
    let integ = mono(&lay, &[1, 0, 0], 1.0).add_series(&mono(&lay, &[0, 2, 0], 0.5 * eta)).unwrap();
    let f = cos_sum(&lay, &[&[0, 1, 0], &[1, 1, 0], &[1, 0, 0]], 1e-4);
    let h = integ.add_series(&f).unwrap();
    let v = PeriodicVector::new(vec![1, 0, 0], 1.0).unwrap();
    let sch = NFSchedule::neishtadt(&sp, 0.5, 2.0, 1.0, eta, 1.0, 1.0).unwrap();
    let i3 = mono(&lay, &[0, 0, 1], 1.0);
    let r = periodic_normal_form(&integ, &h, &v, &sch, &sp, eta, Some(&i3)).unwrap();
    assert!(!r.resonant.is_zero());
    assert!(r.first_integral_defect.unwrap() <= 1e-10);
}

#[test]
fn multifrequency_with_one_vector_matches_periodic_normal_form() {
    let sp = gevrey(2.0);
    let (eta, s) = (1e-4, 0.5);
    let (integ, h) = toy(eta, 1e-4);
    let v = v10();
    let m = multifrequency_normal_form(&integ, &h, &[v.clone()], &[eta], &sp, s, 1.0).unwrap();
    let p = h.sub_series(&integ).unwrap();
    let nu = norm_upper(&p.sub_series(&p.average_periodic(&v).unwrap()).unwrap(), &sp, s).unwrap().bound;
    let sch = NFSchedule::neishtadt(&sp, s, 2.0, 1.0, eta, nu, 1.0).unwrap();
    let r = periodic_normal_form(&integ, &h, &v, &sch, &sp, eta, None).unwrap();
    assert!(m.transformed.sub_series(&r.transformed).unwrap().max_abs() == 0.0);
}

/// `ω₀·I + (η/2)|I|² + ε f` for the golden frequency.
fn golden_linear(eps: f64, eta: f64) -> (FTSeries, FTSeries, Vec<PeriodicVector>) {
    let fp = FrequencyProfile::golden();
    let lay = Layout::new(2, 0, 10, 2, 0).unwrap();
    let w = fp.omega();
    let mut integ = mono(&lay, &[1, 0], w[0]).add_series(&mono(&lay, &[0, 1], w[1])).unwrap();
    if eta > 0.0 {
        integ = integ.add_series(&mono(&lay, &[2, 0], 0.5 * eta)).unwrap().add_series(&mono(&lay, &[0, 2], 0.5 * eta)).unwrap();
    }
    let f = cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1], &[1, -1]], eps);
    let basis = zbasis_approx(&fp, 8.0).unwrap().vectors;
    (integ.clone(), integ.add_series(&f).unwrap(), basis)
}

#[test]
fn multifrequency_over_a_full_basis_keeps_only_the_zero_mode() {
    let sp = gevrey(2.0);
    let (integ, h, basis) = golden_linear(1e-5, 1e-6);
    let etas: Vec<f64> = basis.iter().map(|v| v.v.iter().zip(FrequencyProfile::golden().omega()).map(|(a, b)| (a - b).abs()).fold(1e-6, f64::max)).collect();
    let r = multifrequency_normal_form(&integ, &h, &basis, &etas, &sp, 0.5, 1.0).unwrap();
    assert!(r.resonant.sub_series(&r.resonant.average_zero()).unwrap().max_abs() == 0.0);
    assert!(r.commutation_defect() <= 1e-10);
    assert_eq!(r.vectors.len(), 2);
}

#[test]
fn multifrequency_remainder_improves_as_eps_decreases() {
    // linear integrable part ω·I; the basis is taken at Q = Δ*(s/ε) and the drift of
    // stage i is |ω − v_i|, so smaller ε means longer periods and more steps
    let sp = gevrey(2.0);
    let fp = FrequencyProfile::golden();
    let s = 0.5;
    let mut prev = f64::INFINITY;
    for eps in [1e-4, 1e-5, 1e-6] {
        let (integ, h, _) = golden_linear(eps, 0.0);
        let q = fp.delta_star(s / eps).unwrap();
        let basis = zbasis_approx(&fp, q).unwrap().vectors;
        let etas: Vec<f64> = basis.iter().map(|v| v.v.iter().zip(fp.omega()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).collect();
        let r = multifrequency_normal_form(&integ, &h, &basis, &etas, &sp, s, 1.0).unwrap();
        let ratio = r.cert_after / eps;
        assert!(ratio < prev, "eps {eps}: {ratio} vs {prev}");
        prev = ratio;
    }
}

fn kinetic(lay: &Arc<Layout>) -> FTSeries {
    mono(lay, &[2, 0], 0.5).add_series(&mono(lay, &[0, 2], 0.5)).unwrap()
}

#[test]
fn local_normal_form_identity_and_commutation() {
    let sp = gevrey(2.0);
    let lay = Layout::new(2, 0, 6, 2, 0).unwrap();
    let h = kinetic(&lay);
    let zero = FTSeries::zero(lay.clone());
    let v = v10();
    let r = local_normal_form(&h, &zero, &[1.0, 0.0], 0.1, &v, &sp, 0.5, 2.0, 1.0).unwrap();
    assert!(r.result.generators.is_empty());
    assert_eq!(r.result.cert_after, 0.0);
    assert!(r.mu < 1e-15);

    let f = cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1]], 1e-6);
    let r = local_normal_form(&h, &f, &[1.0, 0.0], 0.1, &v, &sp, 0.5, 2.0, 1.0).unwrap();
    assert!(!r.result.generators.is_empty());
    assert!(r.result.commutation_defect() <= 1e-10);
    assert!((r.remainder_original - 0.1 * r.result.cert_after).abs() <= 1e-15 * r.remainder_original.max(1e-300));

    assert!(matches!(local_normal_form(&h, &f, &[1.95, 0.0], 0.1, &v, &sp, 0.5, 2.0, 1.0), Err(Error::Domain(_))));
}

#[test]
fn local_normal_form_drift_along_v_comes_from_the_remainder() {
    let sp = gevrey(2.0);
    let lay = Layout::new(2, 0, 6, 2, 0).unwrap();
    let h = kinetic(&lay);
    let f = cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1]], 1e-6);
    let v = v10();
    let r = local_normal_form(&h, &f, &[1.0, 0.0], 0.1, &v, &sp, 0.5, 2.0, 1.0).unwrap();
    // in normal-form coordinates v·İ = −∂_v(remainder): integrate the rescaled Hamiltonian
    let k = SeriesHamiltonian::new(r.result.transformed.clone());
    let rate = r.result.remainder.d_along(&v.v).max_abs() * 10.0;
    let tr = integrate(&k, &[0.1, 0.2], &[0.0, 0.0], 10.0, 1e-10, 20, IntegratorKind::ImplicitMidpoint).unwrap();
    for (t, ia) in tr.times.iter().zip(&tr.actions) {
        let drift = (ia[0] - tr.actions[0][0]).abs();
        assert!(drift <= t * rate + 1e-9, "t {t}: drift {drift:e} vs {:e}", t * rate);
    }
}

#[test]
fn chain_base_case_and_commutation() {
    let sp = gevrey(2.0);
    let lay = Layout::new(2, 0, 6, 2, 0).unwrap();
    let h = kinetic(&lay);
    let f = cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1]], 1e-6);
    let v1 = v10();
    let stage1 = ChainStage { v: v1.clone(), rho: 0.1 };
    let one = nekhoroshev_chain(&h, &f, &[1.0, 0.0], &[stage1.clone()], &sp, 0.5, 2.0, 1.0).unwrap();
    let local = local_normal_form(&h, &f, &[1.0, 0.0], 0.1, &v1, &sp, 0.5, 2.0, 1.0).unwrap();
    assert!(one.stages[0].transformed.sub_series(&local.result.transformed).unwrap().max_abs() == 0.0);

    let stage2 = ChainStage { v: PeriodicVector::new(vec![0, 1], 1.0).unwrap(), rho: 0.01 };
    let two = nekhoroshev_chain(&h, &f, &[1.0, 0.0], &[stage1.clone(), stage2], &sp, 0.5, 2.0, 1.0).unwrap();
    assert_eq!(two.widths, vec![0.5, 0.25]);
    assert!(two.commutation.iter().all(|c| *c <= 1e-10));

    let dependent = ChainStage { v: PeriodicVector::new(vec![1, 0], 2.0).unwrap(), rho: 0.1 };
    assert!(matches!(nekhoroshev_chain(&h, &f, &[1.0, 0.0], &[stage1, dependent], &sp, 0.5, 2.0, 1.0), Err(Error::Domain(_))));
}

#[test]
fn steep_schedule_exponents() {
    let (stages, k) = steep_schedule(3, 2.0, 1e-6).unwrap();
    let a: Vec<f64> = stages.iter().map(|s| s.a).collect();
    assert_eq!(a, vec![36.0, 6.0, 1.0]);
    for s in &stages {
        assert!((s.q - 1e-6f64.powf(-1.0 / (6.0 * s.a))).abs() < 1e-12 * s.q);
    }
    assert_eq!(k, stages[0].q);
}

#[test]
fn plane_curve_probe_on_a_straight_segment() {
    // ∇h = I for h = |I|²/2; along I = (t, 0) the projection on Λ = span(e₁) is t
    let grad = |i: &[f64]| i.to_vec();
    let p = plane_curve_probe(&grad, &[vec![0.0, 0.0], vec![0.5, 0.0]], &[vec![1.0, 0.0]], 1.0, 1.0, 10).unwrap();
    assert!((p.max_projection - 0.5).abs() < 1e-15);
    assert!((p.ratio - 1.0).abs() < 1e-15);
}

#[test]
fn predictions_are_monotone_in_eps() {
    let sp = gevrey(2.0);
    let fp = FrequencyProfile::golden();
    let k = NfConstants::default();
    let inputs = RegimeInputs { rho: 0.1, period: 1.0, p: 2.0 };
    for regime in [Regime::Linear, Regime::NonlinearLocal, Regime::Quasiconvex, Regime::Steep] {
        let a = stability_time_predict(regime, &sp, Some(&fp), 1.0, 1e-8, 2, inputs, &k).unwrap();
        let b = stability_time_predict(regime, &sp, Some(&fp), 1.0, 5e-9, 2, inputs, &k).unwrap();
        assert!(b.ln_time > a.ln_time, "{regime:?}");
        if regime != Regime::NonlinearLocal {
            assert!(b.radius < a.radius, "{regime:?}");
        }
    }
}

#[test]
fn linear_prediction_uses_the_truncation_order() {
    let sp = gevrey(2.0);
    let fp = FrequencyProfile::golden();
    let k = NfConstants::default();
    let p = stability_time_predict(Regime::Linear, &sp, Some(&fp), 1.0, 1e-6, 2, RegimeInputs::default(), &k).unwrap();
    let q = fp.delta_star(1e6).unwrap();
    assert_eq!(p.q, Some(q));
    let expected = (2.0 * fp.psi(q).unwrap().value * 1e-6 / 1e-6).ln() + 1.0 / sp.c_inv(q).unwrap();
    assert!((p.ln_time - expected).abs() < 1e-12 * expected.abs());
}

#[test]
fn quasiconvex_time_has_the_gevrey_one_shape() {
    // C⁻¹(y) ≍ 1/y for α = 1, so ln T ≍ ε^{−1/(2n)}
    let sp = gevrey(1.0);
    let k = NfConstants::default();
    let n = 2;
    let ratios: Vec<f64> = [1e-6, 1e-8, 1e-10, 1e-12]
        .iter()
        .map(|&e| stability_time_predict(Regime::Quasiconvex, &sp, None, 1.0, e, n, RegimeInputs::default(), &k).unwrap().ln_time / e.powf(-1.0 / (2.0 * n as f64)))
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    assert!(hi / lo < 1.5, "{ratios:?}");
}

fn kam_hamiltonian(eps: f64) -> FTSeries {
    let lay = Layout::new(2, 0, 32, 2, 0).unwrap();
    kinetic(&lay).add_series(&cos_sum(&lay, &[&[1, 0], &[0, 1], &[1, 1]], eps)).unwrap()
}

fn kam_setup(eps: f64) -> (ScaleProfile, FrequencyProfile, KamSchedule) {
    let sp = gevrey(2.0);
    let fp = FrequencyProfile::golden();
    let q0 = br_test(&sp, &fp, &BrParams::default()).unwrap().q0.unwrap();
    let sch = KamSchedule::new(&sp, &fp, q0, eps, eps, 0.5, 1.0, 1.0, 0.0, 1.0, 6).unwrap();
    (sp, fp, sch)
}

#[test]
fn kam_schedule_invariants() {
    let (_, _, sch) = kam_setup(1e-4);
    assert!(sch.admissible());
    assert!((sch.sigma.iter().sum::<f64>() - sch.sigma_sum).abs() < 1e-15);
    assert!(sch.r.last().unwrap() > &0.25 && (sch.r.last().unwrap() - 0.25) < 0.25 / 2f64.powi(5));
    assert!(sch.q.windows(2).all(|w| w[1] >= w[0]));
    assert!((sch.eps[1] * 16.0 - sch.eps[0]).abs() < 1e-20);
}

#[test]
fn kam_step_identity_and_contraction() {
    let (sp, fp, sch) = kam_setup(1e-4);
    let basis = zbasis_approx(&fp, sch.q[0]).unwrap().vectors;
    let k0 = kam_hamiltonian(0.0).embed_param_shift(fp.omega(), 2).unwrap();
    let st = kam_step(&k0, &basis, fp.omega(), &sp, 0.05, sch.sigma[0]).unwrap();
    assert!(st.generators.is_empty());
    assert!(st.w_star.iter().all(|w| w.abs() < 1e-15));
    assert!(st.energy_shift < 1e-15);

    // single-mode A: the contraction |A⁺|/|A| ≤ 1/16 holds below a threshold found by bisection
    let ratio = |eps: f64| -> f64 {
        let lay = Layout::new(2, 0, 32, 2, 0).unwrap();
        let h = kinetic(&lay).add_series(&cos_sum(&lay, &[&[1, 1]], eps)).unwrap();
        let k = h.embed_param_shift(fp.omega(), 2).unwrap();
        let st = kam_step(&k, &basis, fp.omega(), &sp, 0.05, sch.sigma[0]).unwrap();
        assert!(st.energy_shift <= st.a_before);
        st.a_after / st.a_before
    };
    assert!(ratio(1e-4) <= 1.0 / 16.0);
    let (mut lo, mut hi) = (1e-4f64, 1.0f64);
    if ratio(hi) <= 1.0 / 16.0 {
        lo = hi;
    }
    for _ in 0..12 {
        let mid = (lo * hi).sqrt();
        if ratio(mid) <= 1.0 / 16.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!(lo >= 1e-4, "threshold {lo:e}");
}

#[test]
fn kam_with_zero_perturbation_is_trivial() {
    let (sp, fp, sch) = kam_setup(1e-4);
    let cfg = KamConfig { orbit_time: 0.0, ..Default::default() };
    let r = kam_iterate(&kam_hamiltonian(0.0), &fp, &sp, &sch, &cfg).unwrap();
    assert_eq!(r.defects, vec![0.0]);
    assert!(r.log.is_empty());
    assert_eq!(r.distance, 0.0);
}

#[test]
fn kam_converges_with_orbit_cross_check() {
    let (sp, fp, sch) = kam_setup(1e-4);
    let r = kam_iterate(&kam_hamiltonian(1e-4), &fp, &sp, &sch, &KamConfig::default()).unwrap();
    assert!(r.converged && r.log.len() <= 6);
    assert!(*r.defects.last().unwrap() <= 1e-9);
    for w in r.defects.windows(2) {
        assert!(w[1] <= w[0] / 10.0);
    }
    assert!(r.orbit_deviation.unwrap() <= 1e-8);
    // the torus is O(ε) away from the unperturbed one
    assert!(r.distance <= 10.0 * 1e-4 && r.distance >= 1e-5);
}
