//! Weight sequences and their evaluators against brute-force sups and factorial sums.

use udiff::weights::*;

fn profile(name: &str, alpha: Option<f64>, beta: Option<f64>) -> ScaleProfile {
    ScaleProfile::from_family(Family::from_name(name, alpha, beta).unwrap()).unwrap()
}

/// `ln M_l` for `l = 0..=n` from the defining products of `μ_j`.
fn ln_m_oracle(mu: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for l in 1..=n {
        out[l] = out[l - 1] + mu(l - 1).ln();
    }
    out
}

fn omega_oracle(ln_m: &[f64], y: f64) -> f64 {
    ln_m.iter().enumerate().map(|(l, m)| l as f64 * y.ln() - m).fold(0.0, f64::max)
}

#[test]
fn gevrey_log_factorials() {
    for alpha in [1.0, 1.5, 2.0, 3.0] {
        let ws = WeightSequence::build(Family::Gevrey { alpha }, 512).unwrap();
        let oracle = ln_m_oracle(|j| ((j + 1) as f64).powf(alpha), 600);
        for l in [0usize, 1, 2, 10, 100, 511, 600] {
            let v = ws.ln_m(l as u64).unwrap();
            assert!((v - oracle[l]).abs() <= 1e-10 * oracle[l].max(1.0), "alpha={alpha} l={l}");
        }
    }
}

#[test]
fn omega_matches_brute_force_for_every_family() {
    let fams: Vec<(ScaleProfile, Box<dyn Fn(usize) -> f64>)> = vec![
        (profile("analytic", None, None), Box::new(|j| (j + 1) as f64)),
        (profile("gevrey", Some(1.5), None), Box::new(|j| ((j + 1) as f64).powf(1.5))),
        (profile("expsqrt", None, None), Box::new(|j| (j as f64).sqrt().exp())),
        (
            profile("gevreylog", Some(2.0), Some(1.0)),
            Box::new(|j| ((j + 1) as f64).powi(2) * (std::f64::consts::E + j as f64).ln()),
        ),
    ];
    for (sp, mu) in &fams {
        let ln_m = ln_m_oracle(mu, 4000);
        for y in log_grid(0.5, 1e3, 25) {
            let o = sp.omega(y).unwrap();
            let want = omega_oracle(&ln_m, y);
            assert!((o.value - want).abs() <= 1e-9 * want.max(1.0), "{:?} y={y}: {} vs {want}", sp.sequence().family(), o.value);
        }
    }
}

#[test]
fn cauchy_function_matches_brute_force() {
    for alpha in [1.0, 2.0] {
        let sp = profile("gevrey", Some(alpha), None);
        for sigma in [1e-3, 1e-2, 0.1, 0.5, 2.0] {
            // C(σ) = sup_l (l+1)^α e^{−σl}
            let brute = (0..200_000).map(|l| alpha * ((l + 1) as f64).ln() - sigma * l as f64).fold(f64::NEG_INFINITY, f64::max);
            let c = sp.ln_c(sigma).unwrap();
            assert!((c.value - brute).abs() <= 1e-10 * brute.abs().max(1.0), "alpha={alpha} sigma={sigma}");
            assert!(c.certified);
        }
    }
}

#[test]
fn c_inverse_round_trips() {
    for (name, a, b) in [("gevrey", Some(2.0), None), ("explog", None, None), ("expsqrt", None, None)] {
        let sp = profile(name, a, b);
        for y in log_grid(1.5, 1e8, 17) {
            let sigma = sp.c_inv(y).unwrap();
            assert!(sigma > 0.0 && sigma <= sp.sigma_bar());
            let back = sp.c(sigma).unwrap().value;
            assert!((back - y).abs() <= 1e-8 * y, "{name} y={y}: C(C^-1(y)) = {back}");
        }
    }
}

#[test]
fn measured_conditions_agree_with_known_verdicts() {
    for (name, a, b) in [
        ("analytic", None, None),
        ("gevrey", Some(2.0), None),
        ("gevreylog", Some(1.5), Some(2.0)),
        ("explog", None, None),
        ("expsqrt", None, None),
    ] {
        let sp = profile(name, a, b);
        let r = check_conditions(sp.sequence());
        let known = r.known.expect("built-in family");
        assert_eq!(r.h1.pass, known[0], "{name} H1");
        assert_eq!(r.mg.bounded, known[3], "{name} MG");
    }
}

#[test]
fn product_scan_stays_below_the_norm_constant() {
    for alpha in [1.0, 1.2, 3.0] {
        let ws = WeightSequence::build(Family::Gevrey { alpha }, 512).unwrap();
        let s = product_constant_scan(&ws, 200).unwrap();
        assert!(s.product_max <= NORM_CONSTANT && s.shifted_max <= NORM_CONSTANT);
        // the l = 0 term alone equals 1
        assert!(s.product_max >= 1.0);
    }
}

#[test]
fn least_squares_recovers_a_line() {
    let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
    let (m, c, r2) = least_squares(&xs, &ys);
    assert!((m + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-13 && (r2 - 1.0).abs() < 1e-14);
}
