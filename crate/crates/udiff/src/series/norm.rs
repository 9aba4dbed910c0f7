//! Certified upper bounds for the weighted sup-norm of a series, and the
//! Fourier decay check they imply.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::FTSeries;
use crate::error::Result;
use crate::weights::{ScaleProfile, NORM_CONSTANT};

/// Upper bound for `|f|_{M,s}` built monomial by monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCertificate {
    pub bound: f64,
    /// Contribution of each polynomial slot (action × parameter monomial).
    pub per_monomial: Vec<f64>,
    /// Norm constant `c = 4π²/3`.
    pub constant: f64,
    pub width: f64,
}

/// `c·Σ |c_{k,m,b}| exp(Ω(4s(2π|k|₁ + |m| + |b|)))`.
///
/// Every derivative of `e^{2πik·θ}I^m w^b` of order `l` is bounded by
/// `(2π|k|₁ + |m| + |b|)^l` on the unit polydomain, and `(l+1)² ≤ 4^l` turns
/// the weighted sup into `exp(Ω(4s·rate))`. This is an upper bound, not the norm.
pub fn norm_upper(f: &FTSeries, sp: &ScaleProfile, s: f64) -> Result<NormCertificate> {
    let lay = f.layout();
    let nm = lay.n_modes();
    let mut cache: HashMap<(i64, u32), f64> = HashMap::new();
    let mut per = vec![0.0; lay.n_poly()];
    for p in 0..lay.n_poly() {
        let (dm, dw) = lay.poly_degree(p);
        let deg = dm + dw;
        let mut acc = 0.0;
        for mode in 0..nm {
            let c = f.coeffs()[p * nm + mode].norm();
            if c == 0.0 {
                continue;
            }
            let k1: i64 = lay.mode(mode).iter().map(|x| x.abs()).sum();
            let w = match cache.get(&(k1, deg)) {
                Some(w) => *w,
                None => {
                    let y = 4.0 * s * (2.0 * PI * k1 as f64 + deg as f64);
                    let w = sp.omega(y)?.value;
                    cache.insert((k1, deg), w);
                    w
                }
            };
            acc += c * w.exp();
        }
        per[p] = NORM_CONSTANT * acc;
    }
    Ok(NormCertificate { bound: per.iter().sum(), per_monomial: per, constant: NORM_CONSTANT, width: s })
}

/// Outcome of the per-mode decay test.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// `min_k ln(envelope_k / |f_k|)` over nonzero modes (positive means pass).
    pub worst_margin: f64,
    pub worst_mode: Vec<i64>,
    pub pass: bool,
    pub modes_checked: usize,
}

/// Checks `|f_k| ≤ (bound/c)·exp(−Ω(2πs|k|_∞))` for every mode, with `|f_k|` the
/// sum over polynomial slots.
pub fn decay_check(f: &FTSeries, sp: &ScaleProfile, s: f64, bound: f64) -> Result<DecayReport> {
    let lay = f.layout();
    let nm = lay.n_modes();
    let scale = bound / NORM_CONSTANT;
    let mut worst = f64::INFINITY;
    let mut worst_mode = vec![0; lay.n()];
    let mut checked = 0;
    for mode in 0..nm {
        let amp: f64 = (0..lay.n_poly()).map(|p| f.coeffs()[p * nm + mode].norm()).sum();
        if amp == 0.0 {
            continue;
        }
        checked += 1;
        let kinf = lay.mode(mode).iter().map(|x| x.abs()).max().unwrap_or(0);
        let env_ln = scale.ln() - sp.omega(2.0 * PI * s * kinf as f64)?.value;
        let margin = env_ln - amp.ln();
        if margin < worst {
            worst = margin;
            worst_mode = lay.mode(mode).to_vec();
        }
    }
    Ok(DecayReport { worst_margin: worst, worst_mode, pass: worst >= 0.0, modes_checked: checked })
}
