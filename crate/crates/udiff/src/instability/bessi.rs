//! Bessi-type perturbations `F = εν(1 − cos 2πk·θ)(1 + μν̃ cos 2πk̃·θ)` for
//! frequencies with ultra-differentiably small divisors, with norm certificates.

use std::f64::consts::PI;

use serde::Serialize;

use crate::diophantine::{lattice_norm, FrequencyProfile};
use crate::error::{Error, Result};
use crate::weights::{ScaleProfile, NORM_CONSTANT};

/// Where the resonant modes come from.
#[derive(Debug, Clone)]
pub enum BessiSource {
    /// Convergents of `ω = (1, x)` that satisfy the small-divisor condition.
    Frequency(FrequencyProfile),
    /// `ω = (1, [0; a₁, a₂, …])` with partial quotients chosen so that
    /// `q_{j+1} ≥ exp(Ω(4ρ(k_j)s₀))`; `terms` modes are built.
    ConstructedLiouville { terms: usize },
}

/// One resonant mode `k_j` and the data of `F_j`.
#[derive(Debug, Clone, Serialize)]
pub struct BessiTerm {
    pub j: usize,
    pub p: i64,
    pub q: i64,
    /// `k_j = (p, −q)`, so `k_j·ω = p − qx`.
    pub k: Vec<i64>,
    /// `k̃_j = (q, p)`, orthogonal to `k_j`.
    pub k_tilde: Vec<i64>,
    pub k_norm: i64,
    /// `ln |k_j·ω|` (an upper bound in constructed mode).
    pub ln_divisor: f64,
    /// `−Ω(4ρ(k_j)s₀)`, the threshold of the condition.
    pub ln_threshold: f64,
    pub condition: bool,
    /// `|k̃_j·ω| / |k̃_j|`.
    pub c_tilde: f64,
    /// `ln ν_{M,j,s}` and `ln ν̃_{M,j,s}`.
    pub ln_nu: f64,
    pub ln_nu_tilde: f64,
    /// Certified norm of `F_j` at width `s`.
    pub cert: f64,
    /// `Ω(4ρ(k_j)s₀) − Ω(4ρ(k_j)s)`, the log of the growth diagnostic.
    pub ln_growth: f64,
}

/// The family `F_j` for `j` along the built modes.
#[derive(Debug, Clone, Serialize)]
pub struct BessiExample {
    pub s0: f64,
    pub s: f64,
    pub eps: f64,
    pub mu: f64,
    /// `ω = (1, x)` (in constructed mode, the last convergent's value).
    pub omega: Vec<f64>,
    /// Partial quotients `a₁, a₂, …` in constructed mode.
    pub quotients: Vec<u64>,
    /// Constructed mode stopped before `terms` modes because the next denominator exceeded `2^60`.
    pub truncated: bool,
    pub terms: Vec<BessiTerm>,
    /// `4cε`.
    pub cert_bound: f64,
    pub certificates_hold: bool,
    pub growth_increasing: bool,
    /// `min_j |k̃_j·ω|/|k̃_j|`.
    pub c_min: f64,
}

/// Frequency scale `ρ(k) = 2π|k|₁`.
fn rho(k: &[i64]) -> f64 {
    2.0 * PI * lattice_norm(k) as f64
}

/// Sum of `c·|a|·exp(Ω(4sρ(k)))` over cosine terms given as `(ln |a|, k)`.
fn sparse_cert(terms: &[(f64, Vec<i64>)], sp: &ScaleProfile, s: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (ln_a, k) in terms {
        acc += (ln_a + sp.omega(4.0 * s * rho(k))?.value).exp();
    }
    Ok(NORM_CONSTANT * acc)
}

impl BessiExample {
    /// Cosine expansion of `F_j` as `(ln |amplitude|, sign, mode)`.
    pub fn cos_terms(&self, j: usize) -> Vec<(f64, f64, Vec<i64>)> {
        let t = &self.terms[j];
        let base = self.eps.ln() + t.ln_nu;
        let mut out = vec![(base, 1.0, vec![0, 0]), (base, -1.0, t.k.clone())];
        if self.mu > 0.0 {
            let m = base + self.mu.ln() + t.ln_nu_tilde;
            let plus: Vec<i64> = t.k.iter().zip(&t.k_tilde).map(|(a, b)| a + b).collect();
            let minus: Vec<i64> = t.k.iter().zip(&t.k_tilde).map(|(a, b)| a - b).collect();
            out.push((m, 1.0, t.k_tilde.clone()));
            out.push((m - 2f64.ln(), -1.0, plus));
            out.push((m - 2f64.ln(), -1.0, minus));
        }
        out
    }

    /// `F_j(θ)` on `ℝ²/ℤ²`.
    pub fn potential(&self, j: usize, theta: &[f64]) -> f64 {
        let t = &self.terms[j];
        let ph = |k: &[i64]| 2.0 * PI * k.iter().zip(theta).map(|(k, x)| *k as f64 * x).sum::<f64>();
        let nu = t.ln_nu.exp();
        let nut = t.ln_nu_tilde.exp();
        self.eps * nu * (1.0 - ph(&t.k).cos()) * (1.0 + self.mu * nut * ph(&t.k_tilde).cos())
    }
}

/// Builds the family with `s < s₀`, `0 < ε ≤ 1`, `0 ≤ μ ≤ 1`.
pub fn build_bessi(source: &BessiSource, sp: &ScaleProfile, s0: f64, s: f64, eps: f64, mu: f64) -> Result<BessiExample> {
    if !(s > 0.0 && s < s0) {
        return Err(Error::Parameter(format!("need 0 < s < s0, got s = {s}, s0 = {s0}")));
    }
    if !(eps > 0.0 && eps <= 1.0) || !(0.0..=1.0).contains(&mu) {
        return Err(Error::Parameter("need 0 < ε ≤ 1 and 0 ≤ μ ≤ 1".into()));
    }
    let threshold = |k: &[i64]| -> Result<f64> { Ok(-sp.omega(4.0 * s0 * rho(k))?.value) };
    // (j, p, q, ln|k·ω|)
    let mut modes: Vec<(usize, i64, i64, f64)> = Vec::new();
    let mut quotients = Vec::new();
    let mut truncated = false;
    let x;
    match source {
        BessiSource::Frequency(fp) => {
            let om = fp.omega();
            if om.len() != 2 || om[0] != 1.0 {
                return Err(Error::Parameter("Bessi frequency mode needs ω = (1, x)".into()));
            }
            x = om[1];
            let cf = fp.continued_fraction().ok_or_else(|| Error::Parameter("no continued fraction for ω".into()))?;
            let sign = if x < 0.0 { -1 } else { 1 };
            for c in cf.convergents(1e18) {
                if c.err == 0.0 || c.q > (1 << 60) {
                    break;
                }
                let (p, q) = (sign * c.p as i64, c.q as i64);
                let ln_div = c.err.ln();
                if ln_div <= threshold(&[p, -q])? {
                    modes.push((c.index as usize, p, q, ln_div));
                }
            }
            if modes.is_empty() {
                return Err(Error::NonConvergence("no convergent satisfies the small-divisor condition within the horizon".into()));
            }
        }
        BessiSource::ConstructedLiouville { terms } => {
            if *terms == 0 {
                return Err(Error::Parameter("need at least one term".into()));
            }
            let limit = 60.0 * 2f64.ln();
            let (mut p_prev, mut q_prev) = (1i64, 0i64);
            let (mut p, mut q) = (0i64, 1i64);
            let mut a = 2u64;
            let mut pending: Vec<(i64, i64)> = Vec::new();
            let mut truncated_here = false;
            for step in 0..=*terms {
                let (pn, qn) = (a as i64 * p + p_prev, a as i64 * q + q_prev);
                quotients.push(a);
                (p_prev, q_prev, p, q) = (p, q, pn, qn);
                pending.push((p, q));
                if step == *terms {
                    break;
                }
                // the next denominator must reach exp(Ω(4ρ(k)s₀)) for k = (p, −q)
                let ln_target = -threshold(&[p, -q])?;
                if ln_target > limit {
                    if step == 0 {
                        return Err(Error::Budget(format!("the second denominator would be e^{ln_target:.1}, beyond 2^60")));
                    }
                    // stop early: the last built convergent serves only as the bound for its predecessor
                    truncated_here = true;
                    break;
                }
                let target = ln_target.exp().ceil() as i64;
                a = (((target - q_prev).max(1) + q - 1) / q).max(1) as u64;
            }
            // |q_j x − p_j| < 1/q_{j+1}
            for (j, w) in pending.windows(2).enumerate() {
                modes.push((j + 1, w[0].0, w[0].1, -(w[1].1 as f64).ln()));
            }
            let last = pending.last().unwrap();
            x = last.0 as f64 / last.1 as f64;
            truncated = truncated_here;
        }
    }
    let mut ex = BessiExample {
        s0,
        s,
        eps,
        mu,
        omega: vec![1.0, x],
        quotients,
        truncated,
        terms: Vec::new(),
        cert_bound: 4.0 * NORM_CONSTANT * eps,
        certificates_hold: true,
        growth_increasing: true,
        c_min: f64::INFINITY,
    };
    for (j, p, q, ln_div) in modes {
        let k = vec![p, -q];
        let k_tilde = vec![q, p];
        let ln_threshold = threshold(&k)?;
        let ln_nu = ln_threshold;
        let ln_nu_tilde = threshold(&k_tilde)?;
        let c_tilde = (q as f64 + p as f64 * x).abs() / lattice_norm(&k_tilde) as f64;
        let ln_growth = sp.omega(4.0 * s0 * rho(&k))?.value - sp.omega(4.0 * s * rho(&k))?.value;
        ex.terms.push(BessiTerm {
            j,
            p,
            q,
            k_norm: lattice_norm(&k),
            k,
            k_tilde,
            ln_divisor: ln_div,
            ln_threshold,
            condition: ln_div <= ln_threshold,
            c_tilde,
            ln_nu,
            ln_nu_tilde,
            cert: 0.0,
            ln_growth,
        });
        let idx = ex.terms.len() - 1;
        let terms: Vec<(f64, Vec<i64>)> = ex.cos_terms(idx).into_iter().map(|(a, _, k)| (a, k)).collect();
        ex.terms[idx].cert = sparse_cert(&terms, sp, s)?;
    }
    ex.certificates_hold = ex.terms.iter().all(|t| t.cert <= ex.cert_bound);
    ex.growth_increasing = ex.terms.windows(2).all(|w| w[1].ln_growth > w[0].ln_growth);
    ex.c_min = ex.terms.iter().map(|t| t.c_tilde).fold(f64::INFINITY, f64::min);
    Ok(ex)
}
