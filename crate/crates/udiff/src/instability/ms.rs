//! The Marco–Sauzin drift machine: the drifting annulus maps `ψ_q`, the
//! synchronized functions `g_j` built from `η_p`, a bump and the pendulum time
//! function `τ_B`, and the coupled product map that embeds `ψ_q` in a
//! near-integrable iterate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::{integrate, lambda_probe, pendulum_periodic_point, vartheta, FnHamiltonian, Hamiltonian, IntegratorKind, PendulumOrbit};
use crate::series::{norm_upper, FTSeries, Layout};
use crate::weights::{ScaleProfile, WeightSequence, NORM_CONSTANT};

/// The first `count` primes `2, 3, 5, …`.
pub fn primes(count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Reduces an angle to `[−1/2, 1/2)`.
pub fn wrap(theta: f64) -> f64 {
    let r = theta - theta.round();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

fn xi(p: u64, theta: f64) -> (f64, f64) {
    let (mut v, mut d) = (0.0, 0.0);
    for l in 0..p {
        let w = 2.0 * PI * l as f64;
        v += (w * theta).cos();
        d -= w * (w * theta).sin();
    }
    (v / p as f64, d / p as f64)
}

/// `η_p(θ) = (p⁻¹ Σ_{l<p} cos 2πlθ)²`.
pub fn eta(p: u64, theta: f64) -> f64 {
    let (v, _) = xi(p, theta);
    v * v
}

/// `(η_p, η_p′)` at `θ`.
pub fn eta_with_deriv(p: u64, theta: f64) -> (f64, f64) {
    let (v, d) = xi(p, theta);
    (v * v, 2.0 * v * d)
}

/// `η_p` as a one-angle trigonometric polynomial.
pub fn eta_series(p: u64) -> Result<FTSeries> {
    if p == 0 {
        return Err(Error::Parameter("η_p needs p ≥ 1".into()));
    }
    let kmax = 2 * (p as usize - 1);
    let lay = Layout::new(1, 0, kmax.max(1), 0, 0)?;
    let mut f = FTSeries::zero(lay);
    let pi = p as i64;
    let coef = |l: i64| if l == 0 { 1.0 / p as f64 } else { 0.5 / p as f64 };
    for a in -(pi - 1)..pi {
        for b in -(pi - 1)..pi {
            f.add(&[a + b], &[0], &[], Complex64::new(coef(a) * coef(b), 0.0))?;
        }
    }
    Ok(f)
}

/// Exactness and certificate data for one `η_p`.
#[derive(Debug, Clone, Serialize)]
pub struct EtaCheck {
    pub p: u64,
    pub at_zero: f64,
    pub deriv_at_zero: f64,
    /// `max_{1≤k<p} max(|η_p(k/p)|, |η_p′(k/p)|)`.
    pub residual: f64,
    /// Certified norm of `η_p` at width `s`.
    pub cert: f64,
    /// `c²exp(2Ω(8πps))`.
    pub bound: f64,
}

pub fn eta_check(p: u64, sp: &ScaleProfile, s: f64) -> Result<EtaCheck> {
    let (at_zero, deriv_at_zero) = eta_with_deriv(p, 0.0);
    let mut residual: f64 = 0.0;
    for k in 1..p {
        let (v, d) = eta_with_deriv(p, k as f64 / p as f64);
        residual = residual.max(v.abs()).max(d.abs());
    }
    let cert = norm_upper(&eta_series(p)?, sp, s)?.bound;
    let bound = NORM_CONSTANT * NORM_CONSTANT * (2.0 * sp.omega(8.0 * PI * p as f64 * s)?.value).exp();
    Ok(EtaCheck { p, at_zero, deriv_at_zero, residual, cert, bound })
}

/// Smooth bump `exp(4 − 1/(x(1−x)))`, `x = (θ + w)/(2w)`, supported in `(−w, w)` mod 1,
/// equal to 1 with zero derivative at `θ = 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bump {
    pub half_width: f64,
}

impl Bump {
    pub fn value(&self, theta: f64) -> f64 {
        self.value_deriv(theta).0
    }

    pub fn value_deriv(&self, theta: f64) -> (f64, f64) {
        let w = self.half_width;
        let r = wrap(theta);
        if r.abs() >= w {
            return (0.0, 0.0);
        }
        let x = (r + w) / (2.0 * w);
        let u = x * (1.0 - x);
        let v = (4.0 - 1.0 / u).exp();
        (v, v * (1.0 - 2.0 * x) / (u * u) / (2.0 * w))
    }
}

/// Numerical estimate of `|f|_{M,s}` for a 1-periodic function from its Fourier
/// coefficients: `c·max_{l≤l_max} (l+1)² s^l Σ_k (2π|k|)^l |f̂_k| / M_l`.
/// Coefficients below `1e−14` of the largest are dropped as sampling noise.
pub fn fourier_norm_estimate(f: &dyn Fn(f64) -> f64, ws: &WeightSequence, s: f64, l_max: usize, grid: usize) -> Result<f64> {
    let n = grid.next_power_of_two().max(64);
    let mut buf: Vec<Complex64> = (0..n).map(|i| Complex64::new(f(i as f64 / n as f64), 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amps: Vec<(f64, f64)> = buf
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = if i <= n / 2 { i as f64 } else { (n - i) as f64 };
            (k, c.norm() / n as f64)
        })
        .collect();
    let top = amps.iter().map(|a| a.1).fold(0.0, f64::max);
    let kept: Vec<(f64, f64)> = amps.into_iter().filter(|a| a.1 > 1e-14 * top).collect();
    let mut best = f64::NEG_INFINITY;
    for l in 0..=l_max {
        let lf = l as f64;
        let terms: Vec<f64> = kept
            .iter()
            .filter(|(k, _)| l == 0 || *k > 0.0)
            .map(|(k, a)| if l == 0 { a.ln() } else { lf * (2.0 * PI * k).ln() + a.ln() })
            .collect();
        if terms.is_empty() {
            continue;
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        let v = 2.0 * (lf + 1.0).ln() + lf * s.ln() + lse - ws.ln_m(l as u64)?;
        best = best.max(v);
    }
    Ok(NORM_CONSTANT * best.exp())
}

/// One factor `g^{(i)}` of the synchronized function.
#[derive(Debug, Clone)]
pub enum SyncFactor {
    /// `η_p(θ)`.
    Eta { p: u64 },
    /// `η_p(τ_B(θ))·bump(θ)`.
    EtaTau { p: u64, orbit: PendulumOrbit, bump: Bump },
}

impl SyncFactor {
    /// Value and derivative at `θ`.
    pub fn value_deriv(&self, theta: f64) -> Result<(f64, f64)> {
        match self {
            SyncFactor::Eta { p } => Ok(eta_with_deriv(*p, theta)),
            SyncFactor::EtaTau { p, orbit, bump } => {
                let (b, db) = bump.value_deriv(theta);
                if b == 0.0 && db == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let r = wrap(theta);
                let t = orbit.tau(r)?;
                let (e, de) = eta_with_deriv(*p, t);
                Ok((e * b, de * orbit.tau_prime(r) * b + e * db))
            }
        }
    }
}

/// Value and gradient of `g = g^{(2)} ⊗ … ⊗ g^{(n)}`.
fn product_grad(factors: &[SyncFactor], angles: &[f64]) -> Result<(f64, Vec<f64>)> {
    let vd: Vec<(f64, f64)> = factors.iter().zip(angles).map(|(f, t)| f.value_deriv(*t)).collect::<Result<_>>()?;
    let value: f64 = vd.iter().map(|x| x.0).product();
    let grad = (0..vd.len())
        .map(|i| vd.iter().enumerate().map(|(m, x)| if m == i { x.1 } else { x.0 }).product())
        .collect();
    Ok((value, grad))
}

/// Which exponent enters `B_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BjExponent {
    /// `exp(2Ω(s′p_j))`.
    Statement,
    /// `exp(2(n−1)Ω(s′p_j))`, what the norm estimate of `g_j` consumes.
    Proof,
}

impl BjExponent {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "statement" => Ok(BjExponent::Statement),
            "proof" => Ok(BjExponent::Proof),
            _ => Err(Error::Config(format!("unknown B_j exponent '{name}' (statement|proof)"))),
        }
    }
}

/// Tunables of [`build_ms`].
#[derive(Debug, Clone, Serialize)]
pub struct MsOptions {
    pub exponent: BjExponent,
    /// Doublings of `B_j` allowed when the certificate fails.
    pub max_inflations: u32,
    /// Derivative orders sampled by the Fourier norm estimate.
    pub l_max: usize,
    /// Samples per unit angle for the Fourier norm estimate.
    pub grid: usize,
    /// Orbit points outside the window checked for exact vanishing.
    pub exclusion_samples: usize,
}

impl Default for MsOptions {
    fn default() -> Self {
        MsOptions { exponent: BjExponent::Proof, max_inflations: 64, l_max: 60, grid: 4096, exclusion_samples: 64 }
    }
}

/// Synchronization residuals along the periodic orbit.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SyncReport {
    pub g_at_a: f64,
    pub dg_at_a: f64,
    /// Orbit points `G^k(a)` inside the bump window that were checked.
    pub window_points: usize,
    /// Sampled orbit points outside the window.
    pub exclusion_points: usize,
    /// `min |θ^{(2)}| − ϑ` over the sampled exclusion points (positive means outside).
    pub exclusion_margin: f64,
    pub max_value: f64,
    pub max_grad: f64,
    pub worst_k: i64,
}

impl SyncReport {
    pub fn holds(&self, tol: f64) -> bool {
        (self.g_at_a - 1.0).abs() <= tol && self.dg_at_a <= tol && self.max_value <= tol && self.max_grad <= tol && self.exclusion_margin > 0.0
    }
}

/// The synchronized data `(g_j, G_j, a_j, q_j)`.
#[derive(Debug, Clone, Serialize)]
pub struct MSConstruction {
    pub n: usize,
    pub j: usize,
    pub s: f64,
    /// `p_{j−(n−3)}, …, p_j` (just `p_j` when `n = 2`).
    pub primes: Vec<u64>,
    pub p_j: u64,
    pub a_prime: u64,
    pub a: u64,
    pub b: u64,
    pub q: u64,
    pub exponent: BjExponent,
    /// `E_j`, the exponent entering `B_j`.
    pub exponent_value: f64,
    /// Norm constant `c`.
    pub c: f64,
    /// Numerical norm estimate of the bump.
    pub c1: f64,
    /// Largest sampled `|τ_B|_s` proxy.
    pub lambda: f64,
    pub s_prime: f64,
    /// `B_j` before any inflation.
    pub b_formula: u64,
    pub inflations: u32,
    pub vartheta: f64,
    #[serde(skip)]
    pub orbit: PendulumOrbit,
    pub i_b: f64,
    /// `|T(I_B) − B|/B`.
    pub period_residual: f64,
    /// `a_j` factor by factor as `(θ, I)`.
    pub point: Vec<(f64, f64)>,
    pub cert_g2: f64,
    pub cert_eta: Vec<f64>,
    pub cert_g: f64,
    /// `q⁻¹cert(g)·A²`; the certificate holds when this is at most 1.
    pub cert_ratio: f64,
    pub sync: SyncReport,
    #[serde(skip)]
    factors: Vec<SyncFactor>,
}

impl MSConstruction {
    /// `g_j` and its gradient at the angles `(θ₂, …, θ_n)`.
    pub fn g_grad(&self, angles: &[f64]) -> Result<(f64, Vec<f64>)> {
        product_grad(&self.factors, angles)
    }

    /// Angles of `G_j^k(a_j)`, closed form per factor.
    pub fn orbit_angles(&self, k: i64) -> Result<Vec<f64>> {
        let mut out = vec![wrap(self.orbit.theta_at(k as f64 / self.a as f64)?)];
        for &p in &self.primes[..self.n - 2] {
            out.push(wrap(k.rem_euclid(p as i64) as f64 / p as f64));
        }
        Ok(out)
    }

    pub fn certificate_holds(&self) -> bool {
        self.cert_ratio <= 1.0
    }

    pub fn factors(&self) -> &[SyncFactor] {
        &self.factors
    }
}

/// Largest `|τ_B|_s` proxy over a few periods.
fn lambda_estimate(ws: &WeightSequence, s: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for b in [3u64, 10, 30] {
        let orbit = pendulum_periodic_point(b)?;
        best = best.max(lambda_probe(&orbit, ws, s, 40)?.value);
    }
    Ok(best)
}

/// Builds `(g_j, G_j, a_j, q_j)` for `n ≥ 2` degrees of freedom at index `j`.
///
/// `B_j` follows the formula with `s′ = 8πs·max(1, Λ)`; when the measured
/// certificate `q⁻¹cert(g_j) ≤ A_j⁻²` fails, `B_j` is doubled and the check repeated.
pub fn build_ms(n: usize, j: usize, s: f64, sp: &ScaleProfile, opts: &MsOptions) -> Result<MSConstruction> {
    if n < 2 {
        return Err(Error::Parameter("the coupled map needs n ≥ 2".into()));
    }
    if n >= 3 && j < n - 3 {
        return Err(Error::Parameter(format!("index j = {j} needs j ≥ n − 3 = {}", n - 3)));
    }
    if !(s > 0.0) {
        return Err(Error::Parameter("width s must be positive".into()));
    }
    let pr = primes(j + 1);
    let p_j = pr[j];
    let factor_primes: Vec<u64> = if n >= 3 { pr[j + 3 - n..=j].to_vec() } else { vec![] };
    let a_prime = factor_primes.iter().try_fold(1u64, |acc, p| acc.checked_mul(*p));
    let a = a_prime
        .and_then(|ap| ap.checked_mul(p_j).map(|a| (ap, a)))
        .ok_or_else(|| Error::Budget("A_j overflows u64".into()))?;
    let (a_prime, a) = a;
    let ws = sp.sequence();
    let c = NORM_CONSTANT;
    let vt = vartheta();
    let bump = Bump { half_width: vt };
    let c1 = fourier_norm_estimate(&|t| bump.value(t), ws, s, opts.l_max, opts.grid)?;
    let lambda = lambda_estimate(ws, s)?;
    let s_prime = 8.0 * PI * s * lambda.max(1.0);
    let om = sp.omega(s_prime * p_j as f64)?.value;
    let exponent_value = match opts.exponent {
        BjExponent::Statement => 2.0 * om,
        BjExponent::Proof => 2.0 * (n as f64 - 1.0) * om,
    };
    let ln_core = c1.ln() + 2.0 * (n as f64 - 1.0) * c.ln() + (a as f64).ln() + exponent_value;
    if ln_core > 40.0 {
        return Err(Error::Budget(format!("B_j = 2⌈exp({ln_core:.1}) + 1⌉ is beyond the supported range")));
    }
    let b_formula = 2 * (ln_core.exp() + 1.0).ceil() as u64;
    // the η factors on the rotators do not depend on B
    let cert_eta: Vec<f64> = factor_primes
        .iter()
        .map(|p| Ok(norm_upper(&eta_series(*p)?, sp, s)?.bound))
        .collect::<Result<_>>()?;
    let mut b = b_formula;
    let mut inflations = 0;
    loop {
        let q = a.checked_mul(b).ok_or_else(|| Error::Budget("q_j overflows u64".into()))?;
        let orbit = pendulum_periodic_point(b)?;
        let g2 = SyncFactor::EtaTau { p: p_j, orbit: orbit.clone(), bump };
        let cert_g2 = fourier_norm_estimate(&|t| g2.value_deriv(t).map(|x| x.0).unwrap_or(f64::NAN), ws, s, opts.l_max, opts.grid)?;
        if !cert_g2.is_finite() {
            return Err(Error::Numeric("norm estimate of g^(2) is not finite".into()));
        }
        let cert_g = cert_g2 * cert_eta.iter().product::<f64>();
        let cert_ratio = cert_g / q as f64 * (a as f64) * (a as f64);
        if cert_ratio > 1.0 {
            if inflations >= opts.max_inflations {
                return Err(Error::Consistency(format!("certificate q⁻¹|g| ≤ A⁻² still fails after {inflations} doublings of B_j")));
            }
            b = b.checked_mul(2).ok_or_else(|| Error::Budget("B_j overflows u64".into()))?;
            inflations += 1;
            continue;
        }
        let mut factors = vec![g2];
        factors.extend(factor_primes.iter().map(|&p| SyncFactor::Eta { p }));
        let mut point = vec![(0.0, orbit.i_b / a as f64)];
        point.extend(factor_primes.iter().map(|&p| (0.0, 1.0 / p as f64)));
        let period_residual = (orbit.period() - b as f64).abs() / b as f64;
        let mut msc = MSConstruction {
            n,
            j,
            s,
            primes: if n >= 3 { factor_primes.clone() } else { vec![p_j] },
            p_j,
            a_prime,
            a,
            b,
            q,
            exponent: opts.exponent,
            exponent_value,
            c,
            c1,
            lambda,
            s_prime,
            b_formula,
            inflations,
            vartheta: vt,
            i_b: orbit.i_b,
            orbit,
            period_residual,
            point,
            cert_g2,
            cert_eta: cert_eta.clone(),
            cert_g,
            cert_ratio,
            sync: SyncReport::default(),
            factors,
        };
        msc.sync = sync_report(&msc, opts.exclusion_samples)?;
        return Ok(msc);
    }
}

fn sync_report(msc: &MSConstruction, samples: usize) -> Result<SyncReport> {
    let zero = vec![0.0; msc.n - 1];
    let (g0, dg0) = msc.g_grad(&zero)?;
    let mut rep = SyncReport {
        g_at_a: g0,
        dg_at_a: dg0.iter().map(|x| x.abs()).fold(0.0, f64::max),
        exclusion_margin: f64::INFINITY,
        ..Default::default()
    };
    let visit = |k: i64, rep: &mut SyncReport| -> Result<()> {
        let ang = msc.orbit_angles(k)?;
        let (v, g) = msc.g_grad(&ang)?;
        let gm = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if v.abs().max(gm) > rep.max_value.max(rep.max_grad) {
            rep.worst_k = k;
        }
        rep.max_value = rep.max_value.max(v.abs());
        rep.max_grad = rep.max_grad.max(gm);
        Ok(())
    };
    // window points: |k| ≤ (A − 1)/2
    let half = ((msc.a - 1) / 2) as i64;
    for k in (-half..=half).filter(|k| *k != 0) {
        visit(k, &mut rep)?;
        rep.window_points += 1;
    }
    // sampled points of the rest of the orbit, whose pendulum angle leaves the window
    let lo = half + 1;
    let hi = msc.q as i64 - half - 1;
    if hi >= lo {
        let count = samples.max(2) as i64;
        let mut ks: Vec<i64> = (0..count).map(|i| lo + ((hi - lo) as i128 * i as i128 / (count - 1) as i128) as i64).collect();
        ks.dedup();
        for k in ks {
            let th = msc.orbit_angles(k)?[0];
            rep.exclusion_margin = rep.exclusion_margin.min(th.abs() - msc.vartheta);
            visit(k, &mut rep)?;
            rep.exclusion_points += 1;
        }
    }
    Ok(rep)
}

/// Smallest `|θ_B(t)| − ϑ` over `t ∈ [1/2, B − 1/2]`.
///
/// The edge `t = 1/2` is the minimum and approaches `ϑ` like `a²` as `B` grows, so it
/// is evaluated from the separatrix lead; interior samples are checked directly.
/// The edge margin underflows to zero past `B ≈ 110`.
pub fn exclusion_margin(orbit: &PendulumOrbit, samples: usize) -> Result<f64> {
    let bf = orbit.b as f64;
    let vt = vartheta();
    let mut worst = orbit.ln_separatrix_lead()?.exp() * orbit.action_at(vt);
    let n = samples.max(2);
    for i in 1..n {
        let t = 0.5 + (bf - 1.0) * i as f64 / n as f64;
        worst = worst.min(wrap(orbit.theta_at(t)?).abs() - vt);
    }
    Ok(worst)
}

/// `ψ_q(θ, I) = (θ + qI, I − q⁻¹U′(θ + qI))` with `U(θ) = −(2π)⁻¹sin 2πθ`; angles kept in `[−1/2, 1/2)`.
pub fn psi_q(q: u64, theta: f64, action: f64) -> (f64, f64) {
    let th = wrap((q as f64).mul_add(action, theta));
    (th, action + (2.0 * PI * th).cos() / q as f64)
}

/// `ψ_q^k(0, 0)`, iterated in the scaled action `J = qI`, where the map reads
/// `(θ, J) ↦ (θ + J, J + cos 2π(θ + J))` and integer points stay exact.
pub fn psi_q_orbit(q: u64, k: u64) -> (f64, f64) {
    let (mut t, mut j) = (0.0f64, 0.0f64);
    for _ in 0..k {
        t = wrap(t + j);
        j += (2.0 * PI * t).cos();
    }
    (t, j / q as f64)
}

/// How the second block is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CouplingMode {
    /// Rational rotations everywhere: every factor map is closed form.
    Exact,
    /// The rescaled pendulum integrated numerically.
    Pendulum,
}

impl CouplingMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exact" => Ok(CouplingMode::Exact),
            "pendulum" => Ok(CouplingMode::Pendulum),
            _ => Err(Error::Config(format!("unknown coupling mode '{name}' (exact|pendulum)"))),
        }
    }
}

/// A point of `𝔸ⁿ` for the coupled map. In exact mode the second block also
/// carries rotation counters, so that its angles are the rationals `counter/d`.
#[derive(Debug, Clone, Serialize)]
pub struct MapState {
    pub theta: Vec<f64>,
    pub action: Vec<f64>,
    counters: Vec<u64>,
}

/// `Ψ = Φ^{f⊗g}∘(F × G)` on `𝔸ⁿ`, `F = Φ^{I₁²/2}`, `f = q⁻¹U`.
pub struct CoupledMap {
    pub q: u64,
    pub mode: CouplingMode,
    factors: Vec<SyncFactor>,
    /// The point `a` of the second block.
    a_theta: Vec<f64>,
    a_action: Vec<f64>,
    /// Rotation denominators of the second block (exact mode).
    denominators: Vec<u64>,
    /// Time-one map of `½I₂² − A⁻²cos 2πθ₂` (pendulum mode).
    pendulum: Option<FnHamiltonian>,
    pub tol: f64,
    /// Worst synchronization residual along the realized orbit of `a`.
    pub sync_residual: f64,
    /// `|G^q(a) − a|∞` along the realized orbit.
    pub period_residual: f64,
}

/// Record of a coupled-map run started at `((0, 0), a)`.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRun {
    pub q: u64,
    /// Map steps at the recorded samples (multiples of `q`).
    pub steps: Vec<u64>,
    pub theta1: Vec<f64>,
    pub i1: Vec<f64>,
    /// `max |block − a|∞` at the recorded samples.
    pub block_return: f64,
    /// `max_k |I₁(kq) − k/q|`.
    pub drift_error: f64,
}

/// `η_p` at the rational angle `m/d`, with the zeros of the Dirichlet kernel detected exactly.
fn eta_rational(p: u64, m: u64, d: u64) -> (f64, f64) {
    let r = m % d;
    if r == 0 {
        return (1.0, 0.0);
    }
    if (p as u128 * r as u128) % d as u128 == 0 {
        return (0.0, 0.0);
    }
    eta_with_deriv(p, r as f64 / d as f64)
}

impl CoupledMap {
    /// The `n = 2` exact machine: `G` the rotation by `1/q`, `g = η_q`.
    pub fn rotation(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Parameter("q must be positive".into()));
        }
        Self::assemble(q, CouplingMode::Exact, vec![SyncFactor::Eta { p: q }], vec![1.0 / q as f64], vec![q], None, 0.0)
    }

    /// The machine of an MS construction. Exact mode replaces the pendulum by the
    /// rotation by `1/A_j` and needs `q = A_j`; pendulum mode needs `q = A_j·B` and
    /// uses the `B`-periodic pendulum orbit, integrated to tolerance `tol`.
    pub fn from_ms(msc: &MSConstruction, q: u64, mode: CouplingMode, tol: f64) -> Result<Self> {
        let a = msc.a;
        let mut factors = Vec::new();
        let mut a_action = Vec::new();
        let mut denominators = Vec::new();
        let mut pendulum = None;
        match mode {
            CouplingMode::Exact => {
                if q != a {
                    return Err(Error::Parameter(format!("exact mode needs q = A_j = {a}, got {q}")));
                }
                factors.push(SyncFactor::Eta { p: msc.p_j });
                a_action.push(1.0 / a as f64);
                denominators.push(a);
            }
            CouplingMode::Pendulum => {
                if q % a != 0 {
                    return Err(Error::Parameter(format!("pendulum mode needs q divisible by A_j = {a}, got {q}")));
                }
                if !(tol > 0.0) {
                    return Err(Error::Parameter("pendulum mode needs an integrator tolerance".into()));
                }
                let orbit = pendulum_periodic_point(q / a)?;
                a_action.push(orbit.i_b / a as f64);
                factors.push(SyncFactor::EtaTau { p: msc.p_j, orbit, bump: Bump { half_width: msc.vartheta } });
                let k = 1.0 / (a as f64 * a as f64);
                pendulum = Some(FnHamiltonian::mechanical(
                    1,
                    move |t| -k * (2.0 * PI * t[0]).cos(),
                    move |t| vec![2.0 * PI * k * (2.0 * PI * t[0]).sin()],
                ));
            }
        }
        if msc.n >= 3 {
            for &p in &msc.primes {
                factors.push(SyncFactor::Eta { p });
                a_action.push(1.0 / p as f64);
                denominators.push(p);
            }
        }
        Self::assemble(q, mode, factors, a_action, denominators, pendulum, tol)
    }

    fn assemble(
        q: u64,
        mode: CouplingMode,
        factors: Vec<SyncFactor>,
        a_action: Vec<f64>,
        denominators: Vec<u64>,
        pendulum: Option<FnHamiltonian>,
        tol: f64,
    ) -> Result<Self> {
        let a_theta = vec![0.0; factors.len()];
        let mut m = CoupledMap { q, mode, factors, a_theta, a_action, denominators, pendulum, tol, sync_residual: 0.0, period_residual: 0.0 };
        let limit = match mode {
            CouplingMode::Exact => 1e-12,
            CouplingMode::Pendulum => 1e-6,
        };
        let mut st = m.initial_state();
        let residual = |m: &CoupledMap, st: &MapState, target: f64| -> Result<f64> {
            let (v, g) = m.g_grad(st)?;
            Ok((v - target).abs().max(g.iter().map(|x| x.abs()).fold(0.0, f64::max)))
        };
        m.sync_residual = residual(&m, &st, 1.0)?;
        if m.sync_residual > limit {
            return Err(Error::Consistency(format!("synchronization fails at k = 0: residual {:.3e}", m.sync_residual)));
        }
        for k in 1..q {
            m.block_map(&mut st)?;
            let r = residual(&m, &st, 0.0)?;
            m.sync_residual = m.sync_residual.max(r);
            if r > limit {
                return Err(Error::Consistency(format!("synchronization fails at k = {k}: residual {r:.3e}")));
            }
        }
        m.block_map(&mut st)?;
        m.period_residual = m.block_distance(&st);
        Ok(m)
    }

    /// Number of degrees of freedom `n`.
    pub fn dim(&self) -> usize {
        1 + self.factors.len()
    }

    /// `((0, 0), a)`.
    pub fn initial_state(&self) -> MapState {
        let mut theta = vec![0.0];
        theta.extend(&self.a_theta);
        let mut action = vec![0.0];
        action.extend(&self.a_action);
        MapState { theta, action, counters: vec![0; self.denominators.len()] }
    }

    fn block_distance(&self, st: &MapState) -> f64 {
        let dt = st.theta[1..].iter().zip(&self.a_theta).map(|(x, y)| wrap(x - y).abs());
        let di = st.action[1..].iter().zip(&self.a_action).map(|(x, y)| (x - y).abs());
        dt.chain(di).fold(0.0, f64::max)
    }

    fn g_grad(&self, st: &MapState) -> Result<(f64, Vec<f64>)> {
        match self.mode {
            CouplingMode::Pendulum => product_grad(&self.factors, &st.theta[1..]),
            CouplingMode::Exact => {
                let vd: Vec<(f64, f64)> = self
                    .factors
                    .iter()
                    .zip(st.counters.iter().zip(&self.denominators))
                    .map(|(f, (m, d))| match f {
                        SyncFactor::Eta { p } => Ok(eta_rational(*p, *m, *d)),
                        SyncFactor::EtaTau { .. } => Err(Error::Unsupported("pendulum factor in exact mode".into())),
                    })
                    .collect::<Result<_>>()?;
                let value = vd.iter().map(|x| x.0).product();
                let grad = (0..vd.len())
                    .map(|i| vd.iter().enumerate().map(|(m, x)| if m == i { x.1 } else { x.0 }).product())
                    .collect();
                Ok((value, grad))
            }
        }
    }

    /// `G` on the second block.
    fn block_map(&self, st: &mut MapState) -> Result<()> {
        match self.mode {
            CouplingMode::Exact => {
                for (i, (c, d)) in st.counters.iter_mut().zip(&self.denominators).enumerate() {
                    *c = (*c + 1) % d;
                    st.theta[1 + i] = wrap(*c as f64 / *d as f64);
                }
            }
            CouplingMode::Pendulum => {
                let h = self.pendulum.as_ref().expect("pendulum mode carries its Hamiltonian");
                let tr = integrate(h as &dyn Hamiltonian, &st.theta[1..2], &st.action[1..2], 1.0, self.tol, 1, IntegratorKind::Splitting)?;
                let (t1, i1) = tr.last();
                st.theta[1] = wrap(t1[0]);
                st.action[1] = i1[0];
                for i in 2..st.theta.len() {
                    st.theta[i] = wrap(st.theta[i] + st.action[i]);
                }
            }
        }
        Ok(())
    }

    /// One application of `Ψ`.
    pub fn step(&self, st: &mut MapState) -> Result<()> {
        st.theta[0] = wrap(st.theta[0] + st.action[0]);
        self.block_map(st)?;
        let (gv, gg) = self.g_grad(st)?;
        let q = self.q as f64;
        let th = st.theta[0];
        let f = -(2.0 * PI * th).sin() / (2.0 * PI * q);
        st.action[0] += (2.0 * PI * th).cos() / q * gv;
        if self.mode == CouplingMode::Exact && f != 0.0 && gg.iter().any(|g| *g != 0.0) {
            return Err(Error::Consistency("exact mode: the second block was kicked off its rational orbit".into()));
        }
        for (i, g) in st.action[1..].iter_mut().zip(&gg) {
            *i -= f * g;
        }
        Ok(())
    }

    /// Iterates `Ψ` `blocks·q` times from `((0, 0), a)`, recording after each block of `q` steps.
    pub fn run(&self, blocks: u64) -> Result<DriftRun> {
        let mut st = self.initial_state();
        let mut run = DriftRun { q: self.q, steps: vec![0], theta1: vec![0.0], i1: vec![0.0], block_return: 0.0, drift_error: 0.0 };
        for b in 1..=blocks {
            for _ in 0..self.q {
                self.step(&mut st)?;
            }
            run.steps.push(b * self.q);
            run.theta1.push(st.theta[0]);
            run.i1.push(st.action[0]);
            run.block_return = run.block_return.max(self.block_distance(&st));
            run.drift_error = run.drift_error.max((st.action[0] - b as f64 / self.q as f64).abs());
        }
        Ok(run)
    }
}

/// One row of the drift-time bracket.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub j: usize,
    pub a: u64,
    pub q: u64,
    /// `ε_j = A_j⁻²`.
    pub eps: f64,
    /// `ln τ_j` with `τ_j = q_j²` map steps.
    pub ln_tau: f64,
    /// `ε_j^{−1/(2(n−2))}`.
    pub x: f64,
    /// `c` with `2Ω(c·x) = ln τ_j`.
    pub c_fit: f64,
}

/// Fitted bracket `2Ω(c_low x_j) ≤ ln τ_j ≤ 2Ω(c_high x_j)` over a sweep of `j`.
#[derive(Debug, Clone, Serialize)]
pub struct TimingFit {
    pub rows: Vec<TimingRow>,
    pub c_low: f64,
    pub c_high: f64,
}

pub fn timing_fit(n: usize, js: &[usize], s: f64, sp: &ScaleProfile, opts: &MsOptions) -> Result<TimingFit> {
    if n < 3 {
        return Err(Error::Parameter("the timing bracket needs n ≥ 3".into()));
    }
    let mut rows = Vec::new();
    for &j in js {
        let msc = build_ms(n, j, s, sp, opts)?;
        let eps = 1.0 / (msc.a as f64 * msc.a as f64);
        let ln_tau = 2.0 * (msc.q as f64).ln();
        let x = eps.powf(-1.0 / (2.0 * (n as f64 - 2.0)));
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * sp.omega(mid.exp() * x)?.value < ln_tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rows.push(TimingRow { j, a: msc.a, q: msc.q, eps, ln_tau, x, c_fit: (0.5 * (lo + hi)).exp() });
    }
    let c_low = rows.iter().map(|r| r.c_fit).fold(f64::INFINITY, f64::min);
    let c_high = rows.iter().map(|r| r.c_fit).fold(0.0, f64::max);
    Ok(TimingFit { rows, c_low, c_high })
}
