//! Closed-form drifting orbits for linear integrable parts: `H_j = v_j·I + ε_jμ_j sin 2πk_j·θ`
//! with `v_j` a rational approximation of `ω` and `k_j ⟂ v_j`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::diophantine::{lattice_norm, ContFrac, FrequencyProfile};
use crate::error::{Error, Result};
use crate::flows::{integrate, FnHamiltonian, IntegratorKind};
use crate::weights::ScaleProfile;

/// The `j`-th drifting example for `ω = (1, ω̄₁, …, ω̄_{d−1}, 0, …, 0) ∈ ℝⁿ`.
#[derive(Debug, Clone, Serialize)]
pub struct DiffusionExample {
    pub omega: Vec<f64>,
    /// Number of nonzero frequencies.
    pub d: usize,
    pub j: usize,
    pub p: i64,
    pub q: i64,
    pub k: Vec<i64>,
    /// `v_j = (1, p/q, ω̄₂, …, 0)`.
    pub v: Vec<f64>,
    pub eps: f64,
    pub mu: f64,
    pub s: f64,
    /// `Ω(8π|k_j|s)`.
    pub omega_arg: f64,
    /// `k_j·(q v_j)` in integer arithmetic (zero by construction).
    pub kv_integer: i128,
    /// `Δ_ω(q_j)` from the profile.
    pub delta_q: f64,
    /// `(2Δ_ω(q_j))⁻¹ ≤ ε_j ≤ 2Δ_ω(q_j)⁻¹`.
    pub eps_sandwich: bool,
    /// `q_j ≤ |k_j| ≤ 2q_j`.
    pub norm_bracket: bool,
    /// Lower and upper drift rates of the sandwich, per unit time.
    pub rate_lower: f64,
    pub rate_upper: f64,
}

impl DiffusionExample {
    /// Exact drift rate `ε_j exp(−Ω(8π|k_j|s))`.
    pub fn drift_rate(&self) -> f64 {
        self.eps * (-self.omega_arg).exp()
    }

    /// `ε_jμ_j`, the amplitude of the resonant term.
    pub fn amplitude(&self) -> f64 {
        self.eps * self.mu
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Closed-form state at time `t`.
    pub fn closed_form(&self, theta0: &[f64], action0: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let phase = 2.0 * PI * self.k_dot(theta0);
        let a = self.amplitude();
        let th = theta0.iter().zip(&self.v).map(|(x, v)| x + t * v).collect();
        let ia = action0.iter().zip(&self.k).map(|(i, k)| i - t * 2.0 * PI * *k as f64 * a * phase.cos()).collect();
        (th, ia)
    }

    fn k_dot(&self, theta: &[f64]) -> f64 {
        self.k.iter().zip(theta).map(|(k, t)| *k as f64 * t).sum()
    }

    /// The Hamiltonian as a pointwise function.
    pub fn hamiltonian(&self) -> FnHamiltonian {
        let (v, k, a) = (self.v.clone(), self.k.clone(), self.amplitude());
        let (v2, k2) = (v.clone(), k.clone());
        FnHamiltonian::new(
            self.dim(),
            move |th, ia| {
                let ph: f64 = k.iter().zip(th).map(|(k, t)| *k as f64 * t).sum();
                v.iter().zip(ia).map(|(v, i)| v * i).sum::<f64>() + a * (2.0 * PI * ph).sin()
            },
            move |th, _ia| {
                let ph: f64 = k2.iter().zip(th).map(|(k, t)| *k as f64 * t).sum();
                let c = 2.0 * PI * a * (2.0 * PI * ph).cos();
                (k2.iter().map(|k| c * *k as f64).collect(), v2.clone())
            },
        )
    }
}

/// Builds the example from the `j`-th convergent of `ω̄₁`, padding `ω` with zeros up to `n`.
///
/// `fp` describes the nonzero block `(1, ω̄₁, …)` and supplies `Δ_ω` and `Δ*_ω`.
pub fn build_linear_diffusion(fp: &FrequencyProfile, n: usize, j: usize, s: f64, sp: &ScaleProfile) -> Result<DiffusionExample> {
    let wb = fp.omega();
    let d = wb.len();
    if wb[0] != 1.0 {
        return Err(Error::Parameter("the first frequency must be normalized to 1".into()));
    }
    if n <= d {
        return Err(Error::Parameter(format!("need n > d = {d} (at least one zero frequency)")));
    }
    if !(s > 0.0) {
        return Err(Error::Parameter("width s must be positive".into()));
    }
    let x = wb[1];
    let cf = match fp.continued_fraction() {
        Some(cf) => cf.clone(),
        None => ContFrac::from_f64(x.abs())?,
    };
    let convs = cf.convergents(1e15);
    let c = convs
        .get(j)
        .ok_or_else(|| Error::Parameter(format!("convergent index {j} out of range (have {})", convs.len())))?;
    if c.err == 0.0 {
        return Err(Error::Parameter(format!("convergent {j} is exact: ω̄₁ is rational")));
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let (p, q) = (sign * c.p as i64, c.q as i64);
    let mut omega = wb.to_vec();
    omega.resize(n, 0.0);
    let mut v = omega.clone();
    v[1] = p as f64 / q as f64;
    let mut k = vec![0i64; n];
    k[0] = p;
    k[1] = -q;
    let kv_integer = p as i128 * q as i128 - q as i128 * p as i128;
    let eps = c.err / q as f64;
    let kn = lattice_norm(&k) as f64;
    let omega_arg = sp.omega(8.0 * PI * kn * s)?.value;
    let mu = (-omega_arg).exp() / (2.0 * PI * kn);
    let delta_q = fp.delta(q as f64)?;
    let eps_sandwich = 1.0 / (2.0 * delta_q) <= eps && eps <= 2.0 / delta_q;
    let norm_bracket = q as f64 <= kn && kn <= 2.0 * q as f64;
    let big = fp.delta_star(2.0 / eps)?;
    let small = fp.delta_star(1.0 / (2.0 * eps))?;
    let rate_lower = eps * (-sp.omega(16.0 * PI * s * big)?.value).exp();
    let rate_upper = eps * (-sp.omega(8.0 * PI * s * small)?.value).exp();
    Ok(DiffusionExample {
        omega,
        d,
        j,
        p,
        q,
        k,
        v,
        eps,
        mu,
        s,
        omega_arg,
        kv_integer,
        delta_q,
        eps_sandwich,
        norm_bracket,
        rate_lower,
        rate_upper,
    })
}

/// Closed form against the integrator along one orbit.
#[derive(Debug, Clone, Serialize)]
pub struct DiffusionRun {
    pub times: Vec<f64>,
    pub closed: Vec<Vec<f64>>,
    pub integrated: Vec<Vec<f64>>,
    /// `|Π_d(I(t) − I₀)|₁` from the closed form.
    pub drift: Vec<f64>,
    /// `max_t |I_closed − I_integrated|∞`.
    pub max_deviation: f64,
    /// `max_t |drift(t) − |t|·rate|` relative to the rate.
    pub drift_formula_error: f64,
    /// `|t|·rate_lower ≤ drift ≤ |t|·rate_upper` at every sample.
    pub sandwich: bool,
    pub integrator_steps: usize,
}

/// Runs the orbit from `(θ₀, I₀)` with `k_j·θ₀ ∈ ℤ`, sampling `samples + 1` times on `[0, t_end]`.
pub fn run_linear_diffusion(
    ex: &DiffusionExample,
    theta0: &[f64],
    action0: &[f64],
    t_end: f64,
    samples: usize,
    tol: f64,
) -> Result<DiffusionRun> {
    let n = ex.dim();
    if theta0.len() != n || action0.len() != n {
        return Err(Error::Parameter("initial state dimension mismatch".into()));
    }
    let ph = ex.k_dot(theta0);
    if (ph - ph.round()).abs() > 1e-12 {
        return Err(Error::Parameter(format!("initial phase k·θ₀ = {ph} is not an integer")));
    }
    let h = ex.hamiltonian();
    let traj = integrate(&h, theta0, action0, t_end, tol, samples, IntegratorKind::ImplicitMidpoint)?;
    let rate = ex.drift_rate();
    let mut run = DiffusionRun {
        times: traj.times.clone(),
        closed: Vec::new(),
        integrated: traj.actions.clone(),
        drift: Vec::new(),
        max_deviation: 0.0,
        drift_formula_error: 0.0,
        sandwich: true,
        integrator_steps: traj.steps,
    };
    for (t, ia) in traj.times.iter().zip(&traj.actions) {
        let (_, closed) = ex.closed_form(theta0, action0, *t);
        let dev = closed.iter().zip(ia).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        run.max_deviation = run.max_deviation.max(dev);
        let drift: f64 = closed.iter().zip(action0).take(ex.d).map(|(a, b)| (a - b).abs()).sum();
        if *t > 0.0 {
            run.drift_formula_error = run.drift_formula_error.max((drift - t.abs() * rate).abs() / (t.abs() * rate));
        }
        run.sandwich &= t.abs() * ex.rate_lower <= drift * (1.0 + 1e-12) && drift <= t.abs() * ex.rate_upper * (1.0 + 1e-12);
        run.closed.push(closed);
        run.drift.push(drift);
    }
    Ok(run)
}
