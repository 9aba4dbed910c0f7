//! Confinement radii and stability times in the four regimes, and the steep
//! and plane-curve helpers of the chained normal forms.

use serde::{Deserialize, Serialize};

use crate::diophantine::FrequencyProfile;
use crate::error::{Error, Result};
use crate::weights::ScaleProfile;

/// Implicit constants of the stability estimates (all default to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NfConstants {
    pub c1: f64,
    pub c1_tilde: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Schedule constant `A`.
    pub a: f64,
}

impl Default for NfConstants {
    fn default() -> Self {
        NfConstants { c1: 1.0, c1_tilde: 1.0, c2: 1.0, c3: 1.0, c4: 1.0, a: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Linear integrable part, Diophantine-type frequency.
    Linear,
    /// One local normal form in a ball of radius `ρ` around a `T`-periodic action.
    NonlinearLocal,
    Quasiconvex,
    Steep,
}

impl Regime {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Regime::Linear),
            "nonlinear-local" | "local" => Ok(Regime::NonlinearLocal),
            "quasiconvex" | "convex" => Ok(Regime::Quasiconvex),
            "steep" => Ok(Regime::Steep),
            other => Err(Error::Config(format!("unknown regime '{other}'"))),
        }
    }
}

/// Predicted confinement radius and the logarithm of the stability time.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub regime: Regime,
    pub radius: f64,
    /// `ln` of the predicted time (times overflow `f64` quickly).
    pub ln_time: f64,
    /// The argument handed to `C⁻¹`.
    pub c_inv_argument: f64,
    /// The truncation order `Q` (linear regime only).
    pub q: Option<f64>,
}

/// Extra inputs of [`stability_time_predict`] that only some regimes use.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegimeInputs {
    /// Ball radius for the local regime.
    pub rho: f64,
    /// Period for the local regime.
    pub period: f64,
    /// Steepness index `p` for the steep regime.
    pub p: f64,
}

fn c_inv_checked(sp: &ScaleProfile, y: f64) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(Error::Parameter(format!("C^-1 argument {y:.3e} < 1: perturbation too large for the estimate")));
    }
    sp.c_inv(y)
}

/// Evaluates the radius/time formulas of a regime for perturbation size `ε`, width `s`
/// and `n` degrees of freedom. `fp` is needed for the linear regime only.
#[allow(clippy::too_many_arguments)]
pub fn stability_time_predict(
    regime: Regime,
    sp: &ScaleProfile,
    fp: Option<&FrequencyProfile>,
    s: f64,
    eps: f64,
    n: usize,
    inputs: RegimeInputs,
    k: &NfConstants,
) -> Result<Prediction> {
    if !(eps > 0.0 && s > 0.0) || n == 0 {
        return Err(Error::Parameter("need eps > 0, s > 0 and n >= 1".into()));
    }
    let nf = n as f64;
    match regime {
        Regime::Linear => {
            let fp = fp.ok_or_else(|| Error::Parameter("the linear regime needs a frequency".into()))?;
            let q = fp.delta_star(k.c2 * s / eps)?;
            let arg = k.c4 * s * q;
            let radius = 2.0 * k.c1 * fp.psi(q)?.value * eps;
            let ln_time = (k.c1_tilde * radius * s / eps).ln() + k.c3 / c_inv_checked(sp, arg)?;
            Ok(Prediction { regime, radius, ln_time, c_inv_argument: arg, q: Some(q) })
        }
        Regime::NonlinearLocal => {
            let (rho, t) = (inputs.rho, inputs.period);
            if !(rho > 0.0 && t > 0.0) {
                return Err(Error::Parameter("the local regime needs rho > 0 and a period".into()));
            }
            let arg = s * s / (k.a * t * rho);
            let kappa2 = std::f64::consts::LN_2 / 24.0;
            let ln_time = (rho * s / eps).ln() + kappa2 / c_inv_checked(sp, arg)?;
            Ok(Prediction { regime, radius: rho, ln_time, c_inv_argument: arg, q: None })
        }
        Regime::Quasiconvex => {
            let radius = k.c1 * s * (eps / (s * s)).powf(1.0 / (2.0 * nf));
            let arg = k.c3 * s * (s * s / eps).powf(1.0 / (2.0 * nf));
            let ln_time = (k.c1_tilde * s).ln() + k.c2 / c_inv_checked(sp, arg)?;
            Ok(Prediction { regime, radius, ln_time, c_inv_argument: arg, q: None })
        }
        Regime::Steep => {
            if !(inputs.p >= 1.0) {
                return Err(Error::Parameter("steepness index p must be >= 1".into()));
            }
            let a = (nf * inputs.p).powf(nf - 1.0);
            let radius = k.c1 * eps.powf(1.0 / (2.0 * nf * a));
            let arg = k.c3 * s * eps.powf(-1.0 / (2.0 * nf * a));
            let ln_time = s.ln() + k.c2 / c_inv_checked(sp, arg)?;
            Ok(Prediction { regime, radius, ln_time, c_inv_argument: arg, q: None })
        }
    }
}

/// Stage `j` of the steep chain.
#[derive(Debug, Clone, Serialize)]
pub struct SteepStage {
    pub j: usize,
    /// `a_j = (np)^{n−j}`.
    pub a: f64,
    /// `Q_j = ε^{−1/(2n a_j)}`.
    pub q: f64,
}

/// Exponents and truncations of the steep chain; the truncation order is `K = Q₁`.
pub fn steep_schedule(n: usize, p: f64, eps: f64) -> Result<(Vec<SteepStage>, f64)> {
    if n == 0 || !(p >= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter("need n >= 1, p >= 1 and 0 < eps < 1".into()));
    }
    let nf = n as f64;
    let stages: Vec<SteepStage> = (1..=n)
        .map(|j| {
            let a = (nf * p).powi((n - j) as i32);
            SteepStage { j, a, q: eps.powf(-1.0 / (2.0 * nf * a)) }
        })
        .collect();
    let k = stages[0].q;
    Ok((stages, k))
}

/// Plane-curve probe: the largest `|Π_Λ ∇h|` along a polygonal action curve,
/// divided by `L ϱ^p` with `ϱ` the curve's length. `lattice` spans `Λ`.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneCurveProbe {
    pub max_projection: f64,
    pub length: f64,
    pub ratio: f64,
}

pub fn plane_curve_probe(grad_h: &dyn Fn(&[f64]) -> Vec<f64>, curve: &[Vec<f64>], lattice: &[Vec<f64>], l_const: f64, p: f64, samples_per_edge: usize) -> Result<PlaneCurveProbe> {
    if curve.len() < 2 || samples_per_edge == 0 {
        return Err(Error::Parameter("a curve needs two vertices and at least one sample per edge".into()));
    }
    let n = curve[0].len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in lattice {
        let mut u = v.clone();
        for b in &basis {
            let d: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let nrm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-12 {
            basis.push(u.iter().map(|x| x / nrm).collect());
        }
    }
    let mut length = 0.0;
    let mut max_proj: f64 = 0.0;
    for w in curve.windows(2) {
        length += w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        for i in 0..=samples_per_edge {
            let t = i as f64 / samples_per_edge as f64;
            let x: Vec<f64> = (0..n).map(|j| w[0][j] + t * (w[1][j] - w[0][j])).collect();
            let g = grad_h(&x);
            let proj2: f64 = basis.iter().map(|b| b.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>().powi(2)).sum();
            max_proj = max_proj.max(proj2.sqrt());
        }
    }
    let ratio = if length > 0.0 { max_proj / (l_const * length.powf(p)) } else { f64::INFINITY };
    Ok(PlaneCurveProbe { max_projection: max_proj, length, ratio })
}
