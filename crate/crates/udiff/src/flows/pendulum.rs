//! The pendulum `½I² − cos 2πθ`: rotational periodic orbits, the time
//! function `τ_B` and its inverse.
//!
//! The period of the rotation with action `I > 2` at `θ = 0` is
//! `1/(I·AGM(1, k′))` with `k = 2/I`. Orbits are parameterized by `ln k′` so
//! that `I − 2 ≈ k′²` stays representable for large `B`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;
use crate::weights::{WeightSequence, NORM_CONSTANT};

/// Half-width `−1/2 + (2/π)arctan e^π` of the window the orbit leaves after time 1/2.
pub fn vartheta() -> f64 {
    -0.5 + 2.0 / PI * PI.exp().atan()
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..100 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    0.5 * (a + b)
}

/// Rotation period as a function of `x = ln k′`.
fn period_ln(x: f64) -> f64 {
    let kp = x.exp();
    let k = ((1.0 - kp) * (1.0 + kp)).sqrt();
    let m = if kp < 1e-290 { PI / (2.0 * (4f64.ln() - x)) } else { agm(1.0, kp) };
    k / (2.0 * m)
}

const QUAD_TOL: f64 = 1e-14;

/// `τ_B` is integrated directly from 0 up to this angle; the asinh form takes over beyond.
const DIRECT: f64 = 0.48;

/// Rotational `B`-periodic orbit through `(0, I_B)`.
#[derive(Debug, Clone, Serialize)]
pub struct PendulumOrbit {
    pub b: u64,
    pub i_b: f64,
    /// `I_B − 2`, accurate even when it is far below machine epsilon relative to 2.
    pub excess: f64,
    pub ln_k_prime: f64,
    /// `a² = I_B² − 4` (underflows to 0 for very long periods).
    a2: f64,
    /// `ln a²`, always finite.
    ln_a2: f64,
}

/// Root-finds `I_B` (bisection in `ln k′`).
pub fn pendulum_periodic_point(b: u64) -> Result<PendulumOrbit> {
    if b == 0 {
        return Err(Error::Parameter("period B must be a positive integer".into()));
    }
    let target = b as f64;
    // I = 3 corresponds to k′ = √5/3.
    let mut hi = (5f64.sqrt() / 3.0).ln();
    // long periods: T ≈ (ln 4 − ln k′)/π
    let mut lo = f64::min(-700.0, 4f64.ln() - PI * target - 50.0);
    if period_ln(hi) >= target || period_ln(lo) <= target {
        return Err(Error::Numeric(format!("period {b} is not bracketed by I in (2, 3)")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if period_ln(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let kp = x.exp();
    let k = ((1.0 - kp) * (1.0 + kp)).sqrt();
    let excess = 2.0 * kp * kp / ((1.0 + k) * k);
    let ln_a2 = 4f64.ln() + 2.0 * x - 2.0 * k.ln();
    Ok(PendulumOrbit { b, i_b: 2.0 + excess, excess, ln_k_prime: x, a2: ln_a2.exp(), ln_a2 })
}

/// `(πx − sin πx)(πx + sin πx)` without cancellation.
fn sq_gap(u: f64) -> f64 {
    let x = PI * u;
    let diff = if x.abs() < 0.1 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x - x.sin()
    };
    diff * (x + x.sin())
}

impl PendulumOrbit {
    /// Period of the rotation through `(0, I_B)` recomputed from the stored parameter.
    pub fn period(&self) -> f64 {
        period_ln(self.ln_k_prime)
    }

    /// `I_B² − 4`.
    pub fn a_squared(&self) -> f64 {
        self.a2
    }

    /// `τ_B′(θ) = 1/√(I_B² − 4 sin²πθ)`.
    pub fn tau_prime(&self, theta: f64) -> f64 {
        let c = (PI * theta).cos();
        1.0 / (self.a2 + 4.0 * c * c).sqrt()
    }

    /// `∫₀^u dφ/√(a² + 4 sin²πφ)` for small `u`: the closed-form `asinh`
    /// part carries the near-singular behaviour, the remainder is smooth.
    fn near_half(&self, u: f64) -> Result<f64> {
        // asinh(2πu/a), with the logarithmic form once a is negligible
        let z_ln = (2.0 * PI * u).ln() - 0.5 * self.ln_a2;
        let main = if z_ln > 300.0 { (z_ln + 2f64.ln()) / (2.0 * PI) } else { z_ln.exp().asinh() / (2.0 * PI) };
        let a2 = self.a2;
        let corr = move |v: f64| {
            let s = (PI * v).sin();
            let base = (a2 + (2.0 * PI * v).powi(2)).sqrt();
            let g2m1 = 4.0 * sq_gap(v) / (a2 + 4.0 * s * s);
            let g = (1.0 + g2m1).sqrt();
            g2m1 / (g + 1.0) / base
        };
        Ok(main + quad::integrate(&corr, 0.0, u, QUAD_TOL)?)
    }

    /// `τ_B(θ) = ∫₀^θ dφ/√(I_B² − 4 sin²πφ)`, odd and with `τ_B(θ + 1) = τ_B(θ) + B`.
    pub fn tau(&self, theta: f64) -> Result<f64> {
        let shift = theta.round();
        let r = theta - shift;
        let sign = r.signum();
        let r = r.abs();
        let val = if r <= DIRECT {
            let a2 = self.a2;
            quad::integrate(
                &move |p: f64| {
                    let c = (PI * p).cos();
                    1.0 / (a2 + 4.0 * c * c).sqrt()
                },
                0.0,
                r,
                QUAD_TOL,
            )?
        } else {
            0.5 * self.b as f64 - self.near_half(0.5 - r)?
        };
        Ok(shift * self.b as f64 + sign * val)
    }

    /// Position `θ_B(t)` on the orbit started at `θ = 0`.
    pub fn theta_at(&self, t: f64) -> Result<f64> {
        let bf = self.b as f64;
        let turns = (t / bf).round();
        let r = t - turns * bf;
        let sign = r.signum();
        let r = r.abs().min(0.5 * bf);
        let edge = self.tau(DIRECT)?;
        let theta = if r <= edge {
            let (mut lo, mut hi) = (0.0, DIRECT);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.tau(mid)? < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            let rem = 0.5 * bf - r;
            let (mut lo, mut hi) = (0.0, 0.5 - DIRECT);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.near_half(mid)? < rem {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 - 0.5 * (lo + hi)
        };
        Ok(turns + sign * theta)
    }

    /// `ln(1/2 − τ_B(ϑ))`: how far the orbit leads the separatrix at the window edge,
    /// from `1/I_∞ − 1/I_B = a²/(I_B I_∞ (I_B + I_∞))` without cancellation.
    pub fn ln_separatrix_lead(&self) -> Result<f64> {
        let a2 = self.a2;
        let f = move |p: f64| {
            let c = (PI * p).cos();
            let sep = 2.0 * c;
            let ib = (a2 + 4.0 * c * c).sqrt();
            1.0 / (ib * sep * (ib + sep))
        };
        Ok(self.ln_a2 + quad::integrate(&f, 0.0, vartheta(), QUAD_TOL)?.ln())
    }

    /// Action along the orbit, `I = √(I_B² − 4 sin²πθ)`.
    pub fn action_at(&self, theta: f64) -> f64 {
        1.0 / self.tau_prime(theta)
    }

    /// Taylor coefficients `a_l` of `τ_B` at 0 (`l ≤ l_max`) by FFT of `τ_B′` on
    /// the circle `|z| = radius`.
    pub fn taylor_coefficients(&self, l_max: usize, radius: f64) -> Vec<f64> {
        let n = (4 * (l_max + 1)).next_power_of_two().max(64);
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let z = Complex64::from_polar(radius, 2.0 * PI * j as f64 / n as f64);
                let c = (z * PI).cos();
                (Complex64::new(self.a2, 0.0) + c * c * 4.0).sqrt().inv()
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mut out = vec![0.0; l_max + 1];
        for l in 1..=l_max {
            out[l] = buf[l - 1].re / n as f64 / radius.powi(l as i32 - 1) / l as f64;
        }
        out
    }
}

/// Taylor-sampled proxy for `|τ_B|_s`: `c·max_l (l+1)² s^l l!|a_l| / M_l`.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaProbe {
    pub b: u64,
    pub value: f64,
    pub argmax: usize,
}

pub fn lambda_probe(orbit: &PendulumOrbit, ws: &WeightSequence, s: f64, l_max: usize) -> Result<LambdaProbe> {
    let coeffs = orbit.taylor_coefficients(l_max, 0.25);
    let mut best = (f64::NEG_INFINITY, 0);
    for (l, a) in coeffs.iter().enumerate().skip(1) {
        if *a == 0.0 {
            continue;
        }
        let lf = l as f64;
        let v = 2.0 * (lf + 1.0).ln() + lf * s.ln() + statrs::function::gamma::ln_gamma(lf + 1.0) + a.abs().ln() - ws.ln_m(l as u64)?;
        if v > best.0 {
            best = (v, l);
        }
    }
    Ok(LambdaProbe { b: orbit.b, value: NORM_CONSTANT * best.0.exp(), argmax: best.1 })
}
