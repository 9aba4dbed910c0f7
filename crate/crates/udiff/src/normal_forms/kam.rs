//! Affine KAM iteration with a frequency counterterm carried as a parameter jet.
//!
//! The Hamiltonian `H(θ, J)` is embedded as `K(θ, I, w) = H(θ, p₀ + w + I)`. Each
//! iteration averages the part of `K` of degree at most one in `I` along every
//! vector of a ℤ-basis of periodic approximations (first the angle part `A`, then
//! the linear part `B`), solves the frequency condition `∂_I K(·, 0, w)_0 = ω₀`
//! by Newton on the jet and recentres the parameter there.

use serde::Serialize;

use crate::diophantine::{zbasis_approx, FrequencyProfile, PeriodicVector};
use crate::error::{Error, Result};
use crate::flows::{integrate, lie_flow, CoordinateMap, IntegratorKind, SeriesHamiltonian};
use crate::series::{norm_upper, AngleBundle, FTSeries};
use crate::weights::ScaleProfile;

/// Geometric sequences driving the iteration.
#[derive(Debug, Clone, Serialize)]
pub struct KamSchedule {
    pub n: usize,
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub h: Vec<f64>,
    /// `Δ_i = 2^i Δ(Q₀)`.
    pub big_delta: Vec<f64>,
    /// `Q_i = Δ*(Δ_i)`.
    pub q: Vec<f64>,
    /// `σ_i = C⁻¹(c₂(1+η)⁻¹ s Q_i)`.
    pub sigma: Vec<f64>,
    /// Widths `s_i` with `s_{i+1} = s_i(1 − σ_i)^{2n+1}`.
    pub s: Vec<f64>,
    /// Intermediate widths `ŝ_i = s_i(1 − σ_i)^{2n}`.
    pub s_hat: Vec<f64>,
    /// Radii `r_i = r − Σ_{j<i} δ_j`.
    pub r: Vec<f64>,
    pub sigma_sum: f64,
    /// `ln 2/(4n + 2)`.
    pub sigma_budget: f64,
    /// `∏ (1 − σ_i)^{2n+1}`.
    pub product: f64,
}

impl KamSchedule {
    #[allow(clippy::too_many_arguments)]
    pub fn new(sp: &ScaleProfile, fp: &FrequencyProfile, q0: f64, eps: f64, mu: f64, r: f64, h: f64, s: f64, eta: f64, c2: f64, iterations: usize) -> Result<Self> {
        let n = fp.dim();
        let d0 = fp.delta(q0)?;
        let mut out = KamSchedule {
            n,
            eps: Vec::new(),
            mu: Vec::new(),
            delta: Vec::new(),
            h: Vec::new(),
            big_delta: Vec::new(),
            q: Vec::new(),
            sigma: Vec::new(),
            s: vec![s],
            s_hat: Vec::new(),
            r: vec![r],
            sigma_sum: 0.0,
            sigma_budget: std::f64::consts::LN_2 / (4.0 * n as f64 + 2.0),
            product: 1.0,
        };
        for i in 0..iterations {
            let p2 = 2f64.powi(i as i32);
            out.eps.push(eps / p2.powi(4));
            out.mu.push(mu / p2.powi(2));
            out.delta.push(r / (4.0 * p2));
            out.h.push(h / p2);
            let bd = p2 * d0;
            let qi = if i == 0 { q0 } else { fp.delta_star(bd)? };
            out.big_delta.push(bd);
            out.q.push(qi);
            let y = c2 / (1.0 + eta) * s * qi;
            let sg = if y <= 1.0 { sp.sigma_bar() } else { sp.c_inv(y)? };
            out.sigma.push(sg);
            let si = *out.s.last().unwrap();
            out.s_hat.push(si * (1.0 - sg).powi(2 * n as i32));
            out.s.push(si * (1.0 - sg).powi(2 * n as i32 + 1));
            let ri = *out.r.last().unwrap();
            out.r.push(ri - out.delta[i]);
            out.sigma_sum += sg;
            out.product *= (1.0 - sg).powi(2 * n as i32 + 1);
        }
        Ok(out)
    }

    /// `Σσ_i ≤ ln 2/(4n+2)` and `∏(1−σ_i)^{2n+1} ≥ 1/2`.
    pub fn admissible(&self) -> bool {
        self.sigma_sum <= self.sigma_budget && self.product >= 0.5
    }
}

/// Settings of [`kam_iterate`].
#[derive(Debug, Clone, Serialize)]
pub struct KamConfig {
    /// `p₀` with `∇h(p₀) = ω₀`.
    pub p0: Vec<f64>,
    /// Parameter jet degree.
    pub d_w: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Width used for certificates.
    pub s: f64,
    /// Samples per angle for the defect grid.
    pub grid: usize,
    /// Horizon of the orbit cross-check (0 disables it).
    pub orbit_time: f64,
}

impl Default for KamConfig {
    fn default() -> Self {
        KamConfig { p0: Vec::new(), d_w: 2, tol: 1e-9, max_iter: 6, s: 0.05, grid: 24, orbit_time: 100.0 }
    }
}

/// Output of one [`kam_step`].
#[derive(Debug, Clone)]
pub struct KamStep {
    pub transformed: FTSeries,
    /// Parameter-dependent generators in application order.
    pub generators: Vec<FTSeries>,
    /// Parameter shift solving the frequency condition.
    pub w_star: Vec<f64>,
    pub newton_iterations: usize,
    pub a_before: f64,
    pub b_before: f64,
    pub a_after: f64,
    pub b_after: f64,
    /// `|e⁺ − e(w*)|` for the energy `e(w) = K(·, 0, w)_0`.
    pub energy_shift: f64,
}

/// Angle-dependent parts of degree 0 (`A`) and 1 (`B`) in `I`, at `w = 0`.
fn ab_parts(k: &FTSeries) -> Result<(FTSeries, FTSeries)> {
    let k0 = k.eval_param(&vec![0.0; k.layout().n_w()])?;
    let osc = k0.sub_series(&k0.average_zero())?;
    Ok((osc.action_degrees(0, 0), osc.action_degrees(1, 1)))
}

fn zero_mode_value(k: &FTSeries, m: &[u32], w: &[f64]) -> f64 {
    k.zero_mode_param_poly(m)
        .iter()
        .map(|(b, c)| c * b.iter().zip(w).map(|(&e, x)| x.powi(e as i32)).product::<f64>())
        .sum()
}

fn zero_mode_grad(k: &FTSeries, m: &[u32], w: &[f64]) -> Vec<f64> {
    let poly = k.zero_mode_param_poly(m);
    (0..w.len())
        .map(|j| {
            poly.iter()
                .filter(|(b, _)| b[j] > 0)
                .map(|(b, c)| {
                    c * b[j] as f64
                        * b.iter().zip(w).enumerate().map(|(i, (&e, x))| if i == j { x.powi(e as i32 - 1) } else { x.powi(e as i32) }).product::<f64>()
                })
                .sum()
        })
        .collect()
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    Some(x)
}

/// Newton on the frequency jet: `∂_{I_j}K(·, 0, w)_0 = ω₀_j`.
fn frequency_newton(k: &FTSeries, omega0: &[f64]) -> Result<(Vec<f64>, usize)> {
    let n = omega0.len();
    let unit = |j: usize| -> Vec<u32> { (0..n).map(|i| u32::from(i == j)).collect() };
    let mut w = vec![0.0; n];
    for it in 0..50 {
        let res: Vec<f64> = (0..n).map(|j| zero_mode_value(k, &unit(j), &w) - omega0[j]).collect();
        if res.iter().all(|r| r.abs() <= 4.0 * f64::EPSILON * (1.0 + omega0[0].abs())) {
            return Ok((w, it));
        }
        let jac: Vec<Vec<f64>> = (0..n).map(|j| zero_mode_grad(k, &unit(j), &w)).collect();
        let dx = solve_linear(jac, res.iter().map(|r| -r).collect())
            .ok_or_else(|| Error::NonConvergence("frequency map jacobian is singular".into()))?;
        w.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        if dx.iter().all(|d| d.abs() <= 1e-17) {
            return Ok((w, it + 1));
        }
    }
    Err(Error::NonConvergence("Newton for the frequency counterterm did not converge".into()))
}

/// One step: for every basis vector average `A`, then `B`, then solve the
/// frequency condition and recentre the parameter.
pub fn kam_step(k: &FTSeries, basis: &[PeriodicVector], omega0: &[f64], sp: &ScaleProfile, s: f64, sigma: f64) -> Result<KamStep> {
    let n = k.layout().n();
    if k.layout().n_w() != n || basis.is_empty() || omega0.len() != n {
        return Err(Error::Parameter("kam_step needs a parameter jet with n_w = n, a basis and a frequency".into()));
    }
    let (a0, b0) = ab_parts(k)?;
    let a_before = norm_upper(&a0, sp, s)?.bound;
    let b_before = norm_upper(&b0, sp, s)?.bound;
    let e_before = k.clone();
    let mut cur = k.clone();
    let mut generators = Vec::new();
    for v in basis {
        for deg in 0..=1u32 {
            let part = cur.action_degrees(deg, deg);
            let p = part.sub_series(&part.average_periodic(v)?)?;
            if p.is_zero() {
                continue;
            }
            let x = p.solve_homological(v, true)?;
            cur = lie_flow(&x, &cur)?;
            generators.push(x);
        }
    }
    let (w_star, newton_iterations) = frequency_newton(&cur, omega0)?;
    let transformed = cur.shift_param(&w_star)?;
    let (a1, b1) = ab_parts(&transformed)?;
    let s_after = s * (1.0 - sigma).powi(2 * n as i32 + 1);
    let zero = vec![0u32; n];
    let energy_shift = (zero_mode_value(&transformed, &zero, &vec![0.0; n]) - zero_mode_value(&e_before, &zero, &w_star)).abs();
    Ok(KamStep {
        transformed,
        generators,
        w_star,
        newton_iterations,
        a_before,
        b_before,
        a_after: norm_upper(&a1, sp, s_after)?.bound,
        b_after: norm_upper(&b1, sp, s_after)?.bound,
        energy_shift,
    })
}

/// Log entry of one iteration.
#[derive(Debug, Clone, Serialize)]
pub struct KamIteration {
    pub iteration: usize,
    pub q: f64,
    pub periods: Vec<f64>,
    pub a_cert: f64,
    pub b_cert: f64,
    pub w_star_norm: f64,
    /// Invariance defect of the embedding after this iteration.
    pub defect: f64,
}

/// Output of [`kam_iterate`].
#[derive(Debug, Clone)]
pub struct KamResult {
    /// `E(θ)` with `Θ(θ) = (θ + E(θ), p₀ + W + G(θ))`.
    pub e: Vec<FTSeries>,
    pub g: Vec<FTSeries>,
    /// Total counterterm `W = Σ w*_i`.
    pub counterterm: Vec<f64>,
    pub omega0: Vec<f64>,
    pub p0: Vec<f64>,
    /// Defect of the trivial embedding first, then after each iteration.
    pub defects: Vec<f64>,
    pub log: Vec<KamIteration>,
    pub converged: bool,
    /// `max |Θ − Θ₀|` on the sample grid, `Θ₀(θ) = (θ, p₀)`.
    pub distance: f64,
    /// `max_t |orbit(t) − Θ(θ₀ + ω₀t)|` for an orbit started on the torus.
    pub orbit_deviation: Option<f64>,
}

impl KamResult {
    pub fn embed(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z = vec![0.0; theta.len()];
        let th = theta.iter().zip(&self.e).map(|(t, e)| t + e.value(theta, &z)).collect();
        let j = (0..theta.len()).map(|i| self.p0[i] + self.counterterm[i] + self.g[i].value(theta, &z)).collect();
        (th, j)
    }
}

fn sample_grid(n: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|_| {
                    let c = idx % m;
                    idx /= m;
                    (c as f64 + 0.5) / m as f64
                })
                .collect()
        })
        .collect()
}

/// Embedding parts and `W` from the generators and shifts accumulated so far.
fn assemble(gens: &[Vec<FTSeries>], shifts: &[Vec<f64>], n: usize, layout: &std::sync::Arc<crate::series::Layout>) -> Result<(Vec<FTSeries>, Vec<FTSeries>, Vec<f64>)> {
    let flat = layout.reshaped(0, layout.d_i(), 0)?;
    let mut map = CoordinateMap::identity(flat.clone());
    let mut big_w = vec![0.0; n];
    for l in 0..gens.len() {
        // iteration l sees the parameter W_l = Σ_{m ≥ l} w*_m
        let wl: Vec<f64> = (0..n).map(|j| shifts[l..].iter().map(|w| w[j]).sum()).collect();
        if l == 0 {
            big_w = wl.clone();
        }
        for x in &gens[l] {
            map.push(&x.eval_param(&wl)?)?;
        }
    }
    let e = map.e.iter().map(|s| s.action_degrees(0, 0)).collect();
    let g = map.p.iter().map(|s| s.action_degrees(0, 0)).collect();
    Ok((e, g, big_w))
}

/// `max |ω₀ + ∂_{ω₀}E − ∂_J H(Θ)|, |∂_{ω₀}G + ∂_θ H(Θ)|` and `max |Θ − Θ₀|` over the grid.
#[allow(clippy::too_many_arguments)]
fn defect_and_distance(h: &FTSeries, e: &[FTSeries], g: &[FTSeries], big_w: &[f64], p0: &[f64], omega0: &[f64], grid: &[Vec<f64>]) -> (f64, f64) {
    let n = omega0.len();
    let de: Vec<FTSeries> = e.iter().map(|s| s.d_along(omega0)).collect();
    let dg: Vec<FTSeries> = g.iter().map(|s| s.d_along(omega0)).collect();
    // bundle order: E, G, ∂E, ∂G
    let refs: Vec<&FTSeries> = e.iter().chain(g).chain(&de).chain(&dg).collect();
    let bundle = AngleBundle::new(&refs);
    let mut defect: f64 = 0.0;
    let mut dist: f64 = 0.0;
    for th in grid {
        let v = bundle.eval(th);
        let (ev, gv, dev, dgv) = (&v[..n], &v[n..2 * n], &v[2 * n..3 * n], &v[3 * n..]);
        let tt: Vec<f64> = (0..n).map(|i| th[i] + ev[i]).collect();
        let jj: Vec<f64> = (0..n).map(|i| p0[i] + big_w[i] + gv[i]).collect();
        let (_, gth, gi) = h.value_grad(&tt, &jj);
        for i in 0..n {
            defect = defect.max((omega0[i] + dev[i] - gi[i]).abs());
            defect = defect.max((dgv[i] + gth[i]).abs());
            dist = dist.max(ev[i].abs()).max((big_w[i] + gv[i]).abs());
        }
    }
    (defect, dist)
}

/// Iterates [`kam_step`] with `Q_i` from the schedule until the invariance defect
/// falls below `cfg.tol` or `cfg.max_iter` iterations have run.
pub fn kam_iterate(h: &FTSeries, fp: &FrequencyProfile, sp: &ScaleProfile, schedule: &KamSchedule, cfg: &KamConfig) -> Result<KamResult> {
    let n = h.layout().n();
    let omega0 = fp.omega().to_vec();
    let p0 = if cfg.p0.is_empty() { omega0.clone() } else { cfg.p0.clone() };
    if p0.len() != n || h.layout().n_w() != 0 || h.layout().d_i() < 2 {
        return Err(Error::Parameter("kam_iterate needs a parameter-free Hamiltonian of action degree >= 2 and a matching p0".into()));
    }
    let grid = sample_grid(n, cfg.grid);
    let mut k = h.embed_param_shift(&p0, cfg.d_w)?;
    let mut gens: Vec<Vec<FTSeries>> = Vec::new();
    let mut shifts: Vec<Vec<f64>> = Vec::new();
    let zero_e: Vec<FTSeries> = vec![FTSeries::zero(h.layout().clone()); n];
    let (d0, _) = defect_and_distance(h, &zero_e, &zero_e, &vec![0.0; n], &p0, &omega0, &grid);
    let mut defects = vec![d0];
    let mut log = Vec::new();
    let mut e = zero_e.clone();
    let mut g = zero_e;
    let mut big_w = vec![0.0; n];
    let mut distance = 0.0;
    let mut converged = d0 <= cfg.tol;
    let mut i = 0;
    while !converged && i < cfg.max_iter {
        let qi = *schedule.q.get(i).ok_or_else(|| Error::Budget(format!("schedule has only {} levels", schedule.q.len())))?;
        let basis = zbasis_approx(fp, qi)?;
        let sigma = schedule.sigma[i];
        let step = kam_step(&k, &basis.vectors, &omega0, sp, cfg.s, sigma)?;
        k = step.transformed;
        gens.push(step.generators);
        shifts.push(step.w_star.clone());
        (e, g, big_w) = assemble(&gens, &shifts, n, k.layout())?;
        let (d, dist) = defect_and_distance(h, &e, &g, &big_w, &p0, &omega0, &grid);
        distance = dist;
        defects.push(d);
        log.push(KamIteration {
            iteration: i + 1,
            q: qi,
            periods: basis.vectors.iter().map(|v| v.period).collect(),
            a_cert: step.a_after,
            b_cert: step.b_after,
            w_star_norm: step.w_star.iter().map(|x| x.abs()).fold(0.0, f64::max),
            defect: d,
        });
        converged = d <= cfg.tol;
        i += 1;
    }
    let mut result = KamResult { e, g, counterterm: big_w, omega0, p0, defects, log, converged, distance, orbit_deviation: None };
    if cfg.orbit_time > 0.0 {
        result.orbit_deviation = Some(orbit_check(h, &result, cfg.orbit_time)?);
    }
    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "invariance defect {:.3e} above {:.1e} after {} iterations (defects {:?})",
            result.defects.last().unwrap(),
            cfg.tol,
            cfg.max_iter,
            result.defects
        )));
    }
    Ok(result)
}

/// Integrates from `Θ(0)` and compares with `Θ(ω₀t)` at 100 sample times.
fn orbit_check(h: &FTSeries, res: &KamResult, t_end: f64) -> Result<f64> {
    let n = res.omega0.len();
    let zero = vec![0.0; n];
    let (th0, j0) = res.embed(&zero);
    let ham = SeriesHamiltonian::new(h.clone());
    let tr = integrate(&ham, &th0, &j0, t_end, 1e-10, 100, IntegratorKind::Auto)?;
    let mut worst: f64 = 0.0;
    for ((t, th), ia) in tr.times.iter().zip(&tr.thetas).zip(&tr.actions) {
        let phase: Vec<f64> = res.omega0.iter().map(|w| w * t).collect();
        let (th_ref, j_ref) = res.embed(&phase);
        for i in 0..n {
            let d = th[i] - th_ref[i];
            worst = worst.max((d - d.round()).abs()).max((ia[i] - j_ref[i]).abs());
        }
    }
    Ok(worst)
}
