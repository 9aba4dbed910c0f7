//! Normal forms at truncation: resonant averaging along periodic vectors with
//! the Neishtadt schedule, its multi-frequency and local (rescaled) variants,
//! chained stages, the affine KAM iteration and stability-time predictors.

mod kam;
mod predict;

pub use kam::{kam_iterate, kam_step, KamConfig, KamIteration, KamResult, KamSchedule, KamStep};
pub use predict::{plane_curve_probe, stability_time_predict, steep_schedule, NfConstants, PlaneCurveProbe, Prediction, Regime, RegimeInputs, SteepStage};

use serde::Serialize;

use crate::diophantine::PeriodicVector;
use crate::error::{Error, Result};
use crate::flows::{lie_flow_with, CoordinateMap, LieOptions, Trajectory};
use crate::series::{norm_upper, FTSeries};
use crate::weights::ScaleProfile;

/// Step widths, width losses and remainder budgets of an iterated averaging.
#[derive(Debug, Clone, Serialize)]
pub struct NFSchedule {
    pub xi: f64,
    /// `ln ξ / 24`.
    pub kappa_xi: f64,
    pub m: usize,
    /// Schedule constant `A`.
    pub a_const: f64,
    pub sigma: Vec<f64>,
    /// `widths[j]` is the width after step `j` (`widths[0] = s`).
    pub widths: Vec<f64>,
    /// `ν_j = e^{−j}ν` for `j = 1..m`.
    pub budgets: Vec<f64>,
    pub nu: f64,
    /// Admissible range `[κ/C⁻¹(y), 1 + κ/C⁻¹(y)]` for `m`, when derived from `y`.
    pub bracket: Option<(f64, f64)>,
}

impl NFSchedule {
    /// The step count is the smallest integer in the admissible bracket for
    /// `y = s/(A T η)`.
    pub fn neishtadt(sp: &ScaleProfile, s: f64, xi: f64, period: f64, eta: f64, nu: f64, a_const: f64) -> Result<Self> {
        if !(period > 0.0 && eta > 0.0 && a_const > 0.0) {
            return Err(Error::Parameter("need period, eta and A positive".into()));
        }
        Self::from_ratio(sp, s / (a_const * period * eta), s, xi, nu, a_const)
    }

    /// Same as [`neishtadt`](Self::neishtadt) with the argument `y` of `C⁻¹` given directly.
    pub fn from_ratio(sp: &ScaleProfile, y: f64, s: f64, xi: f64, nu: f64, a_const: f64) -> Result<Self> {
        if !(xi > 1.0) {
            return Err(Error::Parameter(format!("xi must exceed 1, got {xi}")));
        }
        if !(y >= 1.0) {
            return Err(Error::Parameter(format!("schedule ratio {y:.3e} < 1: perturbation regime too large for any averaging step")));
        }
        let kappa = xi.ln() / 24.0;
        let lo = kappa / sp.c_inv(y)?;
        let m = (lo.ceil() as usize).max(1);
        let mut sch = Self::with_steps(m, xi, s, nu)?;
        sch.a_const = a_const;
        sch.bracket = Some((lo, lo + 1.0));
        Ok(sch)
    }

    /// Schedule with a prescribed step count: `σ₁ = ln ξ/24`, then `σ_i = ln ξ/(24(m−1))`.
    pub fn with_steps(m: usize, xi: f64, s: f64, nu: f64) -> Result<Self> {
        if m == 0 || !(xi > 1.0) || !(s > 0.0) {
            return Err(Error::Parameter("need m >= 1, xi > 1 and s > 0".into()));
        }
        let kappa = xi.ln() / 24.0;
        let sigma: Vec<f64> = (1..=m).map(|i| if i == 1 { kappa } else { kappa / (m - 1) as f64 }).collect();
        let mut widths = vec![s];
        for sg in &sigma {
            let last = *widths.last().unwrap();
            widths.push(last * (1.0 - sg).powi(3));
        }
        let budgets = (1..=m).map(|j| (-(j as f64)).exp() * nu).collect();
        Ok(NFSchedule { xi, kappa_xi: kappa, m, a_const: 1.0, sigma, widths, budgets, nu, bracket: None })
    }

    pub fn final_width(&self) -> f64 {
        *self.widths.last().unwrap()
    }

    /// The floor `s/ξ` every final width must respect.
    pub fn width_floor(&self) -> f64 {
        self.widths[0] / self.xi
    }
}

/// One averaging step as logged.
#[derive(Debug, Clone, Serialize)]
pub struct StepLog {
    pub stage: usize,
    pub step: usize,
    /// Integer vector `T v`.
    pub tv: Vec<i64>,
    pub width: f64,
    pub sigma: f64,
    pub remainder_cert: f64,
    pub budget: f64,
    pub within_budget: bool,
    /// `T ν² C(σ)² s⁻² + T η ν C(σ) s⁻¹` with the incoming `ν`.
    pub predicted: f64,
    pub lie_terms: usize,
}

/// Output of the averaging pipelines.
#[derive(Debug, Clone)]
pub struct NFResult {
    /// `H ∘ Φ` at truncation.
    pub transformed: FTSeries,
    /// Angle-independent part held fixed during the procedure.
    pub integrable: FTSeries,
    /// Part commuting with every `L_v` of the run.
    pub resonant: FTSeries,
    pub remainder: FTSeries,
    /// Generators in application order: `Φ = Φ_{Y_1} ∘ Φ_{Y_2} ∘ …`.
    pub generators: Vec<FTSeries>,
    pub vectors: Vec<PeriodicVector>,
    pub cert_before: f64,
    pub cert_after: f64,
    pub final_width: f64,
    pub log: Vec<StepLog>,
    /// Theorem-shaped bound for the final remainder, when a schedule supplied one.
    pub predicted_bound: Option<f64>,
    /// `max |{I, resonant}|` for a supplied first integral `I`.
    pub first_integral_defect: Option<f64>,
}

impl NFResult {
    /// Steps whose measured remainder exceeded the budget.
    pub fn violations(&self) -> usize {
        self.log.iter().filter(|l| !l.within_budget).count()
    }

    /// `max |{resonant, L_v}|` over the run's vectors (the bracket with `v·I` is `−∂_v`).
    pub fn commutation_defect(&self) -> f64 {
        self.vectors.iter().map(|v| self.resonant.d_along(&v.v).max_abs()).fold(0.0, f64::max)
    }

    /// The composed coordinate change `Φ`.
    pub fn transform(&self) -> Result<CoordinateMap> {
        let mut map = CoordinateMap::identity(self.transformed.layout().clone());
        for y in &self.generators {
            map.push(y)?;
        }
        Ok(map)
    }

    /// `max |H(Φ(x)) − (H∘Φ)(x)|` at the points, with `H` evaluated pointwise.
    pub fn grid_identity_defect(&self, original: &dyn Fn(&[f64], &[f64]) -> f64, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let map = self.transform()?;
        Ok(points
            .iter()
            .map(|(th, ia)| {
                let (t2, i2) = map.apply(th, ia);
                (original(&t2, &i2) - self.transformed.value(th, ia)).abs()
            })
            .fold(0.0, f64::max))
    }
}

/// Resonant average over several periodic vectors.
fn average_all(f: &FTSeries, vs: &[PeriodicVector]) -> Result<FTSeries> {
    let mut out = f.clone();
    for v in vs {
        out = out.average_periodic(v)?;
    }
    Ok(out)
}

/// Shared state of the averaging loops.
struct Averager<'a> {
    sp: &'a ScaleProfile,
    integrable: FTSeries,
    h: FTSeries,
    generators: Vec<FTSeries>,
    vectors: Vec<PeriodicVector>,
    log: Vec<StepLog>,
    lie: LieOptions,
}

impl<'a> Averager<'a> {
    fn new(sp: &'a ScaleProfile, integrable: &FTSeries, h: &FTSeries) -> Result<Self> {
        if !integrable.layout().same_shape(h.layout()) {
            return Err(Error::Parameter("integrable part and Hamiltonian must share a layout".into()));
        }
        if !integrable.sub_series(&integrable.average_zero())?.is_zero() {
            return Err(Error::Parameter("the integrable part must not depend on the angles".into()));
        }
        Ok(Averager { sp, integrable: integrable.clone(), h: h.clone(), generators: Vec::new(), vectors: Vec::new(), log: Vec::new(), lie: LieOptions::default() })
    }

    fn perturbation(&self) -> Result<FTSeries> {
        self.h.sub_series(&self.integrable)
    }

    /// Non-resonant part with respect to `v`.
    fn nonresonant(&self, v: &PeriodicVector) -> Result<FTSeries> {
        let p = self.perturbation()?;
        p.sub_series(&p.average_periodic(v)?)
    }

    /// One homological solve plus Lie transform; returns the new non-resonant certificate.
    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, stage: usize, step: usize, v: &PeriodicVector, sigma: f64, width: f64, budget: f64, eta: f64) -> Result<f64> {
        let f = self.nonresonant(v)?;
        let nu_in = norm_upper(&f, self.sp, width / (1.0 - sigma).powi(3))?.bound;
        let y = f.solve_homological(v, true)?;
        let terms = if y.is_zero() {
            0
        } else {
            let (h2, terms) = lie_flow_with(&y, &self.h, self.lie)?;
            self.h = h2;
            self.generators.push(y);
            terms
        };
        let rem = norm_upper(&self.nonresonant(v)?, self.sp, width)?.bound;
        let cs = self.sp.c(sigma)?.value;
        let s = width;
        let predicted = v.period * nu_in * nu_in * cs * cs / (s * s) + v.period * eta * nu_in * cs / s;
        self.log.push(StepLog {
            stage,
            step,
            tv: v.tv.clone(),
            width,
            sigma,
            remainder_cert: rem,
            budget,
            within_budget: rem <= budget,
            predicted,
            lie_terms: terms,
        });
        Ok(rem)
    }

    fn finish(self, cert_before: f64, final_width: f64, predicted_bound: Option<f64>, first_integral: Option<&FTSeries>) -> Result<NFResult> {
        let p = self.h.sub_series(&self.integrable)?;
        let resonant = average_all(&p, &self.vectors)?;
        let remainder = p.sub_series(&resonant)?;
        let cert_after = norm_upper(&remainder, self.sp, final_width)?.bound;
        let first_integral_defect = match first_integral {
            Some(fi) => Some(fi.bracket(&resonant)?.max_abs()),
            None => None,
        };
        Ok(NFResult {
            transformed: self.h,
            integrable: self.integrable,
            resonant,
            remainder,
            generators: self.generators,
            vectors: self.vectors,
            cert_before,
            cert_after,
            final_width,
            log: self.log,
            predicted_bound,
            first_integral_defect,
        })
    }
}

/// A single averaging step along `v` with width loss `σ` from width `s`.
///
/// `integrable` is the angle-independent part `L_v + S` kept fixed; the rest of
/// `h` is the perturbation. `eta` only enters the predicted bound.
pub fn averaging_step(integrable: &FTSeries, h: &FTSeries, v: &PeriodicVector, sp: &ScaleProfile, s: f64, sigma: f64, eta: f64) -> Result<NFResult> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Parameter(format!("width loss must lie in (0, 1), got {sigma}")));
    }
    let mut av = Averager::new(sp, integrable, h)?;
    av.vectors.push(v.clone());
    let before = norm_upper(&av.nonresonant(v)?, sp, s)?.bound;
    let width = s * (1.0 - sigma).powi(3);
    av.step(1, 1, v, sigma, width, f64::INFINITY, eta)?;
    let predicted = av.log[0].predicted;
    av.finish(before, width, Some(predicted), None)
}

/// Iterated averaging along `v` with the Neishtadt schedule; `first_integral`
/// (if any) is checked against the final resonant part.
#[allow(clippy::too_many_arguments)]
pub fn periodic_normal_form(
    integrable: &FTSeries,
    h: &FTSeries,
    v: &PeriodicVector,
    schedule: &NFSchedule,
    sp: &ScaleProfile,
    eta: f64,
    first_integral: Option<&FTSeries>,
) -> Result<NFResult> {
    let mut av = Averager::new(sp, integrable, h)?;
    av.vectors.push(v.clone());
    let before = norm_upper(&av.nonresonant(v)?, sp, schedule.widths[0])?.bound;
    run_schedule(&mut av, 1, v, schedule, eta)?;
    let bound = theorem_bound(schedule, sp, v.period, eta);
    av.finish(before, schedule.final_width(), bound, first_integral)
}

fn run_schedule(av: &mut Averager, stage: usize, v: &PeriodicVector, schedule: &NFSchedule, eta: f64) -> Result<()> {
    for j in 0..schedule.m {
        let rem = av.step(stage, j + 1, v, schedule.sigma[j], schedule.widths[j + 1], schedule.budgets[j], eta)?;
        if rem == 0.0 {
            break;
        }
    }
    Ok(())
}

/// `ν exp(−κ_ξ / C⁻¹(s/(ATη)))` when the schedule came with a bracket.
fn theorem_bound(schedule: &NFSchedule, sp: &ScaleProfile, period: f64, eta: f64) -> Option<f64> {
    schedule.bracket?;
    let y = schedule.widths[0] / (schedule.a_const * period * eta);
    let ci = sp.c_inv(y).ok()?;
    Some(schedule.nu * (-schedule.kappa_xi / ci).exp())
}

/// Periodic normal forms along each vector of a basis in turn with `ξ = 2^{1/d}`;
/// the resonant part is averaged over the whole basis. `etas[i]` is the size of
/// the non-`L_{v_i}` integrable drift used for the schedule of stage `i`.
pub fn multifrequency_normal_form(
    integrable: &FTSeries,
    h: &FTSeries,
    basis: &[PeriodicVector],
    etas: &[f64],
    sp: &ScaleProfile,
    s: f64,
    a_const: f64,
) -> Result<NFResult> {
    if basis.is_empty() || etas.len() != basis.len() {
        return Err(Error::Parameter("need one eta per basis vector".into()));
    }
    let d = basis.len();
    let xi = 2f64.powf(1.0 / d as f64);
    let mut av = Averager::new(sp, integrable, h)?;
    let first = av.perturbation()?;
    let before = norm_upper(&first.sub_series(&average_all(&first, basis)?)?, sp, s)?.bound;
    let mut width = s;
    let mut bound = None;
    for (i, (v, &eta)) in basis.iter().zip(etas).enumerate() {
        let nu = norm_upper(&av.nonresonant(v)?, sp, width)?.bound;
        if nu == 0.0 {
            av.vectors.push(v.clone());
            continue;
        }
        let schedule = NFSchedule::neishtadt(sp, width, xi, v.period, eta, nu, a_const)
            .map_err(|e| Error::Parameter(format!("stage {}: {e}", i + 1)))?;
        run_schedule(&mut av, i + 1, v, &schedule, eta).map_err(|e| stage_error(i + 1, e))?;
        av.vectors.push(v.clone());
        bound = theorem_bound(&schedule, sp, v.period, eta);
        width = schedule.final_width();
    }
    av.finish(before, width, bound, None)
}

fn stage_error(stage: usize, e: Error) -> Error {
    match e {
        Error::NonConvergence(m) => Error::NonConvergence(format!("stage {stage}: {m}")),
        Error::Consistency(m) => Error::Consistency(format!("stage {stage}: {m}")),
        other => other,
    }
}

/// Result of [`local_normal_form`]: the run in the rescaled chart
/// `I = I₁ + ρJ`, time divided by `ρ`.
#[derive(Debug, Clone)]
pub struct LocalNF {
    pub result: NFResult,
    pub center: Vec<f64>,
    pub rho: f64,
    /// `|∇h(I₁) − v|_∞`.
    pub mu: f64,
    /// Remainder certificate mapped back to the original scale (`ρ·cert`).
    pub remainder_original: f64,
}

/// Local normal form around `I₁`: translate, rescale actions by `ρ` and time by
/// `1/ρ`, then run the periodic normal form along `v` with `ξ = 2`.
#[allow(clippy::too_many_arguments)]
pub fn local_normal_form(
    h: &FTSeries,
    f: &FTSeries,
    center: &[f64],
    rho: f64,
    v: &PeriodicVector,
    sp: &ScaleProfile,
    s: f64,
    domain_radius: f64,
    a_const: f64,
) -> Result<LocalNF> {
    let n = h.layout().n();
    if center.len() != n || !(rho > 0.0) {
        return Err(Error::Parameter("need a center of matching dimension and rho > 0".into()));
    }
    let reach = center.iter().map(|x| x.abs()).fold(0.0, f64::max) + rho;
    if reach > domain_radius {
        return Err(Error::Domain(format!("ball of radius {rho} around {center:?} leaves the action domain |I| <= {domain_radius}")));
    }
    let zero = vec![0.0; n];
    let (h0, _, grad) = h.value_grad(&zero, center);
    let mu = grad.iter().zip(&v.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let chart = |g: &FTSeries| -> Result<FTSeries> { Ok(g.shift_actions(center)?.scale_actions(rho).scale(1.0 / rho)) };
    let mut integrable = chart(h)?;
    let c = FTSeries::constant(h.layout().clone(), h0 / rho);
    integrable = integrable.sub_series(&c)?;
    let total = integrable.add_series(&chart(f)?)?;
    let av = Averager::new(sp, &integrable, &total)?;
    let nu = norm_upper(&av.nonresonant(v)?, sp, s)?.bound;
    let result = if nu == 0.0 {
        let mut av = av;
        av.vectors.push(v.clone());
        av.finish(0.0, s, None, None)?
    } else {
        let schedule = NFSchedule::from_ratio(sp, s * s / (a_const * v.period * rho), s, 2.0, nu, a_const)?;
        periodic_normal_form(&integrable, &total, v, &schedule, sp, mu + rho, None)?
    };
    let remainder_original = rho * result.cert_after;
    Ok(LocalNF { result, center: center.to_vec(), rho, mu, remainder_original })
}

/// Data of one chain stage.
#[derive(Debug, Clone)]
pub struct ChainStage {
    pub v: PeriodicVector,
    pub rho: f64,
}

/// Chained normal forms: the first stage is [`local_normal_form`] around
/// `center`, every further stage averages the previous output along its own
/// vector with half the previous width. The resonant part commutes with all
/// stage vectors.
#[derive(Debug, Clone)]
pub struct NekhoroshevChain {
    pub stages: Vec<NFResult>,
    pub widths: Vec<f64>,
    pub commutation: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn nekhoroshev_chain(
    h: &FTSeries,
    f: &FTSeries,
    center: &[f64],
    stages: &[ChainStage],
    sp: &ScaleProfile,
    s: f64,
    domain_radius: f64,
    a_const: f64,
) -> Result<NekhoroshevChain> {
    if stages.is_empty() {
        return Err(Error::Parameter("a chain needs at least one stage".into()));
    }
    let rows: Vec<Vec<f64>> = stages.iter().map(|st| st.v.tv.iter().map(|&x| x as f64).collect()).collect();
    if rank(&rows) < rows.len() {
        return Err(Error::Domain("stage periodic vectors are linearly dependent (geometry failure)".into()));
    }
    let first = local_normal_form(h, f, center, stages[0].rho, &stages[0].v, sp, s, domain_radius, a_const)?;
    let mut results = vec![first.result];
    let mut widths = vec![s];
    for (j, st) in stages.iter().enumerate().skip(1) {
        let prev = results.last().unwrap();
        let width = s / 2f64.powi(j as i32);
        let mut av = Averager::new(sp, &prev.integrable, &prev.transformed)?;
        av.vectors = prev.vectors.clone();
        let nu = norm_upper(&av.nonresonant(&st.v)?, sp, width)?.bound;
        if nu > 0.0 {
            let schedule = NFSchedule::from_ratio(sp, width * width / (a_const * st.v.period * st.rho), width, 2.0, nu, a_const)?;
            run_schedule(&mut av, j + 1, &st.v, &schedule, st.rho).map_err(|e| stage_error(j + 1, e))?;
        }
        av.vectors.push(st.v.clone());
        let before = prev.cert_after;
        let mut gens = prev.generators.clone();
        let mut res = av.finish(before, width, None, None)?;
        gens.extend(res.generators.drain(..));
        res.generators = gens;
        results.push(res);
        widths.push(width);
    }
    let commutation = results.last().map(|r| r.vectors.iter().map(|v| r.resonant.d_along(&v.v).max_abs()).collect()).unwrap_or_default();
    Ok(NekhoroshevChain { stages: results, widths, commutation })
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[piv][c].abs() < 1e-12 {
            continue;
        }
        m.swap(r, piv);
        for i in 0..m.len() {
            if i != r {
                let fac = m[i][c] / m[r][c];
                for k in 0..cols {
                    m[i][k] -= fac * m[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

/// Exit time from a ball and drift transverse to a resonance lattice along an orbit.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    /// First sampled time with `|I(t) − I₀|_∞ > radius`, if any.
    pub exit_time: Option<f64>,
    /// `max_t |Π_{Λ⊥}(I(t) − I₀)|` before exit.
    pub max_transverse_drift: f64,
    /// `max_t |Π_{Λ⊥}(I(t) − I₀)| − rate·t` (non-positive means the bound holds).
    pub worst_excess: f64,
}

/// Measures an orbit against a linear drift bound `rate·t` transverse to `span(lattice)`.
pub fn dichotomy_probe(traj: &Trajectory, radius: f64, lattice: &[Vec<f64>], rate: f64) -> DichotomyReport {
    let i0 = &traj.actions[0];
    let n = i0.len();
    // orthonormal basis of the lattice span (Gram–Schmidt)
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
    let mut exit = None;
    let mut max_drift: f64 = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for (t, ia) in traj.times.iter().zip(&traj.actions) {
        let d: Vec<f64> = (0..n).map(|j| ia[j] - i0[j]).collect();
        if d.iter().map(|x| x.abs()).fold(0.0, f64::max) > radius {
            exit = Some(*t);
            break;
        }
        let mut perp = d.clone();
        for b in &basis {
            let c: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
            perp.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let p = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_drift = max_drift.max(p);
        worst = worst.max(p - rate * t);
    }
    DichotomyReport { exit_time: exit, max_transverse_drift: max_drift, worst_excess: worst }
}
