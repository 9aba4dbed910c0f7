//! Weight sequences `M` and the functions attached to them.
//!
//! A sequence is stored through `ln μ_l = ln(M_{l+1}/M_l)` and the cumulative sums
//! `ln M_l`, so nothing overflows even for sequences growing like `exp(l^{3/2})`.
//! Built-in families also know `ln μ_l` in closed form for every `l`, which lets the
//! Cauchy function `C`, its inverse and the growth function `Ω` run past the stored
//! horizon without losing their certificates.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default number of stored terms.
pub const DEFAULT_HORIZON: usize = 2048;

/// Normalizing constant of the majorant norm, `4π²/3`.
pub const NORM_CONSTANT: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI / 3.0;

/// Hard cap on indices explored by the closed-form searches.
const INDEX_CAP: u64 = 1 << 52;

/// Cap on the number of terms summed on the fly when `ln M_l` has no closed form.
const SUM_CAP: usize = 50_000_000;

/// Family of a weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `M_l = l!`.
    Analytic,
    /// `M_l = l!^α`.
    Gevrey { alpha: f64 },
    /// `μ_l = (l+1)^α ln(e+l)^β`, normalized so that `M_0 = M_1 = 1`.
    GevreyLog { alpha: f64, beta: f64 },
    /// `μ_l = max(l+1, exp((ln l)²))` for `l ≥ 1`.
    ExpLog,
    /// `μ_l = exp(√l)`.
    ExpSqrt,
    /// User-supplied `ln μ_l` on a finite horizon.
    Custom,
}

impl Family {
    /// Parses a family from its name and the optional parameters.
    pub fn from_name(name: &str, alpha: Option<f64>, beta: Option<f64>) -> Result<Family> {
        let f = match name.to_ascii_lowercase().as_str() {
            "analytic" => Family::Analytic,
            "gevrey" => Family::Gevrey { alpha: alpha.unwrap_or(1.0) },
            "gevreylog" | "gevrey-log" => Family::GevreyLog {
                alpha: alpha.unwrap_or(1.0),
                beta: beta.unwrap_or(1.0),
            },
            "explog" | "exp-log" => Family::ExpLog,
            "expsqrt" | "exp-sqrt" => Family::ExpSqrt,
            other => return Err(Error::Config(format!("unknown weight family `{other}`"))),
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::Gevrey { alpha } if !(alpha >= 1.0 && alpha.is_finite()) => {
                Err(Error::Parameter(format!("Gevrey exponent must be >= 1, got {alpha}")))
            }
            Family::GevreyLog { alpha, beta }
                if !(alpha >= 1.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                Err(Error::Parameter(format!("need alpha >= 1 and beta >= 0, got ({alpha}, {beta})")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            Family::Analytic => "analytic".into(),
            Family::Gevrey { alpha } => format!("gevrey(alpha={alpha})"),
            Family::GevreyLog { alpha, beta } => format!("gevreylog(alpha={alpha},beta={beta})"),
            Family::ExpLog => "explog".into(),
            Family::ExpSqrt => "expsqrt".into(),
            Family::Custom => "custom".into(),
        }
    }

    /// Closed-form `ln μ_l`, `None` for custom sequences.
    pub fn ln_mu(&self, l: u64) -> Option<f64> {
        let x = l as f64;
        Some(match *self {
            Family::Analytic => (x + 1.0).ln(),
            Family::Gevrey { alpha } => alpha * (x + 1.0).ln(),
            Family::GevreyLog { alpha, beta } => {
                alpha * (x + 1.0).ln() + beta * (std::f64::consts::E + x).ln().ln()
            }
            Family::ExpLog => {
                if l == 0 {
                    0.0
                } else {
                    (x + 1.0).ln().max(x.ln() * x.ln())
                }
            }
            Family::ExpSqrt => x.sqrt(),
            Family::Custom => return None,
        })
    }

    /// Closed-form `ln M_l` where one exists.
    fn ln_m_closed(&self, l: u64) -> Option<f64> {
        let x = l as f64;
        match *self {
            Family::Analytic => Some(ln_gamma(x + 1.0)),
            Family::Gevrey { alpha } => Some(alpha * ln_gamma(x + 1.0)),
            _ => None,
        }
    }

    /// First index from which the increments of `ln μ` are nonincreasing for all `l`.
    fn concave_from(&self) -> Option<usize> {
        match self {
            Family::ExpLog => Some(4),
            Family::Custom => None,
            _ => Some(0),
        }
    }

    /// Analytically known verdicts for (H1, H2, H3, MG).
    pub fn known_verdicts(&self) -> Option<[bool; 4]> {
        match *self {
            Family::Analytic => Some([true, true, false, true]),
            Family::Gevrey { alpha } => Some([true, true, alpha > 1.0, true]),
            Family::GevreyLog { alpha, beta } => {
                Some([true, true, alpha > 1.0 || beta > 1.0, true])
            }
            Family::ExpLog | Family::ExpSqrt => Some([true, true, true, false]),
            Family::Custom => None,
        }
    }
}

/// A weight sequence with `M_0 = M_1 = 1`, stored in log-space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    family: Family,
    ln_mu: Vec<f64>,
    ln_m: Vec<f64>,
    ratio_monotone: bool,
    concave_from: usize,
}

impl WeightSequence {
    /// Builds a built-in family with terms `M_0..=M_{l_max}`.
    pub fn build(family: Family, l_max: usize) -> Result<Self> {
        if l_max < 2 {
            return Err(Error::Parameter(format!("horizon must be >= 2, got {l_max}")));
        }
        if family == Family::Custom {
            return Err(Error::Parameter("custom sequences are built with `from_ln_mu`".into()));
        }
        family.validate()?;
        let ln_mu: Vec<f64> = (0..=l_max as u64).map(|l| family.ln_mu(l).unwrap()).collect();
        let cf = family.concave_from().unwrap();
        Ok(Self::assemble(family, ln_mu, cf, true))
    }

    /// Builds a custom sequence from `ln μ_0, ln μ_1, ...`; `ln μ_0` must be 0.
    pub fn from_ln_mu(ln_mu: Vec<f64>) -> Result<Self> {
        if ln_mu.len() < 3 {
            return Err(Error::Parameter("need at least three terms".into()));
        }
        if ln_mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite ln mu".into()));
        }
        if ln_mu[0] != 0.0 {
            return Err(Error::Parameter("normalization requires mu_0 = 1".into()));
        }
        // smallest index from which the stored increments are nonincreasing
        let inc: Vec<f64> = ln_mu.windows(2).map(|w| w[1] - w[0]).collect();
        let mut cf = inc.len();
        while cf > 0 && (cf == inc.len() || inc[cf - 1] >= inc[cf]) {
            cf -= 1;
        }
        Ok(Self::assemble(Family::Custom, ln_mu, cf, false))
    }

    fn assemble(family: Family, ln_mu: Vec<f64>, concave_from: usize, certified: bool) -> Self {
        let mut ln_m = Vec::with_capacity(ln_mu.len());
        ln_m.push(0.0);
        for l in 1..ln_mu.len() {
            let prev = ln_m[l - 1];
            ln_m.push(prev + ln_mu[l - 1]);
        }
        let monotone_stored = ln_mu
            .windows(3)
            .skip(concave_from)
            .all(|w| w[2] - w[1] <= w[1] - w[0] + 1e-12);
        WeightSequence {
            family,
            ln_mu,
            ln_m,
            ratio_monotone: certified && monotone_stored,
            concave_from,
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Largest stored index `L_max` (values `M_0..=M_{L_max}`).
    pub fn horizon(&self) -> usize {
        self.ln_m.len() - 1
    }

    /// Whether the argmax searches are certified beyond the stored horizon.
    pub fn ratio_monotone(&self) -> bool {
        self.ratio_monotone
    }

    /// `ln μ_l`, available for every `l` for built-in families.
    pub fn ln_mu(&self, l: u64) -> Option<f64> {
        if (l as usize) < self.ln_mu.len() && l < INDEX_CAP {
            return Some(self.ln_mu[l as usize]);
        }
        self.family.ln_mu(l)
    }

    /// `ln M_l`; beyond the horizon uses a closed form or an on-the-fly sum.
    pub fn ln_m(&self, l: u64) -> Result<f64> {
        if (l as usize) < self.ln_m.len() && l < INDEX_CAP {
            return Ok(self.ln_m[l as usize]);
        }
        if let Some(v) = self.family.ln_m_closed(l) {
            return Ok(v);
        }
        let h = self.horizon();
        if self.family == Family::Custom || (l as usize) - h > SUM_CAP {
            return Err(Error::Horizon { index: l as usize, partial: self.ln_m[h] });
        }
        let mut acc = self.ln_m[h];
        for j in h as u64..l {
            acc += self.family.ln_mu(j).unwrap();
        }
        Ok(acc)
    }

    /// `ln N_l = ln M_l − ln l!`.
    pub fn ln_n(&self, l: u64) -> Result<f64> {
        Ok(self.ln_m(l)? - ln_gamma(l as f64 + 1.0))
    }

    /// `ν_l = N_{l+1}/N_l = μ_l/(l+1)`.
    pub fn nu(&self, l: u64) -> Option<f64> {
        self.ln_mu(l).map(|v| (v - (l as f64 + 1.0).ln()).exp())
    }

    /// Stored `ln M_0..=ln M_{L_max}`.
    pub fn ln_m_slice(&self) -> &[f64] {
        &self.ln_m
    }

    /// Stored `ln μ_0..=ln μ_{L_max}`.
    pub fn ln_mu_slice(&self) -> &[f64] {
        &self.ln_mu
    }
}

/// Result of a sup over `l` with its argmax and certification flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sup {
    pub value: f64,
    pub argmax: u64,
    /// False when the maximizing index could not be certified.
    pub certified: bool,
}

/// Evaluators `C`, `C⁻¹`, `Ω` and `σ̄` attached to a weight sequence.
#[derive(Debug, Clone)]
pub struct ScaleProfile {
    ws: WeightSequence,
    sigma_bar: f64,
    /// Relative tolerance of `C⁻¹`.
    pub rtol: f64,
}

impl ScaleProfile {
    pub fn new(ws: WeightSequence) -> Self {
        let sigma_bar = if ws.concave_from == 0 && ws.ratio_monotone {
            // ln μ concave with ln μ_0 = 0 makes ln μ_l / l nonincreasing
            ws.ln_mu[1]
        } else {
            (1..ws.ln_mu.len())
                .map(|l| ws.ln_mu[l] / l as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        ScaleProfile { ws, sigma_bar, rtol: 1e-10 }
    }

    /// Convenience constructor for a built-in family with the default horizon.
    pub fn from_family(family: Family) -> Result<Self> {
        Ok(Self::new(WeightSequence::build(family, DEFAULT_HORIZON)?))
    }

    pub fn sequence(&self) -> &WeightSequence {
        &self.ws
    }

    /// Smallest `σ` with `C(σ) = 1`, i.e. `max_l ln μ_l / l`.
    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    /// `ln C(σ)` together with its argmax.
    pub fn ln_c(&self, sigma: f64) -> Result<Sup> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        let ws = &self.ws;
        let term = |l: u64| ws.ln_mu(l).map(|v| v - sigma * l as f64);
        let cf = ws.concave_from as u64;
        let mut best = Sup { value: 0.0, argmax: 0, certified: true };
        for l in 0..=cf {
            let t = term(l).unwrap();
            if t > best.value {
                best.value = t;
                best.argmax = l;
            }
        }
        // from cf on the increments d_l = t_{l+1} − t_l are nonincreasing: the tail
        // maximum sits at the first l with d_l <= 0
        let incr = |l: u64| -> Option<f64> { Some(term(l + 1)? - term(l)?) };
        let h = ws.horizon() as u64;
        let unbounded = ws.family != Family::Custom;
        let mut lo = cf;
        let mut hi = cf.max(1);
        loop {
            match incr(hi) {
                Some(d) if d <= 0.0 => break,
                Some(_) if hi < INDEX_CAP => {
                    lo = hi;
                    hi = (hi * 2).min(INDEX_CAP);
                }
                _ => {
                    // still increasing where the sequence ends: best stored value, uncertified
                    if unbounded {
                        return Err(Error::Horizon { index: hi as usize, partial: best.value.exp() });
                    }
                    for l in 0..=h {
                        let t = term(l).unwrap();
                        if t > best.value {
                            best.value = t;
                            best.argmax = l;
                        }
                    }
                    best.certified = false;
                    return Ok(best);
                }
            }
        }
        if incr(lo).map_or(false, |d| d <= 0.0) {
            hi = lo;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if incr(mid).unwrap() <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let t = term(hi).unwrap();
        if t > best.value {
            best.value = t;
            best.argmax = hi;
        }
        best.certified = ws.ratio_monotone || hi < h;
        Ok(best)
    }

    /// Cauchy function `C(σ) = sup_l μ_l e^{−σl}` with its argmax.
    pub fn c(&self, sigma: f64) -> Result<Sup> {
        let s = self.ln_c(sigma)?;
        Ok(Sup { value: s.value.exp(), ..s })
    }

    /// Inverse of `C` on `(0, σ̄]`; `C(C⁻¹(y)) = y` up to `rtol`.
    pub fn c_inv(&self, y: f64) -> Result<f64> {
        if !(y >= 1.0) || !y.is_finite() {
            return Err(Error::Domain(format!("C^-1 needs y >= 1, got {y}")));
        }
        if y == 1.0 {
            return Ok(self.sigma_bar);
        }
        let ln_y = y.ln();
        let mut hi = self.sigma_bar;
        let mut lo = 0.5 * hi;
        while self.ln_c(lo)?.value < ln_y {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Numeric(format!("C^-1({y}) below representable range")));
            }
        }
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            let v = self.ln_c(mid)?.value;
            if (v - ln_y).abs() <= self.rtol {
                return Ok(mid);
            }
            if v > ln_y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 4.0 * f64::EPSILON {
                return Ok(mid);
            }
        }
        Ok((lo * hi).sqrt())
    }

    /// Growth function `Ω(y) = ln sup_l y^l/M_l`, argmax `l* = min{l : μ_l ≥ y}`.
    pub fn omega(&self, y: f64) -> Result<Sup> {
        if !(y >= 0.0) || y.is_nan() {
            return Err(Error::Domain(format!("Omega needs y >= 0, got {y}")));
        }
        if y <= 1.0 {
            return Ok(Sup { value: 0.0, argmax: 0, certified: true });
        }
        if !y.is_finite() {
            return Err(Error::Domain("Omega of infinity".into()));
        }
        let ln_y = y.ln();
        let ws = &self.ws;
        let reached = |l: u64| ws.ln_mu(l).map(|v| v >= ln_y);
        let mut lo = 0u64;
        let mut hi = 1u64;
        loop {
            match reached(hi) {
                Some(true) => break,
                Some(false) if hi < INDEX_CAP => {
                    lo = hi;
                    hi = (hi * 2).min(INDEX_CAP);
                }
                _ => {
                    let h = ws.horizon() as u64;
                    let partial = h as f64 * ln_y - ws.ln_m(h)?;
                    return Err(Error::Horizon { index: h as usize, partial });
                }
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reached(mid).unwrap() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let l = hi;
        let value = l as f64 * ln_y - ws.ln_m(l)?;
        Ok(Sup { value: value.max(0.0), argmax: l, certified: true })
    }

    /// `exp(−Ω(y))`, the decay factor used by norm and diffusion estimates.
    pub fn exp_neg_omega(&self, y: f64) -> Result<f64> {
        Ok((-self.omega(y)?.value).exp())
    }
}

/// One row of the matching diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingRow {
    pub y: f64,
    pub c_inv: f64,
    pub omega: f64,
    /// `ln(1/C⁻¹(y)) / ln Ω(y)`.
    pub ratio: f64,
}

/// Ratio diagnostics comparing `1/C⁻¹` with `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingReport {
    pub rows: Vec<MatchingRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Heuristic flag: ratios stay within `[0.8, 1.25]` and do not drift.
    pub looks_matching: bool,
}

/// Evaluates the matching ratio `r(y)` over an increasing grid.
pub fn matching_report(sp: &ScaleProfile, y_grid: &[f64]) -> Result<MatchingReport> {
    let mut rows = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        let c_inv = sp.c_inv(y)?;
        let omega = sp.omega(y)?.value;
        let ratio = (1.0 / c_inv).ln() / omega.ln();
        rows.push(MatchingRow { y, c_inv, omega, ratio });
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let drift = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (b.ratio - a.ratio).abs(),
        _ => 0.0,
    };
    let looks_matching = min_ratio >= 0.8 && max_ratio <= 1.25 && drift < 0.1;
    Ok(MatchingReport { rows, min_ratio, max_ratio, looks_matching })
}

/// Verdict on (H1): `ν` nondecreasing, checked exhaustively on the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Check {
    pub pass: bool,
    pub first_violation: Option<usize>,
}

/// Finite-horizon diagnostic for (H2): `l⁻¹ ln μ_l → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Check {
    /// Window maxima of `l⁻¹ ln μ_l` over the tail, left to right.
    pub window_max: Vec<f64>,
    /// Least-squares slope of `ln(window max)` against `ln(window center)`.
    pub trend_slope: f64,
    pub pass: bool,
}

/// Finite-horizon diagnostic for (H3): summability of `1/μ_l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H3Check {
    pub partial_sum: f64,
    /// Local decay exponent `p` of `1/μ_l ~ l^{−p}` at the horizon.
    pub tail_exponent: f64,
    /// Power-law tail estimate, infinite when `p <= 1`.
    pub tail_estimate: f64,
    pub pass: bool,
}

/// Finite-horizon moderate-growth constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgCheck {
    /// `sup_{l+j <= L} (M_{l+j}/(M_l M_j))^{1/(l+j)}`.
    pub sup: f64,
    /// Running values of `sup` at horizons `L/8, L/4, L/2, L`.
    pub by_horizon: Vec<(usize, f64)>,
    /// Bounded means the running sup grows by less than 5% over the last doubling.
    pub bounded: bool,
}

/// All condition diagnostics for a sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub horizon: usize,
    pub h1: H1Check,
    pub h2: H2Check,
    pub h3: H3Check,
    pub mg: MgCheck,
    /// Analytically known verdicts (H1, H2, H3, MG) for built-in families.
    pub known: Option<[bool; 4]>,
    pub notes: Vec<String>,
}

/// Runs the H1/H2/H3/MG checks on the stored horizon.
pub fn check_conditions(ws: &WeightSequence) -> ConditionReport {
    let h = ws.horizon();
    let ln_nu: Vec<f64> = (0..h).map(|l| ws.ln_mu[l] - ((l + 1) as f64).ln()).collect();
    let mut first_violation = None;
    for l in 1..ln_nu.len() {
        if ln_nu[l] < ln_nu[l - 1] - 1e-12 * (1.0 + ln_nu[l - 1].abs()) {
            first_violation = Some(l);
            break;
        }
    }
    let h1 = H1Check { pass: first_violation.is_none(), first_violation };

    // H2: 8 windows over [L/8, L]
    let start = (h / 8).max(2);
    let nwin = 8usize;
    let width = ((h - start) / nwin).max(1);
    let mut window_max = Vec::new();
    let mut centers = Vec::new();
    let mut a = start;
    while a + width <= h + 1 && window_max.len() < nwin {
        let m = (a..a + width)
            .map(|l| ws.ln_mu[l] / l as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        window_max.push(m);
        centers.push((a + width / 2) as f64);
        a += width;
    }
    let xs: Vec<f64> = centers.iter().map(|c| c.ln()).collect();
    let ys: Vec<f64> = window_max.iter().map(|m| m.max(1e-300).ln()).collect();
    let trend_slope = least_squares(&xs, &ys).0;
    let decreasing = window_max.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let h2 = H2Check { window_max, trend_slope, pass: decreasing && trend_slope < 0.0 };

    // H3
    let partial_sum: f64 = ws.ln_mu.iter().map(|v| (-v).exp()).sum();
    let l1 = h / 2;
    let p = (ws.ln_mu[h] - ws.ln_mu[l1]) / ((h as f64 + 1.0).ln() - (l1 as f64 + 1.0).ln());
    let tail_estimate = if p > 1.0 {
        (-ws.ln_mu[h]).exp() * (h as f64 + 1.0) / (p - 1.0)
    } else {
        f64::INFINITY
    };
    let h3 = H3Check {
        partial_sum,
        tail_exponent: p,
        tail_estimate,
        pass: p > 1.0 + 1e-3,
    };

    // MG, O(L²) scan with running sup by l + j
    let mut best_at = vec![0.0f64; h + 1];
    for s in 1..=h {
        let mut b: f64 = 0.0;
        for l in 0..=s / 2 {
            let v = (ws.ln_m[s] - ws.ln_m[l] - ws.ln_m[s - l]) / s as f64;
            b = b.max(v);
        }
        best_at[s] = b;
    }
    let mut running = vec![0.0f64; h + 1];
    for s in 1..=h {
        running[s] = running[s - 1].max(best_at[s]);
    }
    let by_horizon: Vec<(usize, f64)> =
        [h / 8, h / 4, h / 2, h].iter().map(|&k| (k, running[k].exp())).collect();
    let sup = running[h].exp();
    let bounded = running[h] - running[h / 2] < 0.05f64.ln_1p();
    let mg = MgCheck { sup, by_horizon, bounded };

    let mut notes = vec![format!("H2, H3 and MG are finite-horizon diagnostics on l <= {h}")];
    if ws.family == Family::Custom {
        notes.push("custom sequence: sup/argmax beyond the horizon are uncertified".into());
    }
    ConditionReport { horizon: h, h1, h2, h3, mg, known: ws.family.known_verdicts(), notes }
}

/// Moderate-growth constant `A = max_{1<=l<=l_max} (M_{2l}/M_l²)^{1/l}`.
pub fn mg_constant(ws: &WeightSequence, l_max: usize) -> Result<f64> {
    let mut ln_a: f64 = 0.0;
    for l in 1..=l_max as u64 {
        let v = (ws.ln_m(2 * l)? - 2.0 * ws.ln_m(l)?) / l as f64;
        ln_a = ln_a.max(v);
    }
    Ok(ln_a.exp())
}

/// Outcome of the moderate-growth lemma scans for a given constant `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgLemmaScan {
    pub a: f64,
    /// Largest `ln M_{2l} − 2 ln M_l − l ln A` (must be <= 0).
    pub doubling_margin: f64,
    /// Largest `ln μ_l/ln l − ln A (1/ln 2 + 2/ln l)` for `l >= 2`.
    pub mu_margin: f64,
    /// Largest `ln M_l/(l ln l) − (5/(2 ln 2)) ln A` for `l >= 2`.
    pub m_margin: f64,
    pub pass: bool,
}

/// Checks `M_{2l} <= A^l M_l²` for `l <= l_max` and the two bounds derived from it.
pub fn mg_lemma_scan(ws: &WeightSequence, a: f64, l_max: usize) -> Result<MgLemmaScan> {
    let ln_a = a.ln();
    let mut doubling_margin = f64::NEG_INFINITY;
    for l in 1..=l_max as u64 {
        let v = ws.ln_m(2 * l)? - 2.0 * ws.ln_m(l)? - l as f64 * ln_a;
        doubling_margin = doubling_margin.max(v);
    }
    let mut mu_margin = f64::NEG_INFINITY;
    let mut m_margin = f64::NEG_INFINITY;
    for l in 2..=l_max as u64 {
        let ll = (l as f64).ln();
        let mu = ws.ln_mu(l).ok_or(Error::Horizon { index: l as usize, partial: 0.0 })?;
        mu_margin = mu_margin.max(mu / ll - ln_a * (1.0 / std::f64::consts::LN_2 + 2.0 / ll));
        m_margin = m_margin.max(ws.ln_m(l)? / (l as f64 * ll) - 2.5 / std::f64::consts::LN_2 * ln_a);
    }
    let tol = 1e-9;
    Ok(MgLemmaScan {
        a,
        doubling_margin,
        mu_margin,
        m_margin,
        pass: doubling_margin <= tol && mu_margin <= tol && m_margin <= tol,
    })
}

/// Maxima of the product-lemma ratios over `l <= l_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductScan {
    /// `max_l (l+1)² Σ_j N_j N_{l−j}/((j+1)²(l−j+1)²) / N_l`.
    pub product_max: f64,
    pub product_argmax: usize,
    /// `max_l (l+2)² Σ_j N_{j+1} N_{l−j+1}/((j+2)²(l−j+2)²) / N_{l+1}`.
    pub shifted_max: f64,
    pub shifted_argmax: usize,
}

/// Scans the two convolution ratios bounded by `4π²/3` in the product and composition lemmas.
pub fn product_constant_scan(ws: &WeightSequence, l_max: usize) -> Result<ProductScan> {
    let ln_n: Vec<f64> = (0..=l_max as u64 + 1).map(|l| ws.ln_n(l)).collect::<Result<_>>()?;
    let sq = |x: usize| (x as f64) * (x as f64);
    let mut out = ProductScan {
        product_max: 0.0,
        product_argmax: 0,
        shifted_max: 0.0,
        shifted_argmax: 0,
    };
    for l in 0..=l_max {
        let mut s = 0.0;
        let mut t = 0.0;
        for j in 0..=l {
            s += (ln_n[j] + ln_n[l - j] - ln_n[l]).exp() / (sq(j + 1) * sq(l - j + 1));
            t += (ln_n[j + 1] + ln_n[l - j + 1] - ln_n[l + 1]).exp() / (sq(j + 2) * sq(l - j + 2));
        }
        let r = sq(l + 1) * s;
        let r2 = sq(l + 2) * t;
        if r > out.product_max {
            out.product_max = r;
            out.product_argmax = l;
        }
        if r2 > out.shifted_max {
            out.shifted_max = r2;
            out.shifted_argmax = l;
        }
    }
    Ok(out)
}

/// Maximum over stored pairs of `ln(N_j N_k) − ln N_{j+k}` and `ln(N_j N_k) − ln N_{j+k−1}`
/// (both must be <= 0 under H1).
pub fn log_convexity_margins(ws: &WeightSequence, l_max: usize) -> Result<(f64, f64)> {
    let ln_n: Vec<f64> = (0..=2 * l_max as u64).map(|l| ws.ln_n(l)).collect::<Result<_>>()?;
    let mut a = f64::NEG_INFINITY;
    let mut b = f64::NEG_INFINITY;
    for j in 1..=l_max {
        for k in 1..=l_max {
            a = a.max(ln_n[j] + ln_n[k] - ln_n[j + k]);
            b = b.max(ln_n[j] + ln_n[k] - ln_n[j + k - 1]);
        }
    }
    Ok((a, b))
}

/// Least-squares slope, intercept and R² of `ys` against `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Logarithmically spaced grid of `n` points from `a` to `b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
