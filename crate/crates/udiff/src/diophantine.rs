//! Small-denominator profiles and rational approximation of frequency vectors.
//!
//! `Ψ_ω(Q) = max{|k·ω|⁻¹ : 0 < |k| ≤ Q}` with `|k|` the ℓ1 norm, the staircase
//! `Δ(Q) = QΨ(Q)` and its generalized inverse, Dirichlet periodic approximations,
//! ℤ-bases of periodic approximations, and the dyadic convergence test used to pick
//! the initial truncation of the KAM iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::weights::{least_squares, ScaleProfile};

/// Norm on integer vectors used for Fourier modes and `Ψ` (ℓ1).
pub fn lattice_norm(k: &[i64]) -> i64 {
    k.iter().map(|x| x.abs()).sum()
}

/// `k·ω` evaluated with fused multiply-adds (one rounding per component).
pub fn dot(k: &[i64], omega: &[f64]) -> f64 {
    k.iter().zip(omega).fold(0.0, |acc, (&ki, &w)| (ki as f64).mul_add(w, acc))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Gcd of all entries (0 for the zero vector).
pub fn gcd_vec(k: &[i64]) -> i64 {
    k.iter().fold(0, |g, &x| gcd(g, x))
}

/// The golden mean `(1 + √5)/2`.
pub fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Behavior of a continued fraction after its explicit partial quotients.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Terminates,
    /// The listed block repeats forever.
    Periodic(Vec<u64>),
}

/// Continued fraction `[a_0; a_1, a_2, ...]` of a nonnegative real.
#[derive(Debug, Clone, PartialEq)]
pub struct ContFrac {
    pub a0: u64,
    pub partial: Vec<u64>,
    pub tail: Tail,
}

/// One convergent `p/q` with its exact error `|qx − p|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergent {
    pub index: i64,
    pub p: i128,
    pub q: i128,
    pub err: f64,
}

impl ContFrac {
    /// `[1; 1, 1, ...]`.
    pub fn golden() -> Self {
        ContFrac { a0: 1, partial: vec![], tail: Tail::Periodic(vec![1]) }
    }

    /// `[1; 2, 2, ...]`.
    pub fn sqrt2() -> Self {
        ContFrac { a0: 1, partial: vec![], tail: Tail::Periodic(vec![2]) }
    }

    /// Finite continued fraction of the dyadic rational represented by `x >= 0`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("continued fraction needs finite x >= 0, got {x}")));
        }
        // x = num / 2^e exactly
        let mut e = 0u32;
        let mut y = x;
        while y.fract() != 0.0 {
            y *= 2.0;
            e += 1;
            if e > 120 {
                return Err(Error::Domain(format!("{x} has no manageable dyadic form")));
            }
        }
        if y >= 2f64.powi(126) {
            return Err(Error::Domain(format!("{x} too large")));
        }
        let (mut num, mut den) = (y as u128, 1u128 << e);
        let a0 = (num / den) as u64;
        let mut partial = Vec::new();
        let mut r = num % den;
        num = den;
        den = r;
        while den != 0 {
            partial.push((num / den) as u64);
            r = num % den;
            num = den;
            den = r;
        }
        Ok(ContFrac { a0, partial, tail: Tail::Terminates })
    }

    /// Partial quotient `a_j`, `None` past a terminating expansion.
    pub fn quotient(&self, j: usize) -> Option<u64> {
        if j == 0 {
            return Some(self.a0);
        }
        if j <= self.partial.len() {
            return Some(self.partial[j - 1]);
        }
        match &self.tail {
            Tail::Terminates => None,
            Tail::Periodic(block) => Some(block[(j - 1 - self.partial.len()) % block.len()]),
        }
    }

    /// Complete quotient `x_j = [a_j; a_{j+1}, ...]`, evaluated backward.
    pub fn complete_quotient(&self, j: usize) -> Option<f64> {
        self.quotient(j)?;
        let mut end = j;
        while end < j + 96 && self.quotient(end + 1).is_some() {
            end += 1;
        }
        let mut x = self.quotient(end).unwrap() as f64;
        if end == j + 96 {
            // truncated periodic tail: start from the block's own fixed point estimate
            x += 0.5;
        }
        for i in (j..end).rev() {
            x = self.quotient(i).unwrap() as f64 + 1.0 / x;
        }
        Some(x)
    }

    pub fn value(&self) -> f64 {
        self.complete_quotient(0).unwrap()
    }

    /// Convergents `p_j/q_j` for `j >= 0` while `q_j <= q_max`.
    pub fn convergents(&self, q_max: f64) -> Vec<Convergent> {
        let mut out = Vec::new();
        let (mut p_prev, mut q_prev) = (1i128, 0i128);
        let (mut p, mut q) = (self.a0 as i128, 1i128);
        let mut j = 0usize;
        loop {
            let err = match self.complete_quotient(j + 1) {
                Some(xn) => 1.0 / (q as f64 * xn + q_prev as f64),
                None => 0.0,
            };
            out.push(Convergent { index: j as i64, p, q, err });
            let Some(a) = self.quotient(j + 1) else { break };
            let a = a as i128;
            let (pn, qn) = (a * p + p_prev, a * q + q_prev);
            if qn as f64 > q_max || qn > (1i128 << 100) {
                break;
            }
            p_prev = p;
            q_prev = q;
            p = pn;
            q = qn;
            j += 1;
        }
        out
    }
}

/// `Ψ_ω(Q)` together with the achieving mode, normalized so that `k·ω > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiValue {
    pub q: f64,
    pub value: f64,
    pub k: Vec<i64>,
}

/// Default budget on the number of lattice points visited by brute force.
pub const DEFAULT_LATTICE_BUDGET: u64 = 200_000_000;

fn resonance_threshold(k: &[i64], omega: &[f64]) -> f64 {
    let w = omega.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    1e-14 * lattice_norm(k) as f64 * w
}

/// Upper estimate of the number of lattice points with `|k|₁ <= r` in dimension `n`.
fn ball_size(n: usize, r: u64) -> f64 {
    let mut c = 1.0;
    for i in 0..n {
        c *= 2.0 * r as f64 + 1.0;
        c /= (i + 1) as f64;
    }
    c * 2f64.powi(n as i32) / 2.0 + 1.0
}

/// Visits every nonzero `k` with `|k|₁ <= r`.
fn for_each_lattice_point(n: usize, r: i64, f: &mut impl FnMut(&[i64])) {
    fn rec(k: &mut Vec<i64>, i: usize, left: i64, f: &mut impl FnMut(&[i64])) {
        if i == k.len() {
            if k.iter().any(|&x| x != 0) {
                f(k);
            }
            return;
        }
        if i + 1 == k.len() {
            for v in -left..=left {
                k[i] = v;
                rec(k, i + 1, left - v.abs(), f);
            }
            return;
        }
        for v in -left..=left {
            k[i] = v;
            rec(k, i + 1, left - v.abs(), f);
        }
    }
    let mut k = vec![0i64; n];
    rec(&mut k, 0, r, f);
}

fn lex_less(a: &[i64], b: &[i64]) -> bool {
    a < b
}

/// Brute-force table `Ψ_ω(1..=q_max)`; entry `Q − 1` holds `Ψ_ω(Q)`.
pub fn psi_table(omega: &[f64], q_max: usize, budget: u64) -> Result<Vec<PsiValue>> {
    let n = omega.len();
    if n < 2 || q_max < 1 {
        return Err(Error::Parameter("need n >= 2 and Q >= 1".into()));
    }
    if ball_size(n, q_max as u64) > budget as f64 {
        return Err(Error::Budget(format!(
            "lattice ball n={n}, Q={q_max} exceeds budget {budget}"
        )));
    }
    // best (smallest |k·ω|) per shell r = |k|₁
    let mut shell: Vec<Option<(f64, Vec<i64>)>> = vec![None; q_max + 1];
    let mut resonant: Option<Vec<i64>> = None;
    for_each_lattice_point(n, q_max as i64, &mut |k| {
        let d = dot(k, omega);
        if d.abs() <= resonance_threshold(k, omega) {
            let r = lattice_norm(k);
            match &resonant {
                Some(old) if lattice_norm(old) <= r => {}
                _ => resonant = Some(k.to_vec()),
            }
            return;
        }
        if d < 0.0 {
            return;
        }
        let r = lattice_norm(k) as usize;
        match &shell[r] {
            Some((bd, bk)) if *bd < d || (*bd == d && !lex_less(k, bk)) => {}
            _ => shell[r] = Some((d, k.to_vec())),
        }
    });
    let mut out = Vec::with_capacity(q_max);
    let mut best: Option<(f64, Vec<i64>)> = None;
    for (r, entry) in shell.iter().enumerate().skip(1) {
        if let Some(res) = &resonant {
            if lattice_norm(res) as usize <= r {
                let mut k = res.clone();
                if k.iter().find(|&&x| x != 0).map_or(false, |&x| x < 0) {
                    k.iter_mut().for_each(|x| *x = -*x);
                }
                return Err(Error::Resonance { k });
            }
        }
        if let Some((d, k)) = entry {
            match &best {
                Some((bd, bk)) if *bd < *d || (*bd == *d && !lex_less(k, bk)) => {}
                _ => best = Some((*d, k.clone())),
            }
        }
        let (d, k) = best.clone().expect("shell 1 always populated");
        out.push(PsiValue { q: r as f64, value: 1.0 / d, k });
    }
    Ok(out)
}

/// Brute-force `Ψ_ω(Q)`.
pub fn psi(omega: &[f64], q: f64) -> Result<PsiValue> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("Psi needs Q >= 1, got {q}")));
    }
    let n = omega.len();
    if n > 4 || q > 1e3 {
        return Err(Error::Budget(format!("brute force limited to n <= 4, Q <= 1000 (n={n}, Q={q})")));
    }
    let t = psi_table(omega, q.floor() as usize, DEFAULT_LATTICE_BUDGET)?;
    let mut v = t.last().unwrap().clone();
    v.q = q;
    Ok(v)
}

/// How `Δ*` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeltaStarMode {
    /// Largest integer `Q` with `QΨ_ω(Q) <= x`.
    Staircase,
    /// Sup over real `Q` of `QΨ(Q) <= x` with the piecewise-linear envelope `Ψ`.
    Envelope,
}

/// A step of the `Ψ` staircase: `Ψ_ω(Q) = value` for `Q` in `[norm, next norm)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestApprox {
    pub norm: f64,
    pub value: f64,
    pub k: Vec<i64>,
}

/// A frequency vector with its small-denominator profile.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    omega: Vec<f64>,
    /// Continued fraction of `|ω_2/ω_1|` (two frequencies only).
    cf: Option<ContFrac>,
    /// Pareto steps of `Ψ` in increasing norm.
    steps: Vec<BestApprox>,
    /// `Ψ` is known exactly for `Q` below this value.
    horizon: f64,
    pub mode: DeltaStarMode,
}

impl FrequencyProfile {
    /// Profile for `ω = (1, x)` where `x` is given by its continued fraction and sign.
    pub fn from_cf(cf: ContFrac, negative: bool) -> Result<Self> {
        let x = cf.value() * if negative { -1.0 } else { 1.0 };
        let omega = vec![1.0, x];
        let mut steps: Vec<BestApprox> = vec![BestApprox { norm: 1.0, value: 1.0, k: vec![1, 0] }];
        let sgn: i128 = if negative { -1 } else { 1 };
        let convs = cf.convergents(1e30);
        let mut resonance_norm = None;
        for c in &convs {
            let p = sgn * c.p;
            let norm = (c.q + p.abs()) as f64;
            if c.err == 0.0 {
                resonance_norm = Some(norm);
                break;
            }
            // representative with k·ω > 0: k = ±(−p, q)
            let positive = (c.q as f64) * x - p as f64 > 0.0;
            let k = if c.q.abs() < (1i128 << 62) && p.abs() < (1i128 << 62) {
                if positive {
                    vec![-(p as i64), c.q as i64]
                } else {
                    vec![p as i64, -(c.q as i64)]
                }
            } else {
                vec![]
            };
            let value = 1.0 / c.err;
            let last = steps.last_mut().unwrap();
            if norm == last.norm {
                if value > last.value {
                    *last = BestApprox { norm, value, k };
                }
            } else if value > last.value {
                steps.push(BestApprox { norm, value, k });
            }
        }
        let horizon = match resonance_norm {
            Some(r) => r,
            None => convs.last().map(|c| (c.q + c.p.abs()) as f64).unwrap_or(1.0),
        };
        Ok(FrequencyProfile { omega, cf: Some(cf), steps, horizon, mode: DeltaStarMode::Staircase })
    }

    /// `ω = (1, φ)` with exact convergent data.
    pub fn golden() -> Self {
        Self::from_cf(ContFrac::golden(), false).unwrap()
    }

    /// General vector; two frequencies with `ω_1 = 1` use exact continued fractions of
    /// the stored double, others a brute-force table up to `q_max`.
    pub fn new(omega: &[f64], q_max: usize) -> Result<Self> {
        if omega.len() < 2 {
            return Err(Error::Parameter("need at least two frequencies".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("non-finite frequency".into()));
        }
        if omega.len() == 2 && omega[0] == 1.0 {
            let x = omega[1];
            return Self::from_cf(ContFrac::from_f64(x.abs())?, x < 0.0);
        }
        let table = psi_table(omega, q_max, DEFAULT_LATTICE_BUDGET);
        let (steps, horizon) = match table {
            Ok(t) => {
                let mut steps: Vec<BestApprox> = Vec::new();
                for v in &t {
                    if steps.last().map_or(true, |s| v.value > s.value) {
                        steps.push(BestApprox { norm: v.q, value: v.value, k: v.k.clone() });
                    }
                }
                (steps, q_max as f64 + 1.0)
            }
            Err(Error::Resonance { k }) => {
                let r = lattice_norm(&k) as usize;
                let t = if r > 1 { psi_table(omega, r - 1, DEFAULT_LATTICE_BUDGET)? } else { vec![] };
                let mut steps: Vec<BestApprox> = Vec::new();
                for v in &t {
                    if steps.last().map_or(true, |s| v.value > s.value) {
                        steps.push(BestApprox { norm: v.q, value: v.value, k: v.k.clone() });
                    }
                }
                if steps.is_empty() {
                    return Err(Error::Resonance { k });
                }
                (steps, r as f64)
            }
            Err(e) => return Err(e),
        };
        Ok(FrequencyProfile { omega: omega.to_vec(), cf: None, steps, horizon, mode: DeltaStarMode::Staircase })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn continued_fraction(&self) -> Option<&ContFrac> {
        self.cf.as_ref()
    }

    /// Steps of the staircase (best approximations in ℓ1).
    pub fn steps(&self) -> &[BestApprox] {
        &self.steps
    }

    /// `Ψ_ω` is exact for `Q` strictly below the horizon.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn step_index(&self, q: f64) -> Result<usize> {
        if !(q >= 1.0) {
            return Err(Error::Domain(format!("Psi needs Q >= 1, got {q}")));
        }
        if q >= self.horizon {
            return Err(Error::Horizon { index: q.min(1e18) as usize, partial: self.steps.last().unwrap().value });
        }
        let q = q.floor();
        Ok(self.steps.partition_point(|s| s.norm <= q) - 1)
    }

    /// `Ψ_ω(Q)` with the achieving mode.
    pub fn psi(&self, q: f64) -> Result<PsiValue> {
        let s = &self.steps[self.step_index(q)?];
        Ok(PsiValue { q, value: s.value, k: s.k.clone() })
    }

    /// `Δ_ω(Q) = QΨ_ω(Q)`.
    pub fn delta(&self, q: f64) -> Result<f64> {
        Ok(q * self.psi(q)?.value)
    }

    /// Piecewise-linear envelope with `Ψ_ω(Q) <= Ψ(Q) <= Ψ_ω(Q+1)`.
    pub fn psi_envelope(&self, q: f64) -> Result<f64> {
        let f = q.floor();
        let a = self.psi(f)?.value;
        let b = self.psi(f + 1.0)?.value;
        Ok(a + (q - f) * (b - a))
    }

    /// Largest integer `Q` with `QΨ_ω(Q) <= x`.
    pub fn delta_star_staircase(&self, x: f64) -> Result<f64> {
        let psi1 = self.steps[0].value;
        if !(x >= psi1) {
            return Err(Error::Domain(format!("Delta* needs x >= Psi(1) = {psi1}, got {x}")));
        }
        // Δ is increasing: find the last step whose left end satisfies normΨ <= x
        let i = self.steps.partition_point(|s| s.norm * s.value <= x) - 1;
        let s = &self.steps[i];
        let next = self.steps.get(i + 1).map(|t| t.norm).unwrap_or(self.horizon);
        let m = (x / s.value).floor().min(next - 1.0);
        if i + 1 == self.steps.len() && m >= self.horizon - 1.0 {
            return Err(Error::Horizon { index: self.horizon as usize, partial: m });
        }
        Ok(m)
    }

    /// Continuous-envelope version of `Δ*`.
    pub fn delta_star_envelope(&self, x: f64) -> Result<f64> {
        let m = self.delta_star_staircase(x)?;
        let f = |q: f64| -> Result<f64> { Ok(q * self.psi_envelope(q)?) };
        if f(m + 1.0)? <= x {
            return Ok(m + 1.0);
        }
        let (mut lo, mut hi) = (m, m + 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// `Δ*_ω(x)` in the configured mode.
    pub fn delta_star(&self, x: f64) -> Result<f64> {
        match self.mode {
            DeltaStarMode::Staircase => self.delta_star_staircase(x),
            DeltaStarMode::Envelope => self.delta_star_envelope(x),
        }
    }
}

/// A periodic vector `v` with minimal period `T` (so `Tv` is a primitive integer vector).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicVector {
    pub v: Vec<f64>,
    pub period: f64,
    pub tv: Vec<i64>,
}

impl PeriodicVector {
    /// `v = u / t`; the integer vector is reduced to a primitive one.
    pub fn new(u: Vec<i64>, t: f64) -> Result<Self> {
        let g = gcd_vec(&u);
        if g == 0 || !(t > 0.0) {
            return Err(Error::Parameter("periodic vector needs nonzero u and t > 0".into()));
        }
        let tv: Vec<i64> = u.iter().map(|x| x / g).collect();
        let period = t / g as f64;
        let v = tv.iter().map(|&x| x as f64 / period).collect();
        Ok(PeriodicVector { v, period, tv })
    }

    pub fn dim(&self) -> usize {
        self.tv.len()
    }

    /// `T(k·v) = k·(Tv)` as an integer.
    pub fn resonance(&self, k: &[i64]) -> i64 {
        k.iter().zip(&self.tv).map(|(a, b)| a * b).sum()
    }
}

/// Dirichlet approximation with its certified bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletApprox {
    pub vector: PeriodicVector,
    /// `|ω − v|` in ℓ1.
    pub error: f64,
    /// `(n−1)/(TQ)`.
    pub error_bound: f64,
    pub period_lower: f64,
    pub period_upper: f64,
}

impl DirichletApprox {
    pub fn bounds_hold(&self) -> bool {
        let t = self.vector.period;
        self.error <= self.error_bound * (1.0 + 1e-12)
            && t >= self.period_lower * (1.0 - 1e-12)
            && t <= self.period_upper * (1.0 + 1e-12)
    }
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Best simultaneous approximation with denominator `q <= Q^{n−1}`, normalized on the
/// largest coordinate: `v = |ω|_∞(±1, p/q)`, `T = q/|ω|_∞`.
pub fn dirichlet_approx(omega: &[f64], q: f64) -> Result<DirichletApprox> {
    let i0 = omega
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bw), (i, w)| if w.abs() > bw { (i, w.abs()) } else { (bi, bw) })
        .0;
    dirichlet_approx_axis(omega, q, i0)
}

/// Same construction normalized on coordinate `axis` instead of the largest one. The
/// error bound still holds; the period bounds are only guaranteed for the largest axis.
pub fn dirichlet_approx_axis(omega: &[f64], q: f64, i0: usize) -> Result<DirichletApprox> {
    let n = omega.len();
    if n < 2 || !(q >= 1.0) || i0 >= n {
        return Err(Error::Parameter("need n >= 2, Q >= 1 and a valid axis".into()));
    }
    let wmax = omega[i0].abs();
    if wmax == 0.0 {
        return Err(Error::Parameter("normalizing coordinate is zero".into()));
    }
    let sign = omega[i0].signum() as i64;
    let x: Vec<f64> = omega.iter().map(|w| w / wmax).collect();
    let q_cap = q.powi(n as i32 - 1).floor();
    if q_cap > 1e8 {
        return Err(Error::Budget(format!("Dirichlet scan over q <= {q_cap}")));
    }
    let mut best: Option<(f64, i64)> = None;
    for qq in 1..=q_cap as i64 {
        let mut e = 0.0f64;
        for (i, xi) in x.iter().enumerate() {
            if i != i0 {
                let t = qq as f64 * xi;
                e = e.max((t - t.round()).abs());
            }
        }
        if best.map_or(true, |(be, _)| e < be) {
            best = Some((e, qq));
        }
    }
    let (_, qq) = best.unwrap();
    let u: Vec<i64> = x
        .iter()
        .enumerate()
        .map(|(i, xi)| if i == i0 { sign * qq } else { (qq as f64 * xi).round() as i64 })
        .collect();
    let vector = PeriodicVector::new(u, qq as f64 / wmax)?;
    let diff: Vec<f64> = omega.iter().zip(&vector.v).map(|(a, b)| a - b).collect();
    let norm = l1(omega);
    let t = vector.period;
    Ok(DirichletApprox {
        error: l1(&diff),
        error_bound: (n as f64 - 1.0) / (t * q),
        period_lower: 1.0 / norm,
        period_upper: n as f64 / norm * q.powi(n as i32 - 1),
        vector,
    })
}

/// A ℤ-basis of periodic approximations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZBasis {
    pub vectors: Vec<PeriodicVector>,
    /// Determinant of the integer matrix with rows `T_j v_j`.
    pub determinant: i64,
    /// Smallest `c` with `|ω − v_j| <= c/(q_j Q)` and `q_j <= cΨ(Q)`.
    pub constant: f64,
}

fn det(m: &[Vec<i64>]) -> i64 {
    match m.len() {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("determinant only for n <= 3"),
    }
}

/// Periodic vector `(ω_{i0}/u_{i0}) u` (the convention of the Dirichlet lemma).
fn scaled_vector(omega: &[f64], i0: usize, u: Vec<i64>) -> Result<PeriodicVector> {
    let t = u[i0] as f64 / omega[i0];
    PeriodicVector::new(u, t.abs()).map(|mut pv| {
        if t < 0.0 {
            pv.tv.iter_mut().for_each(|x| *x = -*x);
            pv.v = pv.tv.iter().map(|&x| x as f64 / pv.period).collect();
        }
        pv
    })
}

/// ℤ-basis of periodic approximations: consecutive convergents for two frequencies,
/// bounded brute force for three.
pub fn zbasis_approx(fp: &FrequencyProfile, q: f64) -> Result<ZBasis> {
    let omega = fp.omega();
    let n = omega.len();
    let (i0, wmax) = omega
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bw), (i, w)| if w.abs() > bw { (i, w.abs()) } else { (bi, bw) });
    // two frequencies are normalized on the first coordinate, ω = (1, x)
    let (i0, wmax) = if n == 2 { (0, omega[0].abs()) } else { (i0, wmax) };
    let psi_q = fp.psi(q)?.value;
    let mut rows: Vec<Vec<i64>> = Vec::new();
    match n {
        2 => {
            let cf = fp
                .continued_fraction()
                .ok_or_else(|| Error::Unsupported("two-frequency basis needs omega = (1, x)".into()))?;
            let sgn: i128 = if omega[1] < 0.0 { -1 } else { 1 };
            let convs = cf.convergents(1e30);
            let norm = |c: &Convergent| (c.q + c.p.abs()) as f64;
            let mut j = convs.iter().rposition(|c| norm(c) <= q).unwrap_or(0);
            if j + 1 >= convs.len() {
                if convs[j].err != 0.0 {
                    return Err(Error::Horizon { index: j, partial: q });
                }
                j = j.saturating_sub(1);
            }
            if j + 1 >= convs.len() {
                return Err(Error::Unsupported("integer frequency ratio has no two-vector basis".into()));
            }
            for c in &convs[j..j + 2] {
                rows.push(vec![c.q as i64, (sgn * c.p) as i64]);
            }
        }
        3 => rows = brute_force_basis(omega, i0, q)?,
        _ => return Err(Error::Unsupported(format!("Z-basis approximation for n = {n}"))),
    }
    let d = det(&rows);
    if d.abs() != 1 {
        return Err(Error::Consistency(format!("basis determinant {d}")));
    }
    let mut vectors = Vec::new();
    let mut constant: f64 = 0.0;
    for u in rows {
        let qj = u[i0].abs() as f64;
        let pv = scaled_vector(omega, i0, u)?;
        let diff: Vec<f64> = omega.iter().zip(&pv.v).map(|(a, b)| a - b).collect();
        constant = constant.max(l1(&diff) * qj * q / wmax).max(qj / psi_q);
        vectors.push(pv);
    }
    Ok(ZBasis { vectors, determinant: d, constant })
}

fn brute_force_basis(omega: &[f64], i0: usize, q: f64) -> Result<Vec<Vec<i64>>> {
    let x: Vec<f64> = omega.iter().map(|w| w / omega[i0]).collect();
    let q_cap = (q * q).ceil().max(4.0) as i64 * 4;
    if q_cap > 200_000 {
        return Err(Error::Budget(format!("brute-force basis scan up to {q_cap}")));
    }
    // candidate integer vectors with small simultaneous error, best first
    let mut cands: Vec<(f64, Vec<i64>)> = Vec::new();
    for qq in 1..=q_cap {
        let base: Vec<f64> = x.iter().map(|xi| qq as f64 * xi).collect();
        let others: Vec<usize> = (0..x.len()).filter(|&i| i != i0).collect();
        for d0 in -1i64..=1 {
            for d1 in -1i64..=1 {
                let mut u = vec![0i64; x.len()];
                u[i0] = qq;
                u[others[0]] = base[others[0]].round() as i64 + d0;
                u[others[1]] = base[others[1]].round() as i64 + d1;
                let e = others
                    .iter()
                    .map(|&i| (base[i] - u[i] as f64).abs())
                    .fold(0.0f64, f64::max);
                let score = e * qq as f64 * q;
                if score <= 8.0 {
                    cands.push((qq as f64 + score, u));
                }
            }
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    cands.truncate(400);
    let m = cands.len();
    let mut best: Option<(f64, Vec<Vec<i64>>)> = None;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let rows = vec![cands[a].1.clone(), cands[b].1.clone(), cands[c].1.clone()];
                if det(&rows).abs() == 1 {
                    let cost = cands[c].0;
                    if best.as_ref().map_or(true, |(bc, _)| cost < *bc) {
                        best = Some((cost, rows));
                    }
                    break;
                }
            }
        }
    }
    best.map(|(_, r)| r)
        .ok_or_else(|| Error::Budget("no unimodular triple among the scanned candidates".into()))
}

/// Verdict of the dyadic convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BrVerdict {
    ConvergedWithinBudget,
    DivergenceDiagnosed,
    Inconclusive,
}

/// Outcome of [`br_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrReport {
    pub q0: Option<f64>,
    /// `Q_i = Δ*(2^i Δ(Q₀))` for the reported `Q₀` (or the probe value when none was found).
    pub q: Vec<f64>,
    pub sigma: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Geometric tail estimate beyond `i_max` (infinite if the terms do not decay geometrically).
    pub tail_estimate: f64,
    pub budget: f64,
    /// Least-squares slope of `ln σ_i` against `ln i` over the tail.
    pub tail_slope: f64,
    /// Slope and R² of the partial sums against `ln i` over the tail.
    pub log_growth_slope: f64,
    pub log_growth_r2: f64,
    /// `∏ (1 − σ_i)^{2n+1}` recomputed from the terms.
    pub product: f64,
    pub verdict: BrVerdict,
}

/// Parameters of [`br_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrParams {
    pub s: f64,
    pub eta: f64,
    pub n: usize,
    pub i_max: usize,
    /// Constant `c₂` (default 1).
    pub c2: f64,
    /// Largest `Q₀` the search may try.
    pub q0_cap: f64,
}

impl Default for BrParams {
    fn default() -> Self {
        BrParams { s: 1.0, eta: 0.0, n: 2, i_max: 64, c2: 1.0, q0_cap: 1e12 }
    }
}

fn c_inv_clamped(sp: &ScaleProfile, y: f64) -> Result<f64> {
    if y <= 1.0 {
        Ok(sp.sigma_bar())
    } else {
        sp.c_inv(y)
    }
}

/// The dyadic terms `σ_i` for a given `Q₀`; stops early at the `Ψ` horizon.
fn br_terms(sp: &ScaleProfile, fp: &FrequencyProfile, p: &BrParams, q0: f64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let d0 = fp.delta(q0)?;
    let scale = p.c2 / (1.0 + p.eta) * p.s;
    let mut qs = Vec::new();
    let mut sig = Vec::new();
    for i in 0..=p.i_max {
        let qi = if i == 0 { q0 } else {
            match fp.delta_star(2f64.powi(i as i32) * d0) {
                Ok(v) => v,
                Err(Error::Horizon { .. }) => return Ok((qs, sig, true)),
                Err(e) => return Err(e),
            }
        };
        qs.push(qi);
        sig.push(c_inv_clamped(sp, scale * qi)?);
    }
    Ok((qs, sig, false))
}

fn geometric_tail(sig: &[f64]) -> f64 {
    let m = sig.len();
    if m < 4 {
        return f64::INFINITY;
    }
    // worst ratio over the last few terms
    let r = sig[m - 4..].windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    if r < 1.0 {
        sig[m - 1] * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Dyadic convergence test with the search for the smallest admissible `Q₀ >= n + 2`.
///
/// The search assumes the total `Σσ_i + tail` is nonincreasing in `Q₀` (exponential
/// bracketing, then bisection) and verifies the claimed minimum at `Q₀ − 1`.
pub fn br_test(sp: &ScaleProfile, fp: &FrequencyProfile, p: &BrParams) -> Result<BrReport> {
    let budget = std::f64::consts::LN_2 / (4.0 * p.n as f64 + 2.0);
    let total = |q0: f64| -> Result<(f64, Vec<f64>, Vec<f64>, bool)> {
        let (qs, sig, trunc) = br_terms(sp, fp, p, q0)?;
        let s: f64 = sig.iter().sum::<f64>() + if trunc { 0.0 } else { geometric_tail(&sig) };
        Ok((s, qs, sig, trunc))
    };
    let lo0 = (p.n + 2) as f64;
    let mut found = None;
    let mut lo = lo0;
    let mut hi = lo0;
    loop {
        let (s, _, _, trunc) = total(hi)?;
        if s <= budget && !trunc {
            break;
        }
        if hi >= p.q0_cap || hi * 2.0 >= fp.horizon() {
            hi = f64::NAN;
            break;
        }
        lo = hi;
        hi = (hi * 2.0).min(p.q0_cap);
    }
    if hi.is_finite() {
        if hi > lo0 {
            let (mut a, mut b) = (lo, hi);
            while b - a > 1.0 {
                let mid = ((a + b) / 2.0).floor();
                let (s, _, _, trunc) = total(mid)?;
                if s <= budget && !trunc {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            hi = b;
            let (s_prev, ..) = total(hi - 1.0)?;
            if s_prev <= budget {
                return Err(Error::Consistency(format!(
                    "Q0 search not monotone: Q0 - 1 = {} already within budget",
                    hi - 1.0
                )));
            }
        }
        found = Some(hi);
    }
    let probe = found.unwrap_or(lo0);
    let (_, qs, sigma, _) = total(probe)?;
    let mut partial_sums = Vec::with_capacity(sigma.len());
    let mut acc = 0.0;
    for s in &sigma {
        acc += s;
        partial_sums.push(acc);
    }
    let tail_estimate = geometric_tail(&sigma);
    let m = sigma.len();
    let start = (m / 4).max(1);
    let xs: Vec<f64> = (start..m).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = (start..m).map(|i| sigma[i].ln()).collect();
    let tail_slope = least_squares(&xs, &ys).0;
    let ps: Vec<f64> = (start..m).map(|i| partial_sums[i]).collect();
    let (log_growth_slope, _, log_growth_r2) = least_squares(&xs, &ps);
    let product: f64 = sigma.iter().map(|s| (1.0 - s).powi(2 * p.n as i32 + 1)).product();
    let verdict = if found.is_some() {
        BrVerdict::ConvergedWithinBudget
    } else if tail_slope >= -1.1 && log_growth_slope > 0.0 && log_growth_r2 >= 0.95 {
        BrVerdict::DivergenceDiagnosed
    } else {
        BrVerdict::Inconclusive
    };
    Ok(BrReport {
        q0: found,
        q: qs,
        sigma,
        partial_sums,
        tail_estimate,
        budget,
        tail_slope,
        log_growth_slope,
        log_growth_r2,
        product,
        verdict,
    })
}

/// Sampled ratios `ln Ψ_ω(Q) / Ω(cQ)` for one value of `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiouvilleRow {
    pub c: f64,
    pub q: Vec<f64>,
    pub ratio: Vec<f64>,
    pub running_max: f64,
    pub running_min: f64,
}

/// Finite-sample diagnostic for the destruction and rigidity conditions.
pub fn liouville_probe(sp: &ScaleProfile, fp: &FrequencyProfile, c_grid: &[f64], q_grid: &[f64]) -> Result<Vec<LiouvilleRow>> {
    let mut rows = Vec::new();
    for &c in c_grid {
        let mut q = Vec::new();
        let mut ratio = Vec::new();
        for &qq in q_grid {
            let om = sp.omega(c * qq)?.value;
            if om <= 0.0 {
                continue;
            }
            q.push(qq);
            ratio.push(fp.psi(qq)?.value.ln() / om);
        }
        let running_max = ratio.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let running_min = ratio.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(LiouvilleRow { c, q, ratio, running_max, running_min });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_psi_at_five() {
        let v = psi(&[1.0, golden()], 5.0).unwrap();
        assert_eq!(v.k, vec![-3, 2]);
        assert!((v.value - 1.0 / (2.0 * golden() - 3.0)).abs() < 1e-9);
    }

    #[test]
    fn resonance_reported() {
        match psi(&[1.0, 0.5], 3.0) {
            Err(Error::Resonance { k }) => assert_eq!(k, vec![1, -2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dirichlet_golden() {
        let d = dirichlet_approx(&[1.0, golden()], 3.0).unwrap();
        assert_eq!(d.vector.tv, vec![2, 3]);
        assert!((d.vector.period - 3.0 / golden()).abs() < 1e-15);
        assert!(d.bounds_hold());
        let d = dirichlet_approx_axis(&[1.0, golden()], 3.0, 0).unwrap();
        assert_eq!(d.vector.tv, vec![3, 5]);
        assert!((d.vector.period - 3.0).abs() < 1e-15);
        assert!((d.error - 0.048633).abs() < 1e-5);
        assert!(d.error <= d.error_bound);
    }

    #[test]
    fn dirichlet_rational_is_exact() {
        let d = dirichlet_approx(&[1.0, 0.25, -0.5], 3.0).unwrap();
        assert_eq!(d.error, 0.0);
        assert_eq!(d.vector.tv, vec![4, 1, -2]);
    }

    #[test]
    fn zbasis_golden() {
        let b = zbasis_approx(&FrequencyProfile::golden(), 5.0).unwrap();
        assert_eq!(b.vectors[0].tv, vec![2, 3]);
        assert_eq!(b.vectors[1].tv, vec![3, 5]);
        assert_eq!(b.determinant.abs(), 1);
    }

    #[test]
    fn zbasis_rational() {
        let fp = FrequencyProfile::new(&[1.0, 0.25], 10).unwrap();
        let b = zbasis_approx(&fp, 3.0).unwrap();
        assert_eq!(b.vectors[1].tv, vec![4, 1]);
        assert!(b.vectors.iter().any(|v| (v.v[1] - 0.25).abs() < 1e-15 && v.v[0] == 1.0));
    }

    #[test]
    fn staircase_left_endpoint() {
        let fp = FrequencyProfile::golden();
        let d1 = fp.delta(1.0).unwrap();
        assert_eq!(fp.delta_star_staircase(d1).unwrap(), 1.0);
        assert!(fp.delta_star_staircase(0.5).is_err());
    }

    #[test]
    fn continued_fraction_of_dyadic() {
        let cf = ContFrac::from_f64(0.25).unwrap();
        assert_eq!((cf.a0, cf.partial.clone()), (0, vec![4]));
        let c = cf.convergents(1e9);
        assert_eq!((c[1].p, c[1].q, c[1].err), (1, 4, 0.0));
    }
}
