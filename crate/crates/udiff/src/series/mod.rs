//! Truncated Fourier–Taylor series on 𝕋ⁿ × ball, with an optional parameter jet.
//!
//! A series is `f(θ, I, w) = Σ c_{k,m,b} e^{2πik·θ} I^m w^b` over `|k|_∞ ≤ K`,
//! `|m| ≤ D_I`, `|b| ≤ D_w`. Products and brackets go through an alias-free
//! collocation grid; averaging and homological solves act mode by mode.

mod io;
mod layout;
mod norm;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

pub use layout::{monomials, Layout};
pub use norm::{decay_check, norm_upper, DecayReport, NormCertificate};

use crate::diophantine::PeriodicVector;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const TWO_PI: f64 = 2.0 * PI;

/// Analyticity-type widths attached to a series (angle width, action radius,
/// parameter radius). Only carried along and serialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Widths {
    pub s: f64,
    pub delta: f64,
    pub h: f64,
}

impl Default for Widths {
    fn default() -> Self {
        Widths { s: 1.0, delta: 1.0, h: 1.0 }
    }
}

/// Dense truncated Fourier–Taylor series.
#[derive(Clone)]
pub struct FTSeries {
    layout: Arc<Layout>,
    coeffs: Vec<Complex64>,
    pub widths: Widths,
    /// Coefficients are conjugate-symmetric under `k → −k`.
    pub real: bool,
}

impl std::fmt::Debug for FTSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FTSeries({:?}, nnz = {})", self.layout, self.coeffs.iter().filter(|c| **c != ZERO).count())
    }
}

/// Grid values of every polynomial slot (`None` for identically zero slots).
pub struct PolyGrids {
    grids: Vec<Option<Vec<Complex64>>>,
}

impl PolyGrids {
    fn empty(n_poly: usize) -> Self {
        PolyGrids { grids: vec![None; n_poly] }
    }

    /// Values of slot `p` on the collocation grid.
    pub fn slot(&self, p: usize) -> Option<&[Complex64]> {
        self.grids[p].as_deref()
    }

    /// `out += sign · a · b` with jet truncation.
    fn accumulate(&mut self, layout: &Layout, a: &PolyGrids, b: &PolyGrids, sign: f64) {
        for pc in 0..layout.n_poly() {
            for &(pa, pb) in layout.product_pairs(pc) {
                let (Some(ga), Some(gb)) = (&a.grids[pa], &b.grids[pb]) else { continue };
                let out = self.grids[pc].get_or_insert_with(|| vec![ZERO; layout.grid_len()]);
                for ((o, x), y) in out.iter_mut().zip(ga).zip(gb) {
                    *o += x * y * sign;
                }
            }
        }
    }
}

/// Cached grids of `∂_θ Y` and `∂_I Y` for repeated brackets `{·, Y}`.
pub struct BracketWith {
    d_theta: Vec<PolyGrids>,
    d_action: Vec<PolyGrids>,
    layout: Arc<Layout>,
}

impl BracketWith {
    pub fn new(y: &FTSeries) -> Self {
        let n = y.layout.n();
        BracketWith {
            d_theta: (0..n).map(|j| y.d_theta(j).grids()).collect(),
            d_action: (0..n).map(|j| y.d_action(j).grids()).collect(),
            layout: y.layout.clone(),
        }
    }

    /// `{f, Y}`.
    pub fn apply(&self, f: &FTSeries) -> Result<FTSeries> {
        if !f.layout.same_shape(&self.layout) {
            return Err(Error::Domain("bracket of series with different layouts".into()));
        }
        let lay = &self.layout;
        let mut out = PolyGrids::empty(lay.n_poly());
        for j in 0..lay.n() {
            let ft = f.d_theta(j);
            if !ft.is_zero() {
                out.accumulate(lay, &ft.grids(), &self.d_action[j], 1.0);
            }
            let fa = f.d_action(j);
            if !fa.is_zero() {
                out.accumulate(lay, &fa.grids(), &self.d_theta[j], -1.0);
            }
        }
        let mut r = FTSeries::from_grids(lay.clone(), out).0;
        r.widths = f.widths;
        r.real = f.real;
        Ok(r)
    }
}

fn pow_u(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All multi-indices `γ ≤ a` componentwise.
fn sub_indices(a: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(a.len())];
    for &aj in a {
        let mut next = Vec::new();
        for g in &out {
            for v in 0..=aj {
                let mut h = g.clone();
                h.push(v);
                next.push(h);
            }
        }
        out = next;
    }
    out
}

/// Angle-only parts (slot `I⁰w⁰`) of several series, evaluated together so the
/// Fourier basis is computed once per point.
#[derive(Debug, Clone)]
pub struct AngleBundle {
    kmax: usize,
    modes: Vec<Vec<i64>>,
    rows: Vec<Vec<Complex64>>,
}

impl AngleBundle {
    pub fn new(series: &[&FTSeries]) -> Self {
        let lay = series.first().map(|s| s.layout.clone());
        let (kmax, nm) = lay.as_ref().map_or((0, 0), |l| (l.kmax(), l.n_modes()));
        let used: Vec<usize> = (0..nm).filter(|&m| series.iter().any(|s| s.coeffs[m] != ZERO)).collect();
        let modes = used.iter().map(|&m| lay.as_ref().unwrap().mode(m).to_vec()).collect();
        let rows = series.iter().map(|s| used.iter().map(|&m| s.coeffs[m]).collect()).collect();
        AngleBundle { kmax, modes, rows }
    }

    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.kmax as i64;
        let per_axis: Vec<Vec<Complex64>> = theta
            .iter()
            .map(|&t| {
                let e = Complex64::from_polar(1.0, TWO_PI * t);
                let mut pos = vec![Complex64::new(1.0, 0.0); self.kmax + 1];
                for j in 1..=self.kmax {
                    pos[j] = pos[j - 1] * e;
                }
                (-k..=k).map(|m| if m >= 0 { pos[m as usize] } else { pos[(-m) as usize].conj() }).collect()
            })
            .collect();
        let basis: Vec<Complex64> = self
            .modes
            .iter()
            .map(|kv| kv.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (j, &kj)| acc * per_axis[j][(kj + k) as usize]))
            .collect();
        self.rows.iter().map(|r| r.iter().zip(&basis).map(|(c, b)| (c * b).re).sum()).collect()
    }
}

impl FTSeries {
    pub fn zero(layout: Arc<Layout>) -> Self {
        let len = layout.len();
        FTSeries { layout, coeffs: vec![ZERO; len], widths: Widths::default(), real: true }
    }

    pub fn constant(layout: Arc<Layout>, v: f64) -> Self {
        let mut f = FTSeries::zero(layout);
        let z = f.layout.zero_mode();
        f.coeffs[z] = Complex64::new(v, 0.0);
        f
    }

    /// `amp · cos(2πk·θ) · I^m`.
    pub fn cos_mode(layout: Arc<Layout>, k: &[i64], m: &[u32], amp: f64) -> Result<Self> {
        let mut f = FTSeries::zero(layout);
        f.add_cos(k, m, amp)?;
        Ok(f)
    }

    /// `amp · sin(2πk·θ) · I^m`.
    pub fn sin_mode(layout: Arc<Layout>, k: &[i64], m: &[u32], amp: f64) -> Result<Self> {
        let mut f = FTSeries::zero(layout);
        f.add_sin(k, m, amp)?;
        Ok(f)
    }

    /// `coeff · I^m`.
    pub fn action_monomial(layout: Arc<Layout>, m: &[u32], coeff: f64) -> Result<Self> {
        let mut f = FTSeries::zero(layout);
        let zero = vec![0i64; f.layout.n()];
        f.add(&zero, m, &[], Complex64::new(coeff, 0.0))?;
        Ok(f)
    }

    /// Samples an angle-only real function on the collocation grid and keeps the
    /// retained modes. Only exact for trigonometric polynomials within the cutoff.
    pub fn from_angle_fn(layout: Arc<Layout>, f: impl Fn(&[f64]) -> f64) -> Self {
        let vals: Vec<f64> = (0..layout.grid_len()).map(|i| f(&layout.grid_point(i))).collect();
        FTSeries::from_grid_values(layout, &vals)
    }

    /// Angle-only series from real values on the collocation grid (grid order).
    pub fn from_grid_values(layout: Arc<Layout>, vals: &[f64]) -> Self {
        let g: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut grids = PolyGrids::empty(layout.n_poly());
        grids.grids[0] = Some(g);
        let mut r = FTSeries::from_grids(layout, grids).0;
        r.realify();
        r
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn slot(&self, k: &[i64], m: &[u32], w: &[u32]) -> Result<usize> {
        let lay = &self.layout;
        let mode = lay.mode_index(k).ok_or_else(|| Error::Domain(format!("mode {k:?} beyond cutoff {}", lay.kmax())))?;
        let a = lay.action_index(m).ok_or_else(|| Error::Domain(format!("action degree {m:?} beyond truncation")))?;
        let wz;
        let w = if w.is_empty() && lay.n_w() > 0 {
            wz = vec![0u32; lay.n_w()];
            &wz[..]
        } else {
            w
        };
        let b = lay.param_index(w).ok_or_else(|| Error::Domain(format!("parameter degree {w:?} beyond truncation")))?;
        Ok(lay.poly(a, b) * lay.n_modes() + mode)
    }

    pub fn get(&self, k: &[i64], m: &[u32], w: &[u32]) -> Complex64 {
        self.slot(k, m, w).map(|i| self.coeffs[i]).unwrap_or(ZERO)
    }

    /// Adds `v` to the coefficient of `e^{2πik·θ} I^m w^b`.
    pub fn add(&mut self, k: &[i64], m: &[u32], w: &[u32], v: Complex64) -> Result<()> {
        let i = self.slot(k, m, w)?;
        self.coeffs[i] += v;
        Ok(())
    }

    pub fn add_cos(&mut self, k: &[i64], m: &[u32], amp: f64) -> Result<()> {
        if k.iter().all(|&x| x == 0) {
            return self.add(k, m, &[], Complex64::new(amp, 0.0));
        }
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        self.add(k, m, &[], Complex64::new(amp / 2.0, 0.0))?;
        self.add(&neg, m, &[], Complex64::new(amp / 2.0, 0.0))
    }

    pub fn add_sin(&mut self, k: &[i64], m: &[u32], amp: f64) -> Result<()> {
        if k.iter().all(|&x| x == 0) {
            return Ok(());
        }
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        self.add(k, m, &[], Complex64::new(0.0, -amp / 2.0))?;
        self.add(&neg, m, &[], Complex64::new(0.0, amp / 2.0))
    }

    fn check(&self, other: &FTSeries) -> Result<()> {
        if self.layout.same_shape(&other.layout) {
            Ok(())
        } else {
            Err(Error::Domain(format!("incompatible series layouts {:?} and {:?}", self.layout, other.layout)))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    fn poly_is_zero(&self, p: usize) -> bool {
        let nm = self.layout.n_modes();
        self.coeffs[p * nm..(p + 1) * nm].iter().all(|c| *c == ZERO)
    }

    pub fn add_series(&self, g: &FTSeries) -> Result<FTSeries> {
        self.axpy(1.0, g)
    }

    pub fn sub_series(&self, g: &FTSeries) -> Result<FTSeries> {
        self.axpy(-1.0, g)
    }

    /// `self + a·g`.
    pub fn axpy(&self, a: f64, g: &FTSeries) -> Result<FTSeries> {
        self.check(g)?;
        let mut r = self.clone();
        for (x, y) in r.coeffs.iter_mut().zip(&g.coeffs) {
            *x += y * a;
        }
        r.real = self.real && g.real;
        Ok(r)
    }

    pub fn scale(&self, a: f64) -> FTSeries {
        let mut r = self.clone();
        r.coeffs.iter_mut().for_each(|c| *c *= a);
        r
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ |c|`, the plain coefficient ℓ1 norm.
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Applies a per-(mode, slot) complex factor.
    fn map_coeffs(&self, f: impl Fn(&[i64], usize) -> Complex64) -> FTSeries {
        let lay = &self.layout;
        let nm = lay.n_modes();
        let mut r = self.clone();
        for p in 0..lay.n_poly() {
            for mode in 0..nm {
                let i = p * nm + mode;
                if r.coeffs[i] != ZERO {
                    r.coeffs[i] *= f(lay.mode(mode), p);
                }
            }
        }
        r
    }

    /// `∂f/∂θ_j` (factor `2πik_j`).
    pub fn d_theta(&self, j: usize) -> FTSeries {
        self.map_coeffs(|k, _| Complex64::new(0.0, TWO_PI * k[j] as f64))
    }

    /// Derivative along `θ ↦ θ + tω`: factor `2πik·ω`.
    pub fn d_along(&self, omega: &[f64]) -> FTSeries {
        self.map_coeffs(|k, _| Complex64::new(0.0, TWO_PI * crate::diophantine::dot(k, omega)))
    }

    /// `∂f/∂I_j`.
    pub fn d_action(&self, j: usize) -> FTSeries {
        let lay = self.layout.clone();
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(lay.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            let (a, b) = lay.split_poly(p);
            if let Some((a2, fac)) = lay.action_deriv(a, j) {
                let q = lay.poly(a2, b);
                for mode in 0..nm {
                    r.coeffs[q * nm + mode] += self.coeffs[p * nm + mode] * fac;
                }
            }
        }
        r
    }

    /// `∂f/∂w_j`.
    pub fn d_param(&self, j: usize) -> FTSeries {
        let lay = self.layout.clone();
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(lay.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            let (a, b) = lay.split_poly(p);
            if let Some((b2, fac)) = lay.param_deriv(b, j) {
                let q = lay.poly(a, b2);
                for mode in 0..nm {
                    r.coeffs[q * nm + mode] += self.coeffs[p * nm + mode] * fac;
                }
            }
        }
        r
    }

    /// Values of every nonzero slot on the collocation grid.
    pub fn grids(&self) -> PolyGrids {
        let lay = &self.layout;
        let nm = lay.n_modes();
        let mut out = PolyGrids::empty(lay.n_poly());
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let mut g = vec![ZERO; lay.grid_len()];
            for mode in 0..nm {
                g[lay.mode_grid(mode)] = self.coeffs[p * nm + mode];
            }
            lay.fft_nd(&mut g, true);
            out.grids[p] = Some(g);
        }
        out
    }

    /// Back-transforms grid values, keeping the retained modes. Also returns the
    /// ℓ1 mass of discarded (beyond-cutoff) grid modes, the aliasing monitor.
    pub fn from_grids(layout: Arc<Layout>, mut grids: PolyGrids) -> (FTSeries, f64) {
        let nm = layout.n_modes();
        let norm = 1.0 / layout.grid_len() as f64;
        let mut r = FTSeries::zero(layout.clone());
        let mut discarded = 0.0;
        for p in 0..layout.n_poly() {
            let Some(g) = grids.grids[p].as_mut() else { continue };
            layout.fft_nd(g, false);
            let total: f64 = g.iter().map(|c| c.norm()).sum::<f64>() * norm;
            let mut kept = 0.0;
            for mode in 0..nm {
                let c = g[layout.mode_grid(mode)] * norm;
                kept += c.norm();
                r.coeffs[p * nm + mode] = c;
            }
            discarded += (total - kept).max(0.0);
        }
        (r, discarded)
    }

    /// Product truncated to the layout, with the discarded mass.
    pub fn mul_report(&self, g: &FTSeries) -> Result<(FTSeries, f64)> {
        self.check(g)?;
        let mut out = PolyGrids::empty(self.layout.n_poly());
        out.accumulate(&self.layout, &self.grids(), &g.grids(), 1.0);
        let (mut r, d) = FTSeries::from_grids(self.layout.clone(), out);
        r.widths = self.widths;
        r.real = self.real && g.real;
        Ok((r, d))
    }

    pub fn mul(&self, g: &FTSeries) -> Result<FTSeries> {
        Ok(self.mul_report(g)?.0)
    }

    /// `{f, g} = ∂_θf·∂_Ig − ∂_If·∂_θg`.
    pub fn bracket(&self, g: &FTSeries) -> Result<FTSeries> {
        self.check(g)?;
        BracketWith::new(g).apply(self)
    }

    /// Keeps modes with `k·(Tv) = 0`: the average along the periodic flow of `v·I`.
    pub fn average_periodic(&self, v: &PeriodicVector) -> Result<FTSeries> {
        if v.dim() != self.layout.n() {
            return Err(Error::Domain("periodic vector dimension mismatch".into()));
        }
        Ok(self.map_coeffs(|k, _| if v.resonance(k) == 0 { Complex64::new(1.0, 0.0) } else { ZERO }))
    }

    /// Keeps the zero Fourier mode only.
    pub fn average_zero(&self) -> FTSeries {
        self.map_coeffs(|k, _| if k.iter().all(|&x| x == 0) { Complex64::new(1.0, 0.0) } else { ZERO })
    }

    /// Solves `{Y, v·I} = f − [f]_v`: `Y_k = f_k/(2πi k·v)` on nonresonant modes.
    ///
    /// With `remove_resonant = false`, resonant modes of `f` must already vanish
    /// (relative to the largest coefficient), else a consistency error is raised.
    pub fn solve_homological(&self, v: &PeriodicVector, remove_resonant: bool) -> Result<FTSeries> {
        if v.dim() != self.layout.n() {
            return Err(Error::Domain("periodic vector dimension mismatch".into()));
        }
        if !remove_resonant {
            let scale = self.max_abs().max(f64::MIN_POSITIVE);
            let lay = &self.layout;
            let nm = lay.n_modes();
            for (i, c) in self.coeffs.iter().enumerate() {
                let k = lay.mode(i % nm);
                if v.resonance(k) == 0 && k.iter().any(|&x| x != 0) && c.norm() > 1e-13 * scale {
                    return Err(Error::Consistency(format!("resonant mode {k:?} has amplitude {:.3e} after projection", c.norm())));
                }
            }
        }
        let t = v.period;
        Ok(self.map_coeffs(|k, _| {
            let m = v.resonance(k);
            if m == 0 {
                ZERO
            } else {
                Complex64::new(0.0, -t / (TWO_PI * m as f64))
            }
        }))
    }

    /// Complex value at `(θ, I, w)` by direct summation.
    pub fn eval(&self, theta: &[f64], action: &[f64], w: &[f64]) -> Complex64 {
        let lay = &self.layout;
        let nm = lay.n_modes();
        let basis = self.mode_basis(theta);
        let mut total = ZERO;
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let (a, b) = lay.split_poly(p);
            let mut mono = 1.0;
            for (x, &e) in action.iter().zip(lay.action_monomial(a)) {
                mono *= pow_u(*x, e);
            }
            for (x, &e) in w.iter().zip(lay.param_monomial(b)) {
                mono *= pow_u(*x, e);
            }
            let s: Complex64 = self.coeffs[p * nm..(p + 1) * nm].iter().zip(&basis).map(|(c, e)| c * e).sum();
            total += s * mono;
        }
        total
    }

    /// Real part of [`eval`](Self::eval) without a parameter.
    pub fn value(&self, theta: &[f64], action: &[f64]) -> f64 {
        let w = vec![0.0; self.layout.n_w()];
        self.eval(theta, action, &w).re
    }

    /// `e^{2πik·θ}` for every retained mode.
    fn mode_basis(&self, theta: &[f64]) -> Vec<Complex64> {
        let lay = &self.layout;
        let kmax = lay.kmax() as i64;
        let per_axis: Vec<Vec<Complex64>> = theta
            .iter()
            .map(|&t| (-kmax..=kmax).map(|m| Complex64::from_polar(1.0, TWO_PI * m as f64 * t)).collect())
            .collect();
        (0..lay.n_modes())
            .map(|mode| {
                lay.mode(mode)
                    .iter()
                    .enumerate()
                    .fold(Complex64::new(1.0, 0.0), |acc, (j, &kj)| acc * per_axis[j][(kj + kmax) as usize])
            })
            .collect()
    }

    /// Value, angle gradient and action gradient (real parts) without a parameter.
    pub fn value_grad(&self, theta: &[f64], action: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let lay = &self.layout;
        let n = lay.n();
        let nm = lay.n_modes();
        let basis = self.mode_basis(theta);
        let mut val = 0.0;
        let mut gt = vec![0.0; n];
        let mut ga = vec![0.0; n];
        for p in 0..lay.n_poly() {
            let (a, b) = lay.split_poly(p);
            if self.poly_is_zero(p) || lay.param_monomial(b).iter().any(|&e| e > 0) {
                continue;
            }
            let m = lay.action_monomial(a);
            let mono: f64 = action.iter().zip(m).map(|(x, &e)| pow_u(*x, e)).product();
            let mut s = ZERO;
            let mut st = vec![ZERO; n];
            for (mode, (c, e)) in self.coeffs[p * nm..(p + 1) * nm].iter().zip(&basis).enumerate() {
                if *c == ZERO {
                    continue;
                }
                let ce = c * e;
                s += ce;
                for (j, kj) in lay.mode(mode).iter().enumerate() {
                    st[j] += ce * Complex64::new(0.0, TWO_PI * *kj as f64);
                }
            }
            val += s.re * mono;
            for j in 0..n {
                gt[j] += st[j].re * mono;
                if m[j] > 0 {
                    let mut dm = m[j] as f64;
                    for (i, (x, &e)) in action.iter().zip(m).enumerate() {
                        dm *= if i == j { pow_u(*x, e - 1) } else { pow_u(*x, e) };
                    }
                    ga[j] += s.re * dm;
                }
            }
        }
        (val, gt, ga)
    }

    /// Grid values (collocation grid) of the slot `(action monomial 0, parameter monomial 0)`,
    /// i.e. the series at `I = 0, w = 0`.
    pub fn grid_values_at_origin(&self) -> Vec<Complex64> {
        let lay = &self.layout;
        let nm = lay.n_modes();
        let mut g = vec![ZERO; lay.grid_len()];
        for mode in 0..nm {
            g[lay.mode_grid(mode)] = self.coeffs[mode];
        }
        lay.fft_nd(&mut g, true);
        g
    }

    /// Largest `|c_{−k} − conj(c_k)|`.
    pub fn reality_defect(&self) -> f64 {
        let lay = &self.layout;
        let nm = lay.n_modes();
        let mut d: f64 = 0.0;
        for p in 0..lay.n_poly() {
            for mode in 0..nm {
                let a = self.coeffs[p * nm + mode];
                let b = self.coeffs[p * nm + lay.neg_mode(mode)];
                d = d.max((a - b.conj()).norm());
            }
        }
        d
    }

    /// Projects onto conjugate-symmetric coefficients.
    pub fn realify(&mut self) {
        let lay = self.layout.clone();
        let nm = lay.n_modes();
        for p in 0..lay.n_poly() {
            for mode in 0..nm {
                let nmode = lay.neg_mode(mode);
                if nmode < mode {
                    continue;
                }
                let a = self.coeffs[p * nm + mode];
                let b = self.coeffs[p * nm + nmode];
                let avg = (a + b.conj()) * 0.5;
                self.coeffs[p * nm + mode] = avg;
                self.coeffs[p * nm + nmode] = avg.conj();
            }
        }
        self.real = true;
    }

    /// True when no action or parameter dependence is present.
    pub fn is_angle_only(&self) -> bool {
        (1..self.layout.n_poly()).all(|p| self.poly_is_zero(p))
    }

    /// Keeps slots with action degree in `range`.
    pub fn action_degrees(&self, lo: u32, hi: u32) -> FTSeries {
        let lay = self.layout.clone();
        let nm = lay.n_modes();
        let mut r = self.clone();
        for p in 0..lay.n_poly() {
            let (d, _) = lay.poly_degree(p);
            if d < lo || d > hi {
                r.coeffs[p * nm..(p + 1) * nm].iter_mut().for_each(|c| *c = ZERO);
            }
        }
        r
    }

    /// Copies every representable coefficient into another layout (same `n`).
    pub fn to_layout(&self, target: &Arc<Layout>) -> Result<FTSeries> {
        let lay = &self.layout;
        if target.n() != lay.n() {
            return Err(Error::Domain("layout dimension mismatch".into()));
        }
        let mut r = FTSeries::zero(target.clone());
        r.widths = self.widths;
        r.real = self.real;
        let nm = lay.n_modes();
        let zw = vec![0u32; target.n_w()];
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let (a, b) = lay.split_poly(p);
            let m = lay.action_monomial(a);
            let w = lay.param_monomial(b);
            let w = if w.len() == target.n_w() {
                w.to_vec()
            } else if w.iter().all(|&e| e == 0) {
                zw.clone()
            } else {
                continue;
            };
            for mode in 0..nm {
                let c = self.coeffs[p * nm + mode];
                if c != ZERO {
                    let _ = r.add(lay.mode(mode), m, &w, c);
                }
            }
        }
        Ok(r)
    }

    /// `f(θ, ρI, w)`.
    pub fn scale_actions(&self, rho: f64) -> FTSeries {
        let lay = self.layout.clone();
        self.map_coeffs(|_, p| Complex64::new(pow_u(rho, lay.poly_degree(p).0), 0.0))
    }

    /// `f(θ, p + I, w)` re-expanded in `I` (exact up to the degree truncation, which
    /// it preserves).
    pub fn shift_actions(&self, shift: &[f64]) -> Result<FTSeries> {
        let lay = self.layout.clone();
        if shift.len() != lay.n() {
            return Err(Error::Domain("action shift dimension mismatch".into()));
        }
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(lay.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let (a, b) = lay.split_poly(p);
            let m = lay.action_monomial(a).to_vec();
            for g in sub_indices(&m) {
                let mut fac = 1.0;
                for j in 0..m.len() {
                    fac *= binom(m[j], g[j]) * pow_u(shift[j], m[j] - g[j]);
                }
                if fac == 0.0 {
                    continue;
                }
                let q = lay.poly(lay.action_index(&g).expect("sub-monomial"), b);
                for mode in 0..nm {
                    r.coeffs[q * nm + mode] += self.coeffs[p * nm + mode] * fac;
                }
            }
        }
        Ok(r)
    }

    /// For a series without parameters, returns `K(θ, I, w) = f(θ, p + w + I)` in a
    /// layout with `n_w = n` and parameter degree `d_w` (terms of higher parameter
    /// degree are dropped).
    pub fn embed_param_shift(&self, shift: &[f64], d_w: usize) -> Result<FTSeries> {
        let lay = &self.layout;
        if lay.n_w() != 0 || shift.len() != lay.n() {
            return Err(Error::Domain("parameter embedding needs a parameter-free series and a matching shift".into()));
        }
        let target = lay.reshaped(lay.n(), lay.d_i(), d_w)?;
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(target.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let m = lay.action_monomial(p).to_vec();
            // J^m = Π_j Σ m_j!/(β!γ!(m_j−β−γ)!) p^{m_j−β−γ} w^β I^γ
            for g in sub_indices(&m) {
                let rest: Vec<u32> = m.iter().zip(&g).map(|(x, y)| x - y).collect();
                for bta in sub_indices(&rest) {
                    let Some(wb) = target.param_index(&bta) else { continue };
                    let mut fac = 1.0;
                    for j in 0..m.len() {
                        fac *= binom(m[j], g[j]) * binom(rest[j], bta[j]) * pow_u(shift[j], rest[j] - bta[j]);
                    }
                    if fac == 0.0 {
                        continue;
                    }
                    let q = target.poly(target.action_index(&g).expect("sub-monomial"), wb);
                    for mode in 0..nm {
                        r.coeffs[q * nm + mode] += self.coeffs[p * nm + mode] * fac;
                    }
                }
            }
        }
        Ok(r)
    }

    /// `K(θ, I, w0 + w)` re-expanded in `w` (truncated at the parameter degree).
    pub fn shift_param(&self, w0: &[f64]) -> Result<FTSeries> {
        let lay = self.layout.clone();
        if w0.len() != lay.n_w() {
            return Err(Error::Domain("parameter shift dimension mismatch".into()));
        }
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(lay.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let (a, b) = lay.split_poly(p);
            let bm = lay.param_monomial(b).to_vec();
            for g in sub_indices(&bm) {
                let mut fac = 1.0;
                for j in 0..bm.len() {
                    fac *= binom(bm[j], g[j]) * pow_u(w0[j], bm[j] - g[j]);
                }
                if fac == 0.0 {
                    continue;
                }
                let q = lay.poly(a, lay.param_index(&g).expect("sub-monomial"));
                for mode in 0..nm {
                    r.coeffs[q * nm + mode] += self.coeffs[p * nm + mode] * fac;
                }
            }
        }
        Ok(r)
    }

    /// Evaluates the parameter jet at `w0`, giving a parameter-free series.
    pub fn eval_param(&self, w0: &[f64]) -> Result<FTSeries> {
        let lay = &self.layout;
        if w0.len() != lay.n_w() {
            return Err(Error::Domain("parameter dimension mismatch".into()));
        }
        let target = lay.reshaped(0, lay.d_i(), 0)?;
        let nm = lay.n_modes();
        let mut r = FTSeries::zero(target.clone());
        r.widths = self.widths;
        r.real = self.real;
        for p in 0..lay.n_poly() {
            if self.poly_is_zero(p) {
                continue;
            }
            let (a, b) = lay.split_poly(p);
            let fac: f64 = w0.iter().zip(lay.param_monomial(b)).map(|(x, &e)| pow_u(*x, e)).product();
            for mode in 0..nm {
                r.coeffs[a * nm + mode] += self.coeffs[p * nm + mode] * fac;
            }
        }
        Ok(r)
    }

    /// Zero-mode coefficient of the action monomial `m` as a polynomial in the
    /// parameter: pairs `(parameter monomial, real coefficient)`.
    pub fn zero_mode_param_poly(&self, m: &[u32]) -> Vec<(Vec<u32>, f64)> {
        let lay = &self.layout;
        let Some(a) = lay.action_index(m) else { return Vec::new() };
        let z = lay.zero_mode();
        (0..lay.n_wm())
            .map(|b| (lay.param_monomial(b).to_vec(), self.coeffs[lay.poly(a, b) * lay.n_modes() + z].re))
            .collect()
    }
}
