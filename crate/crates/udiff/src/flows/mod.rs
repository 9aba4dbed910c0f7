//! Time-one maps of Hamiltonian generators: exact angle-only shears, affine-in-action
//! flows `(θ + E, I + F·I + G)`, Lie series, and compositions of such maps.

mod integrate;
mod pendulum;

pub use integrate::{integrate, integrate_fixed, FnHamiltonian, Hamiltonian, IntegratorKind, SeriesHamiltonian, Trajectory};
pub use pendulum::{lambda_probe, pendulum_periodic_point, vartheta, LambdaProbe, PendulumOrbit};

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{AngleBundle, BracketWith, FTSeries, Layout};

/// Exact time-`t` map of an angle-only Hamiltonian `u(θ)`: `(θ, I) ↦ (θ, I − t∇u(θ))`.
#[derive(Debug, Clone)]
pub struct AngleFlow {
    grad: Vec<FTSeries>,
    t: f64,
}

/// Builds the exact shear generated by `u`; rejects generators that depend on the actions.
pub fn angle_flow(u: &FTSeries, t: f64) -> Result<AngleFlow> {
    if !u.is_angle_only() {
        return Err(Error::Parameter("angle_flow needs a generator without action or parameter dependence".into()));
    }
    Ok(AngleFlow { grad: (0..u.layout().n()).map(|j| u.d_theta(j)).collect(), t })
}

impl AngleFlow {
    pub fn apply(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let zero = vec![0.0; action.len()];
        let i = action.iter().zip(&self.grad).map(|(a, g)| a - self.t * g.value(theta, &zero)).collect();
        (theta.to_vec(), i)
    }
}

/// Map `(θ, I) ↦ (θ + E(θ), I + F(θ)·I + G(θ))` with angle-only series components.
#[derive(Debug, Clone)]
pub struct AffineTransform {
    pub e: Vec<FTSeries>,
    /// `f[i][j]` multiplies `I_j` in the `i`-th action component.
    pub f: Vec<Vec<FTSeries>>,
    pub g: Vec<FTSeries>,
    /// Frequency counterterm attached by the KAM iteration (parameter shift), if any.
    pub phi: Option<Vec<f64>>,
    pub log: Vec<String>,
}

impl AffineTransform {
    pub fn identity(layout: Arc<Layout>) -> Self {
        let n = layout.n();
        let z = FTSeries::zero(layout);
        AffineTransform { e: vec![z.clone(); n], f: vec![vec![z.clone(); n]; n], g: vec![z; n], phi: None, log: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// Components in the order `E (n), F (n·n, row-major), G (n)`.
    fn bundle(&self) -> AngleBundle {
        let all: Vec<&FTSeries> = self.e.iter().chain(self.f.iter().flatten()).chain(&self.g).collect();
        AngleBundle::new(&all)
    }

    fn parts_with(bundle: &AngleBundle, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let n = theta.len();
        let v = bundle.eval(theta);
        let e = v[..n].to_vec();
        let f = (0..n).map(|i| v[n + i * n..n + (i + 1) * n].to_vec()).collect();
        let g = v[n + n * n..].to_vec();
        (e, f, g)
    }

    fn parts(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        Self::parts_with(&self.bundle(), theta)
    }

    pub fn apply(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (e, f, g) = self.parts(theta);
        let n = theta.len();
        let th = (0..n).map(|i| theta[i] + e[i]).collect();
        let ia = (0..n).map(|i| action[i] + (0..n).map(|j| f[i][j] * action[j]).sum::<f64>() + g[i]).collect();
        (th, ia)
    }

    /// `self ∘ other`, sampled on the collocation grid and re-expanded.
    pub fn compose(&self, other: &AffineTransform) -> Result<AffineTransform> {
        let lay = self.e[0].layout().clone();
        let n = lay.n();
        let pts: Vec<Vec<f64>> = (0..lay.grid_len()).map(|g| lay.grid_point(g)).collect();
        let (bo, bs) = (other.bundle(), self.bundle());
        let inner: Vec<_> = pts.iter().map(|p| Self::parts_with(&bo, p)).collect();
        let shifted: Vec<Vec<f64>> = pts.iter().zip(&inner).map(|(p, (e, _, _))| p.iter().zip(e).map(|(a, b)| a + b).collect()).collect();
        let outer: Vec<_> = shifted.iter().map(|p| Self::parts_with(&bs, p)).collect();
        let sample = |val: &dyn Fn(usize) -> f64| -> FTSeries {
            let vals: Vec<f64> = (0..pts.len()).map(val).collect();
            FTSeries::from_grid_values(lay.clone(), &vals)
        };
        let e = (0..n).map(|i| sample(&|g| inner[g].0[i] + outer[g].0[i])).collect();
        // I'' = (1 + F_a(θ'))((1 + F_b)I + G_b) + G_a
        let f = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        sample(&|g| {
                            let (_, fb, _) = &inner[g];
                            let (_, fa, _) = &outer[g];
                            let mut v = fb[i][j] + fa[i][j];
                            for l in 0..n {
                                v += fa[i][l] * fb[l][j];
                            }
                            v
                        })
                    })
                    .collect()
            })
            .collect();
        let gs = (0..n)
            .map(|i| {
                sample(&|g| {
                    let (_, _, gb) = &inner[g];
                    let (_, fa, ga) = &outer[g];
                    gb[i] + ga[i] + (0..n).map(|l| fa[i][l] * gb[l]).sum::<f64>()
                })
            })
            .collect();
        let mut log = self.log.clone();
        log.extend(other.log.iter().cloned());
        Ok(AffineTransform { e, f, g: gs, phi: None, log })
    }

    /// Largest deviation of the Jacobian from symplecticity, `|JᵀΩJ − Ω|_max`, at the points.
    pub fn symplecticity_defect(&self, points: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let n = self.dim();
        let z = vec![0.0; n];
        let de: Vec<Vec<FTSeries>> = self.e.iter().map(|s| (0..n).map(|j| s.d_theta(j)).collect()).collect();
        let df: Vec<Vec<Vec<FTSeries>>> = self.f.iter().map(|row| row.iter().map(|s| (0..n).map(|j| s.d_theta(j)).collect()).collect()).collect();
        let dg: Vec<Vec<FTSeries>> = self.g.iter().map(|s| (0..n).map(|j| s.d_theta(j)).collect()).collect();
        let mut worst: f64 = 0.0;
        for (th, ia) in points {
            // J = [[A, 0], [C, D]]: A = 1 + ∂E, D = 1 + F, C = ∂(F·I + G)
            let mut a = vec![vec![0.0; n]; n];
            let mut c = vec![vec![0.0; n]; n];
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = f64::from(u8::from(i == j)) + de[i][j].value(th, &z);
                    d[i][j] = f64::from(u8::from(i == j)) + self.f[i][j].value(th, &z);
                    c[i][j] = dg[i][j].value(th, &z) + (0..n).map(|l| df[i][l][j].value(th, &z) * ia[l]).sum::<f64>();
                }
            }
            // symplectic iff AᵀD = 1 and AᵀC symmetric
            for i in 0..n {
                for j in 0..n {
                    let atd: f64 = (0..n).map(|l| a[l][i] * d[l][j]).sum();
                    worst = worst.max((atd - f64::from(u8::from(i == j))).abs());
                    let atc_ij: f64 = (0..n).map(|l| a[l][i] * c[l][j]).sum();
                    let atc_ji: f64 = (0..n).map(|l| a[l][j] * c[l][i]).sum();
                    worst = worst.max((atc_ij - atc_ji).abs());
                }
            }
        }
        worst
    }

    /// Residual of the flow property on sample points: `|(self ∘ other)(x) − target(x)|`.
    pub fn max_deviation(&self, target: &AffineTransform, points: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        points
            .iter()
            .map(|(th, ia)| {
                let (a, b) = self.apply(th, ia);
                let (c, d) = target.apply(th, ia);
                a.iter().zip(&c).chain(b.iter().zip(&d)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Options for Lie series.
#[derive(Debug, Clone, Copy)]
pub struct LieOptions {
    pub max_order: usize,
    /// Stop once a term's largest coefficient is below `tol` times the running sum's.
    pub tol: f64,
}

impl Default for LieOptions {
    fn default() -> Self {
        LieOptions { max_order: 60, tol: 1e-17 }
    }
}

/// `Σ_{k≥0} ad_Y^k H / k!` with `ad_Y H = {H, Y}`: the pullback `H ∘ Φ_Y¹`.
pub fn lie_flow(y: &FTSeries, h: &FTSeries) -> Result<FTSeries> {
    lie_flow_with(y, h, LieOptions::default()).map(|(f, _)| f)
}

/// [`lie_flow`] returning the number of terms used.
pub fn lie_flow_with(y: &FTSeries, h: &FTSeries, opts: LieOptions) -> Result<(FTSeries, usize)> {
    let ad = BracketWith::new(y);
    lie_sum(&ad, h, opts, 0)
}

/// `Σ_{k≥0} ad^k g / (k + shift)!·shift!`-style sums: with `shift = 0` the Lie
/// series, with `shift = 1` the increment `Σ_{k≥0} ad^k g/(k+1)!`.
fn lie_sum(ad: &BracketWith, g: &FTSeries, opts: LieOptions, shift: usize) -> Result<(FTSeries, usize)> {
    let mut fact = (1..=shift).map(|x| x as f64).product::<f64>();
    let mut term = g.scale(1.0 / fact);
    let mut sum = term.clone();
    if g.is_zero() {
        return Ok((sum, 0));
    }
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    for k in 1..=opts.max_order {
        term = ad.apply(&term)?;
        fact = (k + shift) as f64;
        term = term.scale(1.0 / fact);
        let size = term.max_abs();
        sum = sum.add_series(&term)?;
        if size <= opts.tol * sum.max_abs() || size == 0.0 {
            return Ok((sum, k));
        }
        if size > prev {
            rising += 1;
            if rising > 8 {
                return Err(Error::NonConvergence(format!("Lie series terms grow (order {k}, size {size:.3e})")));
            }
        }
        prev = size;
    }
    Err(Error::NonConvergence(format!("Lie series did not reach tolerance in {} terms", opts.max_order)))
}

/// Coordinate functions of a composed symplectic map, held as series:
/// `Z(θ, I) = (θ + E(θ, I), I + P(θ, I))`. Pushing a generator `X` replaces
/// `Z` by `Z ∘ Φ_X¹`, computed entirely by Lie series.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    pub e: Vec<FTSeries>,
    pub p: Vec<FTSeries>,
    pub generators: usize,
}

impl CoordinateMap {
    pub fn identity(layout: Arc<Layout>) -> Self {
        let n = layout.n();
        let z = FTSeries::zero(layout);
        CoordinateMap { e: vec![z.clone(); n], p: vec![z; n], generators: 0 }
    }

    /// `Z ← Z ∘ Φ_X¹`.
    pub fn push(&mut self, x: &FTSeries) -> Result<()> {
        let ad = BracketWith::new(x);
        let opts = LieOptions::default();
        let n = self.e.len();
        for i in 0..n {
            // θ_i∘Φ − θ_i = Σ ad^k(∂_{I_i}X)/(k+1)!
            let inc = lie_sum(&ad, &x.d_action(i), opts, 1)?.0;
            let moved = lie_sum(&ad, &self.e[i], opts, 0)?.0;
            self.e[i] = moved.add_series(&inc)?;
            let inc = lie_sum(&ad, &x.d_theta(i).scale(-1.0), opts, 1)?.0;
            let moved = lie_sum(&ad, &self.p[i], opts, 0)?.0;
            self.p[i] = moved.add_series(&inc)?;
        }
        self.generators += 1;
        Ok(())
    }

    pub fn apply(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let th = theta.iter().zip(&self.e).map(|(t, e)| t + e.value(theta, action)).collect();
        let ia = action.iter().zip(&self.p).map(|(a, p)| a + p.value(theta, action)).collect();
        (th, ia)
    }

    /// Reads off `(E, F, G)`; fails if the map is not affine in the actions.
    pub fn to_affine(&self) -> Result<AffineTransform> {
        let lay = self.e[0].layout().clone();
        let n = lay.n();
        let mut out = AffineTransform::identity(lay.clone());
        for i in 0..n {
            let nonaffine = self.e[i].action_degrees(1, u32::MAX).max_abs() + self.p[i].action_degrees(2, u32::MAX).max_abs();
            if nonaffine > 1e-12 * (1.0 + self.p[i].max_abs()) {
                return Err(Error::Consistency(format!("coordinate map component {i} is not affine in the actions")));
            }
            out.e[i] = self.e[i].action_degrees(0, 0);
            out.g[i] = self.p[i].action_degrees(0, 0);
            for j in 0..n {
                let mut m = vec![0u32; n];
                m[j] = 1;
                let mut s = FTSeries::zero(lay.clone());
                let nm = lay.n_modes();
                let a = lay.action_index(&m).expect("linear monomial");
                let src = &self.p[i].coeffs()[lay.poly(a, 0) * nm..(lay.poly(a, 0) + 1) * nm];
                s.coeffs_mut()[..nm].copy_from_slice(src);
                out.f[i][j] = s;
            }
        }
        out.log.push(format!("{} generators", self.generators));
        Ok(out)
    }
}

/// Time-`t` map of `X(θ, I) = C(θ) + D(θ)·I` by integrating, at each grid point,
/// `θ' = D(θ)`, `F' = −M(1 + F)`, `G' = −∇C − M·G` with `M_ij = ∂_{θ_i}D_j`
/// (Gragg–Bulirsch–Stoer extrapolation to about `1e-14`).
pub fn affine_flow(c: &FTSeries, d: &[FTSeries], t: f64) -> Result<AffineTransform> {
    let lay = c.layout().clone();
    let n = lay.n();
    if d.len() != n || !c.is_angle_only() || d.iter().any(|s| !s.is_angle_only()) {
        return Err(Error::Parameter("affine_flow needs angle-only C and an n-vector of angle-only D".into()));
    }
    let grad_c: Vec<FTSeries> = (0..n).map(|j| c.d_theta(j)).collect();
    let m_ser: Vec<FTSeries> = (0..n).flat_map(|i| d.iter().map(move |dj| dj.d_theta(i))).collect();
    // bundle order: D (n), ∇C (n), M (n·n row-major)
    let refs: Vec<&FTSeries> = d.iter().chain(&grad_c).chain(&m_ser).collect();
    let bundle = AngleBundle::new(&refs);
    // state: θ (n), F (n·n), G (n)
    let rhs = |y: &[f64]| -> Vec<f64> {
        let v = bundle.eval(&y[..n]);
        let (dv, gc, m) = (&v[..n], &v[n..2 * n], &v[2 * n..]);
        let mut out = vec![0.0; n + n * n + n];
        out[..n].copy_from_slice(dv);
        for i in 0..n {
            for j in 0..n {
                let mut acc = -m[i * n + j];
                for l in 0..n {
                    acc -= m[i * n + l] * y[n + l * n + j];
                }
                out[n + i * n + j] = acc;
            }
            let mut acc = -gc[i];
            for l in 0..n {
                acc -= m[i * n + l] * y[n + n * n + l];
            }
            out[n + n * n + i] = acc;
        }
        out
    };
    let mut values = Vec::with_capacity(lay.grid_len());
    for g in 0..lay.grid_len() {
        let p = lay.grid_point(g);
        let mut y0 = vec![0.0; n + n * n + n];
        y0[..n].copy_from_slice(&p);
        let mut y = solve_ode(&rhs, &y0, t, 1e-14)
            .map_err(|_| Error::Numeric(format!("affine flow integration failed to converge at grid point {p:?}")))?;
        for i in 0..n {
            y[i] -= p[i];
        }
        values.push(y);
    }
    let sample = |idx: usize| -> FTSeries {
        let vals: Vec<f64> = values.iter().map(|v| v[idx]).collect();
        FTSeries::from_grid_values(lay.clone(), &vals)
    };
    let e = (0..n).map(sample).collect();
    let f = (0..n).map(|i| (0..n).map(|j| sample(n + i * n + j)).collect()).collect();
    let gs = (0..n).map(|i| sample(n + n * n + i)).collect();
    Ok(AffineTransform { e, f, g: gs, phi: None, log: vec![format!("affine flow t = {t}")] })
}

/// One Gragg–Bulirsch–Stoer macro step; `None` if the extrapolation table does not settle.
fn gbs_step(rhs: &dyn Fn(&[f64]) -> Vec<f64>, y: &[f64], big_h: f64, tol: f64) -> Option<Vec<f64>> {
    const SEQ: [usize; 9] = [2, 4, 6, 8, 10, 12, 14, 16, 18];
    let f0 = rhs(y);
    let mut table: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, &ns) in SEQ.iter().enumerate() {
        let h = big_h / ns as f64;
        let mut z0 = y.to_vec();
        let mut z1: Vec<f64> = y.iter().zip(&f0).map(|(a, b)| a + h * b).collect();
        for _ in 1..ns {
            let fz = rhs(&z1);
            let z2: Vec<f64> = z0.iter().zip(&fz).map(|(a, b)| a + 2.0 * h * b).collect();
            z0 = z1;
            z1 = z2;
        }
        let fz = rhs(&z1);
        let base: Vec<f64> = (0..y.len()).map(|k| 0.5 * (z1[k] + z0[k] + h * fz[k])).collect();
        let mut row = vec![base];
        for j in 1..=i {
            let ratio = (ns as f64 / SEQ[i - j] as f64).powi(2) - 1.0;
            let prev = &table[i - 1][j - 1];
            let cur = &row[j - 1];
            row.push(cur.iter().zip(prev).map(|(a, b)| a + (a - b) / ratio).collect());
        }
        if i >= 2 {
            let err = row[i].iter().zip(&row[i - 1]).map(|(a, b)| (a - b).abs() / (1.0 + a.abs())).fold(0.0, f64::max);
            if err <= tol {
                return row.pop();
            }
        }
        table.push(row);
    }
    None
}

/// Integrates `y' = rhs(y)` over `[0, t]`, doubling the number of macro steps until every one converges.
fn solve_ode(rhs: &dyn Fn(&[f64]) -> Vec<f64>, y0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    let mut macros = 1usize;
    'outer: while macros <= 1 << 12 {
        let h = t / macros as f64;
        let mut y = y0.to_vec();
        for _ in 0..macros {
            match gbs_step(rhs, &y, h, tol) {
                Some(next) => y = next,
                None => {
                    macros *= 2;
                    continue 'outer;
                }
            }
        }
        return Ok(y);
    }
    Err(Error::Numeric("extrapolation integrator did not converge".into()))
}

/// Splits an affine generator `X = C + D·I` into `C` and the vector `D`.
pub fn split_affine(x: &FTSeries) -> Result<(FTSeries, Vec<FTSeries>)> {
    let lay = x.layout().clone();
    let n = lay.n();
    if lay.n_w() != 0 || x.action_degrees(2, u32::MAX).max_abs() > 0.0 {
        return Err(Error::Parameter("generator is not affine in the actions".into()));
    }
    let nm = lay.n_modes();
    let c = x.action_degrees(0, 0);
    let d = (0..n)
        .map(|j| {
            let mut m = vec![0u32; n];
            m[j] = 1;
            let a = lay.action_index(&m).expect("linear monomial");
            let mut s = FTSeries::zero(lay.clone());
            let src: Vec<Complex64> = x.coeffs()[a * nm..(a + 1) * nm].to_vec();
            s.coeffs_mut()[..nm].copy_from_slice(&src);
            s
        })
        .collect();
    Ok((c, d))
}
