//! Fixed-step symplectic integrators with a step chosen by step doubling:
//! a fourth-order Yoshida composition of either leapfrog (mechanical
//! Hamiltonians `½|I|² + V(θ)`) or the implicit midpoint rule (general case).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{AngleBundle, FTSeries};

/// A Hamiltonian that can be evaluated and differentiated pointwise.
pub trait Hamiltonian {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64], action: &[f64]) -> f64;
    /// `(∂_θH, ∂_IH)`.
    fn gradient(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// `∇V(θ)` when `H = ½|I|² + V(θ)`.
    fn potential_gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// A series viewed as a Hamiltonian (parameter-free layouts).
pub struct SeriesHamiltonian {
    h: FTSeries,
    potential_grad: Option<AngleBundle>,
}

impl SeriesHamiltonian {
    /// Detects the mechanical form `½|I|² + V(θ)` so the splitting scheme can be used.
    pub fn new(h: FTSeries) -> Self {
        let n = h.layout().n();
        let mut kinetic = FTSeries::zero(h.layout().clone());
        let mut ok = h.layout().d_i() >= 2;
        if ok {
            for j in 0..n {
                let mut m = vec![0u32; n];
                m[j] = 2;
                ok &= kinetic.add(&vec![0; n], &m, &[], num_complex::Complex64::new(0.5, 0.0)).is_ok();
            }
        }
        let potential_grad = if ok {
            let v = h.sub_series(&kinetic).ok().filter(|v| v.is_angle_only());
            v.map(|v| {
                let grads: Vec<FTSeries> = (0..n).map(|j| v.d_theta(j)).collect();
                AngleBundle::new(&grads.iter().collect::<Vec<_>>())
            })
        } else {
            None
        };
        SeriesHamiltonian { h, potential_grad }
    }

    pub fn series(&self) -> &FTSeries {
        &self.h
    }

    pub fn is_mechanical(&self) -> bool {
        self.potential_grad.is_some()
    }
}

impl Hamiltonian for SeriesHamiltonian {
    fn dim(&self) -> usize {
        self.h.layout().n()
    }
    fn value(&self, theta: &[f64], action: &[f64]) -> f64 {
        self.h.value(theta, action)
    }
    fn gradient(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (_, gt, ga) = self.h.value_grad(theta, action);
        (gt, ga)
    }
    fn potential_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.potential_grad.as_ref().map(|g| g.eval(theta))
    }
}

type ValueFn = Box<dyn Fn(&[f64], &[f64]) -> f64>;
type GradFn = Box<dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>)>;
type PotFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// Closure-backed Hamiltonian.
pub struct FnHamiltonian {
    pub n: usize,
    value: ValueFn,
    grad: GradFn,
    potential: Option<PotFn>,
}

impl FnHamiltonian {
    pub fn new(n: usize, value: impl Fn(&[f64], &[f64]) -> f64 + 'static, grad: impl Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + 'static) -> Self {
        FnHamiltonian { n, value: Box::new(value), grad: Box::new(grad), potential: None }
    }

    /// `½|I|² + V(θ)` from `V` and `∇V`.
    pub fn mechanical(n: usize, v: impl Fn(&[f64]) -> f64 + 'static, dv: impl Fn(&[f64]) -> Vec<f64> + Clone + 'static) -> Self {
        let dv2 = dv.clone();
        FnHamiltonian {
            n,
            value: Box::new(move |t, i| 0.5 * i.iter().map(|x| x * x).sum::<f64>() + v(t)),
            grad: Box::new(move |t, i| (dv(t), i.to_vec())),
            potential: Some(Box::new(dv2)),
        }
    }
}

impl Hamiltonian for FnHamiltonian {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, theta: &[f64], action: &[f64]) -> f64 {
        (self.value)(theta, action)
    }
    fn gradient(&self, theta: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.grad)(theta, action)
    }
    fn potential_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.potential.as_ref().map(|p| p(theta))
    }
}

/// Scheme selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntegratorKind {
    /// Splitting when the Hamiltonian is mechanical, implicit midpoint otherwise.
    Auto,
    Splitting,
    ImplicitMidpoint,
}

/// Sampled solution with integrator statistics.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub steps: usize,
    pub step_size: f64,
    pub tol: f64,
    pub kind: IntegratorKind,
}

impl Trajectory {
    /// `max_t |H(t) − H(0)|`.
    pub fn energy_error(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    pub fn last(&self) -> (&[f64], &[f64]) {
        (self.thetas.last().unwrap(), self.actions.last().unwrap())
    }
}

const Y1: f64 = 1.351_207_191_959_657_6; // 1/(2 − 2^{1/3})
const Y0: f64 = -1.702_414_383_919_315_3; // −2^{1/3}/(2 − 2^{1/3})

fn leapfrog(h: &dyn Hamiltonian, th: &mut [f64], ia: &mut [f64], dt: f64) {
    let g = h.potential_gradient(th).expect("mechanical Hamiltonian");
    for (i, gv) in ia.iter_mut().zip(&g) {
        *i -= 0.5 * dt * gv;
    }
    for (t, i) in th.iter_mut().zip(ia.iter()) {
        *t += dt * i;
    }
    let g = h.potential_gradient(th).expect("mechanical Hamiltonian");
    for (i, gv) in ia.iter_mut().zip(&g) {
        *i -= 0.5 * dt * gv;
    }
}

fn midpoint(h: &dyn Hamiltonian, th: &mut [f64], ia: &mut [f64], dt: f64) -> Result<()> {
    let n = th.len();
    let (t0, i0) = (th.to_vec(), ia.to_vec());
    let (gt, gi) = h.gradient(&t0, &i0);
    let mut t1: Vec<f64> = (0..n).map(|j| t0[j] + dt * gi[j]).collect();
    let mut i1: Vec<f64> = (0..n).map(|j| i0[j] - dt * gt[j]).collect();
    for _ in 0..200 {
        let tm: Vec<f64> = (0..n).map(|j| 0.5 * (t0[j] + t1[j])).collect();
        let im: Vec<f64> = (0..n).map(|j| 0.5 * (i0[j] + i1[j])).collect();
        let (gt, gi) = h.gradient(&tm, &im);
        let nt: Vec<f64> = (0..n).map(|j| t0[j] + dt * gi[j]).collect();
        let ni: Vec<f64> = (0..n).map(|j| i0[j] - dt * gt[j]).collect();
        let change = nt.iter().zip(&t1).chain(ni.iter().zip(&i1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + nt.iter().chain(&ni).map(|x| x.abs()).fold(0.0, f64::max);
        t1 = nt;
        i1 = ni;
        if change <= 4.0 * f64::EPSILON * scale {
            th.copy_from_slice(&t1);
            ia.copy_from_slice(&i1);
            return Ok(());
        }
    }
    Err(Error::Numeric(format!("implicit midpoint iteration stalled at step size {dt:e}")))
}

fn step(h: &dyn Hamiltonian, kind: IntegratorKind, th: &mut [f64], ia: &mut [f64], dt: f64) -> Result<()> {
    for w in [Y1, Y0, Y1] {
        match kind {
            IntegratorKind::Splitting => leapfrog(h, th, ia, w * dt),
            _ => midpoint(h, th, ia, w * dt)?,
        }
    }
    Ok(())
}

fn resolve_kind(h: &dyn Hamiltonian, theta0: &[f64], kind: IntegratorKind) -> Result<IntegratorKind> {
    Ok(match kind {
        IntegratorKind::Auto if h.potential_gradient(theta0).is_some() => IntegratorKind::Splitting,
        IntegratorKind::Auto => IntegratorKind::ImplicitMidpoint,
        IntegratorKind::Splitting if h.potential_gradient(theta0).is_none() => {
            return Err(Error::Parameter("splitting needs a mechanical Hamiltonian".into()))
        }
        k => k,
    })
}

/// Step budget of [`integrate`].
const MAX_STEPS: f64 = 1e8;

fn max_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    let pairs = a.thetas.iter().zip(&b.thetas).chain(a.actions.iter().zip(&b.actions));
    pairs.flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// Integrates from `(θ₀, I₀)` to `t_end`, recording `samples + 1` evenly spaced
/// states. The fixed step is halved until runs with `dt` and `dt/2` agree to
/// `tol` at every sample (a global, not merely local, error estimate); the
/// finer run is returned.
pub fn integrate(
    h: &dyn Hamiltonian,
    theta0: &[f64],
    action0: &[f64],
    t_end: f64,
    tol: f64,
    samples: usize,
    kind: IntegratorKind,
) -> Result<Trajectory> {
    if theta0.len() != h.dim() || action0.len() != h.dim() {
        return Err(Error::Parameter("initial state dimension mismatch".into()));
    }
    if !(t_end >= 0.0) || !(tol > 0.0) {
        return Err(Error::Parameter("t_end must be ≥ 0 and tol > 0".into()));
    }
    let kind = resolve_kind(h, theta0, kind)?;
    // local test at the initial point gives the starting step
    let mut dt = (t_end.max(1e-300)).min(0.1);
    loop {
        let (mut ta, mut ia) = (theta0.to_vec(), action0.to_vec());
        step(h, kind, &mut ta, &mut ia, dt)?;
        let (mut tb, mut ib) = (theta0.to_vec(), action0.to_vec());
        step(h, kind, &mut tb, &mut ib, dt / 2.0)?;
        step(h, kind, &mut tb, &mut ib, dt / 2.0)?;
        let err = ta.iter().zip(&tb).chain(ia.iter().zip(&ib)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err <= tol {
            break;
        }
        dt /= 2.0;
        if dt < 1e-12 * t_end.max(1.0) {
            return Err(Error::Numeric(format!("step size underflow ({dt:e}): stiff or singular Hamiltonian")));
        }
    }
    let mut coarse = integrate_fixed(h, theta0, action0, t_end, dt, samples, kind)?;
    let mut prev_diff = f64::INFINITY;
    loop {
        dt /= 2.0;
        if t_end / dt > MAX_STEPS {
            return Err(Error::Budget(format!("more than {MAX_STEPS:e} steps needed to meet tol {tol:e}")));
        }
        let fine = integrate_fixed(h, theta0, action0, t_end, dt, samples, kind)?;
        let diff = max_diff(&coarse, &fine);
        if diff <= tol {
            let mut fine = fine;
            fine.tol = tol;
            return Ok(fine);
        }
        // a fourth-order scheme should gain a factor 16; a factor below 2 means rounding dominates
        if diff > 0.5 * prev_diff {
            return Err(Error::NonConvergence(format!("step refinement stalled at difference {diff:.3e} above tol {tol:e} (rounding floor)")));
        }
        prev_diff = diff;
        coarse = fine;
    }
}

/// Fixed-step run with about `t_end/dt` steps (rounded up to a multiple of `samples`).
pub fn integrate_fixed(
    h: &dyn Hamiltonian,
    theta0: &[f64],
    action0: &[f64],
    t_end: f64,
    dt: f64,
    samples: usize,
    kind: IntegratorKind,
) -> Result<Trajectory> {
    let kind = resolve_kind(h, theta0, kind)?;
    let samples = samples.max(1);
    let per = if t_end == 0.0 { 0 } else { (t_end / dt / samples as f64).ceil() as usize };
    let n_steps = per * samples;
    let dt = if n_steps == 0 { 0.0 } else { t_end / n_steps as f64 };
    let mut traj = Trajectory {
        times: vec![0.0],
        thetas: vec![theta0.to_vec()],
        actions: vec![action0.to_vec()],
        energy: vec![h.value(theta0, action0)],
        steps: n_steps,
        step_size: dt,
        tol: f64::NAN,
        kind,
    };
    let (mut th, mut ia) = (theta0.to_vec(), action0.to_vec());
    for s in 1..=n_steps {
        step(h, kind, &mut th, &mut ia, dt)?;
        if s % per == 0 {
            traj.times.push(s as f64 * dt);
            traj.thetas.push(th.clone());
            traj.actions.push(ia.clone());
            traj.energy.push(h.value(&th, &ia));
        }
    }
    Ok(traj)
}
