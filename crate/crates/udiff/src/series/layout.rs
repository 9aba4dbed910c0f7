//! Index bookkeeping shared by every series of a given shape: monomial tables,
//! Fourier mode ordering, collocation grid and FFT plans.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Shape of a truncated Fourier–Taylor series.
///
/// Coefficients are stored densely: polynomial index `p = a·n_wm + b` (action
/// monomial `a`, parameter monomial `b`) times the mode count, plus the mode index
/// `Σ (k_j + K)(2K+1)^j`.
pub struct Layout {
    n: usize,
    n_w: usize,
    kmax: usize,
    d_i: usize,
    d_w: usize,
    side: usize,
    n_modes: usize,
    mode_k: Vec<Vec<i64>>,
    mode_grid: Vec<usize>,
    i_monos: Vec<Vec<u32>>,
    w_monos: Vec<Vec<u32>>,
    i_index: HashMap<Vec<u32>, usize>,
    w_index: HashMap<Vec<u32>, usize>,
    i_deriv: Vec<Vec<Option<(usize, f64)>>>,
    w_deriv: Vec<Vec<Option<(usize, f64)>>>,
    pairs: Vec<Vec<(usize, usize)>>,
    grid_n: usize,
    grid_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Layout")
            .field("n", &self.n)
            .field("n_w", &self.n_w)
            .field("kmax", &self.kmax)
            .field("d_i", &self.d_i)
            .field("d_w", &self.d_w)
            .field("grid_n", &self.grid_n)
            .finish()
    }
}

/// All multi-indices of length `n` with total degree `≤ d`, graded then lexicographic.
pub fn monomials(n: usize, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=d as u32 {
        let mut cur = vec![0u32; n];
        fill(&mut out, &mut cur, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill(out, cur, pos + 1, left - v);
    }
    cur[pos] = 0;
}

fn deriv_table(monos: &[Vec<u32>], index: &HashMap<Vec<u32>, usize>, n: usize) -> Vec<Vec<Option<(usize, f64)>>> {
    monos
        .iter()
        .map(|m| {
            (0..n)
                .map(|j| {
                    if m[j] == 0 {
                        None
                    } else {
                        let mut d = m.clone();
                        d[j] -= 1;
                        Some((index[&d], m[j] as f64))
                    }
                })
                .collect()
        })
        .collect()
}

impl Layout {
    /// Builds a layout with `n` angles/actions, `n_w` parameters, Fourier cutoff
    /// `|k|_∞ ≤ kmax`, action degree `≤ d_i` and parameter degree `≤ d_w`.
    ///
    /// The collocation grid has `N = next_pow2(3K+1)` points per axis, which makes a
    /// single product of two truncated series alias-free on the retained modes.
    pub fn new(n: usize, n_w: usize, kmax: usize, d_i: usize, d_w: usize) -> Result<Arc<Layout>> {
        if n == 0 || n > 4 {
            return Err(Error::Parameter(format!("series dimension n = {n} must be in 1..=4")));
        }
        let side = 2 * kmax + 1;
        let n_modes = side.pow(n as u32);
        let grid_n = (3 * kmax + 1).next_power_of_two().max(4);
        let grid_len = grid_n.pow(n as u32);
        if grid_len > 1 << 22 {
            return Err(Error::Parameter(format!("collocation grid {grid_n}^{n} too large")));
        }
        let mut mode_k = Vec::with_capacity(n_modes);
        let mut mode_grid = Vec::with_capacity(n_modes);
        for idx in 0..n_modes {
            let mut r = idx;
            let mut k = vec![0i64; n];
            let mut g = 0usize;
            let mut stride = 1usize;
            for kj in k.iter_mut() {
                *kj = (r % side) as i64 - kmax as i64;
                r /= side;
                g += (kj.rem_euclid(grid_n as i64) as usize) * stride;
                stride *= grid_n;
            }
            mode_k.push(k);
            mode_grid.push(g);
        }
        let i_monos = monomials(n, d_i);
        let w_monos = monomials(n_w, d_w);
        let i_index: HashMap<_, _> = i_monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let w_index: HashMap<_, _> = w_monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let i_deriv = deriv_table(&i_monos, &i_index, n);
        let w_deriv = deriv_table(&w_monos, &w_index, n_w);
        let n_wm = w_monos.len();
        let n_poly = i_monos.len() * n_wm;
        let mut pairs = vec![Vec::new(); n_poly];
        for (ia, ma) in i_monos.iter().enumerate() {
            for (ib, mb) in i_monos.iter().enumerate() {
                let sum: Vec<u32> = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                let Some(&ic) = i_index.get(&sum) else { continue };
                for (wa, va) in w_monos.iter().enumerate() {
                    for (wb, vb) in w_monos.iter().enumerate() {
                        let wsum: Vec<u32> = va.iter().zip(vb).map(|(x, y)| x + y).collect();
                        let Some(&wc) = w_index.get(&wsum) else { continue };
                        pairs[ic * n_wm + wc].push((ia * n_wm + wa, ib * n_wm + wb));
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid_n);
        let inv = planner.plan_fft_inverse(grid_n);
        Ok(Arc::new(Layout {
            n,
            n_w,
            kmax,
            d_i,
            d_w,
            side,
            n_modes,
            mode_k,
            mode_grid,
            i_monos,
            w_monos,
            i_index,
            w_index,
            i_deriv,
            w_deriv,
            pairs,
            grid_n,
            grid_len,
            fwd,
            inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn n_w(&self) -> usize {
        self.n_w
    }
    pub fn kmax(&self) -> usize {
        self.kmax
    }
    pub fn d_i(&self) -> usize {
        self.d_i
    }
    pub fn d_w(&self) -> usize {
        self.d_w
    }
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    pub fn n_poly(&self) -> usize {
        self.i_monos.len() * self.w_monos.len()
    }
    pub fn n_wm(&self) -> usize {
        self.w_monos.len()
    }
    pub fn len(&self) -> usize {
        self.n_poly() * self.n_modes
    }
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }
    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    /// Fourier vector of mode index `idx`.
    pub fn mode(&self, idx: usize) -> &[i64] {
        &self.mode_k[idx]
    }

    /// Mode index of `k`, or `None` beyond the cutoff.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.n {
            return None;
        }
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &kj in k {
            if kj.unsigned_abs() as usize > self.kmax {
                return None;
            }
            idx += (kj + self.kmax as i64) as usize * stride;
            stride *= self.side;
        }
        Some(idx)
    }

    /// Index of the mode `−k` given the index of `k`.
    pub fn neg_mode(&self, idx: usize) -> usize {
        self.n_modes - 1 - idx
    }

    pub fn zero_mode(&self) -> usize {
        (self.n_modes - 1) / 2
    }

    pub fn action_monomial(&self, a: usize) -> &[u32] {
        &self.i_monos[a]
    }
    pub fn param_monomial(&self, b: usize) -> &[u32] {
        &self.w_monos[b]
    }
    pub fn action_index(&self, m: &[u32]) -> Option<usize> {
        self.i_index.get(m).copied()
    }
    pub fn param_index(&self, m: &[u32]) -> Option<usize> {
        self.w_index.get(m).copied()
    }
    pub fn n_action_monos(&self) -> usize {
        self.i_monos.len()
    }

    /// Splits a polynomial index into (action monomial, parameter monomial).
    pub fn split_poly(&self, p: usize) -> (usize, usize) {
        (p / self.w_monos.len(), p % self.w_monos.len())
    }

    pub fn poly(&self, a: usize, b: usize) -> usize {
        a * self.w_monos.len() + b
    }

    /// Total degree `|m| + |w|` of polynomial `p`.
    pub fn poly_degree(&self, p: usize) -> (u32, u32) {
        let (a, b) = self.split_poly(p);
        (self.i_monos[a].iter().sum(), self.w_monos[b].iter().sum())
    }

    /// `∂/∂I_j` of action monomial `a`: target monomial and factor.
    pub fn action_deriv(&self, a: usize, j: usize) -> Option<(usize, f64)> {
        self.i_deriv[a][j]
    }
    pub fn param_deriv(&self, b: usize, j: usize) -> Option<(usize, f64)> {
        self.w_deriv[b][j]
    }

    /// Pairs of polynomial indices whose product lands on `p`.
    pub fn product_pairs(&self, p: usize) -> &[(usize, usize)] {
        &self.pairs[p]
    }

    /// Same shape (and hence interchangeable coefficient vectors).
    pub fn same_shape(&self, other: &Layout) -> bool {
        self.n == other.n && self.n_w == other.n_w && self.kmax == other.kmax && self.d_i == other.d_i && self.d_w == other.d_w
    }

    /// Grid position of mode `idx` in the FFT array.
    pub(crate) fn mode_grid(&self, idx: usize) -> usize {
        self.mode_grid[idx]
    }

    /// In-place n-dimensional FFT over the collocation grid (axis 0 contiguous).
    /// `inverse` evaluates `Σ c_k e^{+2πik·x/N}` without normalization.
    pub(crate) fn fft_nd(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.grid_n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        let mut stride = n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for _ in 1..self.n {
            for block in (0..data.len()).step_by(stride * n) {
                for off in 0..stride {
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = data[block + off + j * stride];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    for (j, b) in buf.iter().enumerate() {
                        data[block + off + j * stride] = *b;
                    }
                }
            }
            stride *= n;
        }
    }

    /// Angle coordinates of grid point `g`.
    pub fn grid_point(&self, g: usize) -> Vec<f64> {
        let mut r = g;
        (0..self.n)
            .map(|_| {
                let x = (r % self.grid_n) as f64 / self.grid_n as f64;
                r /= self.grid_n;
                x
            })
            .collect()
    }

    /// Layout with the same angles and truncations but a different jet shape.
    pub fn reshaped(&self, n_w: usize, d_i: usize, d_w: usize) -> Result<Arc<Layout>> {
        Layout::new(self.n, n_w, self.kmax, d_i, d_w)
    }
}
