//! Porous-medium solver on the truncated wedge.
//!
//! The transformed system v' - m v^{(m-1)/m} Delta v = g(t, v) with Neumann
//! walls is discretized in cosine modes across the wedge angle and a
//! finite-volume form of x^{-2}((x del_x)^2 + lambda_k) along log-graded
//! radial nodes. The tip carries no boundary row: the first cell closes its
//! inner flux with the bounded-branch relation del_t v = q_k v (exact up to
//! O(x_min^2)), which keeps the implicit step matrix an M-matrix and the
//! constant mode exactly conservative. Coefficient coupling across modes is
//! frozen per step and corrected by a short fixed-point iteration.

use crate::error::{Error, Result};
use serde::Serialize;

/// Forcing recipes: entire functions of v, constant in t.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Forcing {
    None,
    Const { c: f64 },
    /// a v (b - v).
    Logistic { a: f64, b: f64 },
}

impl Forcing {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Const { c } => *c,
            Forcing::Logistic { a, b } => a * v * (b - v),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }
}

/// Truncated solid wedge {x in (0, 1], y in [0, L]} with cosine modes in y
/// and log-graded radial nodes; an artificial Neumann face sits at x = 1.
#[derive(Clone, Debug)]
pub struct WedgeGrid {
    /// Wedge opening L.
    pub length: f64,
    /// Radial nodes x_i = exp(t_i), strictly increasing, x_0 = x_min,
    /// x_last = 1.
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub h: f64,
    /// Number of cosine modes in y.
    pub modes: usize,
    /// Time step.
    pub tau: f64,
    /// Cell masses for the cone measure x dx (n = 1).
    pub masses: Vec<f64>,
}

impl WedgeGrid {
    pub fn new(length: f64, x_min: f64, nodes: usize, modes: usize, tau: f64) -> Result<Self> {
        if length <= 0.0 {
            return Err(Error::Domain("wedge opening must be positive".into()));
        }
        if !(x_min > 0.0 && x_min <= 1e-4) {
            return Err(Error::Domain(format!("x_min must lie in (0, 1e-4], got {x_min}")));
        }
        if nodes < 32 {
            return Err(Error::Domain("need at least 32 radial nodes".into()));
        }
        if modes < 1 {
            return Err(Error::Domain("need at least one cosine mode".into()));
        }
        if tau <= 0.0 {
            return Err(Error::Domain("time step must be positive".into()));
        }
        let t0 = x_min.ln();
        let h = -t0 / (nodes - 1) as f64;
        let t: Vec<f64> = (0..nodes).map(|i| t0 + h * i as f64).collect();
        let x: Vec<f64> = t.iter().map(|&ti| ti.exp()).collect();
        // Cell masses of x dx = e^{2t} dt, integrated exactly per cell.
        let last = nodes - 1;
        let masses = (0..nodes)
            .map(|i| {
                let tl = if i == 0 { t[0] } else { t[i] - 0.5 * h };
                let tr = if i == last { t[last] } else { t[i] + 0.5 * h };
                ((2.0 * tr).exp() - (2.0 * tl).exp()) / 2.0
            })
            .collect();
        Ok(Self { length, x, t, h, modes, tau, masses })
    }

    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    /// lambda_k = -(k pi / L)^2 for the Neumann cosine mode k.
    pub fn mode_eigenvalue(&self, k: usize) -> f64 {
        -(k as f64 * std::f64::consts::PI / self.length).powi(2)
    }

    /// Bounded-branch exponent q_k = k pi / L at the tip.
    pub fn mode_exponent(&self, k: usize) -> f64 {
        k as f64 * std::f64::consts::PI / self.length
    }

    /// y-collocation nodes for pointwise coefficient evaluation (midpoint
    /// rule over [0, L] keeps the cosine transform exact through the mode
    /// cutoff).
    pub fn y_nodes(&self) -> Vec<f64> {
        let m = 2 * self.modes;
        (0..m).map(|j| (j as f64 + 0.5) * self.length / m as f64).collect()
    }
}

/// The evolving field: cosine-mode amplitudes per radial node.
/// `modes[k][i]` is the mode-k amplitude at x_i.
#[derive(Clone, Debug)]
pub struct PMEState {
    pub time: f64,
    pub modes: Vec<Vec<f64>>,
    pub m: f64,
    /// Positivity floor: the run halts if min v drops below alpha / 2.
    pub alpha: f64,
}

impl PMEState {
    /// Builds the state from a pointwise field v(x_i, y_j) by the discrete
    /// cosine transform in y.
    pub fn from_pointwise(grid: &WedgeGrid, values: &[Vec<f64>], m: f64) -> Result<Self> {
        if m <= 0.0 {
            return Err(Error::Domain("the exponent m must be positive".into()));
        }
        let ny = 2 * grid.modes;
        let mut modes = vec![vec![0.0; grid.nodes()]; grid.modes];
        for i in 0..grid.nodes() {
            if values[i].len() != ny {
                return Err(Error::Domain("pointwise field has wrong y-resolution".into()));
            }
            for (k, mode) in modes.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, &v) in values[i].iter().enumerate() {
                    let y = (j as f64 + 0.5) * grid.length / ny as f64;
                    acc += v * (k as f64 * std::f64::consts::PI * y / grid.length).cos();
                }
                mode[i] = acc * if k == 0 { 1.0 / ny as f64 } else { 2.0 / ny as f64 };
            }
        }
        let mut state = Self { time: 0.0, modes, m, alpha: 0.0 };
        let min_v = state.min_pointwise(grid);
        if min_v <= 0.0 {
            return Err(Error::Domain(format!(
                "initial field must be strictly positive; min v_0 = {min_v}"
            )));
        }
        state.alpha = min_v;
        Ok(state)
    }

    /// Constant initial state v = c, built directly in mode space so the
    /// oscillatory modes are exactly zero.
    pub fn constant(grid: &WedgeGrid, c: f64, m: f64) -> Result<Self> {
        if m <= 0.0 {
            return Err(Error::Domain("the exponent m must be positive".into()));
        }
        if c <= 0.0 {
            return Err(Error::Domain("constant state must be strictly positive".into()));
        }
        let mut modes = vec![vec![0.0; grid.nodes()]; grid.modes];
        modes[0] = vec![c; grid.nodes()];
        Ok(Self { time: 0.0, modes, m, alpha: c })
    }

    /// Pointwise values v(x_i, y_j) on the collocation nodes.
    pub fn to_pointwise(&self, grid: &WedgeGrid) -> Vec<Vec<f64>> {
        let ys = grid.y_nodes();
        (0..grid.nodes())
            .map(|i| {
                ys.iter()
                    .map(|&y| {
                        self.modes
                            .iter()
                            .enumerate()
                            .map(|(k, mode)| {
                                mode[i]
                                    * (k as f64 * std::f64::consts::PI * y / grid.length).cos()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn min_pointwise(&self, grid: &WedgeGrid) -> f64 {
        self.to_pointwise(grid)
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Discrete integral of v over the wedge with the cone measure x dx dy;
    /// only the constant mode contributes.
    pub fn mass(&self, grid: &WedgeGrid) -> f64 {
        grid.length
            * self.modes[0]
                .iter()
                .zip(&grid.masses)
                .map(|(v, m)| v * m)
                .sum::<f64>()
    }

    /// Mode-k amplitude profile over x.
    pub fn amplitude(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }
}

/// Applies the mode-k radial operator x^{-2}((x del_x)^2 + lambda_k) in its
/// finite-volume form: flux differences against cell masses, tip flux closed
/// by the bounded branch, zero flux at x = 1.
fn laplacian_mode_apply(grid: &WedgeGrid, k: usize, v: &[f64]) -> Vec<f64> {
    let nn = grid.nodes();
    let h = grid.h;
    let lam = grid.mode_eigenvalue(k);
    let qk = grid.mode_exponent(k);
    let mut out = vec![0.0; nn];
    for i in 0..nn {
        let flux_right = if i == nn - 1 { 0.0 } else { (v[i + 1] - v[i]) / h };
        let flux_left = if i == 0 { qk * v[0] } else { (v[i] - v[i - 1]) / h };
        // The lambda_k mass term shares the x^{-2} weight: integrate
        // lambda_k v over the cell in the dt metric.
        let cell_dt = match i {
            0 => 0.5 * h,
            _ if i == nn - 1 => 0.5 * h,
            _ => h,
        };
        out[i] = ((flux_right - flux_left) + lam * v[i] * cell_dt) / grid.masses[i];
    }
    out
}

/// Applies the full discrete Laplacian to a state, mode by mode.
pub fn laplacian_apply(grid: &WedgeGrid, state: &PMEState) -> Vec<Vec<f64>> {
    state
        .modes
        .iter()
        .enumerate()
        .map(|(k, v)| laplacian_mode_apply(grid, k, v))
        .collect()
}

/// Assembles and solves (I - tau c(x) Delta_k) u = rhs for one mode with a
/// radial coefficient profile c(x) >= 0. Tridiagonal by construction.
fn implicit_mode_solve(
    grid: &WedgeGrid,
    k: usize,
    coeff: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let nn = grid.nodes();
    let h = grid.h;
    let lam = grid.mode_eigenvalue(k);
    let qk = grid.mode_exponent(k);
    let tau = grid.tau;
    // Rows scaled by cell mass: m_i u_i - tau c_i [flux_r - flux_l + lam u_i dt_i]
    // = m_i r_i.
    let mut sub = vec![0.0; nn];
    let mut diag = vec![0.0; nn];
    let mut sup = vec![0.0; nn];
    let mut b = vec![0.0; nn];
    for i in 0..nn {
        let cell_dt = if i == 0 || i == nn - 1 { 0.5 * h } else { h };
        let mut d = grid.masses[i] - tau * coeff[i] * lam * cell_dt;
        let mut lo = 0.0;
        let mut up = 0.0;
        if i < nn - 1 {
            d += tau * coeff[i] / h;
            up = -tau * coeff[i] / h;
        }
        if i > 0 {
            d += tau * coeff[i] / h;
            lo = -tau * coeff[i] / h;
        } else {
            d += tau * coeff[i] * qk;
        }
        sub[i] = lo;
        diag[i] = d;
        sup[i] = up;
        b[i] = grid.masses[i] * rhs[i];
    }
    // Thomas algorithm; the matrix is strictly diagonally dominant
    // (lam <= 0, coeff >= 0), so no pivoting is needed.
    for i in 1..nn {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        b[i] -= w * b[i - 1];
    }
    let mut u = vec![0.0; nn];
    u[nn - 1] = b[nn - 1] / diag[nn - 1];
    for i in (0..nn - 1).rev() {
        u[i] = b[i] - sup[i] * u[i + 1];
        u[i] /= diag[i];
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("implicit mode {k} solve produced non-finite values")));
    }
    Ok(u)
}

/// M-matrix test of the assembled implicit step matrix for one mode:
/// positive diagonal, nonpositive off-diagonals, strict diagonal dominance.
pub fn step_matrix_is_m_matrix(grid: &WedgeGrid, k: usize, coeff: &[f64]) -> bool {
    let nn = grid.nodes();
    let h = grid.h;
    let lam = grid.mode_eigenvalue(k);
    let qk = grid.mode_exponent(k);
    let tau = grid.tau;
    for i in 0..nn {
        let cell_dt = if i == 0 || i == nn - 1 { 0.5 * h } else { h };
        let mut d = grid.masses[i] - tau * coeff[i] * lam * cell_dt;
        let mut off = 0.0;
        if i < nn - 1 {
            d += tau * coeff[i] / h;
            off += tau * coeff[i] / h;
        }
        if i > 0 {
            d += tau * coeff[i] / h;
            off += tau * coeff[i] / h;
        } else {
            d += tau * coeff[i] * qk;
        }
        if d <= 0.0 || d.is_nan() || off > d {
            return false;
        }
    }
    true
}

/// Why a step or run stopped early.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Halt {
    /// min v dropped below alpha / 2: the state left the short-time
    /// positivity neighborhood. Carries the halt time.
    PositivityFloor { time: f64, min_v: f64 },
}

/// One IMEX step: the diffusion coefficient m v^{(m-1)/m} is frozen at the
/// current state, split into its y-average (implicit, per mode) and the
/// remainder (fixed-point corrected).
pub fn pme_step_imex(
    grid: &WedgeGrid,
    state: &PMEState,
    forcing: &Forcing,
) -> Result<std::result::Result<PMEState, Halt>> {
    let nn = grid.nodes();
    let ny = 2 * grid.modes;
    let exponent = (state.m - 1.0) / state.m;

    // Pointwise frozen coefficient and forcing on the collocation nodes.
    let vp = state.to_pointwise(grid);
    let mut coeff = vec![vec![0.0; ny]; nn];
    let mut coeff_bar = vec![0.0; nn];
    for i in 0..nn {
        for j in 0..ny {
            let c = state.m * vp[i][j].max(0.0).powf(exponent);
            coeff[i][j] = c;
            coeff_bar[i] += c / ny as f64;
        }
    }
    let rhs_base: Vec<Vec<f64>> = (0..nn)
        .map(|i| (0..ny).map(|j| vp[i][j] + grid.tau * forcing.eval(vp[i][j])).collect())
        .collect();

    // Fixed point on the y-varying part of the coefficient.
    let cos_table: Vec<Vec<f64>> = (0..grid.modes)
        .map(|k| {
            grid.y_nodes()
                .iter()
                .map(|&y| (k as f64 * std::f64::consts::PI * y / grid.length).cos())
                .collect()
        })
        .collect();
    let mut current = state.modes.clone();
    let mut last_delta = f64::INFINITY;
    for _iter in 0..5 {
        // Pointwise Delta v of the current iterate.
        let delta_modes: Vec<Vec<f64>> = current
            .iter()
            .enumerate()
            .map(|(k, v)| laplacian_mode_apply(grid, k, v))
            .collect();
        // Correction g_i(y) = (c(x,y) - c_bar(x)) (Delta v)(x, y).
        let mut rhs_modes = vec![vec![0.0; nn]; grid.modes];
        for i in 0..nn {
            for k in 0..grid.modes {
                let mut acc = 0.0;
                for j in 0..ny {
                    let dv: f64 =
                        (0..grid.modes).map(|kk| delta_modes[kk][i] * cos_table[kk][j]).sum();
                    let corr = (coeff[i][j] - coeff_bar[i]) * dv;
                    acc += (rhs_base[i][j] + grid.tau * corr) * cos_table[k][j];
                }
                rhs_modes[k][i] = acc * if k == 0 { 1.0 / ny as f64 } else { 2.0 / ny as f64 };
            }
        }
        let mut next = Vec::with_capacity(grid.modes);
        for k in 0..grid.modes {
            next.push(implicit_mode_solve(grid, k, &coeff_bar, &rhs_modes[k])?);
        }
        let mut delta = 0.0f64;
        for k in 0..grid.modes {
            for i in 0..nn {
                delta = delta.max((next[k][i] - current[k][i]).abs());
            }
        }
        current = next;
        last_delta = delta;
        if delta < 1e-8 {
            break;
        }
    }
    let _ = last_delta;

    let mut out = PMEState {
        time: state.time + grid.tau,
        modes: current,
        m: state.m,
        alpha: state.alpha,
    };
    let min_v = out.min_pointwise(grid);
    if min_v < 0.5 * out.alpha {
        return Ok(Err(Halt::PositivityFloor { time: state.time, min_v }));
    }
    out.time = state.time + grid.tau;
    Ok(Ok(out))
}

/// Power-law fit of a mode's tip behavior: slope of log amplitude against
/// log x over the lowest decade of the grid. Modes below 1e-12 amplitude
/// are skipped (None).
pub fn tip_exponent_fit(grid: &WedgeGrid, state: &PMEState, k: usize) -> Option<f64> {
    let x_lo = grid.x[0];
    let x_hi = 10.0 * x_lo;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &x) in grid.x.iter().enumerate() {
        if x > x_hi {
            break;
        }
        let a = state.modes[k][i].abs();
        if a < 1e-12 {
            continue;
        }
        xs.push(x.ln());
        ys.push(a.ln());
    }
    if xs.len() < 4 {
        return None;
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Trajectory snapshot times and diagnostics of a run.
#[derive(Clone, Debug)]
pub struct PMETrajectory {
    pub snapshots: Vec<PMEState>,
    /// Tip value c(t): constant-mode amplitude at the innermost node.
    pub tip_values: Vec<f64>,
    pub min_v: f64,
    pub halted: Option<Halt>,
}

impl PMETrajectory {
    pub fn final_state(&self) -> &PMEState {
        self.snapshots.last().expect("trajectory has at least the initial state")
    }

    pub fn converged(&self) -> bool {
        self.halted.is_none()
    }
}

/// Clement-Li exponent window: (n+1)/p + 2/q < 1 and 2/q < delta.
pub fn clement_li_window_check(p: f64, q: f64, n: usize, delta: f64) -> bool {
    (n as f64 + 1.0) / p + 2.0 / q < 1.0 && 2.0 / q < delta
}

/// Runs the transformed porous-medium system to time horizon T, collecting
/// `snapshots` evenly spaced states plus diagnostics.
pub fn pme_solve(
    grid: &WedgeGrid,
    v0: PMEState,
    forcing: &Forcing,
    horizon: f64,
    snapshots: usize,
) -> Result<PMETrajectory> {
    if horizon <= 0.0 {
        return Err(Error::Domain("time horizon must be positive".into()));
    }
    let steps = (horizon / grid.tau).round().max(1.0) as usize;
    let stride = (steps / snapshots.max(1)).max(1);
    let mut out = PMETrajectory {
        tip_values: vec![v0.modes[0][0]],
        snapshots: vec![v0.clone()],
        min_v: v0.min_pointwise(grid),
        halted: None,
    };
    let mut state = v0;
    for s in 0..steps {
        match pme_step_imex(grid, &state, forcing)? {
            Ok(next) => state = next,
            Err(halt) => {
                out.halted = Some(halt);
                break;
            }
        }
        out.min_v = out.min_v.min(state.min_pointwise(grid));
        out.tip_values.push(state.modes[0][0]);
        if (s + 1) % stride == 0 || s + 1 == steps {
            out.snapshots.push(state.clone());
        }
    }
    Ok(out)
}
