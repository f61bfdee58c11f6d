//! Constrained TV-L2 restoration.
//!
//! Solves `min TV(u)` subject to `|Au - v| <= eps` with a first-order
//! primal-dual iteration. The two dual blocks are the discrete gradient (TV
//! term) and the blur operator (ball constraint); both proximal steps are
//! exact projections.

use crate::error::{Error, Result};
use crate::image::{norm2, GaussianStream, Image};
use crate::kernel::ExactOperator;
use crate::theta::{SparseTheta, ThetaOperator};

/// Smallest constraint radius; a zero noise level becomes an equality
/// constraint up to this tolerance.
pub const MIN_RADIUS: f64 = 1e-6;
/// Window over which a stalled residual above the radius counts as
/// infeasible.
pub const PLATEAU_WINDOW: usize = 200;

/// A square linear map on flattened images, with its adjoint.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&mut self, x: &[f64], y: &mut [f64]);
    fn apply_adjoint(&mut self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for ThetaOperator {
    fn dim(&self) -> usize {
        ThetaOperator::dim(self)
    }

    fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        ThetaOperator::apply(self, x, y)
    }

    fn apply_adjoint(&mut self, x: &[f64], y: &mut [f64]) {
        ThetaOperator::apply_adjoint(self, x, y)
    }
}

impl LinearOperator for ExactOperator {
    fn dim(&self) -> usize {
        self.size() * self.size()
    }

    fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        self.apply_slice(x, y)
    }

    fn apply_adjoint(&mut self, x: &[f64], y: &mut [f64]) {
        self.apply_adjoint_slice(x, y)
    }
}

/// Default dual step of the TV block.
pub const DEFAULT_TV_STEP: f64 = 3.0;
/// Default dual step of the fidelity block, in units of `1 / sigma^2`.
pub const DEFAULT_FIDELITY_STEP: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Tolerance on the relative stationarity of `u` and on the squared
    /// residual excess `|Au - v|^2 / eps^2 - 1`.
    pub tol: f64,
    pub sigma_noise: f64,
    /// Primal step.
    pub tau: Option<f64>,
    /// Dual step of the gradient block.
    pub kappa: Option<f64>,
    /// Dual step of the fidelity block.
    pub kappa_fidelity: Option<f64>,
    /// Upper bound on `|A|`; estimated by power iteration when absent.
    pub operator_norm: Option<f64>,
    /// Record `TV(u)` every this many iterations (0 disables).
    pub trace_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-4,
            sigma_noise: 2e-2,
            tau: None,
            kappa: None,
            kappa_fidelity: None,
            operator_norm: None,
            trace_every: 50,
        }
    }
}

impl SolverConfig {
    pub fn with_sigma(sigma_noise: f64) -> Self {
        Self {
            sigma_noise,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_noise must be non-negative, got {}",
                self.sigma_noise
            )));
        }
        let steps = [("tau", self.tau), ("kappa", self.kappa), ("kappa_fidelity", self.kappa_fidelity)];
        for (name, v) in steps {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(a) = self.operator_norm {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad operator_norm: {a}")));
            }
        }
        Ok(())
    }

    /// Constraint radius for `n` pixels.
    pub fn radius(&self, n: usize) -> f64 {
        (self.sigma_noise * (n as f64).sqrt()).max(MIN_RADIUS)
    }

    /// `(tau, kappa, kappa_fidelity)` for an operator of norm at most
    /// `norm_a` on `n` pixels. Missing steps are filled so that
    /// `tau * (8 kappa + kappa_fidelity |A|^2) = 1`.
    pub fn steps(&self, n: usize, norm_a: f64) -> Result<(f64, f64, f64)> {
        let a2 = norm_a * norm_a;
        let noise = self.radius(n) / (n as f64).sqrt();
        let kf_default = DEFAULT_FIDELITY_STEP / (noise * noise);
        let (tau, kappa, kf) = match (self.tau, self.kappa, self.kappa_fidelity) {
            (Some(t), Some(k), Some(f)) => (t, k, f),
            (None, k, f) => {
                let k = k.unwrap_or(DEFAULT_TV_STEP);
                let f = f.unwrap_or(kf_default);
                (1.0 / (8.0 * k + f * a2), k, f)
            }
            (Some(t), k, f) => {
                let (k0, f0) = (k.unwrap_or(DEFAULT_TV_STEP), f.unwrap_or(kf_default));
                // scale the missing dual steps to meet the bound exactly
                let fixed = if k.is_some() { 8.0 * k0 } else { 0.0 } + if f.is_some() { f0 * a2 } else { 0.0 };
                let free = if k.is_none() { 8.0 * k0 } else { 0.0 } + if f.is_none() { f0 * a2 } else { 0.0 };
                let scale = if free > 0.0 { ((1.0 / t - fixed) / free).max(0.0) } else { 1.0 };
                let k = if k.is_some() { k0 } else { k0 * scale };
                let f = if f.is_some() { f0 } else { f0 * scale };
                if k <= 0.0 || f <= 0.0 {
                    return Err(Error::InvalidParameter(format!("primal step {t} leaves no room for dual steps")));
                }
                (t, k, f)
            }
        };
        if tau * (8.0 * kappa + kf * a2) > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "steps violate tau * (8 kappa + kappa_fidelity |A|^2) <= 1 ({tau}, {kappa}, {kf}, |A| = {norm_a})"
            )));
        }
        Ok((tau, kappa, kf))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The residual stalled above the radius: `v` is probably farther than
    /// `eps` from the range of `A`.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct RestoreResult {
    pub image: Image,
    pub iterations: usize,
    /// `|Au - v|`.
    pub residual: f64,
    pub radius: f64,
    pub tv: f64,
    pub status: SolveStatus,
    /// `(iteration, TV(u))` samples.
    pub tv_trace: Vec<(usize, f64)>,
    pub tau: f64,
    pub kappa: f64,
    pub kappa_fidelity: f64,
    pub operator_norm: f64,
}

impl RestoreResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Whether `|Au - v|^2 <= eps^2 (1 + tol)`.
    pub fn feasible(&self, tol: f64) -> bool {
        self.residual * self.residual <= self.radius * self.radius * (1.0 + tol)
    }
}

/// Periodic forward-difference gradient into `(gx, gy)` interleaved pairs.
fn gradient(u: &[f64], n: usize, g: &mut [f64]) {
    for i in 0..n {
        let down = ((i + 1) % n) * n;
        let row = i * n;
        for j in 0..n {
            let right = if j + 1 == n { 0 } else { j + 1 };
            let x = u[row + j];
            g[2 * (row + j)] = u[row + right] - x;
            g[2 * (row + j) + 1] = u[down + j] - x;
        }
    }
}

/// Adjoint of [`gradient`] (negative divergence).
fn gradient_adjoint(g: &[f64], n: usize, out: &mut [f64]) {
    for i in 0..n {
        let up = ((i + n - 1) % n) * n;
        let row = i * n;
        for j in 0..n {
            let left = if j == 0 { n - 1 } else { j - 1 };
            let k = row + j;
            out[k] = -(g[2 * k] - g[2 * (row + left)]) - (g[2 * k + 1] - g[2 * (up + j) + 1]);
        }
    }
}

fn tv_slice(u: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let down = ((i + 1) % n) * n;
        for j in 0..n {
            let right = if j + 1 == n { 0 } else { j + 1 };
            let x = u[i * n + j];
            let dx = u[i * n + right] - x;
            let dy = u[down + j] - x;
            total += (dx * dx + dy * dy).sqrt();
        }
    }
    total
}

/// Isotropic total variation with periodic forward differences.
pub fn tv_value(img: &Image) -> f64 {
    let (h, w) = (img.height(), img.width());
    if h == w {
        return tv_slice(img.data(), h);
    }
    let u = img.data();
    let mut total = 0.0;
    for i in 0..h {
        for j in 0..w {
            let x = u[i * w + j];
            let dx = u[i * w + (j + 1) % w] - x;
            let dy = u[((i + 1) % h) * w + j] - x;
            total += (dx * dx + dy * dy).sqrt();
        }
    }
    total
}

/// Power iteration on `A^T A` from a fixed Gaussian start; returns the
/// estimate of `|A|` inflated by 5%.
pub fn estimate_norm<A: LinearOperator + ?Sized>(op: &mut A, iters: usize) -> f64 {
    let dim = op.dim();
    let mut x = GaussianStream::new(0x5eed).fill(dim);
    let (mut ax, mut y) = (vec![0.0; dim], vec![0.0; dim]);
    let mut sigma = 0.0;
    for _ in 0..iters.max(10) {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply(&x, &mut ax);
        sigma = norm2(&ax);
        op.apply_adjoint(&ax, &mut y);
        std::mem::swap(&mut x, &mut y);
    }
    sigma * 1.05
}

/// `|W^T Theta W|` upper bound from `iters` power iterations.
pub fn estimate_operator_norm(theta: &SparseTheta, iters: usize) -> Result<f64> {
    let mut op = ThetaOperator::from_theta(theta)?;
    Ok(estimate_norm(&mut op, iters))
}

/// Restores `v` with the operator `W^T Theta W`.
pub fn restore(v: &Image, theta: &SparseTheta, cfg: &SolverConfig) -> Result<RestoreResult> {
    let mut op = ThetaOperator::from_theta(theta)?;
    restore_with(v, &mut op, cfg)
}

fn shrink(w: &mut [f64], t: f64) {
    let n = norm2(w);
    let s = if n > t { 1.0 - t / n } else { 0.0 };
    w.iter_mut().for_each(|x| *x *= s);
}

/// Restores `v` with any square operator. Starts from `u = v` with zero
/// dual variables.
///
/// Each iteration takes one dual step per block (projection onto the unit
/// ball per pixel for the gradient, `shrink(y - kappa_f v, kappa_f eps)` for
/// the fidelity term) and one primal step. `A u_t` is carried along from
/// `A ubar_t = 2 A u_t - A u_{t-1}`, so an iteration costs one forward and
/// one adjoint application.
///
/// The stopping test combines feasibility with relative stationarity
/// `|grad^T p + A^T q| / (|grad^T p| + |A^T q|)`, the size of the primal
/// update in units of its two competing terms.
pub fn restore_with<A: LinearOperator + ?Sized>(
    v: &Image,
    op: &mut A,
    cfg: &SolverConfig,
) -> Result<RestoreResult> {
    cfg.validate()?;
    let n = v.len();
    let side = v.width();
    if v.height() != side || op.dim() != n {
        return Err(Error::Dimension(format!(
            "{}x{} image for an operator on {} pixels",
            v.height(),
            v.width(),
            op.dim()
        )));
    }
    let eps = cfg.radius(n);
    let norm_a = match cfg.operator_norm {
        Some(a) => a,
        None => estimate_norm(op, 50),
    };
    let (tau, kappa, kf) = cfg.steps(n, norm_a)?;

    let vd = v.data();
    let mut u = vd.to_vec();
    let mut u_prev = u.clone();
    let mut ubar = u.clone();
    let mut p = vec![0.0; 2 * n];
    let mut q = vec![0.0; n];
    let mut grad = vec![0.0; 2 * n];
    let mut a_bar = vec![0.0; n];
    let mut au = vec![0.0; n];
    let mut au_prev = vec![0.0; n];
    let mut back = vec![0.0; n];
    let mut div = vec![0.0; n];
    op.apply(&u, &mut au_prev);

    let mut residuals: Vec<f64> = Vec::with_capacity(cfg.max_iters + 1);
    let mut tv_trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = cfg.max_iters;
    let bound = eps * (1.0 + cfg.tol).sqrt();
    let mut stationarity = f64::INFINITY;

    for t in 0..=cfg.max_iters {
        op.apply(&ubar, &mut a_bar);
        for i in 0..n {
            au[i] = 0.5 * (a_bar[i] + au_prev[i]);
        }
        let residual = au.iter().zip(vd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        residuals.push(residual);
        if cfg.trace_every > 0 && t % cfg.trace_every == 0 {
            let tv = tv_slice(&u, side);
            tv_trace.push((t, tv));
            log::debug!("iter {t}: residual/eps {:.6}, stationarity {stationarity:.3e}, tv {tv:.6}", residual / eps);
        }
        if stationarity <= cfg.tol && residual <= bound {
            status = SolveStatus::Converged;
            iterations = t;
            break;
        }
        if t >= PLATEAU_WINDOW {
            let window = &residuals[t - PLATEAU_WINDOW..=t];
            let stalled = window.iter().all(|&r| r > 1.05 * eps)
                && residuals[t - PLATEAU_WINDOW] - residual <= 0.01 * residual;
            if stalled {
                status = SolveStatus::Infeasible;
                iterations = t;
                break;
            }
        }
        if t == cfg.max_iters {
            break;
        }

        gradient(&ubar, side, &mut grad);
        for i in 0..n {
            let (gx, gy) = (p[2 * i] + kappa * grad[2 * i], p[2 * i + 1] + kappa * grad[2 * i + 1]);
            let s = (gx * gx + gy * gy).sqrt().max(1.0);
            p[2 * i] = gx / s;
            p[2 * i + 1] = gy / s;
        }
        for i in 0..n {
            q[i] += kf * (a_bar[i] - vd[i]);
        }
        shrink(&mut q, kf * eps);

        gradient_adjoint(&p, side, &mut div);
        op.apply_adjoint(&q, &mut back);
        let (mut net, mut scale_div, mut scale_back) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let g = div[i] + back[i];
            net += g * g;
            scale_div += div[i] * div[i];
            scale_back += back[i] * back[i];
            let next = u[i] - tau * g;
            u_prev[i] = u[i];
            u[i] = next;
            ubar[i] = 2.0 * next - u_prev[i];
        }
        let scale = scale_div.sqrt() + scale_back.sqrt();
        stationarity = if scale > 0.0 { net.sqrt() / scale } else { 0.0 };
        std::mem::swap(&mut au_prev, &mut au);
    }

    op.apply(&u, &mut au);
    let residual = au.iter().zip(vd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if status == SolveStatus::Converged && residual > bound {
        status = SolveStatus::MaxIterations;
    }
    let tv = tv_slice(&u, side);
    Ok(RestoreResult {
        image: Image::new(side, side, u)?,
        iterations,
        residual,
        radius: eps,
        tv,
        status,
        tv_trace,
        tau,
        kappa,
        kappa_fidelity: kf,
        operator_norm: norm_a,
    })
}
