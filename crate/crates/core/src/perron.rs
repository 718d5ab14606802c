//! Triangularization of non-autonomous linear systems v̇ = A(t)v through
//! differentiable Gram-Schmidt frames: orthogonal U(t), upper-triangular
//! B(t), parallelepiped volumes, spectral-radius paths, and the associated
//! consistency checks.
//!
//! Two generator kinds are supported. Smooth systems carry an explicit
//! t ↦ A(t) and are integrated with a classical 4th-order one-step method
//! whose step is tied to the generator bound; the frame is kept orthogonal
//! by periodic re-orthonormalization. Impulsive systems (suspension roof
//! crossings) concentrate the derivative at crossing times, so only
//! integrated quantities (log-diagonal increments, volume ratios) are
//! tracked for them.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{FlowPoint, SuspensionFlow};
use crate::error::{CoreError, Result};
use crate::mat::{vec_norm, Mat};
#[allow(unused_imports)] // resolves libm methods in no_std builds
use crate::math::F64Ext;

pub enum Generator {
    Smooth {
        f: Box<dyn Fn(f64) -> Mat + Send + Sync>,
        /// Sup-norm bound on ‖A(t)‖ (spectral norm).
        alpha: f64,
    },
    Impulsive {
        times: Vec<f64>,
        factors: Vec<Mat>,
    },
}

pub struct LinearSystem {
    pub dim: usize,
    pub generator: Generator,
}

impl LinearSystem {
    pub fn smooth(
        dim: usize,
        alpha: f64,
        f: impl Fn(f64) -> Mat + Send + Sync + 'static,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(CoreError::InvalidParameter("alpha must be finite and >= 0"));
        }
        Ok(LinearSystem { dim, generator: Generator::Smooth { f: Box::new(f), alpha } })
    }

    pub fn impulsive(dim: usize, times: Vec<f64>, factors: Vec<Mat>) -> Result<Self> {
        if times.len() != factors.len() {
            return Err(CoreError::InvalidParameter("times/factors length mismatch"));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::InvalidParameter("impulse times must be increasing"));
            }
        }
        Ok(LinearSystem { dim, generator: Generator::Impulsive { times, factors } })
    }
}

/// Sampled triangularization of one system along one basis.
#[derive(Debug, Clone)]
pub struct TriangularTrajectory {
    pub dim: usize,
    pub grid: Vec<f64>,
    /// Orthogonal frame at each node (smooth systems; impulsive systems
    /// store the post-crossing frame).
    pub frames: Vec<Mat>,
    /// Upper-triangular B at each node (smooth systems only).
    pub b: Vec<Mat>,
    /// ∫₀ᵗ b_ii per node.
    pub int_diag: Vec<Vec<f64>>,
    /// log Γ_m per node, m = 1..k, computed from the solution volumes
    /// (independent of the diagonal integrals for smooth systems).
    pub gamma_logs: Vec<Vec<f64>>,
    /// ∫₀ᵗ r(B(s)) ds per node.
    pub int_r: Vec<f64>,
    /// Fundamental solution of ż = B(t)z, Z(0) = I (smooth systems).
    pub z: Vec<Mat>,
    /// Direct solution of Ẋ = A(t)X with X(0) = basis (smooth systems).
    pub x_direct: Vec<Mat>,
    /// R-factor of the initial basis, X(t) = U(t)·Z(t)·R(0).
    pub r0: Mat,
    pub smooth: bool,
    pub alpha: f64,
}

impl TriangularTrajectory {
    fn node_at(&self, t: f64) -> usize {
        let mut best = 0;
        let mut err = f64::INFINITY;
        for (i, &g) in self.grid.iter().enumerate() {
            let e = (g - t).abs();
            if e < err {
                err = e;
                best = i;
            }
        }
        best
    }

    /// ∫₀ᵗ r(B) with linear interpolation between nodes.
    pub fn int_r_at(&self, t: f64) -> f64 {
        interp(&self.grid, &self.int_r, t)
    }
}

fn interp(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if t <= xs[i] {
            let w = (t - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + w * (ys[i] - ys[i - 1]);
        }
    }
    *ys.last().unwrap()
}

/// Gram-Schmidt factorization: basis = frame · factor with `frame`
/// orthogonal and `factor` upper triangular with positive diagonal.
pub fn gram_schmidt(basis: &Mat) -> Result<(Mat, Mat)> {
    basis.qr_pos()
}

fn skew_from(c: &Mat) -> Mat {
    let n = c.n;
    Mat::from_fn(n, |i, j| {
        if i > j {
            c[(i, j)]
        } else if i < j {
            -c[(j, i)]
        } else {
            0.0
        }
    })
}

struct SmoothState {
    u: Mat,
    x: Mat,
    /// Orthonormal frame tracking the volume growth of the direct
    /// solution; re-factored every step so strong hyperbolicity cannot
    /// collapse it numerically.
    xg: Mat,
    /// Accumulated per-column log factors of the xg re-factorizations;
    /// log Gamma_m = sum of the first m entries.
    gamma_off: Vec<f64>,
    z: Mat,
    int_diag: Vec<f64>,
    int_r: f64,
}

impl SmoothState {
    fn axpy(&self, h: f64, d: &SmoothDeriv) -> SmoothState {
        SmoothState {
            u: self.u.add(&d.du.scale(h)),
            x: self.x.add(&d.dx.scale(h)),
            xg: self.xg.add(&d.dxg.scale(h)),
            gamma_off: self.gamma_off.clone(),
            z: self.z.add(&d.dz.scale(h)),
            int_diag: self
                .int_diag
                .iter()
                .zip(&d.ddiag)
                .map(|(a, b)| a + h * b)
                .collect(),
            int_r: self.int_r + h * d.dr,
        }
    }

    fn refactor_gamma(&mut self) -> Result<()> {
        let (q, r) = self.xg.qr_pos()?;
        for i in 0..self.xg.n {
            self.gamma_off[i] += r[(i, i)].ln();
        }
        self.xg = q;
        Ok(())
    }

    fn log_gammas(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.gamma_off
            .iter()
            .map(|o| {
                acc += o;
                acc
            })
            .collect()
    }
}

struct SmoothDeriv {
    du: Mat,
    dx: Mat,
    dxg: Mat,
    dz: Mat,
    ddiag: Vec<f64>,
    dr: f64,
}

fn triangular_b(u: &Mat, a: &Mat) -> Mat {
    let c = u.transpose().mul(a).mul(u);
    c.sub(&skew_from(&c))
}

fn smooth_deriv(f: &dyn Fn(f64) -> Mat, t: f64, s: &SmoothState) -> SmoothDeriv {
    let a = f(t);
    let c = s.u.transpose().mul(&a).mul(&s.u);
    let sk = skew_from(&c);
    let b = c.sub(&sk);
    let n = a.n;
    let ddiag: Vec<f64> = (0..n).map(|i| b[(i, i)]).collect();
    let dr = ddiag.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    SmoothDeriv {
        du: s.u.mul(&sk),
        dx: a.mul(&s.x),
        dxg: a.mul(&s.xg),
        dz: b.mul(&s.z),
        ddiag,
        dr,
    }
}

const ORTHO_REPAIR: f64 = 1e-11;
const ORTHO_FAIL: f64 = 1e-6;

/// Triangularize `sys` along `basis` over `t_grid` (increasing, starting
/// at 0). For impulsive systems the grid is the impulse times themselves.
pub fn triangularize(sys: &LinearSystem, basis: &Mat, t_grid: &[f64]) -> Result<TriangularTrajectory> {
    if basis.n != sys.dim {
        return Err(CoreError::ShapeError);
    }
    match &sys.generator {
        Generator::Smooth { f, alpha } => {
            if t_grid.is_empty() || t_grid[0] != 0.0 {
                return Err(CoreError::InvalidParameter("grid must start at 0"));
            }
            triangularize_smooth(f.as_ref(), *alpha, basis, t_grid)
        }
        Generator::Impulsive { times, factors } => {
            triangularize_impulsive(times, factors, basis)
        }
    }
}

fn triangularize_smooth(
    f: &dyn Fn(f64) -> Mat,
    alpha: f64,
    basis: &Mat,
    t_grid: &[f64],
) -> Result<TriangularTrajectory> {
    let k = basis.n;
    let (u0, r0) = gram_schmidt(basis)?;
    let gamma0: Vec<f64> = (0..k).map(|i| r0[(i, i)].ln()).collect();
    let mut state = SmoothState {
        u: u0.clone(),
        x: basis.clone(),
        xg: u0,
        gamma_off: gamma0,
        z: Mat::identity(k),
        int_diag: vec![0.0; k],
        int_r: 0.0,
    };
    let h_target = (0.04 / alpha.max(1.0)).min(0.02);

    let mut traj = TriangularTrajectory {
        dim: k,
        grid: t_grid.to_vec(),
        frames: Vec::with_capacity(t_grid.len()),
        b: Vec::with_capacity(t_grid.len()),
        int_diag: Vec::with_capacity(t_grid.len()),
        gamma_logs: Vec::with_capacity(t_grid.len()),
        int_r: Vec::with_capacity(t_grid.len()),
        z: Vec::with_capacity(t_grid.len()),
        x_direct: Vec::with_capacity(t_grid.len()),
        r0,
        smooth: true,
        alpha,
    };

    let record = |t: f64, s: &SmoothState, traj: &mut TriangularTrajectory| -> Result<()> {
        traj.frames.push(s.u.clone());
        traj.b.push(triangular_b(&s.u, &f(t)));
        traj.int_diag.push(s.int_diag.clone());
        traj.gamma_logs.push(s.log_gammas());
        traj.int_r.push(s.int_r);
        traj.z.push(s.z.clone());
        traj.x_direct.push(s.x.clone());
        Ok(())
    };

    record(0.0, &state, &mut traj)?;
    for w in t_grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            return Err(CoreError::InvalidParameter("grid must be increasing"));
        }
        let steps = ((t1 - t0) / h_target).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        let mut t = t0;
        for _ in 0..steps {
            let k1 = smooth_deriv(f, t, &state);
            let s2 = state.axpy(0.5 * h, &k1);
            let k2 = smooth_deriv(f, t + 0.5 * h, &s2);
            let s3 = state.axpy(0.5 * h, &k2);
            let k3 = smooth_deriv(f, t + 0.5 * h, &s3);
            let s4 = state.axpy(h, &k3);
            let k4 = smooth_deriv(f, t + h, &s4);
            state = state
                .axpy(h / 6.0, &k1)
                .axpy(h / 3.0, &k2)
                .axpy(h / 3.0, &k3)
                .axpy(h / 6.0, &k4);
            t += h;

            let drift = state.u.orthogonality_drift();
            if drift > ORTHO_FAIL {
                return Err(CoreError::StepSizeFailure { drift });
            }
            if drift > ORTHO_REPAIR {
                let (q, _) = state.u.qr_pos()?;
                state.u = q;
            }
            state.refactor_gamma()?;
        }
        record(t1, &state, &mut traj)?;
    }
    Ok(traj)
}

fn triangularize_impulsive(
    times: &[f64],
    factors: &[Mat],
    basis: &Mat,
) -> Result<TriangularTrajectory> {
    let k = basis.n;
    let (mut q, r0) = gram_schmidt(basis)?;
    let gamma0: Vec<f64> = {
        let mut acc = 0.0;
        (0..k)
            .map(|i| {
                acc += r0[(i, i)].ln();
                acc
            })
            .collect()
    };

    let mut grid = vec![0.0];
    grid.extend_from_slice(times);
    let mut traj = TriangularTrajectory {
        dim: k,
        grid,
        frames: vec![q.clone()],
        b: Vec::new(),
        int_diag: vec![vec![0.0; k]],
        gamma_logs: vec![gamma0.clone()],
        int_r: vec![0.0],
        z: Vec::new(),
        x_direct: Vec::new(),
        r0,
        smooth: false,
        alpha: 0.0,
    };

    let mut int_diag = vec![0.0; k];
    let mut gamma = gamma0;
    let mut int_r = 0.0;
    for factor in factors {
        let m = factor.mul(&q);
        let (qn, r) = m.qr_pos()?;
        q = qn;
        let mut step_max = 0.0f64;
        for i in 0..k {
            let l = r[(i, i)].ln();
            int_diag[i] += l;
            gamma[i] = traj.gamma_logs[0][i] + int_diag[..=i].iter().sum::<f64>();
            step_max = step_max.max(l.abs());
        }
        int_r += step_max;
        traj.frames.push(q.clone());
        traj.int_diag.push(int_diag.clone());
        traj.gamma_logs.push(gamma.clone());
        traj.int_r.push(int_r);
    }
    Ok(traj)
}

/// (1/t)·log Γ_m(t); converges to m·χ for constant-exponent systems.
pub fn gamma_volume_rate(traj: &TriangularTrajectory, m: usize, t: f64) -> f64 {
    let idx = traj.node_at(t);
    (traj.gamma_logs[idx][m - 1] - traj.gamma_logs[0][m - 1]) / traj.grid[idx]
}

/// r(B(t)) = max_i |b_ii(t)| per node; impulsive systems report the
/// per-segment average density of the log-diagonal increments.
pub fn spectral_radius_path(traj: &TriangularTrajectory) -> Vec<f64> {
    if traj.smooth {
        traj.b
            .iter()
            .map(|b| (0..traj.dim).fold(0.0f64, |m, i| m.max(b[(i, i)].abs())))
            .collect()
    } else {
        let mut out = Vec::with_capacity(traj.grid.len());
        for i in 1..traj.grid.len() {
            let dt = traj.grid[i] - traj.grid[i - 1];
            let dr = traj.int_r[i] - traj.int_r[i - 1];
            out.push(dr / dt);
        }
        // value at t = 0 is the first segment's density
        let first = out.first().copied().unwrap_or(0.0);
        let mut path = vec![first];
        path.extend(out);
        path
    }
}

/// (1/T)·∫₀ᵀ r(B(s)) ds.
pub fn time_avg_spectral_radius(traj: &TriangularTrajectory, t: f64) -> f64 {
    traj.int_r_at(t) / t
}

/// Max deviation of the spectral-radius paths from two bases, evaluated
/// at the nodes of `eval_grid` (integrated increments for impulsive
/// systems). The first node may sit past 0: basis independence is an
/// asymptotic statement, so the caller chooses where burn-in ends.
pub fn check_basis_independence(
    sys: &LinearSystem,
    basis1: &Mat,
    basis2: &Mat,
    eval_grid: &[f64],
) -> Result<f64> {
    let mut grid = Vec::new();
    if eval_grid.first() != Some(&0.0) {
        grid.push(0.0);
    }
    grid.extend_from_slice(eval_grid);
    let skip = grid.len() - eval_grid.len();
    let t1 = triangularize(sys, basis1, &grid)?;
    let t2 = triangularize(sys, basis2, &grid)?;
    let r1 = spectral_radius_path(&t1);
    let r2 = spectral_radius_path(&t2);
    let mut dev = 0.0f64;
    for (a, b) in r1.iter().zip(&r2).skip(skip) {
        dev = dev.max((a - b).abs());
    }
    Ok(dev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoBoundCheck {
    /// |r(B(0))| with the standard basis.
    pub r0: f64,
    /// Estimated operator norm of the Gram-Schmidt differential at I.
    pub gs_norm: f64,
    /// K = 1 + ‖T_I G‖.
    pub k_const: f64,
    /// K·‖A(0)‖.
    pub bound: f64,
    pub pass: bool,
}

/// Check |r(B(0))| ≤ K·‖A(0)‖ with K = 1 + ‖T_I G‖; the differential of
/// the Gram-Schmidt map at the identity is estimated by central finite
/// differences over a basis of matrix directions and its operator norm is
/// taken over the Frobenius inner product.
pub fn check_rho_bound(sys: &LinearSystem) -> Result<RhoBoundCheck> {
    let (f, _) = match &sys.generator {
        Generator::Smooth { f, alpha } => (f, alpha),
        Generator::Impulsive { .. } => {
            return Err(CoreError::InvalidParameter("rho bound needs a smooth generator"))
        }
    };
    let k = sys.dim;
    let a0 = f(0.0);
    // with the standard basis U(0) = I, so B(0) has diagonal diag(A(0))
    let r0 = (0..k).fold(0.0f64, |m, i| m.max(a0[(i, i)].abs()));

    let h = 1e-5;
    let mut map = Mat::zeros(k * k);
    for p in 0..k {
        for q in 0..k {
            let mut plus = Mat::identity(k);
            plus[(p, q)] += h;
            let mut minus = Mat::identity(k);
            minus[(p, q)] -= h;
            let (qp, _) = plus.qr_pos()?;
            let (qm, _) = minus.qr_pos()?;
            let col = p * k + q;
            for i in 0..k {
                for j in 0..k {
                    map[(i * k + j, col)] = (qp[(i, j)] - qm[(i, j)]) / (2.0 * h);
                }
            }
        }
    }
    let gs_norm = map.spectral_norm();
    let k_const = 1.0 + gs_norm;
    let bound = k_const * a0.spectral_norm();
    Ok(RhoBoundCheck { r0, gs_norm, k_const, bound, pass: r0 <= bound + 1e-9 })
}

/// Per-crossing log growth of a one-dimensional bundle along an orbit:
/// crossing times and log factors ln‖Df·v‖/‖v‖, with v transported and
/// renormalized crossing by crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePath {
    pub times: Vec<f64>,
    pub log_factors: Vec<f64>,
    /// Traversed length of the segment ending at each crossing (the first
    /// segment is truncated by the starting fiber offset).
    pub lens: Vec<f64>,
    /// Signed log-growth density log_factor / roof of that segment; its
    /// absolute value at the first segment is u(x) = r(B_x(0)).
    pub dens: Vec<f64>,
}

impl BundlePath {
    /// Σ of log factors over crossings in (0, t].
    pub fn log_growth(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.log_factors)
            .take_while(|(tc, _)| **tc <= t)
            .map(|(_, l)| l)
            .sum()
    }
}

/// Walk the unstable bundle from flow point `p` for `t_max` flow time.
pub fn unstable_log_path(
    flow: &SuspensionFlow,
    p: FlowPoint,
    t_max: f64,
    n_back: u32,
) -> Result<BundlePath> {
    let v = flow.unstable_direction(p.x, n_back)?;
    Ok(log_path_from(flow, p, [v[0], v[1]], t_max))
}

/// Walk a bundle spanned by `v` (not necessarily unit) from `p`.
pub fn log_path_from(flow: &SuspensionFlow, p: FlowPoint, v: [f64; 2], t_max: f64) -> BundlePath {
    let mut v = {
        let n = vec_norm(&v);
        [v[0] / n, v[1] / n]
    };
    let mut x = p.x;
    let mut roof = flow.roof.eval(x);
    let mut len = roof - p.s;
    let mut t_cross = len;
    let mut times = Vec::new();
    let mut logs = Vec::new();
    let mut lens = Vec::new();
    let mut dens = Vec::new();
    while t_cross <= t_max {
        let w = flow.base.jacobian(x).mul_vec(&v);
        let n = vec_norm(&w);
        times.push(t_cross);
        logs.push(n.ln());
        lens.push(len);
        dens.push(n.ln() / roof);
        v = [w[0] / n, w[1] / n];
        x = flow.base.apply(x);
        roof = flow.roof.eval(x);
        len = roof;
        t_cross += len;
    }
    BundlePath { times, log_factors: logs, lens, dens }
}

/// Build the impulsive linear system of a bundle path (k = 1).
pub fn impulsive_from_bundle(path: &BundlePath) -> Result<LinearSystem> {
    let factors = path
        .log_factors
        .iter()
        .map(|l| Mat::from_rows(&[&[l.exp()]]))
        .collect();
    LinearSystem::impulsive(1, path.times.clone(), factors)
}

/// Deviation between the integrated diagonal of B over [s, s+t] seen from
/// `x` and over [0, t] seen from the time-s image with the transported
/// frame. The two agree identically for frames built as in the shift
/// construction; the deviation measures numerical bookkeeping only.
pub fn cocycle_shift_check(
    flow: &SuspensionFlow,
    x: [f64; 2],
    s: f64,
    t: f64,
    n_back: u32,
) -> Result<f64> {
    let p = FlowPoint::new(x, 0.0);
    let v = flow.unstable_direction(p.x, n_back)?;
    let path = log_path_from(flow, p, v, s + t);
    let lhs = path.log_growth(s + t) - path.log_growth(s);
    let q = flow.evolve(p, s);
    let w = flow.jacobian_cocycle(p, s).mul_vec(&v);
    let shifted = log_path_from(flow, q, [w[0], w[1]], t);
    let rhs = shifted.log_growth(t);
    Ok((lhs - rhs).abs())
}
