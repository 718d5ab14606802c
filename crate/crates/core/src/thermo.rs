//! Thermodynamic formalism over the suspension: pressure from periodic
//! orbits, Monte Carlo cumulant cross-checks, Legendre-transform rate
//! functions, the integrability threshold p*(ε), and empirical
//! large-deviation tails.
//!
//! Pressure is computed by exact periodic-orbit sums, which exist in closed
//! form only for the unperturbed integer base map; perturbed bases fall back
//! to the Monte Carlo cumulant route, and every curve carries a method tag
//! recording which one produced it.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{BaseMap, BasePoint, Observable, SuspensionFlow};
use crate::error::{CoreError, Result};
use crate::math::F64Ext;
use crate::regularity::RegularityRecord;

/// Provenance of a pressure curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMethod {
    PeriodicOrbit,
    MonteCarloCgf,
}

/// β(t) = P(tφ) − P(0) sampled on a grid.
#[derive(Debug, Clone)]
pub struct PressureCurve {
    pub t_grid: Vec<f64>,
    pub beta: Vec<f64>,
    pub method: PressureMethod,
    /// Periodic-orbit order n, or Monte Carlo horizon T, depending on method.
    pub n_or_t: f64,
}

impl PressureCurve {
    /// β(0) = 0, convexity (second differences ≥ −1e−6), monotone slopes.
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.len() != self.beta.len() || self.t_grid.len() < 3 {
            return Err(CoreError::InvalidParameter("pressure curve needs >= 3 nodes"));
        }
        let i0 = self
            .t_grid
            .iter()
            .position(|&t| t.abs() < 1e-12)
            .ok_or(CoreError::InvalidParameter("t grid must contain 0"))?;
        if self.beta[i0].abs() > 1e-12 {
            return Err(CoreError::InvalidParameter("beta(0) must vanish"));
        }
        for i in 1..self.t_grid.len() - 1 {
            let dl = self.t_grid[i] - self.t_grid[i - 1];
            let dr = self.t_grid[i + 1] - self.t_grid[i];
            let sl = (self.beta[i] - self.beta[i - 1]) / dl;
            let sr = (self.beta[i + 1] - self.beta[i]) / dr;
            if sr - sl < -1e-6 {
                return Err(CoreError::NonConvexInput { second_diff: sr - sl });
            }
        }
        Ok(())
    }

    /// Central-difference slopes at the interior nodes.
    pub fn slopes(&self) -> Vec<f64> {
        let m = self.t_grid.len();
        (1..m - 1)
            .map(|i| (self.beta[i + 1] - self.beta[i - 1]) / (self.t_grid[i + 1] - self.t_grid[i - 1]))
            .collect()
    }

    /// β′(0) by central difference at the node t = 0.
    pub fn slope_at_zero(&self) -> f64 {
        let i0 = self.t_grid.iter().position(|&t| t.abs() < 1e-12).unwrap_or(self.t_grid.len() / 2);
        (self.beta[i0 + 1] - self.beta[i0 - 1]) / (self.t_grid[i0 + 1] - self.t_grid[i0 - 1])
    }

    /// β″(0) by second difference at the node t = 0.
    pub fn curvature_at_zero(&self) -> f64 {
        let i0 = self.t_grid.iter().position(|&t| t.abs() < 1e-12).unwrap_or(self.t_grid.len() / 2);
        let dt = self.t_grid[i0 + 1] - self.t_grid[i0];
        (self.beta[i0 + 1] - 2.0 * self.beta[i0] + self.beta[i0 - 1]) / (dt * dt)
    }

    /// ρ = (β′)⁻¹ by monotone inversion of the discrete slopes; clamps to the
    /// grid ends outside the attained slope range.
    pub fn rho(&self, a: f64) -> f64 {
        let slopes = self.slopes();
        let ts = &self.t_grid[1..self.t_grid.len() - 1];
        if a <= slopes[0] {
            return ts[0];
        }
        if a >= slopes[slopes.len() - 1] {
            return ts[ts.len() - 1];
        }
        for i in 0..slopes.len() - 1 {
            if a <= slopes[i + 1] {
                let w = (a - slopes[i]) / (slopes[i + 1] - slopes[i]);
                return ts[i] + w * (ts[i + 1] - ts[i]);
            }
        }
        ts[ts.len() - 1]
    }
}

/// Rate function H = −γ on the attainable range Γ_φ; H = ∞ outside.
#[derive(Debug, Clone)]
pub struct EntropyProfile {
    pub a_grid: Vec<f64>,
    pub h: Vec<f64>,
    pub chi: f64,
    pub sigma2: f64,
    /// Inner approximation (β′(−t_max), β′(t_max)) of Γ_φ.
    pub gamma_domain: (f64, f64),
}

impl EntropyProfile {
    /// Linear interpolation on the grid; +∞ outside the attained domain.
    pub fn h_at(&self, a: f64) -> f64 {
        let n = self.a_grid.len();
        if n == 1 {
            return if (a - self.a_grid[0]).abs() < 1e-12 { self.h[0] } else { f64::INFINITY };
        }
        if a < self.a_grid[0] || a > self.a_grid[n - 1] {
            return f64::INFINITY;
        }
        let mut i = 0;
        while i + 2 < n && self.a_grid[i + 1] < a {
            i += 1;
        }
        let w = (a - self.a_grid[i]) / (self.a_grid[i + 1] - self.a_grid[i]);
        self.h[i] + w * (self.h[i + 1] - self.h[i])
    }

    /// Discrete H″(χ): three-point second derivative (nonuniform grid) at the
    /// node nearest χ.
    pub fn curvature_at_chi(&self) -> f64 {
        let n = self.a_grid.len();
        if n < 3 {
            return f64::NAN;
        }
        let mut i = 1;
        for j in 1..n - 1 {
            if (self.a_grid[j] - self.chi).abs() < (self.a_grid[i] - self.chi).abs() {
                i = j;
            }
        }
        let hl = self.a_grid[i] - self.a_grid[i - 1];
        let hr = self.a_grid[i + 1] - self.a_grid[i];
        2.0 * (hl * self.h[i + 1] - (hl + hr) * self.h[i] + hr * self.h[i - 1])
            / (hl * hr * (hl + hr))
    }
}

fn mat_mul_i128(a: [[i128; 2]; 2], b: [[i128; 2]; 2]) -> [[i128; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Diagonalize an integer matrix by unimodular row/column operations,
/// returning (diagonal, accumulated column operations C) with M·C⁻¹... more
/// precisely R·M·C = D for some unimodular R, so Mx ∈ ℤ² iff D·(C⁻¹x) ∈ ℤ²
/// and the solutions are x = C·(j₁/d₁, j₂/d₂).
fn diagonalize(mut m: [[i128; 2]; 2]) -> ([[i128; 2]; 2], [[i128; 2]; 2]) {
    let mut c = [[1i128, 0], [0, 1]];
    // bring a nonzero entry to the pivot
    if m[0][0] == 0 {
        if m[0][1] != 0 || m[1][1] != 0 {
            // swap columns
            for row in m.iter_mut() {
                row.swap(0, 1);
            }
            for row in c.iter_mut() {
                row.swap(0, 1);
            }
        }
        if m[0][0] == 0 {
            m.swap(0, 1);
        }
    }
    loop {
        if m[1][0] != 0 {
            let q = m[1][0] / m[0][0];
            for j in 0..2 {
                m[1][j] -= q * m[0][j];
            }
            if m[1][0] != 0 {
                m.swap(0, 1);
            }
            continue;
        }
        if m[0][1] != 0 {
            let q = m[0][1] / m[0][0];
            for i in 0..2 {
                m[i][1] -= q * m[i][0];
                c[i][1] -= q * c[i][0];
            }
            if m[0][1] != 0 {
                for row in m.iter_mut() {
                    row.swap(0, 1);
                }
                for row in c.iter_mut() {
                    row.swap(0, 1);
                }
            }
            continue;
        }
        break;
    }
    (m, c)
}

fn mat_pow_i128(a: [[i128; 2]; 2], n: u32) -> [[i128; 2]; 2] {
    let mut out = [[1i128, 0], [0, 1]];
    for _ in 0..n {
        out = mat_mul_i128(out, a);
    }
    out
}

/// All x ∈ T² with (Aⁿ − I)x ∈ ℤ², i.e. the period-n points of the
/// automorphism. Count equals |det(Aⁿ − I)|.
pub fn fixed_points(a: [[i64; 2]; 2], n: u32) -> Result<Vec<BasePoint>> {
    if n == 0 {
        return Err(CoreError::InvalidParameter("period must be positive"));
    }
    let ai = [[a[0][0] as i128, a[0][1] as i128], [a[1][0] as i128, a[1][1] as i128]];
    let an = mat_pow_i128(ai, n);
    let m = [[an[0][0] - 1, an[0][1]], [an[1][0], an[1][1] - 1]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0 {
        return Err(CoreError::DegeneratePeriod { period: n });
    }
    let (d, c) = diagonalize(m);
    let d1 = d[0][0].unsigned_abs() as u64;
    let d2 = d[1][1].unsigned_abs() as u64;
    let mut out = Vec::with_capacity((d1 * d2) as usize);
    for j1 in 0..d1 {
        let y1 = j1 as f64 / d1 as f64;
        for j2 in 0..d2 {
            let y2 = j2 as f64 / d2 as f64;
            let x1 = (c[0][0] as f64 * y1 + c[0][1] as f64 * y2).frac1();
            let x2 = (c[1][0] as f64 * y1 + c[1][1] as f64 * y2).frac1();
            out.push([x1, x2]);
        }
    }
    out.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    Ok(out)
}

/// Periodic-orbit pressure sequence p_n = (1/n)·log Σ_{Fix(Aⁿ)} exp(S_n φ).
#[derive(Debug, Clone)]
pub struct PressureReport {
    pub per_n: Vec<f64>,
    pub value: f64,
    /// Last increment |p_{n_max} − p_{n_max−1}|.
    pub err_estimate: f64,
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let mx = vals.iter().fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
    if !mx.is_finite() {
        return mx;
    }
    let s: f64 = vals.iter().map(|&v| (v - mx).exp()).sum();
    mx + s.ln()
}

/// Pressure of a base observable for the integer automorphism, via periodic
/// orbits up to order n_max.
pub fn pressure_po(phi: &Observable, a: [[i64; 2]; 2], n_max: u32) -> Result<PressureReport> {
    if n_max == 0 || n_max > 14 {
        return Err(CoreError::InvalidParameter("periodic-orbit order must be in 1..=14"));
    }
    let base = BaseMap::new(a, 0.0)?;
    let mut per_n = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let pts = fixed_points(a, n)?;
        let sums: Vec<f64> = pts
            .iter()
            .map(|&x| {
                let mut s = 0.0;
                let mut q = x;
                for _ in 0..n {
                    s += phi.eval(q);
                    q = base.apply(q);
                }
                s
            })
            .collect();
        per_n.push(log_sum_exp(&sums) / n as f64);
    }
    let value = per_n[per_n.len() - 1];
    let err_estimate = if per_n.len() >= 2 {
        (value - per_n[per_n.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    Ok(PressureReport { per_n, value, err_estimate })
}

/// Birkhoff sums of the fiber-integrated observable and roof over the
/// period-n_max points, cached so the Abramov root solve is a cheap
/// log-sum-exp per bisection step.
struct OrbitSums {
    n: u32,
    phi: Vec<f64>,
    roof: Vec<f64>,
}

fn orbit_sums(phi: &Observable, flow: &SuspensionFlow, n: u32) -> Result<OrbitSums> {
    let pts = fixed_points(flow.base.matrix(), n)?;
    let mut sp = Vec::with_capacity(pts.len());
    let mut sr = Vec::with_capacity(pts.len());
    for &x in &pts {
        let mut ap = 0.0;
        let mut ar = 0.0;
        let mut q = x;
        for _ in 0..n {
            let r = flow.roof.eval(q);
            ap += phi.eval(q) * r;
            ar += r;
            q = flow.base.apply(q);
        }
        sp.push(ap);
        sr.push(ar);
    }
    Ok(OrbitSums { n, phi: sp, roof: sr })
}

impl OrbitSums {
    /// P_map(t·φ̂ − s·r̂) for the cached order.
    fn shifted_pressure(&self, t: f64, s: f64) -> f64 {
        let vals: Vec<f64> = self
            .phi
            .iter()
            .zip(&self.roof)
            .map(|(&p, &r)| t * p - s * r)
            .collect();
        log_sum_exp(&vals) / self.n as f64
    }

    /// Abramov root: the s with P_map(t·φ̂ − s·r̂) = 0, by bisection.
    fn abramov_root(&self, t: f64, lo0: f64, hi0: f64) -> Result<f64> {
        let (mut lo, mut hi) = (lo0, hi0);
        if self.shifted_pressure(t, lo) < 0.0 || self.shifted_pressure(t, hi) > 0.0 {
            return Err(CoreError::BracketFailure { lo, hi });
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.shifted_pressure(t, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Flow pressure by Abramov reduction: the root s of P_map(φ̂ − s·r̂) = 0,
/// where φ̂ and r̂ are fiber integrals over one roof segment. Requires the
/// unperturbed base (kappa = 0), where periodic points are enumerable.
pub fn pressure_flow(phi: &Observable, flow: &SuspensionFlow, n_max: u32) -> Result<f64> {
    if flow.base.kappa() != 0.0 {
        return Err(CoreError::InvalidParameter(
            "periodic-orbit pressure requires the unperturbed base (kappa = 0)",
        ));
    }
    let sums = orbit_sums(phi, flow, n_max)?;
    let p0 = pressure_po(&Observable::constant(0.0), flow.base.matrix(), n_max)?.value;
    let r_min = flow.roof.min_bound();
    let bound = (phi.sup_norm() + p0) / r_min;
    sums.abramov_root(1.0, -bound, bound)
}

/// β(t) = P(tφ) − P(0) on a symmetric grid, via periodic orbits at order
/// n_max. The grid must be symmetric around 0 with step ≤ 0.1.
pub fn beta_curve(
    phi: &Observable,
    flow: &SuspensionFlow,
    t_grid: &[f64],
    n_max: u32,
) -> Result<PressureCurve> {
    validate_t_grid(t_grid)?;
    if flow.base.kappa() != 0.0 {
        return Err(CoreError::InvalidParameter(
            "periodic-orbit pressure requires the unperturbed base (kappa = 0)",
        ));
    }
    let sums = orbit_sums(phi, flow, n_max)?;
    let p0_map = pressure_po(&Observable::constant(0.0), flow.base.matrix(), n_max)?.value;
    let t_abs = t_grid.iter().fold(0.0f64, |a, &t| if t.abs() > a { t.abs() } else { a });
    let r_min = flow.roof.min_bound();
    let bound = (t_abs * phi.sup_norm() + p0_map) / r_min + 1.0;
    let p0 = sums.abramov_root(0.0, -bound, bound)?;
    let beta: Result<Vec<f64>> = t_grid
        .iter()
        .map(|&t| Ok(sums.abramov_root(t, -bound, bound)? - p0))
        .collect();
    let curve = PressureCurve {
        t_grid: t_grid.to_vec(),
        beta: beta?,
        method: PressureMethod::PeriodicOrbit,
        n_or_t: n_max as f64,
    };
    curve.validate()?;
    Ok(curve)
}

fn validate_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 {
        return Err(CoreError::InvalidParameter("t grid needs >= 3 nodes"));
    }
    let m = t_grid.len();
    for i in 0..m {
        if (t_grid[i] + t_grid[m - 1 - i]).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter("t grid must be symmetric around 0"));
        }
        if i > 0 && !(t_grid[i] > t_grid[i - 1] && t_grid[i] - t_grid[i - 1] <= 0.1 + 1e-12) {
            return Err(CoreError::InvalidParameter("t grid step must be positive and <= 0.1"));
        }
    }
    Ok(())
}

/// Monte Carlo cumulant curve β_T(t) = (1/T)·log E[exp(t·∫₀ᵀφ)], the
/// independent oracle for `beta_curve` and the only pressure route for
/// perturbed bases.
pub fn beta_mc(
    phi: &Observable,
    flow: &SuspensionFlow,
    t_grid: &[f64],
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PressureCurve> {
    validate_t_grid(t_grid)?;
    if horizon <= 0.0 || n_samples == 0 {
        return Err(CoreError::InvalidParameter("horizon and sample count must be positive"));
    }
    let pts = flow.sample_volume(seed, n_samples);
    let integrals: Vec<f64> = pts
        .iter()
        .map(|&p| flow.integrate_observable(phi, p, horizon))
        .collect();
    let log_n = (n_samples as f64).ln();
    let beta: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return 0.0;
            }
            let vals: Vec<f64> = integrals.iter().map(|&x| t * x).collect();
            (log_sum_exp(&vals) - log_n) / horizon
        })
        .collect();
    Ok(PressureCurve {
        t_grid: t_grid.to_vec(),
        beta,
        method: PressureMethod::MonteCarloCgf,
        n_or_t: horizon,
    })
}

/// Legendre transform of a convex pressure curve: H(a) = sup_t {t·a − β(t)},
/// evaluated at the attained slopes a_j = β′(t_j) so the supremum lands on a
/// grid node.
pub fn legendre(curve: &PressureCurve) -> Result<EntropyProfile> {
    curve.validate()?;
    let slopes = curve.slopes();
    let chi = curve.slope_at_zero();
    let sigma2 = curve.curvature_at_zero();
    let spread = slopes[slopes.len() - 1] - slopes[0];
    if spread < 1e-9 {
        // linear curve: Γ_φ is a single point, H = ∞ elsewhere
        return Ok(EntropyProfile {
            a_grid: vec![chi],
            h: vec![0.0],
            chi,
            sigma2,
            gamma_domain: (chi, chi),
        });
    }
    let h: Vec<f64> = slopes
        .iter()
        .map(|&a| {
            curve
                .t_grid
                .iter()
                .zip(&curve.beta)
                .map(|(&t, &b)| t * a - b)
                .fold(f64::NEG_INFINITY, |acc, v| if v > acc { v } else { acc })
        })
        .collect();
    let profile = EntropyProfile {
        gamma_domain: (slopes[0], slopes[slopes.len() - 1]),
        a_grid: slopes,
        h,
        chi,
        sigma2,
    };
    for (i, &hv) in profile.h.iter().enumerate() {
        if hv < -1e-12 {
            return Err(CoreError::InvalidParameter("rate function went negative"));
        }
        if i > 0 && i + 1 < profile.h.len() {
            let dl = profile.a_grid[i] - profile.a_grid[i - 1];
            let dr = profile.a_grid[i + 1] - profile.a_grid[i];
            if dl > 1e-12 && dr > 1e-12 {
                let sl = (profile.h[i] - profile.h[i - 1]) / dl;
                let sr = (profile.h[i + 1] - profile.h[i]) / dr;
                if sr - sl < -1e-6 {
                    return Err(CoreError::NonConvexInput { second_diff: sr - sl });
                }
            }
        }
    }
    Ok(profile)
}

/// p*(ε) = 1 / ∫_ε^{‖u‖∞−χ} ds / H(χ+s), trapezoid quadrature with the
/// integrand set to 0 where χ+s falls outside Γ_φ (H = ∞ there). Capped at
/// 1e12 as the +∞ sentinel.
pub fn integrability_threshold(
    profile: &EntropyProfile,
    chi: f64,
    u_sup: f64,
    eps: f64,
) -> Result<f64> {
    let s_max = u_sup - chi;
    if !(eps > 0.0 && eps < s_max) {
        return Err(CoreError::InvalidParameter("eps must lie in (0, sup u - chi)"));
    }
    let n = 2000usize;
    let ds = (s_max - eps) / n as f64;
    let integrand = |s: f64| {
        let h = profile.h_at(chi + s);
        if h.is_finite() && h > 1e-300 {
            1.0 / h
        } else {
            0.0
        }
    };
    let mut acc = 0.5 * (integrand(eps) + integrand(s_max));
    let mut any_finite = integrand(eps) > 0.0 || integrand(s_max) > 0.0;
    for i in 1..n {
        let v = integrand(eps + i as f64 * ds);
        any_finite = any_finite || v > 0.0;
        acc += v;
    }
    if !any_finite {
        return Err(CoreError::DegenerateProfile);
    }
    let integral = acc * ds;
    if integral < 1e-12 {
        return Ok(1e12);
    }
    Ok((1.0 / integral).min(1e12))
}

/// Empirical large-deviation rate for m{x : ∫₀ᵀ u ≥ T·a}.
#[derive(Debug, Clone)]
pub struct TailRate {
    /// Least-squares slope of −log frequency against T.
    pub slope: f64,
    pub horizons: Vec<f64>,
    pub freq: Vec<f64>,
    /// Wilson-interval half-widths for the frequencies (z = 1.96).
    pub wilson_half: Vec<f64>,
    /// Zero-count horizons, dropped from the fit.
    pub dropped: Vec<bool>,
}

/// Estimate the exponential decay rate of the deviation probability at level
/// a over the listed horizons. Sample orbits are walked incrementally so each
/// point is integrated once up to the largest horizon.
pub fn tail_rate_empirical(
    flow: &SuspensionFlow,
    u: &Observable,
    a: f64,
    t_list: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TailRate> {
    if t_list.is_empty() || n_samples == 0 {
        return Err(CoreError::InvalidParameter("need horizons and samples"));
    }
    for (i, &t) in t_list.iter().enumerate() {
        if t <= 0.0 || (i > 0 && t <= t_list[i - 1]) {
            return Err(CoreError::InvalidParameter("horizons must be positive and increasing"));
        }
    }
    let pts = flow.sample_volume(seed, n_samples);
    let mut counts = vec![0u64; t_list.len()];
    for &p in &pts {
        let mut acc = 0.0;
        let mut cur = p;
        let mut done = 0.0;
        for (i, &t) in t_list.iter().enumerate() {
            let dt = t - done;
            acc += flow.integrate_observable(u, cur, dt);
            cur = flow.evolve(cur, dt);
            done = t;
            if acc >= a * t {
                counts[i] += 1;
            }
        }
    }
    let n = n_samples as f64;
    let z = 1.96;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut freq = Vec::with_capacity(t_list.len());
    let mut wilson = Vec::with_capacity(t_list.len());
    let mut dropped = Vec::with_capacity(t_list.len());
    for (i, &c) in counts.iter().enumerate() {
        let p = c as f64 / n;
        freq.push(p);
        let denom = 1.0 + z * z / n;
        wilson.push(z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / denom);
        if c == 0 {
            dropped.push(true);
        } else {
            dropped.push(false);
            xs.push(t_list[i]);
            ys.push(-(p.ln()));
        }
    }
    if xs.is_empty() {
        return Err(CoreError::AllZeroCounts);
    }
    let slope = if xs.len() == 1 {
        ys[0] / xs[0]
    } else {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        num / den
    };
    Ok(TailRate { slope, horizons: t_list.to_vec(), freq, wilson_half: wilson, dropped })
}

/// One dyadic-in-ζ bin of the T_ε distribution.
#[derive(Debug, Clone)]
pub struct TailBin {
    pub n: u32,
    pub count: usize,
    pub mass: f64,
    /// L·exp{−H((χ+ε)/ζ)·ζ^{n+1}}, L fitted at the first nonempty bin.
    pub bound: f64,
    /// Fewer than 10 points — reported, not asserted.
    pub sparse: bool,
}

/// Tail report for the bins ζⁿ < T_ε ≤ ζⁿ⁺¹.
#[derive(Debug, Clone)]
pub struct TailReport {
    pub bins: Vec<TailBin>,
    /// Theoretical decay rate H((χ+ε)/ζ).
    pub rate: f64,
    /// Least-squares decay exponent of −log mass against ζⁿ⁺¹.
    pub fitted_exponent: f64,
    /// Masses non-increasing over the nonempty bins.
    pub monotone: bool,
    pub l_fit: f64,
}

/// Bin the attainment times T_ε geometrically and compare each bin mass with
/// the exponential bound whose rate is H((χ+ε)/ζ).
pub fn lemma_t_tail(
    records: &[RegularityRecord],
    eps: f64,
    zeta: f64,
    profile: &EntropyProfile,
) -> Result<TailReport> {
    if records.is_empty() {
        return Err(CoreError::InvalidParameter("no records"));
    }
    if zeta <= 1.0 {
        return Err(CoreError::InvalidParameter("zeta must exceed 1"));
    }
    for r in records {
        if (r.epsilon - eps).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter("record epsilon does not match eps"));
        }
    }
    let horizon = records.iter().map(|r| r.t_max).fold(f64::INFINITY, f64::min);
    let chi = profile.chi;
    let rate = {
        let h = profile.h_at((chi + eps) / zeta);
        if h.is_finite() {
            h
        } else {
            0.0
        }
    };
    // largest n with zeta^{n+1} <= horizon
    let mut n_bins = 0u32;
    while zeta.powi(n_bins as i32 + 1) <= horizon {
        n_bins += 1;
    }
    if n_bins == 0 {
        return Err(CoreError::HorizonTooSmall { truncated_fraction: 1.0 });
    }
    let total = records.len() as f64;
    let mut bins = Vec::with_capacity(n_bins as usize);
    let mut l_fit = 0.0;
    for n in 0..n_bins {
        let lo = zeta.powi(n as i32);
        let hi = zeta.powi(n as i32 + 1);
        let count = records.iter().filter(|r| r.t_eps > lo && r.t_eps <= hi).count();
        let mass = count as f64 / total;
        if l_fit == 0.0 && count > 0 {
            l_fit = mass / (-rate * hi).exp();
        }
        bins.push(TailBin { n, count, mass, bound: 0.0, sparse: count < 10 });
    }
    for b in bins.iter_mut() {
        b.bound = l_fit * (-rate * zeta.powi(b.n as i32 + 1)).exp();
    }
    let mut monotone = true;
    let mut last = f64::INFINITY;
    for b in &bins {
        if b.count > 0 {
            if b.mass > last + 1e-12 {
                monotone = false;
            }
            last = b.mass;
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for b in &bins {
        if b.count > 0 {
            xs.push(zeta.powi(b.n as i32 + 1));
            ys.push(-(b.mass.ln()));
        }
    }
    let fitted_exponent = if xs.len() < 2 {
        f64::NAN
    } else {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        num / den
    };
    Ok(TailReport { bins, rate, fitted_exponent, monotone, l_fit })
}
