//! Multiplicative cocycles Δ(x,t), Birkhoff averages, discrete-QR Lyapunov
//! exponents, and the variance / cohomology degeneracy test.
//!
//! All arithmetic stays in the log domain: Δ itself overflows doubles for
//! horizons in the thousands, while log Δ is just a Birkhoff integral.

use alloc::vec::Vec;

use crate::dynamics::{FlowPoint, Observable, SuspensionFlow};
use crate::error::{CoreError, Result};
use crate::mat::{vec_norm, Mat};
#[allow(unused_imports)] // resolves libm methods in no_std builds
use crate::math::F64Ext;
use crate::rng;

/// One Birkhoff average sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffSample {
    pub point: FlowPoint,
    pub horizon: f64,
    pub integral: f64,
    pub average: f64,
}

/// log Δ(x,t) = ∫₀ᵗ u(f_s x) ds.
pub fn log_delta(flow: &SuspensionFlow, u: &Observable, p: FlowPoint, t: f64) -> f64 {
    flow.integrate_observable(u, p, t)
}

/// Monte Carlo Birkhoff estimate of χ = ∫ u dμ with per-sample streams.
/// Returns (mean, half-width) with half-width = 2·stderr.
pub fn estimate_chi(
    flow: &SuspensionFlow,
    u: &Observable,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 10 {
        return Err(CoreError::InvalidParameter("need at least 10 samples"));
    }
    if horizon < 1.0 {
        return Err(CoreError::InvalidParameter("horizon must be >= 1"));
    }
    let pts = flow.sample_volume(seed, samples);
    let avgs: Vec<f64> = pts
        .iter()
        .map(|&p| flow.integrate_observable(u, p, horizon) / horizon)
        .collect();
    let n = samples as f64;
    let mean = avgs.iter().sum::<f64>() / n;
    let var = avgs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    Ok((mean, 2.0 * stderr))
}

/// Birkhoff samples for downstream tail statistics.
pub fn birkhoff_samples(
    flow: &SuspensionFlow,
    u: &Observable,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Vec<BirkhoffSample> {
    flow.sample_volume(seed, samples)
        .into_iter()
        .map(|p| {
            let integral = flow.integrate_observable(u, p, horizon);
            BirkhoffSample { point: p, horizon, integral, average: integral / horizon }
        })
        .collect()
}

/// Lyapunov exponents of the derivative cocycle per unit flow-time, by
/// Gram-Schmidt re-orthonormalization at every roof crossing. Sorted
/// descending.
pub fn lyapunov_qr(flow: &SuspensionFlow, p: FlowPoint, horizon: f64) -> Result<[f64; 2]> {
    if horizon < 100.0 * flow.roof.mean() {
        return Err(CoreError::InvalidParameter("horizon below 100 mean roofs"));
    }
    lyapunov_qr_frame(flow, p, horizon, &Mat::identity(2))
}

/// Same with an explicit initial orthonormal frame (basis-independence
/// checks).
pub fn lyapunov_qr_frame(
    flow: &SuspensionFlow,
    p: FlowPoint,
    horizon: f64,
    frame: &Mat,
) -> Result<[f64; 2]> {
    let (mut q, _) = frame.qr_pos()?;
    let mut sums = [0.0f64; 2];
    let mut t_last = 0.0;
    for seg in flow.segments(p, horizon) {
        let t_cross = seg.t_start + seg.len;
        if t_cross >= horizon {
            break;
        }
        let j = flow.base.jacobian(seg.x);
        let (qn, r) = j.mul(&q).qr_pos()?;
        q = qn;
        sums[0] += r[(0, 0)].ln();
        sums[1] += r[(1, 1)].ln();
        t_last = t_cross;
    }
    if t_last <= 0.0 {
        return Err(CoreError::InvalidParameter("no roof crossings within horizon"));
    }
    let mut ex = [sums[0] / t_last, sums[1] / t_last];
    if ex[0] < ex[1] {
        ex.swap(0, 1);
    }
    Ok(ex)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub sigma2: f64,
    pub stderr: f64,
    /// Set when the estimate is statistically indistinguishable from 0
    /// (below 3·stderr) — a proxy for u being cohomologous to a constant,
    /// not a decision procedure.
    pub degenerate: bool,
}

/// Estimate σ² = lim (1/T)·E[(∫₀ᵀ (u − χ))²] over N volume samples.
/// χ is removed with the closed-form roof-weighted mean of `u`.
///
/// The per-sample statistic is the Richardson-debiased difference
/// (I(2T)² − I(T)²)/T along one orbit: its expectation is σ² for
/// observables with a CLT and exactly 0 for coboundaries (whose raw
/// estimate I(T)²/T decays like 1/T but never drops below its own
/// stderr, making the naive version useless as a degeneracy proxy).
pub fn variance_sigma2(
    flow: &SuspensionFlow,
    u: &Observable,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Result<VarianceEstimate> {
    if horizon < 100.0 {
        return Err(CoreError::InvalidParameter("variance horizon must be >= 100"));
    }
    if samples < 10 {
        return Err(CoreError::InvalidParameter("need at least 10 samples"));
    }
    let chi = u.mean(&flow.roof);
    let pts = flow.sample_volume(seed, samples);
    let vals: Vec<f64> = pts
        .iter()
        .map(|&p| {
            let i1 = flow.integrate_observable(u, p, horizon) - chi * horizon;
            let q = flow.evolve(p, horizon);
            let i2 = i1 + flow.integrate_observable(u, q, horizon) - chi * horizon;
            (i2 * i2 - i1 * i1) / horizon
        })
        .collect();
    let n = samples as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    // absolute floor so an exactly-zero estimate (stderr 0) still flags
    let degenerate = mean <= 3.0 * stderr + 1e-12;
    Ok(VarianceEstimate { sigma2: mean, stderr, degenerate })
}

/// Deviation of the multiplicative cocycle law |log Δ(x,s+t) −
/// log Δ(x,s) − log Δ(f_s x,t)|, relative to the magnitudes involved.
pub fn cocycle_law_deviation(
    flow: &SuspensionFlow,
    u: &Observable,
    p: FlowPoint,
    s: f64,
    t: f64,
) -> f64 {
    let whole = log_delta(flow, u, p, s + t);
    let first = log_delta(flow, u, p, s);
    let second = log_delta(flow, u, flow.evolve(p, s), t);
    let scale = whole.abs().max(first.abs() + second.abs()).max(1.0);
    (whole - (first + second)).abs() / scale
}

/// Growth rate check used by the acceptance suite: per-crossing expansion
/// of the unstable direction over `n` crossings.
pub fn unstable_growth_per_crossing(
    flow: &SuspensionFlow,
    x: [f64; 2],
    n: usize,
    n_back: u32,
) -> Result<f64> {
    let mut v = flow.unstable_direction(x, n_back)?;
    let mut x = x;
    let mut total = 0.0;
    for _ in 0..n {
        let w = flow.base.jacobian(x).mul_vec(&v);
        let norm = vec_norm(&w);
        total += norm.ln();
        v = [w[0] / norm, w[1] / norm];
        x = flow.base.apply(x);
    }
    Ok(total / n as f64)
}

/// Deterministic quasi-random flow point for tests.
pub fn random_point(flow: &SuspensionFlow, seed: u64, index: u64) -> FlowPoint {
    let mut s = rng::stream(seed, index);
    loop {
        let x = [rng::uniform(&mut s), rng::uniform(&mut s)];
        let h = rng::uniform(&mut s) * flow.roof.max_bound();
        if h < flow.roof.eval(x) {
            return FlowPoint::new(x, h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{BaseMap, RoofFunction, TrigTerm};

    fn lam_log() -> f64 {
        ((3.0 + 5.0f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn constant_observable_is_linear() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::constant(0.7);
        let p = FlowPoint::new([0.2, 0.9], 0.3);
        assert!((log_delta(&flow, &u, p, 13.25) - 0.7 * 13.25).abs() < 1e-12);
        assert_eq!(log_delta(&flow, &u, p, 0.0), 0.0);
    }

    #[test]
    fn cocycle_law_random_triples() {
        let base = BaseMap::cat_sheared(0.08).unwrap();
        let roof = RoofFunction::new(
            1.1,
            alloc::vec![TrigTerm::new([1, 0], 0.05, 0.2).unwrap()],
        )
        .unwrap();
        let flow = SuspensionFlow::new(base, roof);
        let u = Observable::new(
            0.3,
            alloc::vec![
                TrigTerm::new([1, 0], 0.5, 0.0).unwrap(),
                TrigTerm::new([0, 2], 0.2, 1.0).unwrap(),
            ],
        );
        let mut s = rng::stream(3, 0);
        for i in 0..100 {
            let p = random_point(&flow, 3, 100 + i);
            let a = 20.0 * rng::uniform(&mut s);
            let b = 20.0 * rng::uniform(&mut s);
            let dev = cocycle_law_deviation(&flow, &u, p, a, b);
            assert!(dev < 1e-9, "triple {i}: {dev}");
        }
    }

    #[test]
    fn log_delta_bounded_by_sup_norm() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::new(0.1, alloc::vec![TrigTerm::new([2, 1], 0.4, 0.3).unwrap()]);
        let sup = u.sup_norm();
        for i in 0..50 {
            let p = random_point(&flow, 11, i);
            let t = 5.0 + i as f64;
            let l = log_delta(&flow, &u, p, t);
            assert!(l.abs() <= sup * t * (1.0 + 1e-12));
        }
    }

    #[test]
    fn chi_estimates() {
        let flow = SuspensionFlow::cat_constant(1.0);
        // zero-mean trig observable
        let u = Observable::cosine([1, 0], 1.0);
        let (mean, half) = estimate_chi(&flow, &u, 400, 100.0, 5).unwrap();
        assert!(mean.abs() <= half.max(0.01), "mean {mean} half {half}");
        // constant: exact, zero width
        let (mean, half) = estimate_chi(&flow, &Observable::constant(0.7), 20, 10.0, 5).unwrap();
        assert!((mean - 0.7).abs() < 1e-12);
        assert!(half < 1e-12);
        // shifted cosine: known mean 0.3
        let u = Observable::new(0.3, alloc::vec![TrigTerm::new([1, 0], 0.5, 0.0).unwrap()]);
        let (mean, _) = estimate_chi(&flow, &u, 10_000, 200.0, 5).unwrap();
        assert!((mean - 0.3).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn lyapunov_cat_exponents() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let p = FlowPoint::new([0.37, 0.58], 0.0);
        // the initial-frame alignment transient decays like O(1/n)
        let ex = lyapunov_qr(&flow, p, 20_000.0).unwrap();
        assert!((ex[0] - lam_log()).abs() < 2e-5, "{ex:?}");
        assert!((ex[1] + lam_log()).abs() < 2e-5);

        // roof 2 halves the rates per unit flow time
        let flow2 = SuspensionFlow::cat_constant(2.0);
        let ex2 = lyapunov_qr(&flow2, p, 20_000.0).unwrap();
        assert!((ex2[0] - lam_log() / 2.0).abs() < 2e-5);
    }

    #[test]
    fn lyapunov_perturbed_sum_zero() {
        let base = BaseMap::cat_sheared(0.05).unwrap();
        let flow = SuspensionFlow::new(base, RoofFunction::constant(1.0).unwrap());
        let p = FlowPoint::new([0.123, 0.654], 0.0);
        let ex = lyapunov_qr(&flow, p, 10_000.0).unwrap();
        assert!((ex[0] + ex[1]).abs() < 1e-3, "sum {}", ex[0] + ex[1]);
        assert!((ex[0] - lam_log()).abs() < 0.05, "top {}", ex[0]);
    }

    #[test]
    fn lyapunov_frame_independence() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let p = FlowPoint::new([0.41, 0.77], 0.0);
        let e1 = lyapunov_qr(&flow, p, 1500.0).unwrap();
        let c = 0.9f64.cos();
        let s = 0.9f64.sin();
        let rot = Mat::from_rows(&[&[c, -s], &[s, c]]);
        let e2 = lyapunov_qr_frame(&flow, p, 1500.0, &rot).unwrap();
        assert!((e1[0] - e2[0]).abs() < 1e-3);
        assert!((e1[1] - e2[1]).abs() < 1e-3);
    }

    #[test]
    fn variance_degeneracy() {
        let flow = SuspensionFlow::cat_constant(1.0);
        // constant observable: exactly zero variance
        let est = variance_sigma2(&flow, &Observable::constant(0.4), 200.0, 50, 9).unwrap();
        assert!(est.sigma2.abs() < 1e-18);
        assert!(est.degenerate);

        // coboundary w∘A − w for w = cos(2π x₁): A^T maps (1,0) to (2,1)
        let u = Observable::new(
            0.0,
            alloc::vec![
                TrigTerm::new([2, 1], 1.0, 0.0).unwrap(),
                TrigTerm::new([1, 0], -1.0, 0.0).unwrap(),
            ],
        );
        let est = variance_sigma2(&flow, &u, 400.0, 200, 9).unwrap();
        assert!(est.degenerate, "sigma2 {} stderr {}", est.sigma2, est.stderr);

        // genuine positive variance
        let u = Observable::cosine([1, 0], 1.0);
        let est = variance_sigma2(&flow, &u, 400.0, 400, 9).unwrap();
        assert!(!est.degenerate);
        assert!(est.sigma2 > 0.05, "sigma2 {}", est.sigma2);
    }
}
