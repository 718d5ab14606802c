//! Regularity functions D_ε (with smallest argmax time T_ε) and R_ε,
//! plus the §3-style inequality checks: the downgrade lemma, the product
//! bound, the exponential-integral identity, and the R ≤ C·D chain.
//!
//! For base-only observables the running integral g(t) = ∫₀ᵗ (u − χ − ε)
//! is piecewise linear with breakpoints at roof crossings, so suprema are
//! exact breakpoint scans. A synthetic path (explicit integrand of s)
//! exists solely to enable closed-form oracles.

use alloc::vec::Vec;

use crate::dynamics::{FlowPoint, Observable, SuspensionFlow};
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // resolves libm methods in no_std builds
use crate::math::F64Ext;
use crate::perron::unstable_log_path;

/// Tie tolerance for the smallest-argmax rule.
const TIE: f64 = 1e-12;
/// A record is truncated when the running integrand is this close to its
/// maximum at the horizon.
const TRUNC: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRecord {
    pub point: FlowPoint,
    pub epsilon: f64,
    pub t_max: f64,
    /// log D_ε (or log R_ε), always ≥ 0.
    pub log_d: f64,
    /// Smallest time attaining the supremum.
    pub t_eps: f64,
    /// Set when the supremum may sit beyond the horizon.
    pub truncated: bool,
}

/// Breakpoint scan of a piecewise-linear g with slopes `slope[i]` over
/// lengths `len[i]`; returns (max, smallest argmax, final value).
pub(crate) fn scan_linear(slopes: &[f64], lens: &[f64]) -> (f64, f64, f64) {
    let mut g = 0.0;
    let mut t = 0.0;
    let mut best = 0.0f64;
    let mut t_best = 0.0f64;
    for (&sl, &ln) in slopes.iter().zip(lens) {
        g += sl * ln;
        t += ln;
        if g > best + TIE {
            best = g;
            t_best = t;
        }
    }
    (best, t_best, g)
}

/// D_ε from eq. D: sup over [0, T_max] of ∫₀ᵗ (u − χ − ε), log domain.
/// χ is the closed-form volume mean of `u`.
pub fn regularity_d(
    flow: &SuspensionFlow,
    u: &Observable,
    p: FlowPoint,
    eps: f64,
    t_max: f64,
) -> Result<RegularityRecord> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidParameter("eps must be positive"));
    }
    if !(t_max > 0.0) {
        return Err(CoreError::InvalidParameter("t_max must be positive"));
    }
    let chi = u.mean(&flow.roof);
    if eps >= u.sup_norm() - chi {
        // supremum attained at t = 0: every slope is ≤ 0
        return Ok(RegularityRecord {
            point: p,
            epsilon: eps,
            t_max,
            log_d: 0.0,
            t_eps: 0.0,
            truncated: false,
        });
    }
    let mut slopes = Vec::new();
    let mut lens = Vec::new();
    for seg in flow.segments(p, t_max) {
        slopes.push(u.eval(seg.x) - chi - eps);
        lens.push(seg.len);
    }
    let (best, t_best, g_end) = scan_linear(&slopes, &lens);
    Ok(RegularityRecord {
        point: p,
        epsilon: eps,
        t_max,
        log_d: best,
        t_eps: t_best,
        truncated: g_end >= best - TRUNC,
    })
}

/// R_ε for the unstable bundle: sup of log‖T^E f_t‖ − (χ+ε)t in the
/// density-integrated form, breakpoints at roof crossings. `chi` is the
/// bundle's QR exponent per unit flow-time.
pub fn regularity_r(
    flow: &SuspensionFlow,
    p: FlowPoint,
    eps: f64,
    chi: f64,
    t_max: f64,
    n_back: u32,
) -> Result<RegularityRecord> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidParameter("eps must be positive"));
    }
    let path = unstable_log_path(flow, p, t_max, n_back)?;
    let slopes: Vec<f64> = path.dens.iter().map(|d| d - chi - eps).collect();
    let mut lens = path.lens.clone();
    // the tail after the last crossing has zero growth density
    let covered: f64 = lens.iter().sum();
    let mut slopes = slopes;
    if t_max > covered {
        slopes.push(-(chi + eps));
        lens.push(t_max - covered);
    }
    let (best, t_best, g_end) = scan_linear(&slopes, &lens);
    Ok(RegularityRecord {
        point: p,
        epsilon: eps,
        t_max,
        log_d: best,
        t_eps: t_best,
        truncated: g_end >= best - TRUNC,
    })
}

/// Fraction of truncated records; error when above 1%.
pub fn aggregate_truncation(records: &[RegularityRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(CoreError::InvalidParameter("no records"));
    }
    let frac = records.iter().filter(|r| r.truncated).count() as f64 / records.len() as f64;
    if frac > 0.01 {
        return Err(CoreError::HorizonTooSmall { truncated_fraction: frac });
    }
    Ok(frac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Lemma down: log D_η ≤ log D_ε + (ε−η)·T_η for 0 < η < ε.
pub fn check_down(
    flow: &SuspensionFlow,
    u: &Observable,
    p: FlowPoint,
    eta: f64,
    eps: f64,
    t_max: f64,
) -> Result<BoundCheck> {
    if !(0.0 < eta && eta < eps) {
        return Err(CoreError::InvalidParameter("need 0 < eta < eps"));
    }
    let r_eta = regularity_d(flow, u, p, eta, t_max)?;
    let r_eps = regularity_d(flow, u, p, eps, t_max)?;
    if r_eta.truncated || r_eps.truncated {
        return Err(CoreError::SkippedTruncated);
    }
    let lhs = r_eta.log_d;
    let rhs = r_eps.log_d + (eps - eta) * r_eta.t_eps;
    Ok(BoundCheck { lhs, rhs, pass: lhs <= rhs + 1e-9 })
}

/// Product bound: log D_ε ≤ δ·Σᵢ T_{ε_i} for the uniform partition
/// ε = ε₀ < … < ε_N = ‖u‖∞ − χ with gap δ.
pub fn product_bound(
    flow: &SuspensionFlow,
    u: &Observable,
    p: FlowPoint,
    eps: f64,
    n_partition: usize,
    t_max: f64,
) -> Result<BoundCheck> {
    if n_partition == 0 {
        return Err(CoreError::InvalidParameter("partition must be nonempty"));
    }
    let chi = u.mean(&flow.roof);
    let top = u.sup_norm() - chi;
    if !(eps < top) {
        // D_ε = 1 and the sum is empty-compatible: both sides 0
        return Ok(BoundCheck { lhs: 0.0, rhs: 0.0, pass: true });
    }
    let delta = (top - eps) / n_partition as f64;
    let base = regularity_d(flow, u, p, eps, t_max)?;
    if base.truncated {
        return Err(CoreError::SkippedTruncated);
    }
    let mut t_sum = 0.0;
    for i in 0..n_partition {
        let eps_i = eps + delta * i as f64;
        let r = regularity_d(flow, u, p, eps_i, t_max)?;
        if r.truncated {
            return Err(CoreError::SkippedTruncated);
        }
        t_sum += r.t_eps;
    }
    let rhs = delta * t_sum;
    Ok(BoundCheck { lhs: base.log_d, rhs, pass: base.log_d <= rhs + 1e-9 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemarkCheck {
    pub log_d: f64,
    /// Trapezoid quadrature of ∫ T_η dη over [ε, ‖u‖∞ − χ].
    pub quad: f64,
    pub deviation: f64,
    /// Half-width of the left/right Riemann bracket (T_η is monotone
    /// non-increasing, so this is a rigorous envelope).
    pub envelope: f64,
    pub pass: bool,
}

/// §3 Remark identity: D_ε = exp{∫_ε^{‖u‖∞−χ} T_η dη}.
pub fn remark_identity(
    flow: &SuspensionFlow,
    u: &Observable,
    p: FlowPoint,
    eps: f64,
    n_grid: usize,
    t_max: f64,
) -> Result<RemarkCheck> {
    if n_grid < 2 {
        return Err(CoreError::InvalidParameter("grid needs at least 2 nodes"));
    }
    let chi = u.mean(&flow.roof);
    let top = u.sup_norm() - chi;
    if !(eps < top) {
        return Ok(RemarkCheck { log_d: 0.0, quad: 0.0, deviation: 0.0, envelope: 0.0, pass: true });
    }
    let base = regularity_d(flow, u, p, eps, t_max)?;
    if base.truncated {
        return Err(CoreError::SkippedTruncated);
    }
    let h = (top - eps) / (n_grid - 1) as f64;
    let mut ts = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let eta = (eps + h * i as f64).min(top - TIE).max(eps);
        let r = regularity_d(flow, u, p, eta, t_max)?;
        if r.truncated {
            return Err(CoreError::SkippedTruncated);
        }
        ts.push(r.t_eps);
    }
    let mut quad = 0.0;
    let mut left = 0.0;
    let mut right = 0.0;
    for w in ts.windows(2) {
        quad += 0.5 * h * (w[0] + w[1]);
        left += h * w[0];
        right += h * w[1];
    }
    let envelope = 0.5 * (left - right).abs() + 1e-9;
    let deviation = (base.log_d - quad).abs();
    Ok(RemarkCheck { log_d: base.log_d, quad, deviation, envelope, pass: deviation <= envelope })
}

/// Theorem C chain: R_ε ≤ C_δ · D_{ε−δ}, with D built from the Theorem B
/// density u along the same orbit.
pub fn theorem_c_chain(
    flow: &SuspensionFlow,
    p: FlowPoint,
    eps: f64,
    delta: f64,
    chi: f64,
    c_delta: f64,
    t_max: f64,
    n_back: u32,
) -> Result<BoundCheck> {
    if !(0.0 < delta && delta < eps) {
        return Err(CoreError::InvalidParameter("need 0 < delta < eps"));
    }
    let r = regularity_r(flow, p, eps, chi, t_max, n_back)?;
    if r.truncated {
        return Err(CoreError::SkippedTruncated);
    }
    // D_{ε−δ} from u(f_s x) = |density|
    let path = unstable_log_path(flow, p, t_max, n_back)?;
    let slopes: Vec<f64> = path.dens.iter().map(|d| d.abs() - chi - (eps - delta)).collect();
    let (log_d, _, g_end) = scan_linear(&slopes, &path.lens);
    if g_end >= log_d - TRUNC {
        return Err(CoreError::SkippedTruncated);
    }
    let rhs = c_delta.ln() + log_d;
    Ok(BoundCheck { lhs: r.log_d, rhs, pass: r.log_d <= rhs + 1e-9 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub log_d: f64,
    pub t_eps: f64,
    pub truncated: bool,
}

/// Test hook: regularity of a cocycle with explicit integrand
/// u(f_s x) = u(s). Quadrature is composite Simpson with critical-point
/// refinement by bisection on the shifted integrand.
pub fn regularity_synthetic(
    u: &dyn Fn(f64) -> f64,
    chi: f64,
    eps: f64,
    t_max: f64,
) -> SyntheticRecord {
    let h = |s: f64| u(s) - chi - eps;
    let steps = ((t_max / 5e-4) as usize).max(16);
    let dt = t_max / steps as f64;
    let simpson = |a: f64, b: f64| (b - a) / 6.0 * (h(a) + 4.0 * h(0.5 * (a + b)) + h(b));

    let mut g = 0.0;
    let mut best = 0.0f64;
    let mut t_best = 0.0f64;
    let consider = |t: f64, g: f64, best: &mut f64, t_best: &mut f64| {
        if g > *best + TIE {
            *best = g;
            *t_best = t;
        }
    };
    let mut t = 0.0;
    for _ in 0..steps {
        let t1 = t + dt;
        // refine a + → − sign change: interior local max of g
        let (ha, hb) = (h(t), h(t1));
        if ha > 0.0 && hb < 0.0 {
            let (mut lo, mut hi) = (t, t1);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tc = 0.5 * (lo + hi);
            consider(tc, g + simpson(t, tc), &mut best, &mut t_best);
        }
        g += simpson(t, t1);
        t = t1;
        consider(t, g, &mut best, &mut t_best);
    }
    SyntheticRecord { log_d: best, t_eps: t_best, truncated: g >= best - TRUNC }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{lyapunov_qr, random_point};
    use crate::dynamics::{BaseMap, RoofFunction, TrigTerm};
    use core::f64::consts::PI;

    fn lam_log() -> f64 {
        ((3.0 + 5.0f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn big_eps_gives_unit_d() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::new(0.1, alloc::vec![TrigTerm::new([1, 0], 0.5, 0.0).unwrap()]);
        // chi = 0.1, sup 0.6 → threshold 0.5
        let p = FlowPoint::new([0.3, 0.4], 0.2);
        let r = regularity_d(&flow, &u, p, 0.5, 100.0).unwrap();
        assert_eq!(r.log_d, 0.0);
        assert_eq!(r.t_eps, 0.0);
        let r = regularity_d(&flow, &u, p, 0.7, 100.0).unwrap();
        assert_eq!(r.log_d, 0.0);
    }

    #[test]
    fn constant_u_gives_unit_d() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::constant(0.4);
        let p = FlowPoint::new([0.3, 0.4], 0.0);
        for eps in [0.01, 0.1, 1.0] {
            let r = regularity_d(&flow, &u, p, eps, 50.0).unwrap();
            assert_eq!(r.log_d, 0.0);
        }
    }

    #[test]
    fn synthetic_cosine_oracle() {
        let rec = regularity_synthetic(&|s| s.cos(), 0.0, 0.5, 10.0);
        let t_expect = (0.5f64).acos();
        assert!((t_expect - PI / 3.0).abs() < 1e-12);
        assert!((rec.t_eps - t_expect).abs() < 1e-8, "t_eps {}", rec.t_eps);
        let log_d_expect = 0.75f64.sqrt() - 0.5 * PI / 3.0;
        assert!((rec.log_d - log_d_expect).abs() < 1e-8, "log_d {}", rec.log_d);
        assert!((rec.log_d.exp() - 1.408357).abs() < 1e-5);
        assert!(!rec.truncated);
    }

    #[test]
    fn synthetic_down_lemma_closed_form() {
        let (eta, eps) = (0.3, 0.5);
        let r_eta = regularity_synthetic(&|s| s.cos(), 0.0, eta, 10.0);
        let r_eps = regularity_synthetic(&|s| s.cos(), 0.0, eps, 10.0);
        let closed = |e: f64| (1.0 - e * e).sqrt() - e * e.acos();
        assert!((r_eta.log_d - closed(eta)).abs() < 1e-8);
        assert!((r_eta.t_eps - eta.acos()).abs() < 1e-8);
        let lhs = r_eta.log_d;
        let rhs = r_eps.log_d + (eps - eta) * r_eta.t_eps;
        assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn synthetic_remark_closed_form() {
        // ∫_{0.5}^{1} arccos(η) dη = √0.75 − 0.5·π/3 via η·arccos η − √(1−η²)
        let anti = |e: f64| e * e.acos() - (1.0 - e * e).sqrt();
        let integral = anti(1.0) - anti(0.5);
        let rec = regularity_synthetic(&|s| s.cos(), 0.0, 0.5, 10.0);
        assert!((integral - rec.log_d).abs() < 1e-8);

        // quadrature over T_η converges to log D as the grid refines
        let n = 400;
        let mut quad = 0.0;
        let h = 0.5 / n as f64;
        for i in 0..n {
            let e0 = 0.5 + h * i as f64;
            let t0 = regularity_synthetic(&|s| s.cos(), 0.0, e0, 10.0).t_eps;
            let t1 = regularity_synthetic(&|s| s.cos(), 0.0, (e0 + h).min(1.0 - 1e-9), 10.0).t_eps;
            quad += 0.5 * h * (t0 + t1);
        }
        assert!((quad - rec.log_d).abs() < 5e-5, "quad {} log_d {}", quad, rec.log_d);
    }

    #[test]
    fn monotone_in_eps() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        for i in 0..20 {
            let p = random_point(&flow, 31, i);
            let mut prev_d = f64::INFINITY;
            let mut prev_t = f64::INFINITY;
            for eps in [0.05, 0.1, 0.2, 0.3, 0.45] {
                let r = regularity_d(&flow, &u, p, eps, 400.0).unwrap();
                assert!(r.log_d <= prev_d + TIE);
                assert!(r.t_eps <= prev_t + TIE);
                assert!(r.log_d >= 0.0);
                assert!(r.log_d <= (u.sup_norm() - 0.0 - eps) * r.t_eps + 1e-9);
                prev_d = r.log_d;
                prev_t = r.t_eps;
            }
        }
    }

    #[test]
    fn down_lemma_randomized() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        let mut skipped = 0;
        for i in 0..200 {
            let p = random_point(&flow, 32, i);
            match check_down(&flow, &u, p, 0.1, 0.2, 600.0) {
                Ok(chk) => assert!(chk.pass, "point {i}: {} > {}", chk.lhs, chk.rhs),
                Err(CoreError::SkippedTruncated) => skipped += 1,
                Err(e) => panic!("{e:?}"),
            }
        }
        assert!(skipped <= 4, "too many truncated: {skipped}");
    }

    #[test]
    fn product_bound_examples() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        let p = random_point(&flow, 33, 0);
        // N=1 reduces to the sketch bound
        let chk = product_bound(&flow, &u, p, 0.2, 1, 600.0).unwrap();
        assert!(chk.pass);
        let r = regularity_d(&flow, &u, p, 0.2, 600.0).unwrap();
        assert!((chk.rhs - (0.5 - 0.2) * r.t_eps).abs() < 1e-12);
        // larger partitions tighten the bound
        let chk8 = product_bound(&flow, &u, p, 0.2, 8, 600.0).unwrap();
        assert!(chk8.pass);
        assert!(chk8.rhs <= chk.rhs + 1e-9);
        // constant observable: both sides zero
        let chk = product_bound(&flow, &Observable::constant(0.3), p, 0.1, 4, 100.0).unwrap();
        assert_eq!((chk.lhs, chk.rhs), (0.0, 0.0));
    }

    #[test]
    fn remark_identity_flow_points() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        let mut checked = 0;
        for i in 0..60 {
            let p = random_point(&flow, 34, i);
            match remark_identity(&flow, &u, p, 0.2, 40, 600.0) {
                Ok(chk) => {
                    assert!(chk.pass, "point {i}: dev {} env {}", chk.deviation, chk.envelope);
                    checked += 1;
                }
                Err(CoreError::SkippedTruncated) => {}
                Err(e) => panic!("{e:?}"),
            }
        }
        assert!(checked >= 50, "only {checked} checked");
    }

    #[test]
    fn r_is_one_for_conformal() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let chi = lam_log();
        for i in 0..10 {
            let p = random_point(&flow, 35, i);
            for eps in [0.1, 0.5] {
                let r = regularity_r(&flow, p, eps, chi, 300.0, 60).unwrap();
                assert!(r.log_d.abs() < 1e-9, "log_R {}", r.log_d);
                assert!(!r.truncated);
            }
        }
    }

    #[test]
    fn r_monotone_and_finite_perturbed() {
        let base = BaseMap::cat_sheared(0.05).unwrap();
        let flow = SuspensionFlow::new(base, RoofFunction::constant(1.0).unwrap());
        let p = FlowPoint::new([0.37, 0.21], 0.0);
        let chi = lyapunov_qr(&flow, p, 5000.0).unwrap()[0];
        let r1 = regularity_r(&flow, p, 0.1, chi, 500.0, 60).unwrap();
        let r2 = regularity_r(&flow, p, 0.3, chi, 500.0, 60).unwrap();
        assert!(r1.log_d >= 0.0 && r1.log_d.is_finite());
        assert!(r2.log_d <= r1.log_d + TIE);
        assert!(!r2.truncated);
    }

    #[test]
    fn theorem_c_random_points() {
        let base = BaseMap::cat_sheared(0.05).unwrap();
        let flow = SuspensionFlow::new(base, RoofFunction::constant(1.0).unwrap());
        let chi = lyapunov_qr(&flow, FlowPoint::new([0.37, 0.21], 0.0), 5000.0).unwrap()[0];
        let mut checked = 0;
        for i in 0..50 {
            let p = random_point(&flow, 36, i);
            match theorem_c_chain(&flow, p, 0.3, 0.1, chi, 1.0, 500.0, 60) {
                Ok(chk) => {
                    assert!(chk.pass, "point {i}: {} > {}", chk.lhs, chk.rhs);
                    checked += 1;
                }
                Err(CoreError::SkippedTruncated) => {}
                Err(e) => panic!("{e:?}"),
            }
        }
        assert!(checked >= 40);
        // delta → eps⁻ stress
        let p = random_point(&flow, 36, 0);
        if let Ok(chk) = theorem_c_chain(&flow, p, 0.3, 0.29, chi, 1.0, 500.0, 60) {
            assert!(chk.pass);
        }
    }

    #[test]
    fn truncation_aggregation() {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        let mut recs = Vec::new();
        for i in 0..100 {
            let p = random_point(&flow, 37, i);
            recs.push(regularity_d(&flow, &u, p, 0.2, 600.0).unwrap());
        }
        match aggregate_truncation(&recs) {
            Ok(frac) => assert!(frac <= 0.01),
            Err(CoreError::HorizonTooSmall { truncated_fraction }) => {
                panic!("horizon too small: {truncated_fraction}")
            }
            Err(e) => panic!("{e:?}"),
        }
        // tiny horizon: everything truncated
        let recs: Vec<_> = (0..20)
            .map(|i| {
                let p = random_point(&flow, 37, i);
                regularity_d(&flow, &u, p, 0.01, 2.0).unwrap()
            })
            .collect();
        assert!(matches!(
            aggregate_truncation(&recs),
            Err(CoreError::HorizonTooSmall { .. })
        ));
    }
}
