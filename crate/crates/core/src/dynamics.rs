//! Concrete dynamical systems: suspension flows over hyperbolic toral
//! automorphisms (optionally shear-perturbed), trigonometric-polynomial
//! observables, orbit evolution, derivative cocycles, and volume sampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::mat::{vec_norm, Mat};
use crate::math::{F64Ext, TAU};
use crate::rng;

/// Point on the 2-torus, coordinates in [0, 1).
pub type BasePoint = [f64; 2];

/// Area-preserving hyperbolic base map f = A ∘ h, where A is an integer
/// automorphism and h(x1, x2) = (x1 + (kappa/2π)·sin(2πx2), x2) is a shear.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMap {
    a: [[i64; 2]; 2],
    kappa: f64,
}

impl BaseMap {
    pub fn new(a: [[i64; 2]; 2], kappa: f64) -> Result<Self> {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() != 1 {
            return Err(CoreError::InvalidParameter("|det A| must equal 1"));
        }
        if (a[0][0] + a[1][1]).abs() <= 2 {
            return Err(CoreError::InvalidParameter("|trace A| must exceed 2"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(CoreError::InvalidParameter("kappa must be finite and >= 0"));
        }
        Ok(BaseMap { a, kappa })
    }

    /// The standard cat map [[2,1],[1,1]] with no shear.
    pub fn cat() -> Self {
        BaseMap { a: [[2, 1], [1, 1]], kappa: 0.0 }
    }

    /// Cat map composed with a shear of amplitude `kappa`.
    pub fn cat_sheared(kappa: f64) -> Result<Self> {
        BaseMap::new([[2, 1], [1, 1]], kappa)
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.a
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Integer matrix power A^n (n >= 0), in i128 to survive n up to ~20.
    pub fn matrix_power(&self, n: u32) -> [[i128; 2]; 2] {
        let mut out = [[1i128, 0], [0, 1]];
        let a = [
            [self.a[0][0] as i128, self.a[0][1] as i128],
            [self.a[1][0] as i128, self.a[1][1] as i128],
        ];
        for _ in 0..n {
            out = [
                [
                    a[0][0] * out[0][0] + a[0][1] * out[1][0],
                    a[0][0] * out[0][1] + a[0][1] * out[1][1],
                ],
                [
                    a[1][0] * out[0][0] + a[1][1] * out[1][0],
                    a[1][0] * out[0][1] + a[1][1] * out[1][1],
                ],
            ];
        }
        out
    }

    pub fn apply(&self, x: BasePoint) -> BasePoint {
        let y1 = x[0] + self.kappa / TAU * (TAU * x[1]).sin();
        let y2 = x[1];
        [
            (self.a[0][0] as f64 * y1 + self.a[0][1] as f64 * y2).frac1(),
            (self.a[1][0] as f64 * y1 + self.a[1][1] as f64 * y2).frac1(),
        ]
    }

    pub fn apply_inv(&self, x: BasePoint) -> BasePoint {
        let det = (self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]) as f64;
        // A^{-1} = adj(A)/det, integer entries since |det| = 1
        let y1 = (self.a[1][1] as f64 * x[0] - self.a[0][1] as f64 * x[1]) / det;
        let y2 = (-(self.a[1][0] as f64) * x[0] + self.a[0][0] as f64 * x[1]) / det;
        [(y1 - self.kappa / TAU * (TAU * y2).sin()).frac1(), y2.frac1()]
    }

    /// Jacobian Df(x) = A · Dh(x).
    pub fn jacobian(&self, x: BasePoint) -> Mat {
        let c = self.kappa * (TAU * x[1]).cos();
        // Dh = [[1, c], [0, 1]]
        Mat::from_rows(&[
            &[self.a[0][0] as f64, self.a[0][0] as f64 * c + self.a[0][1] as f64],
            &[self.a[1][0] as f64, self.a[1][0] as f64 * c + self.a[1][1] as f64],
        ])
    }

    /// Inverse of the Jacobian at `x` (i.e. D(f^{-1}) at f(x)).
    pub fn jacobian_inv(&self, x: BasePoint) -> Mat {
        let j = self.jacobian(x);
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        Mat::from_rows(&[
            &[j[(1, 1)] / det, -j[(0, 1)] / det],
            &[-j[(1, 0)] / det, j[(0, 0)] / det],
        ])
    }
}

/// One harmonic a·cos(2π k·x + phase) on the 2-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub k: [i32; 2],
    pub amp: f64,
    pub phase: f64,
}

impl TrigTerm {
    pub fn new(k: [i32; 2], amp: f64, phase: f64) -> Result<Self> {
        if k == [0, 0] {
            return Err(CoreError::InvalidParameter(
                "zero frequency belongs in the constant term",
            ));
        }
        Ok(TrigTerm { k, amp, phase })
    }

    #[inline]
    fn eval(&self, x: BasePoint) -> f64 {
        let angle = TAU * (self.k[0] as f64 * x[0] + self.k[1] as f64 * x[1]) + self.phase;
        self.amp * angle.cos()
    }
}

/// Roof function r(x) = r0 + Σ aₖ cos(2π k·x + φₖ), bounded away from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RoofFunction {
    r0: f64,
    terms: Vec<TrigTerm>,
}

impl RoofFunction {
    pub fn new(r0: f64, terms: Vec<TrigTerm>) -> Result<Self> {
        let osc: f64 = terms.iter().map(|t| t.amp.abs()).sum();
        if !(r0 > osc) {
            return Err(CoreError::InvalidParameter("roof requires r0 > sum of |amplitudes|"));
        }
        let roof = RoofFunction { r0, terms };
        // verification grid for positivity
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / n as f64, j as f64 / n as f64];
                if roof.eval(x) <= 0.0 {
                    return Err(CoreError::InvalidParameter("roof non-positive on grid"));
                }
            }
        }
        Ok(roof)
    }

    pub fn constant(r0: f64) -> Result<Self> {
        RoofFunction::new(r0, Vec::new())
    }

    #[inline]
    pub fn eval(&self, x: BasePoint) -> f64 {
        self.r0 + self.terms.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lower bound r0 − Σ|aₖ|, positive by construction.
    pub fn min_bound(&self) -> f64 {
        self.r0 - self.terms.iter().map(|t| t.amp.abs()).sum::<f64>()
    }

    pub fn max_bound(&self) -> f64 {
        self.r0 + self.terms.iter().map(|t| t.amp.abs()).sum::<f64>()
    }

    /// Lebesgue mean over the torus (oscillatory terms integrate to zero).
    pub fn mean(&self) -> f64 {
        self.r0
    }
}

/// Hölder observable: real trigonometric polynomial on the base torus,
/// constant along fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    c0: f64,
    terms: Vec<TrigTerm>,
    sup_norm: f64,
}

impl Observable {
    pub fn new(c0: f64, terms: Vec<TrigTerm>) -> Self {
        let sup = c0.abs() + terms.iter().map(|t| t.amp.abs()).sum::<f64>();
        Observable { c0, terms, sup_norm: sup }
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(c, Vec::new())
    }

    /// a·cos(2π k·x), no phase.
    pub fn cosine(k: [i32; 2], amp: f64) -> Self {
        Observable::new(0.0, vec![TrigTerm { k, amp, phase: 0.0 }])
    }

    #[inline]
    pub fn eval(&self, x: BasePoint) -> f64 {
        self.c0 + self.terms.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    /// Coefficient bound |c0| + Σ|aₖ| ≥ ‖u‖∞.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Lebesgue mean over the base torus.
    pub fn base_mean(&self) -> f64 {
        self.c0
    }

    /// Mean χ = ∫ u dm of the observable with respect to the normalized
    /// suspension volume: roof-weighted when the roof is non-constant.
    ///
    /// Closed form from the trig coefficients:
    /// ∫ u·r dx picks up ½·aᵤ·aᵣ·cos(φᵤ∓φᵣ) for every frequency match k = ±m.
    pub fn mean(&self, roof: &RoofFunction) -> f64 {
        let mut num = self.c0 * roof.r0();
        for tu in &self.terms {
            for tr in roof.terms() {
                if tu.k == tr.k {
                    num += 0.5 * tu.amp * tr.amp * (tu.phase - tr.phase).cos();
                } else if tu.k[0] == -tr.k[0] && tu.k[1] == -tr.k[1] {
                    num += 0.5 * tu.amp * tr.amp * (tu.phase + tr.phase).cos();
                }
            }
        }
        num / roof.r0()
    }
}

/// Point of the suspension space: base point plus fiber height s ∈ [0, r(x)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    pub x: BasePoint,
    pub s: f64,
}

impl FlowPoint {
    pub fn new(x: BasePoint, s: f64) -> Self {
        FlowPoint { x: [x[0].frac1(), x[1].frac1()], s }
    }
}

/// One inter-crossing orbit segment: the base point it sits over, the
/// flow-time spent there, and the segment's start time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x: BasePoint,
    pub len: f64,
    pub t_start: f64,
}

/// Suspension flow over `base` under `roof`; phase space
/// M = {(x, s) : 0 ≤ s < r(x)} with normalized volume (Leb ⊗ Leb)/∫r.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspensionFlow {
    pub base: BaseMap,
    pub roof: RoofFunction,
}

impl SuspensionFlow {
    pub fn new(base: BaseMap, roof: RoofFunction) -> Self {
        SuspensionFlow { base, roof }
    }

    /// Unperturbed cat suspension with constant roof.
    pub fn cat_constant(r0: f64) -> Self {
        SuspensionFlow::new(BaseMap::cat(), RoofFunction::constant(r0).unwrap())
    }

    /// Flow for time `t` (negative allowed). Fiber translation is exact
    /// between roof crossings; the base map fires at each crossing.
    pub fn evolve(&self, p: FlowPoint, t: f64) -> FlowPoint {
        let mut x = p.x;
        let mut s = p.s + t;
        if t >= 0.0 {
            loop {
                let r = self.roof.eval(x);
                if s < r {
                    break;
                }
                s -= r;
                x = self.base.apply(x);
            }
        } else {
            while s < 0.0 {
                x = self.base.apply_inv(x);
                s += self.roof.eval(x);
            }
        }
        FlowPoint { x, s }
    }

    /// Iterator over orbit segments covering [0, t_max] from `p`.
    pub fn segments(&self, p: FlowPoint, t_max: f64) -> SegmentIter<'_> {
        SegmentIter { flow: self, x: p.x, s: p.s, t: 0.0, t_max, done: t_max <= 0.0 }
    }

    /// Derivative cocycle on base-tangent directions: the ordered product
    /// of per-crossing Jacobians of f over [0, t].
    pub fn jacobian_cocycle(&self, p: FlowPoint, t: f64) -> Mat {
        if t < 0.0 {
            let q = self.evolve(p, t);
            let j = self.jacobian_cocycle(q, -t);
            let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
            return Mat::from_rows(&[
                &[j[(1, 1)] / det, -j[(0, 1)] / det],
                &[-j[(1, 0)] / det, j[(0, 0)] / det],
            ]);
        }
        let mut j = Mat::identity(2);
        let mut x = p.x;
        let mut t_cross = self.roof.eval(x) - p.s;
        while t_cross <= t {
            j = self.base.jacobian(x).mul(&j);
            x = self.base.apply(x);
            t_cross += self.roof.eval(x);
        }
        j
    }

    /// Unit vector spanning the unstable direction at base point `x`,
    /// via backward-orbit pushforward over `n_back` crossings.
    pub fn unstable_direction(&self, x: BasePoint, n_back: u32) -> Result<[f64; 2]> {
        let v = self.pushed_direction(x, n_back)?;
        let w = self.pushed_direction(x, n_back + n_back / 4 + 10)?;
        let residual = ((v[0] - w[0]).hypot(v[1] - w[1]))
            .min((v[0] + w[0]).hypot(v[1] + w[1]));
        if residual > 1e-8 {
            return Err(CoreError::NonConvergence { residual });
        }
        Ok(v)
    }

    fn pushed_direction(&self, x: BasePoint, n_back: u32) -> Result<[f64; 2]> {
        if n_back == 0 {
            return Err(CoreError::InvalidParameter("n_back must be >= 1"));
        }
        // store the backward orbit and push forward along it; recomputing
        // the forward orbit from the far past would amplify rounding at
        // the top Lyapunov rate and decorrelate from x
        let mut orbit = Vec::with_capacity(n_back as usize);
        let mut q = x;
        for _ in 0..n_back {
            q = self.base.apply_inv(q);
            orbit.push(q);
        }
        let mut v = [1.0, 0.3];
        for q in orbit.iter().rev() {
            let w = self.base.jacobian(*q).mul_vec(&v);
            let n = vec_norm(&w);
            v = [w[0] / n, w[1] / n];
        }
        Ok(canonical_sign(v))
    }

    /// Unit vector spanning the stable direction at base point `x`
    /// (backward and forward roles swapped relative to `unstable_direction`).
    pub fn stable_direction(&self, x: BasePoint, n_fwd: u32) -> Result<[f64; 2]> {
        let v = self.pulled_direction(x, n_fwd)?;
        let w = self.pulled_direction(x, n_fwd + n_fwd / 4 + 10)?;
        let residual = ((v[0] - w[0]).hypot(v[1] - w[1]))
            .min((v[0] + w[0]).hypot(v[1] + w[1]));
        if residual > 1e-8 {
            return Err(CoreError::NonConvergence { residual });
        }
        Ok(v)
    }

    fn pulled_direction(&self, x: BasePoint, n_fwd: u32) -> Result<[f64; 2]> {
        if n_fwd == 0 {
            return Err(CoreError::InvalidParameter("n_fwd must be >= 1"));
        }
        let mut orbit = Vec::with_capacity(n_fwd as usize);
        let mut q = x;
        for _ in 0..n_fwd {
            orbit.push(q);
            q = self.base.apply(q);
        }
        let mut v = [1.0, 0.3];
        for q in orbit.iter().rev() {
            let w = self.base.jacobian_inv(*q).mul_vec(&v);
            let n = vec_norm(&w);
            v = [w[0] / n, w[1] / n];
        }
        Ok(canonical_sign(v))
    }

    /// `n` volume-distributed points, deterministic per (seed, index):
    /// uniform on the base, rejection under the roof graph for the fiber.
    pub fn sample_volume(&self, seed: u64, n: usize) -> Vec<FlowPoint> {
        self.sample_volume_counted(seed, n).0
    }

    /// Same as `sample_volume` but also reports the total proposal count,
    /// so the rejection acceptance rate is n / attempts.
    pub fn sample_volume_counted(&self, seed: u64, n: usize) -> (Vec<FlowPoint>, u64) {
        let r_max = self.roof.max_bound();
        let mut attempts = 0u64;
        let pts = (0..n)
            .map(|i| {
                let mut rng = rng::stream(seed, i as u64);
                loop {
                    attempts += 1;
                    let x = [rng::uniform(&mut rng), rng::uniform(&mut rng)];
                    let h = rng::uniform(&mut rng) * r_max;
                    if h < self.roof.eval(x) {
                        return FlowPoint { x, s: h };
                    }
                }
            })
            .collect();
        (pts, attempts)
    }

    /// ∫₀ᵗ u(f_s p) ds, exact per segment for base-only observables.
    pub fn integrate_observable(&self, u: &Observable, p: FlowPoint, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let mut acc = 0.0;
        for seg in self.segments(p, t) {
            acc += u.eval(seg.x) * seg.len;
        }
        acc
    }
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0].abs() > 1e-12 { v[0] } else { v[1] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

pub struct SegmentIter<'a> {
    flow: &'a SuspensionFlow,
    x: BasePoint,
    s: f64,
    t: f64,
    t_max: f64,
    done: bool,
}

impl Iterator for SegmentIter<'_> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        if self.done {
            return None;
        }
        let remain = self.flow.roof.eval(self.x) - self.s;
        let t_start = self.t;
        if self.t + remain >= self.t_max {
            self.done = true;
            return Some(Segment { x: self.x, len: self.t_max - self.t, t_start });
        }
        let seg = Segment { x: self.x, len: remain, t_start };
        self.t += remain;
        self.s = 0.0;
        self.x = self.flow.base.apply(self.x);
        Some(seg)
    }
}
