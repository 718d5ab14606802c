//! End-to-end acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines;
//! any failing criterion fails the single test at the end with the full
//! list of violations.

use std::fmt::Write as _;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oseledets_core::cocycle::{lyapunov_qr, random_point, variance_sigma2};
use oseledets_core::deltanorm::{
    gronwall_certificate, spectral_abscissa, theoremb_certificate, DeltaNorm,
};
use oseledets_core::dynamics::{
    BaseMap, FlowPoint, Observable, RoofFunction, SuspensionFlow,
};
use oseledets_core::mat::Mat;
use oseledets_core::perron::triangularize;
use oseledets_core::regularity::{
    check_down, product_bound, regularity_synthetic, theorem_c_chain,
};
use oseledets_core::smoothing::{case2_reduction_check, smooth_majorant, GridFunction};
use oseledets_core::thermo::{beta_curve, beta_mc, fixed_points, legendre, pressure_po};
use oseledets_core::CoreError;

use oseledets_lab::hill::hill_tail_index;
use oseledets_lab::runner::{audit_random_system, regularity_records, t_eps_tail_slope};

const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];
const SEED: u64 = 17;
/// Pinned seed for the Monte Carlo pressure oracle: the sup-norm agreement
/// budget in criterion 8 is about two Monte Carlo standard deviations at
/// t = +-2, so the draw is pinned like every other stream in the suite.
const MC_SEED: u64 = 2;

fn lam_log() -> f64 {
    ((3.0 + 5.0f64.sqrt()) / 2.0).ln()
}

fn cat_flow() -> SuspensionFlow {
    SuspensionFlow::cat_constant(1.0)
}

fn test_observable() -> Observable {
    Observable::cosine([1, 0], 0.5)
}

/// Criterion 1: closed-form synthetic regularity oracle and Remark identity.
fn criterion_1() -> Result<(), String> {
    let u = |s: f64| s.cos();
    let rec = regularity_synthetic(&u, 0.0, 0.5, 8.0);
    let d_oracle = 0.75f64.sqrt() - std::f64::consts::PI / 6.0;
    if (rec.log_d - d_oracle).abs() > 1e-6 {
        return Err(format!("log D_0.5 {} vs oracle {d_oracle}", rec.log_d));
    }
    let t_oracle = std::f64::consts::PI / 3.0;
    if (rec.t_eps - t_oracle).abs() > 1e-6 {
        return Err(format!("T_0.5 {} vs oracle {t_oracle}", rec.t_eps));
    }
    // Remark identity log D_eps = int_eps^1 T_eta d eta against the
    // monotone Riemann envelope on 10^3 nodes
    for &eps in &[0.2, 0.5, 0.8] {
        let base = regularity_synthetic(&u, 0.0, eps, 8.0);
        let n_grid = 1000usize;
        let top = 1.0;
        let h = (top - eps) / (n_grid - 1) as f64;
        let ts: Vec<f64> = (0..n_grid)
            .map(|i| regularity_synthetic(&u, 0.0, (eps + h * i as f64).min(top), 8.0).t_eps)
            .collect();
        let mut quad = 0.0;
        let mut left = 0.0;
        let mut right = 0.0;
        for w in ts.windows(2) {
            quad += 0.5 * h * (w[0] + w[1]);
            left += h * w[0];
            right += h * w[1];
        }
        let dev = (base.log_d - quad).abs();
        let envelope = 0.5 * (left - right).abs() + 1e-9;
        if dev > envelope || dev > 1e-4 {
            return Err(format!("eps {eps}: deviation {dev} envelope {envelope}"));
        }
    }
    Ok(())
}

/// Criterion 2: unperturbed cat suspension exponents, and halving under
/// roof = 2.
fn criterion_2() -> Result<(), String> {
    let p = FlowPoint::new([0.37, 0.21], 0.0);
    let exps = lyapunov_qr(&cat_flow(), p, 1e4).map_err(|e| e.to_string())?;
    let lam = lam_log();
    if (exps[0] - lam).abs() > 1e-3 || (exps[1] + lam).abs() > 1e-3 {
        return Err(format!("exponents {exps:?} vs +-{lam}"));
    }
    let slow = SuspensionFlow::cat_constant(2.0);
    let exps2 = lyapunov_qr(&slow, p, 1e4).map_err(|e| e.to_string())?;
    if (exps2[0] - lam / 2.0).abs() > 1e-3 || (exps2[1] + lam / 2.0).abs() > 1e-3 {
        return Err(format!("roof=2 exponents {exps2:?} vs +-{}", lam / 2.0));
    }
    Ok(())
}

/// Criterion 3: periodic-orbit pressure at phi = 0 and exact fixed-point
/// counts.
fn criterion_3() -> Result<(), String> {
    let rep = pressure_po(&Observable::constant(0.0), CAT, 12).map_err(|e| e.to_string())?;
    if (rep.value - lam_log()).abs() > 1e-4 {
        return Err(format!("pressure {} vs {}", rep.value, lam_log()));
    }
    for (n, want) in [(1u32, 1usize), (2, 5), (3, 16), (4, 45)] {
        let got = fixed_points(CAT, n).map_err(|e| e.to_string())?.len();
        if got != want {
            return Err(format!("Fix(A^{n}) count {got} vs {want}"));
        }
    }
    Ok(())
}

/// Criterion 4: Perron lemma invariants on 50 random smooth systems.
fn criterion_4() -> Result<(), String> {
    let mut violations = 0usize;
    let mut first = String::new();
    for i in 0..50u64 {
        let a = audit_random_system(SEED, i, 5, 10.0).map_err(|e| e.to_string())?;
        if !a.pass {
            violations += 1;
            if first.is_empty() {
                first = format!("{a:?}");
            }
        }
    }
    if violations > 0 {
        return Err(format!("{violations} of 50 systems failed; first: {first}"));
    }
    Ok(())
}

/// Criterion 5: delta-norm lemma on random triangular matrices plus the
/// k = 2 equality witness.
fn criterion_5() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut draw = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    for &k in &[2usize, 3, 4, 5] {
        for &beta in &[1.0f64, 10.0] {
            for &delta in &[0.1f64, 0.5] {
                let dn = DeltaNorm::new(k, beta, delta).map_err(|e| e.to_string())?;
                for trial in 0..10_000usize {
                    let b = Mat::from_fn(k, |i, j| {
                        if j < i {
                            0.0
                        } else if j == i {
                            beta * (2.0 * draw() - 1.0)
                        } else {
                            beta * (2.0 * draw() - 1.0)
                        }
                    });
                    let n = dn.op_norm(&b).map_err(|e| e.to_string())?;
                    let bound = spectral_abscissa(&b) + delta;
                    if n > bound + 1e-12 {
                        return Err(format!(
                            "k {k} beta {beta} delta {delta} trial {trial}: {n} > {bound}"
                        ));
                    }
                }
            }
        }
    }
    let dn = DeltaNorm::new(2, 10.0, 0.5).map_err(|e| e.to_string())?;
    let b = Mat::from_rows(&[&[1.0, 10.0], &[0.0, -1.0]]);
    let n = dn.op_norm(&b).map_err(|e| e.to_string())?;
    if (n - 1.5).abs() > 1e-12 {
        return Err(format!("equality witness {n} vs 1.5"));
    }
    Ok(())
}

/// Criterion 6: Gronwall certificates and the Theorem B growth bound for
/// the unperturbed and sheared suspensions.
fn criterion_6() -> Result<(), String> {
    // Gronwall audit over random smooth systems
    for i in 0..10u64 {
        let (sys, k, alpha) = oseledets_lab::runner::random_system(SEED, i, 5);
        let steps = 200usize;
        let grid: Vec<f64> = (0..=steps).map(|j| j as f64 * 10.0 / steps as f64).collect();
        let traj = triangularize(&sys, &Mat::identity(k), &grid).map_err(|e| e.to_string())?;
        let dn = DeltaNorm::new(k, (2.0 * alpha).max(1.0), 0.05).map_err(|e| e.to_string())?;
        let cert = gronwall_certificate(&traj, &dn, 10.0).map_err(|e| e.to_string())?;
        if !cert.pass {
            return Err(format!("gronwall system {i}: lhs {} rhs {}", cert.lhs, cert.rhs_log));
        }
    }
    let t_grid: Vec<f64> = (1..=8).map(|i| 120.0 * i as f64 / 8.0).collect();
    // kappa = 0: the unstable bundle is exactly conformal, C_hat = 1
    let rep0 = theoremb_certificate(&cat_flow(), 0.05, 200, SEED, &t_grid, 40)
        .map_err(|e| e.to_string())?;
    if (rep0.c_hat - 1.0).abs() > 1e-9 {
        return Err(format!("kappa=0 C_hat {} vs 1", rep0.c_hat));
    }
    // kappa = 0.05: mean(u) tracks the QR exponent; C_hat settles
    let base = BaseMap::cat_sheared(0.05).map_err(|e| e.to_string())?;
    let flow = SuspensionFlow::new(base, RoofFunction::constant(1.0).map_err(|e| e.to_string())?);
    let rep = theoremb_certificate(&flow, 0.05, 200, SEED, &t_grid, 40)
        .map_err(|e| e.to_string())?;
    let chi_qr = lyapunov_qr(&flow, random_point(&flow, SEED, u64::MAX), 20_000.0)
        .map_err(|e| e.to_string())?[0];
    if (rep.u_mean - chi_qr).abs() > 1e-2 {
        return Err(format!("u_mean {} vs chi_QR {chi_qr}", rep.u_mean));
    }
    let half = rep.c_by_horizon.len() / 2;
    let tail = &rep.c_by_horizon[half..];
    if !tail.windows(2).all(|w| w[1] <= w[0] + 1e-9) {
        return Err(format!("C_hat not settling: {:?}", rep.c_by_horizon));
    }
    Ok(())
}

/// Criterion 7: inequality audits with zero violations over >= 10^3 points
/// each.
fn criterion_7() -> Result<(), String> {
    let flow = cat_flow();
    let u = test_observable();
    let n = 1000u64;

    let mut checked = 0usize;
    for i in 0..n {
        let p = random_point(&flow, SEED ^ 0xd01, i);
        match check_down(&flow, &u, p, 0.1, 0.2, 600.0) {
            Ok(chk) if chk.pass => checked += 1,
            Ok(chk) => return Err(format!("down point {i}: {} > {}", chk.lhs, chk.rhs)),
            Err(CoreError::SkippedTruncated) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    if checked < 950 {
        return Err(format!("down lemma: only {checked} of {n} untruncated"));
    }

    checked = 0;
    for i in 0..n {
        let p = random_point(&flow, SEED ^ 0xd02, i);
        match product_bound(&flow, &u, p, 0.2, 4, 600.0) {
            Ok(chk) if chk.pass => checked += 1,
            Ok(chk) => return Err(format!("product point {i}: {} > {}", chk.lhs, chk.rhs)),
            Err(CoreError::SkippedTruncated) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    if checked < 950 {
        return Err(format!("product bound: only {checked} of {n} untruncated"));
    }

    let g = GridFunction::from_fn(128, |x| if x[0] < 0.5 { 1.0 } else { 0.0 })
        .map_err(|e| e.to_string())?;
    let rep = case2_reduction_check(&flow, &g, 0.05, 0.25, 1000, 120.0, SEED ^ 0xd03)
        .map_err(|e| e.to_string())?;
    if !rep.pass || rep.checked < 950 {
        return Err(format!("case-2: {rep:?}"));
    }

    let base = BaseMap::cat_sheared(0.05).map_err(|e| e.to_string())?;
    let sheared =
        SuspensionFlow::new(base, RoofFunction::constant(1.0).map_err(|e| e.to_string())?);
    let chi = lyapunov_qr(&sheared, FlowPoint::new([0.37, 0.21], 0.0), 5000.0)
        .map_err(|e| e.to_string())?[0];
    checked = 0;
    for i in 0..n {
        let p = random_point(&sheared, SEED ^ 0xd04, i);
        match theorem_c_chain(&sheared, p, 0.3, 0.1, chi, 1.0, 500.0, 60) {
            Ok(chk) if chk.pass => checked += 1,
            Ok(chk) => return Err(format!("chain point {i}: {} > {}", chk.lhs, chk.rhs)),
            Err(CoreError::SkippedTruncated) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    if checked < 950 {
        return Err(format!("theorem C chain: only {checked} of {n} untruncated"));
    }
    Ok(())
}

/// Shared entropy profile for criteria 8 and 9: periodic-orbit pressure
/// curve wide enough to cover chi + 0.25 in the slope domain.
fn entropy_profile() -> Result<oseledets_core::thermo::EntropyProfile, String> {
    let flow = cat_flow();
    let u = test_observable();
    let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
    let po = beta_curve(&u, &flow, &grid, 10).map_err(|e| e.to_string())?;
    legendre(&po).map_err(|e| e.to_string())
}

/// Criterion 8: entropy profile shape and two-oracle beta agreement.
fn criterion_8(profile: &oseledets_core::thermo::EntropyProfile) -> Result<(), String> {
    let flow = cat_flow();
    let u = test_observable();
    let h_chi = profile.h_at(profile.chi);
    if !(h_chi.abs() <= 1e-3) {
        return Err(format!("H(chi) = {h_chi}"));
    }
    // convexity: divided differences of H non-decreasing
    let mut prev = f64::NEG_INFINITY;
    for w in profile.a_grid.windows(2).zip(profile.h.windows(2)) {
        let (aw, hw) = w;
        let slope = (hw[1] - hw[0]) / (aw[1] - aw[0]);
        if slope < prev - 1e-8 {
            return Err(format!("H not convex: slope {slope} after {prev}"));
        }
        prev = slope;
    }
    let var = variance_sigma2(&flow, &u, 400.0, 2000, SEED).map_err(|e| e.to_string())?;
    let prod = profile.curvature_at_chi() * var.sigma2;
    if (prod - 1.0).abs() > 0.15 {
        return Err(format!(
            "H''(chi)*sigma2 = {prod} (H'' {}, sigma2 {})",
            profile.curvature_at_chi(),
            var.sigma2
        ));
    }
    // two-oracle agreement on t in [-2, 2], N = 1e5, T = 50
    let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
    let po = beta_curve(&u, &flow, &grid, 10).map_err(|e| e.to_string())?;
    let mc = beta_mc(&u, &flow, &grid, 50.0, 100_000, MC_SEED).map_err(|e| e.to_string())?;
    let sup = po
        .beta
        .iter()
        .zip(&mc.beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if sup > 0.02 {
        return Err(format!("beta oracle sup deviation {sup}"));
    }
    Ok(())
}

/// Criterion 9: large-deviation tail of T_eps against the entropy rate.
fn criterion_9(profile: &oseledets_core::thermo::EntropyProfile) -> Result<(), String> {
    let flow = cat_flow();
    let u = test_observable();
    let eps = 0.25;
    let h = profile.h_at(profile.chi + eps);
    if !h.is_finite() {
        return Err(format!("H(chi+eps) unresolved, domain {:?}", profile.gamma_domain));
    }
    let records = regularity_records(&flow, &u, eps, 100_000, 100.0, SEED, 4)
        .map_err(|e| e.to_string())?;
    let truncated = records.iter().filter(|r| r.truncated).count();
    if truncated > 100 {
        return Err(format!("{truncated} truncated records"));
    }
    let slope = t_eps_tail_slope(&records, &[10.0, 20.0, 30.0, 40.0]);
    if slope < 0.7 * h {
        return Err(format!("tail slope {slope} below 0.7*H = {}", 0.7 * h));
    }
    let t_vals: Vec<f64> = records.iter().map(|r| r.t_eps.exp()).collect();
    let est = hill_tail_index(&t_vals, 1000, 200, SEED).map_err(|e| e.to_string())?;
    if est.p_hat < 0.7 * h {
        return Err(format!("Hill p_hat {} below 0.7*H = {}", est.p_hat, 0.7 * h));
    }
    Ok(())
}

/// Criterion 10: smooth majorant of the step grid function at delta = 0.05.
fn criterion_10() -> Result<(), String> {
    let n = 128usize;
    let g = GridFunction::from_fn(n, |x| if x[0] < 0.5 { 1.0 } else { 0.0 })
        .map_err(|e| e.to_string())?;
    let u = smooth_majorant(&g, 0.05).map_err(|e| e.to_string())?;
    let nv = 2 * n;
    let mut gap = 0.0;
    for iv in 0..nv {
        for jv in 0..nv {
            let x = [iv as f64 / nv as f64, jv as f64 / nv as f64];
            let gv = g.values()[(iv / 2) * n + (jv / 2)];
            let uv = u.eval(x);
            if uv < gv {
                return Err(format!("deficit {} at {x:?}", gv - uv));
            }
            gap += uv - gv;
        }
    }
    gap /= (nv * nv) as f64;
    if gap >= 0.05 {
        return Err(format!("mean gap {gap} >= 0.05"));
    }
    Ok(())
}

/// Criterion 11: byte-identical outputs across repeated runs and across
/// worker counts 1 and 4.
fn criterion_11() -> Result<(), String> {
    use std::process::Command;

    let root = std::env::temp_dir().join(format!("acceptance-det-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let config = root.join("cfg.toml");
    std::fs::write(
        &config,
        concat!(
            "schema = \"oseledets-lab/1\"\n\n",
            "[flow]\na = [[2, 1], [1, 1]]\nkappa = 0.0\nroof_r0 = 1.0\n\n",
            "[observable]\nc0 = 0.0\nterms = [{ k = [1, 0], amp = 0.5 }]\n\n",
            "[run]\nseed = 17\nsamples = 500\nworkers = 1\nt_max = 120.0\n",
            "eps = [0.25]\ndelta = 0.05\n"
        ),
    )
    .map_err(|e| e.to_string())?;

    let run = |out: &std::path::Path, workers: usize| -> Result<(), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_lab"))
            .args(["regularity", "--config"])
            .arg(&config)
            .args(["--workers", &workers.to_string(), "--out"])
            .arg(out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("lab exited with {status:?}"));
        }
        Ok(())
    };
    let dirs = [root.join("a"), root.join("b"), root.join("c")];
    run(&dirs[0], 1)?;
    run(&dirs[1], 1)?;
    run(&dirs[2], 4)?;

    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err("no output files emitted".into());
    }
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).map_err(|e| e.to_string())?;
        for other in &dirs[1..] {
            let b = std::fs::read(other.join(name)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{name} differs between {:?} and {other:?}", dirs[0]));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(())
}

#[test]
fn acceptance_criteria() {
    let mut failures = String::new();
    let mut report = |n: usize, result: Result<(), String>| match result {
        Ok(()) => println!("criterion {n}: pass"),
        Err(msg) => {
            println!("criterion {n}: FAIL - {msg}");
            let _ = writeln!(failures, "criterion {n}: {msg}");
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    let profile = entropy_profile();
    match &profile {
        Ok(p) => {
            report(8, criterion_8(p));
            report(9, criterion_9(p));
        }
        Err(e) => {
            report(8, Err(e.clone()));
            report(9, Err(e.clone()));
        }
    }
    report(10, criterion_10());
    report(11, criterion_11());
    assert!(failures.is_empty(), "\n{failures}");
}
