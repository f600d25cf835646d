//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gl_lab::experiments::{chi2_max_tail_bound, draw_instance, TrialContext};
use gl_lab::linalg::{block_norm, linf_l2, linf_operator_norm, spectral_norm, NormOrder};
use gl_lab::rng::GaussianStream;
use gl_lab::theory::{column_overlap, two_by_two_instance};
use gl_lab::witness::{concentration_check, residual_projection};
use gl_lab::{
    chi2_tail_check, construct_witness, group_lasso, kkt_residual, lambda_from_rule, psi_bounds, psi_two_by_two,
    sample_size, sparsity_overlap, sweep_theta, theta50_scan, zeta, zeta_perturbation_check, DenseMatrix,
    EnsembleSpec, Family, LambdaRule, Matrix, Method, SolverConfig, SweepSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("1 closed-form psi", closed_form_psi),
        ("2 two-by-two formulas", two_by_two_grid),
        ("3 phase transition", phase_transition),
        ("4 theta50 vs |cos alpha|", theta50_line),
        ("5 solver vs oracle", solver_oracle),
        ("6 witness events", witness_events),
        ("7 inequality suites", inequality_suites),
        ("8a chi2 tail", chi2_tail),
        ("8b spectral concentration", spectral_concentration),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{name}] {} ({secs:.1} s)", out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn closed_form_psi() -> Outcome {
    let s = 16;
    let mut cases = vec![
        (Family::Identical, 16.0),
        (Family::Orthonormal, 8.0),
        (Family::Intermediate, 12.0),
    ];
    for alpha in [0.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, FRAC_PI_2] {
        cases.push((Family::B1Alpha { alpha }, s as f64 / 2.0 * (1.0 + alpha.cos().abs())));
    }
    let mut worst = 0.0f64;
    for (family, expected) in cases {
        let b_s: Matrix = EnsembleSpec::standard(family, 64, s, 0.1).support_block().unwrap();
        let psi = sparsity_overlap(&b_s, &DenseMatrix::identity(s)).unwrap();
        worst = worst.max((psi - expected).abs());
    }
    outcome(worst <= 1e-9, format!("max |psi - closed form| = {worst:.2e} (tol 1e-9)"))
}

fn two_by_two_grid() -> Outcome {
    let grid: Vec<f64> = (0..20).map(|i| PI * i as f64 / 19.0).collect();
    let mut worst = 0.0f64;
    let mut violation_uncorrelated = 0.0f64;
    for rho in [0.0, 0.9, -0.9] {
        for &t1 in &grid {
            for &t2 in &grid {
                let closed = psi_two_by_two(t1, t2, rho).unwrap();
                let (b, sigma) = two_by_two_instance(t1, t2, rho).unwrap();
                worst = worst.max((closed.psi_group - sparsity_overlap(&b, &sigma).unwrap()).abs());
                if rho == 0.0 {
                    violation_uncorrelated = violation_uncorrelated.max(closed.violation());
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && violation_uncorrelated == 0.0,
        format!("max formula error {worst:.2e} (tol 1e-9), max violation at rho = 0: {violation_uncorrelated}"),
    )
}

fn sweep_spec(family: Family, grid: Vec<f64>) -> SweepSpec {
    SweepSpec {
        ensemble: EnsembleSpec::standard(family, 256, 16, 0.1),
        theta_grid: grid,
        trials: 200,
        base_seed: 20_240_601,
        lambda_rule: LambdaRule::PaperSim,
        method: Method::GroupL12,
    }
}

fn phase_transition() -> Outcome {
    let grid: Vec<f64> = (1..=8).map(|i| 0.25 * i as f64).collect();
    let ident = sweep_theta(&sweep_spec(Family::Identical, grid.clone())).unwrap().theta50;
    let ortho = sweep_theta(&sweep_spec(Family::Orthonormal, grid)).unwrap().theta50;
    let (Some(ti), Some(to)) = (ident, ortho) else {
        return outcome(false, format!("no crossing: identical {ident:?}, orthonormal {ortho:?}"));
    };
    let ratio = ti / to;
    let pass = (0.75..=1.25).contains(&ti) && (0.35..=0.7).contains(&to) && (1.6..=2.4).contains(&ratio);
    outcome(
        pass,
        format!(
            "theta50 identical {ti:.4} in [0.75, 1.25], orthonormal {to:.4} in [0.35, 0.7], ratio {ratio:.4} in [1.6, 2.4]"
        ),
    )
}

fn theta50_line() -> Outcome {
    let grid: Vec<f64> = (2..=16).map(|i| 0.125 * i as f64).collect();
    let alphas: Vec<f64> = (0..7).map(|i| FRAC_PI_2 * i as f64 / 6.0).collect();
    let rows = theta50_scan(&sweep_spec(Family::Identical, grid), &alphas, false).unwrap();
    let mut worst = 0.0f64;
    for row in &rows {
        let target = (1.0 + row.cos_alpha.abs()) / 2.0;
        match row.theta50_group {
            Some(t) => worst = worst.max((t - target).abs()),
            None => return outcome(false, format!("no crossing at alpha = {}", row.alpha)),
        }
    }
    outcome(worst <= 0.2, format!("max |theta50 - (1 + |cos alpha|)/2| = {worst:.4} (tol 0.2)"))
}

fn solver_oracle() -> Outcome {
    let mut worst_diff = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut unconverged = 0;
    for seed in 0..50u64 {
        let x = gaussian(40, 12, seed);
        let mut g = GaussianStream::new(seed, 0x5E, 0);
        let bstar = DenseMatrix::from_fn(12, 2, |i, _| if i < 4 { g.normal() } else { 0.0 });
        let y = x.matmul(&bstar).unwrap().try_add(&gaussian(40, 2, seed + 1000).scale(0.5)).unwrap();
        for lambda in [0.05, 0.2] {
            let sol = match group_lasso(&x, &y, &SolverConfig::new(lambda)) {
                Ok(sol) => sol,
                Err(_) => {
                    unconverged += 1;
                    continue;
                }
            };
            let oracle = prox_grad_group_lasso(&x, &y, lambda, 2_000_000);
            worst_diff = worst_diff.max(frob_diff(&sol.b_hat, &oracle));
            worst_kkt = worst_kkt.max(kkt_residual(&x, &y, &sol.b_hat, lambda).unwrap().max_violation);
        }
    }
    outcome(
        unconverged == 0 && worst_diff <= 1e-6 && worst_kkt <= 1e-7,
        format!(
            "100 solves, {unconverged} unconverged, max Frobenius gap {worst_diff:.2e} (tol 1e-6), max KKT violation {worst_kkt:.2e} (tol 1e-7)"
        ),
    )
}

fn witness_events() -> Outcome {
    let (p, s) = (64, 8);
    let ctx = TrialContext::new(&EnsembleSpec::standard(Family::Identical, p, s, 0.1)).unwrap();
    let run = |theta: f64, seed: u64| {
        let n = sample_size(theta, p, s).unwrap();
        let lambda = lambda_from_rule(LambdaRule::PaperSim, n, p, s).unwrap();
        let (coefs, x, w, _) = draw_instance(&ctx, n, seed).unwrap();
        let report = construct_witness(&x, &w, &coefs.b, &coefs.support, &SolverConfig::new(lambda).with_tol(1e-12));
        (coefs, x, w, lambda, report)
    };

    let mut joint = 0;
    let mut implied = 0;
    for seed in 0..100 {
        let (coefs, x, w, lambda, report) = run(2.0, seed);
        let Ok(r) = report else { continue };
        if r.certifies_recovery() {
            joint += 1;
            let y = x.matmul(&coefs.b).unwrap().try_add(&w).unwrap();
            if let Ok(sol) = group_lasso(&x, &y, &SolverConfig::new(lambda).with_tol(1e-12)) {
                if sol.support == coefs.support && frob_diff(&sol.b_hat, &r.full_estimate(&coefs.support)) <= 1e-6 {
                    implied += 1;
                }
            }
        }
    }
    let mut v_fails = 0;
    for seed in 0..100 {
        match run(0.25, 10_000 + seed).4 {
            Ok(r) if r.event_v => {}
            _ => v_fails += 1,
        }
    }
    outcome(
        joint >= 95 && implied == joint && v_fails >= 80,
        format!(
            "theta = 2: joint events {joint}/100 (need 95), exact recovery in {implied}/{joint}; theta = 0.25: E(V) fails {v_fails}/100 (need 80)"
        ),
    )
}

fn random_block(s: usize, k: usize, g: &mut GaussianStream) -> Matrix {
    let mut b = DenseMatrix::from_fn(s, k, |_, _| if g.uniform() < 0.3 { 0.0 } else { g.normal() });
    for i in 0..s {
        if b.row(i).iter().all(|v| *v == 0.0) {
            b[(i, g.below(k as u64) as usize)] = 1.0;
        }
    }
    b
}

fn inequality_suites() -> Outcome {
    const CASES: u64 = 500;
    let mut lemma1 = 0;
    let mut sandwich = 0;
    let mut zeta_pert = 0;
    let mut block = 0;
    let mut submult = 0;
    let mut projector = 0;
    for case in 0..CASES {
        let mut g = GaussianStream::new(case, 0xACC, 0);
        let s = 1 + g.below(8) as usize;
        let k = 1 + g.below(3) as usize;

        // ψ bracketed by the extreme eigenvalues of Σ_SS
        let b = random_block(s, k, &mut g);
        let sigma = random_spd(s, 0.2, case);
        let ev = jacobi_eigenvalues(&sigma);
        let (lo, hi) = psi_bounds(s, k, ev[0], ev[s - 1]);
        let psi = sparsity_overlap(&b, &sigma).unwrap();
        if !(lo <= psi * (1.0 + 1e-8) && psi <= hi * (1.0 + 1e-8)) {
            lemma1 += 1;
        }

        // disjoint supports: max per-task overlap ≤ ψ ≤ sum
        let s2 = s.max(2);
        let k2 = k.max(2);
        let mut d = DenseMatrix::zeros(s2, k2);
        for i in 0..s2 {
            let col = if i < k2 { i } else { g.below(k2 as u64) as usize };
            d[(i, col)] = g.normal();
        }
        let sigma2 = random_spd(s2, 0.3, case + 7_000);
        let psi_d = sparsity_overlap(&d, &sigma2).unwrap();
        let cols: Vec<f64> = (0..k2)
            .filter(|&j| d.col(j).iter().any(|v| *v != 0.0))
            .map(|j| column_overlap(&d, &sigma2, j).unwrap())
            .collect();
        let max = cols.iter().copied().fold(0.0, f64::max);
        let sum: f64 = cols.iter().sum();
        if !(max <= psi_d * (1.0 + 1e-9) && psi_d <= sum * (1.0 + 1e-9)) {
            sandwich += 1;
        }

        // normalized rows move by at most 4‖Δ‖ when ‖Δᵢ‖ ≤ 1/2
        let bstar = gaussian(s, k, case + 20_000);
        let u = DenseMatrix::from_fn(s, k, |_, _| g.normal());
        let u = DenseMatrix::from_fn(s, k, |i, j| u.get(i, j) / u.row_norm(i) * 0.5 * g.uniform() * bstar.row_norm(i));
        let z_hat = zeta(&bstar.try_add(&u).unwrap(), 0.0).unwrap();
        if zeta_perturbation_check(&z_hat, &bstar, &u).unwrap().ok != Some(true) {
            zeta_pert += 1;
        }

        // block norms: ℓ∞/ℓ2 equals the direct row maximum, dominates dual pairings,
        // and the spectral norm is at most √rows times it
        let a = gaussian(s, k, case + 30_000);
        let inf2 = block_norm(&a, NormOrder::Inf, NormOrder::Two).unwrap();
        let mut bad = (inf2 - max_row_norm(&a)).abs() > 1e-12 || (linf_l2(&a) - inf2).abs() > 1e-15;
        let v = random_unit(k, &mut g);
        let pairing = (0..s).map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>().abs()).fold(0.0, f64::max);
        bad |= pairing > inf2 * (1.0 + 1e-12);
        bad |= spectral_norm(&a).unwrap() > (s as f64).sqrt() * inf2 * (1.0 + 1e-9) + 1e-12;
        let l1 = block_norm(&a, NormOrder::One, NormOrder::One).unwrap();
        bad |= (l1 - a.as_slice().iter().map(|x| x.abs()).sum::<f64>()).abs() > 1e-12;
        if bad {
            block += 1;
        }

        // ‖A·Z‖_{ℓ∞/ℓb} ≤ |||A|||_∞ · ‖Z‖_{ℓ∞/ℓb}
        let m = gaussian(s, s, case + 40_000);
        let z = gaussian(s, k, case + 50_000);
        let mz = naive_matmul(&m, &z);
        for order in [NormOrder::One, NormOrder::Two, NormOrder::Inf] {
            let lhs = block_norm(&mz, NormOrder::Inf, order).unwrap();
            let rhs = linf_operator_norm(&m) * block_norm(&z, NormOrder::Inf, order).unwrap();
            if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                submult += 1;
                break;
            }
        }

        // projector annihilates X_S; witness stationarity holds on the support
        let (n, p) = (12 + 4 * s, s + 6);
        let x = gaussian(n, p, case + 60_000);
        let x_s = x.select_cols(&(0..s).collect::<Vec<_>>());
        let r = residual_projection(&x_s, &gaussian(n, k, case + 70_000)).unwrap();
        let mut bad = x_s.tr_matmul(&r).unwrap().max_abs() > 1e-9;
        let mut bstar = DenseMatrix::zeros(p, k);
        for i in 0..s {
            for j in 0..k {
                bstar[(i, j)] = 1.0 + g.uniform();
            }
        }
        let w = gaussian(n, k, case + 80_000).scale(0.1);
        let support = gl_lab::SupportSet::first(s, p).unwrap();
        let mut cfg = SolverConfig::new(0.05).with_tol(1e-13);
        cfg.kkt_tol = 1e-11;
        match construct_witness(&x, &w, &bstar, &support, &cfg) {
            Ok(rep) => {
                let gram = x_s.tr_matmul(&x_s).unwrap().scale(1.0 / n as f64);
                let xs_w = x_s.tr_matmul(&w).unwrap().scale(1.0 / n as f64);
                let lhs = naive_matmul(&gram, &rep.u_s).try_sub(&xs_w).unwrap().try_add(&rep.z_hat_s.scale(0.05)).unwrap();
                bad |= lhs.max_abs() > 1e-9;
            }
            Err(_) => bad = true,
        }
        if bad {
            projector += 1;
        }
    }
    let total = lemma1 + sandwich + zeta_pert + block + submult + projector;
    outcome(
        total == 0,
        format!(
            "{CASES} cases each; violations: psi bounds {lemma1}, disjoint sandwich {sandwich}, zeta perturbation {zeta_pert}, block norms {block}, submultiplicative {submult}, projector/stationarity {projector}"
        ),
    )
}

fn chi2_tail() -> Outcome {
    let r = chi2_tail_check(10, 2, 18.0, 100_000, 17).unwrap();
    let sd = (r.bound * (1.0 - r.bound.min(1.0)) / r.trials as f64).sqrt();
    let limit = r.bound + 3.0 * sd;
    outcome(
        r.empirical_rate <= limit,
        format!(
            "empirical rate {:.3e} <= bound {:.4e} + 3 sd = {limit:.4e} (bound formula {:.4e})",
            r.empirical_rate,
            r.bound,
            chi2_max_tail_bound(10, 2, 18.0)
        ),
    )
}

fn spectral_concentration() -> Outcome {
    let r = concentration_check(2000, 20, 200, 99).unwrap();
    let mean = r.deviations.iter().sum::<f64>() / r.deviations.len() as f64;
    outcome(
        r.rate() >= 0.95,
        format!(
            "||U'U/n - I||_2 <= sqrt(s/n) = {:.4} in {}/200 trials (need 190); mean deviation {mean:.4}",
            r.bound, r.within_bound
        ),
    )
}
