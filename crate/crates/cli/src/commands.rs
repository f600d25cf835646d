//! One function per command, each producing a table and a JSON summary for
//! the metadata sidecar.

use std::path::Path;

use gl_lab::experiments::{draw_instance, sweep_theta_with, TrialContext};
use gl_lab::{
    check_assumptions, chi2_tail_check, construct_witness, group_lasso, lambda_from_rule, sample_size, theta50_scan,
    DenseMatrix, Matrix, SolveError, SolverConfig, TheoryReport,
};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::format::Table;

pub const SWEEP_COLUMNS: [&str; 12] = [
    "family",
    "p",
    "s",
    "K",
    "sigma",
    "method",
    "lambda_rule",
    "theta",
    "n",
    "trials",
    "successes",
    "success_rate",
];

pub const SCAN_COLUMNS: [&str; 4] = ["alpha", "cos_alpha", "theta50_group", "theta50_lasso"];

/// Result of one command: the emitted table plus extra facts for the sidecar.
pub struct Output {
    pub table: Table,
    pub summary: Value,
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    match cfg.command {
        Command::Psi => psi(cfg),
        Command::Solve => solve(cfg),
        Command::Witness => witness(cfg),
        Command::Sweep => sweep(cfg),
        Command::Theta50Scan => scan(cfg),
        Command::CheckAssumptions => assumptions(cfg),
        Command::TailCheck => tail(cfg),
    }
}

fn sample_count(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.n {
        Some(n) => Ok(n),
        None => Ok(sample_size(cfg.theta, cfg.ensemble.p, cfg.ensemble.s)?),
    }
}

fn psi(cfg: &RunConfig) -> Result<Output, CliError> {
    let e = &cfg.ensemble;
    let n = sample_count(cfg)?;
    let support = e.support(cfg.seed)?;
    let b_s: Matrix = e.support_block()?;
    let sigma: Matrix = e.covariance_matrix()?;
    let sigma_ss = sigma.select(support.indices(), support.indices());
    let r = TheoryReport::compute(&b_s, &sigma_ss, n, e.p)?;
    let mut table = Table::new(&["family", "p", "s", "K", "n", "psi", "theta", "psi_lower", "psi_upper", "bmin"]);
    table.push(vec![
        e.family.name().into(),
        e.p.into(),
        e.s.into(),
        e.k.into(),
        n.into(),
        r.psi.into(),
        r.theta.into(),
        r.psi_lower.into(),
        r.psi_upper.into(),
        r.bmin.into(),
    ]);
    Ok(Output { table, summary: json!({ "closed_form_psi": e.family.closed_form_psi(e.s) }) })
}

/// Headerless numeric CSV.
pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row: Vec<f64> = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Parse(format!("{}: line {}: `{v}` is not a finite number", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(CliError::Parse(format!("{}: line {} has {} fields", path.display(), i + 1, row.len())));
        }
        data.extend(row);
    }
    let cols = cols.ok_or_else(|| CliError::Parse(format!("{}: empty matrix", path.display())))?;
    Ok(DenseMatrix::new(data.len() / cols, cols, data)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        CliError::Parse(format!("{}: {e}", path.display()))
    }
}

fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let (x, y, truth) = match (&cfg.x_path, &cfg.y_path) {
        (Some(xp), Some(yp)) => {
            let x = read_matrix(xp)?;
            let y = read_matrix(yp)?;
            if x.rows() != y.rows() {
                return Err(CliError::Validation(format!("X has {} rows but Y has {}", x.rows(), y.rows())));
            }
            (x, y, None)
        }
        _ => {
            let ctx = TrialContext::new(&cfg.ensemble)?;
            let (coefs, x, _, y) = draw_instance(&ctx, sample_count(cfg)?, cfg.seed)?;
            (x, y, Some(coefs.support))
        }
    };
    let (n, p) = x.shape();
    let lambda = lambda_from_rule(cfg.lambda_rule, n, p, cfg.ensemble.s)?;
    let mut solver = SolverConfig::new(lambda).with_tol(cfg.tol);
    solver.max_iter = cfg.max_iter;
    let sol = match group_lasso(&x, &y, &solver) {
        Ok(sol) => sol,
        Err(SolveError::NotConverged(sol)) => {
            eprintln!("warning: solver stopped after {} sweeps without converging", sol.iterations);
            *sol
        }
        Err(SolveError::Core(e)) => return Err(e.into()),
    };
    let exact = truth.as_ref().map(|s| *s == sol.support);
    let mut table = Table::new(&[
        "n",
        "p",
        "K",
        "lambda",
        "iterations",
        "converged",
        "objective",
        "kkt_max_violation",
        "support_size",
        "exact_recovery",
    ]);
    table.push(vec![
        n.into(),
        p.into(),
        y.cols().into(),
        lambda.into(),
        sol.iterations.into(),
        sol.converged.into(),
        sol.objective.into(),
        sol.kkt_max_violation.into(),
        sol.support.len().into(),
        exact.into(),
    ]);
    Ok(Output { table, summary: json!({ "support": sol.support.indices() }) })
}

fn witness(cfg: &RunConfig) -> Result<Output, CliError> {
    let e = &cfg.ensemble;
    let n = sample_count(cfg)?;
    let lambda = lambda_from_rule(cfg.lambda_rule, n, e.p, e.s)?;
    let ctx = TrialContext::new(e)?;
    let (coefs, x, w, _) = draw_instance(&ctx, n, cfg.seed)?;
    let mut solver = SolverConfig::new(lambda).with_tol(cfg.tol);
    solver.max_iter = cfg.max_iter;
    let r = match construct_witness(&x, &w, &coefs.b, &coefs.support, &solver) {
        Ok(r) => r,
        Err(SolveError::NotConverged(sol)) => {
            return Err(CliError::Validation(format!(
                "restricted solve did not converge in {} sweeps",
                sol.iterations
            )))
        }
        Err(SolveError::Core(e)) => return Err(e.into()),
    };
    let mut table = Table::new(&[
        "n",
        "p",
        "s",
        "K",
        "lambda",
        "event_u",
        "event_v",
        "certifies_recovery",
        "strict_dual_feasibility_margin",
        "m_n_spectral",
        "zeta_bound_ok",
        "stationarity_residual",
        "bmin",
    ]);
    table.push(vec![
        n.into(),
        e.p.into(),
        e.s.into(),
        e.k.into(),
        lambda.into(),
        r.event_u.into(),
        r.event_v.into(),
        r.certifies_recovery().into(),
        r.strict_dual_feasibility_margin.into(),
        r.m_n_spectral.into(),
        r.zeta_bound_ok.into(),
        r.stationarity_residual.into(),
        r.bmin.into(),
    ]);
    Ok(Output { table, summary: json!({ "support": coefs.support.indices() }) })
}

fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = cfg.sweep_spec();
    let e = &spec.ensemble;
    let result = sweep_theta_with(&spec, |pt| {
        eprintln!(
            "theta = {} n = {} successes = {}/{} solver_failures = {}",
            pt.theta, pt.n, pt.successes, pt.trials, pt.solver_failures
        );
    })?;
    let mut table = Table::new(&SWEEP_COLUMNS);
    for pt in &result.points {
        table.push(vec![
            e.family.name().into(),
            e.p.into(),
            e.s.into(),
            e.k.into(),
            e.sigma.into(),
            spec.method.to_string().into(),
            spec.lambda_rule.to_string().into(),
            pt.theta.into(),
            pt.n.into(),
            pt.trials.into(),
            pt.successes.into(),
            pt.success_rate.into(),
        ]);
    }
    let failures: Vec<usize> = result.points.iter().map(|pt| pt.solver_failures).collect();
    Ok(Output {
        table,
        summary: json!({ "theta50": result.theta50, "solver_failures": failures }),
    })
}

fn scan(cfg: &RunConfig) -> Result<Output, CliError> {
    let rows = theta50_scan(&cfg.sweep_spec(), &cfg.alphas, cfg.with_lasso)?;
    let mut table = Table::new(&SCAN_COLUMNS);
    for row in rows {
        eprintln!("alpha = {} theta50 = {:?}", row.alpha, row.theta50_group);
        table.push(vec![
            row.alpha.into(),
            row.cos_alpha.into(),
            row.theta50_group.into(),
            row.theta50_lasso.into(),
        ]);
    }
    Ok(Output { table, summary: Value::Null })
}

fn assumptions(cfg: &RunConfig) -> Result<Output, CliError> {
    let e = &cfg.ensemble;
    let sigma: Matrix = e.covariance_matrix()?;
    let support = e.support(cfg.seed)?;
    let r = check_assumptions(&sigma, &support)?;
    let mut table = Table::new(&["cmin", "cmax", "incoherence_gamma", "dmax", "a1_ok", "a2_ok", "a3_ok"]);
    table.push(vec![
        r.cmin.into(),
        r.cmax.into(),
        r.incoherence_gamma.into(),
        r.dmax.into(),
        r.a1_ok.into(),
        r.a2_ok.into(),
        r.a3_ok.into(),
    ]);
    Ok(Output { table, summary: json!({ "support": support.indices() }) })
}

fn tail(cfg: &RunConfig) -> Result<Output, CliError> {
    let r = chi2_tail_check(cfg.m, cfg.d, cfg.t, cfg.trials, cfg.seed)?;
    let mut table = Table::new(&["m", "d", "t", "trials", "exceedances", "empirical_rate", "bound", "ok"]);
    table.push(vec![
        r.m.into(),
        r.d.into(),
        r.t.into(),
        r.trials.into(),
        r.exceedances.into(),
        r.empirical_rate.into(),
        r.bound.into(),
        r.ok.into(),
    ]);
    Ok(Output { table, summary: Value::Null })
}
