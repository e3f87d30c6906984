use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;
use surrocal::calibration::{
    epsilon_grid, exact_formula, lower_bound, mixed_branch_gap, sweep, write_curve_csv, CalibrationQuery,
    NumericOptions, SampledOptions, SweepCell, SweepMethods, MAX_NUMERIC_LABELS,
};
use surrocal::learning::{asgd_train, compute_constants, iteration_bound, make_generator, TrainResult};
use surrocal::losses::{
    block_zero_one_loss, hamming_loss, load_loss_csv, mixed_loss, score_subspace, zero_one_loss, LossKind,
    ScoreSubspace, SubspaceKind, SubspaceMode, TaskLoss, MAX_DENSE_HAMMING_BITS,
};

use crate::config::{CommandKind, LossSpec, MethodName, RunConfig};
use crate::fig1::{check_fig1, fig1_data, write_fig1};
use crate::output::{fmt_value, write_atomic};
use crate::{CliError, EXIT_CAPACITY};

/// Matrices up to this size are printed by `loss-show`.
const PRINT_MATRIX_LIMIT: usize = 16;

/// Runs one command and returns its console output. Files named by `--out`
/// are written before returning.
pub fn run(config: &RunConfig) -> Result<String, CliError> {
    let mut out = format!("# config {}\n", config.to_json());
    match config.command {
        CommandKind::LossShow => loss_show(config, &mut out)?,
        CommandKind::Calib => calib(config, &mut out)?,
        CommandKind::Constants => constants(config, &mut out)?,
        CommandKind::Train => train(config, &mut out)?,
        CommandKind::Fig1 => fig1(config, &mut out)?,
    }
    Ok(out)
}

fn build_loss(spec: &LossSpec) -> Result<TaskLoss, CliError> {
    Ok(match spec {
        LossSpec::ZeroOne { k } => zero_one_loss(*k)?,
        LossSpec::Block { sizes } => block_zero_one_loss(sizes)?.0,
        LossSpec::Hamming { t } => hamming_loss(*t, *t <= MAX_DENSE_HAMMING_BITS)?,
        LossSpec::Mixed { sizes, eta } => mixed_loss(sizes, *eta)?,
        LossSpec::CustomCsv { path } => load_loss_csv(path)?,
    })
}

fn setup(config: &RunConfig) -> Result<(TaskLoss, ScoreSubspace), CliError> {
    let spec = config.loss.as_ref().ok_or_else(|| CliError::usage("--loss is required"))?;
    let loss = build_loss(spec)?;
    let s = score_subspace(&loss, config.subspace)?;
    Ok((loss, s))
}

fn grid(config: &RunConfig) -> Result<Vec<f64>, CliError> {
    let g = config.eps_grid;
    Ok(epsilon_grid(g.start, g.stop, g.step)?)
}

fn out_path(config: &RunConfig, default: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn mode_name(mode: SubspaceMode) -> &'static str {
    match mode {
        SubspaceMode::Unconstrained => "unconstrained",
        SubspaceMode::Tight => "tight",
    }
}

fn loss_show(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let (loss, s) = setup(config)?;
    let pseudometric = match loss.known_pseudometric() {
        Some(b) => b.to_string(),
        None => match loss.is_pseudometric() {
            Ok(b) => b.to_string(),
            Err(e) => format!("unknown ({e})"),
        },
    };
    writeln!(out, "loss: {:?}", loss.kind()).unwrap();
    writeln!(out, "k: {}", loss.k()).unwrap();
    writeln!(out, "L_max: {}", loss.l_max()).unwrap();
    writeln!(out, "rank: {}", loss.rank()?).unwrap();
    writeln!(out, "pseudometric: {pseudometric}").unwrap();
    writeln!(out, "subspace: {} ({:?})", mode_name(config.subspace), s.kind()).unwrap();
    writeln!(out, "subspace rank: {}", s.rank()).unwrap();
    writeln!(out, "condition number: {}", s.svd().condition_number()).unwrap();
    writeln!(out, "contains loss columns: {}", s.contains_loss_columns(&loss)?).unwrap();
    if loss.k() <= PRINT_MATRIX_LIMIT {
        writeln!(out, "matrix:").unwrap();
        for c in 0..loss.k() {
            let row: Vec<String> = loss.row(c).iter().map(|v| format!("{v:.4}")).collect();
            writeln!(out, "  {}", row.join(" ")).unwrap();
        }
    }
    Ok(())
}

fn calib(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let (loss, s) = setup(config)?;
    if config.has_method(MethodName::Numeric) && loss.k() > MAX_NUMERIC_LABELS {
        return Err(CliError {
            code: EXIT_CAPACITY,
            message: format!(
                "numeric calibration is limited to k <= {MAX_NUMERIC_LABELS} (k = {}); rerun with --methods exact,bounds",
                loss.k()
            ),
        });
    }
    let grid = grid(config)?;
    let methods = SweepMethods {
        exact: config.has_method(MethodName::Exact),
        numeric: config.has_method(MethodName::Numeric),
        bounds: config.has_method(MethodName::Bounds),
        sampled: config
            .has_method(MethodName::Sampled)
            .then_some(SampledOptions { samples: config.samples, seed: config.seed }),
    };
    let curve = sweep(&loss, &s, &grid, &methods, &NumericOptions::default())?;

    let mut bytes = Vec::new();
    write_curve_csv(&curve, &mut bytes)?;
    let path = out_path(config, "calibration.csv");
    write_atomic(&path, &bytes)?;

    if loss.kind() == LossKind::Mixed && s.kind() == SubspaceKind::Full {
        let blocks = loss.blocks().expect("mixed loss keeps its blocks");
        if let (Some(size), Some(eta)) = (blocks.equal_size(), loss.eta()) {
            if let Some(gap) = mixed_branch_gap(loss.k(), size, eta) {
                writeln!(out, "# branch gap at eps = {}: {gap:e}", eta / (1.0 - eta)).unwrap();
            }
        }
    }
    let failures: Vec<String> = curve
        .rows
        .iter()
        .flat_map(|r| {
            [&r.exact, &r.numeric, &r.lower_tight, &r.lower_crude, &r.upper, &r.sampled]
                .into_iter()
                .filter_map(move |c| match c {
                    SweepCell::Failed(m) => Some(format!("eps = {}: {m}", r.epsilon)),
                    _ => None,
                })
        })
        .collect();
    for f in &failures {
        writeln!(out, "# error {f}").unwrap();
    }
    let with_sampled = methods.sampled.is_some();
    let mut header = vec!["epsilon", "exact", "numeric", "lower_tight", "lower_crude", "upper", "envelope"];
    if with_sampled {
        header.push("sampled");
    }
    let cell = |c: &SweepCell| match c {
        SweepCell::NotApplicable => "-".to_string(),
        SweepCell::Value(v) => match v.finite() {
            Some(x) => format!("{x:.6e}"),
            None => "inf".into(),
        },
        SweepCell::Failed(_) => "error".into(),
    };
    writeln!(out, "{}", header.iter().map(|h| format!("{h:>13}")).collect::<String>()).unwrap();
    for r in &curve.rows {
        let mut cells = vec![
            format!("{}", r.epsilon),
            cell(&r.exact),
            cell(&r.numeric),
            cell(&r.lower_tight),
            cell(&r.lower_crude),
            cell(&r.upper),
            cell(&r.envelope),
        ];
        if with_sampled {
            cells.push(cell(&r.sampled));
        }
        writeln!(out, "{}", cells.iter().map(|c| format!("{c:>13}")).collect::<String>()).unwrap();
    }
    writeln!(out, "wrote {}", path.display()).unwrap();
    Ok(())
}

/// Envelope value at `eps` and where it came from.
fn envelope_at(loss: &TaskLoss, s: &ScoreSubspace, eps: f64) -> Result<(f64, String, Option<f64>), CliError> {
    let query = CalibrationQuery::new(loss, s, eps)?;
    if eps > loss.l_max() {
        return Ok((f64::INFINITY, "above L_max".into(), None));
    }
    if let Ok(formula) = exact_formula(&query) {
        // Every closed form is convex and nondecreasing, so it is its own envelope.
        return Ok((formula.eval(eps), "exact".into(), Some(formula.zero_level())));
    }
    if loss.k() <= MAX_NUMERIC_LABELS {
        let steps = 20.0;
        let grid = epsilon_grid(0.0, eps, eps.max(1e-12) / steps)?;
        let methods = SweepMethods { exact: false, numeric: true, bounds: false, sampled: None };
        let curve = sweep(loss, s, &grid, &methods, &NumericOptions::default())?;
        if let Some(SweepCell::Value(v)) = curve.rows.last().map(|r| r.envelope.clone()) {
            return Ok((v.to_f64(), "numeric envelope".into(), None));
        }
        return Err(CliError {
            code: crate::EXIT_NUMERICAL,
            message: "numeric calibration failed on the envelope grid".into(),
        });
    }
    let lower = lower_bound(&query)?;
    Ok((lower.tight, "lower bound".into(), None))
}

fn constants(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let (loss, s) = setup(config)?;
    let c = compute_constants(&s, loss.l_max(), config.r_bound, config.q_bound, config.n.max(1))?;
    let (h, source, zero_level) = envelope_at(&loss, &s, config.epsilon)?;
    let (n_star, note) = match iteration_bound(&c, h) {
        Ok(n) => (Some(n), None),
        Err(surrocal::Error::NotConsistent { .. }) => {
            let level = zero_level.map_or_else(|| format!(">= {}", config.epsilon), |l| l.to_string());
            (None, Some(format!("not consistent at this epsilon (level {level})")))
        }
        Err(e) => return Err(e.into()),
    };
    let mut report = json!({
        "k": loss.k(),
        "rank": c.rank,
        "sigma_min": s.svd().sigma_min(),
        "sigma_max": s.svd().sigma_max(),
        "kappa": c.condition_number,
        "L_max": loss.l_max(),
        "R": config.r_bound,
        "Q": config.q_bound,
        "n": c.n,
        "D": c.d_bound,
        "M": c.m_bound,
        "DM": c.dm,
        "gamma": c.gamma,
        "epsilon": config.epsilon,
        "calibration": if h.is_finite() { json!(h) } else { json!(fmt_value(h)) },
        "calibration_source": source,
        "n_star": n_star,
    });
    if let Some(t) = s.bits() {
        let bound = t as f64 + 2.0;
        report["kappa_bound"] = json!(bound);
        report["kappa_within_bound"] = json!(c.condition_number <= bound + 1e-9);
    }
    if let Some(note) = &note {
        report["note"] = json!(note);
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes")).unwrap();
    if let Some(note) = note {
        writeln!(out, "{note}").unwrap();
    }
    Ok(())
}

fn train(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let (loss, s) = setup(config)?;
    if config.repetitions == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let task = make_generator(&s, &loss, config.feature_dim, config.pool_size, config.seed)?;
    let c = compute_constants(
        &s,
        loss.l_max(),
        task.features.r_bound,
        task.conditionals.q_bound,
        config.n.max(1),
    )?;
    if !task.conditionals.exact {
        writeln!(
            out,
            "# warning: conditionals are not exactly linear in the features (max simplex violation {:e})",
            task.conditionals.max_simplex_violation
        )
        .unwrap();
    }
    let results: Vec<TrainResult> = (0..config.repetitions as u64)
        .into_par_iter()
        .map(|i| asgd_train(&task, &loss, &s, &c, config.n, config.seed.wrapping_add(1).wrapping_add(i)))
        .collect::<Result<_, _>>()?;
    let path = out_path(config, "train.json");
    let json = serde_json::to_vec_pretty(&results).expect("results serialize");
    write_atomic(&path, &json)?;

    let mean = results.iter().map(|r| r.suboptimality).sum::<f64>() / results.len() as f64;
    let bound = 2.0 * c.dm / (config.n as f64).sqrt();
    let verdict = if mean <= bound { "PASS" } else { "FAIL" };
    writeln!(
        out,
        "R = {}, Q = {}, D = {}, M = {}, gamma = {}",
        task.features.r_bound, task.conditionals.q_bound, c.d_bound, c.m_bound, c.gamma
    )
    .unwrap();
    writeln!(
        out,
        "mean suboptimality {mean:.6e} over {} seeds, bound 2DM/sqrt(N) = {bound:.6e}: {verdict}",
        results.len()
    )
    .unwrap();
    writeln!(out, "wrote {}", path.display()).unwrap();
    Ok(())
}

fn fig1(config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let spec = config.fig1.as_ref().ok_or_else(|| CliError::usage("fig1 needs its figure parameters"))?;
    let grid = grid(config)?;
    let data = fig1_data(spec, &grid)?;
    let dir = out_path(config, "fig1");
    write_fig1(&dir, &data)?;
    for check in check_fig1(&data) {
        let verdict = if check.passed { "ok" } else { "VIOLATED" };
        writeln!(out, "{verdict}: {} ({})", check.name, check.detail).unwrap();
    }
    writeln!(out, "wrote {}", dir.display()).unwrap();
    Ok(())
}
