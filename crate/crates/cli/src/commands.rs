//! Subcommand implementations: each turns a resolved configuration into a
//! [`CommandOutput`].

use csbm_gcn::experiments::{
    degree_rule, selfloop_scan, spectral_analysis, sweep, universality_check_with, EnsemblePair,
    ExperimentConfig, PairStats, Param, SummaryRow, DEFAULT_TRIALS, RIDGELESS_THEORY_MAX_RIDGE,
};
use csbm_gcn::theory::replica::theory_risks;
use csbm_gcn::theory::{rmt_two_hop_ridgeless, selfloop_theory};
use csbm_gcn::{Dataset, GraphFilter, Stat, TheoryParams, TheoryPrediction};
use serde_json::json;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::table::{Cell, CommandOutput, Table};

/// Sizes of the default universality check.
pub const DEFAULT_N_LIST: [usize; 4] = [500, 1000, 2000, 4000];
/// Trials per size of the default universality check.
pub const DEFAULT_UNIVERSALITY_TRIALS: usize = 50;
/// Default self-loop grid, `-2, -1.75, ..., 2`.
pub const DEFAULT_C_GRID: &str = "-2:0.25:2";

/// Column order of `simulate` and `sweep` tables.
pub const SUMMARY_COLUMNS: [&str; 29] = [
    "tau",
    "lambda",
    "mu",
    "gamma",
    "r",
    "n",
    "f",
    "d",
    "ensemble",
    "filter",
    "seed",
    "r_train_mean",
    "r_train_std",
    "r_test_mean",
    "r_test_std",
    "acc_mean",
    "acc_std",
    "pos_mean_mean",
    "pos_mean_std",
    "pos_var_mean",
    "pos_var_std",
    "neg_mean_mean",
    "neg_mean_std",
    "neg_var_mean",
    "neg_var_std",
    "theory_r_train",
    "theory_r_test",
    "theory_acc",
    "n_trials",
];

/// Column order of `theory` tables.
pub const THEORY_COLUMNS: [&str; 11] = [
    "tau", "lambda", "mu", "gamma", "r", "filter", "r_train", "r_test", "acc", "mean", "variance",
];

/// Column order of `universality` tables.
pub const UNIVERSALITY_COLUMNS: [&str; 25] = [
    "tau",
    "lambda",
    "mu",
    "gamma",
    "r",
    "n",
    "d",
    "pair",
    "n_trials",
    "train_binary_mean",
    "train_binary_std",
    "train_gaussian_mean",
    "train_gaussian_std",
    "train_delta",
    "train_delta_se",
    "train_abs_delta",
    "train_abs_delta_se",
    "test_binary_mean",
    "test_binary_std",
    "test_gaussian_mean",
    "test_gaussian_std",
    "test_delta",
    "test_delta_se",
    "test_abs_delta",
    "test_abs_delta_se",
];

/// Column order of the universality slope side table.
pub const SLOPE_COLUMNS: [&str; 7] = [
    "pair",
    "train_delta_slope",
    "test_delta_slope",
    "train_abs_slope",
    "test_abs_slope",
    "dropped_train",
    "dropped_test",
];

/// Column order of `selfloop` tables.
pub const SELFLOOP_COLUMNS: [&str; 20] = [
    "tau",
    "lambda",
    "mu",
    "gamma",
    "r",
    "n",
    "d",
    "ensemble",
    "seed",
    "c",
    "r_train_mean",
    "r_train_std",
    "r_test_mean",
    "r_test_std",
    "acc_mean",
    "acc_std",
    "theory_r_train",
    "theory_r_test",
    "theory_acc",
    "n_trials",
];

/// Column order of `spectrum` tables.
pub const SPECTRUM_COLUMNS: [&str; 4] = ["index", "eigenvalue", "projection", "response"];

fn mean_std(s: Option<Stat>) -> [Cell; 2] {
    match s {
        Some(s) => [s.mean.into(), s.std.into()],
        None => [Cell::Empty, Cell::Empty],
    }
}

fn summary_row(row: &SummaryRow) -> Vec<Cell> {
    let c = &row.config;
    let mut cells: Vec<Cell> = vec![
        c.tau.into(),
        c.lambda.into(),
        c.mu.into(),
        c.gamma().into(),
        c.r.into(),
        c.n.into(),
        c.f.into(),
        c.d.into(),
        c.ensemble.code().into(),
        row.filter.to_string().into(),
        c.seed.into(),
    ];
    for s in [
        Some(row.r_train),
        row.r_test,
        row.acc,
        row.pos_mean,
        row.pos_var,
        row.neg_mean,
        row.neg_var,
    ] {
        cells.extend(mean_std(s));
    }
    cells.push(row.theory.r_train.into());
    cells.push(row.theory.r_test.into());
    cells.push(row.theory.acc.into());
    cells.push(row.n_trials.into());
    cells
}

fn experiment(res: &Resolved) -> ExperimentConfig {
    let mut exp = ExperimentConfig::new(res.base);
    exp.filter = res.filter.clone().unwrap_or_else(GraphFilter::one_hop);
    exp.n_trials = res.trials.unwrap_or(DEFAULT_TRIALS);
    exp.overrides = res.grids.clone();
    exp.convention = res.convention;
    exp.parallel = res.parallel;
    exp
}

fn summary_output(rows: &[SummaryRow]) -> CommandOutput {
    let mut table = Table::new(SUMMARY_COLUMNS.to_vec());
    for row in rows {
        table.push(summary_row(row));
    }
    CommandOutput::new(table)
}

/// Trials at a single parameter point.
pub fn simulate(res: &Resolved) -> CliResult<CommandOutput> {
    res.require_single_point("simulate")?;
    let rows = sweep(&experiment(res))?;
    Ok(summary_output(&rows))
}

/// Trials over the Cartesian grid of every list-valued parameter.
pub fn run_sweep(res: &Resolved) -> CliResult<CommandOutput> {
    let rows = sweep(&experiment(res))?;
    Ok(summary_output(&rows))
}

/// What the theory command can predict for a filter.
enum TheoryKind {
    OneHop,
    TwoHop,
    SelfLoop(f64),
}

fn theory_kind(filter: &GraphFilter) -> CliResult<TheoryKind> {
    let coeffs = filter.coeffs();
    if coeffs == [0.0, 1.0] {
        Ok(TheoryKind::OneHop)
    } else if coeffs == [0.0, 0.0, 1.0] {
        Ok(TheoryKind::TwoHop)
    } else if let Some(c) = filter.self_loop_intensity() {
        Ok(TheoryKind::SelfLoop(c))
    } else {
        Err(CliError::config(format!(
            "no theory is available for the filter '{filter}' (use one-hop, two-hop or 'c;1')"
        )))
    }
}

/// Theory prediction at one point; `Ok(None)` where the filter's theory does
/// not cover the point.
fn theory_point(kind: &TheoryKind, res: &Resolved, p: TheoryParams) -> CliResult<Option<TheoryPrediction>> {
    let ridgeless_ok = p.mu == 0.0 && p.r <= RIDGELESS_THEORY_MAX_RIDGE;
    match *kind {
        TheoryKind::OneHop => {
            let mut q = p;
            q.r = res.convention.theory_ridge(p.r, p.tau);
            Ok(Some(theory_risks(&q)?))
        }
        TheoryKind::TwoHop if ridgeless_ok && p.tau == 1.0 && p.gamma >= 1.0 => Ok(Some(TheoryPrediction {
            r_train: rmt_two_hop_ridgeless(1.0 / p.gamma, p.lambda),
            r_test: f64::NAN,
            acc: f64::NAN,
            mean: f64::NAN,
            variance: f64::NAN,
        })),
        TheoryKind::SelfLoop(c) if ridgeless_ok && p.tau < 1.0 => {
            Ok(Some(selfloop_theory(p.lambda, p.gamma, p.tau, c)?))
        }
        _ => Ok(None),
    }
}

/// Theory predictions over the grid of `tau, lambda, mu, gamma, r` (no
/// sampling). Points the selected theory does not cover are skipped with a
/// warning on stderr.
pub fn theory(res: &Resolved) -> CliResult<CommandOutput> {
    let filter = res.filter.clone().unwrap_or_else(GraphFilter::one_hop);
    let kind = theory_kind(&filter)?;
    let axes = [Param::Tau, Param::Lambda, Param::Mu, Param::Gamma, Param::R];
    let values: Vec<Vec<f64>> = axes.iter().map(|&p| res.values(p)).collect();
    let total: usize = values.iter().map(Vec::len).product();
    let mut table = Table::new(THEORY_COLUMNS.to_vec());
    let mut skipped = 0;
    for idx in 0..total {
        let mut rem = idx;
        let mut point = [0.0; 5];
        for k in (0..axes.len()).rev() {
            point[k] = values[k][rem % values[k].len()];
            rem /= values[k].len();
        }
        let [tau, lambda, mu, gamma, r] = point;
        let p = TheoryParams::new(lambda, mu, gamma, tau, r);
        p.validate()?;
        let Some(pred) = theory_point(&kind, res, p)? else {
            skipped += 1;
            continue;
        };
        let opt = |v: f64| if v.is_nan() { Cell::Empty } else { Cell::Num(v) };
        let test_cols = tau < 1.0;
        table.push(vec![
            tau.into(),
            lambda.into(),
            mu.into(),
            gamma.into(),
            r.into(),
            filter.to_string().into(),
            pred.r_train.into(),
            if test_cols { opt(pred.r_test) } else { Cell::Empty },
            if test_cols { opt(pred.acc) } else { Cell::Empty },
            if test_cols { opt(pred.mean) } else { Cell::Empty },
            if test_cols { opt(pred.variance) } else { Cell::Empty },
        ]);
    }
    if skipped > 0 {
        eprintln!(
            "warning: {skipped} of {total} grid points are outside the range of the '{filter}' theory and were skipped"
        );
    }
    Ok(CommandOutput::new(table))
}

fn pair_cells(s: Option<&PairStats>) -> Vec<Cell> {
    match s {
        Some(s) => vec![
            s.binary.mean.into(),
            s.binary.std.into(),
            s.gaussian.mean.into(),
            s.gaussian.std.into(),
            s.delta.into(),
            s.delta_se.into(),
            s.abs_delta.into(),
            s.abs_delta_se.into(),
        ],
        None => vec![Cell::Empty; 8],
    }
}

fn join_sizes(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// Binary-versus-Gaussian comparison over a list of sizes with `d = sqrt(N)/2`.
pub fn universality(res: &Resolved) -> CliResult<CommandOutput> {
    if !res.grids.is_empty() {
        return Err(CliError::config("universality takes single parameter values; sizes go in 'n_list'"));
    }
    let n_list = res.n_list.clone().unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
    let trials = res.trials.unwrap_or(DEFAULT_UNIVERSALITY_TRIALS);
    let filter = res.filter.clone().unwrap_or_else(GraphFilter::one_hop);
    let mut base = res.base;
    base.d = degree_rule(n_list[0]);
    let report = universality_check_with(
        &base,
        &n_list,
        trials,
        &filter,
        &EnsemblePair::ALL,
        res.convention,
        res.parallel,
    )?;
    let mut table = Table::new(UNIVERSALITY_COLUMNS.to_vec());
    for p in &report.points {
        let mut row: Vec<Cell> = vec![
            base.tau.into(),
            base.lambda.into(),
            base.mu.into(),
            base.gamma().into(),
            base.r.into(),
            p.n.into(),
            p.d.into(),
            p.pair.label().into(),
            trials.into(),
        ];
        row.extend(pair_cells(Some(&p.train)));
        row.extend(pair_cells(p.test.as_ref()));
        table.push(row);
    }
    let mut slopes = Table::new(SLOPE_COLUMNS.to_vec());
    let mut meta = serde_json::Map::new();
    for s in &report.slopes {
        slopes.push(vec![
            s.pair.label().into(),
            s.train_delta.into(),
            s.test_delta.into(),
            s.train_abs.into(),
            s.test_abs.into(),
            join_sizes(&s.dropped.0).into(),
            join_sizes(&s.dropped.1).into(),
        ]);
        meta.insert(
            s.pair.label(),
            json!({
                "train_delta_slope": s.train_delta,
                "test_delta_slope": s.test_delta,
                "train_abs_slope": s.train_abs,
                "test_abs_slope": s.test_abs,
            }),
        );
        eprintln!(
            "{}: slope of |delta r_test| = {}",
            s.pair.label(),
            s.test_abs.map_or("n/a".to_string(), |v| format!("{v:.4}"))
        );
    }
    let mut out = CommandOutput::new(table);
    out.extra.push(("slopes", slopes));
    out.metadata.insert("n_list".into(), json!(n_list));
    out.metadata.insert("slopes".into(), serde_json::Value::Object(meta));
    Ok(out)
}

/// Risks of `A + c I` over a grid of `c`, with the minimiser `c*`.
pub fn selfloop(res: &Resolved) -> CliResult<CommandOutput> {
    res.require_single_point("selfloop")?;
    let grid = match &res.c_grid {
        Some(g) => g.clone(),
        None => crate::config::parse_list("c_grid", DEFAULT_C_GRID)?,
    };
    let trials = res.trials.unwrap_or(DEFAULT_TRIALS);
    let cfg = res.base;
    let scan = selfloop_scan(&cfg, &grid, trials, res.convention, res.parallel)?;
    let mut table = Table::new(SELFLOOP_COLUMNS.to_vec());
    for p in &scan.curve {
        let theory = if res.with_theory {
            if cfg.mu != 0.0 || cfg.r > RIDGELESS_THEORY_MAX_RIDGE {
                return Err(CliError::config(format!(
                    "the self-loop theory needs mu = 0 and r <= {RIDGELESS_THEORY_MAX_RIDGE}"
                )));
            }
            Some(selfloop_theory(cfg.lambda, cfg.gamma(), cfg.tau, p.c)?)
        } else {
            None
        };
        let mut row: Vec<Cell> = vec![
            cfg.tau.into(),
            cfg.lambda.into(),
            cfg.mu.into(),
            cfg.gamma().into(),
            cfg.r.into(),
            cfg.n.into(),
            cfg.d.into(),
            cfg.ensemble.code().into(),
            cfg.seed.into(),
            p.c.into(),
        ];
        row.extend(mean_std(Some(p.r_train)));
        row.extend(mean_std(Some(p.r_test)));
        row.extend(mean_std(Some(p.acc)));
        row.push(theory.map(|t| t.r_train).into());
        row.push(theory.map(|t| t.r_test).into());
        row.push(theory.map(|t| t.acc).into());
        row.push(trials.into());
        table.push(row);
    }
    eprintln!("c* = {}", scan.c_star);
    let mut out = CommandOutput::new(table);
    out.metadata.insert("c_star".into(), json!(scan.c_star));
    Ok(out)
}

/// Spectrum of the adjacency matrix of trial 0, projected on the labels.
pub fn spectrum(res: &Resolved) -> CliResult<CommandOutput> {
    res.require_single_point("spectrum")?;
    let data = Dataset::generate(&res.base, 0)?;
    let c = res.c.unwrap_or(0.0);
    let report = spectral_analysis(&data.adjacency, data.labels.as_slice(), c)?;
    let mut table = Table::new(SPECTRUM_COLUMNS.to_vec());
    for i in 0..report.eigenvalues.len() {
        table.push(vec![
            i.into(),
            report.eigenvalues[i].into(),
            report.projections[i].into(),
            report.response[i].into(),
        ]);
    }
    let mut out = CommandOutput::new(table);
    out.metadata.insert("c".into(), json!(c));
    out.metadata.insert("top_alignment".into(), json!(report.top_alignment));
    eprintln!("top eigenvector alignment with the labels: {:.6}", report.top_alignment);
    if let Some((a, b)) = res.band {
        let ratio = report.band_distortion(a, b)?;
        out.metadata.insert("band".into(), json!([a, b]));
        out.metadata.insert("distortion_ratio".into(), json!(ratio));
        eprintln!("distortion ratio of band [{a}, {b}]: {ratio:.6}");
    }
    Ok(out)
}
