use std::f64::consts::PI;

use protoclone::doublewell::{level_gap, solve_levels, Parity};
use protoclone::exec::Exec;
use protoclone::probe::{discriminate, probe_momentum, Label};
use protoclone::reconstruction::{angular_error, clone_state, monte_carlo, trial_rng, MonteCarloSetup};
use protoclone::spin::BlochAngles;
use protoclone::tdse::run_oracle;
use rand::Rng;
use serde_json::{json, Value};

use crate::config::{Setup, SweepCommand, SweepMode};
use crate::output::{flag, num, Table};
use crate::CliError;

/// Stream used by the single-state clone run, away from Monte Carlo streams.
const CLONE_STREAM: usize = usize::MAX - 1;
/// Points in the kick curve.
const KICK_POINTS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Spectrum,
    KickCurve,
    Clone,
    Discriminate,
    Oracle,
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::KickCurve => "kick_curve",
            CommandKind::Clone => "clone",
            CommandKind::Discriminate => "discriminate",
            CommandKind::Oracle => "oracle",
            CommandKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub tables: Vec<Table>,
    pub outputs: Value,
    pub warnings: Vec<String>,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub failed: bool,
}

impl CommandOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub struct SweepPoint {
    pub assignments: Vec<(String, Value)>,
    pub setup: Setup,
}

/// Work decided before any computation starts.
pub enum Plan {
    Single,
    Sweep(SweepCommand, Vec<SweepPoint>),
}

/// Expands and validates sweep points so bad configs fail before any work.
pub fn plan(kind: CommandKind, setup: &Setup) -> Result<Plan, CliError> {
    if kind != CommandKind::Sweep {
        return Ok(Plan::Single);
    }
    let sweep = setup
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("the sweep command needs a `sweep` section"))?;
    let axes: Vec<(String, Vec<Value>)> = sweep
        .axes
        .iter()
        .map(|a| Ok((a.path.clone(), a.points()?)))
        .collect::<Result<_, CliError>>()?;
    let combos: Vec<Vec<(String, Value)>> = match sweep.mode {
        SweepMode::Zip => {
            let n = axes[0].1.len();
            if axes.iter().any(|(_, v)| v.len() != n) {
                return Err(CliError::config("zip sweep axes must have equal lengths"));
            }
            (0..n).map(|i| axes.iter().map(|(p, v)| (p.clone(), v[i].clone())).collect()).collect()
        }
        SweepMode::Cartesian => {
            let mut out: Vec<Vec<(String, Value)>> = vec![Vec::new()];
            for (path, values) in &axes {
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        values.iter().map(move |v| {
                            let mut row = prefix.clone();
                            row.push((path.clone(), v.clone()));
                            row
                        })
                    })
                    .collect();
            }
            out
        }
    };
    let mut base = setup.config.clone();
    base.sweep = None;
    let points = combos
        .into_iter()
        .map(|assignments| {
            let mut cfg = base.clone();
            for (path, value) in &assignments {
                cfg = cfg.with_override(path, value)?;
            }
            let setup = cfg.resolve()?;
            Ok(SweepPoint { assignments, setup })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Plan::Sweep(sweep.command, points))
}

pub fn run(kind: CommandKind, setup: &Setup, plan: Plan, exec: Exec) -> Result<CommandOutput, CliError> {
    match (kind, plan) {
        (CommandKind::Spectrum, _) => spectrum(setup),
        (CommandKind::KickCurve, _) => kick_curve(setup),
        (CommandKind::Clone, _) => clone(setup, exec),
        (CommandKind::Discriminate, _) => discrimination(setup, exec),
        (CommandKind::Oracle, _) => oracle(setup, exec),
        (CommandKind::Sweep, Plan::Sweep(cmd, points)) => sweep(cmd, &points, exec),
        (CommandKind::Sweep, Plan::Single) => Err(CliError::config("sweep plan missing")),
    }
}

pub fn spectrum(setup: &Setup) -> Result<CommandOutput, CliError> {
    let g = &setup.geom;
    let n = setup.config.levels;
    let sym = solve_levels(g, Parity::Sym, n).map_err(CliError::compute)?;
    let anti = solve_levels(g, Parity::Antisym, n).map_err(CliError::compute)?;
    let mut table = Table::new("spectrum", &["parity", "n", "k", "energy", "q", "a_amp", "b_amp", "gap"]);
    let mut levels = Vec::new();
    for i in 0..n {
        let gap = level_gap(g, i + 1).map_err(CliError::compute)?;
        for lv in [&sym[i], &anti[i]] {
            table.push(vec![
                lv.parity.label().to_string(),
                lv.n.to_string(),
                num(lv.k),
                num(lv.energy),
                num(lv.q),
                num(lv.a_amp),
                num(lv.b_amp),
                num(gap),
            ]);
            levels.push(json!({"parity": lv.parity.label(), "n": lv.n, "k": lv.k, "energy": lv.energy, "gap": gap}));
        }
    }
    Ok(CommandOutput {
        lines: vec![format!(
            "{n} level pairs; E_s1 = {:.12e}, gap_1 = {:.6e}",
            sym[0].energy, setup.gap
        )],
        tables: vec![table],
        outputs: json!({ "levels": levels, "gap": setup.gap }),
        ..Default::default()
    })
}

pub fn kick_curve(setup: &Setup) -> Result<CommandOutput, CliError> {
    let c = setup.calibration;
    let mut points = Vec::with_capacity(KICK_POINTS);
    let mut warnings = Vec::new();
    for i in 0..KICK_POINTS {
        let theta = PI * i as f64 / (KICK_POINTS - 1) as f64;
        let spin = BlochAngles::new(theta, 0.0);
        let k = probe_momentum(&spin, &setup.geom, &setup.ground, &setup.probe).map_err(CliError::compute)?;
        if i == 0 {
            warnings.extend(k.warnings.iter().map(|w| w.to_string()));
        }
        points.push((theta, spin.cos_theta(), k.p_final));
    }
    let sxy: f64 = points.iter().map(|&(_, x, p)| x * p).sum();
    let sxx: f64 = points.iter().map(|&(_, x, _)| x * x).sum();
    let slope = sxy / sxx;
    let mut table = Table::new("kick_curve", &["theta", "cos_theta", "p_final", "fit", "residual"]);
    let mut max_res: f64 = 0.0;
    for &(theta, x, p) in &points {
        let fit = slope * x;
        max_res = max_res.max((p - fit).abs());
        table.push(vec![num(theta), num(x), num(p), num(fit), num(p - fit)]);
    }
    let mut fit = Table::new("kick_fit", &["slope", "calibration", "max_residual", "max_residual_over_c"]);
    fit.push(vec![num(slope), num(c), num(max_res), num(max_res / c)]);
    Ok(CommandOutput {
        lines: vec![format!("slope {slope:.12e}, C = {c:.12e}, max residual {:.3e} C", max_res / c)],
        tables: vec![table, fit],
        outputs: json!({ "slope": slope, "calibration": c, "max_residual": max_res }),
        warnings,
        failed: false,
    })
}

fn clone_row(setup: &Setup) -> Result<(protoclone::reconstruction::Estimate, f64), CliError> {
    let mut rng = trial_rng(setup.config.seed, CLONE_STREAM);
    let est = clone_state(
        &setup.hidden,
        &setup.plan,
        &setup.geom,
        &setup.ground,
        &setup.probe,
        setup.noise_sigma,
        setup.noise_sigma > 0.0,
        &mut rng,
    )
    .map_err(CliError::compute)?;
    let err = angular_error(&setup.hidden, &est.angles());
    Ok((est, err))
}

pub fn clone(setup: &Setup, exec: Exec) -> Result<CommandOutput, CliError> {
    let (est, err) = clone_row(setup)?;
    let mut warnings: Vec<String> = est.warnings.iter().map(|w| w.to_string()).collect();
    if est.pole_flag {
        warnings.push("estimate at a pole: phi is undefined and reported as 0".into());
    }
    if est.clamped {
        warnings.push("a measured cosine fell outside [-1, 1] and was clamped".into());
    }
    if est.fallback_used {
        warnings.push("no common azimuth within tolerance: nearest pair used".into());
    }
    let cands = |c: Option<[f64; 2]>| c.map_or(String::new(), |[a, b]| format!("{};{}", num(a), num(b)));
    let mut table = Table::new(
        "clone",
        &[
            "theta", "phi", "theta_hat", "phi_hat", "angular_error", "pole_flag", "clamped", "fallback", "phi_candidates_n",
            "phi_candidates_l",
        ],
    );
    table.push(vec![
        num(setup.hidden.theta()),
        num(setup.hidden.phi()),
        num(est.theta_hat),
        num(est.phi_hat),
        num(err),
        flag(est.pole_flag),
        flag(est.clamped),
        flag(est.fallback_used),
        cands(est.phi_candidates_n),
        cands(est.phi_candidates_l),
    ]);
    let mc_setup = MonteCarloSetup {
        plan: &setup.plan,
        geom: &setup.geom,
        level: &setup.ground,
        probe: &setup.probe,
        theta_margin: setup.config.theta_margin,
    };
    let mc = monte_carlo(&mc_setup, setup.noise_sigma, setup.config.trials, setup.config.seed, exec)
        .map_err(CliError::compute)?;
    let mut trials = Table::new(
        "monte_carlo",
        &["trial", "theta", "phi", "theta_hat", "phi_hat", "angular_error", "pole_flag", "fallback"],
    );
    for (i, o) in mc.outcomes.iter().enumerate() {
        trials.push(vec![
            i.to_string(),
            num(o.hidden.theta()),
            num(o.hidden.phi()),
            num(o.estimate.theta()),
            num(o.estimate.phi()),
            num(o.error),
            flag(o.pole_flag),
            flag(o.fallback_used),
        ]);
    }
    Ok(CommandOutput {
        lines: vec![
            format!(
                "hidden ({:.9}, {:.9}) -> estimate ({:.9}, {:.9}), error {:.3e} rad",
                setup.hidden.theta(),
                setup.hidden.phi(),
                est.theta_hat,
                est.phi_hat,
                err
            ),
            format!(
                "{} trials at sigma = {:.3e}: rms error {:.3e} rad, max {:.3e}, fallbacks {}",
                mc.trials, mc.noise_sigma, mc.rms_error, mc.max_error, mc.fallbacks
            ),
        ],
        tables: vec![table, trials],
        outputs: json!({
            "hidden": {"theta": setup.hidden.theta(), "phi": setup.hidden.phi(), "drawn": setup.hidden_drawn},
            "estimate": est,
            "angular_error": err,
            "monte_carlo": {"trials": mc.trials, "noise_sigma": mc.noise_sigma, "rms_error": mc.rms_error,
                            "max_error": mc.max_error, "fallbacks": mc.fallbacks},
        }),
        warnings,
        failed: false,
    })
}

struct DiscriminationRun {
    rows: Vec<(bool, protoclone::probe::Discrimination)>,
    confusion: [[usize; 2]; 2],
    accuracy: f64,
}

fn run_discrimination(setup: &Setup, exec: Exec) -> Result<DiscriminationRun, CliError> {
    let zero = BlochAngles::new(0.0, 0.0);
    let plus = BlochAngles::new(PI / 2.0, 0.0);
    let rows = exec
        .map_indexed(setup.config.discriminate_trials, |i| {
            let mut rng = trial_rng(setup.config.seed, i);
            let truth_zero = rng.random_bool(0.5);
            let spin = if truth_zero { &zero } else { &plus };
            discriminate(spin, &setup.geom, &[setup.ground], &[1.0], &setup.probe, setup.noise_sigma, &mut rng)
                .map(|d| (truth_zero, d))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::compute)?;
    let mut confusion = [[0usize; 2]; 2];
    for (truth_zero, d) in &rows {
        let t = usize::from(!truth_zero);
        let p = usize::from(d.label == Label::Plus);
        confusion[t][p] += 1;
    }
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / rows.len() as f64;
    Ok(DiscriminationRun { rows, confusion, accuracy })
}

pub fn discrimination(setup: &Setup, exec: Exec) -> Result<CommandOutput, CliError> {
    let run = run_discrimination(setup, exec)?;
    let name = |zero: bool| if zero { "zero" } else { "plus" };
    let mut trials = Table::new("discriminate", &["trial", "truth", "label", "momentum", "correct"]);
    for (i, (truth_zero, d)) in run.rows.iter().enumerate() {
        let said_zero = d.label == Label::Zero;
        trials.push(vec![
            i.to_string(),
            name(*truth_zero).into(),
            name(said_zero).into(),
            num(d.momentum),
            flag(said_zero == *truth_zero),
        ]);
    }
    let mut confusion = Table::new("confusion", &["truth", "predicted_zero", "predicted_plus"]);
    for (t, label) in ["zero", "plus"].iter().enumerate() {
        confusion.push(vec![label.to_string(), run.confusion[t][0].to_string(), run.confusion[t][1].to_string()]);
    }
    Ok(CommandOutput {
        lines: vec![format!(
            "{} trials at sigma = {:.3e}: accuracy {:.6}",
            run.rows.len(),
            setup.noise_sigma,
            run.accuracy
        )],
        tables: vec![trials, confusion],
        outputs: json!({ "trials": run.rows.len(), "noise_sigma": setup.noise_sigma,
                         "accuracy": run.accuracy, "confusion": run.confusion }),
        ..Default::default()
    })
}

pub fn oracle(setup: &Setup, exec: Exec) -> Result<CommandOutput, CliError> {
    let report = run_oracle(&setup.oracle, exec).map_err(CliError::compute)?;
    let mut table = Table::new("oracle", &["check", "measured", "relation", "bound", "passed", "detail"]);
    let mut lines = Vec::new();
    for r in &report.rows {
        table.push(vec![
            r.name.clone(),
            num(r.measured),
            r.relation.symbol().into(),
            num(r.bound),
            flag(r.passed),
            r.detail.clone(),
        ]);
        lines.push(format!(
            "{:<46} {:>13.6e} {:>2} {:<11.4e} {}",
            r.name,
            r.measured,
            r.relation.symbol(),
            r.bound,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    let failures: Vec<String> = report.failures().map(|r| format!("oracle check {} failed: {}", r.name, r.detail)).collect();
    Ok(CommandOutput {
        tables: vec![table],
        outputs: json!({ "passed": report.passed(), "rows": report.rows.len(), "failed_checks": failures }),
        warnings: failures,
        lines,
        failed: !report.passed(),
    })
}

fn metric_names(cmd: SweepCommand) -> &'static [&'static str] {
    match cmd {
        SweepCommand::Spectrum => &["k_s1", "e_s1", "e_a1", "gap"],
        SweepCommand::Kick => &["theta", "p_final", "calibration"],
        SweepCommand::Clone => &["theta_hat", "phi_hat", "angular_error", "pole_flag"],
        SweepCommand::MonteCarlo => &["noise_sigma", "rms_error", "max_error", "fallbacks"],
        SweepCommand::Discriminate => &["noise_sigma", "accuracy"],
    }
}

fn sweep_row(cmd: SweepCommand, s: &Setup, exec: Exec) -> Result<Vec<f64>, CliError> {
    match cmd {
        SweepCommand::Spectrum => {
            let e = |p| solve_levels(&s.geom, p, 1).map(|l| l[0]).map_err(CliError::compute);
            let (sym, anti) = (e(Parity::Sym)?, e(Parity::Antisym)?);
            Ok(vec![sym.k, sym.energy, anti.energy, s.gap])
        }
        SweepCommand::Kick => {
            let k = probe_momentum(&s.hidden, &s.geom, &s.ground, &s.probe).map_err(CliError::compute)?;
            Ok(vec![s.hidden.theta(), k.p_final, s.calibration])
        }
        SweepCommand::Clone => {
            let (est, err) = clone_row(s)?;
            Ok(vec![est.theta_hat, est.phi_hat, err, f64::from(u8::from(est.pole_flag))])
        }
        SweepCommand::MonteCarlo => {
            let setup = MonteCarloSetup {
                plan: &s.plan,
                geom: &s.geom,
                level: &s.ground,
                probe: &s.probe,
                theta_margin: s.config.theta_margin,
            };
            let mc = monte_carlo(&setup, s.noise_sigma, s.config.trials, s.config.seed, exec).map_err(CliError::compute)?;
            Ok(vec![mc.noise_sigma, mc.rms_error, mc.max_error, mc.fallbacks as f64])
        }
        SweepCommand::Discriminate => {
            let run = run_discrimination(s, exec)?;
            Ok(vec![s.noise_sigma, run.accuracy])
        }
    }
}

pub fn sweep(cmd: SweepCommand, points: &[SweepPoint], exec: Exec) -> Result<CommandOutput, CliError> {
    let metrics = metric_names(cmd);
    let results = exec.map(points, |p| sweep_row(cmd, &p.setup, exec));
    let paths: Vec<&str> = points[0].assignments.iter().map(|(p, _)| p.as_str()).collect();
    let mut header: Vec<&str> = paths.clone();
    header.extend_from_slice(metrics);
    header.extend_from_slice(&["status", "error"]);
    let mut table = Table::new("sweep", &header);
    let mut rows_json = Vec::new();
    let mut errors = Vec::new();
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        let mut row: Vec<String> = p.assignments.iter().map(|(_, v)| v.to_string()).collect();
        match r {
            Ok(vals) => {
                row.extend(vals.iter().map(|&v| num(v)));
                row.extend(["ok".to_string(), String::new()]);
            }
            Err(e) => {
                row.extend(metrics.iter().map(|_| String::new()));
                row.extend(["error".to_string(), e.message().to_string()]);
                errors.push(format!("sweep row {i}: {}", e.message()));
            }
        }
        table.push(row);
        rows_json.push(json!({
            "assignments": p.assignments.iter().map(|(k, v)| json!({"path": k, "value": v})).collect::<Vec<_>>(),
            "config_hash": p.setup.config.hash(),
            "metrics": r.as_ref().ok().map(|v| metrics.iter().zip(v).map(|(k, x)| json!({"name": k, "value": x})).collect::<Vec<_>>()),
            "error": r.as_ref().err().map(|e| e.message().to_string()),
        }));
    }
    let mut trend = Table::new("sweep_trend", &["metric", "nondecreasing", "nonincreasing", "first", "last"]);
    let ok: Vec<&Vec<f64>> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    if !ok.is_empty() {
        for (j, name) in metrics.iter().enumerate() {
            let col: Vec<f64> = ok.iter().map(|r| r[j]).collect();
            let up = col.windows(2).all(|w| w[1] >= w[0]);
            let down = col.windows(2).all(|w| w[1] <= w[0]);
            trend.push(vec![name.to_string(), flag(up), flag(down), num(col[0]), num(col[col.len() - 1])]);
        }
    }
    Ok(CommandOutput {
        lines: vec![format!("{} sweep rows, {} failed", points.len(), errors.len())],
        tables: vec![table, trend],
        outputs: json!({ "rows": rows_json }),
        failed: !errors.is_empty(),
        warnings: errors,
    })
}
