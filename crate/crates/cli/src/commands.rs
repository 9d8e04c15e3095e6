use std::fmt;
use std::path::{Path, PathBuf};

use dmpa::closedform::purity;
use dmpa::config::ConfigValues;
use dmpa::dynamics::{default_time_step, integrate_riccati, steady_state_numeric, CovarianceState};
use dmpa::experiments::{figure1_sweep, figure2_sweep, optimize_mu, OptimumLocation};
use dmpa::params::{validate, DetuningSign, RotatingFrameParams, Scheme};
use dmpa::spectra::{integrated_covariance, psd_at, unconditional_psd};
use dmpa::trajectory::{ensemble_time_step, simulate_conditional, TrajectoryOptions};

use crate::args::{Cli, Command, Format, OutArgs, ParamArgs, SweepVar};
use crate::svg::{self, Panel, Scale, Series};

#[derive(Debug)]
pub enum CliError {
    /// Wrong invocation; exits 2.
    Usage(String),
    /// The model rejected the request; exits 1 (except config parse
    /// errors, which count as usage).
    Domain(dmpa::Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<dmpa::Error> for CliError {
    fn from(e: dmpa::Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Domain(dmpa::Error::Config(_)) => 2,
            CliError::Domain(_) | CliError::Io(..) => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Validate { params, quality } => cmd_validate(&params, quality),
        Command::Steady { params, out, t_end } => cmd_steady(&params, &out, t_end),
        Command::Trajectory {
            params,
            out,
            seed,
            stream,
            t_end,
            dt,
        } => cmd_trajectory(&params, &out, seed, stream, t_end, dt),
        Command::Spectrum {
            params,
            out,
            omega_max,
            points,
        } => cmd_spectrum(&params, &out, omega_max, points),
        Command::MuOpt { params, out } => cmd_mu_opt(&params, &out),
        Command::Figure1 {
            out,
            eta,
            n_th,
            targets,
        } => cmd_figure1(&out, eta, n_th, targets),
        Command::Figure2 {
            out,
            chi_prime,
            x_min,
            x_max,
            points,
        } => cmd_figure2(&out, &chi_prime, x_min, x_max, points),
        Command::Sweep {
            params,
            out,
            var,
            from,
            to,
            points,
            log,
            track_qnd,
        } => cmd_sweep(&params, &out, var, from, to, points, log, track_qnd),
    }
}

/// Layer defaults < config file < flags into parameters. Rates are in units
/// of gamma unless `--absolute` was passed, so gamma must resolve to 1 then.
fn resolve(args: &ParamArgs) -> CliResult<(RotatingFrameParams, Scheme, DetuningSign)> {
    let mut file_cfg = ConfigValues::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        file_cfg = ConfigValues::parse(&text)?;
    }
    let flags = ConfigValues {
        gamma: args.gamma,
        chi: args.chi,
        delta: args.delta,
        mu: args.mu,
        eta: args.eta,
        n_th: args.n_th,
        n_bad: args.n_bad,
        scheme: args.scheme.map(Scheme::from),
        detuning_sign: args.detuning_sign.map(DetuningSign::from),
    };
    let merged = file_cfg.merged(&flags);
    let sign = merged.detuning_sign.unwrap_or(DetuningSign::Minus);
    let (p, scheme) = merged.resolve();
    if !args.absolute && p.gamma != 1.0 {
        return Err(CliError::Usage(format!(
            "rates are in units of gamma, so gamma must be 1 (got {}); \
             pass --absolute to use raw rates",
            p.gamma
        )));
    }
    Ok((p, scheme, sign))
}

fn output_plan(out: &OutArgs) -> CliResult<Option<(PathBuf, Format)>> {
    let Some(path) = &out.out else {
        return match out.format {
            None => Ok(None),
            Some(_) => Err(CliError::Usage("--format requires --out".into())),
        };
    };
    let format = match out.format {
        Some(f) => f,
        None => {
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            match ext.as_deref() {
                Some("csv") => Format::Csv,
                Some("json") => Format::Json,
                Some("svg") => Format::Svg,
                _ => {
                    return Err(CliError::Usage(format!(
                        "cannot infer output format from {}; pass --format",
                        path.display()
                    )))
                }
            }
        }
    };
    Ok(Some((path.clone(), format)))
}

fn write_out(path: &Path, content: &str) -> CliResult {
    std::fs::write(path, content).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_svg(path: &Path, panels: &[Panel]) -> CliResult {
    let doc = svg::render(panels).map_err(CliError::Usage)?;
    write_out(path, &doc)
}

fn print_summary(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}", line.join(" "));
}

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

fn json_doc(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Unix timestamp for JSON metadata, taken from SOURCE_DATE_EPOCH only so
/// output stays reproducible.
fn generated_at() -> CliResult<Option<u64>> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.trim().parse::<u64>().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "SOURCE_DATE_EPOCH must be a unix timestamp in seconds, got {v:?}"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn require_positive(name: &str, v: f64) -> CliResult {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn filter_width_ratio_of(p: &RotatingFrameParams, state: &CovarianceState) -> f64 {
    1.0 + 2.0 * p.eta * p.mu * (state.v_x + state.v_y) / p.gamma
}

fn cmd_validate(params: &ParamArgs, quality: Option<f64>) -> CliResult {
    let (p, scheme, _) = resolve(params)?;
    let report = validate(&p, scheme, quality);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(first) = report.errors.first() {
        return Err(dmpa::Error::InvalidParameter(first.clone()).into());
    }
    if !report.stable {
        return Err(dmpa::Error::UnstableDrift {
            max_re: report.max_eigenvalue_re,
        }
        .into());
    }
    print_summary(&[
        ("ok", "true".into()),
        ("scheme", scheme.as_str().into()),
        ("max_eigenvalue_re", num(report.max_eigenvalue_re)),
        ("warnings", report.warnings.len().to_string()),
    ]);
    Ok(())
}

fn cmd_steady(params: &ParamArgs, out: &OutArgs, t_end: f64) -> CliResult {
    let plan = output_plan(out)?;
    require_positive("--t-end", t_end)?;
    let (p, scheme, _) = resolve(params)?;
    let state = steady_state_numeric(&p, scheme)?;
    let pur = purity(&state)?;
    let g = state.c / state.v_x;
    let mu_eff_ratio = 1.0 + g * g;
    let width = filter_width_ratio_of(&p, &state);
    print_summary(&[
        ("v_x", num(state.v_x)),
        ("v_y", num(state.v_y)),
        ("c", num(state.c)),
        ("purity", num(pur)),
        ("g", num(g)),
        ("mu_eff_ratio", num(mu_eff_ratio)),
        ("filter_width_ratio", num(width)),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "meta": { "params": p, "scheme": scheme.as_str() },
                "state": state,
                "purity": pur,
                "g": g,
                "mu_eff_ratio": mu_eff_ratio,
                "filter_width_ratio": width,
            });
            write_out(&path, &json_doc(&doc))
        }
        Format::Csv | Format::Svg => {
            // relaxation from the thermal state onto the stationary covariance;
            // the conditioning rate grows on the way, so bound dt by both ends
            let initial = CovarianceState::thermal(p.n_th + 0.5);
            let dt = default_time_step(&p, scheme, &initial)
                .min(default_time_step(&p, scheme, &state));
            let relax = integrate_riccati(&initial, &p, scheme, t_end / p.gamma, dt)?;
            match format {
                Format::Csv => write_out(&path, &relax.to_csv()),
                _ => {
                    let pts: Vec<(f64, f64)> = relax
                        .t
                        .iter()
                        .zip(&relax.states)
                        .map(|(t, s)| (t * p.gamma, s.v_x))
                        .collect();
                    write_svg(
                        &path,
                        &[Panel {
                            title: "Relaxation of the conditional variance".into(),
                            x_label: "t * gamma".into(),
                            y_label: "V_X".into(),
                            x_scale: Scale::Linear,
                            y_scale: Scale::Linear,
                            series: vec![Series {
                                label: String::new(),
                                points: pts,
                            }],
                        }],
                    )
                }
            }
        }
    }
}

fn cmd_trajectory(
    params: &ParamArgs,
    out: &OutArgs,
    seed: u64,
    stream: u64,
    t_end: f64,
    dt: Option<f64>,
) -> CliResult {
    let plan = output_plan(out)?;
    require_positive("--t-end", t_end)?;
    let (p, scheme, _) = resolve(params)?;
    let dt_abs = match dt {
        Some(d) => {
            require_positive("--dt", d)?;
            d / p.gamma
        }
        None => ensemble_time_step(&p, scheme)?,
    };
    let opts = TrajectoryOptions {
        stream,
        ..TrajectoryOptions::default()
    };
    let rec = simulate_conditional(&p, scheme, seed, t_end / p.gamma, dt_abs, &opts)?;
    let last = rec.times.len() - 1;
    let final_state = rec.cov_path.final_state();
    print_summary(&[
        ("steps", last.to_string()),
        ("mean_x", num(rec.mean_x[last])),
        ("mean_y", num(rec.mean_y[last])),
        ("v_x", num(final_state.v_x)),
        ("v_y", num(final_state.v_y)),
        ("filter_width_ratio", num(filter_width_ratio_of(&p, &final_state))),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => write_out(&path, &rec.to_csv()),
        Format::Json => {
            let t: Vec<f64> = rec.times.iter().map(|t| t * p.gamma).collect();
            let doc = serde_json::json!({
                "meta": {
                    "params": p,
                    "scheme": scheme.as_str(),
                    "seed": rec.rng_seed,
                    "stream": rec.stream,
                },
                "t": t,
                "mean_x": rec.mean_x,
                "mean_y": rec.mean_y,
                "v_x": rec.cov_path.states.iter().map(|s| s.v_x).collect::<Vec<_>>(),
                "v_y": rec.cov_path.states.iter().map(|s| s.v_y).collect::<Vec<_>>(),
                "c": rec.cov_path.states.iter().map(|s| s.c).collect::<Vec<_>>(),
                "records": rec.records,
            });
            write_out(&path, &json_doc(&doc))
        }
        Format::Svg => {
            let series = |name: &str, ys: &[f64]| Series {
                label: name.into(),
                points: rec
                    .times
                    .iter()
                    .zip(ys)
                    .map(|(t, y)| (t * p.gamma, *y))
                    .collect(),
            };
            write_svg(
                &path,
                &[Panel {
                    title: format!("Conditional means (seed {seed}, stream {stream})"),
                    x_label: "t * gamma".into(),
                    y_label: "quadrature mean".into(),
                    x_scale: Scale::Linear,
                    y_scale: Scale::Linear,
                    series: vec![
                        series("mean_x", &rec.mean_x),
                        series("mean_y", &rec.mean_y),
                    ],
                }],
            )
        }
    }
}

fn cmd_spectrum(params: &ParamArgs, out: &OutArgs, omega_max: f64, points: usize) -> CliResult {
    let plan = output_plan(out)?;
    require_positive("--omega-max", omega_max)?;
    if points < 2 {
        return Err(CliError::Usage(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    let (p, scheme, _) = resolve(params)?;
    let omegas: Vec<f64> = (0..points)
        .map(|i| (-omega_max + 2.0 * omega_max * i as f64 / (points - 1) as f64) * p.gamma)
        .collect();
    let psd = unconditional_psd(&p, scheme, &omegas)?;
    let (s0x, s0y, _) = psd_at(&p, scheme, 0.0);
    let integ = integrated_covariance(&p, scheme)?;
    print_summary(&[
        ("s_xx_0", num(s0x * p.gamma)),
        ("s_yy_0", num(s0y * p.gamma)),
        ("v_x_int", num(integ.v_x)),
        ("v_y_int", num(integ.v_y)),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => write_out(&path, &psd.to_csv()),
        Format::Json => {
            let rows: Vec<serde_json::Value> = (0..psd.omega.len())
                .map(|i| {
                    serde_json::json!({
                        "omega": psd.omega[i] / p.gamma,
                        "s_xx": psd.s_xx[i] * p.gamma,
                        "s_yy": psd.s_yy[i] * p.gamma,
                        "s_xy": psd.s_xy[i] * p.gamma,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "meta": { "params": p, "scheme": scheme.as_str() },
                "rows": rows,
            });
            write_out(&path, &json_doc(&doc))
        }
        Format::Svg => {
            let series = |name: &str, ys: &[f64]| Series {
                label: name.into(),
                points: psd
                    .omega
                    .iter()
                    .zip(ys)
                    .map(|(w, s)| (w / p.gamma, s * p.gamma))
                    .collect(),
            };
            write_svg(
                &path,
                &[Panel {
                    title: "Symmetrized stationary spectra".into(),
                    x_label: "omega / gamma".into(),
                    y_label: "S * gamma".into(),
                    x_scale: Scale::Linear,
                    y_scale: Scale::Linear,
                    series: vec![
                        series("s_xx", &psd.s_xx),
                        series("s_yy", &psd.s_yy),
                        series("s_xy", &psd.s_xy),
                    ],
                }],
            )
        }
    }
}

fn location_str(loc: OptimumLocation) -> &'static str {
    match loc {
        OptimumLocation::Interior => "interior",
        OptimumLocation::LowerBound => "lower-bound",
        OptimumLocation::UpperBound => "upper-bound",
    }
}

fn cmd_mu_opt(params: &ParamArgs, out: &OutArgs) -> CliResult {
    let plan = output_plan(out)?;
    if matches!(plan, Some((_, Format::Svg))) {
        return Err(CliError::Usage(
            "mu-opt has no plot output; use csv or json".into(),
        ));
    }
    let (p, scheme, _) = resolve(params)?;
    if scheme == Scheme::Bae {
        return Err(CliError::Usage(
            "mu-opt optimizes the driven scheme; --scheme bae is not supported".into(),
        ));
    }
    let r = optimize_mu(&p)?;
    print_summary(&[
        ("mu_opt_over_gamma", num(r.mu_opt / p.gamma)),
        ("v_x_min", num(r.v_x_min)),
        ("location", location_str(r.location).into()),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => write_out(
            &path,
            &format!(
                "mu_opt_over_gamma,v_x_min,location\n{},{},{}\n",
                r.mu_opt / p.gamma,
                r.v_x_min,
                location_str(r.location)
            ),
        ),
        Format::Json => {
            let doc = serde_json::json!({
                "meta": { "params": p, "scheme": scheme.as_str() },
                "mu_opt_over_gamma": r.mu_opt / p.gamma,
                "v_x_min": r.v_x_min,
                "location": location_str(r.location),
            });
            write_out(&path, &json_doc(&doc))
        }
        Format::Svg => unreachable!("rejected before solving"),
    }
}

fn default_targets() -> Vec<f64> {
    let (hi, lo) = (0.45_f64, 0.001_f64);
    let n = 25;
    (0..n)
        .map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn cmd_figure1(out: &OutArgs, eta: f64, n_th: f64, targets: Option<Vec<f64>>) -> CliResult {
    let plan = output_plan(out)?;
    let targets = targets.unwrap_or_else(default_targets);
    let mut sweep = figure1_sweep(eta, n_th, &targets)?;
    sweep.meta.generated_at = generated_at()?;
    let solved = sweep.rows.iter().filter(|r| r.status == "ok").count();
    print_summary(&[
        ("rows", sweep.rows.len().to_string()),
        ("solved", solved.to_string()),
        ("eta", eta.to_string()),
        ("N", n_th.to_string()),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => write_out(&path, &sweep.to_csv()),
        Format::Json => write_out(&path, &(sweep.to_json() + "\n")),
        Format::Svg => {
            let pick = |f: &dyn Fn(&dmpa::experiments::Figure1Row) -> Option<f64>| {
                sweep
                    .rows
                    .iter()
                    .filter_map(|r| f(r).map(|y| (r.v_x_target, y)))
                    .collect::<Vec<_>>()
            };
            let two = |a: Vec<(f64, f64)>, b: Vec<(f64, f64)>| {
                vec![
                    Series {
                        label: "driven".into(),
                        points: a,
                    },
                    Series {
                        label: "evading".into(),
                        points: b,
                    },
                ]
            };
            let panels = vec![
                Panel {
                    title: "Stationary purity at the squeezing target".into(),
                    x_label: "target V_X".into(),
                    y_label: "purity".into(),
                    x_scale: Scale::Log,
                    y_scale: Scale::Linear,
                    series: two(pick(&|r| r.purity_dmpa), pick(&|r| r.purity_bae)),
                },
                Panel {
                    title: "Measurement rate".into(),
                    x_label: "target V_X".into(),
                    y_label: "mu / gamma".into(),
                    x_scale: Scale::Log,
                    y_scale: Scale::Log,
                    series: two(pick(&|r| r.mu_opt_over_gamma), pick(&|r| r.mu_bae_over_gamma)),
                },
                Panel {
                    title: "Drive strength".into(),
                    x_label: "target V_X".into(),
                    y_label: "chi / gamma".into(),
                    x_scale: Scale::Log,
                    y_scale: Scale::Log,
                    series: vec![Series {
                        label: "driven".into(),
                        points: pick(&|r| r.chi_prime),
                    }],
                },
            ];
            write_svg(&path, &panels)
        }
    }
}

fn cmd_figure2(out: &OutArgs, chi_prime: &[f64], x_min: f64, x_max: f64, points: usize) -> CliResult {
    let plan = output_plan(out)?;
    require_positive("--x-min", x_min)?;
    require_positive("--x-max", x_max)?;
    if x_min >= x_max {
        return Err(CliError::Usage(format!(
            "--x-min must be below --x-max, got {x_min} and {x_max}"
        )));
    }
    if points < 2 {
        return Err(CliError::Usage(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| x_min * (x_max / x_min).powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut sweep = figure2_sweep(chi_prime, &xs)?;
    sweep.meta.generated_at = generated_at()?;
    print_summary(&[
        ("traces", sweep.summaries.len().to_string()),
        ("rows", sweep.rows.len().to_string()),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => write_out(&path, &sweep.to_csv()),
        Format::Json => write_out(&path, &(sweep.to_json() + "\n")),
        Format::Svg => {
            let series: Vec<Series> = sweep
                .summaries
                .iter()
                .map(|s| Series {
                    label: format!("chi' = {}", s.chi_prime),
                    points: sweep
                        .rows
                        .iter()
                        .filter(|r| r.chi_prime == s.chi_prime)
                        .map(|r| (r.snr_over_chi2, r.mu_eff_ratio))
                        .collect(),
                })
                .collect();
            write_svg(
                &path,
                &[Panel {
                    title: "Effective measurement-strength enhancement".into(),
                    x_label: "snr / chi'^2".into(),
                    y_label: "mu_eff / mu".into(),
                    x_scale: Scale::Log,
                    y_scale: Scale::Log,
                    series,
                }],
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    params: &ParamArgs,
    out: &OutArgs,
    var: SweepVar,
    from: f64,
    to: f64,
    points: usize,
    log: bool,
    track_qnd: bool,
) -> CliResult {
    let plan = output_plan(out)?;
    if points < 2 {
        return Err(CliError::Usage(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    if from == to || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Usage(format!(
            "sweep bounds must be distinct finite values, got {from} and {to}"
        )));
    }
    if log && !(from > 0.0 && to > 0.0) {
        return Err(CliError::Usage(format!(
            "--log needs positive bounds, got {from} and {to}"
        )));
    }
    if track_qnd && var != SweepVar::Chi {
        return Err(CliError::Usage(
            "--track-qnd only applies to --var chi".into(),
        ));
    }
    let (base, scheme, sign) = resolve(params)?;

    let values: Vec<f64> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            if log {
                from * (to / from).powf(f)
            } else {
                from + (to - from) * f
            }
        })
        .collect();

    struct Row {
        value: f64,
        state: CovarianceState,
        purity: f64,
        width: f64,
    }
    let mut rows = Vec::with_capacity(points);
    for &v in &values {
        let mut p = base;
        match var {
            SweepVar::Mu => p.mu = v,
            SweepVar::Chi => {
                p.chi = v;
                if track_qnd {
                    p.delta = sign.apply(v);
                }
            }
            SweepVar::Delta => p.delta = v,
            SweepVar::Eta => p.eta = v,
            SweepVar::NTh => p.n_th = v,
            SweepVar::NBad => p.n_bad = v,
        }
        let state = steady_state_numeric(&p, scheme).map_err(|e| {
            eprintln!("sweep failed at {} = {v}", var.key());
            CliError::from(e)
        })?;
        rows.push(Row {
            value: v,
            purity: purity(&state)?,
            width: filter_width_ratio_of(&p, &state),
            state,
        });
    }
    print_summary(&[
        ("var", var.key().into()),
        ("points", points.to_string()),
        ("v_x_first", num(rows[0].state.v_x)),
        ("v_x_last", num(rows[points - 1].state.v_x)),
    ]);

    let Some((path, format)) = plan else {
        return Ok(());
    };
    match format {
        Format::Csv => {
            let mut csv = String::from("value,v_x,v_y,c,purity,filter_width_ratio\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.value, r.state.v_x, r.state.v_y, r.state.c, r.purity, r.width
                ));
            }
            write_out(&path, &csv)
        }
        Format::Json => {
            let json_rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "value": r.value,
                        "v_x": r.state.v_x,
                        "v_y": r.state.v_y,
                        "c": r.state.c,
                        "purity": r.purity,
                        "filter_width_ratio": r.width,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "meta": {
                    "params": base,
                    "scheme": scheme.as_str(),
                    "var": var.key(),
                    "from": from,
                    "to": to,
                    "log": log,
                },
                "rows": json_rows,
            });
            write_out(&path, &json_doc(&doc))
        }
        Format::Svg => {
            let series = |name: &str, f: &dyn Fn(&Row) -> f64| Series {
                label: name.into(),
                points: rows.iter().map(|r| (r.value, f(r))).collect(),
            };
            write_svg(
                &path,
                &[Panel {
                    title: format!("Stationary covariance against {}", var.key()),
                    x_label: var.key().into(),
                    y_label: "variance".into(),
                    x_scale: if log { Scale::Log } else { Scale::Linear },
                    y_scale: Scale::Linear,
                    series: vec![
                        series("v_x", &|r| r.state.v_x),
                        series("v_y", &|r| r.state.v_y),
                    ],
                }],
            )
        }
    }
}
