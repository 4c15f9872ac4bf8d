//! disperse-lab command-line driver.
//!
//! Exit codes: 0 on success, 1 when a contracted slope or validity check
//! fails (or a run aborts), 2 on configuration errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use disperse_lab::checks::{self, Outcome};
use disperse_lab::config::{ExperimentConfig, LoadedConfig, SCHEMA_VERSION};
use disperse_lab::experiments::{
    fit_loglog, grid_for, strichartz_sweep, LseStudy, NormRate, NseStudy, PacketPolicy, RateReport,
    ValidityCheck,
};
use disperse_lab::grid_fourier::FieldState;
use disperse_lab::jfunctional::{min_j, JProblem};
use disperse_lab::norms::norm_lr;
use disperse_lab::projectors::{project_th, twogrid_range_projection, TwoGridPair};
use disperse_lab::propagators::{
    evolve_linear, evolve_nse, evolve_nse_twogrid, LinearPropagator, NseProblem, RestartSchedule,
};
use disperse_lab::symbols::{SchemeKind, SchemeSymbol};
use disperse_lab::Error;
use serde::Serialize;
use serde_json::json;

const TOOL: &str = concat!("disperse-lab ", env!("CARGO_PKG_VERSION"));

#[derive(Parser, Debug)]
#[command(name = "disperse-lab", version, about = "Convergence experiments for semi-discrete Schrödinger schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the projected datum to time T on each grid.
    Propagate(RunArgs),
    /// Error sweep over h with rate fits, without self-checks.
    Sweep(RunArgs),
    /// Full rate study with doubling self-checks.
    Rates(RunArgs),
    /// Packet Strichartz ratios over h.
    Strichartz(RunArgs),
    /// Minimum of the regularization functional over h.
    MinimizeJ(RunArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; falls back to the config's `out`, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    norms: Option<Vec<String>>,
    /// Margin of the rough profile; with it, the profile becomes rough:s,eps.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Contract(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("i/o: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_error(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

/// Config file (if any) with command-line overrides applied, then validated.
fn load(args: &RunArgs, scheme_default: Option<&str>) -> CliResult<LoadedConfig> {
    let (mut config, raw) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("config error: cannot read {}: {e}", path.display())))?;
            let loaded = ExperimentConfig::parse(&text).map_err(config_error)?;
            (loaded.config, loaded.raw)
        }
        None => {
            let missing = |f: &str| Failure::Config(format!("config error: field `{f}` missing: pass --{f} or --config"));
            let config = ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                scheme: args
                    .scheme
                    .clone()
                    .or(scheme_default.map(String::from))
                    .ok_or_else(|| missing("scheme"))?,
                profile: args
                    .profile
                    .clone()
                    .or(args.eps.map(|_| String::new()))
                    .ok_or_else(|| missing("profile"))?,
                s: args.s.ok_or_else(|| missing("s"))?,
                p: 0.0,
                t_final: 1.0,
                norms: vec!["Linf-l2".into()],
                h_list: args.h_list.clone().ok_or_else(|| missing("h-list"))?,
                dt: 1e-3,
                length: 102.4,
                time_samples: 200,
                record_every: 10,
                c_p: 1.0,
                seed: 0,
                expected_slope: None,
                slope_tol: 0.15,
                out: None,
            };
            (config, String::new())
        }
    };
    if let Some(v) = &args.scheme {
        config.scheme = v.clone();
    }
    if let Some(v) = &args.profile {
        config.profile = v.clone();
    }
    if let Some(v) = args.s {
        config.s = v;
    }
    if let Some(v) = args.p {
        config.p = v;
    }
    if let Some(v) = args.t_final {
        config.t_final = v;
    }
    if let Some(v) = &args.norms {
        config.norms = v.clone();
    }
    if let Some(v) = &args.h_list {
        config.h_list = v.clone();
    }
    if let Some(eps) = args.eps {
        config.profile = format!("rough:{},{eps}", config.s);
    }
    config.validate().map_err(config_error)?;
    Ok(LoadedConfig { config, raw })
}

fn out_dir(args: &RunArgs, config: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Write through a temporary file in the same directory, then rename.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

struct Outputs<'a> {
    dir: &'a Path,
    loaded: &'a LoadedConfig,
    command: &'a str,
}

impl Outputs<'_> {
    fn header(&self) -> serde_json::Value {
        json!({
            "tool": TOOL,
            "command": self.command,
            "config": self.loaded.config,
            "config_raw": self.loaded.raw,
        })
    }

    /// rates.json: the header merged with `body`.
    fn rates(&self, body: serde_json::Value) -> CliResult<()> {
        let mut v = self.header();
        if let (Some(obj), serde_json::Value::Object(extra)) = (v.as_object_mut(), body) {
            obj.extend(extra);
        }
        write_json(&self.dir.join("rates.json"), &v)
    }

    fn csv(&self, name: &str, header: &str, rows: &[String]) -> CliResult<()> {
        let mut text = format!("{header}\n");
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        write_atomic(&self.dir.join(name), text.as_bytes())
    }

    fn config_echo(&self) -> CliResult<()> {
        write_json(&self.dir.join("config.echo.json"), &self.header())
    }

    fn runtime(&self, seconds: f64) -> CliResult<()> {
        write_json(&self.dir.join("runtime.json"), &json!({ "tool": TOOL, "seconds": seconds }))
    }
}

fn results_rows(h: &[f64], norms: &[NormRate]) -> Vec<String> {
    let mut rows = Vec::new();
    for n in norms {
        for (hv, e) in h.iter().zip(&n.errors) {
            rows.push(format!("{hv},{},{e:e}", n.norm));
        }
    }
    rows
}

fn plot_rows(h: &[f64], norms: &[NormRate]) -> Vec<String> {
    let mut rows = Vec::new();
    for n in norms {
        for (hv, e) in h.iter().zip(&n.errors) {
            rows.push(format!("{},{hv},{e:e},{:.12},{:.12}", n.norm, hv.ln(), e.ln()));
        }
    }
    rows
}

fn slope_contract(config: &ExperimentConfig, norms: &[NormRate]) -> Vec<(String, bool)> {
    match config.expected_slope {
        Some(target) => norms
            .iter()
            .map(|n| (n.norm.clone(), n.within(target, config.slope_tol)))
            .collect(),
        None => Vec::new(),
    }
}

fn nse_study(config: &ExperimentConfig, kind: SchemeKind) -> CliResult<NseStudy> {
    if kind == SchemeKind::TwoGridCarrier {
        return Err(Failure::Config(
            "config error: field `scheme`: nonlinear sweeps of the two-grid scheme are not supported; use propagate".into(),
        ));
    }
    Ok(NseStudy {
        kind,
        profile: config.profile_spec()?,
        p: config.p,
        t_final: config.t_final,
        dt: config.dt,
        length: config.length,
        h_list: config.h_list.clone(),
        record_every: config.record_every,
        norms: config.norm_selectors()?,
        ref_factor: 4,
        ref_kind: SchemeKind::Exact,
        compare: None,
    })
}

fn lse_study(config: &ExperimentConfig, kind: SchemeKind) -> CliResult<LseStudy> {
    Ok(LseStudy {
        kind,
        profile: config.profile_spec()?,
        t_final: config.t_final,
        length: config.length,
        h_list: config.h_list.clone(),
        norms: config.norm_selectors()?,
        samples: config.time_samples,
    })
}

fn report_rates(out: &Outputs, h: &[f64], norms: &[NormRate], checks: Option<(&[ValidityCheck], bool)>) -> CliResult<()> {
    let contract = slope_contract(&out.loaded.config, norms);
    out.csv("results.csv", "h,norm,error", &results_rows(h, norms))?;
    out.csv("plotdata.csv", "norm,h,error,log_h,log_error", &plot_rows(h, norms))?;
    let (check_list, valid) = match checks {
        Some((c, v)) => (serde_json::to_value(c).unwrap_or_default(), json!(v)),
        None => (json!([]), json!("not checked")),
    };
    out.rates(json!({
        "h": h,
        "rates": norms,
        "checks": check_list,
        "valid": valid,
        "slope_contract": contract.iter().map(|(n, ok)| json!({"norm": n, "pass": ok})).collect::<Vec<_>>(),
    }))?;
    for n in norms {
        println!(
            "{:<8} slope {:>8} R² {:>7}  {}",
            n.norm,
            n.slope.map_or("-".into(), |v| format!("{v:.4}")),
            n.r2.map_or("-".into(), |v| format!("{v:.4}")),
            n.status
        );
    }
    let broken: Vec<&String> = contract.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    if !broken.is_empty() {
        return Err(Failure::Contract(format!("slope outside the expected band in {broken:?}")));
    }
    if let Some((_, false)) = checks {
        return Err(Failure::Contract("reference self-checks failed; report is not VALID".into()));
    }
    Ok(())
}

fn cmd_sweep(args: &RunArgs, full: bool) -> CliResult<()> {
    let loaded = load(args, None)?;
    set_jobs(args.jobs);
    let config = &loaded.config;
    let kind = config.scheme_kind()?;
    let dir = out_dir(args, &loaded.config);
    let out = Outputs {
        dir: &dir,
        loaded: &loaded,
        command: if full { "rates" } else { "sweep" },
    };
    out.config_echo()?;
    let start = Instant::now();
    let exact = kind == SchemeKind::Exact;
    let selectors = config.norm_selectors()?;
    let fit = |errors: Vec<Vec<f64>>| -> Vec<NormRate> {
        selectors
            .iter()
            .zip(errors)
            .map(|(s, e)| NormRate::fit(s.to_string(), &config.h_list, e, exact))
            .collect()
    };
    let result = if config.p == 0.0 {
        let study = lse_study(config, kind)?;
        if full {
            let r: RateReport = study.run()?;
            report_rates(&out, &r.h_values, &r.norms, Some((&r.checks, r.valid)))
        } else {
            let (errors, _) = study.sweep()?;
            report_rates(&out, &config.h_list, &fit(errors), None)
        }
    } else {
        let study = nse_study(config, kind)?;
        if full {
            let r = study.run()?;
            report_rates(&out, &r.report.h_values, &r.report.norms, Some((&r.report.checks, r.valid)))
        } else {
            report_rates(&out, &config.h_list, &fit(study.errors()?), None)
        }
    };
    out.runtime(start.elapsed().as_secs_f64())?;
    result
}

fn cmd_propagate(args: &RunArgs) -> CliResult<()> {
    let loaded = load(args, None)?;
    set_jobs(args.jobs);
    let config = &loaded.config;
    let kind = config.scheme_kind()?;
    let profile = config.profile_spec()?;
    let dir = out_dir(args, &loaded.config);
    let out = Outputs {
        dir: &dir,
        loaded: &loaded,
        command: "propagate",
    };
    out.config_echo()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut last: Option<FieldState> = None;
    for &h in &config.h_list {
        let g = grid_for(h, config.length)?;
        let mut phi = project_th(&profile, &g)?;
        let u = if config.p == 0.0 {
            if kind == SchemeKind::TwoGridCarrier {
                phi = twogrid_range_projection(&phi, &TwoGridPair::from_fine(g)?)?;
            }
            let prop = LinearPropagator::new(SchemeSymbol::new(kind, h)?, g)?;
            evolve_linear(&prop, &phi, config.t_final)?
        } else if kind == SchemeKind::TwoGridCarrier {
            let pair = TwoGridPair::from_fine(g)?;
            let phi = twogrid_range_projection(&phi, &pair)?;
            let sched = RestartSchedule::new(config.c_p, phi.norm_l2(), config.p)?;
            let mut prob = NseProblem::new(
                config.p,
                SchemeSymbol::new(kind, h)?,
                config.t_final,
                config.dt,
                phi,
            )?;
            prob.record_every = config.record_every;
            let run = evolve_nse_twogrid(&prob, &pair, &sched)?;
            run.trace.states.last().cloned().unwrap_or_else(|| FieldState::zeros(g))
        } else {
            let mut prob = NseProblem::new(
                config.p,
                SchemeSymbol::new(kind, h)?,
                config.t_final,
                config.dt,
                phi,
            )?;
            prob.record_every = config.record_every;
            let tr = evolve_nse(&prob)?;
            tr.states.last().cloned().unwrap_or_else(|| FieldState::zeros(g))
        };
        for r in [2.0, 4.0, 6.0, f64::INFINITY] {
            let id = if r.is_infinite() { "l-inf".to_string() } else { format!("l{r}") };
            rows.push(format!("{h},{id},{:e}", norm_lr(&u, r)?));
        }
        println!("h = {h}: ‖u(T)‖_l² = {:.12}", u.norm_l2());
        last = Some(u);
    }
    out.csv("results.csv", "h,norm,value", &rows)?;
    if let Some(u) = last {
        let rows: Vec<String> = u
            .grid
            .positions()
            .iter()
            .zip(&u.values)
            .map(|(x, v)| format!("{x},{:e},{:e}", v.re, v.im))
            .collect();
        out.csv("plotdata.csv", "x,re,im", &rows)?;
    }
    out.runtime(start.elapsed().as_secs_f64())?;
    Ok(())
}

fn cmd_strichartz(args: &RunArgs) -> CliResult<()> {
    let loaded = load(args, None)?;
    set_jobs(args.jobs);
    let config = &loaded.config;
    let kind = config.scheme_kind()?;
    let (q, r) = config.norm_selectors()?[0].exponents(config.p)?;
    let dir = out_dir(args, &loaded.config);
    let out = Outputs {
        dir: &dir,
        loaded: &loaded,
        command: "strichartz",
    };
    out.config_echo()?;
    let start = Instant::now();
    let policy = PacketPolicy {
        t_final: config.t_final,
        ..PacketPolicy::default()
    };
    let t = strichartz_sweep(kind, &policy, &config.h_list, q, r)?;
    let norm = &config.norms[0];
    let rows: Vec<String> = t.rows.iter().map(|row| format!("{},{norm},{:e}", row.h, row.ratio)).collect();
    out.csv("results.csv", "h,norm,ratio", &rows)?;
    out.csv("plotdata.csv", "h,norm,ratio", &rows)?;
    out.rates(json!({
        "table": t,
        "strictly_increasing": t.strictly_increasing(),
        "growth": t.growth(),
        "band": t.band(),
    }))?;
    for row in &t.rows {
        println!("h = {:<8} ratio {:.6}", row.h, row.ratio);
    }
    println!("growth {:.4}, band {:.4}", t.growth(), t.band());
    out.runtime(start.elapsed().as_secs_f64())?;
    Ok(())
}

fn cmd_minimize_j(args: &RunArgs) -> CliResult<()> {
    let loaded = load(args, Some("exact"))?;
    let config = &loaded.config;
    let profile = config.profile_spec()?;
    let dir = out_dir(args, &loaded.config);
    let out = Outputs {
        dir: &dir,
        loaded: &loaded,
        command: "minimize-j",
    };
    out.config_echo()?;
    let start = Instant::now();
    let mut values = Vec::new();
    let mut rows = Vec::new();
    for &h in &config.h_list {
        let m = min_j(&JProblem::new(
            disperse_lab::jfunctional::SpectralMeasure::Profile(profile),
            h,
            config.s,
        )?)?;
        rows.push(format!(
            "{h},{:e},{:e},{:e},{:e},{:e}",
            m.ch.c, m.value, m.ch.bracket.0, m.ch.bracket.1, m.ch.residual
        ));
        println!("h = {h:e}: min J = {:.6e}, c_h² = {:.6}", m.value, m.ch.x);
        values.push(m.value);
    }
    out.csv("results.csv", "h,c_h,min_j,c_sq_lo,c_sq_hi,residual", &rows)?;
    let logs: Vec<f64> = config.h_list.iter().map(|h| h.ln().abs()).collect();
    let plot: Vec<String> = logs.iter().zip(&values).map(|(l, v)| format!("{l:.12},{v:e}")).collect();
    out.csv("plotdata.csv", "abs_log_h,min_j", &plot)?;
    let (slope, r2) = fit_loglog(&logs, &values)?;
    out.rates(json!({ "h": config.h_list, "min_j": values, "log_exponent": -slope, "r2": r2 }))?;
    println!("min J ∝ |log h|^-{:.4} (R² {r2:.4})", -slope);
    out.runtime(start.elapsed().as_secs_f64())?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    set_jobs(args.jobs);
    let suite: Vec<Outcome> = checks::verify_suite();
    for o in &suite {
        println!("{o}");
    }
    if let Some(dir) = &args.out {
        write_json(&dir.join("verify.json"), &json!({ "tool": TOOL, "outcomes": suite }))?;
    }
    let failed = suite.iter().filter(|o| !o.pass).count();
    if failed > 0 {
        return Err(Failure::Contract(format!("{failed} of {} invariants failed", suite.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Propagate(a) => cmd_propagate(a),
        Command::Sweep(a) => cmd_sweep(a, false),
        Command::Rates(a) => cmd_sweep(a, true),
        Command::Strichartz(a) => cmd_strichartz(a),
        Command::MinimizeJ(a) => cmd_minimize_j(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Contract(msg)) => {
            eprintln!("contract failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("run failed: {msg}");
            ExitCode::from(1)
        }
    }
}
