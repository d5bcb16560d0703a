//! Command-line front end: reads a JSON experiment config, runs one of the
//! library operations and writes a JSON report plus CSV tables.
//!
//! Exit codes: 0 holds or success, 1 fails, 2 inconclusive, 3 invalid input.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::blockvar::{
    check_conditions, delta_bar, delta_bar_prefixes, rho_block, validity_report, Condition,
    Status, ValidityReport,
};
use crate::coupling::{estimate_dbar, iterate_attractor, DbarConfig};
use crate::measures::DepthCap;
use crate::renewal::{build_spec, mechanical_frequency, renewal_exact, simulate_y};
use crate::Error;

pub use config::{
    parse_config, BlocksSpec, CheckSpec, ConditionKind, CoupleSpec, ExperimentConfig, GSpec,
    HellingerSpec, IterateSpec, MeasureSpec, RateSourceSpec, RatesSpec, RenewalSpecConfig,
    TailSpec, VariationSpec, CONFIG_SCHEMA,
};

pub const REPORT_SCHEMA: &str = "gmeasure.report/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Check,
    Blocks,
    Renewal,
    Couple,
    Hellinger,
    Iterate,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Check => "check",
            CommandName::Blocks => "blocks",
            CommandName::Renewal => "renewal",
            CommandName::Couple => "couple",
            CommandName::Hellinger => "hellinger",
            CommandName::Iterate => "iterate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gmeasure", version, about = "Uniqueness checks, block couplings and renewal bounds for g-measures")]
pub struct Cli {
    pub command: CommandName,
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for stochastic commands; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for report.json and CSV tables.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// A CSV table: file name, header and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: CommandName,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub status: &'static str,
    pub exit_code: i32,
    pub files: Vec<String>,
    pub result: Value,
}

/// Report and tables of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn status_code(status: Status) -> (i32, &'static str) {
    match status {
        Status::HoldsAtHorizon => (EXIT_OK, "holds_at_horizon"),
        Status::Fails => (EXIT_FAILS, "fails"),
        Status::Inconclusive => (EXIT_INCONCLUSIVE, "inconclusive"),
    }
}

struct Partial {
    code: i32,
    status: &'static str,
    seed: Option<u64>,
    trials: Option<usize>,
    result: Value,
    tables: Vec<Table>,
}

impl Partial {
    fn ok(result: Value, tables: Vec<Table>) -> Self {
        Partial { code: EXIT_OK, status: "success", seed: None, trials: None, result, tables }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

/// Run `command` on a parsed config; `raw` is the config text the digest
/// is taken over.
pub fn dispatch(
    command: CommandName,
    cfg: &ExperimentConfig,
    raw: &[u8],
    seed: Option<u64>,
) -> crate::Result<Outcome> {
    let seed = seed.or(cfg.seed);
    let part = match command {
        CommandName::Check => run_check(cfg)?,
        CommandName::Blocks => run_blocks(cfg)?,
        CommandName::Renewal => run_renewal(cfg, seed)?,
        CommandName::Couple => run_couple(cfg, seed)?,
        CommandName::Hellinger => run_hellinger(cfg)?,
        CommandName::Iterate => run_iterate(cfg)?,
    };
    let mut files: Vec<String> = part.tables.iter().map(|t| t.name.clone()).collect();
    files.push("report.json".into());
    Ok(Outcome {
        report: Report {
            schema: REPORT_SCHEMA,
            command,
            config_sha256: sha256_hex(raw),
            seed: part.seed,
            trials: part.trials,
            status: part.status,
            exit_code: part.code,
            files,
            result: part.result,
        },
        tables: part.tables,
    })
}

fn validity_table(rep: &ValidityReport) -> Table {
    Table {
        name: "validity.csv".into(),
        header: vec!["ell", "B_start", "b_ell", "r_ell", "rho_ell", "rho_source", "valid"],
        rows: rep
            .levels
            .iter()
            .map(|l| {
                vec![
                    l.level.to_string(),
                    l.start.to_string(),
                    l.b.to_string(),
                    real(l.r),
                    real(l.rho),
                    to_value(&l.rho_source).as_str().unwrap_or_default().to_string(),
                    l.valid.to_string(),
                ]
            })
            .collect(),
    }
}

fn run_check(cfg: &ExperimentConfig) -> crate::Result<Partial> {
    let Some(spec) = &cfg.check else {
        return Err(Error::InvalidInput("`check` needs a `check` section".into()));
    };
    let n = spec.horizon;
    if n == 0 {
        return Err(Error::InvalidInput("check horizon must be positive".into()));
    }
    let mut tables = Vec::new();
    let mut validity = None;
    let pair = if cfg.blocks.is_some() && cfg.rates.is_some() {
        Some(cfg.pair(Some(n))?)
    } else {
        None
    };
    if let (Some(pair), Some(_)) = (&pair, &cfg.g) {
        let rep = validity_report(&cfg.g()?, pair);
        tables.push(validity_table(&rep));
        validity = Some(rep);
    }
    let verdict = match spec.condition {
        ConditionKind::Square => check_conditions(&Condition::SquareSummable, &cfg.variations(n + 1)?, n, &spec.protocol),
        ConditionKind::BerbeeEps => {
            let Some(epsilon) = spec.epsilon else {
                return Err(Error::InvalidInput("berbee_eps needs `check.epsilon`".into()));
            };
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::InvalidInput("`check.epsilon` must be positive".into()));
            }
            check_conditions(&Condition::BerbeeEps { epsilon }, &cfg.variations(n + 1)?, n, &spec.protocol)
        }
        ConditionKind::Main => {
            let Some(pair) = pair else {
                return Err(Error::InvalidInput("main condition needs `blocks` and `rates`".into()));
            };
            let vars = crate::symbolic::VariationSequence::exact(Vec::new(), crate::symbolic::Tail::Unknown)?;
            check_conditions(&Condition::Main(pair), &vars, n, &spec.protocol)
        }
    };
    let (code, status) = status_code(verdict.status);
    Ok(Partial {
        code,
        status,
        seed: None,
        trials: None,
        result: json!({ "verdict": verdict, "validity": validity }),
        tables,
    })
}

fn run_blocks(cfg: &ExperimentConfig) -> crate::Result<Partial> {
    let pair = cfg.pair(None)?;
    let prefixes = delta_bar_prefixes(&pair);
    let blocks = pair.blocks();
    let rows = (0..pair.levels())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                blocks.ends()[i].to_string(),
                blocks.lengths()[i].to_string(),
                pair.s_values().map(|s| real(s[i])).unwrap_or_default(),
                real(pair.rates()[i]),
                real(prefixes[i]),
            ]
        })
        .collect();
    let mut tables = vec![Table {
        name: "blocks.csv".into(),
        header: vec!["ell", "B_ell", "b_ell", "s_ell", "r_ell", "delta_bar_prefix"],
        rows,
    }];
    let validity = match &cfg.g {
        Some(_) => {
            let rep = validity_report(&cfg.g()?, &pair);
            tables.push(validity_table(&rep));
            Some(rep)
        }
        None => None,
    };
    Ok(Partial::ok(
        json!({
            "levels": pair.levels(),
            "source": pair.source(),
            "degenerate": pair.is_degenerate(),
            "delta_bar": delta_bar(&pair),
            "validity": validity,
        }),
        tables,
    ))
}

fn run_renewal(cfg: &ExperimentConfig, seed: Option<u64>) -> crate::Result<Partial> {
    let Some(spec_cfg) = &cfg.renewal else {
        return Err(Error::InvalidInput("`renewal` needs a `renewal` section".into()));
    };
    let pair = cfg.pair(None)?;
    let spec = build_spec(&pair);
    let sol = renewal_exact(&spec, spec_cfg.horizon)?;
    let rows = sol.values.iter().enumerate().map(|(n, a)| vec![n.to_string(), real(*a)]).collect();
    let mut result = json!({
        "limit": sol.limit,
        "delta_bar": delta_bar(&pair),
        "sum_a": spec.sum_a,
        "expected_t1": spec.expected_t1,
        "last_value": sol.values.last(),
        "tail_error": sol.tail_error,
        "window_mean": sol.window_mean,
    });
    let mut part = Partial::ok(Value::Null, vec![Table { name: "renewal.csv".into(), header: vec!["n", "A_n"], rows }]);
    if let Some(steps) = spec_cfg.simulate_steps {
        let Some(seed) = seed else {
            return Err(Error::InvalidInput("simulation needs a seed (`seed` or --seed)".into()));
        };
        let sim = simulate_y(&pair, steps, seed, false)?;
        result["simulation"] = json!({
            "steps": sim.steps,
            "frequency_nonpositive": sim.frequency,
            "mechanical_frequency": mechanical_frequency(&pair),
        });
        part.seed = Some(seed);
        part.trials = Some(1);
    }
    part.result = result;
    Ok(part)
}

fn run_couple(cfg: &ExperimentConfig, seed: Option<u64>) -> crate::Result<Partial> {
    let Some(spec) = &cfg.couple else {
        return Err(Error::InvalidInput("`couple` needs a `couple` section".into()));
    };
    let Some(seed) = seed else {
        return Err(Error::InvalidInput("`couple` needs a seed (`seed` or --seed)".into()));
    };
    let g = cfg.g()?;
    let g_other = match &cfg.g_other {
        Some(s) => s.build()?,
        None => g.clone(),
    };
    let pair = cfg.pair(None)?;
    let est = estimate_dbar(
        &g,
        &g_other,
        &pair,
        &DbarConfig {
            horizon: spec.horizon,
            trials: spec.trials,
            seed,
            strategy: spec.strategy,
            initial: spec.initial.clone(),
            tail_fraction: spec.tail_fraction,
        },
    )?;
    let violations: usize = est.per_trial.iter().map(|t| t.violations).sum();
    let breaks: usize = est.per_trial.iter().map(|t| t.dominance_breaks).sum();
    let (code, status) = if violations > 0 || breaks > 0 {
        (EXIT_INCONCLUSIVE, "inconclusive")
    } else if est.estimate > est.ceiling + est.band {
        (EXIT_FAILS, "fails")
    } else {
        (EXIT_OK, "success")
    };
    let rows = est
        .per_trial
        .iter()
        .map(|t| {
            vec![t.trial.to_string(), t.seed.to_string(), real(t.tail_disagreement), t.violations.to_string()]
        })
        .collect();
    Ok(Partial {
        code,
        status,
        seed: Some(seed),
        trials: Some(spec.trials),
        result: json!({
            "estimate": est.estimate,
            "band": est.band,
            "ceiling": est.ceiling,
            "s": est.s,
            "horizon": est.horizon,
            "strategy": est.strategy,
            "violations": violations,
            "dominance_breaks": breaks,
        }),
        tables: vec![Table {
            name: "couple.csv".into(),
            header: vec!["trial", "seed", "tail_disagreement", "violations"],
            rows,
        }],
    })
}

fn run_hellinger(cfg: &ExperimentConfig) -> crate::Result<Partial> {
    let Some(spec) = &cfg.hellinger else {
        return Err(Error::InvalidInput("`hellinger` needs a `hellinger` section".into()));
    };
    if spec.max_b == 0 {
        return Err(Error::InvalidInput("`hellinger.max_b` must be positive".into()));
    }
    let g = cfg.g()?;
    let mut rows = Vec::new();
    let mut ordered = true;
    for big_b in 0..=spec.max_start {
        for b in 1..=spec.max_b {
            let r = rho_block(&g, big_b, b)?;
            ordered &= r.exact <= r.bound_log + 1e-12 && r.bound_log <= r.bound_sqrt + 1e-12;
            rows.push(vec![
                big_b.to_string(),
                b.to_string(),
                real(r.h),
                real(r.exact),
                real(r.bound_log),
                real(r.bound_sqrt),
                real(r.bound_w),
                real(r.slack),
            ]);
        }
    }
    let (code, status) = if ordered { (EXIT_OK, "success") } else { (EXIT_FAILS, "fails") };
    Ok(Partial {
        code,
        status,
        seed: None,
        trials: None,
        result: json!({ "rows": rows.len(), "bound_chain_holds": ordered }),
        tables: vec![Table {
            name: "hellinger.csv".into(),
            header: vec!["B", "b", "h", "rho_exact", "bound_log", "bound_sqrt", "bound_w", "slack"],
            rows,
        }],
    })
}

fn run_iterate(cfg: &ExperimentConfig) -> crate::Result<Partial> {
    let Some(spec) = &cfg.iterate else {
        return Err(Error::InvalidInput("`iterate` needs an `iterate` section".into()));
    };
    let g = cfg.g()?;
    let nu1 = spec.nu1.build(&g)?;
    let nu2 = spec.nu2.build(&g)?;
    let cap = spec.depth_cap.map(DepthCap).unwrap_or_else(|| DepthCap::default_for(g.alphabet()));
    let series = iterate_attractor(&g, &nu1, &nu2, spec.steps, cap)?;
    let last = *series.distances.last().unwrap();
    let reached = series.distances.iter().position(|&d| d < spec.tolerance);
    let (code, status) = if reached.is_some() { (EXIT_OK, "success") } else { (EXIT_INCONCLUSIVE, "inconclusive") };
    let rows = series
        .distances
        .iter()
        .zip(&series.resolution)
        .enumerate()
        .map(|(n, (d, r))| vec![n.to_string(), real(*d), real(*r)])
        .collect();
    Ok(Partial {
        code,
        status,
        seed: None,
        trials: None,
        result: json!({ "final_distance": last, "first_below_tolerance": reached, "tolerance": spec.tolerance }),
        tables: vec![Table { name: "iterate.csv".into(), header: vec!["n", "wasserstein", "resolution"], rows }],
    })
}

pub fn write_table(dir: &Path, table: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(dir.join(&table.name))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

/// Serialized report body (pretty JSON with a trailing newline).
pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GMEASURE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("GMEASURE_THREADS must be a positive integer, found {v:?}"))?;
    if n == 0 {
        return Err("GMEASURE_THREADS must be a positive integer".into());
    }
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_INVALID;
    }
    let raw = match std::fs::read(&cli.config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return EXIT_INVALID;
        }
    };
    let cfg = match std::str::from_utf8(&raw).map_err(|e| e.to_string()).and_then(parse_config) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INVALID;
        }
    };
    let outcome = match dispatch(cli.command, &cfg, &raw, cli.seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return EXIT_INVALID;
    }
    for table in &outcome.tables {
        if let Err(e) = write_table(&cli.out, table) {
            eprintln!("error: cannot write {}: {e}", table.name);
            return EXIT_INVALID;
        }
    }
    let body = report_json(&outcome.report);
    if let Err(e) = std::fs::write(cli.out.join("report.json"), &body) {
        eprintln!("error: cannot write report.json: {e}");
        return EXIT_INVALID;
    }
    print!("{body}");
    outcome.report.exit_code
}
