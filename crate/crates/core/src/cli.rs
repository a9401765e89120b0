//! The `verdoorn` command line: `fit`, `unitroot`, `simulate` and `scatter`.
//!
//! Exit codes: 0 clean, 2 usage or configuration error, 3 data error,
//! 4 finished but something was skipped.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::estimators::{DpdOptions, Method};
use crate::montecarlo::{run_replications, summarize, write_summary_csv, StudyConfig};
use crate::panel::{
    derive_productivity, emit_scatter_csv, load_industry_panels, to_growth_panel, GrowthKind, GrowthPanel, Schema,
    EMPLOYMENT, OUTPUT, PRODUCTIVITY,
};
use crate::report::{
    fit_block, fit_records, render_fit_text, render_unit_root_text, unit_root_records, write_csv, write_jsonl,
    FitBlock, Skip, UnitRootBlock,
};
use crate::unit_root::{unit_root_report, LagPolicy, Variable};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_SKIPPED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "verdoorn", version, about = "Productivity/output growth panel regressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate FE, RE, OLS and DPD models per industry.
    Fit(RunArgs),
    /// Fisher-type Phillips–Perron panel unit-root tests per industry.
    Unitroot(RunArgs),
    /// Run a Monte Carlo study described by a key = value file.
    Simulate(SimulateArgs),
    /// Write (q, p) growth pairs per industry for plotting.
    Scatter(RunArgs),
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// Level panel CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "region")]
    entity_column: String,
    #[arg(long, default_value = "year")]
    period_column: String,
    /// Column splitting the file into industries.
    #[arg(long)]
    industry_column: Option<String>,
    #[arg(long, default_value = OUTPUT)]
    output_column: String,
    /// Productivity levels; derived from output / employment when absent.
    #[arg(long)]
    productivity_column: Option<String>,
    #[arg(long)]
    employment_column: Option<String>,
    /// Industries to keep, comma-separated. Default: all.
    #[arg(long, value_delimiter = ',')]
    industries: Vec<String>,
    /// First period (inclusive) of the level window.
    #[arg(long)]
    from: Option<i64>,
    /// Last period (inclusive) of the level window.
    #[arg(long)]
    to: Option<i64>,
    #[arg(long, value_delimiter = ',', default_value = "fe,re,ols,dpd")]
    estimators: Vec<String>,
    #[arg(long, default_value_t = DpdOptions::default().max_instrument_lags)]
    max_instrument_lags: usize,
    /// Drop the lagged dependent variable from the DPD model.
    #[arg(long)]
    no_lagged_dependent: bool,
    /// `escalate` or `fixed:K`.
    #[arg(long, default_value = "escalate")]
    lag_policy: String,
    /// `log` or `relative`.
    #[arg(long, default_value = "log")]
    growth: String,
    /// Any of text, csv, jsonl.
    #[arg(long, value_delimiter = ',', default_value = "text,csv,jsonl")]
    formats: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// key = value file; its entries override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    /// Study description (key = value).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    JsonLines,
}

impl Format {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" => Some(Self::Text),
            "csv" => Some(Self::Csv),
            "jsonl" | "json-lines" | "json" => Some(Self::JsonLines),
            _ => None,
        }
    }
}

/// Validated settings shared by `fit`, `unitroot` and `scatter`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: Schema,
    pub productivity_column: Option<String>,
    pub employment_column: Option<String>,
    pub output_column: String,
    pub industries: Vec<String>,
    pub window: Option<(i64, i64)>,
    pub estimators: Vec<Method>,
    pub dpd: DpdOptions,
    pub lag_policy: LagPolicy,
    pub growth: GrowthKind,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(format!("{key}: invalid value {v:?}")))
}

impl RunArgs {
    /// Applies `key = value` lines on top of the flags.
    fn apply_config_file(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| config_err(format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            let v = v.trim();
            let opt = |v: &str| (!v.is_empty()).then(|| v.to_string());
            match key.as_str() {
                "input" => self.input = Some(PathBuf::from(v)),
                "entity_column" => self.entity_column = v.to_string(),
                "period_column" => self.period_column = v.to_string(),
                "industry_column" => self.industry_column = opt(v),
                "output_column" => self.output_column = v.to_string(),
                "productivity_column" => self.productivity_column = opt(v),
                "employment_column" => self.employment_column = opt(v),
                "industries" => self.industries = split_list(v),
                "from" => self.from = Some(parse_num(&key, v)?),
                "to" => self.to = Some(parse_num(&key, v)?),
                "estimators" => self.estimators = split_list(v),
                "max_instrument_lags" => self.max_instrument_lags = parse_num(&key, v)?,
                "lagged_dependent" => self.no_lagged_dependent = !parse_bool(&key, v)?,
                "no_lagged_dependent" => self.no_lagged_dependent = parse_bool(&key, v)?,
                "lag_policy" => self.lag_policy = v.to_string(),
                "growth" => self.growth = v.to_string(),
                "formats" => self.formats = split_list(v),
                "out" => self.out = PathBuf::from(v),
                other => return Err(config_err(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        Ok(())
    }

    fn resolve(mut self) -> Result<RunConfig> {
        if let Some(path) = self.config.clone() {
            let text = fs::read_to_string(&path)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
            self.apply_config_file(&text)?;
        }
        let input = self.input.ok_or_else(|| config_err("no input file given (--input)"))?;
        let window = match (self.from, self.to) {
            (None, None) => None,
            (from, to) => {
                let (from, to) = (from.unwrap_or(i64::MIN), to.unwrap_or(i64::MAX));
                if from > to {
                    return Err(config_err(format!("empty period window {from}..{to}")));
                }
                Some((from, to))
            }
        };
        let estimators = self
            .estimators
            .iter()
            .map(|e| Method::parse(e).ok_or_else(|| config_err(format!("unknown estimator {e:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if estimators.is_empty() {
            return Err(config_err("at least one estimator must be selected"));
        }
        let lag_policy =
            LagPolicy::parse(&self.lag_policy).ok_or_else(|| config_err(format!("bad lag policy {:?}", self.lag_policy)))?;
        let growth = match self.growth.to_ascii_lowercase().as_str() {
            "log" | "log-difference" | "logdiff" => GrowthKind::LogDifference,
            "relative" | "rel" => GrowthKind::Relative,
            g => return Err(config_err(format!("unknown growth kind {g:?}"))),
        };
        let formats = self
            .formats
            .iter()
            .map(|f| Format::parse(f).ok_or_else(|| config_err(format!("unknown format {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if formats.is_empty() {
            return Err(config_err("at least one output format must be selected"));
        }
        let employment_column = match (&self.productivity_column, self.employment_column) {
            (None, None) => Some(EMPLOYMENT.to_string()),
            (_, e) => e,
        };
        let mut variables = vec![self.output_column.as_str()];
        variables.extend(self.productivity_column.as_deref());
        variables.extend(employment_column.as_deref());
        let mut schema = Schema::new(&self.entity_column, &self.period_column, &variables);
        if let Some(col) = &self.industry_column {
            schema = schema.with_industry(col);
        }
        Ok(RunConfig {
            input,
            schema,
            productivity_column: self.productivity_column,
            employment_column,
            output_column: self.output_column,
            industries: self.industries,
            window,
            estimators,
            dpd: DpdOptions { max_instrument_lags: self.max_instrument_lags, lagged_dependent: !self.no_lagged_dependent },
            lag_policy,
            growth,
            out: self.out,
            formats,
        })
    }
}

/// Industries ready for analysis plus those dropped on the way.
struct Prepared {
    panels: Vec<(String, GrowthPanel)>,
    skips: Vec<Skip>,
    window_label: String,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let file = File::open(&cfg.input)
        .map_err(|e| Error::Invalid(format!("cannot open {}: {e}", cfg.input.display())))?;
    let loaded = load_industry_panels(std::io::BufReader::new(file), &cfg.schema)?;

    let mut internal = vec![OUTPUT];
    if cfg.productivity_column.is_some() {
        internal.push(PRODUCTIVITY);
    }
    if cfg.employment_column.is_some() {
        internal.push(EMPLOYMENT);
    }

    let mut skips = Vec::new();
    for wanted in &cfg.industries {
        if !loaded.iter().any(|(name, _)| name == wanted) {
            skips.push(Skip { industry: wanted.clone(), reason: "not present in the input".into() });
        }
    }
    let selected: Vec<_> = loaded
        .into_iter()
        .filter(|(name, _)| cfg.industries.is_empty() || cfg.industries.contains(name))
        .collect();

    let mut periods: Vec<i64> = Vec::new();
    let mut panels = Vec::new();
    for (name, ds) in selected {
        let ds = ds.with_variable_names(&internal)?;
        let ds = match cfg.window {
            Some((from, to)) => ds.restrict_periods(from, to)?,
            None => ds,
        };
        periods.extend(ds.periods().first().copied());
        periods.extend(ds.periods().last().copied());
        let (ds, _) = derive_productivity(&ds)?;
        let gp = to_growth_panel(&ds, cfg.growth)?;
        for d in gp.diagnostics() {
            let at = d.period.map(|p| format!(" {p}")).unwrap_or_default();
            eprintln!("warning: {name}: {}{at}: {}", d.entity, d.message);
        }
        if gp.is_empty() {
            skips.push(Skip { industry: name, reason: "no usable growth observations after filtering".into() });
        } else {
            panels.push((name, gp));
        }
    }
    let window_label = match cfg.window {
        Some((from, to)) if from != i64::MIN && to != i64::MAX => format!("{from}-{to}"),
        _ => match (periods.iter().min(), periods.iter().max()) {
            (Some(a), Some(b)) => format!("{a}-{b}"),
            _ => "empty".to_string(),
        },
    };
    Ok(Prepared { panels, skips, window_label })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut f = create(dir, name)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<i32> {
    let prep = prepare(cfg)?;
    let blocks: Vec<FitBlock> = prep
        .panels
        .par_iter()
        .map(|(name, gp)| fit_block(name, gp, &cfg.estimators, cfg.dpd))
        .collect();
    let mut skips = prep.skips;
    for b in &blocks {
        for (m, reason) in b.failures() {
            skips.push(Skip { industry: format!("{} / {}", b.industry, m.label()), reason: reason.to_string() });
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let title = format!("Growth regressions of productivity on output, periods {}", prep.window_label);
    let records = fit_records(&blocks);
    for f in &cfg.formats {
        match f {
            Format::Text => write_text(&cfg.out, "fit.txt", &render_fit_text(&title, &blocks, &skips))?,
            Format::Csv => write_csv(&records, create(&cfg.out, "fit.csv")?)?,
            Format::JsonLines => write_jsonl(&records, create(&cfg.out, "fit.jsonl")?)?,
        }
    }
    Ok(if skips.is_empty() { EXIT_OK } else { EXIT_SKIPPED })
}

fn cmd_unitroot(cfg: &RunConfig) -> Result<i32> {
    let prep = prepare(cfg)?;
    let blocks: Vec<UnitRootBlock> = prep
        .panels
        .par_iter()
        .map(|(name, gp)| -> Result<UnitRootBlock> {
            let reports = [Variable::P, Variable::Q]
                .into_iter()
                .map(|v| unit_root_report(gp, v, cfg.lag_policy))
                .collect::<Result<Vec<_>>>()?;
            Ok(UnitRootBlock { industry: name.clone(), reports })
        })
        .collect::<Result<_>>()?;
    let mut skips = prep.skips;
    for b in &blocks {
        for r in b.reports.iter().filter(|r| r.combination.is_none()) {
            skips.push(Skip {
                industry: format!("{} / {}", b.industry, r.variable.label()),
                reason: "fewer than two entities with a usable series".into(),
            });
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let title = format!("Fisher-type Phillips-Perron unit-root tests, periods {}", prep.window_label);
    let records = unit_root_records(&blocks);
    for f in &cfg.formats {
        match f {
            Format::Text => write_text(&cfg.out, "unitroot.txt", &render_unit_root_text(&title, &blocks, &skips))?,
            Format::Csv => write_csv(&records, create(&cfg.out, "unitroot.csv")?)?,
            Format::JsonLines => write_jsonl(&records, create(&cfg.out, "unitroot.jsonl")?)?,
        }
    }
    Ok(if skips.is_empty() { EXIT_OK } else { EXIT_SKIPPED })
}

/// File-name-safe version of an industry label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    let s = s.trim_matches('_').to_string();
    if s.is_empty() {
        "industry".to_string()
    } else {
        s
    }
}

fn cmd_scatter(cfg: &RunConfig) -> Result<i32> {
    let prep = prepare(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    for (name, gp) in &prep.panels {
        let file = format!("scatter_{}_{}.csv", slug(name), prep.window_label);
        emit_scatter_csv(gp, create(&cfg.out, &file)?)?;
    }
    for s in &prep.skips {
        eprintln!("skipped {}: {}", s.industry, s.reason);
    }
    Ok(if prep.skips.is_empty() { EXIT_OK } else { EXIT_SKIPPED })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| config_err(format!("cannot read study {}: {e}", args.config.display())))?;
    let study = StudyConfig::parse(&text)?;
    let mut summaries = Vec::new();
    for &target in &study.targets {
        let outcomes = run_replications(&study.spec, target, study.replications, study.dpd)?;
        summaries.push(summarize(target, study.spec.slope, &outcomes)?);
    }
    fs::create_dir_all(&args.out)?;
    write_summary_csv(&summaries, create(&args.out, "simulate.csv")?)?;
    Ok(if summaries.iter().any(|s| s.failures > 0) { EXIT_SKIPPED } else { EXIT_OK })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code; messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => a.resolve().and_then(|c| cmd_fit(&c)),
        Command::Unitroot(a) => a.resolve().and_then(|c| cmd_unitroot(&c)),
        Command::Scatter(a) => a.resolve().and_then(|c| cmd_scatter(&c)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
