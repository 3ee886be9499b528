mod logio;
mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelrefine::circstats::{hours_to_radians, TAU};
use labelrefine::controlflow::{ControlFlowConfig, VerdictMode};
use labelrefine::eventlog::{EventLog, EventLogError, Refinement};
use labelrefine::mixture::{select_components, EmOptions};
use labelrefine::search::{
    analyze_label, generate_candidates, label_sample, proposals, run_strategy, PipelineConfig,
    RefinementCandidate, SearchConfig, SearchError, Strategy, WatsonRule,
};
use labelrefine::synth::{generate, SynthError, SyntheticSpec};

use logio::{write_file, write_log, LogArgs, LogFormat};
use report::{CandidateSummary, ConfigEcho, LogSummary, PlanSummary, Report, SearchEcho, SCHEMA};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable input or invalid configuration: exit 2.
    Input(String),
    /// A resource cap was hit: exit 3.
    Cap(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
        }
    }
}

impl From<EventLogError> for CliError {
    fn from(e: EventLogError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::ExhaustiveCap { .. } => {
                CliError::Cap(format!("{e} (try --strategy beam --beam-size N)"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "labelrefine", version, about = "Refine event labels by time of day")]
struct Cli {
    /// Seed for every randomized step
    #[arg(long, global = true, env = "LABELREFINE_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the per-label pipeline and report every candidate
    Analyze {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Only analyze this label
        #[arg(long)]
        label: Option<String>,
        /// Write the JSON report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Search for a combination of refinements and write the refined log
    Refine {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_enum, default_value = "greedy")]
        strategy: StrategyArg,
        /// Number of refinements to apply
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        beam_size: usize,
        /// Only apply steps with positive information gain
        #[arg(long)]
        stop_on_ig: bool,
        /// Most labels exhaustive search will accept
        #[arg(long, default_value_t = 12)]
        exhaustive_cap: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the input format
        #[arg(long, value_enum)]
        output_format: Option<LogFormat>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic log from a TOML spec
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        output_format: Option<LogFormat>,
    },
    /// Histogram and fitted density of one label in 5-minute bins, as CSV
    Density {
        #[command(flatten)]
        log: LogArgs,
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = 5)]
        max_components: usize,
        #[arg(long, default_value_t = 10.0)]
        delta_bic: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the plan stored in a report onto a log
    Apply {
        #[command(flatten)]
        log: LogArgs,
        /// Report written by `refine`
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        output_format: Option<LogFormat>,
    },
}

#[derive(Debug, Clone, Args)]
struct AnalysisArgs {
    /// Significance level of every test
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    max_components: usize,
    /// BIC improvement needed to accept another component
    #[arg(long, default_value_t = 10.0)]
    delta_bic: f64,
    /// Monte Carlo replicates for Rao's spacing test
    #[arg(long, default_value_t = 4999)]
    rao_samples: usize,
    /// Bootstrap replicates for the dip test
    #[arg(long, default_value_t = 2000)]
    dip_samples: usize,
    #[arg(long, value_enum, default_value = "advisory")]
    watson_rule: WatsonRuleArg,
    #[arg(long, value_enum, default_value = "significance")]
    verdict_mode: VerdictModeArg,
    /// Leave trace ends out of the directly-follows statistics
    #[arg(long)]
    no_end_token: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    AllAtOnce,
    Greedy,
    Beam,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WatsonRuleArg {
    Advisory,
    RequireFit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerdictModeArg {
    Significance,
    IgPositive,
    Both,
}

impl AnalysisArgs {
    fn config(&self, seed: u64) -> Result<PipelineConfig, CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Input(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_components == 0 {
            return Err(CliError::Input("--max-components must be at least 1".into()));
        }
        let mode = match self.verdict_mode {
            VerdictModeArg::Significance => VerdictMode::Significance,
            VerdictModeArg::IgPositive => VerdictMode::IgPositive,
            VerdictModeArg::Both => VerdictMode::Both,
        };
        Ok(PipelineConfig {
            alpha: self.alpha,
            max_components: self.max_components,
            delta_bic: self.delta_bic,
            seed,
            rao_samples: self.rao_samples,
            dip_samples: self.dip_samples,
            watson_rule: match self.watson_rule {
                WatsonRuleArg::Advisory => WatsonRule::Advisory,
                WatsonRuleArg::RequireFit => WatsonRule::RequireFit,
            },
            control_flow: ControlFlowConfig { alpha: self.alpha, mode, end_token: !self.no_end_token },
            ..PipelineConfig::default()
        })
    }

    fn echo(&self, input: &Path, seed: u64) -> ConfigEcho {
        ConfigEcho {
            input: input.display().to_string(),
            seed,
            alpha: self.alpha,
            max_components: self.max_components,
            delta_bic: self.delta_bic,
            rao_samples: self.rao_samples,
            dip_samples: self.dip_samples,
            watson_rule: value_name(self.watson_rule),
            verdict_mode: value_name(self.verdict_mode),
            end_token: !self.no_end_token,
            search: None,
        }
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn write_report(report: &Report, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).expect("report is serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn candidate_table(cands: &[RefinementCandidate]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>6} {:>9} {:>8} {:>8} {:>3} {:>8} {:>5}  status",
        "label", "n", "rao", "rao p", "dip p", "m", "IG", "sig"
    );
    for c in cands {
        let status = match (c.eligible, c.stopped_at) {
            (true, _) => "eligible".to_string(),
            (false, Some(stage)) => {
                format!("stopped: {}", serde_json::to_value(stage).unwrap().as_str().unwrap_or(""))
            }
            (false, None) => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:<32} {:>6} {:>9} {:>8} {:>8} {:>3} {:>8} {:>5}  {status}",
            c.label,
            c.sample_size,
            opt(c.rao.as_ref().map(|r| r.statistic)),
            opt(c.rao.as_ref().and_then(|r| r.p_value)),
            opt(c.dip.as_ref().and_then(|r| r.p_value)),
            c.model.as_ref().map_or_else(|| "-".into(), |m| m.len().to_string()),
            opt(c.verdict.as_ref().map(|v| v.information_gain)),
            c.verdict.as_ref().map_or_else(|| "-".into(), |v| v.significant_activities.len().to_string()),
        );
        if let (Some(model), Some(clusters)) = (&c.model, &c.clusters) {
            let ranges = clusters.hour_ranges();
            for (j, comp) in model.components.iter().enumerate() {
                let range =
                    ranges[j].map_or_else(|| "empty".into(), |r| format!("[{:.2}, {:.2}]", r.start, r.end));
                let watson = c.watson.get(j).and_then(|w| w.as_ref()).map_or_else(
                    || "-".into(),
                    |w| format!("U2 {:.4}{}", w.statistic, if w.reject { " (reject)" } else { "" }),
                );
                let _ = writeln!(
                    out,
                    "    component {}: weight {:.3}  mu {:.3}  kappa {:.3}  hours {range}  {watson}",
                    j + 1,
                    comp.weight,
                    comp.mu,
                    comp.kappa
                );
            }
        }
        if let Some(e) = &c.error {
            let _ = writeln!(out, "    error: {e}");
        }
    }
    out
}

fn analyze(
    seed: u64,
    log_args: &LogArgs,
    analysis: &AnalysisArgs,
    label: Option<&str>,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    let log = log_args.read()?;
    let config = analysis.config(seed)?;
    let cands = match label {
        Some(l) => {
            if !log.label_alphabet().contains(l) {
                return Err(CliError::Input(format!("label '{l}' does not occur in the log")));
            }
            vec![analyze_label(&log, l, &config)]
        }
        None => generate_candidates(&log, &config),
    };
    print!("{}", candidate_table(&cands));
    if let Some(path) = report_path {
        let report = Report {
            schema: SCHEMA.into(),
            command: "analyze".into(),
            config: analysis.echo(&log_args.input, seed),
            log: LogSummary::of(&log),
            candidates: cands.iter().map(CandidateSummary::from).collect(),
            plan: None,
            outputs: BTreeMap::from([("report".to_string(), path.display().to_string())]),
        };
        write_report(&report, path)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn refine(
    seed: u64,
    log_args: &LogArgs,
    analysis: &AnalysisArgs,
    strategy: StrategyArg,
    k: usize,
    beam_size: usize,
    stop_on_ig: bool,
    exhaustive_cap: usize,
    out: &Path,
    output_format: Option<LogFormat>,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Input("--k must be at least 1".into()));
    }
    let log = log_args.read()?;
    let config = analysis.config(seed)?;
    let strategy = match strategy {
        StrategyArg::AllAtOnce => Strategy::AllAtOnce,
        StrategyArg::Greedy => Strategy::Greedy,
        StrategyArg::Beam => Strategy::Beam,
        StrategyArg::Exhaustive => Strategy::Exhaustive,
    };
    let search = SearchConfig { control_flow: config.control_flow, stop_on_ig, exhaustive_cap };
    let cands = generate_candidates(&log, &config);
    let props = proposals(&cands);
    let plan = run_strategy(strategy, &log, &props, k, beam_size, &search)?;
    let refined = plan.apply(&log)?;
    write_log(&refined, out, output_format.unwrap_or_else(|| log_args.format()))?;

    print!("{}", candidate_table(&cands));
    println!(
        "plan: {} step(s), cumulative IG {:.6}{}",
        plan.steps.len(),
        plan.cumulative_gain,
        if plan.stopped_early { ", stopped early" } else { "" }
    );
    for (i, s) in plan.steps.iter().enumerate() {
        println!("  {}. {} (IG {:.6})", i + 1, s.label(), s.gain());
    }
    if let Some(path) = report_path {
        let mut echo = analysis.echo(&log_args.input, seed);
        echo.search = Some(SearchEcho { strategy, k, beam_size, stop_on_ig, exhaustive_cap });
        let report = Report {
            schema: SCHEMA.into(),
            command: "refine".into(),
            config: echo,
            log: LogSummary::of(&log),
            candidates: cands.iter().map(CandidateSummary::from).collect(),
            plan: Some(PlanSummary::new(&plan, &cands)),
            outputs: BTreeMap::from([
                ("log".to_string(), out.display().to_string()),
                ("report".to_string(), path.display().to_string()),
            ]),
        };
        write_report(&report, path)?;
    }
    Ok(())
}

fn synth(seed: Option<u64>, spec_path: &Path, out: &Path, format: Option<LogFormat>) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec = SyntheticSpec::from_toml_str(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let log = generate(&spec)?;
    write_log(&log, out, format.unwrap_or_else(|| LogFormat::of_path(out)))?;
    println!("seed: {}", spec.seed);
    println!("wrote {} events in {} traces to {}", log.event_count(), log.traces().len(), out.display());
    Ok(())
}

/// Bins of five minutes: 288 per day.
const DENSITY_BINS: usize = 288;

fn density(
    seed: u64,
    log_args: &LogArgs,
    label: &str,
    max_components: usize,
    delta_bic: f64,
    out: &Path,
) -> Result<(), CliError> {
    let log = log_args.read()?;
    if !log.label_alphabet().contains(label) {
        return Err(CliError::Input(format!("label '{label}' does not occur in the log")));
    }
    let (sample, _) = label_sample(&log, label);
    let selection = select_components(&sample, max_components.max(1), delta_bic, &EmOptions::with_seed(seed))
        .map_err(|e| CliError::Input(format!("cannot fit '{label}': {e}")))?;
    let model = selection.chosen_model();
    let mut counts = [0usize; DENSITY_BINS];
    for &a in sample.angles() {
        let bin = ((a / TAU) * DENSITY_BINS as f64).floor() as usize;
        counts[bin.min(DENSITY_BINS - 1)] += 1;
    }
    let mut text = String::from("hour,count,density\n");
    for (i, c) in counts.iter().enumerate() {
        let hour = i as f64 * 24.0 / DENSITY_BINS as f64;
        let mid = hours_to_radians(hour + 12.0 / DENSITY_BINS as f64);
        let _ = writeln!(text, "{hour:.4},{c},{}", model.pdf(mid));
    }
    write_file(out, text.as_bytes())?;
    println!("{} events, {} component(s); wrote {}", sample.len(), model.len(), out.display());
    Ok(())
}

fn apply(
    log_args: &LogArgs,
    plan_path: &Path,
    out: &Path,
    format: Option<LogFormat>,
) -> Result<(), CliError> {
    let log = log_args.read()?;
    let text = fs::read_to_string(plan_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", plan_path.display())))?;
    let report: Report = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{} is not a report: {e}", plan_path.display())))?;
    if report.schema != SCHEMA {
        return Err(CliError::Input(format!("unsupported report schema '{}'", report.schema)));
    }
    let plan =
        report.plan.ok_or_else(|| CliError::Input(format!("{} holds no plan", plan_path.display())))?;
    let mut refined: EventLog = log;
    for step in &plan.steps {
        let r: &Refinement = &step.refinement;
        refined = r.apply(&refined)?;
    }
    write_log(&refined, out, format.unwrap_or_else(|| log_args.format()))?;
    println!("applied {} step(s); wrote {}", plan.steps.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Analyze { log, analysis, label, report } => {
            analyze(seed, log, analysis, label.as_deref(), report.as_deref())
        }
        Command::Refine {
            log,
            analysis,
            strategy,
            k,
            beam_size,
            stop_on_ig,
            exhaustive_cap,
            out,
            output_format,
            report,
        } => refine(
            seed,
            log,
            analysis,
            *strategy,
            *k,
            *beam_size,
            *stop_on_ig,
            *exhaustive_cap,
            out,
            *output_format,
            report.as_deref(),
        ),
        Command::Synth { spec, out, output_format } => synth(cli.seed, spec, out, *output_format),
        Command::Density { log, label, max_components, delta_bic, out } => {
            density(seed, log, label, *max_components, *delta_bic, out)
        }
        Command::Apply { log, plan, out, output_format } => apply(log, plan, out, *output_format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(msg) | CliError::Cap(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
