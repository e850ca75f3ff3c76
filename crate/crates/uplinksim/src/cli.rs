//! `uplinksim run | validate | report`.
//!
//! Exit codes: 0 success, 2 configuration, 3 I/O, 4 internal invariant breach.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use uplinksim_core::{metrics, run, PolicyKind, Scenario, SimError, SimTime};

use crate::config;
use crate::error::CliError;
use crate::export::{self, SummaryRow};
use crate::table::{num, Table};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Parser)]
#[command(name = "uplinksim", version, about = "Frame-based uplink scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every policy x seed combination and write CSVs.
    Run(RunArgs),
    /// Check a scenario and print the effective configuration.
    Validate {
        /// Built-in name (canonical, starvation) or path to a TOML file.
        scenario: String,
    },
    /// Re-summarize the CSVs in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in name (canonical, starvation) or path to a TOML file.
    #[arg(long, default_value = "canonical")]
    pub scenario: String,
    /// Comma-separated policies; defaults to the scenario's scheduler.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    pub policy: Vec<PolicyKind>,
    /// Comma-separated seeds; defaults to the scenario's seed.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Override the number of frames.
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Discard requests once their deadline has passed.
    #[arg(long)]
    pub drop_on_miss: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<NonZeroUsize>,
    /// Do not print the summary table.
    #[arg(long, short)]
    pub quiet: bool,
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, stdout).map(|_| ()),
        Command::Validate { scenario } => cmd_validate(&scenario, stdout),
        Command::Report { out } => cmd_report(&out, stdout),
    }
}

/// Policies x seeds over one scenario.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub scenario: Scenario,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl RunPlan {
    pub fn from_args(args: &RunArgs) -> Result<RunPlan, CliError> {
        let mut scenario = config::load(&args.scenario)?;
        if let Some(f) = args.frames {
            scenario.total_frames = f;
        }
        if args.drop_on_miss {
            scenario.drop_on_miss = true;
        }
        scenario.validate().map_err(|errs| CliError::Invalid(errs.iter().map(ToString::to_string).collect()))?;
        let policies = if args.policy.is_empty() { vec![scenario.scheduler] } else { dedup(args.policy.clone()) };
        let seeds = if args.seed.is_empty() { vec![scenario.seed] } else { dedup(args.seed.clone()) };
        Ok(RunPlan { scenario, policies, seeds, out: args.out.clone() })
    }

    pub fn jobs(&self) -> Vec<(PolicyKind, u64)> {
        self.policies.iter().flat_map(|&p| self.seeds.iter().map(move |&s| (p, s))).collect()
    }

    pub fn output_files(&self) -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = self
            .jobs()
            .into_iter()
            .map(|(p, s)| self.out.join(export::events_file_name(&self.scenario.name, p, s)))
            .collect();
        files.push(self.out.join(SUMMARY_FILE));
        files
    }
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn dedup<T: PartialEq + Copy>(mut v: Vec<T>) -> Vec<T> {
    let mut seen = Vec::new();
    v.retain(|x| {
        let fresh = !seen.contains(x);
        seen.push(*x);
        fresh
    });
    v
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<Vec<SummaryRow>, CliError> {
    let plan = RunPlan::from_args(args)?;
    if !args.force {
        if let Some(existing) = plan.output_files().into_iter().find(|p| p.exists()) {
            return Err(CliError::WouldOverwrite(existing));
        }
    }
    fs::create_dir_all(&plan.out).map_err(|e| CliError::io(&plan.out, e))?;

    let rows = execute_plan(&plan, args.jobs)?;
    let summary = plan.out.join(SUMMARY_FILE);
    let file = File::create(&summary).map_err(|e| CliError::io(&summary, e))?;
    export::write_summary(&rows, BufWriter::new(file)).map_err(|source| CliError::Csv { path: summary, source })?;

    if !args.quiet {
        let _ = stdout.write_all(summary_table(&rows).render().as_bytes());
    }
    Ok(rows)
}

/// Runs every job of the plan on a small thread pool. Each worker writes its
/// own event file; rows come back in plan order.
pub fn execute_plan(plan: &RunPlan, jobs: Option<NonZeroUsize>) -> Result<Vec<SummaryRow>, CliError> {
    let work = plan.jobs();
    let threads =
        jobs.or_else(|| std::thread::available_parallelism().ok()).map_or(1, NonZeroUsize::get).min(work.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SummaryRow, CliError>>>> = Mutex::new((0..work.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(policy, seed)) = work.get(i) else { break };
                let r = run_one(plan, policy, seed);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

fn run_one(plan: &RunPlan, policy: PolicyKind, seed: u64) -> Result<SummaryRow, CliError> {
    let mut scenario = plan.scenario.clone();
    scenario.scheduler = policy;
    scenario.seed = seed;
    let out = run(&scenario).map_err(|e| match e {
        SimError::InvalidScenario(errs) => CliError::Invalid(errs.iter().map(ToString::to_string).collect()),
        breach @ SimError::InvariantBreach { .. } => {
            CliError::Internal(format!("{} seed {seed}: {breach}", policy.name()))
        }
    })?;
    let path = plan.out.join(export::events_file_name(&scenario.name, policy, seed));
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    export::write_events(&out.log, BufWriter::new(file)).map_err(|source| CliError::Csv { path, source })?;
    Ok(SummaryRow { scenario: scenario.name, policy, seed, frames: scenario.total_frames, metrics: out.metrics })
}

pub fn cmd_validate(spec: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = config::load_valid(spec)?;
    let _ = stdout.write_all(config::to_toml(&s).as_bytes());
    Ok(())
}

pub fn summary_table(rows: &[SummaryRow]) -> Table {
    let mut t = Table::new([
        "scenario",
        "policy",
        "seed",
        "thr_kbps",
        "offered_kbps",
        "delay_mean_ms",
        "delay_p95_ms",
        "miss_ratio",
        "drops",
        "ctx_switches",
        "max_starve_ms",
    ]);
    for r in rows {
        let m = &r.metrics;
        t.row([
            r.scenario.clone(),
            r.policy.name().to_string(),
            r.seed.to_string(),
            num(m.throughput_bps / 1e3, 3),
            num(m.offered_load_bps / 1e3, 3),
            m.delay.as_ref().map_or("-".into(), |d| num(d.mean_ms, 3)),
            m.delay.as_ref().map_or("-".into(), |d| num(d.p95_ms, 3)),
            num(m.deadline_miss_ratio, 5),
            m.drops.to_string(),
            m.context_switch_count.to_string(),
            num(m.max_starvation_window_ms(), 1),
        ]);
    }
    t
}

/// Mean of each headline metric per policy, over seeds.
pub fn policy_means(rows: &[SummaryRow]) -> Table {
    let mut groups: BTreeMap<(String, &str), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.scenario.clone(), r.policy.name())).or_default().push(r);
    }
    let mut t = Table::new([
        "scenario",
        "policy",
        "seeds",
        "thr_kbps",
        "delay_mean_ms",
        "miss_ratio",
        "ctx_switches",
        "max_starve_ms",
    ]);
    for ((scenario, policy), rs) in groups {
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&SummaryRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
        let delays: Vec<f64> = rs.iter().filter_map(|r| r.metrics.delay.as_ref().map(|d| d.mean_ms)).collect();
        t.row([
            scenario,
            policy.to_string(),
            rs.len().to_string(),
            num(mean(&|r| r.metrics.throughput_bps) / 1e3, 3),
            if delays.is_empty() { "-".into() } else { num(delays.iter().sum::<f64>() / delays.len() as f64, 3) },
            num(mean(&|r| r.metrics.deadline_miss_ratio), 5),
            num(mean(&|r| r.metrics.context_switch_count as f64), 1),
            num(mean(&|r| r.metrics.max_starvation_window_ms()), 1),
        ]);
    }
    t
}

/// Frame duration implied by a summary row.
fn frame_duration_of(row: &SummaryRow) -> Option<SimTime> {
    if row.frames == 0 {
        return None;
    }
    let us = (row.metrics.duration_s * 1e6 / row.frames as f64).round();
    (us >= 1.0).then(|| SimTime::from_micros(us as u64))
}

/// Recomputes each row's metrics from its event file and compares them with
/// the stored row. Per-class delays are skipped; the event file does not
/// carry service classes.
pub fn verify_row(dir: &Path, row: &SummaryRow) -> Result<Option<String>, CliError> {
    let path = dir.join(row.events_file_name());
    if !path.exists() {
        return Ok(Some("event file missing".into()));
    }
    let frame = frame_duration_of(row).ok_or_else(|| CliError::Malformed {
        path: dir.join(SUMMARY_FILE),
        message: format!("row {} seed {} has no usable duration", row.policy, row.seed),
    })?;
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let log = export::read_events(BufReader::new(file), frame, row.frames, &path)?;
    let mut recomputed = metrics::compute(&log);
    recomputed.class_delay = row.metrics.class_delay.clone();
    if recomputed == row.metrics {
        Ok(None)
    } else {
        Err(CliError::Malformed { path, message: format!("metrics recomputed from events differ from {SUMMARY_FILE}") })
    }
}

pub fn cmd_report(dir: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = dir.join(SUMMARY_FILE);
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let rows = export::read_summary(BufReader::new(file), &path)?;
    let mut notes = Vec::new();
    for r in &rows {
        if let Some(note) = verify_row(dir, r)? {
            notes.push(format!("{} {} seed {}: {note}", r.scenario, r.policy, r.seed));
        }
    }
    let mut text = summary_table(&rows).render();
    text.push('\n');
    text.push_str(&policy_means(&rows).render());
    text.push('\n');
    let checked = rows.len() - notes.len();
    text.push_str(&format!(
        "{checked} of {} runs re-derived from event files and consistent with the summary\n",
        rows.len()
    ));
    for n in notes {
        text.push_str(&n);
        text.push('\n');
    }
    let _ = stdout.write_all(text.as_bytes());
    Ok(())
}
