//! The `revmono` command line: `gen`, `check` and `search`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use revmono::lab::{
    generate, run_suite, search_hart_reny, GenSpec, Instance, Report, SearchConfig, Suite, Verdict, DEFAULT_BUDGET,
};
use revmono::{Caps, Rat};

#[derive(Parser)]
#[command(name = "revmono", version, about = "Exact checks of revenue monotonicity bounds on small instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded random instances with dominating pairs.
    Gen(GenArgs),
    /// Run a check suite over instance files and write a report.
    Check(CheckArgs),
    /// Look for a dominating pair whose optimal revenue is lower.
    Search(SearchArgs),
}

#[derive(Args)]
struct CapArgs {
    #[arg(long, default_value_t = Caps::default().joint)]
    cap_joint: u64,
    #[arg(long, default_value_t = Caps::default().subset)]
    cap_subset: u32,
    #[arg(long, default_value_t = Caps::default().lp)]
    cap_lp: u64,
}

impl CapArgs {
    fn caps(&self) -> Result<Caps> {
        if self.cap_joint == 0 || self.cap_subset == 0 || self.cap_lp == 0 {
            bail!("caps must be positive");
        }
        Ok(Caps { joint: self.cap_joint, subset: self.cap_subset, lp: self.cap_lp })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Maximum number of atoms per coordinate.
    #[arg(long)]
    support: Option<usize>,
    #[arg(long, default_value = "1")]
    strength: Rat,
    #[arg(long, default_value_t = 6)]
    max_value: i64,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    /// An instance file or a directory of `*.json` instances.
    #[arg(long)]
    instances: PathBuf,
    /// Directory for `report.json` and `report.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the `b` parameter of every instance.
    #[arg(long)]
    b: Option<Rat>,
    /// Overrides the entry-fee quantile of every instance.
    #[arg(long)]
    q: Option<Rat>,
    /// Record wall-clock milliseconds per check (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for counterexample instances and `search.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    caps: CapArgs,
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// progress and summaries to `out`. Exit codes: 0 pass, 1 check failure, 2 error.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Search(a) => cmd_search(a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes next to the target and renames, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write) -> Result<ExitCode> {
    if a.strength.is_negative() || a.strength > Rat::one() {
        bail!("strength must lie in [0, 1]");
    }
    if a.max_value < 1 {
        bail!("max-value must be at least 1");
    }
    let spec = GenSpec { n: a.n, m: a.m, support: a.support, max_value: a.max_value, strength: a.strength };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for idx in 0..a.count {
        let seed = a.seed.wrapping_add(idx as u64);
        let inst = generate(a.suite, seed, &spec).with_context(|| format!("instance {idx}"))?;
        write_atomic(&a.out.join(format!("{}-{idx:04}.json", a.suite)), &inst.to_json())?;
    }
    writeln!(out, "wrote {} instances to {}", a.count, a.out.display())?;
    Ok(ExitCode::SUCCESS)
}

fn load_instances(path: &Path, caps: &Caps) -> Result<Vec<(String, Instance)>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::with_capacity(files.len());
    for file in files {
        let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let inst = Instance::from_json(&text, caps).with_context(|| format!("{}", file.display()))?;
        let name = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push((name, inst));
    }
    Ok(out)
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> Result<ExitCode> {
    let caps = a.caps.caps()?;
    let mut instances = load_instances(&a.instances, &caps)?;
    if instances.is_empty() {
        bail!("no instances in {}", a.instances.display());
    }
    for (name, inst) in &mut instances {
        if let Some(b) = &a.b {
            inst.params.b = b.clone();
        }
        if let Some(q) = &a.q {
            inst.params.q = q.clone();
        }
        inst.validate(&caps).with_context(|| format!("{name} after overrides"))?;
    }
    let report = run_suite(a.suite, &instances, &caps, a.seed, a.timings);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(&dir.join("report.json"), &json)?;
        write_atomic(&dir.join("report.csv"), &report.to_csv())?;
    }
    summarize(&report, out)?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn summarize(report: &Report, out: &mut dyn Write) -> Result<()> {
    for rec in report.records.iter().filter(|r| r.is_blocking_failure()) {
        writeln!(
            out,
            "FAIL {} {}: {} {} {} [{}]",
            rec.instance,
            rec.name,
            rec.lhs,
            rec.relation.symbol(),
            rec.rhs,
            rec.anchor
        )?;
    }
    writeln!(
        out,
        "{} records: {} pass, {} fail, {} inconclusive",
        report.records.len(),
        report.count(Verdict::Pass),
        report.count(Verdict::Fail),
        report.count(Verdict::Inconclusive)
    )?;
    Ok(())
}

fn cmd_search(a: SearchArgs, out: &mut dyn Write) -> Result<ExitCode> {
    if a.m == 0 {
        bail!("m must be at least 1");
    }
    let cfg = SearchConfig { m: a.m, budget: a.budget, caps: a.caps.caps()?, ..SearchConfig::default() };
    let outcome = search_hart_reny(&cfg, a.seed)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, cx) in outcome.found.iter().enumerate() {
            write_atomic(&dir.join(format!("counterexample-{k:03}.json")), &cx.to_instance(a.seed).to_json())?;
        }
        let mut json = serde_json::to_string_pretty(&outcome)?;
        json.push('\n');
        write_atomic(&dir.join("search.json"), &json)?;
    }
    let closest = outcome.closest.as_ref().map_or("none".to_string(), Rat::to_string);
    writeln!(
        out,
        "evaluated {} distributions, {} counterexamples, smallest REV(G) - REV(F) = {closest}",
        outcome.evaluated,
        outcome.found.len()
    )?;
    Ok(ExitCode::SUCCESS)
}
