//! `cmo`: price a CMO deal-spec file from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmo_core::dealspec::parse_with_overrides;
use cmo_core::pricer::{compare_models, run_simulation, Engine, SimulationRun};
use cmo_core::waterfall::trace_csv;
use cmo_core::{CmoError, DealFile};

#[derive(Parser)]
#[command(name = "cmo", version, about = "Monte Carlo CMO tranche pricer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price every tranche; writes summary.json and histogram CSVs.
    Price(RunArgs),
    /// Price under both credit models and test the difference in means.
    Compare(RunArgs),
    /// Write the month-by-month cash flows of one iteration.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(
            long = "trace-iteration",
            visible_alias = "iteration",
            default_value_t = 0
        )]
        iteration: u64,
    },
    /// Check a deal spec and print every violation.
    Validate(SpecArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Deal-spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Override a spec entry, e.g. `model.default_rate=0.02`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Basel,
    Copula,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write per-iteration values as CSV.
    #[arg(long)]
    dump_iterations: bool,
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.spec.set.clone();
        if let Some(s) = self.seed {
            o.push(format!("simulation.seed={s}"));
        }
        if let Some(n) = self.iterations {
            o.push(format!("simulation.iterations={n}"));
        }
        if let Some(m) = self.model {
            let m = match m {
                ModelArg::Basel => "basel",
                ModelArg::Copula => "copula",
            };
            o.push(format!("simulation.credit_model={m}"));
        }
        o
    }

    fn load(&self) -> Result<DealFile> {
        load(&self.spec.spec, &self.overrides())
    }
}

fn read_spec(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read deal spec {}", path.display()))
}

fn load(path: &Path, overrides: &[String]) -> Result<DealFile> {
    let text = read_spec(path)?;
    parse_with_overrides(&text, overrides).with_context(|| format!("in {}", path.display()))
}

/// Files are staged in memory and only written once every output exists.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn add_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.add(name, s);
        Ok(())
    }

    fn add_run(&mut self, run: &SimulationRun, suffix: &str, dump: bool) -> Result<()> {
        self.add_json(&format!("summary{suffix}.json"), &run.summary)?;
        for t in run.summary.tranches.iter().chain([&run.summary.total]) {
            self.add(
                format!("histogram{suffix}_{}.csv", t.name),
                t.histogram.to_csv(),
            );
        }
        if dump {
            self.add(format!("iterations{suffix}.csv"), run.iterations_csv());
        }
        Ok(())
    }

    /// Each file goes to a temporary in the target directory and is renamed
    /// into place.
    fn commit(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("cannot create {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = self.dir.join(&name);
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.persist(&path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn price(args: &RunArgs) -> Result<()> {
    let f = args.load()?;
    let run = run_simulation(&f.deal, &f.params, &f.config, args.workers)?;
    let mut out = Outputs::new(&args.out);
    out.add_run(&run, "", args.dump_iterations)?;
    report(out.commit()?);
    for t in run.summary.tranches.iter().chain([&run.summary.total]) {
        println!("{:>8}  mean {:>12.4}  std {:>10.4}", t.name, t.mean, t.std);
    }
    Ok(())
}

fn compare(args: &RunArgs) -> Result<()> {
    let f = args.load()?;
    let run = compare_models(&f.deal, &f.params, &f.config, args.workers)?;
    let mut out = Outputs::new(&args.out);
    out.add_run(
        &run.first,
        &format!("_{}", run.report.first_model),
        args.dump_iterations,
    )?;
    out.add_run(
        &run.second,
        &format!("_{}", run.report.second_model),
        args.dump_iterations,
    )?;
    out.add_json("comparison.json", &run.report)?;
    report(out.commit()?);
    let r = &run.report;
    println!(
        "total mean {} {:.4} vs {} {:.4}; t = {:.3}, p = {:.3e}, {} at 99%",
        r.first_model,
        r.total_mean_first,
        r.second_model,
        r.total_mean_second,
        r.test.t_statistic,
        r.test.p_value,
        if r.test.reject_equal_means {
            "reject equal means"
        } else {
            "cannot reject equal means"
        }
    );
    Ok(())
}

fn trace(args: &RunArgs, iteration: u64) -> Result<()> {
    let f = args.load()?;
    let engine = Engine::new(&f.deal, &f.params, f.config.copula_loans)?;
    let (_, rows) = engine.trace_iteration(f.config.credit_model, f.config.seed, iteration)?;
    let mut out = Outputs::new(&args.out);
    out.add(
        format!("trace_{iteration}.csv"),
        trace_csv(&f.deal.tranche_names(), &rows),
    );
    report(out.commit()?);
    Ok(())
}

fn validate(args: &SpecArgs) -> Result<bool> {
    let text = read_spec(&args.spec)?;
    let mut doc = cmo_core::dealspec::RawDoc::parse(&text)
        .with_context(|| format!("in {}", args.spec.display()))?;
    for o in &args.set {
        doc.apply_override(o)?;
    }
    let file = doc
        .build_unvalidated()
        .with_context(|| format!("in {}", args.spec.display()))?;
    let violations = file.violations();
    for v in &violations {
        println!("{v}");
    }
    let ok = !violations.iter().any(|v| v.is_error());
    if ok {
        println!("{}: ok", args.spec.display());
    }
    Ok(ok)
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CmoError>() {
        Some(CmoError::Invalid(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Price(a) => price(a).map(|_| true),
        Command::Compare(a) => compare(a).map(|_| true),
        Command::Trace { run, iteration } => trace(run, *iteration).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
