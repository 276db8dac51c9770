use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use leftrs::analysis::{analyze, OverheadModel, Protocol};
use leftrs::harness::{
    self, exclusive_csv, exclusive_table, SchedulabilityCurve, SoundnessConfig, SweepConfig, SweepParam,
    FULL_SYSTEMS_PER_POINT,
};
use leftrs::model::SystemSpec;
use leftrs::sim::{simulate_with, FaultSchedule, ReleasePattern, SimOptions};
use leftrs::taskgen::{generate_with_report, GenConfig};

#[derive(Parser)]
#[command(
    name = "leftrs",
    version,
    about = "Fault-tolerant lock-free resource sharing: analysis, simulation, experiments"
)]
struct Cli {
    /// Master seed for generation and randomized runs.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    systems_per_point: Option<usize>,
    /// Use the full-size experiment (1000 systems per point).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Comma-separated protocol list.
    #[arg(long, global = true, value_delimiter = ',')]
    protocols: Vec<Protocol>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct GenArgs {
    /// Generator configuration as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cores: Option<usize>,
    #[arg(long)]
    tasks_per_core: Option<usize>,
    #[arg(long)]
    rsf: Option<f64>,
    #[arg(long)]
    resources: Option<usize>,
    #[arg(long)]
    max_accesses: Option<u32>,
    /// Upper bound of the critical-section length range.
    #[arg(long)]
    cs_max: Option<u64>,
    #[arg(long)]
    f_max: Option<u32>,
}

impl GenArgs {
    fn load(&self) -> Result<GenConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            None => GenConfig::default(),
        };
        if let Some(v) = self.cores {
            cfg.cores = v;
        }
        if let Some(v) = self.tasks_per_core {
            cfg.tasks_per_core = v;
        }
        if let Some(v) = self.rsf {
            cfg.rsf = v;
        }
        if self.resources.is_some() {
            cfg.resources = self.resources;
        }
        if let Some(v) = self.max_accesses {
            cfg.max_accesses = v;
        }
        if let Some(v) = self.cs_max {
            cfg.cs_range.1 = v;
        }
        if let Some(v) = self.f_max {
            cfg.f_max = v;
        }
        Ok(cfg)
    }
}

#[derive(Args, Clone, Copy)]
struct OverheadArgs {
    #[arg(long, default_value_t = OverheadModel::MEASURED.o_wrap)]
    o_wrap: u64,
    #[arg(long, default_value_t = OverheadModel::MEASURED.o_replica)]
    o_replica: u64,
    #[arg(long, default_value_t = OverheadModel::MEASURED.o_self_wrap)]
    o_self_wrap: u64,
}

impl OverheadArgs {
    fn model(self) -> OverheadModel {
        OverheadModel {
            o_wrap: self.o_wrap,
            o_replica: self.o_replica,
            o_self_wrap: self.o_self_wrap,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one task system and print it as JSON.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        /// Write the system here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Response-time analysis of a system file.
    Analyze {
        system: PathBuf,
        #[command(flatten)]
        overheads: OverheadArgs,
        /// Print the full results as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Simulate a system; writes the event trace and prints a JSON summary.
    Simulate {
        system: PathBuf,
        #[arg(long, default_value = "leftrs")]
        protocol: Protocol,
        /// `periodic` or `sporadic:<seed>`.
        #[arg(long, default_value = "periodic")]
        pattern: ReleasePattern,
        /// `none`, `seed:<n>` for randomized faults, or a fault file path.
        #[arg(long, default_value = "none")]
        faults: String,
        /// Defaults to the largest deadline.
        #[arg(long)]
        horizon_us: Option<u64>,
        /// Trace file; defaults to `<out-dir>/trace.txt`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Schedulability sweep over one parameter.
    Sweep {
        #[arg(long, default_value = "f")]
        param: SweepParam,
        /// Comma-separated values; defaults to the parameter's standard range.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        overheads: OverheadArgs,
    },
    /// Exclusive-schedulability counts of MSRP-FT against LEFT-RS.
    Table {
        #[arg(long, default_value = "f")]
        param: SweepParam,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Simulate schedulable systems and compare every response with its bound.
    Sound {
        #[arg(long, default_value_t = 100)]
        systems: usize,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Also run the exhaustive small-instance probe.
        #[arg(long)]
        small: bool,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Render a saved curve (`<param>_curve.json`) as SVG plus CSV.
    Plot {
        curve: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn load_system(p: &Path) -> Result<SystemSpec> {
    SystemSpec::from_json(&read(p)?).with_context(|| format!("loading {}", p.display()))
}

fn write(p: &Path, body: &str) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(p, body).with_context(|| format!("writing {}", p.display()))
}

struct Counterexample;

impl std::fmt::Debug for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("soundness counterexample found")
    }
}

impl std::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("soundness counterexample found")
    }
}

impl std::error::Error for Counterexample {}

impl Cli {
    fn protocols(&self) -> Vec<Protocol> {
        if self.protocols.is_empty() {
            Protocol::ALL.to_vec()
        } else {
            self.protocols.clone()
        }
    }

    fn sweep_config(&self, param: SweepParam, values: &[f64], gen: &GenArgs) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::for_param(param);
        cfg.base = gen.load()?;
        if !values.is_empty() {
            cfg.values = values.to_vec();
        }
        if self.paper_scale {
            cfg.systems_per_point = FULL_SYSTEMS_PER_POINT;
        }
        if let Some(n) = self.systems_per_point {
            cfg.systems_per_point = n;
        }
        cfg.protocols = self.protocols();
        cfg.master_seed = self.seed;
        Ok(cfg)
    }

    fn run(&self) -> Result<()> {
        match &self.cmd {
            Command::Gen { gen, output } => {
                let mut cfg = gen.load()?;
                cfg.seed = self.seed;
                let (sys, report) = generate_with_report(&cfg)?;
                if report.redraws > 0 {
                    eprintln!("note: {} redraws needed", report.redraws);
                }
                match output {
                    Some(p) => write(p, &sys.to_json())?,
                    None => println!("{}", sys.to_json()),
                }
            }
            Command::Analyze {
                system,
                overheads,
                json,
            } => {
                let sys = load_system(system)?;
                let results = self
                    .protocols()
                    .into_iter()
                    .map(|p| analyze(&sys, p, &overheads.model()))
                    .collect::<Result<Vec<_>, _>>()?;
                if *json {
                    println!("{}", serde_json::to_string_pretty(&results)?);
                } else {
                    for r in &results {
                        println!("{}", r.verdict_line());
                        println!("  task      R_us      E_us      B_us      F_us  ok");
                        for t in &r.tasks {
                            println!(
                                "  {:>4} {:>9} {:>9} {:>9} {:>9}  {}",
                                t.task,
                                t.r,
                                t.e,
                                t.b,
                                t.f,
                                if t.schedulable { "yes" } else { "no" }
                            );
                        }
                    }
                }
            }
            Command::Simulate {
                system,
                protocol,
                pattern,
                faults,
                horizon_us,
                trace,
            } => {
                let sys = load_system(system)?;
                let faults = match faults.as_str() {
                    "none" => FaultSchedule::None,
                    s => match s.strip_prefix("seed:") {
                        Some(n) => FaultSchedule::Randomized {
                            seed: n.parse().with_context(|| format!("bad fault seed `{n}`"))?,
                        },
                        None => FaultSchedule::parse_scripted(&read(Path::new(s))?)?,
                    },
                };
                let horizon = horizon_us.unwrap_or_else(|| sys.tasks.iter().map(|t| t.d).max().unwrap_or(1));
                let opts = SimOptions::new(*protocol, pattern.clone(), faults, horizon);
                let result = simulate_with(&sys, &opts)?;
                let path = trace.clone().unwrap_or_else(|| self.out_dir.join("trace.txt"));
                write(&path, &result.to_text())?;
                eprintln!("trace written to {}", path.display());
                println!("{}", serde_json::to_string_pretty(&result.summary())?);
            }
            Command::Sweep {
                param,
                values,
                gen,
                overheads,
            } => {
                let mut cfg = self.sweep_config(*param, values, gen)?;
                cfg.overheads = overheads.model();
                let curve = harness::sweep(&cfg)?;
                for pt in curve.points.iter().filter(|p| p.skipped.is_some()) {
                    eprintln!(
                        "point {} skipped: {}",
                        pt.value,
                        pt.skipped.as_deref().unwrap_or("")
                    );
                }
                for f in harness::write_sweep_outputs(&curve, &self.out_dir)? {
                    eprintln!("wrote {f}");
                }
                print!("{}", harness::curve_csv(&curve));
            }
            Command::Table { param, values, gen } => {
                let mut cfg = self.sweep_config(*param, values, gen)?;
                cfg.protocols = vec![Protocol::MsrpFt, Protocol::LeftRs];
                let curve = harness::sweep(&cfg)?;
                let rows = exclusive_table(&curve)?;
                let csv = exclusive_csv(*param, &rows);
                write(
                    &self.out_dir.join(format!("{}_exclusive.csv", param.name())),
                    &csv,
                )?;
                print!("{csv}");
            }
            Command::Sound {
                systems,
                seeds,
                small,
                gen,
            } => {
                let cfg = SoundnessConfig {
                    gen: gen.load()?,
                    n_systems: *systems,
                    seeds_per_system: *seeds,
                    small: *small,
                    master_seed: self.seed,
                    ..SoundnessConfig::default()
                };
                let report = harness::soundness_campaign(&cfg)?;
                let json = serde_json::to_string_pretty(&report)?;
                write(&self.out_dir.join("soundness.json"), &json)?;
                println!("{json}");
                if report.systems < *systems {
                    eprintln!(
                        "only {} schedulable systems among {} candidates",
                        report.systems, report.candidates
                    );
                }
                if !report.violations.is_empty()
                    || report.probe.as_ref().is_some_and(|p| !p.findings.is_empty())
                {
                    return Err(Counterexample.into());
                }
                if report.systems == 0 {
                    bail!("no schedulable system found to check");
                }
            }
            Command::Plot { curve, output } => {
                let c: SchedulabilityCurve = serde_json::from_str(&read(curve)?)
                    .with_context(|| format!("parsing {}", curve.display()))?;
                let out = output
                    .clone()
                    .unwrap_or_else(|| self.out_dir.join(format!("{}.svg", c.param.name())));
                harness::plot(&c, &out)?;
                eprintln!("wrote {}", out.display());
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Counterexample>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
