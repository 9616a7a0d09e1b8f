use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fourwire::bench::{self, Instance, MatrixOptions};
use fourwire::config::RunOptions;
use fourwire::form::{build, Form};
use fourwire::netmodel::{json, validate_network, LineCode, Network};
use fourwire::reduce::{merge_series_lines, rematch_linecodes, Model};
use fourwire::solve::{run_opf, run_pf, SolutionReport, Start};
use fourwire::{fixtures, qcqp};

#[derive(Parser)]
#[command(name = "fourwire", version, about = "Unbalanced power flow and OPF for four-wire distribution networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceMode {
    Kron,
    Balanced,
    Merge,
    /// Replace linecodes by their nearest library entry (needs --library).
    Match,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Network JSON file.
    file: PathBuf,
    #[arg(long, default_value = "ivr")]
    form: Form,
    #[arg(long, default_value = "fourwire")]
    model: Model,
    /// Options file (TOML, or JSON by extension).
    #[arg(long)]
    opts: Option<PathBuf>,
    /// Starting point; overrides the options file.
    #[arg(long)]
    start: Option<Start>,
    /// Output file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and list every violated rule.
    Validate { file: PathBuf },
    /// Write a reduced or rematched network.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: ReduceMode,
        /// Linecode library (JSON array of linecodes) for `--mode match`.
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the optimization model in text form.
    DumpModel(ModelArgs),
    /// Solve a power flow and print the solution as JSON.
    Pf(ModelArgs),
    /// Solve an optimal power flow and print the solution as JSON.
    Opf(ModelArgs),
    /// Run every instance under each model and formulation, evaluating
    /// setpoints on the four-wire network.
    Bench {
        /// Directory of network JSON files.
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "ivr,acr")]
        forms: Vec<Form>,
        #[arg(long, value_delimiter = ',', default_value = "fourwire,kron,balanced")]
        models: Vec<Model>,
        /// CSV report path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON report with solve-time fits.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        opts: Option<PathBuf>,
        /// Add and size DGs on every instance first.
        #[arg(long)]
        synthesize: bool,
        /// Directory of load profiles (CSV, kW).
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Profile time step to use with --profiles.
        #[arg(long, default_value_t = 207)]
        step: usize,
        #[arg(long, default_value_t = 0.95)]
        power_factor: f64,
        /// Leave solve times empty so reports are reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write a bundled test network as JSON.
    Fixture {
        /// Fixture name; omit to list them.
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            let r = so.write_all(text.as_bytes()).and_then(|_| if text.ends_with('\n') { Ok(()) } else { so.write_all(b"\n") });
            match r {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn read_network(path: &Path) -> Result<Network> {
    json::from_path(path).with_context(|| format!("reading {}", path.display()))
}

fn options(path: Option<&Path>) -> Result<RunOptions> {
    match path {
        Some(p) => RunOptions::from_path(p).with_context(|| format!("reading options {}", p.display())),
        None => Ok(RunOptions::default()),
    }
}

fn prepare(args: &ModelArgs) -> Result<(Network, RunOptions)> {
    let net = args.model.apply(&read_network(&args.file)?)?;
    let mut opts = options(args.opts.as_deref())?;
    if let Some(s) = args.start {
        opts.start = s;
    }
    Ok((net, opts))
}

fn solve(args: &ModelArgs, opf: bool) -> Result<ExitCode> {
    let (net, o) = prepare(args)?;
    let (f, sol) = if opf {
        run_opf(&net, args.form, &o.formulation, &o.solver, o.start)?
    } else {
        run_pf(&net, args.form, &o.formulation, &o.solver, o.start)?
    };
    log::info!("{}: {} after {} iterations", args.file.display(), sol.status, sol.iterations);
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&SolutionReport::new(&f, &sol))?)?;
    Ok(if sol.is_optimal() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => {
            let net = read_network(&file)?;
            let diags = validate_network(&net);
            if diags.is_empty() {
                emit(None, "ok")?;
                return Ok(ExitCode::SUCCESS);
            }
            emit(None, &diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))?;
            Ok(ExitCode::FAILURE)
        }
        Command::Reduce { file, mode, library, out } => {
            let net = read_network(&file)?;
            let reduced = match mode {
                ReduceMode::Kron => Model::Kron.apply(&net)?,
                ReduceMode::Balanced => Model::Balanced.apply(&net)?,
                ReduceMode::Merge => merge_series_lines(&net)?,
                ReduceMode::Match => {
                    let Some(lib) = library else { bail!("--mode match needs --library") };
                    let text = fs::read_to_string(&lib).with_context(|| format!("reading {}", lib.display()))?;
                    let codes: Vec<LineCode> = serde_json::from_str(&text)?;
                    rematch_linecodes(&net, &codes)?
                }
            };
            emit(out.as_deref(), &json::to_string(&reduced)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpModel(args) => {
            let (net, o) = prepare(&args)?;
            let f = build(&net, args.form, &o.formulation)?;
            emit(args.out.as_deref(), &qcqp::dump(&f.sys))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Pf(args) => solve(&args, false),
        Command::Opf(args) => solve(&args, true),
        Command::Bench { instances, forms, models, out, json, opts, synthesize, profiles, step, power_factor, no_timing } => {
            let o = options(opts.as_deref())?;
            let mut list = bench::load_instances(&instances)?;
            if list.is_empty() {
                bail!("no network files in {}", instances.display());
            }
            if let Some(dir) = profiles {
                let p = bench::read_profiles(&dir)?;
                for inst in &mut list {
                    inst.network = bench::apply_snapshot(&inst.network, &p, step, power_factor)?;
                }
            }
            if synthesize {
                list = list
                    .into_iter()
                    .map(|i| -> Result<Instance> {
                        let case = bench::synthesize_case(&i.network, &o.case, &o.solver)
                            .with_context(|| format!("synthesizing {}", i.name))?;
                        log::info!("{}: {} DGs of {:.0} W", i.name, case.dgs.len(), case.capacity);
                        Ok(Instance { name: i.name, network: case.network })
                    })
                    .collect::<Result<_>>()?;
            }
            let mo = MatrixOptions { solver: o.solver, formulation: o.formulation, start: o.start, timing: !no_timing };
            let report = bench::run_matrix(&list, &forms, &models, &mo);
            report.write_csv(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
            if let Some(j) = json {
                fs::write(&j, report.to_json()?).with_context(|| format!("writing {}", j.display()))?;
            }
            let failed = report.rows.iter().filter(|r| r.status != "optimal").count();
            eprintln!("{} cells, {} not optimal", report.rows.len(), failed);
            Ok(if report.has_numerical_failure() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Fixture { name, out } => {
            let Some(name) = name else {
                emit(None, &fixtures::NAMES.join("\n"))?;
                return Ok(ExitCode::SUCCESS);
            };
            let Some(net) = fixtures::by_name(&name) else { bail!("unknown fixture `{name}`") };
            emit(out.as_deref(), &json::to_string(&net)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
