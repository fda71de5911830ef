use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use kinomapf::experiment::{compare_methods, read_csv, run_experiment, summary_table, write_csv, ExperimentConfig, CSV_HEADER};
use kinomapf::layout::{check_flow, generate, preset, LayoutParams, PRESET_NAMES};
use kinomapf::model::{parse_instance, write_instance, Instance};
use kinomapf::sim::{Heatmap, SimConfig};
use kinomapf::solvers::{SolverConfig, PLANNER_NAMES};

#[derive(Parser)]
#[command(name = "kinomapf", about = "Warehouse multi-robot path planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a preset name or a layout TOML file.
    Gen {
        layout: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Override the layout seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate one method on one instance for a number of repetitions.
    Run(RunArgs),
    /// Summarize metric CSV files per method.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Turn a polls file into per-tier grids.
    Heatmap {
        polls: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write log-scaled PGM images.
        #[arg(long)]
        pgm: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    instance: Option<PathBuf>,
    /// Generate the instance from a preset instead of reading a file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(short, long)]
    method: Option<String>,
    /// Simulated seconds.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Poll period in seconds.
    #[arg(long)]
    poll: Option<f64>,
    /// Planner wall-clock limit per call; 0 keeps only the expansion budget.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    trace: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunFile {
    instance: Option<PathBuf>,
    preset: Option<String>,
    method: Option<String>,
    horizon: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    poll: Option<f64>,
    timeout: Option<f64>,
    trace: Option<bool>,
    output: Option<PathBuf>,
    solver: Option<SolverConfig>,
    sim: Option<SimConfig>,
}

fn load_instance(path: Option<&Path>, preset_name: Option<&str>) -> Result<Instance> {
    match (path, preset_name) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_instance(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        (None, Some(name)) => {
            let params = preset(name).with_context(|| format!("unknown preset {name}; known: {}", PRESET_NAMES.join(", ")))?;
            Ok(generate(&params)?)
        }
        (None, None) => bail!("give an instance file (-i) or a preset (--preset)"),
    }
}

fn gen(layout: &str, output: &Path, seed: Option<u64>) -> Result<()> {
    let mut params: LayoutParams = match preset(layout) {
        Some(p) => p,
        None => {
            let text = fs::read_to_string(layout)
                .with_context(|| format!("{layout} is neither a preset ({}) nor a readable file", PRESET_NAMES.join(", ")))?;
            toml::from_str(&text).with_context(|| format!("parsing {layout}"))?
        }
    };
    if let Some(s) = seed {
        params.seed = s;
    }
    let inst = generate(&params)?;
    let flow = check_flow(&inst);
    if !flow.passes() {
        bail!("generated layout fails the flow check: {flow:?}");
    }
    fs::write(output, write_instance(&inst)).with_context(|| format!("writing {}", output.display()))?;
    println!("{} waypoints={} storage={}", inst.name, inst.graph.len(), inst.storage_locations().len());
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let file: RunFile = match &args.config {
        Some(p) => toml::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => RunFile::default(),
    };
    let inst = load_instance(
        args.instance.as_deref().or(if args.preset.is_some() { None } else { file.instance.as_deref() }),
        args.preset.as_deref().or(file.preset.as_deref()),
    )?;
    let method = args.method.or(file.method).unwrap_or_else(|| "whca-v".into());
    if !PLANNER_NAMES.contains(&method.as_str()) {
        bail!("unknown method {method}; known: {}", PLANNER_NAMES.join(", "));
    }
    let mut solver = file.solver.unwrap_or_default();
    if let Some(t) = args.timeout.or(file.timeout) {
        solver.timeout = t;
    }
    let mut sim = file.sim.unwrap_or_default();
    if let Some(h) = args.horizon.or(file.horizon) {
        sim.horizon = h;
    }
    if let Some(p) = args.poll.or(file.poll) {
        sim.poll_period = p;
    }
    sim.trace = args.trace || file.trace.unwrap_or(sim.trace);
    let config = ExperimentConfig {
        method: method.clone(),
        solver,
        sim,
        repetitions: args.reps.or(file.reps).unwrap_or(1),
        base_seed: args.seed.or(file.seed).unwrap_or(0),
    };
    let out = args.output.or(file.output).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let cells = run_experiment(&inst, &config)?;
    let csv_path = out.join(format!("{}_{}.csv", inst.name, method));
    let records: Vec<_> = cells.iter().map(|c| c.record.clone()).collect();
    fs::write(&csv_path, write_csv(&records, true)?)?;
    let mut heat: Option<Heatmap> = None;
    let mut ok = true;
    for c in &cells {
        let (r, m) = (&c.record, &c.metrics);
        println!(
            "{} {} rep={} seed={} handled={} trip={:.2}m/{:.2}s wall={:.3}s idle={:.3} ub={}",
            r.instance, r.method, r.rep, r.seed, r.handled_units, r.avg_trip_len_m, r.avg_trip_time_s, r.wall_time_s, r.idle_frac, r.ub
        );
        println!(
            "  overlaps={} aborts={} evasions={} moves={} longest_move={:.1}s stalled={}",
            m.geometric_faults, m.aborts, m.deadlock_moves, m.completed_moves, m.longest_move, m.stalled_moves
        );
        if let Some(f) = &c.fault {
            eprintln!("rep {}: {f}", r.rep);
            ok = false;
        }
        if config.sim.trace {
            fs::write(out.join(format!("trace_{}_{}.txt", method, r.rep)), c.trace.join("\n") + "\n")?;
        }
        match &mut heat {
            None => heat = Some(c.heatmap.clone()),
            Some(h) => {
                h.polls += c.heatmap.polls;
                for (a, b) in h.tiers.iter_mut().zip(&c.heatmap.tiers) {
                    for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                        *x += y;
                    }
                }
            }
        }
    }
    if let Some(h) = heat {
        let f = fs::File::create(out.join("polls.bin"))?;
        h.write_to(std::io::BufWriter::new(f))?;
    }
    println!("wrote {}", csv_path.display());
    Ok(ok)
}

fn compare(files: &[PathBuf]) -> Result<()> {
    let mut records = Vec::new();
    for f in files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        if !text.starts_with(CSV_HEADER) {
            bail!("{} does not start with the metrics header", f.display());
        }
        records.extend(read_csv(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    print!("{}", summary_table(&compare_methods(&records)));
    Ok(())
}

fn heatmap(polls: &Path, output: &Path, pgm: bool) -> Result<()> {
    let h = Heatmap::read_from(std::io::BufReader::new(
        fs::File::open(polls).with_context(|| format!("opening {}", polls.display()))?,
    ))?;
    fs::create_dir_all(output)?;
    for (t, grid) in h.tiers.iter().enumerate() {
        fs::write(output.join(format!("tier{t}.txt")), grid.to_text())?;
        if pgm {
            fs::write(output.join(format!("tier{t}.pgm")), grid.to_pgm())?;
        }
        println!("tier {t}: {}x{} cells, {} samples over {} polls", grid.width, grid.height, grid.total(), h.polls);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { layout, output, seed } => gen(&layout, &output, seed).map(|_| true),
        Command::Run(args) => run(args),
        Command::Compare { files } => compare(&files).map(|_| true),
        Command::Heatmap { polls, output, pgm } => heatmap(&polls, &output, pgm).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
