use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use earverify::dataset::Dataset;
use earverify::experiment::{
    baseline_only, grid_search, GridReport, GridResult, ProtocolConfig, RunOptions, ScoreBlock,
    SplitPolicy,
};
use earverify::synth::{build_dataset, SynthConfig};

#[derive(Parser)]
#[command(name = "earverify", version, about = "Ear-acoustic 1:1 verification experiments")]
struct Cli {
    /// Worker threads for pair-level parallelism (0 = all cores).
    #[arg(long, global = true, env = "EARVERIFY_THREADS", default_value_t = 0)]
    threads: usize,

    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    FirstK,
    SeededShuffle,
}

impl From<Split> for SplitPolicy {
    fn from(s: Split) -> Self {
        match s {
            Split::FirstK => SplitPolicy::FirstK,
            Split::SeededShuffle => SplitPolicy::SeededShuffle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Det,
    Csv,
}

#[derive(clap::Args)]
struct ProtocolArgs {
    /// Dataset directory or manifest path.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Split::FirstK)]
    split: Split,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset of simulated ear measurements.
    Synth {
        #[arg(long, default_value_t = 52)]
        subjects: usize,
        #[arg(long, default_value_t = 30)]
        measurements: usize,
        #[arg(long, default_value_t = 5)]
        shots: usize,
        /// Per-shot SNR in dB; `inf` disables noise.
        #[arg(long, default_value_t = SynthConfig::default().snr_db)]
        snr_db: f64,
        #[arg(long, default_value_t = SynthConfig::default().intra_subject_jitter)]
        jitter: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory for manifest.json and features.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the baseline and optionally one BC condition.
    Run {
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// BC mixing ratio in (0, 1).
        #[arg(long, requires = "nbc")]
        r: Option<f64>,
        /// Number of BC features.
        #[arg(long, requires = "r")]
        nbc: Option<usize>,
        /// Rescale --nbc from the 52-subject grid to this dataset's size.
        #[arg(long)]
        scale_nbc: bool,
    },
    /// Grid search over r and N_BC.
    Grid {
        #[command(flatten)]
        protocol: ProtocolArgs,
        /// Comma-separated ratios (default: 0.01,0.05,0.1,...,0.9).
        #[arg(long, value_delimiter = ',')]
        r_grid: Option<Vec<f64>>,
        /// Comma-separated N_BC values (default: the 52-subject grid, rescaled).
        #[arg(long, value_delimiter = ',')]
        nbc_grid: Option<Vec<usize>>,
        /// Rescale an explicit --nbc-grid to this dataset's size.
        #[arg(long)]
        scale_nbc: bool,
        /// Condition table CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print or export a report written by `run` or `grid`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Directory for `--format det` output.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::FAILURE;
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_missing_file(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn is_missing_file(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or_else(|| match c.downcast_ref() {
            Some(earverify::Error::Io(io)) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == io::ErrorKind::NotFound)
    })
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth {
            subjects,
            measurements,
            shots,
            snr_db,
            jitter,
            seed,
            out,
        } => {
            let cfg = SynthConfig {
                n_subjects: *subjects,
                n_measurements: *measurements,
                shots_per_measurement: *shots,
                snr_db: *snr_db,
                intra_subject_jitter: *jitter,
                rng_seed: *seed,
                ..SynthConfig::default()
            };
            cfg.validate()?;
            let ds = build_dataset(&cfg)?;
            let digest = ds
                .write_dir(out)
                .with_context(|| format!("writing dataset to {}", out.display()))?;
            println!(
                "subjects {}  rows {}  sha256 {digest}",
                ds.subjects().len(),
                ds.n_rows()
            );
            Ok(())
        }
        Command::Run {
            protocol,
            r,
            nbc,
            scale_nbc,
        } => {
            let mut cfg = protocol_config(protocol);
            cfg.scale_nbc = *scale_nbc;
            let report = match (r, nbc) {
                (Some(r), Some(n)) => {
                    if !(*r > 0.0 && *r < 1.0) {
                        bail!("--r {r} must lie strictly between 0 and 1");
                    }
                    cfg.r_grid = vec![*r];
                    cfg.nbc_grid = vec![*n];
                    let report = run_grid(cli, protocol, &cfg, grid_search)?;
                    if report.conditions.is_empty() {
                        bail!("infeasible condition: {}", report.warnings.join("; "));
                    }
                    report
                }
                _ => {
                    let mut report = run_grid(cli, protocol, &cfg, baseline_only)?;
                    report.metadata.r_grid.clear();
                    report.metadata.nbc_grid.clear();
                    report.metadata.scale_nbc = false;
                    report
                }
            };
            write_report(&report, &protocol.out)?;
            let stem = protocol.out.with_extension("");
            write_det(&report.baseline, &det_path(&stem, "baseline"))?;
            for c in &report.conditions {
                write_det(&c.scores, &det_path(&stem, &condition_tag(c.r, c.n_bc)))?;
            }
            print_table(&report, io::stdout().lock())?;
            Ok(())
        }
        Command::Grid {
            protocol,
            r_grid,
            nbc_grid,
            scale_nbc,
            csv,
        } => {
            let mut cfg = protocol_config(protocol);
            if let Some(g) = r_grid {
                cfg.r_grid = g.clone();
            }
            if let Some(g) = nbc_grid {
                cfg.nbc_grid = g.clone();
                cfg.scale_nbc = *scale_nbc;
            }
            let report = run_grid(cli, protocol, &cfg, grid_search)?;
            write_report(&report, &protocol.out)?;
            if let Some(path) = csv {
                let f = fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                report.write_conditions_csv(f)?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_table(&report, io::stdout().lock())?;
            Ok(())
        }
        Command::Report {
            input,
            format,
            out_dir,
        } => {
            let text = fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let report = GridReport::from_json(&text)
                .with_context(|| format!("parsing {}", input.display()))?;
            match format {
                Format::Table => print_table(&report, io::stdout().lock())?,
                Format::Csv => report.write_conditions_csv(io::stdout().lock())?,
                Format::Det => {
                    fs::create_dir_all(out_dir)?;
                    let stem = out_dir.join("det");
                    write_det(&report.baseline, &det_path(&stem, "baseline"))?;
                    for c in &report.conditions {
                        write_det(&c.scores, &det_path(&stem, &condition_tag(c.r, c.n_bc)))?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn protocol_config(args: &ProtocolArgs) -> ProtocolConfig {
    ProtocolConfig {
        rng_seed: args.seed,
        split_policy: args.split.into(),
        ..ProtocolConfig::default()
    }
}

type Runner = fn(&Dataset, &ProtocolConfig, &RunOptions) -> earverify::Result<GridResult>;

fn run_grid(cli: &Cli, args: &ProtocolArgs, cfg: &ProtocolConfig, runner: Runner) -> Result<GridReport> {
    let ds = Dataset::read(&args.data)
        .with_context(|| format!("loading dataset {}", args.data.display()))?;
    let quiet = cli.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet && (done % (total / 20).max(1) == 0 || done == total) {
            eprintln!("pairs {done}/{total}");
        }
    };
    let opts = RunOptions {
        parallel: true,
        progress: Some(&progress),
    };
    let grid = runner(&ds, cfg, &opts)?;
    Ok(GridReport::new(&grid, cfg, ds.digest(), ds.subjects().len()))
}

fn write_report(report: &GridReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?).with_context(|| format!("writing {}", path.display()))
}

fn condition_tag(r: f64, n_bc: usize) -> String {
    format!("r{r}_n{n_bc}")
}

fn det_path(stem: &Path, tag: &str) -> PathBuf {
    let name = stem.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    stem.with_file_name(format!("{name}_{tag}.csv"))
}

fn write_det(block: &ScoreBlock, path: &Path) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    block.write_det_csv(f)?;
    Ok(())
}

fn print_table(report: &GridReport, mut out: impl Write) -> Result<()> {
    let m = &report.metadata;
    writeln!(
        out,
        "{} subjects, {} pairs, seed {}",
        m.n_subjects, m.n_pairs, m.rng_seed
    )?;
    writeln!(
        out,
        "{:>6} {:>6} {:>8} {:>8} {:>11} {:>10} {:>8}  star",
        "r", "n_bc", "auc", "eer%", "frr@0.01%", "frr@0.1%", "frr@1%"
    )?;
    let row = |out: &mut dyn Write, r: &str, n: &str, b: &ScoreBlock, star: &str| {
        let f = &b.frr_at_far_pct;
        writeln!(
            out,
            "{r:>6} {n:>6} {:>8.5} {:>8.3} {:>11.3} {:>10.3} {:>8.3}  {star}",
            b.auc, b.eer_pct, f.far_0_01, f.far_0_1, f.far_1
        )
    };
    row(&mut out, "-", "0", &report.baseline, "")?;
    let mut rows: Vec<_> = report.conditions.iter().collect();
    rows.sort_by(|a, b| a.scores.eer_pct.total_cmp(&b.scores.eer_pct));
    for c in rows {
        row(
            &mut out,
            &c.r.to_string(),
            &c.n_bc.to_string(),
            &c.scores,
            if c.star { "*" } else { "" },
        )?;
    }
    Ok(())
}
