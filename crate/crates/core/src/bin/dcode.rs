use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dcode::bench::{self, powers_of_two};
use dcode::codefile::{self, fmt_real};
use dcode::corpus::{self, CorpusSpec};
use dcode::encoder::{self, EncodeParams};
use dcode::image_io::{self, ImageFormat, Polarity, DEFAULT_LAMBDA};
use dcode::matcher;
use dcode::quasirandom::halton;
use dcode::sweep::{self, SweepConfig};
use dcode::{Error, Result};

#[derive(Parser)]
#[command(name = "dcode", version, about = "Density codes for grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode an image into a density-code CSV file.
    Encode(EncodeArgs),
    /// Print the dissimilarity of a reference code against a target code.
    Compare(CompareArgs),
    /// Sweep alpha over a generated corpus and report related/unrelated bands.
    Sweep(SweepArgs),
    /// Time encodings over a size grid, or fit the timing model.
    Bench(BenchArgs),
    /// Write a synthetic corpus of figure pairs.
    GenCorpus(GenCorpusArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    LightOnDark,
    DarkOnLight,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::LightOnDark => Polarity::LightOnDark,
            PolarityArg::DarkOnLight => Polarity::DarkOnLight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Pgm,
    Png,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long, value_enum)]
    polarity: PolarityArg,
    /// Image format; guessed from the extension when absent.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Length of the Halton sequence (the code length without --alpha).
    #[arg(long, default_value_t = 1025)]
    points: usize,
    /// Code points per unit of foreground mass.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, env = "DC_LAMBDA", default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference code V (mapped onto the target).
    reference: PathBuf,
    /// Target code W.
    target: PathBuf,
    /// Polynomial degree; 0 compares points directly.
    #[arg(long)]
    degree: u32,
    /// Write per-point residuals to this CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    alpha_start: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_end: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha_step: f64,
    #[arg(long, default_value_t = 3)]
    degree: u32,
    /// Halton length; defaults to round(max alpha * max foreground mass).
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, env = "DC_LAMBDA", default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct BenchArgs {
    #[command(subcommand)]
    action: Option<BenchAction>,
    #[command(flatten)]
    run: BenchRunArgs,
}

#[derive(Subcommand)]
enum BenchAction {
    /// Fit the timing model to a timing CSV.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct BenchRunArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated image heights (default: powers of two 16..1024).
    #[arg(long, value_delimiter = ',')]
    heights: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// Comma-separated code lengths (default: powers of two 16..1024).
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, env = "DC_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pairs: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, env = "DC_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = corpus::DEFAULT_BLUR_RADIUS)]
    blur: f64,
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{} is not a readable file", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::InvalidArgument(
            format!("output directory {} does not exist", dir.display()),
        )),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    require_file(&args.image)?;
    require_parent(&args.out)?;
    let format = match args.format {
        Some(FormatArg::Pgm) => ImageFormat::Pgm,
        Some(FormatArg::Png) => ImageFormat::Png,
        None => ImageFormat::from_path(&args.image)?,
    };
    let img = image_io::load_image(&args.image, format)?;
    let seq = halton(args.points, 2)?;
    let params = EncodeParams {
        lambda: args.lambda,
        alpha: args.alpha,
        max_points: None,
    };
    let start = Instant::now();
    let code = encoder::encode_image(&img, args.polarity.into(), &seq, &params)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    codefile::write(&code, &args.out)?;
    println!("m={} elapsed_ms={}", code.len(), fmt_real(elapsed));
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    require_file(&args.reference)?;
    require_file(&args.target)?;
    if let Some(p) = &args.residuals {
        require_parent(p)?;
    }
    let v = codefile::read(&args.reference)?;
    let w = codefile::read(&args.target)?;
    let report = matcher::delta_median(&v, &w, args.degree)?;
    if let Some(path) = &args.residuals {
        let mut csv = String::from("index,residual\n");
        for (j, r) in report.residuals.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", j + 1, fmt_real(*r)));
        }
        write_text(path, &csv)?;
    }
    println!("delta={}", fmt_real(report.delta));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if let Some(p) = &args.out {
        require_parent(p)?;
    }
    let pairs = corpus::load_corpus(&args.corpus)?;
    let alphas = sweep::alpha_range(args.alpha_start, args.alpha_end, args.alpha_step);
    let mut cfg = SweepConfig {
        alphas,
        degree: args.degree,
        lambda: args.lambda,
        sequence_len: args.points,
        ..SweepConfig::default()
    };
    if let Some(t) = args.threads {
        cfg.threads = t.max(1);
    }
    let rows = sweep::run_sweep(&pairs, &cfg)?;
    let csv = sweep::to_csv(&rows);
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    let invalid = rows.iter().filter(|r| r.bands.is_err()).count();
    match sweep::longest_separated_run(&rows, f64::NEG_INFINITY, f64::INFINITY) {
        Some((lo, hi)) => eprintln!("separated for alpha in [{lo}, {hi}]; {invalid} invalid rows"),
        None => eprintln!("bands never separate; {invalid} invalid rows"),
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if let Some(BenchAction::Fit { input }) = args.action {
        require_file(&input)?;
        let text = fs::read_to_string(&input).map_err(|e| Error::Io {
            path: input.clone(),
            source: e,
        })?;
        let model = bench::fit_model(&bench::samples_from_csv(&text)?)?;
        println!("{}", model.to_line());
        return Ok(());
    }
    let run = args.run;
    if let Some(p) = &run.out {
        require_parent(p)?;
    }
    let default = || powers_of_two(16, 1024);
    let samples = bench::run_grid(
        &run.heights.unwrap_or_else(default),
        &run.widths.unwrap_or_else(default),
        &run.lengths.unwrap_or_else(default),
        run.reps,
        run.seed,
    )?;
    let csv = bench::samples_to_csv(&samples);
    match &run.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> Result<()> {
    let spec = CorpusSpec {
        pair_count: args.pairs,
        size: args.size,
        seed: args.seed,
        blur_radius: args.blur,
        ..CorpusSpec::default()
    };
    let pairs = corpus::generate_corpus(&spec)?;
    corpus::write_corpus(&pairs, &args.out)?;
    println!("wrote {} pairs to {}", pairs.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
