//! The `streamforge` command line.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 I/O error,
//! 4 numerical failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dist::{self, Distribution, Fill, FillRequest};
use crate::error::{Error, Result};
use crate::fisher::{fisher_sim, ContingencyTable};
use crate::format::{g17, write_csv_rows};
use crate::grf::io::{read_params_csv, write_field_binary, write_field_csv, PARAM_COLUMNS};
use crate::grf::{simulate_grf, GridSpec};
use crate::grid::{Executor, Shape, WorkGrid};
use crate::rng::{load_streams, save_streams, write_streams, Creator, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "streamforge", version, about = "Reproducible parallel MRG31k3p random streams")]
pub struct Cli {
    /// Worker threads; never changes any output.
    #[arg(long, global = true, env = "STREAMFORGE_THREADS", default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create or inspect stream files.
    #[command(subcommand)]
    Streams(StreamsCommand),
    /// Fill a vector or matrix with random variates.
    Generate(GenerateArgs),
    /// Monte Carlo Fisher exact test.
    Fisher(FisherArgs),
    /// Simulate Matérn Gaussian random fields.
    Grf(GrfArgs),
}

#[derive(Debug, Subcommand)]
pub enum StreamsCommand {
    Create {
        /// Number of streams.
        #[arg(long)]
        n: usize,
        /// Seed of the first stream, six comma-separated integers.
        #[arg(long, value_parser = parse_seed)]
        seed: Option<[u32; 6]>,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Print the 12 x n state matrix (current states, then initial states).
    Info {
        #[arg(long)]
        streams: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Uniform,
    Integer,
    Normal,
    Exponential,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Vector length.
    #[arg(long, conflicts_with = "dims", required_unless_present = "dims")]
    pub n: Option<usize>,
    /// Matrix size as ROWS,COLS.
    #[arg(long, value_parser = parse_pair)]
    pub dims: Option<(usize, usize)>,
    /// Exponential rate.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Work grid as N0,N1.
    #[arg(long, value_parser = parse_pair, default_value = "64,8")]
    pub grid: (usize, usize),
    /// Streams file; rewritten with advanced states.
    #[arg(long)]
    pub streams: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    /// Table CSV, one row per line.
    #[arg(long)]
    pub table: PathBuf,
    /// Requested replicates.
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    #[arg(long, value_parser = parse_pair, default_value = "64,16")]
    pub grid: (usize, usize),
    #[arg(long)]
    pub streams: PathBuf,
    /// Write every simulated statistic, one per line.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FieldFormat {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct GrfArgs {
    /// Parameter CSV with header shape,range,variance,anisoRatio,anisoAngleRadians.
    #[arg(long)]
    pub params: PathBuf,
    /// Cells in the horizontal direction.
    #[arg(long)]
    pub nx: usize,
    /// Cells in the vertical direction.
    #[arg(long)]
    pub ny: usize,
    #[arg(long)]
    pub cell_size: f64,
    /// Lower-left corner as X,Y.
    #[arg(long, value_parser = parse_point, default_value = "0,0", allow_hyphen_values = true)]
    pub origin: (f64, f64),
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,
    #[arg(long)]
    pub streams: PathBuf,
    #[arg(long, value_parser = parse_pair, default_value = "128,64")]
    pub grid: (usize, usize),
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FieldFormat::Csv)]
    pub format: FieldFormat,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split([',', 'x']).map(|p| p.trim().parse::<T>().map_err(|_| format!("cannot parse {p:?}"))).collect()
}

fn parse_seed(s: &str) -> std::result::Result<[u32; 6], String> {
    let v: Vec<u32> = parse_list(s)?;
    v.try_into().map_err(|v: Vec<u32>| format!("expected 6 integers, got {}", v.len()))
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    match parse_list::<usize>(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two integers, got {s:?}")),
    }
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected X,Y, got {s:?}")),
    }
}

/// Accepts plain integers and forms like `1e6`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("cannot parse {s:?}"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(format!("{s:?} is not a whole number"))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::NotPositiveDefinite { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let exec = Executor::new(cli.threads)?;
    match &cli.command {
        Command::Streams(StreamsCommand::Create { n, seed, out: path, force }) => {
            if path.exists() && !force {
                return Err(Error::InvalidArgument(format!(
                    "{} exists; pass --force to overwrite",
                    path.display()
                )));
            }
            let mut creator = Creator::with_seed(seed.unwrap_or(DEFAULT_SEED))?;
            let set = creator.create_streams(*n)?;
            save_streams(&set, path)
        }
        Command::Streams(StreamsCommand::Info { streams }) => {
            let set = load_streams(streams)?;
            let mut rows: Vec<Vec<u32>> = (0..12).map(|_| Vec::with_capacity(set.count())).collect();
            for s in set.iter() {
                let values = s.current().to_array().into_iter().chain(s.initial().to_array());
                for (row, v) in rows.iter_mut().zip(values) {
                    row.push(v);
                }
            }
            let stdout_err = |e| Error::io("<stdout>", e);
            writeln!(out, "{}", set.count()).map_err(stdout_err)?;
            for row in &rows {
                let line: Vec<String> = row.iter().map(u32::to_string).collect();
                writeln!(out, "{}", line.join(" ")).map_err(stdout_err)?;
            }
            Ok(())
        }
        Command::Generate(args) => generate(&exec, args, out),
        Command::Fisher(args) => fisher(&exec, args, out),
        Command::Grf(args) => grf(&exec, args, out),
    }
}

fn work_grid((a, b): (usize, usize)) -> Result<WorkGrid> {
    WorkGrid::new(a, b)
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn generate<W: Write>(exec: &Executor, args: &GenerateArgs, out: &mut W) -> Result<()> {
    let shape = match (args.n, args.dims) {
        (Some(n), None) => Shape::Vector(n),
        (None, Some((r, c))) => Shape::matrix(r, c),
        _ => return Err(Error::InvalidArgument("give exactly one of --n and --dims".into())),
    };
    let distribution = match args.kind {
        Kind::Uniform => Distribution::Uniform,
        Kind::Integer => Distribution::UniformInt,
        Kind::Normal => Distribution::Normal,
        Kind::Exponential => Distribution::Exponential { rate: args.rate },
    };
    let req = FillRequest::new(shape, distribution, work_grid(args.grid)?);
    let mut set = load_streams(&args.streams)?;
    let result = dist::fill(exec, &mut set, &req)?;

    let write = |w: &mut dyn Write| -> io::Result<()> {
        match (&result, shape) {
            (Fill::Double(m), Shape::Vector(_)) => write_csv_rows(w, m.to_vec().chunks(1), |v| g17(*v)),
            (Fill::Double(m), _) => write_csv_rows(w, m.rows(), |v| g17(*v)),
            (Fill::Integer(m), Shape::Vector(_)) => write_csv_rows(w, m.to_vec().chunks(1), u32::to_string),
            (Fill::Integer(m), _) => write_csv_rows(w, m.rows(), u32::to_string),
        }
    };
    match &args.out {
        Some(path) => write(&mut create_file(path)?).map_err(|e| Error::io(path, e))?,
        None => write(out).map_err(|e| Error::io("<stdout>", e))?,
    }
    save_streams(&set, &args.streams)
}

fn fisher<W: Write>(exec: &Executor, args: &FisherArgs, out: &mut W) -> Result<()> {
    let f = File::open(&args.table).map_err(|e| Error::io(&args.table, e))?;
    let table = ContingencyTable::from_csv(BufReader::new(f))?;
    let grid = work_grid(args.grid)?;
    let mut set = load_streams(&args.streams)?;
    let res = fisher_sim(exec, &table, args.n, &mut set, &grid, args.stats_out.is_some())?;
    if let (Some(path), Some(stats)) = (&args.stats_out, &res.statistics) {
        write_csv_rows(create_file(path)?, stats.chunks(1), |v| g17(*v)).map_err(|e| Error::io(path, e))?;
    }
    let err = |e| Error::io("<stdout>", e);
    writeln!(out, "threshold={}", g17(res.threshold)).map_err(err)?;
    writeln!(out, "simNum={}", res.sim_num).map_err(err)?;
    writeln!(out, "counts={}", res.counts).map_err(err)?;
    writeln!(out, "p.value={}", g17(res.p_value)).map_err(err)?;
    save_streams(&set, &args.streams)
}

fn grf<W: Write>(exec: &Executor, args: &GrfArgs, out: &mut W) -> Result<()> {
    let f = File::open(&args.params).map_err(|e| Error::io(&args.params, e))?;
    let params = read_params_csv(BufReader::new(f))?;
    let spec = GridSpec::new(args.nx, args.ny, args.cell_size, args.origin)?;
    let grid = work_grid(args.grid)?;
    let mut set = load_streams(&args.streams)?;
    let sim = simulate_grf(exec, &params, &spec, args.realizations, &mut set, &grid)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let ext = match args.format {
        FieldFormat::Csv => "csv",
        FieldFormat::Bin => "bin",
    };
    let manifest_path = args.out_dir.join("manifest.csv");
    let mut manifest = create_file(&manifest_path)?;
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p, e)
    };
    writeln!(manifest, "file,batch,realization,nrow,ncol,{}", PARAM_COLUMNS.join(","))
        .map_err(io_err(&manifest_path))?;
    for field in &sim.fields {
        let name = format!("field_b{}_r{}.{ext}", field.batch, field.realization);
        let path = args.out_dir.join(&name);
        let w = create_file(&path)?;
        match args.format {
            FieldFormat::Csv => write_field_csv(field, w),
            FieldFormat::Bin => write_field_binary(field, w),
        }
        .map_err(io_err(&path))?;
        let p = &params[field.batch];
        writeln!(
            manifest,
            "{name},{},{},{},{},{},{},{},{},{}",
            field.batch,
            field.realization,
            field.nrow,
            field.ncol,
            g17(p.shape),
            g17(p.range),
            g17(p.variance),
            g17(p.aniso_ratio),
            g17(p.aniso_angle)
        )
        .map_err(io_err(&manifest_path))?;
    }
    manifest.flush().map_err(io_err(&manifest_path))?;
    let (r, c) = sim.covariance_dims;
    writeln!(out, "covariance={r}x{c}\nfields={}", sim.fields.len()).map_err(|e| Error::io("<stdout>", e))?;
    save_streams(&set, &args.streams)
}

/// Writes a stream set in the file format to `w`.
pub fn print_streams<W: Write>(set: &crate::rng::StreamSet, w: W) -> Result<()> {
    write_streams(set, w).map_err(|e| Error::io("<stdout>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!(parse_pair("2,2").unwrap(), (2, 2));
        assert_eq!(parse_pair("256x64").unwrap(), (256, 64));
        assert!(parse_pair("1,2,3").is_err());
        assert_eq!(parse_seed("1,2,3,4,5,6").unwrap(), [1, 2, 3, 4, 5, 6]);
        assert!(parse_seed("1,2,3").is_err());
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("10010624").unwrap(), 10_010_624);
        assert!(parse_count("1.5").is_err());
        assert_eq!(parse_point("-3.5,2").unwrap(), (-3.5, 2.0));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidSeed("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::io("f", io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::NotPositiveDefinite { batch: 0, pivot: 1, value: 0.0 }), EXIT_NUMERICAL);
    }
}
