//! `dcsr` command line: generate sparse int8 test matrices, encode them
//! into dCSR or the baseline formats, verify containers against their
//! source, compare storage footprints, and benchmark the SpMV/SpMM
//! kernels against the dense oracle with engine operation counters.
//!
//! Exit codes: 0 success, 1 verify mismatch, 2 I/O or usage failure,
//! 3 kernel output diverging from the dense oracle.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use dcsr_core::baselines::{bcsr, csr, ri};
use dcsr_core::container::{self, DcsrMatrix};
use dcsr_core::engine::{Counters, ScalarEngine, VectorEngine};
use dcsr_core::footprint::FootprintBreakdown;
use dcsr_core::io;
use dcsr_core::kernels::{
    dcsr_spmm_ib, dcsr_spmm_vb, dcsr_spmv, dense_mac_lanes, dense_spmm, dense_spmv, ri_spmm,
    ri_spmv,
};
use dcsr_core::matrix::{
    generate_activations, generate_uniform_sparse, DenseMatrixI8, GeneratorSpec,
};

use report::{FormatFootprint, InputDescriptor, KernelReport, Report, ReportFormat};

const EXIT_VERIFY_MISMATCH: u8 = 1;
const EXIT_FAILURE: u8 = 2;
const EXIT_ORACLE_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dcsr",
    version,
    about = "Encoder, verifier, and kernel benchmark for the dCSR sparse-matrix codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a uniformly sparse random int8 matrix as a Matrix Market file.
    Gen(GenArgs),
    /// Encode a matrix into one format and report its storage footprint.
    Encode(EncodeArgs),
    /// Decode an encoded container and compare it elementwise to a source matrix.
    Verify(VerifyArgs),
    /// Report storage footprints, either for one format or all of them.
    Footprint(FootprintArgs),
    /// Run a kernel, self-check against the dense oracle, and report counters.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Fraction of zero entries, in [0, 1).
    #[arg(long)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output Matrix Market path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input matrix: Matrix Market or DMI8 dense binary.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    /// dCSR lane-group size (2, 4, 8, 16, or 32).
    #[arg(long, default_value_t = 16)]
    group_size: usize,
    /// Relative-indexing delta width in bits (2..=8).
    #[arg(long, default_value_t = 4)]
    ri_bits: u8,
    /// Where to write the serialized container; omit to report only.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
}

#[derive(Args)]
struct VerifyArgs {
    /// Source matrix the container is checked against.
    #[arg(long = "in")]
    input: PathBuf,
    /// Serialized container (dCSR, CSR, BCSR, or RI, told apart by magic).
    #[arg(long)]
    encoded: PathBuf,
}

#[derive(Args)]
struct FootprintArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Report one row for every format instead of a single one.
    #[arg(long)]
    all: bool,
    #[arg(long, value_enum, default_value_t = Format::Dcsr)]
    format: Format,
    #[arg(long, default_value_t = 16)]
    group_size: usize,
    #[arg(long, default_value_t = 4)]
    ri_bits: u8,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
}

#[derive(Args)]
struct BenchArgs {
    /// Weight matrix: Matrix Market or DMI8 dense binary.
    #[arg(long)]
    weights: PathBuf,
    /// Activations as a DMI8 dense binary; one row per pixel.
    #[arg(long, conflicts_with = "pixels")]
    activations: Option<PathBuf>,
    /// Synthesize this many activation pixels instead of loading a file.
    #[arg(long)]
    pixels: Option<usize>,
    /// Seed for synthesized activations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Activation zero point.
    #[arg(long, default_value_t = 0)]
    zero_point: i16,
    #[arg(long, value_enum)]
    kernel: Kernel,
    #[arg(long, default_value_t = 16)]
    group_size: usize,
    #[arg(long, default_value_t = 4)]
    ri_bits: u8,
    /// Run the kernel this many times; counters must agree across runs.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Pre-encoded weight container to run instead of encoding in-process.
    #[arg(long)]
    encoded: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Dcsr,
    Csr,
    Bcsr,
    Ri,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Dcsr => "dcsr",
            Format::Csr => "csr",
            Format::Bcsr => "bcsr",
            Format::Ri => "ri",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Kernel {
    Dense,
    DcsrVb,
    DcsrIb,
    DcsrSpmv,
    Ri,
}

impl Kernel {
    fn name(self) -> &'static str {
        match self {
            Kernel::Dense => "dense",
            Kernel::DcsrVb => "dcsr-vb",
            Kernel::DcsrIb => "dcsr-ib",
            Kernel::DcsrSpmv => "dcsr-spmv",
            Kernel::Ri => "ri",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_FAILURE);
    }
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Encode(args) => cmd_encode(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Footprint(args) => cmd_footprint(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

/// `DCSR_THREADS` caps the global worker pool (row-parallel encoding and
/// repeated bench runs).
fn init_thread_pool() -> anyhow::Result<()> {
    match std::env::var("DCSR_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .context("DCSR_THREADS must be a positive integer")?;
            if n == 0 {
                bail!("DCSR_THREADS must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("initializing worker pool")?;
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(e).context("reading DCSR_THREADS"),
    }
}

#[derive(Debug, PartialEq, Eq)]
enum MatrixFileKind {
    MatrixMarket,
    DenseBinary,
}

fn classify_matrix_bytes(bytes: &[u8]) -> Option<MatrixFileKind> {
    if bytes.starts_with(b"DMI8") {
        Some(MatrixFileKind::DenseBinary)
    } else if bytes.starts_with(b"%%MatrixMarket") {
        Some(MatrixFileKind::MatrixMarket)
    } else {
        None
    }
}

fn load_matrix(path: &Path) -> anyhow::Result<DenseMatrixI8> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match classify_matrix_bytes(&bytes) {
        Some(MatrixFileKind::DenseBinary) => Ok(io::parse_dense_binary(&bytes)?),
        Some(MatrixFileKind::MatrixMarket) => Ok(io::load_matrix_market(path)?),
        None => bail!(
            "{}: neither a Matrix Market file nor a DMI8 dense binary",
            path.display()
        ),
    }
}

fn describe(m: &DenseMatrixI8, path: Option<&Path>, seed: Option<u64>) -> InputDescriptor {
    let nnz = m.nnz();
    InputDescriptor {
        path: path.map(|p| p.display().to_string()),
        rows: m.rows(),
        cols: m.cols(),
        nnz,
        sparsity: 1.0 - nnz as f64 / (m.rows() * m.cols()) as f64,
        seed,
    }
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<ExitCode> {
    let spec = GeneratorSpec {
        rows: args.rows,
        cols: args.cols,
        sparsity: args.sparsity,
        seed: args.seed,
    };
    let m = generate_uniform_sparse(&spec)?;
    io::store_matrix_market(&m, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({}x{}, nnz={})",
        args.out.display(),
        m.rows(),
        m.cols(),
        m.nnz()
    );
    Ok(ExitCode::SUCCESS)
}

fn encode_to(
    m: &DenseMatrixI8,
    format: Format,
    group_size: usize,
    ri_bits: u8,
) -> dcsr_core::Result<(Vec<u8>, FootprintBreakdown)> {
    Ok(match format {
        Format::Dcsr => {
            let d = container::encode_matrix(m, group_size)?;
            (container::serialize(&d), container::footprint(&d))
        }
        Format::Csr => {
            let c = csr::encode_csr(m)?;
            (csr::serialize_csr(&c), csr::footprint_csr(&c))
        }
        Format::Bcsr => {
            let b = bcsr::encode_bcsr(m)?;
            (bcsr::serialize_bcsr(&b), bcsr::footprint_bcsr(&b))
        }
        Format::Ri => {
            let r = ri::encode_ri(m, ri_bits)?;
            (ri::serialize_ri(&r), ri::footprint_ri(&r))
        }
    })
}

fn cmd_encode(args: &EncodeArgs) -> anyhow::Result<ExitCode> {
    let m = load_matrix(&args.input)?;
    let (bytes, fp) = encode_to(&m, args.format, args.group_size, args.ri_bits)
        .with_context(|| format!("encoding to {}", args.format.name()))?;
    if let Some(out) = &args.out {
        std::fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    let report = Report {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "encode",
        input: describe(&m, Some(&args.input), None),
        footprints: vec![FormatFootprint::ok(args.format.name(), &fp)],
        kernel: None,
    };
    println!("{}", report::render(&report, args.report)?);
    Ok(ExitCode::SUCCESS)
}

fn decode_container_file(path: &Path) -> anyhow::Result<DenseMatrixI8> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let decoded = match bytes.get(0..4) {
        Some(b"DCSR") => container::decode_matrix(&container::deserialize(&bytes)?)?,
        Some(b"CSRX") => csr::decode_csr(&csr::deserialize_csr(&bytes)?)?,
        Some(b"BCSR") => bcsr::decode_bcsr(&bcsr::deserialize_bcsr(&bytes)?)?,
        Some(b"RIDX") => ri::decode_ri(&ri::deserialize_ri(&bytes)?)?,
        _ => bail!("{}: unrecognized container magic", path.display()),
    };
    Ok(decoded)
}

fn first_mismatch(source: &DenseMatrixI8, decoded: &DenseMatrixI8) -> Option<String> {
    if source.rows() != decoded.rows() || source.cols() != decoded.cols() {
        return Some(format!(
            "dimension mismatch: source is {}x{}, container decodes to {}x{}",
            source.rows(),
            source.cols(),
            decoded.rows(),
            decoded.cols()
        ));
    }
    for r in 0..source.rows() {
        for c in 0..source.cols() {
            if source.get(r, c) != decoded.get(r, c) {
                return Some(format!(
                    "mismatch at ({r}, {c}): source {}, decoded {}",
                    source.get(r, c),
                    decoded.get(r, c)
                ));
            }
        }
    }
    None
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<ExitCode> {
    let source = load_matrix(&args.input)?;
    let decoded = decode_container_file(&args.encoded)?;
    match first_mismatch(&source, &decoded) {
        None => {
            println!(
                "verified: {} decodes to {} exactly ({}x{}, nnz={})",
                args.encoded.display(),
                args.input.display(),
                source.rows(),
                source.cols(),
                source.nnz()
            );
            Ok(ExitCode::SUCCESS)
        }
        Some(msg) => {
            println!("{msg}");
            Ok(ExitCode::from(EXIT_VERIFY_MISMATCH))
        }
    }
}

fn cmd_footprint(args: &FootprintArgs) -> anyhow::Result<ExitCode> {
    let m = load_matrix(&args.input)?;
    let formats: Vec<Format> = if args.all {
        vec![Format::Dcsr, Format::Csr, Format::Bcsr, Format::Ri]
    } else {
        vec![args.format]
    };
    let footprints = formats
        .into_iter()
        .map(|f| match encode_to(&m, f, args.group_size, args.ri_bits) {
            Ok((_, fp)) => FormatFootprint::ok(f.name(), &fp),
            Err(e) => FormatFootprint::err(f.name(), e.to_string()),
        })
        .collect();
    let report = Report {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "footprint",
        input: describe(&m, Some(&args.input), None),
        footprints,
        kernel: None,
    };
    println!("{}", report::render(&report, args.report)?);
    Ok(ExitCode::SUCCESS)
}

enum EncodedWeights {
    Dense,
    Dcsr(DcsrMatrix),
    Ri(ri::RiMatrix),
}

fn prepare_weights(args: &BenchArgs, w: &DenseMatrixI8) -> anyhow::Result<EncodedWeights> {
    let encoded_bytes = match &args.encoded {
        Some(p) => Some(std::fs::read(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    Ok(match args.kernel {
        Kernel::Dense => {
            if encoded_bytes.is_some() {
                bail!("the dense kernel takes no --encoded container");
            }
            EncodedWeights::Dense
        }
        Kernel::Ri => EncodedWeights::Ri(match encoded_bytes {
            Some(bytes) => ri::deserialize_ri(&bytes)?,
            None => ri::encode_ri(w, args.ri_bits)?,
        }),
        _ => EncodedWeights::Dcsr(match encoded_bytes {
            Some(bytes) => container::deserialize(&bytes)?,
            None => container::encode_matrix(w, args.group_size)?,
        }),
    })
}

fn run_kernel_once(
    kernel: Kernel,
    w: &DenseMatrixI8,
    enc: &EncodedWeights,
    a: &DenseMatrixI8,
    zp: i16,
    bias: &[i32],
    group_size: usize,
) -> anyhow::Result<(Vec<i32>, Counters)> {
    let mut engine = ScalarEngine::new(group_size)?;
    let out = match (kernel, enc) {
        (Kernel::Dense, EncodedWeights::Dense) => {
            let out = dense_spmm(w, a, zp, bias)?;
            return Ok((
                out,
                Counters {
                    mac_lanes: dense_mac_lanes(w.rows(), w.cols(), a.rows()),
                    ..Counters::default()
                },
            ));
        }
        (Kernel::DcsrVb, EncodedWeights::Dcsr(d)) => dcsr_spmm_vb(d, a, zp, bias, &mut engine)?,
        (Kernel::DcsrIb, EncodedWeights::Dcsr(d)) => dcsr_spmm_ib(d, a, zp, bias, &mut engine)?,
        (Kernel::DcsrSpmv, EncodedWeights::Dcsr(d)) => {
            dcsr_spmv(d, a.row(0), zp, bias, &mut engine)?
        }
        (Kernel::Ri, EncodedWeights::Ri(r)) => {
            if a.rows() == 1 {
                ri_spmv(r, a.row(0), zp, bias, &mut engine)?
            } else {
                ri_spmm(r, a, zp, bias, &mut engine)?
            }
        }
        _ => unreachable!("kernel/encoding pairing fixed by prepare_weights"),
    };
    Ok((out, engine.counters()))
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<ExitCode> {
    if args.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let w = load_matrix(&args.weights)?;
    let a = match (&args.activations, args.pixels) {
        (Some(path), None) => {
            io::load_dense_binary(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, Some(pixels)) => generate_activations(pixels, w.cols(), args.seed)?,
        (None, None) => bail!("provide either --activations FILE or --pixels N"),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let enc = prepare_weights(args, &w)?;
    let bias = vec![0i32; w.rows()];

    let pixels = match args.kernel {
        Kernel::DcsrSpmv => 1,
        Kernel::Ri if a.rows() == 1 => 1,
        _ => a.rows(),
    };
    let want = match pixels {
        1 => dense_spmv(&w, a.row(0), args.zero_point, &bias)?,
        _ => dense_spmm(&w, &a, args.zero_point, &bias)?,
    };

    let runs: Vec<anyhow::Result<(Vec<i32>, Counters, u128)>> = (0..args.repeat)
        .into_par_iter()
        .map(|_| {
            let start = Instant::now();
            let (out, counters) = run_kernel_once(
                args.kernel,
                &w,
                &enc,
                &a,
                args.zero_point,
                &bias,
                args.group_size,
            )?;
            Ok((out, counters, start.elapsed().as_micros()))
        })
        .collect();

    let mut counters = None;
    let mut wall_clock_us = 0u128;
    for run in runs {
        let (out, c, us) = run?;
        if let Some(i) = (0..want.len()).find(|&i| out.get(i) != Some(&want[i])) {
            eprintln!(
                "oracle mismatch: kernel {} diverged from the dense reference at pixel {}, row {} (got {:?}, expected {})",
                args.kernel.name(),
                i / w.rows(),
                i % w.rows(),
                out.get(i),
                want[i]
            );
            return Ok(ExitCode::from(EXIT_ORACLE_MISMATCH));
        }
        if out.len() != want.len() {
            eprintln!(
                "oracle mismatch: kernel {} produced {} outputs, expected {}",
                args.kernel.name(),
                out.len(),
                want.len()
            );
            return Ok(ExitCode::from(EXIT_ORACLE_MISMATCH));
        }
        match counters {
            None => counters = Some(c),
            Some(prev) if prev != c => bail!("counters differ across repeats"),
            Some(_) => {}
        }
        wall_clock_us += us;
    }
    let counters = counters.expect("at least one repeat ran");

    let footprints = match &enc {
        EncodedWeights::Dense => Vec::new(),
        EncodedWeights::Dcsr(d) => {
            vec![FormatFootprint::ok("dcsr", &container::footprint(d))]
        }
        EncodedWeights::Ri(r) => vec![FormatFootprint::ok("ri", &ri::footprint_ri(r))],
    };
    let group_size = match args.kernel {
        Kernel::Dense => None,
        _ => Some(args.group_size),
    };
    let report = Report {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "bench",
        input: describe(&w, Some(&args.weights), Some(args.seed)),
        footprints,
        kernel: Some(KernelReport::new(
            args.kernel.name(),
            group_size,
            pixels,
            args.repeat,
            counters,
            wall_clock_us,
        )),
    };
    println!("{}", report::render(&report, args.report)?);
    Ok(ExitCode::SUCCESS)
}
