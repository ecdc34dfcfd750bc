//! `compact-attn` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when an input file is
//! missing or its contents are invalid.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use compact_attn_core::encoder::encode_batch;
use compact_attn_core::refselect::{build_map, landmarks_to_coord, AppearanceMap, EmbedMode, EmbeddedFrame, Point};
use compact_attn_core::{compact_attention, encode, init_encoder, pixelwise_attention, AttentionConfig, Seed};

use crate::bench::{run_sweep, BenchCase};
use crate::{io, Error, Result};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (tensor format CTF1)");

#[derive(Debug, Parser)]
#[command(name = "compact-attn", version = VERSION, about = "Compact basis attention over reference feature maps")]
pub struct Cli {
    /// Override the seed of every config that has one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an encoder over a c×h×w or m×c×h×w tensor.
    Encode(EncodeArgs),
    /// Compact basis attention; writes the context features X_basis.
    Attend(AttendArgs),
    /// Pixel-wise attention baseline.
    Baseline(BaselineArgs),
    /// Print the frame ids selected for a query, one per line.
    SelectRefs(SelectArgs),
    /// Build an appearance map and write it as JSON.
    BuildMap(BuildMapArgs),
    /// Time compact and pixel-wise attention over a sweep of reference counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Encoder config JSON. Defaults to `encoder.json` in the weights directory.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with `layer{i}_kernel.ctf` / `layer{i}_bias.ctf`. Without it,
    /// weights are initialised from the seed (default 0).
    #[arg(long)]
    pub weights_dir: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttendArgs {
    #[arg(long)]
    pub xin: PathBuf,
    #[arg(long)]
    pub xa: PathBuf,
    #[arg(long)]
    pub xl: PathBuf,
    /// Attention config JSON; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_basis: PathBuf,
    /// Also write b_l.ctf, b_a.ctf, a_b.ctf and a_in.ctf into this directory.
    #[arg(long)]
    pub dump_intermediates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub xin: PathBuf,
    #[arg(long)]
    pub xa: PathBuf,
    #[arg(long)]
    pub xl: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Face,
    Pose,
}

impl From<ModeArg> for EmbedMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Face => EmbedMode::Face,
            ModeArg::Pose => EmbedMode::Pose,
        }
    }
}

/// Where the embedded reference frames come from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct FrameSource {
    /// Prebuilt appearance map JSON.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Landmarks JSON lines, embedded with `--mode`.
    #[arg(long, requires = "mode")]
    pub landmarks: Option<PathBuf>,
    /// Already embedded frames: JSON array of {"frame_id", "x", "y"}.
    #[arg(long)]
    pub coords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub source: FrameSource,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Query coordinate `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, conflicts_with = "query_landmarks", required_unless_present = "query_landmarks")]
    pub query: Option<Point>,
    /// Query landmarks JSON (`[[x, y], ...]` or `{"points": ...}`), embedded with `--mode`.
    #[arg(long, requires = "mode")]
    pub query_landmarks: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(3..))]
    pub want: u64,
}

#[derive(Debug, Args)]
pub struct BuildMapArgs {
    #[arg(long, required_unless_present = "coords", conflicts_with = "coords", requires = "mode")]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub coords: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Reference counts, e.g. `m=2,4,8,16`.
    #[arg(long, value_parser = parse_sweep, default_value = "m=2,4,8,16")]
    pub sweep: Sweep,
    #[arg(long, default_value_t = 16)]
    pub h: usize,
    #[arg(long, default_value_t = 16)]
    pub w: usize,
    #[arg(long, default_value_t = 64)]
    pub c: usize,
    #[arg(long, default_value_t = 32)]
    pub p: usize,
    #[arg(long, default_value_t = 3)]
    pub s: usize,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(3..))]
    pub repeats: u64,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep(pub Vec<usize>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("not a finite number: {v:?}"));
    Ok((num(x)?, num(y)?))
}

fn parse_sweep(s: &str) -> std::result::Result<Sweep, String> {
    let list = s.strip_prefix("m=").ok_or_else(|| format!("expected m=<list>, got {s:?}"))?;
    let ms = list
        .split(',')
        .map(|v| v.trim().parse::<usize>().ok().filter(|&m| m >= 1).ok_or_else(|| format!("not a positive integer: {v:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Sweep(ms))
}

/// Parses `args` (including the program name) and runs the command. Clap's
/// own help and version output count as success.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and --version render through the error path too
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(a, cli.seed),
        Command::Attend(a) => cmd_attend(a, cli.seed),
        Command::Baseline(a) => cmd_baseline(a),
        Command::SelectRefs(a) => cmd_select_refs(a, out),
        Command::BuildMap(a) => cmd_build_map(a),
        Command::Bench(a) => cmd_bench(a, cli.seed, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_encode(a: &EncodeArgs, seed: Option<u64>) -> Result<()> {
    let (cfg, weights) = match (&a.config, &a.weights_dir) {
        (_, Some(dir)) => {
            let cfg = match &a.config {
                Some(path) => io::read_encoder_config(path)?,
                None => io::read_encoder_config(dir.join(io::ENCODER_CONFIG_FILE))?,
            };
            let weights = io::load_weights(dir, &cfg)?;
            (cfg, weights)
        }
        (Some(path), None) => {
            let cfg = io::read_encoder_config(path)?;
            let weights = init_encoder(&cfg, Seed(seed.unwrap_or(0)))?;
            (cfg, weights)
        }
        (None, None) => return Err(Error::Usage("encode needs --config or --weights-dir".into())),
    };
    let input = io::read_tensor(&a.input)?;
    let output = match input.dims().len() {
        3 => encode(&weights, &cfg, &input),
        _ => encode_batch(&weights, &cfg, &input),
    }
    .map_err(|e| Error::data(&a.input, e))?;
    io::write_tensor(&a.output, &output)
}

pub fn attention_config(path: Option<&Path>, seed: Option<u64>) -> Result<AttentionConfig> {
    let mut cfg = match path {
        Some(p) => io::read_attention_config(p)?,
        None => AttentionConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = Seed(s);
    }
    Ok(cfg)
}

pub fn cmd_attend(a: &AttendArgs, seed: Option<u64>) -> Result<()> {
    let cfg = attention_config(a.config.as_deref(), seed)?;
    let x_in = io::read_tensor(&a.xin)?;
    let x_a = io::read_tensor(&a.xa)?;
    let x_l = io::read_tensor(&a.xl)?;
    let result = compact_attention(&x_in, &x_a, &x_l, &cfg)?;
    io::write_tensor(&a.out_basis, &result.x_basis)?;
    if let Some(dir) = &a.dump_intermediates {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, mat) in [
            ("b_l.ctf", &result.b_l.mat),
            ("b_a.ctf", &result.b_a.mat),
            ("a_b.ctf", &result.a_b.mat),
            ("a_in.ctf", &result.a_in.mat),
        ] {
            io::write_tensor(dir.join(name), &mat.to_tensor()?)?;
        }
    }
    Ok(())
}

pub fn cmd_baseline(a: &BaselineArgs) -> Result<()> {
    let x_in = io::read_tensor(&a.xin)?;
    let x_a = io::read_tensor(&a.xa)?;
    let x_l = io::read_tensor(&a.xl)?;
    io::write_tensor(&a.out, &pixelwise_attention(&x_in, &x_a, &x_l)?)
}

fn need_mode(mode: Option<ModeArg>) -> Result<EmbedMode> {
    mode.map(Into::into).ok_or_else(|| Error::Usage("--mode is required with landmarks".into()))
}

fn embed_landmarks(path: &Path, mode: EmbedMode) -> Result<Vec<EmbeddedFrame>> {
    io::read_landmarks(path)?
        .iter()
        .map(|f| {
            let (x, y) = landmarks_to_coord(&f.points, mode).map_err(|e| {
                Error::data(path, compact_attn_core::Error::InvalidArgument(format!("frame {}: {e}", f.frame)))
            })?;
            Ok(EmbeddedFrame::new(f.frame, x, y))
        })
        .collect()
}

fn build_from(path: &Path, frames: &[EmbeddedFrame]) -> Result<AppearanceMap> {
    build_map(frames).map_err(|e| Error::data(path, e))
}

pub fn cmd_select_refs(a: &SelectArgs, out: &mut dyn Write) -> Result<()> {
    let src = &a.source;
    let map = if let Some(path) = &src.map {
        io::read_map(path)?
    } else if let Some(path) = &src.landmarks {
        build_from(path, &embed_landmarks(path, need_mode(a.mode)?)?)?
    } else if let Some(path) = &src.coords {
        build_from(path, &io::read_coords(path)?)?
    } else {
        return Err(Error::Usage("one of --map, --landmarks or --coords is required".into()));
    };
    let q = match (a.query, &a.query_landmarks) {
        (Some(q), _) => q,
        (None, Some(path)) => {
            let points = io::read_query_landmarks(path)?;
            landmarks_to_coord(&points, need_mode(a.mode)?).map_err(|e| Error::data(path, e))?
        }
        (None, None) => return Err(Error::Usage("one of --query or --query-landmarks is required".into())),
    };
    let refs = map.select_references(q, a.want as usize);
    let text: String = refs.frame_ids.iter().map(|id| format!("{id}\n")).collect();
    write_out(out, &text)
}

pub fn cmd_build_map(a: &BuildMapArgs) -> Result<()> {
    let (path, frames) = match (&a.landmarks, &a.coords) {
        (Some(p), _) => (p, embed_landmarks(p, need_mode(a.mode)?)?),
        (None, Some(p)) => (p, io::read_coords(p)?),
        (None, None) => return Err(Error::Usage("one of --landmarks or --coords is required".into())),
    };
    io::write_map(&a.out, &build_from(path, &frames)?)
}

pub fn cmd_bench(a: &BenchArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let base = BenchCase {
        m: 1,
        c: a.c,
        h: a.h,
        w: a.w,
        p: a.p,
        s: a.s,
        repeats: a.repeats as usize,
        seed: Seed(seed.unwrap_or(42)),
    };
    if let Err(e) = base.validate() {
        return Err(Error::Usage(e.to_string()));
    }
    let csv = run_sweep(&base, &a.sweep.0)?.to_csv();
    match &a.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::io(path, e)),
        None => write_out(out, &csv),
    }
}
