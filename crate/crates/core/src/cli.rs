//! Command-line front end. `main.rs` only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, FlagMetrics, FlagOutcome, FlagParams, GaugeParams, Occupation};
use crate::error::{Error, Result};
use crate::exchange::{block_exchange, isometry, BlockUnitary, ExchangeSequence};
use crate::link::{Link, SLOT_COUNT};
use crate::linalg::C64;
use crate::noise::{self, Correlation, DEFAULT_SAMPLES};
use crate::objective::{
    extract_reset_state, verify, GateConstraint, RilSpec, PRINTED_THRESHOLD, SOLUTION_THRESHOLD,
};
use crate::search::{self, Catalog, SearchConfig};
use crate::sequence::{self, bundled_is_flaggable};
use crate::spin_basis;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EORIL_OUT_DIR";

/// Largest block-vs-oracle deviation `oracle-check` accepts.
pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "eoril", version, about = "Reset-if-leaked exchange sequences: verify, search, characterise")]
pub struct Cli {
    /// RNG seed
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// directory for output files without an explicit --out
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a bundled or user sequence against the reset-if-leaked target
    Verify(VerifyArgs),
    /// Basin-hopping search for solutions
    Search(SearchArgs),
    /// Monte-Carlo noise sweep, written as CSV
    Noise(NoiseArgs),
    /// Flag reliability from readout errors and channel metrics
    Flag(FlagArgs),
    /// Stationary gauge populations under pumping and relaxation
    Gauge(GaugeArgs),
    /// Compare the block exchange matrices with the 32-dim construction
    OracleCheck(OracleArgs),
    /// Repeat the run recorded in a manifest
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// bundled name (no_flag, best_flag, worst_flag), file, or file#name
    pub sequence: String,
    /// require the flaggable target (pins the QA reversal to zero)
    #[arg(long)]
    pub flaggable: bool,
    #[arg(long, default_value_t = GateConstraint::Identity)]
    pub gate: GateConstraint,
    /// f_total cutoff; 1e-5 for bundled printed angles, 1e-9 otherwise
    #[arg(long)]
    pub threshold: Option<f64>,
    /// also write the report (TOML) here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// active slots: a sequence name or file (its layout), `all`, or a list like 1,2,5-8
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long)]
    pub flaggable: bool,
    #[arg(long, default_value_t = GateConstraint::Identity)]
    pub gate: GateConstraint,
    /// number of independent restarts (per batch in census mode)
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = SOLUTION_THRESHOLD)]
    pub threshold: f64,
    /// basin-hopping steps per restart
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// stop at the first restart that finds a solution
    #[arg(long)]
    pub first: bool,
    /// census mode: run this many restarts in total, checkpointing the catalog
    #[arg(long)]
    pub census: Option<u64>,
    /// catalog file (TOML)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub sequence: String,
    /// comma-separated noise strengths
    #[arg(long, value_delimiter = ',', required_unless_present = "sigma_range", conflicts_with = "sigma_range")]
    pub sigma: Vec<f64>,
    /// `start:stop:count`, inclusive and evenly spaced
    #[arg(long)]
    pub sigma_range: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = Correlation::Static)]
    pub model: Correlation,
    /// treat a user sequence as flaggable (bundled sequences know their kind)
    #[arg(long)]
    pub flaggable: bool,
    /// CSV file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlagArgs {
    #[arg(long = "eps-L", default_value_t = 0.0)]
    pub eps_l: f64,
    #[arg(long = "eps-1S", default_value_t = 0.0)]
    pub eps_1s: f64,
    #[arg(long = "eps-0T", default_value_t = 0.0)]
    pub eps_0t: f64,
    /// CSV written by `noise`; without it the channel is ideal
    #[arg(long)]
    pub metrics_file: Option<PathBuf>,
    /// row of the metrics file to use
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GaugeArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// random angles per link
    #[arg(long, default_value_t = 50)]
    pub per_link: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// write to this path instead of the recorded one
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance of one CLI run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// fully resolved arguments; `eoril <args>` repeats the run
    pub args: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
    pub config: toml::Table,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::invalid(format!("cannot serialise manifest: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `<output>.manifest.toml`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.toml");
    output.with_file_name(name)
}

struct Ctx<'a> {
    seed: u64,
    out_dir: PathBuf,
    w: &'a mut dyn Write,
    started: Instant,
    started_unix_s: u64,
}

impl Ctx<'_> {
    fn line(&mut self, s: impl AsRef<str>) -> Result<()> {
        writeln!(self.w, "{}", s.as_ref()).map_err(|e| Error::io("<stdout>", e))
    }

    fn output_path(&self, out: &Option<PathBuf>, default_name: String) -> Result<PathBuf> {
        let p = match out {
            Some(p) => p.clone(),
            None => {
                std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
                self.out_dir.join(default_name)
            }
        };
        Ok(absolute(&p))
    }

    fn manifest<C: Serialize>(&self, command: &str, args: Vec<String>, config: &C, outputs: Vec<PathBuf>) -> Result<RunManifest> {
        let config = toml::Table::try_from(config)
            .map_err(|e| Error::invalid(format!("cannot serialise run configuration: {e}")))?;
        Ok(RunManifest {
            command: command.to_string(),
            args,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: self.started_unix_s,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs,
            config,
        })
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parse `args` (including the program name), run, and return the exit code.
/// Reports go to `w`, diagnostics to stderr.
pub fn run<I, T>(args: I, w: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, w) {
        Ok(code) => code,
        // reader went away (`eoril ... | head`)
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

fn dispatch(cli: Cli, w: &mut dyn Write) -> Result<i32> {
    let mut ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        w,
        started: Instant::now(),
        started_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    match cli.command {
        Command::Verify(a) => cmd_verify(&mut ctx, a),
        Command::Search(a) => cmd_search(&mut ctx, a),
        Command::Noise(a) => cmd_noise(&mut ctx, a),
        Command::Flag(a) => cmd_flag(&mut ctx, a),
        Command::Gauge(a) => cmd_gauge(&mut ctx, a),
        Command::OracleCheck(a) => cmd_oracle_check(&mut ctx, a),
        Command::Rerun(a) => cmd_rerun(&mut ctx, a),
    }
}

struct Resolved {
    name: String,
    /// argument form that resolves to the same sequence from any directory
    canonical: String,
    seq: ExchangeSequence,
    /// known kind: bundled sequences and catalog solutions carry one
    flaggable: Option<bool>,
    /// bundled sequences carry printed (rounded) angles
    printed: bool,
}

/// Resolve a bundled name, a sequence file, or a search catalog (`file#solution<i>`,
/// or just `file` when it holds one solution).
fn resolve_sequence(spec: &str) -> Result<Resolved> {
    if let Some(flaggable) = bundled_is_flaggable(spec) {
        let (name, seq) = sequence::resolve(spec)?;
        return Ok(Resolved {
            name,
            canonical: spec.to_string(),
            seq,
            flaggable: Some(flaggable),
            printed: true,
        });
    }
    let (path, wanted) = match spec.rsplit_once('#') {
        Some((p, n)) if Path::new(p).exists() => (p, Some(n)),
        _ => (spec, None),
    };
    let abs = absolute(Path::new(path)).display().to_string();
    let canonical = match wanted {
        Some(n) => format!("{abs}#{n}"),
        None => abs,
    };
    match sequence::resolve(spec) {
        Ok((name, seq)) => Ok(Resolved {
            name,
            canonical,
            seq,
            flaggable: None,
            printed: false,
        }),
        Err(seq_err @ Error::Parse { .. }) => {
            let Ok(cat) = Catalog::read(Path::new(path)) else {
                return Err(seq_err);
            };
            let index = match wanted {
                Some(n) => n
                    .strip_prefix("solution")
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::invalid(format!("select a catalog solution as '{path}#solution<i>', not '#{n}'")))?,
                None if cat.solution.len() == 1 => 0,
                None => {
                    return Err(Error::invalid(format!(
                        "{path} holds {} solutions; select one with '{path}#solution<i>'",
                        cat.solution.len()
                    )))
                }
            };
            let rec = cat.solution.get(index).ok_or_else(|| {
                Error::invalid(format!("{path} has no solution {index} (it holds {})", cat.solution.len()))
            })?;
            Ok(Resolved {
                name: format!("solution{index}"),
                canonical,
                seq: rec.sequence()?,
                flaggable: Some(rec.flaggable),
                printed: false,
            })
        }
        Err(e) => Err(e),
    }
}

fn write_report<T: Serialize>(ctx: &mut Ctx, out: &Path, report: &T, manifest: RunManifest) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        manifest: String,
        #[serde(flatten)]
        report: &'a T,
    }
    let text = toml::to_string(&Wrapped {
        manifest: file_name(&manifest_path(out)),
        report,
    })
    .map_err(|e| Error::invalid(format!("cannot serialise report: {e}")))?;
    std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    manifest.write(&manifest_path(out))?;
    ctx.line(format!("wrote {}", out.display()))
}

#[derive(Serialize)]
struct VerifyConfig {
    sequence: String,
    angles_pi: Vec<f64>,
    flaggable: bool,
    gate: GateConstraint,
    threshold: f64,
}

fn cmd_verify(ctx: &mut Ctx, a: VerifyArgs) -> Result<i32> {
    let Resolved {
        name,
        canonical,
        seq,
        flaggable: known,
        printed,
    } = resolve_sequence(&a.sequence)?;
    let flaggable = a.flaggable || known == Some(true);
    let threshold = a.threshold.unwrap_or(if printed && flaggable {
        PRINTED_THRESHOLD
    } else {
        SOLUTION_THRESHOLD
    });
    if !(threshold > 0.0) {
        return Err(Error::invalid("--threshold must be positive"));
    }
    let spec = RilSpec::new(flaggable, a.gate);
    let v = verify(&seq, &spec, threshold);

    ctx.line(format!("sequence        {name}"))?;
    ctx.line(format!(
        "target          {}, gate {}",
        if flaggable { "flaggable" } else { "unflaggable" },
        a.gate
    ))?;
    ctx.line(format!(
        "QA reversal     phi = {:.9} pi, gamma = {:.9} pi",
        v.rev.phi / PI,
        v.rev.gamma / PI
    ))?;
    ctx.line(format!("f0              {:.3e}", v.f0))?;
    ctx.line("f_total by gate")?;
    for (g, f) in &v.f_total_by_gate {
        ctx.line(format!("  {:<14}{f:.3e}", g.to_string()))?;
    }
    match (v.gate, v.gate_distance) {
        (Some(u), Some(d)) => {
            ctx.line(format!("gate distance   {d:.3e} ({})", a.gate))?;
            for row in u {
                ctx.line(format!(
                    "  [{:+.6}{:+.6}i  {:+.6}{:+.6}i]",
                    row[0].0, row[0].1, row[1].0, row[1].1
                ))?;
            }
        }
        _ => ctx.line("gate            unavailable")?,
    }
    match &v.reset {
        Some(r) => {
            ctx.line(format!(
                "reset state     alpha = {:.9}, beta = {:.9}{:+.9}i",
                r.alpha.re, r.beta.re, r.beta.im
            ))?;
            ctx.line(format!(
                "                theta = {:.9} pi, phi = {:.9} pi",
                r.theta_bloch / PI,
                r.phi_bloch / PI
            ))?;
        }
        None => ctx.line("reset state     unavailable")?,
    }
    ctx.line(format!("isometry defect {:.3e}", v.isometry_defect))?;
    for n in &v.notes {
        ctx.line(format!("note: {n}"))?;
    }
    ctx.line(format!(
        "result          {} (f_total {:.3e} vs threshold {:.1e})",
        if v.passed { "PASS" } else { "FAIL" },
        v.f_total,
        threshold
    ))?;

    if let Some(out) = &a.out {
        let out = absolute(out);
        let mut args = vec!["verify".to_string(), canonical.clone()];
        if flaggable {
            args.push("--flaggable".into());
        }
        args.extend(["--gate".into(), a.gate.to_string(), "--threshold".into(), format!("{threshold:?}")]);
        args.extend(["--out".into(), out.display().to_string()]);
        let cfg = VerifyConfig {
            sequence: canonical,
            angles_pi: seq.angles_pi().to_vec(),
            flaggable,
            gate: a.gate,
            threshold,
        };
        let m = ctx.manifest("verify", args, &cfg, vec![out.clone()])?;
        write_report(ctx, &out, &v, m)?;
    }
    Ok(if v.passed { EXIT_OK } else { EXIT_FAIL })
}

/// Parse a search mask: a sequence (its active slots), `all`, or a slot list.
pub fn parse_mask(s: &str) -> Result<[bool; SLOT_COUNT]> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("all") {
        return Ok(ExchangeSequence::full_mask());
    }
    if s.chars().next().is_some_and(|c| c.is_ascii_digit()) && !Path::new(s).exists() {
        let mut slots = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let num = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad slot '{t}' in mask '{s}'")))
            };
            match part.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (num(lo)?, num(hi)?);
                    if lo > hi {
                        return Err(Error::invalid(format!("empty slot range '{part}'")));
                    }
                    slots.extend(lo..=hi);
                }
                None => slots.push(num(part)?),
            }
        }
        return ExchangeSequence::mask_from_slots(&slots);
    }
    let (_, seq) = sequence::resolve(s)?;
    Ok(*seq.mask())
}

fn mask_string(mask: &[bool; SLOT_COUNT]) -> String {
    let slots: Vec<String> = (1..=SLOT_COUNT).filter(|&k| mask[k - 1]).map(|k| k.to_string()).collect();
    slots.join(",")
}

#[derive(Serialize)]
struct SearchRunConfig {
    mask: String,
    search: SearchConfig,
    census: Option<u64>,
}

fn cmd_search(ctx: &mut Ctx, a: SearchArgs) -> Result<i32> {
    let mask_spec = a
        .mask
        .clone()
        .unwrap_or_else(|| if a.flaggable { "all".into() } else { "no_flag".into() });
    let mask = parse_mask(&mask_spec)?;
    if a.seeds == 0 {
        return Err(Error::invalid("--seeds must be at least 1"));
    }
    let spec = RilSpec::new(a.flaggable, a.gate);
    let mut cfg = SearchConfig::new(mask, spec, ctx.seed);
    cfg.max_restarts = a.seeds;
    cfg.success_threshold = a.threshold;
    cfg.iterations = a.iterations;
    cfg.stop_at_first = a.first;
    let out = ctx.output_path(&a.out, format!("search-seed{}.toml", ctx.seed))?;
    let mpath = manifest_path(&out);

    let mut args = vec![
        "search".to_string(),
        "--seed".into(),
        ctx.seed.to_string(),
        "--mask".into(),
        mask_string(&mask),
    ];
    if a.flaggable {
        args.push("--flaggable".into());
    }
    args.extend([
        "--gate".into(),
        a.gate.to_string(),
        "--seeds".into(),
        a.seeds.to_string(),
        "--threshold".into(),
        format!("{:?}", a.threshold),
        "--iterations".into(),
        a.iterations.to_string(),
    ]);
    if a.first {
        args.push("--first".into());
    }
    if let Some(n) = a.census {
        args.extend(["--census".into(), n.to_string()]);
    }
    args.extend(["--out".into(), out.display().to_string()]);
    ctx.line(format!(
        "searching {} active slots ({}), {}, gate {}, seed {}",
        mask.iter().filter(|&&b| b).count(),
        mask_string(&mask),
        if a.flaggable { "flaggable" } else { "unflaggable" },
        a.gate,
        ctx.seed
    ))?;

    let catalog = match a.census {
        Some(total) => {
            if !out.exists() {
                Catalog {
                    seed: ctx.seed,
                    next_restart: 0,
                    manifest: Some(file_name(&mpath)),
                    solution: Vec::new(),
                }
                .write(&out)?;
            }
            let mut lines = Vec::new();
            let cat = search::census(&cfg, total, &out, |c| {
                lines.push(format!(
                    "checkpoint: {} restarts, {} distinct solutions",
                    c.next_restart,
                    c.solution.len()
                ))
            })?;
            for l in lines {
                ctx.line(l)?;
            }
            cat
        }
        None => {
            let outcome = search::basin_hop(&cfg)?;
            for r in &outcome.reports {
                ctx.line(format!(
                    "restart {:>3}: hops {:>3}, accepted {:>3}, best f {:.3e}, solutions {}",
                    r.restart, r.hops, r.accepted, r.best_f, r.successes
                ))?;
            }
            let cat = Catalog {
                seed: ctx.seed,
                next_restart: cfg.first_restart + outcome.reports.len() as u64,
                manifest: Some(file_name(&mpath)),
                solution: outcome.records,
            };
            cat.write(&out)?;
            cat
        }
    };
    for (i, s) in catalog.solution.iter().enumerate() {
        ctx.line(format!(
            "solution {i}: f_total {:.3e}, reset theta {:.6} pi, phi {:.6} pi (restart {}, hop {})",
            s.f_total, s.reset_theta_pi, s.reset_phi_pi, s.restart, s.hop
        ))?;
    }
    let run_cfg = SearchRunConfig {
        mask: mask_string(&mask),
        search: cfg,
        census: a.census,
    };
    let m = ctx.manifest("search", args, &run_cfg, vec![out.clone()])?;
    m.write(&mpath)?;
    ctx.line(format!(
        "{} distinct solutions written to {}",
        catalog.solution.len(),
        out.display()
    ))?;
    Ok(EXIT_OK)
}

/// Parse `start:stop:count` into evenly spaced values, both ends included.
pub fn parse_sigma_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::invalid(format!("--sigma-range '{s}' is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(Error::invalid("--sigma-range needs at least one point")),
        1 => Ok(vec![start]),
        _ => Ok((0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

#[derive(Serialize)]
struct NoiseConfig {
    sequence: String,
    angles_pi: Vec<f64>,
    flaggable: bool,
    frame_pi: [f64; 2],
    sigmas: Vec<f64>,
    samples: usize,
    model: Correlation,
    chunk: usize,
}

fn cmd_noise(ctx: &mut Ctx, a: NoiseArgs) -> Result<i32> {
    let Resolved {
        name,
        canonical,
        seq,
        flaggable: known,
        ..
    } = resolve_sequence(&a.sequence)?;
    let sigmas = match &a.sigma_range {
        Some(r) => parse_sigma_range(r)?,
        None => a.sigma.clone(),
    };
    if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::invalid("noise strengths must be finite and nonnegative"));
    }
    let flaggable = a.flaggable || known == Some(true);
    let frame = noise::qa_frame(&seq, flaggable);
    let reset = extract_reset_state(&isometry(&seq)).ok();
    if reset.is_none() {
        ctx.line("note: the sequence has no reset state; eps_R is left empty")?;
    }
    let out = ctx.output_path(&a.out, format!("noise-{name}-seed{}.csv", ctx.seed))?;
    let mpath = manifest_path(&out);

    let points = noise::sweep(&seq, frame, reset.as_ref(), &sigmas, a.model, a.samples, ctx.seed)?;
    let mut buf = format!("# manifest: {}\n", file_name(&mpath)).into_bytes();
    noise::write_csv(&mut buf, &points)?;
    std::fs::write(&out, &buf).map_err(|e| Error::io(&out, e))?;

    ctx.line(format!(
        "{name}: {} model, {} samples, seed {}",
        a.model, a.samples, ctx.seed
    ))?;
    ctx.line(format!(
        "{:>9} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "sigma", "p_L_ind", "1-F_Q", "eps_F", "eps_5", "eps_8", "eps_R"
    ))?;
    for p in &points {
        let m = &p.metrics;
        ctx.line(format!(
            "{:>9.5} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10}",
            p.sigma,
            m.p_l_ind.mean,
            1.0 - m.f_q.mean,
            m.eps_f.mean,
            m.eps_5.mean,
            m.eps_8.mean,
            m.eps_r.map(|e| format!("{:.3e}", e.mean)).unwrap_or_else(|| "-".into())
        ))?;
    }

    let sigma_list: Vec<String> = sigmas.iter().map(|s| format!("{s:?}")).collect();
    let mut args = vec![
        "noise".to_string(),
        "--seed".into(),
        ctx.seed.to_string(),
        "--sequence".into(),
        canonical.clone(),
        "--sigma".into(),
        sigma_list.join(","),
        "--samples".into(),
        a.samples.to_string(),
        "--model".into(),
        a.model.to_string(),
    ];
    if flaggable {
        args.push("--flaggable".into());
    }
    args.extend(["--out".into(), out.display().to_string()]);
    let cfg = NoiseConfig {
        sequence: canonical,
        angles_pi: seq.angles_pi().to_vec(),
        flaggable,
        frame_pi: [frame.phi / PI, frame.gamma / PI],
        sigmas,
        samples: a.samples,
        model: a.model,
        chunk: noise::CHUNK,
    };
    let m = ctx.manifest("noise", args, &cfg, vec![out.clone()])?;
    m.write(&mpath)?;
    ctx.line(format!("wrote {}", out.display()))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LeadingOrder {
    wrong_given_0: f64,
    wrong_given_1: f64,
    wrong_given_1_defined: bool,
    p_one: f64,
}

#[derive(Serialize)]
struct TableEntry {
    flag: &'static str,
    output: &'static str,
    input: &'static str,
    p: f64,
}

#[derive(Serialize)]
struct ExactTable {
    wrong_given_0: f64,
    wrong_given_0_defined: bool,
    wrong_given_1: f64,
    wrong_given_1_defined: bool,
    p_zero: f64,
    p_one: f64,
    entries: Vec<TableEntry>,
}

#[derive(Serialize)]
struct FlagReport {
    params: FlagParams,
    metrics: FlagMetrics,
    leading_order: LeadingOrder,
    exact: ExactTable,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FlagConfig {
    params: FlagParams,
    metrics_file: Option<String>,
    row: usize,
    metrics: FlagMetrics,
}

fn cmd_flag(ctx: &mut Ctx, a: FlagArgs) -> Result<i32> {
    let params = FlagParams::new(a.eps_l, a.eps_1s, a.eps_0t)?;
    let metrics_file = a.metrics_file.as_deref().map(absolute);
    let metrics = match &metrics_file {
        Some(p) => {
            let rows = noise::read_csv(p)?;
            let row = rows.get(a.row).ok_or_else(|| {
                Error::invalid(format!("{} has {} rows; --row {} is out of range", p.display(), rows.len(), a.row))
            })?;
            let m = FlagMetrics::from(row);
            FlagMetrics::new(m.p_l_ind.max(0.0), m.eps_f.max(0.0), m.eps_5.max(0.0), m.eps_8.max(0.0))?
        }
        None => FlagMetrics::ideal(),
    };
    let g0 = analysis::wrong_guess_given_0(&params, &metrics);
    let g1 = analysis::wrong_guess_given_1(&params, &metrics);
    let table = analysis::joint_flag_table(&params, &metrics)?;
    let e0 = table.wrong_guess_given_0();
    let e1 = table.wrong_guess_given_1();
    let warnings = analysis::leading_order_warnings(&params, &metrics);

    ctx.line(format!(
        "inputs          eps_L {:.3e}, eps_1S {:.3e}, eps_0T {:.3e}",
        params.eps_l, params.eps_1s, params.eps_0t
    ))?;
    ctx.line(format!(
        "channel         p_L_ind {:.3e}, eps_F {:.3e}, eps_5 {:.3e}, eps_8 {:.3e}",
        metrics.p_l_ind, metrics.eps_f, metrics.eps_5, metrics.eps_8
    ))?;
    ctx.line("                    leading order    exact")?;
    let fmt_g = |v: f64, d: bool| if d { format!("{v:.6e}") } else { "undefined".into() };
    ctx.line(format!(
        "P(wrong | 0_M)      {:<16} {}",
        format!("{g0:.6e}"),
        fmt_g(e0.value, e0.defined)
    ))?;
    ctx.line(format!(
        "P(wrong | 1_M)      {:<16} {}",
        fmt_g(g1.value, g1.defined),
        fmt_g(e1.value, e1.defined)
    ))?;
    ctx.line(format!(
        "P(1_M)              {:<16} {:.6e}",
        format!("{:.6e}", analysis::p_one_leading_order(&params, &metrics)),
        table.p_flag(FlagOutcome::One)
    ))?;
    ctx.line("joint table P(F, O, I)")?;
    let name = |o: Occupation| match o {
        Occupation::Unleaked => "U",
        Occupation::Leaked => "L",
    };
    let fname = |f: FlagOutcome| match f {
        FlagOutcome::Zero => "0_M",
        FlagOutcome::One => "1_M",
    };
    let entries: Vec<TableEntry> = table
        .entries
        .iter()
        .map(|&(f, o, i, p)| TableEntry {
            flag: fname(f),
            output: name(o),
            input: name(i),
            p,
        })
        .collect();
    for e in &entries {
        ctx.line(format!("  {} {}_out {}_in  {:.6e}", e.flag, e.output, e.input, e.p))?;
    }
    ctx.line(format!("  total {:.15}", table.total()))?;
    for wmsg in &warnings {
        ctx.line(format!("warning: {wmsg}"))?;
    }

    if let Some(out) = &a.out {
        let out = absolute(out);
        let mut args = vec![
            "flag".to_string(),
            "--eps-L".into(),
            format!("{:?}", params.eps_l),
            "--eps-1S".into(),
            format!("{:?}", params.eps_1s),
            "--eps-0T".into(),
            format!("{:?}", params.eps_0t),
        ];
        if let Some(p) = &metrics_file {
            args.extend(["--metrics-file".into(), p.display().to_string(), "--row".into(), a.row.to_string()]);
        }
        args.extend(["--out".into(), out.display().to_string()]);
        let report = FlagReport {
            params,
            metrics,
            leading_order: LeadingOrder {
                wrong_given_0: g0,
                wrong_given_1: g1.value,
                wrong_given_1_defined: g1.defined,
                p_one: analysis::p_one_leading_order(&params, &metrics),
            },
            exact: ExactTable {
                wrong_given_0: e0.value,
                wrong_given_0_defined: e0.defined,
                wrong_given_1: e1.value,
                wrong_given_1_defined: e1.defined,
                p_zero: table.p_flag(FlagOutcome::Zero),
                p_one: table.p_flag(FlagOutcome::One),
                entries,
            },
            warnings,
        };
        let cfg = FlagConfig {
            params,
            metrics_file: metrics_file.map(|p| p.display().to_string()),
            row: a.row,
            metrics,
        };
        let m = ctx.manifest("flag", args, &cfg, vec![out.clone()])?;
        write_report(ctx, &out, &report, m)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GaugeReport {
    eta: f64,
    p_down: f64,
    p_up: f64,
    decay_eigenvalue: f64,
    coherence_weight: f64,
    fixed_point_residual: f64,
    closed_form_weight: f64,
    small_eta_weight: f64,
}

fn cmd_gauge(ctx: &mut Ctx, a: GaugeArgs) -> Result<i32> {
    let g = GaugeParams::new(a.eta)?;
    let s = analysis::gauge_stationary(&g);
    let report = GaugeReport {
        eta: g.eta,
        p_down: s.p_down,
        p_up: s.p_up,
        decay_eigenvalue: s.decay_eigenvalue,
        coherence_weight: s.coherence_weight,
        fixed_point_residual: analysis::stationary_residual(&g, &s),
        closed_form_weight: 3.0 * g.eta / (4.0 - g.eta),
        small_eta_weight: 0.75 * g.eta,
    };
    ctx.line(format!("eta                 {}", g.eta))?;
    ctx.line(format!("p_down, p_up        {:.12}, {:.12}", s.p_down, s.p_up))?;
    ctx.line(format!("decay eigenvalue    {:.12}", s.decay_eigenvalue))?;
    ctx.line(format!(
        "coherence weight    {:.12} (3eta/(4-eta) = {:.12}, 3eta/4 = {:.12})",
        s.coherence_weight, report.closed_form_weight, report.small_eta_weight
    ))?;
    ctx.line(format!("fixed-point residual {:.3e}", report.fixed_point_residual))?;

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    for twice_m in [-1, 1] {
        let c = analysis::coherence_trace_out(one * h, one * h, [one, zero], twice_m)?;
        ctx.line(format!(
            "gauge m = {:+}/2: rho_UL = {:+.12}{:+.12}i, purity {:.12}",
            twice_m, c.rho[0][1].re, c.rho[0][1].im, c.purity
        ))?;
    }

    if let Some(out) = &a.out {
        let out = absolute(out);
        let args = vec![
            "gauge".to_string(),
            "--eta".into(),
            format!("{:?}", g.eta),
            "--out".into(),
            out.display().to_string(),
        ];
        let m = ctx.manifest("gauge", args, &g, vec![out.clone()])?;
        write_report(ctx, &out, &report, m)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OracleReport {
    comparisons: usize,
    max_deviation: f64,
    identity_deviation: f64,
    per_link: Vec<(String, f64)>,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct OracleConfig {
    per_link: usize,
    seed: u64,
}

fn oracle_deviation(link: Link, theta: f64) -> Result<f64> {
    let oracle = BlockUnitary::from_operator(&spin_basis::oracle_exchange(link, theta)?)?;
    Ok(block_exchange(link, theta).max_abs_diff(&oracle))
}

fn cmd_oracle_check(ctx: &mut Ctx, a: OracleArgs) -> Result<i32> {
    if a.per_link == 0 {
        return Err(Error::invalid("--per-link must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut identity = 0.0f64;
    let mut per_link = Vec::new();
    for link in Link::ALL {
        identity = identity.max(oracle_deviation(link, 0.0)?);
        let mut worst = 0.0f64;
        for _ in 0..a.per_link {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            worst = worst.max(oracle_deviation(link, theta)?);
        }
        ctx.line(format!("{link:?}: max deviation {worst:.3e} over {} angles", a.per_link))?;
        per_link.push((format!("{link:?}"), worst));
    }
    let max_deviation = per_link.iter().map(|p| p.1).fold(identity, f64::max);
    let passed = max_deviation < ORACLE_TOL;
    ctx.line(format!("identity deviation {identity:.3e}"))?;
    ctx.line(format!(
        "result {} (max deviation {max_deviation:.3e} over {} comparisons, tolerance {ORACLE_TOL:.0e})",
        if passed { "PASS" } else { "FAIL" },
        4 * a.per_link
    ))?;
    if let Some(out) = &a.out {
        let out = absolute(out);
        let args = vec![
            "oracle-check".to_string(),
            "--seed".into(),
            ctx.seed.to_string(),
            "--per-link".into(),
            a.per_link.to_string(),
            "--out".into(),
            out.display().to_string(),
        ];
        let report = OracleReport {
            comparisons: 4 * a.per_link,
            max_deviation,
            identity_deviation: identity,
            per_link,
            tolerance: ORACLE_TOL,
            passed,
        };
        let cfg = OracleConfig {
            per_link: a.per_link,
            seed: ctx.seed,
        };
        let m = ctx.manifest("oracle-check", args, &cfg, vec![out.clone()])?;
        write_report(ctx, &out, &report, m)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_rerun(ctx: &mut Ctx, a: RerunArgs) -> Result<i32> {
    let m = RunManifest::read(&a.manifest)?;
    let mut args = m.args.clone();
    if let Some(new_out) = &a.out {
        let new_out = absolute(new_out).display().to_string();
        match args.iter().position(|x| x == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = new_out,
            _ => args.extend(["--out".to_string(), new_out]),
        }
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        ctx.line(format!(
            "note: manifest written by version {}, running {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        ))?;
    }
    let cli = Cli::try_parse_from(std::iter::once("eoril".to_string()).chain(args))
        .map_err(|e| Error::parse(&a.manifest, format!("recorded arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(Error::parse(&a.manifest, "a manifest cannot record a rerun"));
    }
    let cli = Cli {
        seed: if m.args.iter().any(|x| x == "--seed") { cli.seed } else { m.seed },
        ..cli
    };
    dispatch(cli, ctx.w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks() {
        assert_eq!(parse_mask("all").unwrap(), ExchangeSequence::full_mask());
        let m = parse_mask("1,3-5").unwrap();
        assert_eq!(mask_string(&m), "1,3,4,5");
        assert!(parse_mask("0").is_err());
        assert!(parse_mask("5-3").is_err());
        let nf = parse_mask("no_flag").unwrap();
        assert_eq!(nf.iter().filter(|&&b| b).count(), 14);
        assert_eq!(parse_mask(&mask_string(&nf)).unwrap(), nf);
    }

    #[test]
    fn sigma_ranges() {
        assert_eq!(parse_sigma_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_sigma_range("0.01:0.5:1").unwrap(), vec![0.01]);
        assert!(parse_sigma_range("0:1").is_err());
        assert!(parse_sigma_range("0:1:0").is_err());
    }

    #[test]
    fn manifest_names() {
        assert_eq!(
            manifest_path(Path::new("/tmp/a/run.csv")),
            PathBuf::from("/tmp/a/run.csv.manifest.toml")
        );
    }

    #[test]
    fn usage_errors_exit_with_2() {
        let mut sink = Vec::new();
        assert_eq!(run(["eoril", "verify"], &mut sink), EXIT_USAGE);
        assert_eq!(run(["eoril", "verify", "no_such_sequence"], &mut sink), EXIT_USAGE);
        assert_eq!(run(["eoril", "gauge", "--eta", "1.5"], &mut sink), EXIT_USAGE);
    }
}
