//! Command-line front end. Results go to stdout as `key: value` lines.
//!
//! Exit codes: 0 on success, 1 when an argument or input value is invalid,
//! 2 when a file cannot be read or parsed (including bad command lines).

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::chamfer::{chamfer_distance_with, ChamferOptions};
use crate::emd::{emd_auction, emd_exact, joint_diagonal, AuctionConfig, Epsilon};
use crate::error::{Error, Result};
use crate::expansion::{expansion_penalty, ElementBatch, ExpansionConfig};
use crate::generate::{is_left_half, two_density, uniform_box};
use crate::geometry::{Aabb, Point3, PointCloud, Seed, Source};
use crate::io::{fmt_coord, read_cloud, write_cloud, CloudData, Format};
use crate::pipeline::{joint_loss, merge, merge_and_subsample, LossConfig, LossWeights};
use crate::sampling::{
    default_sigma, density_profile, fps_sample, mds_sample, pds_sample, random_sample, DensityStats,
    MdsConfig, SampleResult,
};

#[derive(Debug, Parser)]
#[command(name = "pointloss", version, about = "Point-cloud completion losses and samplers")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// File format for every cloud read or written; otherwise taken from
    /// the file extension, falling back to xyz.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Seed for randomized operations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Xyz,
    Xyzl,
    Ply,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Xyz => Format::Xyz,
            FormatArg::Xyzl => Format::Xyzl,
            FormatArg::Ply => Format::Ply,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Earth Mover's Distance between two clouds of equal size.
    Emd(EmdArgs),
    /// Chamfer distance between two clouds.
    Chamfer(ChamferArgs),
    /// Expansion penalty of a cloud split into K blocks of N points.
    Expansion(ExpansionArgs),
    /// Select a subset of points.
    Sample(SampleArgs),
    /// Merge an input cloud with a coarse prediction, labelling sources.
    Merge(MergeArgs),
    /// Joint loss of coarse and final predictions against ground truth.
    Loss(LossArgs),
    /// Generate a synthetic cloud.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct EmdArgs {
    first: PathBuf,
    second: PathBuf,
    /// Final auction ε in model units (default: 1e-3 × bounding diagonal).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Total bid budget before the greedy fallback (default: 50 × n).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Solve exactly with the Hungarian method.
    #[arg(long)]
    exact: bool,
    /// Run a single auction at the final ε.
    #[arg(long)]
    no_scaling: bool,
    /// Write the matched index of every point of the first cloud.
    #[arg(long)]
    assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChamferArgs {
    first: PathBuf,
    second: PathBuf,
    /// Average squared distances instead.
    #[arg(long)]
    squared: bool,
}

#[derive(Debug, Args)]
struct ExpansionArgs {
    input: PathBuf,
    /// Number of surface elements.
    #[arg(long)]
    k: usize,
    /// Points per element.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    /// Write one gradient vector per point.
    #[arg(long)]
    gradients: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Mds,
    Fps,
    Pds,
    Random,
}

#[derive(Debug, Args)]
struct SampleArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "mds")]
    method: Method,
    #[arg(long)]
    count: usize,
    /// Gaussian width for MDS and the density report (default: twice the
    /// mean nearest-neighbour spacing).
    #[arg(long)]
    sigma: Option<f64>,
    /// First selected index for MDS and FPS.
    #[arg(long, default_value_t = 0)]
    first: usize,
    /// Print per-half counts and density statistics of the selection.
    #[arg(long)]
    report: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MergeArgs {
    input: PathBuf,
    coarse: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Subsample the merged cloud to this many points with MDS.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    first: usize,
}

#[derive(Debug, Args)]
struct LossArgs {
    coarse: PathBuf,
    #[arg(value_name = "FINAL")]
    final_cloud: PathBuf,
    gt: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// Uniform points in an axis-aligned box.
    UniformBox {
        #[arg(long)]
        n: usize,
        /// Lower corner as x,y,z.
        #[arg(long, default_value = "0,0,0", value_parser = parse_point, allow_hyphen_values = true)]
        min: Point3,
        /// Upper corner as x,y,z.
        #[arg(long, default_value = "1,1,1", value_parser = parse_point, allow_hyphen_values = true)]
        max: Point3,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Two half squares, the right one denser.
    TwoDensity {
        #[arg(long, default_value_t = 200)]
        left: usize,
        #[arg(long, default_value_t = 400)]
        right: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<Point3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Point3::new(*x, *y, *z)),
        _ => Err("expected three comma-separated numbers".into()),
    }
}

/// Ordered `key: value` lines.
#[derive(Default)]
struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    fn put(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    fn num(&mut self, key: &str, value: f64) -> &mut Self {
        // Debug keeps a decimal point on integral values
        self.put(key, format!("{value:?}"))
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (k, v) in &self.lines {
            writeln!(out, "{k}: {v}")?;
        }
        Ok(())
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };

    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result.and_then(|report| report.write(out).map_err(Error::from)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

struct Ctx {
    format: Option<Format>,
    seed: Seed,
}

impl Ctx {
    fn format_for(&self, path: &Path) -> Format {
        self.format
            .or_else(|| Format::from_path(path))
            .unwrap_or(Format::Xyz)
    }

    fn read(&self, path: &Path) -> Result<CloudData> {
        read_cloud(path, self.format_for(path))
    }

    fn read_plain(&self, path: &Path) -> Result<PointCloud> {
        Ok(self.read(path)?.into_cloud())
    }

    fn write(&self, cloud: &CloudData, path: &Path) -> Result<()> {
        write_cloud(cloud, path, self.format_for(path))
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    let ctx = Ctx {
        format: cli.format.map(Format::from),
        seed: Seed(cli.seed),
    };
    match &cli.command {
        Command::Emd(a) => run_emd(&ctx, a),
        Command::Chamfer(a) => run_chamfer(&ctx, a),
        Command::Expansion(a) => run_expansion(&ctx, a),
        Command::Sample(a) => run_sample(&ctx, a),
        Command::Merge(a) => run_merge(&ctx, a),
        Command::Loss(a) => run_loss(&ctx, a),
        Command::Gen(a) => run_gen(&ctx, a),
    }
}

fn auction_config(epsilon: Option<f64>, max_iters: Option<usize>, no_scaling: bool) -> AuctionConfig {
    let mut cfg = AuctionConfig::default();
    if let Some(e) = epsilon {
        cfg.epsilon = Epsilon::Absolute(e);
    }
    cfg.max_iterations = max_iters;
    cfg.epsilon_scaling = !no_scaling;
    cfg
}

fn run_emd(ctx: &Ctx, a: &EmdArgs) -> Result<Report> {
    let s1 = ctx.read_plain(&a.first)?;
    let s2 = ctx.read_plain(&a.second)?;
    let mut r = Report::default();
    let assignment = if a.exact {
        r.put("method", "exact");
        emd_exact(&s1, &s2)?
    } else {
        let cfg = auction_config(a.epsilon, a.max_iters, a.no_scaling);
        r.put("method", "auction");
        let result = emd_auction(&s1, &s2, &cfg)?;
        r.num("epsilon", cfg.epsilon.resolve(joint_diagonal(&s1, &s2)));
        result
    };
    r.put("n", assignment.len())
        .put("converged", assignment.converged)
        .num("mean_cost", assignment.mean_cost);
    if let Some(path) = &a.assignment {
        let mut text = String::new();
        for j in &assignment.mapping {
            text.push_str(&j.to_string());
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    Ok(r)
}

fn run_chamfer(ctx: &Ctx, a: &ChamferArgs) -> Result<Report> {
    let s1 = ctx.read_plain(&a.first)?;
    let s2 = ctx.read_plain(&a.second)?;
    let d = chamfer_distance_with(&s1, &s2, ChamferOptions { squared: a.squared });
    let mut r = Report::default();
    r.put("squared", a.squared).num("chamfer", d);
    Ok(r)
}

fn run_expansion(ctx: &Ctx, a: &ExpansionArgs) -> Result<Report> {
    let cloud = ctx.read_plain(&a.input)?;
    let batch = ElementBatch::from_cloud(&cloud, a.k, a.n)?;
    let res = expansion_penalty(&batch, &ExpansionConfig { lambda: a.lambda })?;
    if let Some(path) = &a.gradients {
        let mut text = String::new();
        for g in res.flat_gradients() {
            text.push_str(&format!("{} {} {}\n", fmt_coord(g[0]), fmt_coord(g[1]), fmt_coord(g[2])));
        }
        std::fs::write(path, text)?;
    }
    let active: usize = res.active_edges.iter().map(Vec::len).sum();
    let mut r = Report::default();
    r.put("elements", a.k)
        .put("points_per_element", a.n)
        .num("lambda", a.lambda)
        .put("active_edges", active)
        .num("value", res.value);
    Ok(r)
}

fn run_sample(ctx: &Ctx, a: &SampleArgs) -> Result<Report> {
    let data = ctx.read(&a.input)?;
    let cloud = data.cloud();
    let sigma = match a.sigma {
        Some(s) => s,
        None => default_sigma(cloud),
    };
    let mut r = Report::default();
    let sample: SampleResult = match a.method {
        Method::Mds => {
            r.put("method", "mds");
            let cfg = MdsConfig::new(sigma).with_first_point(a.first);
            mds_sample(cloud, a.count, &cfg)?
        }
        Method::Fps => {
            r.put("method", "fps");
            fps_sample(cloud, a.count, a.first)?
        }
        Method::Pds => {
            r.put("method", "pds");
            let pds = pds_sample(cloud, a.count, ctx.seed)?;
            r.num("radius", pds.radius);
            pds.sample
        }
        Method::Random => {
            r.put("method", "random");
            random_sample(cloud, a.count, ctx.seed)?
        }
    };
    r.put("count", sample.len()).num("sigma", sigma);

    if a.report {
        let left = sample
            .indices
            .iter()
            .filter(|&&i| is_left_half(&cloud[i]))
            .count();
        let stats = DensityStats::of(&density_profile(cloud, &sample, sigma)?);
        r.put("left_count", left)
            .put("right_count", sample.len() - left)
            .num("density_mean", stats.mean)
            .num("density_std", stats.std_dev)
            .num("density_cov", stats.coefficient_of_variation())
            .num("density_min", stats.min)
            .num("density_max", stats.max);
        if let CloudData::Labeled(l) = &data {
            let coarse = sample
                .indices
                .iter()
                .filter(|&&i| l.sources()[i] == Source::Coarse)
                .count();
            r.put("input_count", sample.len() - coarse).put("coarse_count", coarse);
        }
    }

    if let Some(path) = &a.output {
        let picked = match &data {
            CloudData::Plain(c) => CloudData::Plain(sample.apply(c)?),
            CloudData::Labeled(l) => CloudData::Labeled(sample.apply_labeled(l)?),
        };
        ctx.write(&picked, path)?;
        r.put("output", path.display());
    }
    Ok(r)
}

fn run_merge(ctx: &Ctx, a: &MergeArgs) -> Result<Report> {
    let input = ctx.read_plain(&a.input)?;
    let coarse = ctx.read_plain(&a.coarse)?;
    let mut r = Report::default();
    let merged = match a.count {
        Some(m) => {
            let sigma = match a.sigma {
                Some(s) => s,
                None => default_sigma(merge(&input, &coarse).cloud()),
            };
            let cfg = MdsConfig::new(sigma).with_first_point(a.first);
            r.num("sigma", sigma);
            merge_and_subsample(&input, &coarse, m, &cfg)?
        }
        None => merge(&input, &coarse),
    };
    r.put("points", merged.len())
        .put("input_points", merged.count(Source::Input))
        .put("coarse_points", merged.count(Source::Coarse));
    ctx.write(&CloudData::Labeled(merged), &a.output)?;
    r.put("output", a.output.display());
    Ok(r)
}

fn run_loss(ctx: &Ctx, a: &LossArgs) -> Result<Report> {
    let coarse = ctx.read_plain(&a.coarse)?;
    let final_cloud = ctx.read_plain(&a.final_cloud)?;
    let gt = ctx.read_plain(&a.gt)?;
    let batch = ElementBatch::from_cloud(&coarse, a.k, a.n)?;
    let cfg = LossConfig {
        weights: LossWeights {
            alpha: a.alpha,
            beta: a.beta,
        },
        emd: auction_config(a.epsilon, a.max_iters, false),
        expansion: ExpansionConfig { lambda: a.lambda },
    };
    let report = joint_loss(&coarse, &final_cloud, &gt, &batch, &cfg)?;
    let mut r = Report::default();
    r.num("alpha", a.alpha)
        .num("beta", a.beta)
        .num("emd_coarse", report.emd_coarse)
        .num("expansion", report.expansion)
        .num("emd_final", report.emd_final)
        .num("total", report.total);
    Ok(r)
}

fn run_gen(ctx: &Ctx, a: &GenArgs) -> Result<Report> {
    let mut r = Report::default();
    let (cloud, path) = match &a.kind {
        GenKind::UniformBox { n, min, max, output } => {
            r.put("kind", "uniform-box");
            (uniform_box(*n, &Aabb::new(*min, *max), ctx.seed)?, output)
        }
        GenKind::TwoDensity { left, right, output } => {
            r.put("kind", "two-density");
            (two_density(*left, *right, ctx.seed)?, output)
        }
    };
    r.put("points", cloud.len()).put("seed", ctx.seed.0);
    ctx.write(&CloudData::Plain(cloud), path)?;
    r.put("output", path.display());
    Ok(r)
}
