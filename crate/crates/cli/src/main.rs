//! `flowmatte`: alpha matting, matte regularization, layer colors and compositing from the shell.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flowmatte::color::premultiply;
use flowmatte::flows::build_ktou_flow;
use flowmatte::io::{self as fio, BitDepth};
use flowmatte::types::{FlowGraph, PixelGrid};
use flowmatte::{
    composite, estimate_colors, run_pipeline, run_regularization, Matte, Params, PipelineOptions, PipelineOutput,
    Region, SolveMode, Trimap,
};

#[derive(Debug, Parser)]
#[command(
    name = "flowmatte",
    version,
    about = "Alpha matting with information-flow affinities"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Parameter file with one `key=value` per line
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one parameter; repeatable and applied after --config
    #[arg(short = 'p', long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print parameters and solver statistics as key=value lines on stdout
    #[arg(long, global = true)]
    report: bool,
    /// Bits per sample of written PNGs
    #[arg(long, global = true, default_value_t = 8, value_name = "8|16")]
    depth: u32,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate an alpha matte from an image and a trimap
    Matte {
        image: PathBuf,
        trimap: PathBuf,
        out: PathBuf,
        /// Always use the known-to-unknown flow
        #[arg(long, conflicts_with = "force_e2")]
        force_e1: bool,
        /// Never use the known-to-unknown flow
        #[arg(long)]
        force_e2: bool,
        #[command(flatten)]
        extra: SolveFlags,
    },
    /// Refine an external matte estimate weighted by a confidence map
    Regularize {
        image: PathBuf,
        trimap: PathBuf,
        alpha_hat: PathBuf,
        /// Grayscale confidence, black = no trust in `alpha_hat`
        eta_hat: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        extra: SolveFlags,
    },
    /// Estimate foreground and background layer colors for a matte
    Colors {
        image: PathBuf,
        alpha: PathBuf,
        out_fg: PathBuf,
        out_bg: PathBuf,
        /// Write the foreground multiplied by alpha
        #[arg(long)]
        premultiplied: bool,
    },
    /// Blend a foreground over a background with a matte
    Composite {
        fg: PathBuf,
        alpha: PathBuf,
        bg: PathBuf,
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SolveFlags {
    /// Skip trimap trimming
    #[arg(long)]
    no_trim: bool,
    /// Write the trimmed trimap as a PNG
    #[arg(long, value_name = "PATH")]
    dump_trimmed_trimap: Option<PathBuf>,
    /// Write flow edge lists (and the known-to-unknown estimate) into DIR
    #[arg(long, value_name = "DIR")]
    dump_flows: Option<PathBuf>,
}

struct Report(Vec<(String, String)>);

impl Report {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_owned(), value.to_string()));
    }

    fn print(&self) {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k}={v}");
        }
    }
}

fn load_params(common: &Common) -> Result<Params> {
    let mut params = Params::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        params
            .apply_config(&text)
            .with_context(|| format!("in config {}", path.display()))?;
    }
    for item in &common.params {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("parameter override `{item}` is not KEY=VALUE"))?;
        params.set(key, value)?;
    }
    params.validate()?;
    Ok(params)
}

fn require_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            bail!("input file not found: {}", p.display());
        }
    }
    Ok(())
}

fn write_graph(dir: &Path, name: &str, graph: &FlowGraph) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    graph.write_edge_list(&mut out)?;
    out.flush()?;
    Ok(())
}

fn dump_flows(dir: &Path, image: &flowmatte::ImageRgb, output: &PipelineOutput, params: &Params) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let Some(flows) = &output.flows else {
        return Ok(());
    };
    write_graph(dir, "color_mixture.txt", &flows.color_mixture)?;
    write_graph(dir, "intra_unknown.txt", &flows.intra_unknown)?;
    write_graph(dir, "local.txt", &flows.local.to_flow_graph()?)?;
    // the known-to-unknown estimate doubles as an input for `regularize`
    let tri = &output.trimmed;
    if tri.count(Region::Foreground) > 0 && tri.count(Region::Background) > 0 {
        let ktou = build_ktou_flow(image, tri, params)?;
        let (w, h) = (tri.width(), tri.height());
        let depth = BitDepth::Sixteen;
        fio::save_matte(
            &Matte::new(w, h, ktou.fg_weights(tri))?,
            dir.join("ktou_alpha.png"),
            depth,
        )?;
        fio::save_matte(
            &Matte::new(w, h, ktou.confidences(w * h))?,
            dir.join("ktou_confidence.png"),
            depth,
        )?;
    }
    Ok(())
}

/// Inputs shared by the `matte` and `regularize` output stage.
struct Job<'a> {
    image: &'a flowmatte::ImageRgb,
    trimap: &'a Trimap,
    params: &'a Params,
    depth: BitDepth,
}

fn finish_solve(
    job: &Job<'_>,
    output: &PipelineOutput,
    out: &Path,
    extra: &SolveFlags,
    report: &mut Report,
) -> Result<()> {
    let Job {
        image,
        trimap: input,
        params,
        depth,
    } = *job;
    fio::save_matte(&output.matte, out, depth).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = &extra.dump_trimmed_trimap {
        fio::save_trimap(&output.trimmed, path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &extra.dump_flows {
        dump_flows(dir, image, output, params)?;
    }
    let energy = match (&output.report, output.used_e2) {
        (None, _) => "none",
        (Some(_), true) => "E2",
        (Some(_), false) => "E1",
    };
    report.push("energy", energy);
    if let Some(d) = &output.decision {
        report.push("histogram_a", d.fit.a);
        report.push("histogram_b", d.fit.b);
        report.push("histogram_residual", d.fit.e);
    }
    if let Some(r) = &output.report {
        report.push("iterations", r.iterations);
        report.push("relative_residual", format!("{:e}", r.relative_residual));
    }
    report.push("unknown_input", input.count(Region::Unknown));
    report.push("unknown_trimmed", output.trimmed.count(Region::Unknown));
    for (key, secs) in &output.timings {
        report.push(key, format!("{secs:.6}"));
    }
    Ok(())
}

fn load_pair(image: &Path, trimap: &Path) -> Result<(flowmatte::ImageRgb, Trimap)> {
    let img = fio::load_image(image).with_context(|| format!("reading {}", image.display()))?;
    let tri = fio::load_trimap(trimap).with_context(|| format!("reading {}", trimap.display()))?;
    img.grid()
        .ensure_same(tri.grid())
        .with_context(|| format!("trimap {} does not match image {}", trimap.display(), image.display()))?;
    Ok((img, tri))
}

fn execute(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let params = load_params(&cli.common)?;
    let depth = BitDepth::from_bits(cli.common.depth)?;
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut report = Report(Vec::new());

    match &cli.command {
        Command::Matte {
            image,
            trimap,
            out,
            force_e1,
            force_e2,
            extra,
        } => {
            require_inputs(&[image, trimap])?;
            let (img, tri) = load_pair(image, trimap)?;
            let mode = match (force_e1, force_e2) {
                (true, _) => SolveMode::ForceE1,
                (_, true) => SolveMode::ForceE2,
                _ => SolveMode::Auto,
            };
            let output = run_pipeline(
                &img,
                &tri,
                &params,
                PipelineOptions {
                    trim: !extra.no_trim,
                    mode,
                },
            )?;
            report.push("command", "matte");
            let job = Job {
                image: &img,
                trimap: &tri,
                params: &params,
                depth,
            };
            finish_solve(&job, &output, out, extra, &mut report)?;
        }
        Command::Regularize {
            image,
            trimap,
            alpha_hat,
            eta_hat,
            out,
            extra,
        } => {
            require_inputs(&[image, trimap, alpha_hat, eta_hat])?;
            let (img, tri) = load_pair(image, trimap)?;
            let hat = fio::load_matte(alpha_hat).with_context(|| format!("reading {}", alpha_hat.display()))?;
            img.grid()
                .ensure_same(hat.grid())
                .with_context(|| format!("matte {} does not match image {}", alpha_hat.display(), image.display()))?;
            let (w, h, eta) = fio::load_gray(eta_hat).with_context(|| format!("reading {}", eta_hat.display()))?;
            img.grid().ensure_same(PixelGrid::new(w, h)).with_context(|| {
                format!(
                    "confidence {} does not match image {}",
                    eta_hat.display(),
                    image.display()
                )
            })?;
            let output = run_regularization(&img, &tri, &hat, &eta, &params, !extra.no_trim)?;
            report.push("command", "regularize");
            let job = Job {
                image: &img,
                trimap: &tri,
                params: &params,
                depth,
            };
            finish_solve(&job, &output, out, extra, &mut report)?;
        }
        Command::Colors {
            image,
            alpha,
            out_fg,
            out_bg,
            premultiplied,
        } => {
            require_inputs(&[image, alpha])?;
            let img = fio::load_image(image).with_context(|| format!("reading {}", image.display()))?;
            let matte = fio::load_matte(alpha).with_context(|| format!("reading {}", alpha.display()))?;
            img.grid()
                .ensure_same(matte.grid())
                .with_context(|| format!("matte {} does not match image {}", alpha.display(), image.display()))?;
            let (layers, solve) = estimate_colors(&img, &matte, &params)?;
            let fg = if *premultiplied {
                premultiply(&layers.foreground, &matte)?
            } else {
                layers.foreground
            };
            fio::save_image(&fg, out_fg, depth).with_context(|| format!("writing {}", out_fg.display()))?;
            fio::save_image(&layers.background, out_bg, depth)
                .with_context(|| format!("writing {}", out_bg.display()))?;
            report.push("command", "colors");
            report.push("iterations", solve.iterations);
            report.push("relative_residual", format!("{:e}", solve.relative_residual));
            report.push("solve_seconds", format!("{:.6}", solve.seconds));
        }
        Command::Composite { fg, alpha, bg, out } => {
            require_inputs(&[fg, alpha, bg])?;
            let f = fio::load_image(fg).with_context(|| format!("reading {}", fg.display()))?;
            let a = fio::load_matte(alpha).with_context(|| format!("reading {}", alpha.display()))?;
            let b = fio::load_image(bg).with_context(|| format!("reading {}", bg.display()))?;
            let blended = composite(&f, &a, &b)?;
            fio::save_image(&blended, out, depth).with_context(|| format!("writing {}", out.display()))?;
            report.push("command", "composite");
        }
    }

    if cli.common.report {
        report.push("total_seconds", format!("{:.6}", started.elapsed().as_secs_f64()));
        for (key, value) in params.entries() {
            report.push(key, value);
        }
        report.print();
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("flowmatte: {message}");
            ExitCode::FAILURE
        }
    }
}
