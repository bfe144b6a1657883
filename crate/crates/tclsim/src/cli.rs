//! Command-line front end: synthetic network generation, potential analysis,
//! schedule dumps, simulation, and pattern search.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cycle::{ArchConfig, ArchMode};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestLayer, ResolvedLayer};
use crate::potential::{ideal_speedups, render_potential_csv};
use crate::report::{render_network_csv, simulate_network, SimArch};
use crate::schedule::{
    build_dense_schedule, filter_slice, render_dump, schedule_tile, PromotionPattern,
};
use crate::scnn::ScnnConfig;
use crate::search::{greedy_prune_search, render_trace_csv};
use crate::tensor::{gen_synthetic, save_tensor, LayerSpec, ValueModel};

#[derive(Debug, Parser)]
#[command(
    name = "tclsim",
    version,
    about = "Sparse CNN accelerator timing models"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic network: a manifest plus TCLT tensor files.
    Gen(GenArgs),
    /// Ideal speedups from skipping each kind of ineffectual work.
    Potential(PotentialArgs),
    /// Dump the static weight schedule of one filter group.
    Schedule(ScheduleArgs),
    /// Price a network on one architecture (dcnn baseline always included).
    Sim(SimArgs),
    /// Greedily prune a full promotion window down to a target mux size.
    Search(SearchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchArg {
    Dcnn,
    TclWs,
    Tclp,
    Tcle,
    Scnn,
}

#[derive(Debug, Args)]
struct PatternOpts {
    /// Lookahead depth of a contiguous pattern.
    #[arg(long, default_value_t = 0, conflicts_with = "pattern")]
    h: usize,
    /// Lookaside distance of a contiguous pattern.
    #[arg(long, default_value_t = 0, conflicts_with = "pattern")]
    d: usize,
    /// Pattern file (`h=N` header, then `dl,ds` lines).
    #[arg(long)]
    pattern: Option<PathBuf>,
}

impl PatternOpts {
    fn build(&self, lanes: usize) -> Result<PromotionPattern> {
        match &self.pattern {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                PromotionPattern::parse(&text, lanes)
            }
            None => PromotionPattern::contiguous(self.h, self.d, lanes),
        }
    }
}

#[derive(Debug, Args)]
struct ArchOpts {
    /// Weight lanes per filter.
    #[arg(long, default_value_t = 16)]
    lanes: usize,
    #[arg(long, default_value_t = 16)]
    filters_per_tile: usize,
    #[arg(long, default_value_t = 4)]
    tiles: usize,
    /// Windows the serial back ends process side by side.
    #[arg(long, default_value_t = 16)]
    windows_parallel: usize,
    /// Serial-shift limit between oneffsets (tcle only).
    #[arg(long)]
    max_shift_delta: Option<u8>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output directory for the manifest and tensors.
    #[arg(long)]
    out: PathBuf,
    /// Network name; also names the manifest file.
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// Layer shape `ax,ay,c,fx,fy,kk,stride,precision[,relu]`; repeatable.
    #[arg(long = "layer", required = true, value_parser = parse_layer_arg)]
    layers: Vec<LayerSpec>,
    /// Fraction of zero weights.
    #[arg(long, default_value_t = 0.5)]
    sparsity: f64,
    /// `uniform-p-bit` or `clustered-near-zero:SCALE`.
    #[arg(long, default_value = "uniform-p-bit", value_parser = parse_value_model)]
    value_model: ValueModel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PotentialArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Layer index within the manifest.
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Filter-group index within the layer.
    #[arg(long, default_value_t = 0)]
    group: usize,
    #[command(flatten)]
    pattern: PatternOpts,
    #[command(flatten)]
    arch: ArchOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    arch: ArchArg,
    #[command(flatten)]
    pattern: PatternOpts,
    #[command(flatten)]
    arch_opts: ArchOpts,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Tuning network (only weights are consulted).
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 2)]
    h: usize,
    /// Maximum lookaside lane distance of the starting full window.
    #[arg(long, default_value_t = 7)]
    distance: usize,
    /// Number of sites to keep.
    #[arg(long, default_value_t = 7)]
    target: usize,
    #[command(flatten)]
    arch: ArchOpts,
    /// Write the final pattern in the pattern-file format.
    #[arg(long)]
    pattern_out: Option<PathBuf>,
    /// Write the removal trace as CSV (stdout when omitted).
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

fn parse_layer_arg(text: &str) -> std::result::Result<LayerSpec, String> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 8 && fields.len() != 9 {
        return Err("expected ax,ay,c,fx,fy,kk,stride,precision[,relu]".into());
    }
    let num = |i: usize| -> std::result::Result<usize, String> {
        fields[i]
            .trim()
            .parse()
            .map_err(|_| format!("bad number `{}`", fields[i]))
    };
    let relu = match fields.get(8).map(|s| s.trim()) {
        None => false,
        Some("relu") => true,
        Some(other) => return Err(format!("expected `relu`, got `{other}`")),
    };
    let layer = LayerSpec {
        ax: num(0)?,
        ay: num(1)?,
        c: num(2)?,
        fx: num(3)?,
        fy: num(4)?,
        kk: num(5)?,
        stride: num(6)?,
        relu,
        precision_bits: num(7)? as u8,
    };
    layer.validate().map_err(|e| e.to_string())?;
    Ok(layer)
}

fn parse_value_model(text: &str) -> std::result::Result<ValueModel, String> {
    if text == "uniform-p-bit" {
        return Ok(ValueModel::UniformPBit);
    }
    if let Some(scale) = text.strip_prefix("clustered-near-zero:") {
        let scale: f64 = scale.parse().map_err(|_| format!("bad scale `{scale}`"))?;
        if !scale.is_finite() || scale <= 0.0 {
            return Err("scale must be positive".into());
        }
        return Ok(ValueModel::ClusteredNearZero { scale });
    }
    Err(format!("unknown value model `{text}`"))
}

fn arch_config(opts: &ArchOpts, pattern: PromotionPattern, mode: ArchMode) -> ArchConfig {
    ArchConfig {
        lanes: opts.lanes,
        filters_per_tile: opts.filters_per_tile,
        tiles: opts.tiles,
        windows_parallel: opts.windows_parallel,
        pattern,
        mode,
        max_shift_delta: opts.max_shift_delta,
        ..ArchConfig::default()
    }
}

fn write_or_print(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn model_digest(model: &ValueModel) -> String {
    match model {
        ValueModel::UniformPBit => "uniform-p-bit".into(),
        ValueModel::ClusteredNearZero { scale } => format!("clustered-near-zero:{scale}"),
    }
}

fn pattern_digest(p: &PromotionPattern) -> String {
    format!(
        "h={} d={} sites={}",
        p.lookahead(),
        p.max_lane_delta(),
        p.sites().len()
    )
}

fn load_network(path: &Path) -> Result<(Manifest, Vec<ResolvedLayer>)> {
    let manifest = Manifest::load(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolved = manifest.resolve(base)?;
    Ok((manifest, resolved))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Potential(args) => run_potential(args),
        Command::Schedule(args) => run_schedule(args),
        Command::Sim(args) => run_sim(args),
        Command::Search(args) => run_search(args),
    }
}

fn run_gen(args: GenArgs) -> Result<()> {
    println!(
        "config: cmd=gen name={} layers={} sparsity={} model={} seed={} out={}",
        args.name,
        args.layers.len(),
        args.sparsity,
        model_digest(&args.value_model),
        args.seed,
        args.out.display()
    );
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut entries = Vec::new();
    for (i, layer) in args.layers.iter().enumerate() {
        let (w, a) = gen_synthetic(
            layer,
            args.sparsity,
            args.value_model,
            args.seed.wrapping_add(i as u64),
        )?;
        let (wname, aname) = (format!("w{i}.tclt"), format!("a{i}.tclt"));
        save_tensor(&w, &args.out.join(&wname))?;
        save_tensor(&a, &args.out.join(&aname))?;
        entries.push(ManifestLayer {
            layer: *layer,
            weights_path: Some(wname),
            activations_path: Some(aname),
            generator: None,
        });
    }
    let manifest = Manifest {
        network_name: args.name.clone(),
        layers: entries,
    };
    let path = args.out.join(format!("{}.json", args.name));
    manifest.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_potential(args: PotentialArgs) -> Result<()> {
    println!("config: cmd=potential manifest={}", args.manifest.display());
    let (_, layers) = load_network(&args.manifest)?;
    let mut rows = Vec::new();
    for l in &layers {
        let acts = l.activations.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "layer {}: potential analysis needs activations",
                l.index
            ))
        })?;
        rows.push((
            l.index.to_string(),
            ideal_speedups(&l.layer, &l.weights, acts)?,
        ));
    }
    write_or_print(&args.out, &render_potential_csv(&rows))
}

fn run_schedule(args: ScheduleArgs) -> Result<()> {
    let pattern = args.pattern.build(args.arch.lanes)?;
    println!(
        "config: cmd=schedule manifest={} layer={} group={} lanes={} filters={} {}",
        args.manifest.display(),
        args.layer,
        args.group,
        args.arch.lanes,
        args.arch.filters_per_tile,
        pattern_digest(&pattern)
    );
    let (_, layers) = load_network(&args.manifest)?;
    let resolved = layers.get(args.layer).ok_or_else(|| {
        Error::Config(format!(
            "layer {} out of range ({} layers)",
            args.layer,
            layers.len()
        ))
    })?;
    let first = args.group * args.arch.filters_per_tile;
    if first >= resolved.layer.kk {
        return Err(Error::Config(format!(
            "group {} out of range ({} filters)",
            args.group, resolved.layer.kk
        )));
    }
    let last = (first + args.arch.filters_per_tile).min(resolved.layer.kk);
    let mut dense = Vec::new();
    for k in first..last {
        let f = filter_slice(&resolved.weights, &resolved.layer, k)?;
        dense.push(build_dense_schedule(
            &f,
            &resolved.layer,
            args.arch.lanes,
            k,
        )?);
    }
    let tile = schedule_tile(&dense, &pattern)?;
    write_or_print(&args.out, &render_dump(&tile))
}

fn run_sim(args: SimArgs) -> Result<()> {
    let pattern = args.pattern.build(args.arch_opts.lanes)?;
    let (mode, arch) = match args.arch {
        ArchArg::Dcnn => (SimArch::Tcl(ArchMode::Dcnn), "dcnn"),
        ArchArg::TclWs => (SimArch::Tcl(ArchMode::TclWs), "tcl-ws"),
        ArchArg::Tclp => (SimArch::Tcl(ArchMode::TclP), "tclp"),
        ArchArg::Tcle => (SimArch::Tcl(ArchMode::TclE), "tcle"),
        ArchArg::Scnn => (SimArch::Scnn(ScnnConfig::default()), "scnn"),
    };
    println!(
        "config: cmd=sim arch={arch} manifest={} lanes={} filters={} tiles={} wpar={} shift={} {}",
        args.manifest.display(),
        args.arch_opts.lanes,
        args.arch_opts.filters_per_tile,
        args.arch_opts.tiles,
        args.arch_opts.windows_parallel,
        args.arch_opts
            .max_shift_delta
            .map_or("none".into(), |d| d.to_string()),
        pattern_digest(&pattern)
    );
    let (manifest, layers) = load_network(&args.manifest)?;
    let base = arch_config(&args.arch_opts, pattern, ArchMode::Dcnn);
    let report = simulate_network(&manifest.network_name, &layers, &base, &[mode])?;
    for note in &report.skipped {
        eprintln!("note: {note}");
    }
    if let Some(path) = &args.json {
        let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    write_or_print(&args.out, &render_network_csv(&report))
}

fn run_search(args: SearchArgs) -> Result<()> {
    println!(
        "config: cmd=search manifest={} h={} distance={} target={} lanes={} filters={} tiles={}",
        args.manifest.display(),
        args.h,
        args.distance,
        args.target,
        args.arch.lanes,
        args.arch.filters_per_tile,
        args.arch.tiles
    );
    let (_, layers) = load_network(&args.manifest)?;
    let network: Vec<_> = layers.iter().map(|l| (&l.layer, &l.weights)).collect();
    let base = arch_config(&args.arch, PromotionPattern::none(), ArchMode::TclWs);
    let trace = greedy_prune_search(&network, &base, args.h, args.distance, args.target)?;
    if let Some(path) = &args.pattern_out {
        fs::write(path, trace.final_pattern.render()).map_err(|e| Error::io(path, e))?;
    }
    println!(
        "search: initial={} final={} [{}]",
        trace.initial_cycles,
        trace.steps.last().map_or(trace.initial_cycles, |&(_, c)| c),
        pattern_digest(&trace.final_pattern)
    );
    write_or_print(&args.trace_out, &render_trace_csv(&trace))
}
