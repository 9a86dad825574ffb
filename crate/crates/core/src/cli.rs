//! The `stkde` command-line driver: single runs, volume comparison, and the
//! benchmark sweep. All timing excludes file I/O and dataset parsing; the
//! instance is materialized before any clock starts.

use std::collections::HashSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::algo::{run_algorithm, Algorithm, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};
use crate::io::{self, synth::generate_synthetic, OobPolicy};
use crate::stats::RunStats;

#[derive(Parser)]
#[command(name = "stkde", version, about = "Space-time kernel density estimation engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one algorithm on one instance.
    Run(RunArgs),
    /// Compare two STKDE1 volume files.
    Compare(CompareArgs),
    /// Sweep algorithms × threads × decompositions, emitting a CSV table.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
pub struct InstanceArgs {
    /// Input points as x,y,t CSV (one of --input/--synthetic).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic instance: n,clusters,sigma_xy,sigma_t,seed.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Domain origin "x,y,t" (default: 0,0,0 for synthetic, data bounding
    /// box for CSV input).
    #[arg(long)]
    pub origin: Option<String>,
    /// Domain extent "x,y,t" (default for CSV input: tight bounding box,
    /// ulp-padded).
    #[arg(long)]
    pub extent: Option<String>,
    /// Spatial resolution (world units per voxel).
    #[arg(long)]
    pub sres: f64,
    /// Temporal resolution (world units per voxel).
    #[arg(long)]
    pub tres: f64,
    /// Spatial bandwidth (world units).
    #[arg(long)]
    pub hs: f64,
    /// Temporal bandwidth (world units).
    #[arg(long)]
    pub ht: f64,
    /// Out-of-domain policy for CSV points: skip | fail.
    #[arg(long, default_value = "skip")]
    pub oob: String,
}

#[derive(Args)]
pub struct RunArgs {
    /// Algorithm name (vb, vb-dec, pb, pb-disk, pb-bar, pb-sym, pb-sym-dr,
    /// pb-sym-dd, pb-sym-pd, pb-sym-pd-sched, pb-sym-pd-rep).
    #[arg(long)]
    pub algo: String,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Subdomain decomposition "AxBxC".
    #[arg(long, default_value = "1x1x1")]
    pub decomp: String,
    /// Worker threads (default: physical cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Memory budget in bytes for replicated volumes / halo buffers.
    #[arg(long)]
    pub mem_budget: Option<u64>,
    /// Write the density volume here (STKDE1).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the run statistics here (JSON).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    pub volume_a: PathBuf,
    pub volume_b: PathBuf,
    /// Maximum allowed relative max-norm difference.
    #[arg(long, default_value_t = 1e-12)]
    pub threshold: f64,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Comma-separated algorithm names.
    #[arg(long)]
    pub algos: String,
    /// Comma-separated thread counts.
    #[arg(long, default_value = "1")]
    pub threads_list: String,
    /// Comma-separated decompositions "AxBxC".
    #[arg(long, default_value = "1x1x1")]
    pub decomp_list: String,
    /// Timing repeats per cell; the minimum wall time is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Memory budget in bytes applied to every cell.
    #[arg(long)]
    pub mem_budget: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn parse_triple(s: &str, field: &'static str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::validation(field, format!("expected x,y,t, got {s:?}")));
    }
    let mut vals = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .parse()
            .map_err(|_| Error::validation(field, format!("{p:?} is not a number")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn parse_decomp(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split('x').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::validation("decomp", format!("expected AxBxC, got {s:?}")));
    }
    let mut vals = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .parse()
            .map_err(|_| Error::validation("decomp", format!("{p:?} is not an integer")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn parse_oob(s: &str) -> Result<OobPolicy> {
    match s {
        "skip" => Ok(OobPolicy::Skip),
        "fail" => Ok(OobPolicy::Fail),
        other => Err(Error::validation("oob", format!("expected skip|fail, got {other:?}"))),
    }
}

struct SynthSpec {
    n: usize,
    clusters: usize,
    sigma_xy: f64,
    sigma_t: f64,
    seed: u64,
}

fn parse_synth(s: &str) -> Result<SynthSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(Error::validation(
            "synthetic",
            format!("expected n,clusters,sigma_xy,sigma_t,seed, got {s:?}"),
        ));
    }
    let bad = |what: &str| Error::validation("synthetic", format!("bad {what} in {s:?}"));
    Ok(SynthSpec {
        n: parts[0].parse().map_err(|_| bad("n"))?,
        clusters: parts[1].parse().map_err(|_| bad("clusters"))?,
        sigma_xy: parts[2].parse().map_err(|_| bad("sigma_xy"))?,
        sigma_t: parts[3].parse().map_err(|_| bad("sigma_t"))?,
        seed: parts[4].parse().map_err(|_| bad("seed"))?,
    })
}

pub struct Instance {
    pub grid: GridSpec,
    pub points: Vec<Point>,
    pub skipped: usize,
}

/// Materializes the instance: generator or CSV, explicit or derived domain.
pub fn build_instance(args: &InstanceArgs) -> Result<Instance> {
    match (&args.input, &args.synthetic) {
        (Some(_), Some(_)) => {
            Err(Error::validation("input", "--input and --synthetic are mutually exclusive"))
        }
        (None, None) => Err(Error::validation("input", "one of --input/--synthetic is required")),
        (None, Some(spec)) => {
            let spec = parse_synth(spec)?;
            let extent = args
                .extent
                .as_deref()
                .ok_or_else(|| Error::validation("extent", "--synthetic requires --extent"))
                .and_then(|e| parse_triple(e, "extent"))?;
            let origin = match &args.origin {
                Some(o) => parse_triple(o, "origin")?,
                None => (0.0, 0.0, 0.0),
            };
            let grid = GridSpec::new(origin, extent, args.sres, args.tres, args.hs, args.ht)?;
            let points =
                generate_synthetic(spec.n, spec.clusters, spec.sigma_xy, spec.sigma_t, &grid, spec.seed)?;
            Ok(Instance { grid, points, skipped: 0 })
        }
        (Some(path), None) => {
            let raw = io::read_points_csv(path)?;
            let origin = match &args.origin {
                Some(o) => Some(parse_triple(o, "origin")?),
                None => None,
            };
            let extent = match &args.extent {
                Some(e) => Some(parse_triple(e, "extent")?),
                None => None,
            };
            let (origin, extent) = match (origin, extent) {
                (Some(o), Some(e)) => (o, e),
                (maybe_origin, maybe_extent) => {
                    let (lo, hi) = io::bounding_box(&raw).ok_or_else(|| {
                        Error::validation(
                            "extent",
                            "cannot derive a domain from an empty point set; pass --origin/--extent",
                        )
                    })?;
                    let o = maybe_origin.unwrap_or(lo);
                    let e = maybe_extent.unwrap_or_else(|| {
                        (
                            io::pad_extent(o.0, hi.0),
                            io::pad_extent(o.1, hi.1),
                            io::pad_extent(o.2, hi.2),
                        )
                    });
                    (o, e)
                }
            };
            let grid = GridSpec::new(origin, extent, args.sres, args.tres, args.hs, args.ht)?;
            let (points, skipped) = io::filter_domain(raw, &grid, parse_oob(&args.oob)?)?;
            Ok(Instance { grid, points, skipped })
        }
    }
}

/// Physical core count from /proc/cpuinfo (unique (physical id, core id)
/// pairs), falling back to the logical count.
pub fn physical_cores() -> usize {
    if let Ok(text) = std::fs::read_to_string("/proc/cpuinfo") {
        let mut pairs = HashSet::new();
        let mut phys: Option<u32> = None;
        let mut core: Option<u32> = None;
        let flush = |phys: &mut Option<u32>, core: &mut Option<u32>, pairs: &mut HashSet<(u32, u32)>| {
            if let (Some(p), Some(c)) = (phys.take(), core.take()) {
                pairs.insert((p, c));
            }
        };
        for line in text.lines() {
            if line.trim().is_empty() {
                flush(&mut phys, &mut core, &mut pairs);
                continue;
            }
            if let Some((k, v)) = line.split_once(':') {
                match k.trim() {
                    "physical id" => phys = v.trim().parse().ok(),
                    "core id" => core = v.trim().parse().ok(),
                    _ => {}
                }
            }
        }
        flush(&mut phys, &mut core, &mut pairs);
        if !pairs.is_empty() {
            return pairs.len();
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let algo: Algorithm = args.algo.parse()?;
    let instance = build_instance(&args.instance)?;
    let config = RunConfig {
        decomp: parse_decomp(&args.decomp)?,
        threads: args.threads.unwrap_or_else(physical_cores),
        mem_budget: args.mem_budget,
    };
    let (volume, stats) = run_algorithm(algo, &instance.points, &instance.grid, &config)?;
    if let Some(out) = &args.out {
        io::write_volume(&volume, out)?;
    }
    if let Some(path) = &args.stats {
        io::write_stats_json(&stats, path)?;
    }
    print_run_summary(&instance, &stats);
    Ok(0)
}

fn print_run_summary(instance: &Instance, stats: &RunStats) {
    let g = &instance.grid;
    println!(
        "algo={} threads={} decomp={} n={} skipped={} grid={}x{}x{}",
        stats.algorithm,
        stats.threads,
        stats.decomposition.as_deref().unwrap_or("-"),
        stats.n_points,
        instance.skipped,
        g.nx,
        g.ny,
        g.nt,
    );
    println!("init_seconds={:.6}", stats.init_seconds);
    println!("assign_seconds={:.6}", stats.assign_seconds);
    println!("compute_seconds={:.6}", stats.compute_seconds);
    println!("reduce_seconds={:.6}", stats.reduce_seconds);
    println!("total_seconds={:.6}", stats.total_seconds);
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let a = io::read_volume(&args.volume_a)?;
    let b = io::read_volume(&args.volume_b)?;
    if a.grid != b.grid {
        return Err(Error::validation("grid", "volume grids differ"));
    }
    // The second volume is the reference for the relative norm.
    let (max_abs, max_rel) = b.diff_from(&a);
    println!("max_abs_diff={max_abs:e}");
    println!("max_rel_diff={max_rel:e}");
    Ok(if max_rel <= args.threshold { 0 } else { 4 })
}

struct BenchCell {
    algo: Algorithm,
    threads: usize,
    decomp: (usize, usize, usize),
}

fn bench_min_of(
    cell: &BenchCell,
    instance: &Instance,
    repeats: usize,
    mem_budget: Option<u64>,
) -> Result<RunStats> {
    let config =
        RunConfig { decomp: cell.decomp, threads: cell.threads, mem_budget };
    let mut best: Option<RunStats> = None;
    for _ in 0..repeats.max(1) {
        let (_, stats) = run_algorithm(cell.algo, &instance.points, &instance.grid, &config)?;
        if best.as_ref().map_or(true, |b| stats.total_seconds < b.total_seconds) {
            best = Some(stats);
        }
    }
    Ok(best.expect("at least one repeat ran"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let instance = build_instance(&args.instance)?;

    let mut algos = Vec::new();
    for name in args.algos.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        algos.push(name.parse::<Algorithm>()?);
    }
    if algos.is_empty() {
        return Err(Error::validation("algos", "no algorithms given"));
    }
    let mut threads_list = Vec::new();
    for t in args.threads_list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let t: usize = t
            .parse()
            .map_err(|_| Error::validation("threads-list", format!("{t:?} is not an integer")))?;
        threads_list.push(t.max(1));
    }
    let mut decomp_list = Vec::new();
    for d in args.decomp_list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        decomp_list.push(parse_decomp(d)?);
    }

    // Baseline: sequential PB-SYM, same repeat policy. Reused for its own
    // cell so the self-speedup is exactly 1.0.
    let baseline_cell =
        BenchCell { algo: Algorithm::PbSym, threads: 1, decomp: (1, 1, 1) };
    let baseline = bench_min_of(&baseline_cell, &instance, args.repeats, args.mem_budget)?;

    let mut out = String::new();
    out.push_str(
        "algo,decomp,threads,init_s,compute_s,reduce_s,total_s,\
         speedup_vs_pb_sym_1t,work_overhead_ratio,T1,Tinf\n",
    );
    let mut seen = HashSet::new();
    for &algo in &algos {
        let cell_threads: Vec<usize> =
            if algo.uses_threads() { threads_list.clone() } else { vec![1] };
        let cell_decomps: Vec<(usize, usize, usize)> =
            if algo.uses_decomposition() { decomp_list.clone() } else { vec![(1, 1, 1)] };
        for &threads in &cell_threads {
            for &decomp in &cell_decomps {
                if !seen.insert((algo.name(), threads, decomp)) {
                    continue;
                }
                let cell = BenchCell { algo, threads, decomp };
                let key = format!("{},{}x{}x{},{}", algo.name(), decomp.0, decomp.1, decomp.2, threads);
                let is_baseline = algo == Algorithm::PbSym;
                let result = if is_baseline {
                    Ok(baseline.clone())
                } else {
                    bench_min_of(&cell, &instance, args.repeats, args.mem_budget)
                };
                match result {
                    Ok(stats) => {
                        let speedup = baseline.total_seconds / stats.total_seconds;
                        let speedup = if is_baseline { 1.0 } else { speedup };
                        let (t1, tinf) = stats
                            .schedule
                            .map(|s| (Some(s.t1), Some(s.tinf)))
                            .unwrap_or((None, None));
                        out.push_str(&format!(
                            "{key},{:.6},{:.6},{:.6},{:.6},{speedup:.4},{},{},{}\n",
                            stats.init_seconds,
                            stats.compute_seconds,
                            stats.reduce_seconds,
                            stats.total_seconds,
                            fmt_opt(stats.work_overhead_ratio),
                            fmt_opt(t1),
                            fmt_opt(tinf),
                        ));
                    }
                    Err(Error::MemoryBudget { .. }) => {
                        out.push_str(&format!("{key},,,,OOM,,,,\n"));
                    }
                    Err(_) => {
                        out.push_str(&format!("{key},,,,ERR,,,,\n"));
                    }
                }
            }
        }
    }
    match &args.csv_out {
        Some(path) => std::fs::write(path, &out).map_err(|e| Error::io(path, e))?,
        None => print!("{out}"),
    }
    Ok(0)
}
