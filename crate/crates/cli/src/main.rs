//! `maass`: search for Maass cusp forms and follow them through deformations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maass_core::deform::{continue_curve_with, correct_seeded, probe_directions, TrackOptions};
use maass_core::group::{arithmetic_level, build_with_character, validate};
use maass_core::io::{
    plot_csv, read_curve, read_records, write_records, CandidateRecord, ConfigOverrides, CurveWriter, Provenance,
    RunConfig,
};
use maass_core::search::{census, grid_points, refine_near};
use maass_core::verify::verify;
use maass_core::{BesselEvaluator, Character, Family, MaassCandidate, MaassError, Setup};

#[derive(Parser, Debug)]
#[command(name = "maass", version, about = "Maass cusp forms on deformable one-cusp groups")]
struct Cli {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    oversample: Option<f64>,
    #[arg(long, global = true)]
    y0_factor: Option<f64>,
    #[arg(long, global = true)]
    scan_step: Option<f64>,
    #[arg(long, global = true)]
    step_initial: Option<f64>,
    #[arg(long, global = true)]
    step_min: Option<f64>,
    #[arg(long, global = true)]
    step_max: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct GroupArgs {
    /// gamma222 or gamma2222
    #[arg(long)]
    family: Family,
    /// Comma-separated parameters, e.g. `5,0`
    #[arg(long, allow_hyphen_values = true)]
    params: String,
    /// Signs of the character on the elliptic generators, e.g. `-1,1,-1`
    #[arg(long, allow_hyphen_values = true)]
    character: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Signature, generators and relation check of a group
    GroupInfo {
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Table of `e^{πR/2} K_{iR}(u)`
    BesselTable {
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        /// `lo:hi:step`
        #[arg(long)]
        u: String,
    },
    /// Residual scan of an `R` window, refining every dip
    Scan {
        #[command(flatten)]
        group: GroupArgs,
        /// `lo:hi`
        #[arg(long)]
        r: String,
        #[arg(long)]
        step: Option<f64>,
        /// Fixed truncation order
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Print the residual grid
        #[arg(long)]
        grid: bool,
    },
    /// Refine the eigenvalue nearest to `--r-near`
    Refine {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        r_near: f64,
        #[arg(long, default_value_t = 0.01)]
        width: f64,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Follow a candidate through the family
    Track {
        /// Candidate records (JSON lines)
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Initial direction in parameter space
        #[arg(long, allow_hyphen_values = true)]
        direction: Option<String>,
        /// Axes allowed to move (default: all)
        #[arg(long)]
        free_axes: Option<String>,
        /// Fixed transverse axis for the corrector
        #[arg(long)]
        transverse: Option<usize>,
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
        /// Per-axis box `lo:hi,lo:hi,..`
        #[arg(long, allow_hyphen_values = true)]
        bounds: Option<String>,
        /// Jump to these parameters instead (the transverse entry is a placeholder)
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        /// Half width of the transverse seeds used with `--target`
        #[arg(long, default_value_t = 0.015)]
        seed_width: f64,
        #[arg(long, default_value_t = 21)]
        seeds: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Count the directions in which a candidate deforms
    Probe {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 24)]
        samples: usize,
    },
    /// Run the verification checks on candidate records
    Verify {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_max: u64,
        /// Include the constant-term experiment
        #[arg(long)]
        eisenstein: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Curve file to CSV (parameters, R)
    ExportPlot {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Scans over a grid of gamma222 parameters
    BoxSearch {
        /// `lo:hi:count`
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// `lo:hi:count`
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long)]
        r: String,
        #[arg(long, allow_hyphen_values = true)]
        character: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn domain(msg: impl Into<String>) -> MaassError {
    MaassError::Domain(msg.into())
}

fn parse_list(s: &str) -> Result<Vec<f64>, MaassError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| domain(format!("`{v}` is not a number"))))
        .collect()
}

fn parse_range(s: &str) -> Result<(f64, f64), MaassError> {
    let v: Vec<&str> = s.split(':').collect();
    match v.as_slice() {
        [lo, hi] => Ok((
            lo.parse().map_err(|_| domain(format!("bad range `{s}`")))?,
            hi.parse().map_err(|_| domain(format!("bad range `{s}`")))?,
        )),
        _ => Err(domain(format!("expected `lo:hi`, got `{s}`"))),
    }
}

fn parse_range3(s: &str) -> Result<(f64, f64, f64), MaassError> {
    let v: Vec<f64> = s
        .split(':')
        .map(|x| x.parse().map_err(|_| domain(format!("bad range `{s}`"))))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [lo, hi, k] => Ok((*lo, *hi, *k)),
        _ => Err(domain(format!("expected `lo:hi:step`, got `{s}`"))),
    }
}

fn character(family: Family, s: &Option<String>) -> Result<Character, MaassError> {
    match s {
        None => Ok(Character::trivial(family)),
        Some(s) => {
            let signs = s
                .split(',')
                .map(|v| v.trim().parse::<i8>().map_err(|_| domain(format!("bad sign `{v}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Character::new(family, signs)
        }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn out_path(cfg: &RunConfig, out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| cfg.output_dir.join(default))
}

fn load_candidate(path: &Path, index: usize) -> Result<MaassCandidate, MaassError> {
    let recs = read_records(path)?;
    recs.get(index)
        .ok_or_else(|| domain(format!("{} has {} records, no index {index}", path.display(), recs.len())))?
        .candidate()
}

fn setup(cfg: &RunConfig, g: &GroupArgs, r_max: f64, m: Option<usize>) -> Result<Setup, MaassError> {
    let params = parse_list(&g.params)?;
    let chi = character(g.family, &g.character)?;
    let group = build_with_character(g.family, &params, &chi)?;
    let mut settings = cfg.solver_settings();
    settings.m = m;
    Setup::new(group, settings, r_max)
}

fn summary(c: &MaassCandidate) -> String {
    format!(
        "R = {:.9}  λ = {:.9}  residual {:.2e}  {}  M = {}",
        c.r,
        c.lambda(),
        c.residual,
        c.parity,
        c.m
    )
}

fn run(cli: Cli) -> Result<(), MaassError> {
    let f = &cli.config;
    let flags = ConfigOverrides {
        eps: f.eps,
        oversample: f.oversample,
        y0_factor: f.y0_factor,
        scan_step: f.scan_step,
        step_initial: f.step_initial,
        step_min: f.step_min,
        step_max: f.step_max,
        thread_count: f.threads,
        output_dir: f.output_dir.clone(),
    };
    let cfg = RunConfig::load(f.config.as_deref(), &flags)?;
    // a second initialization (in tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.thread_count).build_global();

    match cli.command {
        Command::GroupInfo { group } => {
            let params = parse_list(&group.params)?;
            let chi = character(group.family, &group.character)?;
            let g = build_with_character(group.family, &params, &chi)?;
            println!("family      {}", g.family);
            println!("params      {:?}", g.params);
            println!("signature   {}", g.signature);
            println!("teichmuller dimension {}", g.signature.teichmuller_dim());
            println!("character   {}", g.character);
            for (i, (m, p)) in g.elliptic.iter().zip(&g.elliptic_points).enumerate() {
                println!("g{}          {}  fixes {:.12} + {:.12}i", i + 1, m, p.x(), p.y());
            }
            let v = validate(&g);
            println!("relations   max deviation {:.2e}", v.max_deviation);
            if let Some(q) = arithmetic_level(g.family, &g.params) {
                println!("arithmetic  level {q}");
            }
            if !v.holds() {
                return Err(domain(format!("relations fail by {:.2e}", v.max_deviation)));
            }
        }
        Command::BesselTable { r, u } => {
            let (lo, hi, step) = parse_range3(&u)?;
            if !(step > 0.0) {
                return Err(domain("step must be positive"));
            }
            let ev = BesselEvaluator::new(r);
            println!("u,scaled,k");
            for x in grid_points(lo, hi, step) {
                let k = ev.k_scaled(x)?;
                println!("{x},{k:e},{:e}", k * (-std::f64::consts::PI * r / 2.0).exp());
            }
        }
        Command::Scan { group, r, step, m, out, grid } => {
            let (lo, hi) = parse_range(&r)?;
            let s = setup(&cfg, &group, hi, m)?;
            let step = step.unwrap_or(cfg.scan_step);
            if grid {
                let sc = maass_core::search::scan(&s, lo, hi, step)?;
                for (r, res) in &sc.grid {
                    println!("{r:.6} {res:.4e}");
                }
            }
            let found = census(&s, lo, hi, step)?;
            let ts = now();
            let recs: Vec<CandidateRecord> = found
                .iter()
                .map(|c| CandidateRecord::new(c, None, Provenance::new(ts.clone())))
                .collect();
            let path = out_path(&cfg, &out, "scan.jsonl");
            write_records(&path, &recs)?;
            for c in &found {
                println!("{}", summary(c));
            }
            println!("{} candidates written to {}", recs.len(), path.display());
        }
        Command::Refine { group, r_near, width, m, out } => {
            let s = setup(&cfg, &group, r_near + width, m)?;
            let c = refine_near(&s, r_near, width)?;
            let path = out_path(&cfg, &out, "refine.jsonl");
            write_records(&path, &[CandidateRecord::new(&c, None, Provenance::new(now()))])?;
            println!("{}", summary(&c));
            println!("written to {}", path.display());
        }
        Command::Track {
            input,
            index,
            direction,
            free_axes,
            transverse,
            max_steps,
            bounds,
            target,
            seed_width,
            seeds,
            out,
        } => {
            let start = load_candidate(&input, index)?;
            let n = start.params.len();
            if let Some(t) = target {
                let target = parse_list(&t)?;
                let axis = transverse.ok_or_else(|| domain("--target needs --transverse"))?;
                if target.len() != n || axis >= n {
                    return Err(domain("target or transverse axis does not match the family"));
                }
                let c = correct_seeded(&start, &target, axis, seed_width, seeds)?;
                let path = out_path(&cfg, &out, "corrected.jsonl");
                write_records(&path, &[CandidateRecord::new(&c, None, Provenance::new(now()))])?;
                println!("params {:?}", c.params);
                println!("{}", summary(&c));
                return Ok(());
            }
            let direction = parse_list(direction.as_deref().ok_or_else(|| domain("--direction is required"))?)?;
            let free: Vec<usize> = match free_axes {
                Some(s) => s
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| domain(format!("bad axis `{v}`"))))
                    .collect::<Result<_, _>>()?,
                None => (0..n).collect(),
            };
            let bounds = match bounds {
                Some(s) => Some(s.split(',').map(parse_range).collect::<Result<Vec<_>, _>>()?),
                None => None,
            };
            let options = TrackOptions {
                policy: cfg.step_policy,
                max_steps,
                bounds,
                transverse,
            };
            let path = out_path(&cfg, &out, "curve.jsonl");
            let mut w = CurveWriter::create(&path, now())?;
            let curve = continue_curve_with(&start, &direction, &free, &options, |p| {
                println!("{:?}  {}", p.params, summary(p));
                w.push(p)
            })?;
            w.finish(curve.termination, &curve.free_axes, curve.step_policy)?;
            println!("{} points, {}; written to {}", curve.points.len(), curve.termination, path.display());
        }
        Command::Probe { input, index, samples } => {
            let c = load_candidate(&input, index)?;
            let p = probe_directions(&c, samples)?;
            println!("{} tangent line(s)", p.count());
            for d in &p.lines {
                println!("  {d:?}");
            }
        }
        Command::Verify { input, n_max, eisenstein, out } => {
            let recs = read_records(&input)?;
            let mut verified = Vec::with_capacity(recs.len());
            for rec in recs {
                let c = rec.candidate()?;
                let report = verify(&c, n_max, eisenstein)?;
                println!("R = {:.9}: {}", c.r, serde_json::to_string(&report)?);
                verified.push(CandidateRecord::new(&c, Some(report), Provenance::new(now())));
            }
            let path = out_path(&cfg, &out, "verified.jsonl");
            write_records(&path, &verified)?;
            println!("written to {}", path.display());
        }
        Command::ExportPlot { input, out } => {
            let curve = read_curve(&input)?;
            let path = out.unwrap_or_else(|| input.with_extension("csv"));
            std::fs::write(&path, plot_csv(&curve))?;
            println!("{} rows written to {}", curve.points.len(), path.display());
        }
        Command::BoxSearch { a, b, r, character: chi, out } => {
            let (a_lo, a_hi, na) = parse_range3(&a)?;
            let (b_lo, b_hi, nb) = parse_range3(&b)?;
            let (r_lo, r_hi) = parse_range(&r)?;
            let axis = |lo: f64, hi: f64, k: f64| -> Vec<f64> {
                let k = k.max(1.0) as usize;
                if k == 1 {
                    vec![lo]
                } else {
                    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
                }
            };
            let path = out_path(&cfg, &out, "box.jsonl");
            let mut all = Vec::new();
            let ts = now();
            for &av in &axis(a_lo, a_hi, na) {
                for &bv in &axis(b_lo, b_hi, nb) {
                    let g = GroupArgs {
                        family: Family::Gamma222,
                        params: format!("{av},{bv}"),
                        character: chi.clone(),
                    };
                    let s = match setup(&cfg, &g, r_hi, None) {
                        Ok(s) => s,
                        Err(e) => {
                            eprintln!("skip ({av}, {bv}): {e}");
                            continue;
                        }
                    };
                    let found = census(&s, r_lo, r_hi, cfg.scan_step)?;
                    println!("({av:.4}, {bv:.4}): {} candidates", found.len());
                    all.extend(found.iter().map(|c| CandidateRecord::new(c, None, Provenance::new(ts.clone()))));
                    write_records(&path, &all)?;
                }
            }
            println!("{} candidates written to {}", all.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
