//! Command-line front end: one subcommand per experiment, CSV/PGM output,
//! and a run manifest capturing the fully resolved configuration so any
//! run can be reproduced from its manifest alone (feed it back through
//! `--config`).
//!
//! Exit codes: 0 success, 1 solver or data error, 2 usage error.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use reweight::analysis;
use reweight::cs::WeightVector;
use reweight::harness;
use reweight::io::config::{parse_grid, write_manifest, ConfigMap};
use reweight::io::results::{format_float, CsvTable};
use reweight::io::{matrix_csv, movielens, pgm, triplets};
use reweight::mc::{self, WsstConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const OUT_DIR_ENV: &str = "REWEIGHT_OUT";

#[derive(Parser)]
#[command(
    name = "reweight",
    version,
    about = "Reweighted basis pursuit and weighted spectral soft-thresholding experiment runners"
)]
struct Cli {
    /// Flat key = value configuration file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to $REWEIGHT_OUT, then ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CompletionFlags {
    /// epsilon in lambda_target = epsilon * ||P_Omega(A0)||_op.
    #[arg(long)]
    eps_lambda: Option<f64>,
    /// Continuation ratio in (0, 1).
    #[arg(long)]
    q: Option<f64>,
    /// Weight-refresh rounds after continuation.
    #[arg(long)]
    rounds: Option<usize>,
    /// Relative-change tolerance of the inner loops.
    #[arg(long)]
    tol: Option<f64>,
    /// Ridge parameter of the fixed-point map.
    #[arg(long)]
    tau: Option<f64>,
    /// Iteration cap per inner loop.
    #[arg(long)]
    max_inner: Option<usize>,
    /// Truncate all spectra at this rank.
    #[arg(long)]
    rank_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-recovery phase map over an (s, m) grid.
    #[command(name = "cs-phase")]
    CsPhase {
        #[arg(long)]
        n: Option<usize>,
        /// Sparsity grid, start:end:step or comma list.
        #[arg(long)]
        s_grid: Option<String>,
        /// Measurement grid, start:end:step or comma list.
        #[arg(long)]
        m_grid: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Reweighting iterations of the weighted decoder.
        #[arg(long)]
        k: Option<usize>,
        /// Recovery declaration tolerance.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Weight-accuracy constant along reweighting iterations.
    #[command(name = "a0-track")]
    A0Track {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Completion phase experiment over a rank grid.
    #[command(name = "mc-phase")]
    McPhase {
        #[arg(long)]
        n: Option<usize>,
        /// Rank grid, start:end:step or comma list.
        #[arg(long)]
        ranks: Option<String>,
        #[arg(long)]
        sample_frac: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        completion: CompletionFlags,
    },
    /// Inpainting of a rank-truncated PGM image.
    #[command(name = "inpaint")]
    Inpaint {
        /// Binary 8-bit PGM input image.
        #[arg(long)]
        image: PathBuf,
        /// Ground truth is the best approximation of this rank.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        sample_frac: Option<f64>,
        #[command(flatten)]
        completion: CompletionFlags,
    },
    /// Collaborative filtering on a ratings file.
    #[command(name = "collab")]
    Collab {
        /// Ratings file (tab-separated u.data or ::-separated ratings.dat).
        #[arg(long)]
        data: PathBuf,
        /// Force a layout instead of inferring from the file name.
        #[arg(long, value_parser = ["auto", "udata", "dat"], default_value = "auto")]
        format: String,
        #[command(flatten)]
        completion: CompletionFlags,
    },
    /// Dual-certificate report for a problem instance.
    #[command(name = "certify")]
    Certify {
        /// CSV: sensing matrix rows, then one final row with the signal.
        #[arg(long)]
        problem: PathBuf,
        /// CSV vector of weights.
        #[arg(long)]
        weights: PathBuf,
    },
    /// One-shot NNM + WSST completion of a triplet file.
    #[command(name = "complete")]
    Complete {
        /// Observations as row,col,value lines.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[command(flatten)]
        completion: CompletionFlags,
    },
}

// Flag > config file > built-in default.
struct Resolver {
    cfg: ConfigMap,
}

impl Resolver {
    fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> anyhow::Result<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.cfg.get_f64(key)?.unwrap_or(default))
    }

    fn usize(&self, flag: Option<usize>, key: &str, default: usize) -> anyhow::Result<usize> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.cfg.get_usize(key)?.unwrap_or(default))
    }

    fn opt_usize(&self, flag: Option<usize>, key: &str) -> anyhow::Result<Option<usize>> {
        if flag.is_some() {
            return Ok(flag);
        }
        Ok(self.cfg.get_usize(key)?)
    }

    fn u64(&self, flag: Option<u64>, key: &str, default: u64) -> anyhow::Result<u64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.cfg.get_u64(key)?.unwrap_or(default))
    }

    fn grid(&self, flag: &Option<String>, key: &str, default: &str) -> anyhow::Result<Vec<usize>> {
        let spec = match flag {
            Some(s) => s.clone(),
            None => self
                .cfg
                .get(key)
                .map(|s| s.to_string())
                .unwrap_or_else(|| default.to_string()),
        };
        parse_grid(&spec).map_err(|e| anyhow!("grid '{key}': {e}"))
    }

    fn completion(&self, flags: &CompletionFlags) -> anyhow::Result<WsstConfig> {
        let d = WsstConfig::default();
        Ok(WsstConfig {
            eps_lambda: self.f64(flags.eps_lambda, "eps_lambda", d.eps_lambda)?,
            q: self.f64(flags.q, "q", d.q)?,
            reweight_rounds: self.usize(flags.rounds, "rounds", d.reweight_rounds)?,
            tol: self.f64(flags.tol, "tol", d.tol)?,
            tau: self.f64(flags.tau, "tau", d.tau)?,
            max_inner_iters: self.usize(flags.max_inner, "max_inner", d.max_inner_iters)?,
            rank_cap: self.opt_usize(flags.rank_cap, "rank_cap")?,
        })
    }
}

fn completion_manifest(cfg: &WsstConfig) -> Vec<(String, String)> {
    let mut entries = vec![
        ("eps_lambda".into(), format!("{:e}", cfg.eps_lambda)),
        ("q".into(), cfg.q.to_string()),
        ("rounds".into(), cfg.reweight_rounds.to_string()),
        ("tol".into(), format!("{:e}", cfg.tol)),
        ("tau".into(), cfg.tau.to_string()),
        ("max_inner".into(), cfg.max_inner_iters.to_string()),
    ];
    if let Some(cap) = cfg.rank_cap {
        entries.push(("rank_cap".into(), cap.to_string()));
    }
    entries
}

fn grid_spec(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

struct RunContext {
    out_dir: PathBuf,
    seed: u64,
    resolver: Resolver,
}

impl RunContext {
    fn manifest(&self, command: &str, mut entries: Vec<(String, String)>) -> anyhow::Result<()> {
        let mut all = vec![
            ("command".to_string(), command.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        all.append(&mut entries);
        write_manifest(&self.out_dir.join("run-manifest.txt"), &all)
            .context("writing run manifest")?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(UsageOr::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            eprintln!("run with --help for the synopsis");
            ExitCode::from(2)
        }
        Err(UsageOr::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

enum UsageOr {
    Usage(String),
    Runtime(anyhow::Error),
}

fn run(cli: Cli) -> Result<(), UsageOr> {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path)
            .map_err(|e| UsageOr::Usage(format!("config {}: {e}", path.display())))?,
        None => ConfigMap::default(),
    };
    let resolver = Resolver { cfg };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| resolver.cfg.get("out").map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| UsageOr::Usage(format!("output dir {}: {e}", out_dir.display())))?;
    // Writability check up front, before any long computation.
    let probe = out_dir.join(".write-probe");
    std::fs::write(&probe, b"ok")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| UsageOr::Usage(format!("output dir {} not writable: {e}", out_dir.display())))?;

    let seed = resolver
        .u64(cli.seed, "seed", 1)
        .map_err(|e| UsageOr::Usage(e.to_string()))?;

    let ctx = RunContext {
        out_dir,
        seed,
        resolver,
    };
    dispatch(&cli.command, &ctx).map_err(UsageOr::Runtime)
}

fn dispatch(command: &Command, ctx: &RunContext) -> anyhow::Result<()> {
    match command {
        Command::CsPhase {
            n,
            s_grid,
            m_grid,
            reps,
            epsilon,
            k,
            eta,
        } => {
            let r = &ctx.resolver;
            let n = r.usize(*n, "n", 128)?;
            let s_grid = r.grid(s_grid, "s_grid", "2:40:2")?;
            let m_grid = r.grid(m_grid, "m_grid", "10:120:10")?;
            let reps = r.usize(*reps, "reps", 20)?;
            let epsilon = r.f64(*epsilon, "epsilon", 0.01)?;
            let k = r.usize(*k, "k", 20)?;
            let eta = r.f64(*eta, "eta", 1e-5)?;
            ctx.manifest(
                "cs-phase",
                vec![
                    ("n".into(), n.to_string()),
                    ("s_grid".into(), grid_spec(&s_grid)),
                    ("m_grid".into(), grid_spec(&m_grid)),
                    ("reps".into(), reps.to_string()),
                    ("epsilon".into(), format!("{epsilon:e}")),
                    ("k".into(), k.to_string()),
                    ("eta".into(), format!("{eta:e}")),
                ],
            )?;
            let map =
                harness::run_cs_phase_map(n, &s_grid, &m_grid, reps, epsilon, k, eta, ctx.seed)?;
            let path = ctx.path("cs_phase.csv");
            map.to_csv().write(&path)?;
            let plain: u64 = map.counts_plain.iter().flatten().map(|&c| c as u64).sum();
            let weighted: u64 = map
                .counts_weighted
                .iter()
                .flatten()
                .map(|&c| c as u64)
                .sum();
            println!(
                "cs-phase: {} cells x {} reps, plain {} / weighted {} recoveries -> {}",
                map.s_values.len() * map.m_values.len(),
                reps,
                plain,
                weighted,
                path.display()
            );
        }
        Command::A0Track {
            n,
            m,
            s,
            reps,
            k,
            epsilon,
        } => {
            let r = &ctx.resolver;
            let n = r.usize(*n, "n", 200)?;
            let m = r.usize(*m, "m", 110)?;
            let s = r.usize(*s, "s", 45)?;
            let reps = r.usize(*reps, "reps", 10)?;
            let k = r.usize(*k, "k", 30)?;
            let epsilon = r.f64(*epsilon, "epsilon", 0.01)?;
            ctx.manifest(
                "a0-track",
                vec![
                    ("n".into(), n.to_string()),
                    ("m".into(), m.to_string()),
                    ("s".into(), s.to_string()),
                    ("reps".into(), reps.to_string()),
                    ("k".into(), k.to_string()),
                    ("epsilon".into(), format!("{epsilon:e}")),
                ],
            )?;
            let traces = harness::run_a0_tracking(n, m, s, reps, k, epsilon, ctx.seed)?;
            let path = ctx.path("a0_track.csv");
            harness::traces_to_csv(&traces).write(&path)?;
            println!("a0-track: {reps} repetitions x {k} iterations -> {}", path.display());
        }
        Command::McPhase {
            n,
            ranks,
            sample_frac,
            reps,
            completion,
        } => {
            let r = &ctx.resolver;
            let n = r.usize(*n, "n", 100)?;
            let ranks = r.grid(ranks, "ranks", "2:30:2")?;
            let sample_frac = r.f64(*sample_frac, "sample_frac", 0.3)?;
            let reps = r.usize(*reps, "reps", 5)?;
            let cfg = r.completion(completion)?;
            let mut entries = vec![
                ("n".into(), n.to_string()),
                ("ranks".into(), grid_spec(&ranks)),
                ("sample_frac".into(), sample_frac.to_string()),
                ("reps".into(), reps.to_string()),
            ];
            entries.extend(completion_manifest(&cfg));
            ctx.manifest("mc-phase", entries)?;
            let records = harness::run_mc_phase(n, &ranks, sample_frac, reps, &cfg, ctx.seed)?;
            let path = ctx.path("mc_phase.csv");
            harness::records_to_csv(&records).write(&path)?;
            println!(
                "mc-phase: {} ranks x {reps} reps -> {}",
                ranks.len(),
                path.display()
            );
        }
        Command::Inpaint {
            image,
            rank,
            sample_frac,
            completion,
        } => {
            let r = &ctx.resolver;
            let rank = r.usize(*rank, "rank", 50)?;
            let sample_frac = r.f64(*sample_frac, "sample_frac", 0.3)?;
            let cfg = r.completion(completion)?;
            let bytes = std::fs::read(image)
                .with_context(|| format!("reading image {}", image.display()))?;
            let img = pgm::parse_pgm(&bytes)?;
            let mut entries = vec![
                ("image".into(), image.display().to_string()),
                ("rank".into(), rank.to_string()),
                ("sample_frac".into(), sample_frac.to_string()),
            ];
            entries.extend(completion_manifest(&cfg));
            ctx.manifest("inpaint", entries)?;

            let out = harness::run_inpainting(&img, rank, sample_frac, &cfg, ctx.seed)?;
            pgm::write_pgm(&out.truth, &ctx.path("truth.pgm"))?;
            pgm::write_pgm(&out.observed, &ctx.path("observed.pgm"))?;
            pgm::write_pgm(&out.nnm.matrix, &ctx.path("nnm.pgm"))?;
            pgm::write_pgm(&out.wsst.matrix, &ctx.path("wsst.pgm"))?;
            pgm::write_scaled_map(&out.nnm_diff, &ctx.path("nnm_diff.pgm"))?;
            pgm::write_scaled_map(&out.wsst_diff, &ctx.path("wsst_diff.pgm"))?;
            let mut table = CsvTable::new(&["solver", "rel_err", "rank", "lambda"]);
            table.push_row(vec![
                "nnm".into(),
                format_float(out.nnm_rel_err),
                out.nnm.rank.to_string(),
                format_float(out.nnm.lambda_used),
            ]);
            table.push_row(vec![
                "wsst".into(),
                format_float(out.wsst_rel_err),
                out.wsst.rank.to_string(),
                format_float(out.wsst.lambda_used),
            ]);
            let path = ctx.path("inpaint.csv");
            table.write(&path)?;
            println!(
                "inpaint: nnm err {:.3e} rank {}, wsst err {:.3e} rank {} -> {}",
                out.nnm_rel_err,
                out.nnm.rank,
                out.wsst_rel_err,
                out.wsst.rank,
                path.display()
            );
        }
        Command::Collab {
            data,
            format,
            completion,
        } => {
            let cfg = {
                let base = ctx.resolver.completion(completion)?;
                WsstConfig {
                    rank_cap: Some(base.rank_cap.unwrap_or(200)),
                    ..base
                }
            };
            let layout = match format.as_str() {
                "udata" => movielens::MovieLensFormat::UData,
                "dat" => movielens::MovieLensFormat::RatingsDat,
                _ => movielens::MovieLensFormat::infer(data),
            };
            let dataset = movielens::load_ratings(data, layout)?;
            let mut entries = vec![
                ("data".into(), data.display().to_string()),
                ("format".into(), format.clone()),
            ];
            entries.extend(completion_manifest(&cfg));
            ctx.manifest("collab", entries)?;
            let out = harness::run_collab_filter(&dataset, &cfg, ctx.seed)?;
            let path = ctx.path("collab.csv");
            harness::outcome_to_csv(&out).write(&path)?;
            println!(
                "collab: nnm err {:.3e} rank {}, wsst err {:.3e} rank {} -> {}",
                out.nnm_err,
                out.nnm_rank,
                out.wsst_err,
                out.wsst_rank,
                path.display()
            );
        }
        Command::Certify { problem, weights } => {
            let text = std::fs::read_to_string(problem)
                .with_context(|| format!("reading problem {}", problem.display()))?;
            let (a, x) = matrix_csv::parse_problem(&text)?;
            let wtext = std::fs::read_to_string(weights)
                .with_context(|| format!("reading weights {}", weights.display()))?;
            let w = WeightVector::new(matrix_csv::parse_vector(&wtext)?)
                .map_err(|e| anyhow!("{e}"))?;
            ctx.manifest(
                "certify",
                vec![
                    ("problem".into(), problem.display().to_string()),
                    ("weights".into(), weights.display().to_string()),
                ],
            )?;
            let report = analysis::dual_certificate(&a, &x, &w)?;
            let mut table = CsvTable::new(&[
                "valid",
                "borderline",
                "sign_match",
                "strict_bound",
                "delta_hat",
                "mu_hat",
                "a0_constant",
            ]);
            table.push_row(vec![
                (report.valid as u8).to_string(),
                (report.borderline as u8).to_string(),
                (report.sign_match as u8).to_string(),
                format_float(report.strict_bound),
                format_float(report.delta_hat),
                format_float(report.mu_hat),
                format_float(report.a0_constant),
            ]);
            let path = ctx.path("certify.csv");
            table.write(&path)?;
            println!(
                "certify: valid={} strict_bound={:.6e} delta={:.4} mu={:.4} a0={:.4e} -> {}",
                report.valid,
                report.strict_bound,
                report.delta_hat,
                report.mu_hat,
                report.a0_constant,
                path.display()
            );
        }
        Command::Complete {
            obs,
            rows,
            cols,
            completion,
        } => {
            let r = &ctx.resolver;
            let rows = r.opt_usize(*rows, "rows")?;
            let cols = r.opt_usize(*cols, "cols")?;
            let cfg = r.completion(completion)?;
            let text = std::fs::read_to_string(obs)
                .with_context(|| format!("reading observations {}", obs.display()))?;
            let trips = triplets::parse_triplets(&text)?;
            let masked = triplets::to_masked_matrix(&trips, rows, cols)?;
            let mut entries = vec![
                ("obs".into(), obs.display().to_string()),
                ("rows".into(), masked.n_rows().to_string()),
                ("cols".into(), masked.n_cols().to_string()),
            ];
            entries.extend(completion_manifest(&cfg));
            ctx.manifest("complete", entries)?;

            let nnm = mc::nnm_solve(&masked, &cfg)?;
            let ws = mc::wsst(&masked, &nnm, &cfg)?;
            matrix_csv::write_matrix(&nnm.matrix, &ctx.path("nnm.csv"))?;
            matrix_csv::write_matrix(&ws.matrix, &ctx.path("wsst.csv"))?;

            let observed_err = |m: &reweight::numerics::DenseMatrix| -> f64 {
                let mut num = 0.0;
                let mut denom = 0.0;
                for (&(rr, cc), &v) in masked
                    .mask()
                    .cells()
                    .iter()
                    .zip(masked.values().iter())
                {
                    let p = m.get(rr, cc);
                    num += (p - v) * (p - v);
                    denom += v * v;
                }
                if denom > 0.0 {
                    (num / denom).sqrt()
                } else {
                    num.sqrt()
                }
            };
            let mut table =
                CsvTable::new(&["solver", "observed_err", "rank", "lambda", "inner_iterations"]);
            table.push_row(vec![
                "nnm".into(),
                format_float(observed_err(&nnm.matrix)),
                nnm.rank.to_string(),
                format_float(nnm.lambda_used),
                nnm.inner_iterations_total.to_string(),
            ]);
            table.push_row(vec![
                "wsst".into(),
                format_float(observed_err(&ws.matrix)),
                ws.rank.to_string(),
                format_float(ws.lambda_used),
                ws.inner_iterations_total.to_string(),
            ]);
            let path = ctx.path("complete.csv");
            table.write(&path)?;
            println!(
                "complete: nnm rank {}, wsst rank {} -> {}",
                nnm.rank,
                ws.rank,
                path.display()
            );
        }
    }
    Ok(())
}
