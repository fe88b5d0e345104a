//! The `drtune` command-line tool.

pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::adapter::{run_engine, stub_engine};
use crate::analysis::{merged_objective_samples, pareto_front, sobol_indices};
use crate::config::RunConfig;
use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::history::{best_so_far_trace, TuningHistory};
use crate::matrix::DataMatrix;
use crate::metrics::{MetricKind, MetricSpec};
use crate::seed::{derive, trial_seed};
use crate::surrogate;
use crate::tuner::{evaluate_trial, grid_search, prepare_subsample, run_tuning, transfer_optimum, DrObjective, Executor};

use output::{num, write_json, write_text, BestReport, CsvOut, Manifest, WriteOpts, MANIFEST};

const KEY_PARETO: u64 = 0xa4e7;
const KEY_SOBOL: u64 = 0x5070;
const KEY_EMBED: u64 = 0xe3b;

#[derive(Debug, Parser)]
#[command(name = "drtune", version, about = "Subsample-and-tune hyperparameter search for dimension reduction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (for `generate`, the output file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Omit timestamp lines and wall-clock fields so outputs are byte-stable.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Maximum number of concurrently running repeats.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic or configured dataset as CSV.
    Generate {
        /// two_cluster, sine or blobs; defaults to the config's dataset.
        #[arg(long)]
        dataset: Option<String>,
        /// Sample count for `sine`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Pilot plus surrogate-guided tuning.
    Tune {
        /// Independent runs with consecutive master seeds.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Also embed the full data at the transferred optimum.
        #[arg(long)]
        transfer: bool,
    },
    /// Full-grid evaluation.
    Grid {
        /// Points per continuous or count dimension.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Pareto front over two runs tuned on different metrics.
    Pareto {
        manifests: Vec<PathBuf>,
        /// Second objective when only one manifest is given.
        #[arg(long)]
        second_metric: Option<String>,
    },
    /// Sensitivity indices of the surrogate refitted from a manifest.
    Sobol {
        manifest: Option<PathBuf>,
        #[arg(long)]
        n_base: Option<usize>,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// One engine run at given hyperparameters.
    Embed {
        /// Normalized values, `name=value[,name=value]`.
        #[arg(long, value_delimiter = ',')]
        normalized: Vec<String>,
        /// Raw values, `name=value[,name=value]`.
        #[arg(long, value_delimiter = ',')]
        raw: Vec<String>,
        /// Embed the configured subsample instead of the full data.
        #[arg(long)]
        subsample: bool,
    },
    /// Protocol stub engine: copies the first d_prime input columns.
    #[command(hide = true)]
    StubEngine { dir: PathBuf },
}

impl GlobalArgs {
    fn opts(&self) -> WriteOpts {
        WriteOpts {
            force: self.force,
            timestamp: !self.no_timestamp,
        }
    }

    fn load_config(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::config("--config", "this command needs a configuration file"))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.tune.master_seed = s;
        }
        if let Some(j) = self.jobs {
            if j < 1 {
                return Err(Error::config("--jobs", "must be at least 1"));
            }
            cfg.tune.jobs = j;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate { dataset, n } => cmd_generate(g, dataset.as_deref(), *n),
        Command::Tune { runs, transfer } => cmd_tune(g, *runs, *transfer),
        Command::Grid { points } => cmd_grid(g, *points),
        Command::Pareto {
            manifests,
            second_metric,
        } => cmd_pareto(g, manifests, second_metric.as_deref()),
        Command::Sobol {
            manifest,
            n_base,
            bootstrap,
        } => cmd_sobol(g, manifest.as_deref(), *n_base, *bootstrap),
        Command::Embed {
            normalized,
            raw,
            subsample,
        } => cmd_embed(g, normalized, raw, *subsample),
        Command::StubEngine { dir } => stub_engine(dir),
    }
}

fn feature_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

fn write_matrix(path: &Path, x: &DataMatrix, header: Vec<String>, opts: WriteOpts, comments: &[String]) -> Result<PathBuf> {
    let mut out = CsvOut::create(path, opts, comments)?;
    let mut header = header;
    if x.labels().is_some() {
        header.push("label".into());
    }
    out.row(&header)?;
    for (i, row) in x.iter_rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        if let Some(l) = x.labels() {
            cells.push(l[i].to_string());
        }
        out.row(&cells)?;
    }
    out.finish()
}

fn cmd_generate(g: &GlobalArgs, dataset: Option<&str>, n: Option<usize>) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let spec = match dataset {
        Some("two_cluster") => DatasetSpec::TwoCluster {
            n_small: 10,
            n_large: 50,
            dim: 10,
            separation: 8.0,
            seed,
        },
        Some("sine") => DatasetSpec::Sine {
            n: n.unwrap_or(200),
            labels: false,
        },
        Some("blobs") => DatasetSpec::Blobs {
            n_per_class: n.unwrap_or(40),
            n_classes: 5,
            dim: 10,
            separation: 8.0,
            seed,
        },
        Some(other) => {
            return Err(Error::config(
                "--dataset",
                format!("unknown dataset `{other}` (expected two_cluster, sine or blobs)"),
            ))
        }
        None => g.load_config()?.dataset,
    };
    let out = g
        .out
        .clone()
        .ok_or_else(|| Error::config("--out", "generate needs an output file"))?;
    let x = spec.load()?;
    write_matrix(&out, &x, feature_header(x.cols()), g.opts(), &[])?;
    eprintln!("wrote {} rows to {}", x.rows(), out.display());
    Ok(())
}

fn point_text(names: &[&str], values: &[f64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn build_manifest(
    command: &str,
    cfg: &RunConfig,
    history: TuningHistory,
    n_full: usize,
    started: Instant,
    opts: WriteOpts,
) -> Result<Manifest> {
    let mut history = history;
    if !opts.timestamp {
        history.clear_wall_clock();
    }
    let best = history.best().ok_or_else(|| Error::domain("no trials were run"))?;
    let raw_full = history.space.materialize(&best.point.normalized, n_full)?.raw;
    let best = BestReport {
        trial: best.trial,
        normalized: best.point.normalized.clone(),
        raw: best.point.raw.clone(),
        raw_full,
        aggregate: best.aggregate,
    };
    Ok(Manifest {
        tool: "drtune".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        created_unix: opts.timestamp.then(output::unix_now),
        wall_seconds: opts.timestamp.then(|| started.elapsed().as_secs_f64()),
        config: cfg.clone(),
        history,
        best,
    })
}

fn write_repeats(path: &Path, history: &TuningHistory, opts: WriteOpts) -> Result<()> {
    let mut out = CsvOut::create(path, opts, &[])?;
    out.row(["trial_id", "repeat_id", "metric", "loss"])?;
    for r in &history.records {
        for (i, v) in r.metric_values.iter().enumerate() {
            out.row([r.trial.to_string(), i.to_string(), history.metric_name.clone(), num(*v)])?;
        }
    }
    out.finish()?;
    Ok(())
}

fn summary_text(m: &Manifest) -> String {
    let h = &m.history;
    let names: Vec<&str> = h.space.names().collect();
    let sub = h.subsample.as_ref();
    let (n_prime, n_full) = sub.map_or((0, 0), |s| (s.n_prime, s.n_full));
    let pilot = h.records.iter().filter(|r| r.phase == crate::history::Phase::Pilot).count();
    let mut s = String::new();
    s += &format!("command: {}\n", m.command);
    s += &format!("engine: {}\n", h.dr_name);
    s += &format!("metric: {} (loss, smaller is better)\n", h.metric_name);
    s += &format!("master seed: {}\n", m.config.tune.master_seed);
    if let Some(sub) = sub {
        s += &format!("sampler: {} (n' = {}, n = {})\n", sub.sampler, sub.n_prime, sub.n_full);
    }
    s += &format!(
        "trials: {} (pilot {}, other {}), repeats per trial: {}\n",
        h.len(),
        pilot,
        h.len() - pilot,
        m.config.tune.n_repeat()
    );
    let dropped: usize = h.records.iter().map(|r| r.dropped_repeats).sum();
    if dropped > 0 {
        s += &format!("dropped repeats: {dropped}\n");
    }
    s += &format!("best trial: {}\n", m.best.trial);
    s += &format!("best aggregate loss: {}\n", m.best.aggregate);
    s += &format!("best normalized: {}\n", point_text(&names, &m.best.normalized));
    s += &format!("best raw (n = {n_prime}): {}\n", point_text(&names, &m.best.raw));
    s += &format!("transferred raw (n = {n_full}): {}\n", point_text(&names, &m.best.raw_full));
    s
}

fn cmd_tune(g: &GlobalArgs, runs: usize, transfer: bool) -> Result<()> {
    if runs < 1 {
        return Err(Error::config("--runs", "must be at least 1"));
    }
    let base = g.load_config()?;
    let x = base.dataset.load()?;
    let opts = g.opts();
    let mut traces = Vec::new();
    for r in 0..runs {
        let mut cfg = base.clone();
        cfg.tune.master_seed = base.tune.master_seed.wrapping_add(r as u64);
        let dir = if runs == 1 {
            cfg.output_dir.clone()
        } else {
            base.output_dir.join(format!("run_{r:03}"))
        };
        cfg.output_dir = dir.clone();
        let manifest_path = dir.join(MANIFEST);
        if manifest_path.exists() && !g.force {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists; pass --force to overwrite", manifest_path.display()),
            )));
        }
        let started = Instant::now();
        let history = run_tuning(&x, &cfg.tune)?;
        let trace = best_so_far_trace(&history)?;
        let manifest = build_manifest("tune", &cfg, history, x.rows(), started, opts)?;

        write_json(&manifest_path, &manifest, g.force)?;
        let mut conv = CsvOut::create(&dir.join("convergence.csv"), opts, &[])?;
        conv.row(["iteration", "best_so_far"])?;
        for (i, v) in trace.iter().enumerate() {
            conv.row([(i + 1).to_string(), num(*v)])?;
        }
        conv.finish()?;
        write_repeats(&dir.join("trials.csv"), &manifest.history, opts)?;
        let summary = summary_text(&manifest);
        write_text(&dir.join("summary.txt"), &summary, g.force)?;
        if runs == 1 {
            print!("{summary}");
        } else {
            println!("run {r}: best aggregate {} at {:?}", manifest.best.aggregate, manifest.best.normalized);
        }
        if transfer {
            let (point, emb) = transfer_optimum(&manifest.history, &cfg.tune.engine, &x, cfg.tune.master_seed)?;
            let names: Vec<&str> = manifest.history.space.names().collect();
            let note = vec![format!("transferred raw (n = {}): {}", x.rows(), point_text(&names, &point.raw))];
            write_matrix(&dir.join("embedding_full.csv"), &emb, embed_header(emb.cols()), opts, &note)?;
        }
        traces.push((cfg.tune.master_seed, trace));
    }
    if runs > 1 {
        let mut out = CsvOut::create(&base.output_dir.join("convergence_runs.csv"), opts, &[])?;
        out.row(["run", "seed", "iteration", "best_so_far"])?;
        for (r, (seed, trace)) in traces.iter().enumerate() {
            for (i, v) in trace.iter().enumerate() {
                out.row([r.to_string(), seed.to_string(), (i + 1).to_string(), num(*v)])?;
            }
        }
        out.finish()?;
    }
    Ok(())
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

fn cmd_grid(g: &GlobalArgs, points: Option<usize>) -> Result<()> {
    let cfg = g.load_config()?;
    let points = points.or(cfg.grid.as_ref().map(|s| s.points)).unwrap_or(10);
    if points < 1 {
        return Err(Error::config("--points", "grid needs at least one point per dimension"));
    }
    let x = cfg.dataset.load()?;
    let opts = g.opts();
    let dir = cfg.output_dir.clone();
    let started = Instant::now();
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() && !g.force {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", manifest_path.display()),
        )));
    }
    let history = grid_search(&x, &cfg.tune, points)?;
    let manifest = build_manifest("grid", &cfg, history, x.rows(), started, opts)?;
    write_json(&manifest_path, &manifest, g.force)?;
    let h = &manifest.history;
    let names: Vec<String> = h.space.names().map(str::to_string).collect();
    let mut dims_header: Vec<String> = names.iter().map(|n| format!("{n}_normalized")).collect();
    dims_header.extend(names.iter().map(|n| format!("{n}_raw")));

    let mut losses = CsvOut::create(&dir.join("grid_losses.csv"), opts, &[])?;
    let mut header = vec!["trial_id".to_string()];
    header.extend(dims_header.iter().cloned());
    header.extend(["repeat_id".to_string(), "loss".to_string()]);
    losses.row(&header)?;
    for r in &h.records {
        for (i, v) in r.metric_values.iter().enumerate() {
            let mut row = vec![r.trial.to_string()];
            row.extend(r.point.normalized.iter().chain(&r.point.raw).map(|&v| num(v)));
            row.extend([i.to_string(), num(*v)]);
            losses.row(&row)?;
        }
    }
    losses.finish()?;

    let stats: Vec<(f64, f64)> = h.records.iter().map(|r| mean_var(&r.metric_values)).collect();
    let var_max = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let comments = vec![format!("metric: {}; variance_max: {}", h.metric_name, var_max)];
    let mut heat = CsvOut::create(&dir.join("heatmap.csv"), opts, &comments)?;
    let mut header = dims_header.clone();
    header.extend(["mean".to_string(), "variance".to_string(), "aggregate".to_string()]);
    heat.row(&header)?;
    for (r, (m, v)) in h.records.iter().zip(&stats) {
        let mut row: Vec<String> = r.point.normalized.iter().chain(&r.point.raw).map(|&v| num(v)).collect();
        row.extend([num(*m), num(*v), num(r.aggregate)]);
        heat.row(&row)?;
    }
    heat.finish()?;
    let summary = summary_text(&manifest);
    write_text(&dir.join("summary.txt"), &summary, g.force)?;
    print!("{summary}");
    Ok(())
}

/// Rebuilds the matrix a manifest was tuned on.
fn tuning_matrix(m: &Manifest) -> Result<DataMatrix> {
    if let DatasetSpec::Csv { path, .. } = &m.config.dataset {
        if !path.exists() {
            return Err(Error::config(
                "dataset.path",
                format!("dataset {} referenced by the manifest is missing", path.display()),
            ));
        }
    }
    let x = m.config.dataset.load()?;
    match &m.history.subsample {
        Some(s) => {
            if s.n_full != x.rows() {
                return Err(Error::config(
                    "dataset",
                    format!("dataset has {} rows but the manifest was tuned on {}", x.rows(), s.n_full),
                ));
            }
            x.select_rows(&s.rows)
        }
        None => Ok(x),
    }
}

fn cmd_pareto(g: &GlobalArgs, manifests: &[PathBuf], second_metric: Option<&str>) -> Result<()> {
    let paths: Vec<PathBuf> = if manifests.is_empty() {
        g.load_config()?
            .pareto
            .map(|p| p.manifests)
            .unwrap_or_default()
    } else {
        manifests.to_vec()
    };
    if paths.is_empty() || paths.len() > 2 {
        return Err(Error::config("manifests", "pareto needs one or two manifests"));
    }
    let loaded = paths.iter().map(|p| Manifest::load(p)).collect::<Result<Vec<_>>>()?;
    let first = &loaded[0];
    let (h2, spec2) = match (loaded.get(1), second_metric) {
        (Some(_), Some(_)) => {
            return Err(Error::config("--second-metric", "only valid with a single manifest"));
        }
        (Some(m2), None) => {
            if m2.history.subsample.as_ref().map(|s| &s.rows) != first.history.subsample.as_ref().map(|s| &s.rows) {
                log::warn!("manifests were tuned on different subsamples; cross-evaluating on the first");
            }
            (m2.history.clone(), m2.config.tune.metric.clone())
        }
        (None, Some(name)) => {
            let kind: MetricKind = name.parse().map_err(|e: String| Error::config("--second-metric", e))?;
            let mut spec = MetricSpec::new(kind);
            spec.n_repeat = first.config.tune.n_repeat();
            let mut h = first.history.clone();
            h.records.clear();
            h.metric_name = kind.name().into();
            (h, spec)
        }
        (None, None) => return Err(Error::config("--second-metric", "needed when only one manifest is given")),
    };
    if first.history.space != h2.space {
        return Err(Error::config("manifests", "manifests were tuned over different hyperparameter spaces"));
    }
    let specs = [first.config.tune.metric.clone(), spec2];
    let x = tuning_matrix(first)?;
    let tune = &first.config.tune;
    let exec = Executor::new(g.jobs.unwrap_or(tune.jobs).max(1))?;
    let pareto_seed = derive(tune.master_seed, &[KEY_PARETO]);
    let samples = merged_objective_samples(&first.history, &h2, |slot, point, idx| {
        let objective = DrObjective {
            x: &x,
            space: &first.history.space,
            engine: &tune.engine,
            metric: &specs[slot],
        };
        let seed = trial_seed(derive(pareto_seed, &[slot as u64]), idx);
        let out = evaluate_trial(
            &objective,
            point,
            idx,
            seed,
            specs[slot].n_repeat,
            &specs[slot].aggregation,
            &exec,
        )?;
        Ok(out.aggregate)
    })?;
    let losses: Vec<(f64, f64)> = samples.iter().map(|s| (s.loss1, s.loss2)).collect();
    let result = pareto_front(&losses);

    let dir = g
        .out
        .clone()
        .unwrap_or_else(|| paths[0].parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    let comments = vec![format!("loss1: {}; loss2: {}", specs[0].name, specs[1].name)];
    let mut out = CsvOut::create(&dir.join("pareto.csv"), g.opts(), &comments)?;
    let mut header: Vec<String> = first.history.space.names().map(|n| format!("{n}_normalized")).collect();
    header.extend(["loss1", "loss2", "on_front", "weight", "knee"].map(String::from));
    out.row(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row: Vec<String> = s.point.normalized.iter().map(|&v| num(v)).collect();
        row.extend([
            num(s.loss1),
            num(s.loss2),
            u8::from(result.front.contains(&i)).to_string(),
            s.weight.to_string(),
            u8::from(result.knee == Some(i)).to_string(),
        ]);
        out.row(&row)?;
    }
    let path = out.finish()?;
    println!(
        "{} samples, {} on the front, knee {:?}; wrote {}",
        samples.len(),
        result.front.len(),
        result.knee,
        path.display()
    );
    Ok(())
}

fn cmd_sobol(g: &GlobalArgs, manifest: Option<&Path>, n_base: Option<usize>, bootstrap: Option<usize>) -> Result<()> {
    let cfg_section = match (manifest, &g.config) {
        (Some(_), _) | (None, None) => None,
        (None, Some(_)) => g.load_config()?.sobol,
    };
    let path = manifest
        .map(Path::to_path_buf)
        .or_else(|| cfg_section.as_ref().and_then(|s| s.manifest.clone()))
        .ok_or_else(|| Error::config("manifest", "sobol needs a manifest path"))?;
    let n_base = n_base.or(cfg_section.as_ref().map(|s| s.n_base)).unwrap_or(1024);
    let n_boot = bootstrap.or(cfg_section.as_ref().map(|s| s.n_bootstrap)).unwrap_or(100);
    let m = Manifest::load(&path)?;
    let h = &m.history;
    let d = h.space.len();
    if d < 2 {
        return Err(Error::domain(format!(
            "sensitivity analysis apportions variance between hyperparameters and needs at least 2 dimensions; this manifest's space has {d}"
        )));
    }
    let seed = derive(g.seed.unwrap_or(m.config.tune.master_seed), &[KEY_SOBOL]);
    let model = surrogate::fit(m.config.tune.surrogate, &h.points(), &h.aggregates(), seed)?;
    let result = sobol_indices(|p| model.predict(p).0, d, n_base, seed, n_boot)?;

    let dir = g
        .out
        .clone()
        .unwrap_or_else(|| path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
    let mut comments = vec![format!("surrogate: {}; N_base: {}", m.config.tune.surrogate.name(), n_base)];
    if result.degenerate {
        comments.push("degenerate: surrogate mean is constant, indices reported as 0".into());
    }
    let mut out = CsvOut::create(&dir.join("sobol.csv"), g.opts(), &comments)?;
    out.row(["dim", "S1", "S1_conf", "ST", "ST_conf"])?;
    for (i, name) in h.space.names().enumerate() {
        out.row([
            name.to_string(),
            num(result.s1[i]),
            num(result.s1_conf[i]),
            num(result.st[i]),
            num(result.st_conf[i]),
        ])?;
    }
    let path = out.finish()?;
    for (i, name) in h.space.names().enumerate() {
        println!("{name}: S1 {:.4} ± {:.4}, ST {:.4} ± {:.4}", result.s1[i], result.s1_conf[i], result.st[i], result.st_conf[i]);
    }
    if result.degenerate {
        println!("degenerate: surrogate mean is constant");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_assignments(items: &[String], flag: &str) -> Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::config(flag, format!("`{item}` is not name=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::config(flag, format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn embed_header(d: usize) -> Vec<String> {
    match d {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (0..d).map(|j| format!("y{j}")).collect(),
    }
}

fn cmd_embed(g: &GlobalArgs, normalized: &[String], raw: &[String], use_subsample: bool) -> Result<()> {
    if !normalized.is_empty() && !raw.is_empty() {
        return Err(Error::config("--normalized", "--normalized and --raw are mutually exclusive"));
    }
    let cfg = g.load_config()?;
    let full = cfg.dataset.load()?;
    let x = if use_subsample {
        prepare_subsample(&full, &cfg.tune)?.0
    } else {
        full
    };
    let n = x.rows();
    let mut notes = Vec::new();
    let params = if !normalized.is_empty() {
        let unit = parse_assignments(normalized, "--normalized")?;
        let mut out = BTreeMap::new();
        for (name, u) in &unit {
            let dim = cfg
                .tune
                .space
                .dims
                .iter()
                .find(|d| &d.name == name)
                .ok_or_else(|| Error::config("--normalized", format!("`{name}` is not a dimension of the search space")))?;
            if !(0.0..=1.0).contains(u) {
                return Err(Error::config("--normalized", format!("{name}={u} outside [0, 1]")));
            }
            let r = dim.denormalize(*u, n);
            notes.push(format!("{name}={r} (normalized {u}, n = {n})"));
            out.insert(name.clone(), r);
        }
        out
    } else {
        let out = parse_assignments(raw, "--raw")?;
        for (name, v) in &out {
            notes.push(format!("{name}={v} (raw, n = {n})"));
        }
        out
    };
    if params.is_empty() {
        notes.push(format!("engine defaults (n = {n})"));
    }
    let seed = derive(cfg.tune.master_seed, &[KEY_EMBED]);
    let emb = run_engine(&cfg.tune.engine, &x, &params, seed)?;
    let path = cfg.output_dir.join("embedding.csv");
    let path = write_matrix(&path, &emb, embed_header(emb.cols()), g.opts(), &notes)?;
    for n in &notes {
        println!("{n}");
    }
    println!("wrote {}", path.display());
    Ok(())
}
