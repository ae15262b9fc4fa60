use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;

use surro_core::blockgp::{fit_blocks_with_candidates, partition, speedup_report, BlockSpec};
use surro_core::design::{
    best_candidate_sample, default_hyperparam_space, hyperparam_candidates, stratified_sample,
    Domain, SampleMethod,
};
use surro_core::explore::{
    dense_sweep, filter_solution, load_dataset, load_model, parallel_coords_export, save_model,
    som_heatmap_export, write_dataset_csv, DatasetSchema, HeatmapQuantity, ModelFile,
    ModelKind,
};
use surro_core::gp::{
    fit, loo_evaluate_with, scale_features, Dataset, GpError, GpModel, LooOptions, SolverConfig,
};
use surro_core::hyperopt::{
    default_hyperparameters, random_search, search_with_candidates, SearchConfig,
};
use surro_core::kernels::{Hyperparameters, TaperSpec};
use surro_core::som::{batch_train, convergence_metric, node_stats, HexGrid, NodeStats, SomConfig};

use crate::error::CliError;
use crate::{Command, DataArgs, SolverArgs};

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Sample {
            domain,
            method,
            n,
            k,
            seed,
            synthetic,
            noise,
            out,
        } => sample(&domain, &method, n, k, seed.resolve()?, synthetic, noise, &out),
        Command::Fit {
            data,
            hp,
            solver,
            out,
        } => fit_cmd(&data, hp.as_deref(), &solver, &out),
        Command::Hyperopt {
            data,
            space,
            r,
            solver,
            seed,
            with_variance_finals,
            trace,
            out,
        } => hyperopt_cmd(
            &data,
            space.as_deref(),
            r,
            &solver,
            seed.resolve()?,
            with_variance_finals,
            trace.as_deref(),
            &out,
        ),
        Command::Loo {
            data,
            hp,
            solver,
            with_variance,
            report,
        } => loo_cmd(&data, hp.as_deref(), &solver, with_variance, &report),
        Command::BlockFit {
            data,
            dims,
            blocks,
            overlap,
            r,
            solver,
            seed,
            report,
            out,
        } => block_fit_cmd(
            &data,
            &dims,
            &blocks,
            overlap,
            r,
            &solver,
            seed.resolve()?,
            report.as_deref(),
            &out,
        ),
        Command::Bench {
            data,
            compare,
            dims,
            r,
            seed,
            report,
        } => bench_cmd(&data, &compare, dims.as_deref(), r, seed.resolve()?, &report),
        Command::Sweep {
            model,
            domain,
            n,
            seed,
            out,
        } => sweep_cmd(&model, &domain, n, seed.resolve()?, &out),
        Command::Inverse {
            sweep,
            target,
            delta,
            out,
        } => inverse_cmd(&sweep, target, delta, &out),
        Command::Som {
            data,
            grid,
            preset,
            weights,
            seed,
            target,
            delta,
            stats,
            model,
        } => som_cmd(
            &data,
            grid.as_deref(),
            preset.as_deref(),
            weights.as_deref(),
            seed.resolve()?,
            target,
            delta,
            &stats,
            model.as_deref(),
        ),
        Command::Parplot { data, order, out } => parplot_cmd(&data, order.as_deref(), &out),
        Command::Heatmap {
            stats,
            quantity,
            out,
        } => heatmap_cmd(&stats, &quantity, &out),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Schema used when none is given: every column but the last is an input and
/// the last is the output.
fn sniff_schema(data: &Path) -> Result<DatasetSchema, CliError> {
    let mut reader = csv::Reader::from_path(data)
        .map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least one input and one output column",
            data.display()
        )));
    }
    let output = headers.last().unwrap().clone();
    let inputs = headers[..headers.len() - 1].to_vec();
    Ok(DatasetSchema::new(inputs, output))
}

fn load_data(args: &DataArgs) -> Result<(Dataset, DatasetSchema), CliError> {
    let schema = match &args.schema {
        Some(path) => read_json(path)?,
        None => sniff_schema(&args.data)?,
    };
    let ds = load_dataset(&args.data, &schema)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows",
            args.data.display()
        )));
    }
    Ok((ds, schema))
}

fn parse_solver(args: &SolverArgs) -> Result<SolverConfig, CliError> {
    let mut cfg = match args.solver.as_str() {
        "direct" => SolverConfig::direct(),
        "cg" => SolverConfig::cg(args.cg_eps, args.cg_maxiter),
        other => return Err(CliError::Usage(format!("unknown solver '{other}'"))),
    };
    cfg.taper = match args.taper.as_str() {
        "none" => TaperSpec::None,
        spec => match spec.strip_prefix("wendland1:").map(str::parse::<f64>) {
            Some(Ok(theta)) if theta > 0.0 => TaperSpec::Wendland1 { theta },
            _ => {
                return Err(CliError::Usage(format!(
                    "taper must be 'none' or 'wendland1:THETA', got '{spec}'"
                )))
            }
        },
    };
    Ok(cfg)
}

/// Accepts a truncated CG iterate, matching how the search pipeline treats
/// capped folds; everything else stays fatal.
fn fit_accepting_cg(
    ds: &Dataset,
    hp: &Hyperparameters,
    solver: &SolverConfig,
) -> Result<GpModel, CliError> {
    match fit(ds, hp, solver) {
        Ok(m) => Ok(m),
        Err(GpError::CgNotConverged {
            model,
            iterations,
            residual,
            ..
        }) => {
            eprintln!(
                "warning: cg stopped at the {iterations}-iteration cap (residual {residual:.3e}); keeping the final iterate"
            );
            Ok(*model)
        }
        Err(e) => Err(e.into()),
    }
}

fn resolve_hp(
    ds: &Dataset,
    hp_path: Option<&Path>,
) -> Result<Hyperparameters, CliError> {
    match hp_path {
        Some(path) => read_json(path),
        None => Ok(default_hyperparameters(ds)),
    }
}

#[allow(clippy::too_many_arguments)]
fn sample(
    domain: &Path,
    method: &str,
    n: usize,
    k: usize,
    seed: u64,
    synthetic: bool,
    noise: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let dom: Domain = read_json(domain)?;
    dom.validate()?;
    let method = match method {
        "stratified" => SampleMethod::Stratified,
        "best-candidate" => SampleMethod::BestCandidate,
        other => return Err(CliError::Usage(format!("unknown method '{other}'"))),
    };
    if synthetic {
        if dom.dim() != 4 {
            return Err(CliError::Usage(
                "--synthetic needs the four-dimensional process domain".into(),
            ));
        }
        let ds = surro_core::explore::synthetic_dataset(&dom, method, n, seed, noise)?;
        write_dataset_csv(out, &ds, "depth")?;
        println!("wrote {} rows to {}", ds.len(), out.display());
        return Ok(());
    }
    if noise.is_some() {
        return Err(CliError::Usage("--noise needs --synthetic".into()));
    }
    let set = match method {
        SampleMethod::Stratified => stratified_sample(&dom, seed)?,
        SampleMethod::BestCandidate => best_candidate_sample(&dom, n, k, seed, None)?,
    };
    let mut writer = csv::Writer::from_path(out)?;
    writer.write_record(dom.names())?;
    for p in &set.points {
        writer.write_record(p.iter().map(|v| format!("{v}")))?;
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote {} rows to {}", set.points.len(), out.display());
    Ok(())
}

fn fit_cmd(
    data: &DataArgs,
    hp_path: Option<&Path>,
    solver: &SolverArgs,
    out: &Path,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    let hp = resolve_hp(&ds, hp_path)?;
    let solver = parse_solver(solver)?;
    let model = fit_accepting_cg(&ds, &hp, &solver)?;
    save_model(out, ModelKind::Gp(model.to_data()))?;
    println!("fitted {} instances, model -> {}", ds.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn hyperopt_cmd(
    data: &DataArgs,
    space_path: Option<&Path>,
    r: usize,
    solver: &SolverArgs,
    seed: u64,
    with_variance_finals: bool,
    trace_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    let solver = parse_solver(solver)?;
    let space = match space_path {
        Some(p) => read_json(p)?,
        None => default_hyperparam_space(ds.dim(), ds.output_std()),
    };
    let cfg = SearchConfig {
        space,
        r,
        solver: solver.clone(),
        seed,
        with_variance_finals,
    };
    let (best_hp, trace) = random_search(&ds, &cfg)?;
    if let Some(path) = trace_path {
        let file = File::create(path)?;
        trace.write_csv(file, &ds.feature_names)?;
    }
    let model = fit_accepting_cg(&ds, &best_hp, &solver)?;
    save_model(out, ModelKind::Gp(model.to_data()))?;
    println!(
        "best candidate {} of {}: mae {:.6e} ({:.1} s, {} model builds)",
        trace.best_index,
        r,
        trace.best().mae,
        trace.total_time_s,
        trace.model_builds
    );
    Ok(())
}

fn loo_cmd(
    data: &DataArgs,
    hp_path: Option<&Path>,
    solver: &SolverArgs,
    with_variance: bool,
    report: &Path,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    let hp = resolve_hp(&ds, hp_path)?;
    let solver = parse_solver(solver)?;
    let opts = LooOptions {
        with_variance,
        ..LooOptions::default()
    };
    let rep = loo_evaluate_with(&ds, &hp, &solver, &opts)?;
    let mut writer = csv::Writer::from_path(report)?;
    writer.write_record(["index", "actual", "predicted", "variance"])?;
    for p in &rep.per_point {
        writer.write_record([
            p.index.to_string(),
            format!("{}", p.actual),
            format!("{}", p.predicted),
            p.variance.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;
    println!("mae {:.6e} over {} folds ({:.1} s)", rep.mae, rep.per_point.len(), rep.wall_time_s);
    Ok(())
}

fn dim_indices(ds: &Dataset, names: &[String]) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|name| {
            ds.feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CliError::Usage(format!("unknown variable '{name}'")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn block_fit_cmd(
    data: &DataArgs,
    dims: &[String],
    blocks: &[usize],
    overlap: f64,
    r: usize,
    solver: &SolverArgs,
    seed: u64,
    report: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    if dims.is_empty() {
        return Err(CliError::Usage("--dims is required".into()));
    }
    if blocks.len() != dims.len() {
        return Err(CliError::Usage(
            "--blocks must list one count per --dims entry".into(),
        ));
    }
    let solver = parse_solver(solver)?;
    let mut spec = BlockSpec::new(dim_indices(&ds, dims)?, blocks.to_vec());
    spec.overlap_fraction = overlap;
    let part = partition(&ds, &spec)?;
    let search = SearchConfig {
        space: default_hyperparam_space(ds.dim(), ds.output_std()),
        r,
        solver,
        seed,
        with_variance_finals: false,
    };
    let candidates = hyperparam_candidates(&search.space, r, seed)?;
    let model = fit_blocks_with_candidates(&ds, &part, &candidates, &search)?;

    let mut table = String::new();
    let mut header = vec![
        "block".to_string(),
        "code".into(),
        "size".into(),
        "time_s".into(),
        "sigma_f".into(),
        "sigma_n".into(),
    ];
    header.extend(ds.feature_names.iter().map(|n| format!("lambda_{n}")));
    header.push("mae".into());
    table.push_str(&header.join("\t"));
    table.push('\n');
    for s in &model.summaries {
        let mut cols = vec![
            s.block.to_string(),
            s.code.clone(),
            s.size.to_string(),
            format!("{:.3}", s.wall_time_s),
            format!("{:.3e}", s.hp.sigma_f),
            format!("{:.3e}", s.hp.sigma_n),
        ];
        cols.extend(s.hp.length_scales.iter().map(|l| format!("{l:.3}")));
        cols.push(format!("{:.3e}", s.mae));
        table.push_str(&cols.join("\t"));
        table.push('\n');
    }
    match report {
        Some(path) => std::fs::write(path, &table)?,
        None => print!("{table}"),
    }
    save_model(out, ModelKind::Block(model.to_data()))?;
    println!(
        "fitted {} blocks in {:.1} s, model -> {}",
        model.partition.spec.total_blocks(),
        model.total_block_time_s(),
        out.display()
    );
    Ok(())
}

fn bench_cmd(
    data: &DataArgs,
    compare: &[String],
    dims: Option<&str>,
    r: usize,
    seed: u64,
    report: &Path,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    if compare.is_empty() {
        return Err(CliError::Usage("--compare needs at least one entry".into()));
    }
    let space = default_hyperparam_space(ds.dim(), ds.output_std());
    let candidates = hyperparam_candidates(&space, r, seed)?;

    struct Row {
        name: String,
        time_s: f64,
        mae: f64,
    }
    let mut rows: Vec<Row> = Vec::new();

    for entry in compare {
        if entry == "full" {
            let (_, trace) =
                search_with_candidates(&ds, &candidates, &SolverConfig::direct(), false)?;
            rows.push(Row {
                name: entry.clone(),
                time_s: trace.total_time_s,
                mae: trace.best().mae,
            });
        } else if let Some(b) = entry.strip_prefix("block:") {
            let b: usize = b
                .parse()
                .map_err(|_| CliError::Usage(format!("bad block count in '{entry}'")))?;
            let dim = match dims {
                Some(name) => dim_indices(&ds, &[name.to_string()])?[0],
                None => {
                    // lowest pooled within-block spread wins
                    let scores = surro_core::blockgp::dim_spread_scores(&ds, b);
                    scores
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap()
                }
            };
            let spec = BlockSpec::new(vec![dim], vec![b]);
            let part = partition(&ds, &spec)?;
            let search = SearchConfig {
                space: space.clone(),
                r,
                solver: SolverConfig::direct(),
                seed,
                with_variance_finals: false,
            };
            let model = fit_blocks_with_candidates(&ds, &part, &candidates, &search)?;
            let n: usize = model.partition.block_sizes.iter().sum();
            let mae = model
                .summaries
                .iter()
                .map(|s| s.mae * s.size as f64)
                .sum::<f64>()
                / n as f64;
            rows.push(Row {
                name: entry.clone(),
                time_s: model.total_block_time_s(),
                mae,
            });
            // echo the per-block view, including speedup once full has run
            if let Some(full) = rows.iter().find(|r| r.name == "full") {
                let rep = speedup_report(full.time_s, full.mae, &model, &ds.feature_names);
                eprint!("{}", rep.render_table(&ds.feature_names));
            }
        } else if let Some(rest) = entry.strip_prefix("cg:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let (eps, cap) = match parts.as_slice() {
                [eps, cap] => (
                    eps.parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad epsilon in '{entry}'")))?,
                    cap.parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("bad cap in '{entry}'")))?,
                ),
                _ => {
                    return Err(CliError::Usage(format!(
                        "cg entry must look like cg:EPS:CAP, got '{entry}'"
                    )))
                }
            };
            let (_, trace) =
                search_with_candidates(&ds, &candidates, &SolverConfig::cg(eps, cap), false)?;
            rows.push(Row {
                name: entry.clone(),
                time_s: trace.total_time_s,
                mae: trace.best().mae,
            });
        } else {
            return Err(CliError::Usage(format!("unknown comparison '{entry}'")));
        }
    }

    let full_time = rows.iter().find(|r| r.name == "full").map(|r| r.time_s);
    let mut writer = csv::Writer::from_path(report)?;
    writer.write_record(["name", "time_s", "mae", "speedup_vs_full"])?;
    for row in &rows {
        writer.write_record([
            row.name.clone(),
            format!("{}", row.time_s),
            format!("{}", row.mae),
            full_time
                .map(|t| format!("{}", t / row.time_s))
                .unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;
    for row in &rows {
        println!("{}: {:.2} s, mae {:.4e}", row.name, row.time_s, row.mae);
    }
    Ok(())
}

fn sweep_cmd(
    model: &Path,
    domain: &Path,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let model = load_model(model)?;
    let dom: Domain = read_json(domain)?;
    dom.validate()?;
    let ds = dense_sweep(&model, &dom, n, seed)?;
    write_dataset_csv(out, &ds, "prediction")?;
    println!("swept {} points -> {}", ds.len(), out.display());
    Ok(())
}

fn inverse_cmd(sweep: &Path, target: f64, delta: f64, out: &Path) -> Result<(), CliError> {
    if delta < 0.0 {
        return Err(CliError::Usage("--delta must be nonnegative".into()));
    }
    let schema = sniff_schema(sweep)?;
    let ds = load_dataset(sweep, &schema)?;
    let sol = filter_solution(&ds, target, delta);
    write_dataset_csv(out, &sol.dataset, &schema.output)?;
    println!(
        "kept {} of {} rows in [{}, {}]",
        sol.dataset.len(),
        ds.len(),
        target - delta,
        target + delta
    );
    Ok(())
}

fn parse_grid(grid: &str) -> Result<(usize, usize), CliError> {
    let (nx, ny) = grid
        .split_once('x')
        .ok_or_else(|| CliError::Usage(format!("grid must look like NXxNY, got '{grid}'")))?;
    let parse = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| CliError::Usage(format!("bad grid size '{grid}'")))
    };
    Ok((parse(nx)?, parse(ny)?))
}

fn write_stats_csv(path: &Path, stats: &[NodeStats]) -> Result<(), CliError> {
    let d = stats.first().map_or(0, |s| s.weights.len());
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "row".to_string(),
        "col".into(),
        "count".into(),
        "mean".into(),
        "inrange".into(),
    ];
    header.extend((0..d).map(|m| format!("w{m}")));
    writer.write_record(&header)?;
    for s in stats {
        let mut rec = vec![
            s.row.to_string(),
            s.col.to_string(),
            s.count.to_string(),
            s.mean_output.map(|m| format!("{m}")).unwrap_or_default(),
            s.in_range.to_string(),
        ];
        rec.extend(s.weights.iter().map(|w| format!("{w}")));
        writer.write_record(&rec)?;
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

fn read_stats_csv(path: &Path) -> Result<Vec<NodeStats>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    for (i, want) in ["row", "col", "count", "mean", "inrange"].iter().enumerate() {
        if headers.get(i).map(String::as_str) != Some(*want) {
            return Err(CliError::Data(format!(
                "{}: expected column {i} to be '{want}'",
                path.display()
            )));
        }
    }
    let mut stats = Vec::new();
    for (row_i, record) in reader.records().enumerate() {
        let record = record?;
        let line = row_i + 2;
        let cell = |i: usize| -> Result<&str, CliError> {
            record.get(i).ok_or_else(|| {
                CliError::Data(format!("{}: short row at line {line}", path.display()))
            })
        };
        let parse_usize = |i: usize| -> Result<usize, CliError> {
            cell(i)?.parse().map_err(|_| {
                CliError::Data(format!("{}: bad integer at line {line}", path.display()))
            })
        };
        let parse_f64 = |s: &str| -> Result<f64, CliError> {
            s.parse().map_err(|_| {
                CliError::Data(format!("{}: bad number at line {line}", path.display()))
            })
        };
        let mean = cell(3)?;
        let mean_output = if mean.is_empty() {
            None
        } else {
            Some(parse_f64(mean)?)
        };
        let weights = (5..record.len())
            .map(|i| parse_f64(cell(i).unwrap()))
            .collect::<Result<Vec<_>, _>>()?;
        stats.push(NodeStats {
            row: parse_usize(0)?,
            col: parse_usize(1)?,
            count: parse_usize(2)?,
            mean_output,
            in_range: parse_usize(4)?,
            weights,
        });
    }
    Ok(stats)
}

/// Distance weights for the SOM: either a bare JSON array of per-dimension
/// multipliers, or a saved GP model whose inverse length scales are taken.
fn load_dist_weights(path: &Path, d: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let weights = if let Ok(w) = serde_json::from_str::<Vec<f64>>(&text) {
        w
    } else {
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        match file.model {
            ModelKind::Gp(gp) => gp
                .hyperparameters
                .length_scales
                .iter()
                .map(|l| 1.0 / l)
                .collect(),
            ModelKind::Block(_) => {
                return Err(CliError::Usage(
                    "--weights needs a plain GP model, not a block model".into(),
                ))
            }
        }
    };
    if weights.len() != d {
        return Err(CliError::Data(format!(
            "--weights has {} entries but the data has {d} inputs",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(CliError::Data(format!(
            "--weights entries must be finite and positive, got {w}"
        )));
    }
    Ok(weights)
}

#[allow(clippy::too_many_arguments)]
fn som_cmd(
    data: &DataArgs,
    grid: Option<&str>,
    preset: Option<&str>,
    weights: Option<&str>,
    seed: u64,
    target: Option<f64>,
    delta: Option<f64>,
    stats_path: &Path,
    model_path: Option<&Path>,
) -> Result<(), CliError> {
    let (ds, _) = load_data(data)?;
    let scaled = scale_features(&ds);
    let dist_weights = match weights {
        None | Some("none") => None,
        Some(path) => Some(load_dist_weights(Path::new(path), ds.dim())?),
    };

    let (grid_size, mut cfg) = match preset {
        Some("30x30") => ((30, 30), SomConfig::preset_30x30(seed)),
        Some("10x10") => ((10, 10), SomConfig::preset_10x10(seed)),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown preset '{other}' (expected 30x30 or 10x10)"
            )))
        }
        None => {
            let (nx, ny) = parse_grid(
                grid.ok_or_else(|| CliError::Usage("need --grid or --preset".into()))?,
            )?;
            let r_max = (nx.max(ny) as f64 * 2.0 / 3.0).max(1.0);
            (
                (nx, ny),
                SomConfig {
                    r_max,
                    r_min: 1.0,
                    r_iter: 100,
                    iter_max: 120,
                    dist_weights: None,
                    seed,
                },
            )
        }
    };
    cfg.dist_weights = dist_weights;
    // explicit --grid overrides a preset's grid but keeps its schedule
    let (nx, ny) = match (grid, preset) {
        (Some(g), Some(_)) => parse_grid(g)?,
        _ => grid_size,
    };
    cfg.seed = seed;
    let model = batch_train(&scaled, &HexGrid::new(nx, ny), &cfg);

    let range = match (target, delta) {
        (Some(t), Some(d)) if d >= 0.0 => Some((t - d, t + d)),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "--target and --delta must be given together (delta >= 0)".into(),
            ))
        }
    };
    let stats = node_stats(&model, &scaled, &ds.outputs, range);
    write_stats_csv(stats_path, &stats)?;
    if let Some(path) = model_path {
        std::fs::write(path, serde_json::to_string_pretty(&model)?)?;
    }
    println!(
        "{} nodes, final convergence metric {:.6e}",
        model.grid.node_count(),
        convergence_metric(&model, &scaled)
    );
    Ok(())
}

fn parplot_cmd(data: &Path, order: Option<&[String]>, out: &Path) -> Result<(), CliError> {
    let schema = sniff_schema(data)?;
    let ds = load_dataset(data, &schema)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", data.display())));
    }
    let axis_order = match order {
        Some(names) => dim_indices(&ds, names)?,
        None => (0..ds.dim()).collect(),
    };
    parallel_coords_export(&ds, &axis_order, out)?;
    println!("{} polylines -> {}", ds.len(), out.display());
    Ok(())
}

fn heatmap_cmd(stats: &Path, quantity: &str, out: &Path) -> Result<(), CliError> {
    let stats = read_stats_csv(stats)?;
    let quantity = match quantity {
        "count" => HeatmapQuantity::Count,
        "mean" => HeatmapQuantity::MeanOutput,
        "inrange" => HeatmapQuantity::InRange,
        other => match other.strip_prefix("weight:").map(str::parse::<usize>) {
            Some(Ok(dim)) => HeatmapQuantity::Weight(dim),
            _ => {
                return Err(CliError::Usage(format!(
                    "quantity must be weight:DIM, count, mean, or inrange; got '{other}'"
                )))
            }
        },
    };
    som_heatmap_export(&stats, quantity, out)?;
    println!("{} hexagons -> {}", stats.len(), out.display());
    Ok(())
}
