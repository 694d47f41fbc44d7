//! Subcommand implementations.

use crate::{
    BenchmarkArgs, CalibrateArgs, CliError, EvaluateArgs, GridArgs, ModelArgs, PredictArgs,
    SimulateArgs, TrainArgs,
};
use dsurv::baselines::kaplan_meier;
use dsurv::datagen::{bootstrap_resample, simulate as run_simulation, GroupDist, SimSpec};
use dsurv::dataio::{load_dataset, write_dataset, Dataset, DatasetSchema};
use dsurv::metrics::{brier_censored, c_index, calibration_table};
use dsurv::model_io::{load_model, save_model};
use dsurv::nnet::{forward, layer_stack, select_l2, train as fit, HeadKind, TrainConfig};
use dsurv::{ModelParams, SurvivalCurve, TimeGrid};
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

type Result<T> = std::result::Result<T, CliError>;

fn parse_group(spec: &str) -> Result<(f64, GroupDist)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let usage = || {
        CliError::usage(format!(
            "bad group spec `{spec}`; expected FRACTION:exponential:MEDIAN or FRACTION:weibull:SCALE:SHAPE"
        ))
    };
    let fraction: f64 = parts
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(usage)?;
    match parts.get(1) {
        Some(&"exponential") if parts.len() == 3 => {
            let median = parts[2].parse().map_err(|_| usage())?;
            Ok((fraction, GroupDist::Exponential { median_days: median }))
        }
        Some(&"weibull") if parts.len() == 4 => {
            let scale = parts[2].parse().map_err(|_| usage())?;
            let shape = parts[3].parse().map_err(|_| usage())?;
            Ok((fraction, GroupDist::Weibull { scale_days: scale, shape }))
        }
        _ => Err(usage()),
    }
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut fractions = Vec::new();
    let mut dists = Vec::new();
    for spec in &args.groups {
        let (fraction, dist) = parse_group(spec)?;
        fractions.push(fraction);
        dists.push(dist);
    }
    let records = run_simulation(&SimSpec {
        n_subjects: args.subjects,
        group_fractions: fractions,
        group_dists: dists,
        censor_halflife: args.censor_halflife,
        rng_seed: args.seed,
    })?;
    let events = records.iter().filter(|r| r.event).count();
    let dataset = Dataset {
        records,
        feature_names: vec!["group".into()],
    };
    write_dataset(&args.out, &dataset)?;
    println!(
        "wrote {} subjects ({} events) to {}",
        dataset.len(),
        events,
        args.out.display()
    );
    Ok(())
}

fn load(data: &Path, schema: &Option<PathBuf>) -> Result<Dataset> {
    let schema = match schema {
        Some(path) => DatasetSchema::from_json_file(path)?,
        None => {
            // Convention schema: header names `time` and `event`, everything
            // else a median-imputed feature.
            use std::io::BufRead;
            let file = std::fs::File::open(data).map_err(dsurv::Error::from)?;
            let mut header = String::new();
            std::io::BufReader::new(file)
                .read_line(&mut header)
                .map_err(dsurv::Error::from)?;
            let names: Vec<String> = header
                .trim_end()
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            DatasetSchema::from_header(&names)?
        }
    };
    let (dataset, report) = load_dataset(data, &schema)?;
    report_ingestion(&report);
    Ok(dataset)
}

fn report_ingestion(report: &dsurv::dataio::IngestReport) {
    for (name, count) in &report.imputed {
        eprintln!("note: imputed {count} missing value(s) in `{name}`");
    }
    for (name, fraction) in &report.dropped {
        eprintln!(
            "note: dropped `{name}` ({:.0}% missing, above the schema threshold)",
            fraction * 100.0
        );
    }
}

fn build_grid(args: &GridArgs) -> Result<TimeGrid> {
    let grid = match args.grid_scheme.as_str() {
        "uniform" => {
            let width = args
                .width
                .ok_or_else(|| CliError::usage("uniform grid needs --width"))?;
            let horizon = args
                .horizon
                .ok_or_else(|| CliError::usage("uniform grid needs --horizon"))?;
            TimeGrid::uniform(width, horizon)?
        }
        "halflife" => {
            let count = args
                .intervals
                .ok_or_else(|| CliError::usage("half-life grid needs --intervals"))?;
            match (args.halflife, args.horizon) {
                (Some(halflife), _) => TimeGrid::halflife(halflife, count)?,
                (None, Some(horizon)) => TimeGrid::halflife_spanning(horizon, count)?,
                (None, None) => {
                    return Err(CliError::usage(
                        "half-life grid needs --halflife or --horizon",
                    ))
                }
            }
        }
        "explicit" => {
            let list = args
                .boundaries
                .as_ref()
                .ok_or_else(|| CliError::usage("explicit grid needs --boundaries"))?;
            let uppers = parse_float_list(list)?;
            TimeGrid::from_boundaries(uppers)?
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown grid scheme `{other}`; expected uniform, halflife, or explicit"
            )))
        }
    };
    Ok(grid)
}

fn parse_float_list(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("cannot parse `{s}` as a number")))
        })
        .collect()
}

fn parse_usize_list(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("cannot parse `{s}` as an integer")))
        })
        .collect()
}

fn head_kind(model: &ModelArgs) -> Result<HeadKind> {
    match model.head.as_str() {
        "flexible" => Ok(HeadKind::Flexible),
        "prophaz" | "proportional-hazards" => Ok(HeadKind::ProportionalHazards),
        other => Err(CliError::usage(format!(
            "unknown head `{other}`; expected flexible or prophaz"
        ))),
    }
}

fn covariate_matrix(dataset: &Dataset) -> Array2<f64> {
    let dim = dataset.feature_names.len();
    Array2::from_shape_fn((dataset.len(), dim), |(i, j)| {
        dataset.records[i].covariates[j]
    })
}

pub fn train(args: TrainArgs) -> Result<()> {
    let dataset = load(&args.data, &args.schema)?;
    let grid = build_grid(&args.grid)?;
    let head = head_kind(&args.model)?;
    let hidden = parse_usize_list(&args.model.hidden)?;
    let specs = layer_stack(dataset.feature_names.len(), &hidden, head, grid.len());

    let mut config = TrainConfig {
        epochs: args.fit.epochs,
        batch_size: args.fit.batch_size,
        learning_rate: args.fit.learning_rate,
        rmsprop_decay: args.fit.rmsprop_decay,
        rmsprop_epsilon: args.fit.rmsprop_epsilon,
        l2_strength: args.fit.l2,
        rng_seed: args.fit.seed,
    };

    if let Some(candidates) = &args.fit.l2_candidates {
        let lambdas = parse_float_list(candidates)?;
        let selection = select_l2(
            &dataset.records,
            &grid,
            &specs,
            &config,
            &lambdas,
            args.fit.cv_folds,
        )?;
        for (lambda, score) in &selection.scores {
            println!("l2 {lambda}: mean held-out log-likelihood {score:.4}");
        }
        println!("selected l2 strength {}", selection.chosen);
        config.l2_strength = selection.chosen;
    }

    let output = fit(&dataset.records, &grid, &specs, &config)?;
    save_model(&args.model_out, &output.params)?;
    println!(
        "trained {} epochs; final loss {:.6}; model written to {}",
        output.trace.len(),
        output.trace.last().copied().unwrap_or(f64::NAN),
        args.model_out.display()
    );

    if let Some(trace_path) = &args.trace_out {
        let mut text = String::from("epoch,loss\n");
        for (epoch, loss) in output.trace.iter().enumerate() {
            let _ = writeln!(text, "{epoch},{loss}");
        }
        std::fs::write(trace_path, text).map_err(dsurv::Error::from)?;
    }
    Ok(())
}

fn predict_curves(model: &ModelParams, dataset: &Dataset) -> Result<Vec<SurvivalCurve>> {
    if dataset.feature_names.len() != model.input_dim() {
        return Err(CliError::Lib(dsurv::Error::ShapeMismatch(format!(
            "dataset has {} features but the model expects {}",
            dataset.feature_names.len(),
            model.input_dim()
        ))));
    }
    Ok(forward(model, &covariate_matrix(dataset))?)
}

fn brier_label(t: f64) -> String {
    if t == 182.0 {
        "6 months".into()
    } else if t == 365.0 {
        "1 year".into()
    } else if t == 1095.0 {
        "3 years".into()
    } else {
        format!("day {t}")
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let dataset = load(&args.data, &args.schema)?;
    let model = load_model(&args.model)?;
    let curves = predict_curves(&model, &dataset)?;
    let grid = model.grid();
    let times = dataset.times();
    let events = dataset.events();

    let risk: Result<Vec<f64>> = curves
        .iter()
        .map(|c| Ok(1.0 - c.survival_at(grid, args.rank_horizon)?))
        .collect();
    let risk = risk?;
    let c = c_index(&risk, &times, &events)?;
    println!("C-index (risk = 1 - S({})): {c:.4}", args.rank_horizon);
    let mut metrics_text = String::from("metric,time,value\n");
    let _ = writeln!(metrics_text, "c_index,{},{c}", args.rank_horizon);

    let eval_times = parse_float_list(&args.times)?;
    let mut calibration_text = String::from("time,bin,count,mean_predicted,actual\n");
    for &t in &eval_times {
        let pred: Result<Vec<f64>> = curves.iter().map(|c| Ok(c.survival_at(grid, t)?)).collect();
        let pred = pred?;
        let brier = brier_censored(&pred, &times, &events, t)?;
        println!("Brier score at {}: {brier:.4}", brier_label(t));
        let _ = writeln!(metrics_text, "brier,{t},{brier}");

        let table = calibration_table(&pred, &times, &events, t, args.groups)?;
        for row in &table.rows {
            let actual = row
                .actual
                .map(|a| a.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                calibration_text,
                "{t},{},{},{},{actual}",
                row.bin, row.count, row.mean_predicted
            );
        }
    }
    if let Some(path) = &args.calibration_out {
        std::fs::write(path, calibration_text).map_err(dsurv::Error::from)?;
        println!("calibration tables written to {}", path.display());
    }
    if let Some(path) = &args.metrics_out {
        std::fs::write(path, metrics_text).map_err(dsurv::Error::from)?;
        println!("metric summary written to {}", path.display());
    }
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let dataset = load(&args.data, &args.schema)?;
    let model = load_model(&args.model)?;
    let curves = predict_curves(&model, &dataset)?;

    let mut text = String::new();
    let mut header: Vec<String> = model
        .grid()
        .uppers()
        .iter()
        .map(|t| format!("S_{t}"))
        .collect();
    header.insert(0, "subject".into());
    text.push_str(&header.join(","));
    text.push('\n');
    for (i, curve) in curves.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(curve.cum_surv.iter().map(|v| v.to_string()));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&args.out, text).map_err(dsurv::Error::from)?;
    println!(
        "wrote {} survival curves ({} intervals) to {}",
        curves.len(),
        model.grid().len(),
        args.out.display()
    );
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let dataset = load(&args.data, &args.schema)?;
    let model = load_model(&args.model)?;
    let curves = predict_curves(&model, &dataset)?;
    let pred: Result<Vec<f64>> = curves
        .iter()
        .map(|c| Ok(c.survival_at(model.grid(), args.time)?))
        .collect();
    let pred = pred?;
    let table = calibration_table(&pred, &dataset.times(), &dataset.events(), args.time, args.groups)?;

    let mut text = String::from("bin,count,mean_predicted,actual\n");
    for row in &table.rows {
        let actual = row.actual.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(text, "{},{},{},{actual}", row.bin, row.count, row.mean_predicted);
    }
    std::fs::write(&args.out, text).map_err(dsurv::Error::from)?;

    // A group-level sanity line: cohort-wide actual survival at t.
    let km = kaplan_meier(&dataset.times(), &dataset.events())?;
    println!(
        "calibration at day {}: cohort Kaplan-Meier {:.4}; table written to {}",
        args.time,
        km.eval(args.time),
        args.out.display()
    );
    Ok(())
}

pub fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let dataset = load(&args.data, &args.schema)?;
    let grid = build_grid(&args.grid)?;
    let head = head_kind(&args.model)?;
    let hidden = parse_usize_list(&args.model.hidden)?;
    let specs = layer_stack(dataset.feature_names.len(), &hidden, head, grid.len());
    let config = TrainConfig {
        epochs: args.fit.epochs,
        batch_size: args.fit.batch_size,
        learning_rate: args.fit.learning_rate,
        rmsprop_decay: args.fit.rmsprop_decay,
        rmsprop_epsilon: args.fit.rmsprop_epsilon,
        l2_strength: args.fit.l2,
        rng_seed: args.fit.seed,
    };
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }

    // Sizes 10^3, 10^3.5, ... up to --max-size.
    let mut sizes = Vec::new();
    let mut exponent = 3.0;
    loop {
        let size = 10f64.powf(exponent).round() as usize;
        if size > args.max_size {
            break;
        }
        sizes.push(size);
        exponent += 0.5;
    }
    if sizes.is_empty() {
        return Err(CliError::usage(
            "--max-size must be at least 1000 to benchmark one size",
        ));
    }

    let mut out_text = String::from("size,mean_seconds\n");
    println!("size,mean_seconds");
    for (k, &size) in sizes.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..args.reps {
            let resampled = bootstrap_resample(
                &dataset.records,
                size,
                args.fit.seed ^ (1000 + (k * args.reps + rep) as u64),
            )?;
            let started = Instant::now();
            fit(&resampled, &grid, &specs, &config)?;
            total += started.elapsed().as_secs_f64();
        }
        let mean = total / args.reps as f64;
        println!("{size},{mean:.4}");
        let _ = writeln!(out_text, "{size},{mean:.6}");
    }
    if let Some(path) = &args.out {
        std::fs::write(path, out_text).map_err(dsurv::Error::from)?;
    }
    Ok(())
}
