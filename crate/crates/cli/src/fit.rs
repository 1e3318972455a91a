use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sareg::estim::data_grid;
use sareg::plugin::select_bandwidth;
use sareg::seq::DEFAULT_BANDWIDTH_EXPONENT;
use sareg::sim::fit_with;
use sareg::{gaussian_kernel, Dataset, Selection};
use serde_json::json;

use crate::ingest::read_columns;
use crate::svg::{render, Curve};
use crate::{usage, FitArgs};

fn check(args: &FitArgs) -> Result<()> {
    if args.grid_size < 2 {
        return Err(usage("--grid-size must be at least 2"));
    }
    if args.estimators.is_empty() {
        return Err(usage("--estimators must name at least one estimator"));
    }
    for (i, e) in args.estimators.iter().enumerate() {
        if args.estimators[..i].contains(e) {
            return Err(usage(format!("estimator {e} listed twice")));
        }
    }
    Ok(())
}

pub fn run(args: &FitArgs) -> Result<()> {
    check(args)?;
    let cols = read_columns(&args.input, &args.x_col, &args.y_col)?;
    if cols.rows_dropped > 0 {
        eprintln!("note: dropped {} of {} rows with missing or non-finite values", cols.rows_dropped, cols.rows_read);
    }

    // file order is the arrival order unless a shuffle is requested
    let mut order: Vec<usize> = (0..cols.xs.len()).collect();
    if let Some(seed) = args.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let data = Dataset::new(
        order.iter().map(|&i| cols.xs[i]).collect(),
        order.iter().map(|&i| cols.ys[i]).collect(),
    )?;
    let n = data.len();
    let kernel = gaussian_kernel();

    let selections: Vec<Selection> = args
        .estimators
        .iter()
        .map(|&e| select_bandwidth(&data, e, DEFAULT_BANDWIDTH_EXPONENT, &kernel))
        .collect::<sareg::Result<_>>()?;
    for s in selections.iter().filter(|s| s.fallback) {
        eprintln!(
            "warning: plug-in bandwidth undefined for {}; using the pilot scale {:.6}",
            s.plan.estimator, s.plan.coefficient
        );
    }
    let widest = selections
        .iter()
        .map(|s| s.plan.at(n))
        .collect::<sareg::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let grid = data_grid(data.xs(), widest, args.grid_size);
    let fits: Vec<Vec<f64>> = selections
        .iter()
        .map(|s| fit_with(&data, s.plan.estimator, s.plan.sequence(), &grid, &kernel))
        .collect::<sareg::Result<_>>()?;

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "fit".into());

    let csv_path = args.out_dir.join(format!("{stem}_fit.csv"));
    write_curves(&csv_path, &grid, &selections, &fits)?;

    let mut pairs: Vec<(f64, f64)> = data.iter().collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (sx, sy): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let curves: Vec<Curve> = selections
        .iter()
        .zip(&fits)
        .map(|(s, v)| Curve {
            label: s.plan.estimator.label(),
            values: v,
        })
        .collect();
    let svg_path = args.out_dir.join(format!("{stem}_fit.svg"));
    let title = format!("{} against {} (n = {n})", args.y_col, args.x_col);
    fs::write(&svg_path, render(&title, &sx, &sy, &grid, &curves))
        .with_context(|| format!("writing {}", svg_path.display()))?;

    let meta = json!({
        "command": "fit",
        "version": env!("CARGO_PKG_VERSION"),
        "input": args.input.display().to_string(),
        "x_col": args.x_col,
        "y_col": args.y_col,
        "shuffle": args.shuffle,
        "rows_read": cols.rows_read,
        "rows_dropped": cols.rows_dropped,
        "observations": n,
        "grid": { "lo": grid[0], "hi": grid[grid.len() - 1], "points": grid.len() },
        "fallbacks": selections.iter().filter(|s| s.fallback).count(),
        "estimators": selections.iter().map(|s| json!({
            "estimator": s.plan.estimator,
            "coefficient": s.plan.coefficient,
            "bandwidth": s.plan.at(n).ok(),
            "fallback": s.fallback,
            "functionals": s.functionals.as_ref().map(|f| f.values),
        })).collect::<Vec<_>>(),
        "outputs": { "csv": csv_path.display().to_string(), "svg": svg_path.display().to_string() },
    });
    let meta_path = args.out_dir.join(format!("{stem}_fit.json"));
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;

    for (s, v) in selections.iter().zip(&fits) {
        let mid = v[v.len() / 2];
        println!(
            "{:<11} h_n = {:.6}{}  r_n(mid grid) = {mid:.6}",
            s.plan.estimator.label(),
            s.plan.at(n)?,
            if s.fallback { " (fallback)" } else { "" }
        );
    }
    println!("wrote {}, {}, {}", csv_path.display(), svg_path.display(), meta_path.display());
    Ok(())
}

fn write_curves(path: &std::path::Path, grid: &[f64], selections: &[Selection], fits: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["grid".to_string()];
    header.extend(selections.iter().map(|s| s.plan.estimator.label().to_string()));
    w.write_record(&header)?;
    for (i, x) in grid.iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(fits.iter().map(|v| v[i].to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error())?.flush()?;
    Ok(())
}
