use std::fs::{self, File};
use std::io::BufWriter;

use anyhow::{Context, Result};
use sareg::sim::{run_experiment, SIGMA_RANGE};
use sareg::{gaussian_kernel, ResultTable, SimulationConfig};
use serde_json::json;

use crate::{usage, SimulateArgs};

fn check(args: &SimulateArgs) -> Result<()> {
    if let Some(s) = args.sigma.iter().find(|s| !(**s >= SIGMA_RANGE.0 && **s <= SIGMA_RANGE.1)) {
        return Err(usage(format!("--sigma values must lie in [0.1, 2], got {s}")));
    }
    if let Some(n) = args.n.iter().find(|n| **n < 4) {
        return Err(usage(format!("--n values must be at least 4, got {n}")));
    }
    if args.reps == 0 {
        return Err(usage("--reps must be positive"));
    }
    for (i, e) in args.estimators.iter().enumerate() {
        if args.estimators[..i].contains(e) {
            return Err(usage(format!("estimator {e} listed twice")));
        }
    }
    for (i, m) in args.model.iter().enumerate() {
        if args.model[..i].contains(m) {
            return Err(usage(format!("model {m} listed twice")));
        }
    }
    Ok(())
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    check(args)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let kernel = gaussian_kernel();
    let mut written = Vec::new();
    for &model in &args.model {
        let mut table = ResultTable::default();
        for &sigma in &args.sigma {
            for &n in &args.n {
                let mut config = SimulationConfig::new(model, sigma, n);
                config.replications = args.reps;
                config.seed = args.seed;
                config.estimators = args.estimators.clone();
                config.parallel = !args.sequential;
                table.extend(run_experiment(&config, &kernel)?);
            }
        }
        let path = args.out_dir.join(format!("simulate_{model}.csv"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        table.write_csv(BufWriter::new(file))?;
        print_summary(&table);
        written.push((model, path, table));
    }
    let meta = json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "config": {
            "models": args.model,
            "sigma": args.sigma,
            "n": args.n,
            "replications": args.reps,
            "seed": args.seed,
            "estimators": args.estimators,
            "parallel": !args.sequential,
        },
        "outputs": written.iter().map(|(m, p, t)| json!({
            "model": m,
            "csv": p.display().to_string(),
            "rows": t.len(),
            "fallbacks": t.rows.iter().map(|r| r.fallbacks).sum::<usize>(),
        })).collect::<Vec<_>>(),
    });
    let meta_path = args.out_dir.join("simulate.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing {}", meta_path.display()))?;
    for (_, p, _) in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(table: &ResultTable) {
    println!("{:<9} {:>5} {:>5} {:<11} {:>12} {:>10} {:>9}", "model", "sigma", "n", "estimator", "mse", "seconds", "fallbacks");
    for r in &table.rows {
        println!(
            "{:<9} {:>5} {:>5} {:<11} {:>12.4e} {:>10.3} {:>9}",
            r.model.name(),
            r.sigma,
            r.n,
            r.estimator.label(),
            r.mse,
            r.cpu_seconds,
            r.fallbacks
        );
    }
}
