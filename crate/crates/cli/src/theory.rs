use anyhow::Result;
use sareg::asymp::{mwise_ratio, optimal_h_coefficient, true_functionals};
use sareg::{gaussian_kernel, Estimator, KernelSpec, MwiseRatio, StepsizeConfig};

use crate::{usage, KernelChoice, TheoryArgs};

pub fn run(args: &TheoryArgs) -> Result<()> {
    let nothing_requested = !args.ratios && args.kernel.is_none() && !args.functionals;
    let kernel = match args.kernel {
        Some(KernelChoice::Gaussian) | None => gaussian_kernel(),
    };
    if args.kernel.is_some() || nothing_requested {
        print_kernel(&kernel);
    }
    if args.ratios || nothing_requested {
        print_ratios();
    }
    if args.functionals {
        let model = args.model.ok_or_else(|| usage("--functionals needs --model"))?;
        if !(args.sigma.is_finite() && args.sigma > 0.0) {
            return Err(usage(format!("--sigma must be positive, got {}", args.sigma)));
        }
        let f = true_functionals(&model.truth(args.sigma))?;
        println!("model {model}, sigma = {}", args.sigma);
        println!("I1 = {:.6}", f.i1);
        println!("I2 = {:.6}", f.i2);
        println!("I3 = {:.6}", f.i3);
        println!("I4 = {:.6}", f.i4);
        println!("I5 = {:.6}", f.i5);
        println!("I4-I5 = {:.6}", f.variance_term());
        println!("I1+I3-2I2 = {:.6}", f.curvature_term());
        println!("optimal h_n = C n^(-1/5):");
        for e in Estimator::ALL {
            let c = optimal_h_coefficient(&StepsizeConfig::standard(e), &f, &kernel)?;
            println!("  {:<11} C = {c:.6}", e.label());
        }
    }
    Ok(())
}

fn print_kernel(k: &KernelSpec) {
    println!("kernel {}", k.name());
    println!("R = {:.7}", k.roughness());
    println!("mu2 = {:.7}", k.mu2());
    println!("theta = {:.7}", k.theta());
}

fn print_ratios() {
    println!("optimal MWISE relative to Nadaraya-Watson:");
    for e in Estimator::RECURSIVE {
        match mwise_ratio(e) {
            MwiseRatio::Ratio(r) => println!("  {}: {r:.5}", e.label()),
            MwiseRatio::NotComparable => println!("  {}: not comparable", e.label()),
        }
    }
}
