use anyhow::{bail, Result};

use rarl_core::gradcheck::{gradcheck, Perturbation};

use crate::{GradcheckArgs, UsageError};

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let perturb = match &args.perturb {
        Some(p) => Some(p.parse::<Perturbation>().map_err(|e| UsageError(e.to_string()))?),
        None => None,
    };
    let reports = gradcheck(args.seed, perturb)?;
    println!("{:<34} {:>6} {:>14} {:>10}  result", "probe", "n", "max_rel_error", "tolerance");
    for r in &reports {
        println!(
            "{:<34} {:>6} {:>14.3e} {:>10.0e}  {}",
            r.name,
            r.probes,
            r.max_rel_error,
            r.tolerance,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if !failed.is_empty() {
        bail!("gradient check failed: {}", failed.join(", "));
    }
    Ok(())
}
