//! A small Monte Carlo risk study with a log-log rate fit.
//!
//! cargo run --release --example risk_study

use expradon::{fit_rate, run_mise_study, Criterion, NoiseModel, Phantom, RiskStudyConfig};

fn main() -> expradon::Result<()> {
    let cfg = RiskStudyConfig {
        phantom: Phantom::bump([0.0, 0.0], 1.0, 1.0)?,
        mu: 0.5,
        noise: NoiseModel::gaussian(0.05)?,
        beta: 2.0,
        alpha: 1.0,
        n_values: vec![1_000, 4_000, 16_000, 64_000],
        trials: 10,
        x0: [0.1, 0.2],
        n_side: 24,
        master_seed: 1,
        criterion: Criterion::Mise,
    };
    let rows = run_mise_study(&cfg)?;
    println!("{:>7} {:>7} {:>10} {:>10} {:>10}", "n", "rho", "risk", "bias^2", "variance");
    for r in &rows {
        println!("{:>7} {:>7.4} {:>10.3e} {:>10.3e} {:>10.3e}", r.n, r.rho_n, r.risk, r.bias_sq, r.variance);
    }
    let fit = fit_rate(&rows, Criterion::Mise.theory_slope(cfg.beta))?;
    println!("slope {:.3} (theory {:.3}), R^2 {:.3}", fit.slope, fit.theory_slope, fit.r_squared);
    Ok(())
}
