//! Noisy random-design data and the kernel estimator on a grid, compared
//! with the smoothed phantom it estimates.
//!
//! cargo run --release --example estimator

use expradon::io::write_grid;
use expradon::{estimate_grid, simulate, EstimatorConfig, NoiseModel, Phantom, SmoothedPhantom};

fn main() -> expradon::Result<()> {
    let mu = 0.5;
    let n = 200_000;
    let phantom = Phantom::bump([0.0, 0.0], 1.0, 1.0)?;
    let obs = simulate(&phantom, n, mu, NoiseModel::gaussian(0.05)?, 2024)?;
    let cfg = EstimatorConfig::for_mise(n as u64, mu, 2.0, 1.0)?;
    println!("n = {n}, bandwidth {:.4}", cfg.rho_n);

    let n_side = 32;
    let estimate = estimate_grid(&obs, &cfg, n_side)?;
    let oracle = SmoothedPhantom::new(&phantom, cfg.rho_n)?.image(n_side)?;
    let worst = estimate.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("peak estimate {:.4}, sup deviation from E f* {worst:.4}", estimate.max_abs());

    let path = std::env::temp_dir().join("estimate.grid");
    write_grid(&path, &estimate, false)?;
    println!("wrote {}", path.display());
    Ok(())
}
