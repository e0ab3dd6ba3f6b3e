//! Filtered backprojection of exponential Radon data: the result equals the
//! band-limited smoothing of the phantom and approaches it as rho shrinks.
//!
//! cargo run --release --example reconstruction

use expradon::{forward_sinogram, rasterize, reconstruct, FilterParams, ImageGrid, Phantom, SmoothedPhantom};

fn sup_in_ball(a: &ImageGrid, b: &ImageGrid) -> f64 {
    let n = a.n_side();
    (0..n * n)
        .filter(|i| {
            let x = a.center(i / n, i % n);
            x[0] * x[0] + x[1] * x[1] <= 1.0
        })
        .map(|i| (a.values()[i] - b.values()[i]).abs())
        .fold(0.0, f64::max)
}

fn main() -> expradon::Result<()> {
    let mu = 1.0;
    let n_side = 96;
    let phantom = Phantom::bump([0.1, 0.0], 0.8, 1.0)?;
    let g = forward_sinogram(&phantom, 540, 768, mu)?;
    let truth = rasterize(&phantom, n_side)?;
    println!("{:>6} {:>14} {:>14}", "rho", "vs smoothed", "vs phantom");
    for rho in [0.2, 0.1, 0.05] {
        let recon = reconstruct(&g, &FilterParams::new(rho, mu)?, n_side)?;
        let smoothed = SmoothedPhantom::new(&phantom, rho)?.image(n_side)?;
        println!("{rho:>6} {:>14.2e} {:>14.2e}", sup_in_ball(&recon, &smoothed), sup_in_ball(&recon, &truth));
    }
    Ok(())
}
