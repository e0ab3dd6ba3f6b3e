//! Sobolev-weighted energy of phantoms and membership in the smoothness
//! class: bumps certify for every beta, disks do not converge.
//!
//! cargo run --release --example smoothness_class

use expradon::{rasterize, sobolev_weight_integral, Phantom, SmoothnessClass};

fn main() -> expradon::Result<()> {
    let bump = Phantom::bump([0.0, 0.0], 1.0, 1.0)?;
    for beta in [1.5, 2.0, 3.0] {
        let class = SmoothnessClass::certify(&bump, beta, 128)?;
        println!("bump in H({beta}, {:.4})", class.big_l());
    }
    let disk = Phantom::disk([0.0, 0.0], 0.5, 1.0)?;
    for n_side in [64, 128, 256] {
        let energy = sobolev_weight_integral(&rasterize(&disk, n_side)?, 2.0)?;
        println!("disk, beta = 2, grid {n_side}: {energy:.4e}");
    }
    match SmoothnessClass::certify(&disk, 2.0, 64) {
        Ok(c) => println!("disk certified with L = {}", c.big_l()),
        Err(e) => println!("disk not certified: {e}"),
    }
    Ok(())
}
