//! Sinogram of a disk-plus-bump phantom, checked against the disk's closed
//! form and written to disk.
//!
//! cargo run --release --example forward_transform

use expradon::io::write_sinogram;
use expradon::{forward_point, forward_sinogram, Phantom, PhantomComponent, Ray};

fn main() -> expradon::Result<()> {
    let mu = 0.8;
    let phantom = Phantom::new(vec![
        PhantomComponent::Disk { center: [-0.3, 0.2], radius: 0.35, amplitude: 0.6 },
        PhantomComponent::Bump { center: [0.25, -0.1], scale: 0.6, amplitude: 1.0 },
    ])?;
    let g = forward_sinogram(&phantom, 180, 256, mu)?;
    let (lo, hi) = g.min_max();
    println!("sinogram {}x{}, mu = {mu}, range [{lo:.4}, {hi:.4}]", g.n_theta(), g.n_s());

    // attenuation makes opposite views differ
    let ray = Ray::new(0.4, 0.1)?;
    let back = Ray::new(0.4 + std::f64::consts::PI, -0.1)?;
    println!("T(phi, s) = {:.6}, T(phi + pi, -s) = {:.6}", forward_point(&phantom, ray, mu), forward_point(&phantom, back, mu));

    let path = std::env::temp_dir().join("forward_transform.sino");
    write_sinogram(&path, &g)?;
    println!("wrote {}", path.display());
    Ok(())
}
