//! The reconstruction kernel: closed-form values and its band-limited
//! spectrum, estimated from samples with an FFT.
//!
//! cargo run --release --example kernel

use expradon::filter::kernel_fourier;
use expradon::{kernel_value, FilterParams};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn main() -> expradon::Result<()> {
    let p = FilterParams::new(0.1, 2.0)?;
    println!("band [{}, {:.4}]", p.mu().abs(), p.band_edge());
    for s in [0.0, 0.01, 0.05, 0.1, 0.5] {
        println!("K({s:<4}) = {:>12.6}", kernel_value(&p, s));
    }

    // sample on a wide window and compare the spectrum with |t| on the band
    let n = 1 << 16;
    let ds = 0.01;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            let s = if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * ds;
            Complex64::new(kernel_value(&p, s) * ds, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    for t in [1.0, 3.0, 5.0, 8.0, 12.0] {
        let bin = (t * n as f64 * ds / (2.0 * std::f64::consts::PI)).round() as usize;
        println!("t = {t:>4}: sampled {:>7.3}, exact {:>5.2}", buf[bin].re, kernel_fourier(&p, t));
    }
    Ok(())
}
