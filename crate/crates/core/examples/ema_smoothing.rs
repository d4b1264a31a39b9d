//! Smooths a noisy clip-level arousal track with a few decay values.
//!
//!     cargo run --example ema_smoothing

use movie_affect::eval::mse;
use movie_affect::model::ema_from_first;
use movie_affect::numcore::Rng;

fn main() {
    let mut rng = Rng::new(4);
    let truth: Vec<f64> = (0..60).map(|i| (i as f64 / 9.0).sin() * 0.6).collect();
    let raw: Vec<f64> = truth.iter().map(|t| t + 0.25 * rng.normal()).collect();
    println!("raw        mse {:.4}", mse(&raw, &truth).unwrap());
    for beta in [0.0, 0.3, 0.6, 0.9, 0.99] {
        let smooth = ema_from_first(&raw, beta).expect("beta in [0, 1)");
        println!("beta {beta:<5} mse {:.4}", mse(&smooth, &truth).unwrap());
    }
}
