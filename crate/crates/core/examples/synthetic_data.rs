//! Writes a small synthetic dataset to disk, loads it back and prints what
//! each pack holds.
//!
//!     cargo run --example synthetic_data -- [out_dir]

use movie_affect::datapack::{gen_synthetic, load_dataset, ModalitySpec};
use movie_affect::eval::pcc;

fn main() -> movie_affect::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("movie-affect-synthetic"), Into::into);
    let specs = vec![ModalitySpec::new("audio", 8), ModalitySpec::new("scene", 4)];
    gen_synthetic(&out, 3, 120, &specs, 11, true)?;
    println!("wrote {}", out.display());

    for pack in load_dataset(&out)? {
        let valence = pack.valence();
        let arousal = pack.arousal();
        print!("{}: {} s", pack.movie_id, valence.len());
        for (name, feats) in &pack.features {
            // The first feature column against valence; noise should sit near zero.
            let r = pcc(&feats.col_values(0), &valence)?.value;
            print!(", {name} {}x{} (col 0 pcc {r:+.2})", feats.rows(), feats.cols());
        }
        let (lo, hi) = arousal.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!(", arousal in [{lo:.2}, {hi:.2}]");
    }
    Ok(())
}
