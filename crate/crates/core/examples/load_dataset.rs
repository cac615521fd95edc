//! Load an interaction log (MovieLens `ratings.dat`, TSV or CSV), split it,
//! and print its shape.
//!
//!     cargo run --release --example load_dataset -- path/to/ratings.dat

use std::path::PathBuf;

use rec_unlearn::dataset::{load_interactions, split, LoadOptions, SplitSpec};

fn main() -> rec_unlearn::Result<()> {
    let Some(path) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: load_dataset <ratings file>");
        std::process::exit(2);
    };
    let data = load_interactions(&path, &LoadOptions::default())?;
    let s = split(&data, &SplitSpec::default())?;
    let density = data.len() as f64 / (data.num_users() * data.num_items()) as f64;
    println!(
        "{}: {} users, {} items, {} interactions (density {:.4})",
        path.display(),
        data.num_users(),
        data.num_items(),
        data.len(),
        density
    );
    println!(
        "train {} / validation {} / test {}; active training users {}",
        s.train.len(),
        s.validation.len(),
        s.test.len(),
        s.train.active_users().count()
    );
    Ok(())
}
