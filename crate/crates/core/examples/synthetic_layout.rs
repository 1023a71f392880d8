//! Prints a synthetic A4 layout document as JSON.
//!
//! Usage: `cargo run --example synthetic_layout -- [pages] [seed]`

use ssc_core::suite::{synthetic_document, StandardSetup};

fn main() {
    let mut args = std::env::args().skip(1);
    let pages = args.next().map_or(3, |a| a.parse().expect("pages must be an integer"));
    let seed = args.next().map_or(1, |a| a.parse().expect("seed must be an integer"));
    let doc = synthetic_document(pages, StandardSetup::default().grid, seed);
    println!("{}", doc.to_json().expect("layout serializes"));
}
