//! Writes a synthetic credit-risk CSV for trying the CLI without the public
//! dataset: `cargo run --example synthetic -- OUT.csv [ROWS] [SEED]`.

#[path = "../tests/common/mod.rs"]
mod common;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic.csv".to_string());
    let rows = args.next().map_or(common::FULL_ROWS, |v| {
        v.parse().expect("ROWS must be an integer")
    });
    let seed = args
        .next()
        .map_or(7, |v| v.parse().expect("SEED must be an integer"));
    std::fs::write(&out, common::synthetic_csv(rows, seed)).expect("cannot write output");
    eprintln!("wrote {rows} rows to {out}");
}
