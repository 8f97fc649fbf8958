//! The (w, s) protocol on the default scenario with the w = 0 normalization.
//!
//! cargo run --release --example penalty_sweep

use windfarm_mpc::harness::{sweep, LayoutSpec, ScenarioConfig};

fn main() -> windfarm_mpc::Result<()> {
    let config = ScenarioConfig::new(LayoutSpec::default(), 9.0);
    let mut grid = vec![(0.0, 1.0), (1e2, 1.0), (1e3, 1.0), (1e4, 1.0)];
    grid.extend([0.75, 0.5, 0.0].map(|s| (1e3, s)));
    let table = sweep(&config, &grid)?;

    println!("{:>7} {:>5} {:>9} {:>9} {:>9}", "w", "s", "RMS MW", "dF/dF0", "eF/eF0");
    for r in &table.rows {
        println!(
            "{:>7} {:>5} {:>9.3} {:>9.3} {:>9.3}",
            r.w,
            r.s,
            r.rms / 1e6,
            r.df_normalized.unwrap_or(f64::NAN),
            r.ef_normalized.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
