//! The default 8-turbine scenario end to end, written to a results directory.
//!
//! cargo run --release --example closed_loop [OUT_DIR]

use windfarm_mpc::harness::{run, write_outputs, LayoutSpec, ScenarioConfig};

fn main() -> windfarm_mpc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/closed_loop".into());
    let config = ScenarioConfig::new(LayoutSpec::default(), 9.0);
    let bundle = run(&config)?;
    bundle.check()?;
    write_outputs(&bundle, &out)?;

    let r = &bundle.report;
    println!(
        "{} turbines, {} steps, available {:.2} MW",
        bundle.turbines(),
        bundle.steps(),
        bundle.available_power / 1e6
    );
    println!("RMS tracking error {:.3} MW", r.rms_tracking_error / 1e6);
    println!("dF {:.0} N, eF {:.0} N", r.df, r.ef);
    println!("worst KKT residual {:.1e}, {} failed solves", bundle.worst_residual(), bundle.failures);
    for i in 0..bundle.turbines() {
        println!("  WT{}: dF {:8.0} N  eF {:8.0} N", i + 1, r.df_per_turbine[i], r.ef_per_turbine[i]);
    }
    println!("results in {out}");
    Ok(())
}
