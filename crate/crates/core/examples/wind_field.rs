//! Wake interaction along a column: steady deficits, then a step in the
//! upstream thrust coefficient travelling down the farm.
//!
//! cargo run --example wind_field

use windfarm_mpc::wind_field::{steady_speeds, synth_freestream, FarmLayout, FlowFieldState};

fn main() -> windfarm_mpc::Result<()> {
    let layout = FarmLayout::column(4, 5.0, 126.0)?;
    let u_inf = 9.0;

    for ct in [0.5, 1.0, 2.0] {
        let u = steady_speeds(&layout, &[ct; 4], u_inf)?;
        println!("uniform C_T' = {ct}: U = {:.3?} m/s", u);
    }

    // derate the front turbine and watch the deficit advect downstream
    let dt = 1.0;
    let mut field = FlowFieldState::steady(&layout, &[2.0; 4], u_inf, dt)?;
    let ct = [0.5, 2.0, 2.0, 2.0];
    println!("\nfront turbine derated to 0.5 at t = 0");
    for k in 0..=240 {
        let u = field.step_field(&ct, u_inf, &layout, dt)?;
        if k % 30 == 0 {
            println!("t = {k:3} s  U = {:.3?}", u);
        }
    }

    let trace = synth_freestream(u_inf, 0.1, 42, 600.0, dt)?;
    let mean = trace.samples.iter().sum::<f64>() / trace.samples.len() as f64;
    let (lo, hi) = trace
        .samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
    println!("\nturbulent freestream, 600 s: mean {mean:.2}, range [{lo:.2}, {hi:.2}] m/s");
    Ok(())
}
