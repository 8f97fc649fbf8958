//! Droop plus virtual inertia on top of a constant dispatch command.
//!
//! cargo run --example frequency_support

use windfarm_mpc::freq_control::{FreqCtrlParams, FrequencyTrace, PowerReference};

fn main() -> windfarm_mpc::Result<()> {
    let params = FreqCtrlParams::default();
    let trace = FrequencyTrace::synthetic(50.0, 0.1, 300.0, 1.0)?;
    let mut reference = PowerReference::new(params, 50.0, 1.0)?;
    let command = 20.0e6;

    println!("K_D {} MW/Hz, K_I {} MW·s/Hz, command {} MW", params.k_d, params.k_i, command / 1e6);
    println!("{:>5} {:>9} {:>10}", "t s", "f Hz", "P_ref MW");
    for k in 0..trace.samples.len() {
        let p_ref = reference.update(command, trace.at(k));
        if k % 20 == 0 {
            println!("{k:5} {:9.4} {:10.3}", trace.at(k), p_ref / 1e6);
        }
    }
    Ok(())
}
