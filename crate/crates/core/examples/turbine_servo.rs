//! Speed/pitch servo following power commands, including one above what the
//! wind can deliver and one above rated power.
//!
//! cargo run --example turbine_servo

use windfarm_mpc::turbine::{power, required_ct, step_servo, TurbineParams, TurbineState};

fn main() -> windfarm_mpc::Result<()> {
    let p = TurbineParams::default();
    let u = 9.0;
    println!(
        "available at {u} m/s: {:.2} MW (C_T' = {})",
        power(p.ct_max(), u, &p)? / 1e6,
        p.ct_max()
    );

    let mut s = TurbineState::equilibrium(2.0e6, u, &p)?;
    println!("start: P {:.3} MW, C_T' {:.3}, ω {:.3} rad/s", s.power / 1e6, s.ct, s.rotor_speed);

    for target in [3.0e6, 1.0e6, 12.0e6] {
        let (need, capped) = required_ct(target, u, &p)?;
        let note = if capped { ", beyond the available power" } else { "" };
        println!("\ncommand {:.1} MW (needs C_T' {need:.3}{note})", target / 1e6);
        for k in 1..=6 {
            s = step_servo(&s, target, u, 1.0, &p)?;
            println!(
                "  t+{k}s  P {:.3} MW  C_T' {:.3}  ω {:.3}  β {:.2}°{}",
                s.power / 1e6,
                s.ct,
                s.rotor_speed,
                s.pitch,
                if s.saturated { "  (saturated)" } else { "" }
            );
        }
    }

    // rated-power cap at high wind is held by the pitch loop
    let mut s = TurbineState::equilibrium(4.0e6, 14.0, &p)?;
    for _ in 0..60 {
        s = step_servo(&s, 8.0e6, 14.0, 1.0, &p)?;
    }
    println!("\n14 m/s, 8 MW asked: P {:.3} MW, β {:.2}°", s.power / 1e6, s.pitch);
    Ok(())
}
