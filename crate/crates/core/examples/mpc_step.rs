//! One receding-horizon step on a three-turbine farm: the planned commands,
//! predicted loads and the dispatched power.
//!
//! cargo run --example mpc_step

use windfarm_mpc::mpc::{Feedback, MpcConfig, MpcController};
use windfarm_mpc::turbine::{power, thrust, TurbineParams};

fn main() -> windfarm_mpc::Result<()> {
    let p = TurbineParams::default();
    let winds = [9.0, 7.2, 6.9];
    let ct = [0.8, 1.2, 1.2];
    let feedback: Vec<Feedback> = winds
        .iter()
        .zip(&ct)
        .map(|(&u, &c)| {
            Ok(Feedback {
                force: thrust(c, u, &p)?,
                power: power(c, u, &p)?,
                ct: c,
            })
        })
        .collect::<windfarm_mpc::Result<_>>()?;
    let now: f64 = feedback.iter().map(|f| f.power).sum();
    let p_ref = now + 1.0e6;

    let config = MpcConfig::default();
    let mut ctrl = MpcController::new(config.clone(), 1.0, p.half_rho_a(), p.rated_power, &ct)?;
    let sol = ctrl.step(&feedback, &winds, p_ref)?;

    println!("farm power {:.3} MW, reference {:.3} MW", now / 1e6, p_ref / 1e6);
    println!(
        "solve: {:?}, {} iterations, max KKT residual {:.1e}",
        sol.report.status,
        sol.report.iterations,
        sol.report.residuals.max()
    );
    for i in 0..winds.len() {
        println!(
            "WT{} plan {:.3?}  P* {:.3} MW",
            i + 1,
            sol.commands.row(i).iter().copied().collect::<Vec<_>>(),
            sol.dispatch[i] / 1e6
        );
    }
    let predicted: Vec<f64> = (0..config.horizon).map(|k| sol.power.column(k).sum() / 1e6).collect();
    println!("predicted farm power over the horizon: {:.3?} MW", predicted);
    Ok(())
}
