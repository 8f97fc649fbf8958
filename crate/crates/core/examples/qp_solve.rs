//! A small box- and rate-constrained QP solved and certified through its KKT
//! residuals, then dumped and reloaded.
//!
//! cargo run --example qp_solve

use nalgebra::{DMatrix, DVector};
use windfarm_mpc::qp::{kkt_residuals, read_problem, solve, write_problem, CsrMatrix, QpProblem, QpSettings};

fn main() -> windfarm_mpc::Result<()> {
    // minimize ½‖x − (3, −1, 2)‖² + ½(x₁ − x₂)² subject to 0 ≤ x ≤ 1.5 and x₂ − x₁ ≤ 0.2
    let h = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
    let g = DVector::from_vec(vec![-3.0, 1.0, -2.0]);
    let mut rows = CsrMatrix::new(3);
    rows.push_row(&[(0, -1.0), (1, 1.0)]);
    let problem = QpProblem::new(h, g, rows, DVector::from_vec(vec![0.2]))?
        .with_box(&[0.0; 3], &[1.5; 3])?;

    let sol = solve(&problem, &QpSettings::default(), None)?;
    println!("status {:?} after {} iterations (polished: {})", sol.status, sol.iterations, sol.polished);
    println!("x = {:.6?}", sol.x.as_slice());
    let r = kkt_residuals(&problem, &sol);
    println!(
        "KKT: stationarity {:.1e}, primal {:.1e}, dual {:.1e}, complementarity {:.1e}",
        r.stationarity, r.primal, r.dual, r.complementarity
    );

    let path = std::env::temp_dir().join("windfarm_mpc_example.qp");
    write_problem(&problem, &path)?;
    assert_eq!(read_problem(&path)?, problem);
    println!("round-tripped through {}", path.display());
    Ok(())
}
