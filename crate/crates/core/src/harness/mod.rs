//! Scenario harness: configuration, the closed loop, sweeps and outputs.
//!
//! One control step runs, in order: sample the freestream, advance the wake
//! field with the last realized `C_T'`, read `[F, P, C_T']` from every
//! turbine, form `P_ref` from the frequency block, solve the horizon QP,
//! dispatch `P*` and advance each turbine for one period.

mod config;
mod output;
mod run;
mod sweep;

pub use config::{
    load_scenario, DispatchSpec, Fidelity, FrequencyProfile, FrequencySpec, LayoutKind, LayoutSpec, OutputSpec,
    ScenarioConfig, SimulationSpec, WindSpec,
};
pub use output::{read_metrics, read_outputs, write_outputs, MetricsSummary, OutputSeries};
pub use run::{available_power, initial_operating_point, run, ResultsBundle};
pub use sweep::{cell_config, sweep, sweep_bundles, SweepRow, SweepTable};
