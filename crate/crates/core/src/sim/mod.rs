//! Scenarios, simulation drivers and result post-processing.

pub mod csv;
pub mod driver;
pub mod metrics;
pub mod scenario;
pub mod switched;

pub use driver::{prepare, simulate_averaged, tabulate, Controller, Prepared, Run, Table};
pub use scenario::{ControllerKind, ControllerSpec, Disturbance, ModelKind, Scenario};
pub use switched::{
    period_average, period_average_table, simulate_switched, simulate_switched_with, tabulate_switched, PwmConfig,
    SwitchState, SwitchedRun,
};
