//! Monte Carlo population of thermostatically controlled loads with baseline
//! appliance demand, producing meter traces for an outage world and its
//! no-outage counterfactual.
//!
//! Each house follows a first-order thermal model integrated exactly over
//! one-minute steps; energy is summed into 15-minute meter intervals. Every
//! house draws from its own random stream, so results do not depend on
//! scheduling.

mod house;
mod run;
mod scenario;

pub use house::{step_house, Mode, TclHouse};
pub use run::{
    generate_case_grid, meter_id, run_scenario, with_outage, write_outputs, GroundTruth, SimOutput,
};
pub use scenario::{baseline_shape, AbsSpread, AmbientSpec, OutageWindow, PopulationSpec, RelSpread, Scenario};
