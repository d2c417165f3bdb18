//! Multi-period reconfiguration of distribution feeders: radial switch
//! topology, remote regulator taps and watt-var curves chosen to minimize
//! ohmic losses, with a local-rules simulator and brute-force oracles.

pub mod encode;
pub mod error;
pub mod cli;
pub mod extract;
pub mod feeder;
pub mod oracle;
pub mod pipeline;
pub mod profiles;
pub mod sim;
pub mod synth;
pub mod wattvar;

pub use error::{EncodeError, ExtractError, FeederError, OracleError, PipelineError, ProfileError, SimError};
pub use extract::{extract_omega, Omega1, Omega2, SolutionFile};
pub use feeder::Feeder;
pub use profiles::{build_scenarios, BusSample, Period, Profiles, Sampling, ScenarioInstance, ScenarioSet};
pub use pipeline::{solve_period, PeriodOutcome, SolveConfig};
