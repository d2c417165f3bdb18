use thiserror::Error;

use feeder_mip::{MipError, SolveError};

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("cannot read feeder: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed feeder document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported feeder schema version {0}")]
    SchemaVersion(u32),
    #[error("bus id {0} appears twice")]
    DuplicateBus(usize),
    #[error("bus ids must be 0..=N without gaps; found {0}")]
    BusIdsNotContiguous(usize),
    #[error(
        "{0} substations found; join them through one virtual substation bus and \
         connect the real substations to it"
    )]
    MultipleSubstations(usize),
    #[error("bus {bus} has invalid voltage limits [{v_min}, {v_max}]")]
    BadVoltageLimits { bus: usize, v_min: f64, v_max: f64 },
    #[error(
        "bus {0} hosts both a load and a DER; split it into buses joined by \
         zero-impedance lines"
    )]
    LoadAndDer(usize),
    #[error("bus {0}: kind does not match the attached load/DER data")]
    KindMismatch(usize),
    #[error("bus {0}: ZIP limits are not ordered on [0.8, 1.2] pu")]
    BadZip(usize),
    #[error("bus {0}: DER ratings must be positive")]
    BadDer(usize),
    #[error("edge ids must be 0..|E|-1 without gaps; found {0}")]
    EdgeIdsNotContiguous(usize),
    #[error("edge {edge} references unknown bus {bus}")]
    UnknownBus { edge: usize, bus: usize },
    #[error("edge {0} is a self loop")]
    SelfLoop(usize),
    #[error("edge {edge} ({from},{to}) duplicates an existing edge between the same buses")]
    DuplicateEdge { edge: usize, from: usize, to: usize },
    #[error("edge {0} has invalid flow limits")]
    BadFlowLimits(usize),
    #[error("edge {0}: regulator kind and regulator data disagree")]
    RegulatorMismatch(usize),
    #[error("edge {0}: malformed regulator band")]
    BadBand(usize),
    #[error("bus {0} is not connected to the substation even with all switches closed")]
    Disconnected(usize),
    #[error(
        "no radial topology exists: N = {n}, {fixed} non-switch edges and {switches} switches"
    )]
    ImpossibleRadiality { n: usize, fixed: usize, switches: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profiles: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed profile CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("period [{start}, {end}) is not covered by the profiles [{first}, {last}]")]
    OutOfRange { start: u32, end: u32, first: u32, last: u32 },
    #[error("period [{start}, {end}) is empty or not a whole number of intervals")]
    BadPeriod { start: u32, end: u32 },
    #[error("samples per interval must be at least 1")]
    NoSamples,
    #[error("cannot draw {samples} samples from an interval of {minutes} minutes")]
    TooManySamples { samples: usize, minutes: usize },
    #[error("profiles are missing minute {minute} for bus {bus}")]
    Gap { bus: usize, minute: u32 },
    #[error("p_avail {value} at bus {bus}, minute {minute} is outside [0, p_max]")]
    BadAvailability { bus: usize, minute: u32, value: f64 },
    #[error("profile references bus {0}, which is not in the feeder")]
    UnknownBus(usize),
    #[error("cannot parse period '{0}' (expected start-end in minutes)")]
    PeriodSyntax(String),
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Model(#[from] MipError),
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error("DER at bus {bus}: {message}")]
    Der { bus: usize, message: String },
    #[error("regulator on edge {edge}: {message}")]
    Regulator { edge: usize, message: String },
    #[error("scenario instance {t} has no data for bus {bus}")]
    MissingScenario { t: usize, bus: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("watt-var slope must be negative, got {0}")]
    DegenerateSlope(f64),
    #[error("DER ratings must be positive")]
    BadRating,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("solution has no values")]
    NoSolution,
    #[error("binary {name} = {value} is not within the integrality tolerance")]
    Fractional { name: String, value: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("closed edges do not form a spanning tree ({closed} closed, N = {n})")]
    NotRadial { closed: usize, n: usize },
    #[error("local regulator on edge {0} is fed from its secondary side")]
    ReversedRegulator(usize),
    #[error("no fixed point after {iterations} sweeps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("minute {minute}: {source}")]
    AtMinute {
        minute: u32,
        #[source]
        source: Box<SimError>,
    },
    #[error("settings do not match the feeder: {0}")]
    Settings(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{0} switches exceed the enumeration guard of 24")]
    TooManySwitches(usize),
    #[error("grid of {0} configurations exceeds the oracle budget")]
    GridTooLarge(u128),
    #[error("no configuration on the grid is feasible")]
    NoFeasible,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed solution file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}
