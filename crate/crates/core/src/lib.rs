//! Cucker-Smale flocking with time-varying delays and intermittent
//! communication weights: model, delay-aware integrator, weight schedules,
//! and numerical checks of the flocking estimates.

pub mod bounds;
pub mod config;
pub mod delay;
pub mod error;
pub mod history;
pub mod influence;
pub mod integrator;
pub mod model;
pub mod output;
pub mod quadrature;
pub mod scenario;
pub mod schedule;

pub use bounds::{analyze, BoundsOptions, CheckKind, DiagnosticsReport, Verdict};
pub use config::{
    AgentHistory, Coupling, InitialData, InitialPath, IntegratorSettings, SystemConfig,
};
pub use delay::{DelaySpec, DistributedKernel, KernelWeight, TimeFunction};
pub use error::{
    BoundsError, HistoryError, IntegratorError, ModelError, ScenarioError, ScheduleError,
};
pub use history::{DelayedStates, TrajectoryHistory};
pub use influence::Influence;
pub use integrator::{align_breakpoints, plan_steps, run};
pub use model::{communication_rate, rhs_distributed, rhs_pointwise};
pub use output::{run_scenario, run_sweep, SweepRow};
pub use scenario::{load_scenario, parse_scenario, Scenario};
pub use schedule::{PeDeclaration, PeReport, SchedulePattern, WeightSchedule};
