//! Stationary analysis of a double-ended queue fed by two Markovian arrival
//! processes, with exponential abandonment on both sides.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod map;
pub mod model;
pub mod modelfile;
pub mod oracle;
pub mod performance;
pub mod simulator;
pub mod sojourn;
pub mod solver;
pub mod stability;

pub use error::{Error, MapError, Result};
pub use linalg::{Matrix, Vector};
pub use map::{MapSummary, MarkovianArrivalProcess};
pub use model::{LevelBlocks, QueueModel};
pub use modelfile::ModelFile;
pub use performance::{report, PerformanceReport};
pub use simulator::{simulate, SimConfig, SimReport};
pub use sojourn::{build_bound, SojournBound};
pub use solver::{solve, SolverConfig, TruncatedStationarySolution};
pub use stability::{classify, RecurrenceClass, RecurrenceTag};
