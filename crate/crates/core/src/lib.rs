//! Deterministic simulation engine for energy-routed process nodes that
//! grow, spike and evolve on a shared 3D payload grid.

pub mod cem;
pub mod config;
pub mod entity;
pub mod error;
pub mod functome;
pub mod geom;
pub mod grid;
pub mod node;
pub mod probe;
pub mod session;
pub mod stability;

pub use cem::{transfer, Deposit, GoalPlane, PwrTensor, RouterOption, SpikeEvent};
pub use config::EngineConfig;
pub use entity::{EpochReport, Entity};
pub use error::{EdenError, Result};
pub use functome::{ActionGene, ActionType, Functome, PrerequisiteType};
pub use geom::{Bounds, Vec3};
pub use grid::{NeuralGrid, PayloadKind, TransArchPayload};
pub use node::{NodeState, ProcessNode};
pub use probe::{Frame, FrameEntry, InputProbe, OutputProbe};
pub use session::{SaveState, SessionLog, SessionRecord};
pub use stability::{stability_index, SpikeDistribution};
