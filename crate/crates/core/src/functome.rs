//! Genetic record of a process node: action genes gated by prerequisites,
//! expressed during Develop, mutated while the node is unstable.
//!
//! Action and prerequisite names serialize as the exact strings of the
//! framework's vocabulary, including the `Dentrite_` spelling. Unknown names
//! fail to load.

use crate::config::EngineConfig;
use crate::geom::{Bounds, Vec3};
use crate::grid::{NeuralGrid, PayloadKind};
use crate::node::{AxonTerminal, Dendrite, FunctomeId, GrowthCone, NodeId, ProcessNode};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionType {
    #[serde(rename = "AxonTerminal_AddNew")]
    AxonTerminalAddNew,
    #[serde(rename = "AxonTerminal_RemoveRandom")]
    AxonTerminalRemoveRandom,
    #[serde(rename = "Dentrite_AllowNew")]
    DendriteAllowNew,
    #[serde(rename = "Dentrite_RemoveRandom")]
    DendriteRemoveRandom,
    AllowTransmitterIndexProduction,
    AddArchitectorIndexProduction,
    StimulateNeuroGenesis,
    Apoptosis,
}

impl ActionType {
    pub const ALL: [ActionType; 8] = [
        ActionType::AxonTerminalAddNew,
        ActionType::AxonTerminalRemoveRandom,
        ActionType::DendriteAllowNew,
        ActionType::DendriteRemoveRandom,
        ActionType::AllowTransmitterIndexProduction,
        ActionType::AddArchitectorIndexProduction,
        ActionType::StimulateNeuroGenesis,
        ActionType::Apoptosis,
    ];

    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|a| *a == self).unwrap_or(0) as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::AxonTerminalAddNew => "AxonTerminal_AddNew",
            ActionType::AxonTerminalRemoveRandom => "AxonTerminal_RemoveRandom",
            ActionType::DendriteAllowNew => "Dentrite_AllowNew",
            ActionType::DendriteRemoveRandom => "Dentrite_RemoveRandom",
            ActionType::AllowTransmitterIndexProduction => "AllowTransmitterIndexProduction",
            ActionType::AddArchitectorIndexProduction => "AddArchitectorIndexProduction",
            ActionType::StimulateNeuroGenesis => "StimulateNeuroGenesis",
            ActionType::Apoptosis => "Apoptosis",
        }
    }

    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            ActionType::AxonTerminalAddNew | ActionType::AllowTransmitterIndexProduction => &["emit_index"],
            ActionType::DendriteAllowNew => &["accept_lo", "accept_hi"],
            ActionType::AddArchitectorIndexProduction => &["arch_index", "target_action"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrerequisiteType {
    ArchitectorPresent,
    TransmitterPresent,
    ArchitectorPresentPayloadCount,
    TransmitterPresentPayloadCount,
    #[serde(rename = "AllowOn_ProcessNodeClockRange")]
    AllowOnProcessNodeClockRange,
    #[serde(rename = "AllowOn_ClockFrequency")]
    AllowOnClockFrequency,
    EnergyRequirement,
    EnabledAfterEntityClock,
}

impl PrerequisiteType {
    pub const ALL: [PrerequisiteType; 8] = [
        PrerequisiteType::ArchitectorPresent,
        PrerequisiteType::TransmitterPresent,
        PrerequisiteType::ArchitectorPresentPayloadCount,
        PrerequisiteType::TransmitterPresentPayloadCount,
        PrerequisiteType::AllowOnProcessNodeClockRange,
        PrerequisiteType::AllowOnClockFrequency,
        PrerequisiteType::EnergyRequirement,
        PrerequisiteType::EnabledAfterEntityClock,
    ];

    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            PrerequisiteType::ArchitectorPresent | PrerequisiteType::TransmitterPresent => &["index"],
            PrerequisiteType::ArchitectorPresentPayloadCount | PrerequisiteType::TransmitterPresentPayloadCount => {
                &["index", "count"]
            }
            PrerequisiteType::AllowOnProcessNodeClockRange => &["clock_min", "clock_max"],
            PrerequisiteType::AllowOnClockFrequency => &["freq_min", "freq_max"],
            PrerequisiteType::EnergyRequirement => &["energy"],
            PrerequisiteType::EnabledAfterEntityClock => &["after"],
        }
    }
}

/// Every parameter key a generated gene carries, so that redrawing its
/// action or prerequisite never leaves a required key missing.
pub const PARAM_KEYS: [&str; 14] = [
    "index",
    "count",
    "clock_min",
    "clock_max",
    "freq_min",
    "freq_max",
    "energy",
    "after",
    "emit_index",
    "accept_lo",
    "accept_hi",
    "arch_index",
    "target_action",
    "spawn",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGene {
    pub action: ActionType,
    pub prerequisite: PrerequisiteType,
    pub params: BTreeMap<String, f64>,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneError {
    #[error("{kind} is missing parameter `{key}`")]
    MissingParam { kind: &'static str, key: &'static str },
}

/// Value ranges for freshly drawn parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneRanges {
    pub transmitter_kinds: u32,
    pub architector_kinds: u32,
    pub max_energy: f64,
}

impl GeneRanges {
    pub fn from_config(cfg: &EngineConfig) -> Self {
        Self {
            transmitter_kinds: cfg.transmitter_kinds,
            architector_kinds: cfg.architector_kinds,
            max_energy: 2.0 * cfg.min_e,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, key: &str, rng: &mut R) -> f64 {
        let kinds = self.transmitter_kinds.max(self.architector_kinds).max(1);
        match key {
            "index" => f64::from(rng.random_range(0..kinds)),
            "count" => f64::from(rng.random_range(1..=3u32)),
            "clock_min" => f64::from(rng.random_range(0..20u32)),
            "clock_max" => f64::from(rng.random_range(10..80u32)),
            "freq_min" => f64::from(rng.random_range(0..=1u32)),
            "freq_max" => f64::from(rng.random_range(1..=3u32)),
            "energy" => rng.random::<f64>() * self.max_energy,
            "after" => f64::from(rng.random_range(0..20u32)),
            "emit_index" | "accept_lo" | "accept_hi" => f64::from(rng.random_range(0..self.transmitter_kinds.max(1))),
            "arch_index" => f64::from(rng.random_range(0..self.architector_kinds.max(1))),
            "target_action" => f64::from(rng.random_range(0..8u32)),
            _ => rng.random::<f64>(),
        }
    }
}

impl ActionGene {
    pub fn random<R: Rng + ?Sized>(ranges: &GeneRanges, rng: &mut R) -> Self {
        let action = ActionType::ALL[rng.random_range(0..8)];
        let prerequisite = PrerequisiteType::ALL[rng.random_range(0..8)];
        let params = PARAM_KEYS
            .iter()
            .map(|k| (k.to_string(), ranges.draw(k, rng)))
            .collect();
        Self {
            action,
            prerequisite,
            params,
            enabled: rng.random_bool(0.75),
        }
    }

    pub fn param(&self, key: &'static str, kind: &'static str) -> Result<f64, GeneError> {
        self.params
            .get(key)
            .copied()
            .filter(|v| v.is_finite())
            .ok_or(GeneError::MissingParam { kind, key })
    }

    fn int_param(&self, key: &'static str, kind: &'static str) -> Result<u64, GeneError> {
        self.param(key, kind).map(|v| v.max(0.0).round() as u64)
    }

    /// Confirms both the prerequisite and the action have their keys.
    pub fn validate(&self) -> Result<(), GeneError> {
        for key in self.prerequisite.required_params() {
            self.param(key, "prerequisite")?;
        }
        for key in self.action.required_params() {
            self.param(key, self.action.name())?;
        }
        Ok(())
    }
}

/// Initial placements drawn when an entity is seeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStructure {
    pub soma: Vec3,
    pub dendrites: Vec<Vec3>,
    pub axon_terminals: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functome {
    pub id: FunctomeId,
    pub genes: Vec<ActionGene>,
    pub mutation_rate: f64,
    pub locked: bool,
    pub lineage: Vec<FunctomeId>,
    #[serde(default)]
    pub initial_structure: Option<InitialStructure>,
}

impl Functome {
    pub fn new(id: FunctomeId, genes: Vec<ActionGene>, mutation_rate: f64) -> Self {
        Self {
            id,
            genes,
            mutation_rate,
            locked: false,
            lineage: Vec::new(),
            initial_structure: None,
        }
    }
}

/// Read-only state a prerequisite is evaluated against.
pub struct PrerequisiteContext<'a> {
    pub node: &'a ProcessNode,
    pub grid: &'a NeuralGrid,
    pub entity_clock: u64,
    pub scan_radius: f64,
}

pub fn check_prerequisite(gene: &ActionGene, ctx: &PrerequisiteContext<'_>) -> Result<bool, GeneError> {
    gene.validate()?;
    const K: &str = "prerequisite";
    let soma = &ctx.node.soma_position;
    let count = |kind: PayloadKind, index: u64| {
        ctx.grid.count_within(soma, ctx.scan_radius, kind, index as u32) as u64
    };
    let ok = match gene.prerequisite {
        PrerequisiteType::ArchitectorPresent => count(PayloadKind::Architector, gene.int_param("index", K)?) >= 1,
        PrerequisiteType::TransmitterPresent => count(PayloadKind::Transmitter, gene.int_param("index", K)?) >= 1,
        PrerequisiteType::ArchitectorPresentPayloadCount => {
            count(PayloadKind::Architector, gene.int_param("index", K)?) >= gene.int_param("count", K)?
        }
        PrerequisiteType::TransmitterPresentPayloadCount => {
            count(PayloadKind::Transmitter, gene.int_param("index", K)?) >= gene.int_param("count", K)?
        }
        PrerequisiteType::AllowOnProcessNodeClockRange => {
            let clock = ctx.node.node_clock;
            clock >= gene.int_param("clock_min", K)? && clock <= gene.int_param("clock_max", K)?
        }
        PrerequisiteType::AllowOnClockFrequency => {
            let spikes = u64::from(ctx.node.spikes_this_epoch);
            spikes >= gene.int_param("freq_min", K)? && spikes <= gene.int_param("freq_max", K)?
        }
        PrerequisiteType::EnergyRequirement => ctx.node.stored_energy >= gene.param("energy", K)?,
        PrerequisiteType::EnabledAfterEntityClock => ctx.entity_clock >= gene.int_param("after", K)?,
    };
    Ok(ok)
}

/// Enabled genes whose prerequisites hold, in declaration order, paired
/// with their position in the gene list. Invalid genes are reported
/// through `on_invalid` and never fire.
pub fn scan_available_actions<'f>(
    functome: &'f Functome,
    ctx: &PrerequisiteContext<'_>,
    mut on_invalid: impl FnMut(usize, &GeneError),
) -> Vec<(usize, &'f ActionGene)> {
    functome
        .genes
        .iter()
        .enumerate()
        .filter(|(_, g)| g.enabled)
        .filter(|(i, g)| match check_prerequisite(g, ctx) {
            Ok(ok) => ok,
            Err(e) => {
                on_invalid(*i, &e);
                false
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChangeOutcome {
    Applied(String),
    NoOp(String),
    Error(String),
}

/// What a single action did to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralChange {
    pub node_id: NodeId,
    pub action: ActionType,
    pub outcome: ChangeOutcome,
}

/// A node queued for creation at the Develop commit.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthRequest {
    pub parent: NodeId,
    pub position: Vec3,
    pub functome_id: FunctomeId,
}

/// Mutable surroundings an action may touch.
pub struct ActionEnv<'a> {
    pub cfg: &'a EngineConfig,
    pub bounds: Bounds,
    pub births: &'a mut Vec<BirthRequest>,
}

/// Uniform direction on the unit sphere.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

pub fn execute_action<R: Rng + ?Sized>(
    gene: &ActionGene,
    node: &mut ProcessNode,
    env: &mut ActionEnv<'_>,
    rng: &mut R,
) -> StructuralChange {
    let outcome = match apply_action(gene, node, env, rng) {
        Ok(outcome) => outcome,
        Err(e) => ChangeOutcome::Error(e.to_string()),
    };
    StructuralChange {
        node_id: node.id,
        action: gene.action,
        outcome,
    }
}

fn apply_action<R: Rng + ?Sized>(
    gene: &ActionGene,
    node: &mut ProcessNode,
    env: &mut ActionEnv<'_>,
    rng: &mut R,
) -> Result<ChangeOutcome, GeneError> {
    gene.validate()?;
    let cfg = env.cfg;
    let kind = gene.action.name();
    let limit = node.max_dendrites();
    let outcome = match gene.action {
        ActionType::AxonTerminalAddNew => {
            if node.axon_terminals.len() >= limit {
                return Ok(ChangeOutcome::Error(format!("axon terminal limit {limit} reached")));
            }
            let index = gene.int_param("emit_index", kind)? as u32;
            let position = env.bounds.clamp(node.soma_position + random_unit(rng) * cfg.spawn_radius);
            let attractant_index = rng.random_range(0..cfg.transmitter_kinds.max(1));
            node.axon_terminals.push(AxonTerminal {
                position,
                emit_transmitter_index: index,
                emit_magnitude: cfg.emit_magnitude,
                growth_cone: GrowthCone {
                    step_size: cfg.growth_step,
                    active: true,
                    attractant_index,
                },
            });
            ChangeOutcome::Applied(format!("axon terminal emitting {index} added"))
        }
        ActionType::AxonTerminalRemoveRandom => {
            if node.axon_terminals.is_empty() {
                log::info!("node {}: no axon terminal to remove", node.id);
                ChangeOutcome::NoOp("no axon terminals".into())
            } else {
                let i = rng.random_range(0..node.axon_terminals.len());
                node.axon_terminals.remove(i);
                ChangeOutcome::Applied(format!("axon terminal {i} removed"))
            }
        }
        ActionType::DendriteAllowNew => {
            if node.dendrites.len() >= limit {
                return Ok(ChangeOutcome::Error(format!("dendrite limit {limit} reached")));
            }
            let a = gene.int_param("accept_lo", kind)? as u32;
            let b = gene.int_param("accept_hi", kind)? as u32;
            let index = rng.random_range(a.min(b)..=a.max(b));
            let position = env.bounds.clamp(node.soma_position + random_unit(rng) * cfg.spawn_radius);
            node.dendrites.push(Dendrite {
                position,
                pickup_radius: cfg.pickup_radius,
                accepted_transmitter_indices: [index].into_iter().collect(),
                gain: cfg.dendrite_gain,
                growth_cone: GrowthCone {
                    step_size: cfg.growth_step,
                    active: true,
                    attractant_index: index,
                },
            });
            ChangeOutcome::Applied(format!("dendrite accepting {index} added"))
        }
        ActionType::DendriteRemoveRandom => {
            if node.dendrites.is_empty() {
                log::info!("node {}: no dendrite to remove", node.id);
                ChangeOutcome::NoOp("no dendrites".into())
            } else {
                let i = rng.random_range(0..node.dendrites.len());
                node.dendrites.remove(i);
                ChangeOutcome::Applied(format!("dendrite {i} removed"))
            }
        }
        ActionType::AllowTransmitterIndexProduction => {
            let index = gene.int_param("emit_index", kind)? as u32;
            if node.permitted_transmitters.insert(index) {
                ChangeOutcome::Applied(format!("transmitter {index} permitted"))
            } else {
                ChangeOutcome::NoOp(format!("transmitter {index} already permitted"))
            }
        }
        ActionType::AddArchitectorIndexProduction => {
            let index = gene.int_param("arch_index", kind)? as u32;
            let target = (gene.int_param("target_action", kind)? % 8) as u8;
            if node.permitted_architectors.get(&index) == Some(&target) {
                ChangeOutcome::NoOp(format!("architector {index} already permitted"))
            } else {
                node.permitted_architectors.insert(index, target);
                ChangeOutcome::Applied(format!(
                    "architector {index} permitted, targeting {}",
                    ActionType::from_code(target).map(ActionType::name).unwrap_or("?")
                ))
            }
        }
        ActionType::StimulateNeuroGenesis => {
            let position = env.bounds.clamp(node.soma_position + random_unit(rng) * cfg.spawn_radius);
            env.births.push(BirthRequest {
                parent: node.id,
                position,
                functome_id: node.functome_id,
            });
            ChangeOutcome::Applied("neurogenesis queued".into())
        }
        ActionType::Apoptosis => {
            node.marked_for_removal = true;
            ChangeOutcome::Applied("marked for removal".into())
        }
    };
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutatedField {
    Action,
    Prerequisite,
    Param(String),
    Enabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub gene_index: usize,
    pub field: MutatedField,
}

/// Redraws one field of each gene with probability `mutation_rate`, but
/// only while the owner is below `stability_min` and the functome is
/// unlocked.
pub fn mutate<R: Rng + ?Sized>(
    functome: &mut Functome,
    node_stability: f64,
    stability_min: f64,
    ranges: &GeneRanges,
    rng: &mut R,
) -> Vec<MutationRecord> {
    if functome.locked || node_stability >= stability_min {
        return Vec::new();
    }
    let rate = functome.mutation_rate;
    let mut records = Vec::new();
    for (gene_index, gene) in functome.genes.iter_mut().enumerate() {
        if !rng.random_bool(rate.clamp(0.0, 1.0)) {
            continue;
        }
        let field = match rng.random_range(0..4u32) {
            0 => {
                let offset = rng.random_range(1..8);
                gene.action = ActionType::ALL[(gene.action.code() as usize + offset) % 8];
                MutatedField::Action
            }
            1 => {
                let current = PrerequisiteType::ALL.iter().position(|p| *p == gene.prerequisite).unwrap_or(0);
                let offset = rng.random_range(1..8);
                gene.prerequisite = PrerequisiteType::ALL[(current + offset) % 8];
                MutatedField::Prerequisite
            }
            2 if !gene.params.is_empty() => {
                let keys: Vec<String> = gene.params.keys().cloned().collect();
                let key = keys[rng.random_range(0..keys.len())].clone();
                let old = gene.params[&key];
                let mut new = old;
                for _ in 0..16 {
                    new = ranges.draw(&key, rng);
                    if new != old {
                        break;
                    }
                }
                if new == old {
                    new = old + 1.0;
                }
                gene.params.insert(key.clone(), new);
                MutatedField::Param(key)
            }
            _ => {
                gene.enabled = !gene.enabled;
                MutatedField::Enabled
            }
        };
        records.push(MutationRecord { gene_index, field });
    }
    records
}

fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hash input serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn functome_hash(functome: &Functome) -> String {
    digest_json(&functome.genes)
}

#[derive(Serialize)]
struct NodeIdentity<'a> {
    dim_xy: usize,
    dim_z: usize,
    dendrites: Vec<(&'a std::collections::BTreeSet<u32>, f64)>,
    axon_terminals: Vec<(u32, f64)>,
    permitted_transmitters: &'a std::collections::BTreeSet<u32>,
    permitted_architectors: &'a BTreeMap<u32, u8>,
    enabled_actions: Vec<&'a ActionGene>,
}

/// Digest over structural morphology and the enabled genes. Neurite
/// positions are excluded so growth alone does not change identity.
pub fn node_hash(node: &ProcessNode, functome: &Functome) -> String {
    digest_json(&NodeIdentity {
        dim_xy: node.cem.dim_xy(),
        dim_z: node.cem.dim_z(),
        dendrites: node
            .dendrites
            .iter()
            .map(|d| (&d.accepted_transmitter_indices, d.gain))
            .collect(),
        axon_terminals: node
            .axon_terminals
            .iter()
            .map(|t| (t.emit_transmitter_index, t.emit_magnitude))
            .collect(),
        permitted_transmitters: &node.permitted_transmitters,
        permitted_architectors: &node.permitted_architectors,
        enabled_actions: functome.genes.iter().filter(|g| g.enabled).collect(),
    })
}
