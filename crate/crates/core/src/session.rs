//! Save states, lock mode, the append-only session log, environment
//! control rules and replay verification.

use crate::entity::{EpochReport, Entity};
use crate::error::{EdenError, Result};
use crate::geom::Vec3;
use crate::grid::TransArchPayload;
use crate::node::NodeId;
use crate::probe::{Frame, ProbeId};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u64 = 1;

/// Everything needed to resume an entity bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaveState {
    pub format_version: u64,
    pub locked: bool,
    pub rng_state: ChaCha8Rng,
    pub entity: Entity,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

impl SaveState {
    pub fn capture(entity: &Entity) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            locked: entity.locked,
            rng_state: entity.rng.clone(),
            entity: entity.clone(),
        }
    }

    pub fn into_entity(self) -> Entity {
        let mut entity = self.entity;
        entity.rng = self.rng_state;
        entity.locked = self.locked;
        entity
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses a save document, checking the version before anything else.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| EdenError::malformed(path, &e))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(EdenError::VersionMismatch {
                path: path.to_path_buf(),
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let state: SaveState = serde_json::from_str(text).map_err(|e| EdenError::malformed(path, &e))?;
        state
            .entity
            .config
            .validate()
            .map_err(|e| EdenError::Malformed {
                path: path.to_path_buf(),
                line: 0,
                column: 0,
                message: e.to_string(),
            })?;
        if let Some(node) = state
            .entity
            .nodes
            .values()
            .find(|n| !state.entity.functomes.contains_key(&n.functome_id))
        {
            return Err(EdenError::Malformed {
                path: path.to_path_buf(),
                line: 0,
                column: 0,
                message: format!("node {} refers to missing functome {}", node.id, node.functome_id),
            });
        }
        Ok(state)
    }
}

/// Writes the entity atomically: a sibling temp file renamed into place.
pub fn save(entity: &Entity, path: &Path) -> Result<()> {
    let text = SaveState::capture(entity).to_json()?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text.as_bytes()).map_err(|e| EdenError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| EdenError::io(path, e))
}

pub fn load(path: &Path) -> Result<Entity> {
    let text = std::fs::read_to_string(path).map_err(|e| EdenError::io(path, e))?;
    Ok(SaveState::from_json(&text, path)?.into_entity())
}

pub fn lock(entity: &mut Entity) {
    entity.locked = true;
    for f in entity.functomes.values_mut() {
        f.locked = true;
    }
}

pub fn unlock(entity: &mut Entity) {
    entity.locked = false;
    for f in entity.functomes.values_mut() {
        f.locked = false;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub soma: Vec3,
    pub dendrites: Vec<Vec3>,
    pub axon_terminals: Vec<Vec3>,
    pub stability: f64,
    /// Plane the node is currently trained toward.
    pub goal_z: Option<usize>,
    pub spike_planes: Vec<usize>,
    pub identity_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReading {
    pub probe: ProbeId,
    pub value: f64,
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub epoch: u64,
    pub locked: bool,
    pub stability_threshold: f64,
    pub nodes: Vec<NodeRecord>,
    pub spike_count: usize,
    pub pruned: Vec<NodeId>,
    pub born: Vec<NodeId>,
    pub apoptosed: Vec<NodeId>,
    pub probe_readings: Vec<ProbeReading>,
    pub environment_events: Vec<EnvironmentEvent>,
}

impl SessionRecord {
    pub fn new(report: &EpochReport, entity: &Entity, events: Vec<EnvironmentEvent>) -> Self {
        let nodes = entity
            .nodes
            .values()
            .map(|n| NodeRecord {
                id: n.id,
                soma: n.soma_position,
                dendrites: n.dendrites.iter().map(|d| d.position).collect(),
                axon_terminals: n.axon_terminals.iter().map(|t| t.position).collect(),
                stability: n.stability_index,
                goal_z: n.goal.as_ref().map(|g| g.z_index),
                spike_planes: report
                    .spikes
                    .get(&n.id)
                    .map(|s| s.iter().map(|s| s.z_index).collect())
                    .unwrap_or_default(),
                identity_hash: n.identity_hash.clone(),
            })
            .collect();
        Self {
            epoch: report.epoch,
            locked: report.locked,
            stability_threshold: entity.config.stability_prune_threshold,
            nodes,
            spike_count: report.spike_count(),
            pruned: report.pruned.clone(),
            born: report.born.clone(),
            apoptosed: report.apoptosed.clone(),
            probe_readings: entity
                .output_probes
                .iter()
                .zip(&report.output_readings)
                .map(|(p, v)| ProbeReading { probe: p.id, value: *v })
                .collect(),
            environment_events: events,
        }
    }
}

/// Append-only JSON-lines writer.
pub struct SessionLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl SessionLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| EdenError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, record: &SessionRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| EdenError::io(&self.path, e))
    }
}

pub fn read_session_log(path: &Path) -> Result<Vec<SessionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| EdenError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EdenError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Precondition {
    EpochAtLeast(u64),
    OutputReadingAtLeast { probe: ProbeId, value: f64 },
    NodeCountAtLeast(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    AddInputProbe { position: Vec3, pattern: Vec<Frame> },
    RemoveInputProbe(ProbeId),
    DepositPayload(TransArchPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentControlRule {
    pub precondition: Precondition,
    pub effect: Effect,
    #[serde(default)]
    pub repeating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentEvent {
    pub rule: usize,
    pub epoch: u64,
    pub description: String,
}

pub fn load_rules(path: &Path) -> Result<Vec<EnvironmentControlRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| EdenError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EdenError::malformed(path, &e))
}

fn holds(pre: &Precondition, entity: &Entity) -> bool {
    match pre {
        Precondition::EpochAtLeast(k) => entity.entity_clock >= *k,
        Precondition::OutputReadingAtLeast { probe, value } => entity
            .output_probes
            .iter()
            .find(|p| p.id == *probe)
            .and_then(|p| p.last_reading())
            .is_some_and(|r| r >= *value),
        Precondition::NodeCountAtLeast(n) => entity.nodes.len() >= *n,
    }
}

/// Fires every rule whose precondition holds, before the next Propagate.
/// A rule whose effect cannot apply is reported and counts as fired.
pub fn apply_environment_rules(entity: &mut Entity, rules: &[EnvironmentControlRule]) -> Vec<EnvironmentEvent> {
    let mut events = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        if !rule.repeating && entity.fired_rules.contains(&i) {
            continue;
        }
        if !holds(&rule.precondition, entity) {
            continue;
        }
        let description = match &rule.effect {
            Effect::AddInputProbe { position, pattern } => {
                match entity.add_input_probe(entity.config.bounds.clamp(*position), pattern.clone()) {
                    Ok(id) => format!("input probe {id} added"),
                    Err(e) => format!("input probe not added: {e}"),
                }
            }
            Effect::RemoveInputProbe(id) => {
                let before = entity.input_probes.len();
                entity.input_probes.retain(|p| p.id != *id);
                if entity.input_probes.len() < before {
                    format!("input probe {id} removed")
                } else {
                    format!("input probe {id} not present")
                }
            }
            Effect::DepositPayload(payload) => match entity.grid.deposit(payload.clone()) {
                Ok(()) => format!("{:?} payload {} deposited", payload.kind, payload.index),
                Err(e) => format!("payload not deposited: {e}"),
            },
        };
        if !rule.repeating {
            entity.fired_rules.insert(i);
        }
        events.push(EnvironmentEvent {
            rule: i,
            epoch: entity.entity_clock,
            description,
        });
    }
    events
}

/// Runs `epochs` epochs with rules applied before each one. Records go to
/// `log` when given; a log failure stops the run after the epoch that
/// produced it, leaving the entity consistent.
pub fn train(
    entity: &mut Entity,
    epochs: u64,
    rules: &[EnvironmentControlRule],
    mut log: Option<&mut SessionLog>,
) -> Result<Vec<EpochReport>> {
    let mut reports = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        let events = apply_environment_rules(entity, rules);
        let report = entity.run_epoch()?;
        if let Some(log) = log.as_deref_mut() {
            log.append(&SessionRecord::new(&report, entity, events))?;
        }
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub epochs: u64,
    pub identical: bool,
    pub first_divergence: Option<u64>,
}

/// Runs the same save state twice from independent deserializations and
/// compares the serialized reports byte for byte.
pub fn replay_verify(state_json: &str, epochs: u64, rules: &[EnvironmentControlRule]) -> Result<ReplayVerdict> {
    let run = || -> Result<Vec<String>> {
        let mut entity = SaveState::from_json(state_json, Path::new("<replay>"))?.into_entity();
        train(&mut entity, epochs, rules, None)?
            .iter()
            .map(|r| serde_json::to_string(r).map_err(EdenError::from))
            .collect()
    };
    let a = run()?;
    let b = run()?;
    let first_divergence = a.iter().zip(&b).position(|(x, y)| x != y).map(|i| i as u64);
    Ok(ReplayVerdict {
        epochs,
        identical: first_divergence.is_none() && a.len() == b.len(),
        first_divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::probe::FrameEntry;

    fn entity() -> Entity {
        let mut e = Entity::seed(EngineConfig {
            seed: 5,
            initial_nodes: 4,
            ..EngineConfig::default()
        })
        .unwrap();
        e.set_input_pattern(vec![Frame {
            entries: vec![FrameEntry {
                offset: Vec3::ZERO,
                index: 1,
                magnitude: 3.0,
            }],
            jitter: Some(0.1),
        }])
        .unwrap();
        e
    }

    #[test]
    fn save_load_save_is_a_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.eden.json");
        let b = dir.path().join("b.eden.json");
        let mut e = entity();
        train(&mut e, 3, &[], None).unwrap();
        save(&e, &a).unwrap();
        save(&load(&a).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn truncated_and_mismatched_documents_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.eden.json");
        let text = SaveState::capture(&entity()).to_json().unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load(&path), Err(EdenError::Malformed { .. })));
        std::fs::write(&path, text.replacen("\"format_version\": 1", "\"format_version\": 7", 1)).unwrap();
        assert!(matches!(load(&path), Err(EdenError::VersionMismatch { found: 7, .. })));
        let renamed = text.replacen("\"Apoptosis\"", "\"Necrosis\"", 1);
        if renamed != text {
            std::fs::write(&path, renamed).unwrap();
            assert!(matches!(load(&path), Err(EdenError::Malformed { .. })));
        }
    }

    #[test]
    fn lock_survives_roundtrip_and_unlock_restores() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.eden.json");
        let mut e = entity();
        lock(&mut e);
        save(&e, &path).unwrap();
        let mut back = load(&path).unwrap();
        assert!(back.locked);
        assert!(back.run_epoch().unwrap().locked);
        unlock(&mut back);
        assert!(!back.run_epoch().unwrap().locked);
    }

    #[test]
    fn resumed_run_matches_uninterrupted_run() {
        let mut straight = entity();
        let full: Vec<String> = train(&mut straight, 12, &[], None)
            .unwrap()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();

        let mut first = entity();
        let mut got: Vec<String> = train(&mut first, 5, &[], None)
            .unwrap()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        let text = SaveState::capture(&first).to_json().unwrap();
        let mut resumed = SaveState::from_json(&text, Path::new("mem")).unwrap().into_entity();
        got.extend(
            train(&mut resumed, 7, &[], None)
                .unwrap()
                .iter()
                .map(|r| serde_json::to_string(r).unwrap()),
        );
        assert_eq!(got, full);
    }

    #[test]
    fn rules_fire_once_unless_repeating() {
        let mut e = entity();
        let probe_rule = EnvironmentControlRule {
            precondition: Precondition::EpochAtLeast(2),
            effect: Effect::AddInputProbe {
                position: Vec3::new(1.0, 1.0, 1.0),
                pattern: e.input_probes[0].pattern.clone(),
            },
            repeating: false,
        };
        let deposit_rule = EnvironmentControlRule {
            precondition: Precondition::NodeCountAtLeast(1),
            effect: Effect::DepositPayload(TransArchPayload::transmitter(0, Vec3::ZERO, 1.0, 2, true)),
            repeating: true,
        };
        let rules = vec![probe_rule, deposit_rule];
        let mut fired = Vec::new();
        for _ in 0..5 {
            let events = apply_environment_rules(&mut e, &rules);
            fired.push(events.iter().map(|ev| ev.rule).collect::<Vec<_>>());
            e.run_epoch().unwrap();
        }
        assert_eq!(fired[0], vec![1]);
        assert_eq!(fired[2], vec![0, 1]);
        assert_eq!(fired[3], vec![1]);
        assert_eq!(e.input_probes.len(), 2);
        assert!(apply_environment_rules(&mut e, &[]).is_empty());
    }

    #[test]
    fn rules_parse_from_json() {
        let rules: Vec<EnvironmentControlRule> = serde_json::from_str(
            r#"[{"precondition": {"epoch_at_least": 5},
                 "effect": {"remove_input_probe": 0}},
                {"precondition": {"output_reading_at_least": {"probe": 0, "value": 2.5}},
                 "effect": {"add_input_probe": {"position": [1, 1, 1], "pattern": [{"entries": []}]}},
                 "repeating": true}]"#,
        )
        .unwrap();
        assert_eq!(rules.len(), 2);
        assert!(rules[1].repeating);
    }

    #[test]
    fn log_roundtrip_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.session.jsonl");
        let mut e = entity();
        {
            let mut log = SessionLog::open(&path).unwrap();
            train(&mut e, 4, &[], Some(&mut log)).unwrap();
        }
        let records = read_session_log(&path).unwrap();
        assert_eq!(records.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![0, 1, 2, 3]);

        let state = SaveState::capture(&e).to_json().unwrap();
        let verdict = replay_verify(&state, 6, &[]).unwrap();
        assert!(verdict.identical);
    }
}
