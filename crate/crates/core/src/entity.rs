//! The whole organism and the three-phase epoch loop:
//! Propagate, Evaluate and Prune, Develop.

use crate::cem::{PwrTensor, SpikeEvent};
use crate::config::EngineConfig;
use crate::error::Result;
use crate::functome::{
    execute_action, functome_hash, mutate, node_hash, scan_available_actions, ActionEnv, ActionGene, BirthRequest,
    Functome, GeneRanges, InitialStructure, MutationRecord, PrerequisiteContext, StructuralChange,
};
use crate::geom::{Bounds, Vec3};
use crate::grid::NeuralGrid;
use crate::node::{AxonTerminal, Dendrite, FunctomeId, GrowthCone, NodeId, NodeState, ProcessNode};
use crate::probe::{Frame, InputProbe, OutputProbe, ProbeId};
use crate::stability::stability_index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

fn unseeded_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub config: EngineConfig,
    pub nodes: BTreeMap<NodeId, ProcessNode>,
    pub functomes: BTreeMap<FunctomeId, Functome>,
    pub grid: NeuralGrid,
    pub input_probes: Vec<InputProbe>,
    pub output_probes: Vec<OutputProbe>,
    pub entity_clock: u64,
    pub next_node_id: NodeId,
    pub next_functome_id: FunctomeId,
    pub next_probe_id: ProbeId,
    /// Indices of non-repeating environment rules that already fired.
    pub fired_rules: BTreeSet<usize>,
    /// Carried by the save state rather than the entity document.
    #[serde(skip, default = "unseeded_rng")]
    pub rng: ChaCha8Rng,
    #[serde(skip)]
    pub locked: bool,
    #[serde(skip)]
    reported_invalid: BTreeSet<(FunctomeId, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMutation {
    pub node_id: NodeId,
    pub functome_id: FunctomeId,
    pub record: MutationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: u64,
    pub locked: bool,
    pub spikes: BTreeMap<NodeId, Vec<SpikeEvent>>,
    pub stimulated: Vec<NodeId>,
    pub stability: BTreeMap<NodeId, f64>,
    pub pruned: Vec<NodeId>,
    pub born: Vec<NodeId>,
    pub apoptosed: Vec<NodeId>,
    pub payloads_deposited: usize,
    pub payloads_consumed: usize,
    pub payloads_expired: usize,
    pub state_classification: BTreeMap<NodeId, NodeState>,
    pub changes: Vec<StructuralChange>,
    pub mutations: Vec<NodeMutation>,
    pub output_readings: Vec<f64>,
    pub node_count: usize,
}

impl EpochReport {
    fn new(epoch: u64, locked: bool) -> Self {
        Self {
            epoch,
            locked,
            spikes: BTreeMap::new(),
            stimulated: Vec::new(),
            stability: BTreeMap::new(),
            pruned: Vec::new(),
            born: Vec::new(),
            apoptosed: Vec::new(),
            payloads_deposited: 0,
            payloads_consumed: 0,
            payloads_expired: 0,
            state_classification: BTreeMap::new(),
            changes: Vec::new(),
            mutations: Vec::new(),
            output_readings: Vec::new(),
            node_count: 0,
        }
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.values().map(Vec::len).sum()
    }
}

fn uniform_in<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Vec3 {
    let mut c = [0.0; 3];
    for (i, v) in c.iter_mut().enumerate() {
        let (lo, hi) = (bounds.min.0[i], bounds.max.0[i]);
        *v = lo + rng.random::<f64>() * (hi - lo);
    }
    Vec3(c)
}

fn cone(cfg: &EngineConfig, attractant_index: u32) -> GrowthCone {
    GrowthCone {
        step_size: cfg.growth_step,
        active: true,
        attractant_index,
    }
}

impl Entity {
    /// An entity with no nodes.
    pub fn empty(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let grid = NeuralGrid::new(config.bounds, config.grid_cell_size)?;
        let mut output_probes = Vec::new();
        for (i, spec) in config.output_probes.iter().enumerate() {
            output_probes.push(OutputProbe::new(i as ProbeId, spec.position, spec.radius)?);
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            next_probe_id: output_probes.len() as ProbeId,
            config,
            nodes: BTreeMap::new(),
            functomes: BTreeMap::new(),
            grid,
            input_probes: Vec::new(),
            output_probes,
            entity_clock: 0,
            next_node_id: 0,
            next_functome_id: 0,
            fired_rules: BTreeSet::new(),
            locked: false,
            reported_invalid: BTreeSet::new(),
        })
    }

    /// Seeds `config.initial_nodes` random nodes, each with its own
    /// functome of `config.initial_genes` random genes.
    pub fn seed(config: EngineConfig) -> Result<Self> {
        let mut e = Self::empty(config)?;
        let cfg = e.config.clone();
        let ranges = GeneRanges::from_config(&cfg);
        for _ in 0..cfg.initial_nodes {
            let rng = &mut e.rng;
            let soma = uniform_in(&cfg.bounds, rng);
            let cem = PwrTensor::random(cfg.dim_xy, cfg.dim_z, rng)?;
            let fid = e.next_functome_id;
            let id = e.next_node_id;
            let mut node = ProcessNode::new(id, soma, cem, cfg.min_e, cfg.dr, fid)?;
            node.at_mod = cfg.at_mod;
            for _ in 0..cfg.initial_dendrites {
                let index = rng.random_range(0..cfg.transmitter_kinds);
                node.add_dendrite(Dendrite {
                    position: uniform_in(&cfg.bounds, rng),
                    pickup_radius: cfg.pickup_radius,
                    accepted_transmitter_indices: [index].into_iter().collect(),
                    gain: cfg.dendrite_gain,
                    growth_cone: cone(&cfg, index),
                })?;
            }
            for _ in 0..cfg.initial_axons {
                let index = rng.random_range(0..cfg.transmitter_kinds);
                let attractant = rng.random_range(0..cfg.transmitter_kinds);
                node.add_axon_terminal(AxonTerminal {
                    position: uniform_in(&cfg.bounds, rng),
                    emit_transmitter_index: index,
                    emit_magnitude: cfg.emit_magnitude,
                    growth_cone: cone(&cfg, attractant),
                })?;
                node.permitted_transmitters.insert(index);
            }
            let genes = (0..cfg.initial_genes).map(|_| ActionGene::random(&ranges, rng)).collect();
            let mut functome = Functome::new(fid, genes, cfg.mutation_rate);
            functome.initial_structure = Some(InitialStructure {
                soma,
                dendrites: node.dendrites.iter().map(|d| d.position).collect(),
                axon_terminals: node.axon_terminals.iter().map(|t| t.position).collect(),
            });
            node.identity_hash = node_hash(&node, &functome);
            e.functomes.insert(fid, functome);
            e.nodes.insert(id, node);
            e.next_functome_id += 1;
            e.next_node_id += 1;
        }
        Ok(e)
    }

    /// Installs `frames` on the entity's input probe at the bounds center.
    /// A probe already carrying the same pattern keeps its cursor.
    pub fn set_input_pattern(&mut self, frames: Vec<Frame>) -> Result<()> {
        if self.input_probes.len() == 1 && self.input_probes[0].pattern == frames {
            return Ok(());
        }
        let probe = InputProbe::new(self.next_probe_id, self.config.bounds.center(), frames)?;
        self.next_probe_id += 1;
        self.input_probes = vec![probe];
        Ok(())
    }

    pub fn add_input_probe(&mut self, position: Vec3, frames: Vec<Frame>) -> Result<ProbeId> {
        let id = self.next_probe_id;
        self.input_probes.push(InputProbe::new(id, position, frames)?);
        self.next_probe_id += 1;
        Ok(id)
    }

    pub fn functome_of(&self, node: &ProcessNode) -> Option<&Functome> {
        self.functomes.get(&node.functome_id)
    }

    /// Digest of every node's identity hash and every gene list, in id order.
    pub fn gene_snapshot(&self) -> Vec<(FunctomeId, String)> {
        self.functomes.iter().map(|(id, f)| (*id, functome_hash(f))).collect()
    }

    /// One full epoch. Locked entities only propagate and age.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let mut report = EpochReport::new(self.entity_clock, self.locked);
        self.propagate_phase(&mut report)?;
        if !self.locked {
            self.evaluate_prune_phase(&mut report)?;
            self.develop_phase(&mut report)?;
        } else {
            for node in self.nodes.values_mut() {
                let before = node.stability_index;
                report
                    .state_classification
                    .insert(node.id, node.classify_state(before, self.config.baseline_alpha));
            }
        }
        report.payloads_expired = self
            .grid
            .decay_and_expire(self.config.payload_decay, self.config.epsilon_magnitude);
        for node in self.nodes.values_mut() {
            node.node_clock += 1;
        }
        self.entity_clock += 1;
        report.stability = self.nodes.iter().map(|(id, n)| (*id, n.stability_index)).collect();
        report.node_count = self.nodes.len();
        Ok(report)
    }

    /// Probes write, nodes read the frozen grid and step their CEMs, then
    /// emissions and consumptions commit in node-id order.
    pub fn propagate_phase(&mut self, report: &mut EpochReport) -> Result<()> {
        let cfg = &self.config;
        for probe in &mut self.input_probes {
            report.payloads_deposited +=
                probe.deposit_frame(&mut self.grid, cfg.payload_ttl, |i| cfg.is_inhibitory(i), &mut self.rng)?;
        }
        self.grid.commit();

        let epoch = self.entity_clock;
        let mut claimed = BTreeSet::new();
        let mut emitted = Vec::new();
        let mut consumed = Vec::new();
        for node in self.nodes.values_mut() {
            node.begin_epoch();
            let inputs = node.collect_inputs(&self.grid, &mut claimed)?;
            consumed.extend(inputs.consumed);
            if let Some(spike) = node.step_node(&inputs.deposits, epoch, cfg.learning_rate, cfg.goal_refresh_threshold)? {
                emitted.extend(node.emit_payloads(&spike, cfg, &cfg.bounds));
                report.spikes.entry(node.id).or_default().push(spike);
            }
            if node.stimulated_this_epoch {
                report.stimulated.push(node.id);
            }
        }
        report.payloads_consumed = consumed.len();
        report.payloads_deposited += emitted.len();
        for id in consumed {
            self.grid.consume(id);
        }
        for payload in emitted {
            self.grid.deposit(payload)?;
        }
        self.grid.commit();

        for probe in &mut self.output_probes {
            let reading = report
                .spikes
                .iter()
                .filter(|(id, _)| {
                    self.nodes[*id]
                        .axon_terminals
                        .iter()
                        .any(|t| probe.covers(&t.position))
                })
                .flat_map(|(_, s)| s.iter().map(|s| s.plane_energy))
                .sum::<f64>();
            probe.history.push(reading);
            report.output_readings.push(reading);
        }

        for node in self.nodes.values_mut() {
            node.end_propagation(&mut self.rng, cfg.spike_rate_window);
        }
        Ok(())
    }

    /// Recomputes stability for stimulated nodes and removes those below
    /// the prune threshold. Unstimulated nodes are left untouched.
    pub fn evaluate_prune_phase(&mut self, report: &mut EpochReport) -> Result<()> {
        let threshold = self.config.stability_prune_threshold;
        let alpha = self.config.baseline_alpha;
        let mut doomed = Vec::new();
        for node in self.nodes.values_mut() {
            let before = node.stability_index;
            if node.stimulated_this_epoch {
                node.stability_index = stability_index(&node.spike_dist_prev, &node.spike_dist_curr)?;
                node.spike_dist_prev = node.spike_dist_curr.clone();
                node.spike_dist_curr.reset();
                if node.stability_index < threshold {
                    doomed.push(node.id);
                }
            }
            report.state_classification.insert(node.id, node.classify_state(before, alpha));
        }
        for id in &doomed {
            self.nodes.remove(id);
            log::debug!("node {id} pruned");
        }
        report.pruned = doomed;
        self.collect_functomes();
        Ok(())
    }

    /// Gene expression, architector responses, growth, mutation, then the
    /// birth/apoptosis commit.
    pub fn develop_phase(&mut self, report: &mut EpochReport) -> Result<()> {
        let cfg = self.config.clone();
        let ranges = GeneRanges::from_config(&cfg);
        let mut births: Vec<BirthRequest> = Vec::new();
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();

        for id in ids {
            let Some(functome) = self.functomes.get(&self.nodes[&id].functome_id) else {
                continue;
            };
            let fid = functome.id;
            let mut invalid = Vec::new();
            let firing: Vec<ActionGene> = {
                let ctx = PrerequisiteContext {
                    node: &self.nodes[&id],
                    grid: &self.grid,
                    entity_clock: self.entity_clock,
                    scan_radius: cfg.action_scan_radius,
                };
                scan_available_actions(functome, &ctx, |i, e| invalid.push((i, e.to_string())))
                    .into_iter()
                    .map(|(_, g)| g.clone())
                    .collect()
            };
            for (i, msg) in invalid {
                if self.reported_invalid.insert((fid, i)) {
                    log::warn!("functome {fid} gene {i} is invalid and will not fire: {msg}");
                }
            }
            let responders: Vec<ActionGene> = self.nodes[&id]
                .pending_architectors
                .iter()
                .filter_map(|code| functome.genes.iter().find(|g| g.enabled && g.action.code() == *code))
                .cloned()
                .collect();

            let node = self.nodes.get_mut(&id).expect("node listed above");
            let mut env = ActionEnv {
                cfg: &cfg,
                bounds: cfg.bounds,
                births: &mut births,
            };
            for gene in firing.iter().chain(&responders) {
                report.changes.push(execute_action(gene, node, &mut env, &mut self.rng));
            }
            node.grow(&self.grid, cfg.gradient_sigma, cfg.max_step);
            let stability = node.stability_index;
            self.mutate_for(id, stability, &ranges, report);
        }

        let mut next_id = self.next_node_id;
        for birth in births {
            if self.nodes.len() >= cfg.max_nodes {
                log::info!("max_nodes reached, birth from node {} dropped", birth.parent);
                continue;
            }
            let Some(parent) = self.nodes.get(&birth.parent).cloned() else {
                continue;
            };
            let child = self.spawn_child(next_id, &parent, &birth)?;
            self.nodes.insert(next_id, child);
            report.born.push(next_id);
            next_id += 1;
        }
        self.next_node_id = next_id;

        let doomed: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.marked_for_removal)
            .map(|n| n.id)
            .collect();
        for id in &doomed {
            self.nodes.remove(id);
        }
        report.apoptosed = doomed;
        self.collect_functomes();

        for node in self.nodes.values_mut() {
            if let Some(f) = self.functomes.get(&node.functome_id) {
                node.identity_hash = node_hash(node, f);
            }
        }
        Ok(())
    }

    /// Mutates the functome used by `id`. A functome shared with other
    /// nodes is copied first so the mutation stays with this node.
    fn mutate_for(&mut self, id: NodeId, stability: f64, ranges: &GeneRanges, report: &mut EpochReport) {
        let fid = self.nodes[&id].functome_id;
        let Some(original) = self.functomes.get(&fid) else {
            return;
        };
        let mut candidate = original.clone();
        let records = mutate(&mut candidate, stability, self.config.stability_min, ranges, &mut self.rng);
        if records.is_empty() {
            return;
        }
        let shared = self.nodes.values().filter(|n| n.functome_id == fid).count() > 1;
        let target = if shared {
            let new_id = self.next_functome_id;
            self.next_functome_id += 1;
            candidate.id = new_id;
            candidate.lineage.push(fid);
            self.nodes.get_mut(&id).expect("node exists").functome_id = new_id;
            new_id
        } else {
            fid
        };
        self.functomes.insert(target, candidate);
        report.mutations.extend(records.into_iter().map(|record| NodeMutation {
            node_id: id,
            functome_id: target,
            record,
        }));
    }

    /// Fresh CEM and the parent's functome; neurites copy the parent's
    /// index choices and sit around the new soma.
    fn spawn_child(&mut self, id: NodeId, parent: &ProcessNode, birth: &BirthRequest) -> Result<ProcessNode> {
        let cfg = &self.config;
        let rng = &mut self.rng;
        let cem = PwrTensor::random(cfg.dim_xy, cfg.dim_z, rng)?;
        let mut child = ProcessNode::new(id, birth.position, cem, cfg.min_e, cfg.dr, birth.functome_id)?;
        child.at_mod = cfg.at_mod;
        let place = |rng: &mut ChaCha8Rng| {
            cfg.bounds
                .clamp(birth.position + crate::functome::random_unit(rng) * cfg.spawn_radius)
        };
        for d in &parent.dendrites {
            child.dendrites.push(Dendrite {
                position: place(rng),
                ..d.clone()
            });
        }
        for t in &parent.axon_terminals {
            child.axon_terminals.push(AxonTerminal {
                position: place(rng),
                ..t.clone()
            });
        }
        child.permitted_transmitters = parent.permitted_transmitters.clone();
        child.permitted_architectors = parent.permitted_architectors.clone();
        Ok(child)
    }

    /// Drops functomes no node refers to.
    fn collect_functomes(&mut self) {
        let live: BTreeSet<FunctomeId> = self.nodes.values().map(|n| n.functome_id).collect();
        self.functomes.retain(|id, _| live.contains(id));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cem::RouterOption;
    use crate::functome::{ActionType, PrerequisiteType};
    use crate::probe::FrameEntry;

    fn small_config(nodes: usize) -> EngineConfig {
        EngineConfig {
            seed: 11,
            initial_nodes: nodes,
            ..EngineConfig::default()
        }
    }

    fn always(action: ActionType) -> ActionGene {
        ActionGene {
            action,
            prerequisite: PrerequisiteType::EnabledAfterEntityClock,
            params: [("after".to_string(), 0.0)].into_iter().collect(),
            enabled: true,
        }
    }

    #[test]
    fn empty_entity_runs() {
        let mut e = Entity::seed(small_config(0)).unwrap();
        let r = e.run_epoch().unwrap();
        assert_eq!(r.epoch, 0);
        assert_eq!(r.spike_count(), 0);
        assert_eq!(r.node_count, 0);
        assert_eq!(e.entity_clock, 1);
    }

    #[test]
    fn seeding_is_deterministic_and_in_bounds() {
        let a = Entity::seed(small_config(5)).unwrap();
        let b = Entity::seed(small_config(5)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.nodes.len(), 5);
        assert_eq!(a.functomes.len(), 5);
        for n in a.nodes.values() {
            assert!(a.functomes.contains_key(&n.functome_id));
            assert!(a.config.bounds.contains(&n.soma_position));
            for d in &n.dendrites {
                assert!(a.config.bounds.contains(&d.position));
            }
            assert!(n.cem.weights().iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = EngineConfig {
            dr: 0.7,
            ..EngineConfig::default()
        };
        assert!(Entity::seed(cfg).is_err());
    }

    fn one_node_entity() -> Entity {
        let mut e = Entity::seed(EngineConfig {
            initial_nodes: 1,
            initial_genes: 0,
            initial_axons: 0,
            initial_dendrites: 1,
            min_e: 2.0,
            dr: 0.0,
            ..EngineConfig::default()
        })
        .unwrap();
        let n = e.nodes.get_mut(&0).unwrap();
        n.cem.fill_weights(1.0);
        n.cem.fill_routers(RouterOption::CENTER);
        n.dendrites[0].position = Vec3::new(4.0, 4.0, 4.0);
        n.dendrites[0].accepted_transmitter_indices = [0].into_iter().collect();
        e
    }

    fn pulse(magnitude: f64) -> Vec<Frame> {
        vec![Frame {
            entries: vec![FrameEntry {
                offset: Vec3::ZERO,
                index: 0,
                magnitude,
            }],
            jitter: None,
        }]
    }

    #[test]
    fn probe_input_reaches_the_cem_and_spikes() {
        let mut e = one_node_entity();
        e.set_input_pattern(pulse(1.0)).unwrap();
        let r = e.run_epoch().unwrap();
        let spikes = &r.spikes[&0];
        assert_eq!(spikes.len(), 1);
        assert_eq!(spikes[0].z_index, 2);
        assert_eq!(r.payloads_consumed, 1);
        assert_eq!(r.stimulated, vec![0]);
    }

    #[test]
    fn unstimulated_nodes_keep_their_stability() {
        let mut e = one_node_entity();
        e.nodes.get_mut(&0).unwrap().stability_index = 0.01;
        for _ in 0..5 {
            let r = e.run_epoch().unwrap();
            assert!(r.pruned.is_empty());
        }
        assert_eq!(e.nodes[&0].stability_index, 0.01);
    }

    #[test]
    fn neurogenesis_shares_functome_until_mutation() {
        let mut e = one_node_entity();
        e.functomes.get_mut(&0).unwrap().genes = vec![always(ActionType::StimulateNeuroGenesis)];
        let r = e.run_epoch().unwrap();
        assert_eq!(r.born, vec![1]);
        assert_eq!(e.nodes.len(), 2);
        assert_eq!(e.nodes[&1].functome_id, e.nodes[&0].functome_id);
        assert_eq!(e.functomes.len(), 1);
        assert_eq!(e.nodes[&1].dendrites.len(), 1);

        e.config.mutation_rate = 1.0;
        e.functomes.get_mut(&0).unwrap().mutation_rate = 1.0;
        e.config.stability_min = 1.0;
        e.nodes.get_mut(&0).unwrap().stability_index = 0.5;
        let mut r = EpochReport::new(0, false);
        e.mutate_for(0, 0.5, &GeneRanges::from_config(&e.config), &mut r);
        assert_eq!(r.mutations.len(), 1);
        assert_ne!(e.nodes[&0].functome_id, e.nodes[&1].functome_id);
        let copy = &e.functomes[&e.nodes[&0].functome_id];
        assert_eq!(copy.lineage, vec![0]);
    }

    #[test]
    fn apoptosis_removes_the_node_and_its_functome() {
        let mut e = one_node_entity();
        e.functomes.get_mut(&0).unwrap().genes = vec![always(ActionType::Apoptosis)];
        let r = e.run_epoch().unwrap();
        assert_eq!(r.apoptosed, vec![0]);
        assert!(e.nodes.is_empty());
        assert!(e.functomes.is_empty());
        assert_eq!(r.node_count, 0);
    }

    #[test]
    fn locked_epochs_only_propagate() {
        let mut e = one_node_entity();
        e.functomes.get_mut(&0).unwrap().genes = vec![always(ActionType::StimulateNeuroGenesis)];
        e.locked = true;
        e.set_input_pattern(pulse(1.0)).unwrap();
        for k in 0..3 {
            let r = e.run_epoch().unwrap();
            assert!(r.born.is_empty() && r.changes.is_empty());
            assert_eq!(r.spike_count(), 1);
            assert_eq!(e.entity_clock, k + 1);
        }
        assert_eq!(e.nodes.len(), 1);
    }

    #[test]
    fn output_probe_sums_spike_energy_near_terminals() {
        let mut e = one_node_entity();
        e.output_probes.push(OutputProbe::new(9, Vec3::new(1.0, 1.0, 1.0), 0.5).unwrap());
        e.nodes.get_mut(&0).unwrap().axon_terminals.push(AxonTerminal {
            position: Vec3::new(1.0, 1.0, 1.2),
            emit_transmitter_index: 3,
            emit_magnitude: 1.0,
            growth_cone: cone(&e.config, 0),
        });
        let r = e.run_epoch().unwrap();
        assert_eq!(r.output_readings, vec![0.0]);
        e.set_input_pattern(pulse(5.0)).unwrap();
        let r = e.run_epoch().unwrap();
        assert_eq!(r.output_readings, vec![5.0]);
    }

    #[test]
    fn same_seed_same_reports() {
        let run = || {
            let mut e = Entity::seed(small_config(6)).unwrap();
            e.set_input_pattern(pulse(3.0)).unwrap();
            (0..15)
                .map(|_| serde_json::to_string(&e.run_epoch().unwrap()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
