//! Process nodes: soma, neurites and the CEM they drive.

use crate::cem::{Deposit, GoalPlane, PassParams, PassTrace, PlaneSpike, PwrTensor, SpikeEvent};
use crate::config::EngineConfig;
use crate::error::{EdenError, Result};
use crate::geom::{Bounds, Vec3};
use crate::grid::{NeuralGrid, PayloadId, PayloadKind, TransArchPayload};
use crate::stability::SpikeDistribution;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type NodeId = u64;
pub type FunctomeId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCone {
    pub step_size: f64,
    pub active: bool,
    pub attractant_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrite {
    pub position: Vec3,
    pub pickup_radius: f64,
    pub accepted_transmitter_indices: BTreeSet<u32>,
    pub gain: f64,
    pub growth_cone: GrowthCone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxonTerminal {
    pub position: Vec3,
    pub emit_transmitter_index: u32,
    pub emit_magnitude: f64,
    pub growth_cone: GrowthCone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeState {
    Generation,
    Discrimination,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalUpdate {
    Created,
    Replaced,
    Kept,
}

/// Inputs gathered by one node from the committed grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollectedInputs {
    pub deposits: Vec<Deposit>,
    pub consumed: Vec<PayloadId>,
    /// Target action codes carried by received architectors.
    pub architectors: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessNode {
    pub id: NodeId,
    pub soma_position: Vec3,
    pub cem: PwrTensor,
    pub min_e: f64,
    pub dr: f64,
    pub at_mod: f64,
    pub dendrites: Vec<Dendrite>,
    pub axon_terminals: Vec<AxonTerminal>,
    pub goal: Option<GoalPlane>,
    pub spike_dist_prev: SpikeDistribution,
    pub spike_dist_curr: SpikeDistribution,
    pub stability_index: f64,
    pub node_clock: u64,
    pub stimulated_this_epoch: bool,
    pub functome_id: FunctomeId,
    pub identity_hash: String,
    /// EMA of payloads accepted per epoch; `None` until the first epoch closes.
    pub baseline_input_count: Option<f64>,
    pub permitted_transmitters: BTreeSet<u32>,
    /// Architector index -> target action code.
    pub permitted_architectors: BTreeMap<u32, u8>,
    /// Spike counts of the most recent closed epochs, oldest first.
    pub spike_history: VecDeque<u32>,
    pub spikes_this_epoch: u32,
    pub inputs_this_epoch: u32,
    pub last_spike_z: Option<usize>,
    /// Peak plane energy of the most recent pass.
    pub stored_energy: f64,
    pub pending_architectors: Vec<u8>,
    pub marked_for_removal: bool,
    #[serde(skip)]
    trace: PassTrace,
}

impl ProcessNode {
    pub fn new(
        id: NodeId,
        soma_position: Vec3,
        cem: PwrTensor,
        min_e: f64,
        dr: f64,
        functome_id: FunctomeId,
    ) -> Result<Self> {
        if !(min_e.is_finite() && min_e > 0.0) {
            return Err(EdenError::InvalidConfig(vec![format!("min_e must be > 0 (got {min_e})")]));
        }
        if !(dr.is_finite() && (0.0..0.5).contains(&dr)) {
            return Err(EdenError::InvalidConfig(vec![format!("dr must be in [0, 0.5) (got {dr})")]));
        }
        let bins = cem.dim_z();
        Ok(Self {
            id,
            soma_position,
            cem,
            min_e,
            dr,
            at_mod: 1.0,
            dendrites: Vec::new(),
            axon_terminals: Vec::new(),
            goal: None,
            spike_dist_prev: SpikeDistribution::new(bins),
            spike_dist_curr: SpikeDistribution::new(bins),
            stability_index: 1.0,
            node_clock: 0,
            stimulated_this_epoch: false,
            functome_id,
            identity_hash: String::new(),
            baseline_input_count: None,
            permitted_transmitters: BTreeSet::new(),
            permitted_architectors: BTreeMap::new(),
            spike_history: VecDeque::new(),
            spikes_this_epoch: 0,
            inputs_this_epoch: 0,
            last_spike_z: None,
            stored_energy: 0.0,
            pending_architectors: Vec::new(),
            marked_for_removal: false,
            trace: PassTrace::default(),
        })
    }

    /// Entry-plane cells, and so the dendrite limit.
    pub fn max_dendrites(&self) -> usize {
        self.cem.dim_xy() * self.cem.dim_xy()
    }

    pub fn add_dendrite(&mut self, dendrite: Dendrite) -> Result<()> {
        if self.dendrites.len() >= self.max_dendrites() {
            return Err(EdenError::Structural(format!(
                "node {} already has {} dendrites, the entry-plane limit",
                self.id,
                self.dendrites.len()
            )));
        }
        if dendrite.accepted_transmitter_indices.is_empty() {
            return Err(EdenError::Structural(format!(
                "node {}: a dendrite must accept at least one transmitter index",
                self.id
            )));
        }
        self.dendrites.push(dendrite);
        Ok(())
    }

    pub fn add_axon_terminal(&mut self, terminal: AxonTerminal) -> Result<()> {
        if !(terminal.emit_magnitude.is_finite() && terminal.emit_magnitude > 0.0) {
            return Err(EdenError::Structural(format!(
                "node {}: axon emit magnitude must be > 0",
                self.id
            )));
        }
        self.axon_terminals.push(terminal);
        Ok(())
    }

    /// Entry cell fed by dendrite `ordinal`.
    pub fn entry_cell(&self, ordinal: usize) -> (usize, usize) {
        let n = self.cem.dim_xy();
        (ordinal % n, ordinal / n)
    }

    /// Clears the per-epoch counters before propagation.
    pub fn begin_epoch(&mut self) {
        self.stimulated_this_epoch = false;
        self.spikes_this_epoch = 0;
        self.inputs_this_epoch = 0;
        self.last_spike_z = None;
        self.pending_architectors.clear();
    }

    /// Gathers transmitter energy and architectors within reach of each
    /// dendrite. Payloads already in `claimed` are skipped; everything this
    /// node consumes is added to it.
    pub fn collect_inputs(
        &mut self,
        grid: &NeuralGrid,
        claimed: &mut BTreeSet<PayloadId>,
    ) -> Result<CollectedInputs> {
        if self.dendrites.len() > self.max_dendrites() {
            return Err(EdenError::Structural(format!(
                "node {} has more dendrites than entry cells",
                self.id
            )));
        }
        let mut out = CollectedInputs::default();
        for (ordinal, dendrite) in self.dendrites.iter().enumerate() {
            let (x, y) = self.entry_cell(ordinal);
            for hit in grid.query_radius(&dendrite.position, dendrite.pickup_radius) {
                if claimed.contains(&hit.id) {
                    continue;
                }
                let payload = hit.payload;
                match payload.kind {
                    PayloadKind::Transmitter => {
                        if !dendrite.accepted_transmitter_indices.contains(&payload.index) {
                            continue;
                        }
                        let magnitude = payload.magnitude * dendrite.gain * payload.sign();
                        out.deposits.push(Deposit::new(x, y, magnitude));
                    }
                    PayloadKind::Architector => {
                        if let Some(code) = payload.target_action() {
                            out.architectors.push(code);
                        }
                    }
                }
                claimed.insert(hit.id);
                out.consumed.push(hit.id);
            }
        }
        if out.deposits.iter().any(|d| d.magnitude != 0.0) {
            self.stimulated_this_epoch = true;
        }
        self.inputs_this_epoch += out.deposits.len() as u32;
        self.pending_architectors.extend(out.architectors.iter().copied());
        Ok(out)
    }

    fn pass_params(&self) -> PassParams {
        PassParams {
            min_e: self.min_e,
            dr: self.dr,
            at_mod: self.at_mod,
        }
    }

    /// One CEM pass plus everything that follows a spike: histogram,
    /// router reinforcement, goal maintenance, SGD toward the goal, reset.
    pub fn step_node(
        &mut self,
        deposits: &[Deposit],
        epoch: u64,
        learning_rate: f64,
        goal_refresh_threshold: f64,
    ) -> Result<Option<SpikeEvent>> {
        let params = self.pass_params();
        let spike = self.cem.forward_propagate(deposits, &params, &mut self.trace)?;
        let Some(spike) = spike else {
            self.stored_energy = (0..self.cem.dim_z())
                .map(|z| self.cem.plane_energy(z))
                .fold(0.0, f64::max);
            return Ok(None);
        };
        self.spike_dist_curr.record(spike.z_index)?;
        self.spikes_this_epoch += 1;
        self.last_spike_z = Some(spike.z_index);
        self.cem.update_routers_on_spike(&spike);
        self.update_goal(&spike, goal_refresh_threshold)?;
        if let Some(goal) = self.goal.as_ref().filter(|g| g.z_index == spike.z_index) {
            self.cem.backprop_to_goal(goal, &self.trace, learning_rate)?;
        }
        self.stored_energy = spike.plane_energy;
        self.cem.reset_propagation();
        Ok(Some(spike.attribute(self.id, epoch)))
    }

    /// Keeps, creates or replaces the backprop goal after a spike.
    pub fn update_goal(&mut self, spike: &PlaneSpike, refresh_threshold: f64) -> Result<GoalUpdate> {
        let update = match &self.goal {
            None => GoalUpdate::Created,
            Some(_) if self.stability_index < refresh_threshold => GoalUpdate::Replaced,
            Some(_) => GoalUpdate::Kept,
        };
        if update != GoalUpdate::Kept {
            self.goal = Some(self.cem.goal_from_plane(spike.z_index)?);
        }
        Ok(update)
    }

    /// Whether this epoch's spike count departs from the rolling mean by
    /// more than `sigma` rolling standard deviations.
    pub fn architector_release(&self, sigma: f64) -> bool {
        if self.spike_history.is_empty() {
            return false;
        }
        let n = self.spike_history.len() as f64;
        let mean = self.spike_history.iter().map(|&c| f64::from(c)).sum::<f64>() / n;
        let var = self
            .spike_history
            .iter()
            .map(|&c| (f64::from(c) - mean).powi(2))
            .sum::<f64>()
            / n;
        (f64::from(self.spikes_this_epoch) - mean).abs() > sigma * var.sqrt()
    }

    /// Payloads released by a spike: one transmitter per terminal whose
    /// index the node may produce, plus architectors on abnormal spiking.
    pub fn emit_payloads(&self, spike: &SpikeEvent, cfg: &EngineConfig, bounds: &Bounds) -> Vec<TransArchPayload> {
        let mut out = Vec::new();
        let scale = spike.plane_energy / self.min_e;
        for terminal in &self.axon_terminals {
            let index = terminal.emit_transmitter_index;
            if !self.permitted_transmitters.contains(&index) {
                log::debug!("node {}: transmitter index {index} not permitted, emission skipped", self.id);
                continue;
            }
            out.push(TransArchPayload::transmitter(
                index,
                bounds.clamp(terminal.position),
                terminal.emit_magnitude * scale,
                cfg.payload_ttl,
                !cfg.is_inhibitory(index),
            ));
        }
        if !self.permitted_architectors.is_empty() && self.architector_release(cfg.architector_sigma) {
            let producing: Vec<(&u32, &u8)> = self.permitted_architectors.iter().collect();
            for (ordinal, terminal) in self.axon_terminals.iter().enumerate() {
                let (index, action) = producing[ordinal % producing.len()];
                out.push(TransArchPayload::architector(
                    *index,
                    bounds.clamp(terminal.position),
                    terminal.emit_magnitude,
                    cfg.payload_ttl,
                    *action,
                ));
            }
        }
        out
    }

    /// Epoch-end CEM housekeeping: routers that carried energy in an epoch
    /// without any spike are redrawn, residual energy is dropped, and the
    /// spike count joins the rolling window.
    pub fn end_propagation<R: rand::Rng + ?Sized>(&mut self, rng: &mut R, window: usize) -> usize {
        let randomized = if self.spikes_this_epoch == 0 {
            self.cem.randomize_stale_routers(rng)
        } else {
            0
        };
        self.cem.reset_propagation();
        self.spike_history.push_back(self.spikes_this_epoch);
        while self.spike_history.len() > window {
            self.spike_history.pop_front();
        }
        randomized
    }

    /// Classifies the epoch and folds the input count into the baseline.
    pub fn classify_state(&mut self, stability_before: f64, alpha: f64) -> NodeState {
        let inputs = f64::from(self.inputs_this_epoch);
        let state = match self.baseline_input_count {
            None => NodeState::Neutral,
            Some(baseline) => {
                let at_goal = match (&self.goal, self.last_spike_z) {
                    (Some(goal), Some(z)) => goal.z_index == z,
                    _ => false,
                };
                if at_goal && inputs < baseline {
                    NodeState::Generation
                } else if inputs > baseline && self.stability_index <= stability_before {
                    NodeState::Discrimination
                } else {
                    NodeState::Neutral
                }
            }
        };
        self.baseline_input_count = Some(match self.baseline_input_count {
            None => inputs,
            Some(b) => b + alpha * (inputs - b),
        });
        state
    }

    /// Moves each active growth cone one step up its attractant gradient.
    pub fn grow(&mut self, grid: &NeuralGrid, sigma: f64, max_step: f64) -> usize {
        let bounds = *grid.bounds();
        let mut moved = 0;
        let mut advance = |position: &mut Vec3, cone: &GrowthCone| {
            if !cone.active || cone.step_size <= 0.0 {
                return;
            }
            let g = grid.density_gradient(position, cone.attractant_index, sigma);
            let norm = g.norm();
            if norm.is_nan() || norm <= 1e-12 {
                return;
            }
            let step = cone.step_size.min(max_step);
            let next = bounds.clamp(*position + g * (step / norm));
            if next != *position {
                *position = next;
                moved += 1;
            }
        };
        for d in &mut self.dendrites {
            advance(&mut d.position, &d.growth_cone);
        }
        for t in &mut self.axon_terminals {
            advance(&mut t.position, &t.growth_cone);
        }
        moved
    }
}
