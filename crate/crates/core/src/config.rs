use crate::error::{EdenError, Result};
use crate::geom::{Bounds, Vec3};
use serde::{Deserialize, Serialize};

/// Placement of an output probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputProbeSpec {
    pub position: Vec3,
    pub radius: f64,
}

/// Every tunable of an entity. Missing keys in a config file take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub seed: u64,

    // CEM
    pub dim_xy: usize,
    pub dim_z: usize,
    pub min_e: f64,
    pub dr: f64,
    pub at_mod: f64,
    pub learning_rate: f64,

    // stability and evolution
    pub stability_prune_threshold: f64,
    pub stability_min: f64,
    pub goal_refresh_threshold: f64,
    pub architector_sigma: f64,
    pub spike_rate_window: usize,
    pub baseline_alpha: f64,
    pub mutation_rate: f64,

    // seeding
    pub initial_nodes: usize,
    pub initial_genes: usize,
    pub initial_dendrites: usize,
    pub initial_axons: usize,
    pub transmitter_kinds: u32,
    pub architector_kinds: u32,
    pub inhibitory_indices: Vec<u32>,
    pub max_nodes: usize,

    // neurites
    pub pickup_radius: f64,
    pub dendrite_gain: f64,
    pub emit_magnitude: f64,
    pub growth_step: f64,
    pub max_step: f64,
    pub spawn_radius: f64,

    // grid
    pub bounds: Bounds,
    pub grid_cell_size: f64,
    pub payload_ttl: u32,
    pub payload_decay: f64,
    pub epsilon_magnitude: f64,
    pub action_scan_radius: f64,
    pub gradient_sigma: f64,

    pub output_probes: Vec<OutputProbeSpec>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim_xy: 4,
            dim_z: 8,
            min_e: 4.0,
            dr: 0.05,
            at_mod: 1.0,
            learning_rate: 0.05,
            stability_prune_threshold: 0.25,
            stability_min: 0.5,
            goal_refresh_threshold: 0.5,
            architector_sigma: 2.0,
            spike_rate_window: 10,
            baseline_alpha: 0.1,
            mutation_rate: 0.1,
            initial_nodes: 10,
            initial_genes: 6,
            initial_dendrites: 4,
            initial_axons: 2,
            transmitter_kinds: 4,
            architector_kinds: 2,
            inhibitory_indices: Vec::new(),
            max_nodes: 256,
            pickup_radius: 2.0,
            dendrite_gain: 1.0,
            emit_magnitude: 1.0,
            growth_step: 0.25,
            max_step: 1.0,
            spawn_radius: 1.0,
            bounds: Bounds::cube(8.0),
            grid_cell_size: 1.0,
            payload_ttl: 3,
            payload_decay: 0.9,
            epsilon_magnitude: 1e-3,
            action_scan_radius: 2.0,
            gradient_sigma: 1.5,
            output_probes: Vec::new(),
        }
    }
}

impl EngineConfig {
    /// Checks every range constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let pos = |x: f64| x.is_finite() && x > 0.0;

        check(self.dim_xy >= 1, format!("dim_xy must be >= 1 (got {})", self.dim_xy));
        check(self.dim_z >= 1, format!("dim_z must be >= 1 (got {})", self.dim_z));
        check(pos(self.min_e), format!("min_e must be > 0 (got {})", self.min_e));
        check(
            self.dr.is_finite() && (0.0..0.5).contains(&self.dr),
            format!("dr must be in [0, 0.5) (got {})", self.dr),
        );
        check(
            self.at_mod.is_finite() && self.at_mod >= 0.0,
            format!("at_mod must be >= 0 (got {})", self.at_mod),
        );
        check(
            self.learning_rate.is_finite() && self.learning_rate >= 0.0,
            format!("learning_rate must be >= 0 (got {})", self.learning_rate),
        );
        check(
            unit(self.stability_prune_threshold),
            format!("stability_prune_threshold must be in [0, 1] (got {})", self.stability_prune_threshold),
        );
        check(unit(self.stability_min), format!("stability_min must be in [0, 1] (got {})", self.stability_min));
        check(
            unit(self.goal_refresh_threshold),
            format!("goal_refresh_threshold must be in [0, 1] (got {})", self.goal_refresh_threshold),
        );
        check(
            self.architector_sigma.is_finite() && self.architector_sigma >= 0.0,
            format!("architector_sigma must be >= 0 (got {})", self.architector_sigma),
        );
        check(self.spike_rate_window >= 1, "spike_rate_window must be >= 1".into());
        check(
            self.baseline_alpha > 0.0 && self.baseline_alpha <= 1.0,
            format!("baseline_alpha must be in (0, 1] (got {})", self.baseline_alpha),
        );
        check(unit(self.mutation_rate), format!("mutation_rate must be in [0, 1] (got {})", self.mutation_rate));
        check(
            self.initial_nodes <= self.max_nodes,
            format!("initial_nodes ({}) exceeds max_nodes ({})", self.initial_nodes, self.max_nodes),
        );
        check(
            self.initial_dendrites <= self.dim_xy * self.dim_xy,
            format!(
                "initial_dendrites ({}) exceeds entry-plane cells ({})",
                self.initial_dendrites,
                self.dim_xy * self.dim_xy
            ),
        );
        check(self.transmitter_kinds >= 1, "transmitter_kinds must be >= 1".into());
        check(self.architector_kinds >= 1, "architector_kinds must be >= 1".into());
        check(pos(self.pickup_radius), format!("pickup_radius must be > 0 (got {})", self.pickup_radius));
        check(self.dendrite_gain.is_finite(), "dendrite_gain must be finite".into());
        check(pos(self.emit_magnitude), format!("emit_magnitude must be > 0 (got {})", self.emit_magnitude));
        check(
            self.max_step.is_finite() && self.max_step >= 0.0,
            format!("max_step must be >= 0 (got {})", self.max_step),
        );
        check(
            self.growth_step >= 0.0 && self.growth_step <= self.max_step,
            format!("growth_step must be in [0, max_step] (got {})", self.growth_step),
        );
        check(
            self.spawn_radius.is_finite() && self.spawn_radius >= 0.0,
            format!("spawn_radius must be >= 0 (got {})", self.spawn_radius),
        );
        check(self.bounds.is_valid(), format!("bounds {:?} must be non-empty and finite", self.bounds));
        check(pos(self.grid_cell_size), format!("grid_cell_size must be > 0 (got {})", self.grid_cell_size));
        check(
            self.payload_decay > 0.0 && self.payload_decay <= 1.0,
            format!("payload_decay must be in (0, 1] (got {})", self.payload_decay),
        );
        check(
            self.epsilon_magnitude.is_finite() && self.epsilon_magnitude >= 0.0,
            format!("epsilon_magnitude must be >= 0 (got {})", self.epsilon_magnitude),
        );
        check(
            pos(self.action_scan_radius),
            format!("action_scan_radius must be > 0 (got {})", self.action_scan_radius),
        );
        check(pos(self.gradient_sigma), format!("gradient_sigma must be > 0 (got {})", self.gradient_sigma));
        for (i, p) in self.output_probes.iter().enumerate() {
            check(pos(p.radius), format!("output_probes[{i}].radius must be > 0"));
            check(self.bounds.contains(&p.position), format!("output_probes[{i}] lies outside bounds"));
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(EdenError::InvalidConfig(v))
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn is_inhibitory(&self, index: u32) -> bool {
        self.inhibitory_indices.contains(&index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EngineConfig::default().validate().unwrap();
    }

    #[test]
    fn every_violation_is_listed() {
        let cfg = EngineConfig {
            dr: 0.5,
            dim_xy: 0,
            min_e: 0.0,
            ..EngineConfig::default()
        };
        match cfg.validate() {
            Err(EdenError::InvalidConfig(v)) => {
                assert!(v.iter().any(|m| m.starts_with("dr")));
                assert!(v.iter().any(|m| m.starts_with("dim_xy")));
                assert!(v.iter().any(|m| m.starts_with("min_e")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = EngineConfig::from_json(r#"{"seed": 9, "dim_z": 5}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.dim_z, 5);
        assert_eq!(cfg.dim_xy, EngineConfig::default().dim_xy);
        assert!(EngineConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
