//! Input probes write cyclic transmitter patterns into the grid; output
//! probes read spike energy near their position.

use crate::error::{EdenError, Result};
use crate::geom::{Bounds, Vec3};
use crate::grid::{NeuralGrid, TransArchPayload};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub type ProbeId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub offset: Vec3,
    pub index: u32,
    pub magnitude: f64,
}

/// One step of an input pattern. `jitter` scales every magnitude by a
/// uniform factor in `[1 - jitter, 1 + jitter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub entries: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

impl Frame {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(j) = self.jitter {
            if !(j.is_finite() && (0.0..=1.0).contains(&j)) {
                return Err(format!("jitter must be in [0, 1] (got {j})"));
            }
        }
        for e in &self.entries {
            if !(e.magnitude.is_finite() && e.magnitude >= 0.0) {
                return Err(format!("magnitude must be finite and >= 0 (got {})", e.magnitude));
            }
            if !e.offset.is_finite() {
                return Err("offset must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputProbe {
    pub id: ProbeId,
    pub position: Vec3,
    pub pattern: Vec<Frame>,
    pub cursor: usize,
}

impl InputProbe {
    pub fn new(id: ProbeId, position: Vec3, pattern: Vec<Frame>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(EdenError::Structural("an input pattern needs at least one frame".into()));
        }
        for (i, f) in pattern.iter().enumerate() {
            f.validate()
                .map_err(|m| EdenError::Structural(format!("pattern frame {i}: {m}")))?;
        }
        Ok(Self {
            id,
            position,
            pattern,
            cursor: 0,
        })
    }

    /// Stages the current frame into the grid and advances the cursor.
    /// Returns the number of payloads staged.
    pub fn deposit_frame<R: Rng + ?Sized>(
        &mut self,
        grid: &mut NeuralGrid,
        ttl: u32,
        is_inhibitory: impl Fn(u32) -> bool,
        rng: &mut R,
    ) -> Result<usize> {
        if self.pattern.is_empty() {
            return Ok(0);
        }
        let bounds = *grid.bounds();
        let frame = &self.pattern[self.cursor % self.pattern.len()];
        let mut staged = 0;
        for entry in &frame.entries {
            let mut magnitude = entry.magnitude;
            if let Some(j) = frame.jitter.filter(|j| *j > 0.0) {
                magnitude *= 1.0 + rng.random_range(-j..=j);
            }
            if magnitude <= 0.0 {
                continue;
            }
            let position = bounds.clamp(self.position + entry.offset);
            grid.deposit(TransArchPayload::transmitter(
                entry.index,
                position,
                magnitude,
                ttl,
                !is_inhibitory(entry.index),
            ))?;
            staged += 1;
        }
        self.cursor = (self.cursor + 1) % self.pattern.len();
        Ok(staged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputProbe {
    pub id: ProbeId,
    pub position: Vec3,
    pub radius: f64,
    pub history: Vec<f64>,
}

impl OutputProbe {
    pub fn new(id: ProbeId, position: Vec3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(EdenError::InvalidConfig(vec![format!(
                "output probe radius must be > 0 (got {radius})"
            )]));
        }
        Ok(Self {
            id,
            position,
            radius,
            history: Vec::new(),
        })
    }

    pub fn covers(&self, p: &Vec3) -> bool {
        self.position.distance(p) <= self.radius
    }

    pub fn last_reading(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

/// Parses a pattern document: a JSON array of frames.
pub fn parse_pattern(text: &str) -> std::result::Result<Vec<Frame>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn load_pattern(path: &Path) -> Result<Vec<Frame>> {
    let text = std::fs::read_to_string(path).map_err(|e| EdenError::io(path, e))?;
    let frames = parse_pattern(&text).map_err(|e| EdenError::malformed(path, &e))?;
    if frames.is_empty() {
        return Err(EdenError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "pattern has no frames".into(),
        });
    }
    for (i, f) in frames.iter().enumerate() {
        f.validate().map_err(|m| EdenError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message: format!("frame {i}: {m}"),
        })?;
    }
    Ok(frames)
}

/// Default input probe placement.
pub fn default_probe_position(bounds: &Bounds) -> Vec3 {
    bounds.center()
}
