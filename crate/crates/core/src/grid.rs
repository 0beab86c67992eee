//! The shared neural grid: a continuous box holding transmitter and
//! architector payloads.
//!
//! Mutations are staged and become visible only at [`NeuralGrid::commit`],
//! so every reader during a phase sees the same committed snapshot.

use crate::error::{EdenError, Result};
use crate::geom::{Bounds, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub type PayloadId = u64;

/// Property key carrying the excitatory (+1) / inhibitory (-1) sign of a transmitter.
pub const EXCITATORY: &str = "excitatory";
/// Property key carrying the action code an architector asks the receiver to run.
pub const TARGET_ACTION: &str = "target_action";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PayloadKind {
    Transmitter,
    Architector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransArchPayload {
    pub kind: PayloadKind,
    pub index: u32,
    pub position: Vec3,
    pub magnitude: f64,
    pub ttl: u32,
    #[serde(default)]
    pub properties: BTreeMap<String, f64>,
}

impl TransArchPayload {
    pub fn transmitter(index: u32, position: Vec3, magnitude: f64, ttl: u32, excitatory: bool) -> Self {
        let mut properties = BTreeMap::new();
        properties.insert(EXCITATORY.to_string(), if excitatory { 1.0 } else { -1.0 });
        Self {
            kind: PayloadKind::Transmitter,
            index,
            position,
            magnitude,
            ttl,
            properties,
        }
    }

    pub fn architector(index: u32, position: Vec3, magnitude: f64, ttl: u32, target_action: u8) -> Self {
        let mut properties = BTreeMap::new();
        properties.insert(TARGET_ACTION.to_string(), f64::from(target_action));
        Self {
            kind: PayloadKind::Architector,
            index,
            position,
            magnitude,
            ttl,
            properties,
        }
    }

    /// `+1` unless the payload is explicitly marked inhibitory.
    pub fn sign(&self) -> f64 {
        match self.properties.get(EXCITATORY) {
            Some(v) if *v < 0.0 => -1.0,
            _ => 1.0,
        }
    }

    pub fn target_action(&self) -> Option<u8> {
        self.properties
            .get(TARGET_ACTION)
            .filter(|v| v.is_finite() && **v >= 0.0 && **v <= 255.0)
            .map(|v| *v as u8)
    }
}

/// A committed payload returned by a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadHit<'a> {
    pub id: PayloadId,
    pub distance: f64,
    pub payload: &'a TransArchPayload,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSummary {
    pub added: usize,
    pub removed: usize,
}

type CellKey = (i64, i64, i64);

#[derive(Debug, Clone, Default)]
struct SpatialIndex {
    cell_size: f64,
    origin: Vec3,
    cells: HashMap<CellKey, Vec<PayloadId>>,
}

impl SpatialIndex {
    fn new(cell_size: f64, origin: Vec3) -> Self {
        Self {
            cell_size,
            origin,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> CellKey {
        let k = |i: usize| ((p.0[i] - self.origin.0[i]) / self.cell_size).floor() as i64;
        (k(0), k(1), k(2))
    }

    fn insert(&mut self, id: PayloadId, p: &Vec3) {
        let key = self.key(p);
        self.cells.entry(key).or_default().push(id);
    }

    fn remove(&mut self, id: PayloadId, p: &Vec3) {
        let key = self.key(p);
        if let Some(ids) = self.cells.get_mut(&key) {
            ids.retain(|&other| other != id);
            if ids.is_empty() {
                self.cells.remove(&key);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "GridRepr")]
pub struct NeuralGrid {
    bounds: Bounds,
    cell_size: f64,
    payloads: BTreeMap<PayloadId, TransArchPayload>,
    next_id: PayloadId,
    pending_deposits: Vec<TransArchPayload>,
    pending_removals: BTreeSet<PayloadId>,
    #[serde(skip)]
    index: SpatialIndex,
}

#[derive(Deserialize)]
struct GridRepr {
    bounds: Bounds,
    cell_size: f64,
    payloads: BTreeMap<PayloadId, TransArchPayload>,
    next_id: PayloadId,
    pending_deposits: Vec<TransArchPayload>,
    pending_removals: BTreeSet<PayloadId>,
}

impl From<GridRepr> for NeuralGrid {
    fn from(r: GridRepr) -> Self {
        let mut index = SpatialIndex::new(r.cell_size, r.bounds.min);
        for (id, p) in &r.payloads {
            index.insert(*id, &p.position);
        }
        Self {
            bounds: r.bounds,
            cell_size: r.cell_size,
            payloads: r.payloads,
            next_id: r.next_id,
            pending_deposits: r.pending_deposits,
            pending_removals: r.pending_removals,
            index,
        }
    }
}

impl PartialEq for NeuralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds
            && self.cell_size == other.cell_size
            && self.payloads == other.payloads
            && self.next_id == other.next_id
            && self.pending_deposits == other.pending_deposits
            && self.pending_removals == other.pending_removals
    }
}

impl NeuralGrid {
    pub fn new(bounds: Bounds, cell_size: f64) -> Result<Self> {
        if !bounds.is_valid() {
            return Err(EdenError::InvalidConfig(vec![format!("grid bounds {bounds:?} are empty or non-finite")]));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(EdenError::InvalidConfig(vec![format!("grid cell size {cell_size} must be > 0")]));
        }
        Ok(Self {
            bounds,
            cell_size,
            payloads: BTreeMap::new(),
            next_id: 0,
            pending_deposits: Vec::new(),
            pending_removals: BTreeSet::new(),
            index: SpatialIndex::new(cell_size, bounds.min),
        })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn get(&self, id: PayloadId) -> Option<&TransArchPayload> {
        self.payloads.get(&id)
    }

    pub fn payloads(&self) -> impl Iterator<Item = (PayloadId, &TransArchPayload)> {
        self.payloads.iter().map(|(id, p)| (*id, p))
    }

    pub fn pending_len(&self) -> usize {
        self.pending_deposits.len() + self.pending_removals.len()
    }

    /// Stages a payload; it becomes visible at the next commit.
    pub fn deposit(&mut self, payload: TransArchPayload) -> Result<()> {
        if !self.bounds.contains(&payload.position) {
            return Err(EdenError::InputOutOfRange {
                source_name: format!("{:?} payload {}", payload.kind, payload.index),
                detail: format!("position {:?} outside grid bounds", payload.position.0),
            });
        }
        if !(payload.magnitude.is_finite() && payload.magnitude > 0.0) {
            return Err(EdenError::InputOutOfRange {
                source_name: format!("{:?} payload {}", payload.kind, payload.index),
                detail: format!("magnitude {} must be > 0", payload.magnitude),
            });
        }
        self.pending_deposits.push(payload);
        Ok(())
    }

    /// Stages removal of a committed payload (consumption).
    pub fn consume(&mut self, id: PayloadId) {
        self.pending_removals.insert(id);
    }

    /// Applies staged removals, then staged deposits in queue order.
    pub fn commit(&mut self) -> CommitSummary {
        let mut summary = CommitSummary::default();
        for id in std::mem::take(&mut self.pending_removals) {
            if let Some(p) = self.payloads.remove(&id) {
                self.index.remove(id, &p.position);
                summary.removed += 1;
            }
        }
        for p in std::mem::take(&mut self.pending_deposits) {
            let id = self.next_id;
            self.next_id += 1;
            self.index.insert(id, &p.position);
            self.payloads.insert(id, p);
            summary.added += 1;
        }
        summary
    }

    /// Committed payloads within Euclidean distance `r`, ordered by
    /// `(distance, id)`.
    pub fn query_radius(&self, center: &Vec3, r: f64) -> Vec<PayloadHit<'_>> {
        if r.is_nan() || r < 0.0 || !center.is_finite() {
            return Vec::new();
        }
        let r_sq = r * r;
        let lo = self.index.key(&(*center - Vec3::new(r, r, r)));
        let hi = self.index.key(&(*center + Vec3::new(r, r, r)));
        let span = |a: i64, b: i64| (b - a + 1).max(0) as u128;
        let cells = span(lo.0, hi.0) * span(lo.1, hi.1) * span(lo.2, hi.2);
        let mut raw: Vec<(PayloadId, f64)> = Vec::new();
        if cells > self.payloads.len() as u128 {
            for (id, p) in &self.payloads {
                let d_sq = center.distance_sq(&p.position);
                if d_sq <= r_sq {
                    raw.push((*id, d_sq));
                }
            }
        } else {
            for cx in lo.0..=hi.0 {
                for cy in lo.1..=hi.1 {
                    for cz in lo.2..=hi.2 {
                        if let Some(ids) = self.index.cells.get(&(cx, cy, cz)) {
                            for id in ids {
                                let d_sq = center.distance_sq(&self.payloads[id].position);
                                if d_sq <= r_sq {
                                    raw.push((*id, d_sq));
                                }
                            }
                        }
                    }
                }
            }
        }
        raw.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        raw.into_iter()
            .map(|(id, d_sq)| PayloadHit {
                id,
                distance: d_sq.sqrt(),
                payload: &self.payloads[&id],
            })
            .collect()
    }

    /// Number of committed payloads of `kind`/`index` within `r` of `center`.
    pub fn count_within(&self, center: &Vec3, r: f64, kind: PayloadKind, index: u32) -> usize {
        self.query_radius(center, r)
            .iter()
            .filter(|h| h.payload.kind == kind && h.payload.index == index)
            .count()
    }

    /// Gaussian kernel density of payloads with the given index.
    pub fn density(&self, pos: &Vec3, index: u32, sigma: f64) -> f64 {
        let inv = 1.0 / (2.0 * sigma * sigma);
        self.payloads
            .values()
            .filter(|p| p.index == index)
            .map(|p| p.magnitude * (-pos.distance_sq(&p.position) * inv).exp())
            .sum()
    }

    /// Analytic gradient of [`NeuralGrid::density`] at `pos`.
    pub fn density_gradient(&self, pos: &Vec3, index: u32, sigma: f64) -> Vec3 {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let inv_sigma_sq = 1.0 / (sigma * sigma);
        self.payloads
            .values()
            .filter(|p| p.index == index)
            .fold(Vec3::ZERO, |acc, p| {
                let delta = p.position - *pos;
                let k = p.magnitude * (-delta.norm_sq() * inv).exp();
                acc + delta * (k * inv_sigma_sq)
            })
    }

    /// Ages every committed payload by one epoch. Returns how many expired.
    pub fn decay_and_expire(&mut self, decay_factor: f64, epsilon_magnitude: f64) -> usize {
        let mut expired = Vec::new();
        for (id, p) in self.payloads.iter_mut() {
            p.magnitude *= decay_factor;
            if p.ttl == 0 || p.magnitude < epsilon_magnitude {
                expired.push(*id);
            } else {
                p.ttl -= 1;
            }
        }
        for id in &expired {
            if let Some(p) = self.payloads.remove(id) {
                self.index.remove(*id, &p.position);
            }
        }
        expired.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> NeuralGrid {
        NeuralGrid::new(Bounds::cube(8.0), 1.0).unwrap()
    }

    fn tx(index: u32, pos: Vec3) -> TransArchPayload {
        TransArchPayload::transmitter(index, pos, 1.0, 3, true)
    }

    #[test]
    fn deposits_are_invisible_until_commit() {
        let mut g = grid();
        let pos = Vec3::new(2.0, 2.0, 2.0);
        g.deposit(tx(0, pos)).unwrap();
        assert!(g.query_radius(&pos, 0.1).is_empty());
        let s = g.commit();
        assert_eq!(s, CommitSummary { added: 1, removed: 0 });
        assert_eq!(g.query_radius(&pos, 0.1).len(), 1);
    }

    #[test]
    fn out_of_bounds_deposit_rejected() {
        let mut g = grid();
        assert!(g.deposit(tx(0, Vec3::new(9.0, 1.0, 1.0))).is_err());
        g.commit();
        assert!(g.is_empty());
    }

    #[test]
    fn radius_excludes_far_payloads() {
        let mut g = grid();
        assert!(g.query_radius(&Vec3::ZERO, 5.0).is_empty());
        g.deposit(tx(0, Vec3::new(3.0, 1.0, 1.0))).unwrap();
        g.commit();
        assert!(g.query_radius(&Vec3::new(1.0, 1.0, 1.0), 1.0).is_empty());
        assert_eq!(g.query_radius(&Vec3::new(1.0, 1.0, 1.0), 2.0).len(), 1);
    }

    #[test]
    fn results_sorted_by_distance_then_id() {
        let mut g = grid();
        g.deposit(tx(0, Vec3::new(2.0, 1.0, 1.0))).unwrap();
        g.deposit(tx(1, Vec3::new(0.0, 1.0, 1.0))).unwrap();
        g.deposit(tx(2, Vec3::new(1.5, 1.0, 1.0))).unwrap();
        g.commit();
        let ids: Vec<_> = g.query_radius(&Vec3::new(1.0, 1.0, 1.0), 3.0).iter().map(|h| h.id).collect();
        assert_eq!(ids, vec![2, 0, 1]);
    }

    #[test]
    fn consume_removes_once() {
        let mut g = grid();
        g.deposit(tx(0, Vec3::new(1.0, 1.0, 1.0))).unwrap();
        g.commit();
        g.consume(0);
        g.consume(0);
        assert_eq!(g.commit().removed, 1);
        assert!(g.is_empty());
        g.consume(0);
        assert_eq!(g.commit().removed, 0);
    }

    #[test]
    fn gradient_is_zero_without_matching_payloads_or_at_peak() {
        let mut g = grid();
        let pos = Vec3::new(4.0, 4.0, 4.0);
        assert_eq!(g.density_gradient(&pos, 0, 1.0), Vec3::ZERO);
        g.deposit(tx(0, pos)).unwrap();
        g.deposit(tx(1, Vec3::new(5.0, 4.0, 4.0))).unwrap();
        g.commit();
        assert_eq!(g.density_gradient(&pos, 0, 1.0), Vec3::ZERO);
    }

    #[test]
    fn gradient_points_toward_source_and_matches_differences() {
        let mut g = grid();
        g.deposit(tx(3, Vec3::new(5.0, 4.0, 4.0))).unwrap();
        g.commit();
        let pos = Vec3::new(4.0, 4.0, 4.0);
        let grad = g.density_gradient(&pos, 3, 1.5);
        assert!(grad.x() > 0.0);
        let h = 1e-5;
        for i in 0..3 {
            let mut a = pos;
            let mut b = pos;
            a.0[i] += h;
            b.0[i] -= h;
            let fd = (g.density(&a, 3, 1.5) - g.density(&b, 3, 1.5)) / (2.0 * h);
            assert!((fd - grad.0[i]).abs() < 1e-6, "axis {i}: {fd} vs {}", grad.0[i]);
        }
    }

    #[test]
    fn decay_and_expiry() {
        let mut g = grid();
        let mut p = tx(0, Vec3::new(1.0, 1.0, 1.0));
        p.ttl = 0;
        g.deposit(p).unwrap();
        let mut q = tx(1, Vec3::new(2.0, 1.0, 1.0));
        q.magnitude = 2.0;
        q.ttl = 10;
        g.deposit(q).unwrap();
        g.commit();
        assert_eq!(g.decay_and_expire(0.5, 1e-6), 1);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(1).unwrap().magnitude, 1.0);
        assert_eq!(g.decay_and_expire(1.0, 1e-6), 0);
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn index_survives_serde_roundtrip() {
        let mut g = grid();
        g.deposit(tx(0, Vec3::new(1.0, 1.0, 1.0))).unwrap();
        g.commit();
        let json = serde_json::to_string(&g).unwrap();
        let back: NeuralGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.query_radius(&Vec3::new(1.0, 1.0, 1.0), 0.5).len(), 1);
    }
}
