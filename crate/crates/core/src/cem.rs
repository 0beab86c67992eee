//! The Currently Expressed Model: a node's propagation, weight and router
//! lattices, and the pass that pushes deposited energy through them.
//!
//! Energy enters on plane `z = 0`. Each pass walks the planes in order,
//! accumulating plane energy; the first plane whose accumulated energy
//! reaches the node's minimum spike energy fires. Below threshold, every
//! energized cell forwards `transfer(p, w, dr)` to exactly one cell of the
//! next plane, chosen by its router.

use crate::error::{EdenError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Sigmoid transfer minus the decay rate, floored at zero.
#[inline]
pub fn transfer(p_val: f64, w_val: f64, dr: f64) -> f64 {
    (sigmoid(p_val * w_val) - dr).max(0.0)
}

#[inline]
pub(crate) fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Lateral offset of a router. The target plane is always `z + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RouterOption {
    dx: i8,
    dy: i8,
}

impl RouterOption {
    /// Direct route: straight down the column.
    pub const CENTER: RouterOption = RouterOption { dx: 0, dy: 0 };

    pub const ALL: [RouterOption; 9] = {
        let mut out = [RouterOption::CENTER; 9];
        let mut i = 0;
        while i < 9 {
            out[i] = RouterOption {
                dx: (i % 3) as i8 - 1,
                dy: (i / 3) as i8 - 1,
            };
            i += 1;
        }
        out
    };

    pub fn new(dx: i8, dy: i8) -> Option<Self> {
        ((-1..=1).contains(&dx) && (-1..=1).contains(&dy)).then_some(Self { dx, dy })
    }

    pub fn dx(&self) -> i8 {
        self.dx
    }

    pub fn dy(&self) -> i8 {
        self.dy
    }

    pub fn code(&self) -> u8 {
        ((self.dy + 1) * 3 + (self.dx + 1)) as u8
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..9)]
    }
}

impl From<RouterOption> for u8 {
    fn from(r: RouterOption) -> u8 {
        r.code()
    }
}

impl TryFrom<u8> for RouterOption {
    type Error = String;
    fn try_from(code: u8) -> std::result::Result<Self, String> {
        RouterOption::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| format!("router code {code} is not in 0..9"))
    }
}

/// Cell coordinate inside a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }
}

/// Energy landing on the entry plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deposit {
    pub x: usize,
    pub y: usize,
    pub magnitude: f64,
}

impl Deposit {
    pub const fn new(x: usize, y: usize, magnitude: f64) -> Self {
        Self { x, y, magnitude }
    }
}

/// Plane and energy of a spike, before it is attributed to a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpike {
    pub z_index: usize,
    pub plane_energy: f64,
}

impl PlaneSpike {
    pub fn attribute(self, node_id: u64, epoch: u64) -> SpikeEvent {
        SpikeEvent {
            z_index: self.z_index,
            plane_energy: self.plane_energy,
            epoch,
            node_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub z_index: usize,
    pub plane_energy: f64,
    pub epoch: u64,
    pub node_id: u64,
}

/// Target propagation values for one plane, captured from a spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPlane {
    pub z_index: usize,
    pub dim_xy: usize,
    /// Row-major `[y][x]`.
    pub target_p: Vec<f64>,
}

impl GoalPlane {
    pub fn target(&self, x: usize, y: usize) -> f64 {
        self.target_p[y * self.dim_xy + x]
    }
}

/// One routed transfer recorded during a pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteStep {
    pub src: usize,
    pub dst: usize,
    pub p_src: f64,
    pub w_src: f64,
    pub out: f64,
}

/// Everything a pass did, enough to backpropagate from the spike plane.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassTrace {
    pub steps: Vec<RouteStep>,
    pub spike: Option<PlaneSpike>,
}

impl PassTrace {
    pub fn clear(&mut self) {
        self.steps.clear();
        self.spike = None;
    }
}

/// Scalars that shape a single propagation pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassParams {
    pub min_e: f64,
    pub dr: f64,
    pub at_mod: f64,
}

/// Propagation, weight and router lattices of one process node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwrTensor {
    dim_xy: usize,
    dim_z: usize,
    p: Vec<f64>,
    w: Vec<f64>,
    r: Vec<RouterOption>,
    plane_energy_acc: Vec<f64>,
}

impl PwrTensor {
    /// Zero energy, unit weights, all routers direct.
    pub fn new(dim_xy: usize, dim_z: usize) -> Result<Self> {
        if dim_xy == 0 || dim_z == 0 {
            return Err(EdenError::Structural(format!(
                "tensor dimensions must be positive (got {dim_xy}x{dim_xy}x{dim_z})"
            )));
        }
        let n = dim_xy * dim_xy * dim_z;
        Ok(Self {
            dim_xy,
            dim_z,
            p: vec![0.0; n],
            w: vec![1.0; n],
            r: vec![RouterOption::CENTER; n],
            plane_energy_acc: vec![0.0; dim_z],
        })
    }

    /// Uniform weights in `[0, 1)` and uniformly drawn routers.
    pub fn random<R: Rng + ?Sized>(dim_xy: usize, dim_z: usize, rng: &mut R) -> Result<Self> {
        let mut t = Self::new(dim_xy, dim_z)?;
        for i in 0..t.len() {
            t.w[i] = rng.random::<f64>();
            t.r[i] = RouterOption::random(rng);
        }
        Ok(t)
    }

    pub fn dim_xy(&self) -> usize {
        self.dim_xy
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dim_xy + y) * self.dim_xy + x
    }

    pub fn cell_of(&self, idx: usize) -> Cell {
        let plane = self.dim_xy * self.dim_xy;
        let z = idx / plane;
        let rem = idx % plane;
        Cell::new(rem % self.dim_xy, rem / self.dim_xy, z)
    }

    fn check_cell(&self, x: usize, y: usize, z: usize) -> Result<usize> {
        if x >= self.dim_xy {
            return Err(EdenError::IndexOutOfRange { what: "x", index: x, limit: self.dim_xy });
        }
        if y >= self.dim_xy {
            return Err(EdenError::IndexOutOfRange { what: "y", index: y, limit: self.dim_xy });
        }
        if z >= self.dim_z {
            return Err(EdenError::IndexOutOfRange { what: "z", index: z, limit: self.dim_z });
        }
        Ok(self.index(x, y, z))
    }

    pub fn p(&self, x: usize, y: usize, z: usize) -> f64 {
        self.p[self.index(x, y, z)]
    }

    pub fn w(&self, x: usize, y: usize, z: usize) -> f64 {
        self.w[self.index(x, y, z)]
    }

    pub fn router(&self, x: usize, y: usize, z: usize) -> RouterOption {
        self.r[self.index(x, y, z)]
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn routers(&self) -> &[RouterOption] {
        &self.r
    }

    pub fn plane_energy(&self, z: usize) -> f64 {
        self.plane_energy_acc[z]
    }

    pub fn set_p(&mut self, x: usize, y: usize, z: usize, value: f64) -> Result<()> {
        let i = self.check_cell(x, y, z)?;
        self.p[i] = value.max(0.0);
        Ok(())
    }

    pub fn set_weight(&mut self, x: usize, y: usize, z: usize, value: f64) -> Result<()> {
        let i = self.check_cell(x, y, z)?;
        self.w[i] = value.clamp(0.0, 1.0);
        Ok(())
    }

    pub fn set_router(&mut self, x: usize, y: usize, z: usize, r: RouterOption) -> Result<()> {
        let i = self.check_cell(x, y, z)?;
        self.r[i] = r;
        Ok(())
    }

    pub fn fill_weights(&mut self, value: f64) {
        self.w.fill(value.clamp(0.0, 1.0));
    }

    pub fn fill_routers(&mut self, r: RouterOption) {
        self.r.fill(r);
    }

    /// Sum of `p` over the plane (ascending x within ascending y).
    pub fn plane_sum(&self, z: usize) -> f64 {
        let plane = self.dim_xy * self.dim_xy;
        self.p[z * plane..(z + 1) * plane].iter().sum()
    }

    /// `PE_z = at_mod * PE_{z-1} + sum(p[.., .., z])`, with `PE_{-1} = 0`.
    pub fn accumulate_plane_energy(&mut self, z: usize, at_mod: f64) -> Result<f64> {
        if z >= self.dim_z {
            return Err(EdenError::IndexOutOfRange { what: "z", index: z, limit: self.dim_z });
        }
        let upstream = if z == 0 { 0.0 } else { self.plane_energy_acc[z - 1] };
        let pe = at_mod * upstream + self.plane_sum(z);
        self.plane_energy_acc[z] = pe;
        Ok(pe)
    }

    /// Target cell on plane `z + 1` for the cell at `idx`, with lateral
    /// offsets clamped at the lattice edge.
    fn routed_target(&self, idx: usize) -> usize {
        let c = self.cell_of(idx);
        let r = self.r[idx];
        let max = self.dim_xy as i64 - 1;
        let tx = (c.x as i64 + r.dx as i64).clamp(0, max) as usize;
        let ty = (c.y as i64 + r.dy as i64).clamp(0, max) as usize;
        self.index(tx, ty, c.z + 1)
    }

    /// Adds deposits to the entry plane. All coordinates are checked before
    /// any energy lands.
    pub fn apply_deposits(&mut self, deposits: &[Deposit], source: &str) -> Result<()> {
        for d in deposits {
            if d.x >= self.dim_xy || d.y >= self.dim_xy || !d.magnitude.is_finite() {
                return Err(EdenError::InputOutOfRange {
                    source_name: source.to_string(),
                    detail: format!(
                        "deposit ({}, {}, {}) outside {}x{} entry plane",
                        d.x, d.y, d.magnitude, self.dim_xy, self.dim_xy
                    ),
                });
            }
        }
        for d in deposits {
            let i = self.index(d.x, d.y, 0);
            self.p[i] = (self.p[i] + d.magnitude).max(0.0);
        }
        Ok(())
    }

    /// Runs one pass. Residual energy from an earlier, non-spiking pass is
    /// kept and propagated again.
    pub fn forward_propagate(
        &mut self,
        deposits: &[Deposit],
        params: &PassParams,
        trace: &mut PassTrace,
    ) -> Result<Option<PlaneSpike>> {
        trace.clear();
        self.apply_deposits(deposits, "deposit")?;
        let plane = self.dim_xy * self.dim_xy;
        for z in 0..self.dim_z {
            let pe = self.accumulate_plane_energy(z, params.at_mod)?;
            if pe >= params.min_e {
                let spike = PlaneSpike { z_index: z, plane_energy: pe };
                trace.spike = Some(spike);
                return Ok(Some(spike));
            }
            if z + 1 == self.dim_z {
                break;
            }
            for src in z * plane..(z + 1) * plane {
                let p_src = self.p[src];
                if p_src <= 0.0 {
                    continue;
                }
                let w_src = self.w[src];
                let out = transfer(p_src, w_src, params.dr);
                let dst = self.routed_target(src);
                self.p[dst] += out;
                trace.steps.push(RouteStep { src, dst, p_src, w_src, out });
            }
        }
        Ok(None)
    }

    /// Points every energized cell upstream of the spike straight down its
    /// column. Returns the rewired cells in index order.
    pub fn update_routers_on_spike(&mut self, spike: &PlaneSpike) -> Vec<Cell> {
        let plane = self.dim_xy * self.dim_xy;
        let end = spike.z_index.min(self.dim_z) * plane;
        let mut rewired = Vec::new();
        for idx in 0..end {
            if self.p[idx] > 0.0 {
                self.r[idx] = RouterOption::CENTER;
                rewired.push(self.cell_of(idx));
            }
        }
        rewired
    }

    /// Redraws the router of every cell still holding energy.
    pub fn randomize_stale_routers<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut count = 0;
        for idx in 0..self.p.len() {
            if self.p[idx] > 0.0 {
                self.r[idx] = RouterOption::random(rng);
                count += 1;
            }
        }
        count
    }

    pub fn reset_propagation(&mut self) {
        self.p.fill(0.0);
        self.plane_energy_acc.fill(0.0);
    }

    pub fn total_energy(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Copies plane `z` into a goal.
    pub fn goal_from_plane(&self, z: usize) -> Result<GoalPlane> {
        if z >= self.dim_z {
            return Err(EdenError::IndexOutOfRange { what: "z", index: z, limit: self.dim_z });
        }
        let plane = self.dim_xy * self.dim_xy;
        Ok(GoalPlane {
            z_index: z,
            dim_xy: self.dim_xy,
            target_p: self.p[z * plane..(z + 1) * plane].to_vec(),
        })
    }

    /// Squared-error loss at the goal plane and its gradient with respect
    /// to every weight, flowing back along the routes recorded in `trace`.
    pub fn goal_gradient(&self, goal: &GoalPlane, trace: &PassTrace) -> Result<(f64, Vec<f64>)> {
        if goal.dim_xy != self.dim_xy || goal.target_p.len() != self.dim_xy * self.dim_xy {
            return Err(EdenError::Structural(format!(
                "goal plane is {}x{} but tensor plane is {}x{}",
                goal.dim_xy, goal.dim_xy, self.dim_xy, self.dim_xy
            )));
        }
        if goal.z_index >= self.dim_z {
            return Err(EdenError::IndexOutOfRange {
                what: "goal z",
                index: goal.z_index,
                limit: self.dim_z,
            });
        }
        let plane = self.dim_xy * self.dim_xy;
        let base = goal.z_index * plane;
        let mut grad_p = vec![0.0; self.p.len()];
        let mut loss = 0.0;
        for (k, target) in goal.target_p.iter().enumerate() {
            let err = self.p[base + k] - target;
            loss += 0.5 * err * err;
            grad_p[base + k] = err;
        }
        let mut grad_w = vec![0.0; self.w.len()];
        for step in trace.steps.iter().rev() {
            if step.dst >= base + plane || step.out <= 0.0 {
                continue;
            }
            let g = grad_p[step.dst];
            if g == 0.0 {
                continue;
            }
            let s = sigmoid(step.p_src * step.w_src);
            let ds = s * (1.0 - s);
            grad_w[step.src] += g * ds * step.p_src;
            grad_p[step.src] += g * ds * step.w_src;
        }
        Ok((loss, grad_w))
    }

    /// One SGD step toward the goal; touched weights stay in `[0, 1]`.
    pub fn backprop_to_goal(
        &mut self,
        goal: &GoalPlane,
        trace: &PassTrace,
        learning_rate: f64,
    ) -> Result<f64> {
        let (loss, grad_w) = self.goal_gradient(goal, trace)?;
        if learning_rate > 0.0 {
            for (w, g) in self.w.iter_mut().zip(&grad_w) {
                if *g != 0.0 {
                    *w = (*w - learning_rate * g).clamp(0.0, 1.0);
                }
            }
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct(dim_xy: usize, dim_z: usize) -> PwrTensor {
        PwrTensor::new(dim_xy, dim_z).unwrap()
    }

    fn params(min_e: f64, dr: f64) -> PassParams {
        PassParams { min_e, dr, at_mod: 1.0 }
    }

    // Hand-evaluated sigmoid values, independent of `sigmoid`.
    const SIGMOID_1: f64 = 0.731_058_578_630_004_9;

    #[test]
    fn transfer_examples() {
        assert!((transfer(0.0, 1.0, 0.05) - 0.45).abs() < 1e-15);
        assert!((transfer(0.0, 0.0, 0.49) - 0.01).abs() < 1e-15);
        assert!((transfer(1.0, 1.0, 0.0) - SIGMOID_1).abs() < 1e-15);
    }

    #[test]
    fn router_codes_are_distinct_and_center_is_direct() {
        let codes: std::collections::BTreeSet<u8> = RouterOption::ALL.iter().map(|r| r.code()).collect();
        assert_eq!(codes.len(), 9);
        assert_eq!(RouterOption::CENTER.code(), 4);
        assert_eq!(RouterOption::ALL[4], RouterOption::CENTER);
        assert!(RouterOption::try_from(9u8).is_err());
    }

    #[test]
    fn plane_energy_examples() {
        let mut t = direct(4, 3);
        assert_eq!(t.accumulate_plane_energy(0, 1.0).unwrap(), 0.0);
        for x in 0..4 {
            for y in 0..4 {
                t.set_p(x, y, 1, 1.0).unwrap();
            }
        }
        assert_eq!(t.accumulate_plane_energy(1, 1.0).unwrap(), 16.0);
        assert!(matches!(
            t.accumulate_plane_energy(3, 1.0),
            Err(EdenError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn plane_energy_uses_upstream_accumulator() {
        let mut t = direct(2, 3);
        t.set_p(0, 0, 0, 1.0).unwrap();
        t.set_p(0, 0, 1, SIGMOID_1).unwrap();
        t.set_p(0, 0, 2, 0.675).unwrap();
        t.accumulate_plane_energy(0, 1.0).unwrap();
        t.accumulate_plane_energy(1, 1.0).unwrap();
        let pe = t.accumulate_plane_energy(2, 1.0).unwrap();
        assert!((pe - (1.0 + SIGMOID_1 + 0.675)).abs() < 1e-12);
    }

    #[test]
    fn no_energy_no_spike() {
        let mut t = direct(3, 4);
        let before = t.clone();
        let mut trace = PassTrace::default();
        assert!(t.forward_propagate(&[], &params(2.0, 0.0), &mut trace).unwrap().is_none());
        assert_eq!(t.p_values(), before.p_values());
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn large_deposit_spikes_on_entry_plane() {
        let mut t = direct(3, 4);
        let mut trace = PassTrace::default();
        let spike = t
            .forward_propagate(&[Deposit::new(1, 1, 5.0)], &params(2.0, 0.0), &mut trace)
            .unwrap()
            .unwrap();
        assert_eq!(spike.z_index, 0);
        assert_eq!(spike.plane_energy, 5.0);
    }

    #[test]
    fn hand_traced_spike_at_plane_two() {
        // PE_0 = 1, plane 1 gets s(1), plane 2 gets s(s(1)).
        let s1 = SIGMOID_1;
        let s2 = 1.0 / (1.0 + (-s1).exp());
        let mut t = direct(3, 4);
        let mut trace = PassTrace::default();
        let spike = t
            .forward_propagate(&[Deposit::new(1, 1, 1.0)], &params(2.0, 0.0), &mut trace)
            .unwrap()
            .unwrap();
        assert_eq!(spike.z_index, 2);
        assert!((spike.plane_energy - (1.0 + s1 + s2)).abs() < 1e-12);
        assert!((spike.plane_energy - 2.406).abs() < 1e-3);

        let rewired = t.update_routers_on_spike(&spike);
        assert_eq!(rewired, vec![Cell::new(1, 1, 0), Cell::new(1, 1, 1)]);
    }

    #[test]
    fn out_of_range_deposit_is_rejected_before_any_energy_lands() {
        let mut t = direct(2, 2);
        let mut trace = PassTrace::default();
        let err = t
            .forward_propagate(
                &[Deposit::new(0, 0, 1.0), Deposit::new(2, 0, 1.0)],
                &params(5.0, 0.0),
                &mut trace,
            )
            .unwrap_err();
        assert!(matches!(err, EdenError::InputOutOfRange { .. }));
        assert_eq!(t.total_energy(), 0.0);
    }

    #[test]
    fn lateral_offsets_clamp_at_edges() {
        let mut t = direct(2, 2);
        t.fill_routers(RouterOption::new(1, 1).unwrap());
        let mut trace = PassTrace::default();
        t.forward_propagate(&[Deposit::new(1, 1, 0.5)], &params(10.0, 0.0), &mut trace)
            .unwrap();
        assert!(t.p(1, 1, 1) > 0.0);
        assert_eq!(t.plane_sum(1), t.p(1, 1, 1));
    }

    #[test]
    fn spike_at_entry_plane_rewires_nothing() {
        let mut t = direct(2, 3);
        t.fill_routers(RouterOption::new(-1, 0).unwrap());
        let rewired = t.update_routers_on_spike(&PlaneSpike { z_index: 0, plane_energy: 9.0 });
        assert!(rewired.is_empty());
    }

    #[test]
    fn unenergized_cells_keep_their_router() {
        let mut t = direct(3, 3);
        let off = RouterOption::new(1, 0).unwrap();
        t.fill_routers(off);
        t.set_p(0, 0, 0, 1.0).unwrap();
        t.update_routers_on_spike(&PlaneSpike { z_index: 2, plane_energy: 3.0 });
        assert_eq!(t.router(0, 0, 0), RouterOption::CENTER);
        assert_eq!(t.router(2, 2, 0), off);
    }

    #[test]
    fn stale_router_randomization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = direct(3, 3);
        assert_eq!(t.randomize_stale_routers(&mut rng), 0);
        t.set_p(0, 0, 0, 1.0).unwrap();
        t.set_p(1, 0, 1, 1.0).unwrap();
        t.set_p(2, 2, 2, 1.0).unwrap();
        let mut a = t.clone();
        let mut b = t.clone();
        assert_eq!(a.randomize_stale_routers(&mut ChaCha8Rng::seed_from_u64(7)), 3);
        assert_eq!(b.randomize_stale_routers(&mut ChaCha8Rng::seed_from_u64(7)), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn reset_is_idempotent_and_keeps_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = PwrTensor::random(3, 3, &mut rng).unwrap();
        t.set_p(1, 2, 1, 4.0).unwrap();
        t.accumulate_plane_energy(0, 1.0).unwrap();
        let w = t.weights().to_vec();
        t.reset_propagation();
        let once = t.clone();
        t.reset_propagation();
        assert_eq!(t, once);
        assert!(t.p_values().iter().all(|&p| p == 0.0));
        assert_eq!(t.weights(), &w[..]);
        let mut trace = PassTrace::default();
        assert!(t.forward_propagate(&[], &params(0.1, 0.0), &mut trace).unwrap().is_none());
    }

    #[test]
    fn backprop_with_exact_goal_is_a_no_op() {
        let mut t = direct(3, 4);
        let mut trace = PassTrace::default();
        let spike = t
            .forward_propagate(&[Deposit::new(1, 1, 1.0)], &params(2.0, 0.0), &mut trace)
            .unwrap()
            .unwrap();
        let goal = t.goal_from_plane(spike.z_index).unwrap();
        let w = t.weights().to_vec();
        let loss = t.backprop_to_goal(&goal, &trace, 0.5).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(t.weights(), &w[..]);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = PwrTensor::random(3, 4, &mut rng).unwrap();
        let mut trace = PassTrace::default();
        let spike = t
            .forward_propagate(&[Deposit::new(0, 0, 1.0)], &params(2.0, 0.0), &mut trace)
            .unwrap()
            .unwrap();
        let mut goal = t.goal_from_plane(spike.z_index).unwrap();
        goal.target_p.iter_mut().for_each(|v| *v += 0.3);
        let w: Vec<u64> = t.weights().iter().map(|v| v.to_bits()).collect();
        let loss = t.backprop_to_goal(&goal, &trace, 0.0).unwrap();
        assert!(loss > 0.0);
        let after: Vec<u64> = t.weights().iter().map(|v| v.to_bits()).collect();
        assert_eq!(w, after);
    }

    #[test]
    fn mismatched_goal_is_structural_error() {
        let t = direct(3, 3);
        let goal = GoalPlane { z_index: 1, dim_xy: 2, target_p: vec![0.0; 4] };
        assert!(matches!(
            t.goal_gradient(&goal, &PassTrace::default()),
            Err(EdenError::Structural(_))
        ));
    }
}
