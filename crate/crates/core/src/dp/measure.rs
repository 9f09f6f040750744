use std::io::Write;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ladder::BoundaryConvention;
use crate::model::StepDistribution;

/// Cell values the DP can carry: probabilities or exact path counts.
pub trait Weight: Clone + Send + Sync + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    /// `self += src * w`
    fn add_scaled(&mut self, src: &Self, w: &Self);
    fn add(&mut self, other: &Self);
    /// Zeroes a value below `threshold` and returns what was removed.
    fn prune(&mut self, threshold: f64) -> f64;
    fn to_f64(&self) -> f64;
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    #[inline]
    fn add_scaled(&mut self, src: &Self, w: &Self) {
        *self += src * w;
    }

    fn add(&mut self, other: &Self) {
        *self += other;
    }

    fn prune(&mut self, threshold: f64) -> f64 {
        if *self != 0.0 && self.abs() < threshold {
            let v = *self;
            *self = 0.0;
            v
        } else {
            0.0
        }
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Weight for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn add_scaled(&mut self, src: &Self, w: &Self) {
        if !Zero::is_zero(src) {
            *self += src * w;
        }
    }

    fn add(&mut self, other: &Self) {
        *self += other;
    }

    fn prune(&mut self, _threshold: f64) -> f64 {
        0.0
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Quadrant,
    /// Only the vertical coordinate is killed.
    UpperHalfPlane,
    /// Only the horizontal coordinate is killed.
    RightHalfPlane,
}

/// Survival region and kill rule. Quadrant exit is the first of the two
/// half-plane exits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExitSpec {
    pub region: Region,
    pub conv: BoundaryConvention,
}

impl ExitSpec {
    pub fn quadrant(conv: BoundaryConvention) -> Self {
        ExitSpec {
            region: Region::Quadrant,
            conv,
        }
    }

    pub fn upper(conv: BoundaryConvention) -> Self {
        ExitSpec {
            region: Region::UpperHalfPlane,
            conv,
        }
    }

    pub fn right(conv: BoundaryConvention) -> Self {
        ExitSpec {
            region: Region::RightHalfPlane,
            conv,
        }
    }

    pub fn alive_min1(&self) -> Option<i64> {
        match self.region {
            Region::Quadrant | Region::RightHalfPlane => Some(self.conv.alive_min()),
            Region::UpperHalfPlane => None,
        }
    }

    pub fn alive_min2(&self) -> Option<i64> {
        match self.region {
            Region::Quadrant | Region::UpperHalfPlane => Some(self.conv.alive_min()),
            Region::RightHalfPlane => None,
        }
    }

    pub fn survives(&self, x: (i64, i64)) -> bool {
        self.alive_min1().is_none_or(|m| x.0 >= m) && self.alive_min2().is_none_or(|m| x.1 >= m)
    }
}

/// Step law in the form the DP consumes.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    pub atoms: Vec<(i64, i64, T)>,
    pub vertical: Vec<(i64, T)>,
    pub min_dx: i64,
    pub max_dx: i64,
    pub min_dy: i64,
    pub max_dy: i64,
}

impl<T: Weight> Kernel<T> {
    pub fn new(atoms: Vec<(i64, i64, T)>) -> Self {
        let mut vertical: Vec<(i64, T)> = Vec::new();
        for (_, dy, w) in &atoms {
            match vertical.iter_mut().find(|(j, _)| j == dy) {
                Some((_, acc)) => acc.add(w),
                None => vertical.push((*dy, w.clone())),
            }
        }
        vertical.sort_by_key(|(j, _)| *j);
        let min_dx = atoms.iter().map(|a| a.0).min().unwrap_or(0);
        let max_dx = atoms.iter().map(|a| a.0).max().unwrap_or(0);
        let min_dy = atoms.iter().map(|a| a.1).min().unwrap_or(0);
        let max_dy = atoms.iter().map(|a| a.1).max().unwrap_or(0);
        Kernel {
            atoms,
            vertical,
            min_dx,
            max_dx,
            min_dy,
            max_dy,
        }
    }

    pub fn max_abs_dx(&self) -> i64 {
        self.min_dx.abs().max(self.max_dx.abs())
    }
}

impl Kernel<f64> {
    pub fn probabilities(sd: &StepDistribution) -> Self {
        Kernel::new(sd.probabilities().collect())
    }
}

impl Kernel<BigUint> {
    /// Every step counts once; duplicates count with multiplicity.
    pub fn counting(steps: &[(i64, i64)]) -> Self {
        let mut atoms: Vec<(i64, i64, BigUint)> = Vec::new();
        for &(dx, dy) in steps {
            match atoms.iter_mut().find(|a| a.0 == dx && a.1 == dy) {
                Some(a) => a.2 += 1u32,
                None => atoms.push((dx, dy, BigUint::from(1u32))),
            }
        }
        Kernel::new(atoms)
    }
}

/// Dense rectangular window `[lo1, lo1 + w1) x [lo2, lo2 + w2)`, stored column by column.
#[derive(Debug, Clone)]
struct Grid<T> {
    lo1: i64,
    lo2: i64,
    w1: usize,
    w2: usize,
    data: Vec<T>,
}

impl<T: Weight> Grid<T> {
    fn empty() -> Self {
        Grid {
            lo1: 0,
            lo2: 0,
            w1: 0,
            w2: 0,
            data: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.w1 == 0 || self.w2 == 0
    }

    fn get(&self, x1: i64, x2: i64) -> Option<&T> {
        let i1 = x1 - self.lo1;
        let i2 = x2 - self.lo2;
        if i1 < 0 || i2 < 0 || i1 as usize >= self.w1 || i2 as usize >= self.w2 {
            return None;
        }
        Some(&self.data[i1 as usize * self.w2 + i2 as usize])
    }

    fn column(&self, x1: i64) -> Option<&[T]> {
        let i1 = x1 - self.lo1;
        if i1 < 0 || i1 as usize >= self.w1 {
            return None;
        }
        let s = i1 as usize * self.w2;
        Some(&self.data[s..s + self.w2])
    }

    fn cells(&self) -> impl Iterator<Item = (i64, i64, &T)> + '_ {
        self.data.iter().enumerate().map(move |(k, v)| {
            (
                self.lo1 + (k / self.w2) as i64,
                self.lo2 + (k % self.w2) as i64,
                v,
            )
        })
    }

    /// Shrinks the window to the bounding box of nonzero cells.
    fn trim(&mut self) {
        let (mut c_lo, mut c_hi, mut r_lo, mut r_hi) = (usize::MAX, 0usize, usize::MAX, 0usize);
        for i1 in 0..self.w1 {
            let col = &self.data[i1 * self.w2..(i1 + 1) * self.w2];
            if let Some(first) = col.iter().position(|v| !v.is_zero()) {
                let last = col.iter().rposition(|v| !v.is_zero()).unwrap_or(first);
                c_lo = c_lo.min(i1);
                c_hi = c_hi.max(i1);
                r_lo = r_lo.min(first);
                r_hi = r_hi.max(last);
            }
        }
        if c_lo == usize::MAX {
            *self = Grid::empty();
            return;
        }
        let (nw1, nw2) = (c_hi - c_lo + 1, r_hi - r_lo + 1);
        if nw1 == self.w1 && nw2 == self.w2 {
            return;
        }
        let mut data = Vec::with_capacity(nw1 * nw2);
        for i1 in c_lo..=c_hi {
            let s = i1 * self.w2;
            data.extend_from_slice(&self.data[s + r_lo..s + r_hi + 1]);
        }
        self.lo1 += c_lo as i64;
        self.lo2 += r_lo as i64;
        self.w1 = nw1;
        self.w2 = nw2;
        self.data = data;
    }
}

/// 1-D measure over the vertical coordinate, used for mass past the barrier.
#[derive(Debug, Clone)]
pub struct VerticalMeasure<T> {
    lo: i64,
    data: Vec<T>,
}

impl<T: Weight> VerticalMeasure<T> {
    pub fn empty() -> Self {
        VerticalMeasure {
            lo: 0,
            data: Vec::new(),
        }
    }

    pub fn point(x2: i64, w: T) -> Self {
        VerticalMeasure {
            lo: x2,
            data: vec![w],
        }
    }

    pub fn get(&self, x2: i64) -> T {
        let i = x2 - self.lo;
        if i < 0 || i as usize >= self.data.len() {
            return T::zero();
        }
        self.data[i as usize].clone()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> + '_ {
        self.data.iter().enumerate().map(move |(i, v)| (self.lo + i as i64, v))
    }

    pub fn total(&self) -> T {
        let mut t = T::zero();
        for v in &self.data {
            t.add(v);
        }
        t
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    fn add_at(&mut self, x2: i64, w: &T) {
        if self.data.is_empty() {
            self.lo = x2;
            self.data.push(w.clone());
            return;
        }
        if x2 < self.lo {
            let pad = (self.lo - x2) as usize;
            let mut data = vec![T::zero(); pad];
            data.append(&mut self.data);
            self.data = data;
            self.lo = x2;
        }
        let i = (x2 - self.lo) as usize;
        if i >= self.data.len() {
            self.data.resize(i + 1, T::zero());
        }
        self.data[i].add(w);
    }

    /// One step of the vertical walk killed below `alive_min`.
    /// Returns `(killed, dropped)`.
    pub fn step(&mut self, vertical: &[(i64, T)], alive_min: Option<i64>, prune: f64) -> (T, f64) {
        let mut killed = T::zero();
        if self.data.is_empty() {
            return (killed, 0.0);
        }
        let min_j = vertical.first().map_or(0, |v| v.0);
        let max_j = vertical.last().map_or(0, |v| v.0);
        let t_lo = self.lo + min_j;
        let len = self.data.len() + (max_j - min_j) as usize;
        let mut next = vec![T::zero(); len];
        for (i, m) in self.data.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            for (j, w) in vertical {
                let t = (i as i64 + j - min_j) as usize;
                next[t].add_scaled(m, w);
            }
        }
        let mut dropped = 0.0;
        if let Some(amin) = alive_min {
            let cut = ((amin - t_lo).max(0) as usize).min(len);
            for v in &next[..cut] {
                killed.add(v);
            }
            next.drain(..cut);
            self.lo = t_lo + cut as i64;
        } else {
            self.lo = t_lo;
        }
        for v in next.iter_mut() {
            dropped += v.prune(prune);
        }
        let first = next.iter().position(|v| !v.is_zero());
        match first {
            None => {
                self.data.clear();
            }
            Some(f) => {
                let last = next.iter().rposition(|v| !v.is_zero()).unwrap_or(f);
                next.truncate(last + 1);
                next.drain(..f);
                self.lo += f as i64;
                self.data = next;
            }
        }
        (killed, dropped)
    }
}

/// Statistics of the mass that crossed the barrier, at the moment it crossed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LeakStats {
    pub mass: f64,
    /// `sum m * x2` over leak events.
    pub mass_x2: f64,
    /// Smallest horizontal coordinate at which mass leaked.
    pub min_x1: Option<i64>,
}

/// Sub-probability (or path-count) measure of the killed walk after `n` steps.
#[derive(Debug, Clone)]
pub struct QuadrantMeasure<T: Weight> {
    n: u64,
    spec: ExitSpec,
    kernel: Kernel<T>,
    grid: Grid<T>,
    barrier: Option<i64>,
    leaked: VerticalMeasure<T>,
    leak: LeakStats,
    killed: T,
    killed_leaked: T,
    dropped: f64,
    prune: f64,
}

impl<T: Weight> QuadrantMeasure<T> {
    /// Unit mass at `start`. With a barrier, a start beyond it leaks at once.
    pub fn new(
        kernel: Kernel<T>,
        spec: ExitSpec,
        start: (i64, i64),
        unit: T,
        barrier: Option<i64>,
        prune: f64,
    ) -> Result<Self> {
        if !spec.survives(start) {
            return Err(Error::StartOutside(start.0, start.1));
        }
        if let Some(l) = barrier {
            if l < kernel.max_abs_dx() {
                return Err(Error::BarrierTooSmall {
                    barrier: l,
                    max_dx: kernel.max_abs_dx(),
                });
            }
        }
        let mut m = QuadrantMeasure {
            n: 0,
            spec,
            kernel,
            grid: Grid::empty(),
            barrier,
            leaked: VerticalMeasure::empty(),
            leak: LeakStats::default(),
            killed: T::zero(),
            killed_leaked: T::zero(),
            dropped: 0.0,
            prune,
        };
        match barrier {
            Some(l) if start.0 > l => {
                m.record_leak(start.0, start.1, &unit);
                m.leaked = VerticalMeasure::point(start.1, unit);
            }
            _ => {
                m.grid = Grid {
                    lo1: start.0,
                    lo2: start.1,
                    w1: 1,
                    w2: 1,
                    data: vec![unit],
                };
            }
        }
        Ok(m)
    }

    fn record_leak(&mut self, x1: i64, x2: i64, w: &T) {
        let m = w.to_f64();
        self.leak.mass += m;
        self.leak.mass_x2 += m * x2 as f64;
        self.leak.min_x1 = Some(self.leak.min_x1.map_or(x1, |v| v.min(x1)));
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn spec(&self) -> ExitSpec {
        self.spec
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn barrier(&self) -> Option<i64> {
        self.barrier
    }

    pub fn leak_stats(&self) -> LeakStats {
        self.leak
    }

    /// Mass removed by the kill rule so far (two-dimensional and leaked parts).
    pub fn killed(&self) -> T {
        let mut k = self.killed.clone();
        k.add(&self.killed_leaked);
        k
    }

    /// Mass discarded by pruning so far.
    pub fn dropped(&self) -> f64 {
        self.dropped
    }

    pub fn leaked(&self) -> &VerticalMeasure<T> {
        &self.leaked
    }

    /// Mass at `(x1, x2)` in the two-dimensional part. `None` when the point
    /// lies beyond the barrier, where the horizontal position is not tracked.
    pub fn local(&self, x1: i64, x2: i64) -> Option<T> {
        if self.barrier.is_some_and(|l| x1 > l) {
            return None;
        }
        Some(self.grid.get(x1, x2).cloned().unwrap_or_else(T::zero))
    }

    /// Alive mass on the horizontal line at height `x2`, leaked part included.
    pub fn row(&self, x2: i64) -> T {
        let mut acc = self.leaked.get(x2);
        if !self.grid.is_empty() {
            for x1 in self.grid.lo1..self.grid.lo1 + self.grid.w1 as i64 {
                if let Some(v) = self.grid.get(x1, x2) {
                    acc.add(v);
                }
            }
        }
        acc
    }

    /// Nonzero cells of the two-dimensional part.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64, &T)> + '_ {
        self.grid.cells().filter(|c| !c.2.is_zero())
    }

    pub fn grid_total(&self) -> T {
        let mut t = T::zero();
        for v in &self.grid.data {
            t.add(v);
        }
        t
    }

    pub fn total_alive(&self) -> T {
        let mut t = self.grid_total();
        t.add(&self.leaked.total());
        t
    }

    /// Advances the measure by one step.
    pub fn step(&mut self) {
        let alive_min2 = self.spec.alive_min2();
        let (k_leak, d_leak) = self.leaked.step(&self.kernel.vertical, alive_min2, self.prune);
        self.killed_leaked.add(&k_leak);
        self.dropped += d_leak;
        self.n += 1;
        if self.grid.is_empty() {
            return;
        }

        let k = &self.kernel;
        let g = &self.grid;
        let hi1 = g.lo1 + g.w1 as i64 - 1;
        let hi2 = g.lo2 + g.w2 as i64 - 1;
        let t_lo1 = g.lo1 + k.min_dx;
        let t_hi1 = hi1 + k.max_dx;
        let t_lo2 = g.lo2 + k.min_dy;
        let t_hi2 = hi2 + k.max_dy;
        let a_min1 = self.spec.alive_min1();
        let a_lo1 = a_min1.map_or(t_lo1, |m| t_lo1.max(m));
        let a_lo2 = alive_min2.map_or(t_lo2, |m| t_lo2.max(m));

        // explicit kill: walk the source cells whose image can leave the region
        let mut killed = T::zero();
        for (i1, col) in g.data.chunks(g.w2).enumerate() {
            let x1 = g.lo1 + i1 as i64;
            let near_left = a_min1.is_some_and(|m| x1 + k.min_dx < m);
            for (i2, m) in col.iter().enumerate() {
                let x2 = g.lo2 + i2 as i64;
                let near_bottom = alive_min2.is_some_and(|m| x2 + k.min_dy < m);
                if !near_bottom && !near_left {
                    break;
                }
                if m.is_zero() {
                    continue;
                }
                for (dx, dy, w) in &k.atoms {
                    if !self.spec.survives((x1 + dx, x2 + dy)) {
                        killed.add_scaled(m, w);
                    }
                }
            }
        }
        self.killed.add(&killed);

        if t_hi2 < a_lo2 {
            self.grid = Grid::empty();
            return;
        }
        let w2 = (t_hi2 - a_lo2 + 1) as usize;
        let gather = |x1: i64, out: &mut [T]| {
            for (dx, dy, w) in &k.atoms {
                let Some(src) = g.column(x1 - dx) else {
                    continue;
                };
                // out[i] holds x2 = a_lo2 + i, reading src at x2 - dy
                let off = a_lo2 - dy - g.lo2;
                let i_start = (-off).max(0) as usize;
                let i_end = ((g.w2 as i64 - off).min(w2 as i64)).max(0) as usize;
                for i in i_start..i_end {
                    out[i].add_scaled(&src[(i as i64 + off) as usize], w);
                }
            }
        };

        // columns past the barrier feed the vertical measure
        let a_hi1 = self.barrier.map_or(t_hi1, |l| t_hi1.min(l));
        if let Some(l) = self.barrier {
            let mut col = vec![T::zero(); w2];
            for x1 in (l + 1).max(t_lo1)..=t_hi1 {
                col.iter_mut().for_each(|v| *v = T::zero());
                gather(x1, &mut col);
                for (i, v) in col.iter().enumerate() {
                    if !v.is_zero() {
                        let x2 = a_lo2 + i as i64;
                        let m = v.to_f64();
                        self.leak.mass += m;
                        self.leak.mass_x2 += m * x2 as f64;
                        self.leak.min_x1 = Some(self.leak.min_x1.map_or(x1, |v| v.min(x1)));
                        self.leaked.add_at(x2, v);
                    }
                }
            }
        }

        if a_hi1 < a_lo1 {
            self.grid = Grid::empty();
            return;
        }
        let w1 = (a_hi1 - a_lo1 + 1) as usize;
        let mut data = vec![T::zero(); w1 * w2];
        data.par_chunks_mut(w2).enumerate().for_each(|(i1, out)| {
            gather(a_lo1 + i1 as i64, out);
        });
        let mut dropped = 0.0;
        if self.prune > 0.0 {
            for v in data.iter_mut() {
                dropped += v.prune(self.prune);
            }
        }
        self.dropped += dropped;
        self.grid = Grid {
            lo1: a_lo1,
            lo2: a_lo2,
            w1,
            w2,
            data,
        };
        self.grid.trim();
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

impl QuadrantMeasure<f64> {
    /// `sum m f(x2)` over the alive mass, leaked part included.
    pub fn vertical_functional(&self, f: impl Fn(i64) -> f64) -> f64 {
        let grid: f64 = self.cells().map(|(_, x2, m)| m * f(x2)).sum();
        let leaked: f64 = self.leaked.iter().map(|(x2, m)| m * f(x2)).sum();
        grid + leaked
    }

    /// Writes the two-dimensional part as CSV rows `x1,x2,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x1", "x2", "weight"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for (x1, x2, m) in self.cells() {
            w.serialize((x1, x2, m)).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
