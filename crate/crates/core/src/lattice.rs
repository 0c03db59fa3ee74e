//! Periodic cubic lattices.
//!
//! A [`TorusLattice`] of dimension `d` and side `L` stands in for `ℤ^d`.
//! Sites are indexed row-major: coordinate 0 is the slowest-varying axis and
//! coordinate `d - 1` the fastest, so in one dimension the index is the
//! coordinate itself.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Site index in `[0, L^d)`.
pub type Site = usize;

/// Unordered nearest-neighbour pair, stored with the "forward" endpoint
/// second: `b = a + e_axis (mod L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: Site,
    pub b: Site,
}

impl Edge {
    pub fn touches(&self, x: Site) -> bool {
        self.a == x || self.b == x
    }

    /// The endpoint opposite to `x`, if `x` is an endpoint.
    pub fn other(&self, x: Site) -> Option<Site> {
        if x == self.a {
            Some(self.b)
        } else if x == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    dim: usize,
    side: usize,
}

impl TorusLattice {
    /// Largest site count accepted; keeps indices and buffers sane.
    pub const MAX_SITES: usize = 1 << 28;

    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid!("lattice dimension must be positive"));
        }
        if side < 3 {
            return Err(invalid!(
                "lattice side must be at least 3 (got {side}); smaller tori double their edges"
            ));
        }
        let n = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(side));
        match n {
            Some(n) if n <= Self::MAX_SITES => {}
            _ => {
                return Err(crate::Error::ResourceLimit(format!(
                    "torus {side}^{dim} exceeds {} sites",
                    Self::MAX_SITES
                )))
            }
        }
        Ok(TorusLattice { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Edge `k` leaves site `k / d` in the positive direction of axis `k % d`.
    pub fn edge(&self, k: usize) -> Edge {
        let a = k / self.dim;
        Edge {
            a,
            b: self.step(a, k % self.dim, true),
        }
    }

    /// All unordered edges; `d · L^d` of them, in index order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.num_edges()).map(|k| self.edge(k))
    }

    pub fn num_edges(&self) -> usize {
        self.dim * self.num_sites()
    }

    fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Neighbour of `x` one step along `axis`, forward or backward.
    pub fn step(&self, x: Site, axis: usize, forward: bool) -> Site {
        let stride = self.stride(axis);
        let c = (x / stride) % self.side;
        let nc = if forward {
            (c + 1) % self.side
        } else {
            (c + self.side - 1) % self.side
        };
        x - c * stride + nc * stride
    }

    /// The `2d` neighbours of `x`.
    pub fn neighbors(&self, x: Site) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim).flat_map(move |axis| [self.step(x, axis, false), self.step(x, axis, true)])
    }

    pub fn are_adjacent(&self, x: Site, y: Site) -> bool {
        self.neighbors(x).any(|z| z == y)
    }

    /// Edges with `x` as an endpoint (always `2d` of them).
    pub fn incident_edges(&self, x: Site) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).flat_map(move |axis| {
            let back = self.step(x, axis, false);
            [back * self.dim + axis, x * self.dim + axis]
        })
    }

    pub fn coords(&self, x: Site) -> Vec<usize> {
        (0..self.dim)
            .map(|axis| (x / self.stride(axis)) % self.side)
            .collect()
    }

    /// Site index of a coordinate vector; coordinates are reduced mod `L`.
    pub fn index(&self, coords: &[i64]) -> Result<Site> {
        if coords.len() != self.dim {
            return Err(invalid!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            ));
        }
        let l = self.side as i64;
        Ok(coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(l) as usize))
    }

    /// `x + v` with periodic wrap.
    pub fn translate(&self, x: Site, shift: &[i64]) -> Result<Site> {
        if shift.len() != self.dim {
            return Err(invalid!(
                "shift has {} components, lattice has dimension {}",
                shift.len(),
                self.dim
            ));
        }
        let c: Vec<i64> = self
            .coords(x)
            .iter()
            .zip(shift)
            .map(|(&c, &s)| c as i64 + s)
            .collect();
        self.index(&c)
    }

    /// Sites of the box `[0, m)^d` anchored at the origin.
    pub fn box_sites(&self, m: usize) -> Result<Vec<Site>> {
        if m == 0 || m > self.side {
            return Err(invalid!("box side {m} must lie in 1..={}", self.side));
        }
        let mut out = Vec::with_capacity(m.pow(self.dim as u32));
        let mut c = vec![0i64; self.dim];
        loop {
            out.push(self.index(&c)?);
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                c[axis] += 1;
                if (c[axis] as usize) < m {
                    break;
                }
                c[axis] = 0;
            }
        }
    }

    /// Torus side for observing the origin up to time `t` with boundary
    /// effects of probability at most `eps`:
    /// `max(3, ceil(8t + 10·sqrt(t·ln(1/eps)) + 20))`.
    pub fn light_cone_side(t: f64, eps: f64) -> Result<usize> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid!("light-cone time must be finite and nonnegative"));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid!("light-cone error budget must lie in (0, 1)"));
        }
        let side = (8.0 * t + 10.0 * (t * (1.0 / eps).ln()).sqrt() + 20.0).ceil();
        Ok((side as usize).max(3))
    }
}
