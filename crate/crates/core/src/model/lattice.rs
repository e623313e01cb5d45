//! Periodic square lattice with the 8-site Moore neighbourhood.

use crate::error::{Error, Result};

/// Degree of every site in the Moore neighbourhood.
pub const DEGREE: usize = 8;

/// Row-major neighbour lists for every site of an `L x L` torus.
///
/// Row `i` lists the neighbours of site `i = r * L + c` in the order
/// NW, N, NE, W, E, SW, S, SE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    side: usize,
    rows: Vec<[u32; DEGREE]>,
}

impl NeighborTable {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_sites(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn neighbors(&self, site: usize) -> &[u32; DEGREE] {
        &self.rows[site]
    }

    pub fn rows(&self) -> &[[u32; DEGREE]] {
        &self.rows
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    /// Checks distinctness, no self loops and symmetry of every row.
    pub fn check_invariants(&self) -> bool {
        for (i, row) in self.rows.iter().enumerate() {
            for (a, &j) in row.iter().enumerate() {
                let j = j as usize;
                if j == i || j >= self.rows.len() {
                    return false;
                }
                if row[a + 1..].iter().any(|&k| k as usize == j) {
                    return false;
                }
                if !self.rows[j].iter().any(|&k| k as usize == i) {
                    return false;
                }
            }
        }
        true
    }
}

/// Builds the Moore neighbour table for a periodic lattice of the given side.
///
/// Neighbours are only pairwise distinct for `side >= 3`.
pub fn build_neighbor_table(side: usize) -> Result<NeighborTable> {
    if side < 3 {
        return Err(Error::InvalidParameter(format!(
            "lattice side must be >= 3 so that the 8 Moore neighbours are distinct (got {side})"
        )));
    }
    if side.checked_mul(side).is_none_or(|n| n > u32::MAX as usize) {
        return Err(Error::InvalidParameter(format!(
            "lattice side {side} is too large"
        )));
    }
    let l = side;
    let mut rows = Vec::with_capacity(l * l);
    for r in 0..l {
        let up = (r + l - 1) % l;
        let down = (r + 1) % l;
        for c in 0..l {
            let left = (c + l - 1) % l;
            let right = (c + 1) % l;
            rows.push([
                (up * l + left) as u32,
                (up * l + c) as u32,
                (up * l + right) as u32,
                (r * l + left) as u32,
                (r * l + right) as u32,
                (down * l + left) as u32,
                (down * l + c) as u32,
                (down * l + right) as u32,
            ]);
        }
    }
    Ok(NeighborTable { side, rows })
}
