//! Periodic lattice `(Z/LZ)^d`.
//!
//! Sites are numbered by their lexicographic rank with coordinate 1 most
//! significant. The hopping sum runs over directed bonds `(x, x + e_i)`, one
//! per site and direction, so there are exactly `d·L^d` of them. For `L = 2`
//! the neighbours `x + e_i` and `x - e_i` coincide and every unordered pair
//! shows up twice; this keeps the coordination number at `2d` for all `L`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bond {
    pub source: usize,
    pub target: usize,
    /// Zero-based coordinate direction of the step `source → target`.
    pub direction: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    side: usize,
    dimension: usize,
    num_sites: usize,
    bonds: Vec<Bond>,
}

impl Lattice {
    pub fn new(side: usize, dimension: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidInput(format!(
                "lattice side L must be at least 2, got {side}"
            )));
        }
        if dimension < 1 {
            return Err(Error::InvalidInput(
                "lattice dimension d must be at least 1".into(),
            ));
        }
        let num_sites = u32::try_from(dimension)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .ok_or_else(|| Error::InvalidInput(format!("L^d overflows for L={side}, d={dimension}")))?;

        let mut lattice = Self {
            side,
            dimension,
            num_sites,
            bonds: Vec::with_capacity(num_sites * dimension),
        };
        for source in 0..num_sites {
            let coords = lattice.coords(source);
            for direction in 0..dimension {
                let mut shifted = coords.clone();
                shifted[direction] = (shifted[direction] + 1) % side;
                lattice.bonds.push(Bond {
                    source,
                    target: lattice.site_index(&shifted),
                    direction,
                });
            }
        }
        Ok(lattice)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Coordinates of a site, most significant first.
    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dimension];
        let mut rest = site;
        for c in coords.iter_mut().rev() {
            *c = rest % self.side;
            rest /= self.side;
        }
        coords
    }

    /// Lexicographic rank of a coordinate tuple; coordinates are reduced mod L.
    pub fn site_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.side + c % self.side)
    }
}
