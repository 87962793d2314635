use rand::seq::index;

use super::sweep::ErrorMap;
use crate::geometry::Geometry;
use crate::rng;

const PERMUTATION_KEY: u64 = 0x5045_524d;

/// Result of the adjacency permutation test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialScore {
    /// Fraction of erroneous cells with an erroneous 4-neighbour.
    pub score: f64,
    /// `(1 + #{shuffles scoring >= score}) / (1 + shuffles)`.
    pub p_value: f64,
    pub permutations: u32,
    /// The map had no erroneous cells, or no room to rearrange them.
    pub degenerate: bool,
}

/// Dense cell set over all banks with the 4-neighbourhood of the
/// (row x cache line) grid of each bank.
struct Grid {
    bits: Vec<u64>,
    cols: u64,
    rows: u64,
}

impl Grid {
    fn new(g: &Geometry) -> Self {
        Grid {
            bits: vec![0; g.total_lines().div_ceil(64) as usize],
            cols: g.cachelines_per_row as u64,
            rows: g.rows_per_bank as u64,
        }
    }

    fn set(&mut self, i: u64) {
        self.bits[(i / 64) as usize] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: u64) {
        self.bits[(i / 64) as usize] &= !(1 << (i % 64));
    }

    fn get(&self, i: u64) -> bool {
        self.bits[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    fn has_neighbour(&self, i: u64) -> bool {
        let col = i % self.cols;
        let row = (i / self.cols) % self.rows;
        (col > 0 && self.get(i - 1))
            || (col + 1 < self.cols && self.get(i + 1))
            || (row > 0 && self.get(i - self.cols))
            || (row + 1 < self.rows && self.get(i + self.cols))
    }

    fn score(&self, cells: &[u64]) -> f64 {
        let joined = cells.iter().filter(|&&c| self.has_neighbour(c)).count();
        joined as f64 / cells.len() as f64
    }
}

/// Adjacency statistic of the map's erroneous cells, with a p-value from
/// `permutations` uniform relocations of the same number of cells.
pub fn spatial_locality_score(map: &ErrorMap, permutations: u32, seed: u64) -> SpatialScore {
    let g = map.geometry();
    let cells: Vec<u64> = map.cells().iter().map(|c| c.0 as u64).collect();
    let n = g.total_lines();
    let mut grid = Grid::new(g);
    cells.iter().for_each(|&c| grid.set(c));
    let observed = if cells.is_empty() { 0.0 } else { grid.score(&cells) };
    if cells.is_empty() || cells.len() as u64 == n || permutations == 0 {
        return SpatialScore { score: observed, p_value: 1.0, permutations: 0, degenerate: true };
    }
    cells.iter().for_each(|&c| grid.clear(c));

    let mut rng = rng::stream(seed, &[PERMUTATION_KEY]);
    let mut at_least = 0u32;
    let mut sample: Vec<u64> = Vec::with_capacity(cells.len());
    for _ in 0..permutations {
        sample.clear();
        sample.extend(index::sample(&mut rng, n as usize, cells.len()).iter().map(|i| i as u64));
        sample.iter().for_each(|&c| grid.set(c));
        if grid.score(&sample) >= observed {
            at_least += 1;
        }
        sample.iter().for_each(|&c| grid.clear(c));
    }
    SpatialScore {
        score: observed,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
        permutations,
        degenerate: false,
    }
}

/// The same number of erroneous cells as `map`, placed uniformly at random.
pub fn shuffled_control(map: &ErrorMap, seed: u64) -> ErrorMap {
    let g = *map.geometry();
    let mut rng = rng::stream(seed, &[PERMUTATION_KEY, 1]);
    let positions = index::sample(&mut rng, g.total_lines() as usize, map.cells().len());
    let cells = positions.iter().zip(map.cells()).map(|(p, &(_, count))| (p as u32, count)).collect();
    ErrorMap::from_counts(g, map.trials(), cells).expect("positions are distinct and in range")
}
