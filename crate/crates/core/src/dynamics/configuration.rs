use serde::{Deserialize, Serialize};

/// Particle counts per vertex, indexed by flat vertex index
/// (`2*site` for the upper row, `2*site+1` for the lower row).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    occupancy: Vec<u32>,
    total: u64,
}

impl Configuration {
    pub fn empty(sites: usize) -> Self {
        Configuration {
            occupancy: vec![0; 2 * sites],
            total: 0,
        }
    }

    pub fn from_occupancy(occupancy: Vec<u32>) -> Self {
        assert!(occupancy.len() % 2 == 0, "a ladder has two vertices per site");
        let total = occupancy.iter().map(|&k| u64::from(k)).sum();
        Configuration { occupancy, total }
    }

    /// Every vertex holding `c` particles.
    pub fn constant(sites: usize, c: u32) -> Self {
        Self::from_occupancy(vec![c; 2 * sites])
    }

    pub fn sites(&self) -> usize {
        self.occupancy.len() / 2
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    #[inline]
    pub fn get(&self, vertex: usize) -> u32 {
        self.occupancy[vertex]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Particles at site `j`, both rows.
    #[inline]
    pub fn site_total(&self, site: usize) -> u64 {
        u64::from(self.occupancy[2 * site]) + u64::from(self.occupancy[2 * site + 1])
    }

    /// Moves one particle `from -> to`. Panics if `from` is empty.
    #[inline]
    pub fn move_particle(&mut self, from: usize, to: usize) {
        assert!(self.occupancy[from] > 0, "jump from empty vertex {from}");
        self.occupancy[from] -= 1;
        self.occupancy[to] += 1;
    }

    /// Recounts the particles and compares with the cached total.
    pub fn is_consistent(&self) -> bool {
        self.occupancy.iter().map(|&k| u64::from(k)).sum::<u64>() == self.total
    }

    /// The configuration seen from site `shift`: site `j` of the result is
    /// site `j + shift` of `self`.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.sites();
        let mut occ = Vec::with_capacity(self.occupancy.len());
        for j in 0..n {
            let s = (j + shift) % n;
            occ.push(self.occupancy[2 * s]);
            occ.push(self.occupancy[2 * s + 1]);
        }
        Configuration {
            occupancy: occ,
            total: self.total,
        }
    }
}

/// Continuous time of a trajectory. Only the microscopic time is stored; the
/// macroscopic (diffusive) time is `micro / N^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub micro_time: f64,
    pub event_count: u64,
    sites: usize,
}

impl SimClock {
    pub fn new(sites: usize) -> Self {
        SimClock {
            micro_time: 0.0,
            event_count: 0,
            sites,
        }
    }

    pub fn scale(&self) -> f64 {
        (self.sites as f64).powi(2)
    }

    pub fn macro_time(&self) -> f64 {
        self.micro_time / self.scale()
    }

    pub fn micro_of(&self, macro_time: f64) -> f64 {
        macro_time * self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_conserve_total() {
        let mut c = Configuration::from_occupancy(vec![2, 0, 1, 0]);
        c.move_particle(0, 3);
        c.move_particle(2, 1);
        assert_eq!(c.occupancy(), &[1, 1, 0, 1]);
        assert_eq!(c.total(), 3);
        assert!(c.is_consistent());
    }

    #[test]
    #[should_panic(expected = "empty vertex")]
    fn moving_from_empty_panics() {
        Configuration::empty(2).move_particle(1, 0);
    }

    #[test]
    fn shift_relabels_sites() {
        let c = Configuration::from_occupancy(vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(c.shifted(1).occupancy(), &[3, 4, 5, 6, 1, 2]);
    }

    #[test]
    fn clock_scaling() {
        let mut clock = SimClock::new(64);
        clock.micro_time = 4096.0 * 0.05;
        assert_eq!(clock.macro_time(), 0.05);
        assert_eq!(clock.micro_of(0.05), clock.micro_time);
    }
}
