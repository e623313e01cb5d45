use rand::RngCore;

use super::rng::unit_f64;

/// Spin configuration with a cached total spin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinState {
    spins: Vec<i8>,
    spin_sum: i64,
}

impl SpinState {
    /// Builds a state from explicit spins. Every entry must be `+1` or `-1`.
    pub fn from_spins(spins: Vec<i8>) -> Option<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return None;
        }
        let spin_sum = spins.iter().map(|&s| s as i64).sum();
        Some(Self { spins, spin_sum })
    }

    pub fn all_up(n: usize) -> Self {
        Self {
            spins: vec![1; n],
            spin_sum: n as i64,
        }
    }

    /// Checkerboard on an `side x side` lattice; site `(r, c)` is `+1` iff `r + c` is even.
    pub fn checkerboard(side: usize) -> Self {
        let spins = (0..side * side)
            .map(|i| if (i / side + i % side).is_multiple_of(2) { 1 } else { -1 })
            .collect();
        Self::from_spins(spins).expect("checkerboard spins are +-1")
    }

    /// I.i.d. fair spins, one uniform draw per site in site order.
    pub fn random<R: RngCore>(n: usize, rng: &mut R) -> Self {
        let spins = (0..n)
            .map(|_| if unit_f64(rng) < 0.5 { 1 } else { -1 })
            .collect();
        Self::from_spins(spins).expect("random spins are +-1")
    }

    #[inline]
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    #[inline]
    pub fn spin_sum(&self) -> i64 {
        self.spin_sum
    }

    #[inline]
    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    /// Sets one spin and keeps the cached sum in step.
    #[inline]
    pub fn set(&mut self, site: usize, value: i8) {
        debug_assert!(value == 1 || value == -1);
        let old = self.spins[site];
        self.spins[site] = value;
        self.spin_sum += (value - old) as i64;
    }

    /// True iff the cache matches a fresh recount and the parity constraint holds.
    pub fn cache_consistent(&self) -> bool {
        let n = self.spins.len() as i64;
        let recount: i64 = self.spins.iter().map(|&s| s as i64).sum();
        recount == self.spin_sum && self.spin_sum.abs() <= n && (self.spin_sum - n) % 2 == 0
    }

    /// Bit pattern of a small configuration; bit `i` set iff spin `i` is up.
    pub fn config_index(&self) -> usize {
        debug_assert!(self.spins.len() < usize::BITS as usize);
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0usize, |acc, (i, _)| acc | (1 << i))
    }

    /// Test hook: offsets the cached sum without touching the spins.
    #[doc(hidden)]
    pub fn corrupt_cache(&mut self, delta: i64) {
        self.spin_sum += delta;
    }
}

/// Mean spin `M = spin_sum / N`.
#[inline]
pub fn magnetization(state: &SpinState) -> f64 {
    state.spin_sum as f64 / state.spins.len() as f64
}
