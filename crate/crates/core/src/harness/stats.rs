use alloc::vec;
use alloc::vec::Vec;

/// Cost accounting for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundStats {
    /// Elementary interactive operations (multiplications, inner products,
    /// openings).
    pub interactive_ops: u64,
    /// Sequential communication steps, with batched work sharing rounds.
    pub rounds: u64,
    /// Bytes sent by each computational party.
    pub bytes_per_party: Vec<u64>,
    /// Wall time, filled in by the std runner.
    pub wall_ms: u64,
    /// Random shared bits supplied by the trusted dealer.
    pub dealer_bits: u64,
    /// In-band error signals (reads of null, released, or unallocated memory).
    pub diagnostics: u64,
}

impl RoundStats {
    pub fn new(n: usize) -> Self {
        RoundStats {
            bytes_per_party: vec![0; n],
            ..Default::default()
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_per_party.iter().sum()
    }

    /// Counter-wise difference `self - earlier` (wall time excluded).
    pub fn since(&self, earlier: &RoundStats) -> RoundStats {
        RoundStats {
            interactive_ops: self.interactive_ops - earlier.interactive_ops,
            rounds: self.rounds - earlier.rounds,
            bytes_per_party: self
                .bytes_per_party
                .iter()
                .zip(&earlier.bytes_per_party)
                .map(|(a, b)| a - b)
                .collect(),
            wall_ms: 0,
            dealer_bits: self.dealer_bits - earlier.dealer_bits,
            diagnostics: self.diagnostics - earlier.diagnostics,
        }
    }
}
