//! Counter-based random number streams.
//!
//! Estimation runs must be reproducible bit-for-bit for a given seed no
//! matter how samples are partitioned across workers, so the generator is a
//! pure function of (seed, stream index, counter). Substreams are cheap value
//! types: any chunk of work derives its own stream from the chunk index and
//! never shares state.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seeded, splittable counter stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream for (seed, index); identical inputs give identical
    /// streams on every platform and thread layout.
    pub fn substream(seed: u64, index: u64) -> Self {
        let key = mix(seed ^ mix(index.wrapping_mul(0xA24B_AED4_963E_E407).wrapping_add(GOLDEN)));
        CounterRng { key, ctr: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)))
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Unit-mean exponential draw (inverse CDF).
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -(-self.uniform()).ln_1p()
    }

    /// Uniform phase on [0, 2*pi).
    #[inline]
    pub fn phase(&mut self) -> f64 {
        std::f64::consts::TAU * self.uniform()
    }
}
