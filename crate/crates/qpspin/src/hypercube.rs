//! Bit-level combinatorics of the configuration space `Q_N = {-1,+1}^N`.
//!
//! Configurations are indexed `0..2^N-1` by their bit word; bit `j` set
//! means spin `j` points up (`σ_j = +1`). The energy table and every
//! subset mask in the crate share this indexing.

/// Largest spin count supported by configurations and masks.
pub const MAX_N: usize = 30;

/// One vertex of the Hamming cube, bit-packed.
///
/// Bit `j` of `bits` is 1 exactly when `σ_{j} = +1`; bits above `n` are
/// always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfiguration {
    bits: u32,
    n: u8,
}

impl SpinConfiguration {
    /// Builds a configuration from its bit word.
    ///
    /// Panics if `n` is outside `1..=30` or `bits` uses bits at or above
    /// position `n`.
    pub fn new(bits: u32, n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_N, "spin count {n} outside 1..={MAX_N}");
        assert!(
            n == 32 || bits >> n == 0,
            "bit word {bits:#x} uses positions >= {n}"
        );
        Self { bits, n: n as u8 }
    }

    /// All spins up.
    pub fn all_plus(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_N);
        Self::new(((1u64 << n) - 1) as u32, n)
    }

    /// All spins down.
    pub fn all_minus(n: usize) -> Self {
        Self::new(0, n)
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn n(self) -> usize {
        self.n as usize
    }

    /// Index of this configuration in a length-`2^N` table.
    pub fn index(self) -> usize {
        self.bits as usize
    }

    /// Value of spin `j` as `+1` or `-1`.
    pub fn spin(self, j: usize) -> i32 {
        assert!(j < self.n());
        if self.bits >> j & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Hamming distance `dist(σ, σ') = Σ_i |σ_i - σ'_i| / 2`.
    pub fn hamming_distance(self, other: Self) -> usize {
        assert_eq!(self.n, other.n, "configurations live on different cubes");
        (self.bits ^ other.bits).count_ones() as usize
    }

    /// Normalized overlap `r = (1/N) Σ_j σ_j τ_j = 1 - 2 dist / N`.
    ///
    /// The Hamming distance is computed in integer arithmetic before the
    /// single division, so antipodal pairs give exactly `-1.0`.
    pub fn overlap(self, other: Self) -> f64 {
        let d = self.hamming_distance(other);
        let n = self.n();
        (n as f64 - 2.0 * d as f64) / n as f64
    }

    /// Flips spin `j`; an involution at unit Hamming distance.
    pub fn flip(self, j: usize) -> Self {
        assert!(j < self.n(), "flip index {j} out of range for n={}", self.n);
        Self {
            bits: self.bits ^ (1 << j),
            n: self.n,
        }
    }
}

/// Dense membership indicator over all `2^N` configurations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubsetMask {
    blocks: Vec<u64>,
    n: u8,
}

impl SubsetMask {
    /// The empty subset of `Q_N`.
    pub fn empty(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_N, "spin count {n} outside 1..={MAX_N}");
        let words = (1usize << n).div_ceil(64);
        Self {
            blocks: vec![0; words],
            n: n as u8,
        }
    }

    /// All of `Q_N`.
    pub fn full(n: usize) -> Self {
        let mut mask = Self::empty(n);
        for b in &mut mask.blocks {
            *b = u64::MAX;
        }
        mask.trim();
        mask
    }

    pub fn from_members<I: IntoIterator<Item = u32>>(n: usize, members: I) -> Self {
        let mut mask = Self::empty(n);
        for w in members {
            mask.insert(w);
        }
        mask
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    /// Number of configurations in the cube (`2^N`).
    pub fn universe_size(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn contains(&self, word: u32) -> bool {
        debug_assert!((word as usize) < self.universe_size());
        self.blocks[(word >> 6) as usize] >> (word & 63) & 1 == 1
    }

    pub fn insert(&mut self, word: u32) {
        assert!((word as usize) < self.universe_size());
        self.blocks[(word >> 6) as usize] |= 1 << (word & 63);
    }

    pub fn remove(&mut self, word: u32) {
        assert!((word as usize) < self.universe_size());
        self.blocks[(word >> 6) as usize] &= !(1 << (word & 63));
    }

    pub fn cardinality(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            *b = !*b;
        }
        out.trim();
        out
    }

    pub fn union_with(&mut self, other: &Self) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a |= b;
        }
    }

    /// Members in increasing word order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().enumerate().flat_map(|(i, &block)| {
            let base = (i as u32) << 6;
            BitIter { block }.map(move |j| base + j)
        })
    }

    pub fn members(&self) -> Vec<u32> {
        self.iter().collect()
    }

    /// Zeroes indicator bits beyond `2^n` (only relevant for `n < 6`).
    fn trim(&mut self) {
        let size = self.universe_size();
        if size < 64 {
            self.blocks[0] &= (1u64 << size) - 1;
        }
    }
}

struct BitIter {
    block: u64,
}

impl Iterator for BitIter {
    type Item = u32;
    fn next(&mut self) -> Option<u32> {
        if self.block == 0 {
            return None;
        }
        let j = self.block.trailing_zeros();
        self.block &= self.block - 1;
        Some(j)
    }
}

/// Closed Hamming ball of the given radius around `center`.
///
/// Contains exactly the configurations at distance `<= radius`, so its
/// cardinality is `Σ_{k<=radius} C(N,k)`.
pub fn ball(center: SpinConfiguration, radius: usize) -> SubsetMask {
    let n = center.n();
    assert!(radius <= n, "radius {radius} exceeds n={n}");
    let mut mask = SubsetMask::empty(n);
    for word in 0..1u32 << n {
        if (word ^ center.bits()).count_ones() as usize <= radius {
            mask.insert(word);
        }
    }
    mask
}

/// Binary entropy `γ(r) = -r ln r - (1-r) ln(1-r)`, extended by
/// continuity to `γ(0) = γ(1) = 0`.
pub fn binary_entropy(r: f64) -> f64 {
    assert!((0.0..=1.0).contains(&r), "entropy argument {r} outside [0,1]");
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    -r * r.ln() - (1.0 - r) * (1.0 - r).ln()
}

/// Volume bound `e^{N γ(r)}` for the closed ball of radius `rN`; valid in
/// the monotone regime `0 <= r <= 1/2`.
pub fn ball_volume_bound(n: usize, r: f64) -> f64 {
    assert!(
        (0.0..=0.5).contains(&r),
        "ball volume bound needs 0 <= r <= 1/2, got {r}"
    );
    (n as f64 * binary_entropy(r)).exp()
}

/// Binomial coefficient as exact f64 (arguments stay far below 2^53 for
/// every n <= 30).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0f64;
    let mut den = 1.0f64;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_identity_and_antipodal() {
        let a = SpinConfiguration::all_plus(8);
        let b = SpinConfiguration::all_minus(8);
        assert_eq!(a.hamming_distance(a), 0);
        assert_eq!(a.hamming_distance(b), 8);
    }

    #[test]
    fn distance_counts_bits() {
        // 00101 vs 00110 differ in the two lowest-but-one positions.
        let a = SpinConfiguration::new(0b00101, 5);
        let b = SpinConfiguration::new(0b00110, 5);
        assert_eq!(a.hamming_distance(b), 2);
        assert_eq!(b.hamming_distance(a), 2);
    }

    #[test]
    fn distance_triangle_inequality() {
        let n = 6;
        for a in 0..1u32 << n {
            for b in 0..1u32 << n {
                let c = rotate(a, n);
                let (sa, sb, sc) = (
                    SpinConfiguration::new(a, n),
                    SpinConfiguration::new(b, n),
                    SpinConfiguration::new(c, n),
                );
                assert!(
                    sa.hamming_distance(sb)
                        <= sa.hamming_distance(sc) + sc.hamming_distance(sb)
                );
            }
        }
    }

    fn rotate(w: u32, n: usize) -> u32 {
        ((w << 1) | (w >> (n - 1))) & ((1 << n) - 1)
    }

    #[test]
    fn overlap_matches_distance_identity() {
        for n in [4usize, 7, 12] {
            for t in 0..200u64 {
                let a = SpinConfiguration::new(
                    (crate::rng::raw(1, t) & ((1 << n) - 1)) as u32,
                    n,
                );
                let b = SpinConfiguration::new(
                    (crate::rng::raw(2, t) & ((1 << n) - 1)) as u32,
                    n,
                );
                let d = a.hamming_distance(b);
                // Exact integer arithmetic before the single division.
                let exact = (n as f64 - 2.0 * d as f64) / n as f64;
                assert_eq!(a.overlap(b), exact);
                assert!((a.overlap(b) - (1.0 - 2.0 * d as f64 / n as f64)).abs() < 1e-15);
            }
        }
        let a = SpinConfiguration::all_plus(4);
        assert_eq!(a.overlap(a), 1.0);
        assert_eq!(a.overlap(SpinConfiguration::all_minus(4)), -1.0);
        assert_eq!(a.overlap(a.flip(2)), 0.5);
    }

    #[test]
    fn flip_is_involution_at_unit_distance() {
        let a = SpinConfiguration::all_plus(9);
        let flipped = a.flip(0);
        assert_eq!(flipped.spin(0), -1);
        for j in 1..9 {
            assert_eq!(flipped.spin(j), 1);
        }
        for t in 0..100u64 {
            let w = (crate::rng::raw(3, t) & 0x1FF) as u32;
            let j = (crate::rng::raw(4, t) % 9) as usize;
            let a = SpinConfiguration::new(w, 9);
            assert_eq!(a.flip(j).flip(j), a);
            assert_eq!(a.hamming_distance(a.flip(j)), 1);
        }
    }

    #[test]
    #[should_panic(expected = "different cubes")]
    fn distance_rejects_mismatched_n() {
        let a = SpinConfiguration::all_plus(4);
        let b = SpinConfiguration::all_plus(5);
        let _ = a.hamming_distance(b);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn flip_rejects_out_of_range_index() {
        let _ = SpinConfiguration::all_plus(4).flip(4);
    }

    #[test]
    fn ball_cardinalities() {
        let c = SpinConfiguration::new(0b1010101010 & 0x3FF, 10);
        assert_eq!(ball(c, 0).members(), vec![c.bits()]);
        assert_eq!(ball(c, 10).cardinality(), 1 << 10);
        // 1 + C(10,1) + C(10,2) = 1 + 10 + 45.
        assert_eq!(ball(c, 2).cardinality(), 56);
    }

    #[test]
    fn ball_cardinality_matches_binomial_sum_exhaustively() {
        for n in 1..=12usize {
            let c = SpinConfiguration::new(
                (crate::rng::raw(5, n as u64) & ((1 << n) - 1)) as u32,
                n,
            );
            for radius in 0..=n {
                let expected: f64 = (0..=radius).map(|k| binomial(n, k)).sum();
                assert_eq!(ball(c, radius).cardinality() as f64, expected);
            }
        }
    }

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.1) - 0.325083).abs() < 1e-6);
        for i in 1..50 {
            let r = i as f64 / 50.0;
            assert!((binary_entropy(r) - binary_entropy(1.0 - r)).abs() < 1e-15);
            assert!(binary_entropy(r) <= std::f64::consts::LN_2 + 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "outside [0,1]")]
    fn entropy_rejects_out_of_range() {
        let _ = binary_entropy(1.5);
    }

    #[test]
    fn volume_bound_dominates_exact_count() {
        // Exhaustive check of the entropy bound for all n <= 16, k <= n/2.
        for n in 1..=16usize {
            let c = SpinConfiguration::all_minus(n);
            for k in 0..=n / 2 {
                let exact: f64 = (0..=k).map(|j| binomial(n, j)).sum();
                let bound = ball_volume_bound(n, k as f64 / n as f64);
                assert!(
                    bound >= exact - 1e-9,
                    "n={n} k={k}: bound {bound} < count {exact}"
                );
                if n <= 12 {
                    assert_eq!(ball(c, k).cardinality() as f64, exact);
                }
            }
        }
        assert!((ball_volume_bound(10, 0.0) - 1.0).abs() < 1e-12);
        let b = ball_volume_bound(10, 0.2);
        assert!(b > 148.0 && b < 150.0 && b >= 56.0);
        assert!((ball_volume_bound(10, 0.5) - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn mask_roundtrip_and_complement() {
        for n in [3usize, 6, 10] {
            let mut mask = SubsetMask::empty(n);
            assert!(mask.is_empty());
            let members: Vec<u32> = (0..1u32 << n).filter(|w| w % 3 == 0).collect();
            for &w in &members {
                mask.insert(w);
            }
            assert_eq!(mask.members(), members);
            assert_eq!(mask.cardinality(), members.len());
            let co = mask.complement();
            assert_eq!(co.cardinality(), (1 << n) - members.len());
            assert_eq!(co.complement(), mask);
            for w in 0..1u32 << n {
                assert_ne!(mask.contains(w), co.contains(w));
            }
        }
    }
}
