//! Geometric machinery behind the restricted-norm control: deep-hole
//! sets, 1-step augmentation, maximal r-connected components, last-exit
//! path extraction, path-sum variances and the `(r_p, L_p, c_p)`
//! parameter schedule.

use rayon::prelude::*;

use crate::disorder::{covariance_exact, DisorderRealization, DisorderVariant};
use crate::hypercube::{binary_entropy, SpinConfiguration, SubsetMask};
use crate::operators;
use crate::pressure::beta_critical;
use crate::{Error, Result};

/// Sites of extreme negative deviation, `L_ε = {σ : U(σ) < -εN}`.
#[derive(Clone, Debug)]
pub struct DeepHoleSet {
    mask: SubsetMask,
    epsilon: f64,
    n: usize,
    variant: DisorderVariant,
    seed: u64,
}

impl DeepHoleSet {
    pub fn mask(&self) -> &SubsetMask {
        &self.mask
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> DisorderVariant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cardinality(&self) -> usize {
        self.mask.cardinality()
    }

    /// The 1-step augmented region `L_ε^+`.
    pub fn augmented(&self) -> SubsetMask {
        augment(&self.mask)
    }
}

/// Exact table scan with strict inequality `U(σ) < -εN`.
pub fn deep_holes(real: &DisorderRealization, epsilon: f64) -> DeepHoleSet {
    assert!(epsilon > 0.0, "deviation density must be positive");
    let n = real.n();
    let threshold = -epsilon * n as f64;
    let mut mask = SubsetMask::empty(n);
    for (w, &u) in real.energies().iter().enumerate() {
        if u < threshold {
            mask.insert(w as u32);
        }
    }
    DeepHoleSet {
        mask,
        epsilon,
        n,
        variant: real.variant(),
        seed: real.seed(),
    }
}

/// Union of closed radius-1 balls around the members: `{σ : dist(σ, A) <= 1}`.
pub fn augment(mask: &SubsetMask) -> SubsetMask {
    let n = mask.n();
    let mut out = mask.clone();
    for w in mask.iter() {
        for j in 0..n {
            out.insert(w ^ (1 << j));
        }
    }
    out
}

/// Maximal r-connected components of a region, with exact Hamming
/// diameters.
#[derive(Clone, Debug)]
pub struct ClusterDecomposition {
    n: usize,
    r: f64,
    components: Vec<Vec<u32>>,
    diameters: Vec<usize>,
    degenerate_scale: bool,
}

impl ClusterDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Member words of each component, sorted ascending.
    pub fn components(&self) -> &[Vec<u32>] {
        &self.components
    }

    pub fn diameters(&self) -> &[usize] {
        &self.diameters
    }

    pub fn max_diameter(&self) -> Option<usize> {
        self.diameters.iter().copied().max()
    }

    pub fn max_component_size(&self) -> usize {
        self.components.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn component_mask(&self, index: usize) -> SubsetMask {
        SubsetMask::from_members(self.n, self.components[index].iter().copied())
    }

    /// True when `Nr/2 <= 1`, where every member is isolated by the
    /// strict step inequality.
    pub fn degenerate_scale(&self) -> bool {
        self.degenerate_scale
    }
}

/// Splits `region` into maximal r-connected components (edges where
/// `dist < Nr/2`), via union-find over the member list.
pub fn connected_components(region: &SubsetMask, r: f64) -> ClusterDecomposition {
    assert!(r > 0.0 && r < 1.0, "connectivity scale must be in (0,1)");
    let n = region.n();
    let members = region.members();
    let threshold = n as f64 * r / 2.0;
    let mut uf = UnionFind::new(members.len());
    for i in 0..members.len() {
        for j in (i + 1)..members.len() {
            let d = (members[i] ^ members[j]).count_ones() as f64;
            if d < threshold {
                uf.union(i, j);
            }
        }
    }
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); members.len()];
    for (i, &w) in members.iter().enumerate() {
        buckets[uf.find(i)].push(w);
    }
    let components: Vec<Vec<u32>> = buckets.into_iter().filter(|b| !b.is_empty()).collect();
    let diameters = components
        .iter()
        .map(|c| {
            let mut d = 0usize;
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    d = d.max((c[i] ^ c[j]).count_ones() as usize);
                }
            }
            d
        })
        .collect();
    ClusterDecomposition {
        n,
        r,
        components,
        diameters,
        degenerate_scale: threshold <= 1.0,
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            self.parent[root] = self.parent[self.parent[root]];
            root = self.parent[root];
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Extracts a strongly self-avoiding path of at least `l` sites from an
/// r-connected set of deep-hole members, by fine-chain construction and
/// iterated last exit.
///
/// Returns `Ok(None)` when the diameter hypothesis `diam > NrL` fails.
/// The returned sites satisfy (i) consecutive distances in `[Nr/2, Nr]`
/// and (ii) `σ^j` outside every open ball `B_{Nr/2}(σ^k)`, `k < j`
/// (see [`verify_path_properties`]).
pub fn last_exit_path(
    n: usize,
    members: &[u32],
    r: f64,
    l: usize,
) -> Result<Option<Vec<SpinConfiguration>>> {
    if l < 2 {
        return Err(Error::InvalidParameter("need l >= 2".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter("need 0 < r < 1".into()));
    }
    if members.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let step_bound = n as f64 * r / 2.0;
    let hop_bound = n as f64 * r;

    // Connectivity precondition and diameter in one pair sweep.
    let mut uf = UnionFind::new(sorted.len());
    let mut diam = 0usize;
    let mut extremal = (0usize, 0usize);
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            let d = (sorted[i] ^ sorted[j]).count_ones() as usize;
            if (d as f64) < step_bound {
                uf.union(i, j);
            }
            if d > diam {
                diam = d;
                extremal = (i, j);
            }
        }
    }
    let root = uf.find(0);
    if (1..sorted.len()).any(|i| uf.find(i) != root) {
        return Err(Error::NotRConnected { r });
    }
    if diam as f64 <= n as f64 * r * l as f64 {
        return Ok(None);
    }

    // Fine chain: shortest path from one extremal site to the other in
    // the graph with edges of Hamming length < Nr/2. Steps then lie in
    // [1, Nr/2) and the chain is self-avoiding.
    let (start, goal) = extremal;
    let chain = bfs_path(&sorted, start, goal, step_bound)
        .ok_or(Error::NotRConnected { r })?;

    // Thinning: from the current site, take the *last* chain index still
    // inside the closed radius-Nr ball; it lands in the annulus
    // [Nr/2, Nr] because the next step is shorter than Nr/2.
    let mut path = vec![chain[0]];
    let mut cursor = 0usize;
    while path.len() < l {
        let here = *path.last().unwrap();
        let mut pick: Option<usize> = None;
        for (k, &w) in chain.iter().enumerate().skip(cursor + 1) {
            let d = (w ^ here).count_ones() as f64;
            if d <= hop_bound {
                pick = Some(k);
            }
        }
        let k = pick.ok_or_else(|| {
            Error::InvalidParameter(
                "last-exit construction exhausted the fine chain".into(),
            )
        })?;
        path.push(chain[k]);
        cursor = k;
    }
    let configs: Vec<SpinConfiguration> = path
        .into_iter()
        .map(|w| SpinConfiguration::new(w, n))
        .collect();
    debug_assert!(verify_path_properties(&configs, r).is_ok());
    Ok(Some(configs))
}

fn bfs_path(words: &[u32], start: usize, goal: usize, step_bound: f64) -> Option<Vec<u32>> {
    let mut prev = vec![usize::MAX; words.len()];
    let mut queue = std::collections::VecDeque::new();
    prev[start] = start;
    queue.push_back(start);
    while let Some(i) = queue.pop_front() {
        if i == goal {
            let mut path = vec![words[goal]];
            let mut cur = goal;
            while cur != start {
                cur = prev[cur];
                path.push(words[cur]);
            }
            path.reverse();
            return Some(path);
        }
        for j in 0..words.len() {
            if prev[j] == usize::MAX {
                let d = (words[i] ^ words[j]).count_ones() as f64;
                if d >= 1.0 && d < step_bound {
                    prev[j] = i;
                    queue.push_back(j);
                }
            }
        }
    }
    None
}

/// Independent checker for the two last-exit path properties:
/// (i) consecutive distances in `[Nr/2, Nr]`, and (ii) strong
/// self-avoidance, `dist(σ^j, σ^k) >= Nr/2` for all `k < j`.
pub fn verify_path_properties(
    path: &[SpinConfiguration],
    r: f64,
) -> std::result::Result<(), String> {
    if path.is_empty() {
        return Err("empty path".into());
    }
    let n = path[0].n();
    let lo = n as f64 * r / 2.0;
    let hi = n as f64 * r;
    for (j, pair) in path.windows(2).enumerate() {
        let d = pair[0].hamming_distance(pair[1]) as f64;
        if d < lo || d > hi {
            return Err(format!(
                "step {j}->{}: distance {d} outside [{lo}, {hi}]",
                j + 1
            ));
        }
    }
    for j in 1..path.len() {
        for k in 0..j {
            let d = path[j].hamming_distance(path[k]) as f64;
            if d < lo {
                return Err(format!(
                    "site {j} inside open ball around site {k}: distance {d} < {lo}"
                ));
            }
        }
    }
    Ok(())
}

/// Exact variance of the path sum `S_L = Σ_k U(σ^k)`: the double sum of
/// pairwise covariances at the path's Hamming distances.
pub fn path_sum_variance(
    path: &[SpinConfiguration],
    variant: DisorderVariant,
    n: usize,
) -> f64 {
    assert!(!path.is_empty(), "path must be nonempty");
    assert!(path.iter().all(|c| c.n() == n));
    let mut total = 0.0;
    for a in path {
        for b in path {
            total += covariance_exact(variant, n, a.hamming_distance(*b));
        }
    }
    total
}

/// The proof's variance bound `2 L N [1 + L (1-r)^p]` for paths with
/// pairwise separation at least `Nr/2`.
pub fn path_variance_bound(l: usize, n: usize, r: f64, p: usize) -> f64 {
    2.0 * l as f64 * n as f64 * (1.0 + l as f64 * (1.0 - r).powi(p as i32))
}

/// Parameters `(r_p, δ_p, L_p, c_p)` controlling the cluster-diameter
/// tail at interaction order p and deviation density ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterSchedule {
    pub p: usize,
    pub epsilon: f64,
    pub r: f64,
    pub delta: f64,
    pub l: usize,
    pub c: f64,
}

/// Correlation scale `r_p = ln(4 β_c² / ε) / p`.
pub fn schedule_correlation_scale(p: usize, epsilon: f64) -> f64 {
    (4.0 * beta_critical().powi(2) / epsilon).ln() / p as f64
}

/// Decay factor `δ_p = (1 - r_p)^p <= ε/(4 β_c²)`.
pub fn schedule_decay(p: usize, epsilon: f64) -> f64 {
    (1.0 - schedule_correlation_scale(p, epsilon)).powi(p as i32)
}

/// Builds the schedule at interaction order `p`.
///
/// Inadmissible when `r_p >= 1`, when `γ(r_p) >= ε²/4`, when the
/// bracketing window contains no positive integer, or when no integer in
/// the window makes the tail rate `c_p` positive. The smallest such
/// integer is returned.
pub fn schedule(p: usize, epsilon: f64) -> Result<ParameterSchedule> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be positive".into()));
    }
    let r = schedule_correlation_scale(p, epsilon);
    if r <= 0.0 || r >= 1.0 {
        return Err(Error::ScheduleInadmissible {
            p,
            reason: format!("correlation scale r_p = {r} outside (0,1)"),
        });
    }
    let gamma_r = binary_entropy(r);
    if gamma_r >= epsilon * epsilon / 4.0 {
        return Err(Error::ScheduleInadmissible {
            p,
            reason: format!(
                "entropy γ(r_p) = {gamma_r:.6} not below ε²/4 = {:.6}",
                epsilon * epsilon / 4.0
            ),
        });
    }
    let delta = (1.0 - r).powi(p as i32);
    let sqrt_gamma = gamma_r.sqrt();
    let lower = (epsilon / (4.0 * sqrt_gamma) - 1.0) / delta;
    let upper = (epsilon / (2.0 * sqrt_gamma) - 1.0) / delta;
    let l_min = lower.ceil().max(1.0) as usize;
    let l_max = upper.floor();
    if l_max < l_min as f64 {
        return Err(Error::ScheduleInadmissible {
            p,
            reason: format!("window [{lower:.3}, {upper:.3}] contains no positive integer"),
        });
    }
    let tail_rate = |l: usize| {
        let lf = l as f64;
        lf * (epsilon * epsilon / (4.0 * (1.0 + lf * delta)) - gamma_r) - std::f64::consts::LN_2
    };
    let mut choice = None;
    for l in l_min..=(l_max as usize) {
        if tail_rate(l) > 0.0 {
            choice = Some(l);
            break;
        }
    }
    let Some(l) = choice else {
        return Err(Error::ScheduleInadmissible {
            p,
            reason: format!(
                "no integer in [{l_min}, {l_max}] gives a positive tail rate (best c = {:.6})",
                tail_rate(l_max as usize)
            ),
        });
    };
    Ok(ParameterSchedule {
        p,
        epsilon,
        r,
        delta,
        l,
        c: tail_rate(l),
    })
}

/// Outcome of the restricted-norm bound on one decomposition.
#[derive(Clone, Debug)]
pub struct NormBoundReport {
    /// `‖T_{L_ε^+}‖ = max_C ‖T_C‖` (0 for an empty region).
    pub norm: f64,
    /// `2 N sqrt(rL)`.
    pub bound: f64,
    /// None when a precondition failed and the check was skipped.
    pub holds: Option<bool>,
    pub skipped_reason: Option<String>,
    pub max_diameter: Option<usize>,
}

/// Checks `‖T_{L_ε^+}‖ <= 2 N sqrt(rL)` when the hypotheses hold
/// (`max diam <= NrL`, `0 < rL < 1/2`, `N > 1/(rL)`).
pub fn norm_bound_check(decomp: &ClusterDecomposition, r: f64, l: usize) -> Result<NormBoundReport> {
    let n = decomp.n();
    let rl = r * l as f64;
    let bound = 2.0 * n as f64 * rl.max(0.0).sqrt();
    let max_diameter = decomp.max_diameter();
    let mut skip = None;
    if !(rl > 0.0 && rl < 0.5) {
        skip = Some(format!("rL = {rl} outside (0, 1/2)"));
    } else if (n as f64) <= 1.0 / rl {
        skip = Some(format!("N = {n} not above 1/(rL) = {}", 1.0 / rl));
    } else if let Some(d) = max_diameter {
        if d as f64 > n as f64 * rl {
            skip = Some(format!("max diameter {d} exceeds NrL = {}", n as f64 * rl));
        }
    }
    let norm = decomp
        .components()
        .iter()
        .map(|c| operators::operator_norm_over_members(n, c))
        .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)))?;
    if let Some(reason) = skip {
        return Ok(NormBoundReport {
            norm,
            bound,
            holds: None,
            skipped_reason: Some(reason),
            max_diameter,
        });
    }
    Ok(NormBoundReport {
        norm,
        bound,
        holds: Some(norm <= bound + 1e-9),
        skipped_reason: None,
        max_diameter,
    })
}

/// Scale parameters for the diameter-tail experiment.
#[derive(Clone, Copy, Debug)]
pub enum ScaleChoice {
    /// Take `(r, L)` from [`schedule`] (requires a p-spin variant).
    FromSchedule,
    Explicit { r: f64, l: usize },
}

/// One row of a cluster census.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CensusRow {
    pub seed: u64,
    pub epsilon: f64,
    pub r: f64,
    pub num_components: usize,
    pub max_diameter: usize,
    pub max_component_size: usize,
    pub t_norm: f64,
    pub bound_2n_sqrt_rl: f64,
    pub event_flag: bool,
}

/// Aggregated diameter-tail experiment.
#[derive(Clone, Debug)]
pub struct TailReport {
    pub rows: Vec<CensusRow>,
    /// Empirical frequency of `max diam C > NrL`.
    pub frequency: f64,
    /// `e^{-N c_p(ε)}` when the schedule is admissible.
    pub theoretical_bound: Option<f64>,
    pub r: f64,
    pub l: usize,
    pub schedule: Option<ParameterSchedule>,
}

/// Empirical frequency of the diameter-tail event over disorder seeds
/// `base_seed .. base_seed + num_samples`, with per-sample census rows.
pub fn diameter_tail_experiment(
    variant: DisorderVariant,
    n: usize,
    epsilon: f64,
    num_samples: usize,
    base_seed: u64,
    scale: ScaleChoice,
) -> Result<TailReport> {
    if num_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let (r, l, sched) = match scale {
        ScaleChoice::Explicit { r, l } => {
            if !(r > 0.0 && r < 1.0) || l == 0 {
                return Err(Error::InvalidParameter("need 0 < r < 1 and l >= 1".into()));
            }
            (r, l, None)
        }
        ScaleChoice::FromSchedule => {
            let p = variant.p().ok_or_else(|| {
                Error::InvalidParameter(
                    "schedule-driven census needs a p-spin variant; pass explicit (r, l) for REM"
                        .into(),
                )
            })?;
            let s = schedule(p, epsilon)?;
            (s.r, s.l, Some(s))
        }
    };
    let rows: Vec<CensusRow> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let real = DisorderRealization::sample(variant, n, seed)?;
            let holes = deep_holes(&real, epsilon);
            let augmented = holes.augmented();
            let decomp = connected_components(&augmented, r);
            let t_norm = decomp
                .components()
                .iter()
                .map(|c| operators::operator_norm_over_members(n, c))
                .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)))?;
            let max_diameter = decomp.max_diameter().unwrap_or(0);
            Ok(CensusRow {
                seed,
                epsilon,
                r,
                num_components: decomp.num_components(),
                max_diameter,
                max_component_size: decomp.max_component_size(),
                t_norm,
                bound_2n_sqrt_rl: 2.0 * n as f64 * (r * l as f64).sqrt(),
                event_flag: max_diameter as f64 > n as f64 * r * l as f64,
            })
        })
        .collect::<Result<_>>()?;
    let frequency = rows.iter().filter(|row| row.event_flag).count() as f64 / num_samples as f64;
    let theoretical_bound = sched.map(|s| (-(n as f64) * s.c).exp());
    Ok(TailReport {
        rows,
        frequency,
        theoretical_bound,
        r,
        l,
        schedule: sched,
    })
}
