//! Canonical structures: the 2-variable XOR aggregation example, the
//! monotonicity-without-over-determination counterexample, pure-noise
//! negatives, and seeded random structures for implication testing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{
    InformationStructure, OutcomeSpace, ReportProfile, SignalChannel, WorldSpace,
};
use crate::rng;

/// XOR scenario: latent bits X and Y, independent uniform; `k` agents
/// observe X and `k` agents observe Y, each with accuracy `p`; the
/// decision target is Z = X ⊕ Y with 0/1 welfare.
///
/// Worlds are ordered (X=0,Y=0), (X=0,Y=1), (X=1,Y=0), (X=1,Y=1).
/// Defaults `p = 2/3`, `k = 3` give the 6-player instance.
pub fn build_xor(p: f64, k: usize) -> Result<InformationStructure> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "XOR accuracy p must be in (0.5, 1], got {p}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("XOR needs k >= 1".into()));
    }
    let worlds = vec!["X0Y0".into(), "X0Y1".into(), "X1Y0".into(), "X1Y1".into()];
    let world_space = WorldSpace::new(worlds, vec![0.25; 4])?;

    let mut channels = Vec::with_capacity(2 * k);
    for agent in 0..2 * k {
        let mut rows = Vec::with_capacity(4);
        for world in 0..4 {
            let bit = if agent < k { world >> 1 } else { world & 1 };
            let row = if bit == 0 { vec![p, 1.0 - p] } else { vec![1.0 - p, p] };
            rows.push(row);
        }
        channels.push(SignalChannel::new(
            agent,
            vec!["0".into(), "1".into()],
            rows,
        )?);
    }

    let mut welfare = vec![vec![0.0; 4], vec![0.0; 4]];
    for world in 0..4usize {
        let z = (world >> 1) ^ (world & 1);
        welfare[z][world] = 1.0;
    }
    let outcome_space = OutcomeSpace::new(vec!["Z0".into(), "Z1".into()], welfare)?;
    InformationStructure::new(world_space, channels, outcome_space)
}

/// The XOR parity of a world index in [`build_xor`]'s ordering.
pub fn xor_world_parity(world: usize) -> usize {
    (world >> 1) ^ (world & 1)
}

/// A profile-indexed forecasting-error table, for conditions stated
/// directly in terms of an error function rather than induced from a
/// posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorTable {
    alphabet_sizes: Vec<usize>,
    /// Lexicographic over profiles, last agent fastest.
    values: Vec<f64>,
}

impl ErrorTable {
    pub fn new(alphabet_sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = alphabet_sizes.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "error table has {} entries, expected {expected}",
                values.len()
            )));
        }
        Ok(Self {
            alphabet_sizes,
            values,
        })
    }

    pub fn value(&self, profile: &ReportProfile) -> f64 {
        let mut idx = 0usize;
        for (sym, size) in profile.symbols.iter().zip(&self.alphabet_sizes) {
            idx = idx * size + sym;
        }
        self.values[idx]
    }
}

/// Two pure-noise agents over a 2-world uniform state.
///
/// The induced forecasting error is constant (uniform posterior, Brier
/// 0.5), so expected error never strictly increases under a misreport:
/// monotonicity holds with all margins zero while over-determination
/// fails. The returned [`ErrorTable`] is the disagreement indicator
/// `ε(r_1, r_2) = 1{r_1 ≠ r_2}`, whose expectation is 0.5 under truthful
/// signals and under every unilateral deterministic misreport.
pub fn build_prop2_counterexample() -> (InformationStructure, ErrorTable) {
    let world_space = WorldSpace::new(vec!["W0".into(), "W1".into()], vec![0.5, 0.5])
        .expect("static structure");
    let channels = (0..2)
        .map(|agent| {
            SignalChannel::new(
                agent,
                vec!["0".into(), "1".into()],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            )
            .expect("static channel")
        })
        .collect();
    let outcome_space = OutcomeSpace::new(
        vec!["W0".into(), "W1".into()],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    )
    .expect("static outcomes");
    let structure = InformationStructure::new(world_space, channels, outcome_space)
        .expect("static structure");

    // profiles (0,0), (0,1), (1,0), (1,1)
    let table = ErrorTable::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).expect("static table");
    (structure, table)
}

/// XOR-style structure where the listed agents are replaced by pure noise
/// (uniform likelihood rows). Handy as an over-determination negative.
pub fn build_xor_with_noise_agents(
    p: f64,
    k: usize,
    noise_agents: &[usize],
) -> Result<InformationStructure> {
    let base = build_xor(p, k)?;
    let mut channels = Vec::with_capacity(base.agent_count());
    for (i, ch) in base.channels().iter().enumerate() {
        if noise_agents.contains(&i) {
            channels.push(SignalChannel::new(
                i,
                ch.alphabet().to_vec(),
                vec![vec![0.5, 0.5]; base.world_count()],
            )?);
        } else {
            channels.push(ch.clone());
        }
    }
    InformationStructure::new(
        base.world_space().clone(),
        channels,
        base.outcome_space().clone(),
    )
}

/// Size caps for random structure generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RandomBounds {
    pub max_worlds: usize,
    pub max_agents: usize,
    pub max_alphabet: usize,
}

impl Default for RandomBounds {
    fn default() -> Self {
        Self {
            max_worlds: 3,
            max_agents: 3,
            max_alphabet: 2,
        }
    }
}

/// Seeded random structure within `bounds`. Probability vectors are drawn
/// from a symmetric Dirichlet(1) with a small floor to keep every profile
/// possible; welfare entries are uniform in [0, 1] over 2 outcomes.
pub fn build_random(bounds: &RandomBounds, seed: u64) -> Result<InformationStructure> {
    if bounds.max_worlds < 2 || bounds.max_agents < 1 || bounds.max_alphabet < 2 {
        return Err(Error::InvalidParameter(
            "random bounds require >= 2 worlds, >= 1 agent, >= 2 symbols".into(),
        ));
    }
    let mut rng = rng::stream(seed, "scenarios.random");
    let n_worlds = rng.random_range(2..=bounds.max_worlds);
    let n_agents = rng.random_range(1..=bounds.max_agents);

    let worlds = (0..n_worlds).map(|w| format!("w{w}")).collect();
    let prior = random_simplex(n_worlds, &mut rng);
    let world_space = WorldSpace::new(worlds, prior)?;

    let mut channels = Vec::with_capacity(n_agents);
    for agent in 0..n_agents {
        let alphabet_len = rng.random_range(2..=bounds.max_alphabet);
        let alphabet = (0..alphabet_len).map(|s| format!("s{s}")).collect();
        let rows = (0..n_worlds)
            .map(|_| random_simplex(alphabet_len, &mut rng))
            .collect();
        channels.push(SignalChannel::new(agent, alphabet, rows)?);
    }

    let welfare = (0..2)
        .map(|_| (0..n_worlds).map(|_| rng.random::<f64>()).collect())
        .collect();
    let outcome_space = OutcomeSpace::new(vec!["x0".into(), "x1".into()], welfare)?;
    InformationStructure::new(world_space, channels, outcome_space)
}

fn random_simplex<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    const FLOOR: f64 = 1e-3;
    let mut v: Vec<f64> = (0..len)
        .map(|_| -(rng.random::<f64>().max(f64::MIN_POSITIVE)).ln() + FLOOR)
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    // push any residual onto the largest entry so the sum is exact
    let resid = 1.0 - v.iter().sum::<f64>();
    let argmax = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    v[argmax] += resid;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xor_builder_shape_and_params() {
        let s = build_xor(2.0 / 3.0, 3).unwrap();
        assert_eq!(s.world_count(), 4);
        assert_eq!(s.agent_count(), 6);
        assert_eq!(s.outcome_count(), 2);
        // first k agents observe X, the rest Y
        assert!((s.channel(0).likelihood(3, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.channel(0).likelihood(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.channel(5).likelihood(1, 1) - 2.0 / 3.0).abs() < 1e-12);
        // welfare rewards matching the parity
        assert_eq!(xor_world_parity(0), 0);
        assert_eq!(xor_world_parity(1), 1);
        assert_eq!(xor_world_parity(2), 1);
        assert_eq!(xor_world_parity(3), 0);
        for world in 0..4 {
            let z = xor_world_parity(world);
            assert_eq!(s.outcome_space().welfare(z, world), 1.0);
            assert_eq!(s.outcome_space().welfare(1 - z, world), 0.0);
        }

        assert!(build_xor(0.5, 3).is_err());
        assert!(build_xor(1.1, 3).is_err());
        assert!(build_xor(0.8, 0).is_err());
    }

    #[test]
    fn noiseless_xor_has_point_mass_posteriors() {
        let s = build_xor(1.0, 1).unwrap();
        let post = s
            .posterior_over_worlds(&ReportProfile::new(vec![1, 0]))
            .unwrap();
        assert_eq!(post, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn error_table_indexing_is_lexicographic() {
        let t = ErrorTable::new(vec![2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(t.value(&ReportProfile::new(vec![0, 2])), 2.0);
        assert_eq!(t.value(&ReportProfile::new(vec![1, 0])), 3.0);
        assert!(ErrorTable::new(vec![2, 2], vec![0.0]).is_err());
    }

    #[test]
    fn counterexample_table_expectation_is_half_under_all_strategies() {
        let (s, table) = build_prop2_counterexample();
        assert_eq!(s.agent_count(), 2);
        // both signals are pure noise
        for agent in 0..2 {
            for world in 0..s.world_count() {
                assert_eq!(s.channel(agent).likelihood(world, 0), 0.5);
            }
        }
        let expect = |dev: &crate::mechanism::DeviationMap| -> f64 {
            let mut total = 0.0;
            for (signals, p) in s.enumerate_profiles(1 << 10).unwrap() {
                total += p * table.value(&dev.apply(&signals));
            }
            total
        };
        for agent in 0..2 {
            for dev in crate::mechanism::DeviationMap::all_for_agent(agent, 2) {
                assert!((expect(&dev) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_builder_is_seed_deterministic() {
        let bounds = RandomBounds::default();
        let json = |seed| {
            serde_json::to_string(&crate::info::ScenarioJson::from_structure(
                &build_random(&bounds, seed).unwrap(),
            ))
            .unwrap()
        };
        assert_eq!(json(42), json(42));
        assert_ne!(json(42), json(43));
    }

    proptest! {
        #[test]
        fn random_structures_are_valid(seed in 0u64..512) {
            let s = build_random(&RandomBounds::default(), seed).unwrap();
            prop_assert!(s.world_count() >= 2);
            prop_assert!(s.agent_count() >= 1);
            // every profile admits a posterior (likelihood floor keeps
            // all marginals positive)
            for (profile, p) in s.enumerate_profiles(1 << 16).unwrap() {
                prop_assert!(p > 0.0);
                let post = s.posterior_over_worlds(&profile).unwrap();
                let sum: f64 = post.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}
