//! End-to-end learning checks on the desk-scale preset, where the channel
//! is a deterministic function of the tabular state and the exhaustive
//! search is therefore an achievable target.

use vecell_core::action::CatalogMode;
use vecell_core::learning::{dmarl_train, marl_train, sarl_train, TrainParams};
use vecell_core::metrics::average_reward;
use vecell_core::sim::{
    run_test_episodes, test_streams, DmarlPolicy, MarlPolicy, OraclePolicy, Policy, RandomPolicy,
    SarlPolicy, SimEnv,
};

const TEST_EPISODES: usize = 100;

fn evaluate(env: &SimEnv, name: &'static str, policy: &mut dyn Policy, seed: u64) -> f64 {
    let (mut er, mut pr) = test_streams(seed, name);
    let records = run_test_episodes(env, policy, TEST_EPISODES, &mut er, &mut pr).unwrap();
    average_reward(&records)
}

#[test]
fn trained_policies_approach_the_exhaustive_search() {
    let env = SimEnv::preset_tiny().unwrap();
    let catalog = env.build_catalog(CatalogMode::LearnedAssociation, 1 << 20).unwrap();
    let local = env.build_marl_catalog(1 << 20).unwrap();
    let seed = 1;
    let params = TrainParams::new(10_000, seed);

    let (q, _) = sarl_train(&env, &catalog, &params).unwrap();
    let (_, reg, _) = dmarl_train(&env, &catalog, 4, &params).unwrap();
    let (tables, _) = marl_train(&env, &local, &params).unwrap();

    let brute = evaluate(&env, "brute", &mut OraclePolicy { catalog: &catalog }, seed);
    let sarl = evaluate(&env, "sarl", &mut SarlPolicy { catalog: &catalog, q: &q }, seed);
    let dmarl = evaluate(&env, "dmarl", &mut DmarlPolicy { catalog: &catalog, register: &reg }, seed);
    let marl = evaluate(&env, "marl", &mut MarlPolicy { local_catalog: &local, tables: &tables }, seed);
    let random = evaluate(&env, "random", &mut RandomPolicy { catalog: &catalog }, seed);

    assert!(brute > 0.0);
    assert!(sarl >= 0.99 * brute, "sarl {sarl} vs brute {brute}");
    assert!(dmarl >= 0.99 * brute, "dmarl {dmarl} vs brute {brute}");
    // Independent per-AP learners land between random play and the optimum.
    assert!(marl <= brute + 1e-12, "marl {marl} vs brute {brute}");
    assert!(marl >= random, "marl {marl} vs random {random}");
    // Nothing outperforms the per-step exhaustive search.
    for (name, v) in [("sarl", sarl), ("dmarl", dmarl)] {
        assert!(v <= brute + 1e-12, "{name} {v} exceeds brute {brute}");
    }
}

#[test]
fn training_returns_trend_upward() {
    let env = SimEnv::preset_tiny().unwrap();
    let catalog = env.build_catalog(CatalogMode::LearnedAssociation, 1 << 20).unwrap();
    let (_, report) = sarl_train(&env, &catalog, &TrainParams::new(4000, 5)).unwrap();
    // Compare mean return over the first and last quarters of training.
    let n = report.returns.len();
    let head: f64 = report.returns[..n / 4].iter().sum::<f64>() / (n / 4) as f64;
    let tail: f64 = report.returns[3 * n / 4..].iter().sum::<f64>() / (n - 3 * n / 4) as f64;
    assert!(tail > head, "no improvement: head {head}, tail {tail}");
}
