use std::time::Instant;

use crowdnav::astg::{init_params, AstgConfig};
use crowdnav::eval::{run_eval, summarize, RobotPolicy};
use crowdnav::orca::OrcaParams;
use crowdnav::rng::RngSet;
use crowdnav::sim::{EpisodeConfig, ScenarioKind, ScenarioSpec};
use crowdnav::trainer::{il_pretrain, rl_train, TrainConfig, TrainContext};

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("seed"))
        .collect();
    let scenario = ScenarioSpec {
        kind: ScenarioKind::CircleCrossing,
        n_dynamic: 2,
        n_static: 0,
        ..ScenarioSpec::default()
    };
    let episode = EpisodeConfig::default();
    let orca = OrcaParams::default();
    let net = AstgConfig {
        history_len: 4,
        ..AstgConfig::default()
    };
    let train = TrainConfig {
        il_episodes: 100,
        rl_episodes: 200,
        ..TrainConfig::default()
    };

    for seed in seeds {
        let start = Instant::now();
        let ctx = TrainContext {
            scenario: &scenario,
            episode: &episode,
            orca: &orca,
            net: &net,
            train: &train,
        };
        let mut rngs = RngSet::from_seed(seed);
        let mut params = init_params(&net, &mut rngs.init);
        il_pretrain(&ctx, &mut params, &mut rngs).unwrap();
        rl_train(&ctx, &mut params, &mut rngs, None).unwrap();
        let policy = RobotPolicy::Value {
            net: &net,
            params: &params,
            gamma: train.gamma,
        };
        let records = run_eval(&policy, &scenario, &episode, &orca, 100, 10_000, 0).unwrap();
        let s = summarize(&records, &episode).unwrap();
        println!(
            "seed {seed}: after RL {:.2} (collisions {:.2}, timeouts {:.2}), {:?}",
            s.success_rate,
            s.collision_rate,
            s.timeout_rate,
            start.elapsed()
        );
    }
}
