use crowdnav::sim::{generate_scenario, ScenarioKind, ScenarioSpec};
use crowdnav::Vec2;

fn main() {
    let robot_goal = Vec2::new(0.0, 4.0);
    let mut near = [0usize; 4];
    for i in 0..100u64 {
        let spec = ScenarioSpec {
            kind: ScenarioKind::CircleCrossing,
            n_dynamic: 2,
            n_static: 0,
            seed: 10_000 + i,
            ..ScenarioSpec::default()
        };
        let snap = generate_scenario(&spec).unwrap();
        let d_min = snap
            .humans
            .iter()
            .map(|h| (h.state.goal - robot_goal).norm())
            .fold(f64::INFINITY, f64::min);
        for (k, thresh) in [0.7, 1.0, 1.5, 2.0].iter().enumerate() {
            if d_min < *thresh {
                near[k] += 1;
            }
        }
    }
    println!(
        "held-out cases with a human goal within 0.7/1.0/1.5/2.0 m of robot goal: {}/{}/{}/{}",
        near[0], near[1], near[2], near[3]
    );
}
