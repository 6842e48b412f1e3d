use crowdnav::orca::{orca_lines_weighted, orca_velocity_weighted, OrcaParams};
use crowdnav::sim::{generate_scenario, human_velocities, EpisodeConfig, ScenarioKind, ScenarioSpec};
use crowdnav::state::WorldAgentState;
use crowdnav::vec2::Vec2;

const ARRIVAL_TOL: f64 = 0.1;
const GRID: usize = 2000;

fn arrival_pref(state: &WorldAgentState, dt: f64) -> Vec2 {
    let to_goal = state.goal - state.position;
    let dist = to_goal.norm();
    if dist < 1e-12 {
        return Vec2::ZERO;
    }
    let speed = ((dist - ARRIVAL_TOL) / dt).max(0.1).min(state.v_pref);
    to_goal / dist * speed
}

fn main() {
    let orca = OrcaParams::default();
    let episode = EpisodeConfig::default();
    let spec = ScenarioSpec {
        kind: ScenarioKind::CircleCrossing,
        n_dynamic: 5,
        n_static: 0,
        seed: 9695,
        ..ScenarioSpec::default()
    };
    let mut humans = generate_scenario(&spec).unwrap().humans;
    for _ in 0..19 {
        let vels = human_velocities(&humans, &orca, episode.dt);
        for (h, &v) in humans.iter_mut().zip(&vels) {
            h.state.position += v * episode.dt;
            h.state.velocity = v;
        }
    }
    let frozen: Vec<bool> = humans
        .iter()
        .map(|h| h.is_static || h.state.distance_to_goal() < ARRIVAL_TOL)
        .collect();
    let snapshot: Vec<(WorldAgentState, f64)> = humans
        .iter()
        .zip(&frozen)
        .map(|(h, &f)| {
            let mut s = h.state;
            if f {
                s.velocity = Vec2::ZERO;
            }
            (s, if f { 1.0 } else { 0.5 })
        })
        .collect();
    println!("frozen mask: {frozen:?}");
    for i in 0..humans.len() {
        if frozen[i] {
            continue;
        }
        let agent = &humans[i].state;
        let neighbors: Vec<(WorldAgentState, f64)> = snapshot
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| *s)
            .collect();
        let lines = orca_lines_weighted(agent, &neighbors, &orca, episode.dt);
        let pref = arrival_pref(agent, episode.dt);
        let lp = orca_velocity_weighted(agent, &neighbors, pref, &orca, episode.dt);
        let lp_viol = lines
            .iter()
            .map(|l| l.violation(lp))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut feasible = 0usize;
        let mut best = f64::INFINITY;
        for gy in 0..GRID {
            for gx in 0..GRID {
                let v = Vec2::new(
                    agent.v_pref * (2.0 * gx as f64 / (GRID - 1) as f64 - 1.0),
                    agent.v_pref * (2.0 * gy as f64 / (GRID - 1) as f64 - 1.0),
                );
                if v.norm_sq() > agent.v_pref * agent.v_pref {
                    continue;
                }
                let worst = lines
                    .iter()
                    .map(|l| l.violation(v))
                    .fold(f64::NEG_INFINITY, f64::max);
                best = best.min(worst);
                if worst <= 0.0 {
                    feasible += 1;
                }
            }
        }
        println!(
            "human {i}: {} lines, grid feasible {feasible}, grid best worst-violation {best:+.6e}, \
             lp worst-violation {lp_viol:+.6e}, lp <= grid best: {}",
            lines.len(),
            lp_viol <= best + 1e-12
        );
    }
}
