//! Prints oracle path length, search cost and random-walk success for a map.
//!
//! `cargo run --release --example map_stats -- [map.json] [episodes]`

use std::sync::Arc;
use std::time::Instant;

use hfnav::env::{Action, NavEnv, TaskMode, Terminal, WorldMap};
use hfnav::planner::Planner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hfnav::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let map = match args.get(1) {
        Some(p) => WorldMap::load(p.as_ref())?,
        None => WorldMap::benchmark(),
    };
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let map = Arc::new(map);
    let planner = Planner::new(Arc::clone(&map));

    let t = Instant::now();
    let start = map.start_pose();
    let plan = planner.plan(&start)?;
    println!("start steps {} optimal {:?} in {:?} ({:?})", plan.steps, plan.optimal_actions, t.elapsed(), planner.stats());

    let mut env = NavEnv::new(Arc::clone(&map), TaskMode::Sssg);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    env.reset(&mut rng);
    let mut path = Vec::new();
    loop {
        let a = planner.plan(&env.pose())?.optimal_actions.iter().next().unwrap();
        path.push(a);
        let r = env.step(a)?;
        if r.terminal.is_terminal() {
            println!("oracle rollout: {:?} after {} steps", r.terminal, r.step);
            break;
        }
    }
    println!("path {:?}", path.iter().map(|a| a.index()).collect::<Vec<_>>());

    let t = Instant::now();
    let mut vssg = NavEnv::new(Arc::clone(&map), TaskMode::Vssg);
    let mut lens = Vec::new();
    for _ in 0..50 {
        vssg.reset(&mut rng);
        lens.push(planner.plan(&vssg.pose())?.steps);
    }
    lens.sort();
    println!("vssg oracle steps {:?}.. in {:?} per query", (lens[0], lens[49]), t.elapsed() / 50);

    let t = Instant::now();
    let mut count = [0usize; 4];
    let mut total_steps = 0;
    for _ in 0..episodes {
        env.reset(&mut rng);
        loop {
            let a = Action::ALL[rng.gen_range(0..3)];
            let r = env.step(a)?;
            if r.terminal.is_terminal() {
                total_steps += r.step;
                count[match r.terminal {
                    Terminal::Goal => 0,
                    Terminal::Collision => 1,
                    Terminal::Timeout => 2,
                    Terminal::None => 3,
                }] += 1;
                break;
            }
        }
    }
    println!(
        "random: goal {} collision {} timeout {} of {episodes}; mean len {:.1}; {:?}",
        count[0],
        count[1],
        count[2],
        total_steps as f64 / episodes as f64,
        t.elapsed()
    );
    Ok(())
}
