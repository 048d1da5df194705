//! Browser demo for sdmlab.
//!
//! Each exported function takes plain values or a JSON string and returns a
//! JSON string, so the page needs no generated TypeScript types. The same
//! functions are callable natively, which is how the tests exercise them.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sdmlab_core::exact::{exact_task_difficulty, normalize_quality_scale, temper_distribution, total_variation};
use sdmlab_core::mc::TaskMdp;
use sdmlab_core::mdp::{grid_action, gridworld, parse_mdp, GridworldConfig, MdpBuilder, PotentialFunction};
use sdmlab_core::policy::{ContextSpec, ExplicitDistribution, KeySpace, PolicyUniverse};
use sdmlab_core::sdm::{run_general_sdm, ScorerSpec, SolverConfig, StopReason, TargetSpec};

/// Policies enumerated at most; larger tasks belong on the command line.
const BROWSER_CAP: u128 = 200_000;

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("demo results serialize")
}

/// Exact difficulty of a single MDP document, used as its own test set.
pub fn difficulty_report(mdp_json: &str) -> Result<Value, String> {
    let mdp = parse_mdp(mdp_json, Path::new("<input>")).map_err(|e| e.to_string())?;
    let set = [mdp];
    let report = exact_task_difficulty(&set, &set, &ContextSpec::empty(), BROWSER_CAP).map_err(|e| e.to_string())?;
    let scale = normalize_quality_scale(&set[0], BROWSER_CAP).map_err(|e| e.to_string())?;
    Ok(json!({
        "states": set[0].num_states(),
        "optimal_quality": scale.value,
        "difficulty": report,
    }))
}

#[derive(Serialize)]
pub struct GridRun {
    pub width: usize,
    pub height: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub target_reached_at: Option<usize>,
    pub greedy_quality: f64,
    pub optimal_quality: f64,
    /// Moves of the greedy policy from the start, as `U`, `R`, `D`, `L`.
    pub path: String,
    pub reached_goal: bool,
}

/// Runs the solver on a seeded gridworld until its greedy policy is within
/// 5% of optimal or the budget runs out.
pub fn solve_grid(width: usize, height: usize, seed: u64, budget: usize) -> Result<GridRun, String> {
    let cfg = GridworldConfig { width, height, seed, ..Default::default() };
    let mdp = gridworld(&cfg).map_err(|e| e.to_string())?;
    let optimal_quality = normalize_quality_scale(&mdp, BROWSER_CAP).map_err(|e| e.to_string())?.value;
    let potential = Some(PotentialFunction::goal_distance(&mdp, 1.0, 1.0));
    let train = vec![TaskMdp { mdp: mdp.clone(), potential }];
    let solver = SolverConfig {
        scorer: ScorerSpec::monte_carlo(5, 4 * width * height),
        budget,
        target: Some(TargetSpec { fraction: 0.95 }),
        record_iterations: false,
        seed,
        ..Default::default()
    };
    let trace = run_general_sdm(&train, &ContextSpec::empty(), &solver).map_err(|e| e.to_string())?;

    let binding = trace.greedy_policy.space().bind(&mdp).map_err(|e| e.to_string())?;
    let (mut s, mut path) = (mdp.initial(), String::new());
    for _ in 0..width * height {
        if s == mdp.goal() {
            break;
        }
        let k = binding.key(s).expect("the greedy walk stays on reachable states");
        let choice = &mdp.choices(s)[trace.greedy_policy.choices()[k]];
        path.push(match choice.action {
            grid_action::UP => 'U',
            grid_action::RIGHT => 'R',
            grid_action::DOWN => 'D',
            grid_action::LEFT => 'L',
            _ => '.',
        });
        s = choice.outcomes[0].next;
    }
    Ok(GridRun {
        width,
        height,
        iterations: trace.iterations,
        stop_reason: trace.stop_reason,
        target_reached_at: trace.target_reached_at,
        greedy_quality: trace.greedy_train_quality,
        optimal_quality,
        path,
        reached_goal: s == mdp.goal(),
    })
}

/// Tempers a distribution given by nonnegative weights over `weights.len()`
/// alternatives and reports entropies and the distance moved.
pub fn temper_report(weights: &[f64], beta: f64) -> Result<Value, String> {
    if weights.len() < 2 {
        return Err("need at least two weights".into());
    }
    // One decision with `m` alternatives stands in for a policy space of size m.
    let m = weights.len();
    let mut b = MdpBuilder::new(2, m);
    for a in 0..m {
        b = b.edge(0, a, 1, 1.0);
    }
    let mdp = b.build().map_err(|e| e.to_string())?;
    let space = KeySpace::build(&[mdp], &ContextSpec::empty()).map_err(|e| e.to_string())?;
    let universe = PolicyUniverse::enumerate(&space, m as u128).map_err(|e| e.to_string())?;
    let base = ExplicitDistribution::from_weights(universe, weights.to_vec()).map_err(|e| e.to_string())?;
    let tempered = temper_distribution(&base, beta).map_err(|e| e.to_string())?;
    Ok(json!({
        "beta": beta,
        "probs": base.probs(),
        "tempered": tempered.probs(),
        "entropy": base.entropy(),
        "tempered_entropy": tempered.entropy(),
        "total_variation": total_variation(&base, &tempered).map_err(|e| e.to_string())?,
    }))
}

#[wasm_bindgen]
pub fn difficulty(mdp_json: &str) -> Result<String, JsError> {
    difficulty_report(mdp_json).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve(width: usize, height: usize, seed: u32, budget: usize) -> Result<String, JsError> {
    solve_grid(width, height, seed as u64, budget).map(|r| to_json(&r)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn temper(weights: Vec<f64>, beta: f64) -> Result<String, JsError> {
    temper_report(&weights, beta).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
}
