//! Synchronous multi-vehicle simulation: sensing, per-vehicle decisions
//! against a shared start-of-step snapshot, simultaneous state advance, goal
//! bookkeeping and run classification.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::behaviors::{self, BehaviorParams, NeighborObservation};
use crate::context::{merge_and_select, ActionGrid, MergeParams};
use crate::controller::{needs_replan, steering_command, tracking_errors, ControllerParams};
use crate::dubins::{DubinsPath, PathSample};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Pose, TorusWorld, Vec2};
use crate::metrics::{HavRecord, RunRecord};
use crate::model::{Action, HavConfig, HavState, DEFAULT_DT};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub speed_resolution: usize,
    pub steer_resolution: usize,
    pub merge: MergeParams,
    pub behavior: BehaviorParams,
    pub controller: ControllerParams,
    pub goal_position_tolerance: f64,
    pub goal_heading_tolerance: f64,
    pub path_sample_step: f64,
    pub max_steps: u64,
    /// Re-check the interpolated action against jackknife and collision
    /// dangers before executing it, falling back to the next best candidate.
    pub validate_actions: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            speed_resolution: 5,
            steer_resolution: 5,
            merge: MergeParams::default(),
            behavior: BehaviorParams::default(),
            controller: ControllerParams::default(),
            goal_position_tolerance: 0.8,
            goal_heading_tolerance: 0.2,
            path_sample_step: 0.1,
            max_steps: 20_000,
            validate_actions: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1");
        }
        if !(self.path_sample_step > 0.0) {
            return bad("path_sample_step must be positive");
        }
        if !(self.merge.danger_threshold > 0.0) {
            return bad("danger_threshold must be positive");
        }
        let m = &self.merge;
        if !(self.behavior.evade_weight >= 0.0 && m.goal_weight >= 0.0 && m.straightening_weight >= 0.0 && m.progress_weight >= 0.0) {
            return bad("interest weights must be non-negative");
        }
        if !(self.controller.lookahead_factor > 0.0) {
            return bad("lookahead_factor must be positive");
        }
        if !(self.goal_position_tolerance >= 0.0 && self.goal_heading_tolerance >= 0.0) {
            return bad("goal tolerances must be non-negative");
        }
        ActionGrid::new(self.speed_resolution, self.steer_resolution, 0.0, 1.0, 1.0)?;
        Ok(())
    }

    /// Short stable digest of the full parameter set.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("parameters serialize");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    /// Parses a (possibly partial) parameter table; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: SimParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Success,
    Deadlock,
    Livelock,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Success => "success",
            Classification::Deadlock => "deadlock",
            Classification::Livelock => "livelock",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub classification: Classification,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPath {
    pub path: DubinsPath,
    pub samples: Vec<PathSample>,
    /// Index of the sample nearest at the last decision.
    pub progress: usize,
}

/// One vehicle's knowledge and bookkeeping.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: HavConfig,
    pub grid: ActionGrid,
    /// Wrapped state.
    pub state: HavState,
    /// Truck rear axle without torus wrapping; paths live in this frame.
    pub unwrapped: Vec2,
    pub goals: [Pose; 2],
    /// Index of the current goal.
    pub goal_index: usize,
    /// Arrived at the current goal and waiting.
    pub arrived: bool,
    pub path: Option<TrackedPath>,
    pub standstill: u32,
    pub last_action: Action,
    pub all_blocked: bool,
    /// No action with positive speed was available at the last decision.
    pub moving_blocked: bool,
    pub blocked_fraction: f64,
    pub traveled: f64,
    pub waiting_steps: u64,
    pub planned_lengths: [f64; 2],
    pub replans: u32,
}

impl Agent {
    pub fn done(&self) -> bool {
        self.goal_index == 1 && self.arrived
    }

    fn unwrapped_pose(&self) -> Pose {
        Pose::with_position(self.unwrapped, self.state.truck_heading)
    }
}

/// Result of one vehicle's decision, applied at the commit.
#[derive(Debug, Clone)]
pub struct Decision {
    pub action: Action,
    pub all_blocked: bool,
    pub moving_blocked: bool,
    pub blocked_fraction: f64,
    pub new_path: Option<TrackedPath>,
    /// Nearest sample index on the path in use after this decision.
    pub progress: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    world: TorusWorld,
    agents: Vec<Agent>,
    params: SimParams,
    comm_radius: f64,
    t: u64,
    seed: u64,
    density: f64,
    outcome: Option<Outcome>,
    progress_saturation: u32,
}

fn plan(world: &TorusWorld, agent: &Agent, goal: Pose, params: &SimParams) -> TrackedPath {
    let start = agent.unwrapped_pose();
    let offset = world.rel_vector(agent.state.position, goal.position());
    let target = Pose::with_position(agent.unwrapped + offset, goal.heading);
    let path = DubinsPath::plan(start, target, agent.config.min_turning_radius());
    let samples = path.sample(params.path_sample_step);
    TrackedPath { path, samples, progress: 0 }
}

impl Simulation {
    pub fn new(scenario: &Scenario, params: SimParams) -> Result<Self> {
        params.validate()?;
        scenario.validate()?;
        let world = scenario.world();
        let mut agents = Vec::with_capacity(scenario.havs.len());
        for v in &scenario.havs {
            let grid = ActionGrid::for_vehicle(&v.config, params.speed_resolution, params.steer_resolution)?;
            let start = world.wrap_pose(v.start);
            let state = HavState::aligned(start, v.config.trailer_count());
            let mut agent = Agent {
                config: v.config.clone(),
                grid,
                unwrapped: state.position,
                state,
                goals: v.goals,
                goal_index: 0,
                arrived: false,
                path: None,
                standstill: 0,
                last_action: Action::STOP,
                all_blocked: false,
                moving_blocked: false,
                blocked_fraction: 0.0,
                traveled: 0.0,
                waiting_steps: 0,
                planned_lengths: [0.0; 2],
                replans: 0,
            };
            let p = plan(&world, &agent, agent.goals[0], &params);
            agent.planned_lengths[0] = p.path.length();
            agent.path = Some(p);
            agents.push(agent);
        }
        let max_d = agents.iter().map(|a| a.config.footprint_radius()).fold(0.0, f64::max);
        let comm_radius = 2.0 * max_d + params.behavior.evade_bound;
        let b = &params.behavior;
        let progress_saturation = if b.progress_increment > 0.0 {
            let levels = (1.0 / b.progress_increment).ceil().max(0.0);
            (levels as u64 * b.progress_period.max(1) as u64).min(u32::MAX as u64) as u32
        } else {
            0
        };
        Ok(Self {
            world,
            agents,
            params,
            comm_radius,
            t: 0,
            seed: scenario.seed,
            density: scenario.density,
            outcome: None,
            progress_saturation,
        })
    }

    pub fn world(&self) -> &TorusWorld {
        &self.world
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn comm_radius(&self) -> f64 {
        self.comm_radius
    }

    /// Number of committed steps.
    pub fn time_step(&self) -> u64 {
        self.t
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn sense_neighbors(&self, ego: usize) -> Vec<NeighborObservation> {
        let me = self.agents[ego].state.position;
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != ego)
            .filter_map(|(_, other)| {
                let rel = self.world.rel_vector(me, other.state.position);
                (rel.norm() <= self.comm_radius)
                    .then(|| NeighborObservation { relative_position: rel, footprint_radius: other.config.footprint_radius() })
            })
            .collect()
    }

    fn action_is_safe(&self, agent: &Agent, neighbors: &[NeighborObservation], action: Action) -> bool {
        let p = &self.params;
        let mut next = agent.state.clone();
        next.advance(&agent.config, action, p.dt);
        if next.is_jackknifed() {
            return false;
        }
        let danger = behaviors::collision_danger(&agent.state, &agent.config, &self.world, neighbors, action, p.dt, &p.behavior);
        danger <= p.merge.danger_threshold
    }

    pub fn decide(&self, ego: usize) -> Decision {
        let agent = &self.agents[ego];
        let p = &self.params;
        if agent.arrived {
            return Decision {
                action: Action::STOP,
                all_blocked: false,
                moving_blocked: false,
                blocked_fraction: 0.0,
                new_path: None,
                progress: 0,
            };
        }
        let pose = agent.unwrapped_pose();
        let mut new_path = None;
        let mut errors = None;
        if let Some(tp) = &agent.path {
            let e = tracking_errors(pose, &tp.samples, tp.progress, &p.controller, &agent.config);
            if !needs_replan(&e, &p.controller) {
                errors = Some(e);
            }
        }
        let errors = match errors {
            Some(e) => e,
            None => {
                let tp = plan(&self.world, agent, agent.goals[agent.goal_index], p);
                let e = tracking_errors(pose, &tp.samples, 0, &p.controller, &agent.config);
                new_path = Some(tp);
                e
            }
        };
        let command = steering_command(&errors, &agent.config, &p.controller);

        let neighbors = self.sense_neighbors(ego);
        let (cfg, st, grid, b, m) = (&agent.config, &agent.state, &agent.grid, &p.behavior, &p.merge);
        let goal = behaviors::goal_attraction(command, grid, b);
        let jackknife = behaviors::jackknife_prevention(st, cfg, grid, p.dt);
        let straighten = behaviors::straightening_attraction(st, grid);
        let collision = behaviors::collision_prevention(st, cfg, &self.world, &neighbors, grid, p.dt, b);
        let evade = behaviors::evade_attraction(st, cfg, &self.world, &neighbors, grid, p.dt, b);
        let progress = behaviors::progress_attraction(agent.standstill, grid, b);
        let selection = merge_and_select(
            &[(&goal, m.goal_weight), (&straighten, m.straightening_weight), (&evade, b.evade_weight), (&progress, m.progress_weight)],
            &[&jackknife, &collision],
            grid,
            &p.merge,
        )
        .expect("behavior maps share the vehicle grid");

        let mut action = selection.action;
        if p.validate_actions && selection.chosen.is_some() && !self.action_is_safe(agent, &neighbors, action) {
            action = selection
                .ranked_candidates()
                .into_iter()
                .filter(|&i| Some(i) != selection.chosen)
                .map(|i| selection.action_at(i))
                .find(|&a| self.action_is_safe(agent, &neighbors, a))
                .unwrap_or(Action::STOP);
        }
        Decision {
            action,
            all_blocked: selection.all_blocked,
            moving_blocked: selection.moving_blocked(grid),
            blocked_fraction: selection.blocked_fraction,
            new_path,
            progress: errors.nearest,
        }
    }

    fn at_goal(&self, agent: &Agent) -> bool {
        let goal = agent.goals[agent.goal_index];
        self.world.distance(agent.state.position, goal.position()) <= self.params.goal_position_tolerance
            && angle_diff(agent.state.truck_heading, goal.heading).abs() <= self.params.goal_heading_tolerance
    }

    fn check_safety(&self) -> Result<()> {
        for (i, a) in self.agents.iter().enumerate() {
            if a.state.is_jackknifed() {
                return Err(Error::SafetyViolation { step: self.t, detail: format!("vehicle {i} jackknifed: {:?}", a.state) });
            }
        }
        for i in 0..self.agents.len() {
            for j in i + 1..self.agents.len() {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let (ra, rb) = (a.config.footprint_radius(), b.config.footprint_radius());
                if self.world.potential_collision(a.state.position, ra, b.state.position, rb) {
                    let gap = self.world.distance(a.state.position, b.state.position) - ra - rb;
                    return Err(Error::SafetyViolation {
                        step: self.t,
                        detail: format!(
                            "footprints of vehicles {i} and {j} overlap (gap {gap}): {:?} / {:?}",
                            a.state, b.state
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Advances every vehicle by one synchronous step and classifies the run.
    /// Returns the outcome once the run has terminated.
    pub fn step(&mut self) -> Result<Option<Outcome>> {
        if let Some(o) = self.outcome {
            return Ok(Some(o));
        }
        let plans_changed = self.step_world()?;
        self.outcome = self.classify();
        if self.outcome.is_none() && !plans_changed {
            self.detect_frozen();
        }
        Ok(self.outcome)
    }

    /// One synchronous step without classification: every vehicle decides on
    /// the same snapshot, then all states advance together. Returns whether
    /// any path or goal changed.
    pub fn step_world(&mut self) -> Result<bool> {
        let decisions: Vec<Decision> = (0..self.agents.len()).map(|i| self.decide(i)).collect();
        let replanned = self.commit(decisions);
        self.t += 1;
        self.check_safety()?;
        let goal_switch = self.update_goals();
        Ok(replanned || goal_switch)
    }

    /// Applies the decisions; returns whether any path changed.
    fn commit(&mut self, decisions: Vec<Decision>) -> bool {
        let dt = self.params.dt;
        let mut replanned = false;
        for (agent, d) in self.agents.iter_mut().zip(decisions) {
            if agent.arrived {
                agent.waiting_steps += 1;
            }
            if let Some(tp) = d.new_path {
                agent.path = Some(tp);
                agent.replans += 1;
                replanned = true;
            }
            if let Some(tp) = agent.path.as_mut() {
                tp.progress = d.progress;
            }
            let before = agent.state.position;
            agent.state.advance(&agent.config, d.action, dt);
            agent.unwrapped += agent.state.position - before;
            agent.state.position = self.world.wrap(agent.state.position);
            agent.traveled += d.action.speed * dt;
            agent.standstill = if d.action.speed > 0.0 { 0 } else { agent.standstill.saturating_add(1) };
            agent.last_action = d.action;
            agent.all_blocked = d.all_blocked;
            agent.moving_blocked = d.moving_blocked;
            agent.blocked_fraction = d.blocked_fraction;
        }
        replanned
    }

    /// Marks arrivals and assigns the second goal once everyone reached the
    /// first. Returns whether the second goal was assigned.
    fn update_goals(&mut self) -> bool {
        for i in 0..self.agents.len() {
            if !self.agents[i].arrived && self.at_goal(&self.agents[i]) {
                self.agents[i].arrived = true;
            }
        }
        if self.agents.iter().all(|a| a.goal_index == 0 && a.arrived) {
            for i in 0..self.agents.len() {
                let goal = self.agents[i].goals[1];
                let tp = plan(&self.world, &self.agents[i], goal, &self.params);
                let a = &mut self.agents[i];
                a.goal_index = 1;
                a.arrived = false;
                a.planned_lengths[1] = tp.path.length();
                a.path = Some(tp);
            }
            return true;
        }
        false
    }

    pub fn classify(&self) -> Option<Outcome> {
        let step = self.t;
        if self.agents.iter().all(Agent::done) {
            return Some(Outcome { classification: Classification::Success, step });
        }
        let moved = self.agents.iter().any(|a| a.last_action.speed > 0.0);
        if !moved && self.agents.iter().all(|a| a.arrived || a.moving_blocked) {
            return Some(Outcome { classification: Classification::Deadlock, step });
        }
        if self.t > self.params.max_steps {
            return Some(Outcome { classification: Classification::Livelock, step });
        }
        None
    }

    /// A step without motion, replanning or goal change whose progress
    /// interest is already saturated repeats forever: a permanent standstill.
    fn detect_frozen(&mut self) {
        let frozen = self
            .agents
            .iter()
            .all(|a| a.last_action.speed == 0.0 && (a.arrived || a.standstill > self.progress_saturation));
        if frozen {
            self.outcome = Some(Outcome { classification: Classification::Deadlock, step: self.t });
        }
    }

    pub fn run(&mut self) -> Result<Outcome> {
        loop {
            if let Some(o) = self.step()? {
                return Ok(o);
            }
        }
    }

    /// Runs to completion while writing one CSV row per vehicle per step.
    pub fn run_logged<W: Write>(&mut self, log: &mut W) -> Result<Outcome> {
        writeln!(log, "step,hav,x,y,heading,deltas,v,phi,blocked_fraction")?;
        self.write_rows(log)?;
        loop {
            let outcome = self.step()?;
            self.write_rows(log)?;
            if let Some(o) = outcome {
                return Ok(o);
            }
        }
    }

    fn write_rows<W: Write>(&self, log: &mut W) -> Result<()> {
        for (i, a) in self.agents.iter().enumerate() {
            let deltas: Vec<String> = a.state.articulation_angles().map(|d| d.to_string()).collect();
            writeln!(
                log,
                "{},{},{},{},{},{},{},{},{}",
                self.t,
                i,
                a.state.position.x,
                a.state.position.y,
                a.state.truck_heading,
                deltas.join(";"),
                a.last_action.speed,
                a.last_action.steer,
                a.blocked_fraction
            )?;
        }
        Ok(())
    }

    /// Metrics of the run so far.
    pub fn record(&self) -> RunRecord {
        let dt = self.params.dt;
        let elapsed = self.t as f64 * dt;
        RunRecord {
            seed: self.seed,
            hav_count: self.agents.len(),
            density: self.density,
            outcome: self.outcome,
            steps: self.t,
            params_hash: self.params.hash(),
            havs: self
                .agents
                .iter()
                .map(|a| {
                    let waiting = a.waiting_steps as f64 * dt;
                    HavRecord {
                        traveled_distance: a.traveled,
                        moving_time: elapsed - waiting,
                        waiting_time: waiting,
                        planned_lengths: a.planned_lengths,
                        goals_reached: a.goal_index as u8 + a.arrived as u8,
                        arrived: a.arrived,
                    }
                })
                .collect(),
        }
    }
}

/// Runs a scenario to completion and returns its metrics.
pub fn run_scenario(scenario: &Scenario, params: &SimParams) -> Result<RunRecord> {
    let mut sim = Simulation::new(scenario, params.clone())?;
    sim.run()?;
    Ok(sim.record())
}
