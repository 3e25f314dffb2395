//! The rules engine.
//!
//! A session owns one stage, one player and four ghosts. It only changes
//! through [`SessionState::apply_fix`] and [`SessionState::tick`], and every
//! observable change is appended to an ordered event log. All times are
//! game-time seconds supplied by the caller; nothing here reads a wall
//! clock.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_space::{CookieId, GameSpace};
use crate::geodesy::{self, GeoPoint, Meters};
use crate::ghost_ai::{
    self, AiError, Ghost, GhostId, GhostKind, PlayerState, ReplanReason, RoamerColor,
};
use crate::osm::{EdgeId, NodeId, PoiCategory, PoiId};
use crate::pathfinding::{self, PathError};
use crate::wire;

/// Points added per cookie.
pub const COOKIE_SCORE: u32 = 10;

/// Tick instants are rounded to this many per second so that `k * dt`
/// does not drift.
const CLOCK_RESOLUTION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("start position {0} is outside the game space")]
    OutsideGameSpace(GeoPoint),
    #[error("fix at t={time} is older than the clock ({clock})")]
    StaleFix { time: f64, clock: f64 },
    #[error("fix at t={time} lies beyond the next tick at {next_tick}")]
    FixAhead { time: f64, next_tick: f64 },
    #[error("session already ended ({0:?})")]
    Finished(Phase),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Ai(#[from] AiError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub tick_seconds: f64,
    pub catch_radius: Meters,
    pub cookie_radius: Meters,
    pub poi_radius: Meters,
    pub initial_lives: u32,
    pub max_lives: u32,
    pub trap_duration: f64,
    /// Meters per second, shared by all ghosts.
    pub ghost_speed: f64,
    pub seed: u64,
    /// Grace period after a catch.
    pub invulnerability_seconds: f64,
    /// Fixes farther than radius plus this from the center are rejected.
    pub fix_tolerance: Meters,
    /// Whether roamers catch the player too, or only the chaser.
    pub roamers_catch: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            tick_seconds: 0.2,
            catch_radius: Meters(8.0),
            cookie_radius: Meters(6.0),
            poi_radius: Meters(10.0),
            initial_lives: 3,
            max_lives: 5,
            trap_duration: 15.0,
            ghost_speed: 1.6,
            seed: 0,
            invulnerability_seconds: 3.0,
            fix_tolerance: Meters(50.0),
            roamers_catch: true,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::InvalidConfig(m.to_owned()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tick_seconds) {
            return bad("tick_seconds must be positive");
        }
        if !positive(self.catch_radius.get())
            || !positive(self.cookie_radius.get())
            || !positive(self.poi_radius.get())
        {
            return bad("radii must be positive");
        }
        if self.initial_lives == 0 || self.initial_lives > self.max_lives {
            return bad("need 0 < initial_lives <= max_lives");
        }
        if !(self.trap_duration.is_finite() && self.trap_duration >= 0.0) {
            return bad("trap_duration must be non-negative");
        }
        if !(self.ghost_speed.is_finite() && self.ghost_speed >= 0.0) {
            return bad("ghost_speed must be non-negative");
        }
        if !(self.invulnerability_seconds.is_finite() && self.invulnerability_seconds >= 0.0) {
            return bad("invulnerability_seconds must be non-negative");
        }
        if !(self.fix_tolerance.get().is_finite() && self.fix_tolerance.get() >= 0.0) {
            return bad("fix_tolerance must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Running,
    Won,
    Lost,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        self != Phase::Running
    }
}

/// One log line: `{"seq":…,"t":…,"kind":…, payload}` in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameEvent {
    pub seq: u64,
    #[serde(serialize_with = "wire::m3")]
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    FixApplied {
        #[serde(serialize_with = "wire::deg7")]
        lat: f64,
        #[serde(serialize_with = "wire::deg7")]
        lon: f64,
        edge: EdgeId,
        #[serde(serialize_with = "wire::m3")]
        offset: f64,
        heading: NodeId,
    },
    FixRejected {
        #[serde(serialize_with = "wire::deg7")]
        lat: f64,
        #[serde(serialize_with = "wire::deg7")]
        lon: f64,
        /// Distance from the stage center.
        #[serde(serialize_with = "wire::m3")]
        distance: f64,
    },
    CookieCollected {
        cookie: CookieId,
        score: u32,
    },
    /// `granted` is false when lives were already at the maximum.
    LifeGained {
        poi: PoiId,
        lives: u32,
        granted: bool,
    },
    TrapEntered {
        poi: PoiId,
        #[serde(serialize_with = "wire::m3")]
        until: f64,
    },
    TrapExpired,
    /// A new chaser route.
    Replanned {
        ghost: GhostId,
        reason: ReplanReason,
        goal: NodeId,
        #[serde(serialize_with = "wire::m3")]
        length: f64,
    },
    /// A new roamer route.
    RouteAssigned {
        ghost: GhostId,
        goal: NodeId,
        #[serde(serialize_with = "wire::m3")]
        length: f64,
    },
    Caught {
        ghost: GhostId,
        #[serde(serialize_with = "wire::m3")]
        distance: f64,
    },
    LifeLost {
        lives: u32,
    },
    Won {
        score: u32,
    },
    Lost {
        score: u32,
    },
}

impl GameEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

/// Writes one JSON object per line.
pub fn write_event_log<W: Write>(events: &[GameEvent], mut out: W) -> io::Result<()> {
    for event in events {
        writeln!(out, "{}", event.to_json_line())?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SessionState {
    pub space: GameSpace,
    pub config: SessionConfig,
    pub player: PlayerState,
    /// Chaser first, then the purple, orange and blue roamers.
    pub ghosts: Vec<Ghost>,
    pub clock: f64,
    pub ticks: u64,
    pub phase: Phase,
    pub invulnerable_until: Option<f64>,
    rng: ChaCha8Rng,
    events: Vec<GameEvent>,
    /// Time of the fix being applied, if any.
    pending_time: Option<f64>,
}

/// Nodes ordered from farthest to nearest by path distance from `from`,
/// ties broken by node id.
pub fn spawn_order(space: &GameSpace, from: NodeId) -> Result<Vec<NodeId>, PathError> {
    let mut dist = pathfinding::distances_from(&space.graph, from)?;
    dist.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(dist.into_iter().map(|(n, _)| n).collect())
}

pub fn create_session(
    space: GameSpace,
    config: SessionConfig,
    player_start: GeoPoint,
) -> Result<SessionState, SessionError> {
    config.validate()?;
    if !space.contains(player_start) {
        return Err(SessionError::OutsideGameSpace(player_start));
    }
    let edge_match = pathfinding::match_to_edge(&space.graph, player_start)?;
    let heading_node = ghost_ai::infer_heading(&space.graph, None, &edge_match);
    let player = PlayerState {
        position: player_start,
        edge_match,
        heading_node,
        lives: config.initial_lives,
        score: 0,
        trapped_until: None,
    };
    let kinds = [
        GhostKind::Chaser,
        GhostKind::Roamer(RoamerColor::Purple),
        GhostKind::Roamer(RoamerColor::Orange),
        GhostKind::Roamer(RoamerColor::Blue),
    ];
    let ghosts = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| Ghost::spawn(GhostId(i as u8), kind, &space.graph, heading_node, config.ghost_speed))
        .collect();
    let mut state = SessionState {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        space,
        config,
        player,
        ghosts,
        clock: 0.0,
        ticks: 0,
        phase: Phase::Running,
        invulnerable_until: None,
        events: Vec::new(),
        pending_time: None,
    };
    state.respawn_ghosts()?;
    Ok(state)
}

impl SessionState {
    pub fn events(&self) -> &[GameEvent] {
        &self.events
    }

    /// Game time of the next tick.
    pub fn next_tick_time(&self) -> f64 {
        tick_time(self.ticks + 1, self.config.tick_seconds)
    }

    fn emit(&mut self, t: f64, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(GameEvent { seq, t, kind });
    }

    /// Puts every ghost on the farthest-node spawn points and gives each a
    /// fresh route.
    fn respawn_ghosts(&mut self) -> Result<(), SessionError> {
        let order = spawn_order(&self.space, self.player.heading_node)?;
        for i in 0..self.ghosts.len() {
            let node = order[i % order.len()];
            let g = &self.ghosts[i];
            self.ghosts[i] = Ghost::spawn(g.id, g.kind, &self.space.graph, node, self.config.ghost_speed);
        }
        for i in 0..self.ghosts.len() {
            if self.ghosts[i].is_chaser() {
                let plan = ghost_ai::chaser_plan(&self.space, &self.ghosts[i], &self.player)?;
                self.start_chaser_route(i, plan, ReplanReason::Spawn);
            } else {
                self.assign_roamer_route(i);
            }
        }
        Ok(())
    }

    fn start_chaser_route(&mut self, i: usize, plan: pathfinding::Path, reason: ReplanReason) {
        let goal = plan.end();
        let length = plan.total_length.get();
        let ghost = self.ghosts[i].id;
        self.ghosts[i].follow(&self.space.graph, plan);
        self.emit(
            self.clock_for_events(),
            EventKind::Replanned {
                ghost,
                reason,
                goal,
                length,
            },
        );
    }

    /// Leaves the roamer idle when no route can be drawn; it retries next tick.
    fn assign_roamer_route(&mut self, i: usize) {
        let route = ghost_ai::roamer_next_route(&mut self.rng, &self.space, &self.ghosts[i]);
        if let Ok(route) = route {
            let goal = route.end();
            let length = route.total_length.get();
            let ghost = self.ghosts[i].id;
            self.ghosts[i].follow(&self.space.graph, route);
            self.ghosts[i].routes_taken += 1;
            self.emit(self.clock_for_events(), EventKind::RouteAssigned { ghost, goal, length });
        }
    }

    /// Time stamp for events raised outside `apply_fix`.
    fn clock_for_events(&self) -> f64 {
        self.pending_time.unwrap_or(self.clock)
    }

    /// Feeds one position fix taken at game time `time`.
    ///
    /// `time` must not be older than the clock nor later than the next
    /// tick. A fix too far outside the stage is logged as rejected and
    /// otherwise ignored.
    pub fn apply_fix(&mut self, fix: GeoPoint, time: f64) -> Result<Vec<GameEvent>, SessionError> {
        if self.phase.is_terminal() {
            return Err(SessionError::Finished(self.phase));
        }
        if time < self.clock {
            return Err(SessionError::StaleFix {
                time,
                clock: self.clock,
            });
        }
        let next_tick = self.next_tick_time();
        if time > next_tick {
            return Err(SessionError::FixAhead { time, next_tick });
        }
        let first = self.events.len();
        self.pending_time = Some(time);
        let result = self.apply_fix_inner(fix, time);
        self.pending_time = None;
        result?;
        Ok(self.events[first..].to_vec())
    }

    fn apply_fix_inner(&mut self, fix: GeoPoint, time: f64) -> Result<(), SessionError> {
        let from_center = geodesy::distance(self.space.center, fix);
        if from_center > self.space.config.radius.get() + self.config.fix_tolerance.get() {
            self.emit(
                time,
                EventKind::FixRejected {
                    lat: fix.lat(),
                    lon: fix.lon(),
                    distance: from_center,
                },
            );
            return Ok(());
        }
        let edge_match = pathfinding::match_to_edge(&self.space.graph, fix)?;
        let heading_node = ghost_ai::infer_heading(&self.space.graph, Some(&self.player), &edge_match);
        let next = PlayerState {
            position: fix,
            edge_match,
            heading_node,
            ..self.player.clone()
        };
        let reason = ghost_ai::replan_reason(&self.player, &next);
        self.player = next;
        self.emit(
            time,
            EventKind::FixApplied {
                lat: fix.lat(),
                lon: fix.lon(),
                edge: self.player.edge_match.edge,
                offset: self.player.edge_match.offset.get(),
                heading: heading_node,
            },
        );

        for i in 0..self.space.cookies.len() {
            let c = &self.space.cookies[i];
            if c.collected || geodesy::distance(c.position, fix) > self.config.cookie_radius.get() {
                continue;
            }
            let cookie = c.id;
            self.space.cookies[i].collected = true;
            self.player.score += COOKIE_SCORE;
            let score = self.player.score;
            self.emit(time, EventKind::CookieCollected { cookie, score });
        }

        for i in 0..self.space.pois.len() {
            let p = &self.space.pois[i];
            if geodesy::distance(p.position, fix) > self.config.poi_radius.get() {
                continue;
            }
            let poi = p.id;
            match p.category {
                PoiCategory::LifeBoost if !p.consumed => {
                    self.space.pois[i].consumed = true;
                    let granted = self.player.lives < self.config.max_lives;
                    if granted {
                        self.player.lives += 1;
                    }
                    let lives = self.player.lives;
                    self.emit(time, EventKind::LifeGained { poi, lives, granted });
                }
                PoiCategory::VisibilityTrap if self.player.trapped_until.is_none() => {
                    let until = time + self.config.trap_duration;
                    self.player.trapped_until = Some(until);
                    self.emit(time, EventKind::TrapEntered { poi, until });
                }
                _ => {}
            }
        }

        if let Some(reason) = reason {
            if let Some(i) = self.ghosts.iter().position(Ghost::is_chaser) {
                if let Ok(plan) = ghost_ai::chaser_plan(&self.space, &self.ghosts[i], &self.player) {
                    self.start_chaser_route(i, plan, reason);
                }
            }
        }

        if self.space.remaining_cookies() == 0 {
            self.phase = Phase::Won;
            let score = self.player.score;
            self.emit(time, EventKind::Won { score });
        }
        Ok(())
    }

    /// Advances the game by one tick of `config.tick_seconds`. Does nothing
    /// once the game has ended.
    pub fn tick(&mut self) -> Vec<GameEvent> {
        if self.phase.is_terminal() {
            return Vec::new();
        }
        let first = self.events.len();
        self.ticks += 1;
        self.clock = tick_time(self.ticks, self.config.tick_seconds);
        let now = self.clock;
        let dt = self.config.tick_seconds;

        if self.player.trapped_until.is_some_and(|until| now >= until) {
            self.player.trapped_until = None;
            self.emit(now, EventKind::TrapExpired);
        }
        if self.invulnerable_until.is_some_and(|until| now >= until) {
            self.invulnerable_until = None;
        }

        for i in 0..self.ghosts.len() {
            ghost_ai::advance_ghost(&mut self.ghosts[i], &self.space.graph, dt, &self.player);
            if !self.ghosts[i].path_exhausted() {
                continue;
            }
            if self.ghosts[i].is_chaser() {
                let plan = ghost_ai::chaser_on_goal_reached(&self.space, &self.ghosts[i], &self.player);
                if let Ok(plan) = plan {
                    self.start_chaser_route(i, plan, ReplanReason::GoalReached);
                }
            } else {
                self.assign_roamer_route(i);
            }
        }

        if self.invulnerable_until.is_none() {
            self.check_catches();
        }
        self.events[first..].to_vec()
    }

    fn check_catches(&mut self) {
        let now = self.clock;
        let catcher = self.ghosts.iter().find(|g| {
            (g.is_chaser() || self.config.roamers_catch)
                && ghost_ai::check_catch(g, &self.player, self.config.catch_radius)
        });
        let Some(ghost) = catcher else {
            return;
        };
        let id = ghost.id;
        let distance = geodesy::distance(ghost.position, self.player.position);
        self.emit(now, EventKind::Caught { ghost: id, distance });
        self.player.lives = self.player.lives.saturating_sub(1);
        let lives = self.player.lives;
        self.emit(now, EventKind::LifeLost { lives });
        if lives == 0 {
            self.phase = Phase::Lost;
            let score = self.player.score;
            self.emit(now, EventKind::Lost { score });
            return;
        }
        self.invulnerable_until = Some(now + self.config.invulnerability_seconds);
        // Spawn planning only fails on a broken graph, which the stage
        // validation rules out.
        let _ = self.respawn_ghosts();
    }
}

fn tick_time(k: u64, dt: f64) -> f64 {
    (k as f64 * dt * CLOCK_RESOLUTION).round() / CLOCK_RESOLUTION
}
