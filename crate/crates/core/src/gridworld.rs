//! Fully observed world, deterministic dynamics, local observations and
//! reachability metrics.
//!
//! Coordinates are row-major with row 0 at the top. Movement is 4-connected;
//! a move into a wall or off the map leaves the agent in place but still
//! consumes a step.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default field-of-view radius (5x5 window).
pub const DEFAULT_FOV_RADIUS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("malformed map (line {line}): {message}")]
    Malformed { line: usize, message: String },
    #[error("goal at {goal} is not reachable from start at {start}")]
    UnreachableGoal { start: Position, goal: Position },
}

impl MapError {
    fn malformed(line: usize, message: impl Into<String>) -> Self {
        MapError::Malformed {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Wall,
    Floor,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// Neighbor in `action`'s direction, or `None` when it would leave the
    /// non-negative quadrant. Upper bounds are the caller's concern.
    pub fn offset(self, action: Action) -> Option<Position> {
        let (dr, dc) = action.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        Some(Position { row, col })
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Movement action. The derived ordering `Up < Down < Left < Right` is the
/// canonical tie-break order used throughout the engine.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown action token `{0}`")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    /// Case-insensitive; accepts the four tokens only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UP" => Ok(Action::Up),
            "DOWN" => Ok(Action::Down),
            "LEFT" => Ok(Action::Left),
            "RIGHT" => Ok(Action::Right),
            _ => Err(UnknownAction(s.to_string())),
        }
    }
}

/// A cell as seen by a listener: the goal is only distinguishable from
/// floor once observed, and anything never observed is `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeenCell {
    Wall,
    Floor,
    Unknown,
    Goal,
}

impl SeenCell {
    pub fn is_known(self) -> bool {
        self != SeenCell::Unknown
    }

    /// Floor or goal.
    pub fn is_open(self) -> bool {
        matches!(self, SeenCell::Floor | SeenCell::Goal)
    }

    pub fn glyph(self) -> char {
        match self {
            SeenCell::Wall => '#',
            SeenCell::Floor => '.',
            SeenCell::Unknown => '?',
            SeenCell::Goal => 'G',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub center: Position,
    pub radius: usize,
    /// `(2r+1) x (2r+1)`, indexed `[dr + r][dc + r]`.
    pub window: Vec<Vec<SeenCell>>,
    pub steps_taken: usize,
}

impl Observation {
    /// Absolute map position of window cell `(i, j)`, if it is in the
    /// non-negative quadrant.
    pub fn absolute(&self, i: usize, j: usize) -> Option<Position> {
        let row = (self.center.row + i).checked_sub(self.radius)?;
        let col = (self.center.col + j).checked_sub(self.radius)?;
        Some(Position { row, col })
    }

    pub fn cells(&self) -> impl Iterator<Item = (Option<Position>, SeenCell)> + '_ {
        self.window.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, &cell)| (self.absolute(i, j), cell))
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.window.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if i == self.radius && j == self.radius {
                    out.push('@');
                } else {
                    out.push(cell.glyph());
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub shortest_path: usize,
    pub brittleness: f64,
    pub openness: f64,
    pub reachable_cells: usize,
}

impl MapMetrics {
    /// Share of reachable cells with no open neighbor. Non-zero only for a
    /// single-cell region.
    pub fn isolated_fraction(&self) -> f64 {
        1.0 - self.brittleness - self.openness
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    pub id: String,
    pub pair_id: Option<String>,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Position,
    goal: Position,
}

impl GridMap {
    /// Builds a map from a row-major cell grid and checks every invariant.
    pub fn new(
        id: impl Into<String>,
        rows: Vec<Vec<Cell>>,
        start: Position,
        goal: Position,
    ) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || width == 0 {
            return Err(MapError::malformed(0, "map has no cells"));
        }
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(MapError::malformed(i + 1, "ragged rows"));
        }
        if width * height < 9 {
            return Err(MapError::malformed(0, "map must have at least 9 cells"));
        }
        let map = GridMap {
            id: id.into(),
            pair_id: None,
            width,
            height,
            cells: rows.into_iter().flatten().collect(),
            start,
            goal,
        };
        for (name, p) in [("start", start), ("goal", goal)] {
            if !map.is_floor(p) {
                return Err(MapError::malformed(0, format!("{name} {p} is not a floor cell")));
            }
        }
        if map.shortest_path_length(start, goal).is_none() {
            return Err(MapError::UnreachableGoal { start, goal });
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Position {
        self.start
    }

    pub fn goal(&self) -> Position {
        self.goal
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn cell(&self, p: Position) -> Option<Cell> {
        self.in_bounds(p).then(|| self.cells[p.row * self.width + p.col])
    }

    pub fn is_floor(&self, p: Position) -> bool {
        self.cell(p) == Some(Cell::Floor)
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| Position { row, col }))
    }

    /// Open neighbors of `p` in canonical action order.
    pub fn open_neighbors(&self, p: Position) -> impl Iterator<Item = (Action, Position)> + '_ {
        Action::ALL.into_iter().filter_map(move |a| {
            let q = p.offset(a)?;
            self.is_floor(q).then_some((a, q))
        })
    }

    /// Deterministic transition. Blocked moves return `pos` unchanged.
    pub fn step(&self, pos: Position, action: Action) -> Position {
        match pos.offset(action) {
            Some(next) if self.is_floor(next) => next,
            _ => pos,
        }
    }

    pub fn observe(&self, pos: Position, radius: usize) -> Observation {
        self.observe_at(pos, radius, 0)
    }

    pub fn observe_at(&self, pos: Position, radius: usize, steps_taken: usize) -> Observation {
        let side = 2 * radius + 1;
        let mut window = vec![vec![SeenCell::Unknown; side]; side];
        for (i, row) in window.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let abs = (pos.row + i)
                    .checked_sub(radius)
                    .zip((pos.col + j).checked_sub(radius))
                    .map(|(row, col)| Position { row, col });
                *slot = match abs.and_then(|p| self.cell(p).map(|c| (p, c))) {
                    None => SeenCell::Unknown,
                    Some((_, Cell::Wall)) => SeenCell::Wall,
                    Some((p, Cell::Floor)) if p == self.goal => SeenCell::Goal,
                    Some((_, Cell::Floor)) => SeenCell::Floor,
                };
            }
        }
        Observation {
            center: pos,
            radius,
            window,
            steps_taken,
        }
    }

    /// BFS distances from `from` over floor cells; `None` marks unreachable.
    pub fn distances_from(&self, from: Position) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.width * self.height];
        if !self.is_floor(from) {
            return dist;
        }
        let mut queue = VecDeque::from([from]);
        dist[self.index(from)] = Some(0);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index(p)].unwrap_or(0);
            for (_, q) in self.open_neighbors(p) {
                let slot = &mut dist[self.index(q)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(q);
                }
            }
        }
        dist
    }

    pub fn shortest_path_length(&self, from: Position, to: Position) -> Option<usize> {
        if !self.in_bounds(to) {
            return None;
        }
        self.distances_from(from)[self.index(to)]
    }

    /// Start-to-goal BFS distance. Always defined on a valid map.
    pub fn optimal_length(&self) -> usize {
        self.shortest_path_length(self.start, self.goal)
            .expect("valid maps have a reachable goal")
    }

    /// One shortest action sequence from `from` to `to`.
    ///
    /// The BFS tree is rooted at `to` and expanded in canonical action order;
    /// the path follows parent pointers from `from`. This makes the first
    /// move the canonically smallest move whose far side was discovered
    /// first from the target, e.g. an open room prefers Right-then-Down.
    pub fn shortest_path(&self, from: Position, to: Position) -> Option<Vec<Action>> {
        if !self.is_floor(from) || !self.is_floor(to) {
            return None;
        }
        // parent[q] = action that moves q one step closer to `to`.
        let mut toward: Vec<Option<Action>> = vec![None; self.width * self.height];
        let mut seen = vec![false; self.width * self.height];
        seen[self.index(to)] = true;
        let mut queue = VecDeque::from([to]);
        while let Some(p) = queue.pop_front() {
            for (a, q) in self.open_neighbors(p) {
                let qi = self.index(q);
                if !seen[qi] {
                    seen[qi] = true;
                    toward[qi] = Some(a.opposite());
                    queue.push_back(q);
                }
            }
        }
        if !seen[self.index(from)] {
            return None;
        }
        let mut path = Vec::new();
        let mut p = from;
        while p != to {
            let a = toward[self.index(p)]?;
            path.push(a);
            p = self.step(p, a);
        }
        Some(path)
    }

    pub fn metrics(&self) -> MapMetrics {
        let dist = self.distances_from(self.start);
        let mut reachable = 0usize;
        let mut brittle = 0usize;
        let mut open = 0usize;
        for p in self.positions() {
            if dist[self.index(p)].is_none() {
                continue;
            }
            reachable += 1;
            match self.open_neighbors(p).count() {
                0 => {}
                1 | 2 => brittle += 1,
                _ => open += 1,
            }
        }
        MapMetrics {
            shortest_path: self.optimal_length(),
            brittleness: brittle as f64 / reachable as f64,
            openness: open as f64 / reachable as f64,
            reachable_cells: reachable,
        }
    }

    pub(crate) fn index(&self, p: Position) -> usize {
        p.row * self.width + p.col
    }

    /// ASCII rendering; `parse_map(&m.to_ascii())` reproduces `m`.
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        if !self.id.is_empty() {
            out.push_str(&format!("@id {}\n", self.id));
        }
        if let Some(pair) = &self.pair_id {
            out.push_str(&format!("@pair_id {pair}\n"));
        }
        for row in 0..self.height {
            for col in 0..self.width {
                let p = Position { row, col };
                out.push(if p == self.start {
                    'S'
                } else if p == self.goal {
                    'G'
                } else if self.cells[self.index(p)] == Cell::Wall {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Graph metrics over the floor cells reachable from the start.
pub fn graph_metrics(map: &GridMap) -> MapMetrics {
    map.metrics()
}

/// Parses the ASCII map format: optional `@key value` header lines (`id`,
/// `pair_id`) followed by rows over `# . S G`.
pub fn parse_map(text: &str) -> Result<GridMap, MapError> {
    let mut id = String::new();
    let mut pair_id = None;
    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let mut start = None;
    let mut goal = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(header) = line.strip_prefix('@') {
            if !rows.is_empty() {
                return Err(MapError::malformed(lineno, "header after grid rows"));
            }
            let (key, value) = header
                .split_once(' ')
                .ok_or_else(|| MapError::malformed(lineno, "header needs a key and a value"))?;
            let value = value.trim();
            if value.is_empty() {
                return Err(MapError::malformed(lineno, "empty header value"));
            }
            match key {
                "id" => id = value.to_string(),
                "pair_id" => pair_id = Some(value.to_string()),
                other => {
                    return Err(MapError::malformed(lineno, format!("unknown header `{other}`")))
                }
            }
            continue;
        }
        if line.is_empty() {
            return Err(MapError::malformed(lineno, "empty line"));
        }
        let r = rows.len();
        let mut row = Vec::with_capacity(line.len());
        for (c, ch) in line.chars().enumerate() {
            let cell = match ch {
                '#' => Cell::Wall,
                '.' => Cell::Floor,
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut start } else { &mut goal };
                    if slot.is_some() {
                        return Err(MapError::malformed(lineno, format!("duplicate `{ch}`")));
                    }
                    *slot = Some(Position::new(r, c));
                    Cell::Floor
                }
                other => {
                    return Err(MapError::malformed(
                        lineno,
                        format!("illegal character {other:?} at column {}", c + 1),
                    ))
                }
            };
            row.push(cell);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(MapError::malformed(lineno, "ragged rows"));
            }
        }
        rows.push(row);
    }

    let start = start.ok_or_else(|| MapError::malformed(0, "missing `S`"))?;
    let goal = goal.ok_or_else(|| MapError::malformed(0, "missing `G`"))?;
    let mut map = GridMap::new(id, rows, start, goal)?;
    map.pair_id = pair_id;
    Ok(map)
}

/// Reads a map file. A missing `@id` header falls back to the file stem.
pub fn load_map_file(path: &std::path::Path) -> Result<GridMap, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut map = parse_map(&text).map_err(|e| LoadError::Map {
        path: path.display().to_string(),
        source: e,
    })?;
    if map.id.is_empty() {
        map.id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(map)
}

/// Loads every `*.map` file in `dir`, sorted by map id.
pub fn load_map_dir(dir: &std::path::Path) -> Result<Vec<GridMap>, LoadError> {
    let entries = std::fs::read_dir(dir).map_err(|e| LoadError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut maps = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| LoadError::Io {
                path: dir.display().to_string(),
                source: e,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "map") {
            maps.push(load_map_file(&path)?);
        }
    }
    maps.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = maps.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(LoadError::DuplicateId(w[0].id.clone()));
    }
    Ok(maps)
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Map {
        path: String,
        #[source]
        source: MapError,
    },
    #[error("duplicate map id `{0}`")]
    DuplicateId(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CORRIDOR: &str = "#####\n#S..#\n###.#\n#G..#\n#####\n";
    pub(crate) const OPEN_ROOM: &str = "#####\n#S..#\n#...#\n#..G#\n#####\n";

    #[test]
    fn parses_corridor() {
        let m = parse_map(CORRIDOR).unwrap();
        assert_eq!((m.width(), m.height()), (5, 5));
        assert_eq!(m.start(), Position::new(1, 1));
        assert_eq!(m.goal(), Position::new(3, 1));
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(matches!(
            parse_map("#####\n#S.S#\n#..G#\n#####\n"),
            Err(MapError::Malformed { .. })
        ));
        assert!(matches!(
            parse_map("#####\n#S.##\n###G#\n#####\n"),
            Err(MapError::UnreachableGoal { .. })
        ));
        assert!(matches!(parse_map("####\n#S.#\n#G#\n"), Err(MapError::Malformed { .. })));
        assert!(matches!(parse_map("#####\n#S.x#\n#..G#\n"), Err(MapError::Malformed { .. })));
        assert!(matches!(parse_map("#####\n#S..#\n#...#\n"), Err(MapError::Malformed { .. })));
        assert!(matches!(parse_map("SG\n"), Err(MapError::Malformed { .. })));
    }

    #[test]
    fn step_moves_or_blocks() {
        let m = parse_map(CORRIDOR).unwrap();
        assert_eq!(m.step(Position::new(1, 1), Action::Right), Position::new(1, 2));
        assert_eq!(m.step(Position::new(1, 1), Action::Up), Position::new(1, 1));
        assert_eq!(m.step(m.goal(), Action::Right), Position::new(3, 2));
    }

    #[test]
    fn observe_corridor_start() {
        use SeenCell::*;
        let m = parse_map(CORRIDOR).unwrap();
        let o = m.observe(Position::new(1, 1), 1);
        assert_eq!(
            o.window,
            vec![vec![Wall, Wall, Wall], vec![Wall, Floor, Floor], vec![Wall, Wall, Wall]]
        );
    }

    #[test]
    fn observe_corner_is_unknown_outside() {
        let m = parse_map(OPEN_ROOM).unwrap();
        let o = m.observe(Position::new(1, 1), 2);
        // Window rows -1..=3, cols -1..=3: the first row and column fall off the map.
        assert!(o.window[0].iter().all(|c| *c == SeenCell::Unknown));
        assert!(o.window.iter().all(|r| r[0] == SeenCell::Unknown));
        assert_eq!(o.window[2][2], SeenCell::Floor);
        assert_eq!(o.window[4][4], SeenCell::Goal);
    }

    #[test]
    fn goal_visible_when_adjacent() {
        let m = parse_map(CORRIDOR).unwrap();
        let o = m.observe(Position::new(3, 2), 1);
        assert_eq!(o.window[1][0], SeenCell::Goal);
        let far = m.observe(Position::new(1, 3), 1);
        assert!(far.cells().all(|(_, c)| c != SeenCell::Goal));
    }

    #[test]
    fn shortest_paths() {
        let c = parse_map(CORRIDOR).unwrap();
        assert_eq!(c.shortest_path_length(c.start(), c.goal()), Some(6));
        assert_eq!(c.shortest_path_length(c.start(), c.start()), Some(0));
        let o = parse_map(OPEN_ROOM).unwrap();
        assert_eq!(o.shortest_path_length(o.start(), o.goal()), Some(4));
        assert_eq!(
            o.shortest_path(o.start(), o.goal()).unwrap(),
            vec![Action::Right, Action::Right, Action::Down, Action::Down]
        );
        assert_eq!(c.shortest_path_length(c.start(), Position::new(0, 0)), None);
    }

    #[test]
    fn metrics_match_hand_counts() {
        let c = parse_map(CORRIDOR).unwrap().metrics();
        assert_eq!(c.shortest_path, 6);
        assert_eq!(c.reachable_cells, 7);
        assert_eq!(c.brittleness, 1.0);
        assert_eq!(c.openness, 0.0);
        let o = parse_map(OPEN_ROOM).unwrap().metrics();
        assert_eq!(o.reachable_cells, 9);
        assert!((o.brittleness - 4.0 / 9.0).abs() < 1e-12);
        assert!((o.openness - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_region_is_isolated() {
        use Cell::*;
        let rows = vec![vec![Wall; 3], vec![Wall, Floor, Wall], vec![Wall; 3]];
        let p = Position::new(1, 1);
        let m = GridMap::new("solo", rows, p, p).unwrap();
        let metrics = m.metrics();
        assert_eq!(metrics.reachable_cells, 1);
        assert_eq!(metrics.brittleness, 0.0);
        assert_eq!(metrics.openness, 0.0);
        assert_eq!(metrics.isolated_fraction(), 1.0);
    }

    #[test]
    fn ascii_round_trip_with_headers() {
        let text = "@id corridor5\n@pair_id p1\n#####\n#S..#\n###.#\n#G..#\n#####\n";
        let m = parse_map(text).unwrap();
        assert_eq!(m.id, "corridor5");
        assert_eq!(m.pair_id.as_deref(), Some("p1"));
        assert_eq!(m.to_ascii(), text);
    }

    #[test]
    fn action_tokens() {
        assert_eq!("right".parse::<Action>().unwrap(), Action::Right);
        assert!("north".parse::<Action>().is_err());
        assert!(Action::Up < Action::Down && Action::Left < Action::Right);
    }
}
