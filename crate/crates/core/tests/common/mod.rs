//! Shared fixtures and reference implementations for integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use wayfinder_core::gridworld::{load_map_dir, GridMap, Position};
use wayfinder_core::guidance::GuidanceProgram;
use wayfinder_core::translator::{oracle_translate, Explanation, ScriptOrder, ScriptedTranslator};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn maps() -> Vec<GridMap> {
    load_map_dir(&fixtures().join("maps")).expect("fixture maps load")
}

pub fn map(id: &str) -> GridMap {
    maps()
        .into_iter()
        .find(|m| m.id == id)
        .unwrap_or_else(|| panic!("no fixture map `{id}`"))
}

pub fn explanation(map: &GridMap, text: &str) -> Explanation {
    Explanation::new("e", map.id.clone(), text)
}

/// Same output for every query.
pub fn scripted(outputs: &[&str]) -> ScriptedTranslator {
    ScriptedTranslator::new(outputs.iter().map(|s| s.to_string()).collect(), ScriptOrder::ByQuery)
}

/// Oracle policy without its final leg and without the goal annotation.
pub fn truncated_oracle(map: &GridMap) -> GuidanceProgram {
    let mut p = oracle_translate(map);
    p.policy_steps.pop();
    p.value_annotations.clear();
    p
}

/// Reference BFS over floor cells, independent of the library's search.
pub fn bfs_distance(map: &GridMap, from: Position, to: Position) -> Option<usize> {
    let (w, h) = (map.width(), map.height());
    let mut dist = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    dist[from.row * w + from.col] = 0;
    queue.push_back(from);
    while let Some(p) = queue.pop_front() {
        if p == to {
            return Some(dist[p.row * w + p.col]);
        }
        let d = dist[p.row * w + p.col];
        let mut next = Vec::new();
        if p.row > 0 {
            next.push(Position { row: p.row - 1, col: p.col });
        }
        if p.col > 0 {
            next.push(Position { row: p.row, col: p.col - 1 });
        }
        next.push(Position { row: p.row + 1, col: p.col });
        next.push(Position { row: p.row, col: p.col + 1 });
        for q in next {
            if q.row < h && q.col < w && map.is_floor(q) && dist[q.row * w + q.col] == usize::MAX {
                dist[q.row * w + q.col] = d + 1;
                queue.push_back(q);
            }
        }
    }
    None
}

/// Softmax computed directly, without max-subtraction.
pub fn naive_softmax(us: &[f64], lambda: f64) -> Vec<f64> {
    let e: Vec<f64> = us.iter().map(|u| (lambda * u).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// Average ranks by pairwise comparison, then Pearson.
pub fn brute_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
