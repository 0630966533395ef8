//! Progressive edge growth with a hard row-degree cap.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Grows a Tanner graph one edge at a time. Each new edge of a variable goes
/// to a check outside its current neighborhood when possible, otherwise to one
/// at maximal depth; ties go to the lowest-degree check, then at random.
/// Checks stop accepting edges at `row_weight`. Returns the check rows, or
/// `None` if a variable runs out of admissible checks.
pub fn peg_construct(
    n: usize,
    m: usize,
    col_weight: usize,
    row_weight: usize,
    seed: u64,
) -> Option<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(row_weight); m];
    let mut cols: Vec<Vec<usize>> = vec![Vec::with_capacity(col_weight); n];
    let mut order: Vec<usize> = (0..m).collect();

    for v in 0..n {
        for _ in 0..col_weight {
            let depth = check_depths(v, &rows, &cols);
            let open = |c: usize| rows[c].len() < row_weight && !cols[v].contains(&c);
            // Unreached checks count as infinitely deep.
            let best_depth = (0..m).filter(|&c| open(c)).map(|c| depth[c]).max()?;
            let mut candidates: Vec<usize> = (0..m)
                .filter(|&c| open(c) && depth[c] == best_depth)
                .collect();
            let min_deg = candidates.iter().map(|&c| rows[c].len()).min()?;
            candidates.retain(|&c| rows[c].len() == min_deg);
            order.shuffle(&mut rng);
            let chosen = *order.iter().find(|c| candidates.contains(c))?;
            rows[chosen].push(v);
            cols[v].push(chosen);
        }
    }
    Some(rows)
}

/// Breadth-first depth (in check layers) from variable `v` to every check;
/// `usize::MAX` marks unreachable checks.
fn check_depths(v: usize, rows: &[Vec<usize>], cols: &[Vec<usize>]) -> Vec<usize> {
    let mut depth = vec![usize::MAX; rows.len()];
    let mut var_seen = vec![false; cols.len()];
    var_seen[v] = true;
    let mut queue = VecDeque::new();
    for &c in &cols[v] {
        depth[c] = 0;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        for &u in &rows[c] {
            if var_seen[u] {
                continue;
            }
            var_seen[u] = true;
            for &c2 in &cols[u] {
                if depth[c2] == usize::MAX {
                    depth[c2] = depth[c] + 1;
                    queue.push_back(c2);
                }
            }
        }
    }
    depth
}
