//! Truck routing over the must-visit nodes: a closed tour from the depot.
//!
//! Small instances are solved exactly with Held-Karp dynamic programming.
//! Larger ones use nearest-neighbour construction followed by 2-opt until no
//! improving exchange remains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Location};
use crate::Scalar;

pub const DEFAULT_EXACT_THRESHOLD: usize = 16;
/// Hard cap on the exact solver; the DP table has `2^(n-1) * (n-1)` cells.
pub const MAX_EXACT_POINTS: usize = 22;

/// Closed tour over a point list whose first entry is the depot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour<T = f64> {
    /// Indices into the input points, starting and ending at 0.
    pub visit_order: Vec<usize>,
    pub length: T,
    /// Whether the tour is provably optimal.
    pub exact: bool,
}

impl<T: Scalar> Tour<T> {
    fn trivial(n: usize) -> Self {
        let visit_order = if n == 0 { Vec::new() } else { vec![0, 0] };
        Self { visit_order, length: T::zero(), exact: true }
    }

    pub fn emission(&self, e_truck: T) -> T {
        e_truck * self.length
    }
}

/// Length of the closed tour visiting `order` (which need not repeat the start).
pub fn tour_length<T: Scalar>(points: &[Location<T>], order: &[usize]) -> T {
    if order.len() < 2 {
        return T::zero();
    }
    let mut total = T::zero();
    for w in order.windows(2) {
        total += distance(points[w[0]], points[w[1]]);
    }
    let (first, last) = (order[0], order[order.len() - 1]);
    if first != last {
        total += distance(points[last], points[first]);
    }
    total
}

fn distance_matrix<T: Scalar>(points: &[Location<T>]) -> Vec<Vec<T>> {
    points.iter().map(|a| points.iter().map(|b| distance(*a, *b)).collect()).collect()
}

/// Orients the closed tour so that the second stop has a smaller index than
/// the second-to-last, then measures it along that direction.
fn canonical<T: Scalar>(points: &[Location<T>], mut inner: Vec<usize>, exact: bool) -> Tour<T> {
    if inner.len() >= 2 && inner[0] > inner[inner.len() - 1] {
        inner.reverse();
    }
    let mut visit_order = Vec::with_capacity(inner.len() + 2);
    visit_order.push(0);
    visit_order.extend(inner);
    visit_order.push(0);
    let length = tour_length(points, &visit_order);
    Tour { visit_order, length, exact }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TspSolver {
    pub exact_threshold: usize,
}

impl Default for TspSolver {
    fn default() -> Self {
        Self { exact_threshold: DEFAULT_EXACT_THRESHOLD }
    }
}

impl TspSolver {
    pub fn new(exact_threshold: usize) -> Self {
        Self { exact_threshold: exact_threshold.min(MAX_EXACT_POINTS) }
    }

    pub fn solve<T: Scalar>(&self, points: &[Location<T>]) -> Tour<T> {
        if points.len() <= self.exact_threshold {
            held_karp(points)
        } else {
            solve_tsp_heuristic(points)
        }
    }

    pub fn solve_exact<T: Scalar>(&self, points: &[Location<T>]) -> Result<Tour<T>> {
        if points.len() > self.exact_threshold {
            return Err(Error::TooManyPoints { len: points.len(), threshold: self.exact_threshold });
        }
        Ok(held_karp(points))
    }
}

/// Optimal tour for at most [`DEFAULT_EXACT_THRESHOLD`] points.
pub fn solve_tsp_exact<T: Scalar>(points: &[Location<T>]) -> Result<Tour<T>> {
    TspSolver::default().solve_exact(points)
}

/// Exact below the default threshold, heuristic above.
pub fn solve_tsp<T: Scalar>(points: &[Location<T>]) -> Tour<T> {
    TspSolver::default().solve(points)
}

fn held_karp<T: Scalar>(points: &[Location<T>]) -> Tour<T> {
    let n = points.len();
    if n <= 2 {
        return match n {
            2 => canonical(points, vec![1], true),
            _ => Tour::trivial(n),
        };
    }
    let d = distance_matrix(points);
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![T::infinity(); (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = d[0][j + 1];
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let prev = mask ^ (1 << j);
            let mut best = T::infinity();
            let mut arg = u8::MAX;
            for k in 0..m {
                if prev & (1 << k) == 0 {
                    continue;
                }
                let c = cost[prev * m + k] + d[k + 1][j + 1];
                if c < best {
                    best = c;
                    arg = k as u8;
                }
            }
            cost[mask * m + j] = best;
            parent[mask * m + j] = arg;
        }
    }
    let mut best = T::infinity();
    let mut last = 0;
    for j in 0..m {
        let c = cost[full * m + j] + d[j + 1][0];
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut inner = Vec::with_capacity(m);
    let mut mask = full;
    let mut j = last;
    loop {
        inner.push(j + 1);
        let p = parent[mask * m + j];
        mask ^= 1 << j;
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    inner.reverse();
    canonical(points, inner, true)
}

/// Nearest-neighbour construction from every start node, improved by
/// alternating 2-opt and Or-opt; the best tour is returned. The result is
/// always 2-opt-stable.
pub fn solve_tsp_heuristic<T: Scalar>(points: &[Location<T>]) -> Tour<T> {
    let n = points.len();
    if n <= 3 {
        return held_karp(points);
    }
    let d = distance_matrix(points);
    let mut best: Option<(T, Vec<usize>)> = None;
    for start in 0..n {
        let mut tour = nearest_neighbor(&d, start);
        let at = tour.iter().position(|&v| v == 0).expect("depot in tour");
        tour.rotate_left(at);
        improve(&d, &mut tour);
        let len = closed_length(&d, &tour);
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, tour));
        }
    }
    let (_, tour) = best.expect("non-empty");
    canonical(points, tour[1..].to_vec(), false)
}

/// Single nearest-neighbour construction from the depot, improved as in
/// [`solve_tsp_heuristic`]. Never longer than that tour's depot start, and
/// far cheaper on large inputs.
pub fn solve_tsp_quick<T: Scalar>(points: &[Location<T>]) -> Tour<T> {
    if points.len() <= 3 {
        return held_karp(points);
    }
    let d = distance_matrix(points);
    let mut tour = nearest_neighbor(&d, 0);
    improve(&d, &mut tour);
    canonical(points, tour[1..].to_vec(), false)
}

fn improve<T: Scalar>(d: &[Vec<T>], tour: &mut Vec<usize>) {
    loop {
        two_opt(d, tour);
        if !or_opt(d, tour) {
            break;
        }
    }
}

fn closed_length<T: Scalar>(d: &[Vec<T>], tour: &[usize]) -> T {
    (0..tour.len()).map(|i| d[tour[i]][tour[(i + 1) % tour.len()]]).sum()
}

fn nearest_neighbor<T: Scalar>(d: &[Vec<T>], start: usize) -> Vec<usize> {
    let n = d.len();
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut cur = start;
    visited[start] = true;
    tour.push(start);
    for _ in 1..n {
        let mut best = T::infinity();
        let mut next = 0;
        for (j, seen) in visited.iter().enumerate() {
            if !seen && d[cur][j] < best {
                best = d[cur][j];
                next = j;
            }
        }
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

/// Moves one segment of up to three non-depot stops to another position,
/// possibly reversed. Applies the first improving move found.
fn or_opt<T: Scalar>(d: &[Vec<T>], tour: &mut Vec<usize>) -> bool {
    let n = tour.len();
    let tol = improvement_tolerance(d);
    for len in 1..=3.min(n - 2) {
        for i in 1..=n - len {
            let (prev, first, last) = (tour[i - 1], tour[i], tour[i + len - 1]);
            let next = tour[(i + len) % n];
            let removed = d[prev][first] + d[last][next] - d[prev][next];
            let rest: Vec<usize> = tour[..i].iter().chain(&tour[i + len..]).copied().collect();
            for k in 0..rest.len() {
                let (a, b) = (rest[k], rest[(k + 1) % rest.len()]);
                if a == prev && b == next {
                    continue;
                }
                let forward = d[a][first] + d[last][b] - d[a][b];
                let backward = d[a][last] + d[first][b] - d[a][b];
                let (added, reversed) = if backward < forward { (backward, true) } else { (forward, false) };
                if removed - added > tol {
                    let mut seg = tour[i..i + len].to_vec();
                    if reversed {
                        seg.reverse();
                    }
                    let mut out = rest[..=k].to_vec();
                    out.extend(seg);
                    out.extend(&rest[k + 1..]);
                    *tour = out;
                    return true;
                }
            }
        }
    }
    false
}

fn improvement_tolerance<T: Scalar>(d: &[Vec<T>]) -> T {
    let scale = d.iter().flatten().copied().fold(T::zero(), T::max);
    scale * T::epsilon() * T::lit(64.0)
}

/// Gain of reversing `tour[i+1..=j]` in a closed tour (positive = shorter).
fn two_opt_gain<T: Scalar>(d: &[Vec<T>], tour: &[usize], i: usize, j: usize) -> T {
    let n = tour.len();
    let (a, b) = (tour[i], tour[i + 1]);
    let (c, e) = (tour[j], tour[(j + 1) % n]);
    d[a][b] + d[c][e] - d[a][c] - d[b][e]
}

/// First-improvement 2-opt on a closed tour stored without the repeated depot.
fn two_opt<T: Scalar>(d: &[Vec<T>], tour: &mut [usize]) {
    let n = tour.len();
    let tol = improvement_tolerance(d);
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 2 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if two_opt_gain(d, tour, i, j) > tol {
                    tour[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

/// Largest gain of any single 2-opt exchange on `tour` (closed, depot first).
pub fn best_two_opt_gain<T: Scalar>(points: &[Location<T>], tour: &Tour<T>) -> T {
    let d = distance_matrix(points);
    let order = &tour.visit_order[..tour.visit_order.len().saturating_sub(1)];
    let n = order.len();
    let mut best = T::neg_infinity();
    if n < 4 {
        return T::zero();
    }
    for i in 0..n - 2 {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            best = best.max(two_opt_gain(&d, order, i, j));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
        (0..n).map(|_| Location::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect()
    }

    /// Minimum closed-tour length over all permutations of the non-depot points.
    fn brute_force(points: &[Location]) -> f64 {
        fn rec(points: &[Location], rest: &mut Vec<usize>, path: &mut Vec<usize>, best: &mut f64) {
            if rest.is_empty() {
                let mut len = 0.0;
                let mut prev = 0;
                for &p in path.iter() {
                    len += points[prev].distance(points[p]);
                    prev = p;
                }
                len += points[prev].distance(points[0]);
                *best = best.min(len);
                return;
            }
            for i in 0..rest.len() {
                let v = rest.remove(i);
                path.push(v);
                rec(points, rest, path, best);
                path.pop();
                rest.insert(i, v);
            }
        }
        let mut best = f64::INFINITY;
        rec(points, &mut (1..points.len()).collect(), &mut Vec::new(), &mut best);
        if points.len() <= 1 {
            0.0
        } else {
            best
        }
    }

    fn assert_valid(tour: &Tour, n: usize) {
        assert_eq!(tour.visit_order.first(), Some(&0));
        assert_eq!(tour.visit_order.last(), Some(&0));
        let mut seen: Vec<usize> = tour.visit_order[1..tour.visit_order.len() - 1].to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (1..n).collect::<Vec<_>>());
    }

    #[test]
    fn small_cases() {
        let one = solve_tsp_exact(&[Location::new(1.0, 2.0)]).unwrap();
        assert_eq!(one.length, 0.0);
        assert_eq!(one.visit_order, vec![0, 0]);
        let square: [Location<f64>; 4] = [Location::new(0.0, 0.0), Location::new(1.0, 0.0), Location::new(1.0, 1.0), Location::new(0.0, 1.0)];
        let t = solve_tsp_exact(&square).unwrap();
        assert!((t.length - 4.0).abs() < 1e-12);
        assert!(t.exact);
        assert!(solve_tsp_exact::<f64>(&[]).unwrap().visit_order.is_empty());
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=9 {
            let pts = random_points(&mut rng, n);
            let t = solve_tsp_exact(&pts).unwrap();
            assert_valid(&t, n);
            assert!((t.length - brute_force(&pts)).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn exact_rejects_oversized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 17);
        assert!(matches!(solve_tsp_exact(&pts), Err(Error::TooManyPoints { len: 17, threshold: 16 })));
        assert!(!solve_tsp(&pts).exact);
    }

    #[test]
    fn delegation_below_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 12);
        assert_eq!(solve_tsp(&pts), solve_tsp_exact(&pts).unwrap());
    }

    #[test]
    fn collinear_points_go_out_and_back() {
        let pts: Vec<Location> = [0.0, 3.0, -2.0, 1.5, 7.0, -4.0].iter().map(|x| Location::new(*x, 0.0)).collect();
        let span = 11.0;
        assert!((solve_tsp(&pts).length - 2.0 * span).abs() < 1e-12);
        let mut many: Vec<Location> = (0..25).map(|i| Location::new(i as f64 * 0.37 - 3.0, 0.0)).collect();
        many.swap(0, 7);
        let t = solve_tsp(&many);
        assert!(!t.exact);
        assert!((t.length - 2.0 * 24.0 * 0.37).abs() < 1e-9);
    }

    #[test]
    fn heuristic_is_close_to_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let pts = random_points(&mut rng, 14);
            let h = solve_tsp_heuristic(&pts);
            let e = solve_tsp_exact(&pts).unwrap();
            assert_valid(&h, 14);
            assert!(h.length <= 1.08 * e.length, "{} vs {}", h.length, e.length);
        }
    }

    #[test]
    fn heuristic_is_two_opt_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [20, 30, 45] {
            let pts = random_points(&mut rng, n);
            let t = solve_tsp_heuristic(&pts);
            assert_valid(&t, n);
            assert!(best_two_opt_gain(&pts, &t) <= 1e-9);
            assert!((tour_length(&pts, &t.visit_order) - t.length).abs() < 1e-12);
        }
    }

    #[test]
    fn quick_tour_is_valid_and_bounds_the_heuristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [1, 2, 3, 4, 12, 30] {
            let pts = random_points(&mut rng, n);
            let q = solve_tsp_quick(&pts);
            assert_valid(&q, n);
            assert!((tour_length(&pts, &q.visit_order) - q.length).abs() < 1e-12);
            assert!(solve_tsp_heuristic(&pts).length <= q.length + 1e-12);
        }
    }

    #[test]
    fn heuristic_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 40);
        assert_eq!(solve_tsp(&pts), solve_tsp(&pts));
    }

    #[test]
    fn exact_dominates_random_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = random_points(&mut rng, 11);
        let best = solve_tsp_exact(&pts).unwrap().length;
        let mut order: Vec<usize> = (1..11).collect();
        for _ in 0..1000 {
            order.shuffle(&mut rng);
            let mut full = vec![0];
            full.extend(&order);
            assert!(best <= tour_length(&pts, &full) + 1e-12);
        }
    }

    #[test]
    fn single_precision_solver() {
        let pts: Vec<Location<f32>> = vec![Location::new(0.0, 0.0), Location::new(2.0, 0.0), Location::new(2.0, 2.0), Location::new(0.0, 2.0)];
        assert!((solve_tsp(&pts).length - 8.0).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_length_ignores_input_order(seed in any::<u64>(), n in 3usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n);
            let mut shuffled = pts.clone();
            shuffled[1..].shuffle(&mut rng);
            let a = solve_tsp_exact(&pts).unwrap().length;
            let b = solve_tsp_exact(&shuffled).unwrap().length;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn doubling_coordinates_doubles_length(seed in any::<u64>(), n in 2usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n);
            let doubled: Vec<Location> = pts.iter().map(|p| p.scaled(2.0)).collect();
            let a = solve_tsp(&pts);
            let b = solve_tsp(&doubled);
            prop_assert_eq!(&a.visit_order, &b.visit_order);
            prop_assert_eq!(b.length, 2.0 * a.length);
            prop_assert_eq!(b.emission(196.0), 2.0 * a.emission(196.0));
        }
    }
}
