//! Line colourings and their structural properties: density, richness,
//! distinguished / very distinguished, critical, perfect, and the knit
//! construction that pins designated lines to designated colours.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;
use thiserror::Error;

use crate::geometry::{Line, Space};

/// A set of points, stored as sorted point indices.
pub type PointSet = BTreeSet<u64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColouringError {
    #[error("exhaustive richness check too large: {0} cases")]
    TooLargeForExhaustive(u128),
    #[error("critical witness repeats a colour")]
    DuplicateColourInWitness,
    #[error("not enough directions: {available} available, {needed} needed")]
    NotEnoughDirections { available: u64, needed: u64 },
    #[error("special lines must be pairwise distinct")]
    DuplicateSpecialLines,
    #[error("bad colouring encoding: {0}")]
    BadEncoding(String),
}

/// A total colouring of the lines of a space with colours `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colouring {
    pub k: u32,
    pub repr: Repr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Repr {
    /// Colour per global line index; desk scale only.
    Dense(Vec<u32>),
    /// Colour per direction class, with per-line exceptions on top.
    Compact {
        by_direction: Vec<u32>,
        exceptions: Vec<(Line, u32)>,
        default: u32,
    },
}

impl Colouring {
    pub fn dense(k: u32, by_line: Vec<u32>) -> Colouring {
        debug_assert!(by_line.iter().all(|&c| 1 <= c && c <= k));
        Colouring {
            k,
            repr: Repr::Dense(by_line),
        }
    }

    /// All lines the same colour.
    pub fn trivial(space: &Space) -> Colouring {
        Colouring {
            k: 1,
            repr: Repr::Compact {
                by_direction: vec![1; space.num_directions() as usize],
                exceptions: Vec::new(),
                default: 1,
            },
        }
    }

    pub fn colour_of(&self, space: &Space, line: &Line) -> u32 {
        match &self.repr {
            Repr::Dense(by_line) => by_line[space.line_index(line) as usize],
            Repr::Compact {
                by_direction,
                exceptions,
                ..
            } => {
                for (l, c) in exceptions {
                    if l == line {
                        return *c;
                    }
                }
                by_direction[space.dir_rank(&line.direction) as usize]
            }
        }
    }

    /// Re-encode per line. Desk scale only.
    pub fn to_dense(&self, space: &Space) -> Colouring {
        let by_line = space
            .all_lines()
            .iter()
            .map(|l| self.colour_of(space, l))
            .collect();
        Colouring::dense(self.k, by_line)
    }
}

/// Serialize per the transcript schema: compact form
/// `{"by_direction": [...], "exceptions": [[line_index, colour], ...], "default": c}`
/// or dense form `{"by_line": [...]}`.
pub fn colouring_to_json(space: &Space, xi: &Colouring) -> serde_json::Value {
    match &xi.repr {
        Repr::Dense(by_line) => json!({ "by_line": by_line }),
        Repr::Compact {
            by_direction,
            exceptions,
            default,
        } => {
            let exc: Vec<serde_json::Value> = exceptions
                .iter()
                .map(|(l, c)| json!([space.line_index(l), c]))
                .collect();
            json!({
                "by_direction": by_direction,
                "exceptions": exc,
                "default": default,
            })
        }
    }
}

pub fn colouring_from_json(
    space: &Space,
    k: u32,
    value: &serde_json::Value,
) -> Result<Colouring, ColouringError> {
    let bad = |m: &str| ColouringError::BadEncoding(m.to_string());
    let colour = |v: &serde_json::Value| -> Result<u32, ColouringError> {
        let c = v.as_u64().ok_or_else(|| bad("colour must be an integer"))? as u32;
        if c < 1 || c > k {
            return Err(bad("colour out of range"));
        }
        Ok(c)
    };
    if let Some(by_line) = value.get("by_line") {
        let arr = by_line.as_array().ok_or_else(|| bad("by_line must be an array"))?;
        if arr.len() as u64 != space.num_lines() {
            return Err(bad("by_line length must equal the number of lines"));
        }
        let by_line: Result<Vec<u32>, _> = arr.iter().map(colour).collect();
        return Ok(Colouring::dense(k, by_line?));
    }
    let by_direction = value
        .get("by_direction")
        .and_then(|v| v.as_array())
        .ok_or_else(|| bad("missing by_direction"))?;
    if by_direction.len() as u64 != space.num_directions() {
        return Err(bad("by_direction length must equal the number of directions"));
    }
    let by_direction: Result<Vec<u32>, _> = by_direction.iter().map(colour).collect();
    let default = colour(value.get("default").ok_or_else(|| bad("missing default"))?)?;
    let mut exceptions = Vec::new();
    let mut seen = HashSet::new();
    if let Some(exc) = value.get("exceptions") {
        for e in exc.as_array().ok_or_else(|| bad("exceptions must be an array"))? {
            let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                bad("each exception must be a [line_index, colour] pair")
            })?;
            let idx = pair[0].as_u64().ok_or_else(|| bad("line index must be an integer"))?;
            if idx >= space.num_lines() {
                return Err(bad("exception line index out of range"));
            }
            let line = space.line_at(idx);
            if !seen.insert(line.key()) {
                return Err(bad("duplicate exception line"));
            }
            exceptions.push((line, colour(&pair[1])?));
        }
    }
    Ok(Colouring {
        k,
        repr: Repr::Compact {
            by_direction: by_direction?,
            exceptions,
            default,
        },
    })
}

/// The lines meeting `E` in at least `m` points (`L_m(E)`), sorted by
/// canonical line order.
pub fn lines_meeting(space: &Space, e: &PointSet, m: u64) -> Vec<Line> {
    let mut out: Vec<Line> = if m == 0 {
        space.all_lines().to_vec()
    } else if m == 1 {
        let mut seen = HashSet::new();
        let mut lines = Vec::new();
        for &x in e {
            for l in space.lines_through(&space.point(x)) {
                if seen.insert(l.key()) {
                    lines.push(l);
                }
            }
        }
        lines
    } else {
        // every qualifying line contains two points of E
        let pts: Vec<u64> = e.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut lines = Vec::new();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let l = space
                    .line_from_points(&space.point(pts[i]), &space.point(pts[j]))
                    .expect("distinct points");
                if !seen.insert(l.key()) {
                    continue;
                }
                let hits = l.points.iter().filter(|p| e.contains(p)).count() as u64;
                if hits >= m {
                    lines.push(l);
                }
            }
        }
        lines
    };
    out.sort_by_key(|l| (space.dir_rank(&l.direction), l.base.index));
    out
}

/// Full lines contained in `E`.
pub fn full_lines(space: &Space, e: &PointSet) -> Vec<Line> {
    if (e.len() as u64) < space.q() {
        return Vec::new();
    }
    lines_meeting(space, e, space.q())
}

/// The largest `m` such that every (point, colour) pair has at least `m`
/// lines of that colour through that point; 0 when some colour misses some
/// point.
pub fn density(space: &Space, xi: &Colouring) -> u64 {
    match &xi.repr {
        Repr::Compact {
            by_direction,
            exceptions,
            ..
        } => {
            // Through any point there is exactly one line per direction, so a
            // point not on any exception line sees exactly n_i lines of
            // colour i, where n_i is the number of directions of class
            // colour i. Points on exception lines see the class count
            // adjusted by the exceptions through them.
            let k = xi.k as usize;
            let mut class_count = vec![0i64; k + 1];
            for &c in by_direction {
                class_count[c as usize] += 1;
            }
            // signed colour deltas per point covered by an exception line
            let mut deltas: HashMap<u64, Vec<i64>> = HashMap::new();
            for (line, colour) in exceptions {
                let class = by_direction[space.dir_rank(&line.direction) as usize];
                for &p in &line.points {
                    let d = deltas.entry(p).or_insert_with(|| vec![0i64; k + 1]);
                    d[class as usize] -= 1;
                    d[*colour as usize] += 1;
                }
            }
            let mut min = i64::MAX;
            if (deltas.len() as u64) < space.num_points() {
                // some point lies on no exception line
                min = *class_count[1..].iter().min().unwrap();
            }
            for d in deltas.values() {
                for c in 1..=k {
                    min = min.min(class_count[c] + d[c]);
                }
            }
            min.max(0) as u64
        }
        Repr::Dense(by_line) => {
            let k = xi.k as usize;
            let np = space.num_points() as usize;
            let mut counts = vec![0u64; np * k];
            for (idx, line) in space.all_lines().iter().enumerate() {
                let c = by_line[idx] as usize - 1;
                for &p in &line.points {
                    counts[p as usize * k + c] += 1;
                }
            }
            counts.iter().copied().min().unwrap_or(0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RichMode {
    /// Evaluate the definition literally over every c-set. Desk scale only.
    Exhaustive,
    /// Sufficient proxy: density >= c + 2. "Unknown" counts as false.
    Density,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    acc
}

const EXHAUSTIVE_RICH_BUDGET: u128 = 50_000_000;

/// Is `xi` c-rich: for every c-set C, colour i and point x not in C, some
/// i-line through x avoids C and some i-line avoids both x and C.
pub fn is_rich(
    space: &Space,
    xi: &Colouring,
    c: u64,
    mode: RichMode,
) -> Result<bool, ColouringError> {
    match mode {
        RichMode::Density => Ok(density(space, xi) >= c + 2),
        RichMode::Exhaustive => {
            let np = space.num_points();
            let cost = binomial(np, c)
                .saturating_mul(xi.k as u128)
                .saturating_mul(space.num_lines() as u128);
            if cost > EXHAUSTIVE_RICH_BUDGET {
                return Err(ColouringError::TooLargeForExhaustive(cost));
            }
            let lines = space.all_lines();
            let colours: Vec<u32> = lines.iter().map(|l| xi.colour_of(space, l)).collect();
            let points: Vec<u64> = (0..np).collect();
            for cset in itertools::Itertools::combinations(points.iter().copied(), c as usize) {
                let cset: PointSet = cset.into_iter().collect();
                for colour in 1..=xi.k {
                    // lines of this colour avoiding C
                    let avoiding: Vec<&Line> = lines
                        .iter()
                        .zip(&colours)
                        .filter(|(l, &lc)| lc == colour && l.points.iter().all(|p| !cset.contains(p)))
                        .map(|(l, _)| l)
                        .collect();
                    if avoiding.is_empty() {
                        return Ok(false);
                    }
                    let mut covered: HashSet<u64> = HashSet::new();
                    for l in &avoiding {
                        covered.extend(l.points.iter().copied());
                    }
                    for x in 0..np {
                        if cset.contains(&x) {
                            continue;
                        }
                        // an i-line through x avoiding C
                        if !covered.contains(&x) {
                            return Ok(false);
                        }
                        // an i-line avoiding C and x
                        if avoiding.iter().all(|l| l.contains(x)) {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Distinguished for E: no two distinct full lines inside E share a colour.
pub fn is_distinguished(space: &Space, xi: &Colouring, e: &PointSet) -> bool {
    let full = full_lines(space, e);
    let mut seen = HashSet::new();
    for l in &full {
        if !seen.insert(xi.colour_of(space, l)) {
            return false;
        }
    }
    true
}

/// All sets one swap from E: replace a full line of E by a same-coloured
/// line disjoint from the rest of E. The identity swap (h = l) is included.
pub fn hue_neighbors(space: &Space, xi: &Colouring, e: &PointSet) -> BTreeSet<PointSet> {
    let mut out = BTreeSet::new();
    for l in full_lines(space, e) {
        let colour = xi.colour_of(space, &l);
        let rest: PointSet = e.iter().copied().filter(|p| !l.contains(*p)).collect();
        for h in space.all_lines() {
            if xi.colour_of(space, h) != colour {
                continue;
            }
            if h.points.iter().any(|p| rest.contains(p)) {
                continue;
            }
            let mut f = rest.clone();
            f.extend(h.points.iter().copied());
            out.insert(f);
        }
    }
    out
}

/// Breadth-first closure of `hue_neighbors` starting at E; truncates once
/// more than `cap` sets are reached.
pub fn hue_explore(
    space: &Space,
    xi: &Colouring,
    e: &PointSet,
    cap: usize,
) -> (BTreeSet<PointSet>, bool) {
    assert!(cap >= 1);
    let mut seen = BTreeSet::new();
    seen.insert(e.clone());
    let mut queue = VecDeque::new();
    queue.push_back(e.clone());
    while let Some(f) = queue.pop_front() {
        for g in hue_neighbors(space, xi, &f) {
            if seen.contains(&g) {
                continue;
            }
            if seen.len() + 1 > cap {
                return (seen, true);
            }
            seen.insert(g.clone());
            queue.push_back(g);
        }
    }
    (seen, false)
}

/// Does `witness` certify that `xi` is critical for E: for every line h,
/// `|(h & E) \ union(witness)| < q - k`.
pub fn check_critical(
    space: &Space,
    xi: &Colouring,
    e: &PointSet,
    witness: &[Line],
) -> Result<bool, ColouringError> {
    let mut colours = HashSet::new();
    for l in witness {
        if !colours.insert(xi.colour_of(space, l)) {
            return Err(ColouringError::DuplicateColourInWitness);
        }
    }
    let q = space.q();
    let k = xi.k as u64;
    if k >= q {
        // the bound q - k is non-positive; no line can satisfy it
        return Ok(false);
    }
    let m = q - k;
    let covered: HashSet<u64> = witness.iter().flat_map(|l| l.points.iter().copied()).collect();
    // lines with |h & E| < m satisfy the bound trivially
    for h in lines_meeting(space, e, m) {
        let uncovered = h
            .points
            .iter()
            .filter(|p| e.contains(p) && !covered.contains(p))
            .count() as u64;
        if uncovered >= m {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Search for a critical witness. Full lines of E are forced into the
/// witness; the search then extends with at most one line per unused colour
/// drawn from `L_{q-k}(E)`, greedily by descending overlap with E, with
/// exhaustive backtracking behind the greedy order.
pub fn find_critical(space: &Space, xi: &Colouring, e: &PointSet) -> Option<Vec<Line>> {
    let q = space.q();
    let k = xi.k as u64;
    if k >= q {
        return None;
    }
    let full = full_lines(space, e);
    let mut used = HashSet::new();
    for l in &full {
        if !used.insert(xi.colour_of(space, l)) {
            return None; // two full lines share a colour: no witness can exist
        }
    }
    let mut heavy = lines_meeting(space, e, q - k);
    heavy.retain(|h| !full.contains(h) && !used.contains(&xi.colour_of(space, h)));
    // group extension candidates by colour, biggest overlap first
    let mut groups: HashMap<u32, Vec<Line>> = HashMap::new();
    for h in heavy {
        groups.entry(xi.colour_of(space, &h)).or_default().push(h);
    }
    let mut groups: Vec<Vec<Line>> = groups.into_values().collect();
    for g in groups.iter_mut() {
        g.sort_by_key(|h| {
            let overlap = h.points.iter().filter(|p| e.contains(p)).count();
            (std::cmp::Reverse(overlap), h.key())
        });
    }
    groups.sort_by_key(|g| g.first().map(|h| h.key()));

    fn search(
        space: &Space,
        xi: &Colouring,
        e: &PointSet,
        groups: &[Vec<Line>],
        witness: &mut Vec<Line>,
    ) -> bool {
        match groups.split_first() {
            None => check_critical(space, xi, e, witness).unwrap_or(false),
            Some((group, rest)) => {
                for h in group {
                    witness.push(h.clone());
                    if search(space, xi, e, rest, witness) {
                        return true;
                    }
                    witness.pop();
                }
                search(space, xi, e, rest, witness)
            }
        }
    }

    let mut witness = full;
    if search(space, xi, e, &groups, &mut witness) {
        Some(witness)
    } else {
        None
    }
}

/// Perfect for E: all lines of `L_{q-k}(E)` have pairwise distinct colours.
pub fn is_perfect(space: &Space, xi: &Colouring, e: &PointSet) -> bool {
    let m = space.q().saturating_sub(xi.k as u64);
    let heavy = lines_meeting(space, e, m);
    let mut seen = HashSet::new();
    for l in &heavy {
        if !seen.insert(xi.colour_of(space, l)) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VeryDistinguished {
    Yes,
    No,
    /// Hue exploration hit the cap; callers fall back on `find_critical`.
    Truncated,
}

/// Exhaustively check that `xi` stays distinguished on the whole hue of E.
pub fn is_very_distinguished(
    space: &Space,
    xi: &Colouring,
    e: &PointSet,
    cap: usize,
) -> VeryDistinguished {
    let (hue, truncated) = hue_explore(space, xi, e, cap);
    for f in &hue {
        if !is_distinguished(space, xi, f) {
            return VeryDistinguished::No;
        }
    }
    if truncated {
        VeryDistinguished::Truncated
    } else {
        VeryDistinguished::Yes
    }
}

/// Default hue-exploration cap.
pub const DEFAULT_HUE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leftover {
    /// Lines outside the special lines and colour classes get colour 1.
    Deterministic,
    /// Leftover direction classes get uniform random colours.
    Randomized,
}

/// The knit construction: pick `m*k` random non-special directions,
/// partition them into k classes of m, colour a line i if it is the i-th
/// special line or its direction lies in class i. Guarantees density >= m
/// and pins each special line to its colour.
pub fn knit_colouring<R: Rng>(
    space: &Space,
    special: &[Line],
    k: u32,
    m: u64,
    rng: &mut R,
    leftover: Leftover,
) -> Result<Colouring, ColouringError> {
    assert!(k >= 1);
    let n = special.len() as u64;
    assert!(n <= k as u64, "at most k special lines");
    let mut special_keys = HashSet::new();
    for l in special {
        if !special_keys.insert(l.key()) {
            return Err(ColouringError::DuplicateSpecialLines);
        }
    }
    let num_dirs = space.num_directions();
    if num_dirs - n < m * k as u64 {
        return Err(ColouringError::NotEnoughDirections {
            available: num_dirs - n,
            needed: m * k as u64,
        });
    }
    let special_dirs: HashSet<u64> = special
        .iter()
        .map(|l| space.dir_rank(&l.direction))
        .collect();
    let mut available: Vec<u64> = (0..num_dirs).filter(|d| !special_dirs.contains(d)).collect();
    available.shuffle(rng);
    let chosen = &available[..(m * k as u64) as usize];

    let mut by_direction: Vec<u32> = match leftover {
        Leftover::Deterministic => vec![1; num_dirs as usize],
        Leftover::Randomized => (0..num_dirs).map(|_| rng.random_range(1..=k)).collect(),
    };
    for (i, block) in chosen.chunks(m as usize).enumerate() {
        for &d in block {
            by_direction[d as usize] = i as u32 + 1;
        }
    }
    let exceptions: Vec<(Line, u32)> = special
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i as u32 + 1))
        .collect();
    Ok(Colouring {
        k,
        repr: Repr::Compact {
            by_direction,
            exceptions,
            default: 1,
        },
    })
}
